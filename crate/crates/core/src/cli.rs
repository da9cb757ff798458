//! Command-line surface: `fit`, `predict`, `simulate` and `bench`.
//!
//! Exit codes: 0 on success, 1 when the numerical pipeline rejects the input,
//! 2 for usage errors and unreadable or malformed files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{run_benchmark, write_csv, write_long_csv, BenchConfig, MemoryProbe};
use crate::covariance::CovarianceKind;
use crate::datagen::{simulate, SimulationSpec};
use crate::error::{Error, FormatError};
use crate::io::{read_vector_path, write_vector_path, ModelFile, Provenance};
use crate::solver::{fit, predict, predict_transformed, FitOptions, ResidualWeighting};
use crate::sparse::{market, THREADS_ENV};

#[derive(Debug, Parser)]
#[command(
    name = "centered-ols",
    version,
    about = "Centered and scaled weighted least squares on sparse design matrices",
    after_help = format!(
        "Column indices on the command line are 0-based (--intercept-col 0 is the first \
         column); Matrix Market files use 1-based indices on disk.\n\
         The Gram kernel's worker count is read from {THREADS_ENV} (default: all cores)."
    )
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model and write it as JSON.
    Fit(FitArgs),
    /// Predict from a saved model on a raw (uncentered) design matrix.
    Predict(PredictArgs),
    /// Write a synthetic sparse regression problem.
    Simulate(SimulateArgs),
    /// Time the sparse fit against the dense baseline over a grid.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Design matrix in Matrix Market coordinate format.
    #[arg(long)]
    pub matrix: PathBuf,
    /// Response, one value per line.
    #[arg(long)]
    pub response: PathBuf,
    /// Observation weights, one value per line (default: all ones).
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Subtract weighted column means.
    #[arg(long)]
    pub center: bool,
    /// Divide columns by their weighted standard deviations.
    #[arg(long)]
    pub scale: bool,
    /// 0-based index of the all-ones intercept column, exempt from centering and scaling.
    #[arg(long)]
    pub intercept_col: Option<usize>,
    /// Parameter covariance: none, homoskedastic or hc.
    #[arg(long, default_value = "homoskedastic")]
    pub cov: CovarianceKind,
    /// Use the unweighted residual sum of squares for k̂².
    #[arg(long)]
    pub unweighted_variance: bool,
    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub density: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Make column 0 an all-ones intercept.
    #[arg(long)]
    pub intercept: bool,
    #[arg(long, default_value_t = 1.0)]
    pub noise_sd: f64,
    /// Writes <prefix>.mtx, <prefix>.y.csv, <prefix>.w.csv and <prefix>.beta.csv.
    #[arg(long)]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "100000,1000000")]
    pub n_list: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1,0.15,0.2,0.25")]
    pub density_list: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub p: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    /// Skip cells whose dense baseline would need more than this many bytes.
    #[arg(long, default_value_t = 1 << 30)]
    pub max_naive_bytes: u64,
    /// Wide CSV, one row per cell.
    #[arg(long)]
    pub out: PathBuf,
    /// Long-format CSV for plotting (default: <out> with a .long.csv suffix).
    #[arg(long)]
    pub long_out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Pipeline(#[from] Error),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Pipeline(_) => 1,
            CliError::Format(_) | CliError::Usage(_) => 2,
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Format(FormatError::Io {
        source_name: path.display().to_string(),
        error: e,
    })
}

pub fn run(cli: Cli, stdout: &mut dyn Write, probe: Option<&dyn MemoryProbe>) -> Result<(), CliError> {
    match cli.command {
        Command::Fit(args) => cmd_fit(&args, stdout),
        Command::Predict(args) => cmd_predict(&args, stdout),
        Command::Simulate(args) => cmd_simulate(&args, stdout),
        Command::Bench(args) => cmd_bench(&args, stdout, probe),
    }
}

pub fn cmd_fit(args: &FitArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let m = market::read_path(&args.matrix)?;
    let y = read_vector_path(&args.response)?;
    let w = match &args.weights {
        Some(path) => read_vector_path(path)?,
        None => vec![1.0; m.n_rows()],
    };
    let residual_weighting = if args.unweighted_variance {
        ResidualWeighting::Unweighted
    } else {
        ResidualWeighting::Weighted
    };
    let options = FitOptions {
        center: args.center,
        scale: args.scale,
        intercept_col: args.intercept_col,
        covariance: args.cov,
        residual_weighting,
        ..FitOptions::default()
    };
    let result = fit(&m, &y, &w, &options)?;

    let provenance = Provenance {
        matrix: Some(args.matrix.display().to_string()),
        response: Some(args.response.display().to_string()),
        weights: args.weights.as_ref().map(|p| p.display().to_string()),
        seed: None,
        created: chrono::Utc::now().to_rfc3339(),
    };
    let model = ModelFile::from_fit(&result, residual_weighting, provenance);
    model.write_path(&args.out)?;

    let std_errors: Option<Vec<f64>> = result
        .covariance
        .as_ref()
        .map(|c| c.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect());
    let out = &mut *stdout;
    let w_err = io_err(Path::new("<stdout>"));
    (|| -> std::io::Result<()> {
        writeln!(out, "{:>6}  {:>22}  {:>22}  {:>22}", "column", "beta_transformed", "beta_original", "std_error")?;
        for j in 0..result.beta_transformed.len() {
            let orig = result
                .beta_original
                .as_ref()
                .map_or_else(|| "-".to_string(), |b| format!("{:.15e}", b[j]));
            let se = std_errors
                .as_ref()
                .map_or_else(|| "-".to_string(), |s| format!("{:.15e}", s[j]));
            writeln!(out, "{j:>6}  {:>22.15e}  {orig:>22}  {se:>22}", result.beta_transformed[j])?;
        }
        writeln!(out, "k_hat_sq  {:.17e}", result.k_hat_sq)?;
        writeln!(
            out,
            "n={} p={} rank={} dof={} solver={:?} covariance={}",
            result.n_obs,
            result.beta_transformed.len(),
            result.rank,
            result.dof,
            result.factorization,
            result.covariance_kind
        )
    })()
    .map_err(w_err)
}

pub fn cmd_predict(args: &PredictArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let model = ModelFile::read_path(&args.model)?;
    let m = market::read_path(&args.matrix)?;
    if m.n_cols() != model.p {
        return Err(Error::DimensionMismatch {
            context: "matrix column count against the model's p",
            expected: model.p,
            found: m.n_cols(),
        }
        .into());
    }
    let y_hat = match &model.beta_original {
        Some(beta) => predict(&m, beta)?,
        None => predict_transformed(&m, &model.beta_transformed, &model.plan)?,
    };
    write_vector_path(&args.out, "y_hat", &y_hat)?;
    writeln!(stdout, "wrote {} predictions to {}", y_hat.len(), args.out.display())
        .map_err(io_err(Path::new("<stdout>")))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn cmd_simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let spec = SimulationSpec {
        n: args.n,
        p: args.p,
        density: args.density,
        seed: args.seed,
        with_intercept: args.intercept,
        noise_sd: args.noise_sd,
    };
    let sim = simulate(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    let mtx = with_suffix(&args.out_prefix, ".mtx");
    market::write_path(&sim.design, &mtx)?;
    write_vector_path(&with_suffix(&args.out_prefix, ".y.csv"), "y", &sim.y)?;
    write_vector_path(&with_suffix(&args.out_prefix, ".w.csv"), "w", &sim.w)?;
    write_vector_path(&with_suffix(&args.out_prefix, ".beta.csv"), "beta", &sim.beta_true)?;
    writeln!(
        stdout,
        "wrote {}x{} matrix with {} entries to {}",
        sim.design.n_rows(),
        sim.design.n_cols(),
        sim.design.nnz(),
        mtx.display()
    )
    .map_err(io_err(Path::new("<stdout>")))
}

pub fn cmd_bench(
    args: &BenchArgs,
    stdout: &mut dyn Write,
    probe: Option<&dyn MemoryProbe>,
) -> Result<(), CliError> {
    if args.n_list.is_empty() || args.density_list.is_empty() {
        return Err(CliError::Usage("bench grid is empty".into()));
    }
    if let Some(d) = args.density_list.iter().find(|d| !(**d > 0.0 && **d <= 1.0)) {
        return Err(CliError::Usage(format!("density {d} is outside (0, 1]")));
    }
    if args.p < 2 {
        return Err(CliError::Usage("bench needs p >= 2 (column 0 is the intercept)".into()));
    }
    let mut config = BenchConfig::cross(&args.n_list, &args.density_list, args.p, args.seed, args.repeats);
    config.max_naive_bytes = args.max_naive_bytes;
    let records = run_benchmark(&config, probe);

    let write = |path: &Path, f: &dyn Fn(&mut BufWriter<File>) -> std::io::Result<()>| {
        let file = File::create(path).map_err(io_err(path))?;
        let mut out = BufWriter::new(file);
        f(&mut out).and_then(|_| out.flush()).map_err(io_err(path))
    };
    write(&args.out, &|out| write_csv(&records, out))?;
    let long = args
        .long_out
        .clone()
        .unwrap_or_else(|| args.out.with_extension("long.csv"));
    write(&long, &|out| write_long_csv(&records, out))?;

    let out = &mut *stdout;
    (|| -> std::io::Result<()> {
        for r in &records {
            let speedup = r.speedup().map_or_else(|| "-".into(), |s| format!("{s:.2}x"));
            writeln!(
                out,
                "n={:<9} density={:<5} speedup={:<9} mem_ratio={:.2} {}",
                r.n,
                r.density,
                speedup,
                r.memory.ratio(),
                match &r.status {
                    crate::bench::CellStatus::Failed(msg) => format!("failed: {msg}"),
                    s => s.label().to_string(),
                }
            )?;
        }
        Ok(())
    })()
    .map_err(io_err(Path::new("<stdout>")))
}
