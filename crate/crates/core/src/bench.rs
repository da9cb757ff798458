//! Timing and memory comparison of the sparse fit against the dense baseline.

use std::io::{self, Write};
use std::time::Instant;

use crate::datagen::{mix64, simulate, SimulationSpec};
use crate::oracle::naive_fit;
use crate::solver::{fit, FitOptions};
use crate::sparse::default_workers;

pub const VALUE_BYTES: u64 = 8;
/// Row indices are stored as `u32`.
pub const INDEX_BYTES: u64 = 4;
/// Column pointers are stored as `usize`.
pub const POINTER_BYTES: u64 = 8;
/// `p x p` arrays held by the sparse path: the Gram and its inverse.
pub const GRAM_COPIES: u64 = 2;

pub const CSV_HEADER: &str = "n,p,density,repeats,time_efficient_ms,time_naive_ms,speedup,\
mem_model_efficient,mem_model_naive,mem_ratio,peak_rss_efficient,peak_rss_naive,status";

pub const LONG_CSV_HEADER: &str = "panel,n,p,density,solver,value";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryModel {
    pub efficient_bytes: u64,
    pub naive_bytes: u64,
}

impl MemoryModel {
    /// naive / efficient.
    pub fn ratio(&self) -> f64 {
        self.naive_bytes as f64 / self.efficient_bytes as f64
    }
}

/// Analytic storage for both solvers.
///
/// Sparse path: the stored entries (value + row index), the column pointers,
/// three length-`n` vectors (`y`, `w`, residuals) and `GRAM_COPIES` dense
/// `p x p` arrays. Dense path: the `n x p` centered matrix plus `y` and `w`.
pub fn memory_model(n: usize, p: usize, density: f64) -> MemoryModel {
    let (n, p) = (n as u64, p as u64);
    let nnz = (density * n as f64 * p as f64).round() as u64;
    let efficient = nnz * (VALUE_BYTES + INDEX_BYTES)
        + (p + 1) * POINTER_BYTES
        + 3 * n * VALUE_BYTES
        + GRAM_COPIES * p * p * VALUE_BYTES;
    let naive = n * p * VALUE_BYTES + 2 * n * VALUE_BYTES;
    MemoryModel {
        efficient_bytes: efficient,
        naive_bytes: naive,
    }
}

/// Heap high-water mark supplied by the caller (typically a counting global
/// allocator installed by the binary).
pub trait MemoryProbe {
    fn reset_peak(&self);
    fn peak_bytes(&self) -> u64;
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Ok,
    Skipped,
    Failed(String),
}

impl CellStatus {
    pub fn label(&self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::Skipped => "skipped",
            CellStatus::Failed(_) => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub n: usize,
    pub p: usize,
    pub density: f64,
    pub repeats: usize,
    pub time_efficient_ms: Option<f64>,
    pub time_naive_ms: Option<f64>,
    pub memory: MemoryModel,
    pub peak_efficient_bytes: Option<u64>,
    pub peak_naive_bytes: Option<u64>,
    pub status: CellStatus,
    /// Coefficients from the first timed efficient run, for determinism checks.
    pub beta: Vec<f64>,
}

impl BenchRecord {
    pub fn speedup(&self) -> Option<f64> {
        Some(self.time_naive_ms? / self.time_efficient_ms?)
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub grid: Vec<(usize, f64)>,
    pub p: usize,
    pub seed: u64,
    pub repeats: usize,
    /// Cells whose modelled dense footprint exceeds this are not run.
    pub max_naive_bytes: u64,
    pub noise_sd: f64,
    pub options: FitOptions,
}

impl BenchConfig {
    pub fn new(grid: Vec<(usize, f64)>, p: usize, seed: u64, repeats: usize) -> Self {
        BenchConfig {
            grid,
            p,
            seed,
            repeats,
            max_naive_bytes: 1 << 30,
            noise_sd: 1.0,
            options: FitOptions {
                center: true,
                intercept_col: Some(0),
                ..FitOptions::default()
            },
        }
    }

    pub fn cross(n_list: &[usize], densities: &[f64], p: usize, seed: u64, repeats: usize) -> Self {
        let grid = n_list
            .iter()
            .flat_map(|&n| densities.iter().map(move |&d| (n, d)))
            .collect();
        Self::new(grid, p, seed, repeats)
    }
}

/// Per-cell seed; depends only on the base seed and the cell's `(n, density)`.
pub fn cell_seed(seed: u64, n: usize, density: f64) -> u64 {
    mix64(seed ^ mix64(n as u64) ^ mix64(density.to_bits().rotate_left(17)))
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

/// Runs every cell sequentially: one warmup per solver (which also checks that
/// both agree to 1e-8 on β), then `repeats` timed runs each.
pub fn run_benchmark(config: &BenchConfig, probe: Option<&dyn MemoryProbe>) -> Vec<BenchRecord> {
    let repeats = config.repeats.max(1);
    let mut records = Vec::with_capacity(config.grid.len());
    for &(n, density) in &config.grid {
        let memory = memory_model(n, config.p, density);
        let mut record = BenchRecord {
            n,
            p: config.p,
            density,
            repeats,
            time_efficient_ms: None,
            time_naive_ms: None,
            memory,
            peak_efficient_bytes: None,
            peak_naive_bytes: None,
            status: CellStatus::Skipped,
            beta: Vec::new(),
        };
        if memory.naive_bytes > config.max_naive_bytes {
            records.push(record);
            continue;
        }
        record.status = run_cell(config, n, density, repeats, probe, &mut record)
            .err()
            .map_or(CellStatus::Ok, CellStatus::Failed);
        records.push(record);
    }
    records
}

fn run_cell(
    config: &BenchConfig,
    n: usize,
    density: f64,
    repeats: usize,
    probe: Option<&dyn MemoryProbe>,
    record: &mut BenchRecord,
) -> Result<(), String> {
    let spec = SimulationSpec {
        n,
        p: config.p,
        density,
        seed: cell_seed(config.seed, n, density),
        with_intercept: config.options.intercept_col == Some(0),
        noise_sd: config.noise_sd,
    };
    let sim = simulate(&spec).map_err(|e| e.to_string())?;
    let (m, y, w) = (&sim.design, &sim.y, &sim.w);
    let options = &config.options;

    if let Some(probe) = probe {
        probe.reset_peak();
    }
    let warm_efficient = fit(m, y, w, options).map_err(|e| format!("sparse fit: {e}"))?;
    record.peak_efficient_bytes = probe.map(|p| p.peak_bytes());
    if let Some(probe) = probe {
        probe.reset_peak();
    }
    let warm_naive = naive_fit(m, y, w, options).map_err(|e| format!("dense fit: {e}"))?;
    record.peak_naive_bytes = probe.map(|p| p.peak_bytes());

    let diff = max_rel_diff(&warm_efficient.beta_transformed, &warm_naive.beta_transformed);
    if diff.is_nan() || diff > 1e-8 {
        return Err(format!("solvers disagree on beta (relative difference {diff:e})"));
    }
    drop(warm_naive);

    let mut efficient_ms = Vec::with_capacity(repeats);
    let mut naive_ms = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        let r = fit(m, y, w, options).map_err(|e| format!("sparse fit: {e}"))?;
        efficient_ms.push(start.elapsed().as_secs_f64() * 1e3);
        let same = r
            .beta_transformed
            .iter()
            .zip(&warm_efficient.beta_transformed)
            .all(|(a, b)| a.to_bits() == b.to_bits());
        if !same {
            return Err("sparse fit is not bitwise reproducible across repeats".into());
        }

        let start = Instant::now();
        let r = naive_fit(m, y, w, options).map_err(|e| format!("dense fit: {e}"))?;
        naive_ms.push(start.elapsed().as_secs_f64() * 1e3);
        drop(r);
    }
    record.time_efficient_ms = Some(median(&mut efficient_ms));
    record.time_naive_ms = Some(median(&mut naive_ms));
    record.beta = warm_efficient.beta_transformed;
    Ok(())
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Wide CSV, one row per cell, preceded by `#` lines documenting the memory
/// model constants and run context.
pub fn write_csv<W: Write>(records: &[BenchRecord], out: &mut W) -> io::Result<()> {
    writeln!(
        out,
        "# memory model: value_bytes={VALUE_BYTES} index_bytes={INDEX_BYTES} \
         pointer_bytes={POINTER_BYTES} gram_copies={GRAM_COPIES}"
    )?;
    writeln!(
        out,
        "# efficient = nnz*(value+index) + (p+1)*pointer + 3n*value + gram_copies*p^2*value; \
         naive = n*p*value + 2n*value"
    )?;
    writeln!(out, "# gram workers: {}", default_workers())?;
    writeln!(
        out,
        "# reference point (not measured here): about 35x at n=1e7 and density 0.01"
    )?;
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{:.6},{},{},{}",
            r.n,
            r.p,
            r.density,
            r.repeats,
            opt(r.time_efficient_ms.map(|t| format!("{t:.3}"))),
            opt(r.time_naive_ms.map(|t| format!("{t:.3}"))),
            opt(r.speedup().map(|s| format!("{s:.3}"))),
            r.memory.efficient_bytes,
            r.memory.naive_bytes,
            r.memory.ratio(),
            opt(r.peak_efficient_bytes),
            opt(r.peak_naive_bytes),
            r.status.label(),
        )?;
    }
    Ok(())
}

/// Long-format CSV for plotting: `time_ms` and `memory_bytes` panels, one row
/// per (cell, solver). `memory_bytes` uses the analytic model;
/// `peak_heap_bytes` rows appear when a probe was supplied.
pub fn write_long_csv<W: Write>(records: &[BenchRecord], out: &mut W) -> io::Result<()> {
    writeln!(out, "{LONG_CSV_HEADER}")?;
    for r in records {
        let mut row = |panel: &str, solver: &str, value: String| {
            writeln!(out, "{panel},{},{},{},{solver},{value}", r.n, r.p, r.density)
        };
        if let (Some(e), Some(d)) = (r.time_efficient_ms, r.time_naive_ms) {
            row("time_ms", "efficient", format!("{e:.3}"))?;
            row("time_ms", "naive", format!("{d:.3}"))?;
        }
        row("memory_bytes", "efficient", r.memory.efficient_bytes.to_string())?;
        row("memory_bytes", "naive", r.memory.naive_bytes.to_string())?;
        if let (Some(e), Some(d)) = (r.peak_efficient_bytes, r.peak_naive_bytes) {
            row("peak_heap_bytes", "efficient", e.to_string())?;
            row("peak_heap_bytes", "naive", d.to_string())?;
        }
    }
    Ok(())
}
