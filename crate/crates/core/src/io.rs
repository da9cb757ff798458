//! Single-column CSV vectors and the JSON model file.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceKind;
use crate::error::FormatError;
use crate::moments::StandardizationPlan;
use crate::solver::{FitResult, ResidualWeighting};
use crate::sparse::SymMatrix;

pub const MODEL_FORMAT_VERSION: u32 = 1;

pub fn read_vector_path(path: &Path) -> Result<Vec<f64>, FormatError> {
    let name = path.display().to_string();
    let file = File::open(path).map_err(|e| FormatError::io(&name, e))?;
    read_vector(BufReader::new(file), &name)
}

/// One value per line. A first line that does not parse as a number is taken
/// as a header; blank lines are skipped.
pub fn read_vector<R: BufRead>(reader: R, source_name: &str) -> Result<Vec<f64>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| FormatError::io(source_name, e))?;
        let field = line.trim().trim_end_matches(',').trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            Ok(_) => return Err(FormatError::parse(source_name, i + 1, "non-finite value")),
            Err(_) if i == 0 => {}
            Err(e) => {
                return Err(FormatError::parse(
                    source_name,
                    i + 1,
                    format!("cannot parse '{field}' as a number: {e}"),
                ))
            }
        }
    }
    Ok(out)
}

pub fn write_vector<W: Write>(header: &str, values: &[f64], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{header}")?;
    for v in values {
        writeln!(out, "{v}")?;
    }
    Ok(())
}

pub fn write_vector_path(path: &Path, header: &str, values: &[f64]) -> Result<(), FormatError> {
    let name = path.display().to_string();
    let file = File::create(path).map_err(|e| FormatError::io(&name, e))?;
    let mut out = BufWriter::new(file);
    write_vector(header, values, &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| FormatError::io(&name, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub matrix: Option<String>,
    pub response: Option<String>,
    pub weights: Option<String>,
    pub seed: Option<u64>,
    pub created: String,
}

/// Persisted fit. Numbers are written in the shortest form that parses back
/// to the identical `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub p: usize,
    pub n_obs: usize,
    pub rank: usize,
    pub plan: StandardizationPlan,
    pub beta_transformed: Vec<f64>,
    pub beta_original: Option<Vec<f64>>,
    pub k_hat_sq: f64,
    pub residual_weighting: ResidualWeighting,
    pub covariance_kind: CovarianceKind,
    /// Upper triangle, packed row by row.
    pub covariance: Option<Vec<f64>>,
    pub provenance: Provenance,
}

impl ModelFile {
    pub fn from_fit(fit: &FitResult, residual_weighting: ResidualWeighting, provenance: Provenance) -> Self {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            p: fit.beta_transformed.len(),
            n_obs: fit.n_obs,
            rank: fit.rank,
            plan: fit.plan.clone(),
            beta_transformed: fit.beta_transformed.clone(),
            beta_original: fit.beta_original.clone(),
            k_hat_sq: fit.k_hat_sq,
            residual_weighting,
            covariance_kind: fit.covariance_kind,
            covariance: fit.covariance.as_ref().map(|c| c.packed().to_vec()),
            provenance,
        }
    }

    pub fn covariance_matrix(&self) -> Option<SymMatrix> {
        self.covariance
            .clone()
            .and_then(|c| SymMatrix::from_packed(self.p, c))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, source_name: &str) -> Result<Self, FormatError> {
        let model: ModelFile = serde_json::from_str(text).map_err(|e| {
            FormatError::parse(source_name, e.line(), e.to_string())
        })?;
        model.check(source_name)?;
        Ok(model)
    }

    fn check(&self, source_name: &str) -> Result<(), FormatError> {
        let fail = |message: String| {
            Err(FormatError::Model {
                source_name: source_name.to_string(),
                message,
            })
        };
        if self.format_version != MODEL_FORMAT_VERSION {
            return fail(format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                self.format_version
            ));
        }
        let p = self.p;
        let lens = [
            ("plan.means", self.plan.means.len()),
            ("plan.stddevs", self.plan.stddevs.len()),
            ("plan.scale", self.plan.scale.len()),
            ("beta_transformed", self.beta_transformed.len()),
        ];
        for (field, len) in lens {
            if len != p {
                return fail(format!("{field} has {len} entries, expected {p}"));
            }
        }
        if let Some(b) = &self.beta_original {
            if b.len() != p {
                return fail(format!("beta_original has {} entries, expected {p}", b.len()));
            }
        }
        if let Some(c) = &self.covariance {
            if c.len() != p * (p + 1) / 2 {
                return fail(format!("covariance has {} entries, expected {}", c.len(), p * (p + 1) / 2));
            }
        }
        Ok(())
    }

    pub fn write_path(&self, path: &Path) -> Result<(), FormatError> {
        fs::write(path, self.to_json()).map_err(|e| FormatError::io(&path.display().to_string(), e))
    }

    pub fn read_path(path: &Path) -> Result<Self, FormatError> {
        let name = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|e| FormatError::io(&name, e))?;
        Self::from_json(&text, &name)
    }
}
