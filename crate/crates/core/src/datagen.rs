//! Seeded synthetic sparse regression problems.
//!
//! # Random stream
//!
//! All draws come from a counter-based SplitMix64 stream so that other
//! implementations can reproduce them exactly:
//!
//! * `key(seed, stream) = mix(seed ^ mix(stream + 1))`
//! * draw `c` of a stream is `mix(key + (c + 1) * 0x9E3779B97F4A7C15)` (wrapping)
//! * `mix(z)`: `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
//!   z = (z ^ (z >> 27)) * 0x94D049BB133111EB; z ^ (z >> 31)`
//! * a uniform in `[0, 1)` is `(draw >> 11) * 2^-53`
//! * a standard normal at counter `c` is Box-Muller on uniforms `u1 = 1 - U(2c)`
//!   and `u2 = U(2c + 1)`: `sqrt(-2 ln u1) * cos(2π u2)`
//!
//! Streams: 0 = cell inclusion (counter `i * p + j`), 1 = cell values (normal
//! counter `i * p + j`), 2 = true coefficients (normal counter `j`), 3 = noise
//! (normal counter `i`).

use crate::error::{Error, Result};
use crate::sparse::SparseDesign;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

const STREAM_MASK: u64 = 0;
const STREAM_VALUE: u64 = 1;
const STREAM_BETA: u64 = 2;
const STREAM_NOISE: u64 = 3;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One stream of the generator; every draw is a pure function of its counter.
#[derive(Debug, Clone, Copy)]
pub struct CounterStream {
    key: u64,
}

impl CounterStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        CounterStream {
            key: mix64(seed ^ mix64(stream.wrapping_add(1))),
        }
    }

    #[inline]
    pub fn bits(&self, counter: u64) -> u64 {
        mix64(self.key.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    #[inline]
    pub fn uniform(&self, counter: u64) -> f64 {
        (self.bits(counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn normal(&self, counter: u64) -> f64 {
        let u1 = 1.0 - self.uniform(2 * counter);
        let u2 = self.uniform(2 * counter + 1);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSpec {
    pub n: usize,
    pub p: usize,
    pub density: f64,
    pub seed: u64,
    pub with_intercept: bool,
    pub noise_sd: f64,
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.p == 0 || (self.with_intercept && self.p < 2) {
            return bad(format!(
                "p = {} is too small{}",
                self.p,
                if self.with_intercept { " for a model with an intercept" } else { "" }
            ));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return bad(format!("density {} is outside (0, 1]", self.density));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad(format!("noise_sd {} must be finite and nonnegative", self.noise_sd));
        }
        if self.n > u32::MAX as usize {
            return bad(format!("n = {} exceeds the 32-bit row index range", self.n));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub design: SparseDesign,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub beta_true: Vec<f64>,
}

/// Draws a design whose non-intercept cells are independently nonzero with
/// probability `density` (values standard normal), coefficients standard
/// normal, and `y = Mβ + noise_sd · N(0, 1)`. Weights are all one.
pub fn simulate(spec: &SimulationSpec) -> Result<Simulation> {
    spec.validate()?;
    let (n, p) = (spec.n, spec.p);
    let mask = CounterStream::new(spec.seed, STREAM_MASK);
    let values = CounterStream::new(spec.seed, STREAM_VALUE);
    let first_random = usize::from(spec.with_intercept);

    let mut col_ptr = Vec::with_capacity(p + 1);
    let expected = (spec.density * (n * (p - first_random)) as f64 * 1.01) as usize + n;
    let mut row_idx = Vec::with_capacity(expected);
    let mut vals = Vec::with_capacity(expected);
    col_ptr.push(0);
    for j in 0..p {
        if j < first_random {
            row_idx.extend(0..n as u32);
            vals.resize(vals.len() + n, 1.0);
        } else {
            for i in 0..n {
                let cell = (i * p + j) as u64;
                if mask.uniform(cell) < spec.density {
                    row_idx.push(i as u32);
                    vals.push(values.normal(cell));
                }
            }
        }
        col_ptr.push(row_idx.len());
    }
    let design = SparseDesign::from_csc(n, p, col_ptr, row_idx, vals)?;

    let beta_stream = CounterStream::new(spec.seed, STREAM_BETA);
    let beta_true: Vec<f64> = (0..p as u64).map(|j| beta_stream.normal(j)).collect();
    let mut y = design.mul_vec(&beta_true)?;
    if spec.noise_sd > 0.0 {
        let noise = CounterStream::new(spec.seed, STREAM_NOISE);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += spec.noise_sd * noise.normal(i as u64);
        }
    }
    Ok(Simulation {
        design,
        y,
        w: vec![1.0; n],
        beta_true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, p: usize, density: f64, seed: u64) -> SimulationSpec {
        SimulationSpec {
            n,
            p,
            density,
            seed,
            with_intercept: false,
            noise_sd: 1.0,
        }
    }

    #[test]
    fn splitmix_reference_values() {
        // First outputs of the canonical SplitMix64 sequence seeded with 0.
        assert_eq!(mix64(GOLDEN), 0xE220_A839_7B1D_CDAF);
        assert_eq!(mix64(GOLDEN.wrapping_mul(2)), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn full_density_stores_every_cell() {
        let sim = simulate(&spec(4, 2, 1.0, 11)).unwrap();
        assert_eq!(sim.design.nnz(), 8);
    }

    #[test]
    fn tiny_density_is_empty() {
        let sim = simulate(&spec(100, 10, 1e-9, 3)).unwrap();
        assert_eq!(sim.design.nnz(), 0);
    }

    #[test]
    fn intercept_column_is_ones() {
        let mut s = spec(30, 3, 0.2, 5);
        s.with_intercept = true;
        let sim = simulate(&s).unwrap();
        let (rows, vals) = sim.design.column(0);
        assert_eq!(rows.len(), 30);
        assert!(vals.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn same_seed_same_bits() {
        let a = simulate(&spec(200, 7, 0.3, 42)).unwrap();
        let b = simulate(&spec(200, 7, 0.3, 42)).unwrap();
        assert_eq!(a, b);
        let c = simulate(&spec(200, 7, 0.3, 43)).unwrap();
        assert_ne!(a.design, c.design);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(simulate(&spec(0, 2, 0.5, 1)).is_err());
        assert!(simulate(&spec(10, 0, 0.5, 1)).is_err());
        assert!(simulate(&spec(10, 2, 0.0, 1)).is_err());
        assert!(simulate(&spec(10, 2, 1.5, 1)).is_err());
        let mut s = spec(10, 1, 0.5, 1);
        s.with_intercept = true;
        assert!(simulate(&s).is_err());
        let mut s = spec(10, 2, 0.5, 1);
        s.noise_sd = -1.0;
        assert!(simulate(&s).is_err());
    }

    #[test]
    fn normals_have_unit_moments() {
        let s = CounterStream::new(9, 1);
        let draws: Vec<f64> = (0..200_000).map(|c| s.normal(c)).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / draws.len() as f64;
        // 5 standard errors
        assert!(mean.abs() < 5.0 / (draws.len() as f64).sqrt(), "{mean}");
        assert!((var - 1.0).abs() < 5.0 * (2.0 / draws.len() as f64).sqrt(), "{var}");
    }
}
