#![allow(dead_code)]

use centered_ols::datagen::CounterStream;
use centered_ols::{FitOptions, SparseDesign, SymMatrix};

/// Seeded source of test draws; a different stream per purpose keeps
/// instances stable when one draw count changes.
pub struct Draws {
    stream: CounterStream,
    counter: u64,
}

impl Draws {
    pub fn new(seed: u64) -> Self {
        Draws {
            stream: CounterStream::new(seed, 0xC0FFEE),
            counter: 0,
        }
    }

    pub fn uniform(&mut self) -> f64 {
        self.counter += 1;
        self.stream.uniform(self.counter)
    }

    pub fn normal(&mut self) -> f64 {
        self.counter += 1;
        self.stream.normal(self.counter)
    }

    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        lo + ((hi - lo + 1) as f64 * self.uniform()) as usize
    }
}

pub struct Instance {
    pub m: SparseDesign,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub options: FitOptions,
    pub density: f64,
}

/// Random instance: n in [max(20, p + 5), 500], p in [1, 25], density in
/// [0.02, 0.6], w ~ U(0, 2), flag combination and intercept chosen by
/// `variant` (0..8). Columns that come out empty receive one planted entry so
/// that scaling is defined.
pub fn random_instance(seed: u64, variant: usize) -> Instance {
    let mut d = Draws::new(seed);
    let center = variant & 1 == 1;
    let scale = variant & 2 == 2;
    let with_intercept = variant & 4 == 4;
    let p = d.range(if with_intercept { 2 } else { 1 }, 25);
    let n = d.range((p + 5).max(20), 500);
    let density = 0.02 + 0.58 * d.uniform();

    let mut triplets = Vec::new();
    let first = usize::from(with_intercept);
    if with_intercept {
        triplets.extend((0..n).map(|i| (i, 0, 1.0)));
    }
    for j in first..p {
        let before = triplets.len();
        for i in 0..n {
            if d.uniform() < density {
                triplets.push((i, j, d.normal() * 3.0 + 0.5));
            }
        }
        if triplets.len() == before {
            triplets.push((d.range(0, n - 1), j, 1.0 + d.uniform()));
        }
    }
    let m = SparseDesign::from_triplets(n, p, &triplets).unwrap();
    let w: Vec<f64> = (0..n).map(|_| 2.0 * d.uniform()).collect();
    let beta: Vec<f64> = (0..p).map(|_| d.normal()).collect();
    let mut y = m.mul_vec(&beta).unwrap();
    for yi in &mut y {
        *yi += d.normal();
    }
    Instance {
        m,
        y,
        w,
        options: FitOptions {
            center,
            scale,
            intercept_col: with_intercept.then_some(0),
            ..FitOptions::default()
        },
        density,
    }
}

/// ‖a − b‖₂ / ‖b‖₂, or the absolute norm when `b` vanishes.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if norm > 0.0 {
        diff / norm
    } else {
        diff
    }
}

pub fn sym_rel_err(a: &SymMatrix, b: &SymMatrix) -> f64 {
    rel_err(&a.to_full(), &b.to_full())
}

pub fn scalar_rel_err(a: f64, b: f64) -> f64 {
    if b != 0.0 {
        ((a - b) / b).abs()
    } else {
        a.abs()
    }
}

/// Triplets of an `n x p` matrix whose cells are independently stored with
/// probability `density`.
pub fn random_triplets(d: &mut Draws, n: usize, p: usize, density: f64) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for j in 0..p {
        for i in 0..n {
            if d.uniform() < density {
                out.push((i, j, d.normal() * 2.0));
            }
        }
    }
    out
}

/// Dense row-major copy with plain loops, independent of the library.
pub fn dense_of(n: usize, p: usize, triplets: &[(usize, usize, f64)]) -> Vec<f64> {
    let mut a = vec![0.0; n * p];
    for &(i, j, v) in triplets {
        a[i * p + j] += v;
    }
    a
}
