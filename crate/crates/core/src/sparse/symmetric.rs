use nalgebra::DMatrix;

/// Dense symmetric matrix holding only its upper triangle, packed row by row.
///
/// Row `j` of the packed storage holds entries `(j, j..order)`, so the rows of
/// the upper triangle are contiguous and can be filled independently.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    order: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(order: usize) -> Self {
        SymMatrix {
            order,
            data: vec![0.0; packed_len(order)],
        }
    }

    pub fn identity(order: usize) -> Self {
        let mut out = Self::zeros(order);
        for j in 0..order {
            out.set(j, j, 1.0);
        }
        out
    }

    /// Builds from packed upper-triangle storage.
    pub fn from_packed(order: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == packed_len(order)).then_some(SymMatrix { order, data })
    }

    /// Builds from a square row-major array, reading the upper triangle only.
    pub fn from_upper_of(order: usize, full: &[f64]) -> Self {
        assert_eq!(full.len(), order * order, "expected a square array");
        let mut out = Self::zeros(order);
        for j in 0..order {
            for k in j..order {
                out.set(j, k, full[j * order + k]);
            }
        }
        out
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn packed(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn packed_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    fn offset(&self, j: usize, k: usize) -> usize {
        let (j, k) = if j <= k { (j, k) } else { (k, j) };
        debug_assert!(k < self.order);
        row_start(self.order, j) + (k - j)
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.data[self.offset(j, k)]
    }

    #[inline]
    pub fn set(&mut self, j: usize, k: usize, value: f64) {
        let at = self.offset(j, k);
        self.data[at] = value;
    }

    #[inline]
    pub fn add(&mut self, j: usize, k: usize, value: f64) {
        let at = self.offset(j, k);
        self.data[at] += value;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.order).map(|j| self.get(j, j)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, factor: f64) -> SymMatrix {
        SymMatrix {
            order: self.order,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// Entrywise sum with another matrix of the same order.
    pub fn plus(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.order, other.order);
        SymMatrix {
            order: self.order,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    /// Full square matrix, row-major.
    pub fn to_full(&self) -> Vec<f64> {
        let p = self.order;
        let mut out = vec![0.0; p * p];
        for j in 0..p {
            for k in j..p {
                let v = self.get(j, k);
                out[j * p + k] = v;
                out[k * p + j] = v;
            }
        }
        out
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.order, self.order, |j, k| self.get(j, k))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.order);
        (0..self.order)
            .map(|j| (0..self.order).map(|k| self.get(j, k) * v[k]).sum())
            .collect()
    }

    /// Computes `self * middle * self` for symmetric `self` and `middle`.
    pub fn sandwich(&self, middle: &SymMatrix) -> SymMatrix {
        let p = self.order;
        assert_eq!(middle.order, p);
        let outer = self.to_full();
        let inner = middle.to_full();
        let mut left = vec![0.0; p * p];
        for i in 0..p {
            for l in 0..p {
                let a = outer[i * p + l];
                if a == 0.0 {
                    continue;
                }
                for k in 0..p {
                    left[i * p + k] += a * inner[l * p + k];
                }
            }
        }
        let mut out = SymMatrix::zeros(p);
        for j in 0..p {
            for k in j..p {
                let s: f64 = (0..p).map(|l| left[j * p + l] * outer[l * p + k]).sum();
                out.set(j, k, s);
            }
        }
        out
    }
}

pub(crate) fn packed_len(order: usize) -> usize {
    order * (order + 1) / 2
}

/// Start offset of packed row `j`: rows `0..j` hold
/// `order + (order - 1) + ... + (order - j + 1)` entries.
pub(crate) fn row_start(order: usize, j: usize) -> usize {
    j * order - j * j.saturating_sub(1) / 2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packed_layout_is_row_major_upper() {
        let mut m = SymMatrix::zeros(3);
        let mut next = 0.0;
        for j in 0..3 {
            for k in j..3 {
                m.set(j, k, next);
                next += 1.0;
            }
        }
        assert_eq!(m.packed(), &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(m.get(2, 0), 2.0);
        assert_eq!(row_start(3, 0), 0);
        assert_eq!(row_start(3, 1), 3);
        assert_eq!(row_start(3, 2), 5);
    }

    #[test]
    fn sandwich_matches_full_products() {
        let a = SymMatrix::from_upper_of(2, &[2.0, 1.0, 1.0, 3.0]);
        let b = SymMatrix::from_upper_of(2, &[1.0, 0.5, 0.5, 4.0]);
        // a*b = [[2.5, 5], [2.5, 12.5]], (a*b)*a = [[10, 17.5], [17.5, 40]]
        let out = a.sandwich(&b);
        assert_eq!(out.to_full(), vec![10.0, 17.5, 17.5, 40.0]);
    }
}
