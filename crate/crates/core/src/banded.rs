//! Symmetric banded matrices with an in-place LDL^T factorization.

use crate::error::{Error, Result};

/// Symmetric matrix stored as its lower band, row by row.
#[derive(Debug, Clone)]
pub struct SymmetricBand {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymmetricBand {
    /// `n x n` zero matrix with half bandwidth `bw` (entries with `|i - j| > bw` are zero).
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + self.bw + j - i
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Adds `v` to entry `(i, j)` (and thereby `(j, i)`).
    ///
    /// Panics if the entry lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        assert!(i - j <= self.bw, "entry ({i}, {j}) outside bandwidth {}", self.bw);
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        assert!(i - j <= self.bw, "entry ({i}, {j}) outside bandwidth {}", self.bw);
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let diag = self.data[self.idx(i, i)];
            y[i] += diag * x[i];
            for j in lo..i {
                let a = self.data[self.idx(i, j)];
                y[i] += a * x[j];
                y[j] += a * x[i];
            }
        }
        y
    }

    /// Factorizes `A = L D L^T` without pivoting.
    ///
    /// Works for any symmetric matrix whose leading minors are nonzero; the
    /// number of negative pivots equals the number of negative eigenvalues.
    pub fn factor(mut self) -> Result<LdlFactor> {
        let (n, bw) = (self.n, self.bw);
        let stride = bw + 1;
        let mut t = vec![0.0; bw];
        let mut negative = 0;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let row = i * stride + bw - i;
            for j in lo..i {
                let jrow = j * stride + bw - j;
                let klo = lo.max(j.saturating_sub(bw));
                let s = self.data[row + j] - dot(&t[klo - lo..j - lo], &self.data[jrow + klo..jrow + j]);
                t[j - lo] = s;
                self.data[row + j] = s / self.data[jrow + j];
            }
            let a_ii = self.data[row + i];
            let d = a_ii - dot(&t[..i - lo], &self.data[row + lo..row + i]);
            if !d.is_finite() || d.abs() <= 1e-14 * a_ii.abs() {
                return Err(Error::Singular { row: i });
            }
            if d < 0.0 {
                negative += 1;
            }
            self.data[row + i] = d;
        }
        Ok(LdlFactor {
            band: self,
            negative_pivots: negative,
        })
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators let the compiler vectorize the reduction
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    acc[0] + acc[1] + acc[2] + acc[3] + tail
}

#[derive(Debug, Clone)]
pub struct LdlFactor {
    band: SymmetricBand,
    negative_pivots: usize,
}

impl LdlFactor {
    /// Number of negative eigenvalues of the factored matrix.
    pub fn negative_pivots(&self) -> usize {
        self.negative_pivots
    }

    pub fn is_positive_definite(&self) -> bool {
        self.negative_pivots == 0
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let SymmetricBand { n, bw, ref data } = self.band;
        assert_eq!(b.len(), n);
        let stride = bw + 1;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let row = i * stride + bw - i;
            let mut s = b[i];
            for k in lo..i {
                s -= data[row + k] * b[k];
            }
            b[i] = s;
        }
        for i in 0..n {
            b[i] /= data[i * stride + bw];
        }
        for i in (0..n).rev() {
            let lo = i.saturating_sub(bw);
            let row = i * stride + bw - i;
            let bi = b[i];
            for k in lo..i {
                b[k] -= data[row + k] * bi;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
