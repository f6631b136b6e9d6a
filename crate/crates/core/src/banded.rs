//! Band storage and LU factorization with partial pivoting.

use crate::error::{Error, Result};

/// Relative pivot threshold below which a matrix is reported singular.
pub const PIVOT_RTOL: f64 = 1e-14;

/// Square matrix with `kl` sub- and `ku` superdiagonals.
///
/// Storage is `(kl + ku + 1) x n` column-major: column `j` holds `a[i][j]`
/// for `i` in `j - ku ..= j + kl`, at row offset `ku + i - j`.
#[derive(Clone, Debug, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Result<Self> {
        if n == 0 || (n > 1 && (kl >= n || ku >= n)) {
            return Err(Error::InvalidArgument(format!(
                "band widths kl={kl}, ku={ku} invalid for order {n}"
            )));
        }
        Ok(Self { n, kl, ku, data: vec![0.0; (kl + ku + 1) * n] })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0, 0).expect("order must be positive");
        m.data.fill(1.0);
        m
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    pub fn band_data(&self) -> &[f64] {
        &self.data
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i + self.ku >= j && i <= j + self.kl
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        j * (self.kl + self.ku + 1) + self.ku + i - j
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.slot(i, j)]
        } else {
            0.0
        }
    }

    /// Panics when `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band kl={} ku={}", self.kl, self.ku);
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band kl={} ku={}", self.kl, self.ku);
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn from_dense(a: &[Vec<f64>], kl: usize, ku: usize) -> Result<Self> {
        let n = a.len();
        let mut m = Self::zeros(n, kl, ku)?;
        for (i, row) in a.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimMismatch { expected: n, got: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                if m.in_band(i, j) {
                    m.set(i, j, v);
                } else if v != 0.0 {
                    return Err(Error::InvalidArgument(format!("entry ({i}, {j}) outside band")));
                }
            }
        }
        Ok(m)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            let xj = x[j];
            for i in lo..=hi {
                y[i] += self.data[self.slot(i, j)] * xj;
            }
        }
        y
    }

    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|j| {
                let lo = j.saturating_sub(self.ku);
                let hi = (j + self.kl).min(self.n - 1);
                (lo..=hi).map(|i| self.data[self.slot(i, j)] * x[i]).sum()
            })
            .collect()
    }

    /// LU factorization with partial pivoting. Row interchanges widen the
    /// upper band to `kl + ku`, so the factor keeps `kl` extra superdiagonals.
    pub fn factor(&self) -> Result<BandedLu> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; ldab * n];
        for j in 0..n {
            let src = &self.data[j * (kl + ku + 1)..(j + 1) * (kl + ku + 1)];
            ab[j * ldab + kl..(j + 1) * ldab].copy_from_slice(src);
        }
        let threshold = PIVOT_RTOL * self.max_abs();
        let idx = |i: usize, j: usize| j * ldab + kv + i - j;
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        let mut mult = vec![0.0; kl];
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = idx(j, j);
            let mut jp = 0;
            let mut best = ab[col].abs();
            for i in 1..=km {
                let v = ab[col + i].abs();
                if v > best {
                    best = v;
                    jp = i;
                }
            }
            ipiv[j] = j + jp;
            if !(best > threshold) {
                return Err(Error::SingularJacobian { column: j, pivot: ab[col + jp] });
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    ab.swap(idx(j, c), idx(j + jp, c));
                }
            }
            let pivot = ab[col];
            for i in 1..=km {
                ab[col + i] /= pivot;
            }
            mult[..km].copy_from_slice(&ab[col + 1..col + 1 + km]);
            for c in j + 1..=ju {
                let t = ab[idx(j, c)];
                if t != 0.0 {
                    let start = idx(j + 1, c);
                    for (a, l) in ab[start..start + km].iter_mut().zip(&mult[..km]) {
                        *a -= l * t;
                    }
                }
            }
        }
        Ok(BandedLu { n, kl, ku, ab, ipiv })
    }

    /// Solves `M x = rhs` by factoring and substituting once.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.factor()?.solve(rhs)
    }
}

/// LU factors of a banded matrix in LAPACK `gbtrf` layout.
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(Error::DimMismatch { expected: self.n, got: rhs.len() });
        }
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut x = rhs.to_vec();
        // Forward: apply the row interchanges and unit-lower multipliers.
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                x.swap(j, p);
            }
            let km = kl.min(n - 1 - j);
            let xj = x[j];
            if xj != 0.0 {
                let col = j * ldab + kv;
                for i in 1..=km {
                    x[j + i] -= self.ab[col + i] * xj;
                }
            }
        }
        // Backward: U has kl + ku superdiagonals.
        for j in (0..n).rev() {
            let col = j * ldab + kv;
            x[j] /= self.ab[col];
            let xj = x[j];
            let lo = j.saturating_sub(kv);
            for i in lo..j {
                x[i] -= self.ab[col - (j - i)] * xj;
            }
        }
        Ok(x)
    }
}
