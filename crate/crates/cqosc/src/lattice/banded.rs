//! Complex banded LU factorization with partial pivoting, plus a small dense
//! LU used to cross-check it. Storage follows the LAPACK band convention:
//! entry (i, j) lives at band row `kl + ku + i - j` of column `j`, with the
//! top `kl` rows reserved for pivoting fill.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<Complex64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            ldab,
            ab: vec![Complex64::ZERO; ldab * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kl(&self) -> usize {
        self.kl
    }

    pub fn ku(&self) -> usize {
        self.ku
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ldab + (self.kl + self.ku + i - j)
    }

    #[inline]
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i + self.ku >= j && j + self.kl >= i
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if self.in_band(i, j) {
            self.ab[self.idx(i, j)]
        } else {
            Complex64::ZERO
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(self.in_band(i, j), "entry ({i},{j}) outside band");
        let idx = self.idx(i, j);
        self.ab[idx] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(self.in_band(i, j), "entry ({i},{j}) outside band");
        let idx = self.idx(i, j);
        self.ab[idx] += v;
    }

    pub fn max_abs(&self) -> f64 {
        self.ab.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// y += A x
    pub fn matvec_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            let xj = x[j];
            for i in lo..=hi {
                y[i] += self.ab[self.idx(i, j)] * xj;
            }
        }
    }

    /// y += A^T x
    pub fn matvec_transpose_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            let mut acc = Complex64::ZERO;
            for i in lo..=hi {
                acc += self.ab[self.idx(i, j)] * x[i];
            }
            y[j] += acc;
        }
    }

    /// x^T A y (unconjugated bilinear form).
    pub fn bilinear(&self, x: &[Complex64], y: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::ZERO;
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            let yj = y[j];
            for i in lo..=hi {
                acc += x[i] * self.ab[self.idx(i, j)] * yj;
            }
        }
        acc
    }

    /// LU factorization with partial pivoting (gbtrf-style, unblocked).
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let scale = self.max_abs().max(1e-300);
        let mut ipiv = vec![0usize; n];
        let mut swaps = 0usize;
        for j in 0..n {
            let i_hi = (j + kl).min(n - 1);
            let mut pivot_row = j;
            let mut pivot_mag = self.ab[self.idx(j, j)].norm();
            for i in j + 1..=i_hi {
                let mag = self.ab[self.idx(i, j)].norm();
                if mag > pivot_mag {
                    pivot_mag = mag;
                    pivot_row = i;
                }
            }
            if pivot_mag < 1e-14 * scale {
                return Err(Error::SingularSystem { pivot: pivot_mag });
            }
            ipiv[j] = pivot_row;
            let k_hi = (j + kl + ku).min(n - 1);
            if pivot_row != j {
                swaps += 1;
                for k in j..=k_hi {
                    let a = self.idx(j, k);
                    let b = self.idx(pivot_row, k);
                    self.ab.swap(a, b);
                }
            }
            let inv_pivot = 1.0 / self.ab[self.idx(j, j)];
            for i in j + 1..=i_hi {
                let m = self.ab[self.idx(i, j)] * inv_pivot;
                let mi = self.idx(i, j);
                self.ab[mi] = m;
                if m != Complex64::ZERO {
                    for k in j + 1..=k_hi {
                        let upper = self.ab[self.idx(j, k)];
                        let lower = self.idx(i, k);
                        self.ab[lower] -= m * upper;
                    }
                }
            }
        }
        Ok(BandLu {
            mat: self,
            ipiv,
            swaps,
        })
    }
}

#[derive(Clone, Debug)]
pub struct BandLu {
    mat: BandMatrix,
    ipiv: Vec<usize>,
    swaps: usize,
}

impl BandLu {
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.mat.n;
        let (kl, ku) = (self.mat.kl, self.mat.ku);
        for j in 0..n {
            if self.ipiv[j] != j {
                b.swap(j, self.ipiv[j]);
            }
            let bj = b[j];
            if bj != Complex64::ZERO {
                let i_hi = (j + kl).min(n - 1);
                for i in j + 1..=i_hi {
                    b[i] -= self.mat.ab[self.mat.idx(i, j)] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.mat.ab[self.mat.idx(j, j)];
            let bj = b[j];
            let i_lo = j.saturating_sub(kl + ku);
            for i in i_lo..j {
                b[i] -= self.mat.ab[self.mat.idx(i, j)] * bj;
            }
        }
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// log det M = sum of principal logs of the pivots plus i pi per row
    /// swap; defined up to 2 pi i like any complex log.
    pub fn log_det(&self) -> Complex64 {
        let mut acc = Complex64::ZERO;
        for j in 0..self.mat.n {
            acc += self.mat.ab[self.mat.idx(j, j)].ln();
        }
        if self.swaps % 2 == 1 {
            acc += Complex64::new(0.0, std::f64::consts::PI);
        }
        acc
    }
}

/// Dense complex LU with partial pivoting. Small-system reference used by
/// tests and by matrix-level assembly checks.
#[derive(Clone, Debug)]
pub struct DenseLu {
    n: usize,
    a: Vec<Complex64>,
    ipiv: Vec<usize>,
    swaps: usize,
}

impl DenseLu {
    pub fn factor(n: usize, mut a: Vec<Complex64>) -> Result<Self> {
        assert_eq!(a.len(), n * n);
        let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.norm())).max(1e-300);
        let mut ipiv = vec![0usize; n];
        let mut swaps = 0;
        for j in 0..n {
            let mut pr = j;
            let mut pm = a[j * n + j].norm();
            for i in j + 1..n {
                let m = a[i * n + j].norm();
                if m > pm {
                    pm = m;
                    pr = i;
                }
            }
            if pm < 1e-14 * scale {
                return Err(Error::SingularSystem { pivot: pm });
            }
            ipiv[j] = pr;
            if pr != j {
                swaps += 1;
                for k in 0..n {
                    a.swap(j * n + k, pr * n + k);
                }
            }
            let inv = 1.0 / a[j * n + j];
            for i in j + 1..n {
                let m = a[i * n + j] * inv;
                a[i * n + j] = m;
                if m != Complex64::ZERO {
                    for k in j + 1..n {
                        let u = a[j * n + k];
                        a[i * n + k] -= m * u;
                    }
                }
            }
        }
        Ok(DenseLu { n, a, ipiv, swaps })
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut x = b.to_vec();
        // Full rows were swapped during factorization (multipliers travel
        // with their rows), so all interchanges must be applied to the
        // right-hand side before the triangular solves.
        for j in 0..n {
            if self.ipiv[j] != j {
                x.swap(j, self.ipiv[j]);
            }
        }
        for j in 0..n {
            let xj = x[j];
            if xj != Complex64::ZERO {
                for i in j + 1..n {
                    x[i] -= self.a[i * n + j] * xj;
                }
            }
        }
        for j in (0..n).rev() {
            x[j] /= self.a[j * n + j];
            let xj = x[j];
            for i in 0..j {
                x[i] -= self.a[i * n + j] * xj;
            }
        }
        x
    }

    pub fn log_det(&self) -> Complex64 {
        let mut acc = Complex64::ZERO;
        for j in 0..self.n {
            acc += self.a[j * self.n + j].ln();
        }
        if self.swaps % 2 == 1 {
            acc += Complex64::new(0.0, std::f64::consts::PI);
        }
        acc
    }
}
