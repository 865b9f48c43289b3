//! Complex banded matrices with an LU factorization using partial pivoting.
//!
//! Storage follows the LAPACK band layout: column `j` keeps rows
//! `j - ku - kl ..= j + kl`, the extra `kl` super-diagonals hold pivoting
//! fill-in.

#![allow(clippy::needless_range_loop)]

use num_complex::Complex64;

use crate::error::{Error, Result};

type C64 = Complex64;

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<C64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ab: vec![C64::new(0.0, 0.0); ld * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn ld(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i + self.ku + self.kl >= j && i <= j + self.kl);
        j * self.ld() + (self.kl + self.ku + i - j)
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i + self.ku >= j && i <= j + self.kl
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        if self.in_band(i, j) {
            self.ab[self.slot(i, j)]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    /// Adds `v` to entry `(i, j)`; panics outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: C64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let s = self.slot(i, j);
        self.ab[s] += v;
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![C64::new(0.0, 0.0); self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for (i, yi) in y.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *yi += self.ab[self.slot(i, j)] * x[j];
            }
        }
        y
    }

    pub fn lu(&self) -> Result<BandLu> {
        let mut f = self.clone();
        let n = f.n;
        let kl = f.kl;
        let kuf = f.ku + f.kl;
        let mut piv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut p = 0;
            let mut best = f.ab[f.slot(j, j)].norm();
            for i in 1..=km {
                let v = f.ab[f.slot(j + i, j)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[j] = j + p;
            if best == 0.0 || !best.is_finite() {
                return Err(Error::SingularSystem { column: j });
            }
            ju = ju.max((j + f.ku + p).min(n - 1));
            if p != 0 {
                for c in j..=ju {
                    let a = f.slot(j, c);
                    let b = f.slot(j + p, c);
                    f.ab.swap(a, b);
                }
            }
            let inv = 1.0 / f.ab[f.slot(j, j)];
            for i in 1..=km {
                let s = f.slot(j + i, j);
                f.ab[s] *= inv;
            }
            for c in j + 1..=ju {
                let t = f.ab[f.slot(j, c)];
                if t == C64::new(0.0, 0.0) {
                    continue;
                }
                for i in 1..=km {
                    let l = f.ab[f.slot(j + i, j)];
                    let s = f.slot(j + i, c);
                    f.ab[s] -= l * t;
                }
            }
        }
        debug_assert!(kuf >= f.ku);
        Ok(BandLu { f, piv })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    f: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn dim(&self) -> usize {
        self.f.n
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let f = &self.f;
        let n = f.n;
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for j in 0..n {
            x.swap(j, self.piv[j]);
            let km = f.kl.min(n - 1 - j);
            let xj = x[j];
            for i in 1..=km {
                x[j + i] -= f.ab[f.slot(j + i, j)] * xj;
            }
        }
        let kuf = f.ku + f.kl;
        for j in (0..n).rev() {
            x[j] /= f.ab[f.slot(j, j)];
            let xj = x[j];
            for i in j.saturating_sub(kuf)..j {
                x[i] -= f.ab[f.slot(i, j)] * xj;
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn dense(a: &BandMatrix) -> Vec<Vec<C64>> {
        (0..a.dim())
            .map(|i| (0..a.dim()).map(|j| a.get(i, j)).collect())
            .collect()
    }

    #[test]
    fn solves_with_pivoting() {
        // zero leading diagonal forces a row swap
        let n = 9;
        let mut a = BandMatrix::zeros(n, 2, 2);
        for i in 0..n {
            for j in i.saturating_sub(2)..(i + 3).min(n) {
                let v = if i == j && i % 3 == 0 {
                    c(0.0, 0.0)
                } else {
                    c(
                        1.0 + (i * 7 + j * 3) as f64 % 5.0,
                        (i as f64 - j as f64) * 0.3,
                    )
                };
                a.add(i, j, v);
            }
        }
        let x_true: Vec<C64> = (0..n)
            .map(|k| c(k as f64 * 0.5 - 1.0, 0.25 * k as f64))
            .collect();
        let b = a.matvec(&x_true);
        let x = a.lu().unwrap().solve(&b);
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).norm() < 1e-12);
        }
        let d = dense(&a);
        for i in 0..n {
            let row: C64 = (0..n).map(|j| d[i][j] * x[j]).sum();
            assert!((row - b[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_is_reported() {
        let mut a = BandMatrix::zeros(3, 1, 1);
        a.add(0, 0, c(1.0, 0.0));
        a.add(0, 1, c(1.0, 0.0));
        a.add(1, 0, c(1.0, 0.0));
        a.add(1, 1, c(1.0, 0.0));
        a.add(2, 2, c(1.0, 0.0));
        assert!(matches!(a.lu(), Err(Error::SingularSystem { .. })));
    }
}
