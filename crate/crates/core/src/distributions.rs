//! Truncated, diagonal-covariance normal design parameters and reproducible
//! offset samples.
//!
//! Offsets are drawn once about zero and shifted by the current mean
//! (common random numbers), so a Monte Carlo yield at a fixed seed is a
//! deterministic function of the mean. Each entry `(i, j)` of a sample is a
//! pure function of `(seed, i, j)`: growing a sample never changes its prefix.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{check_dim, Error, Result};

/// Mean, standard deviation and symmetric truncation offset per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertainInput {
    mean: Vec<f64>,
    std: Vec<f64>,
    trunc: Vec<f64>,
}

impl UncertainInput {
    pub fn new(mean: Vec<f64>, std: Vec<f64>, trunc: Vec<f64>) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::InvalidInput("empty parameter vector".into()));
        }
        check_dim(mean.len(), std.len())?;
        check_dim(mean.len(), trunc.len())?;
        if let Some(j) = std.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidInput(format!("std[{j}] must be positive")));
        }
        if let Some(j) = trunc.iter().position(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidInput(format!("trunc[{j}] must be positive")));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidInput("mean must be finite".into()));
        }
        Ok(Self { mean, std, trunc })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn trunc(&self) -> &[f64] {
        &self.trunc
    }

    /// Diagonal of the covariance matrix.
    pub fn variances(&self) -> Vec<f64> {
        self.std.iter().map(|s| s * s).collect()
    }

    /// Same distribution, different mean.
    pub fn with_mean(&self, mean: Vec<f64>) -> Result<Self> {
        Self::new(mean, self.std.clone(), self.trunc.clone())
    }
}

/// `n x dim` zero-mean truncated-normal offsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    seed: u64,
    dim: usize,
    offsets: Vec<f64>,
}

impl SampleSet {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.offsets.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.offsets[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.offsets.chunks_exact(self.dim.max(1))
    }

    /// Grows the set to `n` rows; existing rows are untouched.
    pub fn extend_to(&mut self, input: &UncertainInput, n: usize) -> Result<()> {
        check_dim(self.dim, input.dim())?;
        let have = self.len();
        if n <= have {
            return Ok(());
        }
        let sampler = TruncatedStd::new(input);
        self.offsets.reserve((n - have) * self.dim);
        for i in have..n {
            sampler.fill_row(self.seed, i as u64, &mut self.offsets);
        }
        Ok(())
    }

    /// The first `n` rows as a new set.
    pub fn prefix(&self, n: usize) -> SampleSet {
        let n = n.min(self.len());
        SampleSet {
            seed: self.seed,
            dim: self.dim,
            offsets: self.offsets[..n * self.dim].to_vec(),
        }
    }
}

/// Draws `n` offset rows for `input` from the stream identified by `seed`.
pub fn draw_offsets(input: &UncertainInput, n: usize, seed: u64) -> SampleSet {
    let mut set = SampleSet {
        seed,
        dim: input.dim(),
        offsets: Vec::new(),
    };
    set.extend_to(input, n)
        .expect("dimension is taken from the input");
    set
}

/// `p_i = mean + offsets[i]` for every row.
pub fn realize(sample: &SampleSet, mean: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_dim(sample.dim(), mean.len())?;
    Ok(sample
        .rows()
        .map(|xi| mean.iter().zip(xi).map(|(m, x)| m + x).collect())
        .collect())
}

/// Single realization `mean + offsets[i]`.
pub fn realize_row(sample: &SampleSet, i: usize, mean: &[f64]) -> Vec<f64> {
    mean.iter().zip(sample.row(i)).map(|(m, x)| m + x).collect()
}

/// Density of the untruncated normal `N(mean, diag(std^2))` at `p`.
pub fn pdf(input: &UncertainInput, p: &[f64]) -> Result<f64> {
    check_dim(input.dim(), p.len())?;
    let mut quad = 0.0;
    let mut log_norm = 0.0;
    for ((x, m), s) in p.iter().zip(&input.mean).zip(&input.std) {
        let z = (x - m) / s;
        quad += z * z;
        log_norm += s.ln();
    }
    let n = input.dim() as f64;
    Ok((-0.5 * quad - log_norm - 0.5 * n * (2.0 * std::f64::consts::PI).ln()).exp())
}

/// Standard normal cumulative distribution function.
pub fn std_normal_cdf(x: f64) -> f64 {
    standard_normal().cdf(x)
}

/// Inverse of [`std_normal_cdf`].
pub fn std_normal_quantile(u: f64) -> f64 {
    standard_normal().inverse_cdf(u)
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Per-component inverse-CDF sampler for `N(0, std^2)` restricted to `|x| <= trunc`.
struct TruncatedStd {
    std: Vec<f64>,
    bound: Vec<f64>,
    lower_mass: Vec<f64>,
}

impl TruncatedStd {
    fn new(input: &UncertainInput) -> Self {
        let bound: Vec<f64> = input
            .trunc
            .iter()
            .zip(&input.std)
            .map(|(t, s)| t / s)
            .collect();
        let lower_mass = bound.iter().map(|a| std_normal_cdf(-a)).collect();
        Self {
            std: input.std.clone(),
            bound,
            lower_mass,
        }
    }

    fn fill_row(&self, seed: u64, row: u64, out: &mut Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(row);
        for j in 0..self.std.len() {
            let u = open_unit(rng.next_u64());
            out.push(self.std[j] * self.quantile(j, u));
        }
    }

    /// Standardized truncated quantile. The upper half is mapped through the
    /// symmetric lower tail to keep precision near `1 - Phi(-a)`.
    fn quantile(&self, j: usize, u: f64) -> f64 {
        let lo = self.lower_mass[j];
        let width = 1.0 - 2.0 * lo;
        let a = self.bound[j];
        let z = if u <= 0.5 {
            std_normal_quantile(lo + u * width)
        } else {
            -std_normal_quantile(lo + (1.0 - u) * width)
        };
        z.clamp(-a, a)
    }
}

/// Maps 64 random bits to `(0, 1)`.
fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}
