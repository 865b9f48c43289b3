//! Yield maximization by a globalized Newton method on MC estimates of the
//! yield, its gradient and its Hessian.
//!
//! With `Y(m) = E[1_S(m + xi)]` and `xi ~ N(0, Sigma)`:
//! `grad Y = Y Sigma^-1 (m_S - m)` and
//! `hess Y = Y Sigma^-1 (Sigma_S + d d^T - Sigma) Sigma^-1`, `d = m_S - m`,
//! where `m_S, Sigma_S` are the moments of the accepted points.

mod gradcheck;
mod newton;
mod sampled;

pub use gradcheck::{
    gradient_comparison, gradient_quality_check, gradient_trace, GradCheckReport, GradCheckRow,
    GradCheckSettings,
};
pub use newton::{adaptive_newton_mc, globalized_newton, IterationRecord, OptState, StopReason};
pub use sampled::{SampledYield, YieldSample};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonParams {
    pub beta: f64,
    pub gamma: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub q: f64,
    pub max_backsteps: usize,
    pub sigma_max: f64,
    pub n_start: usize,
    pub inc: usize,
    pub tau_g: f64,
    pub tau_x: f64,
    pub max_iter: usize,
    /// Sample size of the non-adaptive method.
    pub n_fixed: usize,
    /// Largest sample the adaptive method may grow to.
    pub n_max: usize,
}

impl Default for NewtonParams {
    fn default() -> Self {
        Self {
            beta: 0.5,
            gamma: 0.01,
            phi1: 1e-6,
            phi2: 1e-6,
            q: 0.1,
            max_backsteps: 3,
            sigma_max: 0.01,
            n_start: 100,
            inc: 1,
            tau_g: 1e-6,
            tau_x: 1e-8,
            max_iter: 200,
            n_fixed: 2500,
            n_max: 100_000,
        }
    }
}

impl NewtonParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(self.beta) || !unit(self.gamma) {
            return Err(Error::InvalidInput(
                "beta and gamma must lie in (0, 1)".into(),
            ));
        }
        if !(self.phi1 > 0.0 && self.phi2 > 0.0 && self.q > 0.0) {
            return Err(Error::InvalidInput(
                "phi1, phi2 and q must be positive".into(),
            ));
        }
        if !(self.sigma_max > 0.0) || self.n_start < 2 || self.inc == 0 || self.max_iter == 0 {
            return Err(Error::InvalidInput(
                "sample-size controls must be positive".into(),
            ));
        }
        if self.n_fixed == 0 || self.n_max < self.n_start {
            return Err(Error::InvalidInput("sample caps are inconsistent".into()));
        }
        Ok(())
    }
}

/// Moments of the accepted sample points.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMoments {
    pub mean: Vec<f64>,
    /// `None` when fewer than two points were accepted.
    pub cov: Option<DMatrix<f64>>,
    pub n_safe: usize,
    pub n: usize,
}

pub fn conditional_moments(points: &[Vec<f64>], accepted: &[bool]) -> Result<ConditionalMoments> {
    check_dim(points.len(), accepted.len())?;
    if points.is_empty() {
        return Err(Error::EmptySample);
    }
    let d = points[0].len();
    let safe: Vec<&Vec<f64>> = points
        .iter()
        .zip(accepted)
        .filter(|(_, a)| **a)
        .map(|(p, _)| p)
        .collect();
    let ns = safe.len();
    if ns == 0 {
        return Err(Error::EmptySafeSet);
    }
    let mut mean = vec![0.0; d];
    for p in &safe {
        for (m, x) in mean.iter_mut().zip(p.iter()) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= ns as f64;
    }
    let cov = (ns > 1).then(|| {
        let mut c = DMatrix::zeros(d, d);
        for p in &safe {
            let r = DVector::from_iterator(d, p.iter().zip(&mean).map(|(x, m)| x - m));
            c += &r * r.transpose();
        }
        c / (ns - 1) as f64
    });
    Ok(ConditionalMoments {
        mean,
        cov,
        n_safe: ns,
        n: points.len(),
    })
}

/// `Y Sigma^-1 (m_S - m)` for diagonal `Sigma`; zero for an empty safe set.
pub fn yield_gradient(
    y: f64,
    mean: &[f64],
    var: &[f64],
    moments: Option<&ConditionalMoments>,
) -> Vec<f64> {
    match moments {
        Some(m) if m.n_safe > 0 => mean
            .iter()
            .zip(var)
            .zip(&m.mean)
            .map(|((x, v), s)| y * (s - x) / v)
            .collect(),
        _ => vec![0.0; mean.len()],
    }
}

/// `Y Sigma^-1 (Sigma_S + d d^T - Sigma) Sigma^-1`; `None` without `Sigma_S`.
pub fn yield_hessian(
    y: f64,
    mean: &[f64],
    var: &[f64],
    moments: &ConditionalMoments,
) -> Option<DMatrix<f64>> {
    let cs = moments.cov.as_ref()?;
    let n = mean.len();
    let d: Vec<f64> = moments.mean.iter().zip(mean).map(|(s, x)| s - x).collect();
    Some(DMatrix::from_fn(n, n, |i, j| {
        let inner = cs[(i, j)] + d[i] * d[j] - if i == j { var[i] } else { 0.0 };
        y * inner / (var[i] * var[j])
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    Newton,
    Gradient,
    None,
}

impl StepKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepKind::Newton => "newton",
            StepKind::Gradient => "gradient",
            StepKind::None => "none",
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Newton step `hess d = -grad` if it passes the ascent angle test
/// `grad^T d >= min(phi1, phi2 |d|^q) |d|^2`, else `+grad`.
pub fn newton_direction(
    grad: &[f64],
    hess: Option<&DMatrix<f64>>,
    params: &NewtonParams,
) -> (Vec<f64>, StepKind) {
    let fallback = || (grad.to_vec(), StepKind::Gradient);
    let Some(h) = hess else {
        return fallback();
    };
    let rhs = DVector::from_iterator(grad.len(), grad.iter().map(|g| -g));
    let Some(d) = h.clone().lu().solve(&rhs) else {
        return fallback();
    };
    let d: Vec<f64> = d.iter().copied().collect();
    if d.iter().any(|v| !v.is_finite()) {
        return fallback();
    }
    let nd = norm(&d);
    if nd == 0.0 {
        return fallback();
    }
    if dot(grad, &d) >= params.phi1.min(params.phi2 * nd.powf(params.q)) * nd * nd {
        (d, StepKind::Newton)
    } else {
        fallback()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmijoOutcome {
    pub sigma: f64,
    pub yield_value: f64,
    /// Sufficient increase held for `sigma`.
    pub satisfied: bool,
    pub trials: usize,
}

/// Largest `sigma` in `beta^0..=beta^max_backsteps` with
/// `Y(m + sigma s) - Y(m) >= sigma gamma grad^T s`; the last trial otherwise.
pub fn armijo_step(
    eval: &mut dyn FnMut(&[f64]) -> Result<f64>,
    mean: &[f64],
    y0: f64,
    s: &[f64],
    grad: &[f64],
    params: &NewtonParams,
) -> Result<ArmijoOutcome> {
    let slope = dot(grad, s);
    let mut sigma = 1.0;
    let mut last = y0;
    for i in 0..=params.max_backsteps {
        let trial: Vec<f64> = mean.iter().zip(s).map(|(m, d)| m + sigma * d).collect();
        last = eval(&trial)?;
        if last - y0 >= sigma * params.gamma * slope {
            return Ok(ArmijoOutcome {
                sigma,
                yield_value: last,
                satisfied: true,
                trials: i + 1,
            });
        }
        if i < params.max_backsteps {
            sigma *= params.beta;
        }
    }
    Ok(ArmijoOutcome {
        sigma,
        yield_value: last,
        satisfied: false,
        trials: params.max_backsteps + 1,
    })
}
