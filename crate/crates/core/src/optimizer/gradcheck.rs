//! Analytic yield gradient against central differences on common random
//! numbers.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{conditional_moments, SampledYield};
use crate::distributions::UncertainInput;
use crate::error::{Error, Result};
use crate::estimator::{EffortWeights, YieldEstimator};
use crate::optimizer::yield_gradient;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckRow {
    pub n: usize,
    pub component: usize,
    pub analytic: f64,
    pub fd: f64,
    pub diff: f64,
    /// Standard error of the difference quotient under common random numbers.
    pub fd_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub rows: Vec<GradCheckRow>,
    pub passed: bool,
    pub n_final: usize,
}

impl GradCheckReport {
    pub fn max_diff_at(&self, n: usize) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.n == n)
            .map(|r| r.diff)
            .reduce(f64::max)
    }
}

fn compare(sy: &mut SampledYield, mean: &[f64], delta: f64) -> Result<Vec<GradCheckRow>> {
    let n = sy.n();
    let center = sy.evaluate(mean)?;
    let analytic = match conditional_moments(&center.points(sy.offsets()), &center.accepted) {
        Ok(m) => yield_gradient(center.yield_value, mean, &sy.variances(), Some(&m)),
        Err(Error::EmptySafeSet) => vec![0.0; mean.len()],
        Err(e) => return Err(e),
    };
    let mut rows = Vec::with_capacity(mean.len());
    for (k, &g) in analytic.iter().enumerate() {
        let mut hi = mean.to_vec();
        let mut lo = mean.to_vec();
        hi[k] += delta;
        lo[k] -= delta;
        let yh = sy.evaluate(&hi)?;
        let yl = sy.evaluate(&lo)?;
        let fd = (yh.yield_value - yl.yield_value) / (2.0 * delta);
        let changed = yh
            .accepted
            .iter()
            .zip(&yl.accepted)
            .filter(|(a, b)| a != b)
            .count();
        rows.push(GradCheckRow {
            n,
            component: k,
            analytic: g,
            fd,
            diff: (g - fd).abs(),
            fd_se: (changed.max(1) as f64).sqrt() / (2.0 * delta * n as f64),
        });
    }
    Ok(rows)
}

/// One comparison of the analytic gradient with central differences of
/// step `delta`, all on the same `n` offsets.
pub fn gradient_comparison(
    estimator: Arc<dyn YieldEstimator>,
    input: &UncertainInput,
    mean: &[f64],
    delta: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<GradCheckRow>> {
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!(
            "step must be positive, got {delta}"
        )));
    }
    let mut sy = SampledYield::new(estimator, input.clone(), seed, n, EffortWeights::default())?;
    compare(&mut sy, mean, delta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradCheckSettings {
    pub delta: f64,
    pub eta: f64,
    /// Increasing sample sizes; entries above `cap` are skipped.
    pub schedule: Vec<usize>,
    pub cap: usize,
    pub seed: u64,
}

impl Default for GradCheckSettings {
    fn default() -> Self {
        Self {
            delta: 1e-3,
            eta: 0.05,
            schedule: vec![1000, 10_000, 100_000],
            cap: 100_000,
            seed: 1,
        }
    }
}

impl GradCheckSettings {
    fn steps(&self) -> Result<Vec<usize>> {
        if !(self.delta > 0.0) || !(self.eta > 0.0) {
            return Err(Error::InvalidInput(
                "step and tolerance must be positive".into(),
            ));
        }
        let steps: Vec<usize> = self
            .schedule
            .iter()
            .copied()
            .filter(|&n| n > 0 && n <= self.cap)
            .collect();
        if steps.is_empty() {
            return Err(Error::InvalidInput("empty sample-size schedule".into()));
        }
        Ok(steps)
    }
}

/// Walks the schedule on one growing sample; larger samples reuse the
/// offsets of smaller ones. Stops early once `stop` holds for a batch.
fn walk(
    estimator: Arc<dyn YieldEstimator>,
    input: &UncertainInput,
    mean: &[f64],
    settings: &GradCheckSettings,
    stop: impl Fn(&[GradCheckRow]) -> bool,
) -> Result<GradCheckReport> {
    let steps = settings.steps()?;
    let mut sy = SampledYield::new(
        estimator,
        input.clone(),
        settings.seed,
        steps[0],
        EffortWeights::default(),
    )?;
    let mut rows = Vec::new();
    for &n in &steps {
        sy.set_n(n)?;
        let batch = compare(&mut sy, mean, settings.delta)?;
        let done = stop(&batch);
        rows.extend(batch);
        if done {
            return Ok(GradCheckReport {
                rows,
                passed: true,
                n_final: n,
            });
        }
    }
    Ok(GradCheckReport {
        rows,
        passed: false,
        n_final: steps[steps.len() - 1],
    })
}

/// Increases the sample size along the schedule until every component
/// differs by at most `eta`; `passed` is false if the cap came first.
pub fn gradient_quality_check(
    estimator: Arc<dyn YieldEstimator>,
    input: &UncertainInput,
    mean: &[f64],
    settings: &GradCheckSettings,
) -> Result<GradCheckReport> {
    let eta = settings.eta;
    walk(estimator, input, mean, settings, |b| {
        b.iter().all(|r| r.diff <= eta)
    })
}

/// Comparisons at every scheduled sample size, without stopping early.
pub fn gradient_trace(
    estimator: Arc<dyn YieldEstimator>,
    input: &UncertainInput,
    mean: &[f64],
    settings: &GradCheckSettings,
) -> Result<Vec<GradCheckRow>> {
    Ok(walk(estimator, input, mean, settings, |_| false)?.rows)
}
