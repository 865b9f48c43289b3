use serde::{Deserialize, Serialize};

use super::{
    armijo_step, conditional_moments, newton_direction, norm, yield_gradient, yield_hessian,
    NewtonParams, SampledYield, StepKind, YieldSample,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    GradientTolerance,
    /// Step shorter than the step tolerance.
    StepTolerance,
    /// No trial step increased the yield.
    NoAscent,
    EmptySafeSet,
    IterationCap,
    SampleCap,
}

impl StopReason {
    fn is_stagnation(&self) -> bool {
        matches!(
            self,
            StopReason::GradientTolerance | StopReason::StepTolerance | StopReason::NoAscent
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub mean: Vec<f64>,
    pub n_mc: usize,
    pub yield_value: f64,
    pub sigma_y: f64,
    /// Cumulative weighted FE solves.
    pub effort: f64,
    /// Cumulative classified sample points.
    pub point_evaluations: usize,
    pub step_kind: StepKind,
    pub step_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptState {
    pub mean: Vec<f64>,
    pub yield_value: f64,
    pub sigma_y: f64,
    pub n: usize,
    pub iterations: usize,
    pub yield_evaluations: usize,
    pub point_evaluations: usize,
    pub effort: f64,
    pub reason: StopReason,
    pub converged: bool,
    pub history: Vec<IterationRecord>,
}

struct Run<'a> {
    sy: &'a mut SampledYield,
    params: &'a NewtonParams,
    history: Vec<IterationRecord>,
    iterations: usize,
}

impl Run<'_> {
    fn log(&mut self, ys: &YieldSample, kind: StepKind, step: f64) {
        self.history.push(IterationRecord {
            iteration: self.iterations,
            mean: ys.mean.clone(),
            n_mc: ys.n,
            yield_value: ys.yield_value,
            sigma_y: ys.std,
            effort: self.sy.effort(),
            point_evaluations: self.sy.point_evaluations(),
            step_kind: kind,
            step_size: step,
        });
    }

    /// Globalized Newton at the current sample size.
    fn newton(&mut self, p0: &[f64]) -> Result<(YieldSample, StopReason)> {
        let var = self.sy.variances();
        let mut ys = self.sy.evaluate(p0)?;
        loop {
            if self.iterations >= self.params.max_iter {
                self.log(&ys, StepKind::None, 0.0);
                return Ok((ys, StopReason::IterationCap));
            }
            let pts = ys.points(self.sy.offsets());
            let moments = match conditional_moments(&pts, &ys.accepted) {
                Ok(m) => m,
                Err(Error::EmptySafeSet) => {
                    self.log(&ys, StepKind::None, 0.0);
                    return Ok((ys, StopReason::EmptySafeSet));
                }
                Err(e) => return Err(e),
            };
            let g = yield_gradient(ys.yield_value, &ys.mean, &var, Some(&moments));
            if norm(&g) <= self.params.tau_g {
                self.log(&ys, StepKind::None, 0.0);
                return Ok((ys, StopReason::GradientTolerance));
            }
            let h = yield_hessian(ys.yield_value, &ys.mean, &var, &moments);
            let (s, kind) = newton_direction(&g, h.as_ref(), self.params);
            let sy = &mut *self.sy;
            let arm = armijo_step(
                &mut |x| sy.evaluate(x).map(|r| r.yield_value),
                &ys.mean,
                ys.yield_value,
                &s,
                &g,
                self.params,
            )?;
            if !arm.satisfied && arm.yield_value <= ys.yield_value {
                self.log(&ys, StepKind::None, 0.0);
                return Ok((ys, StopReason::NoAscent));
            }
            self.log(&ys, kind, arm.sigma);
            self.iterations += 1;
            let next: Vec<f64> = ys
                .mean
                .iter()
                .zip(&s)
                .map(|(m, d)| m + arm.sigma * d)
                .collect();
            let step = arm.sigma * norm(&s);
            ys = self.sy.evaluate(&next)?;
            if step <= self.params.tau_x {
                self.log(&ys, StepKind::None, 0.0);
                return Ok((ys, StopReason::StepTolerance));
            }
        }
    }

    fn finish(self, ys: YieldSample, reason: StopReason, converged: bool) -> OptState {
        OptState {
            mean: ys.mean,
            yield_value: ys.yield_value,
            sigma_y: ys.std,
            n: ys.n,
            iterations: self.iterations,
            yield_evaluations: self.sy.yield_evaluations(),
            point_evaluations: self.sy.point_evaluations(),
            effort: self.sy.effort(),
            reason,
            converged,
            history: self.history,
        }
    }
}

/// Newton on a fixed sample of `params.n_fixed` points.
pub fn globalized_newton(
    sy: &mut SampledYield,
    p0: &[f64],
    params: &NewtonParams,
) -> Result<OptState> {
    params.validate()?;
    sy.set_n(params.n_fixed)?;
    let mut run = Run {
        sy,
        params,
        history: Vec::new(),
        iterations: 0,
    };
    let (ys, reason) = run.newton(p0)?;
    Ok(run.finish(ys, reason, reason.is_stagnation()))
}

/// Newton on a growing sample: whenever Newton stagnates with
/// `sigma_Y > sigma_max`, the sample grows by `inc * n_start` until the
/// estimate is accurate enough or moved by at least `sigma_max`.
pub fn adaptive_newton_mc(
    sy: &mut SampledYield,
    p0: &[f64],
    params: &NewtonParams,
) -> Result<OptState> {
    params.validate()?;
    sy.set_n(params.n_start)?;
    let mut run = Run {
        sy,
        params,
        history: Vec::new(),
        iterations: 0,
    };
    let mut p = p0.to_vec();
    let mut empty_before = false;
    loop {
        let (ys, reason) = run.newton(&p)?;
        p = ys.mean.clone();
        if reason == StopReason::IterationCap {
            return Ok(run.finish(ys, reason, false));
        }
        if reason == StopReason::EmptySafeSet {
            if empty_before {
                return Ok(run.finish(ys, reason, false));
            }
            empty_before = true;
        } else {
            empty_before = false;
            if ys.std <= params.sigma_max {
                return Ok(run.finish(ys, reason, true));
            }
        }
        let y_old = ys.yield_value;
        loop {
            let n = run.sy.n() + params.inc * params.n_start;
            if n > params.n_max {
                return Ok(run.finish(ys, StopReason::SampleCap, false));
            }
            run.sy.set_n(n)?;
            let grown = run.sy.evaluate(&p)?;
            if grown.std <= params.sigma_max
                || (grown.yield_value - y_old).abs() >= params.sigma_max
            {
                break;
            }
        }
    }
}
