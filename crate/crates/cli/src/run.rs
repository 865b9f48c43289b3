//! The four experiments. Each returns its results in memory; writing
//! files is left to [`crate::report`].

use std::sync::Arc;

use yieldopt_core::distributions::{draw_offsets, realize};
use yieldopt_core::estimator::{
    calibrate_safety, estimate, Calibration, EstimatorContext, EstimatorRegistry, YieldEstimate,
    YieldEstimator,
};
use yieldopt_core::model::{FidelityModel, WaveguideModel};
use yieldopt_core::optimizer::{
    adaptive_newton_mc, globalized_newton, gradient_quality_check, gradient_trace, GradCheckReport,
    GradCheckRow, GradCheckSettings, OptState, SampledYield,
};
use yieldopt_core::surrogate::{build_adaptive, BuildOptions, SparseSurrogate};

use crate::{CliError, RunConfig};

pub fn build_model(cfg: &RunConfig) -> Result<Arc<dyn FidelityModel>, CliError> {
    let freqs = cfg.spec.perf_spec()?.frequencies;
    match cfg.problem.waveguide() {
        Some(setup) => {
            let nominal = cfg.problem.input()?.mean().to_vec();
            Ok(Arc::new(WaveguideModel::new(setup, freqs, &nominal)?))
        }
        None => Ok(Arc::new(cfg.problem.manufactured_model(freqs)?)),
    }
}

fn needs_surrogate(name: &str) -> bool {
    matches!(name, "sc" | "hybrid")
}

fn build_surrogate(
    cfg: &RunConfig,
    model: &dyn FidelityModel,
) -> Result<Arc<SparseSurrogate>, CliError> {
    let opts = BuildOptions {
        budget: cfg.surrogate.budget,
        fe_error: cfg.surrogate.fe_error,
        ..Default::default()
    };
    Ok(Arc::new(build_adaptive(
        model,
        &cfg.problem.input()?,
        &opts,
    )?))
}

fn context(
    cfg: &RunConfig,
    model: Arc<dyn FidelityModel>,
    surrogate: Option<Arc<SparseSurrogate>>,
    safety: f64,
) -> Result<EstimatorContext, CliError> {
    Ok(EstimatorContext {
        model,
        spec: cfg.spec.perf_spec()?,
        surrogate,
        safety,
    })
}

fn single_estimator(cfg: &RunConfig, name: &str) -> Result<Arc<dyn YieldEstimator>, CliError> {
    let model = build_model(cfg)?;
    let sur = if needs_surrogate(name) {
        Some(build_surrogate(cfg, model.as_ref())?)
    } else {
        None
    };
    let ctx = context(cfg, model, sur, cfg.estimate.safety)?;
    Ok(Arc::from(EstimatorRegistry::default().create(name, &ctx)?))
}

#[derive(Debug, Clone)]
pub struct MethodRow {
    pub method: String,
    pub estimate: YieldEstimate,
    /// Relative error against the closed-form yield.
    pub err_rel: Option<f64>,
    /// Points classified differently from the finest-level estimator.
    pub mismatch_vs_fine: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub rows: Vec<MethodRow>,
    pub reference_yield: Option<f64>,
    pub safety: f64,
    pub calibration: Option<Calibration>,
    pub surrogate: Option<Arc<SparseSurrogate>>,
}

impl EstimateReport {
    pub fn row(&self, method: &str) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.method == method)
    }
}

/// Every configured estimator on one shared sample.
pub fn run_estimate(cfg: &RunConfig) -> Result<EstimateReport, CliError> {
    let model = build_model(cfg)?;
    let input = cfg.problem.input()?;
    let methods = &cfg.estimate.methods;
    let want_sur = cfg.estimate.calibrate || methods.iter().any(|m| needs_surrogate(m));
    let sur = want_sur
        .then(|| build_surrogate(cfg, model.as_ref()))
        .transpose()?;
    let calibration = match (&sur, cfg.estimate.calibrate) {
        (Some(s), true) => Some(calibrate_safety(
            s,
            model.as_ref(),
            &input,
            cfg.calibrate.points,
            cfg.calibrate.seed,
        )?),
        _ => None,
    };
    let safety = calibration
        .as_ref()
        .map_or(cfg.estimate.safety, |c| c.safety);
    let ctx = context(cfg, model, sur.clone(), safety)?;
    let registry = EstimatorRegistry::default();
    let points = realize(
        &draw_offsets(&input, cfg.sample.n, cfg.sample.seed),
        input.mean(),
    )?;
    let weights = cfg.weights();

    let mut results = Vec::with_capacity(methods.len());
    for name in methods {
        let est = registry.create(name, &ctx)?;
        let (y, records) = estimate(est.as_ref(), &points, &weights)?;
        let verdicts: Vec<bool> = records.iter().map(|r| r.accepted()).collect();
        results.push((name.clone(), y, verdicts));
    }
    let find = |n: &str| results.iter().find(|(m, ..)| m == n);
    let reference_yield = find("closed-form").map(|(_, y, _)| y.yield_value);
    let fine = find("mc-fine").map(|(.., v)| v.clone());
    let rows = results
        .iter()
        .map(|(name, y, v)| MethodRow {
            method: name.clone(),
            estimate: y.clone(),
            err_rel: reference_yield
                .filter(|r| *r > 0.0)
                .map(|r| (y.yield_value - r).abs() / r),
            mismatch_vs_fine: fine
                .as_ref()
                .map(|f| f.iter().zip(v).filter(|(a, b)| a != b).count()),
        })
        .collect();
    Ok(EstimateReport {
        rows,
        reference_yield,
        safety,
        calibration,
        surrogate: sur,
    })
}

#[derive(Debug, Clone)]
pub struct OptimizeReport {
    pub adaptive: bool,
    pub estimator: String,
    pub state: OptState,
    /// Yield of the final design on an independent sample.
    pub validation_yield: f64,
    pub validation_n: usize,
}

pub fn run_optimize(cfg: &RunConfig) -> Result<OptimizeReport, CliError> {
    let o = &cfg.optimize;
    let est = single_estimator(cfg, &o.estimator)?;
    let input = cfg.problem.input()?;
    let start = o
        .start
        .clone()
        .ok_or_else(|| CliError::Config("optimize.start is not resolved".into()))?;
    let n0 = if o.adaptive {
        o.newton.n_start
    } else {
        o.newton.n_fixed
    };
    let mut sy = SampledYield::new(
        est.clone(),
        input.clone(),
        cfg.sample.seed,
        n0,
        cfg.weights(),
    )?;
    let state = if o.adaptive {
        adaptive_newton_mc(&mut sy, &start, &o.newton)?
    } else {
        globalized_newton(&mut sy, &start, &o.newton)?
    };
    let mut check = SampledYield::new(
        est,
        input,
        o.validation_seed,
        o.validation_n.max(1),
        cfg.weights(),
    )?;
    let validation = check.evaluate(&state.mean)?;
    Ok(OptimizeReport {
        adaptive: o.adaptive,
        estimator: o.estimator.clone(),
        state,
        validation_yield: validation.yield_value,
        validation_n: validation.n,
    })
}

#[derive(Debug, Clone)]
pub struct GradCheckRun {
    pub points: Vec<Vec<f64>>,
    /// Full schedule per point.
    pub traces: Vec<Vec<GradCheckRow>>,
    /// Early-stopping check per point.
    pub checks: Vec<GradCheckReport>,
}

impl GradCheckRun {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Median of the largest component difference over all points, per
    /// sample size.
    pub fn median_trace(&self) -> Vec<(usize, f64)> {
        let mut ns: Vec<usize> = self.traces.iter().flatten().map(|r| r.n).collect();
        ns.sort_unstable();
        ns.dedup();
        ns.into_iter()
            .map(|n| {
                let mut d: Vec<f64> = self
                    .traces
                    .iter()
                    .filter_map(|t| {
                        t.iter()
                            .filter(|r| r.n == n)
                            .map(|r| r.diff)
                            .reduce(f64::max)
                    })
                    .collect();
                d.sort_by(f64::total_cmp);
                let m = d.len();
                let med = if m % 2 == 1 {
                    d[m / 2]
                } else {
                    0.5 * (d[m / 2 - 1] + d[m / 2])
                };
                (n, med)
            })
            .collect()
    }
}

pub fn run_gradcheck(cfg: &RunConfig) -> Result<GradCheckRun, CliError> {
    let g = &cfg.gradcheck;
    let est = single_estimator(cfg, &g.estimator)?;
    let input = cfg.problem.input()?;
    let settings = GradCheckSettings {
        delta: g.delta,
        eta: g.eta,
        schedule: g.schedule.clone(),
        cap: g.cap,
        seed: cfg.sample.seed,
    };
    let mut traces = Vec::with_capacity(g.points.len());
    let mut checks = Vec::with_capacity(g.points.len());
    for x in &g.points {
        traces.push(gradient_trace(est.clone(), &input, x, &settings)?);
        checks.push(gradient_quality_check(est.clone(), &input, x, &settings)?);
    }
    Ok(GradCheckRun {
        points: g.points.clone(),
        traces,
        checks,
    })
}

#[derive(Debug, Clone)]
pub struct CalibrateReport {
    pub calibration: Calibration,
    pub surrogate: Arc<SparseSurrogate>,
}

pub fn run_calibrate(cfg: &RunConfig) -> Result<CalibrateReport, CliError> {
    let model = build_model(cfg)?;
    let sur = build_surrogate(cfg, model.as_ref())?;
    let calibration = calibrate_safety(
        &sur,
        model.as_ref(),
        &cfg.problem.input()?,
        cfg.calibrate.points,
        cfg.calibrate.seed,
    )?;
    Ok(CalibrateReport {
        calibration,
        surrogate: sur,
    })
}
