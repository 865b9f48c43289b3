use std::sync::Arc;

use yieldopt_core::distributions::{draw_offsets, realize, UncertainInput};
use yieldopt_core::estimator::{
    estimate, EffortWeights, EstimatorContext, EstimatorRegistry, PerfSpec, YieldEstimator,
};
use yieldopt_core::model::{FidelityModel, ManufacturedModel, WaveguideModel};
use yieldopt_core::surrogate::{build_adaptive, BuildOptions};
use yieldopt_core::waveguide::{Variant, WaveguideSetup};
use yieldopt_core::Error;

const MEAN: [f64; 4] = [10.36, 4.76, 0.58, 0.64];

fn benchmark_context() -> (EstimatorContext, Vec<Vec<f64>>) {
    let spec = PerfSpec::benchmark();
    let model: Arc<dyn FidelityModel> = Arc::new(
        WaveguideModel::new(
            WaveguideSetup::new(30.0, 15.0, Variant::Four),
            spec.frequencies.clone(),
            &MEAN,
        )
        .unwrap(),
    );
    let input = UncertainInput::new(
        MEAN.to_vec(),
        vec![0.7, 0.7, 0.3, 0.3],
        vec![3.0, 3.0, 0.3, 0.3],
    )
    .unwrap();
    let sur = Arc::new(build_adaptive(model.as_ref(), &input, &BuildOptions::default()).unwrap());
    let pts = realize(&draw_offsets(&input, 400, 17), &MEAN).unwrap();
    let ctx = EstimatorContext {
        model,
        spec,
        surrogate: Some(sur),
        safety: 2.0,
    };
    (ctx, pts)
}

#[test]
fn hybrid_reproduces_finest_level_cheaply() {
    let (ctx, pts) = benchmark_context();
    let reg = EstimatorRegistry::default();
    let w = EffortWeights::default();
    let run = |name: &str| {
        let est = reg.create(name, &ctx).unwrap();
        assert_eq!(est.name(), name);
        estimate(est.as_ref(), &pts, &w).unwrap()
    };
    let (fine, fine_rec) = run("mc-fine");
    let (refine, _) = run("mc-refine");
    let (hybrid, hybrid_rec) = run("hybrid");
    let (closed, _) = run("closed-form");
    let mismatches = fine_rec
        .iter()
        .zip(&hybrid_rec)
        .filter(|(a, b)| a.accepted() != b.accepted())
        .count();
    assert_eq!(mismatches, 0);
    assert_eq!(hybrid.yield_value, fine.yield_value);
    assert_eq!(closed.yield_value, fine.yield_value);
    assert!(hybrid.effort < refine.effort && refine.effort < fine.effort);
    assert_eq!(closed.effort, 0.0);
    assert_eq!(hybrid.n, 400);
    assert!(hybrid.std <= 0.5 / 20.0);
}

#[test]
fn classification_is_deterministic() {
    let (ctx, pts) = benchmark_context();
    let est = EstimatorRegistry::default().create("hybrid", &ctx).unwrap();
    let a = estimate(est.as_ref(), &pts, &EffortWeights::default()).unwrap();
    let b = estimate(est.as_ref(), &pts, &EffortWeights::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn registry_reports_missing_pieces() {
    let spec = PerfSpec::new(-20.0, vec![1.0]).unwrap();
    let model: Arc<dyn FidelityModel> =
        Arc::new(ManufacturedModel::new(vec![0.0], vec![0.1], vec![1.0]).unwrap());
    let ctx = EstimatorContext {
        model,
        spec,
        surrogate: None,
        safety: 2.0,
    };
    let reg = EstimatorRegistry::default();
    assert!(matches!(
        reg.create("sc", &ctx),
        Err(Error::MissingComponent(..))
    ));
    assert!(matches!(
        reg.create("nope", &ctx),
        Err(Error::UnknownEstimator(_))
    ));
    assert_eq!(
        reg.names(),
        vec!["closed-form", "hybrid", "mc-fine", "mc-refine", "sc"]
    );
}

struct AcceptAll;

impl YieldEstimator for AcceptAll {
    fn name(&self) -> &str {
        "accept-all"
    }

    fn classify_point(
        &self,
        _p: &[f64],
    ) -> yieldopt_core::Result<yieldopt_core::estimator::ClassificationRecord> {
        Ok(yieldopt_core::estimator::ClassificationRecord::new())
    }
}

#[test]
fn custom_strategies_plug_into_the_registry() {
    let mut reg = EstimatorRegistry::empty();
    reg.register("accept-all", |_| Ok(Box::new(AcceptAll)));
    let ctx = EstimatorContext {
        model: Arc::new(ManufacturedModel::new(vec![0.0], vec![0.1], vec![1.0]).unwrap()),
        spec: PerfSpec::new(-20.0, vec![1.0]).unwrap(),
        surrogate: None,
        safety: 2.0,
    };
    let est = reg.create("accept-all", &ctx).unwrap();
    let (y, _) = estimate(
        est.as_ref(),
        &[vec![0.0], vec![1.0]],
        &EffortWeights::default(),
    )
    .unwrap();
    assert_eq!(y.yield_value, 1.0);
}
