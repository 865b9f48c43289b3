use std::sync::Arc;

use yieldopt_core::distributions::{std_normal_cdf, UncertainInput};
use yieldopt_core::estimator::{ClosedFormMc, EffortWeights, PerfSpec, YieldEstimator};
use yieldopt_core::model::{linspace, ManufacturedModel, WaveguideModel};
use yieldopt_core::optimizer::{
    conditional_moments, globalized_newton, newton_direction, yield_gradient, yield_hessian,
    NewtonParams, SampledYield, StepKind,
};
use yieldopt_core::waveguide::{Variant, WaveguideSetup};

fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

// accepted iff p in [-20, 0]: a half-space over the sampled range
fn half_space(std: f64) -> SampledYield {
    let spec = PerfSpec::new(-20.0, vec![1.0]).unwrap();
    let c = spec.c_lin();
    let mut m = ManufacturedModel::new(vec![-10.0], vec![c / 10.0], vec![1.0]).unwrap();
    m.offset = 0.0;
    let est: Arc<dyn YieldEstimator> = Arc::new(ClosedFormMc::new(Arc::new(m), &spec).unwrap());
    let input = UncertainInput::new(vec![0.0], vec![std], vec![8.0 * std]).unwrap();
    SampledYield::new(est, input, 3, 100_000, EffortWeights::default()).unwrap()
}

#[test]
fn gradient_and_hessian_match_the_normal_cdf() {
    let mut sy = half_space(1.0);
    let m = -0.5;
    let ys = sy.evaluate(&[m]).unwrap();
    assert!((ys.yield_value - std_normal_cdf(-m)).abs() < 0.005);
    let pts = ys.points(sy.offsets());
    let mom = conditional_moments(&pts, &ys.accepted).unwrap();
    let g = yield_gradient(ys.yield_value, &[m], &[1.0], Some(&mom))[0];
    // per-point terms 1_S(x) (x - m) / sigma^2 have this standard error
    let terms: Vec<f64> = pts
        .iter()
        .zip(&ys.accepted)
        .map(|(x, a)| if *a { x[0] - m } else { 0.0 })
        .collect();
    let n = terms.len() as f64;
    let mean = terms.iter().sum::<f64>() / n;
    let se = (terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    let truth = -phi(m);
    assert!((g - truth).abs() <= 3.0 * se, "{g} vs {truth} (se {se})");
    let h = yield_hessian(ys.yield_value, &[m], &[1.0], &mom).unwrap()[(0, 0)];
    assert!((h - m * phi(m)).abs() < 0.02, "{h} vs {}", m * phi(m));
}

#[test]
fn newton_direction_is_scale_invariant() {
    // quadratic acceptance region, stretched with the sample:
    // |0.03 (x1 - 0.4) + 0.01 x2 + 0.02 (x1 - 0.4)^2| <= c with x = p / scale
    let spec = PerfSpec::new(-30.0, vec![1.0]).unwrap();
    let estimator = |scale: f64| -> Arc<dyn YieldEstimator> {
        let mut m = ManufacturedModel::new(
            vec![0.4 * scale, 0.0],
            vec![0.03 / scale, 0.01 / scale],
            vec![1.0],
        )
        .unwrap();
        m.quadratic = 0.02 / (scale * scale);
        Arc::new(ClosedFormMc::new(Arc::new(m), &spec).unwrap())
    };
    let dir = |scale: f64| {
        let input =
            UncertainInput::new(vec![0.0, 0.0], vec![scale, scale], vec![3.0 * scale; 2]).unwrap();
        let mut sy =
            SampledYield::new(estimator(scale), input, 9, 50_000, EffortWeights::default())
                .unwrap();
        let ys = sy.evaluate(&[0.0, 0.0]).unwrap();
        let mom = conditional_moments(&ys.points(sy.offsets()), &ys.accepted).unwrap();
        let var = sy.variances();
        let g = yield_gradient(ys.yield_value, &ys.mean, &var, Some(&mom));
        let h = yield_hessian(ys.yield_value, &ys.mean, &var, &mom).unwrap();
        let (d, kind) = newton_direction(&g, Some(&h), &NewtonParams::default());
        let norm = (d[0] * d[0] + d[1] * d[1]).sqrt();
        (kind, [d[0] / norm, d[1] / norm])
    };
    // power-of-two scaling is exact, so both runs accept the same points
    let (k1, d1) = dir(1.0);
    let (k2, d2) = dir(1.0 / 16.0);
    assert_eq!(k1, k2);
    assert_eq!(k1, StepKind::Newton);
    assert!(
        (d1[0] - d2[0]).abs() < 1e-6 && (d1[1] - d2[1]).abs() < 1e-6,
        "{d1:?} {d2:?}"
    );
}

#[test]
fn fixed_newton_never_loses_yield_on_the_benchmark() {
    let spec = PerfSpec::benchmark();
    let mean = [10.36, 4.76, 0.58, 0.64];
    let model = WaveguideModel::new(
        WaveguideSetup::new(30.0, 15.0, Variant::Four),
        linspace(6.5e9, 7.5e9, 11),
        &mean,
    )
    .unwrap();
    let est: Arc<dyn YieldEstimator> = Arc::new(ClosedFormMc::new(Arc::new(model), &spec).unwrap());
    let input = UncertainInput::new(
        mean.to_vec(),
        vec![0.7, 0.7, 0.3, 0.3],
        vec![3.0, 3.0, 0.3, 0.3],
    )
    .unwrap();
    let mut sy = SampledYield::new(est, input, 5, 2500, EffortWeights::default()).unwrap();
    let params = NewtonParams {
        n_fixed: 1000,
        ..Default::default()
    };
    let st = globalized_newton(&mut sy, &[9.0, 5.0, 1.0, 1.0], &params).unwrap();
    assert!(st.converged);
    assert!(st
        .history
        .windows(2)
        .all(|w| w[1].yield_value >= w[0].yield_value));
    assert!(st.yield_value > st.history[0].yield_value);
    assert!(st.history.iter().all(|r| r.n_mc == 1000));
}

#[test]
fn large_gradient_tolerance_returns_immediately() {
    let mut sy = half_space(1.0);
    let params = NewtonParams {
        tau_g: 10.0,
        n_fixed: 1000,
        ..Default::default()
    };
    let st = globalized_newton(&mut sy, &[-0.5], &params).unwrap();
    assert_eq!(st.iterations, 0);
    assert_eq!(st.mean, vec![-0.5]);
    assert!(st.converged);
}
