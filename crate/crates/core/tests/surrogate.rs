use std::sync::Arc;

use yieldopt_core::distributions::{draw_offsets, realize, UncertainInput};
use yieldopt_core::model::{linspace, FidelityModel, WaveguideModel};
use yieldopt_core::surrogate::{build_adaptive, BuildOptions, SparseSurrogate};
use yieldopt_core::waveguide::{Variant, WaveguideSetup};

const MEAN: [f64; 4] = [10.36, 4.76, 0.58, 0.64];

fn setup() -> (Arc<WaveguideModel>, UncertainInput, SparseSurrogate) {
    let model = Arc::new(
        WaveguideModel::new(
            WaveguideSetup::new(30.0, 15.0, Variant::Four),
            linspace(6.5e9, 7.5e9, 11),
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
    let sur = build_adaptive(model.as_ref(), &input, &BuildOptions::default()).unwrap();
    (model, input, sur)
}

#[test]
fn adaptive_build_on_benchmark() {
    let (model, input, sur) = setup();
    assert_eq!(sur.len(), 90);
    assert!(sur.index_set().is_downward_closed());
    let st = sur.stats();
    assert_eq!((st.level0_solves, st.level1_solves), (90 * 11, 90 * 11));

    // error indicator within a factor 10 of the true level-0 interpolation error
    let pts = realize(&draw_offsets(&input, 100, 21), &MEAN).unwrap();
    let mut good = 0;
    let mut total = 0;
    for p in &pts {
        for j in [0, 5, 10] {
            let truth = model.solve(p, j, 0).unwrap().qoi;
            let err = (truth - sur.eval_qoi(p, j).unwrap().value).norm();
            let ind = sur.sc_error_indicator(model.as_ref(), p, j).unwrap();
            total += 1;
            if err > 0.0 && (0.1..=10.0).contains(&(ind / err)) {
                good += 1;
            }
        }
    }
    assert!(good as f64 >= 0.9 * total as f64, "{good}/{total}");
}

#[test]
fn saved_surrogate_evaluates_identically() {
    let (model, _, sur) = setup();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    sur.save(&path).unwrap();
    let back = SparseSurrogate::load(&path).unwrap();
    back.check_model(model.as_ref()).unwrap();
    let p = [11.0, 4.0, 0.5, 0.7];
    for j in 0..11 {
        assert_eq!(back.eval_qoi(&p, j).unwrap(), sur.eval_qoi(&p, j).unwrap());
        assert_eq!(
            back.fe_error_surrogate(&p, j).unwrap(),
            sur.fe_error_surrogate(&p, j).unwrap()
        );
    }
}

#[test]
fn surrogate_interpolates_at_its_nodes() {
    let (model, _, sur) = setup();
    for a in sur.index_set().iter().take(15) {
        let p = sur.node_point(a);
        let q = model.solve(&p, 3, 0).unwrap().qoi;
        assert!((sur.eval_qoi(&p, 3).unwrap().value - q).norm() < 1e-9 * q.norm().max(1e-3));
    }
}
