use std::f64::consts::PI;

use proptest::prelude::*;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use yieldopt_core::model::{linspace, FidelityModel, WaveguideModel};
use yieldopt_core::waveguide::{s_params_closed_form, Variant, WaveguideSetup};

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn four_param_points(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            vec![
                uniform(&mut rng, 7.5, 13.0),
                uniform(&mut rng, 2.0, 7.5),
                uniform(&mut rng, 0.3, 0.9),
                uniform(&mut rng, 0.35, 0.95),
            ]
        })
        .collect()
}

fn model_at_7ghz() -> WaveguideModel {
    WaveguideModel::new(
        WaveguideSetup::new(30.0, 15.0, Variant::Four),
        vec![7.0e9],
        &[10.36, 4.76, 0.58, 0.64],
    )
    .unwrap()
}

#[test]
fn finest_level_matches_transfer_matrix() {
    let m = model_at_7ghz();
    for p in four_param_points(50, 3) {
        let fe = m.solve(&p, 0, 2).unwrap().qoi;
        let exact = m.exact_qoi(&p, 0).unwrap().unwrap();
        assert!((fe - exact).norm() / exact.norm() < 1e-3, "{p:?}");
    }
}

#[test]
fn observed_order_is_at_least_two() {
    let m = model_at_7ghz();
    let mut orders: Vec<f64> = four_param_points(50, 4)
        .iter()
        .map(|p| {
            let s: Vec<_> = (0..=2).map(|l| m.solve(p, 0, l).unwrap().qoi).collect();
            ((s[0] - s[1]).norm() / (s[1] - s[2]).norm()).log2()
        })
        .collect();
    orders.sort_by(f64::total_cmp);
    assert!(orders[0] >= 2.0, "smallest observed order {}", orders[0]);
}

#[test]
fn fe_indicator_tracks_level_zero_error() {
    let m = model_at_7ghz();
    for p in four_param_points(20, 5) {
        let coarse = m.solve(&p, 0, 0).unwrap();
        let (eta, _) = m.fe_error(&p, 0, 0, &coarse).unwrap();
        let err = (m.exact_qoi(&p, 0).unwrap().unwrap() - coarse.qoi).norm();
        let eff = eta.norm() / err;
        assert!((0.1..=10.0).contains(&eff), "effectivity {eff} at {p:?}");
    }
}

#[test]
fn sweep_stays_passive_on_the_benchmark_band() {
    let m = WaveguideModel::new(
        WaveguideSetup::new(30.0, 15.0, Variant::Twelve),
        linspace(6.5e9, 7.5e9, 11),
        &[8.6, 3.8, 2.0, 0.5, 0.7, 0.6, 1.4, 2.8, 1.7, 0.8, 0.3, 1.4],
    )
    .unwrap();
    let p = [8.6, 3.8, 2.0, 0.5, 0.7, 0.6, 1.4, 2.8, 1.7, 0.8, 0.3, 1.4];
    for j in 0..11 {
        let s = m.exact_qoi(&p, j).unwrap().unwrap();
        let fe = m.solve(&p, j, 2).unwrap().qoi;
        assert!(s.norm() < 1.0 && fe.norm() < 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lossy_inlay_is_passive(
        len in 1.0f64..20.0,
        off in 0.5f64..10.0,
        p13 in 0.0f64..1.0,
        p14 in 0.0f64..2.0,
        f in 5.5e9f64..9.0e9,
    ) {
        let setup = WaveguideSetup::new(30.0, 15.0, Variant::Four);
        let (geom, mat) = setup.configure(&[len, off, p13, p14]).unwrap();
        let (s11, s21) = s_params_closed_form(&geom, &mat, 2.0 * PI * f).unwrap();
        prop_assert!(s11.norm_sqr() + s21.norm_sqr() <= 1.0 + 1e-12);
    }
}
