use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{draw_offsets, realize, UncertainInput};
use crate::error::{Error, Result};
use crate::model::FidelityModel;
use crate::surrogate::SparseSurrogate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub point: usize,
    pub freq: usize,
    pub error: f64,
    pub indicator: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub safety: f64,
    pub max_ratio: f64,
    /// Pairs with zero indicator but nonzero error, left out of the maximum.
    pub excluded: usize,
    pub rows: Vec<CalibrationRow>,
}

impl Calibration {
    pub fn warning(&self) -> bool {
        self.excluded > 0
    }
}

/// Largest ratio of finest-level surrogate error to `eps_sc + eps_fe` over
/// `n_cal` points drawn around the surrogate's center, floored at 1.
pub fn calibrate_safety(
    sur: &SparseSurrogate,
    model: &dyn FidelityModel,
    input: &UncertainInput,
    n_cal: usize,
    seed: u64,
) -> Result<Calibration> {
    if n_cal < 2 {
        return Err(Error::InvalidInput(format!(
            "calibration needs at least 2 points, got {n_cal}"
        )));
    }
    sur.check_model(model)?;
    let pts = realize(&draw_offsets(input, n_cal, seed), sur.center())?;
    let max = model.max_level();
    let per_point: Vec<Result<Vec<CalibrationRow>>> = pts
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            if !model.is_feasible(p) {
                return Ok(Vec::new());
            }
            let b = sur.basis(p)?;
            (0..sur.n_freq())
                .map(|j| {
                    let fine = model.solve(p, j, max)?.qoi;
                    let err = (fine - sur.qoi_at(&b, j)).norm();
                    let ind = sur.sc_error_at(model, &b, p, j)? + sur.fe_error_at(&b, j);
                    Ok(CalibrationRow {
                        point: i,
                        freq: j,
                        error: err,
                        indicator: ind,
                        ratio: if ind > 0.0 { err / ind } else { f64::NAN },
                    })
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_point {
        rows.extend(r?);
    }
    let mut max_ratio = 0.0f64;
    let mut excluded = 0;
    for r in &rows {
        if r.indicator > 0.0 {
            max_ratio = max_ratio.max(r.ratio);
        } else if r.error > 0.0 {
            excluded += 1;
        }
    }
    Ok(Calibration {
        safety: max_ratio.max(1.0),
        max_ratio,
        excluded,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ManufacturedModel;
    use crate::surrogate::{build_adaptive, BuildOptions};

    #[test]
    fn exact_surrogate_floors_at_one() {
        let m = ManufacturedModel::new(vec![0.0, 0.0], vec![0.3, 0.1], vec![1.0]).unwrap();
        let inp = UncertainInput::new(vec![0.0, 0.0], vec![0.5, 0.5], vec![1.0, 1.0]).unwrap();
        let s = build_adaptive(
            &m,
            &inp,
            &BuildOptions {
                budget: 5,
                ..Default::default()
            },
        )
        .unwrap();
        let c = calibrate_safety(&s, &m, &inp, 20, 1).unwrap();
        assert_eq!(c.safety, 1.0);
        assert_eq!(c.rows.len(), 20);
        assert!(calibrate_safety(&s, &m, &inp, 1, 1).is_err());
    }
}
