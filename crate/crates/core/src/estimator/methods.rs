use std::sync::Arc;

use super::{ClassificationRecord, Fidelity, LevelCounts, PerfSpec, YieldEstimator};
use crate::error::{Error, Result};
use crate::model::{FidelityModel, LevelSolution};
use crate::surrogate::SparseSurrogate;

enum Decision {
    Pass,
    Reject,
    Critical,
}

fn decide(q: f64, eps: f64, c: f64, s: f64) -> Decision {
    if q - s * eps > c {
        Decision::Reject
    } else if q + s * eps <= c {
        Decision::Pass
    } else {
        Decision::Critical
    }
}

fn check_model(model: &dyn FidelityModel, spec: &PerfSpec) -> Result<()> {
    spec.validate()?;
    if model.frequencies() != spec.frequencies.as_slice() {
        return Err(Error::InvalidInput(
            "model and spec use different frequency grids".into(),
        ));
    }
    if model.max_level() > 2 {
        return Err(Error::InvalidInput(
            "at most three FE levels are supported".into(),
        ));
    }
    Ok(())
}

/// FE escalation for one frequency starting on the coarsest level.
///
/// `eps0` is the level-0 FE error bound; `None` computes it directly, which
/// costs a level-1 solve that is reused on refinement.
fn escalate(
    model: &dyn FidelityModel,
    p: &[f64],
    j: usize,
    c: f64,
    s: f64,
    eps0: Option<f64>,
    rec: &mut ClassificationRecord,
) -> Result<bool> {
    let max = model.max_level();
    let mut sol = model.solve(p, j, 0)?;
    rec.solves.add(0);
    let mut level = 0usize;
    let mut next: Option<LevelSolution> = None;
    let mut eps = match eps0 {
        Some(e) => e,
        None if max > 0 => {
            let (eta, fine) = model.fe_error(p, j, 0, &sol)?;
            rec.solves.add(1);
            next = Some(fine);
            eta.norm()
        }
        None => 0.0,
    };
    loop {
        let q = sol.qoi.norm();
        if level == max {
            let passed = q <= c;
            rec.forced = true;
            rec.push(j, Fidelity::Fe(level as u8), passed);
            return Ok(passed);
        }
        match decide(q, eps, c, s) {
            Decision::Pass => {
                rec.push(j, Fidelity::Fe(level as u8), true);
                return Ok(true);
            }
            Decision::Reject => {
                rec.push(j, Fidelity::Fe(level as u8), false);
                return Ok(false);
            }
            Decision::Critical => {}
        }
        level += 1;
        sol = match next.take() {
            Some(f) => f,
            None => {
                rec.solves.add(level);
                model.solve(p, j, level)?
            }
        };
        if level < max {
            let (eta, fine) = model.fe_error(p, j, level, &sol)?;
            rec.solves.add(level + 1);
            next = Some(fine);
            eps = eta.norm();
        }
    }
}

/// MC on the reference QoI of the model (no discretization error, no cost).
pub struct ClosedFormMc {
    model: Arc<dyn FidelityModel>,
    c: f64,
}

impl ClosedFormMc {
    pub fn new(model: Arc<dyn FidelityModel>, spec: &PerfSpec) -> Result<Self> {
        check_model(model.as_ref(), spec)?;
        if model.exact_qoi(&vec![0.0; model.dim()], 0).is_none() {
            return Err(Error::MissingComponent(
                "closed-form".into(),
                "a model with a reference QoI",
            ));
        }
        Ok(Self {
            model,
            c: spec.c_lin(),
        })
    }
}

impl YieldEstimator for ClosedFormMc {
    fn name(&self) -> &str {
        "closed-form"
    }

    fn classify_point(&self, p: &[f64]) -> Result<ClassificationRecord> {
        if !self.model.is_feasible(p) {
            return Ok(ClassificationRecord::infeasible());
        }
        let mut rec = ClassificationRecord::new();
        for j in 0..self.model.frequencies().len() {
            let q = self.model.exact_qoi(p, j).ok_or_else(|| {
                Error::MissingComponent("closed-form".into(), "a reference QoI")
            })??;
            let passed = q.norm() <= self.c;
            rec.push(j, Fidelity::ClosedForm, passed);
            if !passed {
                break;
            }
        }
        Ok(rec)
    }
}

/// MC with every frequency solved on the finest level.
pub struct McFine {
    model: Arc<dyn FidelityModel>,
    c: f64,
}

impl McFine {
    pub fn new(model: Arc<dyn FidelityModel>, spec: &PerfSpec) -> Result<Self> {
        check_model(model.as_ref(), spec)?;
        Ok(Self {
            model,
            c: spec.c_lin(),
        })
    }
}

impl YieldEstimator for McFine {
    fn name(&self) -> &str {
        "mc-fine"
    }

    fn classify_point(&self, p: &[f64]) -> Result<ClassificationRecord> {
        if !self.model.is_feasible(p) {
            return Ok(ClassificationRecord::infeasible());
        }
        let max = self.model.max_level();
        let mut rec = ClassificationRecord::new();
        for j in 0..self.model.frequencies().len() {
            let q = self.model.solve(p, j, max)?.qoi.norm();
            rec.solves.add(max);
            let passed = q <= self.c;
            rec.push(j, Fidelity::Fe(max as u8), passed);
            if !passed {
                break;
            }
        }
        Ok(rec)
    }
}

/// MC on the coarsest level with indicator-driven refinement.
pub struct McRefine {
    model: Arc<dyn FidelityModel>,
    c: f64,
    s: f64,
}

impl McRefine {
    pub fn new(model: Arc<dyn FidelityModel>, spec: &PerfSpec, safety: f64) -> Result<Self> {
        check_model(model.as_ref(), spec)?;
        super::SafetyFactor::new(safety)?;
        Ok(Self {
            model,
            c: spec.c_lin(),
            s: safety,
        })
    }
}

impl YieldEstimator for McRefine {
    fn name(&self) -> &str {
        "mc-refine"
    }

    fn classify_point(&self, p: &[f64]) -> Result<ClassificationRecord> {
        if !self.model.is_feasible(p) {
            return Ok(ClassificationRecord::infeasible());
        }
        let mut rec = ClassificationRecord::new();
        for j in 0..self.model.frequencies().len() {
            if !escalate(self.model.as_ref(), p, j, self.c, self.s, None, &mut rec)? {
                break;
            }
        }
        Ok(rec)
    }
}

/// Frequencies sorted by decreasing surrogate magnitude.
fn ordered(q: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..q.len()).collect();
    idx.sort_by(|&a, &b| q[b].total_cmp(&q[a]).then(a.cmp(&b)));
    idx
}

/// MC on the surrogate alone.
pub struct ScMc {
    sur: Arc<SparseSurrogate>,
    c: f64,
    setup: LevelCounts,
}

impl ScMc {
    pub fn new(sur: Arc<SparseSurrogate>, spec: &PerfSpec) -> Result<Self> {
        spec.validate()?;
        if sur.n_freq() != spec.frequencies.len() {
            return Err(Error::InvalidInput(
                "surrogate and spec use different frequency grids".into(),
            ));
        }
        let st = sur.stats();
        Ok(Self {
            setup: LevelCounts([st.level0_solves, st.level1_solves, 0]),
            sur,
            c: spec.c_lin(),
        })
    }
}

impl YieldEstimator for ScMc {
    fn name(&self) -> &str {
        "sc"
    }

    fn setup_solves(&self) -> LevelCounts {
        self.setup
    }

    fn classify_point(&self, p: &[f64]) -> Result<ClassificationRecord> {
        let b = self.sur.basis(p)?;
        let mut rec = ClassificationRecord::new();
        rec.extrapolated = b.extrapolated;
        let q: Vec<f64> = (0..self.sur.n_freq())
            .map(|j| self.sur.qoi_at(&b, j).norm())
            .collect();
        for j in ordered(&q) {
            let passed = q[j] <= self.c;
            rec.push(j, Fidelity::Surrogate, passed);
            if !passed {
                break;
            }
        }
        Ok(rec)
    }
}

/// Surrogate classification with FE escalation for critical points.
pub struct HybridMc {
    model: Arc<dyn FidelityModel>,
    sur: Arc<SparseSurrogate>,
    c: f64,
    s: f64,
    setup: LevelCounts,
}

impl HybridMc {
    pub fn new(
        model: Arc<dyn FidelityModel>,
        sur: Arc<SparseSurrogate>,
        spec: &PerfSpec,
        safety: f64,
    ) -> Result<Self> {
        check_model(model.as_ref(), spec)?;
        sur.check_model(model.as_ref())?;
        super::SafetyFactor::new(safety)?;
        let st = sur.stats();
        Ok(Self {
            setup: LevelCounts([st.level0_solves, st.level1_solves, 0]),
            model,
            sur,
            c: spec.c_lin(),
            s: safety,
        })
    }
}

impl YieldEstimator for HybridMc {
    fn name(&self) -> &str {
        "hybrid"
    }

    fn setup_solves(&self) -> LevelCounts {
        self.setup
    }

    fn classify_point(&self, p: &[f64]) -> Result<ClassificationRecord> {
        let model = self.model.as_ref();
        if !model.is_feasible(p) {
            return Ok(ClassificationRecord::infeasible());
        }
        let mut rec = ClassificationRecord::new();
        let b = self.sur.basis(p)?;
        let nf = self.sur.n_freq();
        if b.extrapolated {
            rec.extrapolated = true;
            rec.critical = true;
            for j in 0..nf {
                if !escalate(model, p, j, self.c, self.s, None, &mut rec)? {
                    break;
                }
            }
            return Ok(rec);
        }
        let q: Vec<f64> = (0..nf).map(|j| self.sur.qoi_at(&b, j).norm()).collect();
        for j in ordered(&q) {
            let fe = self.sur.fe_error_at(&b, j);
            let eps = self.sur.sc_error_at(model, &b, p, j)? + fe;
            let passed = match decide(q[j], eps, self.c, self.s) {
                Decision::Pass => {
                    rec.push(j, Fidelity::Surrogate, true);
                    true
                }
                Decision::Reject => {
                    rec.push(j, Fidelity::Surrogate, false);
                    false
                }
                Decision::Critical => {
                    rec.critical = true;
                    escalate(model, p, j, self.c, self.s, Some(fe), &mut rec)?
                }
            };
            if !passed {
                break;
            }
        }
        Ok(rec)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{estimate, EffortWeights, Verdict};
    use super::*;
    use crate::distributions::{draw_offsets, realize, UncertainInput};
    use crate::model::ManufacturedModel;
    use crate::surrogate::{build_adaptive, BuildOptions};

    fn spec() -> PerfSpec {
        PerfSpec::new(-20.0, vec![1.0, 2.0, 3.0]).unwrap()
    }

    fn model(offset: f64, bias: f64) -> ManufacturedModel {
        let mut m =
            ManufacturedModel::new(vec![0.0, 0.0], vec![0.05, 0.02], vec![1.0, 2.0, 3.0]).unwrap();
        m.offset = offset;
        m.fe_bias = bias;
        m.slope_growth = 0.1;
        m
    }

    fn points(n: usize) -> Vec<Vec<f64>> {
        let inp = UncertainInput::new(vec![0.0, 0.0], vec![0.5, 0.5], vec![1.0, 1.0]).unwrap();
        realize(&draw_offsets(&inp, n, 3), &[0.0, 0.0]).unwrap()
    }

    #[test]
    fn trivial_models() {
        let pts = points(50);
        let w = EffortWeights::default();
        let zero = Arc::new(model(0.0, 0.0)) as Arc<dyn FidelityModel>;
        let mut m = model(1.0, 0.0);
        m.linear = vec![0.0, 0.0];
        let one = Arc::new(m) as Arc<dyn FidelityModel>;
        let mut m0 = model(0.0, 0.0);
        m0.linear = vec![0.0, 0.0];
        let zero_flat = Arc::new(m0) as Arc<dyn FidelityModel>;
        let (y, _) = estimate(&McFine::new(zero_flat.clone(), &spec()).unwrap(), &pts, &w).unwrap();
        assert_eq!(y.yield_value, 1.0);
        assert_eq!(y.effort, 50.0 * 3.0 * 16.0);
        let (y, _) = estimate(&McFine::new(one.clone(), &spec()).unwrap(), &pts, &w).unwrap();
        assert_eq!(y.yield_value, 0.0);
        assert_eq!(y.effort, 50.0 * 16.0);
        let (y, _) = estimate(&ClosedFormMc::new(one, &spec()).unwrap(), &pts, &w).unwrap();
        assert_eq!((y.yield_value, y.effort), (0.0, 0.0));
        let (y, _) = estimate(&ClosedFormMc::new(zero, &spec()).unwrap(), &pts, &w).unwrap();
        assert!(y.yield_value > 0.0);
    }

    #[test]
    fn hybrid_equals_finest_level() {
        // threshold 0.1 cuts through the sample, FE bias shifts levels
        let m = Arc::new(model(0.09, 4e-3));
        let inp = UncertainInput::new(vec![0.0, 0.0], vec![0.5, 0.5], vec![1.0, 1.0]).unwrap();
        let sur = Arc::new(
            build_adaptive(
                m.as_ref(),
                &inp,
                &BuildOptions {
                    budget: 8,
                    ..Default::default()
                },
            )
            .unwrap(),
        );
        let pts = points(400);
        let w = EffortWeights::default();
        let dynm = m.clone() as Arc<dyn FidelityModel>;
        let (yf, rf) = estimate(&McFine::new(dynm.clone(), &spec()).unwrap(), &pts, &w).unwrap();
        let (yr, rr) = estimate(
            &McRefine::new(dynm.clone(), &spec(), 2.0).unwrap(),
            &pts,
            &w,
        )
        .unwrap();
        let (yh, rh) =
            estimate(&HybridMc::new(dynm, sur, &spec(), 2.0).unwrap(), &pts, &w).unwrap();
        assert!(
            yf.yield_value > 0.1 && yf.yield_value < 0.9,
            "{}",
            yf.yield_value
        );
        for ((a, b), c) in rf.iter().zip(&rr).zip(&rh) {
            assert_eq!(a.verdict, b.verdict);
            assert_eq!(a.verdict, c.verdict);
        }
        assert_eq!(yf.yield_value, yh.yield_value);
        assert!(yh.critical > 0 && yh.critical < 400);
        assert!(yh.effort < yr.effort && yr.effort < yf.effort);
    }

    #[test]
    fn exact_surrogate_needs_no_fe_calls() {
        let m = Arc::new(model(0.05, 0.0));
        let inp = UncertainInput::new(vec![0.0, 0.0], vec![0.5, 0.5], vec![1.0, 1.0]).unwrap();
        let sur = Arc::new(
            build_adaptive(
                m.as_ref(),
                &inp,
                &BuildOptions {
                    budget: 8,
                    ..Default::default()
                },
            )
            .unwrap(),
        );
        let pts = points(300);
        let w = EffortWeights::default();
        let (ys, rs) = estimate(&ScMc::new(sur.clone(), &spec()).unwrap(), &pts, &w).unwrap();
        let (yh, rh) = estimate(&HybridMc::new(m, sur, &spec(), 2.0).unwrap(), &pts, &w).unwrap();
        assert_eq!(ys.yield_value, yh.yield_value);
        assert_eq!(yh.mc_solves.total(), 0);
        for (a, b) in rs.iter().zip(&rh) {
            assert_eq!(a.verdict, b.verdict);
        }
    }

    #[test]
    fn surrogate_branches_cost_nothing() {
        let m = Arc::new(model(0.0, 0.0));
        let inp = UncertainInput::new(vec![0.0, 0.0], vec![0.5, 0.5], vec![1.0, 1.0]).unwrap();
        let sur = Arc::new(
            build_adaptive(
                m.as_ref(),
                &inp,
                &BuildOptions {
                    budget: 4,
                    ..Default::default()
                },
            )
            .unwrap(),
        );
        let h = HybridMc::new(m, sur, &spec(), 2.0).unwrap();
        let r = h.classify_point(&[0.0, 0.0]).unwrap();
        assert_eq!(r.verdict, Verdict::Accepted);
        assert_eq!(r.solves.total(), 0);
        let mut far = model(5.0, 0.0);
        far.linear = vec![0.0, 0.0];
        let far = Arc::new(far);
        let sur = Arc::new(
            build_adaptive(
                far.as_ref(),
                &inp,
                &BuildOptions {
                    budget: 4,
                    ..Default::default()
                },
            )
            .unwrap(),
        );
        let h = HybridMc::new(far, sur, &spec(), 2.0).unwrap();
        let r = h.classify_point(&[0.3, 0.0]).unwrap();
        assert_eq!(r.verdict, Verdict::Rejected);
        assert_eq!(r.path.len(), 1);
        assert_eq!(r.solves.total(), 0);
        let r = h.classify_point(&[3.0, 0.0]).unwrap();
        assert!(r.extrapolated);
        assert_eq!(r.solves.0[0], 1);
    }

    #[test]
    fn frequency_order_is_descending() {
        assert_eq!(ordered(&[0.1, 0.3, 0.2, 0.3]), vec![1, 3, 2, 0]);
    }
}
