//! Monte Carlo yield estimators: closed form, fixed FE level, FE with
//! refinement, surrogate only, and the hybrid classifier.

mod calibrate;
mod methods;
mod registry;

pub use calibrate::{calibrate_safety, Calibration, CalibrationRow};
pub use methods::{ClosedFormMc, HybridMc, McFine, McRefine, ScMc};
pub use registry::{EstimatorContext, EstimatorFactory, EstimatorRegistry};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::linspace;

/// Upper bound on `|S|` over a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfSpec {
    pub threshold_db: f64,
    pub frequencies: Vec<f64>,
}

impl PerfSpec {
    pub fn new(threshold_db: f64, frequencies: Vec<f64>) -> Result<Self> {
        let s = Self {
            threshold_db,
            frequencies,
        };
        s.validate()?;
        Ok(s)
    }

    /// −24 dB on 11 points over 6.5–7.5 GHz.
    pub fn benchmark() -> Self {
        Self {
            threshold_db: -24.0,
            frequencies: linspace(6.5e9, 7.5e9, 11),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frequencies.is_empty() {
            return Err(Error::InvalidInput("empty frequency grid".into()));
        }
        if self.frequencies.windows(2).any(|w| !(w[0] < w[1])) || !(self.frequencies[0] > 0.0) {
            return Err(Error::InvalidInput(
                "frequency grid must be positive and strictly increasing".into(),
            ));
        }
        let c = self.c_lin();
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::InvalidInput(format!(
                "threshold {} dB is not below 0 dB",
                self.threshold_db
            )));
        }
        Ok(())
    }

    pub fn c_lin(&self) -> f64 {
        10f64.powf(self.threshold_db / 20.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fidelity {
    ClosedForm,
    Surrogate,
    Fe(u8),
}

/// The last fidelity consulted at one frequency and whether it passed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreqStep {
    pub freq: usize,
    pub fidelity: Fidelity,
    pub passed: bool,
}

/// Solver calls per FE level `h, h/2, h/4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LevelCounts(pub [usize; 3]);

impl LevelCounts {
    pub fn add(&mut self, level: usize) {
        self.0[level] += 1;
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn merge(&mut self, other: &LevelCounts) {
        for (a, b) in self.0.iter_mut().zip(other.0) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffortWeights(pub [f64; 3]);

impl Default for EffortWeights {
    fn default() -> Self {
        Self([1.0, 4.0, 16.0])
    }
}

pub fn effort(counts: &LevelCounts, weights: &EffortWeights) -> f64 {
    counts
        .0
        .iter()
        .zip(weights.0)
        .map(|(n, w)| *n as f64 * w)
        .sum()
}

/// Multiplier `s >= 1` on error indicators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyFactor(f64);

impl SafetyFactor {
    pub fn new(s: f64) -> Result<Self> {
        if !(s >= 1.0 && s.is_finite()) {
            return Err(Error::InvalidInput(format!("safety factor {s} is below 1")));
        }
        Ok(Self(s))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

impl Default for SafetyFactor {
    fn default() -> Self {
        Self(2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRecord {
    pub verdict: Verdict,
    pub path: Vec<FreqStep>,
    pub solves: LevelCounts,
    /// Decided by the finest level without an indicator.
    pub forced: bool,
    /// Some frequency was not settled by the surrogate.
    pub critical: bool,
    /// Outside the surrogate box.
    pub extrapolated: bool,
    /// No valid configuration; counted as rejected.
    pub infeasible: bool,
}

impl ClassificationRecord {
    pub fn new() -> Self {
        Self {
            verdict: Verdict::Accepted,
            path: Vec::new(),
            solves: LevelCounts::default(),
            forced: false,
            critical: false,
            extrapolated: false,
            infeasible: false,
        }
    }

    pub fn infeasible() -> Self {
        Self {
            verdict: Verdict::Rejected,
            infeasible: true,
            ..Self::new()
        }
    }

    pub fn accepted(&self) -> bool {
        self.verdict == Verdict::Accepted
    }

    /// Finest FE level consulted, if any.
    pub fn deepest_level(&self) -> Option<u8> {
        self.path
            .iter()
            .filter_map(|s| match s.fidelity {
                Fidelity::Fe(l) => Some(l),
                _ => None,
            })
            .max()
    }

    fn push(&mut self, freq: usize, fidelity: Fidelity, passed: bool) {
        self.path.push(FreqStep {
            freq,
            fidelity,
            passed,
        });
        if !passed {
            self.verdict = Verdict::Rejected;
        }
    }
}

impl Default for ClassificationRecord {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YieldEstimate {
    pub yield_value: f64,
    pub std: f64,
    pub n: usize,
    pub accepted: usize,
    /// FE solves spent on sample points.
    pub mc_solves: LevelCounts,
    /// FE solves spent before sampling, e.g. building a surrogate.
    pub setup_solves: LevelCounts,
    /// Weighted sum over `mc_solves + setup_solves`.
    pub effort: f64,
    /// Points by finest FE level consulted.
    pub refined: [usize; 3],
    pub critical: usize,
    pub forced: usize,
    pub extrapolated: usize,
    pub infeasible: usize,
}

/// `sqrt(Y (1 - Y) / N)`
pub fn mc_std(y: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::InvalidInput(format!("yield {y} outside [0, 1]")));
    }
    // monotone in each factor, so the 0.5/sqrt(N) bound holds in floating point
    Ok((y * (1.0 - y)).sqrt() / (n as f64).sqrt())
}

pub trait YieldEstimator: Send + Sync {
    fn name(&self) -> &str;

    fn classify_point(&self, p: &[f64]) -> Result<ClassificationRecord>;

    /// Solves spent once, independent of the sample.
    fn setup_solves(&self) -> LevelCounts {
        LevelCounts::default()
    }
}

pub fn aggregate(
    records: &[ClassificationRecord],
    setup: LevelCounts,
    weights: &EffortWeights,
) -> Result<YieldEstimate> {
    let n = records.len();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let accepted = records.iter().filter(|r| r.accepted()).count();
    let mut mc = LevelCounts::default();
    let mut refined = [0usize; 3];
    for r in records {
        mc.merge(&r.solves);
        if let Some(l) = r.deepest_level() {
            refined[l as usize] += 1;
        }
    }
    let mut all = mc;
    all.merge(&setup);
    let y = accepted as f64 / n as f64;
    Ok(YieldEstimate {
        yield_value: y,
        std: mc_std(y, n)?,
        n,
        accepted,
        mc_solves: mc,
        setup_solves: setup,
        effort: effort(&all, weights),
        refined,
        critical: records.iter().filter(|r| r.critical).count(),
        forced: records.iter().filter(|r| r.forced).count(),
        extrapolated: records.iter().filter(|r| r.extrapolated).count(),
        infeasible: records.iter().filter(|r| r.infeasible).count(),
    })
}

/// Classifies all points (in parallel) and aggregates in index order.
pub fn classify_all(
    est: &dyn YieldEstimator,
    points: &[Vec<f64>],
) -> Result<Vec<ClassificationRecord>> {
    let out: Vec<Result<ClassificationRecord>> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| est.classify_point(p).map_err(|e| e.at_point(i)))
        .collect();
    out.into_iter().collect()
}

pub fn estimate(
    est: &dyn YieldEstimator,
    points: &[Vec<f64>],
    weights: &EffortWeights,
) -> Result<(YieldEstimate, Vec<ClassificationRecord>)> {
    if points.is_empty() {
        return Err(Error::EmptySample);
    }
    let records = classify_all(est, points)?;
    let y = aggregate(&records, est.setup_solves(), weights)?;
    Ok((y, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mc_std_reference_values() {
        assert_eq!(mc_std(0.5, 2500).unwrap(), 0.01);
        assert_eq!(mc_std(0.0, 10).unwrap(), 0.0);
        assert_eq!(mc_std(1.0, 10).unwrap(), 0.0);
        assert!(matches!(mc_std(0.5, 0), Err(Error::EmptySample)));
    }

    #[test]
    fn effort_formula() {
        let w = EffortWeights::default();
        assert_eq!(effort(&LevelCounts([100, 4, 1]), &w), 132.0);
        assert_eq!(effort(&LevelCounts([0, 0, 0]), &w), 0.0);
        assert_eq!(effort(&LevelCounts([0, 0, 2500 * 11]), &w), 440_000.0);
    }

    #[test]
    fn spec_defaults() {
        let s = PerfSpec::benchmark();
        assert!((s.c_lin() - 0.063_095_734_448_019_33).abs() < 1e-15);
        assert_eq!(s.frequencies.len(), 11);
        assert!(PerfSpec::new(3.0, vec![1.0]).is_err());
        assert!(PerfSpec::new(-24.0, vec![2.0, 1.0]).is_err());
    }

    #[test]
    fn safety_floor() {
        assert!(SafetyFactor::new(0.5).is_err());
        assert_eq!(SafetyFactor::default().value(), 2.0);
    }

    proptest! {
        #[test]
        fn mc_std_bound(y in 0.0f64..=1.0, n in 1usize..1_000_000) {
            let s = mc_std(y, n).unwrap();
            prop_assert!((s - (y * (1.0 - y) / n as f64).sqrt()).abs() <= 1e-15 * s.max(1e-300));
            prop_assert!(s <= 0.5 / (n as f64).sqrt());
        }
    }
}
