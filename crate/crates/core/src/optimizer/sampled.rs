//! Yield evaluation with common random numbers and sample fusion.

use std::collections::HashMap;
use std::sync::Arc;

use crate::distributions::{draw_offsets, realize_row, SampleSet, UncertainInput};
use crate::error::{check_dim, Error, Result};
use crate::estimator::{classify_all, effort, mc_std, EffortWeights, LevelCounts, YieldEstimator};

/// Yield at one mean on the active sample prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct YieldSample {
    pub mean: Vec<f64>,
    pub yield_value: f64,
    pub std: f64,
    pub n: usize,
    pub accepted: Vec<bool>,
}

impl YieldSample {
    /// Realized points `mean + xi_i` of the active sample.
    pub fn points(&self, offsets: &SampleSet) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| realize_row(offsets, i, &self.mean))
            .collect()
    }
}

/// Evaluates `Y(m)` on `m + xi_i` for one fixed offset sample. Verdicts are
/// cached per mean, and growing the sample classifies only the new offsets.
pub struct SampledYield {
    estimator: Arc<dyn YieldEstimator>,
    input: UncertainInput,
    offsets: SampleSet,
    n: usize,
    weights: EffortWeights,
    cache: HashMap<Vec<u64>, Vec<bool>>,
    solves: LevelCounts,
    point_evaluations: usize,
    yield_evaluations: usize,
}

fn key(mean: &[f64]) -> Vec<u64> {
    mean.iter().map(|x| x.to_bits()).collect()
}

impl SampledYield {
    pub fn new(
        estimator: Arc<dyn YieldEstimator>,
        input: UncertainInput,
        seed: u64,
        n: usize,
        weights: EffortWeights,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySample);
        }
        Ok(Self {
            offsets: draw_offsets(&input, n, seed),
            estimator,
            input,
            n,
            weights,
            cache: HashMap::new(),
            solves: LevelCounts::default(),
            point_evaluations: 0,
            yield_evaluations: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn input(&self) -> &UncertainInput {
        &self.input
    }

    pub fn offsets(&self) -> &SampleSet {
        &self.offsets
    }

    pub fn variances(&self) -> Vec<f64> {
        self.input.variances()
    }

    /// Changes the active sample size; offsets are only ever appended.
    pub fn set_n(&mut self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::EmptySample);
        }
        if n > self.offsets.len() {
            self.offsets.extend_to(&self.input, n)?;
        }
        self.n = n;
        Ok(())
    }

    pub fn evaluate(&mut self, mean: &[f64]) -> Result<YieldSample> {
        check_dim(self.input.dim(), mean.len())?;
        let k = key(mean);
        let have = self.cache.get(&k).map_or(0, Vec::len);
        if have < self.n {
            let pts: Vec<Vec<f64>> = (have..self.n)
                .map(|i| realize_row(&self.offsets, i, mean))
                .collect();
            let recs = classify_all(self.estimator.as_ref(), &pts)?;
            for r in &recs {
                self.solves.merge(&r.solves);
            }
            self.point_evaluations += recs.len();
            self.yield_evaluations += 1;
            self.cache
                .entry(k.clone())
                .or_default()
                .extend(recs.iter().map(|r| r.accepted()));
        }
        let accepted = self.cache[&k][..self.n].to_vec();
        let y = accepted.iter().filter(|a| **a).count() as f64 / self.n as f64;
        Ok(YieldSample {
            mean: mean.to_vec(),
            yield_value: y,
            std: mc_std(y, self.n)?,
            n: self.n,
            accepted,
        })
    }

    /// Sample points classified so far, over all means.
    pub fn point_evaluations(&self) -> usize {
        self.point_evaluations
    }

    /// Yield evaluations that classified at least one new point.
    pub fn yield_evaluations(&self) -> usize {
        self.yield_evaluations
    }

    pub fn solves(&self) -> LevelCounts {
        self.solves
    }

    /// Weighted FE solves including the estimator's setup.
    pub fn effort(&self) -> f64 {
        let mut all = self.solves;
        all.merge(&self.estimator.setup_solves());
        effort(&all, &self.weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{ClosedFormMc, PerfSpec};
    use crate::model::ManufacturedModel;

    fn sy(n: usize) -> SampledYield {
        let m = ManufacturedModel::new(vec![0.0], vec![0.05], vec![1.0]).unwrap();
        let spec = PerfSpec::new(-26.0, vec![1.0]).unwrap();
        let est = Arc::new(ClosedFormMc::new(Arc::new(m), &spec).unwrap());
        let inp = UncertainInput::new(vec![0.0], vec![0.7], vec![2.1]).unwrap();
        SampledYield::new(est, inp, 42, n, EffortWeights::default()).unwrap()
    }

    #[test]
    fn fusion_equals_fresh_sample() {
        let mut a = sy(100);
        let y100 = a.evaluate(&[0.2]).unwrap();
        a.set_n(200).unwrap();
        a.evaluate(&[0.2]).unwrap();
        a.set_n(300).unwrap();
        let fused = a.evaluate(&[0.2]).unwrap();
        let fresh = sy(300).evaluate(&[0.2]).unwrap();
        assert_eq!(fused, fresh);
        assert_eq!(fused.yield_value.to_bits(), fresh.yield_value.to_bits());
        assert_eq!(a.point_evaluations(), 300);
        assert_eq!(&fused.accepted[..100], &y100.accepted[..]);
    }

    #[test]
    fn cache_avoids_recomputation() {
        let mut a = sy(50);
        a.evaluate(&[0.1]).unwrap();
        a.evaluate(&[0.1]).unwrap();
        assert_eq!(a.point_evaluations(), 50);
        assert_eq!(a.yield_evaluations(), 1);
        a.set_n(20).unwrap();
        assert_eq!(a.evaluate(&[0.1]).unwrap().n, 20);
        assert_eq!(a.point_evaluations(), 50);
    }
}
