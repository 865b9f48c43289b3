use std::collections::BTreeMap;
use std::sync::Arc;

use super::{ClosedFormMc, HybridMc, McFine, McRefine, PerfSpec, ScMc, YieldEstimator};
use crate::error::{Error, Result};
use crate::model::FidelityModel;
use crate::surrogate::SparseSurrogate;

/// Everything an estimator may need.
#[derive(Clone)]
pub struct EstimatorContext {
    pub model: Arc<dyn FidelityModel>,
    pub spec: PerfSpec,
    pub surrogate: Option<Arc<SparseSurrogate>>,
    pub safety: f64,
}

impl EstimatorContext {
    fn surrogate(&self, name: &str) -> Result<Arc<SparseSurrogate>> {
        self.surrogate
            .clone()
            .ok_or_else(|| Error::MissingComponent(name.into(), "a surrogate"))
    }
}

pub type EstimatorFactory = fn(&EstimatorContext) -> Result<Box<dyn YieldEstimator>>;

/// Estimators by name.
pub struct EstimatorRegistry {
    factories: BTreeMap<String, EstimatorFactory>,
}

impl EstimatorRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &str, factory: EstimatorFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn create(&self, name: &str, ctx: &EstimatorContext) -> Result<Box<dyn YieldEstimator>> {
        let f = self
            .factories
            .get(name)
            .ok_or_else(|| Error::UnknownEstimator(name.to_string()))?;
        f(ctx)
    }
}

impl Default for EstimatorRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register("closed-form", |c| {
            Ok(Box::new(ClosedFormMc::new(c.model.clone(), &c.spec)?))
        });
        r.register("mc-fine", |c| {
            Ok(Box::new(McFine::new(c.model.clone(), &c.spec)?))
        });
        r.register("mc-refine", |c| {
            Ok(Box::new(McRefine::new(c.model.clone(), &c.spec, c.safety)?))
        });
        r.register("sc", |c| {
            Ok(Box::new(ScMc::new(c.surrogate("sc")?, &c.spec)?))
        });
        r.register("hybrid", |c| {
            Ok(Box::new(HybridMc::new(
                c.model.clone(),
                c.surrogate("hybrid")?,
                &c.spec,
                c.safety,
            )?))
        });
        r
    }
}
