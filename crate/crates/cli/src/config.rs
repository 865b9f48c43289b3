//! Run configuration, read from TOML-formatted `.cfg` files.
//!
//! Every section and field is optional. Problem vectors left out are filled
//! from the variant's reference values by [`RunConfig::resolve`], and the
//! resolved configuration is what a run records.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use yieldopt_core::distributions::UncertainInput;
use yieldopt_core::estimator::{EffortWeights, EstimatorRegistry, PerfSpec, SafetyFactor};
use yieldopt_core::model::{linspace, ManufacturedModel};
use yieldopt_core::optimizer::NewtonParams;
use yieldopt_core::waveguide::{Variant, WaveguideSetup};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    /// Inlay length, offset length and two material parameters.
    Four,
    /// Inlay length, offset length and ten material parameters.
    Twelve,
    /// Inlay length only; the rest is fixed.
    Inlay,
    /// Scalar polynomial test model with known answers.
    Manufactured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManufacturedConfig {
    pub center: Vec<f64>,
    pub linear: Vec<f64>,
    pub offset: f64,
    pub quadratic: f64,
    pub slope_growth: f64,
    pub fe_bias: f64,
}

impl Default for ManufacturedConfig {
    fn default() -> Self {
        Self {
            center: vec![0.0, 0.0],
            linear: vec![0.04, 0.02],
            offset: 0.0,
            quadratic: 0.0,
            slope_growth: 0.0,
            fe_bias: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub variant: ProblemKind,
    /// Waveguide width in mm.
    pub a: f64,
    /// Waveguide height in mm.
    pub b: f64,
    pub mean: Option<Vec<f64>>,
    pub std: Option<Vec<f64>>,
    pub trunc: Option<Vec<f64>>,
    /// Fixed values of the inlay-only problem.
    pub offset_len: f64,
    pub p13: f64,
    pub p14: f64,
    pub manufactured: ManufacturedConfig,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            variant: ProblemKind::Four,
            a: 30.0,
            b: 15.0,
            mean: None,
            std: None,
            trunc: None,
            offset_len: 4.76,
            p13: 0.58,
            p14: 0.64,
            manufactured: ManufacturedConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpecConfig {
    pub threshold_db: f64,
    pub f_min_ghz: f64,
    pub f_max_ghz: f64,
    pub points: usize,
}

impl Default for SpecConfig {
    fn default() -> Self {
        Self {
            threshold_db: -24.0,
            f_min_ghz: 6.5,
            f_max_ghz: 7.5,
            points: 11,
        }
    }
}

impl SpecConfig {
    pub fn perf_spec(&self) -> Result<PerfSpec, CliError> {
        if self.points == 0 {
            return Err(CliError::Config("spec.points must be positive".into()));
        }
        let freqs = if self.points == 1 {
            vec![self.f_min_ghz * 1e9]
        } else {
            linspace(self.f_min_ghz * 1e9, self.f_max_ghz * 1e9, self.points)
        };
        Ok(PerfSpec::new(self.threshold_db, freqs)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub n: usize,
    pub seed: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { n: 2500, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    pub budget: usize,
    pub fe_error: bool,
    /// Write the surrogate to `surrogate.json`.
    pub save: bool,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            budget: 90,
            fe_error: true,
            save: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub methods: Vec<String>,
    pub safety: f64,
    /// Replace `safety` by the calibrated factor.
    pub calibrate: bool,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            methods: ["closed-form", "mc-fine", "mc-refine", "sc", "hybrid"]
                .map(String::from)
                .to_vec(),
            safety: 2.0,
            calibrate: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateConfig {
    pub points: usize,
    pub seed: u64,
}

impl Default for CalibrateConfig {
    fn default() -> Self {
        Self {
            points: 20,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    pub estimator: String,
    pub start: Option<Vec<f64>>,
    pub adaptive: bool,
    /// Independent sample for re-evaluating the final design.
    pub validation_n: usize,
    pub validation_seed: u64,
    pub newton: NewtonParams,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            estimator: "closed-form".into(),
            start: None,
            adaptive: false,
            validation_n: 2500,
            validation_seed: 999,
            newton: NewtonParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckConfig {
    pub estimator: String,
    pub delta: f64,
    pub eta: f64,
    pub schedule: Vec<usize>,
    pub cap: usize,
    /// Means at which to compare; the problem mean if empty.
    pub points: Vec<Vec<f64>>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            estimator: "closed-form".into(),
            delta: 1e-3,
            eta: 0.05,
            schedule: vec![1000, 10_000, 100_000],
            cap: 100_000,
            points: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub spec: SpecConfig,
    pub sample: SampleConfig,
    pub surrogate: SurrogateConfig,
    pub estimate: EstimateConfig,
    pub calibrate: CalibrateConfig,
    pub optimize: OptimizeConfig,
    pub gradcheck: GradCheckConfig,
    pub effort_weights: [f64; 3],
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemConfig::default(),
            spec: SpecConfig::default(),
            sample: SampleConfig::default(),
            surrogate: SurrogateConfig::default(),
            estimate: EstimateConfig::default(),
            calibrate: CalibrateConfig::default(),
            optimize: OptimizeConfig::default(),
            gradcheck: GradCheckConfig::default(),
            effort_weights: EffortWeights::default().0,
            output: PathBuf::from("out"),
        }
    }
}

const MEAN_12: [f64; 12] = [8.6, 3.8, 2.0, 0.5, 0.7, 0.6, 1.4, 2.8, 1.7, 0.8, 0.3, 1.4];
const START_12: [f64; 12] = [9.0, 5.0, 2.0, 0.5, 1.0, 1.0, 1.1, 2.5, 1.0, 1.0, 1.0, 2.0];

struct Defaults {
    mean: Vec<f64>,
    std: Vec<f64>,
    trunc: Vec<f64>,
    start: Vec<f64>,
}

fn geometric_then_material(n_geo: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let std = (0..n).map(|i| if i < n_geo { 0.7 } else { 0.3 }).collect();
    let trunc = (0..n).map(|i| if i < n_geo { 3.0 } else { 0.3 }).collect();
    (std, trunc)
}

impl ProblemConfig {
    fn defaults(&self) -> Defaults {
        match self.variant {
            ProblemKind::Four => {
                let (std, trunc) = geometric_then_material(2, 4);
                Defaults {
                    mean: vec![10.36, 4.76, 0.58, 0.64],
                    std,
                    trunc,
                    start: vec![9.0, 5.0, 1.0, 1.0],
                }
            }
            ProblemKind::Twelve => {
                let (std, trunc) = geometric_then_material(2, 12);
                Defaults {
                    mean: MEAN_12.to_vec(),
                    std,
                    trunc,
                    start: START_12.to_vec(),
                }
            }
            ProblemKind::Inlay => Defaults {
                mean: vec![10.36],
                std: vec![0.7],
                trunc: vec![3.0],
                start: vec![9.0],
            },
            ProblemKind::Manufactured => {
                let d = self.manufactured.center.len();
                Defaults {
                    mean: self.manufactured.center.clone(),
                    std: vec![1.0; d],
                    trunc: vec![3.0; d],
                    start: self.manufactured.center.iter().map(|c| c + 1.0).collect(),
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self.variant {
            ProblemKind::Four => 4,
            ProblemKind::Twelve => 12,
            ProblemKind::Inlay => 1,
            ProblemKind::Manufactured => self.manufactured.center.len(),
        }
    }

    pub fn input(&self) -> Result<UncertainInput, CliError> {
        let (Some(m), Some(s), Some(t)) = (&self.mean, &self.std, &self.trunc) else {
            return Err(CliError::Config("problem is not resolved".into()));
        };
        Ok(UncertainInput::new(m.clone(), s.clone(), t.clone())?)
    }

    pub fn waveguide(&self) -> Option<WaveguideSetup> {
        let variant = match self.variant {
            ProblemKind::Four => Variant::Four,
            ProblemKind::Twelve => Variant::Twelve,
            ProblemKind::Inlay => Variant::InlayOnly {
                offset_len: self.offset_len,
                p13: self.p13,
                p14: self.p14,
            },
            ProblemKind::Manufactured => return None,
        };
        Some(WaveguideSetup::new(self.a, self.b, variant))
    }

    pub fn manufactured_model(&self, freqs: Vec<f64>) -> Result<ManufacturedModel, CliError> {
        let c = &self.manufactured;
        let mut m = ManufacturedModel::new(c.center.clone(), c.linear.clone(), freqs)?;
        m.offset = c.offset;
        m.quadratic = c.quadratic;
        m.slope_growth = c.slope_growth;
        m.fe_bias = c.fe_bias;
        Ok(m)
    }
}

fn check_len(name: &str, v: &[f64], d: usize) -> Result<(), CliError> {
    if v.len() != d {
        return Err(CliError::Config(format!(
            "{name} has {} entries, the problem has {d}",
            v.len()
        )));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Fills variant defaults and validates everything a run needs.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let d = self.problem.dim();
        if d == 0 {
            return Err(CliError::Config("problem has no parameters".into()));
        }
        let defaults = self.problem.defaults();
        let p = &mut self.problem;
        p.mean.get_or_insert(defaults.mean);
        p.std.get_or_insert(defaults.std);
        p.trunc.get_or_insert(defaults.trunc);
        self.optimize.start.get_or_insert(defaults.start);
        if self.gradcheck.points.is_empty() {
            self.gradcheck.points = vec![self.problem.mean.clone().unwrap_or_default()];
        }
        if self.problem.variant == ProblemKind::Manufactured {
            check_len("manufactured.linear", &self.problem.manufactured.linear, d)?;
        }
        for (name, v) in [
            ("problem.mean", &self.problem.mean),
            ("problem.std", &self.problem.std),
            ("problem.trunc", &self.problem.trunc),
            ("optimize.start", &self.optimize.start),
        ] {
            check_len(name, v.as_deref().unwrap_or_default(), d)?;
        }
        for x in &self.gradcheck.points {
            check_len("gradcheck.points", x, d)?;
        }
        self.problem.input()?;
        self.spec.perf_spec()?;
        if self.sample.n == 0 {
            return Err(CliError::Config("sample.n must be positive".into()));
        }
        if self.surrogate.budget == 0 {
            return Err(CliError::Config(
                "surrogate.budget must be at least 1".into(),
            ));
        }
        SafetyFactor::new(self.estimate.safety)?;
        let registry = EstimatorRegistry::default();
        let names = self
            .estimate
            .methods
            .iter()
            .chain([&self.optimize.estimator, &self.gradcheck.estimator]);
        for name in names {
            if !registry.contains(name) {
                return Err(CliError::Config(format!(
                    "unknown estimator `{name}`; known: {}",
                    registry.names().join(", ")
                )));
            }
        }
        self.optimize.newton.validate()?;
        if !(self.gradcheck.delta > 0.0 && self.gradcheck.eta > 0.0)
            || self.gradcheck.schedule.is_empty()
        {
            return Err(CliError::Config(
                "gradcheck needs positive delta, eta and a schedule".into(),
            ));
        }
        if self.effort_weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(CliError::Config(
                "effort weights must be non-negative".into(),
            ));
        }
        Ok(self)
    }

    pub fn weights(&self) -> EffortWeights {
        EffortWeights(self.effort_weights)
    }
}
