//! Dimension-adaptive sparse-grid interpolation on weighted Leja nodes.
//!
//! For every frequency point the surrogate interpolates the QoI, the signed
//! FE error residual and the level-0 primal and dual coefficient vectors in
//! the tensor Newton basis `H_a(x) = prod_k h_{a_k}(x_k)`,
//! `h_n(x) = prod_{i<n} (x - x_i) / (x_n - x_i)`.

mod index_set;
mod leja;

pub use index_set::{MultiIndex, MultiIndexSet};
pub use leja::{
    leja_objective, leja_sequence, next_leja_node, GaussianWeight, LejaWeight, UniformWeight,
    WeightKind, LEJA_GRID,
};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use crate::distributions::UncertainInput;
use crate::error::{check_dim, Error, Result};
use crate::model::FidelityModel;

type C64 = Complex64;

pub const FORMAT_VERSION: &str = "yieldopt-surrogate/1";

/// Surrogate-side absolute slack when testing box membership.
const BOX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    /// Maximum number of collocation nodes.
    pub budget: usize,
    /// Stop once the best candidate score falls below this fraction of the
    /// largest root QoI magnitude.
    pub rel_tol: f64,
    /// Also interpolate the level-0 FE error (one level-1 solve per node
    /// and frequency).
    pub fe_error: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            budget: 90,
            rel_tol: 1e-13,
            fe_error: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct BuildStats {
    pub nodes: usize,
    pub level0_solves: usize,
    pub level1_solves: usize,
    /// Best remaining candidate score when the build stopped.
    pub final_score: f64,
    /// True if the build stopped before exhausting the budget.
    pub converged: bool,
}

/// A value with an extrapolation flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluated<T> {
    pub value: T,
    pub extrapolated: bool,
}

/// Newton basis values of every member of the index set at one point.
#[derive(Debug, Clone)]
pub struct Basis {
    weights: Vec<f64>,
    pub extrapolated: bool,
}

#[derive(Debug, Clone)]
pub struct SparseSurrogate {
    center: Vec<f64>,
    half_width: Vec<f64>,
    nodes: Vec<f64>,
    denom: Vec<f64>,
    set: MultiIndexSet,
    n_freq: usize,
    n_dof: usize,
    surplus: Vec<Vec<C64>>,
    stats: BuildStats,
}

fn newton_denominators(nodes: &[f64]) -> Vec<f64> {
    (0..nodes.len())
        .map(|k| nodes[..k].iter().map(|xi| nodes[k] - xi).product())
        .collect()
}

impl SparseSurrogate {
    fn stride(&self) -> usize {
        2 + 2 * self.n_dof
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn n_freq(&self) -> usize {
        self.n_freq
    }

    pub fn n_dof(&self) -> usize {
        self.n_dof
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn index_set(&self) -> &MultiIndexSet {
        &self.set
    }

    pub fn stats(&self) -> BuildStats {
        self.stats
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn half_width(&self) -> &[f64] {
        &self.half_width
    }

    /// Standardized coordinates of a parameter point.
    pub fn to_unit(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .zip(&self.center)
            .zip(&self.half_width)
            .map(|((x, c), w)| (x - c) / w)
            .collect()
    }

    /// Parameter point of a multi-index's collocation node.
    pub fn node_point(&self, a: &[u16]) -> Vec<f64> {
        a.iter()
            .zip(&self.center)
            .zip(&self.half_width)
            .map(|((&k, c), w)| c + w * self.nodes[k as usize])
            .collect()
    }

    pub fn in_box(&self, p: &[f64]) -> bool {
        self.to_unit(p).iter().all(|x| x.abs() <= 1.0 + BOX_TOL)
    }

    pub fn basis(&self, p: &[f64]) -> Result<Basis> {
        check_dim(self.dim(), p.len())?;
        let x = self.to_unit(p);
        let extrapolated = x.iter().any(|v| v.abs() > 1.0 + BOX_TOL);
        let order = self.set.max_order() + 1;
        let table: Vec<Vec<f64>> = x
            .iter()
            .map(|&xd| {
                let mut h = Vec::with_capacity(order);
                let mut num = 1.0;
                for n in 0..order {
                    if n > 0 {
                        num *= xd - self.nodes[n - 1];
                    }
                    h.push(num / self.denom[n]);
                }
                h
            })
            .collect();
        let weights = self
            .set
            .iter()
            .map(|a| {
                a.iter()
                    .enumerate()
                    .map(|(d, &k)| table[d][k as usize])
                    .product()
            })
            .collect();
        Ok(Basis {
            weights,
            extrapolated,
        })
    }

    fn combine(&self, b: &Basis, j: usize, start: usize, len: usize) -> Vec<C64> {
        let off = j * self.stride() + start;
        let mut out = vec![C64::new(0.0, 0.0); len];
        for (w, s) in b.weights.iter().zip(&self.surplus) {
            if *w == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(&s[off..off + len]) {
                *o += v * *w;
            }
        }
        out
    }

    fn check_freq(&self, j: usize) -> Result<()> {
        if j >= self.n_freq {
            return Err(Error::InvalidInput(format!(
                "frequency index {j} out of range"
            )));
        }
        Ok(())
    }

    pub fn qoi_at(&self, b: &Basis, j: usize) -> C64 {
        self.combine(b, j, 0, 1)[0]
    }

    /// Interpolated FE error modulus; nonnegative by construction.
    pub fn fe_error_at(&self, b: &Basis, j: usize) -> f64 {
        self.combine(b, j, 1, 1)[0].norm()
    }

    pub fn primal_at(&self, b: &Basis, j: usize) -> Vec<C64> {
        self.combine(b, j, 2, self.n_dof)
    }

    pub fn dual_at(&self, b: &Basis, j: usize) -> Vec<C64> {
        self.combine(b, j, 2 + self.n_dof, self.n_dof)
    }

    /// `|z~^H (f - A u~)|` with the model's level-0 assembly at `p`.
    pub fn sc_error_at(
        &self,
        model: &dyn FidelityModel,
        b: &Basis,
        p: &[f64],
        j: usize,
    ) -> Result<f64> {
        let u = self.primal_at(b, j);
        let z = self.dual_at(b, j);
        Ok(model.sc_residual(p, j, &u, &z)?.norm())
    }

    pub fn eval_qoi(&self, p: &[f64], j: usize) -> Result<Evaluated<C64>> {
        self.check_freq(j)?;
        let b = self.basis(p)?;
        Ok(Evaluated {
            value: self.qoi_at(&b, j),
            extrapolated: b.extrapolated,
        })
    }

    pub fn eval_primal(&self, p: &[f64], j: usize) -> Result<Evaluated<Vec<C64>>> {
        self.check_freq(j)?;
        let b = self.basis(p)?;
        Ok(Evaluated {
            value: self.primal_at(&b, j),
            extrapolated: b.extrapolated,
        })
    }

    pub fn eval_dual(&self, p: &[f64], j: usize) -> Result<Evaluated<Vec<C64>>> {
        self.check_freq(j)?;
        let b = self.basis(p)?;
        Ok(Evaluated {
            value: self.dual_at(&b, j),
            extrapolated: b.extrapolated,
        })
    }

    pub fn fe_error_surrogate(&self, p: &[f64], j: usize) -> Result<f64> {
        self.check_freq(j)?;
        Ok(self.fe_error_at(&self.basis(p)?, j))
    }

    pub fn sc_error_indicator(
        &self,
        model: &dyn FidelityModel,
        p: &[f64],
        j: usize,
    ) -> Result<f64> {
        self.check_freq(j)?;
        self.sc_error_at(model, &self.basis(p)?, p, j)
    }

    /// Checks that `model` produces coefficient vectors this surrogate can use.
    pub fn check_model(&self, model: &dyn FidelityModel) -> Result<()> {
        check_dim(self.dim(), model.dim())?;
        check_dim(self.n_freq, model.frequencies().len())?;
        check_dim(self.n_dof, model.dof_count(0))
    }

    fn push_node(&mut self, a: MultiIndex, values: Vec<C64>) {
        let surplus = if self.set.is_empty() || self.surplus.is_empty() {
            values
        } else {
            let b = self.basis(&self.node_point(&a)).expect("node inside box");
            let mut s = values;
            for (w, prev) in b.weights.iter().zip(&self.surplus) {
                if *w == 0.0 {
                    continue;
                }
                for (o, v) in s.iter_mut().zip(prev) {
                    *o -= v * *w;
                }
            }
            s
        };
        if !self.set.contains(&a) {
            assert!(self.set.insert(a));
        }
        self.surplus.push(surplus);
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = SurrogateFile::from(self);
        std::fs::write(path, serde_json::to_string(&file)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&SurrogateFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: SurrogateFile = serde_json::from_str(text)?;
        f.try_into()
    }
}

/// Values at one node for every frequency: `[qoi, fe_eta, primal.., dual..]`.
fn node_values(
    model: &dyn FidelityModel,
    p: &[f64],
    n_dof: usize,
    fe_error: bool,
) -> Result<Vec<C64>> {
    let per_freq: Vec<Result<Vec<C64>>> = (0..model.frequencies().len())
        .into_par_iter()
        .map(|j| {
            let s0 = model.solve(p, j, 0)?;
            check_dim(n_dof, s0.primal.len())?;
            let eta = if fe_error {
                model.fe_error(p, j, 0, &s0)?.0
            } else {
                C64::new(0.0, 0.0)
            };
            let mut v = Vec::with_capacity(2 + 2 * n_dof);
            v.push(s0.qoi);
            v.push(eta);
            v.extend_from_slice(&s0.primal);
            v.extend_from_slice(&s0.dual);
            Ok(v)
        })
        .collect();
    let mut out = Vec::new();
    for v in per_freq {
        out.extend(v?);
    }
    Ok(out)
}

/// Greedy dimension-adaptive build on the box `mean ± trunc`.
///
/// Candidates are the admissible forward neighbours of the current set. Each
/// is scored by `max_j |z~^H (f - A u~)|` at its node, which needs assembly
/// only. The best candidate (lexicographically smallest on ties) is admitted
/// and solved. A candidate's score depends only on surpluses of indices below
/// it, so scores are computed once per candidate.
pub fn build_adaptive(
    model: &dyn FidelityModel,
    input: &UncertainInput,
    opts: &BuildOptions,
) -> Result<SparseSurrogate> {
    if opts.budget < 1 {
        return Err(Error::BudgetTooSmall(opts.budget));
    }
    check_dim(model.dim(), input.dim())?;
    let fe_error = opts.fe_error && model.max_level() >= 1;
    let dim = input.dim();
    let n_freq = model.frequencies().len();
    let n_dof = model.dof_count(0);
    let nodes = leja_sequence(&UniformWeight, opts.budget.min(64));
    let mut sur = SparseSurrogate {
        center: input.mean().to_vec(),
        half_width: input.trunc().to_vec(),
        denom: newton_denominators(&nodes),
        nodes,
        set: MultiIndexSet::root(dim),
        n_freq,
        n_dof,
        surplus: Vec::new(),
        stats: BuildStats::default(),
    };
    let root = vec![0u16; dim];
    let v = node_values(model, &sur.node_point(&root), n_dof, fe_error)?;
    let scale = (0..n_freq)
        .map(|j| v[j * sur.stride()].norm())
        .fold(0.0, f64::max);
    sur.push_node(root, v);
    let solves_per_node = n_freq;

    let mut scores: BTreeMap<MultiIndex, f64> = BTreeMap::new();
    let mut final_score = 0.0;
    let mut converged = false;
    while sur.set.len() < opts.budget {
        let fresh: Vec<MultiIndex> = sur
            .set
            .candidates()
            .into_iter()
            .filter(|c| {
                !scores.contains_key(c)
                    && (c.iter().max().copied().unwrap_or(0) as usize) < sur.nodes.len()
            })
            .collect();
        let fresh_scores: Vec<Result<f64>> = fresh
            .par_iter()
            .map(|a| {
                let p = sur.node_point(a);
                let b = sur.basis(&p)?;
                let mut best = 0.0f64;
                for j in 0..n_freq {
                    best = best.max(sur.sc_error_at(model, &b, &p, j)?);
                }
                Ok(best)
            })
            .collect();
        for (a, s) in fresh.into_iter().zip(fresh_scores) {
            scores.insert(a, s?);
        }
        // BTreeMap iterates lexicographically, strict > keeps the first on ties
        let mut pick: Option<(&MultiIndex, f64)> = None;
        for (a, &s) in &scores {
            if pick.is_none_or(|(_, b)| s > b) {
                pick = Some((a, s));
            }
        }
        let Some((a, s)) = pick else {
            converged = true;
            break;
        };
        final_score = s;
        if s <= opts.rel_tol * scale {
            converged = true;
            break;
        }
        let a = a.clone();
        scores.remove(&a);
        let v = node_values(model, &sur.node_point(&a), n_dof, fe_error)?;
        sur.push_node(a, v);
    }
    if !converged {
        final_score = scores.values().copied().fold(0.0, f64::max);
    }
    sur.stats = BuildStats {
        nodes: sur.set.len(),
        level0_solves: sur.set.len() * solves_per_node,
        level1_solves: if fe_error {
            sur.set.len() * solves_per_node
        } else {
            0
        },
        final_score,
        converged,
    };
    Ok(sur)
}

#[derive(Serialize, Deserialize)]
struct SurrogateFile {
    format: String,
    center: Vec<f64>,
    half_width: Vec<f64>,
    leja_nodes: Vec<f64>,
    n_freq: usize,
    n_dof: usize,
    indices: Vec<MultiIndex>,
    surplus: Vec<Vec<C64>>,
    stats: BuildStats,
}

impl From<&SparseSurrogate> for SurrogateFile {
    fn from(s: &SparseSurrogate) -> Self {
        Self {
            format: FORMAT_VERSION.into(),
            center: s.center.clone(),
            half_width: s.half_width.clone(),
            leja_nodes: s.nodes.clone(),
            n_freq: s.n_freq,
            n_dof: s.n_dof,
            indices: s.set.iter().cloned().collect(),
            surplus: s.surplus.clone(),
            stats: s.stats,
        }
    }
}

impl TryFrom<SurrogateFile> for SparseSurrogate {
    type Error = Error;

    fn try_from(f: SurrogateFile) -> Result<Self> {
        if f.format != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported format `{}`", f.format)));
        }
        let dim = f.center.len();
        if f.half_width.len() != dim || f.half_width.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Format("bad box".into()));
        }
        let set = MultiIndexSet::from_order(dim, f.indices)
            .ok_or_else(|| Error::Format("index set is not downward closed".into()))?;
        if set.max_order() >= f.leja_nodes.len().max(1) && set.len() > 1 {
            return Err(Error::Format("index exceeds stored Leja nodes".into()));
        }
        let stride = 2 + 2 * f.n_dof;
        if f.surplus.len() != set.len() || f.surplus.iter().any(|s| s.len() != f.n_freq * stride) {
            return Err(Error::Format("surplus table has the wrong shape".into()));
        }
        Ok(Self {
            center: f.center,
            half_width: f.half_width,
            denom: newton_denominators(&f.leja_nodes),
            nodes: f.leja_nodes,
            set,
            n_freq: f.n_freq,
            n_dof: f.n_dof,
            surplus: f.surplus,
            stats: f.stats,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ManufacturedModel;

    fn input(dim: usize) -> UncertainInput {
        UncertainInput::new(vec![1.0; dim], vec![0.5; dim], vec![1.0; dim]).unwrap()
    }

    fn model(linear: Vec<f64>) -> ManufacturedModel {
        let d = linear.len();
        ManufacturedModel::new(vec![1.0; d], linear, vec![1.0, 2.0, 3.0]).unwrap()
    }

    #[test]
    fn budget_one_is_constant() {
        let m = model(vec![0.3, -0.2]);
        let s = build_adaptive(
            &m,
            &input(2),
            &BuildOptions {
                budget: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(s.len(), 1);
        let v = s.eval_qoi(&[1.7, 0.4], 0).unwrap();
        assert_eq!(v.value, m.solve(&[1.0, 1.0], 0, 0).unwrap().qoi);
        assert!(!v.extrapolated);
    }

    #[test]
    fn zero_budget_is_rejected() {
        let m = model(vec![0.3]);
        let r = build_adaptive(
            &m,
            &input(1),
            &BuildOptions {
                budget: 0,
                ..Default::default()
            },
        );
        assert!(matches!(r, Err(Error::BudgetTooSmall(0))));
    }

    #[test]
    fn linear_in_first_direction_only() {
        let mut m = model(vec![0.4, 0.0, 0.0]);
        m.offset = 0.01;
        let s = build_adaptive(
            &m,
            &input(3),
            &BuildOptions {
                budget: 20,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.stats().converged);
        assert_eq!(s.index_set().get(1), &vec![1, 0, 0]);
        for p in [[0.2, 1.3, 0.9], [1.9, 0.1, 1.5]] {
            for j in 0..3 {
                let want = m.exact_qoi(&p, j).unwrap().unwrap();
                assert!((s.eval_qoi(&p, j).unwrap().value - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn interpolates_at_nodes_and_serializes() {
        let mut m = model(vec![0.4, -0.3]);
        m.quadratic = 0.2;
        m.slope_growth = 0.1;
        m.fe_bias = 1e-3;
        let s = build_adaptive(
            &m,
            &input(2),
            &BuildOptions {
                budget: 6,
                ..Default::default()
            },
        )
        .unwrap();
        // quadratic in p1, linear in p2: {0, e1, 2e1, e2} is exact
        assert_eq!(s.len(), 4);
        assert!(s.stats().converged);
        for a in s.index_set().iter() {
            let p = s.node_point(a);
            for j in 0..3 {
                let want = m.solve(&p, j, 0).unwrap();
                let got = s.eval_qoi(&p, j).unwrap().value;
                assert!((got - want.qoi).norm() <= 1e-12 * want.qoi.norm().max(1.0));
                assert!(s.sc_error_indicator(&m, &p, j).unwrap() < 1e-10);
                let fe = s.fe_error_surrogate(&p, j).unwrap();
                assert!((fe - 0.75e-3).abs() < 1e-12);
            }
        }
        let back = SparseSurrogate::from_json(&s.to_json().unwrap()).unwrap();
        for p in [[0.3, 1.2], [1.6, 0.5], [2.5, 0.0]] {
            assert_eq!(back.eval_qoi(&p, 1).unwrap(), s.eval_qoi(&p, 1).unwrap());
        }
        assert!(back.eval_qoi(&[2.5, 0.0], 1).unwrap().extrapolated);
    }

    #[test]
    fn rejects_foreign_format() {
        let m = model(vec![0.4]);
        let s = build_adaptive(
            &m,
            &input(1),
            &BuildOptions {
                budget: 2,
                ..Default::default()
            },
        )
        .unwrap();
        let text = s.to_json().unwrap().replace(FORMAT_VERSION, "other/9");
        assert!(matches!(
            SparseSurrogate::from_json(&text),
            Err(Error::Format(_))
        ));
    }
}
