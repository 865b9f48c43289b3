//! Weighted Leja sequences on a bounded interval.

use serde::{Deserialize, Serialize};

/// Candidate grid size for the coarse argmax.
pub const LEJA_GRID: usize = 10_000;

const TIE_TOL: f64 = 1e-12;

pub trait LejaWeight: Send + Sync {
    fn support(&self) -> (f64, f64);

    /// `log sqrt(w(x))` up to an additive constant.
    fn log_sqrt_weight(&self, x: f64) -> f64;
}

/// Constant weight on `[-1, 1]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformWeight;

impl LejaWeight for UniformWeight {
    fn support(&self) -> (f64, f64) {
        (-1.0, 1.0)
    }

    fn log_sqrt_weight(&self, _x: f64) -> f64 {
        0.0
    }
}

/// Standard normal density restricted to `[-half_width, half_width]`.
#[derive(Debug, Clone, Copy)]
pub struct GaussianWeight {
    pub half_width: f64,
}

impl Default for GaussianWeight {
    fn default() -> Self {
        Self { half_width: 10.0 }
    }
}

impl LejaWeight for GaussianWeight {
    fn support(&self) -> (f64, f64) {
        (-self.half_width, self.half_width)
    }

    fn log_sqrt_weight(&self, x: f64) -> f64 {
        -0.25 * x * x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WeightKind {
    #[default]
    Uniform,
    Gaussian,
}

impl WeightKind {
    pub fn weight(&self) -> Box<dyn LejaWeight> {
        match self {
            WeightKind::Uniform => Box::new(UniformWeight),
            WeightKind::Gaussian => Box::new(GaussianWeight::default()),
        }
    }
}

/// `log(sqrt(w(x)) * prod |x - x_i|)`
pub fn leja_objective(weight: &dyn LejaWeight, nodes: &[f64], x: f64) -> f64 {
    nodes.iter().fold(weight.log_sqrt_weight(x), |acc, xi| {
        acc + (x - xi).abs().ln()
    })
}

/// Next node after `nodes`: grid argmax, then golden-section polish between
/// the neighbouring grid points. Ties go to the smallest abscissa.
pub fn next_leja_node(weight: &dyn LejaWeight, nodes: &[f64]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let (lo, hi) = weight.support();
    let h = (hi - lo) / (LEJA_GRID - 1) as f64;
    let grid = |i: usize| {
        if i == LEJA_GRID - 1 {
            hi
        } else {
            lo + h * i as f64
        }
    };
    let f = |x: f64| leja_objective(weight, nodes, x);

    let better = |v: f64, best: f64| {
        if best.is_finite() {
            v > best + TIE_TOL * best.abs().max(1.0)
        } else {
            v > best
        }
    };
    let mut best_i = 0;
    let mut best = f(grid(0));
    for i in 1..LEJA_GRID {
        let v = f(grid(i));
        if better(v, best) {
            best = v;
            best_i = i;
        }
    }
    let a = grid(best_i.saturating_sub(1));
    let b = grid((best_i + 1).min(LEJA_GRID - 1));
    let x = golden_max(&f, a, b);
    if better(f(x), best) {
        x
    } else {
        grid(best_i)
    }
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        c
    } else {
        d
    }
}

/// First `n` nodes, starting at 0.
pub fn leja_sequence(weight: &dyn LejaWeight, n: usize) -> Vec<f64> {
    let mut nodes = Vec::with_capacity(n);
    while nodes.len() < n {
        let x = next_leja_node(weight, &nodes);
        nodes.push(x);
    }
    nodes
}
