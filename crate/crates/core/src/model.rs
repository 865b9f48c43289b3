//! Multi-fidelity models seen by the surrogate and the estimators.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{check_dim, Error, Result};
use crate::waveguide::{
    self, assemble, fe_error_residual, FEField, Mesh1D, MeshTopology, WaveguideSetup,
    BASE_ELEMENTS, MAX_LEVEL,
};

type C64 = Complex64;

/// QoI with the primal and dual coefficient vectors that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSolution {
    pub qoi: C64,
    pub primal: Vec<C64>,
    pub dual: Vec<C64>,
}

/// A parametrized linear model `A(p) u = f(p)` with QoI `q^H u` on a
/// hierarchy of discretization levels and a list of frequency points.
pub trait FidelityModel: Send + Sync {
    fn dim(&self) -> usize;

    /// Frequency points in Hz.
    fn frequencies(&self) -> &[f64];

    fn max_level(&self) -> usize;

    fn dof_count(&self, level: usize) -> usize;

    fn solve(&self, p: &[f64], j: usize, level: usize) -> Result<LevelSolution>;

    /// Signed dual-weighted residual of `coarse` (solved at `level`) in the
    /// weak form of `level + 1`, with the finer solution it used.
    fn fe_error(
        &self,
        p: &[f64],
        j: usize,
        level: usize,
        coarse: &LevelSolution,
    ) -> Result<(C64, LevelSolution)>;

    /// `z^H (f(p) - A(p) u)` at level 0; assembly only.
    fn sc_residual(&self, p: &[f64], j: usize, u: &[C64], z: &[C64]) -> Result<C64>;

    /// False for parameter points that describe no valid configuration.
    fn is_feasible(&self, _p: &[f64]) -> bool {
        true
    }

    /// Reference QoI without discretization error, if one exists.
    fn exact_qoi(&self, _p: &[f64], _j: usize) -> Option<Result<C64>> {
        None
    }
}

fn check_freq(model: &dyn FidelityModel, j: usize) -> Result<()> {
    if j >= model.frequencies().len() {
        return Err(Error::InvalidInput(format!(
            "frequency index {j} out of range"
        )));
    }
    Ok(())
}

/// Equidistant frequency grid including both endpoints.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// The dielectric-inlay waveguide with a fixed mesh topology.
#[derive(Debug, Clone)]
pub struct WaveguideModel {
    setup: WaveguideSetup,
    freqs: Vec<f64>,
    topology: MeshTopology,
}

impl WaveguideModel {
    /// Mesh topology is derived from `nominal` and kept for every point.
    pub fn new(setup: WaveguideSetup, freqs_hz: Vec<f64>, nominal: &[f64]) -> Result<Self> {
        let (geom, _) = setup.configure(nominal)?;
        if freqs_hz.is_empty() {
            return Err(Error::InvalidInput("empty frequency grid".into()));
        }
        for &f in &freqs_hz {
            geom.port_kz(2.0 * PI * f)?;
        }
        Ok(Self {
            setup,
            freqs: freqs_hz,
            topology: MeshTopology::for_geometry(&geom, BASE_ELEMENTS),
        })
    }

    pub fn setup(&self) -> &WaveguideSetup {
        &self.setup
    }

    pub fn topology(&self) -> MeshTopology {
        self.topology
    }

    fn omega(&self, j: usize) -> f64 {
        2.0 * PI * self.freqs[j]
    }
}

impl FidelityModel for WaveguideModel {
    fn dim(&self) -> usize {
        self.setup.dim()
    }

    fn frequencies(&self) -> &[f64] {
        &self.freqs
    }

    fn max_level(&self) -> usize {
        MAX_LEVEL
    }

    fn dof_count(&self, level: usize) -> usize {
        2 * (self.topology.elements() << level) + 1
    }

    fn solve(&self, p: &[f64], j: usize, level: usize) -> Result<LevelSolution> {
        check_freq(self, j)?;
        let (geom, mat) = self.setup.configure(p)?;
        let mesh = Mesh1D::at_level(&geom, self.topology, level)?;
        let sol = waveguide::solve(&geom, &mat, self.omega(j), &mesh)?;
        Ok(LevelSolution {
            qoi: sol.qoi,
            primal: sol.primal.dofs,
            dual: sol.dual.dofs,
        })
    }

    fn fe_error(
        &self,
        p: &[f64],
        j: usize,
        level: usize,
        coarse: &LevelSolution,
    ) -> Result<(C64, LevelSolution)> {
        check_freq(self, j)?;
        if level >= MAX_LEVEL {
            return Err(Error::IndicatorUnavailable(level));
        }
        let (geom, mat) = self.setup.configure(p)?;
        let mesh = Mesh1D::at_level(&geom, self.topology, level)?;
        check_dim(mesh.dof_count(), coarse.primal.len())?;
        let field = FEField {
            dofs: coarse.primal.clone(),
            mesh,
            omega: self.omega(j),
            e0: 1.0,
        };
        let (eta, fine) = fe_error_residual(&geom, &mat, &field)?;
        Ok((
            eta,
            LevelSolution {
                qoi: fine.qoi,
                primal: fine.primal.dofs,
                dual: fine.dual.dofs,
            },
        ))
    }

    fn sc_residual(&self, p: &[f64], j: usize, u: &[C64], z: &[C64]) -> Result<C64> {
        check_freq(self, j)?;
        let (geom, mat) = self.setup.configure(p)?;
        let mesh = Mesh1D::new(&geom, self.topology)?;
        check_dim(mesh.dof_count(), u.len())?;
        check_dim(mesh.dof_count(), z.len())?;
        let sys = assemble(&geom, &mat, self.omega(j), &mesh, 1.0)?;
        Ok(sys.dual_weighted_residual(u, z))
    }

    fn is_feasible(&self, p: &[f64]) -> bool {
        self.setup.configure(p).is_ok()
    }

    fn exact_qoi(&self, p: &[f64], j: usize) -> Option<Result<C64>> {
        Some(check_freq(self, j).and_then(|_| {
            let (geom, mat) = self.setup.configure(p)?;
            waveguide::s11_closed_form(&geom, &mat, self.omega(j))
        }))
    }
}

/// Scalar test model `u = g(p) + bias * 4^-level`, `A = 1`, `q = 1`.
///
/// `g_j(p) = offset + (1 + slope_growth * j) * sum_k linear_k (p_k - center_k)
///          + quadratic * (p_0 - center_0)^2`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManufacturedModel {
    pub center: Vec<f64>,
    pub linear: Vec<f64>,
    pub offset: f64,
    pub quadratic: f64,
    pub slope_growth: f64,
    pub fe_bias: f64,
    pub frequencies: Vec<f64>,
}

impl ManufacturedModel {
    pub fn new(center: Vec<f64>, linear: Vec<f64>, frequencies: Vec<f64>) -> Result<Self> {
        check_dim(center.len(), linear.len())?;
        if center.is_empty() || frequencies.is_empty() {
            return Err(Error::InvalidInput("empty manufactured model".into()));
        }
        Ok(Self {
            center,
            linear,
            offset: 0.0,
            quadratic: 0.0,
            slope_growth: 0.0,
            fe_bias: 0.0,
            frequencies,
        })
    }

    fn g(&self, p: &[f64], j: usize) -> f64 {
        let lin: f64 = p
            .iter()
            .zip(&self.center)
            .zip(&self.linear)
            .map(|((x, c), a)| a * (x - c))
            .sum();
        let d0 = p[0] - self.center[0];
        self.offset + (1.0 + self.slope_growth * j as f64) * lin + self.quadratic * d0 * d0
    }

    fn at_level(&self, p: &[f64], j: usize, level: usize) -> C64 {
        C64::new(
            self.g(p, j) + self.fe_bias * 0.25f64.powi(level as i32),
            0.0,
        )
    }

    fn check(&self, p: &[f64], j: usize) -> Result<()> {
        check_dim(self.center.len(), p.len())?;
        check_freq(self, j)
    }
}

impl FidelityModel for ManufacturedModel {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    fn max_level(&self) -> usize {
        MAX_LEVEL
    }

    fn dof_count(&self, _level: usize) -> usize {
        1
    }

    fn solve(&self, p: &[f64], j: usize, level: usize) -> Result<LevelSolution> {
        self.check(p, j)?;
        if level > MAX_LEVEL {
            return Err(Error::MaxRefinement(MAX_LEVEL));
        }
        let u = self.at_level(p, j, level);
        Ok(LevelSolution {
            qoi: u,
            primal: vec![u],
            dual: vec![C64::new(1.0, 0.0)],
        })
    }

    fn fe_error(
        &self,
        p: &[f64],
        j: usize,
        level: usize,
        coarse: &LevelSolution,
    ) -> Result<(C64, LevelSolution)> {
        if level >= MAX_LEVEL {
            return Err(Error::IndicatorUnavailable(level));
        }
        let fine = self.solve(p, j, level + 1)?;
        Ok((fine.primal[0] - coarse.primal[0], fine))
    }

    fn sc_residual(&self, p: &[f64], j: usize, u: &[C64], z: &[C64]) -> Result<C64> {
        self.check(p, j)?;
        check_dim(1, u.len())?;
        check_dim(1, z.len())?;
        Ok(z[0].conj() * (self.at_level(p, j, 0) - u[0]))
    }

    fn exact_qoi(&self, p: &[f64], j: usize) -> Option<Result<C64>> {
        Some(self.check(p, j).map(|_| C64::new(self.g(p, j), 0.0)))
    }
}
