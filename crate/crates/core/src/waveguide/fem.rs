//! Quadratic finite elements for the reduced port problem.
//!
//! The discrete system `A u = f` is complex symmetric, so the dual problem
//! `A^H z = q` is solved as `z = conj(A^{-1} conj(q))` with the primal
//! factorization.

use num_complex::Complex64;

use super::{layer_kz, Geometry, Material, Mesh1D, Region, C0, MM};
use crate::error::{Error, Result};
use crate::linalg::{BandLu, BandMatrix};

type C64 = Complex64;

const STIFF: [[f64; 3]; 3] = [[7.0, -8.0, 1.0], [-8.0, 16.0, -8.0], [1.0, -8.0, 7.0]];
const MASS: [[f64; 3]; 3] = [[4.0, 2.0, -1.0], [2.0, 16.0, 2.0], [-1.0, 2.0, 4.0]];

/// Nodal coefficients on a mesh; even indices are vertices, odd are midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct FEField {
    pub dofs: Vec<C64>,
    pub mesh: Mesh1D,
    pub omega: f64,
    pub e0: f64,
}

/// Assembled system for one geometry, material, frequency and mesh.
#[derive(Debug, Clone)]
pub struct FeSystem {
    pub matrix: BandMatrix,
    pub rhs: Vec<C64>,
    pub mesh: Mesh1D,
    pub omega: f64,
    pub e0: f64,
    pub port_kz: f64,
}

#[derive(Debug, Clone)]
pub struct FeSolution {
    pub primal: FEField,
    pub dual: FEField,
    pub qoi: C64,
}

pub fn assemble(
    geom: &Geometry,
    material: &Material,
    omega: f64,
    mesh: &Mesh1D,
    e0: f64,
) -> Result<FeSystem> {
    geom.validate()?;
    if !(omega > 0.0) {
        return Err(Error::InvalidInput(format!("angular frequency {omega}")));
    }
    let kz = geom.port_kz(omega)?;
    let kc2 = geom.kc().powi(2);
    let k02 = (omega / C0).powi(2);
    let (eps_in, mu_in) = material.eps_mu(omega);
    let one = C64::new(1.0, 0.0);
    let n = mesh.dof_count();
    let mut a = BandMatrix::zeros(n, 2, 2);
    for e in 0..mesh.element_count() {
        let (z0, z1, region) = mesh.element(e);
        let h = (z1 - z0) * MM;
        if !(h > 0.0) {
            return Err(Error::DegenerateGeometry(format!(
                "element {e} has length {h}"
            )));
        }
        let (eps, mu) = match region {
            Region::Vacuum => (one, one),
            Region::Inlay => (eps_in, mu_in),
        };
        let inv_mu = one / mu;
        let ks = inv_mu / (3.0 * h);
        let ms = (inv_mu * kc2 - eps * k02) * (h / 30.0);
        for i in 0..3 {
            for j in 0..3 {
                a.add(2 * e + i, 2 * e + j, ks * STIFF[i][j] + ms * MASS[i][j]);
            }
        }
    }
    let jk = C64::new(0.0, kz);
    a.add(0, 0, jk);
    a.add(n - 1, n - 1, jk);
    let mut rhs = vec![C64::new(0.0, 0.0); n];
    rhs[0] = 2.0 * jk * e0;
    Ok(FeSystem {
        matrix: a,
        rhs,
        mesh: mesh.clone(),
        omega,
        e0,
        port_kz: kz,
    })
}

impl FeSystem {
    pub fn factor(&self) -> Result<BandLu> {
        self.matrix.lu()
    }

    /// `f - A u`
    pub fn residual(&self, u: &[C64]) -> Vec<C64> {
        let au = self.matrix.matvec(u);
        self.rhs.iter().zip(au).map(|(f, v)| f - v).collect()
    }

    /// `z^H (f - A u)`
    pub fn dual_weighted_residual(&self, u: &[C64], z: &[C64]) -> C64 {
        self.residual(u)
            .iter()
            .zip(z)
            .map(|(r, zi)| zi.conj() * r)
            .sum()
    }

    /// Real functional vector `q` with `q^H u = u(0) / E0`.
    pub fn functional(&self) -> Vec<C64> {
        let mut q = vec![C64::new(0.0, 0.0); self.rhs.len()];
        q[0] = C64::new(1.0 / self.e0, 0.0);
        q
    }

    fn field(&self, dofs: Vec<C64>) -> FEField {
        FEField {
            dofs,
            mesh: self.mesh.clone(),
            omega: self.omega,
            e0: self.e0,
        }
    }

    pub fn solve_with(&self, lu: &BandLu) -> FeSolution {
        let u = lu.solve(&self.rhs);
        let q = self.functional();
        let z: Vec<C64> = lu
            .solve(&q.iter().map(|v| v.conj()).collect::<Vec<_>>())
            .into_iter()
            .map(|v| v.conj())
            .collect();
        let primal = self.field(u);
        let qoi = qoi_s(&primal);
        FeSolution {
            primal,
            dual: self.field(z),
            qoi,
        }
    }

    pub fn solve(&self) -> Result<FeSolution> {
        Ok(self.solve_with(&self.factor()?))
    }
}

/// Primal and dual solve sharing one factorization with unit incident amplitude.
pub fn solve(
    geom: &Geometry,
    material: &Material,
    omega: f64,
    mesh: &Mesh1D,
) -> Result<FeSolution> {
    assemble(geom, material, omega, mesh, 1.0)?.solve()
}

pub fn solve_primal(
    geom: &Geometry,
    material: &Material,
    omega: f64,
    mesh: &Mesh1D,
) -> Result<FEField> {
    let sys = assemble(geom, material, omega, mesh, 1.0)?;
    let lu = sys.factor()?;
    Ok(sys.field(lu.solve(&sys.rhs)))
}

pub fn solve_dual(
    geom: &Geometry,
    material: &Material,
    omega: f64,
    mesh: &Mesh1D,
) -> Result<FEField> {
    Ok(solve(geom, material, omega, mesh)?.dual)
}

/// Reflected amplitude at port 1 normalized by the incident amplitude.
pub fn qoi_s(field: &FEField) -> C64 {
    field.dofs[0] / field.e0 - 1.0
}

/// Embeds a field into the once-bisected mesh exactly.
pub fn inject(field: &FEField) -> Result<FEField> {
    let fine = field.mesh.refine()?;
    let ne = field.mesh.element_count();
    let mut d = Vec::with_capacity(4 * ne + 1);
    for e in 0..ne {
        let (a, m, b) = (
            field.dofs[2 * e],
            field.dofs[2 * e + 1],
            field.dofs[2 * e + 2],
        );
        d.push(a);
        d.push(a * 0.375 + m * 0.75 - b * 0.125);
        d.push(m);
        d.push(-a * 0.125 + m * 0.75 + b * 0.375);
    }
    d.push(field.dofs[2 * ne]);
    Ok(FEField {
        dofs: d,
        mesh: fine,
        omega: field.omega,
        e0: field.e0,
    })
}

/// Signed dual-weighted residual of the injected field on the next level,
/// together with the fine solution it required.
pub fn fe_error_residual(
    geom: &Geometry,
    material: &Material,
    primal_at_h: &FEField,
) -> Result<(C64, FeSolution)> {
    let level = primal_at_h.mesh.level();
    if level >= super::MAX_LEVEL {
        return Err(Error::IndicatorUnavailable(level));
    }
    let injected = inject(primal_at_h)?;
    let sys = assemble(
        geom,
        material,
        primal_at_h.omega,
        &injected.mesh,
        primal_at_h.e0,
    )?;
    let fine = sys.solve()?;
    let eta = sys.dual_weighted_residual(&injected.dofs, &fine.dual.dofs);
    Ok((eta, fine))
}

pub fn fe_error_indicator(
    geom: &Geometry,
    material: &Material,
    primal_at_h: &FEField,
) -> Result<f64> {
    Ok(fe_error_residual(geom, material, primal_at_h)?.0.norm())
}

/// Longitudinal wavenumber in the inlay, exposed for diagnostics.
pub fn inlay_kz(geom: &Geometry, material: &Material, omega: f64) -> C64 {
    let (eps, mu) = material.eps_mu(omega);
    layer_kz(omega, eps, mu, geom.kc())
}

#[cfg(test)]
mod tests {
    use super::super::{s11_closed_form, Dispersive4, MeshTopology, BASE_ELEMENTS};
    use super::*;
    use std::f64::consts::PI;

    fn geom() -> Geometry {
        Geometry {
            a: 30.0,
            b: 15.0,
            inlay_len: 10.36,
            offset_len: 4.76,
        }
    }

    fn mat() -> Material {
        Material::Four(Dispersive4 {
            p13: 0.58,
            p14: 0.64,
        })
    }

    fn mesh(g: &Geometry, level: usize) -> Mesh1D {
        Mesh1D::at_level(g, MeshTopology::for_geometry(g, BASE_ELEMENTS), level).unwrap()
    }

    const W: f64 = 2.0 * PI * 7.0e9;

    #[test]
    fn homogeneous_guide_is_a_plane_wave() {
        let g = geom();
        let m = mesh(&g, 2);
        let sol = solve(&g, &Material::Vacuum, W, &m).unwrap();
        assert!(sol.qoi.norm() < 1e-6);
        let kz = g.port_kz(W).unwrap();
        let l = g.total_len() * MM;
        let exact_end = C64::new(0.0, -kz * l).exp();
        assert!((sol.primal.dofs.last().unwrap() - exact_end).norm() < 1e-6);
        // outgoing condition at port 2 via the discrete boundary row
        let sys = assemble(&g, &Material::Vacuum, W, &m, 1.0).unwrap();
        let r = sys.residual(&sol.primal.dofs);
        assert!(r.iter().map(|v| v.norm()).fold(0.0, f64::max) < 1e-8);
        // dual only sees the port-1 trace
        assert!(sol.dual.dofs[0].norm() > 0.0);
    }

    #[test]
    fn linear_in_amplitude_and_qoi_normalized() {
        let g = geom();
        let m = mesh(&g, 0);
        let s1 = assemble(&g, &mat(), W, &m, 1.0).unwrap().solve().unwrap();
        let s2 = assemble(&g, &mat(), W, &m, 2.0).unwrap().solve().unwrap();
        for (a, b) in s1.primal.dofs.iter().zip(&s2.primal.dofs) {
            assert!((2.0 * a - b).norm() < 1e-12 * (1.0 + b.norm()));
        }
        assert!((s1.qoi - s2.qoi).norm() < 1e-13);
    }

    #[test]
    fn adjoint_identity() {
        let g = geom();
        for level in 0..=2 {
            let sys = assemble(&g, &mat(), W, &mesh(&g, level), 1.0).unwrap();
            let sol = sys.solve().unwrap();
            let q = sys.functional();
            let qu: C64 = q
                .iter()
                .zip(&sol.primal.dofs)
                .map(|(a, b)| a.conj() * b)
                .sum();
            let zf: C64 = sol
                .dual
                .dofs
                .iter()
                .zip(&sys.rhs)
                .map(|(a, b)| a.conj() * b)
                .sum();
            assert!((qu - zf).norm() <= 1e-10 * qu.norm());
        }
    }

    #[test]
    fn converges_to_closed_form() {
        let g = geom();
        let exact = s11_closed_form(&g, &mat(), W).unwrap();
        let errs: Vec<f64> = (0..=2)
            .map(|l| (solve(&g, &mat(), W, &mesh(&g, l)).unwrap().qoi - exact).norm())
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        assert!(errs[2] < 1e-3 * exact.norm());
    }

    #[test]
    fn indicator_matches_level_difference() {
        let g = geom();
        let coarse = solve(&g, &mat(), W, &mesh(&g, 0)).unwrap();
        let (eta, fine) = fe_error_residual(&g, &mat(), &coarse.primal).unwrap();
        assert!((eta - (fine.qoi - coarse.qoi)).norm() < 1e-12 + 1e-6 * eta.norm());
        let mid = solve(&g, &mat(), W, &mesh(&g, 1)).unwrap();
        let e1 = fe_error_indicator(&g, &mat(), &mid.primal).unwrap();
        assert!(eta.norm() > e1);
        let finest = solve(&g, &mat(), W, &mesh(&g, 2)).unwrap();
        assert!(matches!(
            fe_error_indicator(&g, &mat(), &finest.primal),
            Err(Error::IndicatorUnavailable(2))
        ));
    }

    #[test]
    fn galerkin_orthogonality_on_own_level() {
        let g = geom();
        let sys = assemble(&g, &mat(), W, &mesh(&g, 1), 1.0).unwrap();
        let sol = sys.solve().unwrap();
        let eta = sys.dual_weighted_residual(&sol.primal.dofs, &sol.dual.dofs);
        assert!(eta.norm() < 1e-12);
    }

    #[test]
    fn injection_preserves_quadratics() {
        let g = geom();
        let m = mesh(&g, 0);
        let f = |z: f64| C64::new(0.3 * z * z - z + 2.0, -0.1 * z * z);
        let mut dofs = Vec::new();
        for e in 0..m.element_count() {
            let (a, b, _) = m.element(e);
            dofs.push(f(a));
            dofs.push(f(0.5 * (a + b)));
        }
        dofs.push(f(*m.nodes().last().unwrap()));
        let field = FEField {
            dofs,
            mesh: m,
            omega: W,
            e0: 1.0,
        };
        let fine = inject(&field).unwrap();
        for e in 0..fine.mesh.element_count() {
            let (a, b, _) = fine.mesh.element(e);
            assert!((fine.dofs[2 * e] - f(a)).norm() < 1e-12);
            assert!((fine.dofs[2 * e + 1] - f(0.5 * (a + b))).norm() < 1e-12);
        }
    }

    #[test]
    fn inlay_wavenumber_branch() {
        assert!(inlay_kz(&geom(), &mat(), W).im <= 0.0);
    }
}
