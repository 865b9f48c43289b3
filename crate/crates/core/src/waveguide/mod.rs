//! Rectangular waveguide with a dispersive inlay, reduced to the TE10 mode.
//!
//! The longitudinal field profile obeys
//! `-(e'/mu_r)' + (kc^2/mu_r - k0^2 eps_r) e = 0` on `[0, L]` with matched
//! port conditions. Lengths in the public API are in millimetres.

mod closed_form;
mod fem;
mod material;
mod mesh;

pub use closed_form::{s11_closed_form, s_params_closed_form};
pub use fem::{
    assemble, fe_error_indicator, fe_error_residual, inject, inlay_kz, qoi_s, solve, solve_dual,
    solve_primal, FEField, FeSolution, FeSystem,
};
pub use material::{Dispersive12, Dispersive4, Material, OMEGA_RELAX};
pub use mesh::{Mesh1D, MeshTopology, Region, BASE_ELEMENTS, MAX_LEVEL};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const C0: f64 = 299_792_458.0;
pub const MU0: f64 = 4.0e-7 * PI;
pub const EPS0: f64 = 1.0 / (MU0 * C0 * C0);

pub(crate) const MM: f64 = 1.0e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub a: f64,
    pub b: f64,
    pub inlay_len: f64,
    pub offset_len: f64,
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::DegenerateGeometry(format!("width a = {}", self.a)));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::DegenerateGeometry(format!("height b = {}", self.b)));
        }
        if !(self.inlay_len >= 0.0 && self.inlay_len.is_finite()) {
            return Err(Error::DegenerateGeometry(format!(
                "inlay length p1 = {}",
                self.inlay_len
            )));
        }
        if !(self.offset_len > 0.0 && self.offset_len.is_finite()) {
            return Err(Error::DegenerateGeometry(format!(
                "offset length p2 = {}",
                self.offset_len
            )));
        }
        Ok(())
    }

    pub fn total_len(&self) -> f64 {
        2.0 * self.offset_len + self.inlay_len
    }

    /// Material interfaces `[p2, p2 + p1]`.
    pub fn interfaces(&self) -> [f64; 2] {
        [self.offset_len, self.offset_len + self.inlay_len]
    }

    /// TE10 cutoff wavenumber in 1/m.
    pub fn kc(&self) -> f64 {
        PI / (self.a * MM)
    }

    /// Port propagation constant `sqrt(k0^2 - kc^2)` in 1/m.
    pub fn port_kz(&self, omega: f64) -> Result<f64> {
        let k0 = omega / C0;
        let d = k0 * k0 - self.kc().powi(2);
        if d <= 0.0 {
            return Err(Error::AtCutoff {
                freq_hz: omega / (2.0 * PI),
            });
        }
        Ok(d.sqrt())
    }
}

/// Longitudinal wavenumber in a filled section, branch `Im kz <= 0`.
pub fn layer_kz(omega: f64, eps: Complex64, mu: Complex64, kc: f64) -> Complex64 {
    let k0 = omega / C0;
    let k = (eps * mu * k0 * k0 - kc * kc).sqrt();
    if k.im > 0.0 {
        -k
    } else {
        k
    }
}

/// How an uncertain parameter vector maps onto geometry and material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Variant {
    /// `p = [p1, p2, p13, p14]`
    Four,
    /// `p = [p1, p2, p3, ..., p12]`
    Twelve,
    /// `p = [p1]` with the remaining inputs frozen.
    InlayOnly { offset_len: f64, p13: f64, p14: f64 },
}

impl Variant {
    pub fn dim(&self) -> usize {
        match self {
            Variant::Four => 4,
            Variant::Twelve => 12,
            Variant::InlayOnly { .. } => 1,
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        match self {
            Variant::Four => ["p1", "p2", "p13", "p14"].map(String::from).to_vec(),
            Variant::Twelve => (1..=12).map(|i| format!("p{i}")).collect(),
            Variant::InlayOnly { .. } => vec!["p1".into()],
        }
    }
}

/// Fixed waveguide cross-section together with a parametrization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveguideSetup {
    pub a: f64,
    pub b: f64,
    pub variant: Variant,
}

impl WaveguideSetup {
    pub fn new(a: f64, b: f64, variant: Variant) -> Self {
        Self { a, b, variant }
    }

    pub fn dim(&self) -> usize {
        self.variant.dim()
    }

    pub fn configure(&self, p: &[f64]) -> Result<(Geometry, Material)> {
        crate::error::check_dim(self.dim(), p.len())?;
        let (p1, p2, mat) = match self.variant {
            Variant::Four => (
                p[0],
                p[1],
                Material::Four(Dispersive4 {
                    p13: p[2],
                    p14: p[3],
                }),
            ),
            Variant::Twelve => (
                p[0],
                p[1],
                Material::Twelve(Dispersive12::from_slice(&p[2..])),
            ),
            Variant::InlayOnly {
                offset_len,
                p13,
                p14,
            } => (p[0], offset_len, Material::Four(Dispersive4 { p13, p14 })),
        };
        let geom = Geometry {
            a: self.a,
            b: self.b,
            inlay_len: p1,
            offset_len: p2,
        };
        geom.validate()?;
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite parameter".into()));
        }
        Ok((geom, mat))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_is_reported() {
        let g = Geometry {
            a: 30.0,
            b: 15.0,
            inlay_len: 1.0,
            offset_len: 1.0,
        };
        let fc = C0 / (2.0 * 30.0e-3);
        assert!(matches!(
            g.port_kz(2.0 * PI * fc * 0.999),
            Err(Error::AtCutoff { .. })
        ));
        assert!(g.port_kz(2.0 * PI * 7.0e9).unwrap() > 0.0);
    }

    #[test]
    fn branch_has_nonpositive_imaginary_part() {
        let w = 2.0 * PI * 7.0e9;
        for (e, m) in [(1.0, 1.0), (0.1, 0.1), (-2.0, 1.0)] {
            let k = layer_kz(w, Complex64::new(e, 0.3), Complex64::new(m, -0.2), 100.0);
            assert!(k.im <= 0.0);
        }
        let k = layer_kz(
            w,
            Complex64::new(0.01, 0.0),
            Complex64::new(1.0, 0.0),
            200.0,
        );
        assert!(k.re.abs() < 1e-12 && k.im < 0.0);
    }

    #[test]
    fn invalid_geometry() {
        let s = WaveguideSetup::new(30.0, 15.0, Variant::Four);
        assert!(s.configure(&[-0.1, 5.0, 1.0, 1.0]).is_err());
        assert!(s.configure(&[1.0, 0.0, 1.0, 1.0]).is_err());
        assert!(matches!(
            s.configure(&[1.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(s.configure(&[9.0, 5.0, 1.0, 1.0]).is_ok());
    }
}
