//! Debye-type dispersive inlay materials.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Relaxation frequency of the twelve-parameter model, rad/s.
pub const OMEGA_RELAX: f64 = 2.0 * PI * 20.0e9;

/// Twelve-parameter material, fields `p[0] = p3 .. p[9] = p12`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dispersive12 {
    pub p: [f64; 10],
}

impl Dispersive12 {
    pub fn from_slice(p3_to_p12: &[f64]) -> Self {
        let mut p = [0.0; 10];
        p.copy_from_slice(p3_to_p12);
        Self { p }
    }

    pub fn eps_mu(&self, omega: f64) -> (Complex64, Complex64) {
        let [p3, p4, p5, p6, p7, p8, p9, p10, p11, p12] = self.p;
        let tau = 1.0 / OMEGA_RELAX;
        let debye = |hi: f64, lo: f64, scale: f64| {
            Complex64::new(hi - lo, 0.0) / Complex64::new(1.0, omega * scale * tau)
        };
        let eps = Complex64::new(p5, 0.0) + debye(p3, p5, p6) + debye(p4, p5, p7);
        let mu = Complex64::new(p10, 0.0) + debye(p8, p10, p11) + debye(p9, p10, p12);
        (eps, mu)
    }
}

/// Four-parameter material with fixed relaxation frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dispersive4 {
    pub p13: f64,
    pub p14: f64,
}

impl Dispersive4 {
    pub fn eps_mu(&self, omega: f64) -> (Complex64, Complex64) {
        let eps = Complex64::new(1.0 + self.p13, 0.0)
            + Complex64::new(1.0 - self.p13, 0.0) / Complex64::new(1.0, omega / (2.0 * PI * 5.0e9));
        let mu = Complex64::new(1.0 + self.p14, 0.0)
            + Complex64::new(2.0 - self.p14, 0.0)
                / Complex64::new(1.0, omega / (1.1 * 2.0 * PI * 20.0e9));
        (eps, mu)
    }
}

/// Material filling the inlay region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Material {
    Vacuum,
    Constant { eps: Complex64, mu: Complex64 },
    Twelve(Dispersive12),
    Four(Dispersive4),
}

impl Material {
    pub fn eps_mu(&self, omega: f64) -> (Complex64, Complex64) {
        match self {
            Material::Vacuum => (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)),
            Material::Constant { eps, mu } => (*eps, *mu),
            Material::Twelve(m) => m.eps_mu(omega),
            Material::Four(m) => m.eps_mu(omega),
        }
    }
}
