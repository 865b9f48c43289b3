//! Transfer-matrix S-parameters of the three-layer guide.

use num_complex::Complex64;

use super::{layer_kz, Geometry, Material, MM};
use crate::error::Result;

type C64 = Complex64;

/// Transfer matrix of `(e, e'/mu)` across a homogeneous layer of length `d` (m).
fn layer_matrix(k: C64, mu: C64, d: f64) -> [[C64; 2]; 2] {
    let kd = k * d;
    let (c, s) = (kd.cos(), kd.sin());
    let sinc_d = if kd.norm() < 1e-8 {
        C64::new(d, 0.0)
    } else {
        s / k
    };
    [[c, mu * sinc_d], [-k * s / mu, c]]
}

fn matmul(a: [[C64; 2]; 2], b: [[C64; 2]; 2]) -> [[C64; 2]; 2] {
    let mut r = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    r
}

/// Returns `(S11, S21)` with reference planes at `z = 0` and `z = L`.
pub fn s_params_closed_form(
    geom: &Geometry,
    material: &Material,
    omega: f64,
) -> Result<(C64, C64)> {
    geom.validate()?;
    let kz = geom.port_kz(omega)?;
    let kc = geom.kc();
    let one = C64::new(1.0, 0.0);
    let k_vac = C64::new(kz, 0.0);
    let (eps, mu) = material.eps_mu(omega);
    let k_in = layer_kz(omega, eps, mu, kc);
    let vac = layer_matrix(k_vac, one, geom.offset_len * MM);
    let inlay = layer_matrix(k_in, mu, geom.inlay_len * MM);
    let m = matmul(vac, matmul(inlay, vac));

    // port 1: e = 1 + R, g = -jk(1 - R); port 2: e = T, g = -jkT
    let jk = C64::new(0.0, kz);
    let a11 = m[0][0] + jk * m[0][1];
    let a21 = m[1][0] + jk * m[1][1];
    let b1 = -m[0][0] + jk * m[0][1];
    let b2 = -m[1][0] + jk * m[1][1];
    // [a11 -1; a21 jk] [R; T] = [b1; b2]
    let det = a11 * jk + a21;
    let r = (b1 * jk + b2) / det;
    let t = (a11 * b2 - a21 * b1) / det;
    Ok((r, t))
}

pub fn s11_closed_form(geom: &Geometry, material: &Material, omega: f64) -> Result<C64> {
    Ok(s_params_closed_form(geom, material, omega)?.0)
}
