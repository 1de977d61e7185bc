//! Wideband reservoir contraction functions.
//!
//! Only the `p = −` contraction is a genuine function of time. The `p = +`
//! contraction is a one-sided delta and is consumed analytically by the kernel
//! construction.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{Reservoir, Sign, Spin};

/// `t · T/sinh(πTt)`, continued to `1/π` at `t = 0` and for `T = 0`.
fn t_thermal(temperature: f64, t: f64) -> f64 {
    let x = PI * temperature * t;
    if x < 1e-4 {
        (1.0 - x * x / 6.0 + 7.0 * x.powi(4) / 360.0) / PI
    } else {
        // x/sinh(x) = 2x e^{-x} / (1 - e^{-2x})
        2.0 * x * (-x).exp() / (-(-2.0 * x).exp_m1()) / PI
    }
}

/// `sin(x)/x`.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `t · γ^−_{ησ}(t)`, finite for all `t ≥ 0`.
pub fn t_gamma_minus(eta: Sign, spin: Spin, t: f64, reservoirs: &[Reservoir]) -> Complex64 {
    reservoirs
        .iter()
        .map(|r| {
            let phase = Complex64::from_polar(1.0, -eta.value() * r.mu * t);
            Complex64::new(0.0, -r.gamma(spin) * t_thermal(r.temperature, t)) * phase
        })
        .sum()
}

/// `γ^−_{ησ}(t) = −i Σ_r Γ_{rσ} T_r/sinh(πT_r t) e^{−iημ_r t}` for `t > 0`.
pub fn gamma_minus(eta: Sign, spin: Spin, t: f64, reservoirs: &[Reservoir]) -> Result<Complex64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("gamma_minus is singular at t = {t}")));
    }
    Ok(t_gamma_minus(eta, spin, t, reservoirs) / t)
}

/// `Σ_η γ^−_{ησ}(t)` weighted so that `Σ_η γ^−_{ησ} G^+_{ησ}G^+_{η̄σ} = R_σ(t) G^+_{+σ}G^+_{−σ}`:
/// `R_σ(t) = −2 Σ_r Γ_{rσ} T_r sin(μ_r t)/sinh(πT_r t)`.
pub fn regularized_eta_pair(spin: Spin, t: f64, reservoirs: &[Reservoir]) -> Complex64 {
    let value: f64 = reservoirs
        .iter()
        .map(|r| -2.0 * r.gamma(spin) * t_thermal(r.temperature, t) * r.mu * sinc(r.mu * t))
        .sum();
    Complex64::new(value, 0.0)
}
