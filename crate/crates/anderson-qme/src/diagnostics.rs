//! Distances between states and physicality tests for propagators.

use std::fmt;

use nalgebra::SMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::superop::{devec, vec, DotMatrix, SuperOp};

/// Default eigenvalue tolerance for positivity tests.
pub const DEFAULT_TOL: f64 = 1e-8;
const HERMITIAN_TOL: f64 = 1e-8;

pub type ChoiMatrix = SMatrix<Complex64, 16, 16>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionClass {
    Physical,
    /// the propagated state itself has a negative eigenvalue
    #[serde(rename = "gray")]
    StateNonPositive,
    /// the state is positive but the propagator is not completely positive
    #[serde(rename = "black")]
    CpViolatedStatePositive,
}

impl RegionClass {
    pub fn label(self) -> &'static str {
        match self {
            RegionClass::Physical => "physical",
            RegionClass::StateNonPositive => "gray",
            RegionClass::CpViolatedStatePositive => "black",
        }
    }

    pub fn is_physical(self) -> bool {
        self == RegionClass::Physical
    }
}

impl fmt::Display for RegionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn hermiticity_defect(rho: &DotMatrix) -> f64 {
    (rho - rho.adjoint()).norm()
}

fn hermitian_part<const D: usize>(m: &SMatrix<Complex64, D, D>) -> SMatrix<Complex64, D, D> {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Eigenvalues of the Hermitian part of a 4×4 matrix, ascending.
pub fn state_eigenvalues(rho: &DotMatrix) -> [f64; 4] {
    let ev = hermitian_part(rho).symmetric_eigenvalues();
    let mut out = [ev[0], ev[1], ev[2], ev[3]];
    out.sort_by(f64::total_cmp);
    out
}

pub fn min_state_eigenvalue(rho: &DotMatrix) -> f64 {
    state_eigenvalues(rho)[0]
}

/// `D(ρ, σ) = ½ Tr|ρ − σ|`.
pub fn trace_distance(rho: &DotMatrix, sigma: &DotMatrix) -> Result<f64> {
    for m in [rho, sigma] {
        let d = hermiticity_defect(m);
        if d > HERMITIAN_TOL {
            return Err(Error::NonHermitian(d));
        }
    }
    let half_norm = |m: DotMatrix| 0.5 * state_eigenvalues(&m).iter().map(|e| e.abs()).sum::<f64>();
    // averaged over both orders so that the result is exactly symmetric
    Ok(0.5 * (half_norm(rho - sigma) + half_norm(sigma - rho)))
}

/// Choi matrix `Σ_{kl} E_{kl} ⊗ Π(E_{kl})` with row index `4k + i`.
pub fn choi_matrix(pi: &SuperOp) -> ChoiMatrix {
    ChoiMatrix::from_fn(|row, col| {
        let (k, i) = (row / 4, row % 4);
        let (l, j) = (col / 4, col % 4);
        pi.get(4 * j + i, 4 * l + k)
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CpCheck {
    pub min_eigenvalue: f64,
    pub is_cp: bool,
    /// Frobenius norm of the anti-Hermitian part of the Choi matrix
    pub hermiticity_defect: f64,
}

impl CpCheck {
    pub fn preserves_hermiticity(&self) -> bool {
        self.hermiticity_defect < HERMITIAN_TOL
    }
}

pub fn cp_check(pi: &SuperOp, tol: f64) -> CpCheck {
    let c = choi_matrix(pi);
    let min = hermitian_part(&c)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    CpCheck {
        min_eigenvalue: min,
        is_cp: min >= -tol,
        hermiticity_defect: (c - c.adjoint()).norm(),
    }
}

/// Gray if `Π ρ0` has an eigenvalue below `−tol`, else black if `Π` is not CP.
pub fn classify_region(pi: &SuperOp, rho0: &DotMatrix, tol: f64) -> RegionClass {
    let rho = devec(&pi.apply(&vec(rho0)));
    if min_state_eigenvalue(&rho) < -tol {
        RegionClass::StateNonPositive
    } else if !cp_check(pi, tol).is_cp {
        RegionClass::CpViolatedStatePositive
    } else {
        RegionClass::Physical
    }
}

/// Checks `|⟨A⟩_ρ − ⟨A⟩_σ| ≤ 2 D(ρ, σ) ‖A‖_∞`.
pub fn observable_bound_check(rho: &DotMatrix, sigma: &DotMatrix, a: &DotMatrix) -> Result<bool> {
    let d = hermiticity_defect(a);
    if d > HERMITIAN_TOL {
        return Err(Error::NonHermitian(d));
    }
    let norm = state_eigenvalues(a).iter().map(|e| e.abs()).fold(0.0, f64::max);
    let lhs = ((a * rho).trace() - (a * sigma).trace()).norm();
    let rhs = 2.0 * trace_distance(rho, sigma)? * norm;
    Ok(lhs <= rhs + 1e-12 * (1.0 + norm))
}
