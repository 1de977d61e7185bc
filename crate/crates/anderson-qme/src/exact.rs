//! Exact solution of the noninteracting dot.
//!
//! At `U = 0` the renormalized series terminates: `L_∞ + G⁽²⁾_ren` is the exact
//! generator and `L_∞ + K⁽²⁾_ren + K⁽⁴⁾_ren` the exact memory kernel.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::generator::{generator_orders_direct, GeneratorOrder};
use crate::kernel::{KernelBuilder, Scheme};
use crate::liouville_fock::DotSystem;
use crate::model::{ModelParams, Spin, TimeGrid};
use crate::propagation::{solve_time_local, solve_time_nonlocal, EvolutionRecord};
use crate::superop::DotMatrix;

fn require_noninteracting(params: &ModelParams) -> Result<()> {
    params.validate()?;
    if params.u != 0.0 {
        return Err(Error::Precondition(format!(
            "exact reference needs U = 0, got U = {}",
            params.u
        )));
    }
    Ok(())
}

/// Samples of the exact generator `L_∞ + G⁽²⁾_ren(t_k)`.
pub fn exact_generator_u0(params: &ModelParams, grid: &TimeGrid) -> Result<GeneratorOrder> {
    require_noninteracting(params)?;
    let sys = DotSystem::new(params);
    let builder = KernelBuilder::new(&sys, grid, Scheme::Renormalized);
    generator_orders_direct(builder.reference(), &[builder.second_order()], grid)
}

/// Exact trajectory from the time-local route.
pub fn exact_record_u0(params: &ModelParams, grid: &TimeGrid, rho0: &DotMatrix) -> Result<EvolutionRecord> {
    solve_time_local(&exact_generator_u0(params, grid)?, rho0)
}

/// Exact trajectory from the terminating kernel `L_∞ + K⁽²⁾_ren + K⁽⁴⁾_ren`.
pub fn exact_kernel_route_u0(params: &ModelParams, grid: &TimeGrid, rho0: &DotMatrix) -> Result<EvolutionRecord> {
    require_noninteracting(params)?;
    let sys = DotSystem::new(params);
    let builder = KernelBuilder::new(&sys, grid, Scheme::Renormalized);
    solve_time_nonlocal(builder.reference(), &builder.orders(4), grid, rho0)
}

fn fermi(x: f64, temperature: f64) -> f64 {
    if temperature == 0.0 {
        return if x < 0.0 {
            1.0
        } else if x > 0.0 {
            0.0
        } else {
            0.5
        };
    }
    let y = x / temperature;
    if y > 0.0 {
        let e = (-y).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + y.exp())
    }
}

/// Stationary occupation of a resonant level,
/// `n_σ = Σ_r ∫dω f_r(ω) (Γ_{rσ}/2π) / ((ω − ε)² + (Γ_σ/2)²)`.
///
/// Evaluated after `ω = ε + (Γ_σ/2) tan θ`, which maps the Lorentzian to the
/// flat measure `dθ/π` on `(−π/2, π/2)` and leaves no truncated tail.
pub fn resonant_level_occupation(params: &ModelParams, spin: Spin) -> Result<f64> {
    require_noninteracting(params)?;
    let gamma = params.total_gamma(spin);
    if gamma == 0.0 {
        return Err(Error::Domain("occupation is not determined for an uncoupled level".into()));
    }
    let mut n = 0.0;
    for r in &params.reservoirs {
        let weight = r.gamma(spin) / gamma;
        if weight == 0.0 {
            continue;
        }
        let integrand = |theta: f64| fermi(params.epsilon + 0.5 * gamma * theta.tan() - r.mu, r.temperature);
        // split at the Fermi edge, which is a jump at zero temperature
        let edge = (2.0 * (r.mu - params.epsilon) / gamma).atan();
        let integral: f64 = [(-FRAC_PI_2, edge), (edge, FRAC_PI_2)]
            .iter()
            .map(|&(a, b)| quadrature::double_exponential::integrate(integrand, a, b, 1e-12).integral)
            .sum();
        n += weight * integral / PI;
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Reservoir;
    use crate::propagation::{empty_dot, occupation};

    fn params(u: f64, gamma: f64, temperature: f64) -> ModelParams {
        ModelParams {
            epsilon: 2.0,
            u,
            reservoirs: vec![
                Reservoir::new(0.5 * gamma, 0.0, temperature),
                Reservoir::new(0.5 * gamma, -0.2, temperature),
            ],
        }
    }

    #[test]
    fn interacting_dot_is_rejected() {
        let grid = TimeGrid::new(0.1, 4).unwrap();
        assert!(matches!(exact_generator_u0(&params(1.0, 1.0, 1.0), &grid), Err(Error::Precondition(_))));
        assert!(exact_kernel_route_u0(&params(1.0, 1.0, 1.0), &grid, &empty_dot()).is_err());
    }

    #[test]
    fn uncoupled_generator_is_the_liouvillian() {
        let p = params(0.0, 0.0, 1.0);
        let sys = DotSystem::new(&p);
        let grid = TimeGrid::new(0.05, 20).unwrap();
        let g = exact_generator_u0(&p, &grid).unwrap();
        for k in 0..grid.len() {
            assert!(g.total(k).max_abs_diff(&sys.liouvillian) < 1e-15);
        }
    }

    #[test]
    fn generator_approaches_the_reference_at_high_temperature() {
        // the memory decays within 1/(πT); the grid resolves it
        let grid = TimeGrid::new(5e-4, 400).unwrap();
        let deviation = |temperature: f64| {
            let p = params(0.0, 1.0, temperature);
            let g = exact_generator_u0(&p, &grid).unwrap();
            let l_inf = DotSystem::new(&p).l_inf();
            (0..grid.len()).map(|k| g.total(k).max_abs_diff(&l_inf)).fold(0.0, f64::max)
        };
        let (d20, d40) = (deviation(20.0), deviation(40.0));
        assert!(d40 < 0.6 * d20 && d40 < 0.05, "{d20} {d40}");
    }

    #[test]
    fn uncoupled_kernel_route_is_unitary() {
        let p = params(0.0, 0.0, 1.0);
        let grid = TimeGrid::new(0.05, 40).unwrap();
        let rec = exact_kernel_route_u0(&p, &grid, &empty_dot()).unwrap();
        let sys = DotSystem::new(&p);
        for rho in &rec.trajectory {
            assert!((rho - empty_dot()).norm() < 1e-14);
        }
        assert!(occupation(&rec, &sys.ops, Spin::Up).iter().all(|n| n.abs() < 1e-14));
    }

    #[test]
    fn resonant_level_limits() {
        // symmetric level at μ: exactly one half
        let mut p = params(0.0, 1.0, 0.3);
        p.epsilon = 0.0;
        p.reservoirs = vec![Reservoir::new(1.0, 0.0, 0.3)];
        assert!((resonant_level_occupation(&p, Spin::Up).unwrap() - 0.5).abs() < 1e-12);
        // zero temperature: arctan closed form
        p.epsilon = 1.3;
        p.reservoirs = vec![Reservoir::new(0.8, 0.2, 0.0)];
        let closed = 0.5 - ((1.3 - 0.2) / 0.4f64).atan() / PI;
        assert!((resonant_level_occupation(&p, Spin::Down).unwrap() - closed).abs() < 1e-9);
        // infinite temperature: one half regardless of the level
        p.reservoirs = vec![Reservoir::new(0.8, 0.2, 1e12)];
        assert!((resonant_level_occupation(&p, Spin::Up).unwrap() - 0.5).abs() < 1e-9);
    }
}
