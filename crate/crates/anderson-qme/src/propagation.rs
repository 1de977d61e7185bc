//! Propagators and state trajectories from the time-nonlocal and time-local
//! master equations.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, RegionClass};
use crate::error::{Error, Result};
use crate::generator::GeneratorOrder;
use crate::graded::{conserving, ungraded, Graded};
use crate::kernel::{KernelOrder, Scheme};
use crate::liouville_fock::DotOperators;
use crate::model::{Spin, TimeGrid};
use crate::superop::{devec, vec, DotMatrix, SuperOp};

const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    /// time-nonlocal equation with the memory kernel
    Kernel,
    /// time-local equation with the perturbative generator
    Generator,
    /// time-local equation with the fixed-point generator
    FixedPoint,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::Kernel => "kernel",
            Route::Generator => "generator",
            Route::FixedPoint => "fixed-point",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Method {
    pub scheme: Scheme,
    pub route: Route,
    pub order: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub trace_defect: f64,
    pub hermiticity_defect: f64,
    pub min_state_eig: f64,
    pub min_choi_eig: f64,
    pub region: RegionClass,
}

#[derive(Clone, Debug)]
pub struct EvolutionRecord {
    pub grid: TimeGrid,
    pub method: Method,
    pub propagator: Vec<SuperOp>,
    pub rho0: DotMatrix,
    pub trajectory: Vec<DotMatrix>,
    /// empty until [`EvolutionRecord::annotate`] is called
    pub diagnostics: Vec<StepDiagnostics>,
}

impl EvolutionRecord {
    pub fn new(grid: TimeGrid, method: Method, propagator: Vec<SuperOp>, rho0: DotMatrix) -> Self {
        let v0 = vec(&rho0);
        let trajectory = propagator.iter().map(|p| devec(&p.apply(&v0))).collect();
        EvolutionRecord {
            grid,
            method,
            propagator,
            rho0,
            trajectory,
            diagnostics: Vec::new(),
        }
    }

    /// Diagnostics of sample `k` with positivity tolerance `tol`.
    pub fn step_diagnostics(&self, k: usize, tol: f64) -> StepDiagnostics {
        let (pi, rho) = (&self.propagator[k], &self.trajectory[k]);
        let cp = diagnostics::cp_check(pi, tol);
        let min_state = diagnostics::min_state_eigenvalue(rho);
        let region = if min_state < -tol {
            RegionClass::StateNonPositive
        } else if !cp.is_cp {
            RegionClass::CpViolatedStatePositive
        } else {
            RegionClass::Physical
        };
        StepDiagnostics {
            trace_defect: (rho.trace() - ONE).norm(),
            hermiticity_defect: diagnostics::hermiticity_defect(rho),
            min_state_eig: min_state,
            min_choi_eig: cp.min_eigenvalue,
            region,
        }
    }

    /// Fills the per-step diagnostics with positivity tolerance `tol`.
    pub fn annotate(&mut self, tol: f64) {
        self.diagnostics = (0..self.grid.len()).map(|k| self.step_diagnostics(k, tol)).collect();
    }

    pub fn max_trace_defect(&self) -> f64 {
        self.trajectory
            .iter()
            .map(|r| (r.trace() - ONE).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_hermiticity_defect(&self) -> f64 {
        self.trajectory
            .iter()
            .map(diagnostics::hermiticity_defect)
            .fold(0.0, f64::max)
    }

    /// Writes the trajectory CSV; diagnostics columns are empty when not annotated.
    pub fn write_csv<W: Write>(&self, ops: &DotOperators, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "t,occupation_up,occupation_down,trace_defect,min_state_eig,min_choi_eig,region_class"
        )?;
        let up = occupation(self, ops, Spin::Up);
        let down = occupation(self, ops, Spin::Down);
        for k in 0..self.grid.len() {
            write!(out, "{},{:e},{:e}", self.grid.t(k), up[k], down[k])?;
            match self.diagnostics.get(k) {
                Some(d) => writeln!(
                    out,
                    ",{:e},{:e},{:e},{}",
                    d.trace_defect, d.min_state_eig, d.min_choi_eig, d.region
                )?,
                None => writeln!(out, ",{:e},,,", (self.trajectory[k].trace() - ONE).norm())?,
            }
        }
        Ok(())
    }
}

/// `⟨n_σ⟩(t_k) = Re Tr(n_σ ρ(t_k))`.
pub fn occupation(record: &EvolutionRecord, ops: &DotOperators, spin: Spin) -> Vec<f64> {
    let n = ops.number(spin);
    record.trajectory.iter().map(|r| (n * r).trace().re).collect()
}

/// Largest `|Im Tr(n_σ ρ(t_k))|`, a Hermiticity check on the trajectory.
pub fn occupation_imaginary_residue(record: &EvolutionRecord, ops: &DotOperators, spin: Spin) -> f64 {
    let n = ops.number(spin);
    record
        .trajectory
        .iter()
        .map(|r| (n * r).trace().im.abs())
        .fold(0.0, f64::max)
}

/// Solves `dΠ/dt = −iK_LΠ − i∫_0^t K_N(t−s)Π(s)ds`.
///
/// Local kernel parts are absorbed into the exponential step; the history
/// integral uses trapezoid weights with the endpoint term treated implicitly.
pub fn solve_time_nonlocal(
    reference: &SuperOp,
    kernels: &[KernelOrder],
    grid: &TimeGrid,
    rho0: &DotMatrix,
) -> Result<EvolutionRecord> {
    let scheme = kernels.first().map_or(Scheme::Bare, |k| k.scheme);
    let mut local = reference.clone();
    let mut regular = vec![Graded::zero_with_shift(0, 0); grid.len()];
    for k in kernels {
        if k.grid != *grid || k.scheme != scheme {
            return Err(Error::Precondition("kernel orders do not share grid and scheme".into()));
        }
        local += &k.local;
        for (acc, r) in regular.iter_mut().zip(conserving(&k.regular)) {
            acc.axpy(ONE, &r);
        }
    }
    let h = grid.step;
    let half = Complex64::new(0.5 * h, 0.0);
    let minus_i = Complex64::new(0.0, -1.0);
    let step = conserving(&[local.scale(Complex64::new(0.0, -h)).exp()])[0];
    let mut implicit = SuperOp::identity();
    implicit.axpy(Complex64::new(0.0, 0.25 * h * h), &regular[0].to_superop());
    let implicit_inv = conserving(&[implicit.inverse().ok_or_else(|| {
        Error::Domain("implicit history step is singular; reduce the grid step".into())
    })?])[0];

    let mut pi = Vec::with_capacity(grid.len());
    pi.push(Graded::identity());
    // S_k = −i ∫_0^{t_k} K_N(t_k − s) Π(s) ds
    let mut source = Graded::zero_with_shift(0, 0);
    for k in 0..grid.count {
        let mut inner = pi[k];
        inner.axpy(half, &source);
        let mut rhs = inner.zero_like();
        rhs.mul_acc(ONE, &step, &inner);
        // history part of S_{k+1} without the unknown endpoint
        let mut hist = inner.zero_like();
        for (j, p) in pi.iter().enumerate() {
            let w = if j == 0 { 0.5 * h } else { h };
            hist.mul_acc(Complex64::new(w, 0.0), &regular[k + 1 - j], p);
        }
        rhs.axpy(half * minus_i, &hist);
        let next = implicit_inv.mul(&rhs);
        source = hist.scale(minus_i);
        source.mul_acc(half * minus_i, &regular[0], &next);
        pi.push(next);
    }
    let order = kernels.iter().map(|k| k.order).max().unwrap_or(0);
    Ok(EvolutionRecord::new(
        *grid,
        Method {
            scheme,
            route: Route::Kernel,
            order,
        },
        ungraded(&pi),
        *rho0,
    ))
}

/// Solves `dΠ/dt = −iG(t)Π` with sampled `G` by exponential midpoint steps.
pub fn solve_generator_path(path: &[SuperOp], grid: &TimeGrid, method: Method, rho0: &DotMatrix) -> Result<EvolutionRecord> {
    if path.len() != grid.len() {
        return Err(Error::Precondition("generator path does not match grid".into()));
    }
    let mut pi = Vec::with_capacity(grid.len());
    pi.push(Graded::identity());
    for k in 0..grid.count {
        let mut mid = path[k].scale_re(0.5);
        mid.axpy(Complex64::new(0.5, 0.0), &path[k + 1]);
        let step = conserving(&[mid.scale(Complex64::new(0.0, -grid.step)).exp()])[0];
        let next = step.mul(&pi[k]);
        pi.push(next);
    }
    Ok(EvolutionRecord::new(*grid, method, ungraded(&pi), *rho0))
}

/// Solves the time-local equation with `K_L + Σ_n G⁽ⁿ⁾`.
pub fn solve_time_local(gen: &GeneratorOrder, rho0: &DotMatrix) -> Result<EvolutionRecord> {
    let path: Vec<SuperOp> = (0..gen.grid.len()).map(|k| gen.total(k)).collect();
    let method = Method {
        scheme: gen.scheme,
        route: Route::Generator,
        order: gen.max_order(),
    };
    solve_generator_path(&path, &gen.grid, method, rho0)
}

/// The empty dot `|0⟩⟨0|`.
pub fn empty_dot() -> DotMatrix {
    let mut rho = DotMatrix::zeros();
    rho[(0, 0)] = ONE;
    rho
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelBuilder;
    use crate::liouville_fock::DotSystem;
    use crate::model::{ModelParams, Reservoir};

    fn params(u: f64, gamma: f64) -> ModelParams {
        ModelParams {
            epsilon: -1.0,
            u,
            reservoirs: vec![Reservoir::new(0.5 * gamma, 0.5, 1.0), Reservoir::new(0.5 * gamma, -0.5, 1.0)],
        }
    }

    fn spin_up() -> DotMatrix {
        let mut rho = DotMatrix::zeros();
        rho[(1, 1)] = ONE;
        rho
    }

    #[test]
    fn uncoupled_occupations_are_constant() {
        let p = params(2.0, 0.0);
        let sys = DotSystem::new(&p);
        let grid = TimeGrid::new(0.05, 60).unwrap();
        let b = KernelBuilder::new(&sys, &grid, Scheme::Bare);
        let ks = b.orders(4);
        let kernel = solve_time_nonlocal(b.reference(), &ks, &grid, &spin_up()).unwrap();
        let gen = crate::generator::generator_orders_direct(b.reference(), &ks, &grid).unwrap();
        let local = solve_time_local(&gen, &spin_up()).unwrap();
        for rec in [&kernel, &local] {
            assert!(occupation(rec, &sys.ops, Spin::Up).iter().all(|n| (n - 1.0).abs() < 1e-14));
            assert!(occupation(rec, &sys.ops, Spin::Down).iter().all(|n| n.abs() < 1e-14));
        }
        assert_eq!(kernel.method.route, Route::Kernel);
        assert_eq!(local.method.order, 4);
    }

    #[test]
    fn constant_generator_path_is_exact() {
        let sys = DotSystem::new(&params(2.0, 1.0));
        let l = sys.l_inf();
        let grid = TimeGrid::new(0.1, 20).unwrap();
        let method = Method {
            scheme: Scheme::Renormalized,
            route: Route::Generator,
            order: 0,
        };
        let rec = solve_generator_path(&vec![l.clone(); grid.len()], &grid, method, &empty_dot()).unwrap();
        let exact = l.scale(Complex64::new(0.0, -2.0)).exp();
        assert!(rec.propagator[20].max_abs_diff(&exact) < 1e-12);
        assert!(solve_generator_path(&[l], &grid, method, &empty_dot()).is_err());
    }

    #[test]
    fn kernel_solver_converges_quadratically() {
        let p = params(3.0, 1.0);
        let sys = DotSystem::new(&p);
        let at_two = |h: f64| {
            let grid = TimeGrid::new(h, (2.0 / h).round() as usize).unwrap();
            let b = KernelBuilder::new(&sys, &grid, Scheme::Bare);
            let rec = solve_time_nonlocal(b.reference(), &b.orders(2), &grid, &empty_dot()).unwrap();
            rec.propagator[grid.count].clone()
        };
        let (a, b, c) = (at_two(0.04), at_two(0.02), at_two(0.01));
        let ratio = (&a - &b).norm_fro() / (&b - &c).norm_fro();
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn kernel_and_generator_routes_differ_when_interacting() {
        let p = params(6.0, 1.0);
        let sys = DotSystem::new(&p);
        let grid = TimeGrid::new(0.02, 150).unwrap();
        let b = KernelBuilder::new(&sys, &grid, Scheme::Bare);
        let ks = b.orders(2);
        let kernel = solve_time_nonlocal(b.reference(), &ks, &grid, &empty_dot()).unwrap();
        let gen = crate::generator::generator_orders_direct(b.reference(), &ks, &grid).unwrap();
        let local = solve_time_local(&gen, &empty_dot()).unwrap();
        let gap = kernel
            .trajectory
            .iter()
            .zip(&local.trajectory)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(gap > 1e-3, "{gap}");
        // both agree to first order in time
        assert!((kernel.trajectory[1] - local.trajectory[1]).norm() < 1e-4);
    }

    #[test]
    fn csv_has_one_row_per_sample() {
        let p = params(1.0, 1.0);
        let sys = DotSystem::new(&p);
        let grid = TimeGrid::new(0.1, 10).unwrap();
        let b = KernelBuilder::new(&sys, &grid, Scheme::Renormalized);
        let mut rec = solve_time_nonlocal(b.reference(), &b.orders(2), &grid, &empty_dot()).unwrap();
        let mut plain = Vec::new();
        rec.write_csv(&sys.ops, &mut plain).unwrap();
        let plain = String::from_utf8(plain).unwrap();
        assert_eq!(plain.lines().count(), grid.len() + 1);
        assert!(plain.lines().nth(1).unwrap().ends_with(",,,"));
        rec.annotate(1e-8);
        let mut full = Vec::new();
        rec.write_csv(&sys.ops, &mut full).unwrap();
        let full = String::from_utf8(full).unwrap();
        assert!(full.lines().skip(1).all(|l| l.split(',').count() == 7 && !l.ends_with(',')));
        assert!(occupation_imaginary_residue(&rec, &sys.ops, Spin::Up) < 1e-14);
    }

    #[test]
    fn route_names_match_config_spelling() {
        for r in [Route::Kernel, Route::Generator, Route::FixedPoint] {
            assert_eq!(serde_json::to_string(&r).unwrap(), format!("\"{}\"", r.name()));
        }
    }
}
