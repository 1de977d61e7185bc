//! Time-local generator orders from memory-kernel orders.
//!
//! All operators here conserve the dot charges, so the quadratic-cost loops run
//! on the block-diagonal [`Graded`] form.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::graded::{conserving, history_convolution, ungraded, Graded};
use crate::kernel::{powers, KernelOrder, Scheme};
use crate::model::TimeGrid;
use crate::superop::SuperOp;

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Orders `Π⁽⁰⁾, Π⁽²⁾, …` of the propagator; `orders[i]` holds order `2i`.
#[derive(Clone, Debug)]
pub struct PropagatorOrders {
    pub grid: TimeGrid,
    pub orders: Vec<Vec<SuperOp>>,
}

impl PropagatorOrders {
    pub fn order(&self, n: u8) -> Option<&[SuperOp]> {
        self.orders.get(n as usize / 2).map(Vec::as_slice)
    }

    /// `Σ_n Π⁽ⁿ⁾(t_k)`.
    pub fn total(&self, k: usize) -> SuperOp {
        let mut out = SuperOp::zero();
        for o in &self.orders {
            out += &o[k];
        }
        out
    }
}

/// `G(t) = constant + Σ_n G⁽ⁿ⁾(t)`; `orders[i]` holds order `2i + 2`.
#[derive(Clone, Debug)]
pub struct GeneratorOrder {
    pub scheme: Scheme,
    pub grid: TimeGrid,
    pub constant: SuperOp,
    pub orders: Vec<Vec<SuperOp>>,
}

impl GeneratorOrder {
    pub fn order(&self, n: u8) -> Option<&[SuperOp]> {
        if n < 2 {
            return None;
        }
        self.orders.get(n as usize / 2 - 1).map(Vec::as_slice)
    }

    pub fn max_order(&self) -> u8 {
        2 * self.orders.len() as u8
    }

    /// Full generator sample including the constant part.
    pub fn total(&self, k: usize) -> SuperOp {
        let mut out = self.constant.clone();
        for o in &self.orders {
            out += &o[k];
        }
        out
    }

    pub fn max_trace_defect(&self) -> f64 {
        self.orders
            .iter()
            .flatten()
            .map(SuperOp::trace_defect)
            .fold(0.0, f64::max)
    }
}

/// Kernel orders split by order, converted to block form.
struct Kernels {
    grid: TimeGrid,
    scheme: Scheme,
    /// `(local, regular)` for orders 2 and 4, zero when absent
    parts: Vec<(Graded, Vec<Graded>)>,
}

impl Kernels {
    fn new(kernels: &[KernelOrder], grid: &TimeGrid) -> Result<Self> {
        let scheme = kernels.first().map_or(Scheme::Bare, |k| k.scheme);
        let max = kernels.iter().map(|k| k.order).max().unwrap_or(0);
        let zero = Graded::zero_with_shift(0, 0);
        let mut parts = vec![(zero, vec![zero; grid.len()]); max as usize / 2];
        let mut seen = Vec::new();
        for k in kernels {
            if k.grid != *grid {
                return Err(Error::Precondition("kernel orders sampled on different grids".into()));
            }
            if k.scheme != scheme {
                return Err(Error::Precondition("kernel orders from different schemes".into()));
            }
            if k.order == 0 || k.order % 2 != 0 || k.order > 4 || seen.contains(&k.order) {
                return Err(Error::Precondition(format!("unsupported kernel order {}", k.order)));
            }
            seen.push(k.order);
            let local = conserving(std::slice::from_ref(&k.local))[0];
            parts[k.order as usize / 2 - 1] = (local, conserving(&k.regular));
        }
        Ok(Kernels {
            grid: *grid,
            scheme,
            parts,
        })
    }

    fn order(&self, n: usize) -> Option<&(Graded, Vec<Graded>)> {
        self.parts.get(n / 2 - 1)
    }

    /// `(K⁽ⁿ⁾ ∗ f)(t_k)` including the instantaneous local part.
    fn convolve(&self, n: usize, f: &[Graded]) -> Vec<Graded> {
        let (local, regular) = &self.parts[n / 2 - 1];
        let mut out = history_convolution(regular, f, self.grid.step);
        for (o, x) in out.iter_mut().zip(f) {
            o.mul_acc(ONE, local, x);
        }
        out
    }
}

fn step_exp(gen: &SuperOp, factor: Complex64) -> Graded {
    conserving(&[gen.scale(factor).exp()])[0]
}

/// Samples `e^{±iK_L t_k}` in block form.
fn evolution(reference: &SuperOp, grid: &TimeGrid, sign: f64) -> Vec<Graded> {
    conserving(&powers(&reference.scale(Complex64::new(0.0, sign * grid.step)).exp(), grid.count))
}

/// Solves `dΠ⁽ⁿ⁾/dt = −iK_LΠ⁽ⁿ⁾ − i Σ_m (K⁽ᵐ⁾ ∗ Π⁽ⁿ⁻ᵐ⁾)(t)` order by order.
pub fn propagator_orders(reference: &SuperOp, kernels: &[KernelOrder], grid: &TimeGrid) -> Result<PropagatorOrders> {
    let ks = Kernels::new(kernels, grid)?;
    let orders = propagator_orders_graded(reference, &ks);
    Ok(PropagatorOrders {
        grid: *grid,
        orders: orders.iter().map(|o| ungraded(o)).collect(),
    })
}

fn propagator_orders_graded(reference: &SuperOp, ks: &Kernels) -> Vec<Vec<Graded>> {
    let grid = &ks.grid;
    let half = Complex64::new(0.5 * grid.step, 0.0);
    let e1 = step_exp(reference, Complex64::new(0.0, -grid.step));
    let mut orders = vec![evolution(reference, grid, -1.0)];
    for n in (2..=2 * ks.parts.len()).step_by(2) {
        // source −i Σ_m (K⁽ᵐ⁾ ∗ Π⁽ⁿ⁻ᵐ⁾)
        let mut source = vec![Graded::zero_with_shift(0, 0); grid.len()];
        for m in (2..=n).step_by(2) {
            for (s, c) in source.iter_mut().zip(ks.convolve(m, &orders[(n - m) / 2])) {
                s.axpy(-I, &c);
            }
        }
        let mut pi = Vec::with_capacity(grid.len());
        pi.push(Graded::zero_with_shift(0, 0));
        for k in 0..grid.count {
            let mut inner = pi[k];
            inner.axpy(half, &source[k]);
            let mut next = e1.zero_like();
            next.mul_acc(ONE, &e1, &inner);
            next.axpy(half, &source[k + 1]);
            pi.push(next);
        }
        orders.push(pi);
    }
    orders
}

/// `G⁽ⁿ⁾ = [K⁽ⁿ⁾ ∗ Π⁽⁰⁾ + Σ_j (K⁽ⁿ⁻ʲ⁾ ∗ Π⁽ʲ⁾ − G⁽ⁿ⁻ʲ⁾ Π⁽ʲ⁾)] e^{iK_L t}`.
pub fn generator_orders_recursive(
    reference: &SuperOp,
    kernels: &[KernelOrder],
    props: &PropagatorOrders,
) -> Result<GeneratorOrder> {
    let ks = Kernels::new(kernels, &props.grid)?;
    if props.orders.len() < ks.parts.len() + 1 {
        return Err(Error::Precondition("propagator orders missing".into()));
    }
    let grid = &props.grid;
    let pis: Vec<Vec<Graded>> = props.orders.iter().map(|o| conserving(o)).collect();
    let backward = evolution(reference, grid, 1.0);
    let mut gens: Vec<Vec<Graded>> = Vec::new();
    for n in (2..=2 * ks.parts.len()).step_by(2) {
        let mut bracket = ks.convolve(n, &pis[0]);
        for j in (2..n).step_by(2) {
            for (b, c) in bracket.iter_mut().zip(ks.convolve(n - j, &pis[j / 2])) {
                b.axpy(ONE, &c);
            }
            let g = &gens[(n - j) / 2 - 1];
            for k in 0..grid.len() {
                bracket[k].mul_acc(-ONE, &g[k], &pis[j / 2][k]);
            }
        }
        gens.push(bracket.iter().zip(&backward).map(|(b, e)| b.mul(e)).collect());
    }
    Ok(GeneratorOrder {
        scheme: ks.scheme,
        grid: *grid,
        constant: reference.clone(),
        orders: gens.iter().map(|g| ungraded(g)).collect(),
    })
}

/// Evaluates the generator orders by direct quadrature of
/// `G⁽²⁾(t) = ∫_0^t ds K⁽²⁾(t−s) e^{iK_L(t−s)}` and
/// `G⁽⁴⁾(t) = ∫_0^t ds K⁽⁴⁾(t−s) e^{iK_L(t−s)}
///          + i∫_0^t ds ∫_s^t dτ K⁽²⁾(t−s) e^{iK_L(τ−s)} G⁽²⁾(τ) e^{iK_L(t−τ)}`.
pub fn generator_orders_direct(reference: &SuperOp, kernels: &[KernelOrder], grid: &TimeGrid) -> Result<GeneratorOrder> {
    let ks = Kernels::new(kernels, grid)?;
    let h = grid.step;
    let half = Complex64::new(0.5 * h, 0.0);
    let backward = evolution(reference, grid, 1.0);
    let zero = Graded::zero_with_shift(0, 0);

    let first_term = |n: usize| -> Vec<Graded> {
        let (local, regular) = ks.order(n).unwrap();
        let mut out = Vec::with_capacity(grid.len());
        let mut acc = zero;
        out.push(*local);
        for k in 1..grid.len() {
            acc.mul_acc(half, &regular[k - 1], &backward[k - 1]);
            acc.mul_acc(half, &regular[k], &backward[k]);
            let mut g = *local;
            g.axpy(ONE, &acc);
            out.push(g);
        }
        out
    };

    let mut gens = vec![first_term(2)];
    if ks.parts.len() >= 2 {
        let mut g4 = first_term(4);
        let g2 = &gens[0];
        let regular2 = &ks.parts[0].1;
        let b1 = &backward[1.min(grid.count)];
        // H(t_k, t_j) = ∫_{t_j}^{t_k} dτ B(τ − t_j) G⁽²⁾(τ) B(t_k − τ), marched in k
        for j in 0..grid.count {
            let weight = Complex64::new(0.0, if j == 0 { 0.5 * h } else { h });
            let mut hist = zero;
            for k in (j + 1)..grid.len() {
                let mut inner = hist;
                inner.mul_acc(half, &backward[k - 1 - j], &g2[k - 1]);
                let mut next = zero;
                next.mul_acc(ONE, &inner, b1);
                next.mul_acc(half, &backward[k - j], &g2[k]);
                hist = next;
                g4[k].mul_acc(weight, &regular2[k - j], &hist);
            }
        }
        gens.push(g4);
    }
    Ok(GeneratorOrder {
        scheme: ks.scheme,
        grid: *grid,
        constant: reference.clone(),
        orders: gens.iter().map(|g| ungraded(g)).collect(),
    })
}

/// Midpoint factors `exp(i h X_mid)` for every grid interval.
fn midpoint_factors(path: &[SuperOp], grid: &TimeGrid) -> Vec<Graded> {
    (0..grid.count)
        .map(|m| {
            let mut mid = path[m].scale_re(0.5);
            mid.axpy(Complex64::new(0.5, 0.0), &path[m + 1]);
            step_exp(&mid, Complex64::new(0.0, grid.step))
        })
        .collect()
}

/// Anti-time-ordered `T_→ exp(i∫_{t_s}^{t_t} X(τ)dτ)` by the midpoint rule; later times stand to the right.
pub fn anti_time_ordered_exp(path: &[SuperOp], grid: &TimeGrid, s: usize, t: usize) -> Result<SuperOp> {
    if s > t {
        return Err(Error::Precondition(format!("start index {s} after end index {t}")));
    }
    if path.len() != grid.len() || t > grid.count {
        return Err(Error::Precondition("path does not match grid".into()));
    }
    let mut out = SuperOp::identity();
    for m in s..t {
        let mut mid = path[m].scale_re(0.5);
        mid.axpy(Complex64::new(0.5, 0.0), &path[m + 1]);
        out = &out * &mid.scale(Complex64::new(0.0, grid.step)).exp();
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct FixedPointOutcome {
    /// full generator samples including `K_L`
    pub generator: Vec<SuperOp>,
    /// sup over samples of the Frobenius norm of successive differences
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub diverged: bool,
}

impl FixedPointOutcome {
    pub fn iterations(&self) -> usize {
        self.residuals.len()
    }

    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::NAN)
    }
}

/// Iterates `G_i(t) = ∫_0^t ds K(t−s) T_→ exp(i∫_s^t G_{i−1})` from `initial`
/// (default `K_L` for every sample).
pub fn fixed_point_iterate(
    reference: &SuperOp,
    kernels: &[KernelOrder],
    grid: &TimeGrid,
    initial: Option<&[SuperOp]>,
    max_iters: usize,
    tol: f64,
) -> Result<FixedPointOutcome> {
    let ks = Kernels::new(kernels, grid)?;
    let h = grid.step;
    let zero = Graded::zero_with_shift(0, 0);
    let mut local = conserving(std::slice::from_ref(reference))[0];
    let mut regular = vec![zero; grid.len()];
    for (l, r) in &ks.parts {
        local.axpy(ONE, l);
        for (acc, x) in regular.iter_mut().zip(r) {
            acc.axpy(ONE, x);
        }
    }
    let mut current: Vec<SuperOp> = match initial {
        Some(g) if g.len() == grid.len() => g.to_vec(),
        Some(_) => return Err(Error::Precondition("initial generator does not match grid".into())),
        None => vec![reference.clone(); grid.len()],
    };
    let mut outcome = FixedPointOutcome {
        generator: Vec::new(),
        residuals: Vec::new(),
        converged: false,
        diverged: false,
    };
    let mut growth = 0;
    for _ in 0..max_iters {
        let factors = midpoint_factors(&current, grid);
        let next: Vec<SuperOp> = (0..grid.len())
            .map(|k| {
                let mut g = local;
                // U(t_j, t_k) built leftwards from U(t_k, t_k) = 1
                let mut u = Graded::identity();
                for j in (0..k).rev() {
                    u = factors[j].mul(&u);
                    let w = if j == 0 { 0.5 * h } else { h };
                    g.mul_acc(Complex64::new(w, 0.0), &regular[k - j], &u);
                }
                if k > 0 {
                    g.mul_acc(Complex64::new(0.5 * h, 0.0), &regular[0], &Graded::identity());
                }
                g.to_superop()
            })
            .collect();
        let residual = next
            .iter()
            .zip(&current)
            .map(|(a, b)| (a - b).norm_fro())
            .fold(0.0, f64::max);
        if let Some(&last) = outcome.residuals.last() {
            growth = if residual > last { growth + 1 } else { 0 };
        }
        outcome.residuals.push(residual);
        current = next;
        if !residual.is_finite() || growth >= 3 {
            outcome.diverged = true;
            break;
        }
        if residual < tol {
            outcome.converged = true;
            break;
        }
    }
    outcome.generator = current;
    Ok(outcome)
}

/// `‖e^{iK_L t_k} Σ_{n≥2} Π⁽ⁿ⁾(t_k)‖` in the spectral norm; the time-local
/// expansion is only controlled while this stays below one.
pub fn convergence_monitor(reference: &SuperOp, props: &PropagatorOrders) -> Vec<f64> {
    let backward = powers(&reference.scale(Complex64::new(0.0, props.grid.step)).exp(), props.grid.count);
    (0..props.grid.len())
        .map(|k| {
            let mut corr = SuperOp::zero();
            for o in &props.orders[1..] {
                corr += &o[k];
            }
            (&backward[k] * &corr).norm_spectral()
        })
        .collect()
}

/// First sample at which the monitor reaches one.
pub fn validity_limit(monitor: &[f64]) -> Option<usize> {
    monitor.iter().position(|&m| m >= 1.0)
}
