//! Sampled memory-kernel orders in the bare and renormalized expansions.
//!
//! A kernel order is stored as `K(t) = local·δ̄(t) + regular(t)`, where the
//! diagrams give `−iK`. Integrands that contain `γ^−` are evaluated in their
//! regularized form (identity subtraction and η-pairing), so every sample
//! including `t = 0` is finite and plain trapezoid weights suffice.
//!
//! Fourth-order diagrams avoid the naive triple loop: the non-crossing diagram
//! is a chain of two semigroup convolutions (linear in the number of samples),
//! the crossing diagram is marched in the outer time for every inner time
//! (quadratic).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::graded::Graded;
use crate::contractions::{regularized_eta_pair, t_gamma_minus};
use crate::liouville_fock::DotSystem;
use crate::model::{Sign, Spin, TimeGrid};
use crate::superop::SuperOp;

/// Below this time γ-containing integrands are evaluated through their limit forms.
pub const SMALL_T: f64 = 1e-6;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Bare,
    Renormalized,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Bare => "bare",
            Scheme::Renormalized => "renormalized",
        }
    }
}

/// Reference Liouvillian `K_L`: `L` for the bare scheme, `L_∞` for the renormalized one.
pub fn reference_liouvillian(sys: &DotSystem, scheme: Scheme) -> SuperOp {
    match scheme {
        Scheme::Bare => sys.liouvillian.clone(),
        Scheme::Renormalized => sys.l_inf(),
    }
}

/// `[1, E, E², …, E^n]`.
pub fn powers(e: &SuperOp, n: usize) -> Vec<SuperOp> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(SuperOp::identity());
    for k in 0..n {
        let next = &out[k] * e;
        out.push(next);
    }
    out
}

/// Samples `e^{−i·gen·t_k}` on the grid.
pub fn forward_evolution(gen: &SuperOp, grid: &TimeGrid) -> Vec<SuperOp> {
    powers(&gen.scale(Complex64::new(0.0, -grid.step)).exp(), grid.count)
}

/// Samples `e^{+i·gen·t_k}` on the grid.
pub fn backward_evolution(gen: &SuperOp, grid: &TimeGrid) -> Vec<SuperOp> {
    powers(&gen.scale(Complex64::new(0.0, grid.step)).exp(), grid.count)
}

#[derive(Clone, Debug)]
pub struct KernelOrder {
    pub order: u8,
    pub scheme: Scheme,
    pub grid: TimeGrid,
    /// coefficient of `δ̄(t)`
    pub local: SuperOp,
    pub regular: Vec<SuperOp>,
}

impl KernelOrder {
    pub fn zero(order: u8, scheme: Scheme, grid: TimeGrid) -> Self {
        KernelOrder {
            order,
            scheme,
            grid,
            local: SuperOp::zero(),
            regular: vec![SuperOp::zero(); grid.len()],
        }
    }

    pub fn max_trace_defect(&self) -> f64 {
        self.regular
            .iter()
            .map(SuperOp::trace_defect)
            .fold(self.local.trace_defect(), f64::max)
    }
}

/// A contraction line `(η, σ)` together with its two creation vertices.
struct Leg {
    plus: SuperOp,
    plus_bar: SuperOp,
    /// `t_k·γ^−(t_k)`
    t_gamma: Vec<Complex64>,
}

impl Leg {
    /// `γ^−(t_k)` for `k ≥ 1`.
    fn gamma(&self, k: usize, grid: &TimeGrid) -> Complex64 {
        self.t_gamma[k] / grid.t(k)
    }
}

/// Shared precomputation for all kernel orders of one parameter point and scheme.
pub struct KernelBuilder<'a> {
    sys: &'a DotSystem,
    grid: TimeGrid,
    scheme: Scheme,
    reference: SuperOp,
    forward: Vec<SuperOp>,
    legs: Vec<Leg>,
    /// `R_σ(t_k)` by spin
    pair: [Vec<Complex64>; 2],
}

impl<'a> KernelBuilder<'a> {
    pub fn new(sys: &'a DotSystem, grid: &TimeGrid, scheme: Scheme) -> Self {
        let reference = reference_liouvillian(sys, scheme);
        let forward = forward_evolution(&reference, grid);
        let res = &sys.params.reservoirs;
        let mut legs = Vec::with_capacity(4);
        for spin in Spin::ALL {
            for eta in Sign::ALL {
                legs.push(Leg {
                    plus: sys.sf.plus(eta, spin).clone(),
                    plus_bar: sys.sf.plus(eta.bar(), spin).clone(),
                    t_gamma: (0..grid.len())
                        .map(|k| t_gamma_minus(eta, spin, grid.t(k), res))
                        .collect(),
                });
            }
        }
        let pair = Spin::ALL.map(|s| {
            (0..grid.len())
                .map(|k| regularized_eta_pair(s, grid.t(k), res))
                .collect()
        });
        KernelBuilder {
            sys,
            grid: *grid,
            scheme,
            reference,
            forward,
            legs,
            pair,
        }
    }

    pub fn reference(&self) -> &SuperOp {
        &self.reference
    }

    pub fn forward(&self) -> &[SuperOp] {
        &self.forward
    }

    fn pair_product(&self, spin: Spin) -> SuperOp {
        self.sys.sf.plus(Sign::Plus, spin) * self.sys.sf.plus(Sign::Minus, spin)
    }

    /// `(e^{−iK_L t} − 1)/t`, by series for tiny `t`.
    fn difference_quotient(&self, k: usize) -> SuperOp {
        let t = self.grid.t(k);
        let minus_ik = self.reference.scale(-I);
        if t < SMALL_T {
            let sq = &minus_ik * &minus_ik;
            let cube = &sq * &minus_ik;
            let mut out = minus_ik;
            out.axpy(Complex64::new(0.5 * t, 0.0), &sq);
            out.axpy(Complex64::new(t * t / 6.0, 0.0), &cube);
            out
        } else {
            let mut out = self.forward[k].clone();
            out -= &SuperOp::identity();
            out.scale_re(1.0 / t)
        }
    }

    /// `−Σ_{ησ} γ^−_{ησ}(t) G^+_{ησ} e^{−iK_L t} G^+_{η̄σ}`, regularized.
    fn second_order_diagram(&self) -> Vec<SuperOp> {
        let pairs = Spin::ALL.map(|s| self.pair_product(s));
        (0..self.grid.len())
            .map(|k| {
                let dq = self.difference_quotient(k);
                let mut d = SuperOp::zero();
                for leg in &self.legs {
                    d.mul_acc(-leg.t_gamma[k], &leg.plus, &(&dq * &leg.plus_bar));
                }
                for s in Spin::ALL {
                    d.axpy(-self.pair[s.index()][k], &pairs[s.index()]);
                }
                d
            })
            .collect()
    }

    pub fn second_order(&self) -> KernelOrder {
        let local = match self.scheme {
            Scheme::Bare => self.sys.sigma_inf.clone(),
            Scheme::Renormalized => SuperOp::zero(),
        };
        KernelOrder {
            order: 2,
            scheme: self.scheme,
            grid: self.grid,
            local,
            regular: self.second_order_diagram().iter().map(|d| d.scale(I)).collect(),
        }
    }

    /// Non-crossing fourth-order diagram built on `d2 = −iK⁽²⁾_regular`.
    fn non_crossing(&self, d2: &[SuperOp]) -> Vec<SuperOp> {
        let h = self.grid.step;
        let e1 = &self.forward[1.min(self.grid.count)];
        let inner: Vec<SuperOp> = d2.iter().map(|d| d.scale_re(-1.0)).collect();
        let x = convolve_right(&inner, e1, h);
        let y = convolve_left(e1, &x, h);
        (0..self.grid.len())
            .map(|k| {
                let mut d = SuperOp::zero();
                if k == 0 {
                    return d;
                }
                for leg in &self.legs {
                    d.mul_acc(leg.gamma(k, &self.grid), &leg.plus, &(&y[k] * &leg.plus_bar));
                }
                d
            })
            .collect()
    }

    /// Crossing fourth-order diagram, split into the identity-subtracted part
    /// and the part that factorizes after anticommuting two vertices.
    fn crossing(&self) -> Vec<SuperOp> {
        let grid = &self.grid;
        let n = grid.count;
        let h = grid.step;
        let half = Complex64::new(0.5 * h, 0.0);
        if n == 0 {
            return vec![SuperOp::zero()];
        }
        let graded = |op: &SuperOp| Graded::from_superop(op).expect("charge-homogeneous operator");
        let legs = &self.legs;
        let nl = legs.len();
        let e1 = graded(&self.forward[1]);
        let forward: Vec<Graded> = self.forward.iter().map(graded).collect();
        let plus: Vec<Graded> = legs.iter().map(|l| graded(&l.plus)).collect();
        let plus_bar: Vec<Graded> = legs.iter().map(|l| graded(&l.plus_bar)).collect();
        let pairs = Spin::ALL.map(|s| graded(&self.pair_product(s)));

        // G^+_2 E_m and E_1 G^+_2 E_m
        let ge: Vec<Vec<Graded>> = plus.iter().map(|g| forward.iter().map(|e| g.mul(e)).collect()).collect();
        let ege: Vec<Vec<Graded>> = ge.iter().map(|v| v.iter().map(|g| e1.mul(g)).collect()).collect();
        let e1g: Vec<Graded> = plus.iter().map(|g| e1.mul(g)).collect();
        // corner value of γ_2(t1) G^+_2 (E(t1) − 1) at t1 = 0, premultiplied by E_1
        let minus_ik = graded(&self.reference.scale(-I));
        let corner: Vec<Graded> = plus
            .iter()
            .zip(legs)
            .map(|(g, l)| e1.mul(&g.mul(&minus_ik)).scale(half * l.t_gamma[0]))
            .collect();

        // Inner scalar functions c_l: four γ-legs, then the two η-paired functions.
        // The inner integral over [t2, t] is P_l(a) − E_{a−k2} P_l(k2) with prefix
        // integrals P_l; γ-legs start at t_1 since their factor vanishes at t2 = 0.
        let n_inner = nl + 2;
        let prefix: Vec<Vec<Graded>> = (0..n_inner)
            .map(|l| {
                let c = |k: usize| -> Complex64 {
                    match (l < nl, k) {
                        (true, 0) => Complex64::new(0.0, 0.0),
                        (true, _) => legs[l].gamma(k, grid),
                        (false, _) => self.pair[l - nl][k],
                    }
                };
                let mut out = vec![e1.zero_like()];
                for a in 1..=n {
                    let mut z = out[a - 1];
                    z.add_identity(half * c(a - 1));
                    let mut next = z.zero_like();
                    next.mul_acc(ONE, &z, &e1);
                    next.add_identity(half * c(a));
                    out.push(next);
                }
                out
            })
            .collect();

        let mut acc: Vec<Vec<Graded>> = plus_bar.iter().map(|g| vec![g.zero_like(); n + 1]).collect();
        // S_{1l}(a) = Σ_{k2} w γ_1(t_a − t_{k2}) G^+_{1̄} M_l(t_{k2})
        let mut sums: Vec<Vec<Vec<Graded>>> = plus_bar
            .iter()
            .map(|g| vec![vec![g.zero_like(); n + 1]; n_inner])
            .collect();
        let mut w_state: Vec<Graded> = plus.clone();

        for k2 in 0..n {
            let e_k2 = &forward[k2];
            // Q12 = G^+_{1̄} E_{k2} G^+_{2̄}
            let right_f1: Vec<Graded> = plus_bar.iter().map(|g| e_k2.mul(g)).collect();
            let q12: Vec<Vec<Graded>> = plus_bar
                .iter()
                .map(|g1| right_f1.iter().map(|r| g1.mul(r)).collect())
                .collect();
            // M_l(t2) for the factorized part, premultiplied by G^+_{1̄}
            let mut e_minus = *e_k2;
            e_minus.add_identity(-ONE);
            let active: Vec<usize> = (0..n_inner).filter(|&l| l >= nl || k2 > 0).collect();
            let m_inner: Vec<Graded> = (0..n_inner)
                .map(|l| {
                    if l < nl {
                        plus[l].mul(&e_minus.mul(&plus_bar[l]))
                    } else {
                        pairs[l - nl]
                    }
                })
                .collect();
            let q_inner: Vec<Vec<Graded>> = plus_bar
                .iter()
                .map(|g1| m_inner.iter().map(|m| g1.mul(m)).collect())
                .collect();
            // V_1 = Σ_l P_l(k2) G^+_{1̄} M_l
            let v: Vec<Graded> = (0..nl)
                .map(|i1| {
                    let mut out = plus_bar[i1].zero_like();
                    for &l in &active {
                        out.mul_acc(ONE, &prefix[l][k2], &q_inner[i1][l]);
                    }
                    out
                })
                .collect();

            for w in w_state.iter_mut() {
                w.set_zero();
            }
            let outer_weight = if k2 == 0 { 0.5 * h } else { h };

            for a in (k2 + 1)..=n {
                let m = a - k2;
                // W_2(a) = E_1 [W_2(a−1) + h/2 s(a−1)] + h/2 s(a),
                // s(k1) = γ_2(t_{k1}) G^+_2 (E_{k1−k2} − 1)
                for (j, l2) in legs.iter().enumerate() {
                    let mut next = w_state[j].zero_like();
                    next.mul_acc(ONE, &e1, &w_state[j]);
                    if a - 1 == 0 {
                        next.axpy(ONE, &corner[j]);
                    } else if m > 1 {
                        let g = half * l2.gamma(a - 1, grid);
                        next.axpy(g, &ege[j][m - 1]);
                        next.axpy(-g, &e1g[j]);
                    }
                    let g = half * l2.gamma(a, grid);
                    next.axpy(g, &ge[j][m]);
                    next.axpy(-g, &plus[j]);
                    w_state[j] = next;
                }
                for (i1, l1) in legs.iter().enumerate() {
                    let g1 = l1.gamma(m, grid) * outer_weight;
                    let target = &mut acc[i1][a];
                    for j in 0..nl {
                        target.mul_acc(-g1, &w_state[j], &q12[i1][j]);
                    }
                    if k2 > 0 {
                        target.mul_acc(-g1, &forward[m], &v[i1]);
                    }
                    for &l in &active {
                        sums[i1][l][a].axpy(g1, &q_inner[i1][l]);
                    }
                }
            }
        }

        (0..=n)
            .map(|a| {
                let mut d = SuperOp::zero();
                for (i1, g1) in plus.iter().enumerate() {
                    let mut inner = acc[i1][a];
                    for l in 0..n_inner {
                        inner.mul_acc(ONE, &prefix[l][a], &sums[i1][l][a]);
                    }
                    d += &g1.mul(&inner).to_superop();
                }
                d
            })
            .collect()
    }

    /// Bare-scheme term in which the inner contraction is the δ̄ line:
    /// `Σ_1 γ^−_1(t) G^+_1 [i∫_0^t E(t−s) Σ_∞ E(s) ds] G^+_{1̄}`.
    fn collapsed_inner_delta(&self) -> Vec<SuperOp> {
        let sigma = &self.sys.sigma_inf;
        let j = sandwiched_integral(&self.reference, sigma, &self.grid, &self.forward);
        (0..self.grid.len())
            .map(|k| {
                let t = self.grid.t(k);
                let quotient = if t < SMALL_T {
                    sigma.clone()
                } else {
                    j[k].scale_re(1.0 / t)
                };
                let mut d = SuperOp::zero();
                for leg in &self.legs {
                    d.mul_acc(I * leg.t_gamma[k], &leg.plus, &(&quotient * &leg.plus_bar));
                }
                d
            })
            .collect()
    }

    pub fn fourth_order(&self) -> KernelOrder {
        let d2 = self.second_order_diagram();
        let mut total = self.non_crossing(&d2);
        for (t, c) in total.iter_mut().zip(self.crossing()) {
            *t += &c;
        }
        if self.scheme == Scheme::Bare {
            for (t, c) in total.iter_mut().zip(self.collapsed_inner_delta()) {
                *t += &c;
            }
        }
        KernelOrder {
            order: 4,
            scheme: self.scheme,
            grid: self.grid,
            local: SuperOp::zero(),
            regular: total.iter().map(|d| d.scale(I)).collect(),
        }
    }

    /// Kernel orders `2..=order` (even).
    pub fn orders(&self, order: u8) -> Vec<KernelOrder> {
        let mut out = vec![self.second_order()];
        if order >= 4 {
            out.push(self.fourth_order());
        }
        out
    }

    /// Diagnostic access to the individual fourth-order diagrams as `−iK` contributions.
    pub fn fourth_order_parts(&self) -> (Vec<SuperOp>, Vec<SuperOp>) {
        let d2 = self.second_order_diagram();
        (self.non_crossing(&d2), self.crossing())
    }
}

/// `J_k = ∫_0^{t_k} E(t_k − s) f(s) ds` by the trapezoid rule, using `E(h)` only.
pub fn convolve_left(e1: &SuperOp, f: &[SuperOp], h: f64) -> Vec<SuperOp> {
    let half = Complex64::new(0.5 * h, 0.0);
    let mut out = Vec::with_capacity(f.len());
    out.push(SuperOp::zero());
    for k in 1..f.len() {
        let mut prev = out[k - 1].clone();
        prev.axpy(half, &f[k - 1]);
        let mut next = e1 * &prev;
        next.axpy(half, &f[k]);
        out.push(next);
    }
    out
}

/// `J_k = ∫_0^{t_k} f(s) E(t_k − s) ds` by the trapezoid rule, using `E(h)` only.
pub fn convolve_right(f: &[SuperOp], e1: &SuperOp, h: f64) -> Vec<SuperOp> {
    let half = Complex64::new(0.5 * h, 0.0);
    let mut out = Vec::with_capacity(f.len());
    out.push(SuperOp::zero());
    for k in 1..f.len() {
        let mut prev = out[k - 1].clone();
        prev.axpy(half, &f[k - 1]);
        let mut next = &prev * e1;
        next.axpy(half, &f[k]);
        out.push(next);
    }
    out
}

/// Exact `∫_0^{t_k} e^{−iA(t_k−s)} B e^{−iAs} ds` from a block exponential over one step.
pub fn sandwiched_integral(a: &SuperOp, b: &SuperOp, grid: &TimeGrid, forward: &[SuperOp]) -> Vec<SuperOp> {
    use nalgebra::DMatrix;
    let h = grid.step;
    let (da, db) = (a.to_dense(), b.to_dense());
    let mut block = DMatrix::<Complex64>::zeros(32, 32);
    let minus_ih = Complex64::new(0.0, -h);
    for i in 0..16 {
        for j in 0..16 {
            block[(i, j)] = minus_ih * da[(i, j)];
            block[(i + 16, j + 16)] = minus_ih * da[(i, j)];
            block[(i, j + 16)] = db[(i, j)] * h;
        }
    }
    let expd = block.exp();
    let j1 = SuperOp::from_fn(|i, j| expd[(i, j + 16)]);
    let e1 = &forward[1.min(grid.count)];
    let mut out = Vec::with_capacity(grid.len());
    out.push(SuperOp::zero());
    for k in 1..grid.len() {
        let mut next = e1 * &out[k - 1];
        next.mul_acc(ONE, &j1, &forward[k - 1]);
        out.push(next);
    }
    out
}

pub fn k2_bare(sys: &DotSystem, grid: &TimeGrid) -> KernelOrder {
    KernelBuilder::new(sys, grid, Scheme::Bare).second_order()
}

pub fn k2_ren(sys: &DotSystem, grid: &TimeGrid) -> KernelOrder {
    KernelBuilder::new(sys, grid, Scheme::Renormalized).second_order()
}

pub fn k4_bare(sys: &DotSystem, grid: &TimeGrid) -> KernelOrder {
    KernelBuilder::new(sys, grid, Scheme::Bare).fourth_order()
}

pub fn k4_ren(sys: &DotSystem, grid: &TimeGrid) -> KernelOrder {
    KernelBuilder::new(sys, grid, Scheme::Renormalized).fourth_order()
}
