//! Dot operators, superfermions, the Liouvillian and the infinite-temperature self-energy.
//!
//! Basis order is `|0⟩, |↑⟩, |↓⟩, |↑↓⟩` with `|↑↓⟩ = d†_↑ d†_↓ |0⟩`, hence
//! `d_↓|↑↓⟩ = −|↑⟩`.

use num_complex::Complex64;

use crate::model::{ModelParams, Sign, Spin};
use crate::superop::{vec, DotMatrix, LiouvilleVec, SuperOp};

#[derive(Clone, Debug)]
pub struct DotOperators {
    /// annihilators indexed by spin
    pub d: [DotMatrix; 2],
    pub parity: DotMatrix,
    pub hamiltonian: DotMatrix,
}

impl DotOperators {
    /// `d_{ησ}`: creator for `η = +`, annihilator for `η = −`.
    pub fn field(&self, eta: Sign, spin: Spin) -> DotMatrix {
        let d = self.d[spin.index()];
        match eta {
            Sign::Plus => d.adjoint(),
            Sign::Minus => d,
        }
    }

    pub fn number(&self, spin: Spin) -> DotMatrix {
        let d = self.d[spin.index()];
        d.adjoint() * d
    }
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn build_dot_operators(params: &ModelParams) -> DotOperators {
    let mut d_up = DotMatrix::zeros();
    d_up[(0, 1)] = re(1.0);
    d_up[(2, 3)] = re(1.0);
    let mut d_down = DotMatrix::zeros();
    d_down[(0, 2)] = re(1.0);
    d_down[(1, 3)] = re(-1.0);
    let parity = DotMatrix::from_diagonal(&[1.0, -1.0, -1.0, 1.0].map(re).into());
    let (e, u) = (params.epsilon, params.u);
    let hamiltonian = DotMatrix::from_diagonal(&[0.0, e, e, 2.0 * e + u].map(re).into());
    DotOperators {
        d: [d_up, d_down],
        parity,
        hamiltonian,
    }
}

/// The eight superfermions together with the supervacuum and the trace covector.
#[derive(Clone, Debug)]
pub struct SuperfermionSet {
    ops: [[[SuperOp; 2]; 2]; 2],
    pub vacuum: LiouvilleVec,
    pub trace_covector: LiouvilleVec,
}

impl SuperfermionSet {
    pub fn g(&self, p: Sign, eta: Sign, spin: Spin) -> &SuperOp {
        &self.ops[p.index()][eta.index()][spin.index()]
    }

    /// Creation superfermion `G^+_{ησ}`.
    pub fn plus(&self, eta: Sign, spin: Spin) -> &SuperOp {
        self.g(Sign::Plus, eta, spin)
    }

    pub fn minus(&self, eta: Sign, spin: Spin) -> &SuperOp {
        self.g(Sign::Minus, eta, spin)
    }
}

/// Index triple of a single superfermion, used to inject a sign error for mutation tests.
pub type SuperfermionIndex = (Sign, Sign, Spin);

pub fn build_superfermions(ops: &DotOperators) -> SuperfermionSet {
    build_superfermions_with_flip(ops, None)
}

/// Same as [`build_superfermions`], optionally flipping the sign of the parity
/// term of one superfermion.
pub fn build_superfermions_with_flip(
    ops: &DotOperators,
    flip: Option<SuperfermionIndex>,
) -> SuperfermionSet {
    let norm = std::f64::consts::FRAC_1_SQRT_2;
    let left_parity = SuperOp::left(&ops.parity);
    let build = |p: Sign, eta: Sign, spin: Spin| {
        let d = ops.field(eta, spin);
        let mut sign = p.value();
        if flip == Some((p, eta, spin)) {
            sign = -sign;
        }
        let mut g = SuperOp::left(&d);
        g.mul_acc(re(sign), &left_parity, &SuperOp::right(&(ops.parity * d)));
        g.scale_re(norm)
    };
    let ops_arr = Sign::ALL.map(|p| Sign::ALL.map(|eta| Spin::ALL.map(|s| build(p, eta, s))));
    SuperfermionSet {
        ops: ops_arr,
        vacuum: vec(&DotMatrix::identity().scale(0.5)),
        trace_covector: vec(&DotMatrix::identity()),
    }
}

/// `L = [H, ·]`.
pub fn build_liouvillian(ops: &DotOperators) -> SuperOp {
    &SuperOp::left(&ops.hamiltonian) - &SuperOp::right(&ops.hamiltonian)
}

/// The Liouvillian written as a normal-ordered superfermion string.
pub fn liouvillian_string(params: &ModelParams, sf: &SuperfermionSet) -> SuperOp {
    let (e, u) = (params.epsilon, params.u);
    let mut l = SuperOp::zero();
    for eta in Sign::ALL {
        for s in Spin::ALL {
            let (eb, sb) = (eta.bar(), s.flip());
            l.mul_acc(re(-eta.value() * (e + 0.5 * u)), sf.plus(eb, s), sf.minus(eta, s));
            let a = &(sf.plus(eb, s) * sf.minus(eta, s)) * sf.minus(eb, sb);
            l.mul_acc(re(0.5 * u), &a, sf.minus(eta, sb));
            let b = &(sf.plus(eb, sb) * sf.plus(eta, sb)) * sf.plus(eb, s);
            l.mul_acc(re(0.5 * u), &b, sf.minus(eta, s));
        }
    }
    l
}

/// `Σ_∞ = −(i/2) Σ_{rησ} Γ_{rσ} G^+_{ησ} G^−_{η̄σ}`.
pub fn build_sigma_infinity(params: &ModelParams, sf: &SuperfermionSet) -> SuperOp {
    let mut sigma = SuperOp::zero();
    for s in Spin::ALL {
        let gamma = params.total_gamma(s);
        for eta in Sign::ALL {
            sigma.mul_acc(Complex64::new(0.0, -0.5 * gamma), sf.plus(eta, s), sf.minus(eta.bar(), s));
        }
    }
    sigma
}

/// Everything the dynamics needs about the dot, built once per parameter point.
#[derive(Clone, Debug)]
pub struct DotSystem {
    pub params: ModelParams,
    pub ops: DotOperators,
    pub sf: SuperfermionSet,
    pub liouvillian: SuperOp,
    pub sigma_inf: SuperOp,
}

impl DotSystem {
    pub fn new(params: &ModelParams) -> Self {
        let ops = build_dot_operators(params);
        let sf = build_superfermions(&ops);
        let liouvillian = build_liouvillian(&ops);
        let sigma_inf = build_sigma_infinity(params, &sf);
        DotSystem {
            params: params.clone(),
            ops,
            sf,
            liouvillian,
            sigma_inf,
        }
    }

    /// `L_∞ = L + Σ_∞`.
    pub fn l_inf(&self) -> SuperOp {
        &self.liouvillian + &self.sigma_inf
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvariantDefect {
    pub name: String,
    pub max_defect: f64,
}

/// Runs the superfermion and Liouvillian invariant suite.
pub fn algebra_defects(params: &ModelParams, ops: &DotOperators, sf: &SuperfermionSet) -> Vec<InvariantDefect> {
    let mut out = Vec::new();
    let id4 = DotMatrix::identity();
    let mut push = |name: &str, v: f64| {
        out.push(InvariantDefect {
            name: name.to_string(),
            max_defect: v,
        })
    };

    let mut fermion = 0.0f64;
    for s1 in Spin::ALL {
        for s2 in Spin::ALL {
            let (a, b) = (ops.d[s1.index()], ops.d[s2.index()]);
            let delta = if s1 == s2 { id4 } else { DotMatrix::zeros() };
            fermion = fermion.max((a * b.adjoint() + b.adjoint() * a - delta).camax());
            fermion = fermion.max((a * b + b * a).camax());
        }
        let d = ops.d[s1.index()];
        fermion = fermion.max((ops.parity * d + d * ops.parity).camax());
    }
    fermion = fermion.max((ops.parity * ops.parity - id4).camax());
    push("dot fermion algebra", fermion);

    let index: Vec<SuperfermionIndex> = Sign::ALL
        .iter()
        .flat_map(|&p| Sign::ALL.iter().flat_map(move |&e| Spin::ALL.map(move |s| (p, e, s))))
        .collect();
    let mut anti = 0.0f64;
    for &(p1, e1, s1) in &index {
        for &(p2, e2, s2) in &index {
            let (a, b) = (sf.g(p1, e1, s1), sf.g(p2, e2, s2));
            let mut ac = a * b;
            ac += &(b * a);
            if p1 == p2.bar() && e1 == e2.bar() && s1 == s2 {
                ac -= &SuperOp::identity();
            }
            anti = anti.max(ac.norm_max());
        }
    }
    push("superfermion anticommutators (64 pairs)", anti);

    let pauli = index
        .iter()
        .map(|&(p, e, s)| {
            let g = sf.g(p, e, s);
            (g * g).norm_max()
        })
        .fold(0.0, f64::max);
    push("super-Pauli (8 squares)", pauli);

    let trace_left = index
        .iter()
        .filter(|(p, _, _)| *p == Sign::Plus)
        .map(|&(p, e, s)| sf.g(p, e, s).trace_defect())
        .fold(0.0, f64::max);
    push("trace covector annihilates creators", trace_left);

    let vacuum = index
        .iter()
        .filter(|(p, _, _)| *p == Sign::Minus)
        .map(|&(p, e, s)| sf.g(p, e, s).apply(&sf.vacuum).camax())
        .fold(0.0, f64::max);
    push("annihilators kill the supervacuum", vacuum);

    let l = build_liouvillian(ops);
    push(
        "Liouvillian commutator vs superfermion string",
        l.max_abs_diff(&liouvillian_string(params, sf)),
    );
    push("trace covector annihilates L", l.trace_defect());
    push(
        "trace covector annihilates Sigma_inf",
        build_sigma_infinity(params, sf).trace_defect(),
    );
    out
}
