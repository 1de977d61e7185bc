//! Superoperators with a single charge shift, stored compactly.
//!
//! Products of superfermions and functions of a particle-number conserving
//! generator map each charge sector `s` into exactly one sector `s + δ`. Such
//! an operator needs at most 36 entries, and products only touch blocks that
//! exist, which makes this the representation of choice for inner loops.

use num_complex::Complex64;

use crate::superop::{SuperOp, SECTORS, SECTOR_CHARGES, SECTOR_START};

const SHIFTS: usize = 25;
const CAPACITY: usize = 36;
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

const fn sector_size(s: usize) -> usize {
    SECTOR_START[s + 1] - SECTOR_START[s]
}

const fn shift_index(du: i32, dd: i32) -> usize {
    ((du + 2) * 5 + (dd + 2)) as usize
}

const fn find_sector(du: i32, dd: i32) -> i32 {
    let mut s = 0;
    while s < SECTORS {
        if SECTOR_CHARGES[s].0 == du && SECTOR_CHARGES[s].1 == dd {
            return s as i32;
        }
        s += 1;
    }
    -1
}

struct Tables {
    /// target sector of source sector `s` under each shift, or −1
    target: [[i32; SECTORS]; SHIFTS],
    offset: [[usize; SECTORS]; SHIFTS],
    /// index of the composed shift, or −1 when it leaves the charge range
    compose: [[i32; SHIFTS]; SHIFTS],
}

const fn build_tables() -> Tables {
    let mut target = [[-1; SECTORS]; SHIFTS];
    let mut offset = [[0; SECTORS]; SHIFTS];
    let mut compose = [[-1; SHIFTS]; SHIFTS];
    let mut du = -2;
    while du <= 2 {
        let mut dd = -2;
        while dd <= 2 {
            let sh = shift_index(du, dd);
            let mut off = 0;
            let mut s = 0;
            while s < SECTORS {
                let t = find_sector(SECTOR_CHARGES[s].0 + du, SECTOR_CHARGES[s].1 + dd);
                target[sh][s] = t;
                offset[sh][s] = off;
                if t >= 0 {
                    off += sector_size(t as usize) * sector_size(s);
                }
                s += 1;
            }
            let mut du2 = -2;
            while du2 <= 2 {
                let mut dd2 = -2;
                while dd2 <= 2 {
                    let (a, b) = (du + du2, dd + dd2);
                    if a >= -2 && a <= 2 && b >= -2 && b <= 2 {
                        compose[sh][shift_index(du2, dd2)] = shift_index(a, b) as i32;
                    }
                    dd2 += 1;
                }
                du2 += 1;
            }
            dd += 1;
        }
        du += 1;
    }
    Tables {
        target,
        offset,
        compose,
    }
}

const TABLES: Tables = build_tables();

/// One block product `C[oc] += A[oa]·B[ob]` with dimensions `m×k · k×n`.
#[derive(Clone, Copy)]
struct BlockStep {
    oa: u8,
    ob: u8,
    oc: u8,
    dims: u8,
}

struct Plan {
    steps: [[[BlockStep; SECTORS]; SHIFTS]; SHIFTS],
    len: [[u8; SHIFTS]; SHIFTS],
}

const fn dims_code(m: usize, k: usize, n: usize) -> u8 {
    const fn code(x: usize) -> u8 {
        match x {
            1 => 0,
            2 => 1,
            _ => 2,
        }
    }
    code(m) * 9 + code(k) * 3 + code(n)
}

const fn build_plan() -> Plan {
    let empty = BlockStep {
        oa: 0,
        ob: 0,
        oc: 0,
        dims: 0,
    };
    let mut steps = [[[empty; SECTORS]; SHIFTS]; SHIFTS];
    let mut len = [[0u8; SHIFTS]; SHIFTS];
    let mut sa = 0;
    while sa < SHIFTS {
        let mut sb = 0;
        while sb < SHIFTS {
            let sc = TABLES.compose[sa][sb];
            let mut s = 0;
            while sc >= 0 && s < SECTORS {
                let tb = TABLES.target[sb][s];
                if tb >= 0 {
                    let ta = TABLES.target[sa][tb as usize];
                    if ta >= 0 {
                        let i = len[sa][sb] as usize;
                        steps[sa][sb][i] = BlockStep {
                            oa: TABLES.offset[sa][tb as usize] as u8,
                            ob: TABLES.offset[sb][s] as u8,
                            oc: TABLES.offset[sc as usize][s] as u8,
                            dims: dims_code(sector_size(ta as usize), sector_size(tb as usize), sector_size(s)),
                        };
                        len[sa][sb] += 1;
                    }
                }
                s += 1;
            }
            sb += 1;
        }
        sa += 1;
    }
    Plan { steps, len }
}

static PLAN: Plan = build_plan();

#[inline(always)]
fn block<const M: usize, const K: usize, const N: usize>(
    alpha: Complex64,
    a: &[Complex64],
    b: &[Complex64],
    c: &mut [Complex64],
) {
    let a = &a[..M * K];
    let b = &b[..K * N];
    let c = &mut c[..M * N];
    for i in 0..M {
        for l in 0..K {
            let ail = alpha * a[i * K + l];
            for j in 0..N {
                c[i * N + j] += ail * b[l * N + j];
            }
        }
    }
}

macro_rules! dispatch {
    ($dims:expr, $alpha:expr, $a:expr, $b:expr, $c:expr; $($code:literal => ($m:literal, $k:literal, $n:literal)),*) => {
        match $dims {
            $($code => block::<$m, $k, $n>($alpha, $a, $b, $c),)*
            _ => unreachable!(),
        }
    };
}

/// Homogeneous superoperator: every sector `s` is mapped into `s + δ` only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Graded {
    shift: usize,
    data: [Complex64; CAPACITY],
}

impl Graded {
    pub fn zero_with_shift(du: i32, dd: i32) -> Self {
        Graded {
            shift: shift_index(du, dd),
            data: [ZERO; CAPACITY],
        }
    }

    fn zero_index(shift: usize) -> Self {
        Graded {
            shift,
            data: [ZERO; CAPACITY],
        }
    }

    /// Zero operator with the same shift as `self`.
    pub fn zero_like(&self) -> Self {
        Self::zero_index(self.shift)
    }

    /// Zero operator with the shift of the product `a·b`.
    pub fn zero_product(a: &Graded, b: &Graded) -> Self {
        let sh = TABLES.compose[a.shift][b.shift];
        assert!(sh >= 0, "product leaves the charge range");
        Self::zero_index(sh as usize)
    }

    /// Converts a homogeneous [`SuperOp`]; `None` if entries of different shifts are present.
    pub fn from_superop(op: &SuperOp) -> Option<Self> {
        let mut shift = None;
        for bi in 0..SECTORS {
            for bj in 0..SECTORS {
                let nonzero = (SECTOR_START[bi]..SECTOR_START[bi + 1]).any(|p| {
                    (SECTOR_START[bj]..SECTOR_START[bj + 1]).any(|q| op.get_permuted(p, q) != ZERO)
                });
                if nonzero {
                    let d = (
                        SECTOR_CHARGES[bi].0 - SECTOR_CHARGES[bj].0,
                        SECTOR_CHARGES[bi].1 - SECTOR_CHARGES[bj].1,
                    );
                    match shift {
                        None => shift = Some(d),
                        Some(s) if s != d => return None,
                        _ => {}
                    }
                }
            }
        }
        let (du, dd) = shift.unwrap_or((0, 0));
        let mut out = Self::zero_with_shift(du, dd);
        for s in 0..SECTORS {
            let t = TABLES.target[out.shift][s];
            if t < 0 {
                continue;
            }
            let t = t as usize;
            let (m, n) = (sector_size(t), sector_size(s));
            let off = TABLES.offset[out.shift][s];
            for i in 0..m {
                for j in 0..n {
                    out.data[off + i * n + j] = op.get_permuted(SECTOR_START[t] + i, SECTOR_START[s] + j);
                }
            }
        }
        Some(out)
    }

    pub fn to_superop(&self) -> SuperOp {
        let mut out = SuperOp::zero();
        for s in 0..SECTORS {
            let t = TABLES.target[self.shift][s];
            if t < 0 {
                continue;
            }
            let t = t as usize;
            let (m, n) = (sector_size(t), sector_size(s));
            let off = TABLES.offset[self.shift][s];
            for i in 0..m {
                for j in 0..n {
                    let v = self.data[off + i * n + j];
                    if v != ZERO {
                        out.set_permuted(SECTOR_START[t] + i, SECTOR_START[s] + j, v);
                    }
                }
            }
        }
        out
    }

    pub fn identity() -> Self {
        let mut out = Self::zero_with_shift(0, 0);
        for s in 0..SECTORS {
            let n = sector_size(s);
            let off = TABLES.offset[out.shift][s];
            for i in 0..n {
                out.data[off + i * n + i] = Complex64::new(1.0, 0.0);
            }
        }
        out
    }

    /// `self += alpha · a · b`; the shift of `self` must be that of `a·b`.
    #[inline]
    pub fn mul_acc(&mut self, alpha: Complex64, a: &Graded, b: &Graded) {
        debug_assert_eq!(TABLES.compose[a.shift][b.shift], self.shift as i32);
        let steps = &PLAN.steps[a.shift][b.shift][..PLAN.len[a.shift][b.shift] as usize];
        for st in steps {
            let (ad, bd) = (&a.data[st.oa as usize..], &b.data[st.ob as usize..]);
            let cd = &mut self.data[st.oc as usize..];
            dispatch!(st.dims, alpha, ad, bd, cd;
                0 => (1, 1, 1), 1 => (1, 1, 2), 2 => (1, 1, 4),
                3 => (1, 2, 1), 4 => (1, 2, 2), 5 => (1, 2, 4),
                6 => (1, 4, 1), 7 => (1, 4, 2), 8 => (1, 4, 4),
                9 => (2, 1, 1), 10 => (2, 1, 2), 11 => (2, 1, 4),
                12 => (2, 2, 1), 13 => (2, 2, 2), 14 => (2, 2, 4),
                15 => (2, 4, 1), 16 => (2, 4, 2), 17 => (2, 4, 4),
                18 => (4, 1, 1), 19 => (4, 1, 2), 20 => (4, 1, 4),
                21 => (4, 2, 1), 22 => (4, 2, 2), 23 => (4, 2, 4),
                24 => (4, 4, 1), 25 => (4, 4, 2), 26 => (4, 4, 4));
        }
    }

    pub fn mul(&self, other: &Graded) -> Graded {
        let mut out = Self::zero_product(self, other);
        out.mul_acc(Complex64::new(1.0, 0.0), self, other);
        out
    }

    /// `self += alpha · x` for operators of equal shift.
    #[inline]
    pub fn axpy(&mut self, alpha: Complex64, x: &Graded) {
        debug_assert_eq!(self.shift, x.shift);
        for (a, b) in self.data.iter_mut().zip(x.data.iter()) {
            *a += alpha * b;
        }
    }

    /// Adds `alpha` times the identity; `self` must conserve charge.
    pub fn add_identity(&mut self, alpha: Complex64) {
        debug_assert_eq!(self.shift, shift_index(0, 0));
        for s in 0..SECTORS {
            let n = sector_size(s);
            let off = TABLES.offset[self.shift][s];
            for i in 0..n {
                self.data[off + i * n + i] += alpha;
            }
        }
    }

    pub fn scale(&self, alpha: Complex64) -> Graded {
        let mut out = *self;
        for v in out.data.iter_mut() {
            *v *= alpha;
        }
        out
    }

    pub fn set_zero(&mut self) {
        self.data = [ZERO; CAPACITY];
    }
}

/// Converts samples of charge-conserving operators.
pub(crate) fn conserving(ops: &[SuperOp]) -> Vec<Graded> {
    ops.iter()
        .map(|op| {
            let g = Graded::from_superop(op).expect("charge-homogeneous operator");
            assert_eq!(g.shift, shift_index(0, 0), "operator does not conserve charge");
            g
        })
        .collect()
}

pub(crate) fn ungraded(ops: &[Graded]) -> Vec<SuperOp> {
    ops.iter().map(Graded::to_superop).collect()
}

/// `out[k] = ∫_0^{t_k} kernel(t_k − s) f(s) ds` by the trapezoid rule.
pub(crate) fn history_convolution(kernel: &[Graded], f: &[Graded], h: f64) -> Vec<Graded> {
    let zero = Graded::zero_with_shift(0, 0);
    (0..f.len())
        .map(|k| {
            let mut out = zero;
            if k > 0 {
                for j in 0..=k {
                    let w = if j == 0 || j == k { 0.5 * h } else { h };
                    out.mul_acc(Complex64::new(w, 0.0), &kernel[k - j], &f[j]);
                }
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouville_fock::DotSystem;
    use crate::model::{ModelParams, Reservoir, Sign, Spin};

    fn system() -> DotSystem {
        DotSystem::new(&ModelParams {
            epsilon: 0.7,
            u: 2.1,
            reservoirs: vec![Reservoir::new(0.6, 0.2, 0.9)],
        })
    }

    #[test]
    fn round_trip_and_products_match_superop() {
        let sys = system();
        let e = sys.l_inf().scale(Complex64::new(0.0, -0.3)).exp();
        let g1 = sys.sf.plus(Sign::Plus, Spin::Up);
        let g2 = sys.sf.plus(Sign::Minus, Spin::Down);
        let ops = [e.clone(), g1.clone(), g2.clone(), &(g1 * &e) * g2];
        for op in &ops {
            let gr = Graded::from_superop(op).expect("homogeneous");
            assert_eq!(gr.to_superop().max_abs_diff(op), 0.0);
        }
        for a in &ops {
            for b in &ops {
                let (ga, gb) = (Graded::from_superop(a).unwrap(), Graded::from_superop(b).unwrap());
                let prod = ga.mul(&gb).to_superop();
                assert!(prod.max_abs_diff(&(a * b)) < 1e-14);
            }
        }
        assert!(Graded::from_superop(&(g1 + g2)).is_none());
        assert_eq!(Graded::identity().to_superop(), SuperOp::identity());
    }

    #[test]
    fn accumulation_and_identity_shift() {
        let sys = system();
        let e = Graded::from_superop(&sys.l_inf().scale(Complex64::new(0.0, -0.1)).exp()).unwrap();
        let mut acc = e;
        acc.add_identity(Complex64::new(-1.0, 0.0));
        let mut expected = e.to_superop();
        expected -= &SuperOp::identity();
        assert!(acc.to_superop().max_abs_diff(&expected) < 1e-15);
        let mut twice = e.zero_like();
        twice.axpy(Complex64::new(2.0, 0.0), &e);
        assert!(twice.to_superop().max_abs_diff(&e.to_superop().scale_re(2.0)) < 1e-15);
    }
}
