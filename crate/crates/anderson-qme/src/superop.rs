//! Superoperators on the Liouville space of the Anderson dot.
//!
//! Density matrices are vectorized by column stacking, so `vec(ρ)[4c + r] = ρ[r, c]`.
//! Internally a [`SuperOp`] is stored in a permuted basis in which Liouville
//! indices are grouped by the change of particle number they carry
//! `(n_↑(r) − n_↑(c), n_↓(r) − n_↓(c))`. Every operator built from dot fields
//! maps such sectors into each other, so products only visit the few nonzero
//! blocks recorded in a per-row bitmask.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::{Matrix4, SMatrix, SVector};
use num_complex::Complex64;

pub type DotMatrix = Matrix4<Complex64>;
pub type LiouvilleVec = SVector<Complex64, 16>;
pub type DenseSuperOp = SMatrix<Complex64, 16, 16>;

pub const DIM: usize = 16;
pub(crate) const SECTORS: usize = 9;
pub(crate) const SECTOR_CHARGES: [(i32, i32); SECTORS] = [
    (0, 0),
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (-1, -1),
    (1, -1),
    (-1, 1),
];

struct Layout {
    /// permuted position of Liouville index
    pos: [usize; DIM],
    /// Liouville index at permuted position
    idx: [usize; DIM],
    start: [usize; SECTORS + 1],
}

const fn sector_of(i: usize) -> usize {
    let r = i % 4;
    let c = i / 4;
    let du = (r & 1) as i32 - (c & 1) as i32;
    let dd = ((r >> 1) & 1) as i32 - ((c >> 1) & 1) as i32;
    let mut s = 0;
    while s < SECTORS {
        if SECTOR_CHARGES[s].0 == du && SECTOR_CHARGES[s].1 == dd {
            return s;
        }
        s += 1;
    }
    panic!("unreachable sector");
}

const fn sector_at(p: usize) -> usize {
    let mut s = 0;
    while LAYOUT.start[s + 1] <= p {
        s += 1;
    }
    s
}

const fn build_layout() -> Layout {
    let mut pos = [0; DIM];
    let mut idx = [0; DIM];
    let mut start = [0; SECTORS + 1];
    let mut p = 0;
    let mut s = 0;
    while s < SECTORS {
        start[s] = p;
        let mut i = 0;
        while i < DIM {
            if sector_of(i) == s {
                pos[i] = p;
                idx[p] = i;
                p += 1;
            }
            i += 1;
        }
        s += 1;
    }
    start[SECTORS] = p;
    Layout { pos, idx, start }
}

const LAYOUT: Layout = build_layout();

/// First permuted position of each charge sector.
pub(crate) const SECTOR_START: [usize; SECTORS + 1] = LAYOUT.start;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A 16×16 complex superoperator with block-sparsity bookkeeping.
///
/// Storage outside the blocks flagged in `rows` is always exactly zero.
#[derive(Clone, PartialEq)]
pub struct SuperOp {
    data: [Complex64; DIM * DIM],
    rows: [u16; SECTORS],
}

impl std::fmt::Debug for SuperOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SuperOp{:?}", self.to_dense())
    }
}

impl Default for SuperOp {
    fn default() -> Self {
        Self::zero()
    }
}

impl SuperOp {
    pub fn zero() -> Self {
        SuperOp {
            data: [ZERO; DIM * DIM],
            rows: [0; SECTORS],
        }
    }

    pub fn identity() -> Self {
        let mut out = Self::zero();
        for p in 0..DIM {
            out.data[p * DIM + p] = ONE;
        }
        for s in 0..SECTORS {
            out.rows[s] = 1 << s;
        }
        out
    }

    /// Builds from a function of Liouville indices `(row, col)`.
    pub fn from_fn(mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut out = Self::zero();
        for i in 0..DIM {
            for j in 0..DIM {
                let v = f(i, j);
                if v != ZERO {
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn from_dense(m: &DenseSuperOp) -> Self {
        Self::from_fn(|i, j| m[(i, j)])
    }

    pub fn to_dense(&self) -> DenseSuperOp {
        DenseSuperOp::from_fn(|i, j| self.get(i, j))
    }

    /// Entry at Liouville indices.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[LAYOUT.pos[i] * DIM + LAYOUT.pos[j]]
    }

    /// Entry at permuted positions.
    #[inline]
    pub(crate) fn get_permuted(&self, p: usize, q: usize) -> Complex64 {
        self.data[p * DIM + q]
    }

    pub(crate) fn set_permuted(&mut self, p: usize, q: usize, v: Complex64) {
        self.data[p * DIM + q] = v;
        let (bi, bj) = (sector_at(p), sector_at(q));
        self.rows[bi] |= 1 << bj;
    }

    /// Sets the entry at Liouville indices.
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[LAYOUT.pos[i] * DIM + LAYOUT.pos[j]] = v;
        self.rows[sector_of(i)] |= 1 << sector_of(j);
    }

    /// Left multiplication `ρ ↦ Aρ`.
    pub fn left(a: &DotMatrix) -> Self {
        Self::from_fn(|i, j| {
            let (r, c) = (i % 4, i / 4);
            let (r2, c2) = (j % 4, j / 4);
            if c == c2 {
                a[(r, r2)]
            } else {
                ZERO
            }
        })
    }

    /// Right multiplication `ρ ↦ ρB`.
    pub fn right(b: &DotMatrix) -> Self {
        Self::from_fn(|i, j| {
            let (r, c) = (i % 4, i / 4);
            let (r2, c2) = (j % 4, j / 4);
            if r == r2 {
                b[(c2, c)]
            } else {
                ZERO
            }
        })
    }

    pub fn apply(&self, v: &LiouvilleVec) -> LiouvilleVec {
        let mut out = LiouvilleVec::zeros();
        for bi in 0..SECTORS {
            let mut mask = self.rows[bi];
            while mask != 0 {
                let bj = mask.trailing_zeros() as usize;
                mask &= mask - 1;
                for p in LAYOUT.start[bi]..LAYOUT.start[bi + 1] {
                    let mut acc = ZERO;
                    for q in LAYOUT.start[bj]..LAYOUT.start[bj + 1] {
                        acc += self.data[p * DIM + q] * v[LAYOUT.idx[q]];
                    }
                    out[LAYOUT.idx[p]] += acc;
                }
            }
        }
        out
    }

    /// `self += alpha · a · b`.
    pub fn mul_acc(&mut self, alpha: Complex64, a: &SuperOp, b: &SuperOp) {
        for bi in 0..SECTORS {
            let (i0, i1) = (LAYOUT.start[bi], LAYOUT.start[bi + 1]);
            let mut ka = a.rows[bi];
            while ka != 0 {
                let bk = ka.trailing_zeros() as usize;
                ka &= ka - 1;
                let (k0, k1) = (LAYOUT.start[bk], LAYOUT.start[bk + 1]);
                let mut jb = b.rows[bk];
                self.rows[bi] |= jb;
                while jb != 0 {
                    let bj = jb.trailing_zeros() as usize;
                    jb &= jb - 1;
                    let (j0, j1) = (LAYOUT.start[bj], LAYOUT.start[bj + 1]);
                    for i in i0..i1 {
                        for k in k0..k1 {
                            let aik = alpha * a.data[i * DIM + k];
                            let brow = &b.data[k * DIM + j0..k * DIM + j1];
                            let crow = &mut self.data[i * DIM + j0..i * DIM + j1];
                            for (c, b) in crow.iter_mut().zip(brow) {
                                *c += aik * b;
                            }
                        }
                    }
                }
            }
        }
    }

    /// `self += alpha · x`.
    pub fn axpy(&mut self, alpha: Complex64, x: &SuperOp) {
        for bi in 0..SECTORS {
            let mut mask = x.rows[bi];
            self.rows[bi] |= mask;
            while mask != 0 {
                let bj = mask.trailing_zeros() as usize;
                mask &= mask - 1;
                for p in LAYOUT.start[bi]..LAYOUT.start[bi + 1] {
                    for q in LAYOUT.start[bj]..LAYOUT.start[bj + 1] {
                        self.data[p * DIM + q] += alpha * x.data[p * DIM + q];
                    }
                }
            }
        }
    }

    pub fn scale(&self, alpha: Complex64) -> SuperOp {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= alpha;
        }
        out
    }

    pub fn scale_re(&self, alpha: f64) -> SuperOp {
        self.scale(Complex64::new(alpha, 0.0))
    }

    /// `self · other`, accumulated over nonzero blocks only.
    pub fn dot(&self, other: &SuperOp) -> SuperOp {
        let mut out = SuperOp::zero();
        out.mul_acc(ONE, self, other);
        out
    }

    /// `a · self · b`.
    pub fn sandwich(&self, a: &SuperOp, b: &SuperOp) -> SuperOp {
        a.dot(&self.dot(b))
    }

    /// Matrix exponential by scaling and squaring of a truncated Taylor series.
    pub fn exp(&self) -> SuperOp {
        let norm = self.norm_inf();
        if norm == 0.0 {
            return SuperOp::identity();
        }
        let squarings = if norm > 0.5 {
            (norm / 0.5).log2().ceil() as u32
        } else {
            0
        };
        let a = self.scale_re(0.5f64.powi(squarings as i32));
        let mut sum = SuperOp::identity();
        let mut term = SuperOp::identity();
        for n in 1..=30 {
            term = term.dot(&a).scale_re(1.0 / n as f64);
            sum += &term;
            if term.norm_inf() < 1e-18 * sum.norm_inf() {
                break;
            }
        }
        for _ in 0..squarings {
            sum = sum.dot(&sum);
        }
        sum
    }

    /// Inverse through a dense LU factorization; `None` when singular.
    pub fn inverse(&self) -> Option<SuperOp> {
        self.to_dense().try_inverse().map(|m| SuperOp::from_dense(&m))
    }

    /// Trace functional composed with this operator, `tr · S`.
    pub fn trace_row(&self) -> [Complex64; DIM] {
        let mut out = [ZERO; DIM];
        for (j, o) in out.iter_mut().enumerate() {
            *o = (0..4).map(|r| self.get(5 * r, j)).sum();
        }
        out
    }

    /// Largest absolute entry of `tr · S`.
    pub fn trace_defect(&self) -> f64 {
        self.trace_row().iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn norm_max(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..DIM)
            .map(|p| self.data[p * DIM..(p + 1) * DIM].iter().map(|c| c.l1_norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest singular value.
    pub fn norm_spectral(&self) -> f64 {
        self.to_dense()
            .singular_values()
            .iter()
            .cloned()
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &SuperOp) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

pub fn vec(rho: &DotMatrix) -> LiouvilleVec {
    LiouvilleVec::from_fn(|i, _| rho[(i % 4, i / 4)])
}

pub fn devec(v: &LiouvilleVec) -> DotMatrix {
    DotMatrix::from_fn(|r, c| v[4 * c + r])
}

impl AddAssign<&SuperOp> for SuperOp {
    fn add_assign(&mut self, rhs: &SuperOp) {
        self.axpy(ONE, rhs);
    }
}

impl SubAssign<&SuperOp> for SuperOp {
    fn sub_assign(&mut self, rhs: &SuperOp) {
        self.axpy(-ONE, rhs);
    }
}

impl Add for &SuperOp {
    type Output = SuperOp;
    fn add(self, rhs: &SuperOp) -> SuperOp {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &SuperOp {
    type Output = SuperOp;
    fn sub(self, rhs: &SuperOp) -> SuperOp {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Mul for &SuperOp {
    type Output = SuperOp;
    fn mul(self, rhs: &SuperOp) -> SuperOp {
        self.dot(rhs)
    }
}

impl Mul<&SuperOp> for Complex64 {
    type Output = SuperOp;
    fn mul(self, rhs: &SuperOp) -> SuperOp {
        rhs.scale(self)
    }
}

impl Neg for &SuperOp {
    type Output = SuperOp;
    fn neg(self) -> SuperOp {
        self.scale_re(-1.0)
    }
}
