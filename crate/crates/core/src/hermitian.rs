//! Binary Hermitian forms over `O_D`, their realisation as positive definite quadratic
//! forms on `Z^4`, and exact short-vector enumeration.
//!
//! A form is `phi(x, y) = a x x' + b x y' + b' x' y + c y y'` (prime = conjugation) with
//! `a, c` rational and `b = b1 + b2 w`. Its linear coordinates are `(a, b1, b2, c)`.
//! The rank-one point of a vector `v = (x, y)` is stored in the dual coordinates
//! `(N(x), Tr(x y'), Tr(w x y'), N(y))`, so that `phi(v)` is the plain dot product of the
//! two coordinate vectors. Rank-one points are therefore always integral.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qfield::{GroupElement, ModuleVector, OrderContext, OrderElement};

pub type Rational = BigRational;

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn rat_frac(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Integral point of the cone of Hermitian forms, in dual (evaluation) coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConePoint(pub [i64; 4]);

impl ConePoint {
    pub fn as_i128(&self) -> [i128; 4] {
        self.0.map(i128::from)
    }
}

impl fmt::Display for ConePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.0;
        write!(f, "[{}, {}, {}, {}]", c[0], c[1], c[2], c[3])
    }
}

/// The rank-one form `q(v) = v v*` as a cone point; `phi . q(v) = phi(v)`.
pub fn rank_one(ctx: &OrderContext, v: &ModuleVector) -> ConePoint {
    let xy = ctx.mul(v.x, ctx.conj(v.y));
    let wxy = ctx.mul(OrderElement::new(0, 1), xy);
    ConePoint([ctx.norm(v.x), ctx.trace(xy), ctx.trace(wxy), ctx.norm(v.y)])
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HermitianForm {
    pub disc: i64,
    pub a: Rational,
    pub b1: Rational,
    pub b2: Rational,
    pub c: Rational,
}

impl HermitianForm {
    pub fn new(ctx: &OrderContext, a: Rational, b1: Rational, b2: Rational, c: Rational) -> Self {
        HermitianForm { disc: ctx.d(), a, b1, b2, c }
    }

    pub fn from_coords(disc: i64, c: [Rational; 4]) -> Self {
        let [a, b1, b2, c] = c;
        HermitianForm { disc, a, b1, b2, c }
    }

    pub fn from_integer_coords(disc: i64, c: [i128; 4]) -> Self {
        let r = |x: i128| Rational::from_integer(BigInt::from(x));
        HermitianForm { disc, a: r(c[0]), b1: r(c[1]), b2: r(c[2]), c: r(c[3]) }
    }

    /// `x x' + y y'`.
    pub fn identity(ctx: &OrderContext) -> Self {
        HermitianForm::new(ctx, rat(1), rat(0), rat(0), rat(1))
    }

    pub fn coords(&self) -> [Rational; 4] {
        [self.a.clone(), self.b1.clone(), self.b2.clone(), self.c.clone()]
    }

    pub fn pair(&self, p: &ConePoint) -> Rational {
        let c = p.0;
        &self.a * BigInt::from(c[0])
            + &self.b1 * BigInt::from(c[1])
            + &self.b2 * BigInt::from(c[2])
            + &self.c * BigInt::from(c[3])
    }

    pub fn evaluate(&self, ctx: &OrderContext, v: &ModuleVector) -> Rational {
        self.pair(&rank_one(ctx, v))
    }

    fn nw(&self) -> i64 {
        (self.disc * self.disc - self.disc) / 4
    }

    /// `N(b)` for the rational off-diagonal coefficient.
    fn norm_b(&self) -> Rational {
        &self.b1 * &self.b1
            + &self.b1 * &self.b2 * BigInt::from(self.disc)
            + &self.b2 * &self.b2 * BigInt::from(self.nw())
    }

    /// `a c - N(b)`; invariant under `GL_2(O_D)`.
    pub fn det(&self) -> Rational {
        &self.a * &self.c - self.norm_b()
    }

    pub fn is_positive_definite(&self) -> bool {
        self.a.is_positive() && self.det().is_positive()
    }

    pub fn is_positive_semidefinite(&self) -> bool {
        !self.a.is_negative() && !self.c.is_negative() && !self.det().is_negative()
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b1.is_zero() && self.b2.is_zero() && self.c.is_zero()
    }

    pub fn scale(&self, k: &Rational) -> Self {
        HermitianForm {
            disc: self.disc,
            a: &self.a * k,
            b1: &self.b1 * k,
            b2: &self.b2 * k,
            c: &self.c * k,
        }
    }

    /// `self + t * other`.
    pub fn add_scaled(&self, other: &HermitianForm, t: &Rational) -> Self {
        HermitianForm {
            disc: self.disc,
            a: &self.a + &other.a * t,
            b1: &self.b1 + &other.b1 * t,
            b2: &self.b2 + &other.b2 * t,
            c: &self.c + &other.c * t,
        }
    }

    /// `(b1 + b2 w) * t` for an integral `t`, as rational coordinates.
    fn mul_b(&self, b1: &Rational, b2: &Rational, t: OrderElement) -> (Rational, Rational) {
        let (x, y) = (BigInt::from(t.x), BigInt::from(t.y));
        let re = b1 * &x - b2 * &y * BigInt::from(self.nw());
        let im = b1 * &y + b2 * &x + b2 * &y * BigInt::from(self.disc);
        (re, im)
    }

    /// The form `v -> self(g v)`.
    pub fn compose(&self, ctx: &OrderContext, g: &GroupElement) -> Self {
        let [[al, be], [ga, de]] = g.m;
        let a = self.evaluate(ctx, &ModuleVector::new(al, ga));
        let c = self.evaluate(ctx, &ModuleVector::new(be, de));
        // b' = a al be' + b al de' + b' be' ga + c ga de'
        let t1 = ctx.mul(al, ctx.conj(be));
        let t4 = ctx.mul(ga, ctx.conj(de));
        let (p2r, p2i) = self.mul_b(&self.b1, &self.b2, ctx.mul(al, ctx.conj(de)));
        // conj(b) = (b1 + b2 D) - b2 w
        let cb1 = &self.b1 + &self.b2 * BigInt::from(self.disc);
        let cb2 = -&self.b2;
        let (p3r, p3i) = self.mul_b(&cb1, &cb2, ctx.mul(ctx.conj(be), ga));
        let b1 = &self.a * BigInt::from(t1.x) + p2r + p3r + &self.c * BigInt::from(t4.x);
        let b2 = &self.a * BigInt::from(t1.y) + p2i + p3i + &self.c * BigInt::from(t4.y);
        HermitianForm { disc: self.disc, a, b1, b2, c }
    }

    /// Gram matrix of `Q(z) = phi(z)` on `Z^4`, coordinates as in [`ModuleVector::coords`].
    pub fn gram4(&self) -> Result<[[Rational; 4]; 4]> {
        if !self.is_positive_definite() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(self.gram4_unchecked())
    }

    fn gram4_unchecked(&self) -> [[Rational; 4]; 4] {
        let d = rat(self.disc);
        let nw = rat(self.nw());
        let half = rat_frac(1, 2);
        // N(x1 + x2 w) = x1^2 + D x1 x2 + nw x2^2
        let norm_block = [[rat(1), &d * &half], [&d * &half, nw.clone()]];
        // Tr(x y') and Tr(w x y') as bilinear forms in (x1, x2) x (x3, x4)
        let tr1 = [[rat(1), &d * &half], [&d * &half, nw.clone()]];
        let tr2 = [[&d * &half, nw.clone()], [(&d * &d - &nw * rat(2)) * &half, &nw * &d * &half]];
        let mut g: [[Rational; 4]; 4] = Default::default();
        for i in 0..2 {
            for j in 0..2 {
                g[i][j] = &self.a * &norm_block[i][j];
                g[i + 2][j + 2] = &self.c * &norm_block[i][j];
                let off = &self.b1 * &tr1[i][j] + &self.b2 * &tr2[i][j];
                g[i][j + 2] = off.clone();
                g[j + 2][i] = off;
            }
        }
        g
    }
}

impl fmt::Display for HermitianForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(a={}, b={}+{}w, c={})", self.a, self.b1, self.b2, self.c)
    }
}

/// Minimal vectors of a form, one representative per unit orbit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinimalVectorSet {
    pub min_value: Rational,
    pub vectors: Vec<ModuleVector>,
}

/// Rational Cholesky factor in Fincke-Pohst layout: `Q(x) = sum_i q_ii (x_i + sum_{j>i} q_ij x_j)^2`.
fn cholesky(g: &[[Rational; 4]; 4]) -> [[Rational; 4]; 4] {
    let mut q = g.clone();
    for i in 0..4 {
        for j in i + 1..4 {
            q[j][i] = q[i][j].clone();
            q[i][j] = &q[i][j] / &q[i][i];
        }
        for k in i + 1..4 {
            for l in k..4 {
                let t = &q[k][i] * &q[i][l];
                q[k][l] -= t;
            }
        }
    }
    q
}

struct Enumerator<'a> {
    q: &'a [[Rational; 4]; 4],
    x: [i64; 4],
    out: Vec<[i64; 4]>,
}

impl Enumerator<'_> {
    fn run(&mut self, level: usize, remaining: Rational) {
        let q = self.q;
        let mut centre = Rational::zero();
        for j in level + 1..4 {
            if self.x[j] != 0 {
                centre += &q[level][j] * BigInt::from(self.x[j]);
            }
        }
        let s = &remaining / &q[level][level];
        let fits = |x: i64| {
            let t = &centre + rat(x);
            &t * &t <= s
        };
        let m = (-&centre).round().to_integer().to_i64().expect("coordinate fits in i64");
        if !fits(m) {
            return;
        }
        let mut lo = m;
        while fits(lo - 1) {
            lo -= 1;
        }
        let mut hi = m;
        while fits(hi + 1) {
            hi += 1;
        }
        for x in lo..=hi {
            self.x[level] = x;
            if level == 0 {
                self.out.push(self.x);
            } else {
                let t = &centre + rat(x);
                let rest = &remaining - &q[level][level] * &t * &t;
                self.run(level - 1, rest);
            }
        }
        self.x[level] = 0;
    }
}

/// LLL reduction (`delta = 3/4`) of a positive definite Gram matrix. Returns the
/// unimodular matrix whose rows are the reduced basis vectors in the original coordinates.
///
/// Each pass keeps Gram-Schmidt data in floating point, computed from the exact Gram
/// matrix of the current basis; passes repeat until one changes nothing. Only integer row
/// operations touch the basis, so the result is unimodular whatever the rounding, and
/// exactness of later enumeration does not depend on how well reduced it is.
pub fn lll_gram(g: &[[Rational; 4]; 4]) -> [[i64; 4]; 4] {
    let mut total = IDENTITY4;
    for _ in 0..16 {
        let gf = gram_f64(g, &total);
        let step = lll_pass(&gf);
        if step == IDENTITY4 {
            break;
        }
        match mat_mul4(&step, &total) {
            Some(t) => total = t,
            None => break,
        }
        // A well scaled input is reduced reliably in one pass.
        let big = gf.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        let small = (0..4).fold(f64::INFINITY, |m, i| m.min(gf[i][i]));
        if big < 1e6 * small {
            break;
        }
    }
    total
}

const IDENTITY4: [[i64; 4]; 4] = [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]];

fn mat_mul4(a: &[[i64; 4]; 4], b: &[[i64; 4]; 4]) -> Option<[[i64; 4]; 4]> {
    let mut out = [[0i64; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).try_fold(0i64, |s, k| a[i][k].checked_mul(b[k][j]).and_then(|t| s.checked_add(t)))?;
        }
    }
    Some(out)
}

/// Gram matrix of the rows of `b`, rounded to `f64` after exact evaluation.
fn gram_f64(g: &[[Rational; 4]; 4], b: &[[i64; 4]; 4]) -> [[f64; 4]; 4] {
    match scaled_gram(g, b) {
        Some((h, den)) => {
            let den_f = den.to_f64().unwrap_or(f64::NAN);
            std::array::from_fn(|i| std::array::from_fn(|j| h[i][j] as f64 / den_f))
        }
        None => {
            let h = gram_of(g, b);
            std::array::from_fn(|i| std::array::from_fn(|j| h[i][j].to_f64().unwrap_or(f64::NAN)))
        }
    }
}

/// One floating point LLL pass; returns the change of basis it found.
fn lll_pass(gf: &[[f64; 4]; 4]) -> [[i64; 4]; 4] {
    let mut b = IDENTITY4;
    if gf.iter().flatten().any(|x| !x.is_finite()) {
        return b;
    }
    let mut k = 1;
    for _ in 0..10_000 {
        if k >= 4 {
            break;
        }
        for j in (0..k).rev() {
            let (mu, _) = gram_schmidt_f64(gf, &b);
            let q = mu[k][j].round();
            if q != 0.0 {
                if !q.is_finite() || q.abs() > 1e12 {
                    return b;
                }
                let q = q as i64;
                let row: Option<Vec<i64>> =
                    (0..4).map(|t| q.checked_mul(b[j][t]).and_then(|x| b[k][t].checked_sub(x))).collect();
                match row {
                    Some(r) if r.iter().all(|x| x.abs() < 1 << 40) => b[k].copy_from_slice(&r),
                    _ => return b,
                }
            }
        }
        let (mu, norms) = gram_schmidt_f64(gf, &b);
        if norms[k] >= (0.75 - mu[k][k - 1] * mu[k][k - 1]) * norms[k - 1] {
            k += 1;
        } else {
            b.swap(k, k - 1);
            k = (k - 1).max(1);
        }
    }
    b
}

fn gram_schmidt_f64(g: &[[f64; 4]; 4], b: &[[i64; 4]; 4]) -> ([[f64; 4]; 4], [f64; 4]) {
    let mut h = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..=i {
            let mut s = 0.0;
            for k in 0..4 {
                for l in 0..4 {
                    s += g[k][l] * b[i][k] as f64 * b[j][l] as f64;
                }
            }
            h[i][j] = s;
        }
    }
    let mut mu = [[0.0; 4]; 4];
    let mut norms = [0.0; 4];
    for i in 0..4 {
        for j in 0..i {
            let mut s = h[i][j];
            for t in 0..j {
                s -= mu[j][t] * mu[i][t] * norms[t];
            }
            mu[i][j] = s / norms[j];
        }
        let mut s = h[i][i];
        for t in 0..i {
            s -= mu[i][t] * mu[i][t] * norms[t];
        }
        norms[i] = s;
    }
    (mu, norms)
}

fn gram_of(g: &[[Rational; 4]; 4], b: &[[i64; 4]; 4]) -> [[Rational; 4]; 4] {
    let mut out: [[Rational; 4]; 4] = Default::default();
    for i in 0..4 {
        for j in i..4 {
            let mut s = Rational::zero();
            for k in 0..4 {
                if b[i][k] == 0 {
                    continue;
                }
                for l in 0..4 {
                    if b[j][l] != 0 {
                        s += &g[k][l] * (BigInt::from(b[i][k]) * BigInt::from(b[j][l]));
                    }
                }
            }
            out[j][i] = s.clone();
            out[i][j] = s;
        }
    }
    out
}

/// A form prepared for repeated enumeration: LLL basis, exact values of the basis vectors
/// and a floating point Cholesky factor used to screen candidates.
struct Reduced {
    basis: [[i64; 4]; 4],
    diag: [Rational; 4],
    chol: Option<[[f64; 4]; 4]>,
    exact: Option<[[Rational; 4]; 4]>,
}

/// Relative slack added to the bound during floating point screening. Every candidate is
/// re-evaluated exactly afterwards, so the slack only has to dominate rounding error.
const SCREEN_SLACK: f64 = 1e-6;

impl Reduced {
    fn new(phi: &HermitianForm) -> Result<Self> {
        let g = phi.gram4()?;
        let basis = lll_gram(&g);
        let (gram_f, diag) = match scaled_gram(&g, &basis) {
            Some((h, den)) => {
                let den_f = den.to_f64().unwrap_or(f64::NAN);
                let gf: [[f64; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| h[i][j] as f64 / den_f));
                let diag = std::array::from_fn(|i| Rational::new(BigInt::from(h[i][i]), den.clone()));
                (Some(gf), diag)
            }
            None => {
                let h = gram_of(&g, &basis);
                (None, std::array::from_fn(|i| h[i][i].clone()))
            }
        };
        let chol = gram_f.and_then(|gf| cholesky_f64(&gf));
        let exact = match chol {
            Some(_) => None,
            None => Some(cholesky(&gram_of(&g, &basis))),
        };
        Ok(Reduced { basis, diag, chol, exact })
    }

    /// Coordinates with `Q(x) <= bound`, possibly with a few extra candidates slightly
    /// above it. Callers filter exactly.
    fn enumerate(&self, bound: &Rational) -> Vec<[i64; 4]> {
        if bound.is_negative() {
            return Vec::new();
        }
        let found = match (&self.chol, &self.exact) {
            (Some(q), _) => {
                let b = bound.to_f64().unwrap_or(f64::INFINITY);
                let mut e = FloatEnumerator { q, x: [0; 4], out: Vec::new() };
                e.run(3, b * (1.0 + SCREEN_SLACK) + f64::MIN_POSITIVE);
                e.out
            }
            (None, Some(q)) => {
                let mut e = Enumerator { q, x: [0; 4], out: Vec::new() };
                e.run(3, bound.clone());
                e.out
            }
            (None, None) => unreachable!("one factorisation is always present"),
        };
        found
            .into_iter()
            .filter(|y| y.iter().any(|&t| t != 0))
            .map(|y| std::array::from_fn(|t| (0..4).map(|i| y[i] * self.basis[i][t]).sum()))
            .collect()
    }
}

/// `B G B^T` over a common denominator, in `i128`, or `None` on overflow.
fn scaled_gram(g: &[[Rational; 4]; 4], b: &[[i64; 4]; 4]) -> Option<([[i128; 4]; 4], BigInt)> {
    let den = g.iter().flatten().fold(BigInt::from(1), |acc, x| acc.lcm(x.denom()));
    let mut gi = [[0i128; 4]; 4];
    for k in 0..4 {
        for l in 0..4 {
            gi[k][l] = (g[k][l].numer() * (&den / g[k][l].denom())).to_i128()?;
        }
    }
    let mut h = [[0i128; 4]; 4];
    for i in 0..4 {
        for j in i..4 {
            let mut s: i128 = 0;
            for k in 0..4 {
                for l in 0..4 {
                    let t = gi[k][l].checked_mul(b[i][k] as i128)?.checked_mul(b[j][l] as i128)?;
                    s = s.checked_add(t)?;
                }
            }
            h[i][j] = s;
            h[j][i] = s;
        }
    }
    Some((h, den))
}

/// Floating point counterpart of [`cholesky`]; `None` unless clearly positive definite.
fn cholesky_f64(g: &[[f64; 4]; 4]) -> Option<[[f64; 4]; 4]> {
    let mut q = *g;
    for i in 0..4 {
        if !(q[i][i].is_finite() && q[i][i] > 0.0) {
            return None;
        }
        for j in i + 1..4 {
            q[j][i] = q[i][j];
            q[i][j] /= q[i][i];
        }
        for k in i + 1..4 {
            for l in k..4 {
                q[k][l] -= q[k][i] * q[i][l];
            }
        }
    }
    Some(q)
}

struct FloatEnumerator<'a> {
    q: &'a [[f64; 4]; 4],
    x: [i64; 4],
    out: Vec<[i64; 4]>,
}

impl FloatEnumerator<'_> {
    fn run(&mut self, level: usize, remaining: f64) {
        if remaining < 0.0 {
            return;
        }
        let q = self.q;
        let centre: f64 = (level + 1..4).map(|j| q[level][j] * self.x[j] as f64).sum();
        let r = (remaining / q[level][level]).sqrt();
        let lo = (-centre - r).ceil() as i64;
        let hi = (-centre + r).floor() as i64;
        for x in lo..=hi {
            self.x[level] = x;
            if level == 0 {
                self.out.push(self.x);
            } else {
                let t = centre + x as f64;
                self.run(level - 1, remaining - q[level][level] * t * t);
            }
        }
        self.x[level] = 0;
    }
}

/// All nonzero `v` in `O_D^2` with `phi(v) <= bound`, with their values. Both `v` and
/// `-v` (and all other unit multiples) are returned.
pub fn short_vectors(
    ctx: &OrderContext,
    phi: &HermitianForm,
    bound: &Rational,
) -> Result<Vec<(ModuleVector, Rational)>> {
    let red = Reduced::new(phi)?;
    Ok(collect_values(ctx, phi, red.enumerate(bound), bound))
}

/// `phi` over a common denominator, so that `phi(v) = num . q(v) / den`.
struct ScaledForm {
    num: [i128; 4],
    den: BigInt,
}

impl ScaledForm {
    fn new(phi: &HermitianForm) -> Option<Self> {
        let c = phi.coords();
        let den = c.iter().fold(BigInt::from(1), |acc, x| acc.lcm(x.denom()));
        let mut num = [0i128; 4];
        for (n, x) in num.iter_mut().zip(&c) {
            *n = (x.numer() * (&den / x.denom())).to_i128()?;
        }
        Some(ScaledForm { num, den })
    }

    fn value(&self, p: &ConePoint) -> Option<i128> {
        (0..4).try_fold(0i128, |s, i| self.num[i].checked_mul(p.0[i] as i128).and_then(|t| s.checked_add(t)))
    }
}

/// The candidates with `phi(v) <= bound`, with exact values, sorted by coordinates.
fn collect_values(
    ctx: &OrderContext,
    phi: &HermitianForm,
    coords: Vec<[i64; 4]>,
    bound: &Rational,
) -> Vec<(ModuleVector, Rational)> {
    let mut out = collect_scaled(ctx, phi, &coords, bound).unwrap_or_else(|| {
        coords
            .iter()
            .map(|&c| {
                let v = ModuleVector::from_coords(c);
                let val = phi.evaluate(ctx, &v);
                (v, val)
            })
            .filter(|(_, val)| val <= bound)
            .collect()
    });
    out.sort_by(|a, b| a.0.coords().cmp(&b.0.coords()));
    out
}

/// Integer fast path of [`collect_values`]; `None` on overflow.
fn collect_scaled(
    ctx: &OrderContext,
    phi: &HermitianForm,
    coords: &[[i64; 4]],
    bound: &Rational,
) -> Option<Vec<(ModuleVector, Rational)>> {
    let sf = ScaledForm::new(phi)?;
    // n / den <= bn / bd  iff  n * bd <= bn * den
    let lhs_scale = bound.denom().to_i128()?;
    let rhs = (bound.numer() * &sf.den).to_i128()?;
    let mut kept: Vec<(ModuleVector, i128)> = Vec::new();
    for &c in coords {
        let v = ModuleVector::from_coords(c);
        let n = sf.value(&rank_one(ctx, &v))?;
        if n.checked_mul(lhs_scale)? <= rhs {
            kept.push((v, n));
        }
    }
    let mut cache: BTreeMap<i128, Rational> = BTreeMap::new();
    Some(
        kept.into_iter()
            .map(|(v, n)| {
                let val = cache.entry(n).or_insert_with(|| Rational::new(BigInt::from(n), sf.den.clone())).clone();
                (v, val)
            })
            .collect(),
    )
}

/// Exact minimum and minimal vectors (up to units) of a positive definite form.
pub fn minimal_vectors(ctx: &OrderContext, phi: &HermitianForm) -> Result<MinimalVectorSet> {
    if !phi.is_positive_definite() {
        return Err(Error::NotPositiveDefinite);
    }
    let red = Reduced::new(phi)?;
    // Each reduced basis vector is a nonzero lattice vector, so its value bounds the minimum.
    let bound = red.diag.iter().min().cloned().expect("four basis vectors");
    let sv = collect_values(ctx, phi, red.enumerate(&bound), &bound);
    let min_value = sv
        .iter()
        .map(|(_, val)| val)
        .min()
        .cloned()
        .ok_or_else(|| Error::Guard("no short vectors below a diagonal entry".into()))?;
    let vectors: BTreeSet<_> = sv
        .iter()
        .filter(|(_, val)| *val == min_value)
        .map(|(v, _)| ctx.canonical_unit_rep(v))
        .collect();
    let mut vectors: Vec<ModuleVector> = vectors.into_iter().collect();
    vectors.sort_by_key(|v| v.coords());
    Ok(MinimalVectorSet { min_value, vectors })
}

/// The smallest `t` with `base(v) + t dir(v) = level` over the vectors in `vs` on which
/// `dir` is negative, or `None` if there is none.
pub fn first_crossing(
    ctx: &OrderContext,
    base: &HermitianForm,
    dir: &HermitianForm,
    vs: &[ModuleVector],
    level: &Rational,
) -> Option<Rational> {
    let points: BTreeSet<ConePoint> = vs.iter().map(|v| rank_one(ctx, v)).collect();
    if let Some(t) = first_crossing_scaled(base, dir, &points, level) {
        return t;
    }
    points
        .iter()
        .filter_map(|p| {
            let r = dir.pair(p);
            r.is_negative().then(|| (base.pair(p) - level) / -r)
        })
        .min()
}

/// Integer fast path of [`first_crossing`]; the outer `None` signals overflow.
fn first_crossing_scaled(
    base: &HermitianForm,
    dir: &HermitianForm,
    points: &BTreeSet<ConePoint>,
    level: &Rational,
) -> Option<Option<Rational>> {
    let b = ScaledForm::new(base)?;
    let d = ScaledForm::new(dir)?;
    let bd = b.den.to_i128()?;
    let dd = d.den.to_i128()?;
    let ln = level.numer().to_i128()?;
    let ld = level.denom().to_i128()?;
    // t = (bn/bd - ln/ld) / (-dn/dd) = (bn ld - ln bd) dd / (-dn bd ld)
    let mut best: Option<(i128, i128)> = None;
    for p in points {
        let dn = d.value(p)?;
        if dn >= 0 {
            continue;
        }
        let bn = b.value(p)?;
        let num = bn.checked_mul(ld)?.checked_sub(ln.checked_mul(bd)?)?.checked_mul(dd)?;
        let den = (-dn).checked_mul(bd)?.checked_mul(ld)?;
        let better = match best {
            None => true,
            Some((n0, d0)) => num.checked_mul(d0)? < n0.checked_mul(den)?,
        };
        if better {
            best = Some((num, den));
        }
    }
    Some(best.map(|(n, d)| Rational::new(BigInt::from(n), BigInt::from(d))))
}

/// Minimum of `phi` over nonzero vectors, or `None` when it is at least `bound`
/// (in which case no vector strictly below `bound` exists).
pub fn vectors_below(
    ctx: &OrderContext,
    phi: &HermitianForm,
    bound: &Rational,
) -> Result<Vec<(ModuleVector, Rational)>> {
    Ok(short_vectors(ctx, phi, bound)?.into_iter().filter(|(_, val)| val < bound).collect())
}
