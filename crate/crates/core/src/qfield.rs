//! Exact arithmetic in an imaginary quadratic order `O_D = Z[w]`, `w = (D + sqrt(D))/2`,
//! and in the free module `O_D^2`.
//!
//! Every element is stored in the basis `{1, w}`. The same basis is used for both
//! residue classes of `D` mod 4, so the structure constants are always integral:
//! `w^2 = D*w - (D^2 - D)/4`, `trace(w) = D`, `norm(w) = (D^2 - D)/4`.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A fundamental discriminant `D < 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub struct Discriminant(i64);

impl Discriminant {
    pub fn new(value: i64) -> Result<Self> {
        if value >= 0 {
            return Err(Error::NonNegativeDiscriminant(value));
        }
        if !is_fundamental(value) {
            return Err(Error::NotFundamental(value));
        }
        Ok(Discriminant(value))
    }

    pub fn value(self) -> i64 {
        self.0
    }

    pub fn abs(self) -> u64 {
        self.0.unsigned_abs()
    }
}

impl TryFrom<i64> for Discriminant {
    type Error = Error;

    fn try_from(value: i64) -> Result<Self> {
        Discriminant::new(value)
    }
}

impl From<Discriminant> for i64 {
    fn from(d: Discriminant) -> i64 {
        d.0
    }
}

impl fmt::Display for Discriminant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub(crate) fn is_squarefree(n: u64) -> bool {
    if n == 0 {
        return false;
    }
    let mut m = n;
    let mut p = 2u64;
    while p * p <= m {
        if m % p == 0 {
            m /= p;
            if m % p == 0 {
                return false;
            }
        }
        p += 1;
    }
    true
}

/// Fundamental discriminant test for negative integers.
pub fn is_fundamental(d: i64) -> bool {
    if d >= 0 {
        return false;
    }
    match d.rem_euclid(4) {
        1 => is_squarefree(d.unsigned_abs()),
        0 => {
            let m = d / 4;
            matches!(m.rem_euclid(4), 2 | 3) && is_squarefree(m.unsigned_abs())
        }
        _ => false,
    }
}

/// All fundamental discriminants `D` with `to <= D <= from < 0`, in decreasing order
/// (`-3, -4, -7, ...`).
pub fn fundamental_discriminants(from: i64, to: i64) -> Vec<Discriminant> {
    let (hi, lo) = if from >= to { (from, to) } else { (to, from) };
    (lo..=hi.min(-1))
        .rev()
        .filter(|&d| is_fundamental(d))
        .map(Discriminant)
        .collect()
}

/// `x + y*w` in the basis `{1, w}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OrderElement {
    pub x: i64,
    pub y: i64,
}

impl OrderElement {
    pub const ZERO: OrderElement = OrderElement { x: 0, y: 0 };
    pub const ONE: OrderElement = OrderElement { x: 1, y: 0 };

    pub const fn new(x: i64, y: i64) -> Self {
        OrderElement { x, y }
    }

    pub fn is_zero(self) -> bool {
        self.x == 0 && self.y == 0
    }

    pub fn scale(self, k: i64) -> Self {
        OrderElement::new(self.x * k, self.y * k)
    }
}

impl Add for OrderElement {
    type Output = OrderElement;
    fn add(self, o: OrderElement) -> OrderElement {
        OrderElement::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for OrderElement {
    type Output = OrderElement;
    fn sub(self, o: OrderElement) -> OrderElement {
        OrderElement::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for OrderElement {
    type Output = OrderElement;
    fn neg(self) -> OrderElement {
        OrderElement::new(-self.x, -self.y)
    }
}

impl fmt::Display for OrderElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.x, self.y) {
            (x, 0) => write!(f, "{x}"),
            (0, y) => write!(f, "{y}w"),
            (x, y) if y < 0 => write!(f, "{x}-{}w", -y),
            (x, y) => write!(f, "{x}+{y}w"),
        }
    }
}

/// The order `O_D` together with its unit group.
#[derive(Clone, Debug)]
pub struct OrderContext {
    disc: Discriminant,
    /// `norm(w) = (D^2 - D)/4`.
    nw: i64,
    units: Vec<OrderElement>,
}

/// Validates `d` and builds the order context.
pub fn make_order(d: i64) -> Result<OrderContext> {
    Ok(OrderContext::new(Discriminant::new(d)?))
}

impl OrderContext {
    pub fn new(disc: Discriminant) -> Self {
        let d = disc.value();
        let mut ctx = OrderContext { disc, nw: (d * d - d) / 4, units: Vec::new() };
        ctx.units = ctx.find_units();
        ctx
    }

    pub fn disc(&self) -> Discriminant {
        self.disc
    }

    pub fn d(&self) -> i64 {
        self.disc.value()
    }

    /// `norm(w)`, the constant term of the minimal polynomial of `w`.
    pub fn norm_w(&self) -> i64 {
        self.nw
    }

    pub fn mul(&self, a: OrderElement, b: OrderElement) -> OrderElement {
        let yy = a.y * b.y;
        OrderElement::new(a.x * b.x - self.nw * yy, a.x * b.y + a.y * b.x + self.d() * yy)
    }

    pub fn conj(&self, a: OrderElement) -> OrderElement {
        OrderElement::new(a.x + a.y * self.d(), -a.y)
    }

    pub fn norm(&self, a: OrderElement) -> i64 {
        a.x * a.x + self.d() * a.x * a.y + self.nw * a.y * a.y
    }

    pub fn trace(&self, a: OrderElement) -> i64 {
        2 * a.x + self.d() * a.y
    }

    /// `a / b` when `b` divides `a` in `O_D`.
    pub fn div_exact(&self, a: OrderElement, b: OrderElement) -> Option<OrderElement> {
        let n = self.norm(b);
        if n == 0 {
            return None;
        }
        let p = self.mul(a, self.conj(b));
        if p.x % n == 0 && p.y % n == 0 {
            Some(OrderElement::new(p.x / n, p.y / n))
        } else {
            None
        }
    }

    pub fn units(&self) -> &[OrderElement] {
        &self.units
    }

    pub fn is_unit(&self, a: OrderElement) -> bool {
        self.norm(a) == 1
    }

    fn find_units(&self) -> Vec<OrderElement> {
        // norm(x + y w) = (x + yD/2)^2 + y^2 |D|/4, so |y| <= 2/sqrt|D| and x is
        // within 1 of -yD/2.
        let d = self.d();
        let ymax = if d == -3 { 2 } else { 1 };
        let mut out = Vec::new();
        for y in -ymax..=ymax {
            let centre = -(y * d) / 2;
            for x in centre - 2..=centre + 2 {
                let u = OrderElement::new(x, y);
                if self.norm(u) == 1 {
                    out.push(u);
                }
            }
        }
        out.sort();
        out
    }
}

/// A column vector in `O_D^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModuleVector {
    pub x: OrderElement,
    pub y: OrderElement,
}

impl ModuleVector {
    pub const fn new(x: OrderElement, y: OrderElement) -> Self {
        ModuleVector { x, y }
    }

    pub fn from_coords(c: [i64; 4]) -> Self {
        ModuleVector::new(OrderElement::new(c[0], c[1]), OrderElement::new(c[2], c[3]))
    }

    /// Integer coordinates with respect to `(1,0), (w,0), (0,1), (0,w)`.
    pub fn coords(&self) -> [i64; 4] {
        [self.x.x, self.x.y, self.y.x, self.y.y]
    }

    pub fn is_zero(&self) -> bool {
        self.x.is_zero() && self.y.is_zero()
    }

    pub fn is_primitive(&self) -> bool {
        let g = self.coords().iter().fold(0i64, |g, &c| num_integer::gcd(g, c));
        g == 1
    }
}

impl fmt::Display for ModuleVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl OrderContext {
    pub fn scale_vector(&self, u: OrderElement, v: &ModuleVector) -> ModuleVector {
        ModuleVector::new(self.mul(u, v.x), self.mul(u, v.y))
    }

    /// `det[v | w]`.
    pub fn det2(&self, v: &ModuleVector, w: &ModuleVector) -> OrderElement {
        self.mul(v.x, w.y) - self.mul(v.y, w.x)
    }

    /// Representative of the unit orbit `{u v}`: the lexicographically largest
    /// coordinate vector.
    pub fn canonical_unit_rep(&self, v: &ModuleVector) -> ModuleVector {
        self.units
            .iter()
            .map(|&u| self.scale_vector(u, v))
            .max_by_key(|w| w.coords())
            .expect("unit group is never empty")
    }
}

/// Which arithmetic group acts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Gl2,
    Sl2,
}

impl Flavor {
    pub fn as_str(self) -> &'static str {
        match self {
            Flavor::Gl2 => "gl2",
            Flavor::Sl2 => "sl2",
        }
    }
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Flavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gl2" | "gl" => Ok(Flavor::Gl2),
            "sl2" | "sl" => Ok(Flavor::Sl2),
            other => Err(Error::Parse(format!("unknown group `{other}`"))),
        }
    }
}

/// A 2x2 matrix over `O_D` with cached determinant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupElement {
    /// Row-major entries `[[a, b], [c, d]]`.
    pub m: [[OrderElement; 2]; 2],
    pub det: OrderElement,
}

impl GroupElement {
    pub fn new(ctx: &OrderContext, m: [[OrderElement; 2]; 2]) -> Self {
        let det = ctx.mul(m[0][0], m[1][1]) - ctx.mul(m[0][1], m[1][0]);
        GroupElement { m, det }
    }

    pub fn identity() -> Self {
        GroupElement {
            m: [[OrderElement::ONE, OrderElement::ZERO], [OrderElement::ZERO, OrderElement::ONE]],
            det: OrderElement::ONE,
        }
    }

    pub fn scalar(ctx: &OrderContext, u: OrderElement) -> Self {
        GroupElement::new(ctx, [[u, OrderElement::ZERO], [OrderElement::ZERO, u]])
    }

    /// Matrix whose columns are `v` and `w`.
    pub fn from_columns(ctx: &OrderContext, v: &ModuleVector, w: &ModuleVector) -> Self {
        GroupElement::new(ctx, [[v.x, w.x], [v.y, w.y]])
    }

    pub fn is_in(&self, ctx: &OrderContext, flavor: Flavor) -> bool {
        match flavor {
            Flavor::Gl2 => ctx.is_unit(self.det),
            Flavor::Sl2 => self.det == OrderElement::ONE,
        }
    }

    pub fn is_central(&self) -> bool {
        self.m[0][1].is_zero() && self.m[1][0].is_zero() && self.m[0][0] == self.m[1][1]
    }

    pub fn mul(&self, ctx: &OrderContext, o: &GroupElement) -> GroupElement {
        let e = |i: usize, j: usize| ctx.mul(self.m[i][0], o.m[0][j]) + ctx.mul(self.m[i][1], o.m[1][j]);
        GroupElement::new(ctx, [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]])
    }

    /// Inverse, when the determinant is a unit.
    pub fn inverse(&self, ctx: &OrderContext) -> Option<GroupElement> {
        if !ctx.is_unit(self.det) {
            return None;
        }
        let inv = ctx.conj(self.det);
        let s = |a: OrderElement| ctx.mul(a, inv);
        Some(GroupElement::new(
            ctx,
            [[s(self.m[1][1]), s(-self.m[0][1])], [s(-self.m[1][0]), s(self.m[0][0])]],
        ))
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.m[0][0], self.m[0][1], self.m[1][0], self.m[1][1])
    }
}

/// Matrix-vector product `g v`.
pub fn act(ctx: &OrderContext, g: &GroupElement, v: &ModuleVector) -> ModuleVector {
    ModuleVector::new(
        ctx.mul(g.m[0][0], v.x) + ctx.mul(g.m[0][1], v.y),
        ctx.mul(g.m[1][0], v.x) + ctx.mul(g.m[1][1], v.y),
    )
}
