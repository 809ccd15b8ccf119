//! Class groups of imaginary quadratic orders, the cuspidal/Eisenstein bookkeeping for the
//! Voronoi homology, and the derived growth statistics.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qfield::{Discriminant, Flavor};
use crate::zhomology::HomologyResult;

/// A primitive binary quadratic form `a x^2 + b x y + c y^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QuadForm {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

impl QuadForm {
    pub fn discriminant(&self) -> i64 {
        self.b * self.b - 4 * self.a * self.c
    }

    /// The reduced form in the class: `|b| <= a <= c`, and `b >= 0` when `|b| = a` or `a = c`.
    pub fn reduce(self) -> QuadForm {
        let QuadForm { mut a, mut b, mut c } = self;
        loop {
            if b > a || b <= -a {
                // Translate b into (-a, a].
                let k = Integer::div_floor(&(a - b), &(2 * a));
                let nb = b + 2 * k * a;
                c += k * (b + k * a);
                b = nb;
            }
            if a > c {
                std::mem::swap(&mut a, &mut c);
                b = -b;
                continue;
            }
            if a == c && b < 0 {
                b = -b;
            }
            return QuadForm { a, b, c };
        }
    }

    /// Gauss composition (Dirichlet's formulation), reduced.
    pub fn compose(self, other: QuadForm) -> QuadForm {
        let d = self.discriminant();
        let (a1, b1) = (self.a, self.b);
        let (a2, b2, c2) = (other.a, other.b, other.c);
        let s = (b1 + b2) / 2;
        let g1 = a1.extended_gcd(&a2);
        let g = g1.gcd.extended_gcd(&s);
        let e = g.gcd;
        // e = u a1 + v a2 + w s; only v and w are needed
        let (v, w) = (g1.y * g.x, g.y);
        let a3 = a1 / e * (a2 / e);
        let t = v * (b1 - b2) / 2 - w * c2;
        let b3 = (b2 + 2 * (a2 / e) * t).rem_euclid(2 * a3);
        let c3 = (b3 * b3 - d) / (4 * a3);
        QuadForm { a: a3, b: b3, c: c3 }.reduce()
    }
}

/// The principal form of discriminant `d`.
pub fn principal_form(d: i64) -> QuadForm {
    let b = d.rem_euclid(2);
    QuadForm { a: 1, b, c: (b * b - d) / 4 }
}

/// All reduced primitive forms of discriminant `d < 0`, sorted.
pub fn reduced_forms(d: i64) -> Vec<QuadForm> {
    let mut out = Vec::new();
    let mut a = 1;
    while 3 * a * a <= -d {
        for b in -a + 1..=a {
            let num = b * b - d;
            if num % (4 * a) != 0 {
                continue;
            }
            let c = num / (4 * a);
            if c < a || (a == c && b < 0) {
                continue;
            }
            if a.gcd(&b).gcd(&c) != 1 {
                continue;
            }
            out.push(QuadForm { a, b, c });
        }
        a += 1;
    }
    out.sort();
    out
}

/// Structure of a finite abelian group.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassGroup {
    pub h: u64,
    /// Invariant factors `d1 | d2 | ...`, all greater than one; empty when `h = 1`.
    pub elementary_divisors: Vec<u64>,
}

fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        let mut e = 0;
        while n % p == 0 {
            n /= p;
            e += 1;
        }
        if e > 0 {
            out.push((p, e));
        }
        p += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Class group of discriminant `d` from the reduced forms: element orders are found by
/// repeated composition and each `p`-part is read off from the sizes of `G[p^k]`.
pub fn class_group(d: Discriminant) -> ClassGroup {
    let forms = reduced_forms(d.value());
    let id = principal_form(d.value());
    let h = forms.len() as u64;
    let orders: Vec<u64> = forms
        .iter()
        .map(|&f| {
            let mut g = f;
            let mut n = 1;
            while g != id {
                g = g.compose(f);
                n += 1;
            }
            n
        })
        .collect();
    // cyclic factors of each prime-power order
    let mut prime_parts: Vec<Vec<u64>> = Vec::new();
    for (p, e) in factorize(h) {
        // |G[p^k]| counts elements whose order divides p^k.
        let size = |k: u32| orders.iter().filter(|&&o| p.pow(k) % o == 0).count();
        let ranks: Vec<u32> = (0..=e)
            .map(|k| {
                let n = size(k) as u64;
                let mut r = 0;
                let mut m = 1;
                while m < n {
                    m *= p;
                    r += 1;
                }
                r
            })
            .collect();
        let mut factors = Vec::new();
        for k in 1..=e as usize {
            // number of cyclic factors of order exactly p^k
            let at_least_k = ranks[k] - ranks[k - 1];
            let at_least_k1 = if k < e as usize { ranks[k + 1] - ranks[k] } else { 0 };
            for _ in 0..(at_least_k - at_least_k1) {
                factors.push(p.pow(k as u32));
            }
        }
        factors.sort_unstable_by(|a, b| b.cmp(a));
        prime_parts.push(factors);
    }
    // Largest invariant factor combines the largest factor of each prime, and so on.
    let width = prime_parts.iter().map(Vec::len).max().unwrap_or(0);
    let mut divisors: Vec<u64> =
        (0..width).map(|i| prime_parts.iter().map(|f| f.get(i).copied().unwrap_or(1)).product()).collect();
    divisors.reverse();
    ClassGroup { h, elementary_divisors: divisors }
}

/// Dimensions of the cuspidal and Eisenstein parts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohomologySplit {
    pub cusp_dim: usize,
    pub eis_dim_h2: usize,
    pub eis_dim_h1: usize,
}

/// Splits off the Eisenstein part, whose dimensions depend only on the class number, and
/// checks that degree two agrees.
pub fn cusp_dimension(hres: &HomologyResult, cg: &ClassGroup, flavor: Flavor, d: Discriminant) -> Result<CohomologySplit> {
    let h = cg.h as usize;
    let eis_dim_h2 = h - 1;
    let eis_dim_h1 = match flavor {
        Flavor::Gl2 => 0,
        Flavor::Sl2 if matches!(d.value(), -3 | -4) => 0,
        Flavor::Sl2 => h,
    };
    let [b1, b2, _] = hres.betti;
    let cusp_dim = b1
        .checked_sub(eis_dim_h2)
        .ok_or_else(|| Error::Inconsistent(format!("D = {d}: betti1 = {b1} is below h - 1 = {eis_dim_h2}")))?;
    if b2 != cusp_dim + eis_dim_h1 {
        return Err(Error::Inconsistent(format!(
            "D = {d} {flavor}: betti2 = {b2}, expected cusp {cusp_dim} + {eis_dim_h1}"
        )));
    }
    Ok(CohomologySplit { cusp_dim, eis_dim_h2, eis_dim_h1 })
}

pub fn euler_phi(n: u64) -> u64 {
    factorize(n).into_iter().fold(n, |acc, (p, _)| acc / p * (p - 1))
}

/// Lower bound for the cuspidal dimension of `SL_2` from the Lefschetz number of complex
/// conjugation. The sharpened formula lives outside this code base and has not been
/// transcribed, so no bound is reported.
pub fn rohlfs_lower_bound(_d: Discriminant) -> Option<i64> {
    None
}

/// Statistics derived from one homology computation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthStats {
    /// `log |H1_tors| / |D|^e` with `e = 2` for `GL_2` and `3/2` for `SL_2`.
    pub logtor: f64,
    /// Number of cyclic factors, free and finite, of `H1`.
    pub z_d: usize,
    /// `cusp_dim - bound` for `SL_2` when the bound is available.
    pub rohlfs_gap: Option<i64>,
}

/// Natural logarithm of a positive big integer.
pub fn ln_bigint(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits < 1000 {
        return x.to_f64().expect("finite below 2^1000").ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().expect("64-bit prefix");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

pub fn torsion_order(factors: &[BigInt]) -> BigInt {
    factors.iter().product()
}

pub fn generator_rank(hres: &HomologyResult) -> usize {
    hres.betti[0] + hres.torsion[0].len()
}

pub fn logtor_statistic(hres: &HomologyResult, flavor: Flavor, d: Discriminant) -> f64 {
    let order = torsion_order(&hres.torsion[0]);
    if order.is_one() {
        return 0.0;
    }
    let e = match flavor {
        Flavor::Gl2 => 2.0,
        Flavor::Sl2 => 1.5,
    };
    ln_bigint(&order) / (d.abs() as f64).powf(e)
}

pub fn growth_stats(hres: &HomologyResult, split: &CohomologySplit, flavor: Flavor, d: Discriminant) -> GrowthStats {
    let rohlfs_gap = match flavor {
        Flavor::Sl2 => rohlfs_lower_bound(d).map(|b| split.cusp_dim as i64 - b),
        Flavor::Gl2 => None,
    };
    GrowthStats { logtor: logtor_statistic(hres, flavor, d), z_d: generator_rank(hres), rohlfs_gap }
}

/// Whether the order of the torsion, with all factors 2 and 3 removed, is a perfect square.
pub fn prime_to_six_part_is_square(factors: &[BigInt]) -> bool {
    let mut n = torsion_order(factors);
    for p in [2u32, 3] {
        let p = BigInt::from(p);
        while !n.is_zero() && (&n % &p).is_zero() {
            n /= &p;
        }
    }
    let r = n.sqrt();
    &r * &r == n
}

/// Groups equal factors for exponent notation: `[2, 2, 6] -> [(2, 2), (6, 1)]`.
pub fn run_lengths<T: Clone + PartialEq>(factors: &[T]) -> Vec<(T, usize)> {
    let mut out: Vec<(T, usize)> = Vec::new();
    for f in factors {
        match out.last_mut() {
            Some((g, n)) if g == f => *n += 1,
            _ => out.push((f.clone(), 1)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qfield::fundamental_discriminants;

    fn disc(d: i64) -> Discriminant {
        Discriminant::new(d).unwrap()
    }

    fn kronecker(d: i64, n: i64) -> i64 {
        // (d/n) for n > 0
        let mut result = 1;
        let mut n = n;
        let mut a = d;
        while n % 2 == 0 {
            n /= 2;
            match a.rem_euclid(8) {
                1 | 7 => {}
                3 | 5 => result = -result,
                _ => return 0,
            }
        }
        // Jacobi symbol (a/n) for odd n
        a = a.rem_euclid(n);
        while a != 0 {
            while a % 2 == 0 {
                a /= 2;
                if matches!(n % 8, 3 | 5) {
                    result = -result;
                }
            }
            std::mem::swap(&mut a, &mut n);
            if a % 4 == 3 && n % 4 == 3 {
                result = -result;
            }
            a %= n;
        }
        if n == 1 {
            result
        } else {
            0
        }
    }

    /// Class number formula `h = -(w / 2|D|) * sum_{n < |D|} (D/n) n`.
    fn analytic_class_number(d: i64) -> i64 {
        let w = match d {
            -3 => 6,
            -4 => 4,
            _ => 2,
        };
        let s: i64 = (1..-d).map(|n| kronecker(d, n) * n).sum();
        -w * s / (-2 * d)
    }

    #[test]
    fn reduction_preserves_discriminant() {
        let f = QuadForm { a: 7, b: 23, c: 20 };
        let r = f.reduce();
        assert_eq!(r.discriminant(), f.discriminant());
        assert!(r.b.abs() <= r.a && r.a <= r.c);
    }

    #[test]
    fn class_number_matches_analytic_formula() {
        for d in fundamental_discriminants(-3, -800) {
            assert_eq!(class_group(d).h as i64, analytic_class_number(d.value()), "D = {d}");
        }
    }

    #[test]
    fn small_class_groups() {
        assert_eq!(class_group(disc(-3)).elementary_divisors, Vec::<u64>::new());
        assert_eq!(class_group(disc(-47)).elementary_divisors, vec![5]);
        assert_eq!(class_group(disc(-260)).elementary_divisors, vec![2, 4]);
        assert_eq!(class_group(disc(-84)).elementary_divisors, vec![2, 2]);
        assert_eq!(class_group(disc(-1007)).elementary_divisors, vec![30]);
    }

    #[test]
    fn composition_is_a_group_law() {
        for d in [-56, -260, -399, -1007] {
            let forms = reduced_forms(d);
            let id = principal_form(d);
            for &f in &forms {
                assert_eq!(f.compose(id), f);
                let inv = QuadForm { a: f.a, b: -f.b, c: f.c }.reduce();
                assert_eq!(f.compose(inv), id);
                for &g in forms.iter().take(6) {
                    assert_eq!(f.compose(g), g.compose(f));
                    assert!(forms.contains(&f.compose(g)));
                }
            }
        }
    }

    #[test]
    fn totient() {
        assert_eq!(euler_phi(1), 1);
        assert_eq!(euler_phi(12), 4);
        assert_eq!(euler_phi(97), 96);
    }

    fn hres(betti: [usize; 3], t1: &[u64]) -> HomologyResult {
        HomologyResult { betti, torsion: [t1.iter().map(|&x| BigInt::from(x)).collect(), Vec::new(), Vec::new()] }
    }

    #[test]
    fn cusp_dimensions_of_worked_examples() {
        let mut t = vec![2u64; 24];
        t.extend([534, 1602]);
        let h = hres([31, 2, 1], &t);
        let d = disc(-1007);
        let s = cusp_dimension(&h, &class_group(d), Flavor::Gl2, d).unwrap();
        assert_eq!(s.cusp_dim, 2);
        assert_eq!(generator_rank(&h), 57);
        let d = disc(-35);
        let s = cusp_dimension(&hres([2, 3, 1], &[]), &class_group(d), Flavor::Sl2, d).unwrap();
        assert_eq!(s.cusp_dim, 1);
        assert!(cusp_dimension(&hres([2, 2, 1], &[]), &class_group(d), Flavor::Sl2, d).is_err());
    }

    #[test]
    fn growth_statistics() {
        let d = disc(-40);
        let h = hres([1, 0, 1], &[2]);
        let s = cusp_dimension(&h, &class_group(d), Flavor::Gl2, d).unwrap();
        let g = growth_stats(&h, &s, Flavor::Gl2, d);
        assert_eq!(g.z_d, 2);
        assert!((g.logtor - 2f64.ln() / 1600.0).abs() < 1e-15);
        assert_eq!(logtor_statistic(&hres([0, 0, 1], &[]), Flavor::Sl2, d), 0.0);
        let big: BigInt = BigInt::from(3u32).pow(2000);
        assert!((ln_bigint(&big) - 2000.0 * 3f64.ln()).abs() < 1e-9 * 2000.0);
    }

    #[test]
    fn square_part_check() {
        assert!(prime_to_six_part_is_square(&[BigInt::from(2), BigInt::from(6)]));
        assert!(prime_to_six_part_is_square(&[BigInt::from(26), BigInt::from(26)]));
        assert!(!prime_to_six_part_is_square(&[BigInt::from(5)]));
    }
}
