//! Voronoi's algorithm for binary Hermitian forms: perfection, facets of perfect cones,
//! neighbours across facets and the classification of perfect forms up to the group.
//!
//! Equivalence of cones is decided on rank-one data. A group element is determined by the
//! images of two vectors `v1, v2` that are linearly independent over the field, and those
//! images must be vectors whose rank-one points are rays of the target cone. Enumerating the
//! finitely many candidates is exact and complete.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::cone::{self, IVec};
use crate::error::{Error, Result};
use crate::hermitian::{self, rank_one, rat, ConePoint, HermitianForm, MinimalVectorSet, Rational};
use crate::qfield::{act, Flavor, GroupElement, ModuleVector, OrderContext, OrderElement};

/// Iteration cap for the neighbour and perfection walks.
const WALK_CAP: usize = 400;

/// Distinct rank-one points together with every vector of `O_D^2` that realises each one.
///
/// For a non-principal order two vectors that are not unit multiples of each other can have
/// the same rank-one point, so a point may carry more than `|units|` vectors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RaySet {
    pub rays: Vec<ConePoint>,
    pub fibers: Vec<Vec<ModuleVector>>,
}

impl RaySet {
    /// Groups unit-orbit representatives by rank-one point and expands each by the units.
    pub fn from_vectors(ctx: &OrderContext, reps: &[ModuleVector]) -> Self {
        let mut grouped: BTreeMap<ConePoint, Vec<ModuleVector>> = BTreeMap::new();
        for v in reps {
            let entry = grouped.entry(rank_one(ctx, v)).or_default();
            for &u in ctx.units() {
                entry.push(ctx.scale_vector(u, v));
            }
        }
        let mut rays = Vec::with_capacity(grouped.len());
        let mut fibers = Vec::with_capacity(grouped.len());
        for (p, mut vs) in grouped {
            vs.sort();
            vs.dedup();
            rays.push(p);
            fibers.push(vs);
        }
        RaySet { rays, fibers }
    }

    /// The subset given by sorted ray indices.
    pub fn subset(&self, idx: &[usize]) -> RaySet {
        RaySet {
            rays: idx.iter().map(|&i| self.rays[i]).collect(),
            fibers: idx.iter().map(|&i| self.fibers[i].clone()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }

    pub fn vectors(&self) -> Vec<IVec> {
        self.rays.iter().map(ConePoint::as_i128).collect()
    }

    pub fn rank(&self) -> usize {
        cone::rank(&self.vectors())
    }

    /// Invariant used to screen equivalence candidates: the ray count and the sorted norms
    /// of the pairwise determinants.
    pub fn key(&self, ctx: &OrderContext) -> (usize, Vec<i64>) {
        let n = self.len();
        let mut norms = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
        for i in 0..n {
            for j in i + 1..n {
                norms.push(ctx.norm(ctx.det2(&self.fibers[i][0], &self.fibers[j][0])));
            }
        }
        norms.sort_unstable();
        (n, norms)
    }

    /// The image `g . p` of ray `i` as a cone point.
    pub fn image(&self, ctx: &OrderContext, g: &GroupElement, i: usize) -> ConePoint {
        rank_one(ctx, &act(ctx, g, &self.fibers[i][0]))
    }
}

/// All `g` in the group with `g . src = dst` as sets of rays. With `all == false` the search
/// stops at the first hit. Central elements are not factored out.
pub fn find_transforms(
    ctx: &OrderContext,
    src: &RaySet,
    dst: &RaySet,
    flavor: Flavor,
    all: bool,
) -> Vec<GroupElement> {
    let n = src.len();
    if n != dst.len() || n < 2 {
        return Vec::new();
    }
    let v1 = src.fibers[0][0];
    let (j2, v2, delta) = (1..n)
        .map(|j| (j, src.fibers[j][0], ctx.det2(&v1, &src.fibers[j][0])))
        .find(|(_, _, d)| !d.is_zero())
        .expect("distinct rays come from independent vectors");
    let nd = ctx.norm(delta);
    let targets: HashMap<ConePoint, usize> = dst.rays.iter().enumerate().map(|(i, p)| (*p, i)).collect();
    // adj[v1 | v2]
    let adj = [[v2.y, -v2.x], [-v1.y, v1.x]];
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for z1 in &dst.fibers[i] {
                for z2 in &dst.fibers[j] {
                    let dz = ctx.det2(z1, z2);
                    if ctx.norm(dz) != nd || (flavor == Flavor::Sl2 && dz != delta) {
                        continue;
                    }
                    let cols = [[z1.x, z2.x], [z1.y, z2.y]];
                    let mut m = [[OrderElement::ZERO; 2]; 2];
                    let mut ok = true;
                    'fill: for r in 0..2 {
                        for c in 0..2 {
                            let e = ctx.mul(cols[r][0], adj[0][c]) + ctx.mul(cols[r][1], adj[1][c]);
                            match ctx.div_exact(e, delta) {
                                Some(q) => m[r][c] = q,
                                None => {
                                    ok = false;
                                    break 'fill;
                                }
                            }
                        }
                    }
                    if !ok {
                        continue;
                    }
                    let g = GroupElement::new(ctx, m);
                    if !g.is_in(ctx, flavor) {
                        continue;
                    }
                    let maps_all = (0..n).all(|k| k == 0 || k == j2 || targets.contains_key(&src.image(ctx, &g, k)));
                    if maps_all {
                        out.push(g);
                        if !all {
                            return out;
                        }
                    }
                }
            }
        }
    }
    out
}

/// A perfect form with minimum 1, its minimal vectors and the rays of its Voronoi cone.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PerfectForm {
    pub form: HermitianForm,
    pub minvecs: MinimalVectorSet,
    pub cone: RaySet,
}

impl PerfectForm {
    /// Normalises `phi` to minimum 1 and collects its minimal vectors. Fails unless the
    /// rank-one points of the minimal vectors span the whole space.
    pub fn from_form(ctx: &OrderContext, phi: &HermitianForm) -> Result<Self> {
        let (form, minvecs) = normalised(ctx, phi)?;
        let cone = RaySet::from_vectors(ctx, &minvecs.vectors);
        if cone.rank() != 4 {
            return Err(Error::Guard(format!("form {form} is not perfect")));
        }
        Ok(PerfectForm { form, minvecs, cone })
    }

    pub fn key(&self, ctx: &OrderContext) -> (usize, Vec<i64>) {
        self.cone.key(ctx)
    }
}

fn normalised(ctx: &OrderContext, phi: &HermitianForm) -> Result<(HermitianForm, MinimalVectorSet)> {
    let mv = hermitian::minimal_vectors(ctx, phi)?;
    if mv.min_value.is_one() {
        return Ok((phi.clone(), mv));
    }
    let s = mv.min_value.recip();
    Ok((phi.scale(&s), MinimalVectorSet { min_value: rat(1), vectors: mv.vectors }))
}

/// Walks from `base` (minimum 1) along `dir`, which vanishes on the rays to keep, to the
/// first form where a minimal vector outside those rays appears. `dir` must not be
/// positive semidefinite.
fn walk(ctx: &OrderContext, base: &HermitianForm, dir: &HermitianForm) -> Result<(HermitianForm, MinimalVectorSet)> {
    let one = rat(1);
    let mut u = rat(1);
    // Steps in (0, lo] keep the old minimal vectors only; steps >= hi leave the cone.
    let mut lo = Rational::zero();
    let mut hi: Option<Rational> = None;
    let mut steps = 0;
    // Phase 1: bracket a step where the minimum drops to or below 1 with a new vector.
    loop {
        steps += 1;
        if steps > WALK_CAP {
            return Err(Error::Guard(format!("neighbour walk from {base} along {dir} did not terminate")));
        }
        let q = base.add_scaled(dir, &u);
        if !q.is_positive_definite() {
            hi = Some(u.clone());
            u = (&lo + &u) / rat(2);
            continue;
        }
        let mv = hermitian::minimal_vectors(ctx, &q)?;
        if mv.min_value == one {
            let fresh = mv.vectors.iter().any(|v| !dir.evaluate(ctx, v).is_zero());
            if fresh {
                return Ok((q, mv));
            }
            lo = u.clone();
            u = match &hi {
                Some(h) => (&lo + h) / rat(2),
                None => &u * rat(2),
            };
            continue;
        }
        if mv.min_value < one {
            break;
        }
        return Err(Error::Guard("minimum rose above 1 along a facet direction".into()));
    }
    // Phase 2: shrink the step to the exact crossing point.
    loop {
        steps += 1;
        if steps > WALK_CAP {
            return Err(Error::Guard(format!("neighbour walk from {base} along {dir} did not terminate")));
        }
        let q = base.add_scaled(dir, &u);
        let below = hermitian::vectors_below(ctx, &q, &one)?;
        if below.is_empty() {
            let mv = hermitian::minimal_vectors(ctx, &q)?;
            return Ok((q, mv));
        }
        let below: Vec<ModuleVector> = below.into_iter().map(|(v, _)| v).collect();
        let next = hermitian::first_crossing(ctx, base, dir, &below, &one).unwrap_or_else(|| u.clone());
        if next >= u {
            return Err(Error::Guard("neighbour walk failed to make progress".into()));
        }
        u = next;
    }
}

/// Adds standard basis vectors to `rays` until the span has dimension 3, then returns the
/// normal of that hyperplane. Requires `rank(rays) <= 3`.
fn annihilating_direction(rays: &[IVec]) -> IVec {
    let mut basis: Vec<IVec> = cone::greedy_basis(rays).into_iter().map(|i| rays[i]).collect();
    for k in 0..4 {
        if basis.len() == 3 {
            break;
        }
        let mut e = [0i128; 4];
        e[k] = 1;
        basis.push(e);
        if cone::rank(&basis) < basis.len() {
            basis.pop();
        }
    }
    cone::normal3(&basis[0], &basis[1], &basis[2])
}

/// Moves a positive definite form to a perfect one by repeatedly enlarging its set of
/// minimal vectors.
pub fn make_perfect(ctx: &OrderContext, phi: &HermitianForm) -> Result<PerfectForm> {
    if !phi.is_positive_definite() {
        return Err(Error::NotPositiveDefinite);
    }
    let (mut form, mut mv) = normalised(ctx, phi)?;
    for _ in 0..8 {
        let cone = RaySet::from_vectors(ctx, &mv.vectors);
        let vecs = cone.vectors();
        if cone::rank(&vecs) == 4 {
            return Ok(PerfectForm { form, minvecs: mv, cone });
        }
        let mut dir = HermitianForm::from_integer_coords(ctx.d(), annihilating_direction(&vecs));
        if dir.is_positive_semidefinite() {
            dir = dir.scale(&rat(-1));
        }
        let (f, m) = walk(ctx, &form, &dir)?;
        form = f;
        mv = m;
    }
    Err(Error::Guard("perfection walk did not reach rank 4".into()))
}

pub fn facets(p: &PerfectForm) -> Vec<cone::Facet> {
    cone::facets(&p.cone.vectors())
}

/// The perfect form on the other side of facet `f` of `p`.
pub fn neighbor(ctx: &OrderContext, p: &PerfectForm, f: &cone::Facet) -> Result<PerfectForm> {
    let dir = HermitianForm::from_integer_coords(ctx.d(), f.normal);
    if dir.is_positive_semidefinite() {
        return Err(Error::Guard(format!("facet normal {dir} of {} is semidefinite", p.form)));
    }
    let (form, minvecs) = walk(ctx, &p.form, &dir)?;
    let cone = RaySet::from_vectors(ctx, &minvecs.vectors);
    if cone.rank() != 4 {
        return Err(Error::Guard(format!("neighbour {form} is not perfect")));
    }
    Ok(PerfectForm { form, minvecs, cone })
}

/// Some `g` in the group with `p2 = p1 o g`, i.e. `p2(v) = p1(g v)`.
pub fn equivalent(ctx: &OrderContext, p1: &PerfectForm, p2: &PerfectForm, flavor: Flavor) -> Option<GroupElement> {
    if p1.cone.len() != p2.cone.len() || p1.form.det() != p2.form.det() {
        return None;
    }
    // p2 = p1 o g exactly when g maps the minimal vectors of p2 onto those of p1.
    find_transforms(ctx, &p2.cone, &p1.cone, flavor, false).into_iter().next()
}

/// An identification of the neighbour across a facet with a graph node:
/// `neighbor(nodes[from], facets[facet]) = nodes[to] o witness`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub facet: usize,
    pub to: usize,
    pub witness: GroupElement,
}

/// Orbit representatives of perfect forms and the facet identifications between them.
#[derive(Clone, Debug)]
pub struct VoronoiGraph {
    pub disc: i64,
    pub flavor: Flavor,
    pub nodes: Vec<PerfectForm>,
    pub edges: Vec<Edge>,
}

impl VoronoiGraph {
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        if seen.is_empty() {
            return true;
        }
        seen[0] = true;
        let mut changed = true;
        while changed {
            changed = false;
            for e in &self.edges {
                if seen[e.from] != seen[e.to] {
                    seen[e.from] = true;
                    seen[e.to] = true;
                    changed = true;
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Breadth-first closure of the neighbour relation starting from the perfection of the
/// identity form. Neighbours of one node are computed in parallel and registered serially
/// in facet order, so the result does not depend on the thread count.
pub fn enumerate_perfect_forms(ctx: &OrderContext, flavor: Flavor) -> Result<VoronoiGraph> {
    let start = make_perfect(ctx, &HermitianForm::identity(ctx))?;
    let mut nodes = vec![start];
    let mut keys = vec![nodes[0].key(ctx)];
    let mut edges = Vec::new();
    let mut i = 0;
    while i < nodes.len() {
        let fs = facets(&nodes[i]);
        let current = nodes[i].clone();
        let found: Vec<Result<(PerfectForm, (usize, Vec<i64>))>> = fs
            .par_iter()
            .map(|f| {
                let n = neighbor(ctx, &current, f)?;
                let k = n.key(ctx);
                Ok((n, k))
            })
            .collect();
        for (fi, r) in found.into_iter().enumerate() {
            let (n, k) = r?;
            let hit = (0..nodes.len())
                .filter(|&j| keys[j] == k)
                .find_map(|j| equivalent(ctx, &nodes[j], &n, flavor).map(|g| (j, g)));
            let (to, witness) = match hit {
                Some(h) => h,
                None => {
                    nodes.push(n);
                    keys.push(k);
                    (nodes.len() - 1, GroupElement::identity())
                }
            };
            edges.push(Edge { from: i, facet: fi, to, witness });
        }
        i += 1;
    }
    Ok(VoronoiGraph { disc: ctx.d(), flavor, nodes, edges })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qfield::make_order;
    use rand::{Rng, SeedableRng};

    fn random_sl2(ctx: &OrderContext, rng: &mut impl Rng, rounds: usize) -> GroupElement {
        let mut g = GroupElement::identity();
        for _ in 0..rounds {
            let t = OrderElement::new(rng.gen_range(-2..=2), rng.gen_range(-1..=1));
            let up = GroupElement::new(ctx, [[OrderElement::ONE, t], [OrderElement::ZERO, OrderElement::ONE]]);
            let down = GroupElement::new(ctx, [[OrderElement::ONE, OrderElement::ZERO], [t, OrderElement::ONE]]);
            g = g.mul(ctx, &up).mul(ctx, &down);
        }
        g
    }

    #[test]
    fn perfection_from_identity_reaches_rank_four() {
        for d in [-3, -4, -7, -8, -15, -20, -40, -231] {
            let ctx = make_order(d).unwrap();
            let p = make_perfect(&ctx, &HermitianForm::identity(&ctx)).unwrap();
            assert_eq!(p.minvecs.min_value, rat(1));
            assert_eq!(p.cone.rank(), 4, "D = {d}");
            for r in &p.cone.rays {
                assert_eq!(p.form.pair(r), rat(1));
            }
        }
    }

    #[test]
    fn perfect_input_is_a_fixed_point() {
        let ctx = make_order(-7).unwrap();
        let p = make_perfect(&ctx, &HermitianForm::identity(&ctx)).unwrap();
        let q = make_perfect(&ctx, &p.form.scale(&rat(3))).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn form_is_determined_by_its_rays() {
        // Solve <phi, q(v)> = 1 on four independent rays with exact rationals.
        let ctx = make_order(-15).unwrap();
        let p = make_perfect(&ctx, &HermitianForm::identity(&ctx)).unwrap();
        let vecs = p.cone.vectors();
        let basis = cone::greedy_basis(&vecs);
        let mut m: Vec<Vec<Rational>> = basis
            .iter()
            .map(|&i| {
                let mut row: Vec<Rational> = vecs[i].iter().map(|&x| rat(x as i64)).collect();
                row.push(rat(1));
                row
            })
            .collect();
        for c in 0..4 {
            let p = (c..4).find(|&r| !m[r][c].is_zero()).unwrap();
            m.swap(c, p);
            let piv = m[c][c].clone();
            for k in 0..5 {
                m[c][k] = &m[c][k] / &piv;
            }
            for r in 0..4 {
                if r != c {
                    let f = m[r][c].clone();
                    for k in 0..5 {
                        let t = &f * &m[c][k];
                        m[r][k] -= t;
                    }
                }
            }
        }
        let sol: Vec<Rational> = (0..4).map(|r| m[r][4].clone()).collect();
        assert_eq!(sol, p.form.coords().to_vec());
    }

    #[test]
    fn neighbours_share_the_facet_and_flip_back() {
        for d in [-4, -7, -20] {
            let ctx = make_order(d).unwrap();
            let p = make_perfect(&ctx, &HermitianForm::identity(&ctx)).unwrap();
            for f in facets(&p) {
                let n = neighbor(&ctx, &p, &f).unwrap();
                for &j in &f.rays {
                    assert!(n.cone.rays.contains(&p.cone.rays[j]));
                }
                // The facet of n through the same rays leads back to p.
                let shared: Vec<ConePoint> = f.rays.iter().map(|&j| p.cone.rays[j]).collect();
                let back = facets(&n)
                    .into_iter()
                    .find(|g| g.rays.iter().map(|&j| n.cone.rays[j]).collect::<Vec<_>>() == shared)
                    .expect("facet is shared");
                let pp = neighbor(&ctx, &n, &back).unwrap();
                assert_eq!(pp.form, p.form);
            }
        }
    }

    #[test]
    fn equivalence_finds_random_translates() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for d in [-3, -4, -7, -15, -20] {
            let ctx = make_order(d).unwrap();
            let p = make_perfect(&ctx, &HermitianForm::identity(&ctx)).unwrap();
            assert!(equivalent(&ctx, &p, &p, Flavor::Sl2).is_some());
            for _ in 0..5 {
                let g = random_sl2(&ctx, &mut rng, 2);
                let q = PerfectForm::from_form(&ctx, &p.form.compose(&ctx, &g)).unwrap();
                let w = equivalent(&ctx, &p, &q, Flavor::Sl2).expect("translate is equivalent");
                assert_eq!(p.form.compose(&ctx, &w), q.form);
                for v in &q.minvecs.vectors {
                    assert_eq!(q.form.evaluate(&ctx, v), p.form.evaluate(&ctx, &act(&ctx, &w, v)));
                }
            }
        }
    }

    #[test]
    fn equivalence_is_symmetric_and_transitive() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let ctx = make_order(-23).unwrap();
        let p = make_perfect(&ctx, &HermitianForm::identity(&ctx)).unwrap();
        for _ in 0..5 {
            let g = random_sl2(&ctx, &mut rng, 1);
            let h = random_sl2(&ctx, &mut rng, 1);
            let q = PerfectForm::from_form(&ctx, &p.form.compose(&ctx, &g)).unwrap();
            let r = PerfectForm::from_form(&ctx, &q.form.compose(&ctx, &h)).unwrap();
            let a = equivalent(&ctx, &p, &q, Flavor::Gl2).unwrap();
            let b = equivalent(&ctx, &q, &r, Flavor::Gl2).unwrap();
            let back = equivalent(&ctx, &q, &p, Flavor::Gl2).unwrap();
            assert_eq!(q.form.compose(&ctx, &back), p.form);
            // r = q o b = p o a o b
            assert_eq!(p.form.compose(&ctx, &a.mul(&ctx, &b)), r.form);
            assert!(equivalent(&ctx, &p, &r, Flavor::Gl2).is_some());
        }
    }

    #[test]
    fn stabiliser_contains_the_centre() {
        for d in [-3, -4, -7] {
            let ctx = make_order(d).unwrap();
            let p = make_perfect(&ctx, &HermitianForm::identity(&ctx)).unwrap();
            let stab = find_transforms(&ctx, &p.cone, &p.cone, Flavor::Gl2, true);
            for &u in ctx.units() {
                assert!(stab.contains(&GroupElement::scalar(&ctx, u)));
            }
            for g in &stab {
                assert_eq!(p.form.compose(&ctx, g), p.form);
            }
        }
    }

    #[test]
    fn enumeration_closes_for_small_discriminants() {
        for d in [-3, -4, -7, -8, -11, -15, -20, -24] {
            let ctx = make_order(d).unwrap();
            let gl = enumerate_perfect_forms(&ctx, Flavor::Gl2).unwrap();
            let sl = enumerate_perfect_forms(&ctx, Flavor::Sl2).unwrap();
            assert!(gl.nodes.len() <= sl.nodes.len(), "D = {d}");
            for graph in [&gl, &sl] {
                assert!(graph.is_connected());
                let total: usize = graph.nodes.iter().map(|p| facets(p).len()).sum();
                assert_eq!(graph.edges.len(), total);
                for e in &graph.edges {
                    let f = &facets(&graph.nodes[e.from])[e.facet];
                    let n = neighbor(&ctx, &graph.nodes[e.from], f).unwrap();
                    assert_eq!(graph.nodes[e.to].form.compose(&ctx, &e.witness), n.form);
                }
                for a in 0..graph.nodes.len() {
                    for b in a + 1..graph.nodes.len() {
                        assert!(equivalent(&ctx, &graph.nodes[a], &graph.nodes[b], graph.flavor).is_none());
                    }
                }
            }
            if d == -3 {
                assert_eq!(gl.nodes.len(), 1);
            }
        }
    }
}
