//! The Voronoi complex: orbits of cones of the tessellation, their stabilisers and
//! orientation characters, and the boundary maps between orbit modules.
//!
//! A cell of dimension `n` is a face of a perfect cone of linear dimension `n + 1`. Rays
//! (cusps) are excluded, so the complex lives in degrees 1, 2 and 3. Only orbits whose
//! stabiliser preserves orientation contribute generators.

use std::collections::HashMap;

use num_bigint::BigInt;
use rayon::prelude::*;

use crate::cone::{self, FaceLattice, IVec};
use crate::error::{Error, Result};
use crate::hermitian::ConePoint;
use crate::qfield::{Flavor, GroupElement, OrderContext};
use crate::voronoi::{self, find_transforms, RaySet, VoronoiGraph};
use crate::zhomology::SparseIntMatrix;

/// A face of the tessellation, identified by its sorted rank-one rays.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cell {
    pub dim: usize,
    pub rays: RaySet,
    /// Indices of the cells of dimension `dim - 1` on its boundary (empty for `dim == 1`).
    pub facets: Vec<usize>,
}

impl Cell {
    pub fn vectors(&self) -> Vec<IVec> {
        self.rays.vectors()
    }

    /// Ray indices of the orientation basis: greedy independent selection in ray order.
    pub fn basis(&self) -> Vec<usize> {
        cone::greedy_basis(&self.vectors())
    }
}

/// A group orbit of cells with its chosen representative.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellOrbit {
    pub dim: usize,
    /// Index of the representative in the cell list.
    pub rep: usize,
    pub stabilizer: Vec<GroupElement>,
    pub orientation_preserving: bool,
}

/// Collects all faces of dimension 2, 3 and 4 of the cones of the graph nodes as cells of
/// dimension 1, 2 and 3. Faces shared by several nodes appear once.
pub fn faces_of(graph: &VoronoiGraph) -> Vec<Cell> {
    let mut cells: Vec<Cell> = Vec::new();
    let mut index: HashMap<Vec<ConePoint>, usize> = HashMap::new();
    let lattices: Vec<(FaceLattice, &RaySet)> = graph
        .nodes
        .par_iter()
        .map(|p| (FaceLattice::new(&p.cone.vectors(), &voronoi::facets(p)), &p.cone))
        .collect();
    for (lattice, rays) in &lattices {
        let mut local: [Vec<usize>; 5] = Default::default();
        for k in 2..=4 {
            for (i, face) in lattice.faces[k].iter().enumerate() {
                let sub = rays.subset(face);
                let id = match index.get(&sub.rays) {
                    Some(&id) => id,
                    None => {
                        let facets = if k == 2 {
                            Vec::new()
                        } else {
                            lattice.facets_of(k, i).into_iter().map(|j| local[k - 1][j]).collect()
                        };
                        let id = cells.len();
                        index.insert(sub.rays.clone(), id);
                        cells.push(Cell { dim: k - 1, rays: sub, facets });
                        id
                    }
                };
                local[k].push(id);
            }
        }
    }
    cells
}

/// Sign of `g` on the span of a cell: the orientation of the transported basis relative to
/// the basis of the target cell.
fn transport_sign(ctx: &OrderContext, src: &Cell, g: &GroupElement, dst_basis: &[IVec]) -> i32 {
    let moved: Vec<IVec> = src.basis().iter().map(|&i| src.rays.image(ctx, g, i).as_i128()).collect();
    cone::orientation_sign(dst_basis, &moved)
}

/// Partitions cells into orbits. Returns the orbits, the orbit of every cell and a witness
/// `g` with `g . rep = cell` for every cell.
pub fn classify_orbits(
    ctx: &OrderContext,
    cells: &[Cell],
    flavor: Flavor,
) -> (Vec<CellOrbit>, Vec<usize>, Vec<GroupElement>) {
    let keys: Vec<(usize, (usize, Vec<i64>))> = cells.par_iter().map(|c| (c.dim, c.rays.key(ctx))).collect();
    let mut orbits: Vec<CellOrbit> = Vec::new();
    let mut by_key: HashMap<&(usize, (usize, Vec<i64>)), Vec<usize>> = HashMap::new();
    let mut orbit_of = vec![0; cells.len()];
    let mut witness = vec![GroupElement::identity(); cells.len()];
    for (ci, cell) in cells.iter().enumerate() {
        let candidates = by_key.entry(&keys[ci]).or_default();
        let hit = candidates.iter().find_map(|&o| {
            find_transforms(ctx, &cells[orbits[o].rep].rays, &cell.rays, flavor, false).into_iter().next().map(|g| (o, g))
        });
        match hit {
            Some((o, g)) => {
                orbit_of[ci] = o;
                witness[ci] = g;
            }
            None => {
                let o = orbits.len();
                candidates.push(o);
                orbit_of[ci] = o;
                orbits.push(CellOrbit { dim: cell.dim, rep: ci, stabilizer: Vec::new(), orientation_preserving: true });
            }
        }
    }
    orbits.par_iter_mut().for_each(|orbit| {
        let rep = &cells[orbit.rep];
        orbit.stabilizer = find_transforms(ctx, &rep.rays, &rep.rays, flavor, true);
        let vecs = rep.vectors();
        let basis: Vec<IVec> = rep.basis().iter().map(|&i| vecs[i]).collect();
        orbit.orientation_preserving = orbit.stabilizer.iter().all(|h| transport_sign(ctx, rep, h, &basis) == 1);
    });
    (orbits, orbit_of, witness)
}

/// The Voronoi complex of one group: cells, orbits and boundary matrices `d2`, `d3`.
#[derive(Clone, Debug)]
pub struct VoronoiComplex {
    pub disc: i64,
    pub flavor: Flavor,
    pub cells: Vec<Cell>,
    pub orbits: Vec<CellOrbit>,
    pub orbit_of: Vec<usize>,
    pub witness: Vec<GroupElement>,
    /// Ranks of `V1, V2, V3`.
    pub dims: [usize; 3],
    pub d2: SparseIntMatrix,
    pub d3: SparseIntMatrix,
}

impl VoronoiComplex {
    pub fn build(ctx: &OrderContext, graph: &VoronoiGraph) -> Result<Self> {
        let cells = faces_of(graph);
        let (orbits, orbit_of, witness) = classify_orbits(ctx, &cells, graph.flavor);
        let mut cx = VoronoiComplex {
            disc: graph.disc,
            flavor: graph.flavor,
            cells,
            orbits,
            orbit_of,
            witness,
            dims: [0; 3],
            d2: SparseIntMatrix::zeros(0, 0),
            d3: SparseIntMatrix::zeros(0, 0),
        };
        cx.check_stabilizers()?;
        cx.assemble(ctx);
        Ok(cx)
    }

    /// Stabiliser orders may only involve the primes 2 and 3.
    fn check_stabilizers(&self) -> Result<()> {
        for o in &self.orbits {
            let mut n = o.stabilizer.len();
            if n == 0 {
                return Err(Error::Guard("empty stabiliser".into()));
            }
            for p in [2, 3] {
                while n % p == 0 {
                    n /= p;
                }
            }
            if n != 1 {
                return Err(Error::Guard(format!("stabiliser of order {} found", o.stabilizer.len())));
            }
        }
        Ok(())
    }

    /// Column/row index of every orientable orbit within its degree.
    pub fn orbit_indices(&self) -> Vec<Option<usize>> {
        let mut counters = [0usize; 4];
        self.orbits
            .iter()
            .map(|o| {
                o.orientation_preserving.then(|| {
                    counters[o.dim] += 1;
                    counters[o.dim] - 1
                })
            })
            .collect()
    }

    /// Incidence of facet cell `f` in cell `c`, with the orientation of `f` transported from
    /// the representative of its orbit through `g` (`g . rep = f`). Outward normal first.
    pub fn incidence(&self, ctx: &OrderContext, c: usize, f: usize, g: &GroupElement) -> i32 {
        let cell = &self.cells[c];
        let face = &self.cells[f];
        let rep = &self.cells[self.orbits[self.orbit_of[f]].rep];
        let vecs = cell.vectors();
        let basis: Vec<IVec> = cell.basis().iter().map(|&i| vecs[i]).collect();
        let outside = cell
            .rays
            .rays
            .iter()
            .find(|r| !face.rays.rays.contains(r))
            .expect("a facet misses some ray of the cell");
        let mut induced: Vec<IVec> = vec![outside.as_i128().map(|x| -x)];
        induced.extend(rep.basis().iter().map(|&i| rep.rays.image(ctx, g, i).as_i128()));
        cone::orientation_sign(&basis, &induced)
    }

    fn assemble(&mut self, ctx: &OrderContext) {
        let idx = self.orbit_indices();
        let mut dims = [0usize; 3];
        for (o, i) in self.orbits.iter().zip(&idx) {
            if i.is_some() {
                dims[o.dim - 1] += 1;
            }
        }
        self.dims = dims;
        let mut mats = Vec::new();
        for n in [2usize, 3] {
            let cols: Vec<(usize, usize)> = self
                .orbits
                .iter()
                .enumerate()
                .filter(|(oi, o)| o.dim == n && idx[*oi].is_some())
                .map(|(oi, o)| (idx[oi].unwrap(), o.rep))
                .collect();
            let triplets: Vec<(usize, usize, i64)> = cols
                .par_iter()
                .flat_map_iter(|&(col, c)| {
                    let mut acc: Vec<(usize, usize, i64)> = Vec::new();
                    for &f in &self.cells[c].facets {
                        let Some(row) = idx[self.orbit_of[f]] else { continue };
                        acc.push((row, col, self.incidence(ctx, c, f, &self.witness[f]) as i64));
                    }
                    acc
                })
                .collect();
            mats.push(SparseIntMatrix::from_triplets(dims[n - 2], dims[n - 1], triplets.into_iter().map(|(r, c, v)| (r, c, BigInt::from(v)))));
        }
        self.d3 = mats.pop().expect("two matrices");
        self.d2 = mats.pop().expect("two matrices");
    }

    /// Number of orbits per degree, orientable or not.
    pub fn orbit_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for o in &self.orbits {
            c[o.dim - 1] += 1;
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qfield::make_order;
    use crate::voronoi::enumerate_perfect_forms;

    fn complex(d: i64, flavor: Flavor) -> (OrderContext, VoronoiComplex) {
        let ctx = make_order(d).unwrap();
        let g = enumerate_perfect_forms(&ctx, flavor).unwrap();
        let cx = VoronoiComplex::build(&ctx, &g).unwrap();
        (ctx, cx)
    }

    #[test]
    fn simplicial_cone_face_counts() {
        // D = -3 has one GL2 class of perfect forms with four minimal rays: a simplex.
        let ctx = make_order(-3).unwrap();
        let g = enumerate_perfect_forms(&ctx, Flavor::Gl2).unwrap();
        assert_eq!(g.nodes[0].cone.len(), 4);
        let cells = faces_of(&g);
        let count = |n: usize| cells.iter().filter(|c| c.dim == n).count();
        assert_eq!((count(3), count(2), count(1)), (1, 4, 6));
        assert!(cells.iter().filter(|c| c.dim == 1).all(|c| c.rays.len() == 2));
    }

    #[test]
    fn faces_are_closed_and_have_the_right_rank() {
        for d in [-4, -7, -20] {
            let ctx = make_order(d).unwrap();
            let g = enumerate_perfect_forms(&ctx, Flavor::Gl2).unwrap();
            let cells = faces_of(&g);
            for c in &cells {
                assert_eq!(c.rays.rank(), c.dim + 1);
                for &f in &c.facets {
                    assert_eq!(cells[f].dim + 1, c.dim);
                    assert!(cells[f].rays.rays.iter().all(|r| c.rays.rays.contains(r)));
                }
                if c.dim > 1 {
                    assert!(c.facets.len() >= c.dim + 1);
                }
            }
        }
    }

    #[test]
    fn boundary_squares_to_zero() {
        for d in [-3, -4, -7, -8, -15, -20, -24, -40] {
            for fl in [Flavor::Gl2, Flavor::Sl2] {
                let (_, cx) = complex(d, fl);
                assert!(cx.d2.mul(&cx.d3).is_zero(), "D = {d} {fl}");
            }
        }
    }

    #[test]
    fn stabilisers_contain_the_centre_and_have_orders_2_3() {
        let (ctx, cx) = complex(-15, Flavor::Gl2);
        for o in &cx.orbits {
            for &u in ctx.units() {
                assert!(o.stabilizer.contains(&GroupElement::scalar(&ctx, u)));
            }
            let mut n = o.stabilizer.len();
            while n % 2 == 0 {
                n /= 2;
            }
            while n % 3 == 0 {
                n /= 3;
            }
            assert_eq!(n, 1);
        }
    }

    #[test]
    fn witness_choice_does_not_change_incidences() {
        for (d, fl) in [(-4, Flavor::Gl2), (-7, Flavor::Sl2), (-15, Flavor::Gl2)] {
            let (ctx, cx) = complex(d, fl);
            for o in cx.orbits.iter().filter(|o| o.dim >= 2) {
                for &f in &cx.cells[o.rep].facets {
                    let fo = &cx.orbits[cx.orbit_of[f]];
                    if !fo.orientation_preserving {
                        continue;
                    }
                    let all = find_transforms(&ctx, &cx.cells[fo.rep].rays, &cx.cells[f].rays, fl, true);
                    assert!(!all.is_empty());
                    let signs: Vec<i32> = all.iter().map(|g| cx.incidence(&ctx, o.rep, f, g)).collect();
                    assert!(signs.iter().all(|&s| s == signs[0]), "D = {d}");
                }
            }
        }
    }

    #[test]
    fn sl2_has_at_least_as_many_orbits() {
        for d in [-7, -8, -20] {
            let (_, gl) = complex(d, Flavor::Gl2);
            let (_, sl) = complex(d, Flavor::Sl2);
            let (a, b) = (gl.orbit_counts(), sl.orbit_counts());
            for i in 0..3 {
                assert!(a[i] <= b[i], "D = {d}");
            }
        }
    }
}
