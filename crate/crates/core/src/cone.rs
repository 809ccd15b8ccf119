//! Exact integer polyhedral geometry for pointed cones in `Q^4`: ranks, facet
//! enumeration by double description, face lattices and orientation signs.
//!
//! Coordinates stay small for the cones that occur here (rank-one points of minimal
//! vectors), so everything runs in `i128` with checked arithmetic.

use std::collections::BTreeSet;

use num_integer::Integer;

pub type IVec = [i128; 4];

pub fn dot(a: &IVec, b: &IVec) -> i128 {
    a.iter().zip(b).fold(0i128, |s, (x, y)| s.checked_add(x.checked_mul(*y).expect("dot overflow")).expect("dot overflow"))
}

/// Divide out the content, so the vector is primitive. Zero stays zero.
pub fn primitive(v: IVec) -> IVec {
    let g = v.iter().fold(0i128, |g, &x| g.gcd(&x));
    if g == 0 {
        v
    } else {
        v.map(|x| x / g)
    }
}

/// Rank over `Q` of a set of integer vectors.
pub fn rank(vecs: &[IVec]) -> usize {
    let mut rows: Vec<IVec> = vecs.iter().copied().filter(|v| v.iter().any(|&x| x != 0)).collect();
    let mut r = 0;
    for col in 0..4 {
        let Some(p) = (r..rows.len()).find(|&i| rows[i][col] != 0) else {
            continue;
        };
        rows.swap(r, p);
        let pivot = rows[r];
        for i in r + 1..rows.len() {
            let a = rows[i][col];
            if a == 0 {
                continue;
            }
            let g = pivot[col].gcd(&a);
            let (m1, m2) = (pivot[col] / g, a / g);
            let mut row = [0i128; 4];
            for k in 0..4 {
                row[k] = rows[i][k]
                    .checked_mul(m1)
                    .and_then(|x| x.checked_sub(pivot[k].checked_mul(m2)?))
                    .expect("rank overflow");
            }
            rows[i] = primitive(row);
        }
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    r
}

/// Indices of a maximal linearly independent subset, chosen greedily in order.
pub fn greedy_basis(vecs: &[IVec]) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    let mut span: Vec<IVec> = Vec::new();
    for (i, v) in vecs.iter().enumerate() {
        span.push(*v);
        if rank(&span) == span.len() {
            chosen.push(i);
            if chosen.len() == 4 {
                break;
            }
        } else {
            span.pop();
        }
    }
    chosen
}

pub fn det(m: &[Vec<i128>]) -> i128 {
    let n = m.len();
    match n {
        0 => 1,
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => {
            // Bareiss fraction-free elimination.
            let mut a: Vec<Vec<i128>> = m.to_vec();
            let mut sign = 1i128;
            let mut prev = 1i128;
            for k in 0..n - 1 {
                if a[k][k] == 0 {
                    let Some(p) = (k + 1..n).find(|&i| a[i][k] != 0) else {
                        return 0;
                    };
                    a.swap(k, p);
                    sign = -sign;
                }
                for i in k + 1..n {
                    for j in k + 1..n {
                        let t = a[i][j]
                            .checked_mul(a[k][k])
                            .and_then(|x| x.checked_sub(a[i][k].checked_mul(a[k][j])?))
                            .expect("determinant overflow");
                        a[i][j] = t / prev;
                    }
                }
                prev = a[k][k];
            }
            sign * a[n - 1][n - 1]
        }
    }
}

/// Primitive normal of the hyperplane spanned by three independent vectors.
pub fn normal3(a: &IVec, b: &IVec, c: &IVec) -> IVec {
    let minor = |skip: usize| {
        let cols: Vec<usize> = (0..4).filter(|&k| k != skip).collect();
        let m: Vec<Vec<i128>> = [a, b, c].iter().map(|v| cols.iter().map(|&k| v[k]).collect()).collect();
        det(&m)
    };
    primitive([minor(0), -minor(1), minor(2), -minor(3)])
}

/// A facet of a full-dimensional pointed cone: an inward primitive normal (nonnegative on
/// the cone) and the sorted indices of the generators it contains.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Facet {
    pub normal: IVec,
    pub rays: Vec<usize>,
}

/// Facets of the cone generated by `rays` (which must span `Q^4`), computed with the
/// double description method. Output is sorted by normal.
pub fn facets(rays: &[IVec]) -> Vec<Facet> {
    let init = greedy_basis(rays);
    assert_eq!(init.len(), 4, "cone is not full-dimensional");
    let mut normals: Vec<IVec> = Vec::with_capacity(16);
    for (k, &i) in init.iter().enumerate() {
        let others: Vec<&IVec> = init.iter().enumerate().filter(|&(l, _)| l != k).map(|(_, &j)| &rays[j]).collect();
        let mut n = normal3(others[0], others[1], others[2]);
        if dot(&n, &rays[i]) < 0 {
            n = n.map(|x| -x);
        }
        normals.push(n);
    }
    let mut processed: Vec<usize> = init.clone();
    for r in 0..rays.len() {
        if init.contains(&r) {
            continue;
        }
        let vals: Vec<i128> = normals.iter().map(|h| dot(h, &rays[r])).collect();
        if vals.iter().all(|&v| v >= 0) {
            processed.push(r);
            continue;
        }
        let zero_sets: Vec<Vec<usize>> = normals
            .iter()
            .map(|h| processed.iter().copied().filter(|&j| dot(h, &rays[j]) == 0).collect())
            .collect();
        let mut next: Vec<IVec> = normals.iter().zip(&vals).filter(|(_, &v)| v >= 0).map(|(h, _)| *h).collect();
        for p in (0..normals.len()).filter(|&i| vals[i] > 0) {
            for n in (0..normals.len()).filter(|&i| vals[i] < 0) {
                let common: Vec<usize> = zero_sets[p].iter().copied().filter(|j| zero_sets[n].contains(j)).collect();
                let vecs: Vec<IVec> = common.iter().map(|&j| rays[j]).collect();
                if rank(&vecs) != 2 {
                    continue;
                }
                let dominated = (0..normals.len())
                    .any(|k| k != p && k != n && common.iter().all(|j| zero_sets[k].contains(j)));
                if dominated {
                    continue;
                }
                let mut h = [0i128; 4];
                for t in 0..4 {
                    h[t] = vals[p]
                        .checked_mul(normals[n][t])
                        .and_then(|x| x.checked_sub(vals[n].checked_mul(normals[p][t])?))
                        .expect("facet normal overflow");
                }
                next.push(primitive(h));
            }
        }
        normals = next;
        processed.push(r);
    }
    let mut out: Vec<Facet> = normals
        .into_iter()
        .map(|h| Facet { normal: h, rays: (0..rays.len()).filter(|&j| dot(&h, &rays[j]) == 0).collect() })
        .collect();
    out.sort();
    out.dedup();
    out
}

/// All faces of a full-dimensional pointed cone in `Q^4`, by dimension. `faces[k]` lists
/// the faces of linear dimension `k` as sorted generator-index sets; `faces[0]` is empty.
#[derive(Clone, Debug, Default)]
pub struct FaceLattice {
    pub faces: [Vec<Vec<usize>>; 5],
}

impl FaceLattice {
    pub fn new(rays: &[IVec], facets: &[Facet]) -> Self {
        let mut lattice = FaceLattice::default();
        lattice.faces[4] = vec![(0..rays.len()).collect()];
        lattice.faces[3] = facets.iter().map(|f| f.rays.clone()).collect::<BTreeSet<_>>().into_iter().collect();
        for k in (1..=2).rev() {
            let mut found: BTreeSet<Vec<usize>> = BTreeSet::new();
            for f in &lattice.faces[k + 1] {
                for h in facets {
                    let s: Vec<usize> = f.iter().copied().filter(|j| h.rays.binary_search(j).is_ok()).collect();
                    if s.len() < k {
                        continue;
                    }
                    let vecs: Vec<IVec> = s.iter().map(|&j| rays[j]).collect();
                    if rank(&vecs) == k {
                        found.insert(s);
                    }
                }
            }
            lattice.faces[k] = found.into_iter().collect();
        }
        lattice
    }

    /// Indices into `faces[k - 1]` of the facets of `faces[k][idx]`.
    pub fn facets_of(&self, k: usize, idx: usize) -> Vec<usize> {
        let f = &self.faces[k][idx];
        self.faces[k - 1]
            .iter()
            .enumerate()
            .filter(|(_, g)| g.iter().all(|j| f.binary_search(j).is_ok()))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Sign of the determinant of `vecs` written in the basis `basis`; both are `k` vectors
/// spanning the same `k`-dimensional subspace.
pub fn orientation_sign(basis: &[IVec], vecs: &[IVec]) -> i32 {
    let k = basis.len();
    assert_eq!(k, vecs.len());
    for cols in combinations4(k) {
        let pick = |vs: &[IVec]| -> Vec<Vec<i128>> { vs.iter().map(|v| cols.iter().map(|&c| v[c]).collect()).collect() };
        let db = det(&pick(basis));
        if db != 0 {
            let dv = det(&pick(vecs));
            return (db.signum() * dv.signum()) as i32;
        }
    }
    panic!("basis is degenerate");
}

fn combinations4(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 0u32..16 {
        if mask.count_ones() as usize == k {
            out.push((0..4).filter(|&i| mask & (1 << i) != 0).collect());
        }
    }
    out
}
