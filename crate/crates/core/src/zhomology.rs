//! Smith normal form of sparse integer matrices and integral homology of a three-term
//! complex `V3 -> V2 -> V1`.
//!
//! The Smith form runs in three stages. Unit pivots are eliminated sparsely, which removes
//! almost everything in practice. The rank of the remainder is then computed modulo a few
//! word-size primes as a cross-check. Finally the small remaining block is diagonalised
//! with arbitrary-precision integers.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sparse integer matrix in coordinate form. Entries are kept sorted by `(row, col)`,
/// without duplicates or zeros.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseIntMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    #[serde(with = "triplets_serde")]
    pub entries: Vec<(usize, usize, BigInt)>,
}

impl SparseIntMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        SparseIntMatrix { n_rows, n_cols, entries: Vec::new() }
    }

    /// Builds a matrix from triplets, summing duplicates and dropping zeros.
    pub fn from_triplets<I, T>(n_rows: usize, n_cols: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, T)>,
        T: Into<BigInt>,
    {
        let mut acc: BTreeMap<(usize, usize), BigInt> = BTreeMap::new();
        for (r, c, v) in triplets {
            assert!(r < n_rows && c < n_cols, "entry ({r}, {c}) outside {n_rows}x{n_cols}");
            *acc.entry((r, c)).or_default() += v.into();
        }
        let entries = acc.into_iter().filter(|(_, v)| !v.is_zero()).map(|((r, c), v)| (r, c, v)).collect();
        SparseIntMatrix { n_rows, n_cols, entries }
    }

    pub fn from_dense(rows: &[Vec<i64>]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let t = rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().enumerate().map(move |(c, &v)| (r, c, v)));
        SparseIntMatrix::from_triplets(n_rows, n_cols, t)
    }

    pub fn to_dense(&self) -> Vec<Vec<BigInt>> {
        let mut out = vec![vec![BigInt::zero(); self.n_cols]; self.n_rows];
        for (r, c, v) in &self.entries {
            out[*r][*c] = v.clone();
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// `self * other`.
    pub fn mul(&self, other: &SparseIntMatrix) -> SparseIntMatrix {
        assert_eq!(self.n_cols, other.n_rows, "dimension mismatch");
        let mut by_row: Vec<Vec<(usize, &BigInt)>> = vec![Vec::new(); other.n_rows];
        for (r, c, v) in &other.entries {
            by_row[*r].push((*c, v));
        }
        let mut t = Vec::new();
        for (r, k, a) in &self.entries {
            for (c, b) in &by_row[*k] {
                t.push((*r, *c, a * *b));
            }
        }
        SparseIntMatrix::from_triplets(self.n_rows, other.n_cols, t)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Text form: a `rows cols nnz` header followed by one `row col value` line per entry.
    pub fn to_triplet_text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.n_rows, self.n_cols, self.entries.len());
        for (r, c, v) in &self.entries {
            s.push_str(&format!("{r} {c} {v}\n"));
        }
        s
    }

    pub fn from_triplet_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Parse(format!("triplet matrix: {m}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<usize> = lines
            .next()
            .ok_or_else(|| bad("empty input"))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("bad header")))
            .collect::<Result<_>>()?;
        let [n_rows, n_cols, nnz] = header[..] else {
            return Err(bad("header must have three fields"));
        };
        let mut t = Vec::with_capacity(nnz);
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(bad(&format!("bad line `{line}`")));
            }
            let r: usize = f[0].parse().map_err(|_| bad("bad row"))?;
            let c: usize = f[1].parse().map_err(|_| bad("bad column"))?;
            let v: BigInt = f[2].parse().map_err(|_| bad("bad value"))?;
            if r >= n_rows || c >= n_cols {
                return Err(bad("index out of range"));
            }
            t.push((r, c, v));
        }
        if t.len() != nnz {
            return Err(bad("entry count does not match header"));
        }
        Ok(SparseIntMatrix::from_triplets(n_rows, n_cols, t))
    }
}

mod triplets_serde {
    use num_bigint::BigInt;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[(usize, usize, BigInt)], s: S) -> Result<S::Ok, S::Error> {
        let t: Vec<(usize, usize, String)> = v.iter().map(|(r, c, x)| (*r, *c, x.to_string())).collect();
        t.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(usize, usize, BigInt)>, D::Error> {
        let t: Vec<(usize, usize, String)> = Vec::deserialize(d)?;
        t.into_iter()
            .map(|(r, c, x)| x.parse().map(|x| (r, c, x)).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Serde helpers writing big integers as decimal strings.
pub mod bigints_serde {
    use num_bigint::BigInt;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
        let t: Vec<String> = v.iter().map(BigInt::to_string).collect();
        t.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigInt>, D::Error> {
        let t: Vec<String> = Vec::deserialize(d)?;
        t.into_iter().map(|x| x.parse().map_err(serde::de::Error::custom)).collect()
    }
}

/// Rank and invariant factors `d1 | d2 | ... | d_rank` (ones included).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SnfResult {
    pub rank: usize,
    pub invariant_factors: Vec<BigInt>,
}

impl SnfResult {
    /// The invariant factors greater than one.
    pub fn nontrivial(&self) -> Vec<BigInt> {
        self.invariant_factors.iter().filter(|d| !d.is_one()).cloned().collect()
    }
}

/// Sizes recorded while computing a Smith form.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnfStats {
    pub rows: usize,
    pub cols: usize,
    pub nnz: usize,
    pub unit_pivots: usize,
    pub dense_rows: usize,
    pub dense_cols: usize,
}

pub fn snf(m: &SparseIntMatrix) -> SnfResult {
    snf_with_stats(m).0
}

pub fn snf_with_stats(m: &SparseIntMatrix) -> (SnfResult, SnfStats) {
    let mut stats = SnfStats { rows: m.n_rows, cols: m.n_cols, nnz: m.nnz(), ..Default::default() };
    let mut w = Workspace::new(m);
    let units = w.eliminate_unit_pivots();
    stats.unit_pivots = units;
    let block = w.remaining_block();
    stats.dense_rows = block.len();
    stats.dense_cols = block.first().map_or(0, Vec::len);
    let modular = modular_rank(&block);
    let mut factors = dense_snf_diagonal(block);
    debug_assert!(modular <= factors.len());
    if modular != factors.len() {
        log::warn!("modular rank {modular} differs from exact rank {}", factors.len());
    }
    let mut invariant_factors = vec![BigInt::one(); units];
    invariant_factors.append(&mut factors);
    (SnfResult { rank: invariant_factors.len(), invariant_factors }, stats)
}

/// Row-sparse working copy for the unit-pivot stage. Entries are `i64` and every update is
/// checked; an overflow ends the stage and leaves the rest to the big-integer stage.
struct Workspace {
    rows: Vec<BTreeMap<usize, i64>>,
    cols: Vec<BTreeSet<usize>>,
    /// Entries that did not fit in `i64` from the start.
    big: BTreeMap<(usize, usize), BigInt>,
    row_alive: Vec<bool>,
    col_alive: Vec<bool>,
}

impl Workspace {
    fn new(m: &SparseIntMatrix) -> Self {
        let mut rows = vec![BTreeMap::new(); m.n_rows];
        let mut cols = vec![BTreeSet::new(); m.n_cols];
        let mut big = BTreeMap::new();
        for (r, c, v) in &m.entries {
            match v.to_i64() {
                Some(x) => {
                    rows[*r].insert(*c, x);
                    cols[*c].insert(*r);
                }
                None => {
                    big.insert((*r, *c), v.clone());
                }
            }
        }
        Workspace { rows, cols, big, row_alive: vec![true; m.n_rows], col_alive: vec![true; m.n_cols] }
    }

    /// Picks a `+-1` entry minimising the Markowitz cost `(row len - 1)(col len - 1)`.
    fn pick_pivot(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize, usize)> = None;
        for (r, row) in self.rows.iter().enumerate() {
            if !self.row_alive[r] || row.is_empty() {
                continue;
            }
            let rl = row.len() - 1;
            for (&c, &v) in row {
                if v.abs() != 1 || self.big_in_col(c) || self.big_in_row(r) {
                    continue;
                }
                let cost = rl * (self.cols[c].len() - 1);
                if best.map_or(true, |(b, _, _)| cost < b) {
                    best = Some((cost, r, c));
                    if cost == 0 {
                        return Some((r, c));
                    }
                }
            }
        }
        best.map(|(_, r, c)| (r, c))
    }

    fn big_in_col(&self, c: usize) -> bool {
        !self.big.is_empty() && self.big.keys().any(|&(_, cc)| cc == c)
    }

    fn big_in_row(&self, r: usize) -> bool {
        !self.big.is_empty() && self.big.keys().any(|&(rr, _)| rr == r)
    }

    /// Returns the number of unit pivots eliminated.
    fn eliminate_unit_pivots(&mut self) -> usize {
        let mut count = 0;
        while let Some((r, c)) = self.pick_pivot() {
            let p = self.rows[r][&c];
            let pivot_row: Vec<(usize, i64)> = self.rows[r].iter().map(|(&k, &v)| (k, v)).collect();
            let targets: Vec<usize> = self.cols[c].iter().copied().filter(|&i| i != r).collect();
            let mut overflow = false;
            for i in targets {
                let a = self.rows[i][&c];
                // row_i -= (a / p) * row_r, and a / p = a * p for p = +-1
                let f = a * p;
                let mut updated = self.rows[i].clone();
                for &(k, v) in &pivot_row {
                    let Some(delta) = f.checked_mul(v) else {
                        overflow = true;
                        break;
                    };
                    let cur = updated.get(&k).copied().unwrap_or(0);
                    let Some(nv) = cur.checked_sub(delta) else {
                        overflow = true;
                        break;
                    };
                    if nv == 0 {
                        updated.remove(&k);
                    } else {
                        updated.insert(k, nv);
                    }
                }
                if overflow {
                    break;
                }
                for &(k, _) in &pivot_row {
                    if updated.contains_key(&k) {
                        self.cols[k].insert(i);
                    } else {
                        self.cols[k].remove(&i);
                    }
                }
                self.rows[i] = updated;
            }
            if overflow {
                break;
            }
            // Column c is now zero outside row r, so column operations clear row r without
            // touching anything else.
            for &(k, _) in &pivot_row {
                self.cols[k].remove(&r);
            }
            self.rows[r].clear();
            self.row_alive[r] = false;
            self.col_alive[c] = false;
            count += 1;
        }
        count
    }

    /// The rows and columns still carrying entries, as a dense big-integer block.
    fn remaining_block(&self) -> Vec<Vec<BigInt>> {
        let mut used_rows: BTreeSet<usize> = BTreeSet::new();
        let mut used_cols: BTreeSet<usize> = BTreeSet::new();
        for (r, row) in self.rows.iter().enumerate() {
            for &c in row.keys() {
                used_rows.insert(r);
                used_cols.insert(c);
            }
        }
        for &(r, c) in self.big.keys() {
            used_rows.insert(r);
            used_cols.insert(c);
        }
        let col_index: BTreeMap<usize, usize> = used_cols.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut out = Vec::with_capacity(used_rows.len());
        for &r in &used_rows {
            let mut row = vec![BigInt::zero(); used_cols.len()];
            for (&c, &v) in &self.rows[r] {
                row[col_index[&c]] = BigInt::from(v);
            }
            out.push(row);
        }
        let row_index: BTreeMap<usize, usize> = used_rows.iter().enumerate().map(|(i, &r)| (r, i)).collect();
        for ((r, c), v) in &self.big {
            out[row_index[r]][col_index[c]] = v.clone();
        }
        out
    }
}

/// Word-size primes used for the rank cross-check.
const PRIMES: [u64; 3] = [2_147_483_629, 2_147_483_587, 2_147_483_579];

/// Maximum over a few primes of the rank modulo that prime; never exceeds the rank over Q.
pub fn modular_rank(block: &[Vec<BigInt>]) -> usize {
    PRIMES.iter().map(|&p| rank_mod_p(block, p)).max().unwrap_or(0)
}

fn rank_mod_p(block: &[Vec<BigInt>], p: u64) -> usize {
    let pb = BigInt::from(p);
    let mut m: Vec<Vec<u64>> = block
        .iter()
        .map(|row| row.iter().map(|x| x.mod_floor(&pb).to_u64().expect("reduced below p")).collect())
        .collect();
    let n_cols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..n_cols {
        let Some(piv) = (rank..m.len()).find(|&r| m[r][c] != 0) else {
            continue;
        };
        m.swap(rank, piv);
        let inv = pow_mod(m[rank][c], p - 2, p);
        for r in rank + 1..m.len() {
            if m[r][c] == 0 {
                continue;
            }
            let f = (m[r][c] as u128 * inv as u128 % p as u128) as u64;
            for k in c..n_cols {
                let sub = (f as u128 * m[rank][k] as u128 % p as u128) as u64;
                m[r][k] = (m[r][k] + p - sub) % p;
            }
        }
        rank += 1;
    }
    rank
}

fn pow_mod(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1u64;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = (acc as u128 * b as u128 % p as u128) as u64;
        }
        b = (b as u128 * b as u128 % p as u128) as u64;
        e >>= 1;
    }
    acc
}

/// Diagonalises a dense block and returns its nonzero invariant factors in divisibility
/// order.
fn dense_snf_diagonal(mut a: Vec<Vec<BigInt>>) -> Vec<BigInt> {
    let n_rows = a.len();
    let n_cols = a.first().map_or(0, Vec::len);
    let mut diag = Vec::new();
    let mut t = 0;
    while t < n_rows.min(n_cols) {
        // Smallest nonzero entry in the trailing block.
        let mut best: Option<(usize, usize)> = None;
        for i in t..n_rows {
            for j in t..n_cols {
                if a[i][j].is_zero() {
                    continue;
                }
                if best.map_or(true, |(bi, bj)| a[i][j].magnitude() < a[bi][bj].magnitude()) {
                    best = Some((i, j));
                    if a[i][j].magnitude().is_one() {
                        break;
                    }
                }
            }
        }
        let Some((pi, pj)) = best else { break };
        a.swap(t, pi);
        for row in a.iter_mut() {
            row.swap(t, pj);
        }
        loop {
            let mut clean = true;
            // Reduce the column below the pivot.
            for i in t + 1..n_rows {
                if a[i][t].is_zero() {
                    continue;
                }
                let q = a[i][t].div_floor(&a[t][t]);
                if !q.is_zero() {
                    for k in t..n_cols {
                        let s = &q * &a[t][k];
                        a[i][k] -= s;
                    }
                }
                if !a[i][t].is_zero() {
                    clean = false;
                }
            }
            // Reduce the row right of the pivot.
            for j in t + 1..n_cols {
                if a[t][j].is_zero() {
                    continue;
                }
                let q = a[t][j].div_floor(&a[t][t]);
                if !q.is_zero() {
                    for row in a.iter_mut().skip(t) {
                        let s = &q * &row[t];
                        row[j] -= s;
                    }
                }
                if !a[t][j].is_zero() {
                    clean = false;
                }
            }
            if clean {
                break;
            }
            // Move the smallest remaining entry of the pivot row/column onto the pivot.
            let mut bi = (t, t);
            for i in t + 1..n_rows {
                if !a[i][t].is_zero() && a[i][t].magnitude() < a[bi.0][bi.1].magnitude() {
                    bi = (i, t);
                }
            }
            for j in t + 1..n_cols {
                if !a[t][j].is_zero() && a[t][j].magnitude() < a[bi.0][bi.1].magnitude() {
                    bi = (t, j);
                }
            }
            if bi.0 != t {
                a.swap(t, bi.0);
            } else if bi.1 != t {
                for row in a.iter_mut() {
                    row.swap(t, bi.1);
                }
            }
        }
        diag.push(a[t][t].abs());
        t += 1;
    }
    normalise_divisibility(diag)
}

/// Turns a list of nonzero diagonal entries into the invariant-factor chain.
pub fn normalise_divisibility(mut d: Vec<BigInt>) -> Vec<BigInt> {
    for i in 0..d.len() {
        for j in i + 1..d.len() {
            if (&d[j] % &d[i]).is_zero() {
                continue;
            }
            let g = d[i].gcd(&d[j]);
            let l = &d[i] / &g * &d[j];
            d[i] = g;
            d[j] = l;
        }
    }
    d
}

/// Betti numbers and torsion invariant factors (greater than one) in degrees 1, 2, 3.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomologyResult {
    pub betti: [usize; 3],
    #[serde(with = "torsion_serde")]
    pub torsion: [Vec<BigInt>; 3],
}

mod torsion_serde {
    use num_bigint::BigInt;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vec<BigInt>; 3], s: S) -> Result<S::Ok, S::Error> {
        let t: Vec<Vec<String>> = v.iter().map(|x| x.iter().map(BigInt::to_string).collect()).collect();
        t.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[Vec<BigInt>; 3], D::Error> {
        let t: Vec<Vec<String>> = Vec::deserialize(d)?;
        let parsed: Vec<Vec<BigInt>> = t
            .into_iter()
            .map(|x| x.into_iter().map(|s| s.parse().map_err(serde::de::Error::custom)).collect())
            .collect::<Result<_, _>>()?;
        parsed.try_into().map_err(|_| serde::de::Error::custom("expected three degrees"))
    }
}

impl HomologyResult {
    pub fn betti1(&self) -> usize {
        self.betti[0]
    }

    pub fn torsion1(&self) -> &[BigInt] {
        &self.torsion[0]
    }
}

/// Homology of `0 -> V3 -d3-> V2 -d2-> V1 -> 0` with `dims = [dim V1, dim V2, dim V3]`.
pub fn homology(dims: [usize; 3], d2: &SparseIntMatrix, d3: &SparseIntMatrix) -> Result<HomologyResult> {
    homology_with_stats(dims, d2, d3).map(|(h, _)| h)
}

pub fn homology_with_stats(
    dims: [usize; 3],
    d2: &SparseIntMatrix,
    d3: &SparseIntMatrix,
) -> Result<(HomologyResult, [SnfStats; 2])> {
    if d2.n_rows != dims[0] || d2.n_cols != dims[1] || d3.n_rows != dims[1] || d3.n_cols != dims[2] {
        return Err(Error::Inconsistent("boundary matrix shapes do not match the chain groups".into()));
    }
    if !d2.mul(d3).is_zero() {
        return Err(Error::NotAComplex);
    }
    let ((s2, st2), (s3, st3)) = rayon::join(|| snf_with_stats(d2), || snf_with_stats(d3));
    let betti = [dims[0] - s2.rank, dims[1] - s2.rank - s3.rank, dims[2] - s3.rank];
    Ok((HomologyResult { betti, torsion: [s2.nontrivial(), s3.nontrivial(), Vec::new()] }, [st2, st3]))
}
