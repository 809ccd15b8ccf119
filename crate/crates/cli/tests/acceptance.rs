//! Acceptance suite: one PASS/FAIL/SKIPPED line per criterion.
//!
//! Every check is exact; the only tolerance is the equality-rate window of the quarantined
//! bound criterion, pinned in [`RATE_WINDOW`].

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bianchi_cli::{scan, ScanOptions};
use bianchi_core::arith::{class_group, prime_to_six_part_is_square, rohlfs_lower_bound};
use bianchi_core::pipeline::compute;
use bianchi_core::qfield::fundamental_discriminants;
use bianchi_core::report::golden_row;
use bianchi_core::store::CacheDir;
use bianchi_core::zhomology::{homology, snf};
use bianchi_core::{Flavor, ReportRecord, SparseIntMatrix};

/// Allowed distance, in percentage points, from the published equality rate of 54%.
const RATE_WINDOW: f64 = 10.0;
const SNF_SAMPLES: usize = 500;

type Check = std::result::Result<String, String>;

enum Verdict {
    Pass(String),
    Fail(String),
    Skipped(String),
}

/// Records computed so far together with their cached complexes, shared by the criteria.
struct Runs {
    cache: CacheDir,
    records: BTreeMap<(i64, Flavor), ReportRecord>,
}

impl Runs {
    fn get(&mut self, d: i64, f: Flavor) -> std::result::Result<ReportRecord, String> {
        if let Some(r) = self.records.get(&(d, f)) {
            return Ok(r.clone());
        }
        let r = compute(d, f, Some(&self.cache)).map_err(|e| format!("D = {d} {f}: {e}"))?.record;
        self.records.insert((d, f), r.clone());
        Ok(r)
    }
}

fn match_golden(runs: &mut Runs, discs: &[i64]) -> Check {
    let mut rows = 0;
    for &d in discs {
        for f in [Flavor::Gl2, Flavor::Sl2] {
            let r = runs.get(d, f)?;
            let g = golden_row(d, f).ok_or_else(|| format!("no table row for D = {d} {f}"))?;
            let got = (&r.class_group, r.cusp_dim, &r.torsion1);
            if got != (&g.class_group, g.cusp_dim, &g.torsion1) {
                return Err(format!("D = {d} {f}: got {}, table has {:?}", r.paper_row(), g.columns()));
            }
            rows += 1;
        }
    }
    Ok(format!("{rows} rows match"))
}

fn c1(runs: &mut Runs) -> Check {
    let discs: Vec<i64> = fundamental_discriminants(-3, -120).iter().map(|d| d.value()).collect();
    match_golden(runs, &discs)
}

fn c2(runs: &mut Runs) -> Check {
    match_golden(runs, &[-231, -296, -359, -487, -599])
}

fn c3(runs: &mut Runs) -> Check {
    let r = runs.get(-1007, Flavor::Gl2)?;
    let mut torsion = vec![BigInt::from(2); 24];
    torsion.extend([BigInt::from(534), BigInt::from(1602)]);
    if r.class_group != [30] || r.cusp_dim != 2 || r.betti[0] != 31 || r.torsion1 != torsion {
        return Err(format!("got {} with betti {:?}", r.paper_row(), r.betti));
    }
    Ok(format!("{} and H1 of rank {}", r.paper_row(), r.betti[0]))
}

fn only_primes_2_3(mut n: usize) -> bool {
    for p in [2, 3] {
        while n > 0 && n % p == 0 {
            n /= p;
        }
    }
    n == 1
}

fn c4(runs: &mut Runs) -> Check {
    let keys: Vec<(i64, Flavor)> = runs.records.keys().copied().collect();
    for &(d, f) in &keys {
        let r = &runs.records[&(d, f)];
        let ctx = format!("D = {d} {f}");
        let (doc, _) = runs.cache.load(d, f).map_err(|e| e.to_string())?.ok_or(format!("{ctx}: not cached"))?;
        let (ranks, d2, d3) = doc.boundaries().map_err(|e| e.to_string())?.ok_or(format!("{ctx}: no complex"))?;
        if !d2.mul(&d3).is_zero() {
            return Err(format!("{ctx}: d2 d3 != 0"));
        }
        let hres = homology(ranks, &d2, &d3).map_err(|e| format!("{ctx}: {e}"))?;
        if hres.betti[2] != 1 || !hres.torsion[2].is_empty() {
            return Err(format!("{ctx}: H3 is not Z"));
        }
        if hres.betti != r.betti || hres.torsion[0] != r.torsion1 {
            return Err(format!("{ctx}: record disagrees with the cached complex"));
        }
        if let Some(t) = r.torsion2.iter().find(|t| !(BigInt::from(12) % *t).is_zero()) {
            return Err(format!("{ctx}: H2 torsion factor {t}"));
        }
        let h = class_group(bianchi_core::Discriminant::new(d).unwrap()).h as i64;
        let diff = r.betti[0] as i64 - r.betti[1] as i64;
        let want = match f {
            Flavor::Gl2 => Some(h - 1),
            Flavor::Sl2 if d < -4 => Some(-1),
            Flavor::Sl2 => None,
        };
        if want.is_some_and(|w| w != diff) {
            return Err(format!("{ctx}: betti1 - betti2 = {diff}, expected {want:?}"));
        }
        let orbits = &doc.complex.as_ref().unwrap().orbits;
        if let Some(o) = orbits.iter().find(|o| !only_primes_2_3(o.stabilizer_order)) {
            return Err(format!("{ctx}: stabiliser of order {}", o.stabilizer_order));
        }
        if !prime_to_six_part_is_square(&r.torsion1) {
            return Err(format!("{ctx}: torsion order away from 6 is not a square"));
        }
    }
    Ok(format!("{} computed complexes", keys.len()))
}

/// Textbook Smith form: move the smallest nonzero entry to the pivot, clear its row and
/// column by division with remainder, repair divisibility, recurse on the minor.
fn dense_snf(mut a: Vec<Vec<BigInt>>) -> Vec<BigInt> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut out = Vec::new();
    for t in 0..rows.min(cols) {
        loop {
            let Some((pr, pc)) = (t..rows)
                .flat_map(|i| (t..cols).map(move |j| (i, j)))
                .filter(|&(i, j)| !a[i][j].is_zero())
                .min_by_key(|&(i, j)| a[i][j].abs())
            else {
                return out;
            };
            a.swap(t, pr);
            for row in a.iter_mut() {
                row.swap(t, pc);
            }
            let p = a[t][t].clone();
            let mut clean = true;
            for i in t + 1..rows {
                let q = &a[i][t] / &p;
                for j in t..cols {
                    let v = &q * &a[t][j];
                    a[i][j] -= v;
                }
                clean &= a[i][t].is_zero();
            }
            for j in t + 1..cols {
                let q = &a[t][j] / &p;
                for i in t..rows {
                    let v = &q * &a[i][t];
                    a[i][j] -= v;
                }
                clean &= a[t][j].is_zero();
            }
            if !clean {
                continue;
            }
            let bad = (t + 1..rows).find(|&i| (t + 1..cols).any(|j| !(&a[i][j] % &p).is_zero()));
            match bad {
                Some(i) => {
                    for j in t..cols {
                        let v = a[i][j].clone();
                        a[t][j] += v;
                    }
                }
                None => break,
            }
        }
        out.push(a[t][t].abs());
    }
    out
}

fn c5() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for k in 0..SNF_SAMPLES {
        let (m, n) = (rng.gen_range(1..=12), rng.gen_range(1..=12));
        let density = rng.gen_range(0.1..0.6);
        let dense: Vec<Vec<i64>> =
            (0..m).map(|_| (0..n).map(|_| if rng.gen_bool(density) { rng.gen_range(-9..=9) } else { 0 }).collect()).collect();
        let got = snf(&SparseIntMatrix::from_dense(&dense));
        let want = dense_snf(dense.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect());
        let mut want_sorted = want.clone();
        want_sorted.sort();
        let got_chain = &got.invariant_factors;
        if got.rank != want.len() || *got_chain != want_sorted {
            return Err(format!("sample {k} ({m}x{n}): engine {got_chain:?}, oracle {want:?}"));
        }
        if got_chain.windows(2).any(|w| !(&w[1] % &w[0]).is_zero()) {
            return Err(format!("sample {k}: chain {got_chain:?} is not a divisibility chain"));
        }
    }
    // diag(2^40, 3^27) has Smith form (1, 2^40 3^27) with the second factor near 8e24.
    let (a, b) = (1i64 << 40, 3i64.pow(27));
    let big = snf(&SparseIntMatrix::from_dense(&[vec![a, 0], vec![0, b]]));
    let expect = vec![BigInt::one(), BigInt::from(a) * BigInt::from(b)];
    if big.invariant_factors != expect || expect[1] <= BigInt::from(10u64.pow(18)) {
        return Err(format!("large factor: {:?}", big.invariant_factors));
    }
    Ok(format!("{SNF_SAMPLES} random matrices agree with the dense oracle; factor {} found", expect[1]))
}

fn c6() -> Check {
    let discs = fundamental_discriminants(-3, -500);
    for d in &discs {
        let g = golden_row(d.value(), Flavor::Gl2).ok_or_else(|| format!("no table row for {}", d.value()))?;
        let cg = class_group(*d);
        if cg.elementary_divisors != g.class_group {
            return Err(format!("D = {}: {:?} vs table {:?}", d.value(), cg.elementary_divisors, g.class_group));
        }
    }
    Ok(format!("{} discriminants", discs.len()))
}

fn canonical_tree(root: &Path) -> std::io::Result<BTreeMap<String, Vec<u8>>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir)? {
            let p = e?.path();
            let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
            if rel.starts_with("telemetry") {
                continue;
            }
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(rel, fs::read(&p)?);
            }
        }
    }
    Ok(out)
}

fn c7() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut trees = Vec::new();
    for jobs in [1, 8] {
        let root = tmp.path().join(format!("jobs{jobs}"));
        let opts = ScanOptions {
            from: -3,
            to: -200,
            flavors: vec![Flavor::Gl2, Flavor::Sl2],
            jobs,
            cache: Some(tmp.path().join(format!("cache{jobs}"))),
            store: root.clone(),
        };
        let s = scan(&opts).map_err(|e| e.to_string())?;
        if s.failed > 0 {
            return Err(format!("{} failures with {jobs} jobs", s.failed));
        }
        trees.push(canonical_tree(&root).map_err(|e| e.to_string())?);
    }
    if trees[0] != trees[1] {
        let differ: Vec<&String> = trees[0].keys().filter(|k| trees[1].get(*k) != trees[0].get(*k)).collect();
        return Err(format!("stores differ in {differ:?}"));
    }
    let caches: Vec<_> = ["cache1", "cache8"].iter().map(|c| canonical_tree(&tmp.path().join(c))).collect::<std::io::Result<_>>().map_err(|e| e.to_string())?;
    if caches[0] != caches[1] {
        return Err("complex caches differ".into());
    }
    Ok(format!("{} files identical", trees[0].len()))
}

fn c8(runs: &mut Runs) -> Verdict {
    if rohlfs_lower_bound(bianchi_core::Discriminant::new(-7).unwrap()).is_none() {
        return Verdict::Skipped("bound formula not available; quarantined".into());
    }
    let mut sharp = 0;
    let mut total = 0;
    for d in fundamental_discriminants(-3, -1247) {
        let r = match runs.get(d.value(), Flavor::Sl2) {
            Ok(r) => r,
            Err(e) => return Verdict::Fail(e),
        };
        let b = rohlfs_lower_bound(d).unwrap();
        if b > r.cusp_dim as i64 {
            return Verdict::Fail(format!("D = {}: bound {b} exceeds {}", d.value(), r.cusp_dim));
        }
        if d.value() % 4 != 0 {
            total += 1;
            sharp += (b == r.cusp_dim as i64) as usize;
        }
    }
    let rate = 100.0 * sharp as f64 / total as f64;
    if (rate - 54.0).abs() <= RATE_WINDOW {
        Verdict::Pass(format!("equality rate {rate:.1}%"))
    } else {
        Verdict::Fail(format!("equality rate {rate:.1}%"))
    }
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let mut runs = Runs { cache: CacheDir::new(tmp.path()), records: BTreeMap::new() };
    let mut failed = 0;
    let mut report = |name: &str, t: Instant, v: Verdict| {
        let secs = t.elapsed().as_secs_f64();
        match v {
            Verdict::Pass(m) => println!("PASS    {name}: {m} ({secs:.1}s)"),
            Verdict::Fail(m) => {
                failed += 1;
                println!("FAIL    {name}: {m} ({secs:.1}s)");
            }
            Verdict::Skipped(m) => println!("SKIPPED {name}: {m}"),
        }
    };
    let verdict = |c: Check| c.map_or_else(Verdict::Fail, Verdict::Pass);

    let t = Instant::now();
    report("C1 golden rows, -D <= 120", t, verdict(c1(&mut runs)));
    let t = Instant::now();
    report("C2 golden rows, medium discriminants", t, verdict(c2(&mut runs)));
    let t = Instant::now();
    report("C3 D = -1007 GL2 worked example", t, verdict(c3(&mut runs)));
    let t = Instant::now();
    report("C4 structural invariants", t, verdict(c4(&mut runs)));
    let t = Instant::now();
    report("C5 Smith normal form engine", t, verdict(c5()));
    let t = Instant::now();
    report("C6 class groups, -D <= 500", t, verdict(c6()));
    let t = Instant::now();
    report("C7 scan determinism, 1 vs 8 workers", t, verdict(c7()));
    let t = Instant::now();
    report("C8 cusp dimension lower bound", t, c8(&mut runs));

    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
