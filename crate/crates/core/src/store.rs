//! On-disk artefacts: the complex cache (Voronoi graph, orbit tables and boundary
//! matrices), the results store with its CSV index, and per-run telemetry.
//!
//! Cache layout: `<cache>/<|D|>/<flavor>.json`. Results layout:
//!
//! ```text
//! <root>/results/<|D|>/<flavor>.json   one record per discriminant and group
//! <root>/index.csv                     merged index, canonical order
//! <root>/failures/<|D|>_<flavor>.json  discriminants that could not be computed
//! <root>/telemetry/<|D|>_<flavor>.json timings and matrix sizes (not canonical)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cellcomplex::VoronoiComplex;
use crate::error::{Error, Result};
use crate::hermitian::{ConePoint, HermitianForm, MinimalVectorSet, Rational};
use crate::qfield::{Flavor, GroupElement, ModuleVector, OrderContext};
use crate::report::{format_factors, Exponent, ReportRecord};
use crate::voronoi::{Edge, PerfectForm, RaySet, VoronoiGraph};
use crate::zhomology::SparseIntMatrix;

pub const CACHE_VERSION: u32 = 1;

/// Environment variable overriding the default cache directory.
pub const CACHE_ENV: &str = "BIANCHI_CACHE_DIR";

/// The cache directory from [`CACHE_ENV`], or `fallback`.
pub fn cache_dir_or(fallback: impl Into<PathBuf>) -> PathBuf {
    std::env::var_os(CACHE_ENV).map(PathBuf::from).unwrap_or_else(|| fallback.into())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CachedNode {
    /// Exact coordinates `(a, b1, b2, c)` as reduced fractions.
    pub form: [String; 4],
    pub minimal_vectors: Vec<[i64; 4]>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CachedEdge {
    pub from: usize,
    pub facet: usize,
    pub to: usize,
    pub witness: GroupElement,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CachedOrbit {
    pub dim: usize,
    pub rays: Vec<ConePoint>,
    pub stabilizer_order: usize,
    pub orientation_preserving: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CachedComplex {
    pub orbits: Vec<CachedOrbit>,
    /// Ranks of `V1, V2, V3`.
    pub ranks: [usize; 3],
    /// Boundary matrices in triplet text.
    pub d2: String,
    pub d3: String,
}

/// Versioned cache document for one discriminant and group.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexCache {
    pub version: u32,
    pub disc: i64,
    pub flavor: Flavor,
    pub nodes: Vec<CachedNode>,
    pub edges: Vec<CachedEdge>,
    pub complex: Option<CachedComplex>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CacheCorrupt(msg.into())
}

impl ComplexCache {
    pub fn new(graph: &VoronoiGraph, complex: Option<&VoronoiComplex>) -> Self {
        let nodes = graph
            .nodes
            .iter()
            .map(|p| CachedNode {
                form: p.form.coords().map(|x| x.to_string()),
                minimal_vectors: p.minvecs.vectors.iter().map(ModuleVector::coords).collect(),
            })
            .collect();
        let edges = graph
            .edges
            .iter()
            .map(|e| CachedEdge { from: e.from, facet: e.facet, to: e.to, witness: e.witness })
            .collect();
        let complex = complex.map(|cx| CachedComplex {
            orbits: cx
                .orbits
                .iter()
                .map(|o| CachedOrbit {
                    dim: o.dim,
                    rays: cx.cells[o.rep].rays.rays.clone(),
                    stabilizer_order: o.stabilizer.len(),
                    orientation_preserving: o.orientation_preserving,
                })
                .collect(),
            ranks: cx.dims,
            d2: cx.d2.to_triplet_text(),
            d3: cx.d3.to_triplet_text(),
        });
        ComplexCache { version: CACHE_VERSION, disc: graph.disc, flavor: graph.flavor, nodes, edges, complex }
    }

    /// Canonical text: pretty JSON with a trailing newline.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Parses and checks the header. Content checks happen in [`ComplexCache::graph`] and
    /// [`ComplexCache::boundaries`].
    pub fn from_json(text: &str, disc: i64, flavor: Flavor) -> Result<Self> {
        let c: ComplexCache = serde_json::from_str(text).map_err(|e| corrupt(format!("unreadable cache: {e}")))?;
        if c.version != CACHE_VERSION {
            return Err(corrupt(format!("cache version {} is not {CACHE_VERSION}", c.version)));
        }
        if c.disc != disc || c.flavor != flavor {
            return Err(corrupt(format!("cache is for D = {} {}, expected D = {disc} {flavor}", c.disc, c.flavor)));
        }
        Ok(c)
    }

    /// Rebuilds the graph, checking that every node is a perfect form with minimum 1 on
    /// exactly the stored vectors and that edges stay in range.
    pub fn graph(&self, ctx: &OrderContext) -> Result<VoronoiGraph> {
        if ctx.d() != self.disc {
            return Err(corrupt("cache opened with the wrong order"));
        }
        let one = Rational::from_integer(1.into());
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for (i, n) in self.nodes.iter().enumerate() {
            let coords: Vec<Rational> = n
                .form
                .iter()
                .map(|s| s.parse::<Rational>().map_err(|_| corrupt(format!("node {i}: bad coordinate {s:?}"))))
                .collect::<Result<_>>()?;
            let coords: [Rational; 4] = coords.try_into().expect("four coordinates");
            let form = HermitianForm::from_coords(self.disc, coords);
            let vectors: Vec<ModuleVector> = n.minimal_vectors.iter().map(|&c| ModuleVector::from_coords(c)).collect();
            if !form.is_positive_definite() || vectors.iter().any(|v| form.evaluate(ctx, v) != one) {
                return Err(corrupt(format!("node {i} does not take value 1 on its minimal vectors")));
            }
            let cone = RaySet::from_vectors(ctx, &vectors);
            if cone.rank() != 4 {
                return Err(corrupt(format!("node {i} is not perfect")));
            }
            nodes.push(PerfectForm { form, minvecs: MinimalVectorSet { min_value: one.clone(), vectors }, cone });
        }
        let mut edges = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            if e.from >= nodes.len() || e.to >= nodes.len() {
                return Err(corrupt("edge endpoint out of range"));
            }
            if !e.witness.is_in(ctx, self.flavor) {
                return Err(corrupt("edge witness is not in the group"));
            }
            edges.push(Edge { from: e.from, facet: e.facet, to: e.to, witness: e.witness });
        }
        Ok(VoronoiGraph { disc: self.disc, flavor: self.flavor, nodes, edges })
    }

    /// Ranks and boundary matrices, if the complex section is present.
    pub fn boundaries(&self) -> Result<Option<([usize; 3], SparseIntMatrix, SparseIntMatrix)>> {
        let Some(cx) = &self.complex else { return Ok(None) };
        let d2 = SparseIntMatrix::from_triplet_text(&cx.d2).map_err(|e| corrupt(format!("d2: {e}")))?;
        let d3 = SparseIntMatrix::from_triplet_text(&cx.d3).map_err(|e| corrupt(format!("d3: {e}")))?;
        let r = cx.ranks;
        if (d2.n_rows, d2.n_cols, d3.n_rows, d3.n_cols) != (r[0], r[1], r[1], r[2]) {
            return Err(corrupt("boundary shapes do not match the stored ranks"));
        }
        let orientable = |n: usize| cx.orbits.iter().filter(|o| o.dim == n && o.orientation_preserving).count();
        if (orientable(1), orientable(2), orientable(3)) != (r[0], r[1], r[2]) {
            return Err(corrupt("orbit table does not match the stored ranks"));
        }
        Ok(Some((r, d2, d3)))
    }

    /// Orbit counts per dimension, orientable or not.
    pub fn orbit_counts(&self) -> Option<[usize; 3]> {
        self.complex.as_ref().map(|cx| {
            let mut c = [0; 3];
            for o in &cx.orbits {
                if (1..=3).contains(&o.dim) {
                    c[o.dim - 1] += 1;
                }
            }
            c
        })
    }
}

/// Writes through a temporary file so readers never see a partial document.
fn write_atomic(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn read_optional(path: &Path) -> Result<Option<String>> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(Some(s)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Directory of complex caches.
#[derive(Clone, Debug)]
pub struct CacheDir {
    pub root: PathBuf,
}

impl CacheDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        CacheDir { root: root.into() }
    }

    pub fn path(&self, disc: i64, flavor: Flavor) -> PathBuf {
        self.root.join(disc.unsigned_abs().to_string()).join(format!("{flavor}.json"))
    }

    /// The cache document and its text, if present.
    pub fn load(&self, disc: i64, flavor: Flavor) -> Result<Option<(ComplexCache, String)>> {
        let Some(text) = read_optional(&self.path(disc, flavor))? else { return Ok(None) };
        Ok(Some((ComplexCache::from_json(&text, disc, flavor)?, text)))
    }

    /// Stores the document and returns its text.
    pub fn save(&self, cache: &ComplexCache) -> Result<String> {
        let text = cache.to_json()?;
        write_atomic(&self.path(cache.disc, cache.flavor), &text)?;
        Ok(text)
    }
}

/// A discriminant that could not be computed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub disc: i64,
    pub flavor: Flavor,
    pub message: String,
}

/// Per-stage wall clock times in seconds and matrix sizes of one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub disc: i64,
    pub flavor: Option<Flavor>,
    pub cache_hit: bool,
    pub enumerate_s: f64,
    pub complex_s: f64,
    pub homology_s: f64,
    pub total_s: f64,
    pub d2_shape: [usize; 2],
    pub d3_shape: [usize; 2],
    pub d2_nnz: usize,
    pub d3_nnz: usize,
}

/// The results store.
#[derive(Clone, Debug)]
pub struct ResultsStore {
    pub root: PathBuf,
}

impl ResultsStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ResultsStore { root: root.into() }
    }

    pub fn record_path(&self, disc: i64, flavor: Flavor) -> PathBuf {
        self.root.join("results").join(disc.unsigned_abs().to_string()).join(format!("{flavor}.json"))
    }

    fn failure_path(&self, disc: i64, flavor: Flavor) -> PathBuf {
        self.root.join("failures").join(format!("{}_{flavor}.json", disc.unsigned_abs()))
    }

    pub fn index_path(&self) -> PathBuf {
        self.root.join("index.csv")
    }

    pub fn save(&self, r: &ReportRecord) -> Result<()> {
        write_atomic(&self.record_path(r.disc, r.flavor), &r.to_json()?)?;
        match fs::remove_file(self.failure_path(r.disc, r.flavor)) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(e.into()),
            _ => Ok(()),
        }
    }

    pub fn load(&self, disc: i64, flavor: Flavor) -> Result<Option<ReportRecord>> {
        read_optional(&self.record_path(disc, flavor))?.map(|t| ReportRecord::from_json(&t)).transpose()
    }

    pub fn save_failure(&self, f: &Failure) -> Result<()> {
        let mut s = serde_json::to_string_pretty(f)?;
        s.push('\n');
        write_atomic(&self.failure_path(f.disc, f.flavor), &s)
    }

    pub fn save_telemetry(&self, t: &Telemetry) -> Result<()> {
        let flavor = t.flavor.map_or("none", Flavor::as_str);
        let path = self.root.join("telemetry").join(format!("{}_{flavor}.json", t.disc.unsigned_abs()));
        let mut s = serde_json::to_string_pretty(t)?;
        s.push('\n');
        write_atomic(&path, &s)
    }

    /// All records, ordered by group and then by `|D|`.
    pub fn records(&self) -> Result<Vec<ReportRecord>> {
        let dir = self.root.join("results");
        let mut out = Vec::new();
        if !dir.exists() {
            return Ok(out);
        }
        for d in fs::read_dir(&dir)? {
            let d = d?;
            if !d.file_type()?.is_dir() {
                continue;
            }
            for f in fs::read_dir(d.path())? {
                let p = f?.path();
                if p.extension().is_some_and(|e| e == "json") {
                    out.push(ReportRecord::from_json(&fs::read_to_string(&p)?)?);
                }
            }
        }
        out.sort_by_key(|r| (r.flavor, r.disc.unsigned_abs()));
        Ok(out)
    }

    pub fn failures(&self) -> Result<Vec<Failure>> {
        let dir = self.root.join("failures");
        let mut out: Vec<Failure> = Vec::new();
        if !dir.exists() {
            return Ok(out);
        }
        for f in fs::read_dir(&dir)? {
            let p = f?.path();
            if p.extension().is_some_and(|e| e == "json") {
                out.push(serde_json::from_str(&fs::read_to_string(&p)?)?);
            }
        }
        out.sort_by_key(|f| (f.flavor, f.disc.unsigned_abs()));
        Ok(out)
    }

    /// Rewrites `index.csv` from the stored records.
    pub fn write_index(&self) -> Result<()> {
        write_atomic(&self.index_path(), &index_csv(&self.records()?)?)
    }
}

/// CSV with one row per record and a header.
pub fn index_csv(records: &[ReportRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Parse(format!("csv: {e}"));
    w.write_record([
        "flavor",
        "D",
        "class_group",
        "cusp_dim",
        "betti1",
        "betti2",
        "betti3",
        "torsion1",
        "torsion2",
        "logtor",
        "z_d",
        "rohlfs_gap",
        "cache_hash",
    ])
    .map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.flavor.to_string(),
            r.disc.to_string(),
            format_factors(&r.class_group, Exponent::Bare),
            r.cusp_dim.to_string(),
            r.betti[0].to_string(),
            r.betti[1].to_string(),
            r.betti[2].to_string(),
            format_factors(&r.torsion1, Exponent::Braced),
            format_factors(&r.torsion2, Exponent::Braced),
            r.stats.logtor.to_string(),
            r.stats.z_d.to_string(),
            r.stats.rohlfs_gap.map(|g| g.to_string()).unwrap_or_default(),
            r.cache_hash.clone(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cellcomplex::VoronoiComplex;
    use crate::qfield::make_order;
    use crate::voronoi::enumerate_perfect_forms;

    fn sample(d: i64, flavor: Flavor) -> (OrderContext, VoronoiGraph, VoronoiComplex) {
        let ctx = make_order(d).unwrap();
        let g = enumerate_perfect_forms(&ctx, flavor).unwrap();
        let cx = VoronoiComplex::build(&ctx, &g).unwrap();
        (ctx, g, cx)
    }

    #[test]
    fn cache_text_round_trips_bit_exactly() {
        for (d, fl) in [(-7, Flavor::Gl2), (-20, Flavor::Sl2), (-40, Flavor::Gl2)] {
            let (ctx, g, cx) = sample(d, fl);
            let text = ComplexCache::new(&g, Some(&cx)).to_json().unwrap();
            let back = ComplexCache::from_json(&text, d, fl).unwrap();
            assert_eq!(back.to_json().unwrap(), text);
            // Rebuilding the graph and re-serialising is also lossless.
            let g2 = back.graph(&ctx).unwrap();
            let again = ComplexCache::new(&g2, Some(&cx)).to_json().unwrap();
            assert_eq!(again, text);
            let (ranks, d2, d3) = back.boundaries().unwrap().unwrap();
            assert_eq!(ranks, cx.dims);
            assert_eq!(d2, cx.d2);
            assert_eq!(d3, cx.d3);
        }
    }

    #[test]
    fn tampered_caches_are_rejected() {
        let (ctx, g, cx) = sample(-15, Flavor::Gl2);
        let cache = ComplexCache::new(&g, Some(&cx));
        let text = cache.to_json().unwrap();
        assert!(matches!(ComplexCache::from_json(&text[..text.len() / 2], -15, Flavor::Gl2), Err(Error::CacheCorrupt(_))));
        assert!(matches!(ComplexCache::from_json(&text, -15, Flavor::Sl2), Err(Error::CacheCorrupt(_))));
        let mut bad = cache.clone();
        bad.nodes[0].form[0] = "7/5".into();
        assert!(matches!(bad.graph(&ctx), Err(Error::CacheCorrupt(_))));
        let mut bad = cache.clone();
        bad.version += 1;
        let t = bad.to_json().unwrap();
        assert!(matches!(ComplexCache::from_json(&t, -15, Flavor::Gl2), Err(Error::CacheCorrupt(_))));
        let mut bad = cache;
        bad.complex.as_mut().unwrap().ranks[0] += 1;
        assert!(matches!(bad.boundaries(), Err(Error::CacheCorrupt(_))));
    }

    #[test]
    fn cache_dir_save_and_load() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = CacheDir::new(tmp.path());
        let (_, g, cx) = sample(-8, Flavor::Gl2);
        let cache = ComplexCache::new(&g, Some(&cx));
        let text = dir.save(&cache).unwrap();
        let (back, t2) = dir.load(-8, Flavor::Gl2).unwrap().unwrap();
        assert_eq!(back, cache);
        assert_eq!(t2, text);
        assert!(dir.load(-11, Flavor::Gl2).unwrap().is_none());
    }

    #[test]
    fn hash_is_hex_sha256() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
