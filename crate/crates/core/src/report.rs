//! Per-discriminant result records, the exponent notation used in the published tables,
//! and the golden table rows shipped with the crate.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::arith::{run_lengths, GrowthStats};
use crate::error::{Error, Result};
use crate::qfield::Flavor;
use crate::zhomology::bigints_serde;

/// Version of the JSON layout of [`ReportRecord`].
pub const SCHEMA_VERSION: u32 = 1;

/// Everything reported for one discriminant and one group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub schema: u32,
    pub disc: i64,
    pub flavor: Flavor,
    /// Invariant factors of the class group.
    pub class_group: Vec<u64>,
    pub class_number: u64,
    pub cusp_dim: usize,
    pub eis_dim_h1: usize,
    pub eis_dim_h2: usize,
    pub betti: [usize; 3],
    #[serde(with = "bigints_serde")]
    pub torsion1: Vec<BigInt>,
    #[serde(with = "bigints_serde")]
    pub torsion2: Vec<BigInt>,
    pub stats: GrowthStats,
    /// Orbit counts of cells of dimension 1, 2, 3 and the ranks of `V1, V2, V3`.
    pub orbits: [usize; 3],
    pub ranks: [usize; 3],
    pub perfect_forms: usize,
    /// SHA-256 of the cache document the homology was computed from.
    pub cache_hash: String,
    /// Structural findings that do not stop the computation.
    pub warnings: Vec<String>,
}

impl ReportRecord {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: ReportRecord = serde_json::from_str(text)?;
        if r.schema != SCHEMA_VERSION {
            return Err(Error::Parse(format!("record schema {} is not {SCHEMA_VERSION}", r.schema)));
        }
        Ok(r)
    }

    /// The row as printed in the tables: class group, cuspidal dimension, torsion.
    pub fn paper_row(&self) -> String {
        format!(
            "{} | {} | {}",
            format_factors(&self.class_group, Exponent::Bare),
            self.cusp_dim,
            format_factors(&self.torsion1, Exponent::Braced)
        )
    }
}

/// How repeated factors are written: `2^2` in class group columns, `2^{2}` for torsion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exponent {
    Bare,
    Braced,
}

/// `[2, 2, 6] -> "(2^{2},6)"`; the empty list is `"()"`.
pub fn format_factors<T: fmt::Display + Clone + PartialEq>(factors: &[T], style: Exponent) -> String {
    let parts: Vec<String> = run_lengths(factors)
        .into_iter()
        .map(|(f, n)| match (n, style) {
            (1, _) => f.to_string(),
            (n, Exponent::Bare) => format!("{f}^{n}"),
            (n, Exponent::Braced) => format!("{f}^{{{n}}}"),
        })
        .collect();
    format!("({})", parts.join(","))
}

/// Inverse of [`format_factors`]; accepts both exponent styles.
pub fn parse_factors<T: FromStr + Clone>(text: &str) -> Result<Vec<T>> {
    let bad = || Error::Parse(format!("malformed factor list {text:?}"));
    let inner = text.trim().strip_prefix('(').and_then(|s| s.strip_suffix(')')).ok_or_else(bad)?;
    let mut out = Vec::new();
    if inner.trim().is_empty() {
        return Ok(out);
    }
    for part in inner.split(',') {
        let (base, exp) = match part.split_once('^') {
            Some((b, e)) => {
                let e = e.trim();
                let e = e.strip_prefix('{').and_then(|s| s.strip_suffix('}')).unwrap_or(e);
                (b.trim(), e.parse::<usize>().map_err(|_| bad())?)
            }
            None => (part.trim(), 1),
        };
        let f: T = base.parse().map_err(|_| bad())?;
        out.extend(std::iter::repeat_n(f, exp));
    }
    Ok(out)
}

/// One row of the published tables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoldenRow {
    pub flavor: Flavor,
    pub disc: i64,
    pub class_group: Vec<u64>,
    pub cusp_dim: usize,
    pub torsion1: Vec<BigInt>,
}

impl GoldenRow {
    /// The three table columns in the published notation.
    pub fn columns(&self) -> (String, String, String) {
        (
            format_factors(&self.class_group, Exponent::Bare),
            self.cusp_dim.to_string(),
            format_factors(&self.torsion1, Exponent::Braced),
        )
    }
}

const TABLES: &str = include_str!("../fixtures/tables.txt");

/// Raw text of the golden tables, tab separated.
pub fn golden_text() -> &'static str {
    TABLES
}

/// Parses tab separated rows `flavor  D  class_group  cusp  torsion`; `#` starts a comment.
pub fn parse_golden(text: &str) -> Result<Vec<GoldenRow>> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            let cols: Vec<&str> = l.split('\t').collect();
            if cols.len() != 5 {
                return Err(Error::Parse(format!("expected 5 columns in {l:?}")));
            }
            Ok(GoldenRow {
                flavor: cols[0].parse()?,
                disc: cols[1].parse().map_err(|_| Error::Parse(format!("bad discriminant in {l:?}")))?,
                class_group: parse_factors(cols[2])?,
                cusp_dim: cols[3].parse().map_err(|_| Error::Parse(format!("bad cusp dimension in {l:?}")))?,
                torsion1: parse_factors(cols[4])?,
            })
        })
        .collect()
}

pub fn golden_rows() -> Vec<GoldenRow> {
    parse_golden(TABLES).expect("shipped tables parse")
}

pub fn golden_row(disc: i64, flavor: Flavor) -> Option<GoldenRow> {
    golden_rows().into_iter().find(|r| r.disc == disc && r.flavor == flavor)
}
