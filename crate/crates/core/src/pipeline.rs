//! End-to-end computation for one discriminant and one group.

use std::time::Instant;

use num_bigint::BigInt;
use num_traits::Zero;

use crate::arith::{class_group, cusp_dimension, growth_stats, prime_to_six_part_is_square};
use crate::cellcomplex::VoronoiComplex;
use crate::error::{Error, Result};
use crate::qfield::{make_order, Discriminant, Flavor};
use crate::report::{ReportRecord, SCHEMA_VERSION};
use crate::store::{sha256_hex, CacheDir, ComplexCache, Telemetry};
use crate::voronoi::enumerate_perfect_forms;
use crate::zhomology::{homology_with_stats, HomologyResult};

/// A record together with the telemetry of the run that produced it.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub record: ReportRecord,
    pub telemetry: Telemetry,
}

/// Runs the whole pipeline, reusing and filling `cache` when given. A cache document
/// with boundary matrices skips enumeration and complex construction entirely.
pub fn compute(disc: i64, flavor: Flavor, cache: Option<&CacheDir>) -> Result<Outcome> {
    let start = Instant::now();
    let d = Discriminant::new(disc)?;
    let ctx = make_order(disc)?;
    let mut tel = Telemetry { disc, flavor: Some(flavor), ..Telemetry::default() };

    let stored = match cache {
        Some(c) => c.load(disc, flavor)?,
        None => None,
    };
    let (doc, text) = match stored {
        Some((doc, text)) if doc.complex.is_some() => {
            tel.cache_hit = true;
            (doc, text)
        }
        stored => {
            let graph = match stored {
                Some((doc, _)) => {
                    tel.cache_hit = true;
                    doc.graph(&ctx)?
                }
                None => enumerate_perfect_forms(&ctx, flavor)?,
            };
            tel.enumerate_s = start.elapsed().as_secs_f64();
            let cx = VoronoiComplex::build(&ctx, &graph)?;
            tel.complex_s = start.elapsed().as_secs_f64() - tel.enumerate_s;
            let doc = ComplexCache::new(&graph, Some(&cx));
            let text = match cache {
                Some(c) => c.save(&doc)?,
                None => doc.to_json()?,
            };
            (doc, text)
        }
    };
    let (ranks, d2, d3) = doc.boundaries()?.expect("complex section present");
    let t_hom = Instant::now();
    let (hres, _) = homology_with_stats(ranks, &d2, &d3)?;
    tel.homology_s = t_hom.elapsed().as_secs_f64();
    tel.d2_shape = [d2.n_rows, d2.n_cols];
    tel.d3_shape = [d3.n_rows, d3.n_cols];
    tel.d2_nnz = d2.nnz();
    tel.d3_nnz = d3.nnz();

    let warnings = structural_checks(&hres, disc, flavor)?;
    let cg = class_group(d);
    let split = cusp_dimension(&hres, &cg, flavor, d)?;
    let stats = growth_stats(&hres, &split, flavor, d);
    let record = ReportRecord {
        schema: SCHEMA_VERSION,
        disc,
        flavor,
        class_group: cg.elementary_divisors.clone(),
        class_number: cg.h,
        cusp_dim: split.cusp_dim,
        eis_dim_h1: split.eis_dim_h1,
        eis_dim_h2: split.eis_dim_h2,
        betti: hres.betti,
        torsion1: hres.torsion[0].clone(),
        torsion2: hres.torsion[1].clone(),
        stats,
        orbits: doc.orbit_counts().expect("complex section present"),
        ranks,
        perfect_forms: doc.nodes.len(),
        cache_hash: sha256_hex(text.as_bytes()),
        warnings,
    };
    tel.total_s = start.elapsed().as_secs_f64();
    Ok(Outcome { record, telemetry: tel })
}

/// Hard checks on `H3` and `H2` torsion; the square property of `H1` torsion away from 2
/// and 3 is reported as a warning.
pub fn structural_checks(hres: &HomologyResult, disc: i64, flavor: Flavor) -> Result<Vec<String>> {
    if hres.betti[2] != 1 || !hres.torsion[2].is_empty() {
        return Err(Error::Guard(format!(
            "D = {disc} {flavor}: H3 has rank {} and torsion {:?}, expected Z",
            hres.betti[2], hres.torsion[2]
        )));
    }
    let twelve = BigInt::from(12);
    if let Some(f) = hres.torsion[1].iter().find(|f| !(&twelve % *f).is_zero()) {
        return Err(Error::Guard(format!("D = {disc} {flavor}: H2 torsion factor {f} does not divide 12")));
    }
    let mut warnings = Vec::new();
    if !prime_to_six_part_is_square(&hres.torsion[0]) {
        let msg = format!("D = {disc} {flavor}: H1 torsion order away from 2 and 3 is not a square");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(warnings)
}
