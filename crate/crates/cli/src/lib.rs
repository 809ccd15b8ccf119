//! Command-line driver: single computations, resumable range scans, tables and figure data.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use bianchi_core::arith::rohlfs_lower_bound;
use bianchi_core::pipeline::{compute, Outcome};
use bianchi_core::qfield::fundamental_discriminants;
use bianchi_core::report::{format_factors, Exponent};
use bianchi_core::store::{index_csv, CacheDir, Failure, ResultsStore, CACHE_ENV};
use bianchi_core::{Discriminant, Error, Flavor, ReportRecord, Result};

#[derive(Debug, Parser)]
#[command(name = "bianchi", version, about = "Voronoi homology of Bianchi groups")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Group {
    Gl2,
    Sl2,
    Both,
}

impl Group {
    pub fn flavors(self) -> Vec<Flavor> {
        match self {
            Group::Gl2 => vec![Flavor::Gl2],
            Group::Sl2 => vec![Flavor::Sl2],
            Group::Both => vec![Flavor::Gl2, Flavor::Sl2],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Paper,
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    GlTorsion,
    SlTorsion,
    GlCusp,
    SlCusp,
    Rohlfs,
    Zfactors,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute one discriminant and print its table row.
    Compute {
        #[arg(long, allow_hyphen_values = true)]
        disc: i64,
        #[arg(long, value_enum, default_value = "gl2")]
        group: Group,
        /// Complex cache directory.
        #[arg(long, env = CACHE_ENV)]
        cache: Option<PathBuf>,
        /// Write the JSON record here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also store the record in this results store.
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Compute every fundamental discriminant from `--from` down to `--to`.
    Scan {
        #[arg(long, allow_hyphen_values = true, default_value_t = -3)]
        from: i64,
        #[arg(long, allow_hyphen_values = true)]
        to: i64,
        #[arg(long, value_enum, default_value = "both")]
        group: Group,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, env = CACHE_ENV)]
        cache: Option<PathBuf>,
        #[arg(long, default_value = "bianchi-results")]
        store: PathBuf,
    },
    /// Print the stored results.
    Table {
        #[arg(long, value_enum, default_value = "paper")]
        format: TableFormat,
        #[arg(long, default_value = "bianchi-results")]
        store: PathBuf,
    },
    /// Print the data behind one figure as CSV.
    Stats {
        #[arg(long, value_enum)]
        figure: Figure,
        #[arg(long, default_value = "bianchi-results")]
        store: PathBuf,
    },
}

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonNegativeDiscriminant(_) | Error::NotFundamental(_) => 2,
        Error::CacheCorrupt(_) => 3,
        Error::Guard(_) | Error::Inconsistent(_) | Error::NotAComplex => 4,
        _ => 1,
    }
}

/// Options of a range scan.
#[derive(Clone, Debug)]
pub struct ScanOptions {
    pub from: i64,
    pub to: i64,
    pub flavors: Vec<Flavor>,
    pub jobs: usize,
    pub cache: Option<PathBuf>,
    pub store: PathBuf,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScanSummary {
    pub computed: usize,
    pub skipped: usize,
    pub failed: usize,
}

fn save_outcome(store: &ResultsStore, o: &Outcome) -> Result<()> {
    store.save(&o.record)?;
    store.save_telemetry(&o.telemetry)
}

/// Runs a scan. Discriminants with a stored record are skipped, so an interrupted scan
/// resumes where it stopped. Failures are recorded and do not stop the scan.
pub fn scan(opts: &ScanOptions) -> Result<ScanSummary> {
    if opts.from < opts.to {
        return Err(Error::Parse(format!("--from {} must not be below --to {}", opts.from, opts.to)));
    }
    let store = ResultsStore::new(&opts.store);
    let cache = opts.cache.as_ref().map(CacheDir::new);
    let work: Vec<(i64, Flavor)> = fundamental_discriminants(opts.from, opts.to)
        .into_iter()
        .flat_map(|d| opts.flavors.iter().map(move |&f| (d.value(), f)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| Error::Guard(format!("thread pool: {e}")))?;
    let computed = AtomicUsize::new(0);
    let skipped = AtomicUsize::new(0);
    let failed = AtomicUsize::new(0);
    let io: Result<()> = pool.install(|| {
        work.par_iter().try_for_each(|&(d, f)| {
            if store.load(d, f)?.is_some() {
                skipped.fetch_add(1, Ordering::Relaxed);
                return Ok(());
            }
            match compute(d, f, cache.as_ref()) {
                Ok(o) => {
                    log::info!("D = {d} {f}: {} in {:.2}s", o.record.paper_row(), o.telemetry.total_s);
                    save_outcome(&store, &o)?;
                    computed.fetch_add(1, Ordering::Relaxed);
                }
                Err(e) => {
                    log::error!("D = {d} {f}: {e}");
                    store.save_failure(&Failure { disc: d, flavor: f, message: e.to_string() })?;
                    failed.fetch_add(1, Ordering::Relaxed);
                }
            }
            Ok(())
        })
    });
    io?;
    store.write_index()?;
    Ok(ScanSummary {
        computed: computed.into_inner(),
        skipped: skipped.into_inner(),
        failed: failed.into_inner(),
    })
}

/// Stored results in the requested format. The paper format is tab separated:
/// group, discriminant, class group, cuspidal dimension, torsion of `H1`.
pub fn table_text(store: &Path, format: TableFormat) -> Result<String> {
    let records = ResultsStore::new(store).records()?;
    match format {
        TableFormat::Paper => {
            let mut s = String::from("# flavor\tD\tclass_group\tcusp\ttorsion_H1\n");
            for r in &records {
                s.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\n",
                    r.flavor,
                    r.disc,
                    format_factors(&r.class_group, Exponent::Bare),
                    r.cusp_dim,
                    format_factors(&r.torsion1, Exponent::Braced)
                ));
            }
            Ok(s)
        }
        TableFormat::Csv => index_csv(&records),
        TableFormat::Json => {
            let mut s = serde_json::to_string_pretty(&records)?;
            s.push('\n');
            Ok(s)
        }
    }
}

/// CSV with a header row and one line per stored discriminant of the relevant group.
pub fn stats_csv(store: &Path, figure: Figure) -> Result<String> {
    let records = ResultsStore::new(store).records()?;
    let of = |f: Flavor| records.iter().filter(move |r| r.flavor == f);
    let mut s = String::new();
    let mut rows = |header: &str, it: Vec<String>| {
        s.push_str(header);
        s.push('\n');
        for line in it {
            s.push_str(&line);
            s.push('\n');
        }
    };
    let abs = |r: &ReportRecord| r.disc.unsigned_abs();
    match figure {
        Figure::GlTorsion => rows("abs_d,logtor", of(Flavor::Gl2).map(|r| format!("{},{}", abs(r), r.stats.logtor)).collect()),
        Figure::SlTorsion => rows("abs_d,logtor", of(Flavor::Sl2).map(|r| format!("{},{}", abs(r), r.stats.logtor)).collect()),
        Figure::GlCusp => rows("abs_d,cusp_dim", of(Flavor::Gl2).map(|r| format!("{},{}", abs(r), r.cusp_dim)).collect()),
        Figure::SlCusp => rows("abs_d,cusp_dim", of(Flavor::Sl2).map(|r| format!("{},{}", abs(r), r.cusp_dim)).collect()),
        Figure::Zfactors => rows("abs_d,z_d", of(Flavor::Gl2).map(|r| format!("{},{}", abs(r), r.stats.z_d)).collect()),
        Figure::Rohlfs => rows(
            "abs_d,cusp_dim,bound,source",
            of(Flavor::Sl2)
                .map(|r| {
                    let bound = Discriminant::new(r.disc)
                        .ok()
                        .and_then(rohlfs_lower_bound)
                        .map(|b| b.to_string())
                        .unwrap_or_default();
                    format!("{},{},{bound},external-formula", abs(r), r.cusp_dim)
                })
                .collect(),
        ),
    }
    Ok(s)
}

/// Executes a parsed command line, writing human output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Compute { disc, group, cache, out: out_file, store } => {
            let cache = cache.map(CacheDir::new);
            for f in group.flavors() {
                let o = compute(disc, f, cache.as_ref())?;
                if let Some(path) = &out_file {
                    let path = if group == Group::Both { path.with_extension(format!("{f}.json")) } else { path.clone() };
                    std::fs::write(path, o.record.to_json()?)?;
                }
                if let Some(root) = &store {
                    let s = ResultsStore::new(root);
                    save_outcome(&s, &o)?;
                    s.write_index()?;
                }
                for w in &o.record.warnings {
                    writeln!(out, "warning: {w}")?;
                }
                writeln!(out, "{}", o.record.paper_row())?;
            }
        }
        Command::Scan { from, to, group, jobs, cache, store } => {
            let s = scan(&ScanOptions { from, to, flavors: group.flavors(), jobs, cache, store })?;
            writeln!(out, "computed {}, already present {}, failed {}", s.computed, s.skipped, s.failed)?;
            if s.failed > 0 {
                return Err(Error::Guard(format!("{} discriminants failed", s.failed)));
            }
        }
        Command::Table { format, store } => write!(out, "{}", table_text(&store, format)?)?,
        Command::Stats { figure, store } => write!(out, "{}", stats_csv(&store, figure)?)?,
    }
    Ok(())
}
