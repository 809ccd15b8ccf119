use std::fs;

use clap::Parser;

use bianchi_cli::{exit_code, run, scan, stats_csv, table_text, Cli, Figure, ScanOptions, TableFormat};
use bianchi_core::store::ResultsStore;
use bianchi_core::{Error, Flavor};

fn run_args(args: &[&str]) -> Result<String, Error> {
    let mut out = Vec::new();
    run(Cli::try_parse_from(args).expect("arguments parse"), &mut out)?;
    Ok(String::from_utf8(out).unwrap())
}

#[test]
fn compute_prints_the_table_row_and_writes_json() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r.json");
    let text = run_args(&["bianchi", "compute", "--disc", "-40", "--group", "gl2", "--out", out.to_str().unwrap()]).unwrap();
    assert_eq!(text.trim(), "(2) | 0 | (2)");
    let json = fs::read_to_string(out).unwrap();
    assert!(json.contains("\"disc\": -40"));
}

#[test]
fn invalid_discriminant_maps_to_exit_code_two() {
    let e = run_args(&["bianchi", "compute", "--disc", "-12"]).unwrap_err();
    assert_eq!(exit_code(&e), 2);
}

#[test]
fn scan_resumes_and_feeds_tables_and_figures() {
    let tmp = tempfile::tempdir().unwrap();
    let store = tmp.path().join("store");
    let opts = |to| ScanOptions { from: -3, to, flavors: vec![Flavor::Gl2, Flavor::Sl2], jobs: 2, cache: None, store: store.clone() };
    let first = scan(&opts(-20)).unwrap();
    assert_eq!((first.computed, first.skipped, first.failed), (16, 0, 0));
    let second = scan(&opts(-24)).unwrap();
    assert_eq!((second.computed, second.skipped), (4, 16));

    let paper = table_text(&store, TableFormat::Paper).unwrap();
    assert!(paper.lines().any(|l| l == "gl2\t-20\t(2)\t0\t()"), "{paper}");
    let csv = table_text(&store, TableFormat::Csv).unwrap();
    assert_eq!(csv.lines().count(), 21);
    let json: serde_json::Value = serde_json::from_str(&table_text(&store, TableFormat::Json).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 20);

    let fig = stats_csv(&store, Figure::GlCusp).unwrap();
    assert_eq!(fig.lines().next(), Some("abs_d,cusp_dim"));
    assert_eq!(fig.lines().count(), 11);
    let rohlfs = stats_csv(&store, Figure::Rohlfs).unwrap();
    assert!(rohlfs.lines().skip(1).all(|l| l.ends_with(",,external-formula")), "{rohlfs}");
    assert_eq!(ResultsStore::new(&store).records().unwrap().len(), 20);
}
