//! End-to-end runs of the commands against a temporary output directory.

use std::fs;

use psitest_core::analysis::{epsilon_expt, DEFAULT_Q_GRID, MEASURED_EPSILON};
use psitest_core::cli::*;
use psitest_core::config::RunConfig;
use psitest_core::io;
use psitest_core::state_space::delta0_closed_form;
use psitest_core::Error;

fn small_config(dir: &std::path::Path, extra: &str) -> RunConfig {
    let text = format!(
        "seed = 17\ndims = [3, 10]\noutput_dir = \"{}\"\ntrials_per_k = {{ 3 = 200000, 10 = 100000 }}\n\
         mc_samples_per_k = {{ 3 = 2000, 10 = 500 }}\nverify.models = 300\n{extra}",
        dir.display()
    );
    RunConfig::from_toml_str(&text, None).unwrap()
}

#[test]
fn simulate_is_reproducible_byte_for_byte() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let pa = cmd_simulate(&small_config(a.path(), ""), false).unwrap();
    let pb = cmd_simulate(&small_config(b.path(), ""), false).unwrap();
    assert_eq!(pa.len(), 2);
    for (x, y) in pa.iter().zip(&pb) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
    }
    let other = tempfile::tempdir().unwrap();
    let mut cfg = small_config(other.path(), "");
    cfg.seed = 18;
    let pc = cmd_simulate(&cfg, false).unwrap();
    assert_ne!(fs::read(&pa[0]).unwrap(), fs::read(&pc[0]).unwrap());
}

#[test]
fn ideal_apparatus_counts_give_zero_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(
        dir.path(),
        "apparatus.dark_rate_hz = 0.0\napparatus.extinction_db = inf\n",
    );
    for path in cmd_simulate(&cfg, false).unwrap() {
        let (counts, hash) = io::parse_counts(&io::read_text(&path).unwrap(), "t").unwrap();
        assert_eq!(hash, cfg.apparatus_for(counts.dim()).config_hash());
        assert_eq!(epsilon_expt(&counts).unwrap().value, 0.0);
    }
}

#[test]
fn records_agree_with_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), "");
    cfg.dims = vec![3];
    cfg.trials_per_k.insert(3, 5000);
    cmd_simulate(&cfg, true).unwrap();
    let (counts, _) = io::parse_counts(&io::read_text(&counts_path(dir.path(), 3)).unwrap(), "c").unwrap();
    let (d, _, records) = io::parse_records(&io::read_text(&records_path(dir.path(), 3)).unwrap(), "r").unwrap();
    assert_eq!(d, 3);
    assert_eq!(records.len(), 15_000);
    assert_eq!(
        psitest_core::apparatus::ClickCounts::from_records(3, &records).unwrap(),
        counts
    );
}

#[test]
fn mc_files_round_trip_and_collapse_without_noise() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let paths = cmd_mc_delta0(&cfg).unwrap();
    let first = fs::read(&paths[0]).unwrap();
    cmd_mc_delta0(&cfg).unwrap();
    assert_eq!(fs::read(&paths[0]).unwrap(), first);
    let dist = io::parse_distribution(&io::read_text(&paths[1]).unwrap(), "t").unwrap();
    assert_eq!((dist.dim(), dist.sample_count()), (10, 5000));
    assert_eq!(dist, distribution_for(&cfg, 10).unwrap());

    let quiet_dir = tempfile::tempdir().unwrap();
    let quiet = small_config(quiet_dir.path(), "phase.coherence_time_us = inf\n");
    let paths = cmd_mc_delta0(&quiet).unwrap();
    let dist = io::parse_distribution(&io::read_text(&paths[0]).unwrap(), "t").unwrap();
    let c = delta0_closed_form(3, 0.2).unwrap();
    assert!(dist.sorted_samples().iter().all(|&x| x == c));
}

#[test]
fn analyze_simulated_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let counts = cmd_simulate(&cfg, false).unwrap();
    let dists = cmd_mc_delta0(&cfg).unwrap();
    let inputs = AnalyzeInputs {
        epsilon: EpsilonSource::Counts(counts),
        distributions: dists,
    };
    let (result, files) = cmd_analyze(&cfg, &inputs).unwrap();
    assert_eq!(files.len(), 4);
    assert_eq!(result.exclusion.len(), 2 * DEFAULT_Q_GRID.len());
    assert_eq!(result.nophase.len(), 2);
    let back = io::parse_exclusion(&io::read_text(&dir.path().join(EXCLUSION_FILE)).unwrap(), "t").unwrap();
    assert_eq!(back, result.exclusion);
    let back = io::parse_exclusion(&io::read_text(&dir.path().join(FRONTIER_FILE)).unwrap(), "t").unwrap();
    assert_eq!(back, result.frontier);
    let eps = io::parse_epsilon_table(&io::read_text(&dir.path().join(EPSILON_FILE)).unwrap(), "t").unwrap();
    assert_eq!(eps.len(), 2);
    assert_eq!(eps[0].measured.value, result.epsilon[0].measured.value);

    let (report, _) = cmd_report(&cfg).unwrap();
    assert!(report.contains("## epsilon.csv") && report.contains("## frontier.csv"));
}

#[test]
fn measured_fixture_keeps_values_at_q_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::nominal(3);
    let mut cfg = cfg;
    cfg.output_dir = dir.path().to_path_buf();
    cfg.mc_samples_per_k = cfg.dims.iter().map(|&d| (d, 20_000 / d)).collect();
    let inputs = AnalyzeInputs {
        epsilon: EpsilonSource::BundledMeasured,
        distributions: Vec::new(),
    };
    cmd_analyze(&cfg, &inputs).unwrap();
    let rows = io::parse_exclusion(&io::read_text(&dir.path().join(NOPHASE_FILE)).unwrap(), "t").unwrap();
    assert_eq!(rows.len(), 5);
    for (row, (d, value, err)) in rows.iter().zip(MEASURED_EPSILON) {
        assert_eq!((row.dim, row.q), (d, 1.0));
        assert_eq!(row.epsilon_threshold, value);
        assert_eq!(row.epsilon_std_error, err);
        assert_eq!(row.delta0_threshold, delta0_closed_form(d, 0.2).unwrap());
    }
}

#[test]
fn analyze_rejects_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), "");
    let counts = cmd_simulate(&cfg, false).unwrap();
    let dists = cmd_mc_delta0(&cfg).unwrap();

    let mismatched = AnalyzeInputs {
        epsilon: EpsilonSource::Counts(vec![counts[0].clone()]),
        distributions: vec![dists[1].clone()],
    };
    assert!(matches!(cmd_analyze(&cfg, &mismatched), Err(Error::Domain(_))));

    let extra = AnalyzeInputs {
        epsilon: EpsilonSource::Counts(vec![counts[0].clone()]),
        distributions: dists.clone(),
    };
    assert!(matches!(cmd_analyze(&cfg, &extra), Err(Error::Domain(_))));

    cfg.q_grid.clear();
    let ok_inputs = AnalyzeInputs {
        epsilon: EpsilonSource::Counts(counts),
        distributions: dists,
    };
    assert!(matches!(cmd_analyze(&cfg, &ok_inputs), Err(Error::Domain(_))));

    let missing = AnalyzeInputs {
        epsilon: EpsilonSource::Counts(vec![dir.path().join("nope.txt")]),
        distributions: Vec::new(),
    };
    assert!(matches!(cmd_analyze(&cfg, &missing), Err(Error::Io { .. })));
}

#[test]
fn verify_nogo_report_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (ra, pa) = cmd_verify_nogo(&small_config(a.path(), "")).unwrap();
    let (_, pb) = cmd_verify_nogo(&small_config(b.path(), "")).unwrap();
    assert!(ra.passed());
    assert_eq!(ra.lossless_checked, 300);
    assert_eq!(ra.loophole.epsilon0, 0.0);
    assert!(ra.loophole.epsilon > 0.0);
    assert_eq!(fs::read(&pa[0]).unwrap(), fs::read(&pb[0]).unwrap());
    let text = io::read_text(&pa[0]).unwrap();
    assert!(text.contains("result=PASS") && text.contains("# K=3 d=3 L=4"));
    let fixture = io::parse_model(&io::read_text(&pa[1]).unwrap(), "t").unwrap();
    assert_eq!(
        fixture,
        psitest_core::ontic_models::detection_loophole_fixture(3).unwrap()
    );
}

#[test]
fn report_needs_tables() {
    let dir = tempfile::tempdir().unwrap();
    assert!(cmd_report(&small_config(dir.path(), "")).is_err());
}
