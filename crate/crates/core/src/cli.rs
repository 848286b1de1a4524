//! Command implementations behind the `psitest` binary. Each command reads a
//! [`RunConfig`], writes plain-text files under `output_dir` and returns
//! what it wrote so tests can drive it without a subprocess.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::analysis::{
    epsilon_expt, exclusion_region, expected_epsilon, noiseless_point, pareto_frontier, EpsilonEstimate, ExclusionPoint,
};
use crate::apparatus::{run_experiment, run_experiment_records};
use crate::config::{RunConfig, VerifyOptions, MEASURED_EPSILON_CSV};
use crate::error::{Error, Result};
use crate::io::{self, EpsilonRow};
use crate::ontic_models::{
    detection_loophole_fixture, overlap_epsilon, predicted_lhs, predicted_lhs_conditioned, random_model, OverlapReport,
};
use crate::phase_model::{delta0_distribution, Delta0Distribution};
use crate::rng::SeededRandomSource;

pub const EPSILON_FILE: &str = "epsilon.csv";
pub const EXCLUSION_FILE: &str = "exclusion.csv";
pub const FRONTIER_FILE: &str = "frontier.csv";
pub const NOPHASE_FILE: &str = "nophase.csv";
pub const NOGO_FILE: &str = "verify_nogo.txt";
pub const LOOPHOLE_FILE: &str = "loophole_model.txt";
pub const REPORT_FILE: &str = "report.txt";

pub fn counts_path(dir: &Path, d: usize) -> PathBuf {
    dir.join(format!("counts_d{d}.txt"))
}

pub fn records_path(dir: &Path, d: usize) -> PathBuf {
    dir.join(format!("records_d{d}.txt"))
}

pub fn distribution_path(dir: &Path, d: usize) -> PathBuf {
    dir.join(format!("delta0_d{d}.txt"))
}

/// Simulates every configured dimension and writes one counts file per `d`.
/// With `with_records`, the individual trials are written as well.
pub fn cmd_simulate(cfg: &RunConfig, with_records: bool) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for &d in &cfg.dims {
        let apparatus = cfg.apparatus_for(d);
        let trials = cfg.trials_for(d)?;
        let counts = run_experiment(&apparatus, trials, &cfg.simulate_source(d))?;
        let path = counts_path(&cfg.output_dir, d);
        io::write_text(&path, &io::write_counts(&counts, &apparatus.config_hash()))?;
        written.push(path);
        if with_records {
            let records = run_experiment_records(&apparatus, trials, &cfg.simulate_source(d))?;
            let path = records_path(&cfg.output_dir, d);
            io::write_text(&path, &io::write_records(d, &apparatus.config_hash(), &records))?;
            written.push(path);
        }
    }
    Ok(written)
}

pub fn distribution_for(cfg: &RunConfig, d: usize) -> Result<Delta0Distribution> {
    delta0_distribution(
        &cfg.phase,
        d,
        cfg.mean_photons,
        cfg.mc_samples_for(d),
        &cfg.mc_source(d),
    )
}

/// Writes one delta0 distribution file per configured `d`.
pub fn cmd_mc_delta0(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.dims
        .iter()
        .map(|&d| {
            let path = distribution_path(&cfg.output_dir, d);
            io::write_text(&path, &io::write_distribution(&distribution_for(cfg, d)?))?;
            Ok(path)
        })
        .collect()
}

/// Where `analyze` takes its epsilon estimates from.
#[derive(Debug, Clone, PartialEq)]
pub enum EpsilonSource {
    /// Counts files written by `simulate`.
    Counts(Vec<PathBuf>),
    /// A `d,epsilon,err` table.
    Measured(PathBuf),
    /// The bundled measured table.
    BundledMeasured,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeInputs {
    pub epsilon: EpsilonSource,
    /// Distribution files; when empty, distributions are computed from the
    /// configuration.
    pub distributions: Vec<PathBuf>,
}

/// All tables produced by `analyze`.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub epsilon: Vec<EpsilonRow>,
    pub exclusion: Vec<ExclusionPoint>,
    pub frontier: Vec<ExclusionPoint>,
    pub nophase: Vec<ExclusionPoint>,
}

/// Pure analysis over in-memory inputs. Every estimate needs a distribution
/// of the same dimension and vice versa.
pub fn analyze(
    cfg: &RunConfig,
    estimates: &[(usize, EpsilonEstimate)],
    distributions: &[Delta0Distribution],
) -> Result<Analysis> {
    let by_dim: BTreeMap<usize, &Delta0Distribution> = distributions.iter().map(|x| (x.dim(), x)).collect();
    if by_dim.len() != distributions.len() {
        return Err(Error::domain("two distributions share a dimension"));
    }
    let est_dims: Vec<usize> = estimates.iter().map(|(d, _)| *d).collect();
    if let Some(d) = est_dims.iter().find(|d| !by_dim.contains_key(d)) {
        return Err(Error::domain(format!("no delta0 distribution for d={d}")));
    }
    if let Some(d) = by_dim.keys().find(|d| !est_dims.contains(d)) {
        return Err(Error::domain(format!("no epsilon estimate for d={d}")));
    }

    let mut out = Analysis {
        epsilon: Vec::new(),
        exclusion: Vec::new(),
        frontier: Vec::new(),
        nophase: Vec::new(),
    };
    for (d, est) in estimates {
        out.epsilon.push(EpsilonRow {
            dim: *d,
            measured: est.clone(),
            expected: expected_epsilon(&cfg.noise_params(*d), *d)?,
        });
        out.exclusion.extend(exclusion_region(est, by_dim[d], &cfg.q_grid)?);
        out.nophase.push(noiseless_point(est, *d, cfg.mean_photons)?);
    }
    out.frontier = pareto_frontier(&out.exclusion)?;
    Ok(out)
}

fn load_estimates(source: &EpsilonSource) -> Result<Vec<(usize, EpsilonEstimate)>> {
    match source {
        EpsilonSource::Counts(paths) => {
            if paths.is_empty() {
                return Err(Error::domain("no counts files given"));
            }
            paths
                .iter()
                .map(|p| {
                    let (counts, _) = io::parse_counts(&io::read_text(p)?, &p.display().to_string())?;
                    Ok((counts.dim(), epsilon_expt(&counts)?))
                })
                .collect()
        }
        EpsilonSource::Measured(p) => io::parse_measured_epsilon(&io::read_text(p)?, &p.display().to_string()),
        EpsilonSource::BundledMeasured => io::parse_measured_epsilon(MEASURED_EPSILON_CSV, "measured_epsilon.csv"),
    }
}

/// Reads the inputs, runs [`analyze`] and writes the four tables.
pub fn cmd_analyze(cfg: &RunConfig, inputs: &AnalyzeInputs) -> Result<(Analysis, Vec<PathBuf>)> {
    let estimates = load_estimates(&inputs.epsilon)?;
    let distributions = if inputs.distributions.is_empty() {
        estimates
            .iter()
            .map(|(d, _)| distribution_for(cfg, *d))
            .collect::<Result<Vec<_>>>()?
    } else {
        inputs
            .distributions
            .iter()
            .map(|p| io::parse_distribution(&io::read_text(p)?, &p.display().to_string()))
            .collect::<Result<Vec<_>>>()?
    };
    let result = analyze(cfg, &estimates, &distributions)?;
    let dir = &cfg.output_dir;
    let files = [
        (EPSILON_FILE, io::write_epsilon_table(&result.epsilon)),
        (EXCLUSION_FILE, io::write_exclusion(&result.exclusion)),
        (FRONTIER_FILE, io::write_exclusion(&result.frontier)),
        (NOPHASE_FILE, io::write_exclusion(&result.nophase)),
    ];
    let mut written = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        io::write_text(&path, &text)?;
        written.push(path);
    }
    Ok((result, written))
}

/// Outcome of the random-model check of both overlap bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct NogoReport {
    pub seed: u64,
    /// Lossless models checked against the unconditioned bound.
    pub lossless_checked: usize,
    pub lossless_violations: usize,
    /// Smallest `sum_k P(k|Q_k) - epsilon` seen.
    pub lossless_min_slack: f64,
    /// Models (lossless and lossy) checked against the click-conditioned bound.
    pub conditioned_checked: usize,
    pub conditioned_violations: usize,
    pub conditioned_min_slack: f64,
    pub loophole: OverlapReport,
    pub loophole_dim: usize,
}

impl NogoReport {
    pub fn passed(&self) -> bool {
        self.lossless_violations == 0 && self.conditioned_violations == 0
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("# verify-nogo seed={} tolerance=1e-12\n", self.seed);
        writeln!(
            s,
            "lossless_bound checked={} violations={} min_slack={:e}",
            self.lossless_checked, self.lossless_violations, self.lossless_min_slack
        )
        .unwrap();
        writeln!(
            s,
            "click_conditioned_bound checked={} violations={} min_slack={:e}",
            self.conditioned_checked, self.conditioned_violations, self.conditioned_min_slack
        )
        .unwrap();
        let l = &self.loophole;
        writeln!(
            s,
            "loophole_fixture d={} epsilon={} epsilon0={} lhs_sum={} lhs_sum_clk={}",
            self.loophole_dim, l.epsilon, l.epsilon0, l.lhs_sum, l.lhs_sum_clk
        )
        .unwrap();
        writeln!(s, "result={}", if self.passed() { "PASS" } else { "FAIL" }).unwrap();
        s
    }
}

const BOUND_TOLERANCE: f64 = 1e-12;
const LOOPHOLE_DIM: usize = 3;

struct PairCheck {
    lossless_slack: f64,
    conditioned_slack: [f64; 2],
}

fn check_pair(opts: &VerifyOptions, src: SeededRandomSource) -> Result<PairCheck> {
    use rand::Rng;
    let mut rng = src.rng();
    let d = rng.random_range(2..=opts.max_dim);
    let l = rng.random_range(1..=opts.max_ontic);
    let lossless = random_model(d, d, l, 0.0, &mut rng)?;
    let lossy = random_model(d, d, l, opts.no_click_mass, &mut rng)?;
    let slack = |r: OverlapReport| r.lhs_sum_clk - r.epsilon0;
    Ok(PairCheck {
        lossless_slack: predicted_lhs(&lossless)? - overlap_epsilon(&lossless),
        conditioned_slack: [
            slack(predicted_lhs_conditioned(&lossless)?),
            slack(predicted_lhs_conditioned(&lossy)?),
        ],
    })
}

/// Draws `opts.models` pairs of random models with `K = d`: a lossless one,
/// checked against both bounds, and one with no-click mass, checked against
/// the click-conditioned bound.
pub fn verify_nogo(opts: &VerifyOptions, src: &SeededRandomSource) -> Result<NogoReport> {
    if opts.max_dim < 2 || opts.max_ontic == 0 || !(0.0..1.0).contains(&opts.no_click_mass) {
        return Err(Error::domain("invalid model-generator options"));
    }
    let checks: Vec<PairCheck> = (0..opts.models as u64)
        .into_par_iter()
        .map(|i| check_pair(opts, src.child(i)))
        .collect::<Result<_>>()?;
    let loophole = predicted_lhs_conditioned(&detection_loophole_fixture(LOOPHOLE_DIM)?)?;
    let conditioned: Vec<f64> = checks.iter().flat_map(|c| c.conditioned_slack).collect();
    let min = |xs: &mut dyn Iterator<Item = f64>| xs.fold(f64::INFINITY, f64::min);
    Ok(NogoReport {
        seed: src.seed,
        lossless_checked: checks.len(),
        lossless_violations: checks.iter().filter(|c| c.lossless_slack < -BOUND_TOLERANCE).count(),
        lossless_min_slack: min(&mut checks.iter().map(|c| c.lossless_slack)),
        conditioned_checked: conditioned.len(),
        conditioned_violations: conditioned.iter().filter(|s| **s < -BOUND_TOLERANCE).count(),
        conditioned_min_slack: min(&mut conditioned.iter().copied()),
        loophole,
        loophole_dim: LOOPHOLE_DIM,
    })
}

/// Runs [`verify_nogo`] and writes the report plus the loophole fixture.
pub fn cmd_verify_nogo(cfg: &RunConfig) -> Result<(NogoReport, Vec<PathBuf>)> {
    let report = verify_nogo(&cfg.verify, &cfg.verify_source())?;
    let fixture = detection_loophole_fixture(LOOPHOLE_DIM)?;
    let mut text = report.to_text();
    text.push_str("# loophole fixture follows\n");
    text.push_str(&io::write_model(&fixture));
    let report_path = cfg.output_dir.join(NOGO_FILE);
    let fixture_path = cfg.output_dir.join(LOOPHOLE_FILE);
    io::write_text(&report_path, &text)?;
    io::write_text(&fixture_path, &io::write_model(&fixture))?;
    Ok((report, vec![report_path, fixture_path]))
}

/// Concatenates the tables found in `output_dir` into one report.
pub fn cmd_report(cfg: &RunConfig) -> Result<(String, PathBuf)> {
    let mut out = String::new();
    let mut found = 0;
    for name in [EPSILON_FILE, NOPHASE_FILE, FRONTIER_FILE, EXCLUSION_FILE, NOGO_FILE] {
        let path = cfg.output_dir.join(name);
        if !path.exists() {
            continue;
        }
        found += 1;
        writeln!(out, "## {name}").unwrap();
        out.push_str(&io::read_text(&path)?);
        out.push('\n');
    }
    if found == 0 {
        return Err(Error::domain(format!(
            "no tables in {}; run analyze or verify-nogo first",
            cfg.output_dir.display()
        )));
    }
    let path = cfg.output_dir.join(REPORT_FILE);
    io::write_text(&path, &out)?;
    Ok((out, path))
}
