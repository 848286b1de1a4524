//! Preparation and detection chain: AOM pulse carving with finite
//! extinction, attenuation to `<n>` photons per train, and a detector made
//! of loss `eta`, photon-number resolution, and a first-click readout with
//! dark counts inside the keep-window of every bin.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::SeededRandomSource;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApparatusConfig {
    pub dim: usize,
    /// Mean photon number of the whole train after attenuation.
    pub mean_photons: f64,
    /// Overall detection efficiency.
    pub efficiency: f64,
    /// Dark-count rate, Hz.
    pub dark_rate: f64,
    /// Post-selection window inside each bin, s.
    pub keep_window: f64,
    /// Bin period, s.
    pub bin_period: f64,
    /// Linear power leakage into the blocked bin (1e-4 for 40 dB).
    pub extinction_power_ratio: f64,
}

impl ApparatusConfig {
    /// Nominal experimental values: `<n>` = 0.2, eta = 4 %, Dk = 3 Hz,
    /// T_p = 80 ns, 300 ns bins, 40 dB extinction.
    pub fn nominal(dim: usize) -> Self {
        Self {
            dim,
            mean_photons: 0.2,
            efficiency: 0.04,
            dark_rate: 3.0,
            keep_window: 80e-9,
            bin_period: 300e-9,
            extinction_power_ratio: 1e-4,
        }
    }

    /// No dark counts and perfect extinction.
    pub fn ideal(mut self) -> Self {
        self.dark_rate = 0.0;
        self.extinction_power_ratio = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::domain(format!("dimension must be at least 2, got {}", self.dim)));
        }
        if !(self.mean_photons >= 0.0) || !self.mean_photons.is_finite() {
            return Err(Error::domain(format!(
                "invalid mean photon number {}",
                self.mean_photons
            )));
        }
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::domain(format!("efficiency {} outside [0, 1]", self.efficiency)));
        }
        if !(self.dark_rate >= 0.0) || !self.dark_rate.is_finite() {
            return Err(Error::domain(format!("invalid dark-count rate {}", self.dark_rate)));
        }
        if !(self.keep_window > 0.0 && self.keep_window <= self.bin_period) {
            return Err(Error::domain(format!(
                "keep window {} must lie in (0, bin period {}]",
                self.keep_window, self.bin_period
            )));
        }
        if !(0.0..1.0).contains(&self.extinction_power_ratio) {
            return Err(Error::domain(format!(
                "extinction ratio {} outside [0, 1)",
                self.extinction_power_ratio
            )));
        }
        Ok(())
    }

    /// Probability-per-bin mean of dark counts, `Dk * T_p`.
    pub fn dark_count_mean(&self) -> f64 {
        self.dark_rate * self.keep_window
    }

    /// Short hex digest identifying the configuration in exported files.
    pub fn config_hash(&self) -> String {
        let canonical = format!(
            "d={};n={:e};eta={:e};dk={:e};tp={:e};tau={:e};ext={:e}",
            self.dim,
            self.mean_photons,
            self.efficiency,
            self.dark_rate,
            self.keep_window,
            self.bin_period,
            self.extinction_power_ratio
        );
        hex::encode(&Sha256::digest(canonical.as_bytes())[..8])
    }

    fn check_bin(&self, k: usize) -> Result<()> {
        if k >= self.dim {
            return Err(Error::domain(format!("bin {k} out of range for d={}", self.dim)));
        }
        Ok(())
    }
}

/// Mean photon number per bin when bin `k` is blocked. Leakage into the
/// blocked bin adds on top of the open bins; nothing is renormalized.
pub fn effective_intensities(config: &ApparatusConfig, k: usize) -> Result<Vec<f64>> {
    config.validate()?;
    config.check_bin(k)?;
    let open = config.mean_photons / (config.dim - 1) as f64;
    Ok((0..config.dim)
        .map(|j| {
            if j == k {
                open * config.extinction_power_ratio
            } else {
                open
            }
        })
        .collect())
}

/// Mean number of detector events per bin: thinned photons plus dark counts.
pub fn detection_means(config: &ApparatusConfig, k: usize) -> Result<Vec<f64>> {
    let dark = config.dark_count_mean();
    Ok(effective_intensities(config, k)?
        .into_iter()
        .map(|i| config.efficiency * i + dark)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    /// First bin (zero-based) with at least one photon or dark count.
    Bin(usize),
    NoClick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClickRecord {
    pub trial_id: u64,
    pub prepared_k: usize,
    pub outcome: Outcome,
}

/// One trial through the staged detector: loss, per-bin Poisson photon
/// numbers, per-bin Poisson dark counts, first-click readout.
pub fn simulate_trial<R: Rng + ?Sized>(config: &ApparatusConfig, k: usize, rng: &mut R) -> Result<Outcome> {
    let dark = config.dark_count_mean();
    for (j, intensity) in effective_intensities(config, k)?.into_iter().enumerate() {
        let photons = poisson(config.efficiency * intensity, rng);
        let darks = poisson(dark, rng);
        if photons + darks > 0 {
            return Ok(Outcome::Bin(j));
        }
    }
    Ok(Outcome::NoClick)
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}

/// Exact outcome law of [`simulate_trial`] for preparation `k`.
///
/// Bin `j` is the first click with probability
/// `exp(-sum_{i<j} m_i) (1 - exp(-m_j))`, where `m_j` is the detection mean.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    pub click: Vec<f64>,
    pub no_click: f64,
}

impl OutcomeDistribution {
    pub fn for_preparation(config: &ApparatusConfig, k: usize) -> Result<Self> {
        let means = detection_means(config, k)?;
        let mut survive = 0.0_f64;
        let click = means
            .iter()
            .map(|&m| {
                let p = (-survive).exp() * -(-m).exp_m1();
                survive += m;
                p
            })
            .collect();
        Ok(Self {
            click,
            no_click: (-survive).exp(),
        })
    }

    pub fn click_probability(&self) -> f64 {
        -(self.no_click.ln()).exp_m1()
    }

    fn sampler(&self) -> OutcomeSampler {
        let mut acc = 0.0;
        let cumulative: Vec<f64> = self
            .click
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let last_possible = self.click.iter().rposition(|&p| p > 0.0);
        OutcomeSampler {
            no_click: self.no_click,
            cumulative,
            last_possible,
        }
    }
}

struct OutcomeSampler {
    no_click: f64,
    cumulative: Vec<f64>,
    last_possible: Option<usize>,
}

impl OutcomeSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Outcome {
        let u: f64 = rng.random();
        if u < self.no_click {
            return Outcome::NoClick;
        }
        let v = u - self.no_click;
        // Strict comparison: a zero-probability bin never owns an interval.
        match self.cumulative.iter().position(|&c| v < c) {
            Some(j) => Outcome::Bin(j),
            None => self.last_possible.map_or(Outcome::NoClick, Outcome::Bin),
        }
    }
}

/// Click tallies `N(j, Q_k)` for every prepared `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClickCounts {
    dim: usize,
    counts: Vec<Vec<u64>>,
    no_clicks: Vec<u64>,
    trials_per_k: Vec<u64>,
}

impl ClickCounts {
    pub fn new(counts: Vec<Vec<u64>>, no_clicks: Vec<u64>) -> Result<Self> {
        let dim = counts.len();
        if dim < 2 {
            return Err(Error::domain(format!("dimension must be at least 2, got {dim}")));
        }
        if let Some(row) = counts.iter().find(|r| r.len() != dim) {
            return Err(Error::DimMismatch {
                left: dim,
                right: row.len(),
            });
        }
        if no_clicks.len() != dim {
            return Err(Error::DimMismatch {
                left: dim,
                right: no_clicks.len(),
            });
        }
        let trials_per_k = counts
            .iter()
            .zip(&no_clicks)
            .map(|(row, n)| row.iter().sum::<u64>() + n)
            .collect();
        Ok(Self {
            dim,
            counts,
            no_clicks,
            trials_per_k,
        })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            counts: vec![vec![0; dim]; dim],
            no_clicks: vec![0; dim],
            trials_per_k: vec![0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `counts()[k][j]` = clicks in bin `j` when state `k` was prepared.
    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn no_clicks(&self) -> &[u64] {
        &self.no_clicks
    }

    pub fn trials_per_k(&self) -> &[u64] {
        &self.trials_per_k
    }

    pub fn clicks_for(&self, k: usize) -> u64 {
        self.counts[k].iter().sum()
    }

    pub fn record(&mut self, k: usize, outcome: Outcome) {
        match outcome {
            Outcome::Bin(j) => self.counts[k][j] += 1,
            Outcome::NoClick => self.no_clicks[k] += 1,
        }
        self.trials_per_k[k] += 1;
    }

    pub fn from_records(dim: usize, records: &[ClickRecord]) -> Result<Self> {
        let mut out = Self::zeros(dim);
        for r in records {
            if r.prepared_k >= dim || matches!(r.outcome, Outcome::Bin(j) if j >= dim) {
                return Err(Error::domain(format!("record {} out of range for d={dim}", r.trial_id)));
            }
            out.record(r.prepared_k, r.outcome);
        }
        Ok(out)
    }

    /// Element-wise sum; merging is associative and commutative.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        let add = |a: &[u64], b: &[u64]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>();
        Ok(Self {
            dim: self.dim,
            counts: self.counts.iter().zip(&other.counts).map(|(a, b)| add(a, b)).collect(),
            no_clicks: add(&self.no_clicks, &other.no_clicks),
            trials_per_k: add(&self.trials_per_k, &other.trials_per_k),
        })
    }
}

/// Trial `t` of preparation `k` uses stream `k` of `rng`; trial ids run
/// `k * trials_per_k + t`.
fn trials_for_k(
    config: &ApparatusConfig,
    k: usize,
    trials_per_k: u64,
    rng: &SeededRandomSource,
    mut sink: impl FnMut(u64, Outcome),
) -> Result<()> {
    let sampler = OutcomeDistribution::for_preparation(config, k)?.sampler();
    let mut r = rng.child(k as u64).rng();
    for t in 0..trials_per_k {
        sink(k as u64 * trials_per_k + t, sampler.sample(&mut r));
    }
    Ok(())
}

/// Runs `trials_per_k` trains for every prepared `k` and tallies clicks.
///
/// Trials are drawn from the exact outcome law of the staged detector (see
/// [`OutcomeDistribution`]), which costs one uniform draw per trial.
pub fn run_experiment(config: &ApparatusConfig, trials_per_k: u64, rng: &SeededRandomSource) -> Result<ClickCounts> {
    config.validate()?;
    if trials_per_k == 0 {
        return Err(Error::domain("trials_per_k must be at least 1"));
    }
    let rows: Vec<(Vec<u64>, u64)> = (0..config.dim)
        .into_par_iter()
        .map(|k| {
            let mut row = vec![0u64; config.dim];
            let mut none = 0u64;
            trials_for_k(config, k, trials_per_k, rng, |_, o| match o {
                Outcome::Bin(j) => row[j] += 1,
                Outcome::NoClick => none += 1,
            })?;
            Ok((row, none))
        })
        .collect::<Result<_>>()?;
    let (counts, no_clicks) = rows.into_iter().unzip();
    ClickCounts::new(counts, no_clicks)
}

/// Same trials as [`run_experiment`], kept as individual records.
pub fn run_experiment_records(
    config: &ApparatusConfig,
    trials_per_k: u64,
    rng: &SeededRandomSource,
) -> Result<Vec<ClickRecord>> {
    config.validate()?;
    let mut out = Vec::with_capacity(config.dim * trials_per_k as usize);
    for k in 0..config.dim {
        trials_for_k(config, k, trials_per_k, rng, |trial_id, outcome| {
            out.push(ClickRecord {
                trial_id,
                prepared_k: k,
                outcome,
            })
        })?;
    }
    Ok(out)
}

/// `p1 / P(clk)` for Poisson photon statistics without dark counts:
/// `<n> e^{-<n>} / (1 - e^{-<n>})`.
pub fn single_photon_fraction(mean_photons: f64) -> Result<f64> {
    if !(mean_photons > 0.0) {
        return Err(Error::domain(format!(
            "mean photon number must be positive, got {mean_photons}"
        )));
    }
    Ok(mean_photons / mean_photons.exp_m1())
}
