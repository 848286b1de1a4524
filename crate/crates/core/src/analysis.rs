//! From click counts to excluded regions of the (delta0, epsilon) plane.

use crate::apparatus::{ApparatusConfig, ClickCounts, OutcomeDistribution};
use crate::error::{Error, Result};
use crate::ontic_models::{predicted_lhs_conditioned, DiscreteOnticModel};
use crate::phase_model::Delta0Distribution;
use crate::state_space::delta0_closed_form;

/// The 25 quantile levels swept for the exclusion plot.
pub const DEFAULT_Q_GRID: [f64; 25] = [
    0.09, 0.10, 0.11, 0.12, 0.13, 0.14, 0.15, 0.16, 0.17, 0.18, 0.19, 0.20, 0.22, 0.24, 0.26, 0.28, 0.30, 0.35, 0.40,
    0.45, 0.50, 0.60, 0.70, 0.80, 0.90,
];

/// Measured `epsilon_expt` and its statistical error per dimension, as
/// measured in the time-bin experiment: `(d, value, error)`.
pub const MEASURED_EPSILON: [(usize, f64, f64); 5] = [
    (3, 0.26e-3, 0.05e-3),
    (10, 0.45e-3, 0.07e-3),
    (30, 1.27e-3, 0.18e-3),
    (50, 1.62e-3, 0.23e-3),
    (80, 1.66e-3, 0.28e-3),
];

/// Label attached to every exported standard error.
pub const ERROR_MODEL: &str = "binomial per-k proportions, independent across k, summed in quadrature";

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonEstimate {
    pub value: f64,
    pub std_error: f64,
    /// `N(k,Q_k) / sum_j N(j,Q_k)` for each `k`.
    pub per_k_terms: Vec<f64>,
}

impl EpsilonEstimate {
    /// An estimate known only by value and error (e.g. a measured table).
    pub fn from_summary(value: f64, std_error: f64) -> Self {
        Self {
            value,
            std_error,
            per_k_terms: vec![value],
        }
    }
}

/// `sum_k N(k,Q_k) / sum_j N(j,Q_k)`.
///
/// The error treats each term as an independent binomial proportion `p_k`
/// over `M_k` clicks: `sqrt(sum_k p_k (1 - p_k) / M_k)`.
pub fn epsilon_expt(counts: &ClickCounts) -> Result<EpsilonEstimate> {
    let mut per_k_terms = Vec::with_capacity(counts.dim());
    let mut variance = 0.0;
    for (k, row) in counts.counts().iter().enumerate() {
        let clicks: u64 = row.iter().sum();
        if clicks == 0 {
            return Err(Error::NoClicks { k });
        }
        let p = row[k] as f64 / clicks as f64;
        variance += p * (1.0 - p) / clicks as f64;
        per_k_terms.push(p);
    }
    Ok(EpsilonEstimate {
        value: per_k_terms.iter().sum(),
        std_error: variance.sqrt(),
        per_k_terms,
    })
}

/// The value `epsilon_expt` converges to for a simulated apparatus, from its
/// exact outcome law, with the sampling error expected at `trials_per_k`
/// trains per `k`.
///
/// Unlike [`epsilon_expt`], the error does not collapse to zero when no
/// forbidden click happens to be drawn, so it is the right yardstick for
/// comparing a finite simulation with a prediction.
pub fn simulated_epsilon(config: &ApparatusConfig, trials_per_k: u64) -> Result<EpsilonEstimate> {
    if trials_per_k == 0 {
        return Err(Error::domain("trials_per_k must be at least 1"));
    }
    let mut per_k_terms = Vec::with_capacity(config.dim);
    let mut variance = 0.0;
    for k in 0..config.dim {
        let law = OutcomeDistribution::for_preparation(config, k)?;
        let clk = law.click_probability();
        if clk <= 0.0 {
            return Err(Error::NoClicks { k });
        }
        let p = law.click[k] / clk;
        variance += p * (1.0 - p) / (clk * trials_per_k as f64);
        per_k_terms.push(p);
    }
    Ok(EpsilonEstimate {
        value: per_k_terms.iter().sum(),
        std_error: variance.sqrt(),
        per_k_terms,
    })
}

/// Apparatus parameters entering the expected `epsilon_expt`, with the
/// uncertainties that set its band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModelParams {
    pub dark_rate: f64,
    pub dark_rate_err: f64,
    pub keep_window: f64,
    /// `eta <n>`, the click probability per train.
    pub detection_probability: f64,
    pub detection_probability_rel_err: f64,
    pub extinction_db: f64,
    pub extinction_db_err: f64,
}

impl NoiseModelParams {
    /// Dk = 3 +- 1 Hz, T_p = 80 ns, eta <n> = 0.008 +- 5 %, Ext = 40 +- 1.5 dB.
    pub fn nominal() -> Self {
        Self {
            dark_rate: 3.0,
            dark_rate_err: 1.0,
            keep_window: 80e-9,
            detection_probability: 0.04 * 0.2,
            detection_probability_rel_err: 0.05,
            extinction_db: 40.0,
            extinction_db_err: 1.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.dark_rate,
            self.dark_rate_err,
            self.keep_window,
            self.detection_probability,
            self.detection_probability_rel_err,
            self.extinction_db_err,
        ];
        if all.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) || self.extinction_db.is_nan() {
            return Err(Error::domain("noise parameters must be finite and non-negative"));
        }
        if !(self.detection_probability > 0.0) || self.detection_probability_rel_err >= 1.0 {
            return Err(Error::domain("detection probability must be positive"));
        }
        Ok(())
    }
}

/// `10^(-dB/10)`. Infinite attenuation maps to zero leakage.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

/// `(Dk T_p / (eta <n>)) d + Ext d / (d - 1)`.
pub fn expected_epsilon_value(
    dark_rate: f64,
    keep_window: f64,
    detection_probability: f64,
    extinction_power_ratio: f64,
    d: usize,
) -> f64 {
    let dn = d as f64;
    dark_rate * keep_window / detection_probability * dn + extinction_power_ratio * dn / (dn - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonBand {
    pub central: f64,
    pub low: f64,
    pub high: f64,
}

impl EpsilonBand {
    pub fn contains(&self, x: f64) -> bool {
        (self.low..=self.high).contains(&x)
    }

    /// True if `[x - err, x + err]` meets the band.
    pub fn overlaps(&self, x: f64, err: f64) -> bool {
        x + err >= self.low && x - err <= self.high
    }
}

/// Expected `epsilon_expt` at dimension `d`, with the band spanned by the
/// worst-case corners of the parameter uncertainties.
pub fn expected_epsilon(params: &NoiseModelParams, d: usize) -> Result<EpsilonBand> {
    if d < 2 {
        return Err(Error::domain(format!("dimension must be at least 2, got {d}")));
    }
    params.validate()?;
    let p = params.detection_probability;
    let dp = p * params.detection_probability_rel_err;
    let eval = |dk: f64, prob: f64, db: f64| expected_epsilon_value(dk, params.keep_window, prob, db_to_linear(db), d);
    Ok(EpsilonBand {
        central: eval(params.dark_rate, p, params.extinction_db),
        low: eval(
            (params.dark_rate - params.dark_rate_err).max(0.0),
            p + dp,
            params.extinction_db + params.extinction_db_err,
        ),
        high: eval(
            params.dark_rate + params.dark_rate_err,
            p - dp,
            params.extinction_db - params.extinction_db_err,
        ),
    })
}

/// `epsilon_expt / q`: all forbidden clicks charged to the fraction `q` of
/// trains that lie within the distance threshold.
pub fn worst_case_epsilon(estimate: &EpsilonEstimate, q: f64) -> Result<EpsilonEstimate> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::domain(format!("q must lie in (0, 1], got {q}")));
    }
    Ok(EpsilonEstimate {
        value: estimate.value / q,
        std_error: estimate.std_error / q,
        per_k_terms: estimate.per_k_terms.iter().map(|t| t / q).collect(),
    })
}

/// One corner of an excluded region: models with `delta0 >= delta0_threshold`
/// and `epsilon > epsilon_threshold` are ruled out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExclusionPoint {
    pub dim: usize,
    pub q: f64,
    pub delta0_threshold: f64,
    pub epsilon_threshold: f64,
    pub epsilon_std_error: f64,
}

impl ExclusionPoint {
    /// Pure threshold test at central values.
    pub fn excludes(&self, delta0: f64, epsilon: f64) -> bool {
        delta0 >= self.delta0_threshold && epsilon > self.epsilon_threshold
    }

    /// Whether a model whose prepared states sit at distance `delta0` is ruled
    /// out, judged by its click-conditioned overlap.
    pub fn excludes_model(&self, model: &DiscreteOnticModel, delta0: f64) -> Result<bool> {
        let report = predicted_lhs_conditioned(model)?;
        Ok(self.excludes(delta0, report.epsilon0))
    }

    fn dominates(&self, other: &Self) -> bool {
        self.delta0_threshold <= other.delta0_threshold
            && self.epsilon_threshold <= other.epsilon_threshold
            && (self.delta0_threshold < other.delta0_threshold || self.epsilon_threshold < other.epsilon_threshold)
    }
}

fn check_q_grid(q_grid: &[f64]) -> Result<()> {
    if q_grid.is_empty() {
        return Err(Error::domain("q grid is empty"));
    }
    if let Some(q) = q_grid.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
        return Err(Error::domain(format!("q value {q} outside (0, 1)")));
    }
    if q_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("q grid must be strictly ascending"));
    }
    Ok(())
}

/// `(Delta0(q), epsilon_expt / q)` for every `q` in the grid.
pub fn exclusion_region(
    estimate: &EpsilonEstimate,
    dist: &Delta0Distribution,
    q_grid: &[f64],
) -> Result<Vec<ExclusionPoint>> {
    check_q_grid(q_grid)?;
    q_grid
        .iter()
        .map(|&q| {
            let eps = worst_case_epsilon(estimate, q)?;
            Ok(ExclusionPoint {
                dim: dist.dim(),
                q,
                delta0_threshold: dist.quantile(q)?,
                epsilon_threshold: eps.value,
                epsilon_std_error: eps.std_error,
            })
        })
        .collect()
}

/// The point that ignores phase noise: closed-form distance, unscaled
/// `epsilon_expt`, reported with `q = 1`.
pub fn noiseless_point(estimate: &EpsilonEstimate, d: usize, mean_photons: f64) -> Result<ExclusionPoint> {
    Ok(ExclusionPoint {
        dim: d,
        q: 1.0,
        delta0_threshold: delta0_closed_form(d, mean_photons)?,
        epsilon_threshold: estimate.value,
        epsilon_std_error: estimate.std_error,
    })
}

/// Points not dominated by any other (smaller delta0 and smaller epsilon are
/// both more constraining), sorted by delta0. Exact duplicates keep the
/// first occurrence.
pub fn pareto_frontier(points: &[ExclusionPoint]) -> Result<Vec<ExclusionPoint>> {
    if points.is_empty() {
        return Err(Error::domain("no points to reduce"));
    }
    let mut sorted: Vec<ExclusionPoint> = points.to_vec();
    sorted.sort_by(|a, b| {
        a.delta0_threshold
            .total_cmp(&b.delta0_threshold)
            .then(a.epsilon_threshold.total_cmp(&b.epsilon_threshold))
    });
    let mut frontier: Vec<ExclusionPoint> = Vec::new();
    for p in sorted {
        let best = frontier.last().map_or(f64::INFINITY, |f| f.epsilon_threshold);
        if p.epsilon_threshold < best {
            frontier.push(p);
        }
    }
    debug_assert!(frontier.iter().all(|f| !points.iter().any(|p| p.dominates(f))));
    Ok(frontier)
}
