//! Laser phase diffusion across the pulse train and the resulting spread of
//! the vacuum-projected distance to the reference train.
//!
//! The phase performs a Gaussian random walk: consecutive bins separated by
//! `t0` pick up an increment `y ~ N(0, 2 D t0)` with `D = 1 / tau_coh`. The
//! walk starts from a reference phase of zero before bin 0, so the phase of
//! bin `j` (zero-based) is the sum of `j + 1` increments.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::SeededRandomSource;
use crate::state_space::{delta0_closed_form, exp_m1_complex, single_photon_distance};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseWalkModel {
    coherence_time: f64,
    bin_spacing: f64,
}

impl PhaseWalkModel {
    /// `coherence_time` may be `f64::INFINITY` for a noiseless laser.
    pub fn new(coherence_time: f64, bin_spacing: f64) -> Result<Self> {
        if !(coherence_time > 0.0) {
            return Err(Error::domain(format!(
                "coherence time must be positive, got {coherence_time}"
            )));
        }
        if !(bin_spacing > 0.0) || !bin_spacing.is_finite() {
            return Err(Error::domain(format!(
                "bin spacing must be positive, got {bin_spacing}"
            )));
        }
        Ok(Self {
            coherence_time,
            bin_spacing,
        })
    }

    /// 160 us coherence time, 300 ns bin spacing.
    pub fn nominal() -> Self {
        Self {
            coherence_time: 160e-6,
            bin_spacing: 300e-9,
        }
    }

    pub fn noiseless(bin_spacing: f64) -> Self {
        Self {
            coherence_time: f64::INFINITY,
            bin_spacing,
        }
    }

    pub fn coherence_time(&self) -> f64 {
        self.coherence_time
    }

    pub fn bin_spacing(&self) -> f64 {
        self.bin_spacing
    }

    pub fn diffusion_constant(&self) -> f64 {
        1.0 / self.coherence_time
    }

    /// Variance of one phase increment, rad^2.
    pub fn step_variance(&self) -> f64 {
        2.0 * self.bin_spacing / self.coherence_time
    }
}

/// Draws the `d` bin phases of one pulse train.
pub fn sample_phase_walk<R: Rng + ?Sized>(model: &PhaseWalkModel, d: usize, rng: &mut R) -> Vec<f64> {
    let mut phases = vec![0.0; d];
    fill_phase_walk(model.step_variance().sqrt(), &mut phases, rng);
    phases
}

fn fill_phase_walk<R: Rng + ?Sized>(sigma: f64, phases: &mut [f64], rng: &mut R) {
    if sigma == 0.0 {
        phases.fill(0.0);
        return;
    }
    let step = Normal::new(0.0, sigma).expect("finite sigma");
    let mut phi = 0.0;
    for p in phases.iter_mut() {
        phi += step.sample(rng);
        *p = phi;
    }
}

/// Sorted Monte Carlo samples of the distance between phase-drifted
/// missing-bin trains and the ideal reference train, pooled over `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Delta0Distribution {
    dim: usize,
    mean_photons: f64,
    step_variance: f64,
    seed: u64,
    sorted_samples: Vec<f64>,
}

impl Delta0Distribution {
    /// Builds a distribution from raw samples (sorted here).
    pub fn from_samples(
        dim: usize,
        mean_photons: f64,
        step_variance: f64,
        seed: u64,
        mut samples: Vec<f64>,
    ) -> Result<Self> {
        if let Some(bad) = samples.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::domain(format!("delta0 sample {bad} outside [0, 1]")));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self {
            dim,
            mean_photons,
            step_variance,
            seed,
            sorted_samples: samples,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean_photons(&self) -> f64 {
        self.mean_photons
    }

    pub fn step_variance(&self) -> f64 {
        self.step_variance
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sample_count(&self) -> usize {
        self.sorted_samples.len()
    }

    pub fn sorted_samples(&self) -> &[f64] {
        &self.sorted_samples
    }

    pub fn mean(&self) -> f64 {
        self.sorted_samples.iter().sum::<f64>() / self.sorted_samples.len() as f64
    }

    pub fn std_dev(&self) -> f64 {
        let n = self.sorted_samples.len() as f64;
        let m = self.mean();
        let ss: f64 = self.sorted_samples.iter().map(|x| (x - m) * (x - m)).sum();
        (ss / (n - 1.0).max(1.0)).sqrt()
    }

    pub fn quantile(&self, q: f64) -> Result<f64> {
        quantile_delta0(self, q)
    }

    /// Approximate standard error of the empirical `q`-quantile,
    /// `sqrt(q(1-q)/n) / f(x_q)` with the density taken from a finite
    /// difference of the quantile function.
    pub fn quantile_std_error(&self, q: f64) -> Result<f64> {
        let n = self.sample_count() as f64;
        let h = (0.5 / n.sqrt()).min(q / 2.0).min((1.0 - q) / 2.0);
        let spread = quantile_delta0(self, q + h)? - quantile_delta0(self, q - h)?;
        Ok((q * (1.0 - q) / n).sqrt() * spread / (2.0 * h))
    }
}

/// Empirical `q`-quantile of the distance distribution.
pub fn quantile_delta0(dist: &Delta0Distribution, q: f64) -> Result<f64> {
    empirical_quantile(&dist.sorted_samples, q)
}

/// Empirical `q`-quantile of ascending `sorted` with linear interpolation
/// between order statistics (the "type 7" convention).
pub fn empirical_quantile(sorted: &[f64], q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("quantile level must lie in (0, 1), got {q}")));
    }
    match sorted.len() {
        0 => Err(Error::domain("quantile of an empty distribution")),
        1 => Ok(sorted[0]),
        n => {
            let h = (n - 1) as f64 * q;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
        }
    }
}

/// Monte Carlo distribution of delta0 over phase walks, `samples_per_k`
/// trains for every missing bin `k`.
///
/// Each `k` draws from its own child stream of `rng`, so the result is
/// independent of the thread count.
pub fn delta0_distribution(
    model: &PhaseWalkModel,
    d: usize,
    mean_photons: f64,
    samples_per_k: usize,
    rng: &SeededRandomSource,
) -> Result<Delta0Distribution> {
    if samples_per_k == 0 {
        return Err(Error::domain("samples_per_k must be at least 1"));
    }
    let baseline = delta0_closed_form(d, mean_photons)?;
    let sigma = model.step_variance().sqrt();

    let samples: Vec<f64> = (0..d)
        .into_par_iter()
        .flat_map_iter(|k| {
            let mut r = rng.child(k as u64).rng();
            let mut phases = vec![0.0; d];
            (0..samples_per_k)
                .map(|_| {
                    if sigma == 0.0 {
                        return baseline;
                    }
                    fill_phase_walk(sigma, &mut phases, &mut r);
                    drifted_delta0(&phases, k, mean_photons)
                })
                .collect::<Vec<_>>()
        })
        .collect();

    Delta0Distribution::from_samples(d, mean_photons, model.step_variance(), rng.seed, samples)
}

/// delta0 between the missing-bin train with bin phases `phases` and the
/// noiseless reference train. The cross term reduces to
/// `a2 / sqrt(d (d-1)) * sum_{j != k} e^{i phi_j}`.
fn drifted_delta0(phases: &[f64], k: usize, mean_photons: f64) -> f64 {
    let d = phases.len();
    let sum: Complex64 = phases
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != k)
        .map(|(_, &p)| Complex64::from_polar(1.0, p))
        .sum();
    let scale = mean_photons / ((d * (d - 1)) as f64).sqrt();
    (1.0 - exp_m1_complex(sum * scale).norm() / mean_photons.exp_m1()).clamp(0.0, 1.0)
}

/// Leading-order estimate of the mean distance under phase noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedDelta {
    pub value: f64,
    /// False when `d * step_variance >= 1`, outside the small-noise expansion.
    pub within_validity: bool,
}

/// `1 - (e^{a sqrt((d-1)/d)} (1 - a d v / 8) - 1) / (e^a - 1)` with
/// `a = <n>` and `v` the phase variance.
pub fn analytic_expected_delta(d: usize, mean_photons: f64, step_variance: f64) -> Result<ExpectedDelta> {
    if d < 2 {
        return Err(Error::domain(format!("dimension must be at least 2, got {d}")));
    }
    if !(mean_photons > 0.0) {
        return Err(Error::domain(format!(
            "mean photon number must be positive, got {mean_photons}"
        )));
    }
    if !(step_variance >= 0.0) {
        return Err(Error::domain(format!(
            "phase variance must be non-negative, got {step_variance}"
        )));
    }
    let dn = d as f64;
    let ratio = ((dn - 1.0) / dn).sqrt();
    let penalty = mean_photons * dn * step_variance / 8.0;
    let value = if step_variance == 0.0 {
        delta0_closed_form(d, mean_photons)?
    } else {
        1.0 - ((mean_photons * ratio).exp() * (1.0 - penalty) - 1.0) / mean_photons.exp_m1()
    };
    Ok(ExpectedDelta {
        value,
        within_validity: dn * step_variance < 1.0,
    })
}

/// Single-photon counterpart, `1 - sqrt((d-1)/d) + d v / 8`.
pub fn single_photon_expected_delta(d: usize, step_variance: f64) -> f64 {
    single_photon_distance(d) + d as f64 * step_variance / 8.0
}

/// Exhaustive scan of [`analytic_expected_delta`] over integer `d`; ties go to
/// the smaller `d`.
pub fn find_min_expected_delta(
    mean_photons: f64,
    step_variance: f64,
    d_range: std::ops::RangeInclusive<usize>,
) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for d in d_range {
        let v = analytic_expected_delta(d, mean_photons, step_variance)?.value;
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((d, v));
        }
    }
    best.ok_or_else(|| Error::domain("empty dimension range"))
}
