//! Run configuration. Files are TOML with sectioned, unit-suffixed keys
//! (`apparatus.dark_rate_hz = 3.0`); units are converted to SI once, here.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::analysis::{db_to_linear, NoiseModelParams, DEFAULT_Q_GRID};
use crate::apparatus::ApparatusConfig;
use crate::error::{Error, Result};
use crate::io::read_text;
use crate::phase_model::PhaseWalkModel;
use crate::rng::SeededRandomSource;

/// The bundled nominal configuration (no seed).
pub const NOMINAL_TOML: &str = include_str!("../fixtures/nominal.toml");
/// The bundled measured-epsilon table.
pub const MEASURED_EPSILON_CSV: &str = include_str!("../fixtures/measured_epsilon.csv");

const MC_SAMPLES_TOTAL: usize = 1_000_000;

// Stream ids keep the commands' random sequences independent under one seed.
const STREAM_SIMULATE: u64 = 1;
const STREAM_MC: u64 = 2;
const STREAM_VERIFY: u64 = 3;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawApparatus {
    efficiency: Option<f64>,
    dark_rate_hz: Option<f64>,
    keep_window_ns: Option<f64>,
    bin_period_ns: Option<f64>,
    extinction_db: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPhase {
    coherence_time_us: Option<f64>,
    bin_spacing_ns: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUncertainty {
    dark_rate_hz: Option<f64>,
    detection_rel: Option<f64>,
    extinction_db: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVerify {
    models: Option<usize>,
    max_dim: Option<usize>,
    max_ontic: Option<usize>,
    no_click_mass: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    dims: Option<Vec<usize>>,
    mean_photons: Option<f64>,
    output_dir: Option<PathBuf>,
    q_grid: Option<Vec<f64>>,
    #[serde(default)]
    apparatus: RawApparatus,
    #[serde(default)]
    phase: RawPhase,
    #[serde(default)]
    uncertainty: RawUncertainty,
    #[serde(default)]
    verify: RawVerify,
    #[serde(default)]
    trials_per_k: BTreeMap<String, u64>,
    #[serde(default)]
    mc_samples_per_k: BTreeMap<String, usize>,
}

/// Apparatus settings shared by all dimensions, in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApparatusSettings {
    pub efficiency: f64,
    pub dark_rate: f64,
    pub keep_window: f64,
    pub bin_period: f64,
    pub extinction_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Uncertainty {
    pub dark_rate: f64,
    pub detection_rel: f64,
    pub extinction_db: f64,
}

/// Random-model generator settings for the no-go check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub models: usize,
    pub max_dim: usize,
    pub max_ontic: usize,
    pub no_click_mass: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            models: 10_000,
            max_dim: 8,
            max_ontic: 12,
            no_click_mass: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub dims: Vec<usize>,
    pub mean_photons: f64,
    pub output_dir: PathBuf,
    pub q_grid: Vec<f64>,
    pub apparatus: ApparatusSettings,
    pub phase: PhaseWalkModel,
    pub uncertainty: Uncertainty,
    pub verify: VerifyOptions,
    pub trials_per_k: BTreeMap<usize, u64>,
    pub mc_samples_per_k: BTreeMap<usize, usize>,
}

fn keyed<T>(map: BTreeMap<String, T>, what: &str) -> Result<BTreeMap<usize, T>> {
    map.into_iter()
        .map(|(k, v)| {
            k.parse()
                .map(|d| (d, v))
                .map_err(|_| Error::Config(format!("{what} key '{k}' is not a dimension")))
        })
        .collect()
}

impl RunConfig {
    /// The bundled nominal configuration with the given seed.
    pub fn nominal(seed: u64) -> Self {
        Self::from_toml_str(NOMINAL_TOML, Some(seed)).expect("bundled configuration is valid")
    }

    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self> {
        Self::from_toml_str(&read_text(path)?, seed_override)
    }

    /// Missing keys fall back to the bundled nominal values; the seed must
    /// come from the file or from `seed_override`.
    pub fn from_toml_str(text: &str, seed_override: Option<u64>) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let base: RawConfig = toml::from_str(NOMINAL_TOML).map_err(|e| Error::Config(e.to_string()))?;
        let seed = seed_override
            .or(raw.seed)
            .ok_or_else(|| Error::Config("no seed given: set `seed` or pass --seed".into()))?;

        macro_rules! pick {
            ($($path:ident).+) => {
                raw.$($path).+.or(base.$($path).+)
                    .ok_or_else(|| Error::Config(concat!("missing ", stringify!($($path).+)).into()))?
            };
        }

        let apparatus = ApparatusSettings {
            efficiency: pick!(apparatus.efficiency),
            dark_rate: pick!(apparatus.dark_rate_hz),
            keep_window: pick!(apparatus.keep_window_ns) * 1e-9,
            bin_period: pick!(apparatus.bin_period_ns) * 1e-9,
            extinction_db: pick!(apparatus.extinction_db),
        };
        let phase = PhaseWalkModel::new(
            pick!(phase.coherence_time_us) * 1e-6,
            pick!(phase.bin_spacing_ns) * 1e-9,
        )?;
        let uncertainty = Uncertainty {
            dark_rate: pick!(uncertainty.dark_rate_hz),
            detection_rel: pick!(uncertainty.detection_rel),
            extinction_db: pick!(uncertainty.extinction_db),
        };
        let verify = VerifyOptions {
            models: pick!(verify.models),
            max_dim: pick!(verify.max_dim),
            max_ontic: pick!(verify.max_ontic),
            no_click_mass: pick!(verify.no_click_mass),
        };

        let trials_per_k = if raw.trials_per_k.is_empty() {
            keyed(base.trials_per_k, "trials_per_k")?
        } else {
            keyed(raw.trials_per_k, "trials_per_k")?
        };
        let cfg = Self {
            seed,
            dims: raw.dims.unwrap_or(base.dims.unwrap_or_default()),
            mean_photons: pick!(mean_photons),
            output_dir: raw.output_dir.or(base.output_dir).unwrap_or_else(|| "out".into()),
            q_grid: raw.q_grid.unwrap_or_else(|| DEFAULT_Q_GRID.to_vec()),
            apparatus,
            phase,
            uncertainty,
            verify,
            trials_per_k,
            mc_samples_per_k: keyed(raw.mc_samples_per_k, "mc_samples_per_k")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Restricts the run to `dims`; each still needs a trial count to simulate.
    pub fn with_dims(mut self, dims: Vec<usize>) -> Result<Self> {
        self.dims = dims;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::Config("dims is empty".into()));
        }
        for &d in &self.dims {
            self.apparatus_for(d).validate()?;
        }
        if !(self.mean_photons > 0.0) {
            return Err(Error::Config(format!(
                "mean_photons must be positive, got {}",
                self.mean_photons
            )));
        }
        if self.verify.max_dim < 2 || self.verify.max_ontic == 0 {
            return Err(Error::Config(
                "verify.max_dim >= 2 and verify.max_ontic >= 1 required".into(),
            ));
        }
        self.noise_params(self.dims[0]).validate()
    }

    pub fn apparatus_for(&self, d: usize) -> ApparatusConfig {
        let a = &self.apparatus;
        ApparatusConfig {
            dim: d,
            mean_photons: self.mean_photons,
            efficiency: a.efficiency,
            dark_rate: a.dark_rate,
            keep_window: a.keep_window,
            bin_period: a.bin_period,
            extinction_power_ratio: db_to_linear(a.extinction_db),
        }
    }

    /// Parameters of the expected-epsilon band. Independent of `d`; the
    /// argument only fixes which apparatus is described.
    pub fn noise_params(&self, d: usize) -> NoiseModelParams {
        let a = self.apparatus_for(d);
        NoiseModelParams {
            dark_rate: a.dark_rate,
            dark_rate_err: self.uncertainty.dark_rate,
            keep_window: a.keep_window,
            detection_probability: a.efficiency * a.mean_photons,
            detection_probability_rel_err: self.uncertainty.detection_rel,
            extinction_db: self.apparatus.extinction_db,
            extinction_db_err: self.uncertainty.extinction_db,
        }
    }

    pub fn trials_for(&self, d: usize) -> Result<u64> {
        self.trials_per_k
            .get(&d)
            .copied()
            .ok_or_else(|| Error::Config(format!("no trials_per_k entry for d={d}")))
    }

    /// Monte Carlo samples per prepared `k`; `1e6 / d` unless configured.
    pub fn mc_samples_for(&self, d: usize) -> usize {
        self.mc_samples_per_k
            .get(&d)
            .copied()
            .unwrap_or((MC_SAMPLES_TOTAL / d.max(1)).max(1))
    }

    pub fn simulate_source(&self, d: usize) -> SeededRandomSource {
        SeededRandomSource::with_stream(self.seed, STREAM_SIMULATE).child(d as u64)
    }

    pub fn mc_source(&self, d: usize) -> SeededRandomSource {
        SeededRandomSource::with_stream(self.seed, STREAM_MC).child(d as u64)
    }

    pub fn verify_source(&self) -> SeededRandomSource {
        SeededRandomSource::with_stream(self.seed, STREAM_VERIFY)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn nominal_values_in_si() {
        let c = RunConfig::nominal(1);
        assert_eq!(c.dims, vec![3, 10, 30, 50, 80]);
        let a = c.apparatus_for(10);
        assert_eq!(a.dim, 10);
        assert_relative_eq!(a.dark_count_mean(), 2.4e-7, max_relative = 1e-12);
        assert_relative_eq!(a.extinction_power_ratio, 1e-4, max_relative = 1e-12);
        assert_relative_eq!(c.phase.step_variance(), 3.75e-3, max_relative = 1e-12);
        assert_eq!(c.trials_for(3).unwrap(), 12 * 1_280_000);
        assert_eq!(c.trials_for(80).unwrap(), 2 * 1_280_000);
        assert_eq!(c.mc_samples_for(10), 100_000);
        assert_eq!(c.q_grid, DEFAULT_Q_GRID.to_vec());
        assert_eq!(c.noise_params(3), NoiseModelParams::nominal());
    }

    #[test]
    fn seed_is_required() {
        assert!(matches!(
            RunConfig::from_toml_str("dims = [3]", None),
            Err(Error::Config(_))
        ));
        assert_eq!(RunConfig::from_toml_str("seed = 4", None).unwrap().seed, 4);
        assert_eq!(RunConfig::from_toml_str("seed = 4", Some(9)).unwrap().seed, 9);
    }

    #[test]
    fn overrides_and_units() {
        let c = RunConfig::from_toml_str(
            "seed = 1\ndims = [4]\napparatus.dark_rate_hz = 0.0\napparatus.extinction_db = inf\n\
             phase.coherence_time_us = inf\ntrials_per_k = { 4 = 10 }\nmc_samples_per_k = { 4 = 7 }",
            None,
        )
        .unwrap();
        let a = c.apparatus_for(4);
        assert_eq!(a.dark_rate, 0.0);
        assert_eq!(a.extinction_power_ratio, 0.0);
        assert_eq!(c.phase.step_variance(), 0.0);
        assert_eq!(c.trials_for(4).unwrap(), 10);
        assert!(c.trials_for(3).is_err());
        assert_eq!(c.mc_samples_for(4), 7);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::from_toml_str("seed = 1\napparatus.dark_rate = 3.0", None).is_err());
        assert!(RunConfig::from_toml_str("seed = 1\ndims = []", None).is_err());
        assert!(RunConfig::from_toml_str("seed = 1\ndims = [1]", None).is_err());
        assert!(RunConfig::from_toml_str("seed = 1\ntrials_per_k = { x = 1 }", None).is_err());
        assert!(RunConfig::from_toml_str("seed = 1\napparatus.keep_window_ns = 400.0", None).is_err());
    }

    #[test]
    fn streams_are_distinct() {
        let c = RunConfig::nominal(5);
        assert_ne!(c.simulate_source(3), c.mc_source(3));
        assert_ne!(c.simulate_source(3), c.simulate_source(10));
    }
}
