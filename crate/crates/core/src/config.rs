//! Flat configuration document covering every stage of the pipeline.
//!
//! Values come from defaults, then an optional TOML file, then `CSIVITALS_*`
//! environment variables, then explicit `key=value` overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::breath::PeakParams;
use crate::csi::StreamConfig;
use crate::error::{Error, Result};
use crate::motion::{CovarianceRecursion, MotionParams};
use crate::outage::OutageParams;
use crate::preprocess::FilterParams;
use crate::subspace::SubspaceSelection;

/// Prefix of environment variables that override config keys.
pub const ENV_PREFIX: &str = "CSIVITALS_";

/// Every tunable knob. Component indices are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub nominal_rate_hz: f64,
    pub epoch_seconds: f64,
    pub epoch_samples: usize,

    pub median_window: usize,
    pub ema_alpha: f64,
    pub butter_order: usize,
    /// Low-pass cutoff as a fraction of pi rad/sample.
    pub butter_cutoff: f64,

    pub pca_components: usize,
    pub breath_component: usize,
    pub motion_components: Vec<usize>,
    /// Samples per breath-power window (7.5 s at 20 Hz).
    pub power_window_samples: usize,

    pub e1_consecutive: usize,
    pub e2_merge_gap: usize,
    pub coverage: f64,
    pub alpha: f64,
    pub init_samples: usize,
    pub ridge_epsilon: f64,
    pub update_on_outlier: bool,
    pub covariance_recursion: CovarianceRecursion,

    pub minpro: f64,
    pub mindist_s: f64,
    pub minstr: f64,
    pub window_epochs: usize,
    pub presence_margin: f64,
    pub bandpass_order: usize,

    pub calibration_minutes: f64,
    pub floor_percentile: f64,
    pub large_outage_minutes: f64,

    pub eval_window_minutes: f64,
}

impl Default for Config {
    fn default() -> Self {
        let stream = StreamConfig::default();
        let filt = FilterParams::default();
        let motion = MotionParams::default();
        let peaks = PeakParams::default();
        let outage = OutageParams::default();
        Config {
            nominal_rate_hz: stream.nominal_rate_hz,
            epoch_seconds: stream.epoch_seconds,
            epoch_samples: stream.epoch_samples,
            median_window: filt.median_window,
            ema_alpha: filt.ema_alpha,
            butter_order: filt.butter_order,
            butter_cutoff: filt.butter_cutoff,
            pca_components: 5,
            breath_component: 1,
            motion_components: vec![3, 4, 5],
            power_window_samples: 150,
            e1_consecutive: motion.e1_consecutive,
            e2_merge_gap: motion.e2_merge_gap,
            coverage: motion.coverage,
            alpha: motion.alpha,
            init_samples: motion.init_samples,
            ridge_epsilon: motion.ridge_epsilon,
            update_on_outlier: motion.update_on_outlier,
            covariance_recursion: motion.recursion,
            minpro: peaks.min_prominence,
            mindist_s: peaks.min_distance_s,
            minstr: peaks.min_strength,
            window_epochs: 2,
            presence_margin: 3.0,
            bandpass_order: 2,
            calibration_minutes: outage.calibration_minutes,
            floor_percentile: outage.floor_percentile,
            large_outage_minutes: outage.large_outage_minutes,
            eval_window_minutes: 15.0,
        }
    }
}

impl Config {
    pub fn stream(&self) -> StreamConfig {
        StreamConfig {
            nominal_rate_hz: self.nominal_rate_hz,
            epoch_seconds: self.epoch_seconds,
            epoch_samples: self.epoch_samples,
        }
    }

    pub fn filters(&self) -> FilterParams {
        FilterParams {
            median_window: self.median_window,
            ema_alpha: self.ema_alpha,
            butter_order: self.butter_order,
            butter_cutoff: self.butter_cutoff,
        }
    }

    /// Zero-based component selection.
    pub fn selection(&self) -> SubspaceSelection {
        SubspaceSelection {
            breath_component: self.breath_component.saturating_sub(1),
            motion_components: self.motion_components.iter().map(|c| c.saturating_sub(1)).collect(),
        }
    }

    pub fn motion(&self) -> MotionParams {
        MotionParams {
            e1_consecutive: self.e1_consecutive,
            e2_merge_gap: self.e2_merge_gap,
            coverage: self.coverage,
            alpha: self.alpha,
            init_samples: self.init_samples,
            ridge_epsilon: self.ridge_epsilon,
            update_on_outlier: self.update_on_outlier,
            recursion: self.covariance_recursion,
        }
    }

    pub fn peaks(&self) -> PeakParams {
        PeakParams {
            min_prominence: self.minpro,
            min_distance_s: self.mindist_s,
            min_strength: self.minstr,
        }
    }

    pub fn outage(&self) -> OutageParams {
        OutageParams {
            calibration_minutes: self.calibration_minutes,
            floor_percentile: self.floor_percentile,
            large_outage_minutes: self.large_outage_minutes,
        }
    }

    /// Samples in one BPM window.
    pub fn bpm_window_samples(&self) -> usize {
        self.window_epochs * self.epoch_samples
    }

    /// Samples between BPM emissions (one second).
    pub fn bpm_step_samples(&self) -> usize {
        (self.stream().epoch_rate_hz().round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        self.stream().validate().map_err(|e| Error::Config(e.to_string()))?;
        self.filters().validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.pca_components == 0 {
            return bad("pca_components must be at least 1");
        }
        let comps = std::iter::once(&self.breath_component).chain(&self.motion_components);
        for &c in comps {
            if c == 0 || c > self.pca_components {
                return bad("component indices must lie in 1..=pca_components");
            }
        }
        if self.motion_components.is_empty() {
            return bad("motion_components must not be empty");
        }
        if self.power_window_samples == 0 || self.power_window_samples > self.epoch_samples {
            return bad("power_window_samples must lie in 1..=epoch_samples");
        }
        self.motion()
            .validate(self.motion_components.len())
            .map_err(|e| Error::Config(e.to_string()))?;
        self.peaks().validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.window_epochs == 0 {
            return bad("window_epochs must be at least 1");
        }
        if !(self.presence_margin > 0.0) {
            return bad("presence_margin must be positive");
        }
        crate::breath::breath_bandpass_design(self.stream().epoch_rate_hz(), self.bandpass_order)
            .map_err(|e| Error::Config(e.to_string()))?;
        if !(self.calibration_minutes > 0.0 && self.large_outage_minutes > 0.0) {
            return bad("calibration and outage spans must be positive");
        }
        if !(0.0..=100.0).contains(&self.floor_percentile) {
            return bad("floor_percentile must lie in [0, 100]");
        }
        if !(self.eval_window_minutes > 0.0) {
            return bad("eval_window_minutes must be positive");
        }
        Ok(())
    }

    /// Parses a TOML document on top of the defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Builds a config from an optional file, environment overrides, and
    /// `key=value` overrides, applied in that order.
    pub fn load<I, K, V>(path: Option<&Path>, env: I, overrides: &[String]) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        let known = toml::Table::try_from(Config::default())
            .map_err(|e| Error::Config(e.to_string()))?;
        for (k, v) in env {
            let Some(key) = k.as_ref().strip_prefix(ENV_PREFIX) else { continue };
            let key = key.to_ascii_lowercase();
            if known.contains_key(&key) {
                table.insert(key, parse_value(v.as_ref()));
            }
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
            let key = k.trim().to_string();
            if !known.contains_key(&key) {
                return Err(Error::Config(format!("unknown config key `{key}`")));
            }
            table.insert(key, parse_value(v.trim()));
        }
        let cfg: Config = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }
}

/// Interprets an override as a TOML value, falling back to a plain string.
fn parse_value(text: &str) -> toml::Value {
    format!("v = {text}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}
