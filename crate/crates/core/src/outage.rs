//! Noise floor, outage intervals, level crossing rate, and average fade duration.

use serde::{Deserialize, Serialize};

use crate::csi::{GroundTruthRecord, GroundTruthTimeline, GtState};
use crate::error::{Error, Result};

/// Minimum number of windows for a noise-floor estimate (5 minutes of 7.5 s windows).
pub const MIN_CALIBRATION_WINDOWS: usize = 40;

/// Mean breath-projection power over one 7.5 s window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerWindow {
    pub start_s: f64,
    pub end_s: f64,
    pub power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutageScale {
    Small,
    Large,
}

/// A span where the breath projection sat at the noise floor while the
/// reference sensor still saw breathing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageInterval {
    pub start_s: f64,
    pub end_s: f64,
    pub scale: OutageScale,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageParams {
    pub calibration_minutes: f64,
    pub floor_percentile: f64,
    pub large_outage_minutes: f64,
}

impl Default for OutageParams {
    fn default() -> Self {
        OutageParams {
            calibration_minutes: 10.0,
            floor_percentile: 10.0,
            large_outage_minutes: 5.0,
        }
    }
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = (p / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

/// Noise floor as a low percentile of calibration-window powers.
pub fn estimate_noise_floor(powers: &[f64], floor_percentile: f64) -> Result<f64> {
    if powers.len() < MIN_CALIBRATION_WINDOWS {
        return Err(Error::InsufficientData(format!(
            "noise floor needs {MIN_CALIBRATION_WINDOWS} windows, got {}",
            powers.len()
        )));
    }
    Ok(percentile(powers, floor_percentile).expect("non-empty"))
}

fn scale_for(duration_s: f64, large_minutes: f64) -> OutageScale {
    if duration_s > large_minutes * 60.0 {
        OutageScale::Large
    } else {
        OutageScale::Small
    }
}

/// Windows at or below the floor while ground truth shows breathing throughout,
/// coalesced when adjacent.
pub fn detect_outage(
    windows: &[PowerWindow],
    noise_floor: f64,
    ground_truth: &[GroundTruthRecord],
    large_minutes: f64,
) -> Vec<OutageInterval> {
    let gt = GroundTruthTimeline::new(ground_truth);
    let mut spans: Vec<(f64, f64)> = Vec::new();
    for w in windows {
        if w.power > noise_floor || !gt.all_in_state(w.start_s, w.end_s, GtState::Breathing) {
            continue;
        }
        match spans.last_mut() {
            Some(last) if w.start_s <= last.1 + 1e-9 => last.1 = w.end_s,
            _ => spans.push((w.start_s, w.end_s)),
        }
    }
    spans
        .into_iter()
        .map(|(s, e)| OutageInterval {
            start_s: s,
            end_s: e,
            scale: scale_for(e - s, large_minutes),
        })
        .collect()
}

/// Downward crossings (above, then at or below `threshold`) per hour.
pub fn level_crossing_rate(series: &[f64], threshold: f64, span_hours: f64) -> Result<f64> {
    if !(span_hours > 0.0) {
        return Err(Error::Parameter("span must be positive".into()));
    }
    let crossings = series
        .windows(2)
        .filter(|w| w[0] > threshold && w[1] <= threshold)
        .count();
    Ok(crossings as f64 / span_hours)
}

/// Fade durations split at the large-outage boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadeStats {
    pub small_mean_min: Option<f64>,
    pub large_mean_min: Option<f64>,
    pub durations_min: Vec<f64>,
}

/// Runs of samples at or below `threshold`, each sample lasting `window_s`.
pub fn average_fade_duration(series: &[f64], threshold: f64, window_s: f64, large_minutes: f64) -> FadeStats {
    let mut durations = Vec::new();
    let mut run = 0usize;
    for &v in series {
        if v <= threshold {
            run += 1;
        } else if run > 0 {
            durations.push(run as f64 * window_s / 60.0);
            run = 0;
        }
    }
    if run > 0 {
        durations.push(run as f64 * window_s / 60.0);
    }
    let mean = |xs: Vec<f64>| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
    let (large, small): (Vec<f64>, Vec<f64>) = durations
        .iter()
        .partition(|&&d| scale_for(d * 60.0, large_minutes) == OutageScale::Large);
    FadeStats {
        small_mean_min: mean(small),
        large_mean_min: mean(large),
        durations_min: durations,
    }
}
