//! Breathing waveform extraction, presence gating, and peak-count BPM.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{butterworth_bandpass_design, Sos};

/// Lowest tracked breathing rate in breaths per minute.
pub const MIN_BPM: f64 = 10.0;
/// Highest tracked breathing rate in breaths per minute.
pub const MAX_BPM: f64 = 40.0;

/// Peak filters applied on the max-min normalized scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakParams {
    pub min_prominence: f64,
    pub min_distance_s: f64,
    /// Fraction of the median surviving peak value.
    pub min_strength: f64,
}

impl Default for PeakParams {
    fn default() -> Self {
        PeakParams {
            min_prominence: 0.025,
            min_distance_s: 1.5,
            min_strength: 0.6,
        }
    }
}

impl PeakParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_prominence > 0.0 && self.min_prominence < 1.0) {
            return Err(Error::Parameter("min_prominence must lie in (0, 1)".into()));
        }
        if !(self.min_distance_s > 0.0 && self.min_strength > 0.0) {
            return Err(Error::Parameter("peak distance and strength must be positive".into()));
        }
        Ok(())
    }
}

/// One per-second rate estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpmSample {
    #[serde(rename = "t")]
    pub t_s: f64,
    /// Peak count over the trailing minute; `None` when gated by motion or absence.
    pub bpm: Option<u32>,
    /// Peaks found in the retained part of the window.
    pub peaks: usize,
    /// Fraction of the window retained after gating.
    pub coverage: f64,
}

/// Design of the breathing band-pass at `rate_hz`.
pub fn breath_bandpass_design(rate_hz: f64, order: usize) -> Result<Sos> {
    let high = MAX_BPM / 60.0;
    if !(rate_hz / 2.0 > high) {
        return Err(Error::Parameter(format!(
            "sample rate {rate_hz} Hz cannot represent the {high:.4} Hz band edge"
        )));
    }
    let w = |f: f64| 2.0 * std::f64::consts::PI * f / rate_hz;
    butterworth_bandpass_design(w(MIN_BPM / 60.0), w(high), order)
}

/// Causal Butterworth band-pass over the 10 to 40 breaths-per-minute band.
pub fn bandpass_breath(x: &[f64], rate_hz: f64, order: usize) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::InsufficientData("empty series".into()));
    }
    Ok(breath_bandpass_design(rate_hz, order)?.filter(x))
}

/// Rescales to `[0, 1]`. A range below `1e-12` yields zeros and `true`.
pub fn maxmin_normalize(x: &[f64]) -> (Vec<f64>, bool) {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range >= 1e-12) {
        return (vec![0.0; x.len()], true);
    }
    (x.iter().map(|v| (v - lo) / range).collect(), false)
}

/// Local maxima, with flat tops reported at their middle sample.
fn local_maxima(x: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let n = x.len();
    let mut i = 1;
    while i + 1 < n {
        if x[i] > x[i - 1] {
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[j + 1] < x[i] {
                out.push((i + j) / 2);
                i = j + 1;
                continue;
            }
            i = j;
        }
        i += 1;
    }
    out
}

/// Topographic prominence of the peak at `p`.
fn prominence(x: &[f64], p: usize) -> f64 {
    let h = x[p];
    let mut left_min = h;
    for i in (0..p).rev() {
        if x[i] > h {
            break;
        }
        left_min = left_min.min(x[i]);
    }
    let mut right_min = h;
    for &v in &x[p + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Peak detection: prominence gate, then greedy distance suppression keeping
/// higher peaks, then a floor relative to the median surviving peak.
pub fn detect_peaks(x: &[f64], params: &PeakParams, rate_hz: f64) -> Vec<usize> {
    let candidates: Vec<usize> = local_maxima(x)
        .into_iter()
        .filter(|&p| prominence(x, p) >= params.min_prominence)
        .collect();

    let min_dist = params.min_distance_s * rate_hz;
    let mut by_height = candidates.clone();
    by_height.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for p in by_height {
        if kept.iter().all(|&q| (p.abs_diff(q) as f64) >= min_dist) {
            kept.push(p);
        }
    }
    if kept.is_empty() {
        return kept;
    }
    let mut values: Vec<f64> = kept.iter().map(|&p| x[p]).collect();
    values.sort_by(f64::total_cmp);
    let m = values.len();
    let median = if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    };
    let floor = params.min_strength * median;
    kept.retain(|&p| x[p] >= floor);
    kept.sort_unstable();
    kept
}

/// Flags windows whose mean power exceeds `noise_floor * margin`.
pub fn breath_presence(power: &[f64], noise_floor: Option<f64>, margin: f64) -> Result<Vec<bool>> {
    let floor = noise_floor
        .ok_or_else(|| Error::InsufficientData("noise floor has not been established".into()))?;
    let threshold = floor * margin;
    Ok(power.iter().map(|&p| p > threshold).collect())
}

/// Rate estimate for one window. Gated samples are excised; fewer than half
/// retained yields `None`. The peak count is rescaled to the full window length.
pub fn window_bpm(values: &[f64], keep: &[bool], params: &PeakParams, rate_hz: f64) -> (Option<u32>, usize, f64) {
    let kept: Vec<f64> = values
        .iter()
        .zip(keep)
        .filter(|(_, &k)| k)
        .map(|(&v, _)| v)
        .collect();
    let coverage = if values.is_empty() {
        0.0
    } else {
        kept.len() as f64 / values.len() as f64
    };
    if kept.is_empty() || 2 * kept.len() < values.len() {
        return (None, 0, coverage);
    }
    let (norm, _) = maxmin_normalize(&kept);
    let peaks = detect_peaks(&norm, params, rate_hz).len();
    let bpm = (peaks as f64 * values.len() as f64 / kept.len() as f64).round() as u32;
    (Some(bpm), peaks, coverage)
}

/// Sliding peak-count BPM: every `step` samples, over the trailing `window`
/// samples of the band-passed stream. `keep[i]` is false for samples inside
/// motion events or in windows without breathing presence.
pub fn sliding_bpm(
    values: &[f64],
    times: &[f64],
    keep: &[bool],
    params: &PeakParams,
    rate_hz: f64,
    window: usize,
    step: usize,
) -> Vec<BpmSample> {
    let mut out = Vec::new();
    if window == 0 || step == 0 {
        return out;
    }
    let mut end = window;
    while end <= values.len() {
        let (bpm, peaks, coverage) =
            window_bpm(&values[end - window..end], &keep[end - window..end], params, rate_hz);
        out.push(BpmSample {
            t_s: times[end - 1],
            bpm,
            peaks,
            coverage,
        });
        end += step;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const RATE: f64 = 20.0;

    fn sine(freq: f64, seconds: f64) -> Vec<f64> {
        (0..(seconds * RATE) as usize)
            .map(|k| (2.0 * PI * freq * k as f64 / RATE).sin())
            .collect()
    }

    fn steady_peak(y: &[f64]) -> f64 {
        y[y.len() / 2..].iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn bandpass_contracts() {
        let dc = bandpass_breath(&vec![3.0; 4000], RATE, 2).unwrap();
        assert!(dc[3000..].iter().all(|v| v.abs() < 1e-3 * 3.0));
        let mid = bandpass_breath(&sine(0.25, 300.0), RATE, 2).unwrap();
        assert!(steady_peak(&mid) >= 0.9);
        let fast = bandpass_breath(&sine(2.0, 300.0), RATE, 2).unwrap();
        assert!(20.0 * steady_peak(&fast).log10() <= -20.0);
        assert!(bandpass_breath(&[1.0], 1.2, 2).is_err());
        assert!(bandpass_breath(&[], RATE, 2).is_err());
    }

    #[test]
    fn bandpass_response_oracle() {
        let sos = breath_bandpass_design(RATE, 2).unwrap();
        // Analytic band-pass Butterworth magnitude after prewarping.
        let w1 = (PI * MIN_BPM / 60.0 / RATE).tan();
        let w2 = (PI * MAX_BPM / 60.0 / RATE).tan();
        for i in 1..100 {
            let f = i as f64 * 0.05;
            let w = 2.0 * PI * f / RATE;
            let s = (w / 2.0).tan();
            let x = (s * s - w1 * w2) / (s * (w2 - w1));
            let want = 1.0 / (1.0 + x.powi(4)).sqrt();
            assert!((sos.response(w).norm() - want).abs() < 1e-9, "f={f}");
        }
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(maxmin_normalize(&[2.0, 4.0, 6.0]), (vec![0.0, 0.5, 1.0], false));
        assert_eq!(maxmin_normalize(&[7.0; 4]), (vec![0.0; 4], true));
        let x = [0.3, -2.0, 5.5, 1.0];
        let y: Vec<f64> = x.iter().map(|v| 3.5 * v - 11.0).collect();
        let (a, _) = maxmin_normalize(&x);
        let (b, _) = maxmin_normalize(&y);
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn sinusoid_has_one_peak_per_cycle() {
        let (x, _) = maxmin_normalize(&sine(0.25, 60.0));
        let p = detect_peaks(&x, &PeakParams::default(), RATE);
        assert_eq!(p.len(), 15);
        for w in p.windows(2) {
            assert_eq!(w[1] - w[0], 80);
        }
    }

    #[test]
    fn close_peaks_keep_the_higher() {
        let mut x = vec![0.0; 200];
        x[100] = 0.9;
        x[120] = 0.8;
        let p = detect_peaks(&x, &PeakParams::default(), RATE);
        assert_eq!(p, vec![100]);
    }

    #[test]
    fn small_ripple_is_ignored() {
        let base = sine(0.25, 60.0);
        let x: Vec<f64> = base
            .iter()
            .enumerate()
            .map(|(k, v)| v + 0.005 * (2.0 * PI * 3.0 * k as f64 / RATE).sin())
            .collect();
        let (x, _) = maxmin_normalize(&x);
        assert_eq!(detect_peaks(&x, &PeakParams::default(), RATE).len(), 15);
    }

    #[test]
    fn weak_peaks_fall_below_strength_floor() {
        let mut x = vec![0.0; 400];
        for (i, &h) in [1.0, 0.9, 0.2, 0.95].iter().enumerate() {
            x[50 + 100 * i] = h;
        }
        assert_eq!(detect_peaks(&x, &PeakParams::default(), RATE), vec![50, 150, 350]);
    }

    #[test]
    fn presence_examples() {
        let flags = breath_presence(&[0.0, 10.0, 3.0, 3.0000001], Some(1.0), 3.0).unwrap();
        assert_eq!(flags, vec![false, true, false, true]);
        assert!(breath_presence(&[1.0], None, 3.0).is_err());
    }

    #[test]
    fn sliding_counts_and_gates() {
        // Peaks sit half a step off the 1 s grid; a peak on a window's first
        // sample is not a local maximum and would be missed.
        let x: Vec<f64> = (0..3600)
            .map(|k| (2.0 * PI * 0.25 * (k as f64 - 10.0) / RATE + PI / 2.0).sin())
            .collect();
        let times: Vec<f64> = (0..x.len()).map(|k| k as f64 / RATE).collect();
        let keep = vec![true; x.len()];
        let out = sliding_bpm(&x, &times, &keep, &PeakParams::default(), RATE, 1200, 20);
        assert_eq!(out.len(), (x.len() - 1200) / 20 + 1);
        assert!(out.iter().all(|s| s.bpm == Some(15)));

        let gated = sliding_bpm(&x, &times, &vec![false; x.len()], &PeakParams::default(), RATE, 1200, 20);
        assert!(gated.iter().all(|s| s.bpm.is_none() && s.coverage == 0.0));
    }

    #[test]
    fn rate_change_is_tracked_monotonically() {
        let mut x = sine(0.2, 60.0);
        let phase_end = 2.0 * PI * 0.2 * 60.0;
        x.extend((0..1200).map(|k| (phase_end + 2.0 * PI * 0.4 * k as f64 / RATE).sin()));
        let times: Vec<f64> = (0..x.len()).map(|k| k as f64 / RATE).collect();
        let out = sliding_bpm(&x, &times, &vec![true; x.len()], &PeakParams::default(), RATE, 1200, 20);
        let bpm: Vec<u32> = out.iter().map(|s| s.bpm.unwrap()).collect();
        assert_eq!(bpm[0], 12);
        assert_eq!(*bpm.last().unwrap(), 24);
        assert!(bpm.windows(2).all(|w| w[0] <= w[1]), "{bpm:?}");
    }

    #[test]
    fn partly_gated_window_is_rescaled() {
        let x = sine(0.25, 60.0);
        let mut keep = vec![true; x.len()];
        keep[..400].iter_mut().for_each(|k| *k = false);
        let (bpm, peaks, cov) = window_bpm(&x, &keep, &PeakParams::default(), RATE);
        assert!((cov - 800.0 / 1200.0).abs() < 1e-12);
        assert_eq!(peaks, 10);
        assert_eq!(bpm, Some(15));
        keep[..700].iter_mut().for_each(|k| *k = false);
        assert_eq!(window_bpm(&x, &keep, &PeakParams::default(), RATE).0, None);
    }
}
