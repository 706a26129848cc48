//! Rate error against ground truth, motion false positives, event matching, and CDFs.

use serde::{Deserialize, Serialize};

use crate::breath::BpmSample;
use crate::csi::{GroundTruthRecord, GroundTruthTimeline, GtState};
use crate::error::{Error, Result};
use crate::motion::MotionEvent;

/// A prediction paired with the nearest ground-truth rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpmPair {
    pub t: f64,
    pub predicted: f64,
    pub truth: f64,
}

/// Pairs each non-null prediction with the nearest ground-truth record carrying
/// a rate, if that record lies within one second.
pub fn align_bpm(pred: &[BpmSample], gt: &[GroundTruthRecord]) -> Vec<BpmPair> {
    let rated: Vec<(f64, f64)> = gt
        .iter()
        .filter_map(|r| r.bpm.map(|b| (r.timestamp, b)))
        .collect();
    let mut out = Vec::new();
    for p in pred {
        let Some(bpm) = p.bpm else { continue };
        let i = rated.partition_point(|(t, _)| *t < p.t_s);
        let best = [i.checked_sub(1), Some(i)]
            .into_iter()
            .flatten()
            .filter_map(|j| rated.get(j))
            .min_by(|a, b| (a.0 - p.t_s).abs().total_cmp(&(b.0 - p.t_s).abs()));
        if let Some(&(t, truth)) = best {
            if (t - p.t_s).abs() <= 1.0 {
                out.push(BpmPair {
                    t: p.t_s,
                    predicted: bpm as f64,
                    truth,
                });
            }
        }
    }
    out
}

/// Mean squared error over one fixed window of the night.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowMse {
    pub start_s: f64,
    pub end_s: f64,
    pub n: usize,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpmError {
    pub mse: f64,
    pub rmse: f64,
    pub n: usize,
    pub windowed: Vec<WindowMse>,
    pub abs_errors: Vec<f64>,
}

/// Full-span MSE and, optionally, MSE per non-overlapping window of
/// `window_minutes`, anchored at the first compared sample.
pub fn bpm_error(pred: &[BpmSample], gt: &[GroundTruthRecord], window_minutes: Option<f64>) -> Result<BpmError> {
    let pairs = align_bpm(pred, gt);
    if pairs.is_empty() {
        return Err(Error::InsufficientData(
            "no prediction overlaps a rated ground-truth record".into(),
        ));
    }
    let sq: Vec<f64> = pairs.iter().map(|p| (p.predicted - p.truth).powi(2)).collect();
    let mse = sq.iter().sum::<f64>() / sq.len() as f64;
    let mut windowed = Vec::new();
    if let Some(w) = window_minutes.filter(|w| *w > 0.0) {
        let width = w * 60.0;
        let anchor = pairs[0].t;
        let mut cur: Option<(i64, f64, usize)> = None;
        let flush = |c: (i64, f64, usize), out: &mut Vec<WindowMse>| {
            let start = anchor + c.0 as f64 * width;
            out.push(WindowMse {
                start_s: start,
                end_s: start + width,
                n: c.2,
                mse: c.1 / c.2 as f64,
            });
        };
        for (p, e) in pairs.iter().zip(&sq) {
            let k = ((p.t - anchor) / width).floor() as i64;
            match cur {
                Some((ck, s, n)) if ck == k => cur = Some((ck, s + e, n + 1)),
                Some(c) => {
                    flush(c, &mut windowed);
                    cur = Some((k, *e, 1));
                }
                None => cur = Some((k, *e, 1)),
            }
        }
        if let Some(c) = cur {
            flush(c, &mut windowed);
        }
    }
    Ok(BpmError {
        mse,
        rmse: mse.sqrt(),
        n: pairs.len(),
        windowed,
        abs_errors: pairs.iter().map(|p| (p.predicted - p.truth).abs()).collect(),
    })
}

/// Events that overlap no ground-truth motion record: `(count, total minutes)`.
pub fn motion_false_positives(events: &[MotionEvent], gt: &[GroundTruthRecord]) -> (usize, f64) {
    let timeline = GroundTruthTimeline::new(gt);
    let mut count = 0;
    let mut seconds = 0.0;
    for ev in events {
        if !timeline.any_in_state(ev.start_s, ev.end_s, GtState::Motion) {
            count += 1;
            seconds += ev.duration_s();
        }
    }
    (count, seconds / 60.0)
}

/// Empirical CDF rows `(value, k/n)` over sorted values.
pub fn cdf_table(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::InsufficientData("CDF of an empty sample".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    Ok(v.into_iter()
        .enumerate()
        .map(|(k, x)| (x, (k + 1) as f64 / n))
        .collect())
}

/// Smallest value whose cumulative fraction reaches one half.
pub fn cdf_median(table: &[(f64, f64)]) -> Option<f64> {
    table.iter().find(|(_, f)| *f >= 0.5).map(|(v, _)| *v)
}

/// Coalesced ground-truth motion spans.
pub fn gt_motion_intervals(gt: &[GroundTruthRecord]) -> Vec<(f64, f64)> {
    let timeline = GroundTruthTimeline::new(gt);
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, r) in gt.iter().enumerate() {
        if r.state != GtState::Motion {
            continue;
        }
        let (s, e) = timeline.span(i);
        match out.last_mut() {
            Some(last) if s <= last.1 + 1e-9 => last.1 = e,
            _ => out.push((s, e)),
        }
    }
    out
}

/// Intersection over union of two intervals.
pub fn interval_iou(a: (f64, f64), b: (f64, f64)) -> f64 {
    let inter = (a.1.min(b.1) - a.0.max(b.0)).max(0.0);
    let union = (a.1 - a.0) + (b.1 - b.0) - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Event-level agreement between detected and true motion intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventMatch {
    pub precision: f64,
    pub recall: f64,
    /// Best IoU achieved by each true interval (0 when undetected).
    pub ious: Vec<f64>,
}

/// A detection matches a truth interval when they overlap; each truth interval
/// is credited with its best-overlapping detection.
pub fn match_events(detected: &[(f64, f64)], truth: &[(f64, f64)]) -> EventMatch {
    let overlaps = |a: (f64, f64), b: (f64, f64)| a.0 < b.1 && b.0 < a.1;
    let matched_det = detected
        .iter()
        .filter(|d| truth.iter().any(|t| overlaps(**d, *t)))
        .count();
    let ious: Vec<f64> = truth
        .iter()
        .map(|t| {
            detected
                .iter()
                .map(|d| interval_iou(*d, *t))
                .fold(0.0, f64::max)
        })
        .collect();
    let found = truth
        .iter()
        .filter(|t| detected.iter().any(|d| overlaps(*d, **t)))
        .count();
    EventMatch {
        precision: if detected.is_empty() {
            1.0
        } else {
            matched_det as f64 / detected.len() as f64
        },
        recall: if truth.is_empty() {
            1.0
        } else {
            found as f64 / truth.len() as f64
        },
        ious,
    }
}

/// Metrics block attached to a night report when ground truth is available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse_bpm: Option<f64>,
    pub rmse_bpm: Option<f64>,
    pub median_abs_error_bpm: Option<f64>,
    pub n_compared: usize,
    pub windowed_mse: Vec<WindowMse>,
    pub mfp_count: usize,
    pub mfp_minutes: f64,
    pub cdf_abs_error: Vec<(f64, f64)>,
    pub cdf_windowed_mse: Vec<(f64, f64)>,
}

/// Computes every metric; rate metrics are empty when nothing overlaps.
pub fn evaluate(bpm: &[BpmSample], events: &[MotionEvent], gt: &[GroundTruthRecord], window_minutes: f64) -> Metrics {
    let (mfp_count, mfp_minutes) = motion_false_positives(events, gt);
    match bpm_error(bpm, gt, Some(window_minutes)) {
        Ok(err) => {
            let cdf_abs_error = cdf_table(&err.abs_errors).unwrap_or_default();
            let wm: Vec<f64> = err.windowed.iter().map(|w| w.mse).collect();
            Metrics {
                mse_bpm: Some(err.mse),
                rmse_bpm: Some(err.rmse),
                median_abs_error_bpm: cdf_median(&cdf_abs_error),
                n_compared: err.n,
                cdf_windowed_mse: cdf_table(&wm).unwrap_or_default(),
                windowed_mse: err.windowed,
                mfp_count,
                mfp_minutes,
                cdf_abs_error,
            }
        }
        Err(_) => Metrics {
            mse_bpm: None,
            rmse_bpm: None,
            median_abs_error_bpm: None,
            n_compared: 0,
            windowed_mse: Vec::new(),
            mfp_count,
            mfp_minutes,
            cdf_abs_error: Vec::new(),
            cdf_windowed_mse: Vec::new(),
        },
    }
}
