//! Per-minute activity scores and Webster sleep/wake classification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::MotionEvent;

/// Motion coverage of one minute, scaled to `[0, 10]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinuteActivity {
    pub minute_index: usize,
    pub a: f64,
}

/// Webster scoring constants; `w` runs over offsets -4..=+2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WebsterWeights {
    pub rho: f64,
    pub w: [f64; 7],
}

impl Default for WebsterWeights {
    fn default() -> Self {
        WebsterWeights {
            rho: 0.125,
            w: [0.15, 0.15, 0.15, 0.08, 0.21, 0.12, 0.13],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Sleep,
    Awake,
}

/// Number of whole or partial minutes in `[start_s, end_s)`.
pub fn night_minutes(start_s: f64, end_s: f64) -> usize {
    if end_s > start_s {
        ((end_s - start_s) / 60.0 - 1e-9).ceil().max(1.0) as usize
    } else {
        0
    }
}

/// `a_m = 10 * (motion seconds in minute m) / 60`, minutes counted from `start_s`.
pub fn activity_scores(events: &[MotionEvent], start_s: f64, end_s: f64) -> Vec<MinuteActivity> {
    let minutes = night_minutes(start_s, end_s);
    let mut covered = vec![0.0_f64; minutes];
    for ev in events {
        let s = ev.start_s.max(start_s);
        let e = ev.end_s.min(end_s);
        if e <= s {
            continue;
        }
        let first = ((s - start_s) / 60.0).floor() as usize;
        let last = (((e - start_s) / 60.0).ceil() as usize).min(minutes);
        for (m, c) in covered.iter_mut().enumerate().take(last).skip(first) {
            let m0 = start_s + 60.0 * m as f64;
            let overlap = e.min(m0 + 60.0) - s.max(m0);
            if overlap > 0.0 {
                *c += overlap;
            }
        }
    }
    covered
        .into_iter()
        .enumerate()
        .map(|(m, c)| MinuteActivity {
            minute_index: m,
            a: 10.0 * c.min(60.0) / 60.0,
        })
        .collect()
}

/// Weighted neighborhood score per minute; missing neighbors count as zero.
pub fn webster_scores(scores: &[MinuteActivity], weights: &WebsterWeights) -> Vec<f64> {
    let n = scores.len() as isize;
    (0..n)
        .map(|m| {
            let sum: f64 = (-4isize..=2)
                .zip(weights.w.iter())
                .filter_map(|(off, w)| {
                    let j = m + off;
                    (0..n).contains(&j).then(|| w * scores[j as usize].a)
                })
                .sum();
            weights.rho * sum
        })
        .collect()
}

/// Sleep iff the neighborhood score is at most one.
pub fn webster_classify(scores: &[MinuteActivity], weights: &WebsterWeights) -> Vec<Stage> {
    webster_scores(scores, weights)
        .into_iter()
        .map(|s| if s <= 1.0 { Stage::Sleep } else { Stage::Awake })
        .collect()
}

/// Sleep minutes divided by total minutes.
pub fn sleep_efficiency(stages: &[Stage]) -> Result<f64> {
    if stages.is_empty() {
        return Err(Error::InsufficientData("no minutes to score".into()));
    }
    let sleep = stages.iter().filter(|s| **s == Stage::Sleep).count();
    Ok(sleep as f64 / stages.len() as f64)
}

/// Formats a ratio as a percentage with one decimal, e.g. `62.1%`.
pub fn format_percent(ratio: f64) -> String {
    format!("{:.1}%", ratio * 100.0)
}

/// One row of the per-minute table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinuteRecord {
    pub minute: usize,
    pub a: f64,
    pub s: f64,
    pub stage: Stage,
}

/// Activity, score, and stage for every minute of the night.
pub fn score_night(events: &[MotionEvent], start_s: f64, end_s: f64, weights: &WebsterWeights) -> Vec<MinuteRecord> {
    let acts = activity_scores(events, start_s, end_s);
    let s = webster_scores(&acts, weights);
    acts.iter()
        .zip(s)
        .map(|(a, s)| MinuteRecord {
            minute: a.minute_index,
            a: a.a,
            s,
            stage: if s <= 1.0 { Stage::Sleep } else { Stage::Awake },
        })
        .collect()
}
