//! First-difference amplitude, channel filtering, epoching, and downsampling.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::csi::{CsiFrame, RealChannelMatrix, StreamConfig};
use crate::error::{Error, Result};
use crate::filter::{butterworth_lowpass_design, Ema, Sos, SosState, StreamingMedian};
use crate::subspace::Epoch;

/// Per-channel smoothing chain applied to `|H'|` before epoching.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    pub median_window: usize,
    pub ema_alpha: f64,
    pub butter_order: usize,
    /// Low-pass cutoff as a fraction of pi rad/sample.
    pub butter_cutoff: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            median_window: 5,
            ema_alpha: 0.9,
            butter_order: 4,
            butter_cutoff: 0.0125,
        }
    }
}

impl FilterParams {
    pub fn lowpass(&self) -> Result<Sos> {
        butterworth_lowpass_design(self.butter_cutoff * std::f64::consts::PI, self.butter_order)
    }

    pub fn validate(&self) -> Result<()> {
        StreamingMedian::new(self.median_window)?;
        Ema::new(self.ema_alpha)?;
        self.lowpass()?;
        Ok(())
    }
}

/// `out[k][c] = |csi[k+1][c] - csi[k][c]|`, stamped with the later frame's time.
pub fn first_difference_amplitude(frames: &[CsiFrame]) -> Result<RealChannelMatrix> {
    if frames.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "first difference needs at least 2 frames, got {}",
            frames.len()
        )));
    }
    crate::csi::validate_stream(frames)?;
    let channels = frames[0].dims().channels();
    let mut samples = Vec::with_capacity((frames.len() - 1) * channels);
    let mut timestamps = Vec::with_capacity(frames.len() - 1);
    for w in frames.windows(2) {
        difference_row(&w[0], &w[1], &mut samples);
        timestamps.push(w[1].timestamp());
    }
    let span = timestamps.last().unwrap() - frames[0].timestamp();
    let sample_rate = if span > 0.0 {
        timestamps.len() as f64 / span
    } else {
        0.0
    };
    Ok(RealChannelMatrix {
        samples,
        timestamps,
        channels,
        sample_rate,
    })
}

/// Appends `|b - a|` per channel to `out`.
pub fn difference_row(a: &CsiFrame, b: &CsiFrame, out: &mut Vec<f64>) {
    out.extend(
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (y - x).norm()),
    );
}

/// Streaming median, EMA, and low-pass chain with identical coefficients on
/// every channel. Output rows lag input by `median_window / 2`.
#[derive(Debug, Clone)]
pub struct ChannelFilterBank {
    sos: Sos,
    medians: Vec<StreamingMedian>,
    emas: Vec<Ema>,
    states: Vec<SosState>,
    times: VecDeque<f64>,
}

impl ChannelFilterBank {
    pub fn new(params: &FilterParams, channels: usize) -> Result<Self> {
        let sos = params.lowpass()?;
        Ok(ChannelFilterBank {
            medians: (0..channels)
                .map(|_| StreamingMedian::new(params.median_window))
                .collect::<Result<_>>()?,
            emas: (0..channels)
                .map(|_| Ema::new(params.ema_alpha))
                .collect::<Result<_>>()?,
            states: (0..channels).map(|_| SosState::new(&sos)).collect(),
            sos,
            times: VecDeque::new(),
        })
    }

    pub fn channels(&self) -> usize {
        self.medians.len()
    }

    /// Pushes one row; returns a filtered `(timestamp, row)` once the median
    /// window has filled.
    pub fn push(&mut self, t: f64, row: &[f64]) -> Option<(f64, Vec<f64>)> {
        self.times.push_back(t);
        let mut out: Option<Vec<f64>> = None;
        for (c, &x) in row.iter().enumerate() {
            if let Some(m) = self.medians[c].push(x) {
                let y = self.states[c].push(&self.sos, self.emas[c].push(m));
                out.get_or_insert_with(|| Vec::with_capacity(row.len())).push(y);
            }
        }
        out.map(|r| (self.times.pop_front().unwrap(), r))
    }

    /// Flushes the rows still held by the median stage.
    pub fn finish(&mut self) -> Vec<(f64, Vec<f64>)> {
        let tails: Vec<Vec<f64>> = self.medians.iter_mut().map(|m| m.finish()).collect();
        let pending = self.times.len();
        (0..pending)
            .map(|i| {
                let row = tails
                    .iter()
                    .enumerate()
                    .map(|(c, tail)| self.states[c].push(&self.sos, self.emas[c].push(tail[i])))
                    .collect();
                (self.times.pop_front().unwrap(), row)
            })
            .collect()
    }
}

/// Applies the smoothing chain to every channel of a matrix (batch form).
pub fn filter_matrix(m: &RealChannelMatrix, params: &FilterParams) -> Result<RealChannelMatrix> {
    let mut bank = ChannelFilterBank::new(params, m.channels)?;
    let mut samples = Vec::with_capacity(m.samples.len());
    let mut timestamps = Vec::with_capacity(m.rows());
    for k in 0..m.rows() {
        if let Some((t, r)) = bank.push(m.timestamps[k], m.row(k)) {
            timestamps.push(t);
            samples.extend(r);
        }
    }
    for (t, r) in bank.finish() {
        timestamps.push(t);
        samples.extend(r);
    }
    Ok(RealChannelMatrix {
        samples,
        timestamps,
        channels: m.channels,
        sample_rate: m.sample_rate,
    })
}

/// Epoch index of time `t` for a stream starting at `origin`.
pub fn epoch_index(t: f64, origin: f64, epoch_seconds: f64) -> i64 {
    ((t - origin) / epoch_seconds).floor() as i64
}

/// Whether an epoch whose last sample is at `last_t` reached its end boundary.
pub fn epoch_complete(last_t: f64, end_s: f64, sample_rate: f64) -> bool {
    sample_rate > 0.0 && end_s - last_t <= 1.5 / sample_rate
}

/// Splits a matrix into 30 s epochs anchored at its first timestamp.
pub fn epochize(m: &RealChannelMatrix, cfg: &StreamConfig) -> Vec<Epoch> {
    match m.timestamps.first() {
        Some(&t0) => epochize_from(m, cfg, t0),
        None => Vec::new(),
    }
}

/// Splits a matrix into epochs anchored at `origin`; the last epoch is flagged
/// partial when the stream stops short of its end boundary.
pub fn epochize_from(m: &RealChannelMatrix, cfg: &StreamConfig, origin: f64) -> Vec<Epoch> {
    let mut out = Vec::new();
    let n = m.rows();
    let mut k = 0;
    while k < n {
        let idx = epoch_index(m.timestamps[k], origin, cfg.epoch_seconds);
        let mut e = k;
        while e < n && epoch_index(m.timestamps[e], origin, cfg.epoch_seconds) == idx {
            e += 1;
        }
        let start_s = origin + idx as f64 * cfg.epoch_seconds;
        let last = e == n;
        let partial = last
            && !epoch_complete(m.timestamps[e - 1], start_s + cfg.epoch_seconds, m.sample_rate);
        let rows = e - k;
        let expected = if partial {
            ((cfg.epoch_seconds * m.sample_rate).round() as usize).max(rows)
        } else {
            rows
        };
        let data = DMatrix::from_fn(rows, m.channels, |r, c| m.samples[(k + r) * m.channels + c]);
        out.push(Epoch::raw(
            idx.max(0) as usize,
            start_s,
            data,
            m.timestamps[k..e].to_vec(),
            expected,
            partial,
        ));
        k = e;
    }
    out
}

/// Row indices selected when reducing `expected` rows to `target`; indices at
/// or beyond `available` stand for zero padding.
pub fn selection_indices(expected: usize, target: usize) -> Vec<usize> {
    if expected >= target {
        (0..target).map(|k| k * expected / target).collect()
    } else {
        (0..target).collect()
    }
}

/// Reduces an epoch to `target` rows by uniform index selection, padding with
/// zeros when the epoch is shorter than its expected length.
pub fn downsample_epoch(epoch: &Epoch, target: usize) -> Epoch {
    let rows = epoch.data.nrows();
    let expected = epoch.expected_rows.max(rows);
    let idx = selection_indices(expected, target);
    let valid = idx.iter().take_while(|&&i| i < rows).count();
    let data = DMatrix::from_fn(target, epoch.data.ncols(), |r, c| {
        if r < valid {
            epoch.data[(idx[r], c)]
        } else {
            0.0
        }
    });
    let timestamps = idx[..valid].iter().map(|&i| epoch.timestamps[i]).collect();
    let mut out = Epoch::raw(
        epoch.index,
        epoch.start_s,
        data,
        timestamps,
        target,
        epoch.partial,
    );
    out.valid_rows = valid;
    out
}
