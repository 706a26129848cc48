//! Median, exponential moving average, and Butterworth IIR filters.
//!
//! Every filter has a batch form and a streaming state that produces the
//! same output sample by sample.

use std::collections::VecDeque;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Centered median filter; the window shrinks symmetrically near the edges.
pub fn median_filter(x: &[f64], window: usize) -> Result<Vec<f64>> {
    check_median_window(window)?;
    let h = window / 2;
    let n = x.len();
    let mut buf = Vec::with_capacity(window);
    Ok((0..n)
        .map(|k| {
            let half = h.min(k).min(n - 1 - k);
            buf.clear();
            buf.extend_from_slice(&x[k - half..=k + half]);
            median_odd(&mut buf)
        })
        .collect())
}

fn check_median_window(window: usize) -> Result<()> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::Parameter(format!(
            "median window must be odd and positive, got {window}"
        )));
    }
    Ok(())
}

fn median_odd(buf: &mut [f64]) -> f64 {
    let mid = buf.len() / 2;
    let (_, m, _) = buf.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    *m
}

/// Streaming counterpart of [`median_filter`]. Output lags input by `window / 2`
/// samples; [`StreamingMedian::finish`] flushes the tail.
#[derive(Debug, Clone)]
pub struct StreamingMedian {
    half: usize,
    /// Samples from `emitted - half` (clamped at 0) onwards.
    buf: VecDeque<f64>,
    /// Index of the oldest sample held in `buf`.
    buf_start: usize,
    /// Number of inputs seen.
    seen: usize,
    /// Number of outputs produced.
    emitted: usize,
    scratch: Vec<f64>,
}

impl StreamingMedian {
    pub fn new(window: usize) -> Result<Self> {
        check_median_window(window)?;
        Ok(StreamingMedian {
            half: window / 2,
            buf: VecDeque::with_capacity(window + 1),
            buf_start: 0,
            seen: 0,
            emitted: 0,
            scratch: Vec::with_capacity(window),
        })
    }

    /// Pushes one sample and returns the output that became available, if any.
    pub fn push(&mut self, x: f64) -> Option<f64> {
        self.buf.push_back(x);
        self.seen += 1;
        if self.seen > self.emitted + self.half {
            Some(self.emit(None))
        } else {
            None
        }
    }

    /// Emits the outputs still pending at end of stream.
    pub fn finish(&mut self) -> Vec<f64> {
        let n = self.seen;
        let mut out = Vec::new();
        while self.emitted < n {
            out.push(self.emit(Some(n)));
        }
        out
    }

    fn emit(&mut self, end: Option<usize>) -> f64 {
        let k = self.emitted;
        let mut half = self.half.min(k);
        if let Some(n) = end {
            half = half.min(n - 1 - k);
        }
        let lo = k - half - self.buf_start;
        self.scratch.clear();
        self.scratch.extend(self.buf.range(lo..=lo + 2 * half));
        let v = median_odd(&mut self.scratch);
        self.emitted += 1;
        while self.buf_start + self.half < self.emitted {
            self.buf.pop_front();
            self.buf_start += 1;
        }
        v
    }
}

/// `y[0] = x[0]`, `y[k] = alpha * y[k-1] + (1 - alpha) * x[k]`.
pub fn ema_filter(x: &[f64], alpha: f64) -> Result<Vec<f64>> {
    let mut st = Ema::new(alpha)?;
    Ok(x.iter().map(|&v| st.push(v)).collect())
}

/// Streaming exponential moving average.
#[derive(Debug, Clone)]
pub struct Ema {
    alpha: f64,
    y: Option<f64>,
}

impl Ema {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Parameter(format!("EMA alpha {alpha} outside (0, 1]")));
        }
        Ok(Ema { alpha, y: None })
    }

    pub fn push(&mut self, x: f64) -> f64 {
        let y = match self.y {
            None => x,
            Some(prev) => self.alpha * prev + (1.0 - self.alpha) * x,
        };
        self.y = Some(y);
        y
    }
}

/// One second-order section, `b0 + b1 z^-1 + b2 z^-2` over `1 + a1 z^-1 + a2 z^-2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Complex response at normalized angular frequency `w` (rad/sample).
    pub fn response(&self, w: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let num = self.b[0] + z1 * self.b[1] + z2 * self.b[2];
        let den = Complex64::new(1.0, 0.0) + z1 * self.a[0] + z2 * self.a[1];
        num / den
    }
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

impl Sos {
    pub fn response(&self, w: f64) -> Complex64 {
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(w))
    }

    /// Applies the cascade causally from zero initial state.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut st = SosState::new(self);
        x.iter().map(|&v| st.push(self, v)).collect()
    }

    fn scale(&mut self, g: f64) {
        if let Some(s) = self.sections.first_mut() {
            for b in &mut s.b {
                *b *= g;
            }
        }
    }
}

/// Per-channel delay line for an [`Sos`] cascade (transposed direct form II).
#[derive(Debug, Clone)]
pub struct SosState {
    z: Vec<[f64; 2]>,
}

impl SosState {
    pub fn new(sos: &Sos) -> Self {
        SosState {
            z: vec![[0.0; 2]; sos.sections.len()],
        }
    }

    pub fn push(&mut self, sos: &Sos, x: f64) -> f64 {
        let mut v = x;
        for (s, z) in sos.sections.iter().zip(self.z.iter_mut()) {
            let y = s.b[0] * v + z[0];
            z[0] = s.b[1] * v - s.a[0] * y + z[1];
            z[1] = s.b[2] * v - s.a[1] * y;
            v = y;
        }
        v
    }
}

/// Analog section `(n2 s^2 + n1 s + n0) / (d2 s^2 + d1 s + d0)` mapped through
/// the bilinear transform `s = 2 (1 - z^-1) / (1 + z^-1)`.
fn bilinear(n: [f64; 3], d: [f64; 3]) -> Biquad {
    let k = 2.0;
    let k2 = k * k;
    let map = |p: [f64; 3]| {
        [
            p[2] * k2 + p[1] * k + p[0],
            2.0 * (p[0] - p[2] * k2),
            p[2] * k2 - p[1] * k + p[0],
        ]
    };
    let nb = map(n);
    let da = map(d);
    Biquad {
        b: [nb[0] / da[0], nb[1] / da[0], nb[2] / da[0]],
        a: [da[1] / da[0], da[2] / da[0]],
    }
}

/// Poles of the unit-cutoff analog Butterworth prototype in the upper half
/// plane (plus the real pole for odd orders).
fn prototype_poles(order: usize) -> (Vec<Complex64>, bool) {
    let n = order as f64;
    let pairs = (0..order / 2)
        .map(|k| {
            let theta = std::f64::consts::PI * (2.0 * k as f64 + n + 1.0) / (2.0 * n);
            Complex64::from_polar(1.0, theta)
        })
        .collect();
    (pairs, order % 2 == 1)
}

fn prewarp(w: f64) -> f64 {
    2.0 * (w / 2.0).tan()
}

/// Butterworth low-pass design; `cutoff` is in rad/sample, `0 < cutoff < pi`.
/// DC gain is exactly one.
pub fn butterworth_lowpass_design(cutoff: f64, order: usize) -> Result<Sos> {
    if !(cutoff > 0.0 && cutoff < std::f64::consts::PI) {
        return Err(Error::Parameter(format!(
            "cutoff {cutoff} rad/sample outside (0, pi)"
        )));
    }
    if order == 0 {
        return Err(Error::Parameter("filter order must be at least 1".into()));
    }
    let wc = prewarp(cutoff);
    let (pairs, odd) = prototype_poles(order);
    let mut sections: Vec<Biquad> = pairs
        .iter()
        .map(|p| {
            let p = p * wc;
            bilinear([p.norm_sqr(), 0.0, 0.0], [p.norm_sqr(), -2.0 * p.re, 1.0])
        })
        .collect();
    if odd {
        sections.push(bilinear([wc, 0.0, 0.0], [wc, 1.0, 0.0]));
    }
    let mut sos = Sos { sections };
    let g = sos.response(0.0).norm();
    sos.scale(1.0 / g);
    Ok(sos)
}

/// Butterworth band-pass design with a prototype of `order` poles (so `2 * order`
/// poles overall). Edges are in rad/sample. Gain is one at the geometric centre.
pub fn butterworth_bandpass_design(low: f64, high: f64, order: usize) -> Result<Sos> {
    if !(low > 0.0 && low < high && high < std::f64::consts::PI) {
        return Err(Error::Parameter(format!(
            "band edges ({low}, {high}) rad/sample must satisfy 0 < low < high < pi"
        )));
    }
    if order == 0 {
        return Err(Error::Parameter("filter order must be at least 1".into()));
    }
    let w1 = prewarp(low);
    let w2 = prewarp(high);
    let bw = w2 - w1;
    let w0sq = w1 * w2;
    let (pairs, odd) = prototype_poles(order);
    let mut sections = Vec::with_capacity(order);
    for p in pairs {
        // Each prototype pole p maps to the roots of s^2 - p*bw*s + w0^2.
        let pb = p * bw;
        let disc = (pb * pb - 4.0 * w0sq).sqrt();
        for q in [(pb + disc) / 2.0, (pb - disc) / 2.0] {
            sections.push(bilinear([0.0, bw, 0.0], [q.norm_sqr(), -2.0 * q.re, 1.0]));
        }
    }
    if odd {
        sections.push(bilinear([0.0, bw, 0.0], [w0sq, bw, 1.0]));
    }
    let mut sos = Sos { sections };
    let centre = 2.0 * (w0sq.sqrt() / 2.0).atan();
    let g = sos.response(centre).norm();
    sos.scale(1.0 / g);
    Ok(sos)
}

/// Causal Butterworth low-pass of a single series.
pub fn butterworth_lowpass(x: &[f64], cutoff: f64, order: usize) -> Result<Vec<f64>> {
    Ok(butterworth_lowpass_design(cutoff, order)?.filter(x))
}
