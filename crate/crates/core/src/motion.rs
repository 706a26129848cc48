//! Online hyper-ellipsoid outlier detection and motion-event formation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{chi2_cdf, chi2_quantile};

/// Upper bound on the sample count used by the literal recursion.
pub const K_CAP: u64 = 1_000_000;

/// How the inverse covariance is carried forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceRecursion {
    /// `S <- alpha * (S + (1 - alpha) d d^T)`, the exponentially weighted
    /// covariance matching the EMA mean. Steady state tracks the stream covariance.
    #[default]
    Exponential,
    /// `S <- alpha (k-1)/k * S + alpha^2/k * d d^T` with a growing count `k`.
    /// With `alpha < 1` the covariance decays towards zero as `k` grows.
    Literal,
}

/// Detector tunables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionParams {
    /// Consecutive outliers needed for a micro-event (E1).
    pub e1_consecutive: usize,
    /// Largest gap, in samples, across which micro-events merge (E2).
    pub e2_merge_gap: usize,
    pub coverage: f64,
    pub alpha: f64,
    pub init_samples: usize,
    pub ridge_epsilon: f64,
    /// Whether outlying samples still update the mean and covariance.
    pub update_on_outlier: bool,
    pub recursion: CovarianceRecursion,
}

impl Default for MotionParams {
    fn default() -> Self {
        MotionParams {
            e1_consecutive: 5,
            e2_merge_gap: 100,
            coverage: 0.98,
            alpha: 0.9995,
            init_samples: 200,
            ridge_epsilon: 1e-6,
            update_on_outlier: false,
            recursion: CovarianceRecursion::Exponential,
        }
    }
}

impl MotionParams {
    pub fn validate(&self, dims: usize) -> Result<()> {
        if self.e1_consecutive == 0 {
            return Err(Error::Parameter("e1_consecutive must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Parameter(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.init_samples <= dims {
            return Err(Error::Parameter(format!(
                "init_samples {} must exceed dimension {dims}",
                self.init_samples
            )));
        }
        if !(self.ridge_epsilon > 0.0) {
            return Err(Error::Parameter("ridge_epsilon must be positive".into()));
        }
        chi2_radius(dims, self.coverage).map(|_| ())
    }
}

/// `t` such that `t^2` is the chi-squared quantile at `coverage` with `d` degrees of freedom.
pub fn chi2_radius(d: usize, coverage: f64) -> Result<f64> {
    Ok(chi2_quantile(coverage, d)?.sqrt())
}

/// Running mean and inverse covariance of normal (motion-free) samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidState {
    pub k: u64,
    pub mean: DVector<f64>,
    pub inv_cov: DMatrix<f64>,
    pub radius: f64,
    pub forgetting: f64,
    pub dims: usize,
    pub recursion: CovarianceRecursion,
    pub update_on_outlier: bool,
    /// Divides the rank-one term. Below one when outliers are skipped, since
    /// the retained Gaussian core has covariance `consistency * Sigma`.
    #[serde(default = "unit")]
    pub consistency: f64,
}

fn unit() -> f64 {
    1.0
}

/// Covariance shrink factor of a `d`-dimensional Gaussian truncated to `q <= t2`.
pub fn truncation_factor(d: usize, t2: f64) -> f64 {
    chi2_cdf(t2, d + 2) / chi2_cdf(t2, d)
}

/// Result of scoring one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub mahalanobis: f64,
    pub outlier: bool,
}

impl EllipsoidState {
    /// Batch initialization from the first `k0` samples.
    pub fn init(samples: &[DVector<f64>], params: &MotionParams) -> Result<Self> {
        let d = samples.first().map_or(0, |s| s.len());
        let k0 = samples.len();
        if d == 0 {
            return Err(Error::Initialization("no samples".into()));
        }
        if k0 <= d {
            return Err(Error::Initialization(format!(
                "{k0} samples cannot initialize a {d}-dimensional ellipsoid"
            )));
        }
        if samples.iter().any(|s| s.len() != d) {
            return Err(Error::Initialization("samples differ in dimension".into()));
        }
        if samples.iter().any(|s| s.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("initialization sample".into()));
        }
        let n = k0 as f64;
        let mean = samples.iter().fold(DVector::zeros(d), |acc, s| acc + s) / n;
        let second = samples
            .iter()
            .fold(DMatrix::zeros(d, d), |acc, s| acc + s * s.transpose())
            / n;
        let mut cov = second - &mean * mean.transpose();
        cov = (&cov + cov.transpose()) * 0.5;
        let eig = cov.clone().symmetric_eigenvalues();
        let max_eig = eig.max();
        let min_eig = eig.min();
        if !(min_eig > 1e-10 * max_eig) || max_eig <= 0.0 {
            let trace = cov.trace();
            let eps = if trace > 0.0 {
                params.ridge_epsilon * trace / d as f64
            } else {
                params.ridge_epsilon
            };
            cov += DMatrix::identity(d, d) * eps;
        }
        let inv_cov = cov
            .cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| Error::Initialization("covariance is not positive definite".into()))?;
        let radius = chi2_radius(d, params.coverage)?;
        Ok(EllipsoidState {
            k: k0 as u64,
            mean,
            inv_cov,
            radius,
            consistency: if params.update_on_outlier {
                1.0
            } else {
                truncation_factor(d, radius * radius)
            },
            forgetting: params.alpha,
            dims: d,
            recursion: params.recursion,
            update_on_outlier: params.update_on_outlier,
        })
    }

    /// Mahalanobis distance of `r` under the current state.
    pub fn mahalanobis(&self, r: &DVector<f64>) -> f64 {
        let delta = r - &self.mean;
        (delta.dot(&(&self.inv_cov * &delta))).max(0.0).sqrt()
    }

    /// Scores `r` against the current state, then folds it into the statistics.
    pub fn update(&mut self, r: &DVector<f64>) -> Result<Score> {
        if r.len() != self.dims {
            return Err(Error::Parameter(format!(
                "expected a {}-vector, got {}",
                self.dims,
                r.len()
            )));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ellipsoid update vector".into()));
        }
        let delta = r - &self.mean;
        let s_delta = &self.inv_cov * &delta;
        let q = delta.dot(&s_delta).max(0.0);
        let mahalanobis = q.sqrt();
        let outlier = mahalanobis > self.radius;
        if outlier && !self.update_on_outlier {
            return Ok(Score {
                mahalanobis,
                outlier,
            });
        }

        let alpha = self.forgetting;
        self.mean = &self.mean * alpha + r * (1.0 - alpha);

        // S' = a S + b d d^T, inverted with Sherman-Morrison.
        let (a, b) = match self.recursion {
            CovarianceRecursion::Exponential => (alpha, alpha * (1.0 - alpha)),
            CovarianceRecursion::Literal => {
                let k = self.k as f64;
                (alpha * (k - 1.0) / k, alpha * alpha / k)
            }
        };
        let b = b / self.consistency;
        let denom = a / b + q;
        self.inv_cov -= &s_delta * s_delta.transpose() / denom;
        self.inv_cov /= a;
        let sym = (&self.inv_cov + self.inv_cov.transpose()) * 0.5;
        self.inv_cov = sym;
        self.k = (self.k + 1).min(K_CAP);
        Ok(Score {
            mahalanobis,
            outlier,
        })
    }
}

/// One scored sample on the 20 Hz grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierSample {
    pub t: f64,
    pub mahalanobis: f64,
    pub outlier: bool,
}

/// A merged run of micro-events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionEvent {
    pub start_s: f64,
    pub end_s: f64,
    pub micro_event_count: usize,
    pub peak_mahalanobis: f64,
    /// First sample index covered.
    #[serde(skip)]
    pub start_index: usize,
    /// Last sample index covered (inclusive).
    #[serde(skip)]
    pub end_index: usize,
}

impl MotionEvent {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Batch event formation: runs of at least `e1` outliers become micro-events,
/// and micro-events separated by at most `e2` samples merge with their gap.
/// An event ends one `period` after its last sample.
pub fn detect_events(samples: &[OutlierSample], e1: usize, e2: usize, period: f64) -> Vec<MotionEvent> {
    let mut micro: Vec<(usize, usize, f64)> = Vec::new();
    let mut i = 0;
    while i < samples.len() {
        if !samples[i].outlier {
            i += 1;
            continue;
        }
        let start = i;
        let mut peak = 0.0_f64;
        while i < samples.len() && samples[i].outlier {
            peak = peak.max(samples[i].mahalanobis);
            i += 1;
        }
        if i - start >= e1.max(1) {
            micro.push((start, i - 1, peak));
        }
    }
    let mut events: Vec<MotionEvent> = Vec::new();
    for (s, e, peak) in micro {
        match events.last_mut() {
            Some(last) if s - last.end_index - 1 <= e2 => {
                last.end_index = e;
                last.micro_event_count += 1;
                last.peak_mahalanobis = last.peak_mahalanobis.max(peak);
            }
            _ => events.push(MotionEvent {
                start_s: 0.0,
                end_s: 0.0,
                micro_event_count: 1,
                peak_mahalanobis: peak,
                start_index: s,
                end_index: e,
            }),
        }
    }
    for ev in &mut events {
        ev.start_s = samples[ev.start_index].t;
        ev.end_s = samples[ev.end_index].t + period;
    }
    events
}

#[derive(Debug, Clone)]
struct OpenEvent {
    start: usize,
    end: usize,
    start_t: f64,
    end_t: f64,
    micro: usize,
    peak: f64,
}

/// Streaming form of [`detect_events`] that also reports which samples have a
/// settled motion label.
#[derive(Debug, Clone)]
pub struct EventTracker {
    e1: usize,
    e2: usize,
    period: f64,
    n: usize,
    run_start: usize,
    run_len: usize,
    run_peak: f64,
    run_start_t: f64,
    open: Option<OpenEvent>,
    closed: Vec<MotionEvent>,
    finished: bool,
}

impl EventTracker {
    pub fn new(e1: usize, e2: usize, period: f64) -> Self {
        EventTracker {
            e1: e1.max(1),
            e2,
            period,
            n: 0,
            run_start: 0,
            run_len: 0,
            run_peak: 0.0,
            run_start_t: 0.0,
            open: None,
            closed: Vec::new(),
            finished: false,
        }
    }

    /// Number of samples pushed so far.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn push(&mut self, s: OutlierSample) {
        let i = self.n;
        self.n += 1;
        if s.outlier {
            if self.run_len == 0 {
                self.run_start = i;
                self.run_start_t = s.t;
                self.run_peak = 0.0;
            }
            self.run_len += 1;
            self.run_peak = self.run_peak.max(s.mahalanobis);
            if self.run_len == self.e1 {
                self.confirm_run(s.t);
            } else if self.run_len > self.e1 {
                let ev = self.open.as_mut().expect("confirmed run has an open event");
                ev.end = i;
                ev.end_t = s.t;
                ev.peak = ev.peak.max(self.run_peak);
            }
        } else {
            self.run_len = 0;
        }
        self.close_if_settled();
    }

    fn confirm_run(&mut self, t: f64) {
        let start = self.run_start;
        let end = start + self.run_len - 1;
        let merge = matches!(&self.open, Some(ev) if start - ev.end - 1 <= self.e2);
        if merge {
            let ev = self.open.as_mut().unwrap();
            ev.end = end;
            ev.end_t = t;
            ev.micro += 1;
            ev.peak = ev.peak.max(self.run_peak);
        } else {
            self.close_open();
            self.open = Some(OpenEvent {
                start,
                end,
                start_t: self.run_start_t,
                end_t: t,
                micro: 1,
                peak: self.run_peak,
            });
        }
    }

    fn close_if_settled(&mut self) {
        let Some(ev) = &self.open else { return };
        let next_start = if self.run_len > 0 && self.run_len < self.e1 {
            self.run_start
        } else if self.run_len >= self.e1 {
            return;
        } else {
            self.n
        };
        if next_start - ev.end - 1 > self.e2 {
            self.close_open();
        }
    }

    fn close_open(&mut self) {
        if let Some(ev) = self.open.take() {
            self.closed.push(MotionEvent {
                start_s: ev.start_t,
                end_s: ev.end_t + self.period,
                micro_event_count: ev.micro,
                peak_mahalanobis: ev.peak,
                start_index: ev.start,
                end_index: ev.end,
            });
        }
    }

    /// Samples below this index have a final motion label.
    pub fn settled_until(&self) -> usize {
        if self.finished {
            self.n
        } else {
            self.n.saturating_sub(self.e1 + self.e2)
        }
    }

    /// Whether sample `idx` (below [`Self::settled_until`]) lies inside an event.
    pub fn in_motion(&self, idx: usize) -> bool {
        if let Some(ev) = &self.open {
            if idx >= ev.start && idx <= ev.end {
                return true;
            }
        }
        let pos = self.closed.partition_point(|e| e.end_index < idx);
        self.closed
            .get(pos)
            .is_some_and(|e| e.start_index <= idx && idx <= e.end_index)
    }

    /// Closes any open event; all samples become settled.
    pub fn finish(&mut self) {
        self.close_open();
        self.run_len = 0;
        self.finished = true;
    }

    /// Events closed so far.
    pub fn events(&self) -> &[MotionEvent] {
        &self.closed
    }
}

/// Initialization buffer, ellipsoid, and event tracker for one stream.
#[derive(Debug, Clone)]
pub struct MotionDetector {
    params: MotionParams,
    dims: usize,
    warmup: Vec<DVector<f64>>,
    state: Option<EllipsoidState>,
    tracker: EventTracker,
    outliers: usize,
    scored: usize,
}

impl MotionDetector {
    pub fn new(params: MotionParams, dims: usize, period: f64) -> Result<Self> {
        params.validate(dims)?;
        Ok(MotionDetector {
            params,
            dims,
            warmup: Vec::with_capacity(params.init_samples),
            state: None,
            tracker: EventTracker::new(params.e1_consecutive, params.e2_merge_gap, period),
            outliers: 0,
            scored: 0,
        })
    }

    /// Scores one sample. Samples used for initialization are never outliers.
    pub fn push(&mut self, t: f64, r: &[f64]) -> Result<OutlierSample> {
        if r.len() != self.dims {
            return Err(Error::Parameter(format!(
                "expected {} motion components, got {}",
                self.dims,
                r.len()
            )));
        }
        let v = DVector::from_column_slice(r);
        let sample = match &mut self.state {
            Some(state) => {
                let s = state.update(&v)?;
                self.scored += 1;
                self.outliers += s.outlier as usize;
                OutlierSample {
                    t,
                    mahalanobis: s.mahalanobis,
                    outlier: s.outlier,
                }
            }
            None => {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite("motion sample".into()));
                }
                self.warmup.push(v);
                if self.warmup.len() == self.params.init_samples {
                    self.state = Some(EllipsoidState::init(&self.warmup, &self.params)?);
                    self.warmup = Vec::new();
                }
                OutlierSample {
                    t,
                    mahalanobis: 0.0,
                    outlier: false,
                }
            }
        };
        self.tracker.push(sample);
        Ok(sample)
    }

    pub fn tracker(&self) -> &EventTracker {
        &self.tracker
    }

    pub fn state(&self) -> Option<&EllipsoidState> {
        self.state.as_ref()
    }

    /// Fraction of scored samples flagged as outliers.
    pub fn outlier_fraction(&self) -> f64 {
        if self.scored == 0 {
            0.0
        } else {
            self.outliers as f64 / self.scored as f64
        }
    }

    pub fn finish(&mut self) {
        self.tracker.finish();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
        DVector::from_fn(d, |_, _| StandardNormal.sample(rng))
    }

    fn state(mean: DVector<f64>, inv_cov: DMatrix<f64>) -> EllipsoidState {
        let d = mean.len();
        EllipsoidState {
            k: 1000,
            mean,
            inv_cov,
            radius: chi2_radius(d, 0.98).unwrap(),
            forgetting: 0.9995,
            dims: d,
            recursion: CovarianceRecursion::Exponential,
            update_on_outlier: false,
            consistency: 1.0,
        }
    }

    #[test]
    fn truncation_factor_matches_sampled_core() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let t2 = chi2_radius(3, 0.98).unwrap().powi(2);
        let c = truncation_factor(3, t2);
        let oracle = ChiSquared::new(5.0).unwrap().cdf(t2) / ChiSquared::new(3.0).unwrap().cdf(t2);
        assert!((c - oracle).abs() < 1e-10);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (mut sum, mut n) = (0.0, 0usize);
        for _ in 0..200_000 {
            let g = gaussian(&mut rng, 3);
            if g.norm_squared() <= t2 {
                sum += g[0] * g[0];
                n += 1;
            }
        }
        assert!((sum / n as f64 - c).abs() < 0.01);
    }

    fn flags(bits: &str) -> Vec<OutlierSample> {
        bits.chars()
            .enumerate()
            .map(|(i, c)| OutlierSample {
                t: i as f64 * 0.05,
                mahalanobis: if c == '1' { 10.0 } else { 0.5 },
                outlier: c == '1',
            })
            .collect()
    }

    #[test]
    fn radius_values() {
        assert!((chi2_radius(1, 0.98).unwrap().powi(2) - 5.4119).abs() < 1e-3);
        assert!((chi2_radius(3, 0.98).unwrap().powi(2) - 9.8374).abs() < 1e-3);
        assert!(chi2_radius(1, 1e-12).unwrap() < 1e-5);
        assert!(chi2_radius(2, 1e-12).unwrap() < 1e-5);
        // For d = 3 the quantile scales as p^(2/3), so t is about 1.5e-4 here.
        let t3 = chi2_radius(3, 1e-12).unwrap();
        assert!(t3 > 1e-4 && t3 < 2e-4);
    }

    #[test]
    fn euclidean_case_and_centre() {
        let mut s = state(DVector::zeros(3), DMatrix::identity(3, 3));
        let r = DVector::from_vec(vec![3.0, 0.0, 0.0]);
        assert!((s.mahalanobis(&r) - 3.0).abs() < 1e-12);
        let score = s.update(&DVector::zeros(3)).unwrap();
        assert_eq!(score.mahalanobis, 0.0);
        assert!(!score.outlier);
    }

    #[test]
    fn init_from_gaussian_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<DVector<f64>> = (0..2000).map(|_| gaussian(&mut rng, 3)).collect();
        let s = EllipsoidState::init(&samples, &MotionParams::default()).unwrap();
        assert!(s.mean.iter().all(|m| m.abs() < 0.1));
        assert!((&s.inv_cov - DMatrix::identity(3, 3)).abs().max() < 0.15);
        assert_eq!(s.k, 2000);
    }

    #[test]
    fn init_degenerate_and_boundary() {
        let p = MotionParams::default();
        let same = vec![DVector::from_vec(vec![1.0, 2.0, 3.0]); 50];
        let s = EllipsoidState::init(&same, &p).unwrap();
        let want = DMatrix::identity(3, 3) / p.ridge_epsilon;
        assert!((&s.inv_cov - want).abs().max() < 1e-6 / p.ridge_epsilon);
        let three: Vec<DVector<f64>> = (0..3).map(|i| DVector::from_element(3, i as f64)).collect();
        assert!(matches!(EllipsoidState::init(&three, &p), Err(Error::Initialization(_))));
    }

    #[test]
    fn update_rejects_non_finite() {
        let mut s = state(DVector::zeros(2), DMatrix::identity(2, 2));
        let bad = DVector::from_vec(vec![f64::NAN, 0.0]);
        assert!(matches!(s.update(&bad), Err(Error::NonFinite(_))));
    }

    #[test]
    fn both_recursions_track_direct_inverse() {
        for recursion in [CovarianceRecursion::Exponential, CovarianceRecursion::Literal] {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let params = MotionParams {
                recursion,
                update_on_outlier: true,
                ..MotionParams::default()
            };
            let init: Vec<DVector<f64>> = (0..200).map(|_| gaussian(&mut rng, 3)).collect();
            let mut st = EllipsoidState::init(&init, &params).unwrap();
            let mut cov = st.inv_cov.clone().try_inverse().unwrap();
            for _ in 0..2000 {
                let r = gaussian(&mut rng, 3);
                let delta = &r - &st.mean;
                let k = st.k as f64;
                let a = 0.9995;
                cov = match recursion {
                    CovarianceRecursion::Exponential => (&cov + &delta * delta.transpose() * (1.0 - a)) * a,
                    CovarianceRecursion::Literal => &cov * (a * (k - 1.0) / k) + &delta * delta.transpose() * (a * a / k),
                };
                st.update(&r).unwrap();
                let direct = cov.clone().try_inverse().unwrap();
                let scale = direct.abs().max().max(1.0);
                assert!((&st.inv_cov - direct).abs().max() < 1e-9 * scale);
                assert!((&st.inv_cov - st.inv_cov.transpose()).abs().max() < 1e-9);
            }
            assert!(st.inv_cov.clone().cholesky().is_some());
        }
    }

    #[test]
    fn outliers_do_not_move_frozen_statistics() {
        let mut s = state(DVector::zeros(2), DMatrix::identity(2, 2));
        let before = s.clone();
        let score = s.update(&DVector::from_vec(vec![50.0, 0.0])).unwrap();
        assert!(score.outlier);
        assert_eq!(s, before);
        s.update_on_outlier = true;
        s.update(&DVector::from_vec(vec![50.0, 0.0])).unwrap();
        assert!(s.mean[0] > 0.0);
    }

    #[test]
    fn event_examples() {
        assert!(detect_events(&flags("0000000"), 5, 100, 0.05).is_empty());
        let ev = detect_events(&flags("00111110000"), 5, 100, 0.05);
        assert_eq!(ev.len(), 1);
        assert_eq!((ev[0].start_index, ev[0].end_index), (2, 6));
        assert!((ev[0].start_s - 0.1).abs() < 1e-12);
        assert!((ev[0].end_s - 0.35).abs() < 1e-12);
        assert!(detect_events(&flags("0011110000"), 5, 100, 0.05).is_empty());

        // Gap of E2 samples merges; E2 + 1 does not.
        let merged = detect_events(&flags("11111000111110"), 5, 3, 0.05);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].micro_event_count, 2);
        assert_eq!(merged[0].end_index, 12);
        let split = detect_events(&flags("111110000111110"), 5, 3, 0.05);
        assert_eq!(split.len(), 2);
    }

    #[test]
    fn trailing_non_outliers_do_not_change_events() {
        let a = detect_events(&flags("0111110011111100000"), 5, 2, 0.05);
        let b = detect_events(&flags("01111100111111000000000000"), 5, 2, 0.05);
        assert_eq!(a, b);
    }

    #[test]
    fn tracker_matches_batch_and_settles() {
        let f = flags("0011111000000111110011111100000000000000000111111111100");
        let mut tr = EventTracker::new(5, 4, 0.05);
        for s in &f {
            tr.push(*s);
        }
        tr.finish();
        assert_eq!(tr.events(), detect_events(&f, 5, 4, 0.05).as_slice());
        assert_eq!(tr.settled_until(), f.len());
        assert!(tr.in_motion(3));
        assert!(!tr.in_motion(10));
    }

    #[test]
    fn detector_warms_up_then_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut det = MotionDetector::new(MotionParams::default(), 3, 0.05).unwrap();
        for i in 0..200 {
            let v = gaussian(&mut rng, 3);
            assert!(!det.push(i as f64 * 0.05, v.as_slice()).unwrap().outlier);
        }
        assert!(det.state().is_some());
        let far = det.push(10.0, &[40.0, 40.0, 40.0]).unwrap();
        assert!(far.outlier);
        assert!(det.push(10.05, &[1.0, 2.0]).is_err());
    }
}
