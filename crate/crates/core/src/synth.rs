//! Synthetic multipath channel: a static response plus moving reflectors
//! whose path lengths follow breathing, limb-motion, or still trajectories.
//!
//! `H(f, t) = H_s(f) + sum_i K / D_i(t)^2 * exp(j 2 pi D_i(t) / lambda)` with
//! `D_i(t) = D0_i + d_i(t)`, plus circular complex Gaussian noise.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::breath::{maxmin_normalize, MAX_BPM, MIN_BPM};
use crate::csi::{CsiFrame, Dims, GroundTruthRecord, GtState};
use crate::error::{Error, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Subcarrier indices reported for a 20 MHz channel (30 grouped subcarriers).
pub const DEFAULT_SUBCARRIERS: [i32; 30] = [
    -28, -26, -24, -22, -20, -18, -16, -14, -12, -10, -8, -6, -4, -2, -1, 1, 3, 5, 7, 9, 11, 13,
    15, 17, 19, 21, 23, 25, 27, 28,
];

/// Knot spacing of the limb-motion random walk, in seconds.
const WALK_KNOT_S: f64 = 0.1;
/// Length of the raised-cosine ramps at each end of a motion burst, in seconds.
const WALK_RAMP_S: f64 = 0.5;

fn default_one() -> usize {
    1
}
fn default_center() -> f64 {
    5.32e9
}
fn default_spacing() -> f64 {
    312.5e3
}
fn default_subcarriers() -> Vec<i32> {
    DEFAULT_SUBCARRIERS.to_vec()
}
fn default_k() -> f64 {
    1.0
}

/// Path-length trajectory of one reflector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trajectory {
    /// `d(t) = amplitude * sin(2 pi rate/60 t + phase)`.
    BreathingSinusoid {
        rate_bpm: f64,
        amplitude_m: f64,
        #[serde(default)]
        phase_rad: f64,
    },
    /// Seeded, smoothed random walk bounded by `amplitude_m`, active on
    /// `[start_s, start_s + duration_s)` and zero elsewhere.
    MotionBurst {
        start_s: f64,
        duration_s: f64,
        amplitude_m: f64,
        seed: u64,
    },
    Still,
}

impl Trajectory {
    fn amplitude(&self) -> f64 {
        match self {
            Trajectory::BreathingSinusoid { amplitude_m, .. } => *amplitude_m,
            Trajectory::MotionBurst { amplitude_m, .. } => *amplitude_m,
            Trajectory::Still => 0.0,
        }
    }
}

/// A reflector at base distance `base_distance_m` moving along `trajectory`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicPath {
    pub base_distance_m: f64,
    pub trajectory: Trajectory,
    /// Optional `[from, to)` window in seconds outside which the path is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active: Option<[f64; 2]>,
}

impl DynamicPath {
    pub fn new(base_distance_m: f64, trajectory: Trajectory) -> Self {
        DynamicPath {
            base_distance_m,
            trajectory,
            active: None,
        }
    }

    pub fn active_at(&self, t: f64) -> bool {
        self.active.is_none_or(|[a, b]| t >= a && t < b)
    }
}

/// Scene description; every field except `dynamic_paths` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultipathScene {
    #[serde(default = "default_one")]
    pub tx_antennas: usize,
    #[serde(default = "default_one")]
    pub rx_antennas: usize,
    #[serde(default = "default_center")]
    pub center_freq_hz: f64,
    #[serde(default = "default_spacing")]
    pub subcarrier_spacing_hz: f64,
    #[serde(default = "default_subcarriers")]
    pub subcarrier_indices: Vec<i32>,
    /// Explicit static response `[tx][rx][sub]` as `[re, im]` pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub static_cfr: Option<Vec<Vec<Vec<[f64; 2]>>>>,
    /// Fixed reflector distances used to build the static response when
    /// `static_cfr` is absent.
    #[serde(default)]
    pub static_paths_m: Vec<f64>,
    #[serde(default)]
    pub dynamic_paths: Vec<DynamicPath>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "default_k")]
    pub k: f64,
}

impl Default for MultipathScene {
    fn default() -> Self {
        MultipathScene {
            tx_antennas: 1,
            rx_antennas: 1,
            center_freq_hz: default_center(),
            subcarrier_spacing_hz: default_spacing(),
            subcarrier_indices: default_subcarriers(),
            static_cfr: None,
            static_paths_m: Vec::new(),
            dynamic_paths: Vec::new(),
            noise_sigma: 0.0,
            k: 1.0,
        }
    }
}

impl MultipathScene {
    pub fn dims(&self) -> Dims {
        Dims::new(self.tx_antennas, self.rx_antennas, self.subcarrier_indices.len())
    }

    /// Wavelength of each subcarrier in meters.
    pub fn wavelengths(&self) -> Vec<f64> {
        self.subcarrier_indices
            .iter()
            .map(|&i| SPEED_OF_LIGHT / (self.center_freq_hz + i as f64 * self.subcarrier_spacing_hz))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if self.subcarrier_indices.is_empty() {
            return bad("scene has no subcarriers, so no wavelengths".into());
        }
        if self.tx_antennas == 0 || self.rx_antennas == 0 {
            return bad("antenna counts must be positive".into());
        }
        if self.wavelengths().iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return bad("wavelengths must be positive".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma {} must be non-negative", self.noise_sigma));
        }
        if !self.k.is_finite() {
            return bad("k must be finite".into());
        }
        if let Some(s) = &self.static_cfr {
            let d = self.dims();
            let ok = s.len() == d.tx
                && s.iter().all(|r| {
                    r.len() == d.rx && r.iter().all(|v| v.len() == d.sub && v.iter().all(|p| p[0].is_finite() && p[1].is_finite()))
                });
            if !ok {
                return bad(format!("static_cfr must be a finite {}x{}x{} tensor", d.tx, d.rx, d.sub));
            }
        }
        if self.static_paths_m.iter().any(|d| !(*d > 0.0)) {
            return bad("static path distances must be positive".into());
        }
        for (i, p) in self.dynamic_paths.iter().enumerate() {
            if !(p.base_distance_m > 0.0 && p.base_distance_m.is_finite()) {
                return bad(format!("path {i}: base_distance_m must be positive"));
            }
            let amp = p.trajectory.amplitude();
            if !(amp >= 0.0 && amp <= p.base_distance_m / 10.0) {
                return bad(format!(
                    "path {i}: amplitude {amp} m must lie in [0, base_distance_m / 10]"
                ));
            }
            match &p.trajectory {
                Trajectory::BreathingSinusoid { rate_bpm, phase_rad, .. } => {
                    if !(MIN_BPM..=MAX_BPM).contains(rate_bpm) {
                        return bad(format!("path {i}: rate {rate_bpm} BPM outside [10, 40]"));
                    }
                    if !phase_rad.is_finite() {
                        return bad(format!("path {i}: phase must be finite"));
                    }
                }
                Trajectory::MotionBurst { start_s, duration_s, .. } => {
                    if !(start_s.is_finite() && *duration_s > 0.0 && duration_s.is_finite()) {
                        return bad(format!("path {i}: burst needs a finite start and positive duration"));
                    }
                }
                Trajectory::Still => {}
            }
            if let Some([a, b]) = p.active {
                if !(a < b) {
                    return bad(format!("path {i}: active window must be increasing"));
                }
            }
        }
        Ok(())
    }

    /// Static response flattened in `[tx][rx][sub]` order.
    pub fn static_response(&self) -> Vec<Complex64> {
        let d = self.dims();
        match &self.static_cfr {
            Some(s) => s
                .iter()
                .flat_map(|r| r.iter().flat_map(|v| v.iter().map(|p| Complex64::new(p[0], p[1]))))
                .collect(),
            None => {
                let per_sub: Vec<Complex64> = self
                    .wavelengths()
                    .iter()
                    .map(|&lam| self.static_paths_m.iter().map(|&dist| path_gain(self.k, dist, lam)).sum())
                    .collect();
                (0..d.tx * d.rx).flat_map(|_| per_sub.iter().copied()).collect()
            }
        }
    }

    /// Ground-truth state of the scene at time `t`.
    pub fn state_at(&self, t: f64) -> (GtState, Option<f64>) {
        let mut rate = None;
        for p in self.dynamic_paths.iter().filter(|p| p.active_at(t)) {
            match p.trajectory {
                Trajectory::MotionBurst { start_s, duration_s, .. } => {
                    if t >= start_s && t < start_s + duration_s {
                        return (GtState::Motion, None);
                    }
                }
                Trajectory::BreathingSinusoid { rate_bpm, .. } => {
                    rate.get_or_insert(rate_bpm);
                }
                Trajectory::Still => {}
            }
        }
        match rate {
            Some(r) => (GtState::Breathing, Some(r)),
            None => (GtState::Absent, None),
        }
    }
}

fn path_gain(k: f64, distance: f64, lambda: f64) -> Complex64 {
    Complex64::from_polar(k / (distance * distance), 2.0 * std::f64::consts::PI * distance / lambda)
}

/// Trajectory with its random parameters resolved.
#[derive(Debug, Clone)]
enum Motion {
    Sinusoid { omega: f64, amp: f64, phase: f64 },
    Walk { start: f64, duration: f64, amp: f64, knots: Vec<f64> },
    Still,
}

impl Motion {
    fn compile(t: &Trajectory) -> Self {
        match *t {
            Trajectory::BreathingSinusoid { rate_bpm, amplitude_m, phase_rad } => Motion::Sinusoid {
                omega: 2.0 * std::f64::consts::PI * rate_bpm / 60.0,
                amp: amplitude_m,
                phase: phase_rad,
            },
            Trajectory::MotionBurst { start_s, duration_s, amplitude_m, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let n = (duration_s / WALK_KNOT_S).ceil() as usize + 4;
                let mut knots = Vec::with_capacity(n);
                let mut w = 0.0;
                for _ in 0..n {
                    knots.push(w);
                    let step: f64 = rng.sample(StandardNormal);
                    w += step;
                }
                // Catmull-Rom overshoots its knots by at most a factor 1.25,
                // so this scaling keeps |d(t)| <= amplitude.
                let peak = knots.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                if peak > 0.0 {
                    for k in &mut knots {
                        *k /= 1.25 * peak;
                    }
                }
                Motion::Walk {
                    start: start_s,
                    duration: duration_s,
                    amp: amplitude_m,
                    knots,
                }
            }
            Trajectory::Still => Motion::Still,
        }
    }

    fn displacement(&self, t: f64) -> f64 {
        match self {
            Motion::Sinusoid { omega, amp, phase } => amp * (omega * t + phase).sin(),
            Motion::Walk { start, duration, amp, knots } => {
                let u = t - start;
                if u < 0.0 || u >= *duration {
                    return 0.0;
                }
                amp * ramp(u, *duration) * catmull_rom(knots, u / WALK_KNOT_S)
            }
            Motion::Still => 0.0,
        }
    }

    fn velocity(&self, t: f64) -> Option<f64> {
        match self {
            Motion::Sinusoid { omega, amp, phase } => Some(amp * omega * (omega * t + phase).cos()),
            Motion::Walk { .. } => None,
            Motion::Still => Some(0.0),
        }
    }
}

/// Raised-cosine envelope rising over the first and falling over the last ramp.
fn ramp(u: f64, duration: f64) -> f64 {
    let r = WALK_RAMP_S.min(duration / 4.0);
    let edge = u.min(duration - u);
    if edge >= r {
        1.0
    } else {
        0.5 - 0.5 * (std::f64::consts::PI * edge / r).cos()
    }
}

/// Catmull-Rom interpolation of `knots` at fractional index `x`, clamped at the ends.
fn catmull_rom(knots: &[f64], x: f64) -> f64 {
    let last = knots.len() - 1;
    let i = (x.floor() as usize).min(last);
    let f = x - i as f64;
    let at = |j: isize| knots[j.clamp(0, last as isize) as usize];
    let i = i as isize;
    let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
    let f2 = f * f;
    let f3 = f2 * f;
    0.5 * (2.0 * p1 + (p2 - p0) * f + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * f2 + (3.0 * (p1 - p2) + p3 - p0) * f3)
}

#[derive(Debug, Clone)]
struct CompiledPath {
    base: f64,
    motion: Motion,
    active: Option<[f64; 2]>,
    /// Per-subcarrier gain at zero displacement.
    rest: Vec<Complex64>,
}

impl CompiledPath {
    fn new(p: &DynamicPath, k: f64, wavelengths: &[f64]) -> Self {
        CompiledPath {
            base: p.base_distance_m,
            motion: Motion::compile(&p.trajectory),
            active: p.active,
            rest: wavelengths.iter().map(|&lam| path_gain(k, p.base_distance_m, lam)).collect(),
        }
    }

    fn active_at(&self, t: f64) -> bool {
        self.active.is_none_or(|[a, b]| t >= a && t < b)
    }
}

/// Noise-free dynamic response per subcarrier at time `t`.
fn dynamic_response(paths: &[CompiledPath], k: f64, wavelengths: &[f64], t: f64, out: &mut [Complex64]) {
    out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
    for p in paths.iter().filter(|p| p.active_at(t)) {
        let d = p.motion.displacement(t);
        if d == 0.0 {
            for (z, g) in out.iter_mut().zip(&p.rest) {
                *z += g;
            }
            continue;
        }
        let dist = p.base + d;
        for (z, &lam) in out.iter_mut().zip(wavelengths) {
            *z += path_gain(k, dist, lam);
        }
    }
}

/// Streaming frame generator for a scene; deterministic given the seed.
#[derive(Debug, Clone)]
pub struct CfrGenerator {
    dims: Dims,
    k: f64,
    wavelengths: Vec<f64>,
    static_h: Vec<Complex64>,
    paths: Vec<CompiledPath>,
    noise_std: f64,
    rate_hz: f64,
    n_frames: usize,
    next: usize,
    rng: ChaCha8Rng,
    scratch: Vec<Complex64>,
}

impl CfrGenerator {
    pub fn new(scene: &MultipathScene, duration_s: f64, rate_hz: f64, seed: u64) -> Result<Self> {
        scene.validate()?;
        if !(duration_s > 0.0 && duration_s.is_finite()) {
            return Err(Error::Parameter(format!("duration {duration_s} must be positive")));
        }
        if !(rate_hz > 0.0 && rate_hz.is_finite()) {
            return Err(Error::Parameter(format!("rate {rate_hz} must be positive")));
        }
        let wavelengths = scene.wavelengths();
        Ok(CfrGenerator {
            dims: scene.dims(),
            k: scene.k,
            static_h: scene.static_response(),
            paths: scene
                .dynamic_paths
                .iter()
                .map(|p| CompiledPath::new(p, scene.k, &wavelengths))
                .collect(),
            noise_std: scene.noise_sigma / std::f64::consts::SQRT_2,
            rate_hz,
            n_frames: (duration_s * rate_hz - 1e-9).ceil().max(0.0) as usize,
            next: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            scratch: vec![Complex64::new(0.0, 0.0); wavelengths.len()],
            wavelengths,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Total number of frames this generator yields.
    pub fn frame_count(&self) -> usize {
        self.n_frames
    }
}

impl Iterator for CfrGenerator {
    type Item = CsiFrame;

    fn next(&mut self) -> Option<CsiFrame> {
        if self.next >= self.n_frames {
            return None;
        }
        let t = self.next as f64 / self.rate_hz;
        self.next += 1;
        let mut dyn_h = std::mem::take(&mut self.scratch);
        dynamic_response(&self.paths, self.k, &self.wavelengths, t, &mut dyn_h);
        let sub = self.dims.sub;
        let mut data = Vec::with_capacity(self.static_h.len());
        for (i, s) in self.static_h.iter().enumerate() {
            let mut z = s + dyn_h[i % sub];
            if self.noise_std > 0.0 {
                let re: f64 = self.rng.sample(StandardNormal);
                let im: f64 = self.rng.sample(StandardNormal);
                z += Complex64::new(re, im) * self.noise_std;
            }
            data.push(z);
        }
        self.scratch = dyn_h;
        Some(CsiFrame::new(t, self.dims, data).expect("generated frames are finite"))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.n_frames - self.next;
        (left, Some(left))
    }
}

/// One label per whole second in `[0, duration_s)`.
pub fn ground_truth(scene: &MultipathScene, duration_s: f64) -> Vec<GroundTruthRecord> {
    let n = (duration_s - 1e-9).ceil().max(0.0) as usize;
    (0..n)
        .map(|s| {
            let t = s as f64;
            let (state, bpm) = scene.state_at(t);
            GroundTruthRecord { timestamp: t, state, bpm }
        })
        .collect()
}

/// Generates a whole trace and its ground truth in memory.
pub fn generate_cfr(
    scene: &MultipathScene,
    duration_s: f64,
    rate_hz: f64,
    seed: u64,
) -> Result<(Vec<CsiFrame>, Vec<GroundTruthRecord>)> {
    let frames = CfrGenerator::new(scene, duration_s, rate_hz, seed)?.collect();
    Ok((frames, ground_truth(scene, duration_s)))
}

/// `|sum_i d_i'(t) exp(j 2 pi d_i(t) / lambda)|` on `t_grid` for one subcarrier.
pub fn breath_waveform_oracle(scene: &MultipathScene, t_grid: &[f64], subcarrier: usize) -> Result<Vec<f64>> {
    scene.validate()?;
    if scene.dynamic_paths.is_empty() {
        return Err(Error::Parameter("scene has no dynamic paths".into()));
    }
    let lam = *scene
        .wavelengths()
        .get(subcarrier)
        .ok_or_else(|| Error::Parameter(format!("subcarrier {subcarrier} out of range")))?;
    let paths: Vec<(Motion, &DynamicPath)> = scene
        .dynamic_paths
        .iter()
        .map(|p| (Motion::compile(&p.trajectory), p))
        .collect();
    if paths.iter().any(|(m, _)| matches!(m, Motion::Walk { .. })) {
        return Err(Error::UnsupportedTrajectory(
            "motion bursts have no analytic derivative".into(),
        ));
    }
    Ok(t_grid
        .iter()
        .map(|&t| {
            paths
                .iter()
                .filter(|(_, p)| p.active_at(t))
                .map(|(m, _)| {
                    let d = m.displacement(t);
                    let v = m.velocity(t).unwrap_or(0.0);
                    Complex64::from_polar(v, 2.0 * std::f64::consts::PI * d / lam)
                })
                .sum::<Complex64>()
                .norm()
        })
        .collect())
}

/// Relative RMS difference between the normalized central-difference
/// derivative amplitude of the noiseless channel and the normalized oracle.
pub fn approximation_error(scene: &MultipathScene, duration_s: f64, rate_hz: f64, subcarrier: usize) -> Result<f64> {
    scene.validate()?;
    if scene.noise_sigma != 0.0 {
        return Err(Error::Parameter("approximation error needs a noiseless scene".into()));
    }
    let slowest = scene
        .dynamic_paths
        .iter()
        .filter_map(|p| match p.trajectory {
            Trajectory::BreathingSinusoid { rate_bpm, .. } => Some(rate_bpm),
            _ => None,
        })
        .fold(f64::INFINITY, f64::min);
    let cycle = if slowest.is_finite() { 60.0 / slowest } else { 0.0 };
    if duration_s < cycle || duration_s * rate_hz < 3.0 {
        return Err(Error::InsufficientData(format!(
            "duration {duration_s} s is shorter than one breath cycle ({cycle} s)"
        )));
    }
    let wavelengths = scene.wavelengths();
    let lam = *wavelengths
        .get(subcarrier)
        .ok_or_else(|| Error::Parameter(format!("subcarrier {subcarrier} out of range")))?;
    let paths: Vec<CompiledPath> = scene
        .dynamic_paths
        .iter()
        .map(|p| CompiledPath::new(p, scene.k, &[lam]))
        .collect();
    let h_s = scene.static_response()[subcarrier];
    let n = (duration_s * rate_hz).floor() as usize;
    let times: Vec<f64> = (0..n).map(|i| i as f64 / rate_hz).collect();
    let mut z = [Complex64::new(0.0, 0.0)];
    let h: Vec<Complex64> = times
        .iter()
        .map(|&t| {
            dynamic_response(&paths, scene.k, &[lam], t, &mut z);
            h_s + z[0]
        })
        .collect();
    let numeric: Vec<f64> = (1..n - 1)
        .map(|i| ((h[i + 1] - h[i - 1]) * (rate_hz / 2.0)).norm())
        .collect();
    let oracle = breath_waveform_oracle(scene, &times[1..n - 1], subcarrier)?;
    let (a, deg_a) = maxmin_normalize(&numeric);
    let (b, deg_b) = maxmin_normalize(&oracle);
    if deg_a && deg_b {
        return Ok(0.0);
    }
    let diff: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
    let norm: f64 = b.iter().map(|y| y * y).sum();
    Ok(if norm > 0.0 { (diff / norm).sqrt() } else { diff.sqrt() })
}

/// `atan(pi D0 / lambda * (1 - 2 d / D0))`.
pub fn a_i_angle(d0_m: f64, d_m: f64, lambda_m: f64) -> f64 {
    (std::f64::consts::PI * d0_m / lambda_m * (1.0 - 2.0 * d_m / d0_m)).atan()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn breathing_scene(d0: f64, rate: f64, amp: f64) -> MultipathScene {
        MultipathScene {
            dynamic_paths: vec![DynamicPath::new(
                d0,
                Trajectory::BreathingSinusoid {
                    rate_bpm: rate,
                    amplitude_m: amp,
                    phase_rad: 0.0,
                },
            )],
            ..MultipathScene::default()
        }
    }

    #[test]
    fn static_scene_is_constant_and_absent() {
        let scene = MultipathScene {
            static_paths_m: vec![2.0, 4.5],
            ..MultipathScene::default()
        };
        let (frames, gt) = generate_cfr(&scene, 2.0, 100.0, 3).unwrap();
        assert_eq!(frames.len(), 200);
        let h = scene.static_response();
        assert!(frames.iter().all(|f| f.values() == h.as_slice()));
        assert_eq!(gt.len(), 2);
        assert!(gt.iter().all(|r| r.state == GtState::Absent && r.bpm.is_none()));
    }

    #[test]
    fn still_path_is_constant() {
        let scene = MultipathScene {
            dynamic_paths: vec![DynamicPath::new(3.0, Trajectory::Still)],
            ..MultipathScene::default()
        };
        let frames: Vec<_> = CfrGenerator::new(&scene, 1.0, 50.0, 0).unwrap().collect();
        assert!(frames.windows(2).all(|w| w[0].values() == w[1].values()));
    }

    #[test]
    fn breathing_amplitude_has_four_second_period() {
        let mut scene = breathing_scene(5.0, 15.0, 0.02);
        scene.static_paths_m = vec![2.0];
        let rate = 50.0;
        let frames: Vec<_> = CfrGenerator::new(&scene, 40.0, rate, 0).unwrap().collect();
        let x: Vec<f64> = frames.iter().map(|f| f.values()[0].norm()).collect();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let x: Vec<f64> = x.iter().map(|v| v - mean).collect();
        let acf = |lag: usize| -> f64 { (0..x.len() - lag).map(|i| x[i] * x[i + lag]).sum::<f64>() / (x.len() - lag) as f64 };
        let best = (150..300).max_by(|a, b| acf(*a).total_cmp(&acf(*b))).unwrap();
        assert!((best as i64 - 200).abs() <= 1, "autocorrelation peak at lag {best}");
    }

    #[test]
    fn ground_truth_labels_each_second() {
        let mut scene = breathing_scene(3.0, 12.0, 0.005);
        scene.dynamic_paths.push(DynamicPath::new(
            2.0,
            Trajectory::MotionBurst {
                start_s: 5.0,
                duration_s: 3.0,
                amplitude_m: 0.05,
                seed: 1,
            },
        ));
        let gt = ground_truth(&scene, 10.0);
        assert_eq!(gt.len(), 10);
        for r in &gt {
            if (5.0..8.0).contains(&r.timestamp) {
                assert_eq!(r.state, GtState::Motion);
            } else {
                assert_eq!((r.state, r.bpm), (GtState::Breathing, Some(12.0)));
            }
        }
    }

    #[test]
    fn burst_stays_within_amplitude() {
        for seed in 0..20 {
            let m = Motion::compile(&Trajectory::MotionBurst {
                start_s: 1.0,
                duration_s: 8.0,
                amplitude_m: 0.05,
                seed,
            });
            let peak = (0..10_000)
                .map(|i| m.displacement(i as f64 * 0.001))
                .fold(0.0_f64, |a, v| a.max(v.abs()));
            assert!(peak <= 0.05 + 1e-12);
            assert_eq!(m.displacement(0.99), 0.0);
            assert_eq!(m.displacement(9.0), 0.0);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let mut scene = breathing_scene(5.0, 15.0, 0.01);
        scene.noise_sigma = 1e-3;
        let a: Vec<_> = CfrGenerator::new(&scene, 3.0, 100.0, 42).unwrap().collect();
        let b: Vec<_> = CfrGenerator::new(&scene, 3.0, 100.0, 42).unwrap().collect();
        let c: Vec<_> = CfrGenerator::new(&scene, 3.0, 100.0, 43).unwrap().collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn oracle_closed_form() {
        let (a, f) = (0.02, 0.25);
        let scene = breathing_scene(5.0, 15.0, a);
        let grid: Vec<f64> = (0..400).map(|i| i as f64 * 0.01).collect();
        let got = breath_waveform_oracle(&scene, &grid, 0).unwrap();
        for (t, g) in grid.iter().zip(&got) {
            let want = (a * 2.0 * std::f64::consts::PI * f * (2.0 * std::f64::consts::PI * f * t).cos()).abs();
            assert!((g - want).abs() < 1e-15);
        }
        for k in 0..4 {
            let t0 = (2 * k + 1) as f64 / (4.0 * f);
            assert!(breath_waveform_oracle(&scene, &[t0], 0).unwrap()[0] < 1e-15);
        }

        let mut twice = scene.clone();
        twice.dynamic_paths.push(scene.dynamic_paths[0].clone());
        let doubled = breath_waveform_oracle(&twice, &grid, 0).unwrap();
        for (d, g) in doubled.iter().zip(&got) {
            assert!((d - 2.0 * g).abs() <= 1e-15 * g.max(1.0));
        }

        let still = MultipathScene {
            dynamic_paths: vec![DynamicPath::new(3.0, Trajectory::Still)],
            ..MultipathScene::default()
        };
        assert!(breath_waveform_oracle(&still, &grid, 0).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn oracle_rejects_bursts() {
        let scene = MultipathScene {
            dynamic_paths: vec![DynamicPath::new(
                3.0,
                Trajectory::MotionBurst {
                    start_s: 0.0,
                    duration_s: 1.0,
                    amplitude_m: 0.01,
                    seed: 0,
                },
            )],
            ..MultipathScene::default()
        };
        assert!(matches!(
            breath_waveform_oracle(&scene, &[0.0], 0),
            Err(Error::UnsupportedTrajectory(_))
        ));
    }

    #[test]
    fn approximation_error_examples() {
        let e5 = approximation_error(&breathing_scene(5.0, 15.0, 0.02), 8.0, 400.0, 0).unwrap();
        assert!(e5 <= 0.05, "error {e5}");
        assert_eq!(approximation_error(&breathing_scene(5.0, 15.0, 0.0), 8.0, 400.0, 0).unwrap(), 0.0);
        let sweep: Vec<f64> = [3.0, 5.0, 10.0]
            .iter()
            .map(|&d0| approximation_error(&breathing_scene(d0, 15.0, 0.02), 8.0, 400.0, 0).unwrap())
            .collect();
        assert!(sweep[0] >= sweep[1] && sweep[1] >= sweep[2], "{sweep:?}");
        assert!(approximation_error(&breathing_scene(5.0, 15.0, 0.02), 2.0, 400.0, 0).is_err());
    }

    #[test]
    fn angle_examples() {
        let a = a_i_angle(3.0, 0.0, 0.0566);
        assert!((a - 1.5648).abs() < 5e-5, "{a}");
        assert!((a - (std::f64::consts::PI * 3.0 / 0.0566).atan()).abs() < 1e-15);
        assert_eq!(a_i_angle(3.0, 1.5, 0.0566), 0.0);
        let dev = (1..=20)
            .map(|i| (a_i_angle(3.0, i as f64 * 0.01, 0.0566) - a).abs())
            .fold(0.0, f64::max);
        assert!(dev < 0.01);
    }

    #[test]
    fn validation() {
        assert!(MultipathScene {
            subcarrier_indices: vec![],
            ..MultipathScene::default()
        }
        .validate()
        .is_err());
        assert!(breathing_scene(0.1, 15.0, 0.02).validate().is_err());
        assert!(breathing_scene(5.0, 45.0, 0.02).validate().is_err());
        assert!(CfrGenerator::new(&breathing_scene(5.0, 15.0, 0.02), 0.0, 10.0, 0).is_err());
        let json = r#"{"dynamic_paths":[{"base_distance_m":3.0,"trajectory":{"kind":"still"}}]}"#;
        let scene: MultipathScene = serde_json::from_str(json).unwrap();
        assert_eq!(scene.dims(), Dims::new(1, 1, 30));
        let w = scene.wavelengths();
        assert!((w[14] - SPEED_OF_LIGHT / (5.32e9 - 312.5e3)).abs() < 1e-15);
    }
}
