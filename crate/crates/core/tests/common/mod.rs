//! Scene builders shared by the integration tests.
#![allow(dead_code)]

use csivitals::synth::{DynamicPath, MultipathScene, Trajectory};
use csivitals::Config;

/// Noise level used by the end-to-end scenes.
pub const NOISE_SIGMA: f64 = 1e-5;
/// Seconds of empty room before the sleeper appears.
pub const LEAD_IN_S: f64 = 120.0;

/// A room with two fixed reflectors and one breathing chest at 3 m that
/// appears after the lead-in.
pub fn sleeper_scene(rate_bpm: f64, noise_sigma: f64) -> MultipathScene {
    let mut chest = DynamicPath::new(
        3.0,
        Trajectory::BreathingSinusoid {
            rate_bpm,
            amplitude_m: 0.005,
            phase_rad: 0.3,
        },
    );
    chest.active = Some([LEAD_IN_S, 1e9]);
    MultipathScene {
        static_paths_m: vec![2.0, 4.5],
        dynamic_paths: vec![chest],
        noise_sigma,
        ..MultipathScene::default()
    }
}

/// Adds a limb-motion burst on three reflectors starting at `start_s`.
pub fn add_burst(scene: &mut MultipathScene, start_s: f64, duration_s: f64, amplitude_m: f64, seed: u64) {
    for (j, d0) in [1.5, 4.0, 7.0].iter().enumerate() {
        scene.dynamic_paths.push(DynamicPath::new(
            *d0,
            Trajectory::MotionBurst {
                start_s,
                duration_s,
                amplitude_m,
                seed: seed * 10 + j as u64,
            },
        ));
    }
}

/// Config for traces generated at `rate_hz` instead of the nominal 800 Hz,
/// keeping the low-pass corner at 5 Hz.
pub fn config_for_rate(rate_hz: f64) -> Config {
    Config {
        nominal_rate_hz: rate_hz,
        butter_cutoff: 10.0 / rate_hz,
        ..Config::default()
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
