//! Streaming night processor: frames in, BPM samples out, report at the end.
//!
//! The continuous `|H'|` stream is filtered, cut into 30 s epochs, reduced to
//! 600 rows, and projected by PCA. The breath projection feeds a band-pass and
//! the peak counter; the motion projections feed the ellipsoid detector.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::breath::{breath_bandpass_design, window_bpm, BpmSample};
use crate::config::Config;
use crate::csi::{CsiFrame, Dims, GroundTruthRecord};
use crate::error::{Error, Result};
use crate::eval::{evaluate, Metrics};
use crate::filter::{Sos, SosState};
use crate::motion::{MotionDetector, MotionEvent};
use crate::outage::{
    average_fade_duration, detect_outage, estimate_noise_floor, level_crossing_rate, OutageInterval,
    PowerWindow, MIN_CALIBRATION_WINDOWS,
};
use crate::preprocess::{difference_row, downsample_epoch, epoch_complete, epoch_index, ChannelFilterBank};
use crate::sleep::{format_percent, score_night, sleep_efficiency, MinuteRecord, Stage, WebsterWeights};
use crate::subspace::{pca_fit_project, projection_power, Epoch};

/// Live output row: `{"t": seconds, "bpm": n | null}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpmRow {
    pub t: f64,
    pub bpm: Option<u32>,
}

impl From<&BpmSample> for BpmRow {
    fn from(s: &BpmSample) -> Self {
        BpmRow { t: s.t_s, bpm: s.bpm }
    }
}

/// Outage statistics of one night.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageReport {
    /// Downward crossings of the noise floor per hour.
    pub outage_rate_per_hour: Option<f64>,
    pub small_afd_min: Option<f64>,
    pub large_afd_min: Option<f64>,
    pub fade_durations_min: Vec<f64>,
    /// Requires ground truth; empty otherwise.
    pub outage_intervals: Vec<OutageInterval>,
}

/// Everything computed for one night.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NightReport {
    pub start_s: f64,
    pub end_s: f64,
    pub frames: usize,
    pub epochs: usize,
    pub sleep_length_h: f64,
    pub bpm_series: Vec<BpmSample>,
    pub motion_events: Vec<MotionEvent>,
    pub motion_minutes: f64,
    pub noise_floor: Option<f64>,
    pub outage: OutageReport,
    pub stages: Vec<Stage>,
    pub minutes: Vec<MinuteRecord>,
    pub sleep_efficiency: Option<f64>,
    pub sleep_efficiency_pct: Option<String>,
    pub power_windows: Vec<PowerWindow>,
    pub metrics: Option<Metrics>,
    pub warnings: Vec<String>,
}

impl NightReport {
    /// Pretty JSON with a trailing newline; byte-stable for equal reports.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report always serializes");
        s.push('\n');
        s
    }

    /// Per-minute table `minute,a,s_m,stage`.
    pub fn minutes_csv(&self) -> String {
        let mut out = String::from("minute,a,s_m,stage\n");
        for m in &self.minutes {
            let stage = match m.stage {
                Stage::Sleep => "sleep",
                Stage::Awake => "awake",
            };
            out.push_str(&format!("{},{},{},{}\n", m.minute, m.a, m.s, stage));
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct BreathSample {
    t: f64,
    y: f64,
    window: usize,
}

/// Incremental processor for one stream of frames.
pub struct NightProcessor {
    cfg: Config,
    dims: Option<Dims>,
    origin: Option<f64>,
    last_frame: Option<CsiFrame>,
    frames: usize,
    bank: Option<ChannelFilterBank>,
    row_buf: Vec<f64>,

    epoch_idx: Option<i64>,
    epoch_rows: Vec<f64>,
    epoch_times: Vec<f64>,
    prev_epoch: Option<Epoch>,
    epochs: usize,

    motion: Option<MotionDetector>,
    bandpass: Sos,
    bandpass_state: SosState,
    samples: VecDeque<BreathSample>,
    samples_base: usize,
    sample_count: usize,
    next_emit: usize,

    windows: Vec<PowerWindow>,
    noise_floor: Option<f64>,
    bpm: Vec<BpmSample>,
    warnings: Vec<String>,
}

impl NightProcessor {
    pub fn new(cfg: Config) -> Result<Self> {
        cfg.validate()?;
        let bandpass = breath_bandpass_design(cfg.stream().epoch_rate_hz(), cfg.bandpass_order)?;
        Ok(NightProcessor {
            bandpass_state: SosState::new(&bandpass),
            bandpass,
            next_emit: cfg.bpm_window_samples(),
            cfg,
            dims: None,
            origin: None,
            last_frame: None,
            frames: 0,
            bank: None,
            row_buf: Vec::new(),
            epoch_idx: None,
            epoch_rows: Vec::new(),
            epoch_times: Vec::new(),
            prev_epoch: None,
            epochs: 0,
            motion: None,
            samples: VecDeque::new(),
            samples_base: 0,
            sample_count: 0,
            windows: Vec::new(),
            noise_floor: None,
            bpm: Vec::new(),
            warnings: Vec::new(),
        })
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    /// Frames accepted so far.
    pub fn frames(&self) -> usize {
        self.frames
    }

    /// Epochs fitted so far.
    pub fn epochs(&self) -> usize {
        self.epochs
    }

    pub fn noise_floor(&self) -> Option<f64> {
        self.noise_floor
    }

    /// Feeds one frame; returns BPM samples that became final.
    pub fn push(&mut self, frame: CsiFrame) -> Result<Vec<BpmSample>> {
        let index = self.frames;
        match self.dims {
            None => {
                let channels = frame.dims().channels();
                if channels < self.cfg.pca_components {
                    return Err(Error::Dimension {
                        index,
                        message: format!(
                            "{channels} channels cannot support {} PCA components",
                            self.cfg.pca_components
                        ),
                    });
                }
                self.dims = Some(frame.dims());
                self.origin = Some(frame.timestamp());
                self.bank = Some(ChannelFilterBank::new(&self.cfg.filters(), channels)?);
            }
            Some(d) if d != frame.dims() => {
                return Err(Error::Dimension {
                    index,
                    message: format!("shape {:?} differs from stream shape {:?}", frame.dims(), d),
                });
            }
            _ => {}
        }
        let before = self.bpm.len();
        if let Some(prev) = self.last_frame.take() {
            if frame.timestamp() <= prev.timestamp() {
                self.last_frame = Some(prev);
                return Err(Error::InvalidFrame {
                    index,
                    message: format!("timestamp {} does not exceed previous", frame.timestamp()),
                });
            }
            self.row_buf.clear();
            difference_row(&prev, &frame, &mut self.row_buf);
            let row = std::mem::take(&mut self.row_buf);
            let out = self.bank.as_mut().unwrap().push(frame.timestamp(), &row);
            self.row_buf = row;
            if let Some((t, r)) = out {
                self.accept_row(t, &r)?;
            }
        }
        self.last_frame = Some(frame);
        self.frames += 1;
        self.try_emit();
        Ok(self.bpm[before..].to_vec())
    }

    fn rate_estimate(&self) -> f64 {
        match (self.origin, &self.last_frame) {
            (Some(o), Some(f)) if self.frames > 1 && f.timestamp() > o => {
                (self.frames - 1) as f64 / (f.timestamp() - o)
            }
            _ => self.cfg.nominal_rate_hz,
        }
    }

    fn accept_row(&mut self, t: f64, row: &[f64]) -> Result<()> {
        let idx = epoch_index(t, self.origin.unwrap(), self.cfg.epoch_seconds);
        if let Some(cur) = self.epoch_idx {
            if idx != cur {
                self.close_epoch(false)?;
            }
        }
        self.epoch_idx = Some(idx);
        self.epoch_rows.extend_from_slice(row);
        self.epoch_times.push(t);
        Ok(())
    }

    fn close_epoch(&mut self, at_end: bool) -> Result<()> {
        let Some(idx) = self.epoch_idx.take() else { return Ok(()) };
        let rows = self.epoch_times.len();
        if rows == 0 {
            return Ok(());
        }
        let channels = self.epoch_rows.len() / rows;
        let start_s = self.origin.unwrap() + idx as f64 * self.cfg.epoch_seconds;
        let rate = self.rate_estimate();
        let last_t = *self.epoch_times.last().unwrap();
        let partial = at_end && !epoch_complete(last_t, start_s + self.cfg.epoch_seconds, rate);
        let expected = if partial {
            ((self.cfg.epoch_seconds * rate).round() as usize).max(rows)
        } else {
            rows
        };
        let data = DMatrix::from_row_slice(rows, channels, &self.epoch_rows);
        let times = std::mem::take(&mut self.epoch_times);
        self.epoch_rows.clear();
        let raw = Epoch::raw(idx.max(0) as usize, start_s, data, times, expected, partial);
        let reduced = downsample_epoch(&raw, self.cfg.epoch_samples);
        let fitted = pca_fit_project(&reduced, self.cfg.pca_components, self.prev_epoch.as_ref())?;
        self.epochs += 1;
        self.process_epoch(&fitted)?;
        self.prev_epoch = Some(fitted);
        Ok(())
    }

    fn process_epoch(&mut self, e: &Epoch) -> Result<()> {
        if e.valid_rows == 0 {
            return Ok(());
        }
        let sel = self.cfg.selection();
        let rate = self.cfg.stream().epoch_rate_hz();
        let period = 1.0 / rate;
        if self.motion.is_none() {
            self.motion = Some(MotionDetector::new(
                self.cfg.motion(),
                sel.motion_components.len(),
                period,
            )?);
        }

        let win = self.cfg.power_window_samples;
        let first_window = self.windows.len();
        for (w, p) in projection_power(e, sel.breath_component, win)?.into_iter().enumerate() {
            let len = win.min(e.valid_rows - w * win);
            let start_s = e.start_s + (w * win) as f64 * period;
            self.windows.push(PowerWindow {
                start_s,
                end_s: start_s + len as f64 * period,
                power: p,
            });
        }

        let mut r = vec![0.0; sel.motion_components.len()];
        for k in 0..e.valid_rows {
            let t = e.timestamps[k];
            for (slot, &c) in r.iter_mut().zip(&sel.motion_components) {
                *slot = e.projections[(k, c)];
            }
            self.motion.as_mut().unwrap().push(t, &r)?;
            let y = self
                .bandpass_state
                .push(&self.bandpass, e.projections[(k, sel.breath_component)]);
            self.samples.push_back(BreathSample {
                t,
                y,
                window: first_window + k / win,
            });
            self.sample_count += 1;
        }
        self.update_noise_floor(false);
        self.try_emit();
        Ok(())
    }

    fn update_noise_floor(&mut self, at_end: bool) {
        if self.noise_floor.is_some() {
            return;
        }
        let Some(origin) = self.origin else { return };
        let cal_end = origin + self.cfg.calibration_minutes * 60.0;
        let done = self.windows.last().is_some_and(|w| w.end_s >= cal_end - 1e-9);
        if !(done || at_end) {
            return;
        }
        let powers: Vec<f64> = self
            .windows
            .iter()
            .filter(|w| w.start_s < cal_end)
            .map(|w| w.power)
            .collect();
        match estimate_noise_floor(&powers, self.cfg.floor_percentile) {
            Ok(f) => {
                if !done {
                    self.warnings.push(format!(
                        "noise floor estimated from {} windows, short of the {} minute calibration span",
                        powers.len(),
                        self.cfg.calibration_minutes
                    ));
                }
                self.noise_floor = Some(f);
            }
            Err(_) => self.warnings.push(format!(
                "insufficient calibration data ({} of {MIN_CALIBRATION_WINDOWS} windows); breathing presence undetermined",
                powers.len()
            )),
        }
    }

    fn try_emit(&mut self) {
        let Some(floor) = self.noise_floor else { return };
        let Some(motion) = &self.motion else { return };
        let window = self.cfg.bpm_window_samples();
        let step = self.cfg.bpm_step_samples();
        let threshold = floor * self.cfg.presence_margin;
        let peaks = self.cfg.peaks();
        let rate = self.cfg.stream().epoch_rate_hz();
        let tracker = motion.tracker();
        while self.next_emit <= self.sample_count && self.next_emit <= tracker.settled_until() {
            let lo = self.next_emit - window;
            let mut values = Vec::with_capacity(window);
            let mut keep = Vec::with_capacity(window);
            for i in lo..self.next_emit {
                let s = &self.samples[i - self.samples_base];
                values.push(s.y);
                keep.push(self.windows[s.window].power > threshold && !tracker.in_motion(i));
            }
            let (bpm, n_peaks, coverage) = window_bpm(&values, &keep, &peaks, rate);
            self.bpm.push(BpmSample {
                t_s: self.samples[self.next_emit - 1 - self.samples_base].t,
                bpm,
                peaks: n_peaks,
                coverage,
            });
            self.next_emit += step;
            let keep_from = self.next_emit.saturating_sub(window);
            while self.samples_base < keep_from && !self.samples.is_empty() {
                self.samples.pop_front();
                self.samples_base += 1;
            }
        }
    }

    /// Flushes all stages and assembles the report.
    pub fn finish(mut self, ground_truth: Option<&[GroundTruthRecord]>) -> Result<NightReport> {
        let (Some(origin), Some(last)) = (self.origin, self.last_frame.clone()) else {
            return Err(Error::InsufficientData("no data: the stream carried no frames".into()));
        };
        if let Some(bank) = self.bank.as_mut() {
            for (t, r) in bank.finish() {
                self.accept_row(t, &r)?;
            }
        }
        self.close_epoch(true)?;
        if let Some(m) = self.motion.as_mut() {
            m.finish();
        }
        self.update_noise_floor(true);
        self.try_emit();

        let rate = self.rate_estimate();
        let end_s = last.timestamp() + if self.frames > 1 { 1.0 / rate } else { 0.0 };
        if end_s - origin < self.cfg.epoch_seconds {
            self.warnings
                .push("stream shorter than one epoch; no breathing or motion estimates".into());
        }
        let events: Vec<MotionEvent> = self
            .motion
            .as_ref()
            .map(|m| m.tracker().events().to_vec())
            .unwrap_or_default();
        let motion_minutes = events.iter().map(|e| e.duration_s()).sum::<f64>() / 60.0;
        let minutes = score_night(&events, origin, end_s, &WebsterWeights::default());
        let stages: Vec<Stage> = minutes.iter().map(|m| m.stage).collect();
        let efficiency = sleep_efficiency(&stages).ok();

        let outage_cfg = self.cfg.outage();
        let powers: Vec<f64> = self.windows.iter().map(|w| w.power).collect();
        let span_h = (end_s - origin) / 3600.0;
        let window_s = self.cfg.power_window_samples as f64 / self.cfg.stream().epoch_rate_hz();
        let outage = match self.noise_floor {
            Some(floor) => {
                let fades = average_fade_duration(&powers, floor, window_s, outage_cfg.large_outage_minutes);
                OutageReport {
                    outage_rate_per_hour: level_crossing_rate(&powers, floor, span_h).ok(),
                    small_afd_min: fades.small_mean_min,
                    large_afd_min: fades.large_mean_min,
                    fade_durations_min: fades.durations_min,
                    outage_intervals: ground_truth
                        .map(|gt| detect_outage(&self.windows, floor, gt, outage_cfg.large_outage_minutes))
                        .unwrap_or_default(),
                }
            }
            None => OutageReport {
                outage_rate_per_hour: None,
                small_afd_min: None,
                large_afd_min: None,
                fade_durations_min: Vec::new(),
                outage_intervals: Vec::new(),
            },
        };
        let metrics = ground_truth.map(|gt| evaluate(&self.bpm, &events, gt, self.cfg.eval_window_minutes));
        Ok(NightReport {
            start_s: origin,
            end_s,
            frames: self.frames,
            epochs: self.epochs,
            sleep_length_h: span_h,
            bpm_series: self.bpm,
            motion_events: events,
            motion_minutes,
            noise_floor: self.noise_floor,
            outage,
            stages,
            minutes,
            sleep_efficiency: efficiency,
            sleep_efficiency_pct: efficiency.map(format_percent),
            power_windows: self.windows,
            metrics,
            warnings: self.warnings,
        })
    }
}

/// Runs a whole stream of frames through a fresh processor.
pub fn process_frames<I>(frames: I, cfg: &Config, ground_truth: Option<&[GroundTruthRecord]>) -> Result<NightReport>
where
    I: IntoIterator<Item = Result<CsiFrame>>,
{
    let mut p = NightProcessor::new(cfg.clone())?;
    for f in frames {
        p.push(f?)?;
    }
    p.finish(ground_truth)
}
