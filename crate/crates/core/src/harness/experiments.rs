//! Experiment drivers: full runs, threshold sweeps, tuning curves and
//! direction readouts on synthetic scenes.

use std::time::Instant;

use crate::config::RunConfig;
use crate::detector::{match_detections, Detection, TruthTarget};
use crate::error::{Error, Result};
use crate::frame::FrameBuffer;
use crate::ganglion::InhibitionSet;
use crate::pipeline::{detect, ActivationFrame, Brnn, FrameActivity, FrameDetections};
use crate::spatial::N_ORIENT;
use crate::synth::{Background, PathSpec, Scene, SceneSpec, TargetSpec};

use super::metrics::{angular_error, tpr_fpr, DetectionCounts, RocPoint};

/// Runs the network over `frames`, calling `visit` for every frame that
/// produces output, and returns the per-frame processing time in seconds
/// (the priming frame included).
pub fn run_frames<I, F>(frames: I, config: &RunConfig, mut visit: F) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = Result<FrameBuffer>>,
    F: FnMut(&FrameActivity, &FrameDetections) -> Result<()>,
{
    let mut net = Brnn::new(config)?;
    let mut timings = Vec::new();
    for frame in frames {
        let frame = frame?;
        let start = Instant::now();
        let out = net.process(&frame)?;
        let dets = out.as_ref().map(|a| detect(&a.activation, &config.ganglion, &config.detector));
        timings.push(start.elapsed().as_secs_f64());
        if let (Some(a), Some(d)) = (out, dets) {
            visit(&a, &d)?;
        }
    }
    Ok(timings)
}

/// Final detections of every frame of a sequence.
pub fn detect_sequence<I>(frames: I, config: &RunConfig) -> Result<Vec<Detection>>
where
    I: IntoIterator<Item = Result<FrameBuffer>>,
{
    let mut all = Vec::new();
    run_frames(frames, config, |_, d| {
        all.extend_from_slice(&d.detections);
        Ok(())
    })?;
    Ok(all)
}

/// Frames of a synthetic scene.
pub fn scene_frames(scene: &Scene) -> impl Iterator<Item = Result<FrameBuffer>> + '_ {
    (0..scene.n_frames()).map(|t| Ok(scene.render(t)))
}

/// `0.01..=0.09` in steps of 0.01 followed by `0.1..=0.9` in steps of 0.1.
pub fn default_gammas() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 100.0).chain((1..=9).map(|i| i as f64 / 10.0)).collect()
}

/// Per-threshold detection tallies, filled one activation frame at a time.
#[derive(Debug, Clone)]
pub struct RocSweep {
    config: RunConfig,
    gammas: Vec<f64>,
    counts: Vec<DetectionCounts>,
}

impl RocSweep {
    pub fn new(config: &RunConfig, gammas: &[f64]) -> Self {
        Self {
            config: *config,
            gammas: gammas.to_vec(),
            counts: vec![DetectionCounts::default(); gammas.len()],
        }
    }

    /// Scores one frame at every threshold. `truth` holds the targets of
    /// that frame.
    pub fn add_frame(&mut self, act: &ActivationFrame, truth: &[TruthTarget]) {
        let px_per_deg = self.config.scene.px_per_deg(act.width);
        for (gamma, counts) in self.gammas.iter().zip(self.counts.iter_mut()) {
            let mut params = self.config.detector;
            params.gamma = *gamma;
            let dets = detect(act, &self.config.ganglion, &params).detections;
            let m = match_detections(&dets, truth, |t| params.match_radius(t.size_px, px_per_deg));
            counts.add(&DetectionCounts {
                true_detections: m.true_positives,
                actual_targets: truth.len(),
                false_positives: m.false_positives,
                frames: 1,
            });
        }
    }

    pub fn counts(&self) -> &[DetectionCounts] {
        &self.counts
    }

    pub fn points(&self) -> Result<Vec<RocPoint>> {
        self.gammas.iter().zip(&self.counts).map(|(&g, c)| tpr_fpr(g, c)).collect()
    }
}

/// Threshold sweep over a sequence. The filters run once per frame and
/// every threshold is scored on the same activation. `truth(i)` returns the
/// targets of frame `i`.
pub fn roc_sweep<I>(
    frames: I,
    truth: impl Fn(usize) -> Vec<TruthTarget>,
    config: &RunConfig,
    gammas: &[f64],
) -> Result<Vec<RocPoint>>
where
    I: IntoIterator<Item = Result<FrameBuffer>>,
{
    let mut sweep = RocSweep::new(config, gammas);
    let mut net = Brnn::new(config)?;
    for frame in frames {
        if let Some(a) = net.process(&frame?)? {
            sweep.add_frame(&a.activation, &truth(a.frame_index));
        }
    }
    sweep.points()
}

/// Which stimulus property a tuning curve varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TuningVar {
    /// Weber contrast of a dark target on white.
    Contrast,
    /// Diameter, degrees.
    Size,
    /// Speed, degrees per second.
    Velocity,
}

impl std::str::FromStr for TuningVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "contrast" => Ok(Self::Contrast),
            "size" => Ok(Self::Size),
            "velocity" => Ok(Self::Velocity),
            _ => Err(Error::Parse(format!("unknown tuning variable {s:?}"))),
        }
    }
}

/// Stimulus held fixed while one property is swept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningStimulus {
    pub diameter_deg: f64,
    pub speed_deg_s: f64,
    pub contrast: f64,
    /// Radius of the circular path, pixels.
    pub orbit_px: f64,
    pub n_frames: usize,
    /// Frames skipped before averaging.
    pub warmup: usize,
    pub metric: TuningMetric,
}

/// Spatial average used for a tuning response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TuningMetric {
    /// Whole frame. On a blank ground all activity is target-evoked, and
    /// the response trails the target by several pixels.
    #[default]
    FrameMean,
    /// Disc under the true target position.
    TargetDisc,
}

impl Default for TuningStimulus {
    fn default() -> Self {
        Self {
            diameter_deg: 3.0,
            speed_deg_s: 300.0,
            contrast: 1.0,
            orbit_px: 40.0,
            n_frames: 60,
            warmup: 20,
            metric: TuningMetric::FrameMean,
        }
    }
}

impl TuningStimulus {
    pub fn with(mut self, var: TuningVar, value: f64) -> Self {
        match var {
            TuningVar::Contrast => self.contrast = value,
            TuningVar::Size => self.diameter_deg = value,
            TuningVar::Velocity => self.speed_deg_s = value,
        }
        self
    }

    /// One target on a white ground orbiting the frame centre.
    pub fn scene(&self) -> SceneSpec {
        let mut spec = SceneSpec::white(
            self.n_frames,
            vec![TargetSpec {
                diameter_deg: self.diameter_deg,
                luminance: 1.0 - self.contrast,
                speed_deg_s: self.speed_deg_s,
                path: PathSpec::Circular {
                    radius_px: self.orbit_px,
                    center: None,
                    start_angle: 0.0,
                },
            }],
        );
        spec.background = Background::Uniform { luminance: 1.0 };
        spec
    }
}

/// Mean activation `V` under `stimulus.metric`, averaged over the frames
/// after the warm-up.
pub fn tuning_response(config: &RunConfig, stimulus: &TuningStimulus) -> Result<f64> {
    let mut spec = stimulus.scene();
    spec.fov_deg = config.scene.fov_deg;
    spec.frame_rate = config.scene.frame_rate;
    let scene = Scene::new(spec)?;
    let empty = InhibitionSet::empty();
    let (mut total, mut n) = (0.0, 0usize);
    let mut net = Brnn::new(config)?;
    for t in 0..scene.n_frames() {
        let Some(a) = net.process(&scene.render(t))? else {
            continue;
        };
        if t < stimulus.warmup {
            continue;
        }
        let v = a.activation.dense(&empty);
        total += match stimulus.metric {
            TuningMetric::FrameMean => v.data().iter().sum::<f64>() / v.data().len() as f64,
            TuningMetric::TargetDisc => {
                let truth = scene.truth(t)[0];
                disc_mean(&v, truth.x, truth.y, truth.size_px / 2.0)
            }
        };
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidParameter("tuning run shorter than its warm-up".into()));
    }
    Ok(total / n as f64)
}

/// Mean of `field` over pixel centres within `r` of `(cx, cy)`; the pixel
/// nearest the centre is always included.
pub fn disc_mean(field: &FrameBuffer, cx: f64, cy: f64, r: f64) -> f64 {
    let r = r.max(0.5);
    let (mut s, mut n) = (0.0, 0usize);
    let y0 = (cy - r).floor().max(0.0) as usize;
    let y1 = ((cy + r).ceil().max(0.0) as usize).min(field.height() - 1);
    let x0 = (cx - r).floor().max(0.0) as usize;
    let x1 = ((cx + r).ceil().max(0.0) as usize).min(field.width() - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            if (x as f64 - cx).hypot(y as f64 - cy) <= r {
                s += field.get(x, y);
                n += 1;
            }
        }
    }
    if n == 0 {
        return field.get(
            (cx.round().max(0.0) as usize).min(field.width() - 1),
            (cy.round().max(0.0) as usize).min(field.height() - 1),
        );
    }
    s / n as f64
}

/// `(value, response)` for every grid value.
pub fn tuning_sweep(
    var: TuningVar,
    grid: &[f64],
    config: &RunConfig,
    base: &TuningStimulus,
) -> Result<Vec<(f64, f64)>> {
    grid.iter()
        .map(|&g| Ok((g, tuning_response(config, &base.with(var, g))?)))
        .collect()
}

/// Summed ON and OFF energy per orientation over the member sites of one
/// detection.
pub fn energy_polar(act: &ActivationFrame, members: &[usize]) -> [f64; N_ORIENT] {
    let mut out = [0.0; N_ORIENT];
    for &i in members {
        let s = &act.sites[i];
        for k in 0..N_ORIENT {
            out[k] += s.e_on[k] + s.e_off[k];
        }
    }
    out
}

/// Per-frame direction error of the detection matched to each target.
#[derive(Debug, Clone, Default)]
pub struct DirectionTrack {
    /// `(frame, truth direction, estimated direction)`.
    pub samples: Vec<(usize, f64, f64)>,
    /// Frames scored whose target went undetected.
    pub missed: usize,
}

impl DirectionTrack {
    /// Mean absolute angular error, radians.
    pub fn mean_error(&self) -> Option<f64> {
        if self.samples.is_empty() {
            return None;
        }
        let s: f64 = self.samples.iter().map(|&(_, t, e)| angular_error(t, e)).sum();
        Some(s / self.samples.len() as f64)
    }
}

/// Matches each frame's detections to the truth and records the estimated
/// direction of every matched target, from frame `warmup` on.
///
/// `radius_px` overrides the detector's matching radius. The response peak
/// trails a moving target by a few pixels (the slow channel is silent for the
/// first three frames after a change), which can exceed the default radius
/// for targets around 1 degree.
pub fn track_directions(
    scene: &Scene,
    config: &RunConfig,
    warmup: usize,
    radius_px: Option<f64>,
) -> Result<DirectionTrack> {
    let mut track = DirectionTrack::default();
    let px_per_deg = scene.px_per_deg();
    run_frames(scene_frames(scene), config, |a, d| {
        if a.frame_index < warmup {
            return Ok(());
        }
        let truth = scene.truth(a.frame_index);
        let m = match_detections(&d.detections, &truth, |t| {
            radius_px.unwrap_or_else(|| config.detector.match_radius(t.size_px, px_per_deg))
        });
        for (j, t) in truth.iter().enumerate() {
            match m.pairs.iter().find(|p| p.1 == j) {
                Some(&(i, _)) => track.samples.push((a.frame_index, t.direction, d.detections[i].direction)),
                None => track.missed += 1,
            }
        }
        Ok(())
    })?;
    Ok(track)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_grid() {
        let g = default_gammas();
        assert_eq!(g.len(), 18);
        assert_eq!(g[0], 0.01);
        assert_eq!(g[8], 0.09);
        assert_eq!(g[9], 0.1);
        assert_eq!(g[17], 0.9);
    }

    #[test]
    fn disc_mean_of_constant() {
        let f = FrameBuffer::filled(10, 10, 2.0);
        assert_eq!(disc_mean(&f, 4.3, 5.1, 2.0), 2.0);
        assert_eq!(disc_mean(&f, 4.3, 5.1, 0.1), 2.0);
    }

    #[test]
    fn stimulus_contrast_sets_luminance() {
        let s = TuningStimulus::default().with(TuningVar::Contrast, 0.4).scene();
        assert!((s.targets[0].luminance - 0.6).abs() < 1e-12);
    }
}
