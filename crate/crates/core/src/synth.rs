//! Synthetic stimuli with exact ground truth.
//!
//! Targets are filled discs drawn with 4x4 supersampled coverage over a
//! uniform or textured background; a textured background scrolls from left
//! to right with wrap-around. Free-moving targets reverse their velocity on
//! hitting the frame edge or another target.

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detector::TruthTarget;
use crate::error::{Error, Result};
use crate::frame::FrameBuffer;
use crate::ganglion::direction_of;

/// Pixels per degree of visual angle.
pub fn deg_to_px(fov_deg: f64, width_px: usize) -> f64 {
    assert!(fov_deg > 0.0, "field of view must be positive");
    width_px as f64 / fov_deg
}

/// Converts an angular speed to pixels per frame.
pub fn speed_px_per_frame(speed_deg_s: f64, px_per_deg: f64, frame_rate: f64) -> f64 {
    speed_deg_s * px_per_deg / frame_rate
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Background {
    Uniform {
        luminance: f64,
    },
    /// Seeded multi-octave value noise.
    Procedural {
        mean: f64,
        contrast: f64,
        /// Finest lattice spacing, degrees.
        cell_deg: f64,
        velocity_deg_s: f64,
        seed: u64,
    },
    /// Grayscale image tiled over the frame.
    Image {
        path: PathBuf,
        velocity_deg_s: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathSpec {
    /// Constant-speed orbit; `center` defaults to the frame centre.
    Circular {
        radius_px: f64,
        #[serde(default)]
        center: Option<[f64; 2]>,
        #[serde(default)]
        start_angle: f64,
    },
    /// Straight motion at `angle` (image coordinates, radians), bouncing at
    /// the edges; `start` defaults to a random position.
    Linear {
        angle: f64,
        #[serde(default)]
        start: Option<[f64; 2]>,
    },
    /// Random start and random heading, bouncing.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub diameter_deg: f64,
    /// 0 is black, 1 is white; drawn at `255 * luminance`.
    pub luminance: f64,
    pub speed_deg_s: f64,
    pub path: PathSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub fov_deg: f64,
    pub frame_rate: f64,
    pub n_frames: usize,
    pub background: Background,
    pub targets: Vec<TargetSpec>,
    #[serde(default)]
    pub seed: u64,
}

impl SceneSpec {
    /// Reads a scene description, TOML for a `.toml` extension and JSON
    /// otherwise.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec: Self = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?,
            _ => serde_json::from_str(&text)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn px_per_deg(&self) -> f64 {
        deg_to_px(self.fov_deg, self.width)
    }

    /// 128x128 frames, 32 degree field of view, 300 Hz, white ground, with
    /// the given targets.
    pub fn white(n_frames: usize, targets: Vec<TargetSpec>) -> Self {
        Self {
            width: 128,
            height: 128,
            fov_deg: 32.0,
            frame_rate: 300.0,
            n_frames,
            background: Background::Uniform { luminance: 1.0 },
            targets,
            seed: 0,
        }
    }

    /// Five dark targets in random directions over a dark cluttered ground
    /// scrolling at `bg_speed_deg_s`.
    pub fn cluttered(seed: u64, bg_speed_deg_s: f64) -> Self {
        let target = TargetSpec {
            diameter_deg: 2.0,
            luminance: 0.0,
            speed_deg_s: 300.0,
            path: PathSpec::Random,
        };
        Self {
            width: 128,
            height: 128,
            fov_deg: 32.0,
            frame_rate: 300.0,
            n_frames: 180,
            background: Background::Procedural {
                mean: 0.2,
                contrast: 0.4,
                cell_deg: 0.5,
                velocity_deg_s: bg_speed_deg_s,
                seed: seed.wrapping_add(0x5eed),
            },
            targets: vec![target; 5],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.width * self.height == 0 {
            return bad("scene must have pixels".into());
        }
        if !(self.fov_deg > 0.0 && self.frame_rate > 0.0) {
            return bad("fov and frame rate must be positive".into());
        }
        for t in &self.targets {
            if !(t.diameter_deg > 0.0 && t.diameter_deg < self.fov_deg) {
                return bad(format!("target diameter {} out of range", t.diameter_deg));
            }
            if !(0.0..=1.0).contains(&t.luminance) {
                return bad(format!("target luminance {} outside [0, 1]", t.luminance));
            }
        }
        Ok(())
    }
}

/// Position and per-frame velocity of one target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub radius: f64,
}

/// Advances free-moving targets one frame.
///
/// A target whose disc would leave the frame, or that would overlap another
/// target it is approaching, has its velocity negated and moves back the
/// way it came.
pub fn step_targets(states: &mut [TargetState], width: usize, height: usize) {
    let (w, h) = (width as f64, height as f64);
    let inside = |s: &TargetState, x: f64, y: f64| {
        x - s.radius >= 0.0 && x + s.radius <= w && y - s.radius >= 0.0 && y + s.radius <= h
    };
    let mut next: Vec<(f64, f64)> = Vec::with_capacity(states.len());
    for s in states.iter_mut() {
        let (nx, ny) = (s.x + s.vx, s.y + s.vy);
        if !inside(s, nx, ny) {
            s.vx = -s.vx;
            s.vy = -s.vy;
            next.push((s.x + s.vx, s.y + s.vy));
        } else {
            next.push((nx, ny));
        }
    }
    for i in 0..states.len() {
        for j in i + 1..states.len() {
            let (a, b) = (states[i], states[j]);
            let (dx, dy) = (next[j].0 - next[i].0, next[j].1 - next[i].1);
            let approaching = dx * (b.vx - a.vx) + dy * (b.vy - a.vy) < 0.0;
            if dx.hypot(dy) < a.radius + b.radius && approaching {
                for k in [i, j] {
                    states[k].vx = -states[k].vx;
                    states[k].vy = -states[k].vy;
                    next[k] = (states[k].x + states[k].vx, states[k].y + states[k].vy);
                }
            }
        }
    }
    for (s, (nx, ny)) in states.iter_mut().zip(next) {
        s.x = nx.clamp(s.radius.min(w / 2.0), (w - s.radius).max(w / 2.0));
        s.y = ny.clamp(s.radius.min(h / 2.0), (h - s.radius).max(h / 2.0));
    }
}

struct Texture {
    width: usize,
    height: usize,
    data: Vec<f64>,
    velocity_px: f64,
}

impl Texture {
    fn sample(&self, x: f64, y: usize) -> f64 {
        let xf = x.rem_euclid(self.width as f64);
        let x0 = xf.floor() as usize % self.width;
        let x1 = (x0 + 1) % self.width;
        let fr = xf - xf.floor();
        let row = &self.data[(y % self.height) * self.width..];
        row[x0] * (1.0 - fr) + row[x1] * fr
    }
}

/// Periodic multi-octave value noise in `[0, 1]`.
fn value_noise(width: usize, height: usize, cell_px: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0.0; width * height];
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let mut amp = 1.0;
    let mut total = 0.0;
    let mut spacing = cell_px.max(1.0) * 8.0;
    for _ in 0..4 {
        let gx = ((width as f64 / spacing).round() as usize).max(1);
        let gy = ((height as f64 / spacing).round() as usize).max(1);
        let lattice: Vec<f64> = (0..gx * gy).map(|_| rng.gen::<f64>()).collect();
        let (sx, sy) = (width as f64 / gx as f64, height as f64 / gy as f64);
        for y in 0..height {
            let fy = y as f64 / sy;
            let (y0, ty) = (fy.floor() as usize % gy, smooth(fy - fy.floor()));
            let y1 = (y0 + 1) % gy;
            for x in 0..width {
                let fx = x as f64 / sx;
                let (x0, tx) = (fx.floor() as usize % gx, smooth(fx - fx.floor()));
                let x1 = (x0 + 1) % gx;
                let top = lattice[y0 * gx + x0] * (1.0 - tx) + lattice[y0 * gx + x1] * tx;
                let bot = lattice[y1 * gx + x0] * (1.0 - tx) + lattice[y1 * gx + x1] * tx;
                out[y * width + x] += amp * (top * (1.0 - ty) + bot * ty);
            }
        }
        total += amp;
        amp *= 0.6;
        spacing /= 2.0;
    }
    let (lo, hi) = out.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let span = (hi - lo).max(1e-12);
    let _ = total;
    out.iter().map(|v| (v - lo) / span).collect()
}

#[derive(Debug, Clone, Copy)]
enum Motion {
    Free,
    Orbit {
        cx: f64,
        cy: f64,
        radius: f64,
        start: f64,
        omega: f64,
    },
}

/// A scene with every target trajectory precomputed, so that any frame can
/// be rendered independently.
pub struct Scene {
    spec: SceneSpec,
    px_per_deg: f64,
    texture: Option<Texture>,
    /// `tracks[t][i]`: state of target `i` at frame `t`.
    tracks: Vec<Vec<TargetState>>,
}

impl Scene {
    pub fn new(spec: SceneSpec) -> Result<Self> {
        spec.validate()?;
        let scale = spec.px_per_deg();
        let (w, h) = (spec.width as f64, spec.height as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut initial: Vec<TargetState> = Vec::new();
        let mut motions = Vec::new();
        for t in &spec.targets {
            let radius = t.diameter_deg * scale / 2.0;
            let speed = speed_px_per_frame(t.speed_deg_s, scale, spec.frame_rate);
            let (state, motion) = match &t.path {
                PathSpec::Circular {
                    radius_px,
                    center,
                    start_angle,
                } => {
                    let [cx, cy] = center.unwrap_or([w / 2.0, h / 2.0]);
                    let (s, c) = start_angle.sin_cos();
                    let st = TargetState {
                        x: cx + radius_px * c,
                        y: cy + radius_px * s,
                        vx: -speed * s,
                        vy: speed * c,
                        radius,
                    };
                    let m = Motion::Orbit {
                        cx,
                        cy,
                        radius: *radius_px,
                        start: *start_angle,
                        omega: speed / radius_px,
                    };
                    (st, m)
                }
                PathSpec::Linear { angle, start } => {
                    let [x, y] = match start {
                        Some(p) => *p,
                        None => random_position(&mut rng, radius, w, h, &initial),
                    };
                    let (s, c) = angle.sin_cos();
                    let st = TargetState {
                        x,
                        y,
                        vx: speed * c,
                        vy: speed * s,
                        radius,
                    };
                    (st, Motion::Free)
                }
                PathSpec::Random => {
                    let [x, y] = random_position(&mut rng, radius, w, h, &initial);
                    let a = rng.gen_range(0.0..TAU);
                    let st = TargetState {
                        x,
                        y,
                        vx: speed * a.cos(),
                        vy: speed * a.sin(),
                        radius,
                    };
                    (st, Motion::Free)
                }
            };
            initial.push(state);
            motions.push(motion);
        }

        let free: Vec<usize> = (0..motions.len()).filter(|&i| matches!(motions[i], Motion::Free)).collect();
        let mut tracks = Vec::with_capacity(spec.n_frames);
        let mut current = initial;
        for t in 0..spec.n_frames {
            if t > 0 {
                let mut movers: Vec<TargetState> = free.iter().map(|&i| current[i]).collect();
                step_targets(&mut movers, spec.width, spec.height);
                for (k, &i) in free.iter().enumerate() {
                    current[i] = movers[k];
                }
            }
            for (i, m) in motions.iter().enumerate() {
                if let Motion::Orbit {
                    cx,
                    cy,
                    radius,
                    start,
                    omega,
                } = *m
                {
                    let a = start + omega * t as f64;
                    let speed = omega * radius;
                    let (s, c) = a.sin_cos();
                    current[i].x = cx + radius * c;
                    current[i].y = cy + radius * s;
                    current[i].vx = -speed * s;
                    current[i].vy = speed * c;
                }
            }
            tracks.push(current.clone());
        }

        let texture = match &spec.background {
            Background::Uniform { .. } => None,
            Background::Procedural {
                mean,
                contrast,
                cell_deg,
                velocity_deg_s,
                seed,
            } => {
                let noise = value_noise(spec.width, spec.height, cell_deg * scale, *seed);
                Some(Texture {
                    width: spec.width,
                    height: spec.height,
                    data: noise
                        .iter()
                        .map(|n| (mean + contrast * (2.0 * n - 1.0)).clamp(0.0, 1.0) * 255.0)
                        .collect(),
                    velocity_px: speed_px_per_frame(*velocity_deg_s, scale, spec.frame_rate),
                })
            }
            Background::Image { path, velocity_deg_s } => {
                let img = image::open(path)
                    .map_err(|source| Error::Image {
                        path: path.clone(),
                        source,
                    })?
                    .to_luma8();
                Some(Texture {
                    width: img.width() as usize,
                    height: img.height() as usize,
                    data: img.as_raw().iter().map(|&p| f64::from(p)).collect(),
                    velocity_px: speed_px_per_frame(*velocity_deg_s, scale, spec.frame_rate),
                })
            }
        };

        Ok(Self {
            spec,
            px_per_deg: scale,
            texture,
            tracks,
        })
    }

    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }

    pub fn px_per_deg(&self) -> f64 {
        self.px_per_deg
    }

    pub fn n_frames(&self) -> usize {
        self.spec.n_frames
    }

    pub fn states(&self, t: usize) -> &[TargetState] {
        &self.tracks[t]
    }

    /// Ground-truth rows of frame `t`.
    pub fn truth(&self, t: usize) -> Vec<TruthTarget> {
        self.tracks[t]
            .iter()
            .enumerate()
            .map(|(i, s)| TruthTarget {
                frame: t,
                target_id: i,
                x: s.x,
                y: s.y,
                size_px: 2.0 * s.radius,
                direction: direction_of(s.vx, s.vy),
            })
            .collect()
    }

    pub fn background(&self, t: usize) -> FrameBuffer {
        let (w, h) = (self.spec.width, self.spec.height);
        match (&self.spec.background, &self.texture) {
            (Background::Uniform { luminance }, _) => FrameBuffer::filled(w, h, 255.0 * luminance),
            (_, Some(tex)) => {
                let shift = t as f64 * tex.velocity_px;
                FrameBuffer::from_fn(w, h, |x, y| tex.sample(x as f64 - shift, y))
            }
            _ => unreachable!("textured background without texture"),
        }
    }

    /// Renders frame `t`, quantised to 8-bit levels.
    pub fn render(&self, t: usize) -> FrameBuffer {
        assert!(t < self.spec.n_frames, "frame {t} out of range");
        let mut frame = self.background(t);
        let (w, h) = (self.spec.width, self.spec.height);
        for (s, spec) in self.tracks[t].iter().zip(&self.spec.targets) {
            let level = 255.0 * spec.luminance;
            let r2 = s.radius * s.radius;
            let x0 = (s.x - s.radius - 1.0).floor().max(0.0) as usize;
            let x1 = ((s.x + s.radius + 1.0).ceil() as usize).min(w - 1);
            let y0 = (s.y - s.radius - 1.0).floor().max(0.0) as usize;
            let y1 = ((s.y + s.radius + 1.0).ceil() as usize).min(h - 1);
            for py in y0..=y1 {
                for px in x0..=x1 {
                    let mut hits = 0;
                    for sy in 0..4 {
                        for sx in 0..4 {
                            let fx = px as f64 - 0.5 + (sx as f64 + 0.5) / 4.0 - s.x;
                            let fy = py as f64 - 0.5 + (sy as f64 + 0.5) / 4.0 - s.y;
                            if fx * fx + fy * fy <= r2 {
                                hits += 1;
                            }
                        }
                    }
                    if hits > 0 {
                        let cov = hits as f64 / 16.0;
                        let bg = frame.get(px, py);
                        frame.set(px, py, bg * (1.0 - cov) + level * cov);
                    }
                }
            }
        }
        frame.map(|v| v.round().clamp(0.0, 255.0))
    }
}

/// Renders frame `t` and its ground truth.
pub fn render_frame(scene: &Scene, t: usize) -> (FrameBuffer, Vec<TruthTarget>) {
    (scene.render(t), scene.truth(t))
}

fn random_position(rng: &mut ChaCha8Rng, radius: f64, w: f64, h: f64, placed: &[TargetState]) -> [f64; 2] {
    let margin = radius + 1.0;
    let mut p = [w / 2.0, h / 2.0];
    for _ in 0..1000 {
        p = [rng.gen_range(margin..w - margin), rng.gen_range(margin..h - margin)];
        if placed
            .iter()
            .all(|s| (s.x - p[0]).hypot(s.y - p[1]) >= s.radius + radius + 2.0)
        {
            break;
        }
    }
    p
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        PI
    } else {
        r
    }
}
