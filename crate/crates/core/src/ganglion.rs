//! Ganglion layer: opponent motion energy, direction estimate, size-gated
//! activation and directionally selective inhibition.

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::detector::Detection;
use crate::frame::FrameBuffer;
use crate::spatial::{SacPair, N_ORIENT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GanglionParams {
    pub w_on: f64,
    pub w_off: f64,
    /// A direction interval is inhibited when it holds more than this many
    /// candidate detections.
    pub n_th: usize,
    pub inhibition: bool,
}

impl Default for GanglionParams {
    fn default() -> Self {
        Self {
            w_on: 0.5,
            w_off: 0.5,
            n_th: 6,
            inhibition: true,
        }
    }
}

/// `E = SA^1 SB^2 - SA^2 SB^1` (slow even x fast odd minus fast even x slow odd).
pub fn motion_energy(
    a_slow: &FrameBuffer,
    b_slow: &FrameBuffer,
    a_fast: &FrameBuffer,
    b_fast: &FrameBuffer,
) -> FrameBuffer {
    let mut out = a_slow.zip_map(b_fast, |a, b| a * b);
    for ((o, &af), &bs) in out.data_mut().iter_mut().zip(a_fast.data()).zip(b_slow.data()) {
        *o -= af * bs;
    }
    out
}

pub fn pair_energy(p: &SacPair) -> FrameBuffer {
    motion_energy(&p.a_slow, &p.b_slow, &p.a_fast, &p.b_fast)
}

/// `E = w+ E+ + w- E-`
pub fn combine_onoff(on: &FrameBuffer, off: &FrameBuffer, w_on: f64, w_off: f64) -> FrameBuffer {
    on.zip_map(off, |a, b| w_on * a + w_off * b)
}

/// Angle of `(x, y)` in `(-pi, pi]`; the zero vector maps to 0.
#[inline]
pub fn direction_of(x: f64, y: f64) -> f64 {
    if x == 0.0 && y == 0.0 {
        return 0.0;
    }
    let a = y.atan2(x);
    if a <= -PI {
        PI
    } else {
        a
    }
}

/// Per-pixel direction from the two axial energies, `atan2(E^{pi/2}, E^0)`.
///
/// Directions are in image coordinates: 0 points along +x (right) and
/// `pi/2` along +y (down).
pub fn direction_map(e0: &FrameBuffer, e90: &FrameBuffer) -> FrameBuffer {
    e0.zip_map(e90, direction_of)
}

/// Motion energy at all eight orientations, both polarities.
#[derive(Debug, Clone)]
pub struct EnergyTensor {
    pub on: Vec<FrameBuffer>,
    pub off: Vec<FrameBuffer>,
    pub combined: Vec<FrameBuffer>,
    pub direction: FrameBuffer,
    pub w_on: f64,
    pub w_off: f64,
}

impl EnergyTensor {
    pub fn new(on: Vec<FrameBuffer>, off: Vec<FrameBuffer>, w_on: f64, w_off: f64) -> Self {
        assert_eq!(on.len(), N_ORIENT);
        assert_eq!(off.len(), N_ORIENT);
        let combined: Vec<FrameBuffer> = on
            .iter()
            .zip(&off)
            .map(|(p, m)| combine_onoff(p, m, w_on, w_off))
            .collect();
        let direction = direction_map(&combined[0], &combined[2]);
        Self {
            on,
            off,
            combined,
            direction,
            w_on,
            w_off,
        }
    }

    pub fn width(&self) -> usize {
        self.direction.width()
    }

    pub fn height(&self) -> usize {
        self.direction.height()
    }

    /// `max_theta E^theta` of the combined energy.
    pub fn max_combined(&self) -> FrameBuffer {
        max_over(&self.combined)
    }
}

pub(crate) fn max_over(fields: &[FrameBuffer]) -> FrameBuffer {
    let mut out = fields[0].clone();
    for f in &fields[1..] {
        for (o, &v) in out.data_mut().iter_mut().zip(f.data()) {
            *o = o.max(v);
        }
    }
    out
}

/// Inhibited orientations, as indices into the eight-way bank.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InhibitionSet {
    mask: [bool; N_ORIENT],
}

impl InhibitionSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn all() -> Self {
        Self {
            mask: [true; N_ORIENT],
        }
    }

    pub fn from_indices(idx: &[usize]) -> Self {
        let mut s = Self::default();
        for &i in idx {
            s.mask[i % N_ORIENT] = true;
        }
        s
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&m| m)
    }

    pub fn contains(&self, k: usize) -> bool {
        self.mask[k]
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..N_ORIENT).filter(|&k| self.mask[k]).collect()
    }

    pub fn angles(&self) -> Vec<f64> {
        self.indices().into_iter().map(|k| k as f64 * FRAC_PI_4).collect()
    }
}

/// Index of the half-open interval `[k pi/4, (k+1) pi/4)` holding `phi`
/// after normalisation to `[0, 2 pi)`.
pub fn direction_interval(phi: f64) -> usize {
    let norm = phi.rem_euclid(TAU);
    ((norm / FRAC_PI_4).floor() as usize).min(N_ORIENT - 1)
}

/// Orientations to inhibit: both ends of every direction interval holding
/// more than `n_th` detections.
pub fn inhibition_set(detections: &[Detection], n_th: usize) -> InhibitionSet {
    let mut counts = [0usize; N_ORIENT];
    for d in detections {
        counts[direction_interval(d.direction)] += 1;
    }
    let mut set = InhibitionSet::empty();
    for (k, &c) in counts.iter().enumerate() {
        if c > n_th {
            set.mask[k] = true;
            set.mask[(k + 1) % N_ORIENT] = true;
        }
    }
    set
}

/// `[w+ v+ + w- v-]^+`
#[inline]
pub(crate) fn rectified_sum(v_on: f64, v_off: f64, w_on: f64, w_off: f64) -> f64 {
    (w_on * v_on + w_off * v_off).max(0.0)
}

/// `max_theta E^theta`
#[inline]
pub(crate) fn max_energy(e: &[f64; N_ORIENT]) -> f64 {
    e.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `V - max_{theta in I} E^theta WA`, or `V` itself when nothing is inhibited.
#[inline]
pub(crate) fn inhibit(v: f64, e: &[f64; N_ORIENT], wa: f64, set: &InhibitionSet) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for (k, &x) in e.iter().enumerate() {
        if set.mask[k] {
            m = m.max(x);
        }
    }
    if m == f64::NEG_INFINITY {
        v
    } else {
        v - m * wa
    }
}

/// Ganglion activations before (`V`) and after (`V'`) inhibition.
#[derive(Debug, Clone)]
pub struct GanglionField {
    pub v_on: FrameBuffer,
    pub v_off: FrameBuffer,
    pub v: FrameBuffer,
    pub v_on_inh: FrameBuffer,
    pub v_off_inh: FrameBuffer,
    pub v_inh: FrameBuffer,
    pub inhibited: InhibitionSet,
}

fn gather(fields: &[FrameBuffer], i: usize) -> [f64; N_ORIENT] {
    let mut e = [0.0; N_ORIENT];
    for (k, f) in fields.iter().enumerate() {
        e[k] = f.data()[i];
    }
    e
}

/// `V+- = max_theta E+-^theta WA+-`, `V = [w+ V+ + w- V-]^+`.
pub fn ganglion_response(bank: &EnergyTensor, wa_on: &FrameBuffer, wa_off: &FrameBuffer) -> GanglionField {
    let (w, h) = (bank.width(), bank.height());
    let n = w * h;
    let mut v_on = vec![0.0; n];
    let mut v_off = vec![0.0; n];
    let mut v = vec![0.0; n];
    for i in 0..n {
        v_on[i] = max_energy(&gather(&bank.on, i)) * wa_on.data()[i];
        v_off[i] = max_energy(&gather(&bank.off, i)) * wa_off.data()[i];
        v[i] = rectified_sum(v_on[i], v_off[i], bank.w_on, bank.w_off);
    }
    let fb = |d| FrameBuffer::from_vec(w, h, d).expect("finite ganglion field");
    let (v_on, v_off, v) = (fb(v_on), fb(v_off), fb(v));
    GanglionField {
        v_on_inh: v_on.clone(),
        v_off_inh: v_off.clone(),
        v_inh: v.clone(),
        v_on,
        v_off,
        v,
        inhibited: InhibitionSet::empty(),
    }
}

/// Recomputes the primed activations with the orientations in `set` inhibited.
pub fn apply_inhibition(
    field: &GanglionField,
    bank: &EnergyTensor,
    wa_on: &FrameBuffer,
    wa_off: &FrameBuffer,
    set: &InhibitionSet,
) -> GanglionField {
    let mut out = field.clone();
    out.inhibited = set.clone();
    if set.is_empty() {
        out.v_on_inh = field.v_on.clone();
        out.v_off_inh = field.v_off.clone();
        out.v_inh = field.v.clone();
        return out;
    }
    let n = field.v.len();
    for i in 0..n {
        let on = inhibit(field.v_on.data()[i], &gather(&bank.on, i), wa_on.data()[i], set);
        let off = inhibit(field.v_off.data()[i], &gather(&bank.off, i), wa_off.data()[i], set);
        out.v_on_inh.data_mut()[i] = on;
        out.v_off_inh.data_mut()[i] = off;
        out.v_inh.data_mut()[i] = rectified_sum(on, off, bank.w_on, bank.w_off);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn px(v: f64) -> FrameBuffer {
        FrameBuffer::filled(1, 1, v)
    }

    fn det(direction: f64) -> Detection {
        Detection {
            x: 0.0,
            y: 0.0,
            direction,
            energy: 1.0,
            n_points: 1,
            frame_index: 0,
        }
    }

    #[test]
    fn energy_arithmetic() {
        let e = motion_energy(&px(2.0), &px(1.0), &px(1.0), &px(3.0));
        assert_eq!(e.get(0, 0), 5.0);
    }

    #[test]
    fn static_stimulus_has_no_energy() {
        let a = FrameBuffer::from_fn(5, 5, |x, y| (x as f64 - 2.0) * (y as f64 + 0.5));
        let b = FrameBuffer::from_fn(5, 5, |x, y| (x * y) as f64 - 3.0);
        let e = motion_energy(&a, &b, &a, &b);
        assert!(e.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn swapping_fast_and_slow_negates() {
        let f = |s: u64| FrameBuffer::from_fn(4, 4, move |x, y| ((x as u64 * 7 + y as u64 * 13 + s) % 11) as f64 - 5.0);
        let (a1, b1, a2, b2) = (f(1), f(2), f(3), f(4));
        let e = motion_energy(&a1, &b1, &a2, &b2);
        let r = motion_energy(&a2, &b2, &a1, &b1);
        for (x, y) in e.data().iter().zip(r.data()) {
            assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn onoff_weights() {
        assert_eq!(combine_onoff(&px(4.0), &px(2.0), 1.0, 0.0).get(0, 0), 4.0);
        assert_eq!(combine_onoff(&px(4.0), &px(2.0), 0.5, 0.5).get(0, 0), 3.0);
    }

    #[test]
    fn direction_values() {
        assert_eq!(direction_of(1.0, 0.0), 0.0);
        assert!((direction_of(1.0, 1.0) - FRAC_PI_4).abs() < 1e-15);
        assert_eq!(direction_of(0.0, 0.0), 0.0);
        assert_eq!(direction_of(-0.0, -0.0), 0.0);
        assert_eq!(direction_of(-1.0, -0.0), PI);
        assert!((direction_of(0.0, -2.0) + FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn intervals_are_half_open() {
        assert_eq!(direction_interval(0.0), 0);
        assert_eq!(direction_interval(FRAC_PI_4), 1);
        assert_eq!(direction_interval(FRAC_PI_4 - 1e-9), 0);
        assert_eq!(direction_interval(-1e-9), 7);
        assert_eq!(direction_interval(PI), 4);
    }

    #[test]
    fn inhibition_threshold_is_strict() {
        assert!(inhibition_set(&[], 6).is_empty());
        let seven: Vec<_> = (0..7).map(|i| det(0.1 * i as f64)).collect();
        let s = inhibition_set(&seven, 6);
        assert_eq!(s.indices(), vec![0, 1]);
        assert!(inhibition_set(&seven[..6], 6).is_empty());
        // the last interval wraps its upper end onto orientation 0
        let back: Vec<_> = (0..7).map(|_| det(-0.2)).collect();
        assert_eq!(inhibition_set(&back, 6).indices(), vec![0, 7]);
    }

    fn toy_bank() -> (EnergyTensor, FrameBuffer, FrameBuffer) {
        let on: Vec<_> = (0..8)
            .map(|k| FrameBuffer::from_fn(3, 3, move |x, y| ((x + 2 * y + 3 * k) % 7) as f64 - 2.0))
            .collect();
        let off: Vec<_> = (0..8)
            .map(|k| FrameBuffer::from_fn(3, 3, move |x, y| ((2 * x + y + 5 * k) % 5) as f64 - 1.5))
            .collect();
        let wa_on = FrameBuffer::from_fn(3, 3, |x, _| x as f64);
        let wa_off = FrameBuffer::from_fn(3, 3, |_, y| 0.5 * y as f64);
        (EnergyTensor::new(on, off, 0.5, 0.5), wa_on, wa_off)
    }

    #[test]
    fn zero_gating_gives_zero_activation() {
        let (bank, _, _) = toy_bank();
        let z = FrameBuffer::zeros(3, 3);
        let g = ganglion_response(&bank, &z, &z);
        assert!(g.v.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_set_leaves_activation_untouched() {
        let (bank, a, b) = toy_bank();
        let g = ganglion_response(&bank, &a, &b);
        let h = apply_inhibition(&g, &bank, &a, &b, &InhibitionSet::empty());
        assert_eq!(h.v_inh, g.v);
        assert!(g.v.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn inhibiting_everything_cancels() {
        let (bank, a, b) = toy_bank();
        let g = ganglion_response(&bank, &a, &b);
        let h = apply_inhibition(&g, &bank, &a, &b, &InhibitionSet::all());
        assert!(h.v_on_inh.data().iter().all(|&v| v == 0.0));
        assert!(h.v_inh.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn singleton_support_scales_with_gating() {
        let mut on: Vec<_> = (0..8).map(|_| FrameBuffer::zeros(1, 1)).collect();
        on[3] = px(2.0);
        let off: Vec<_> = (0..8).map(|_| FrameBuffer::zeros(1, 1)).collect();
        let bank = EnergyTensor::new(on, off, 0.5, 0.5);
        let v1 = ganglion_response(&bank, &px(1.0), &px(0.0)).v.get(0, 0);
        let v3 = ganglion_response(&bank, &px(3.0), &px(0.0)).v.get(0, 0);
        assert_eq!(v1, 1.0);
        assert_eq!(v3, 3.0);
    }
}
