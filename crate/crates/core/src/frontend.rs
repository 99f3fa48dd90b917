//! Photoreceptor layer and first bipolar stage.
//!
//! Luminance changes are accumulated with a short, fast-decaying memory,
//! split into ON (increment) and OFF (decrement) channels by half-wave
//! rectification, and band-passed by a difference-of-gaussians kernel that
//! stands in for horizontal-cell inhibition.

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::FrameBuffer;
use crate::spatial::{convolve2d, Kernel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhotoreceptorParams {
    /// Number of past outputs fed back into the current one.
    pub n_p: usize,
    /// Steepness of the decay `p_i = 1 / (1 + e^{u i})`.
    pub u: f64,
}

impl Default for PhotoreceptorParams {
    fn default() -> Self {
        Self { n_p: 5, u: 1.0 }
    }
}

impl PhotoreceptorParams {
    pub fn decay_coeffs(&self) -> Vec<f64> {
        (1..=self.n_p)
            .map(|i| 1.0 / (1.0 + (self.u * i as f64).exp()))
            .collect()
    }
}

/// Per-pixel luminance-change memory.
#[derive(Debug, Clone)]
pub struct PhotoreceptorState {
    coeffs: Vec<f64>,
    /// Most recent output first.
    history: VecDeque<FrameBuffer>,
    prev_frame: FrameBuffer,
}

impl PhotoreceptorState {
    /// Starts the layer from the first frame of a sequence.
    pub fn new(first_frame: FrameBuffer, params: PhotoreceptorParams) -> Result<Self> {
        if !first_frame.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            coeffs: params.decay_coeffs(),
            history: VecDeque::with_capacity(params.n_p + 1),
            prev_frame: first_frame,
        })
    }

    pub fn decay_coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    /// Consumes the next frame and returns `P(t) = I(t) - I(t-1) + sum p_i P(t-i)`.
    pub fn update(&mut self, frame: &FrameBuffer) -> Result<FrameBuffer> {
        self.prev_frame.check_shape(frame)?;
        if !frame.is_finite() {
            return Err(Error::NonFinite);
        }
        let mut out = frame.zip_map(&self.prev_frame, |cur, prev| cur - prev);
        for (p, past) in self.coeffs.iter().zip(&self.history) {
            for (o, &h) in out.data_mut().iter_mut().zip(past.data()) {
                *o += p * h;
            }
        }
        if !self.coeffs.is_empty() {
            if self.history.len() == self.coeffs.len() {
                self.history.pop_back();
            }
            self.history.push_front(out.clone());
        }
        self.prev_frame = frame.clone();
        Ok(out)
    }
}

/// Half-wave split into ON and OFF channels: `B+ = (|P| + P) / 2`, `B- = (|P| - P) / 2`.
pub fn onoff_split(p: &FrameBuffer) -> (FrameBuffer, FrameBuffer) {
    (
        p.map(|v| 0.5 * (v.abs() + v)),
        p.map(|v| 0.5 * (v.abs() - v)),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DogKernel {
    /// Signed gain. The default is negative: with `sigma1 < sigma2` the
    /// kernel then has a positive centre for target-sized blobs.
    pub gain: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub size: usize,
}

impl Default for DogKernel {
    fn default() -> Self {
        Self {
            gain: -1.0,
            sigma1: 1.0,
            sigma2: 2.0,
            size: 13,
        }
    }
}

impl DogKernel {
    /// Smallest odd extent covering `6 sigma2`.
    pub fn min_size(sigma2: f64) -> usize {
        let s = (6.0 * sigma2).ceil() as usize;
        if s % 2 == 0 {
            s + 1
        } else {
            s
        }
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        let r2 = x * x + y * y;
        let norm = (2.0 * PI).sqrt();
        self.gain / (norm * self.sigma1) * (-r2 / (2.0 * self.sigma1 * self.sigma1)).exp()
            - self.gain / (norm * self.sigma2) * (-r2 / (2.0 * self.sigma2 * self.sigma2)).exp()
    }

    pub fn build(&self) -> Result<Kernel> {
        dog_kernel(self.gain, self.sigma1, self.sigma2, self.size)
    }
}

/// Samples the difference-of-gaussians band-pass kernel.
pub fn dog_kernel(gain: f64, sigma1: f64, sigma2: f64, size: usize) -> Result<Kernel> {
    if !(sigma1 > 0.0 && sigma1 < sigma2) {
        return Err(Error::InvalidParameter(format!(
            "DoG needs 0 < sigma1 < sigma2, got {sigma1} and {sigma2}"
        )));
    }
    if size % 2 == 0 || size < DogKernel::min_size(sigma2) {
        return Err(Error::InvalidParameter(format!(
            "DoG size {size} must be odd and at least {}",
            DogKernel::min_size(sigma2)
        )));
    }
    let k = DogKernel {
        gain,
        sigma1,
        sigma2,
        size,
    };
    Kernel::from_fn(size, |dx, dy| k.value(dx as f64, dy as f64))
}

/// First bipolar layer: `B0 = B (x) g_I`.
pub fn bipolar_bandpass(b: &FrameBuffer, kernel: &Kernel) -> Result<FrameBuffer> {
    convolve2d(b, kernel)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn px(v: f64) -> FrameBuffer {
        FrameBuffer::filled(1, 1, v)
    }

    #[test]
    fn decay_coefficients_for_unit_steepness() {
        let p = PhotoreceptorParams { n_p: 5, u: 1.0 }.decay_coeffs();
        assert!((p[0] - 0.26894).abs() < 1e-5);
        assert!((p[1] - 0.11920).abs() < 1e-5);
        assert!(p.windows(2).all(|w| 0.0 < w[1] && w[1] < w[0] && w[0] < 0.5));
    }

    #[test]
    fn step_sequence_recursion() {
        let seq = [100.0, 100.0, 110.0, 110.0, 110.0];
        let mut st = PhotoreceptorState::new(px(seq[0]), PhotoreceptorParams::default()).unwrap();
        let out: Vec<f64> = seq[1..].iter().map(|&v| st.update(&px(v)).unwrap().get(0, 0)).collect();
        let expected = [0.0, 10.0, 2.6894, 1.9153];
        for (o, e) in out.iter().zip(expected) {
            assert!((o - e).abs() < 1e-4, "{out:?}");
        }
    }

    #[test]
    fn constant_input_gives_zero() {
        let f = FrameBuffer::filled(4, 3, 100.0);
        let mut st = PhotoreceptorState::new(f.clone(), PhotoreceptorParams::default()).unwrap();
        for _ in 0..10 {
            assert!(st.update(&f).unwrap().data().iter().all(|&v| v == 0.0));
        }
        assert_eq!(st.history_len(), 5);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut st = PhotoreceptorState::new(FrameBuffer::zeros(4, 4), Default::default()).unwrap();
        assert!(matches!(
            st.update(&FrameBuffer::zeros(4, 5)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn onoff_branches() {
        let (on, off) = onoff_split(&px(5.0));
        assert_eq!((on.get(0, 0), off.get(0, 0)), (5.0, 0.0));
        let (on, off) = onoff_split(&px(-3.0));
        assert_eq!((on.get(0, 0), off.get(0, 0)), (0.0, 3.0));
    }

    #[test]
    fn dog_origin_value() {
        let k = dog_kernel(1.0, 1.0, 2.0, 13).unwrap();
        assert!((k.at(0, 0) - 0.19947).abs() < 1e-5);
    }

    #[test]
    fn dog_is_radially_symmetric() {
        let k = dog_kernel(1.3, 0.8, 2.1, 13).unwrap();
        for dy in -6..=6 {
            for dx in -6..=6 {
                assert_eq!(k.at(dx, dy), k.at(-dx, -dy));
                assert_eq!(k.at(dx, dy), k.at(dy, dx));
            }
        }
    }

    #[test]
    fn dog_vanishes_as_sigmas_meet() {
        let k = dog_kernel(1.0, 2.0, 2.0 + 1e-9, 13).unwrap();
        assert!(k.data().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn dog_rejects_bad_params() {
        assert!(dog_kernel(1.0, 2.0, 2.0, 13).is_err());
        assert!(dog_kernel(1.0, 3.0, 2.0, 13).is_err());
        assert!(dog_kernel(1.0, 1.0, 2.0, 12).is_err());
        assert!(dog_kernel(1.0, 1.0, 2.0, 11).is_err());
        assert_eq!(DogKernel::min_size(2.0), 13);
    }

    #[test]
    fn bandpass_impulse_and_dc() {
        let k = dog_kernel(1.0, 1.0, 2.0, 13).unwrap();
        let zero = FrameBuffer::zeros(21, 21);
        assert!(bipolar_bandpass(&zero, &k).unwrap().data().iter().all(|&v| v == 0.0));

        let mut imp = FrameBuffer::zeros(21, 21);
        imp.set(10, 10, 1.0);
        let out = bipolar_bandpass(&imp, &k).unwrap();
        for d in -6..=6 {
            assert_eq!(out.get((10 + d) as usize, 10), k.at(d, 0));
        }

        // replicate padding makes the response to a constant exactly sum(k) * c
        let flat = FrameBuffer::filled(21, 21, 3.0);
        let out = bipolar_bandpass(&flat, &k).unwrap();
        let dc = k.sum();
        assert!(out.data().iter().all(|&v| (v - 3.0 * dc).abs() < 1e-12));
    }
}
