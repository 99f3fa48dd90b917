//! Band-pass temporal filtering with cascaded leaky integrators.
//!
//! Each layer obeys `tau dz_n/dt = -A z_n + C z_{n-1}` and the filter output
//! is the difference of two layers, `K (z_n - z_{n+m})`. Shallow taps respond
//! early and strongly, deep taps late and weakly; the network reads a fast
//! and a slow tap from the same cascade.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::FrameBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CascadeParams {
    /// Decay coefficient `A`.
    pub a: f64,
    /// Transmission coefficient `C`.
    pub c: f64,
    /// Integration time constant `tau` (s).
    pub tau: f64,
    /// Output gain `K`.
    pub k: f64,
    pub n_fast: usize,
    pub n_slow: usize,
    /// Offset between the two layers that are differenced.
    pub m: usize,
    /// Euler step (s), one step per frame.
    pub dt: f64,
}

impl Default for CascadeParams {
    fn default() -> Self {
        Self::detection()
    }
}

impl CascadeParams {
    /// Parameters used by the detection network.
    pub fn detection() -> Self {
        Self {
            a: 60.0,
            c: 60.0,
            tau: 5.0,
            k: 5.0,
            n_fast: 2,
            n_slow: 4,
            m: 1,
            dt: 0.05,
        }
    }

    /// Parameters used to characterise the filter on its own.
    pub fn characterization() -> Self {
        Self {
            tau: 8.0,
            ..Self::detection()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if !(self.tau > 0.0) {
            return bad("tau must be positive");
        }
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if !(self.a > 0.0 && self.c > 0.0) {
            return bad("A and C must be positive");
        }
        if self.n_fast == 0 || self.n_fast >= self.n_slow {
            return bad("need 1 <= n_fast < n_slow");
        }
        if self.m == 0 {
            return bad("m must be at least 1");
        }
        Ok(())
    }

    /// `a = A / tau`
    pub fn decay_rate(&self) -> f64 {
        self.a / self.tau
    }

    /// `b = C / tau`
    pub fn transmission_rate(&self) -> f64 {
        self.c / self.tau
    }

    pub fn deepest_layer(&self) -> usize {
        self.n_slow + self.m
    }
}

/// Layered leaky-integrator state `z_0 ..= z_{n_s + m}`, one field per layer.
#[derive(Debug, Clone)]
pub struct CascadeState {
    params: CascadeParams,
    layers: Vec<FrameBuffer>,
}

impl CascadeState {
    pub fn new(width: usize, height: usize, params: CascadeParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            layers: vec![FrameBuffer::zeros(width, height); params.deepest_layer() + 1],
        })
    }

    pub fn params(&self) -> &CascadeParams {
        &self.params
    }

    pub fn layers(&self) -> &[FrameBuffer] {
        &self.layers
    }

    /// Advances every layer by one explicit Euler step with `z_0 <- input`.
    ///
    /// Layer `n` is advanced from the values layer `n - 1` held before this
    /// step, so the discrete system stays a time-invariant linear map.
    pub fn step(&mut self, input: &FrameBuffer) -> Result<()> {
        self.layers[0].check_shape(input)?;
        if !input.is_finite() {
            return Err(Error::NonFinite);
        }
        let rate = self.params.dt / self.params.tau;
        let (decay, gain) = (rate * self.params.a, rate * self.params.c);
        self.layers[0].data_mut().copy_from_slice(input.data());
        // descending order: z_{n-1} is still the previous-step value when z_n reads it
        for n in (1..self.layers.len()).rev() {
            let (lower, upper) = self.layers.split_at_mut(n);
            let src = lower[n - 1].data();
            for (z, &prev) in upper[0].data_mut().iter_mut().zip(src) {
                *z += gain * prev - decay * *z;
            }
        }
        Ok(())
    }

    /// `K (z_n - z_{n+m})`
    pub fn readout(&self, n: usize) -> Result<FrameBuffer> {
        let m = self.params.m;
        let deepest = self.layers.len() - 1;
        if n + m > deepest {
            return Err(Error::TapOutOfRange {
                tap: n,
                offset: m,
                deepest,
            });
        }
        let k = self.params.k;
        Ok(self.layers[n].zip_map(&self.layers[n + m], |a, b| k * (a - b)))
    }
}

/// Fast and slow responses of both polarities.
#[derive(Debug, Clone)]
pub struct BipolarResponses {
    pub on_fast: FrameBuffer,
    pub on_slow: FrameBuffer,
    pub off_fast: FrameBuffer,
    pub off_slow: FrameBuffer,
}

/// Steps one cascade per polarity and reads each at the fast and slow taps.
pub fn fast_slow_responses(
    on_input: &FrameBuffer,
    off_input: &FrameBuffer,
    on_state: &mut CascadeState,
    off_state: &mut CascadeState,
) -> Result<BipolarResponses> {
    on_state.step(on_input)?;
    off_state.step(off_input)?;
    let (nf, ns) = (on_state.params.n_fast, on_state.params.n_slow);
    Ok(BipolarResponses {
        on_fast: on_state.readout(nf)?,
        on_slow: on_state.readout(ns)?,
        off_fast: off_state.readout(off_state.params.n_fast)?,
        off_slow: off_state.readout(off_state.params.n_slow)?,
    })
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Closed-form unit-impulse response of the tap at depth `n`:
/// `K e^{-at} [b^n t^{n-1}/(n-1)! - b^{n+m} t^{n+m-1}/(n+m-1)!]`.
pub fn impulse_response_analytic(params: &CascadeParams, n: usize, t: f64) -> f64 {
    assert!(n >= 1, "tap depth must be at least 1");
    let (a, b) = (params.decay_rate(), params.transmission_rate());
    let m = params.m;
    let term = |j: usize| b.powi(j as i32) * t.powi(j as i32 - 1) / factorial(j - 1);
    params.k * (-a * t).exp() * (term(n) - term(n + m))
}

/// Times of the positive peak and the negative trough of the `m = 1` impulse
/// response, the two roots of `ab(n-1)! t^2 - (a+b) n! t + (n-1) n! = 0`.
pub fn extrema_times(a: f64, b: f64, n: usize) -> (f64, f64) {
    let nf = factorial(n);
    let nm1 = factorial(n - 1);
    let lin = (a + b) * nf;
    let disc = lin * lin - 4.0 * a * b * nm1 * (n as f64 - 1.0) * nf;
    let root = disc.sqrt();
    let denom = 2.0 * a * b * nm1;
    ((lin - root) / denom, (lin + root) / denom)
}

/// Discriminant of the extremum quadratic (`m = 1`).
pub fn extrema_discriminant(a: f64, b: f64, n: usize) -> f64 {
    let nf = factorial(n);
    let lin = (a + b) * nf;
    lin * lin - 4.0 * a * b * factorial(n - 1) * (n as f64 - 1.0) * nf
}

/// Simulated impulse response of tap `n` on a single pixel.
///
/// The impulse carries unit area (`1/dt` for one step); sample `k` is the
/// readout after step `k` and corresponds to `t = k dt`.
pub fn simulate_impulse(params: &CascadeParams, n: usize, steps: usize) -> Result<Vec<f64>> {
    // deepen the cascade if the requested tap lies below the slow tap
    let mut deep = *params;
    deep.n_slow = deep.n_slow.max(n);
    let mut st = CascadeState::new(1, 1, deep)?;
    let impulse = FrameBuffer::filled(1, 1, 1.0 / params.dt);
    let zero = FrameBuffer::zeros(1, 1);
    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        st.step(if k == 0 { &impulse } else { &zero })?;
        out.push(st.readout(n)?.get(0, 0));
    }
    Ok(out)
}
