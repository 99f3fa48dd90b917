//! Direction-selective Gabor filtering, antagonistic centre-surround
//! filtering and the shared 2-D convolution engine.

mod conv;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

pub use conv::{convolve2d, Kernel, PaddedField};

use crate::error::{Error, Result};
use crate::frame::FrameBuffer;
use crate::frontend::DogKernel;

/// Number of filtering orientations.
pub const N_ORIENT: usize = 8;

/// Orientation `k` in radians, `k * pi / 4`.
#[inline]
pub fn orientation(k: usize) -> f64 {
    k as f64 * FRAC_PI_4
}

/// How kernel coordinates relate to pixel offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelUnits {
    /// One unit per pixel.
    Pixel,
    /// Offsets divided by the kernel half-width, so the grid spans `[-1, 1]`.
    HalfWidth,
}

impl KernelUnits {
    /// Pixels per coordinate unit for a kernel of odd extent `size`.
    pub fn pixels_per_unit(self, size: usize) -> f64 {
        match self {
            KernelUnits::Pixel => 1.0,
            KernelUnits::HalfWidth => (size / 2).max(1) as f64,
        }
    }
}

/// Samples `exp(-(x'^2 + y'^2) / 2 sigma^2) cos(2 pi x' / lambda + psi)` with
/// `x' = x cos(theta) + y sin(theta)`, `y' = -x sin(theta) + y cos(theta)`.
/// Pixel offsets are divided by `unit` before evaluation.
pub fn gabor_kernel(
    wavelength: f64,
    theta: f64,
    sigma: f64,
    psi: f64,
    size: usize,
    unit: f64,
) -> Result<Kernel> {
    if !(wavelength > 0.0 && sigma > 0.0 && unit > 0.0) {
        return Err(Error::InvalidParameter(
            "Gabor wavelength, sigma and unit must be positive".into(),
        ));
    }
    let (s, c) = theta.sin_cos();
    Kernel::from_fn(size, |dx, dy| {
        let (x, y) = (dx as f64 / unit, dy as f64 / unit);
        let xr = x * c + y * s;
        let yr = -x * s + y * c;
        (-(xr * xr + yr * yr) / (2.0 * sigma * sigma)).exp() * (2.0 * PI * xr / wavelength + psi).cos()
    })
}

/// Samples `2 exp(-(x^2 + y^2) / 2 sigma^2) cos(2 pi x / lambda) - 1`, with
/// pixel offsets divided by `unit`.
pub fn center_surround_kernel(wavelength: f64, sigma: f64, size: usize, unit: f64) -> Result<Kernel> {
    if size % 2 == 0 {
        return Err(Error::InvalidParameter(format!("centre-surround size {size} must be odd")));
    }
    if !(wavelength > 0.0 && sigma > 0.0 && unit > 0.0) {
        return Err(Error::InvalidParameter(
            "centre-surround wavelength, sigma and unit must be positive".into(),
        ));
    }
    Kernel::from_fn(size, |dx, dy| {
        let (x, y) = (dx as f64 / unit, dy as f64 / unit);
        2.0 * (-(x * x + y * y) / (2.0 * sigma * sigma)).exp() * (2.0 * PI * x / wavelength).cos() - 1.0
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpatialParams {
    pub gabor_wavelength: f64,
    pub gabor_sigma: f64,
    pub gabor_size: usize,
    pub gabor_units: KernelUnits,
    /// `M_W`, odd extent of the centre-surround kernel.
    pub wac_size: usize,
    pub wac_sigma: f64,
    /// `lambda_W` in `wac_units`. `None` means `2 M_W / 3` pixels with pixel
    /// units and 6 half-widths otherwise.
    pub wac_wavelength: Option<f64>,
    pub wac_units: KernelUnits,
}

impl Default for SpatialParams {
    fn default() -> Self {
        Self {
            gabor_wavelength: 4.0,
            gabor_sigma: 0.3,
            gabor_size: 5,
            gabor_units: KernelUnits::HalfWidth,
            wac_size: 21,
            wac_sigma: 1.5,
            wac_wavelength: None,
            wac_units: KernelUnits::HalfWidth,
        }
    }
}

impl SpatialParams {
    pub fn wac_wavelength(&self) -> f64 {
        self.wac_wavelength.unwrap_or(match self.wac_units {
            KernelUnits::Pixel => 2.0 * self.wac_size as f64 / 3.0,
            KernelUnits::HalfWidth => 6.0,
        })
    }

    /// Literal pixel-unit kernels throughout.
    pub fn pixel_units() -> Self {
        Self {
            gabor_units: KernelUnits::Pixel,
            wac_units: KernelUnits::Pixel,
            ..Self::default()
        }
    }
}

/// Every kernel the network needs, built once per configuration.
#[derive(Debug, Clone)]
pub struct KernelBank {
    pub dog: Kernel,
    /// `psi = 0` Gabor per orientation.
    pub even: Vec<Kernel>,
    /// `psi = pi/2` Gabor per orientation, stored reflected so that the
    /// correlation engine applies it as a true convolution. Motion along
    /// `theta` then yields positive energy in channel `theta`.
    pub odd: Vec<Kernel>,
    pub center_surround: Kernel,
}

impl KernelBank {
    pub fn new(dog: &DogKernel, spatial: &SpatialParams) -> Result<Self> {
        let gabor = |k: usize, psi: f64| {
            gabor_kernel(
                spatial.gabor_wavelength,
                orientation(k),
                spatial.gabor_sigma,
                psi,
                spatial.gabor_size,
                spatial.gabor_units.pixels_per_unit(spatial.gabor_size),
            )
        };
        Ok(Self {
            dog: dog.build()?,
            even: (0..N_ORIENT).map(|k| gabor(k, 0.0)).collect::<Result<_>>()?,
            odd: (0..N_ORIENT)
                .map(|k| gabor(k, FRAC_PI_2).map(|g| g.reflected()))
                .collect::<Result<_>>()?,
            center_surround: center_surround_kernel(
                spatial.wac_wavelength(),
                spatial.wac_sigma,
                spatial.wac_size,
                spatial.wac_units.pixels_per_unit(spatial.wac_size),
            )?,
        })
    }

    /// Largest kernel extent; frames must be at least this big.
    pub fn max_size(&self) -> usize {
        self.dog
            .size()
            .max(self.center_surround.size())
            .max(self.even[0].size())
    }
}

/// Starburst-amacrine responses for one polarity and one orientation.
///
/// Superscript 1 is the slow bipolar input, 2 the fast one; `a` is the even
/// (`psi = 0`) filter, `b` the odd (`psi = pi/2`) one.
#[derive(Debug, Clone)]
pub struct SacPair {
    pub a_slow: FrameBuffer,
    pub b_slow: FrameBuffer,
    pub a_fast: FrameBuffer,
    pub b_fast: FrameBuffer,
}

/// The eight SAC fields of one orientation.
#[derive(Debug, Clone)]
pub struct SacSlice {
    pub on: SacPair,
    pub off: SacPair,
}

fn sac_pair(fast: &PaddedField, slow: &PaddedField, even: &Kernel, odd: &Kernel) -> SacPair {
    SacPair {
        a_slow: slow.correlate(even),
        b_slow: slow.correlate(odd),
        a_fast: fast.correlate(even),
        b_fast: fast.correlate(odd),
    }
}

/// Padded fast/slow inputs of both polarities, shared across orientations.
pub struct SacInputs {
    on_fast: PaddedField,
    on_slow: PaddedField,
    off_fast: PaddedField,
    off_slow: PaddedField,
}

impl SacInputs {
    pub fn new(
        on_fast: &FrameBuffer,
        on_slow: &FrameBuffer,
        off_fast: &FrameBuffer,
        off_slow: &FrameBuffer,
        radius: usize,
    ) -> Self {
        Self {
            on_fast: PaddedField::new(on_fast, radius),
            on_slow: PaddedField::new(on_slow, radius),
            off_fast: PaddedField::new(off_fast, radius),
            off_slow: PaddedField::new(off_slow, radius),
        }
    }

    pub fn filter(&self, even: &Kernel, odd: &Kernel) -> SacSlice {
        SacSlice {
            on: sac_pair(&self.on_fast, &self.on_slow, even, odd),
            off: sac_pair(&self.off_fast, &self.off_slow, even, odd),
        }
    }
}

/// Filters the fast and slow bipolar fields of both polarities with the
/// quadrature Gabor pair built at one orientation.
pub fn sac_filter(
    on_fast: &FrameBuffer,
    on_slow: &FrameBuffer,
    off_fast: &FrameBuffer,
    off_slow: &FrameBuffer,
    even: &Kernel,
    odd: &Kernel,
) -> Result<SacSlice> {
    let size = even.size().max(odd.size());
    if size > on_fast.width() || size > on_fast.height() {
        return Err(Error::KernelTooLarge {
            kernel: size,
            width: on_fast.width(),
            height: on_fast.height(),
        });
    }
    for f in [on_slow, off_fast, off_slow] {
        on_fast.check_shape(f)?;
    }
    let inputs = SacInputs::new(on_fast, on_slow, off_fast, off_slow, size / 2);
    Ok(inputs.filter(even, odd))
}

/// Wide-field amacrine gating, `WA = [[B^s]^+ (x) g_W]^+`, for both polarities.
pub fn wac_mediate(
    on_slow: &FrameBuffer,
    off_slow: &FrameBuffer,
    kernel: &Kernel,
) -> Result<(FrameBuffer, FrameBuffer)> {
    let relu = |v: f64| v.max(0.0);
    let on = convolve2d(&on_slow.map(relu), kernel)?.map(relu);
    let off = convolve2d(&off_slow.map(relu), kernel)?.map(relu);
    Ok((on, off))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gabor_origin_values() {
        let even = gabor_kernel(4.0, 0.3, 0.3, 0.0, 5, 1.0).unwrap();
        let odd = gabor_kernel(4.0, 0.3, 0.3, FRAC_PI_2, 5, 1.0).unwrap();
        assert_eq!(even.at(0, 0), 1.0);
        assert!(odd.at(0, 0).abs() < 1e-15);
    }

    #[test]
    fn odd_gabor_sums_to_zero() {
        for k in 0..N_ORIENT {
            let g = gabor_kernel(4.0, orientation(k), 1.1, FRAC_PI_2, 7, 1.0).unwrap();
            assert!(g.sum().abs() < 1e-12);
        }
    }

    #[test]
    fn gabor_parity_under_half_turn() {
        for k in 0..4 {
            let t = orientation(k);
            let e0 = gabor_kernel(4.0, t, 1.0, 0.0, 5, 1.0).unwrap();
            let e1 = gabor_kernel(4.0, t + PI, 1.0, 0.0, 5, 1.0).unwrap();
            let o0 = gabor_kernel(4.0, t, 1.0, FRAC_PI_2, 5, 1.0).unwrap();
            let o1 = gabor_kernel(4.0, t + PI, 1.0, FRAC_PI_2, 5, 1.0).unwrap();
            for i in 0..25 {
                assert!((e0.data()[i] - e1.data()[i]).abs() < 1e-12);
                assert!((o0.data()[i] + o1.data()[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn small_gabor_lobe_follows_orientation() {
        // default kernels: odd lobe sits along the orientation axis
        for k in 0..N_ORIENT {
            let t = orientation(k);
            let odd = gabor_kernel(4.0, t, 0.3, FRAC_PI_2, 5, 1.0).unwrap();
            let (mut bx, mut by, mut best) = (0, 0, f64::INFINITY);
            for dy in -2..=2 {
                for dx in -2..=2 {
                    if odd.at(dx, dy) < best {
                        best = odd.at(dx, dy);
                        (bx, by) = (dx, dy);
                    }
                }
            }
            // cos(x' + pi/2) = -sin(x'): most negative where x' > 0
            let proj = bx as f64 * t.cos() + by as f64 * t.sin();
            assert!(proj > 0.0, "k={k} lobe at ({bx},{by})");
        }
    }

    #[test]
    fn center_surround_values() {
        let k = center_surround_kernel(10.0, 1.5, 15, 1.0).unwrap();
        assert!((k.at(0, 0) - 1.0).abs() < 1e-15);
        assert!((k.at(5, 0) - (-1.0077)).abs() < 1e-4, "{}", k.at(5, 0));
        assert!((k.at(7, 7) + 1.0).abs() < 1e-9);
        assert!(center_surround_kernel(10.0, 1.5, 14, 1.0).is_err());
    }

    #[test]
    fn default_wac_wavelength() {
        let p = SpatialParams {
            wac_size: 15,
            ..SpatialParams::pixel_units()
        };
        assert_eq!(p.wac_wavelength(), 10.0);
        assert_eq!(SpatialParams::default().wac_wavelength(), 6.0);
    }

    #[test]
    fn sac_zero_and_shared_operand() {
        let bank = KernelBank::new(&DogKernel::default(), &SpatialParams::default()).unwrap();
        let z = FrameBuffer::zeros(9, 9);
        let s = sac_filter(&z, &z, &z, &z, &bank.even[1], &bank.odd[1]).unwrap();
        for f in [&s.on.a_slow, &s.on.b_fast, &s.off.a_fast, &s.off.b_slow] {
            assert!(f.data().iter().all(|&v| v == 0.0));
        }
        let f = FrameBuffer::from_fn(9, 9, |x, y| ((x * 7 + y * 3) % 5) as f64);
        let s = sac_filter(&f, &f, &f, &f, &bank.even[3], &bank.odd[3]).unwrap();
        assert_eq!(s.on.a_slow, s.on.a_fast);
        assert_eq!(s.on.b_slow, s.on.b_fast);
    }

    #[test]
    fn wac_is_nonnegative_and_suppresses_wide_patches() {
        let k = center_surround_kernel(10.0, 1.5, 15, 1.0).unwrap();
        let z = FrameBuffer::zeros(25, 25);
        let (on, off) = wac_mediate(&z, &z, &k).unwrap();
        assert!(on.data().iter().chain(off.data()).all(|&v| v == 0.0));

        let blob = FrameBuffer::from_fn(25, 25, |x, y| if x == 12 && y == 12 { 10.0 } else { 0.0 });
        let wide = FrameBuffer::from_fn(25, 25, |x, y| {
            if (x as i32 - 12).abs() <= 5 && (y as i32 - 12).abs() <= 5 {
                10.0
            } else {
                0.0
            }
        });
        let (small, _) = wac_mediate(&blob, &z, &k).unwrap();
        let (big, _) = wac_mediate(&wide, &z, &k).unwrap();
        assert!(small.get(12, 12) > big.get(12, 12));
        let rnd = FrameBuffer::from_fn(25, 25, |x, y| ((x * 31 + y * 17) % 13) as f64 - 6.0);
        let (a, b) = wac_mediate(&rnd, &rnd.scale(-1.0), &k).unwrap();
        assert!(a.data().iter().chain(b.data()).all(|&v| v >= 0.0));
    }
}
