use crate::error::{Error, Result};
use crate::frame::FrameBuffer;

/// Square, odd-sized filter kernel sampled on the integer lattice and
/// centred on the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    size: usize,
    data: Vec<f64>,
}

impl Kernel {
    pub fn from_vec(size: usize, data: Vec<f64>) -> Result<Self> {
        if size % 2 == 0 {
            return Err(Error::InvalidParameter(format!("kernel size {size} must be odd")));
        }
        if data.len() != size * size {
            return Err(Error::InvalidParameter(format!(
                "kernel of size {size} needs {} values, got {}",
                size * size,
                data.len()
            )));
        }
        Ok(Self { size, data })
    }

    /// Samples `f(dx, dy)` for offsets in `-r..=r` on both axes.
    pub fn from_fn(size: usize, f: impl Fn(i32, i32) -> f64) -> Result<Self> {
        if size % 2 == 0 {
            return Err(Error::InvalidParameter(format!("kernel size {size} must be odd")));
        }
        let r = (size / 2) as i32;
        let mut data = Vec::with_capacity(size * size);
        for dy in -r..=r {
            for dx in -r..=r {
                data.push(f(dx, dy));
            }
        }
        Ok(Self { size, data })
    }

    pub fn identity() -> Self {
        Self { size: 1, data: vec![1.0] }
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn radius(&self) -> usize {
        self.size / 2
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Value at offset `(dx, dy)` from the centre.
    pub fn at(&self, dx: i32, dy: i32) -> f64 {
        let r = self.radius() as i32;
        assert!(dx.abs() <= r && dy.abs() <= r, "offset outside kernel");
        self.data[((dy + r) as usize) * self.size + (dx + r) as usize]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Kernel reflected through the origin, `k'(dx, dy) = k(-dx, -dy)`.
    pub fn reflected(&self) -> Kernel {
        Kernel {
            size: self.size,
            data: self.data.iter().rev().copied().collect(),
        }
    }
}

/// A field with replicate-edge padding, reusable across several kernels of
/// radius up to `pad`.
pub struct PaddedField {
    width: usize,
    height: usize,
    pad: usize,
    stride: usize,
    data: Vec<f64>,
}

impl PaddedField {
    pub fn new(field: &FrameBuffer, pad: usize) -> Self {
        let (w, h) = (field.width(), field.height());
        let stride = w + 2 * pad;
        let mut data = Vec::with_capacity(stride * (h + 2 * pad));
        for py in 0..h + 2 * pad {
            let sy = py.saturating_sub(pad).min(h - 1);
            let row = field.row(sy);
            data.extend(std::iter::repeat(row[0]).take(pad));
            data.extend_from_slice(row);
            data.extend(std::iter::repeat(row[w - 1]).take(pad));
        }
        Self {
            width: w,
            height: h,
            pad,
            stride,
            data,
        }
    }

    /// Correlates with `kernel`: `out(x, y) = sum k(dx, dy) * in(x + dx, y + dy)`.
    pub fn correlate(&self, kernel: &Kernel) -> FrameBuffer {
        let r = kernel.radius();
        assert!(r <= self.pad, "kernel radius exceeds padding");
        let (w, h) = (self.width, self.height);
        let off = self.pad - r;
        let size = kernel.size();
        let mut out = vec![0.0; w * h];
        for (y, out_row) in out.chunks_exact_mut(w).enumerate() {
            for ky in 0..size {
                let base = (y + off + ky) * self.stride + off;
                let krow = &kernel.data[ky * size..(ky + 1) * size];
                for (kx, &k) in krow.iter().enumerate() {
                    if k == 0.0 {
                        continue;
                    }
                    let src = &self.data[base + kx..base + kx + w];
                    for (o, &s) in out_row.iter_mut().zip(src) {
                        *o += k * s;
                    }
                }
            }
        }
        FrameBuffer::from_vec(w, h, out).expect("correlation of a finite field stays finite")
    }
}

/// Same-size 2-D filtering with replicate-edge padding.
///
/// The kernel is applied in correlation orientation. For the point-symmetric
/// kernels used by the network (difference of gaussians, even Gabor,
/// centre-surround) this is identical to convolution; for the odd Gabor it
/// fixes the sign convention of the motion-energy readout.
pub fn convolve2d(field: &FrameBuffer, kernel: &Kernel) -> Result<FrameBuffer> {
    let size = kernel.size();
    if size > field.width() || size > field.height() {
        return Err(Error::KernelTooLarge {
            kernel: size,
            width: field.width(),
            height: field.height(),
        });
    }
    Ok(PaddedField::new(field, kernel.radius()).correlate(kernel))
}
