//! Contrast and detection-rate metrics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::FrameBuffer;
use crate::synth::wrap_angle;

/// Weber contrast `|mean(disc) - mean(annulus)| / 255` of a disc of
/// `diameter` pixels centred at `(cx, cy)`, against the surrounding ring one
/// diameter wide. The disc must lie inside the frame; the ring is clipped.
pub fn weber_contrast(frame: &FrameBuffer, cx: f64, cy: f64, diameter: f64) -> Result<f64> {
    let r = diameter / 2.0;
    let (w, h) = (frame.width() as f64, frame.height() as f64);
    if !(diameter > 0.0) || cx - r < -0.5 || cy - r < -0.5 || cx + r > w - 0.5 || cy + r > h - 0.5 {
        return Err(Error::RegionOutsideFrame);
    }
    let outer = r + diameter;
    let (mut st, mut nt, mut sb, mut nb) = (0.0, 0usize, 0.0, 0usize);
    let y0 = (cy - outer).floor().max(0.0) as usize;
    let y1 = ((cy + outer).ceil().max(0.0) as usize).min(frame.height() - 1);
    let x0 = (cx - outer).floor().max(0.0) as usize;
    let x1 = ((cx + outer).ceil().max(0.0) as usize).min(frame.width() - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let d = (x as f64 - cx).hypot(y as f64 - cy);
            if d <= r {
                st += frame.get(x, y);
                nt += 1;
            } else if d <= outer {
                sb += frame.get(x, y);
                nb += 1;
            }
        }
    }
    if nt == 0 || nb == 0 {
        return Err(Error::RegionOutsideFrame);
    }
    Ok((st / nt as f64 - sb / nb as f64).abs() / 255.0)
}

/// Tallies over a run at one threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DetectionCounts {
    pub true_detections: usize,
    pub actual_targets: usize,
    pub false_positives: usize,
    pub frames: usize,
}

impl DetectionCounts {
    pub fn add(&mut self, other: &DetectionCounts) {
        self.true_detections += other.true_detections;
        self.actual_targets += other.actual_targets;
        self.false_positives += other.false_positives;
        self.frames += other.frames;
    }
}

/// One point of a threshold sweep; `fpr` is false positives per frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub gamma: f64,
    pub tpr: f64,
    pub fpr: f64,
}

/// Detection rate over actual targets and false positives per frame.
pub fn tpr_fpr(gamma: f64, counts: &DetectionCounts) -> Result<RocPoint> {
    if counts.actual_targets == 0 {
        return Err(Error::NoTargets);
    }
    if counts.frames == 0 {
        return Err(Error::InvalidParameter("run has no frames".into()));
    }
    Ok(RocPoint {
        gamma,
        tpr: counts.true_detections as f64 / counts.actual_targets as f64,
        fpr: counts.false_positives as f64 / counts.frames as f64,
    })
}

/// Detection rate at a given false-positive rate, read off the curve by
/// linear interpolation. The curve is anchored at the origin and held flat
/// beyond its largest false-positive rate.
pub fn tpr_at_fpr(points: &[RocPoint], fpr: f64) -> f64 {
    let mut curve: Vec<(f64, f64)> = points.iter().map(|p| (p.fpr, p.tpr)).collect();
    curve.push((0.0, 0.0));
    curve.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    // keep the best rate at each false-positive level so the curve is a function
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for (f, t) in curve {
        match hull.last_mut() {
            Some(last) if last.0 == f => last.1 = last.1.max(t),
            _ => hull.push((f, t)),
        }
    }
    if fpr >= hull.last().unwrap().0 {
        return hull.last().unwrap().1;
    }
    for pair in hull.windows(2) {
        let ((f0, t0), (f1, t1)) = (pair[0], pair[1]);
        if fpr >= f0 && fpr <= f1 {
            return t0 + (t1 - t0) * (fpr - f0) / (f1 - f0);
        }
    }
    0.0
}

/// Absolute angular difference in `[0, pi]`.
pub fn angular_error(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn disc_frame(target: f64, background: f64) -> FrameBuffer {
        FrameBuffer::from_fn(32, 32, |x, y| {
            if (x as f64 - 16.0).hypot(y as f64 - 16.0) <= 3.0 {
                target
            } else {
                background
            }
        })
    }

    #[test]
    fn weber_examples() {
        let c = |t, b| weber_contrast(&disc_frame(t, b), 16.0, 16.0, 6.0).unwrap();
        assert!((c(255.0, 0.0) - 1.0).abs() < 1e-12);
        assert_eq!(c(100.0, 100.0), 0.0);
        assert!((c(255.0, 51.0) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn weber_rejects_outside() {
        let f = disc_frame(0.0, 255.0);
        assert!(matches!(
            weber_contrast(&f, 1.0, 16.0, 6.0),
            Err(Error::RegionOutsideFrame)
        ));
        assert!(weber_contrast(&f, 3.0, 3.0, 6.0).is_ok());
    }

    #[test]
    fn rate_examples() {
        let p = tpr_fpr(
            0.3,
            &DetectionCounts {
                true_detections: 5,
                actual_targets: 10,
                false_positives: 900,
                frames: 180,
            },
        )
        .unwrap();
        assert_eq!((p.tpr, p.fpr), (0.5, 5.0));
        assert!(matches!(tpr_fpr(0.3, &DetectionCounts::default()), Err(Error::NoTargets)));
    }

    #[test]
    fn interpolation() {
        let pts = [
            RocPoint { gamma: 0.1, tpr: 0.9, fpr: 8.0 },
            RocPoint { gamma: 0.5, tpr: 0.5, fpr: 2.0 },
            RocPoint { gamma: 0.9, tpr: 0.1, fpr: 0.0 },
        ];
        assert!((tpr_at_fpr(&pts, 5.0) - 0.7).abs() < 1e-12);
        assert_eq!(tpr_at_fpr(&pts, 20.0), 0.9);
        assert!((tpr_at_fpr(&pts, 1.0) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn angular_error_wraps() {
        assert!((angular_error(0.1, 2.0 * PI - 0.1) - 0.2).abs() < 1e-12);
        assert!((angular_error(PI, -PI)).abs() < 1e-12);
    }
}
