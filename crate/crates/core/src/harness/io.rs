//! Frame ingestion and report writers.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detector::{Detection, TruthTarget};
use crate::error::{Error, Result};
use crate::frame::FrameBuffer;
use crate::spatial::{Kernel, KernelBank};

use super::metrics::RocPoint;

const FRAME_EXTENSIONS: [&str; 3] = ["pgm", "png", "pnm"];

/// Image files of a directory in lexicographic order.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| FRAME_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    if paths.is_empty() {
        return Err(Error::EmptySequence(dir.to_path_buf()));
    }
    paths.sort();
    Ok(paths)
}

/// Loads one image as 0-255 intensities; colour channels are averaged.
pub fn load_frame(path: &Path) -> Result<FrameBuffer> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = if img.color().has_color() {
        img.to_rgb8()
            .pixels()
            .map(|p| (f64::from(p[0]) + f64::from(p[1]) + f64::from(p[2])) / 3.0)
            .collect()
    } else {
        img.to_luma8().as_raw().iter().map(|&v| f64::from(v)).collect()
    };
    FrameBuffer::from_vec(w, h, data)
}

/// Streams the frames of a directory, optionally resized, rejecting
/// frames whose size differs from the first.
pub struct FrameSequence {
    paths: std::vec::IntoIter<PathBuf>,
    resize: Option<(usize, usize)>,
    shape: Option<(usize, usize)>,
    len: usize,
}

impl FrameSequence {
    pub fn open(dir: &Path, resize: Option<(usize, usize)>) -> Result<Self> {
        let paths = list_frames(dir)?;
        Ok(Self {
            len: paths.len(),
            paths: paths.into_iter(),
            resize,
            shape: None,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn next_frame(&mut self, path: PathBuf) -> Result<FrameBuffer> {
        let frame = load_frame(&path)?;
        let shape = (frame.width(), frame.height());
        match self.shape {
            None => self.shape = Some(shape),
            Some((w, h)) if (w, h) != shape => {
                return Err(Error::DimensionMismatch {
                    expected_w: w,
                    expected_h: h,
                    got_w: shape.0,
                    got_h: shape.1,
                })
            }
            _ => {}
        }
        match self.resize {
            Some((w, h)) => area_resize(&frame, w, h),
            None => Ok(frame),
        }
    }
}

impl Iterator for FrameSequence {
    type Item = Result<FrameBuffer>;

    fn next(&mut self) -> Option<Self::Item> {
        let path = self.paths.next()?;
        Some(self.next_frame(path))
    }
}

/// Parses `WxH`.
pub fn parse_size(s: &str) -> Result<(usize, usize)> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::Parse(format!("size {s:?} is not WxH")))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Parse(format!("size {s:?} is not WxH")))
    };
    Ok((parse(w)?, parse(h)?))
}

/// Overlap weights of `n_out` equal output bins over `n_in` input cells.
fn area_weights(n_in: usize, n_out: usize) -> Vec<Vec<(usize, f64)>> {
    let step = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|o| {
            let (lo, hi) = (o as f64 * step, (o + 1) as f64 * step);
            let mut w = Vec::new();
            let mut i = lo.floor() as usize;
            while (i as f64) < hi && i < n_in {
                let overlap = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
                if overlap > 0.0 {
                    w.push((i, overlap / step));
                }
                i += 1;
            }
            w
        })
        .collect()
}

/// Resamples by averaging the input area under each output pixel.
pub fn area_resize(frame: &FrameBuffer, width: usize, height: usize) -> Result<FrameBuffer> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter("resize target must be nonempty".into()));
    }
    let wx = area_weights(frame.width(), width);
    let wy = area_weights(frame.height(), height);
    let mut rows = vec![0.0; width * frame.height()];
    for y in 0..frame.height() {
        let src = frame.row(y);
        for (ox, ws) in wx.iter().enumerate() {
            rows[y * width + ox] = ws.iter().map(|&(i, w)| src[i] * w).sum();
        }
    }
    let mut out = vec![0.0; width * height];
    for (oy, ws) in wy.iter().enumerate() {
        for &(iy, w) in ws {
            for ox in 0..width {
                out[oy * width + ox] += rows[iy * width + ox] * w;
            }
        }
    }
    FrameBuffer::from_vec(width, height, out)
}

/// How a real field is mapped to 8-bit pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scaling {
    /// Round and clamp to 0..=255.
    Clamp,
    /// Stretch the field's own range to 0..=255.
    MinMax,
}

pub fn to_u8(frame: &FrameBuffer, scaling: Scaling) -> Vec<u8> {
    match scaling {
        Scaling::Clamp => frame.data().iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect(),
        Scaling::MinMax => {
            let (lo, hi) = (frame.min(), frame.max());
            let span = hi - lo;
            frame
                .data()
                .iter()
                .map(|v| if span > 0.0 { ((v - lo) / span * 255.0).round() as u8 } else { 0 })
                .collect()
        }
    }
}

/// Writes an 8-bit grayscale image; the format follows the extension.
pub fn save_gray(frame: &FrameBuffer, path: &Path, scaling: Scaling) -> Result<()> {
    let img = image::GrayImage::from_raw(frame.width() as u32, frame.height() as u32, to_u8(frame, scaling))
        .expect("buffer matches frame size");
    img.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct TruthRow {
    frame: usize,
    target_id: usize,
    x: f64,
    y: f64,
    d_px: f64,
    direction_rad: f64,
}

/// Truth CSV: `frame,target_id,x,y,d_px,direction_rad`. `d_px` is the
/// target diameter (or box diagonal) in pixels.
pub fn write_truth_csv(path: &Path, rows: &[TruthTarget]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for t in rows {
        w.serialize(TruthRow {
            frame: t.frame,
            target_id: t.target_id,
            x: t.x,
            y: t.y,
            d_px: t.size_px,
            direction_rad: t.direction,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_truth_csv(path: &Path) -> Result<Vec<TruthTarget>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        let row: TruthRow = row?;
        out.push(TruthTarget {
            frame: row.frame,
            target_id: row.target_id,
            x: row.x,
            y: row.y,
            size_px: row.d_px,
            direction: row.direction_rad,
        });
    }
    Ok(out)
}

/// Groups truth rows by frame index; frames without rows are empty.
pub fn truth_by_frame(rows: &[TruthTarget]) -> Vec<Vec<TruthTarget>> {
    let n = rows.iter().map(|t| t.frame + 1).max().unwrap_or(0);
    let mut out = vec![Vec::new(); n];
    for t in rows {
        out[t.frame].push(*t);
    }
    out
}

pub fn write_detections_csv(path: &Path, dets: &[Detection]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for d in dets {
        w.serialize(d)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_detections_csv(path: &Path) -> Result<Vec<Detection>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|d| d.map_err(Error::from)).collect()
}

pub fn write_detections_json(path: &Path, dets: &[Detection]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, dets)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Writes `header` and `rows` as CSV, preceded by a comment line naming the
/// config hash.
pub fn write_table(path: &Path, config_hash: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "# config {config_hash}")?;
    writeln!(f, "{}", header.join(","))?;
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        writeln!(f, "{}", cells.join(","))?;
    }
    f.flush()?;
    Ok(())
}

pub fn write_roc_csv(path: &Path, config_hash: &str, points: &[RocPoint]) -> Result<()> {
    let rows: Vec<Vec<f64>> = points.iter().map(|p| vec![p.gamma, p.tpr, p.fpr]).collect();
    write_table(path, config_hash, &["gamma", "tpr", "fpr"], &rows)
}

fn write_kernel(path: &Path, k: &Kernel) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    for row in k.data().chunks(k.size()) {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(f, "{}", cells.join(","))?;
    }
    f.flush()?;
    Ok(())
}

/// Dumps every kernel of the bank as a CSV matrix.
pub fn dump_kernels(dir: &Path, bank: &KernelBank) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_kernel(&dir.join("dog.csv"), &bank.dog)?;
    write_kernel(&dir.join("center_surround.csv"), &bank.center_surround)?;
    for (k, (even, odd)) in bank.even.iter().zip(&bank.odd).enumerate() {
        write_kernel(&dir.join(format!("gabor_even_{k}.csv")), even)?;
        write_kernel(&dir.join(format!("gabor_odd_{k}.csv")), odd)?;
    }
    Ok(())
}
