//! Frame-by-frame driver for the whole network.
//!
//! [`Brnn::process`] runs everything that does not depend on the detection
//! threshold and hands back an [`ActivationFrame`]: the sparse set of pixels
//! where either gating field is positive, with the energies needed to form
//! `V`, `V'` and the population readout. [`detect`] turns one activation
//! frame into detections for a given threshold, so a threshold sweep reuses
//! a single pass of the filters.

use crate::config::RunConfig;
use crate::detector::{cluster_readout, dbscan, normalize, Detection, DetectorParams, MemberSample};
use crate::error::{Error, Result};
use crate::frame::FrameBuffer;
use crate::frontend::{bipolar_bandpass, onoff_split, PhotoreceptorState};
use crate::ganglion::{
    inhibit, inhibition_set, max_energy, pair_energy, rectified_sum, EnergyTensor, GanglionParams,
    InhibitionSet,
};
use crate::spatial::{wac_mediate, KernelBank, SacInputs, N_ORIENT};
use crate::temporal::{fast_slow_responses, BipolarResponses, CascadeState};

/// A pixel with nonzero gating in at least one polarity.
#[derive(Debug, Clone, PartialEq)]
pub struct Site {
    pub index: usize,
    pub wa_on: f64,
    pub wa_off: f64,
    pub e_on: [f64; N_ORIENT],
    pub e_off: [f64; N_ORIENT],
    /// `max_theta` of the ON/OFF-combined energy.
    pub max_combined: f64,
    pub direction: f64,
}

impl Site {
    fn v_parts(&self) -> (f64, f64) {
        (max_energy(&self.e_on) * self.wa_on, max_energy(&self.e_off) * self.wa_off)
    }

    fn v(&self, w_on: f64, w_off: f64) -> f64 {
        let (on, off) = self.v_parts();
        rectified_sum(on, off, w_on, w_off)
    }

    fn v_inhibited(&self, w_on: f64, w_off: f64, set: &InhibitionSet) -> f64 {
        let (on, off) = self.v_parts();
        rectified_sum(
            inhibit(on, &self.e_on, self.wa_on, set),
            inhibit(off, &self.e_off, self.wa_off, set),
            w_on,
            w_off,
        )
    }
}

/// Threshold-independent output of one frame.
///
/// Pixels outside `sites` have zero gating, hence `V = V' = 0` there.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationFrame {
    pub frame_index: usize,
    pub width: usize,
    pub height: usize,
    pub w_on: f64,
    pub w_off: f64,
    pub sites: Vec<Site>,
}

impl ActivationFrame {
    pub fn from_dense(
        frame_index: usize,
        energy: &EnergyTensor,
        wa_on: &FrameBuffer,
        wa_off: &FrameBuffer,
    ) -> Self {
        let (w, h) = (energy.width(), energy.height());
        let mut sites = Vec::new();
        for i in 0..w * h {
            let (a, b) = (wa_on.data()[i], wa_off.data()[i]);
            if a == 0.0 && b == 0.0 {
                continue;
            }
            let mut e_on = [0.0; N_ORIENT];
            let mut e_off = [0.0; N_ORIENT];
            let mut mc = f64::NEG_INFINITY;
            for k in 0..N_ORIENT {
                e_on[k] = energy.on[k].data()[i];
                e_off[k] = energy.off[k].data()[i];
                mc = mc.max(energy.combined[k].data()[i]);
            }
            sites.push(Site {
                index: i,
                wa_on: a,
                wa_off: b,
                e_on,
                e_off,
                max_combined: mc,
                direction: energy.direction.data()[i],
            });
        }
        Self {
            frame_index,
            width: w,
            height: h,
            w_on: energy.w_on,
            w_off: energy.w_off,
            sites,
        }
    }

    fn site_xy(&self, s: &Site) -> (usize, usize) {
        (s.index % self.width, s.index / self.width)
    }

    /// Per-site activation, `V` or `V'` depending on `set`.
    pub fn site_values(&self, set: &InhibitionSet) -> Vec<f64> {
        self.sites
            .iter()
            .map(|s| {
                if set.is_empty() {
                    s.v(self.w_on, self.w_off)
                } else {
                    s.v_inhibited(self.w_on, self.w_off, set)
                }
            })
            .collect()
    }

    /// Dense activation field (`V` when `set` is empty, `V'` otherwise).
    pub fn dense(&self, set: &InhibitionSet) -> FrameBuffer {
        let mut out = FrameBuffer::zeros(self.width, self.height);
        for (s, v) in self.sites.iter().zip(self.site_values(set)) {
            out.data_mut()[s.index] = v;
        }
        out
    }

    /// Indices into `sites` whose normalised activation exceeds `gamma`,
    /// in row-major order.
    fn select(&self, values: &[f64], gamma: f64) -> Vec<usize> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        if self.sites.len() < self.width * self.height {
            lo = 0.0;
            hi = 0.0;
        }
        for &v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi <= lo {
            return Vec::new();
        }
        values
            .iter()
            .enumerate()
            .filter(|(_, &v)| normalize(v, lo, hi) > gamma)
            .map(|(i, _)| i)
            .collect()
    }

    fn cluster(&self, selected: &[usize], params: &DetectorParams) -> (Vec<Detection>, Vec<Vec<usize>>) {
        let pts: Vec<[f64; 2]> = selected
            .iter()
            .map(|&i| {
                let (x, y) = self.site_xy(&self.sites[i]);
                [x as f64, y as f64]
            })
            .collect();
        let clusters = dbscan(&pts, params.eps, params.n_min);
        let mut dets = Vec::with_capacity(clusters.len());
        let mut members = Vec::with_capacity(clusters.len());
        for c in clusters {
            let site_ids: Vec<usize> = c.iter().map(|&j| selected[j]).collect();
            let samples: Vec<MemberSample> = site_ids
                .iter()
                .map(|&i| {
                    let s = &self.sites[i];
                    let (x, y) = self.site_xy(s);
                    MemberSample {
                        x: x as f64,
                        y: y as f64,
                        max_energy: s.max_combined,
                        direction: s.direction,
                    }
                })
                .collect();
            dets.push(cluster_readout(&samples, self.frame_index));
            members.push(site_ids);
        }
        (dets, members)
    }
}

/// Detections of one frame at one threshold.
#[derive(Debug, Clone, Default)]
pub struct FrameDetections {
    /// Detections on `V`, before inhibition.
    pub candidates: Vec<Detection>,
    pub inhibited: InhibitionSet,
    /// Final detections (on `V'`).
    pub detections: Vec<Detection>,
    /// For each final detection, its member indices into `ActivationFrame::sites`.
    pub members: Vec<Vec<usize>>,
}

/// Threshold, cluster, derive the inhibited directions from the candidate
/// detections, then detect again on the inhibited activation. One pass, no
/// iteration.
pub fn detect(act: &ActivationFrame, ganglion: &GanglionParams, params: &DetectorParams) -> FrameDetections {
    let empty = InhibitionSet::empty();
    let v = act.site_values(&empty);
    let (candidates, cand_members) = act.cluster(&act.select(&v, params.gamma), params);
    let set = if ganglion.inhibition {
        inhibition_set(&candidates, ganglion.n_th)
    } else {
        empty
    };
    if set.is_empty() {
        return FrameDetections {
            detections: candidates.clone(),
            candidates,
            inhibited: set,
            members: cand_members,
        };
    }
    let v_inh = act.site_values(&set);
    let (detections, members) = act.cluster(&act.select(&v_inh, params.gamma), params);
    FrameDetections {
        candidates,
        inhibited: set,
        detections,
        members,
    }
}

/// Everything the network computed for one frame.
#[derive(Debug, Clone)]
pub struct FrameActivity {
    pub frame_index: usize,
    pub bipolar: BipolarResponses,
    pub energy: EnergyTensor,
    pub wa_on: FrameBuffer,
    pub wa_off: FrameBuffer,
    pub activation: ActivationFrame,
}

struct RunningState {
    photoreceptor: PhotoreceptorState,
    on: CascadeState,
    off: CascadeState,
}

/// One network instance; owns the cross-frame state of one sequence.
pub struct Brnn {
    config: RunConfig,
    bank: KernelBank,
    state: Option<RunningState>,
    frame_index: usize,
}

impl Brnn {
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let bank = KernelBank::new(&config.dog(), &config.spatial)?;
        Ok(Self {
            config: config.clone(),
            bank,
            state: None,
            frame_index: 0,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn kernels(&self) -> &KernelBank {
        &self.bank
    }

    /// Clears all cross-frame state.
    pub fn reset(&mut self) {
        self.state = None;
        self.frame_index = 0;
    }

    /// Feeds the next frame. The first frame only primes the photoreceptors
    /// and yields `None`.
    pub fn process(&mut self, frame: &FrameBuffer) -> Result<Option<FrameActivity>> {
        let index = self.frame_index;
        let Some(state) = self.state.as_mut() else {
            let size = self.bank.max_size();
            if size > frame.width() || size > frame.height() {
                return Err(Error::KernelTooLarge {
                    kernel: size,
                    width: frame.width(),
                    height: frame.height(),
                });
            }
            let (w, h) = (frame.width(), frame.height());
            self.state = Some(RunningState {
                photoreceptor: PhotoreceptorState::new(frame.clone(), self.config.photoreceptor())?,
                on: CascadeState::new(w, h, self.config.temporal)?,
                off: CascadeState::new(w, h, self.config.temporal)?,
            });
            self.frame_index += 1;
            return Ok(None);
        };
        let p = state.photoreceptor.update(frame)?;
        let (on, off) = onoff_split(&p);
        let on0 = bipolar_bandpass(&on, &self.bank.dog)?;
        let off0 = bipolar_bandpass(&off, &self.bank.dog)?;
        let bipolar = fast_slow_responses(&on0, &off0, &mut state.on, &mut state.off)?;

        let inputs = SacInputs::new(
            &bipolar.on_fast,
            &bipolar.on_slow,
            &bipolar.off_fast,
            &bipolar.off_slow,
            self.bank.even[0].radius(),
        );
        let mut e_on = Vec::with_capacity(N_ORIENT);
        let mut e_off = Vec::with_capacity(N_ORIENT);
        for k in 0..N_ORIENT {
            let slice = inputs.filter(&self.bank.even[k], &self.bank.odd[k]);
            e_on.push(pair_energy(&slice.on));
            e_off.push(pair_energy(&slice.off));
        }
        let g = &self.config.ganglion;
        let energy = EnergyTensor::new(e_on, e_off, g.w_on, g.w_off);
        let (wa_on, wa_off) = wac_mediate(&bipolar.on_slow, &bipolar.off_slow, &self.bank.center_surround)?;
        let activation = ActivationFrame::from_dense(index, &energy, &wa_on, &wa_off);
        self.frame_index += 1;
        Ok(Some(FrameActivity {
            frame_index: index,
            bipolar,
            energy,
            wa_on,
            wa_off,
            activation,
        }))
    }
}
