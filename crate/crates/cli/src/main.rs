//! Command-line front end: run the detector over frame folders, render
//! synthetic scenes, score detections, sweep tuning curves and thresholds,
//! and print the temporal filter oracle.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use brnn::detector::match_detections;
use brnn::harness::experiments::{
    roc_sweep, run_frames, tuning_sweep, TuningMetric, TuningStimulus, TuningVar,
};
use brnn::harness::io::{
    dump_kernels, parse_size, read_detections_csv, read_truth_csv, save_gray, truth_by_frame,
    write_detections_csv, write_detections_json, write_roc_csv, write_table, write_truth_csv,
    FrameSequence, Scaling,
};
use brnn::harness::metrics::{tpr_at_fpr, tpr_fpr, DetectionCounts};
use brnn::harness::default_gammas;
use brnn::synth::render_frame;
use brnn::temporal::{extrema_times, impulse_response_analytic, simulate_impulse, CascadeParams};
use brnn::{Brnn, Detection, RunConfig, Scene, SceneSpec, TruthTarget};

#[derive(Parser)]
#[command(name = "brnn", version, about = "Small moving target detection with a retina-inspired network")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Detect targets in a folder of grayscale frames.
    Run(RunArgs),
    /// Render a synthetic scene with ground truth.
    Synth(SynthArgs),
    /// Score a detections file against a truth file.
    Eval(EvalArgs),
    /// Sweep one stimulus property and record the mean response.
    Tune(TuneArgs),
    /// Print the closed-form and simulated temporal filter responses.
    Oracle(OracleArgs),
    /// Threshold sweep (TPR and false positives per frame) over a sequence.
    Roc(RocArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Synthetic scenes (default parameters).
    Synthetic,
    /// Real footage: eps 2, N_min 8, 80 degree field of view.
    Real,
}

#[derive(Args)]
struct ConfigArgs {
    /// Parameter file (`[section]` headers, `key = value`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Starting point when no file is given.
    #[arg(long, value_enum, default_value = "synthetic")]
    preset: Preset,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        match &self.config {
            Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display())),
            None => Ok(match self.preset {
                Preset::Synthetic => RunConfig::default(),
                Preset::Real => RunConfig::real_footage(),
            }),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    frames: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: PathBuf,
    /// Resize every frame to WxH by area averaging.
    #[arg(long)]
    resize: Option<String>,
    /// Write the inhibited activation of every frame as an 8-bit image.
    #[arg(long)]
    dump_activations: bool,
    /// Write every filter kernel as a CSV matrix.
    #[arg(long)]
    dump_kernels: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Scene description (JSON or TOML by extension). Without it the
    /// five-target cluttered scene is rendered.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Background speed of the default scene, degrees per second.
    #[arg(long, default_value_t = 75.0)]
    bg_speed: f64,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    detections: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Match radius in degrees as a function of target extent `d`.
    #[arg(long, default_value = "0.5d+1")]
    dth_rule: String,
    #[arg(long, default_value_t = 32.0)]
    fov_deg: f64,
    /// Frame width in pixels, for the degree to pixel conversion.
    #[arg(long, default_value_t = 128)]
    width: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum VarArg {
    Contrast,
    Size,
    Velocity,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    /// Whole-frame mean.
    Frame,
    /// Disc under the true target.
    Disc,
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long, value_enum)]
    var: VarArg,
    /// Comma-separated grid values.
    #[arg(long, value_delimiter = ',', required = true)]
    grid: Vec<f64>,
    #[command(flatten)]
    config: ConfigArgs,
    /// Override the centre-surround extent.
    #[arg(long)]
    wac_size: Option<usize>,
    /// Override the centre-surround sigma.
    #[arg(long)]
    wac_sigma: Option<f64>,
    #[arg(long, value_enum, default_value = "frame")]
    metric: MetricArg,
    /// Divide responses by their maximum.
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// Closed-form and simulated impulse responses.
    #[arg(long, conflicts_with = "extrema", required_unless_present = "extrema")]
    impulse: bool,
    /// Closed-form and simulated extremum times.
    #[arg(long)]
    extrema: bool,
    /// Tap depths.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 0.001)]
    dt: f64,
    /// Simulated duration, seconds.
    #[arg(long, default_value_t = 1.0)]
    duration: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RocArgs {
    #[arg(long)]
    frames: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Thresholds; defaults to 0.01..0.09 and 0.1..0.9.
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
    #[arg(long)]
    resize: Option<String>,
    /// Operating point reported on stdout, false positives per frame.
    #[arg(long, default_value_t = 5.0)]
    at_fpr: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Run(a) => run(a),
        Cmd::Synth(a) => synth(a),
        Cmd::Eval(a) => eval(a),
        Cmd::Tune(a) => tune(a),
        Cmd::Oracle(a) => oracle(a),
        Cmd::Roc(a) => roc(a),
    }
}

fn resize_arg(s: &Option<String>) -> Result<Option<(usize, usize)>> {
    Ok(s.as_deref().map(parse_size).transpose()?)
}

fn run(a: RunArgs) -> Result<()> {
    let config = a.config.load()?;
    let frames = FrameSequence::open(&a.frames, resize_arg(&a.resize)?)?;
    fs::create_dir_all(&a.out)?;
    if a.dump_kernels {
        dump_kernels(&a.out.join("kernels"), Brnn::new(&config)?.kernels())?;
    }
    let act_dir = a.out.join("activations");
    if a.dump_activations {
        fs::create_dir_all(&act_dir)?;
    }
    let mut dets: Vec<Detection> = Vec::new();
    let timings = run_frames(frames, &config, |act, d| {
        dets.extend_from_slice(&d.detections);
        if a.dump_activations {
            let v = act.activation.dense(&d.inhibited);
            save_gray(&v, &act_dir.join(format!("{:05}.pgm", act.frame_index)), Scaling::MinMax)?;
        }
        Ok(())
    })?;
    write_detections_csv(&a.out.join("detections.csv"), &dets)?;
    write_detections_json(&a.out.join("detections.json"), &dets)?;
    let rows: Vec<Vec<f64>> = timings.iter().enumerate().map(|(i, &t)| vec![i as f64, t]).collect();
    write_table(&a.out.join("timing.csv"), &config.hash(), &["frame", "seconds"], &rows)?;
    fs::write(a.out.join("config.toml"), config.to_toml_string())?;
    let mean = timings.iter().sum::<f64>() / timings.len().max(1) as f64;
    println!("{} frames, {} detections, {:.4} s/frame", timings.len(), dets.len(), mean);
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = match &a.spec {
        Some(p) => SceneSpec::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => SceneSpec::cluttered(a.seed, a.bg_speed),
    };
    let scene = Scene::new(spec.clone())?;
    let frame_dir = a.out.join("frames");
    fs::create_dir_all(&frame_dir)?;
    let mut truth = Vec::new();
    for t in 0..scene.n_frames() {
        let (frame, tt) = render_frame(&scene, t);
        save_gray(&frame, &frame_dir.join(format!("{t:05}.pgm")), Scaling::Clamp)?;
        truth.extend(tt);
    }
    write_truth_csv(&a.out.join("truth.csv"), &truth)?;
    spec.save_json(&a.out.join("scene.json"))?;
    println!("{} frames, {} truth rows", scene.n_frames(), truth.len());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let params = brnn::DetectorParams::default().with_dth_rule(&a.dth_rule)?;
    let px_per_deg = a.width as f64 / a.fov_deg;
    let dets = read_detections_csv(&a.detections)?;
    let truth = truth_by_frame(&read_truth_csv(&a.truth)?);
    let n_frames = truth.len().max(dets.iter().map(|d| d.frame_index + 1).max().unwrap_or(0));
    let mut counts = DetectionCounts::default();
    for f in 0..n_frames {
        let fd: Vec<Detection> = dets.iter().filter(|d| d.frame_index == f).copied().collect();
        let ft: &[TruthTarget] = truth.get(f).map(Vec::as_slice).unwrap_or(&[]);
        let m = match_detections(&fd, ft, |t| params.match_radius(t.size_px, px_per_deg));
        counts.add(&DetectionCounts {
            true_detections: m.true_positives,
            actual_targets: ft.len(),
            false_positives: m.false_positives,
            frames: 1,
        });
    }
    let p = tpr_fpr(params.gamma, &counts)?;
    println!(
        "frames {} targets {} true {} false {} tpr {:.4} fpr {:.4}",
        counts.frames, counts.actual_targets, counts.true_detections, counts.false_positives, p.tpr, p.fpr
    );
    Ok(())
}

fn tune(a: TuneArgs) -> Result<()> {
    let mut config = match a.config.config {
        Some(_) => a.config.load()?,
        None => RunConfig::tuning(),
    };
    if let Some(m) = a.wac_size {
        config.spatial.wac_size = m;
    }
    if let Some(s) = a.wac_sigma {
        config.spatial.wac_sigma = s;
    }
    config.validate()?;
    let var = match a.var {
        VarArg::Contrast => TuningVar::Contrast,
        VarArg::Size => TuningVar::Size,
        VarArg::Velocity => TuningVar::Velocity,
    };
    let base = TuningStimulus {
        metric: match a.metric {
            MetricArg::Frame => TuningMetric::FrameMean,
            MetricArg::Disc => TuningMetric::TargetDisc,
        },
        ..Default::default()
    };
    let mut curve = tuning_sweep(var, &a.grid, &config, &base)?;
    if a.normalize {
        let hi = curve.iter().map(|c| c.1).fold(0.0, f64::max);
        if hi > 0.0 {
            curve.iter_mut().for_each(|c| c.1 /= hi);
        }
    }
    let rows: Vec<Vec<f64>> = curve.iter().map(|&(g, r)| vec![g, r]).collect();
    match &a.out {
        Some(p) => write_table(p, &config.hash(), &["value", "response"], &rows)?,
        None => {
            println!("value,response");
            for (g, r) in curve {
                println!("{g},{r}");
            }
        }
    }
    Ok(())
}

fn oracle(a: OracleArgs) -> Result<()> {
    let params = CascadeParams {
        dt: a.dt,
        ..CascadeParams::characterization()
    };
    params.validate()?;
    let steps = (a.duration / a.dt).round() as usize;
    let (header, rows): (Vec<String>, Vec<Vec<f64>>) = if a.impulse {
        let sims = a
            .n
            .iter()
            .map(|&n| simulate_impulse(&params, n, steps))
            .collect::<brnn::Result<Vec<_>>>()?;
        let mut header = vec!["t".to_string()];
        for n in &a.n {
            header.push(format!("analytic_{n}"));
            header.push(format!("simulated_{n}"));
        }
        let rows = (0..steps)
            .map(|k| {
                let t = k as f64 * a.dt;
                let mut r = vec![t];
                for (n, sim) in a.n.iter().zip(&sims) {
                    r.push(impulse_response_analytic(&params, *n, t));
                    r.push(sim[k]);
                }
                r
            })
            .collect();
        (header, rows)
    } else {
        let (ar, br) = (params.decay_rate(), params.transmission_rate());
        let mut rows = Vec::new();
        for &n in &a.n {
            if n < 2 {
                bail!("extremum times need n >= 2");
            }
            let (t1, t2) = extrema_times(ar, br, n);
            let sim = simulate_impulse(&params, n, steps)?;
            let argmax = (0..steps).max_by(|&i, &j| sim[i].total_cmp(&sim[j])).unwrap_or(0);
            let argmin = (0..steps).min_by(|&i, &j| sim[i].total_cmp(&sim[j])).unwrap_or(0);
            rows.push(vec![n as f64, t1, t2, argmax as f64 * a.dt, argmin as f64 * a.dt]);
        }
        let header = ["n", "peak_analytic", "trough_analytic", "peak_simulated", "trough_simulated"];
        (header.iter().map(|s| s.to_string()).collect(), rows)
    };
    match &a.out {
        Some(p) => {
            let h: Vec<&str> = header.iter().map(String::as_str).collect();
            write_table(p, "oracle", &h, &rows)?;
        }
        None => {
            println!("{}", header.join(","));
            for r in rows {
                let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
                println!("{}", cells.join(","));
            }
        }
    }
    Ok(())
}

fn roc(a: RocArgs) -> Result<()> {
    let config = a.config.load()?;
    let gammas = a.gammas.clone().unwrap_or_else(default_gammas);
    if gammas.iter().any(|g| !(*g > 0.0 && *g <= 1.0)) {
        bail!("thresholds must lie in (0, 1]");
    }
    let frames = FrameSequence::open(&a.frames, resize_arg(&a.resize)?)?;
    let mut truth = truth_by_frame(&read_truth_csv(&a.truth)?);
    if let Some((w, _)) = resize_arg(&a.resize)? {
        // truth is given in source pixels; rescale with the frames
        let src_w = brnn::harness::io::load_frame(&brnn::harness::io::list_frames(&a.frames)?[0])?.width();
        let s = w as f64 / src_w as f64;
        for t in truth.iter_mut().flatten() {
            t.x *= s;
            t.y *= s;
            t.size_px *= s;
        }
    }
    let points = roc_sweep(frames, |f| truth.get(f).cloned().unwrap_or_default(), &config, &gammas)?;
    match &a.out {
        Some(p) => write_roc_csv(p, &config.hash(), &points)?,
        None => {
            println!("gamma,tpr,fpr");
            for p in &points {
                println!("{},{},{}", p.gamma, p.tpr, p.fpr);
            }
        }
    }
    println!("tpr at fpr {}: {:.4}", a.at_fpr, tpr_at_fpr(&points, a.at_fpr));
    Ok(())
}
