//! Shared checks for the integration and acceptance targets: algebraic
//! properties run through proptest, and brute-force clustering references.

#![allow(dead_code)]

use proptest::collection::vec;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use brnn::frontend::{onoff_split, PhotoreceptorParams, PhotoreceptorState};
use brnn::ganglion::{apply_inhibition, direction_map, ganglion_response, motion_energy, pair_energy, EnergyTensor, InhibitionSet};
use brnn::spatial::{sac_filter, KernelBank, N_ORIENT};
use brnn::{Brnn, FrameBuffer, RunConfig};

const W: usize = 9;
const H: usize = 7;

fn field(lo: f64, hi: f64) -> impl Strategy<Value = FrameBuffer> {
    vec(lo..hi, W * H).prop_map(|d| FrameBuffer::from_vec(W, H, d).unwrap())
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    )
}

fn finish(r: Result<(), proptest::test_runner::TestError<impl std::fmt::Debug>>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

/// `B+ - B- = P`, `B+ + B- = |P|`, both channels nonnegative.
pub fn onoff_identities(cases: u32) -> Result<(), String> {
    finish(runner(cases).run(&field(-300.0, 300.0), |p| {
        let (on, off) = onoff_split(&p);
        for i in 0..p.len() {
            let (a, b, v) = (on.data()[i], off.data()[i], p.data()[i]);
            prop_assert!(a >= 0.0 && b >= 0.0);
            prop_assert_eq!(a - b, v);
            prop_assert_eq!(a + b, v.abs());
        }
        Ok(())
    }))
}

fn photoreceptor_run(frames: &[FrameBuffer]) -> Vec<FrameBuffer> {
    let mut st = PhotoreceptorState::new(frames[0].clone(), PhotoreceptorParams::default()).unwrap();
    frames[1..].iter().map(|f| st.update(f).unwrap()).collect()
}

/// A constant sequence yields exactly zero output.
pub fn photoreceptor_nullity(cases: u32) -> Result<(), String> {
    finish(runner(cases).run(&(0.0..255.0f64, 2usize..12), |(c, n)| {
        let frames = vec![FrameBuffer::filled(W, H, c); n];
        for p in photoreceptor_run(&frames) {
            prop_assert!(p.data().iter().all(|&v| v == 0.0));
        }
        Ok(())
    }))
}

/// The photoreceptor stage is linear in the input sequence.
pub fn photoreceptor_linearity(cases: u32) -> Result<(), String> {
    let seq = || vec(field(0.0, 255.0), 8);
    finish(runner(cases).run(&(seq(), seq(), -3.0..3.0f64, -3.0..3.0f64), |(x, y, a, b)| {
        let mix: Vec<FrameBuffer> = x.iter().zip(&y).map(|(u, v)| u.zip_map(v, |p, q| a * p + b * q)).collect();
        let (px, py, pm) = (photoreceptor_run(&x), photoreceptor_run(&y), photoreceptor_run(&mix));
        for t in 0..pm.len() {
            for i in 0..W * H {
                let want = a * px[t].data()[i] + b * py[t].data()[i];
                prop_assert!((pm[t].data()[i] - want).abs() <= 1e-9 * (1.0 + want.abs()));
            }
        }
        Ok(())
    }))
}

/// Swapping the fast and slow operands negates the motion energy exactly.
pub fn energy_antisymmetry(cases: u32) -> Result<(), String> {
    let f = || field(-50.0, 50.0);
    finish(runner(cases).run(&(f(), f(), f(), f()), |(a_s, b_s, a_f, b_f)| {
        let e = motion_energy(&a_s, &b_s, &a_f, &b_f);
        let swapped = motion_energy(&a_f, &b_f, &a_s, &b_s);
        for (x, y) in e.data().iter().zip(swapped.data()) {
            prop_assert_eq!(*x, -*y);
        }
        Ok(())
    }))
}

/// A frozen frame repeated drives every energy and activation to zero.
pub fn static_scene_nullity(cases: u32) -> Result<(), String> {
    let frame = vec(0.0..255.0f64, 24 * 24).prop_map(|d| FrameBuffer::from_vec(24, 24, d).unwrap());
    finish(runner(cases).run(&frame, |f| {
        let mut net = Brnn::new(&RunConfig::default()).unwrap();
        for _ in 0..6 {
            if let Some(a) = net.process(&f).unwrap() {
                for e in a.energy.on.iter().chain(&a.energy.off) {
                    prop_assert!(e.data().iter().all(|&v| v == 0.0));
                }
                prop_assert!(a.activation.sites.is_empty());
            }
        }
        Ok(())
    }))
}

fn tensor() -> impl Strategy<Value = (EnergyTensor, FrameBuffer, FrameBuffer)> {
    let bank = || vec(field(-20.0, 20.0), N_ORIENT);
    (bank(), bank(), field(0.0, 5.0), field(0.0, 5.0), 0.0..1.0f64, 0.0..1.0f64)
        .prop_map(|(on, off, wa, wb, w1, w2)| (EnergyTensor::new(on, off, w1, w2), wa, wb))
}

/// With nothing inhibited the primed activation equals the plain one bitwise.
pub fn empty_inhibition_identity(cases: u32) -> Result<(), String> {
    finish(runner(cases).run(&tensor(), |(bank, wa, wb)| {
        let g = ganglion_response(&bank, &wa, &wb);
        let inh = apply_inhibition(&g, &bank, &wa, &wb, &InhibitionSet::empty());
        prop_assert_eq!(&inh.v_inh, &g.v);
        prop_assert_eq!(&inh.v_on_inh, &g.v_on);
        prop_assert_eq!(&inh.v_off_inh, &g.v_off);
        prop_assert!(g.v.data().iter().all(|&v| v >= 0.0));
        Ok(())
    }))
}

fn bipolar_energy(bank: &KernelBank, inputs: &[FrameBuffer; 4]) -> Vec<FrameBuffer> {
    (0..N_ORIENT)
        .map(|k| {
            let s = sac_filter(&inputs[0], &inputs[1], &inputs[2], &inputs[3], &bank.even[k], &bank.odd[k]).unwrap();
            pair_energy(&s.on).zip_map(&pair_energy(&s.off), |a, b| 0.5 * a + 0.5 * b)
        })
        .collect()
}

/// Scaling every bipolar input by `alpha > 0` scales energies by `alpha^2`
/// and leaves the direction map and the orientation argmax unchanged.
pub fn direction_scale_invariance(cases: u32) -> Result<(), String> {
    let cfg = RunConfig::default();
    let bank = KernelBank::new(&cfg.dog(), &cfg.spatial).unwrap();
    let f = || field(0.0, 10.0);
    finish(runner(cases).run(&(f(), f(), f(), f(), 0.1..10.0f64), |(a, b, c, d, alpha)| {
        let base = [a, b, c, d];
        let scaled = base.clone().map(|x| x.scale(alpha));
        let e1 = bipolar_energy(&bank, &base);
        let e2 = bipolar_energy(&bank, &scaled);
        let peak = e1.iter().flat_map(|e| e.data()).fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in e1.iter().zip(&e2) {
            for (p, q) in x.data().iter().zip(y.data()) {
                prop_assert!((q - alpha * alpha * p).abs() <= 1e-9 * alpha * alpha * (1.0 + peak));
            }
        }
        let (d1, d2) = (direction_map(&e1[0], &e1[2]), direction_map(&e2[0], &e2[2]));
        for i in 0..W * H {
            let mag = e1[0].data()[i].hypot(e1[2].data()[i]);
            if mag > 1e-6 * (1.0 + peak) {
                let diff = (d1.data()[i] - d2.data()[i]).abs();
                prop_assert!(diff < 1e-9 || (diff - std::f64::consts::TAU).abs() < 1e-9);
            }
            let argmax = |e: &[FrameBuffer]| (0..N_ORIENT).max_by(|&j, &k| e[j].data()[i].total_cmp(&e[k].data()[i])).unwrap();
            let mut sorted: Vec<f64> = e1.iter().map(|e| e.data()[i]).collect();
            sorted.sort_by(|x, y| y.total_cmp(x));
            if sorted[0] - sorted[1] > 1e-6 * (1.0 + peak) {
                prop_assert_eq!(argmax(&e1), argmax(&e2));
            }
        }
        Ok(())
    }))
}

/// All algebraic properties, by name.
pub fn all_properties(cases: u32) -> Vec<(&'static str, Result<(), String>)> {
    vec![
        ("on/off identities", onoff_identities(cases)),
        ("photoreceptor nullity", photoreceptor_nullity(cases)),
        ("photoreceptor linearity", photoreceptor_linearity(cases)),
        ("energy antisymmetry", energy_antisymmetry(cases)),
        ("static-scene nullity", static_scene_nullity(cases.min(16))),
        ("empty inhibition identity", empty_inhibition_identity(cases)),
        ("direction scale invariance", direction_scale_invariance(cases)),
    ]
}

/// Random point set of at most 200 points on a small canvas so that
/// clusters, chains and noise all occur.
pub fn random_points(rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let n = rng.gen_range(0..=200);
    let side = rng.gen_range(10.0..60.0);
    let grid = rng.gen_bool(0.5);
    (0..n)
        .map(|_| {
            let (x, y): (f64, f64) = (rng.gen_range(0.0..side), rng.gen_range(0.0..side));
            if grid {
                [x.round(), y.round()]
            } else {
                [x, y]
            }
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn close(p: &[f64; 2], q: &[f64; 2], eps: f64) -> bool {
    (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) <= eps * eps
}

/// Connected components of the eps-graph by union-find, as sorted member
/// lists ordered by smallest member.
pub fn eps_components(points: &[[f64; 2]], eps: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if close(&points[i], &points[j], eps) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|g| g[0]);
    out
}

/// Textbook DBSCAN with quadratic neighbour queries and a FIFO frontier.
/// Points are visited in index order; a border point belongs to the first
/// cluster that reaches it.
pub fn reference_dbscan(points: &[[f64; 2]], eps: f64, n_min: usize) -> Vec<Vec<usize>> {
    let n = points.len();
    let region = |i: usize| -> Vec<usize> { (0..n).filter(|&j| close(&points[i], &points[j], eps)).collect() };
    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut visited = vec![false; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if visited[i] {
            continue;
        }
        let seeds = region(i);
        if seeds.len() < n_min {
            continue;
        }
        visited[i] = true;
        let id = clusters.len();
        clusters.push(vec![i]);
        label[i] = Some(id);
        let mut queue: std::collections::VecDeque<usize> = seeds.into_iter().filter(|&j| j != i).collect();
        while let Some(j) = queue.pop_front() {
            if label[j].is_none() {
                label[j] = Some(id);
                clusters[id].push(j);
            }
            if visited[j] || label[j] != Some(id) {
                continue;
            }
            visited[j] = true;
            let r = region(j);
            if r.len() >= n_min {
                queue.extend(r);
            }
        }
    }
    for c in &mut clusters {
        c.sort_unstable();
    }
    clusters
}

/// Runs both clustering oracles on `sets` seeded point sets and returns the
/// first mismatch, if any.
pub fn dbscan_oracle(sets: u64) -> Result<(), String> {
    for seed in 0..sets {
        let mut r = rng(seed);
        let pts = random_points(&mut r);
        let eps = r.gen_range(0.5..4.0);
        let mut got = brnn::detector::dbscan(&pts, eps, 1);
        got.sort_by_key(|g| g[0]);
        if got != eps_components(&pts, eps) {
            return Err(format!("seed {seed}: n_min=1 differs from eps-graph components"));
        }
        let n_min = r.gen_range(2..=8);
        if brnn::detector::dbscan(&pts, eps, n_min) != reference_dbscan(&pts, eps, n_min) {
            return Err(format!("seed {seed}: n_min={n_min} differs from the reference"));
        }
    }
    Ok(())
}
