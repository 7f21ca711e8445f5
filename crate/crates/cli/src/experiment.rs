//! The experiments behind each subcommand. Trial `i` draws all of its
//! randomness from seeds derived from `trial_seed(master_seed, i)`.

use causal_core::electric::{spine_resistance_profile, spine_walk};
use causal_core::explore::{EventKind, ExplorationState};
use causal_core::metric::hyperbolicity_probe;
use causal_core::rng::{mix64, rng_from_seed, trial_seed};
use causal_core::stats::{ks_two_sample, mean, slope, wilson_interval};
use causal_core::walk::{
    boundary_marker, default_buffer, is_kbad, regeneration_increments, regeneration_times, run_walk,
    slice_escape_prob, speed_estimate, WalkTrace,
};
use causal_core::{build_causal, LazyMap, OffspringDistribution, PlaneTree};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{CliError, Result};

/// One named summary statistic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metric {
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub experiment: Experiment,
    pub trials: u64,
    pub metrics: Vec<Metric>,
}

impl Summary {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.metric == name).map(|m| m.value)
    }
}

/// Per-trial records plus the summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub records: Vec<Value>,
    pub summary: Summary,
}

struct Metrics(Vec<Metric>);

impl Metrics {
    fn push(&mut self, name: &str, value: f64) -> &mut Self {
        self.0.push(Metric { metric: name.to_string(), value });
        self
    }
}

/// Run trials `0..n` in parallel, keeping them in index order.
fn par_trials<T: Send>(n: u64, f: impl Fn(u64, u64) -> Result<T> + Sync + Send, master: u64) -> Result<Vec<T>> {
    (0..n).into_par_iter().map(|i| f(i, trial_seed(master, i))).collect()
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let d = cfg.law()?;
    let mut m = Metrics(Vec::new());
    let records = match cfg.experiment {
        Experiment::Speed => speed(cfg, &d, &mut m)?,
        Experiment::Regen => regen(cfg, &d, &mut m)?,
        Experiment::Hyperbolicity => hyperbolicity(cfg, &d, &mut m)?,
        Experiment::Resistance => resistance(cfg, &d, &mut m)?,
        Experiment::Explore => explore(cfg, &d, &mut m)?,
        Experiment::Kbad => kbad(cfg, &d, &mut m)?,
        Experiment::Boundary => boundary(cfg, &d, &mut m)?,
        Experiment::Escape => escape(cfg, &d, &mut m)?,
    };
    let summary = Summary { experiment: cfg.experiment, trials: cfg.trials, metrics: m.0 };
    Ok(Outcome { records, summary })
}

fn half_plane_walk(cfg: &ExperimentConfig, d: &OffspringDistribution, seed: u64) -> Result<WalkTrace> {
    let mut h = LazyMap::half_plane(d, mix64(seed, 0))?;
    let r = h.root();
    Ok(run_walk(&mut h, r, cfg.n_steps, cfg.lambda, mix64(seed, 1))?)
}

fn speed(cfg: &ExperimentConfig, d: &OffspringDistribution, m: &mut Metrics) -> Result<Vec<Value>> {
    let traces = par_trials(cfg.trials, |_, s| half_plane_walk(cfg, d, s), cfg.master_seed)?;
    let records = traces
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let regen = regeneration_times(&t.heights, default_buffer(t.len()));
            json!({
                "trial": i,
                "seed": t.seed,
                "steps": t.steps(),
                "final_height": t.final_height(),
                "speed": t.final_height() as f64 / t.steps() as f64,
                "regenerations": regen.times.len(),
            })
        })
        .collect();
    let s = speed_estimate(&traces)?;
    m.push("v_hat", s.v_hat).push("ci95_low", s.ci95.0).push("ci95_high", s.ci95.1);
    if let Some(r) = s.ratio {
        m.push("regeneration_ratio", r);
    }
    m.push("increments", s.increments as f64).push("disagree", f64::from(u8::from(s.disagree)));
    Ok(records)
}

fn regen(cfg: &ExperimentConfig, d: &OffspringDistribution, m: &mut Metrics) -> Result<Vec<Value>> {
    let incs = par_trials(
        cfg.trials,
        |_, s| {
            let t = half_plane_walk(cfg, d, s)?;
            let rep = regeneration_times(&t.heights, default_buffer(t.len()));
            Ok(regeneration_increments(&t.heights, &rep))
        },
        cfg.master_seed,
    )?;
    let mut records = Vec::with_capacity(incs.len());
    let (mut first, mut second) = (Vec::new(), Vec::new());
    for (i, inc) in incs.iter().enumerate() {
        let dt: Vec<f64> = inc.iter().map(|x| x.0 as f64).collect();
        let dh: Vec<f64> = inc.iter().map(|x| x.1 as f64).collect();
        records.push(json!({
            "trial": i,
            "increments": inc.len(),
            "mean_dtau": (!dt.is_empty()).then(|| mean(&dt)),
            "mean_dh": (!dh.is_empty()).then(|| mean(&dh)),
        }));
        let half = inc.len() / 2;
        first.extend_from_slice(&inc[..half]);
        second.extend_from_slice(&inc[half..]);
    }
    let all: Vec<(usize, i32)> = incs.concat();
    m.push("increments", all.len() as f64);
    let (dt, dh): (Vec<f64>, Vec<f64>) = all.iter().map(|x| (x.0 as f64, x.1 as f64)).unzip();
    if !all.is_empty() {
        m.push("mean_dtau", mean(&dt)).push("mean_dh", mean(&dh));
        m.push("regeneration_ratio", dh.iter().sum::<f64>() / dt.iter().sum::<f64>());
    }
    if !first.is_empty() && !second.is_empty() {
        let col = |v: &[(usize, i32)], tau: bool| -> Vec<f64> {
            v.iter().map(|x| if tau { x.0 as f64 } else { x.1 as f64 }).collect()
        };
        m.push("ks_p_dtau", ks_two_sample(&col(&first, true), &col(&second, true)).1);
        m.push("ks_p_dh", ks_two_sample(&col(&first, false), &col(&second, false)).1);
    }
    Ok(records)
}

fn hyperbolicity(cfg: &ExperimentConfig, d: &OffspringDistribution, m: &mut Metrics) -> Result<Vec<Value>> {
    let rows = par_trials(
        cfg.trials,
        |i, s| {
            let mut rng = rng_from_seed(s);
            let t = PlaneTree::sample_gw_survived(d, cfg.depth_cap, &mut rng)?;
            let map = build_causal(&t);
            let p = hyperbolicity_probe(&map, cfg.n_steps, &mut rng);
            Ok((p.max(), json!({
                "trial": i,
                "vertices": map.n_vertices(),
                "attempts": p.attempts,
                "surrounding": p.distances.len(),
                "max_distance": p.max(),
            })))
        },
        cfg.master_seed,
    )?;
    let maxima: Vec<f64> = rows.iter().filter_map(|r| r.0).map(f64::from).collect();
    m.push("samples_with_triangle", maxima.len() as f64);
    if !maxima.is_empty() {
        m.push("mean_max_distance", mean(&maxima));
        m.push("max_distance", maxima.iter().copied().fold(0.0, f64::max));
    }
    Ok(rows.into_iter().map(|r| r.1).collect())
}

fn resistance(cfg: &ExperimentConfig, d: &OffspringDistribution, m: &mut Metrics) -> Result<Vec<Value>> {
    let n = cfg.depth_cap;
    let rows = par_trials(
        cfg.trials,
        |i, s| {
            let mut t = PlaneTree::lazy_survived(d, mix64(s, 0))?;
            let dec = spine_walk(&mut t, 4 * n, 0, &mut rng_from_seed(mix64(s, 1)))?;
            let mut slice = LazyMap::slice(t);
            let prof = spine_resistance_profile(&mut slice, &dec.spine, n, 2 * n, 3 * n / 2)?;
            let xs: Vec<f64> = (0..prof.len()).map(|k| k as f64).collect();
            let b = slope(&xs, &prof);
            let monotone = prof.windows(2).all(|w| w[1] >= w[0] - 1e-9);
            Ok((b, monotone, json!({ "trial": i, "slope": b, "monotone": monotone, "profile": prof })))
        },
        cfg.master_seed,
    )?;
    let slopes: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let monotone = rows.iter().filter(|r| r.1).count();
    m.push("mean_slope", mean(&slopes))
        .push("min_slope", slopes.iter().copied().fold(f64::INFINITY, f64::min))
        .push("monotone_fraction", monotone as f64 / rows.len() as f64);
    Ok(rows.into_iter().map(|r| r.2).collect())
}

fn explore(cfg: &ExperimentConfig, d: &OffspringDistribution, m: &mut Metrics) -> Result<Vec<Value>> {
    let k = cfg.k;
    let rows = par_trials(
        cfg.trials,
        |i, s| {
            let map = LazyMap::half_plane(d, mix64(s, 0))?;
            let mut st = ExplorationState::new(map, k, mix64(s, 1))?;
            let (mut witnesses, mut missing, mut unstable) = (0usize, 0usize, 0usize);
            while st.walk_steps_done() < cfg.n_steps {
                let ev = st.advance()?;
                unstable += usize::from(!st.is_stable());
                if ev.kind == EventKind::Explore {
                    let step = *st.exploration_steps().last().expect("explore event has a step");
                    if st.map().tree().height(step.vertex) >= 0 {
                        match st.kfree_witness(ev.clock) {
                            Ok(_) => witnesses += 1,
                            Err(_) => missing += 1,
                        }
                    }
                }
            }
            let mut ratio: f64 = 0.0;
            for n in 0..cfg.n_steps {
                let gap = st.phi(n + 1)? - st.phi(n)?;
                ratio = ratio.max(gap as f64 / (k * (n + 1)) as f64);
            }
            let rec = json!({
                "trial": i,
                "clock": st.clock(),
                "explored": st.explored().len(),
                "witnesses": witnesses,
                "missing_witnesses": missing,
                "unstable_events": unstable,
                "max_phi_ratio": ratio,
            });
            Ok(([witnesses, missing, unstable], ratio, rec))
        },
        cfg.master_seed,
    )?;
    let sum = |j: usize| rows.iter().map(|r| r.0[j]).sum::<usize>() as f64;
    m.push("witnesses", sum(0)).push("missing_witnesses", sum(1)).push("unstable_events", sum(2));
    m.push("max_phi_ratio", rows.iter().map(|r| r.1).fold(0.0, f64::max));
    Ok(rows.into_iter().map(|r| r.2).collect())
}

fn kbad(cfg: &ExperimentConfig, d: &OffspringDistribution, m: &mut Metrics) -> Result<Vec<Value>> {
    let bad = par_trials(
        cfg.trials,
        |_, s| {
            let mut t = PlaneTree::lazy_row(d, s)?;
            let r = t.root();
            Ok(is_kbad(&mut t, cfg.k, r)?)
        },
        cfg.master_seed,
    )?;
    let hits = bad.iter().filter(|&&b| b).count() as u64;
    let (lo, hi) = wilson_interval(hits, cfg.trials, 0.95);
    let exponent = ((cfg.k + 1) * (2 * cfg.k + 1)) as i32;
    m.push("frequency", hits as f64 / cfg.trials as f64)
        .push("ci95_low", lo)
        .push("ci95_high", hi)
        .push("target", d.weight(1).powi(exponent));
    Ok(bad.iter().enumerate().map(|(i, b)| json!({ "trial": i, "bad": b })).collect())
}

fn boundary(cfg: &ExperimentConfig, d: &OffspringDistribution, m: &mut Metrics) -> Result<Vec<Value>> {
    let h = cfg.depth_cap as i32;
    let rows = par_trials(
        cfg.trials,
        |i, s| {
            let mut map = LazyMap::half_plane(d, mix64(s, 0))?;
            let r = map.root();
            let a = run_walk(&mut map, r, cfg.n_steps, cfg.lambda, mix64(s, 1))?;
            let b = run_walk(&mut map, r, cfg.n_steps, cfg.lambda, mix64(s, 2))?;
            let key = |t: &WalkTrace| boundary_marker(&map, t, h).ok().map(|v| map.tree().key(v));
            let (x, y) = (key(&a), key(&b));
            let differ = matches!((x, y), (Some(x), Some(y)) if x != y);
            let decided = x.is_some() && y.is_some();
            Ok((differ, decided, json!({ "trial": i, "marker_a": x, "marker_b": y, "differ": differ })))
        },
        cfg.master_seed,
    )?;
    let differ = rows.iter().filter(|r| r.0).count() as u64;
    let (lo, hi) = wilson_interval(differ, cfg.trials, 0.95);
    m.push("differ_frequency", differ as f64 / cfg.trials as f64)
        .push("ci95_low", lo)
        .push("ci95_high", hi)
        .push("undecided", rows.iter().filter(|r| !r.1).count() as f64);
    Ok(rows.into_iter().map(|r| r.2).collect())
}

/// Walks from the first spine vertex at index `k` or later that is off the
/// boundary, in one slice drawn from the master seed.
fn escape(cfg: &ExperimentConfig, d: &OffspringDistribution, m: &mut Metrics) -> Result<Vec<Value>> {
    let master = cfg.master_seed;
    let mut t = PlaneTree::lazy_survived(d, mix64(master, u64::MAX))?;
    let dec = spine_walk(&mut t, cfg.k + 30, 0, &mut rng_from_seed(mix64(master, u64::MAX - 1)))?;
    let mut slice = LazyMap::slice(t);
    let mut start = None;
    for (n, &x) in dec.spine.iter().enumerate().skip(cfg.k) {
        if !slice.on_boundary(x)? {
            start = Some((n, x));
            break;
        }
    }
    let (n, x) = start.ok_or_else(|| CliError::ConfigInvalid("no spine vertex off the boundary".into()))?;
    let escaped: Vec<bool> = (0..cfg.trials)
        .into_par_iter()
        .map_init(
            || slice.clone(),
            |s, i| Ok(slice_escape_prob(s, x, cfg.depth_cap, 1, trial_seed(master, i))?.successes == 1),
        )
        .collect::<Result<_>>()?;
    let hits = escaped.iter().filter(|&&e| e).count() as u64;
    let (lo, hi) = wilson_interval(hits, cfg.trials, 0.95);
    m.push("spine_index", n as f64)
        .push("p", hits as f64 / cfg.trials as f64)
        .push("ci95_low", lo)
        .push("ci95_high", hi);
    Ok(escaped.iter().enumerate().map(|(i, e)| json!({ "trial": i, "escaped": e })).collect())
}
