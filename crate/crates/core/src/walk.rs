//! Simple and biased random walks on causal maps and the statistics built
//! on their height process.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cmap::{Incidence, LazyMap, MapKind, WalkGraph};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, trial_rng};
use crate::stats::{mean_ci, wilson_interval};
use crate::tree::{PlaneTree, VertexId};

/// Steps after which a slice escape attempt counts as a failure.
pub const ESCAPE_STEP_CAP: usize = 1_000_000;

/// Fraction of a trace left unchecked at its end when looking for
/// regeneration times.
pub const DEFAULT_BUFFER_FRACTION: f64 = 0.1;

/// Relative gap between the two speed estimators that gets flagged.
pub const SPEED_DISAGREEMENT: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkTrace {
    pub positions: Vec<VertexId>,
    pub heights: Vec<i32>,
    pub lambda: f64,
    pub seed: u64,
}

impl WalkTrace {
    /// Number of positions, one more than the number of steps.
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.positions.len().saturating_sub(1)
    }

    pub fn final_height(&self) -> i32 {
        *self.heights.last().unwrap()
    }

    /// One line per step: `n vertex_id H_n`.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(16 * self.len());
        for (n, (v, h)) in self.positions.iter().zip(&self.heights).enumerate() {
            s.push_str(&format!("{n} {v} {h}\n"));
        }
        s
    }

    pub fn from_text(text: &str, lambda: f64, seed: u64) -> Result<Self> {
        let mut t = WalkTrace { positions: vec![], heights: vec![], lambda, seed };
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = || crate::error::parse_err(i + 1, "expected `n vertex height`");
            if f.len() != 3 || f[0].parse::<usize>().ok() != Some(t.positions.len()) {
                return Err(bad());
            }
            t.positions.push(f[1].parse().map_err(|_| bad())?);
            t.heights.push(f[2].parse().map_err(|_| bad())?);
        }
        Ok(t)
    }
}

fn pick<R: Rng + ?Sized>(inc: &[Incidence], lambda: f64, rng: &mut R) -> VertexId {
    let weight = |i: &Incidence| if i.up { 1.0 } else { lambda };
    let total: f64 = inc.iter().map(weight).sum();
    let mut u = rng.random::<f64>() * total;
    for i in inc {
        u -= weight(i);
        if u < 0.0 {
            return i.to;
        }
    }
    inc.last().unwrap().to
}

pub(crate) fn step_with<G: WalkGraph + ?Sized, R: Rng + ?Sized>(
    g: &mut G,
    v: VertexId,
    lambda: f64,
    rng: &mut R,
    buf: &mut Vec<Incidence>,
) -> Result<VertexId> {
    g.incidences(v, buf)?;
    if buf.is_empty() {
        return Err(Error::IsolatedVertex(v));
    }
    Ok(pick(buf, lambda, rng))
}

/// One step of the walk: child edges have weight 1, every other edge-end
/// weight `lambda`, counted with multiplicity.
pub fn step<G: WalkGraph + ?Sized, R: Rng + ?Sized>(g: &mut G, v: VertexId, lambda: f64, rng: &mut R) -> Result<VertexId> {
    check_lambda(lambda)?;
    step_with(g, v, lambda, rng, &mut Vec::new())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("lambda must be positive, got {lambda}")))
    }
}

/// Walk of `n_steps` steps from `start`, driven by the stream of `seed`.
pub fn run_walk<G: WalkGraph + ?Sized>(g: &mut G, start: VertexId, n_steps: usize, lambda: f64, seed: u64) -> Result<WalkTrace> {
    let mut rng = rng_from_seed(seed);
    run_walk_with(g, start, n_steps, lambda, &mut rng, seed)
}

/// As [`run_walk`] with a caller-provided stream; `seed` is only recorded.
pub fn run_walk_with<G: WalkGraph + ?Sized, R: Rng + ?Sized>(
    g: &mut G,
    start: VertexId,
    n_steps: usize,
    lambda: f64,
    rng: &mut R,
    seed: u64,
) -> Result<WalkTrace> {
    check_lambda(lambda)?;
    let mut positions = Vec::with_capacity(n_steps + 1);
    let mut heights = Vec::with_capacity(n_steps + 1);
    let mut buf = Vec::new();
    let mut v = start;
    g.incidences(v, &mut buf)?;
    positions.push(v);
    heights.push(g.height_of(v));
    for _ in 0..n_steps {
        v = step_with(g, v, lambda, rng, &mut buf)?;
        let h = g.height_of(v);
        debug_assert!((h - heights.last().unwrap()).abs() <= 1);
        positions.push(v);
        heights.push(h);
    }
    Ok(WalkTrace { positions, heights, lambda, seed })
}

/// Greatest descent `max_{k < l} H_k - H_l`, zero for monotone traces.
pub fn descent_max(heights: &[i32]) -> i32 {
    let mut top = i32::MIN;
    let mut best = 0;
    for &h in heights {
        top = top.max(h);
        best = best.max(top - h);
    }
    best
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegenReport {
    pub times: Vec<usize>,
    /// Last index up to which the future of each time was checked.
    pub censored_after: usize,
}

/// Times `n >= 1` with `H_i < H_n` before `n` and `H_i >= H_n` from `n` up
/// to the end of the trace, excluding the last `buffer` indices.
pub fn regeneration_times(heights: &[i32], buffer: usize) -> RegenReport {
    let len = heights.len();
    if len == 0 {
        return RegenReport { times: vec![], censored_after: 0 };
    }
    let mut future_min = vec![i32::MAX; len + 1];
    for i in (0..len).rev() {
        future_min[i] = future_min[i + 1].min(heights[i]);
    }
    let last = (len - 1).saturating_sub(buffer);
    let mut times = Vec::new();
    let mut past_max = heights[0];
    for n in 1..=last {
        if past_max < heights[n] && future_min[n] >= heights[n] {
            times.push(n);
        }
        past_max = past_max.max(heights[n]);
    }
    RegenReport { times, censored_after: len - 1 }
}

pub fn default_buffer(len: usize) -> usize {
    (len as f64 * DEFAULT_BUFFER_FRACTION) as usize
}

/// Increments `(tau^{j+1} - tau^j, H_{tau^{j+1}} - H_{tau^j})` for `j >= 1`.
pub fn regeneration_increments(heights: &[i32], report: &RegenReport) -> Vec<(usize, i32)> {
    report.times.windows(2).map(|w| (w[1] - w[0], heights[w[1]] - heights[w[0]])).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedEstimate {
    /// Pooled mean of `H_n / n`.
    pub v_hat: f64,
    pub ci95: (f64, f64),
    /// Sum of height increments over sum of time increments between
    /// regeneration times, if any were found.
    pub ratio: Option<f64>,
    pub increments: usize,
    pub disagree: bool,
}

impl SpeedEstimate {
    pub fn ratio(&self) -> Result<f64> {
        self.ratio.ok_or(Error::NoRegenerations)
    }
}

pub fn speed_estimate(traces: &[WalkTrace]) -> Result<SpeedEstimate> {
    let first = traces.first().ok_or_else(|| Error::Invalid("no traces".into()))?;
    let len = first.len();
    if len < 2 || traces.iter().any(|t| t.len() != len) {
        return Err(Error::Invalid("traces must share a length of at least two".into()));
    }
    let n = (len - 1) as f64;
    let terminal: Vec<f64> = traces.iter().map(|t| (t.final_height() - t.heights[0]) as f64 / n).collect();
    let ci95 = mean_ci(&terminal, 0.95);
    let v_hat = (ci95.0 + ci95.1) / 2.0;
    let (mut dt, mut dh, mut increments) = (0usize, 0i64, 0usize);
    for t in traces {
        let report = regeneration_times(&t.heights, default_buffer(len));
        for (a, b) in regeneration_increments(&t.heights, &report) {
            dt += a;
            dh += b as i64;
            increments += 1;
        }
    }
    let ratio = (dt > 0).then(|| dh as f64 / dt as f64);
    let disagree = ratio.is_some_and(|r| (r - v_hat).abs() > SPEED_DISAGREEMENT * v_hat.abs().max(r.abs()));
    Ok(SpeedEstimate { v_hat, ci95, ratio, increments, disagree })
}

/// Whether `v` is `k`-bad: it and its `k` neighbours on each side, and all
/// their descendants over the next `k` generations, have exactly one child.
pub fn is_kbad(t: &mut PlaneTree, k: usize, v: VertexId) -> Result<bool> {
    let mut base = vec![v];
    let (mut l, mut r) = (v, v);
    for _ in 0..k {
        l = t.left_of(l)?.ok_or(Error::InsufficientMaterialization(v))?;
        r = t.right_of(r)?.ok_or(Error::InsufficientMaterialization(v))?;
        base.push(l);
        base.push(r);
    }
    for x in base {
        let mut u = x;
        for _ in 0..=k {
            let c = t.expand(u)?;
            if c.len() != 1 {
                return Ok(false);
            }
            u = c.start;
        }
    }
    Ok(true)
}

pub fn kbad_scan(t: &mut PlaneTree, k: usize, vs: &[VertexId]) -> Result<Vec<bool>> {
    vs.iter().map(|&v| is_kbad(t, k, v)).collect()
}

/// Ancestor at height `h` of the last position, a finite-height stand-in
/// for the limit point of the walk. The last quarter of the trace must stay
/// strictly above `h`.
pub fn boundary_marker<G: WalkGraph + ?Sized>(g: &G, t: &WalkTrace, h: i32) -> Result<VertexId> {
    let tail = (t.len() / 4).max(1);
    let low = *t.heights[t.len() - tail..].iter().min().unwrap();
    if low <= h {
        return Err(Error::TailNotAboveH(low));
    }
    let mut v = *t.positions.last().unwrap();
    while g.height_of(v) > h {
        v = g.parent_of(v).ok_or(Error::UnknownVertex(v))?;
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscapeEstimate {
    pub p: f64,
    pub ci95: (f64, f64),
    pub successes: u64,
    pub trials: u64,
}

/// Fraction of walks from `x` reaching height `depth_stop` before touching
/// the boundary rays. Trial `i` uses the stream `trial_rng(seed, i)`.
pub fn slice_escape_prob(s: &mut LazyMap, x: VertexId, depth_stop: usize, trials: u64, seed: u64) -> Result<EscapeEstimate> {
    if s.kind() != MapKind::Slice {
        return Err(Error::NotASlice);
    }
    let mut successes = 0;
    if !s.on_boundary(x)? {
        let mut buf = Vec::new();
        for i in 0..trials {
            let mut rng = trial_rng(seed, i);
            if escapes(s, x, depth_stop, &mut rng, &mut buf)? {
                successes += 1;
            }
        }
    }
    let p = if trials == 0 { 0.0 } else { successes as f64 / trials as f64 };
    Ok(EscapeEstimate { p, ci95: wilson_interval(successes, trials, 0.95), successes, trials })
}

fn escapes<R: Rng + ?Sized>(s: &mut LazyMap, x: VertexId, depth_stop: usize, rng: &mut R, buf: &mut Vec<Incidence>) -> Result<bool> {
    let mut v = x;
    for _ in 0..ESCAPE_STEP_CAP {
        if s.height_of(v) as usize >= depth_stop {
            return Ok(true);
        }
        if s.on_boundary(v)? {
            return Ok(false);
        }
        v = step_with(s, v, 1.0, rng, buf)?;
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmap::build_causal;
    use crate::offspring::OffspringDistribution;
    use crate::stats::{ks_two_sample, mean};
    use proptest::prelude::*;
    use rand::Rng;

    fn d(p: &[(usize, f64)]) -> OffspringDistribution {
        OffspringDistribution::new(p).unwrap()
    }

    fn six_vertex_tree() -> PlaneTree {
        PlaneTree::from_levels(&[vec![2], vec![1, 2]]).unwrap()
    }

    #[test]
    fn step_law_at_b() {
        // b has the parent, a double edge to a on its left, d and e
        let mut m = build_causal(&six_vertex_tree());
        let mut rng = rng_from_seed(1);
        let n = 1_000_000;
        let hits = (0..n).filter(|_| step(&mut m, 2, 1.0, &mut rng).unwrap() == 1).count();
        let p = 0.4;
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - p).abs() < 3.0 * sd);
    }

    #[test]
    fn stub_steps_to_its_root() {
        let mut h = LazyMap::half_plane(&d(&[(2, 1.0)]), 3).unwrap();
        let stub = h.tree().parent(h.root()).unwrap();
        let mut rng = rng_from_seed(2);
        for _ in 0..20 {
            assert_eq!(step(&mut h, stub, 1.0, &mut rng).unwrap(), h.root());
        }
        assert!(step(&mut h, stub, 0.0, &mut rng).is_err());
    }

    #[test]
    fn isolated_vertex() {
        let mut m = build_causal(&PlaneTree::from_levels(&[vec![0]]).unwrap());
        let mut rng = rng_from_seed(3);
        assert_eq!(step(&mut m, 0, 1.0, &mut rng), Err(Error::IsolatedVertex(0)));
    }

    #[test]
    fn walk_basics() {
        let x = d(&[(1, 0.5), (2, 0.5)]);
        let mut h = LazyMap::half_plane(&x, 4).unwrap();
        let r = h.root();
        let t0 = run_walk(&mut h, r, 0, 1.0, 9).unwrap();
        assert_eq!(t0.positions, vec![r]);
        let a = run_walk(&mut h, r, 2000, 1.0, 9).unwrap();
        let mut fresh = LazyMap::half_plane(&x, 4).unwrap();
        let b = run_walk(&mut fresh, r, 2000, 1.0, 9).unwrap();
        assert_eq!(a.heights, b.heights);
        assert_eq!(a.len(), 2001);
        let back = WalkTrace::from_text(&a.to_text(), 1.0, 9).unwrap();
        assert_eq!(back, a);
        for w in a.heights.windows(2) {
            assert!((w[1] - w[0]).abs() <= 1);
        }
        for (v, hgt) in a.positions.iter().zip(&a.heights) {
            assert_eq!(h.height_of(*v), *hgt);
        }
    }

    #[test]
    fn binary_half_plane_speed() {
        let x = d(&[(2, 1.0)]);
        let traces: Vec<WalkTrace> = (0..100)
            .map(|i| {
                let mut h = LazyMap::half_plane(&x, i).unwrap();
                let r = h.root();
                run_walk(&mut h, r, 100_000, 1.0, 1000 + i).unwrap()
            })
            .collect();
        let s = speed_estimate(&traces).unwrap();
        assert!((0.19..=0.21).contains(&s.v_hat), "{s:?}");
        let r = s.ratio().unwrap();
        assert!((0.19..=0.21).contains(&r), "{s:?}");
        assert!(!s.disagree);
    }

    #[test]
    fn descents() {
        assert_eq!(descent_max(&[0, 1, 2, 3]), 0);
        assert_eq!(descent_max(&[0, 1, 0, 1]), 1);
        assert_eq!(descent_max(&[0, 1, 2, 0, 1]), 2);
        assert_eq!(descent_max(&[]), 0);
    }

    #[test]
    fn regeneration_examples() {
        // n = 1 also satisfies the definition: H_0 < 1 and no later value is below 1
        let r = regeneration_times(&[0, 1, 2, 1, 2, 3, 4, 5], 0);
        assert_eq!(r.times, vec![1, 5, 6, 7]);
        assert_eq!(r.censored_after, 7);
        let up: Vec<i32> = (0..10).collect();
        assert_eq!(regeneration_times(&up, 0).times, (1..10).collect::<Vec<_>>());
        assert_eq!(regeneration_times(&up, 3).times, (1..7).collect::<Vec<_>>());
        let back = regeneration_times(&[0, 1, 2, 3, 2, 1, 0, 1, 2], 0);
        assert!(back.times.is_empty());
    }

    #[test]
    fn deterministic_speed() {
        let t = WalkTrace { positions: (0..11).collect(), heights: (0..11).collect(), lambda: 1.0, seed: 0 };
        let s = speed_estimate(&[t.clone(), t]).unwrap();
        assert_eq!(s.v_hat, 1.0);
        assert_eq!(s.ratio().unwrap(), 1.0);
        let flat = WalkTrace { positions: vec![0; 5], heights: vec![0; 5], lambda: 1.0, seed: 0 };
        assert_eq!(speed_estimate(&[flat]).unwrap().ratio(), Err(Error::NoRegenerations));
        assert!(speed_estimate(&[]).is_err());
    }

    #[test]
    fn strong_bias_stalls() {
        let x = d(&[(2, 1.0)]);
        let traces: Vec<WalkTrace> = (0..20)
            .map(|i| {
                let mut m = LazyMap::causal(PlaneTree::lazy(&x, i));
                let r = m.root();
                run_walk(&mut m, r, 20_000, 10.0, i).unwrap()
            })
            .collect();
        let s = speed_estimate(&traces).unwrap();
        // heights are nonnegative, so the estimate only shrinks towards 0
        assert!(s.v_hat < 1e-3, "{s:?}");
    }

    #[test]
    fn drift_by_child_count() {
        let x = d(&[(1, 1.0 / 3.0), (2, 1.0 / 3.0), (3, 1.0 / 3.0)]);
        let mut sums = [0i64; 4];
        let mut counts = [0u64; 4];
        for i in 0..10 {
            let mut h = LazyMap::half_plane(&x, 50 + i).unwrap();
            let r = h.root();
            let t = run_walk(&mut h, r, 100_000, 1.0, i).unwrap();
            for n in 0..t.steps() {
                if t.heights[n] < 0 {
                    continue;
                }
                let c = h.tree_mut().child_count(t.positions[n]).unwrap();
                sums[c] += (t.heights[n + 1] - t.heights[n]) as i64;
                counts[c] += 1;
            }
        }
        for c in 1..4 {
            let (p_up, p_down) = (c as f64 / (c as f64 + 3.0), 1.0 / (c as f64 + 3.0));
            let drift = p_up - p_down;
            let var = p_up + p_down - drift * drift;
            let got = sums[c] as f64 / counts[c] as f64;
            assert!((got - drift).abs() < 3.0 * (var / counts[c] as f64).sqrt(), "c={c}: {got} vs {drift}");
        }
    }

    #[test]
    fn regeneration_increments_look_iid() {
        let x = d(&[(1, 0.5), (3, 0.5)]);
        let mut dts = Vec::new();
        for i in 0..40 {
            let mut h = LazyMap::half_plane(&x, 200 + i).unwrap();
            let r = h.root();
            let t = run_walk(&mut h, r, 20_000, 1.0, i).unwrap();
            let rep = regeneration_times(&t.heights, default_buffer(t.len()));
            dts.extend(regeneration_increments(&t.heights, &rep).into_iter().map(|(a, _)| a as f64));
        }
        let (a, b) = dts.split_at(dts.len() / 2);
        let (_, p) = ks_two_sample(a, b);
        assert!(p > 1e-3, "p = {p}");
    }

    fn kbad_fixture() -> PlaneTree {
        PlaneTree::row_from_levels(&[vec![1; 7], vec![1; 7], vec![1; 7], vec![1, 2, 1, 1, 2, 2, 1]], 3).unwrap()
    }

    #[test]
    fn kbad_fixture_roots() {
        let mut t = kbad_fixture();
        let x = t.row_root(0).unwrap().unwrap();
        assert_eq!(kbad_scan(&mut t, 2, &[x]).unwrap(), vec![true]);
        assert_eq!(kbad_scan(&mut t, 3, &[x]).unwrap(), vec![false]);
        assert_eq!(kbad_scan(&mut t, 4, &[x]), Err(Error::InsufficientMaterialization(x)));
        assert_eq!(kbad_scan(&mut t, 0, &[x]).unwrap(), vec![true]);
    }

    #[test]
    fn kbad_frequency() {
        let x = d(&[(1, 0.5), (3, 0.5)]);
        let n = 200_000u64;
        let hits = (0..n)
            .filter(|&i| {
                let mut t = PlaneTree::lazy_row(&x, i).unwrap();
                let r = t.root();
                is_kbad(&mut t, 1, r).unwrap()
            })
            .count();
        let p = 0.5f64.powi(6);
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - p).abs() < 3.0 * sd);
        let no_ones = d(&[(2, 0.5), (3, 0.5)]);
        let mut t = PlaneTree::lazy_row(&no_ones, 1).unwrap();
        let r = t.root();
        assert!(!is_kbad(&mut t, 0, r).unwrap());
    }

    #[test]
    fn marker_is_an_ancestor() {
        let x = d(&[(2, 1.0)]);
        let mut h = LazyMap::half_plane(&x, 5).unwrap();
        let r = h.root();
        let t = run_walk(&mut h, r, 5000, 1.0, 5).unwrap();
        let m = boundary_marker(&h, &t, 3).unwrap();
        assert_eq!(h.tree().ancestor_at(*t.positions.last().unwrap(), 3), Some(m));
        let short = run_walk(&mut h, r, 0, 1.0, 5).unwrap();
        assert_eq!(boundary_marker(&h, &short, 0), Err(Error::TailNotAboveH(0)));
    }

    #[test]
    fn marker_in_a_subtree() {
        // a walk on the causal map of a path stays in the subtree of the vertex at height 2
        let t = PlaneTree::from_levels(&vec![vec![1]; 8]).unwrap();
        let mut m = build_causal(&t);
        let trace = WalkTrace { positions: vec![5, 6, 7, 6], heights: vec![5, 6, 7, 6], lambda: 1.0, seed: 0 };
        assert_eq!(boundary_marker(&m, &trace, 2).unwrap(), 2);
        let mut rng = rng_from_seed(1);
        assert_eq!(step(&mut m, 8, 1.0, &mut rng).unwrap(), 7);
    }

    #[test]
    fn markers_separate() {
        let x = d(&[(1, 0.5), (2, 0.5)]);
        let freq = |h: i32| {
            let mut differ = 0;
            for i in 0..200 {
                let mut m = LazyMap::half_plane(&x, i).unwrap();
                let r = m.root();
                let a = run_walk(&mut m, r, 4000, 1.0, 2 * i).unwrap();
                let b = run_walk(&mut m, r, 4000, 1.0, 2 * i + 1).unwrap();
                match (boundary_marker(&m, &a, h), boundary_marker(&m, &b, h)) {
                    (Ok(u), Ok(v)) if u == v => {}
                    _ => differ += 1,
                }
            }
            differ
        };
        assert!(freq(2) <= freq(15));
    }

    #[test]
    fn escape_from_the_boundary_is_zero() {
        let x = d(&[(0, 0.25), (2, 0.75)]);
        let mut s = LazyMap::slice(PlaneTree::lazy_survived(&x, 1).unwrap());
        let r = s.root();
        let e = slice_escape_prob(&mut s, r, 10, 50, 1).unwrap();
        assert_eq!(e.successes, 0);
        assert_eq!(e.p, 0.0);
        let mut c = LazyMap::causal(PlaneTree::lazy(&x, 1));
        assert_eq!(slice_escape_prob(&mut c, 0, 10, 5, 1).unwrap_err(), Error::NotASlice);
    }

    #[test]
    fn escape_is_positive_somewhere() {
        let x = d(&[(0, 0.25), (2, 0.75)]);
        let mut rng = rng_from_seed(7);
        let mut found = false;
        'outer: for seed in 0..20u64 {
            let mut s = LazyMap::slice(PlaneTree::lazy_survived(&x, seed).unwrap());
            for h in 2..8 {
                let l = s.left_ray_at(h).unwrap();
                let r = s.right_ray_at(h).unwrap();
                let mut v = l;
                while v != r {
                    if !s.on_boundary(v).unwrap() && rng.random_bool(0.5) {
                        let e = slice_escape_prob(&mut s, v, 40, 400, seed).unwrap();
                        if e.ci95.0 > 0.0 {
                            let deeper = slice_escape_prob(&mut s, v, 60, 400, seed).unwrap();
                            assert!(deeper.successes <= e.successes);
                            found = true;
                            break 'outer;
                        }
                    }
                    v = s.tree_mut().right_of(v).unwrap().unwrap();
                }
            }
        }
        assert!(found);
    }

    #[test]
    fn first_regeneration_mean_is_stable() {
        let x = d(&[(2, 1.0)]);
        let tau1 = |len: usize| {
            let v: Vec<f64> = (0..300)
                .filter_map(|i| {
                    let mut h = LazyMap::half_plane(&x, i).unwrap();
                    let r = h.root();
                    let t = run_walk(&mut h, r, len, 1.0, i).unwrap();
                    regeneration_times(&t.heights, default_buffer(t.len())).times.first().map(|&t| t as f64)
                })
                .collect();
            mean(&v)
        };
        let (a, b) = (tau1(2000), tau1(4000));
        assert!((a / b - 1.0).abs() < 0.1, "{a} {b}");
    }

    proptest! {
        #[test]
        fn regeneration_definition(hs in prop::collection::vec(-1i32..2, 1..60), buffer in 0usize..5) {
            let mut h = vec![0];
            for s in hs {
                h.push(h.last().unwrap() + s);
            }
            let r = regeneration_times(&h, buffer);
            for n in 1..h.len() {
                let ok = h[..n].iter().all(|&x| x < h[n]) && h[n..].iter().all(|&x| x >= h[n]);
                let expected = ok && n + buffer < h.len();
                prop_assert_eq!(r.times.contains(&n), expected);
            }
            let brute = (0..h.len()).flat_map(|k| (k + 1..h.len()).map(move |l| (k, l))).map(|(k, l)| h[k] - h[l]).max().unwrap_or(0).max(0);
            prop_assert_eq!(descent_max(&h), brute);
        }
    }
}
