//! Graph distances, geodesics, triangle probes, escaping sequences and the
//! finite-scale bi-infinite geodesic of a slice.

use std::collections::VecDeque;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Binomial;
use serde::{Deserialize, Serialize};

use crate::cmap::{CausalMap, EdgeKind, LazyMap, MapKind};
use crate::error::{Error, Result};
use crate::offspring::OffspringDistribution;
use crate::tree::VertexId;

const UNREACHED: u32 = u32::MAX;

/// Number of trailing anti-diagonals that must be constant for a plateau.
pub const PLATEAU_DIAGONALS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeodesicPath {
    pub vertices: Vec<u32>,
    /// Map edges traversed, when the path lives in an explicit map.
    pub edges: Vec<u32>,
    pub length: usize,
}

impl GeodesicPath {
    fn from_vertices(vertices: Vec<u32>) -> Self {
        let length = vertices.len().saturating_sub(1);
        GeodesicPath { vertices, edges: Vec::new(), length }
    }

    pub fn first(&self) -> u32 {
        self.vertices[0]
    }

    pub fn last(&self) -> u32 {
        *self.vertices.last().unwrap()
    }
}

/// Breadth-first distances from `src`; unreachable vertices get `u32::MAX`.
pub fn bfs_distances(m: &CausalMap, src: u32) -> Vec<u32> {
    let mut dist = vec![UNREACHED; m.n_vertices()];
    let mut queue = VecDeque::new();
    dist[src as usize] = 0;
    queue.push_back(src);
    while let Some(x) = queue.pop_front() {
        for &e in m.rotation(x) {
            let y = m.other(e, x);
            if dist[y as usize] == UNREACHED {
                dist[y as usize] = dist[x as usize] + 1;
                queue.push_back(y);
            }
        }
    }
    dist
}

fn check_vertex(m: &CausalMap, v: u32) -> Result<()> {
    if (v as usize) < m.n_vertices() {
        Ok(())
    } else {
        Err(Error::UnknownVertex(v))
    }
}

pub fn distance(m: &CausalMap, u: u32, v: u32) -> Result<u32> {
    check_vertex(m, u)?;
    check_vertex(m, v)?;
    match bfs_distances(m, u)[v as usize] {
        UNREACHED => Err(Error::Disconnected),
        d => Ok(d),
    }
}

/// A shortest path from `u` to `v`. Walking back from `v`, the predecessor
/// with the smallest `(height, level_index)` is preferred, and the lowest
/// edge id among parallel edges.
pub fn geodesic(m: &CausalMap, u: u32, v: u32) -> Result<GeodesicPath> {
    check_vertex(m, u)?;
    check_vertex(m, v)?;
    let dist = bfs_distances(m, u);
    geodesic_with(m, &dist, v)
}

fn geodesic_with(m: &CausalMap, dist: &[u32], v: u32) -> Result<GeodesicPath> {
    if dist[v as usize] == UNREACHED {
        return Err(Error::Disconnected);
    }
    let mut vertices = vec![v];
    let mut edges = Vec::new();
    let mut x = v;
    while dist[x as usize] > 0 {
        let want = dist[x as usize] - 1;
        let (e, y) = m
            .rotation(x)
            .iter()
            .map(|&e| (e, m.other(e, x)))
            .filter(|&(_, y)| dist[y as usize] == want)
            .min_by_key(|&(e, y)| {
                let mv = m.vertex(y);
                (mv.height, mv.level_index, e)
            })
            .expect("BFS predecessor");
        vertices.push(y);
        edges.push(e);
        x = y;
    }
    vertices.reverse();
    edges.reverse();
    let length = edges.len();
    Ok(GeodesicPath { vertices, edges, length })
}

/// Signed number of wrap edges crossed, counting last-to-first as +1.
/// This is the winding number about the root: the root sits where the
/// cut between the last and first vertex of every level starts.
fn wrap_winding(m: &CausalMap, p: &GeodesicPath) -> i64 {
    let mut w = 0;
    for (i, &e) in p.edges.iter().enumerate() {
        let ed = m.edges()[e as usize];
        if ed.kind == EdgeKind::Wrap {
            w += if p.vertices[i] == ed.u { 1 } else { -1 };
        }
    }
    w
}

/// Whether the loop formed by three paths winds around the root. Loops
/// through the root count as surrounding it.
pub fn triangle_surrounds_root(m: &CausalMap, p1: &GeodesicPath, p2: &GeodesicPath, p3: &GeodesicPath) -> Result<bool> {
    if p1.last() != p2.first() || p2.last() != p3.first() || p3.last() != p1.first() {
        return Err(Error::NotClosed);
    }
    let paths = [p1, p2, p3];
    if paths.iter().all(|p| p.length == 0) {
        return Ok(p1.first() == m.root());
    }
    if paths.iter().any(|p| p.vertices.contains(&m.root())) {
        return Ok(true);
    }
    if paths.iter().any(|p| p.edges.len() != p.length) {
        return Err(Error::Invalid("paths must carry their edges".into()));
    }
    Ok(paths.iter().map(|p| wrap_winding(m, p)).sum::<i64>() != 0)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    /// Distance from the root to each surrounding triangle found.
    pub distances: Vec<u32>,
    /// Triangles drawn in total.
    pub attempts: usize,
}

impl ProbeResult {
    pub fn max(&self) -> Option<u32> {
        self.distances.iter().copied().max()
    }
}

/// Draw `trials` uniform vertex triples and record d(root, triangle) for
/// those whose geodesic triangle surrounds the root.
pub fn hyperbolicity_probe<R: Rng + ?Sized>(m: &CausalMap, trials: usize, rng: &mut R) -> ProbeResult {
    let n = m.n_vertices() as u32;
    let from_root = bfs_distances(m, m.root());
    let mut out = ProbeResult::default();
    for _ in 0..trials {
        out.attempts += 1;
        let x = [rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n)];
        let d: Vec<Vec<u32>> = x.iter().map(|&s| bfs_distances(m, s)).collect();
        let sides: Option<Vec<GeodesicPath>> =
            (0..3).map(|i| geodesic_with(m, &d[i], x[(i + 1) % 3]).ok()).collect();
        let Some(sides) = sides else { continue };
        if triangle_surrounds_root(m, &sides[0], &sides[1], &sides[2]) == Ok(true) {
            let dist = sides.iter().flat_map(|p| &p.vertices).map(|&v| from_root[v as usize]).min().unwrap();
            out.distances.push(dist);
        }
    }
    out
}

/// The causal map of the complete `arity`-ary tree, addressed by
/// `(height, position)` with closed-form distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegularCausal {
    pub arity: u64,
}

/// A geodesic of [`RegularCausal`]: down to `low`, across, and up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegularGeodesic {
    pub length: u64,
    pub low: u32,
    pub winding: i64,
}

impl RegularCausal {
    pub fn width(&self, h: u32) -> u64 {
        self.arity.pow(h)
    }

    fn ancestor(&self, v: (u32, u64), h: u32) -> u64 {
        v.1 / self.arity.pow(v.0 - h)
    }

    /// Geodesic between two vertices; ties prefer the lowest crossing level
    /// and the clockwise direction.
    pub fn geodesic(&self, a: (u32, u64), b: (u32, u64)) -> RegularGeodesic {
        let mut best: Option<RegularGeodesic> = None;
        for h in 0..=a.0.min(b.0) {
            let w = self.width(h);
            let (x, y) = (self.ancestor(a, h), self.ancestor(b, h));
            let fwd = (y + w - x) % w;
            let back = (w - fwd) % w;
            let (across, winding) = if fwd <= back {
                (fwd, i64::from(fwd > 0 && y < x))
            } else {
                (back, -i64::from(y > x))
            };
            let length = (a.0 + b.0 - 2 * h) as u64 + across;
            if best.is_none_or(|g| length < g.length) {
                best = Some(RegularGeodesic { length, low: h, winding });
            }
        }
        best.unwrap()
    }

    pub fn distance(&self, a: (u32, u64), b: (u32, u64)) -> u64 {
        self.geodesic(a, b).length
    }

    /// Uniform vertex of the ball of the given radius around the root.
    pub fn sample_vertex<R: Rng + ?Sized>(&self, radius: u32, rng: &mut R) -> (u32, u64) {
        let weights: Vec<f64> = (0..=radius).map(|h| (self.arity as f64).powi(h as i32)).collect();
        let h = WeightedIndex::new(&weights).expect("weights").sample(rng) as u32;
        (h, rng.random_range(0..self.width(h)))
    }

    /// Probe with `target` surrounding triangles, drawing at most `max_attempts`.
    pub fn probe<R: Rng + ?Sized>(&self, radius: u32, target: usize, max_attempts: usize, rng: &mut R) -> ProbeResult {
        let mut out = ProbeResult::default();
        while out.distances.len() < target && out.attempts < max_attempts {
            out.attempts += 1;
            let x = [
                self.sample_vertex(radius, rng),
                self.sample_vertex(radius, rng),
                self.sample_vertex(radius, rng),
            ];
            let g: Vec<RegularGeodesic> = (0..3).map(|i| self.geodesic(x[i], x[(i + 1) % 3])).collect();
            let low = g.iter().map(|s| s.low).min().unwrap();
            if low == 0 || g.iter().map(|s| s.winding).sum::<i64>() != 0 {
                out.distances.push(low);
            }
        }
        out
    }
}

/// Outcome of the escaping sequences started at some vertex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscapeOutcome {
    pub survived: bool,
    pub killed_at: Option<usize>,
    pub y_trace: Vec<u32>,
    pub z_trace: Vec<u32>,
}

/// Escaping sequences on the right from `x` in an explicit slice, on the
/// backbone levels. `u(i)` is the step used at level `i`. The sequences
/// must be defined through level `depth` to survive.
pub fn escape_sequences(s: &CausalMap, x: u32, u: &dyn Fn(usize) -> u64, depth: usize) -> Result<EscapeOutcome> {
    if s.kind() != MapKind::Slice {
        return Err(Error::NotASlice);
    }
    check_vertex(s, x)?;
    if !s.vertex(x).backbone {
        return Err(Error::Invalid(format!("vertex {x} is not on the backbone")));
    }
    if depth as i32 > s.max_height() {
        return Err(Error::TooShallow);
    }
    let k = s.vertex(x).height as usize;
    let mut out = EscapeOutcome { survived: false, killed_at: None, y_trace: vec![], z_trace: vec![] };
    let mut y = x;
    for i in k..=depth {
        let level: Vec<u32> = s.level(i as i32).iter().copied().filter(|&v| s.vertex(v).backbone).collect();
        let pos = level.iter().position(|&v| v == y).expect("y on backbone level");
        let target = pos as u64 + u(i);
        out.y_trace.push(y);
        if target >= level.len() as u64 - 1 {
            out.killed_at = Some(i);
            return Ok(out);
        }
        let z = level[target as usize];
        out.z_trace.push(z);
        if i < depth {
            y = s.children(z).filter(|&c| s.vertex(c).backbone).last().expect("backbone child");
        }
    }
    out.y_trace.truncate(out.z_trace.len());
    out.survived = true;
    Ok(out)
}

/// The escaping recursion on counts. `r` is the number of backbone
/// vertices right of `x` at level `k`; `sum_children(i, n)` returns the
/// total number of backbone children of the `n` rightmost vertices of
/// level `i`. Returns the kill level, or `None` on survival.
pub fn escape_recursion(
    mut r: u64,
    k: usize,
    depth: usize,
    u: &dyn Fn(usize) -> u64,
    mut sum_children: impl FnMut(usize, u64) -> u64,
) -> Option<usize> {
    // once r exceeds the total of the remaining steps no kill can happen,
    // since backbone vertices have at least one child
    let mut remaining: u64 = (k..=depth).map(u).sum();
    for i in k..=depth {
        if r > remaining {
            return None;
        }
        let ui = u(i);
        if ui >= r {
            return Some(i);
        }
        remaining -= ui;
        if i < depth {
            r = sum_children(i, r - ui);
        }
    }
    None
}

/// Sum of `n` independent draws from `law`, via sequential binomials.
pub fn sum_iid<R: Rng + ?Sized>(law: &OffspringDistribution, n: u64, rng: &mut R) -> u64 {
    let mut left = n;
    let mut mass = 1.0;
    let mut total = 0;
    let pairs = law.pairs();
    for (idx, (c, p)) in pairs.iter().enumerate() {
        if left == 0 {
            break;
        }
        let draws = if idx + 1 == pairs.len() || mass <= *p {
            left
        } else {
            Binomial::new(left, (p / mass).min(1.0)).expect("valid binomial").sample(rng)
        };
        total += draws * *c as u64;
        left -= draws;
        mass -= p;
    }
    total
}

/// Escape from the leftmost backbone vertex at level `k` of a random slice,
/// simulated on counts only. Returns the kill level or `None` on survival.
pub fn escape_from_left_ray<R: Rng + ?Sized>(
    backbone: &OffspringDistribution,
    k: usize,
    u: &dyn Fn(usize) -> u64,
    depth: usize,
    rng: &mut R,
) -> Option<usize> {
    let mut z = 1u64;
    for _ in 0..k {
        z = sum_iid(backbone, z, rng);
    }
    escape_recursion(z - 1, k, depth, u, |_, n| sum_iid(backbone, n, rng))
}

/// The table `a_{i,j} = i + j - d(left_ray(i), right_ray(j))`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AijTable {
    pub values: Vec<Vec<i64>>,
}

impl AijTable {
    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.values[i][j]
    }

    pub fn imax(&self) -> usize {
        self.values.len() - 1
    }

    pub fn jmax(&self) -> usize {
        self.values[0].len() - 1
    }

    pub fn is_monotone(&self) -> bool {
        let (im, jm) = (self.imax(), self.jmax());
        (0..=im).all(|i| {
            (0..=jm).all(|j| {
                (i == 0 || self.values[i - 1][j] <= self.values[i][j])
                    && (j == 0 || self.values[i][j - 1] <= self.values[i][j])
            })
        })
    }

    /// Plateau value and the first entry reaching it, when the last
    /// [`PLATEAU_DIAGONALS`] anti-diagonals are constant.
    pub fn plateau(&self) -> Option<(usize, usize, i64)> {
        let (im, jm) = (self.imax(), self.jmax());
        let start = (im + jm + 1).saturating_sub(PLATEAU_DIAGONALS);
        let mut value = None;
        for i in 0..=im {
            for j in 0..=jm {
                if i + j >= start {
                    match value {
                        None => value = Some(self.values[i][j]),
                        Some(v) if v != self.values[i][j] => return None,
                        _ => {}
                    }
                }
            }
        }
        let k = value?;
        let mut best: Option<(usize, usize)> = None;
        for i in 0..=im {
            for j in 0..=jm {
                if self.values[i][j] == k && best.is_none_or(|(a, b)| (i + j, i) < (a + b, a)) {
                    best = Some((i, j));
                }
            }
        }
        best.map(|(i, j)| (i, j, k))
    }
}

/// Distance table of an explicit slice, by breadth-first search.
pub fn aij_table(s: &CausalMap, imax: usize, jmax: usize) -> Result<AijTable> {
    if s.kind() != MapKind::Slice {
        return Err(Error::NotASlice);
    }
    if s.max_height() <= (imax + jmax) as i32 {
        return Err(Error::TooShallow);
    }
    let depth = s.max_height();
    let gl = geodesic(s, s.root(), s.left_ray()[depth as usize])?;
    let gr = geodesic(s, s.root(), s.right_ray()[depth as usize])?;
    let values = (0..=imax)
        .map(|i| {
            let d = bfs_distances(s, gl.vertices[i]);
            (0..=jmax).map(|j| (i + j) as i64 - d[gr.vertices[j] as usize] as i64).collect()
        })
        .collect();
    Ok(AijTable { values })
}

/// Bi-infinite geodesic of an explicit slice, verified on all pairs.
pub fn bi_infinite_geodesic(s: &CausalMap, table: &AijTable) -> Result<GeodesicPath> {
    let (i0, j0, _) = table.plateau().ok_or(Error::NoPlateau)?;
    let depth = s.max_height() as usize;
    let gl = geodesic(s, s.root(), s.left_ray()[depth])?;
    let gr = geodesic(s, s.root(), s.right_ray()[depth])?;
    let mid = geodesic(s, gl.vertices[i0], gr.vertices[j0])?;
    let mut path: Vec<u32> = gl.vertices[i0 + 1..=table.imax()].iter().rev().copied().collect();
    path.extend(&mid.vertices);
    path.extend(&gr.vertices[j0 + 1..=table.jmax()]);
    for (a, &x) in path.iter().enumerate() {
        let d = bfs_distances(s, x);
        for (b, &y) in path.iter().enumerate() {
            if d[y as usize] as usize != a.abs_diff(b) {
                return Err(Error::Invalid(format!("path is not geodesic between {a} and {b}")));
            }
        }
    }
    Ok(GeodesicPath::from_vertices(path))
}

/// Exact distances in a lazily grown slice without leaves.
///
/// Without leaves the projection of a level onto a lower level is
/// 1-Lipschitz, so `d(u, v)` is the minimum over `h` of the cost of going
/// down to height `h`, across, and back up.
pub struct LeaflessSlice<'a> {
    s: &'a mut LazyMap,
    cap: u64,
    widths: Vec<u64>,
}

/// Offsets of the ancestors of a vertex from both boundary rays, per height.
/// Offsets of `cap` or more are unknown.
pub type Profile = Vec<(u64, u64)>;

impl<'a> LeaflessSlice<'a> {
    /// `max_height` bounds the heights of the vertices compared.
    pub fn new(s: &'a mut LazyMap, max_height: usize) -> Result<Self> {
        if s.kind() != MapKind::Slice {
            return Err(Error::NotASlice);
        }
        if s.tree().offspring().is_some_and(|d| d.weight(0) > 0.0) {
            return Err(Error::Invalid("offspring law has leaves".into()));
        }
        let cap = 4 * max_height as u64 + 8;
        Ok(LeaflessSlice { s, cap, widths: Vec::new() })
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    pub fn map(&mut self) -> &mut LazyMap {
        self.s
    }

    /// Level width, or `cap` if it is at least `cap`.
    pub fn width(&mut self, h: usize) -> Result<u64> {
        while self.widths.len() <= h {
            let k = self.widths.len();
            let (l, r) = (self.s.left_ray_at(k)?, self.s.right_ray_at(k)?);
            let mut v = l;
            let mut w = 1;
            while v != r && w < self.cap {
                v = self.s.tree_mut().right_of(v)?.ok_or(Error::InsufficientMaterialization(v))?;
                w += 1;
            }
            self.widths.push(if v == r { w } else { self.cap });
        }
        Ok(self.widths[h])
    }

    fn offsets(&mut self, v: VertexId) -> Result<(u64, u64)> {
        let h = self.s.tree().height(v) as usize;
        let w = self.width(h)?;
        let (l, r) = (self.s.left_ray_at(h)?, self.s.right_ray_at(h)?);
        if v == l {
            return Ok((0, if w < self.cap { w - 1 } else { self.cap }));
        }
        if v == r {
            return Ok((if w < self.cap { w - 1 } else { self.cap }, 0));
        }
        let mut x = v;
        let mut steps = 0;
        while x != l && steps < self.cap {
            x = self.s.tree_mut().left_of(x)?.ok_or(Error::InsufficientMaterialization(x))?;
            steps += 1;
        }
        let left = if x == l { steps } else { self.cap };
        let right = if left < self.cap && w < self.cap { w - 1 - left } else { self.cap };
        Ok((left, right))
    }

    pub fn profile(&mut self, v: VertexId) -> Result<Profile> {
        let mut out = Vec::new();
        let mut x = v;
        loop {
            out.push(self.offsets(x)?);
            match self.s.tree().parent(x) {
                Some(p) => x = p,
                None => break,
            }
        }
        out.reverse();
        Ok(out)
    }

    /// Distance between vertices at heights `pa.len() - 1` and `pb.len() - 1`.
    /// Always an upper bound for heights up to the `max_height` given at
    /// construction; exact when, at the level realizing the distance, both
    /// ancestors lie within `cap` of the same boundary ray.
    pub fn distance(&self, pa: &[(u64, u64)], pb: &[(u64, u64)]) -> u64 {
        let (ha, hb) = (pa.len() as u64 - 1, pb.len() as u64 - 1);
        (0..pa.len().min(pb.len()))
            .map(|h| {
                let ((la, ra), (lb, rb)) = (pa[h], pb[h]);
                let across = if la < self.cap && lb < self.cap {
                    la.abs_diff(lb)
                } else if ra < self.cap && rb < self.cap {
                    ra.abs_diff(rb)
                } else {
                    self.cap
                };
                ha + hb - 2 * h as u64 + across
            })
            .min()
            .unwrap()
    }

    /// `a_{i,j}` from level widths; the boundary rays are the geodesics
    /// from the root in a slice.
    pub fn aij_table(&mut self, imax: usize, jmax: usize) -> Result<AijTable> {
        let top = imax.max(jmax);
        let across: Vec<u64> = (0..=top).map(|h| self.width(h).map(|w| w - 1)).collect::<Result<_>>()?;
        let values = (0..=imax)
            .map(|i| {
                (0..=jmax)
                    .map(|j| {
                        let d = (0..=i.min(j)).map(|h| (i + j - 2 * h) as u64 + across[h]).min().unwrap();
                        (i + j) as i64 - d as i64
                    })
                    .collect()
            })
            .collect();
        Ok(AijTable { values })
    }

    /// The bi-infinite geodesic through the plateau of `table`, verified on
    /// every pair of its vertices.
    pub fn bi_infinite_geodesic(&mut self, table: &AijTable) -> Result<GeodesicPath> {
        let (i0, j0, _) = table.plateau().ok_or(Error::NoPlateau)?;
        let (im, jm) = (table.imax(), table.jmax());
        let mut best = (u64::MAX, 0);
        for h in 0..=i0.min(j0) {
            let c = (i0 + j0 - 2 * h) as u64 + self.width(h)? - 1;
            if c < best.0 {
                best = (c, h);
            }
        }
        let low = best.1;
        let mut path: Vec<u32> = (low..=im).rev().map(|i| self.s.left_ray_at(i)).collect::<Result<_>>()?;
        let end = self.s.right_ray_at(low)?;
        let mut v = *path.last().unwrap();
        while v != end {
            v = self.s.tree_mut().right_of(v)?.ok_or(Error::InsufficientMaterialization(v))?;
            path.push(v);
        }
        for j in low + 1..=jm {
            path.push(self.s.right_ray_at(j)?);
        }
        let profiles: Vec<Profile> = path.iter().map(|&v| self.profile(v)).collect::<Result<_>>()?;
        for a in 0..path.len() {
            for b in a + 1..path.len() {
                if self.distance(&profiles[a], &profiles[b]) != (b - a) as u64 {
                    return Err(Error::Invalid(format!("path is not geodesic between {a} and {b}")));
                }
            }
        }
        Ok(GeodesicPath::from_vertices(path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmap::{build_causal, build_slice};
    use crate::rng::rng_from_seed;
    use crate::tree::PlaneTree;
    use proptest::prelude::*;
    use rand::Rng;

    fn d(p: &[(usize, f64)]) -> OffspringDistribution {
        OffspringDistribution::new(p).unwrap()
    }

    fn six_vertex_tree() -> PlaneTree {
        PlaneTree::from_levels(&[vec![2], vec![1, 2]]).unwrap()
    }

    // map ids: root 0, a 1, b 2, c 3, d 4, e 5
    #[test]
    fn distances_on_six_vertex_tree() {
        let m = build_causal(&six_vertex_tree());
        let s = build_slice(&six_vertex_tree()).unwrap();
        assert_eq!(distance(&m, 3, 5).unwrap(), 1);
        assert_eq!(distance(&s, 3, 5).unwrap(), 2);
        assert_eq!(distance(&m, 4, 4).unwrap(), 0);
        let g = geodesic(&s, 3, 5).unwrap();
        assert_eq!(g.vertices, vec![3, 4, 5]);
        assert_eq!(g.length, 2);
        assert_eq!(geodesic(&s, 2, 2).unwrap().vertices, vec![2]);
    }

    #[test]
    fn disconnected_pair() {
        let row = PlaneTree::row_from_levels(&[vec![1, 1]], 0).unwrap();
        let mut lazy = crate::cmap::LazyMap::from_row(row);
        let m = lazy.snapshot(1, 1).unwrap();
        let stubs = m.level(-1);
        // stubs of different trees are joined through their roots
        assert!(distance(&m, stubs[0], stubs[1]).is_ok());
        let t = PlaneTree::from_levels(&[vec![1]]).unwrap();
        let single = build_causal(&t);
        assert!(matches!(distance(&single, 0, 7), Err(Error::UnknownVertex(7))));
    }

    #[test]
    fn triangles_on_six_vertex_tree() {
        let m = build_causal(&six_vertex_tree());
        let g = |a, b| geodesic(&m, a, b).unwrap();
        // c-d-e-(wrap)-c
        let p1 = g(3, 4);
        let p2 = g(4, 5);
        let p3 = g(5, 3);
        assert_eq!(p3.length, 1);
        assert!(triangle_surrounds_root(&m, &p1, &p2, &p3).unwrap());
        // d and e hang below b: no winding
        let q1 = g(2, 4);
        let q2 = g(4, 5);
        let q3 = g(5, 2);
        assert!(!triangle_surrounds_root(&m, &q1, &q2, &q3).unwrap());
        let single = g(4, 4);
        assert!(!triangle_surrounds_root(&m, &single, &single, &single).unwrap());
        assert_eq!(triangle_surrounds_root(&m, &p1, &p1, &p1), Err(Error::NotClosed));
        let r = g(0, 0);
        assert!(triangle_surrounds_root(&m, &r, &r, &r).unwrap());
    }

    #[test]
    fn regular_formula_matches_bfs() {
        let mut rng = rng_from_seed(1);
        let t = PlaneTree::sample_gw(&d(&[(2, 1.0)]), 6, &mut rng).unwrap();
        let m = build_causal(&t);
        let reg = RegularCausal { arity: 2 };
        let addr = |v: u32| (m.vertex(v).height as u32, m.vertex(v).level_index as u64);
        for _ in 0..300 {
            let (a, b) = (rng.random_range(0..m.n_vertices() as u32), rng.random_range(0..m.n_vertices() as u32));
            assert_eq!(reg.distance(addr(a), addr(b)), distance(&m, a, b).unwrap() as u64);
        }
    }

    #[test]
    fn probe_on_small_map() {
        let mut rng = rng_from_seed(2);
        let t = PlaneTree::sample_gw_survived(&d(&[(0, 0.25), (2, 0.75)]), 8, &mut rng).unwrap();
        let m = build_causal(&t);
        let r = hyperbolicity_probe(&m, 200, &mut rng);
        assert_eq!(r.attempts, 200);
        assert!(!r.distances.is_empty());
    }

    #[test]
    fn regular_probe_is_stable_in_radius() {
        let reg = RegularCausal { arity: 2 };
        let mut rng = rng_from_seed(3);
        let a = reg.probe(40, 1000, 1_000_000, &mut rng);
        let b = reg.probe(60, 1000, 1_000_000, &mut rng);
        assert_eq!(a.distances.len(), 1000);
        assert_eq!(b.distances.len(), 1000);
        assert!(a.max().unwrap().abs_diff(b.max().unwrap()) <= 1, "{:?} {:?}", a.max(), b.max());
        let g = reg.geodesic((5, 0), (0, 0));
        assert_eq!((g.length, g.low), (5, 0));
    }

    /// Escape fixture, u_i = 1 from level 2.
    fn escape_fixture() -> PlaneTree {
        PlaneTree::from_levels(&[
            vec![4],
            vec![1, 2, 3, 1],
            vec![1, 2, 1, 1, 1, 1, 2],
            vec![1, 1, 1, 2, 1, 2, 1, 2, 1],
            vec![1, 2, 1, 1, 1, 2, 2, 1, 2, 1, 1, 1],
        ])
        .unwrap()
    }

    #[test]
    fn escape_chain_on_fixture() {
        let t = escape_fixture();
        let s = build_slice(&t).unwrap();
        let at = |h: i32, i: usize| s.level(h)[i];
        let x = at(2, 1);
        let out = escape_sequences(&s, x, &|_| 1, 5).unwrap();
        assert!(out.survived);
        assert_eq!(out.y_trace, vec![at(2, 1), at(3, 3), at(4, 5), at(5, 9)]);
        assert_eq!(out.z_trace, vec![at(2, 2), at(3, 4), at(4, 6), at(5, 10)]);
        // one step short of the right ray at level 2 is killed at once
        let killed = escape_sequences(&s, at(2, 5), &|_| 1, 5).unwrap();
        assert_eq!(killed.killed_at, Some(2));
        let far = escape_sequences(&s, at(2, 1), &|_| 9, 5).unwrap();
        assert_eq!(far.killed_at, Some(2));
        let causal = build_causal(&t);
        assert_eq!(escape_sequences(&causal, 0, &|_| 1, 5).unwrap_err(), Error::NotASlice);
    }

    #[test]
    fn escape_skips_dead_bushes() {
        // the middle vertex at level 1 dies, so it is not on the backbone
        let t = PlaneTree::from_levels(&[vec![3], vec![1, 0, 1], vec![1, 1]]).unwrap();
        let s = build_slice(&t).unwrap();
        let x = s.level(1)[0];
        let out = escape_sequences(&s, x, &|_| 1, 3).unwrap();
        assert_eq!(out.killed_at, Some(1));
    }

    fn escape_by_counts(s: &CausalMap, x: u32, u: &dyn Fn(usize) -> u64, depth: usize) -> Option<usize> {
        let k = s.vertex(x).height as usize;
        let bb = |h: usize| -> Vec<u32> { s.level(h as i32).iter().copied().filter(|&v| s.vertex(v).backbone).collect() };
        let level = bb(k);
        let pos = level.iter().position(|&v| v == x).unwrap();
        escape_recursion((level.len() - 1 - pos) as u64, k, depth, u, |i, n| {
            let l = bb(i);
            l[l.len() - n as usize..].iter().map(|&v| s.children(v).filter(|&c| s.vertex(c).backbone).count() as u64).sum()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn escape_counts_match_structure(seed in any::<u64>(), step in 1u64..3) {
            let mut rng = rng_from_seed(seed);
            let t = PlaneTree::sample_gw_survived(&d(&[(0, 0.25), (2, 0.75)]), 9, &mut rng).unwrap();
            let s = build_slice(&t).unwrap();
            let u = move |i: usize| step * (i as u64 % 3) + 1;
            for k in 0..4 {
                let level: Vec<u32> = s.level(k).iter().copied().filter(|&v| s.vertex(v).backbone).collect();
                let mut prev_survived = true;
                for &x in &level {
                    let out = escape_sequences(&s, x, &u, 9).unwrap();
                    prop_assert_eq!(out.killed_at, escape_by_counts(&s, x, &u, 9));
                    let extra = usize::from(!out.survived);
                    prop_assert_eq!(out.y_trace.len(), out.z_trace.len() + extra);
                    // survival can only be lost when moving right
                    prop_assert!(prev_survived || !out.survived);
                    prev_survived = out.survived;
                }
            }
        }

        #[test]
        fn metric_properties(seed in any::<u64>()) {
            let mut rng = rng_from_seed(seed);
            let t = PlaneTree::sample_gw_survived(&d(&[(0, 0.3), (1, 0.2), (3, 0.5)]), 6, &mut rng).unwrap();
            let m = build_causal(&t);
            let n = m.n_vertices() as u32;
            for _ in 0..30 {
                let (a, b, c) = (rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n));
                let ab = distance(&m, a, b).unwrap();
                prop_assert_eq!(ab, distance(&m, b, a).unwrap());
                prop_assert!(ab <= distance(&m, a, c).unwrap() + distance(&m, c, b).unwrap());
                prop_assert!(m.vertex(a).height.abs_diff(m.vertex(b).height) <= ab);
                let g = geodesic(&m, a, b).unwrap();
                prop_assert_eq!(g.length as u32, ab);
                for w in g.vertices.windows(2) {
                    prop_assert!(m.neighbors(w[0]).unwrap().iter().any(|p| p.1 == w[1]));
                }
            }
        }

        #[test]
        fn leafless_formula_matches_bfs(seed in any::<u64>()) {
            let x = d(&[(1, 0.5), (2, 0.3), (3, 0.2)]);
            let mut lazy = crate::cmap::LazyMap::slice(PlaneTree::lazy_survived(&x, seed).unwrap());
            let s = lazy.snapshot(9, 0).unwrap();
            let table = aij_table(&s, 4, 4).unwrap();
            prop_assert!(table.is_monotone());
            prop_assert!(table.get(0, 0) >= 0);
            let mut rng = rng_from_seed(seed ^ 1);
            let mut ls = LeaflessSlice::new(&mut lazy, 20).unwrap();
            let cap = ls.cap();
            prop_assert_eq!(ls.aij_table(4, 4).unwrap(), table);
            let n = s.n_vertices() as u32;
            for _ in 0..40 {
                let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
                let pa = ls.profile(s.vertex(a).tree_vertex.unwrap()).unwrap();
                let pb = ls.profile(s.vertex(b).tree_vertex.unwrap()).unwrap();
                let (f, exact) = (ls.distance(&pa, &pb), distance(&s, a, b).unwrap() as u64);
                prop_assert!(f >= exact);
                let shared = pa.iter().zip(&pb).all(|(x, y)| (x.0 < cap && y.0 < cap) || (x.1 < cap && y.1 < cap));
                if shared {
                    prop_assert_eq!(f, exact);
                }
            }
        }
    }

    #[test]
    fn aij_examples() {
        let mut rng = rng_from_seed(5);
        let t = PlaneTree::sample_gw(&d(&[(2, 1.0)]), 13, &mut rng).unwrap();
        let s = build_slice(&t).unwrap();
        let table = aij_table(&s, 6, 6).unwrap();
        assert_eq!(table.get(0, 0), 0);
        assert!(table.is_monotone());
        assert_eq!(table.plateau(), Some((1, 1, 1)));
        let g = bi_infinite_geodesic(&s, &table).unwrap();
        assert_eq!(g.length, 5 + 1 + 5);
        assert_eq!(aij_table(&s, 7, 6).unwrap_err(), Error::TooShallow);
    }

    #[test]
    fn path_has_no_plateau() {
        let t = PlaneTree::from_levels(&vec![vec![1]; 12]).unwrap();
        let s = build_slice(&t).unwrap();
        let table = aij_table(&s, 5, 5).unwrap();
        assert_eq!(table.get(3, 3), 6);
        assert_eq!(bi_infinite_geodesic(&s, &table).unwrap_err(), Error::NoPlateau);
    }

    #[test]
    fn binary_slice_depth_80() {
        let mut lazy = crate::cmap::LazyMap::slice(PlaneTree::lazy_survived(&d(&[(2, 1.0)]), 1).unwrap());
        lazy.right_ray_at(80).unwrap();
        let mut ls = LeaflessSlice::new(&mut lazy, 80).unwrap();
        let table = ls.aij_table(30, 30).unwrap();
        assert!(table.is_monotone());
        let (i0, j0, k) = table.plateau().unwrap();
        assert_eq!((i0, j0, k), (1, 1, 1));
        let g = ls.bi_infinite_geodesic(&table).unwrap();
        assert_eq!(g.length, 29 + 1 + 29);
    }

    #[test]
    fn sum_iid_moments() {
        let law = d(&[(1, 0.5), (2, 0.5)]);
        let mut rng = rng_from_seed(8);
        let n = 20_000;
        let xs: Vec<f64> = (0..n).map(|_| sum_iid(&law, 10, &mut rng) as f64).collect();
        let m = crate::stats::mean(&xs);
        // mean 15, variance 2.5
        assert!((m - 15.0).abs() < 4.0 * (2.5f64 / n as f64).sqrt());
        assert!((crate::stats::variance(&xs) - 2.5).abs() < 0.15);
        assert_eq!(sum_iid(&law, 0, &mut rng), 0);
    }

    #[test]
    fn random_escape_agrees_with_slices() {
        // survival frequency from the left ray at k = 2, depth 10, u = 1
        let mu = d(&[(0, 0.25), (2, 0.75)]);
        let bold = mu.backbone().unwrap();
        let mut rng = rng_from_seed(12);
        let n = 4000;
        let mut structural = 0;
        let mut scalar = 0;
        for _ in 0..n {
            let t = PlaneTree::sample_gw_survived(&mu, 10, &mut rng).unwrap();
            let s = build_slice(&t).unwrap();
            if escape_sequences(&s, s.left_ray()[2], &|_| 1, 10).unwrap().survived {
                structural += 1;
            }
            if escape_from_left_ray(&bold, 2, &|_| 1, 10, &mut rng).is_none() {
                scalar += 1;
            }
        }
        let (p1, p2) = (structural as f64 / n as f64, scalar as f64 / n as f64);
        let se = (p1 * (1.0 - p1) / n as f64 + p2 * (1.0 - p2) / n as f64).sqrt();
        assert!((p1 - p2).abs() < 4.0 * se, "{p1} vs {p2}");
    }
}
