//! Electrical networks on causal maps: effective resistance, a Kirchhoff
//! enumeration oracle, planar duality, spine cutsets and the dual tree.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::seq::IndexedRandom;
use rand::Rng;

use crate::cmap::{CausalMap, LazyMap, MapKind};
use crate::error::{parse_err, Error, Result};
use crate::offspring::OffspringDistribution;
use crate::planar::PlanarPiece;
use crate::tree::{PlaneTree, VertexId};

/// Systems with at most this many unknowns are solved by dense Cholesky.
pub const DENSE_MAX: usize = 2000;

/// Bound on the max-norm residual of every harmonic solve.
pub const SOLVER_TOL: f64 = 1e-10;

/// Largest network accepted by the enumeration oracle.
pub const BRUTE_FORCE_MAX_EDGES: usize = 12;

/// Relative change between two frontier depths accepted as converged.
pub const FRONTIER_TOL: f64 = 0.05;

/// Weighted graph with a source set and a sink set.
#[derive(Debug, Clone, PartialEq)]
pub struct ResistanceNetwork {
    n: usize,
    edges: Vec<(u32, u32, f64)>,
    sources: Vec<u32>,
    sinks: Vec<u32>,
}

fn sorted_set(v: &[u32]) -> Vec<u32> {
    let mut s = v.to_vec();
    s.sort_unstable();
    s.dedup();
    s
}

impl ResistanceNetwork {
    /// Parallel edges are merged by summing conductances; loops are dropped.
    pub fn new(
        n: usize,
        edges: impl IntoIterator<Item = (u32, u32, f64)>,
        sources: &[u32],
        sinks: &[u32],
    ) -> Result<Self> {
        let mut merged: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        for (u, v, c) in edges {
            if u as usize >= n || v as usize >= n {
                return Err(Error::UnknownVertex(u.max(v)));
            }
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Invalid(format!("conductance {c} on edge {u}-{v}")));
            }
            if u != v {
                *merged.entry((u.min(v), u.max(v))).or_insert(0.0) += c;
            }
        }
        let sources = sorted_set(sources);
        let sinks = sorted_set(sinks);
        if sources.is_empty() || sinks.is_empty() {
            return Err(Error::Invalid("empty terminal set".into()));
        }
        if let Some(&v) = sources.iter().chain(&sinks).find(|&&v| v as usize >= n) {
            return Err(Error::UnknownVertex(v));
        }
        if sources.iter().any(|v| sinks.binary_search(v).is_ok()) {
            return Err(Error::Invalid("terminal sets overlap".into()));
        }
        let edges = merged.into_iter().map(|((u, v), c)| (u, v, c)).collect();
        Ok(ResistanceNetwork { n, edges, sources, sinks })
    }

    /// Unit conductance on every listed edge.
    pub fn unit(n: usize, edges: &[(u32, u32)], sources: &[u32], sinks: &[u32]) -> Result<Self> {
        Self::new(n, edges.iter().map(|&(u, v)| (u, v, 1.0)), sources, sinks)
    }

    /// Unit-resistance network of a causal map.
    pub fn from_map(m: &CausalMap, sources: &[u32], sinks: &[u32]) -> Result<Self> {
        Self::new(m.n_vertices(), map_edges(m, |_| true), sources, sinks)
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    /// Merged edges `(u, v, conductance)` with `u < v`.
    pub fn edges(&self) -> &[(u32, u32, f64)] {
        &self.edges
    }

    pub fn sources(&self) -> &[u32] {
        &self.sources
    }

    pub fn sinks(&self) -> &[u32] {
        &self.sinks
    }

    pub fn conductance(&self, u: u32, v: u32) -> f64 {
        let key = (u.min(v), u.max(v));
        self.edges
            .binary_search_by(|e| (e.0, e.1).cmp(&key))
            .map(|i| self.edges[i].2)
            .unwrap_or(0.0)
    }

    /// Copy with one more edge of conductance `c`.
    pub fn with_edge(&self, u: u32, v: u32, c: f64) -> Result<Self> {
        let extra = std::iter::once((u, v, c));
        Self::new(self.n, self.edges.iter().copied().chain(extra), &self.sources, &self.sinks)
    }

    /// Same graph with new terminals.
    pub fn with_terminals(&self, sources: &[u32], sinks: &[u32]) -> Result<Self> {
        Self::new(self.n, self.edges.iter().copied(), sources, sinks)
    }

    /// `# nodes`, `# sources` and `# sinks` header lines, then `u v conductance` per edge.
    pub fn to_text(&self) -> String {
        let join = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
        let mut s = String::new();
        let _ = writeln!(s, "# nodes {}", self.n);
        let _ = writeln!(s, "# sources {}", join(&self.sources));
        let _ = writeln!(s, "# sinks {}", join(&self.sinks));
        for &(u, v, c) in &self.edges {
            let _ = writeln!(s, "{u} {v} {c}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut n = None;
        let (mut sources, mut sinks) = (Vec::new(), Vec::new());
        let mut edges = Vec::new();
        let ids = |line: usize, rest: &str| -> Result<Vec<u32>> {
            rest.split_whitespace()
                .map(|t| t.parse().map_err(|_| parse_err(line, format!("bad vertex `{t}`"))))
                .collect()
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.trim();
            if l.is_empty() {
                continue;
            }
            if let Some(h) = l.strip_prefix('#') {
                let h = h.trim();
                if let Some(r) = h.strip_prefix("nodes") {
                    n = Some(r.trim().parse::<usize>().map_err(|_| parse_err(line, "bad node count"))?);
                } else if let Some(r) = h.strip_prefix("sources") {
                    sources = ids(line, r)?;
                } else if let Some(r) = h.strip_prefix("sinks") {
                    sinks = ids(line, r)?;
                }
                continue;
            }
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 3 {
                return Err(parse_err(line, "expected `u v conductance`"));
            }
            let u = f[0].parse().map_err(|_| parse_err(line, "bad endpoint"))?;
            let v = f[1].parse().map_err(|_| parse_err(line, "bad endpoint"))?;
            let c = f[2].parse().map_err(|_| parse_err(line, "bad conductance"))?;
            edges.push((u, v, c));
        }
        let n = n.ok_or_else(|| parse_err(1, "missing `# nodes` header"))?;
        Self::new(n, edges, &sources, &sinks)
    }

    fn adjacency(&self) -> Vec<Vec<(u32, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v, c) in &self.edges {
            adj[u as usize].push((v, c));
            adj[v as usize].push((u, c));
        }
        adj
    }
}

/// Unit edges of `m` between vertices accepted by `keep`.
fn map_edges(m: &CausalMap, keep: impl Fn(u32) -> bool) -> Vec<(u32, u32, f64)> {
    m.edges()
        .iter()
        .filter(|e| keep(e.u) && keep(e.v))
        .map(|e| (e.u, e.v, 1.0))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Solver {
    /// Dense Cholesky up to [`DENSE_MAX`] unknowns, conjugate gradient above.
    #[default]
    Auto,
    Dense,
    ConjugateGradient,
}

/// Potentials of a harmonic solve with value 1 on the sources and 0 on the sinks.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub values: Vec<f64>,
    pub current: f64,
    pub residual: f64,
}

impl Potential {
    pub fn resistance(&self) -> f64 {
        1.0 / self.current
    }
}

pub fn effective_resistance(net: &ResistanceNetwork) -> Result<f64> {
    effective_resistance_with(net, Solver::Auto)
}

pub fn effective_resistance_with(net: &ResistanceNetwork, solver: Solver) -> Result<f64> {
    Ok(harmonic_potential(net, solver)?.resistance())
}

/// Solve the Dirichlet problem on the component of the sources.
/// Vertices outside that component get potential NaN.
pub fn harmonic_potential(net: &ResistanceNetwork, solver: Solver) -> Result<Potential> {
    let adj = net.adjacency();
    let mut role = vec![0u8; net.n];
    for &a in &net.sources {
        role[a as usize] = 1;
    }
    for &z in &net.sinks {
        role[z as usize] = 2;
    }
    let mut seen = vec![false; net.n];
    let mut queue: VecDeque<u32> = net.sources.iter().copied().collect();
    for &a in &net.sources {
        seen[a as usize] = true;
    }
    while let Some(u) = queue.pop_front() {
        for &(w, _) in &adj[u as usize] {
            if !seen[w as usize] {
                seen[w as usize] = true;
                queue.push_back(w);
            }
        }
    }
    if !net.sinks.iter().any(|&z| seen[z as usize]) {
        return Err(Error::DisconnectedTerminals);
    }
    let mut index = vec![usize::MAX; net.n];
    let mut free = Vec::new();
    for v in 0..net.n {
        if seen[v] && role[v] == 0 {
            index[v] = free.len();
            free.push(v);
        }
    }
    let k = free.len();
    let mut diag = vec![0.0; k];
    let mut off: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
    let mut b = vec![0.0; k];
    for (i, &v) in free.iter().enumerate() {
        for &(w, c) in &adj[v] {
            diag[i] += c;
            match role[w as usize] {
                1 => b[i] += c,
                2 => {}
                _ => off[i].push((index[w as usize], c)),
            }
        }
    }
    let x = match (solver, k) {
        (_, 0) => Vec::new(),
        (Solver::Dense, _) => solve_dense(&diag, &off, &b)?,
        (Solver::Auto, k) if k <= DENSE_MAX => solve_dense(&diag, &off, &b)?,
        _ => solve_cg(&diag, &off, &b)?,
    };
    let mut residual: f64 = 0.0;
    for i in 0..k {
        let ax = diag[i] * x[i] - off[i].iter().map(|&(j, c)| c * x[j]).sum::<f64>();
        residual = residual.max((ax - b[i]).abs());
    }
    if !(residual <= SOLVER_TOL) {
        return Err(Error::SolverFailure(format!("residual {residual:e}")));
    }
    let mut values = vec![f64::NAN; net.n];
    for v in 0..net.n {
        if seen[v] {
            values[v] = match role[v] {
                1 => 1.0,
                2 => 0.0,
                _ => x[index[v]],
            };
        }
    }
    let mut current = 0.0;
    for &a in &net.sources {
        for &(w, c) in &adj[a as usize] {
            current += c * (1.0 - values[w as usize]);
        }
    }
    if !(current > 0.0) {
        return Err(Error::SolverFailure(format!("non-positive current {current:e}")));
    }
    Ok(Potential { values, current, residual })
}

fn solve_dense(diag: &[f64], off: &[Vec<(usize, f64)>], b: &[f64]) -> Result<Vec<f64>> {
    let k = diag.len();
    let mut m = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        m[(i, i)] = diag[i];
        for &(j, c) in &off[i] {
            m[(i, j)] -= c;
        }
    }
    let chol = m.cholesky().ok_or_else(|| Error::SolverFailure("matrix not positive definite".into()))?;
    Ok(chol.solve(&DVector::from_column_slice(b)).as_slice().to_vec())
}

fn solve_cg(diag: &[f64], off: &[Vec<(usize, f64)>], b: &[f64]) -> Result<Vec<f64>> {
    let k = diag.len();
    let apply = |x: &[f64], out: &mut [f64]| {
        for i in 0..k {
            out[i] = diag[i] * x[i] - off[i].iter().map(|&(j, c)| c * x[j]).sum::<f64>();
        }
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut x = vec![0.0; k];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; k];
    let mut rz = dot(&r, &z);
    let bnorm = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let target = 1e-3 * SOLVER_TOL * bnorm;
    for _ in 0..(20 * k + 1000) {
        if r.iter().all(|v| v.abs() <= target) {
            return Ok(x);
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolverFailure("conjugate gradient breakdown".into()));
        }
        let alpha = rz / pap;
        for i in 0..k {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..k {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..k {
            p[i] = z[i] + beta * p[i];
        }
    }
    if r.iter().all(|v| v.abs() <= SOLVER_TOL) {
        return Ok(x);
    }
    Err(Error::SolverFailure("conjugate gradient did not converge".into()))
}

/// Effective resistance by the matrix-tree theorem: weighted spanning
/// forests of the graph with the sources and the sinks each contracted to a
/// point.
pub fn effective_resistance_bruteforce(net: &ResistanceNetwork) -> Result<f64> {
    if net.edges.len() > BRUTE_FORCE_MAX_EDGES {
        return Err(Error::TooLarge(net.edges.len()));
    }
    // label 0 = sources, 1 = sinks, others renumbered from 2
    let mut label = vec![u32::MAX; net.n];
    for &a in &net.sources {
        label[a as usize] = 0;
    }
    for &z in &net.sinks {
        label[z as usize] = 1;
    }
    let mut next = 2;
    for l in label.iter_mut() {
        if *l == u32::MAX {
            *l = next;
            next += 1;
        }
    }
    let mut edges: Vec<(u32, u32, f64)> = net
        .edges
        .iter()
        .map(|&(u, v, c)| (label[u as usize], label[v as usize], c))
        .filter(|e| e.0 != e.1)
        .collect();
    // keep the component of the sources
    let nl = next as usize;
    let mut comp = vec![false; nl];
    comp[0] = true;
    let mut changed = true;
    while changed {
        changed = false;
        for &(u, v, _) in &edges {
            if comp[u as usize] != comp[v as usize] {
                comp[u as usize] = true;
                comp[v as usize] = true;
                changed = true;
            }
        }
    }
    if !comp[1] {
        return Err(Error::DisconnectedTerminals);
    }
    edges.retain(|e| comp[e.0 as usize]);
    let nodes = comp.iter().filter(|&&c| c).count();
    let trees = spanning_weight(nl, &edges, nodes, None);
    let forests = spanning_weight(nl, &edges, nodes - 1, Some((0, 1)));
    Ok(forests / trees)
}

/// Sum over spanning trees of the product of conductances, with an optional
/// pair of labels identified.
fn spanning_weight(nl: usize, edges: &[(u32, u32, f64)], nodes: usize, merge: Option<(u32, u32)>) -> f64 {
    let m = edges.len();
    let need = nodes - 1;
    let mut total = 0.0;
    let find = |p: &mut Vec<u32>, mut x: u32| {
        while p[x as usize] != x {
            x = p[x as usize];
        }
        x
    };
    for mask in 0u32..(1u32 << m) {
        if mask.count_ones() as usize != need {
            continue;
        }
        let mut parent: Vec<u32> = (0..nl as u32).collect();
        if let Some((a, b)) = merge {
            parent[b as usize] = a;
        }
        let mut w = 1.0;
        let mut ok = true;
        for (i, &(u, v, c)) in edges.iter().enumerate() {
            if mask >> i & 1 == 0 {
                continue;
            }
            let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
            if ru == rv {
                ok = false;
                break;
            }
            parent[ru as usize] = rv;
            w *= c;
        }
        if ok {
            total += w;
        }
    }
    total
}

/// Dual network of a plane piece with unit resistances. The outer face is
/// split into `a*` (node 0) and `z*` (node 1) along its boundary: darts from
/// the first corner at `a` up to the first corner at `z` go to `a*`, the
/// others to `z*`. Inner faces follow in face order.
pub fn dual_network(piece: &PlanarPiece, a: u32, z: u32) -> Result<ResistanceNetwork> {
    let faces = piece.faces();
    let outer = piece
        .outer_face(&faces)
        .ok_or_else(|| Error::Invalid("piece has no coordinates to locate the outer face".into()))?;
    let boundary = &faces.boundary[outer as usize];
    let ia = boundary.iter().position(|&d| piece.tail(d) == a).ok_or(Error::TerminalsNotOuter(a))?;
    let iz = boundary.iter().position(|&d| piece.tail(d) == z).ok_or(Error::TerminalsNotOuter(z))?;
    let len = boundary.len();
    let mut side: HashMap<u32, u32> = HashMap::new();
    for (i, &d) in boundary.iter().enumerate() {
        let from_a = (i + len - ia) % len;
        let from_a_to_z = (iz + len - ia) % len;
        side.insert(d, if from_a < from_a_to_z { 0 } else { 1 });
    }
    let mut node_of_face = vec![u32::MAX; faces.boundary.len()];
    let mut next = 2;
    for (f, slot) in node_of_face.iter_mut().enumerate() {
        if f as u32 != outer {
            *slot = next;
            next += 1;
        }
    }
    let node = |d: u32| {
        let f = faces.of_dart[d as usize];
        if f == outer {
            side[&d]
        } else {
            node_of_face[f as usize]
        }
    };
    let edges: Vec<(u32, u32, f64)> = (0..piece.edges().len() as u32)
        .map(|e| (node(2 * e), node(2 * e + 1), 1.0))
        .collect();
    ResistanceNetwork::new(next as usize, edges, &[0], &[1])
}

/// Resistance between `x` and the level at height `depth`, in the part of
/// `m` at or below that height.
pub fn frontier_resistance(m: &CausalMap, x: u32, depth: i32) -> Result<f64> {
    if depth > m.max_height() || m.vertex(x).height >= depth {
        return Err(Error::TooShallow);
    }
    let keep = |v: u32| m.vertex(v).height <= depth;
    let net = ResistanceNetwork::new(m.n_vertices(), map_edges(m, keep), &[x], m.level(depth))?;
    effective_resistance(&net)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierEstimate {
    pub near: f64,
    pub far: f64,
    pub rel_change: f64,
    pub converged: bool,
}

/// Frontier resistance at two depths and their relative change.
pub fn frontier_convergence(m: &CausalMap, x: u32, near: i32, far: i32) -> Result<FrontierEstimate> {
    let rn = frontier_resistance(m, x, near)?;
    let rf = frontier_resistance(m, x, far)?;
    let rel_change = (rn - rf).abs() / rf.abs().max(f64::MIN_POSITIVE);
    Ok(FrontierEstimate { near: rn, far: rf, rel_change, converged: rel_change < FRONTIER_TOL })
}

/// Walk along the backbone from the root and the separating sets built on it.
#[derive(Debug, Clone, PartialEq)]
pub struct SpineDecomposition {
    pub spine: Vec<VertexId>,
    /// Backbone children of `x_n` left of `x_{n+1}`, for every `n` with a successor.
    pub left_counts: Vec<usize>,
    pub right_counts: Vec<usize>,
    /// Pairs `(h_k, h'_k)`.
    pub cut_heights: Vec<(usize, usize)>,
    /// The first sets `A_k`, each running up to the height of the last spine vertex.
    pub cutsets: Vec<Vec<VertexId>>,
}

fn ensure_flags(t: &mut PlaneTree) -> Result<()> {
    if !t.has_backbone_flags() {
        t.mark_backbone_to_cap();
    }
    if !t.on_backbone(t.root()) {
        return Err(Error::NoBackbone);
    }
    Ok(())
}

/// Non-backtracking walk of `steps` steps on the backbone, stopping early
/// at a backbone vertex without backbone children. Only the first
/// `max_cutsets` sets `A_k` are built, since each one runs up to the top of
/// the spine.
pub fn spine_walk<R: Rng + ?Sized>(
    t: &mut PlaneTree,
    steps: usize,
    max_cutsets: usize,
    rng: &mut R,
) -> Result<SpineDecomposition> {
    ensure_flags(t)?;
    let mut spine = vec![t.root()];
    for _ in 0..steps {
        let x = *spine.last().unwrap();
        match t.backbone_children(x)?.choose(rng) {
            Some(&c) => spine.push(c),
            None => break,
        }
    }
    SpineDecomposition::from_spine(t, spine, max_cutsets)
}

fn ray(t: &mut PlaneTree, from: VertexId, top: i32, leftmost: bool) -> Result<Vec<VertexId>> {
    let mut out = vec![from];
    let mut v = from;
    while t.height(v) < top {
        let bc = t.backbone_children(v)?;
        let next = if leftmost { bc.first() } else { bc.last() };
        match next {
            Some(&c) => {
                out.push(c);
                v = c;
            }
            None => break,
        }
    }
    Ok(out)
}

impl SpineDecomposition {
    /// Decomposition along a given backbone path starting at the root.
    pub fn from_spine(t: &mut PlaneTree, spine: Vec<VertexId>, max_cutsets: usize) -> Result<Self> {
        ensure_flags(t)?;
        if spine.first() != Some(&t.root()) {
            return Err(Error::Invalid("spine must start at the root".into()));
        }
        let (mut left_counts, mut right_counts) = (Vec::new(), Vec::new());
        for w in spine.windows(2) {
            let bc = t.backbone_children(w[0])?;
            let pos = bc
                .iter()
                .position(|&c| c == w[1])
                .ok_or_else(|| Error::Invalid(format!("{} is not a backbone child of {}", w[1], w[0])))?;
            left_counts.push(pos);
            right_counts.push(bc.len() - 1 - pos);
        }
        let mut cut_heights = Vec::new();
        let mut start = 0;
        loop {
            let Some(h) = (start..left_counts.len()).find(|&n| left_counts[n] > 0) else { break };
            let Some(hp) = (h + 1..right_counts.len()).find(|&n| right_counts[n] > 0) else { break };
            cut_heights.push((h, hp));
            start = hp + 1;
        }
        let top = t.height(*spine.last().unwrap());
        let mut cutsets = Vec::with_capacity(cut_heights.len());
        for &(h, hp) in cut_heights.iter().take(max_cutsets) {
            let mut set = ray(t, spine[h], top, true)?;
            set.extend(&spine[h + 1..hp]);
            set.extend(ray(t, spine[hp], top, false)?);
            set.sort_unstable();
            set.dedup();
            cutsets.push(set);
        }
        Ok(SpineDecomposition { spine, left_counts, right_counts, cut_heights, cutsets })
    }

    /// Number of cutsets `A_k` with `h'_k < n`.
    pub fn cutsets_below(&self, n: usize) -> usize {
        self.cut_heights.iter().filter(|c| c.1 < n).count()
    }

    /// Counts of the pairs `(L_n, R_n)`.
    pub fn pair_counts(&self) -> BTreeMap<(usize, usize), u64> {
        let mut out = BTreeMap::new();
        for (&l, &r) in self.left_counts.iter().zip(&self.right_counts) {
            *out.entry((l, r)).or_insert(0) += 1;
        }
        out
    }

    /// Vertices of the slice `s` in the strip between `A_k` and `A_{k+1}`,
    /// both included. Only even `k` are supported.
    pub fn strip(&self, s: &CausalMap, k: usize) -> Result<Vec<u32>> {
        if k % 2 == 1 {
            return Err(Error::Invalid("strips are taken between A_k and A_k+1 for even k".into()));
        }
        if k + 1 >= self.cutsets.len() {
            return Err(Error::TooFewCutsets(k + 2));
        }
        let lo = map_ids(s, &self.cutsets[k]);
        let hi = map_ids(s, &self.cutsets[k + 1]);
        let mut tag = vec![0u8; s.n_vertices()];
        for &v in &lo {
            tag[v as usize] = 1;
        }
        for &v in &hi {
            tag[v as usize] = 2;
        }
        let mut adj = vec![Vec::new(); s.n_vertices()];
        for e in s.edges() {
            adj[e.u as usize].push(e.v);
            adj[e.v as usize].push(e.u);
        }
        let mut out: Vec<u32> = lo.iter().chain(&hi).copied().collect();
        let mut seen = vec![false; s.n_vertices()];
        for start in 0..s.n_vertices() {
            if tag[start] != 0 || seen[start] {
                continue;
            }
            let mut comp = vec![start as u32];
            let mut touches = 0u8;
            seen[start] = true;
            let mut i = 0;
            while i < comp.len() {
                let u = comp[i];
                i += 1;
                for &w in &adj[u as usize] {
                    match tag[w as usize] {
                        0 if !seen[w as usize] => {
                            seen[w as usize] = true;
                            comp.push(w);
                        }
                        0 => {}
                        t => touches |= t,
                    }
                }
            }
            if touches == 3 {
                out.extend(comp);
            }
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }
}

fn map_ids(s: &CausalMap, tree_ids: &[VertexId]) -> Vec<u32> {
    tree_ids.iter().filter_map(|&t| s.of_tree(t)).collect()
}

/// Law of `(L_n, R_n)` along the spine for backbone law `bb`.
pub fn spine_pair_prob(bb: &OffspringDistribution, l: usize, r: usize) -> f64 {
    let c = l + r + 1;
    bb.weight(c) / c as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutsetBound {
    /// `R(A_{2i} <-> A_{2i+1})` for each pair below `x_n`.
    pub terms: Vec<f64>,
    pub lower: f64,
    /// `R(x_n <-> boundary rays)`.
    pub direct: f64,
}

/// Series lower bound from the cutsets below `x_n`, next to the direct value.
/// `s` must be the slice of the tree the decomposition was built on.
pub fn cutset_lower_bound(s: &CausalMap, dec: &SpineDecomposition, n: usize) -> Result<CutsetBound> {
    if s.kind() != MapKind::Slice {
        return Err(Error::NotASlice);
    }
    let m = dec.cutsets_below(n).min(dec.cutsets.len());
    if m < 2 {
        return Err(Error::TooFewCutsets(2));
    }
    let xt = *dec.spine.get(n).ok_or(Error::TooShallow)?;
    let x = s.of_tree(xt).ok_or(Error::UnknownVertex(xt))?;
    let edges = map_edges(s, |_| true);
    let mut terms = Vec::with_capacity(m / 2);
    for i in 0..m / 2 {
        let a = map_ids(s, &dec.cutsets[2 * i]);
        let z = map_ids(s, &dec.cutsets[2 * i + 1]);
        let net = ResistanceNetwork::new(s.n_vertices(), edges.iter().copied(), &a, &z)?;
        terms.push(effective_resistance(&net)?);
    }
    let direct = if s.on_boundary(x) {
        0.0
    } else {
        let rays: Vec<u32> = s.left_ray().iter().chain(s.right_ray()).copied().collect();
        let net = ResistanceNetwork::new(s.n_vertices(), edges, &[x], &rays)?;
        effective_resistance(&net)?
    };
    Ok(CutsetBound { lower: terms.iter().sum(), terms, direct })
}

/// `R(x_n <-> boundary rays)` for `n = 0..=n_max` on a window of a lazy
/// slice: heights up to `top`, and at each height the vertices within
/// `half_width` level steps of the spine vertex. Rays falling inside the
/// window are grounded.
pub fn spine_resistance_profile(
    s: &mut LazyMap,
    spine: &[VertexId],
    n_max: usize,
    half_width: usize,
    top: usize,
) -> Result<Vec<f64>> {
    if s.kind() != MapKind::Slice {
        return Err(Error::NotASlice);
    }
    if spine.len() <= top.max(n_max) {
        return Err(Error::TooShallow);
    }
    let mut id: HashMap<VertexId, u32> = HashMap::new();
    let mut levels: Vec<Vec<VertexId>> = Vec::with_capacity(top + 1);
    let mut grounded = Vec::new();
    for h in 0..=top {
        let (lr, rr) = (s.left_ray_at(h)?, s.right_ray_at(h)?);
        let x = spine[h];
        let mut left = Vec::new();
        let mut v = x;
        while v != lr && left.len() < half_width {
            v = s.tree_mut().left_of(v)?.ok_or(Error::InsufficientMaterialization(v))?;
            left.push(v);
        }
        let mut row: Vec<VertexId> = left.into_iter().rev().collect();
        row.push(x);
        let mut v = x;
        let mut steps = 0;
        while v != rr && steps < half_width {
            v = s.tree_mut().right_of(v)?.ok_or(Error::InsufficientMaterialization(v))?;
            row.push(v);
            steps += 1;
        }
        for &v in &row {
            let i = id.len() as u32;
            id.insert(v, i);
            if v == lr || v == rr {
                grounded.push(i);
            }
        }
        levels.push(row);
    }
    let mut edges = Vec::new();
    for (h, row) in levels.iter().enumerate() {
        for w in row.windows(2) {
            edges.push((id[&w[0]], id[&w[1]], 1.0));
        }
        if h > 0 {
            for &v in row {
                if let Some(&p) = s.tree().parent(v).and_then(|p| id.get(&p)) {
                    edges.push((p, id[&v], 1.0));
                }
            }
        }
    }
    let n_nodes = id.len();
    let mut out = Vec::with_capacity(n_max + 1);
    for &x in &spine[..=n_max] {
        let xi = id[&x];
        if grounded.contains(&xi) {
            out.push(0.0);
            continue;
        }
        let net = ResistanceNetwork::new(n_nodes, edges.iter().copied(), &[xi], &grounded)?;
        out.push(effective_resistance(&net)?);
    }
    Ok(out)
}

/// Tree of faces following `T[v0]_bdd`, one node per tree vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct DualTree {
    /// Face index (in `s.planar_piece().faces()`) of each node.
    pub faces: Vec<u32>,
    /// Map vertex whose bottom-left corner the node sits in.
    pub tracks: Vec<u32>,
    pub parent: Vec<Option<usize>>,
    depth: Vec<usize>,
    node_of: HashMap<u32, usize>,
}

impl DualTree {
    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.parent
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|p| (p, i)))
            .collect()
    }

    /// Node sitting at the bottom-left corner of map vertex `v`.
    pub fn node_of(&self, v: u32) -> Option<usize> {
        self.node_of.get(&v).copied()
    }

    pub fn distance(&self, mut a: usize, mut b: usize) -> usize {
        let mut d = 0;
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].unwrap();
            d += 1;
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].unwrap();
            d += 1;
        }
        while a != b {
            a = self.parent[a].unwrap();
            b = self.parent[b].unwrap();
            d += 2;
        }
        d
    }
}

/// Vertices of `T[v0]_bdd` in the slice: descendants of `v0` reached without
/// passing through a vertex with more than `c_max` children.
pub fn bounded_subtree(s: &CausalMap, v0: u32, c_max: usize) -> Vec<u32> {
    let mut out = vec![v0];
    let mut i = 0;
    while i < out.len() {
        let u = out[i];
        i += 1;
        let ch: Vec<u32> = s.children(u).collect();
        if ch.len() <= c_max {
            out.extend(ch);
        }
    }
    out
}

/// Dual tree of a slice: the node of `u` is the face at its bottom-left
/// corner; the first child hangs below `u` and each later child below its
/// left sibling, so branching points are passed over the top.
pub fn dual_tree(s: &CausalMap, v0: u32, c_max: usize) -> Result<DualTree> {
    if s.kind() != MapKind::Slice {
        return Err(Error::NotASlice);
    }
    if v0 as usize >= s.n_vertices() {
        return Err(Error::UnknownVertex(v0));
    }
    if v0 == s.root() || s.left_ray().contains(&v0) {
        return Err(Error::Invalid("v0 must lie off the left boundary".into()));
    }
    let sub = bounded_subtree(s, v0, c_max);
    if !sub.iter().any(|&v| s.vertex(v).height == s.max_height()) {
        return Err(Error::TruncationDies);
    }
    let piece = s.planar_piece();
    let faces = piece.faces();
    let mut tree = DualTree {
        faces: Vec::with_capacity(sub.len()),
        tracks: Vec::with_capacity(sub.len()),
        parent: Vec::with_capacity(sub.len()),
        depth: Vec::with_capacity(sub.len()),
        node_of: HashMap::with_capacity(sub.len()),
    };
    for &u in &sub {
        let p = s.parent(u).expect("non-root vertex");
        let e = s.rotation(u)[0];
        let face = faces.of_dart[piece.dart(e, p) as usize];
        let (parent, depth) = if u == v0 {
            (None, 0)
        } else {
            let siblings: Vec<u32> = s.children(p).collect();
            let k = siblings.iter().position(|&c| c == u).unwrap();
            let up = if k == 0 { p } else { siblings[k - 1] };
            let pi = tree.node_of[&up];
            (Some(pi), tree.depth[pi] + 1)
        };
        tree.node_of.insert(u, tree.faces.len());
        tree.faces.push(face);
        tree.tracks.push(u);
        tree.parent.push(parent);
        tree.depth.push(depth);
    }
    Ok(tree)
}
