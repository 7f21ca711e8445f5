//! Stable exploration of the half-plane model coupled to a simple random
//! walk, with pits, flatness and free-vertex witnesses.

use serde::{Deserialize, Serialize};

use crate::cmap::{LazyMap, MapKind};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};
use crate::tree::VertexId;
use crate::walk::{step_with, WalkTrace};

const NOT_EXPLORED: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dir {
    Down,
    Left,
    Up,
    Right,
}

/// An edge of the half-plane with exactly one explored endpoint, seen from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HalfEdge {
    pub owner: VertexId,
    pub to: VertexId,
    pub dir: Dir,
    pub height: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pit {
    pub height: i32,
    pub width: usize,
    /// Index in the boundary traversal of `p_0`.
    pub start: usize,
    /// The leftmost upward half-edge `p_1`.
    pub leftmost_halfedge: HalfEdge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Walk,
    Explore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub clock: usize,
    pub kind: EventKind,
    /// Canonical key of the explored vertex, or of the walk's new target.
    pub vertex: Option<u64>,
    pub pits_open: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    Ancestor,
    FillPit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExploreStep {
    pub clock: usize,
    pub vertex: VertexId,
    pub rule: Rule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub side: Side,
    /// Consecutive unexplored neighbours found on that side, capped.
    pub witness_count: usize,
}

#[derive(Debug)]
enum Source {
    Trace(WalkTrace),
    Online(Rng),
    None,
}

#[derive(Debug)]
pub struct ExplorationState {
    map: LazyMap,
    k: usize,
    clock: usize,
    added_at: Vec<u32>,
    explored: Vec<VertexId>,
    roots: (i64, i64),
    /// Marked oriented edge or half-edge, as `(e-, e+)`.
    marked: (VertexId, VertexId),
    walk_steps_done: usize,
    positions: Vec<VertexId>,
    phi: Vec<usize>,
    source: Source,
    log: Vec<Event>,
    steps: Vec<ExploreStep>,
    pits: Vec<Pit>,
}

impl ExplorationState {
    /// Exploration driving the walk online from the stream of `seed`; the
    /// walk is the one [`crate::walk::run_walk`] produces with that seed.
    pub fn new(map: LazyMap, k: usize, seed: u64) -> Result<Self> {
        Self::start(map, k, Source::Online(rng_from_seed(seed)))
    }

    /// Exploration replaying a walk run on the same map from its root.
    pub fn from_trace(map: LazyMap, k: usize, trace: WalkTrace) -> Result<Self> {
        if trace.positions.first() != Some(&map.root()) {
            return Err(Error::Invalid("trace must start at the root".into()));
        }
        Self::start(map, k, Source::Trace(trace))
    }

    fn start(map: LazyMap, k: usize, source: Source) -> Result<Self> {
        let rho = map.root();
        let stub = map.tree().parent(rho).ok_or(Error::Invalid("root has no stub".into()))?;
        let mut st = Self::blank(map, k, source)?;
        st.insert(stub);
        st.insert(rho);
        st.roots = (0, 0);
        st.positions.push(rho);
        let next = st.next_position(0)?;
        st.marked = (rho, next);
        st.phi.push(0);
        st.refresh()?;
        let key = st.map.tree().key(next);
        st.log.push(Event { clock: 0, kind: EventKind::Walk, vertex: Some(key), pits_open: st.pits.len() });
        Ok(st)
    }

    fn blank(map: LazyMap, k: usize, source: Source) -> Result<Self> {
        if map.kind() != MapKind::HalfPlane {
            return Err(Error::Invalid("exploration runs on the half-plane".into()));
        }
        if k == 0 {
            return Err(Error::Invalid("k must be at least 1".into()));
        }
        Ok(ExplorationState {
            map,
            k,
            clock: 0,
            added_at: Vec::new(),
            explored: Vec::new(),
            roots: (0, 0),
            marked: (0, 0),
            walk_steps_done: 0,
            positions: Vec::new(),
            phi: Vec::new(),
            source,
            log: Vec::new(),
            steps: Vec::new(),
            pits: Vec::new(),
        })
    }

    /// A frozen configuration: the given explored set (which must be stable
    /// and contain whole stub-root pairs) and a marked edge. No walk is attached.
    pub fn from_explored(map: LazyMap, k: usize, explored: &[VertexId], marked: (VertexId, VertexId)) -> Result<Self> {
        let mut st = Self::blank(map, k, Source::None)?;
        for &v in explored {
            st.insert(v);
        }
        let mut idx = Vec::new();
        for &v in explored {
            if let Some(p) = st.map.tree().parent(v) {
                if !st.is_explored(p) {
                    return Err(Error::Invalid(format!("explored set is not stable at {v}")));
                }
            }
            if st.map.tree().height(v) == -1 {
                let root = st.map.tree().children(v).start;
                if !st.is_explored(root) {
                    return Err(Error::Invalid("stub explored without its root".into()));
                }
                idx.push(st.map.tree().tree_index(root).unwrap());
            }
        }
        idx.sort_unstable();
        if idx.is_empty() || idx.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(Error::Invalid("explored roots must be consecutive".into()));
        }
        st.roots = (idx[0], *idx.last().unwrap());
        if !st.is_explored(marked.0) {
            return Err(Error::Invalid("marked edge must start in the explored set".into()));
        }
        st.marked = marked;
        st.positions.push(marked.0);
        st.phi.push(0);
        st.refresh()?;
        Ok(st)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn clock(&self) -> usize {
        self.clock
    }

    pub fn walk_steps_done(&self) -> usize {
        self.walk_steps_done
    }

    pub fn map(&self) -> &LazyMap {
        &self.map
    }

    pub fn marked(&self) -> (VertexId, VertexId) {
        self.marked
    }

    pub fn marked_is_full(&self) -> bool {
        self.is_explored(self.marked.1)
    }

    pub fn explored(&self) -> &[VertexId] {
        &self.explored
    }

    pub fn is_explored(&self, v: VertexId) -> bool {
        self.added_at.get(v as usize).is_some_and(|&c| c != NOT_EXPLORED)
    }

    /// Whether `v` belongs to `E_i`.
    pub fn explored_at(&self, v: VertexId, i: usize) -> bool {
        self.added_at.get(v as usize).is_some_and(|&c| c as usize <= i)
    }

    pub fn log(&self) -> &[Event] {
        &self.log
    }

    pub fn exploration_steps(&self) -> &[ExploreStep] {
        &self.steps
    }

    /// Walk positions `X_0..X_n` reached so far.
    pub fn walk_positions(&self) -> &[VertexId] {
        &self.positions
    }

    /// The log as JSON lines.
    pub fn log_jsonl(&self) -> String {
        let mut s = String::new();
        for e in &self.log {
            s.push_str(&serde_json::to_string(e).expect("event serializes"));
            s.push('\n');
        }
        s
    }

    fn insert(&mut self, v: VertexId) {
        let i = v as usize;
        if self.added_at.len() <= i {
            self.added_at.resize(i + 1, NOT_EXPLORED);
        }
        debug_assert_eq!(self.added_at[i], NOT_EXPLORED);
        self.added_at[i] = self.clock as u32;
        self.explored.push(v);
    }

    fn next_position(&mut self, n: usize) -> Result<VertexId> {
        let from = self.positions[n];
        match &mut self.source {
            Source::Trace(t) => t.positions.get(n + 1).copied().ok_or(Error::NotYetReached(n)),
            Source::Online(rng) => step_with(&mut self.map, from, 1.0, rng, &mut Vec::new()),
            Source::None => Err(Error::NotYetReached(n)),
        }
    }

    fn rotation(&mut self, u: VertexId) -> Result<Vec<(VertexId, Dir)>> {
        let t = self.map.tree_mut();
        let mut r = Vec::new();
        if t.height(u) < 0 {
            let c = t.expand(u)?;
            r.push((c.start, Dir::Up));
            return Ok(r);
        }
        r.push((t.parent(u).expect("non-stub has a parent"), Dir::Down));
        if let Some(l) = t.left_of(u)? {
            r.push((l, Dir::Left));
        }
        for c in t.expand(u)? {
            r.push((c, Dir::Up));
        }
        if let Some(x) = t.right_of(u)? {
            r.push((x, Dir::Right));
        }
        Ok(r)
    }

    /// Half-edges met when going around the explored map from left to
    /// right: at each vertex the rotation is swept clockwise from the edge
    /// we came in by, crossing half-edges, until a full edge is found.
    pub fn boundary(&mut self) -> Result<Vec<HalfEdge>> {
        let t = self.map.tree_mut();
        let first_root = t.row_root(self.roots.0)?.expect("explored root");
        let last_root = t.row_root(self.roots.1)?.expect("explored root");
        let last_stub = t.parent(last_root).unwrap();
        let mut from = t.parent(first_root).unwrap();
        let mut u = first_root;
        let mut out = Vec::new();
        let limit = 16 * self.explored.len() + 16;
        for _ in 0..limit {
            let rot = self.rotation(u)?;
            let h = self.map.tree().height(u);
            let at = rot.iter().position(|&(w, _)| w == from).expect("arrival edge in rotation");
            let mut next = None;
            for s in 1..=rot.len() {
                let (w, dir) = rot[(at + s) % rot.len()];
                if self.is_explored(w) {
                    next = Some(w);
                    break;
                }
                out.push(HalfEdge { owner: u, to: w, dir, height: h });
            }
            let next = next.expect("explored map is connected");
            if u == last_root && next == last_stub {
                return Ok(out);
            }
            from = u;
            u = next;
        }
        Err(Error::Invalid("boundary traversal did not close".into()))
    }

    fn refresh(&mut self) -> Result<()> {
        let b = self.boundary()?;
        self.pits = find_pits(&b);
        Ok(())
    }

    /// Pits of the current explored map, left to right.
    pub fn pits(&self) -> &[Pit] {
        &self.pits
    }

    pub fn is_k_flat(&self) -> bool {
        self.is_flat(self.k)
    }

    pub fn is_flat(&self, k: usize) -> bool {
        self.pits.iter().all(|p| p.width > 2 * k)
    }

    /// Clock value of the `n`-th walk step.
    pub fn phi(&self, n: usize) -> Result<usize> {
        self.phi.get(n).copied().ok_or(Error::NotYetReached(n))
    }

    /// Apply one rule of the exploration.
    pub fn advance(&mut self) -> Result<Event> {
        self.clock += 1;
        let (event, vertex) = if !self.marked_is_full() {
            let mut v = self.marked.1;
            while let Some(p) = self.map.tree().parent(v) {
                if self.is_explored(p) {
                    break;
                }
                v = p;
            }
            self.insert(v);
            if self.map.tree().height(v) == -1 {
                let root = self.map.tree().children(v).start;
                self.insert(root);
                let idx = self.map.tree().tree_index(root).unwrap();
                self.roots = (self.roots.0.min(idx), self.roots.1.max(idx));
            }
            self.steps.push(ExploreStep { clock: self.clock, vertex: v, rule: Rule::Ancestor });
            (EventKind::Explore, v)
        } else if let Some(pit) = self.pits.iter().find(|p| p.width <= 2 * self.k).copied() {
            let v = pit.leftmost_halfedge.to;
            self.insert(v);
            self.steps.push(ExploreStep { clock: self.clock, vertex: v, rule: Rule::FillPit });
            (EventKind::Explore, v)
        } else {
            let n = self.walk_steps_done + 1;
            self.positions.push(self.marked.1);
            let next = match self.next_position(n) {
                Ok(x) => x,
                Err(e) => {
                    self.positions.pop();
                    self.clock -= 1;
                    return Err(e);
                }
            };
            self.marked = (self.marked.1, next);
            self.walk_steps_done = n;
            self.phi.push(self.clock);
            (EventKind::Walk, next)
        };
        self.refresh()?;
        let key = self.map.tree().key(vertex);
        let e = Event { clock: self.clock, kind: event, vertex: Some(key), pits_open: self.pits.len() };
        self.log.push(e);
        Ok(e)
    }

    /// Advance until `n` walk steps have been made.
    pub fn run_until(&mut self, n: usize) -> Result<()> {
        while self.walk_steps_done < n {
            self.advance()?;
        }
        Ok(())
    }

    /// Number of consecutive neighbours of the extreme child of `v` on
    /// `side` lying outside `E_i`, up to `cap`.
    pub fn free_count(&mut self, v: VertexId, side: Side, i: usize, cap: usize) -> Result<usize> {
        let t = self.map.tree_mut();
        let kids = t.expand(v)?;
        if kids.is_empty() {
            return Err(Error::Invalid(format!("vertex {v} has no child")));
        }
        let mut x = if side == Side::Right { kids.end - 1 } else { kids.start };
        for n in 0..cap {
            let next = match side {
                Side::Right => self.map.tree_mut().right_of(x)?,
                Side::Left => self.map.tree_mut().left_of(x)?,
            };
            match next {
                Some(y) if !self.explored_at(y, i) => x = y,
                Some(_) => return Ok(n),
                None => return Ok(cap),
            }
        }
        Ok(cap)
    }

    /// The side on which the vertex explored at step `i` is `k`-free in `E_i`.
    pub fn kfree_witness(&mut self, i: usize) -> Result<Witness> {
        let step = *self
            .steps
            .iter()
            .find(|s| s.clock == i)
            .ok_or_else(|| Error::Invalid(format!("step {i} is not an exploration step")))?;
        if self.map.tree().height(step.vertex) < 0 {
            return Err(Error::Invalid("stub steps have no witness".into()));
        }
        let cap = 4 * self.k + 4;
        for side in [Side::Right, Side::Left] {
            let c = self.free_count(step.vertex, side, i, cap)?;
            if c >= self.k {
                return Ok(Witness { side, witness_count: c });
            }
        }
        Err(Error::NotKFree(i))
    }

    /// Every explored vertex has its parent explored.
    pub fn is_stable(&self) -> bool {
        self.explored.iter().all(|&v| self.map.tree().parent(v).is_none_or(|p| self.is_explored(p)))
    }

    /// Child counts of the vertices explored at nonnegative heights.
    pub fn revealed_counts(&self) -> Vec<usize> {
        self.explored
            .iter()
            .filter(|&&v| self.map.tree().height(v) >= 0 && self.map.tree().is_expanded(v))
            .map(|&v| self.map.tree().children(v).len())
            .collect()
    }
}

/// Pits of a boundary traversal: an upward run at one height `h` between
/// a right half-edge and a left half-edge at height `h + 1`.
pub fn find_pits(b: &[HalfEdge]) -> Vec<Pit> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let p0 = b[i];
        if p0.dir == Dir::Right && i + 1 < b.len() && b[i + 1].dir == Dir::Up && b[i + 1].height == p0.height - 1 {
            let h = p0.height - 1;
            let mut j = i + 1;
            while j < b.len() && b[j].dir == Dir::Up && b[j].height == h {
                j += 1;
            }
            if j < b.len() && b[j].dir == Dir::Left && b[j].height == h + 1 {
                out.push(Pit { height: h, width: j - i - 1, start: i, leftmost_halfedge: b[i + 1] });
                i = j;
                continue;
            }
        }
        i += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offspring::OffspringDistribution;
    use crate::stats::chi_square_gof;
    use crate::tree::PlaneTree;
    use crate::walk::{is_kbad, run_walk};

    fn d(p: &[(usize, f64)]) -> OffspringDistribution {
        OffspringDistribution::new(p).unwrap()
    }

    fn child(t: &PlaneTree, v: VertexId, i: u32) -> VertexId {
        t.children(v).start + i
    }

    fn root(t: &mut PlaneTree, i: i64) -> VertexId {
        t.row_root(i).unwrap().unwrap()
    }

    /// Pit fixture: four explored trees, the third root with `r2`
    /// undiscovered children forming the bottom of a pit.
    fn pit_fixture(r2: usize) -> (LazyMap, Vec<VertexId>) {
        let mut l1 = vec![1, 2, 2, 1];
        l1.extend(vec![1; r2]);
        l1.extend([1, 1, 1]);
        let mut l2 = vec![1, 1, 1, 2, 1, 1];
        l2.extend(vec![1; r2]);
        l2.extend([2, 1, 1]);
        let mut t = PlaneTree::row_from_levels(&[vec![1, 1, 2, r2, 2, 1], l1, l2], 1).unwrap();
        let roots: Vec<VertexId> = (0..4).map(|i| root(&mut t, i)).collect();
        let mut e: Vec<VertexId> = roots.iter().map(|&r| t.parent(r).unwrap()).collect();
        e.extend(&roots);
        let a = child(&t, roots[0], 0);
        let b = child(&t, roots[1], 0);
        let c = child(&t, roots[3], 0);
        e.extend([a, b, c, child(&t, a, 1), child(&t, b, 0), child(&t, c, 0)]);
        (LazyMap::from_row(t), e)
    }

    fn code(b: &[HalfEdge]) -> Vec<String> {
        b.iter()
            .map(|h| {
                let c = match h.dir {
                    Dir::Left => 'L',
                    Dir::Right => 'R',
                    Dir::Up => 'U',
                    Dir::Down => 'D',
                };
                format!("{c}{}", h.height)
            })
            .collect()
    }

    #[test]
    fn pit_fixture_traversal() {
        let (map, e) = pit_fixture(2);
        let marked = (e[4], child(map.tree(), e[4], 0));
        let mut st = ExplorationState::from_explored(map, 1, &e, marked).unwrap();
        let b = st.boundary().unwrap();
        let expected = "L0 L1 U1 L2 U2 U2 U2 R2 U1 R1 U0 U0 U0 L1 L2 U2 U2 R2 R1 U0 R0";
        assert_eq!(code(&b).join(" "), expected);
        let pits = st.pits().to_vec();
        assert_eq!(pits.len(), 1);
        assert_eq!((pits[0].width, pits[0].height), (3, 0));
        assert!(st.is_flat(1));
        assert!(!st.is_flat(2));
        // every half-edge is crossed once
        let mut seen: Vec<(VertexId, VertexId)> = b.iter().map(|h| (h.owner, h.to)).collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), b.len());
    }

    #[test]
    fn narrow_pit_is_filled_before_walking() {
        let (map, e) = pit_fixture(1);
        let marked = (e[4], child(map.tree(), e[4], 0));
        let mut st = ExplorationState::from_explored(map, 1, &e, marked).unwrap();
        assert_eq!(st.pits()[0].width, 2);
        assert!(!st.is_k_flat());
        let target = st.pits()[0].leftmost_halfedge.to;
        let ev = st.advance().unwrap();
        assert_eq!(ev.kind, EventKind::Explore);
        assert!(st.is_explored(target));
        assert_eq!(st.exploration_steps()[0].rule, Rule::FillPit);
        assert!(st.is_stable());
    }

    #[test]
    fn flat_full_edge_walks() {
        let (map, e) = pit_fixture(2);
        let marked = (e[4], child(map.tree(), e[4], 0));
        let mut st = ExplorationState::from_explored(map, 1, &e, marked).unwrap();
        let before = st.explored().len();
        // no walk is attached to a frozen configuration
        assert_eq!(st.advance(), Err(Error::NotYetReached(1)));
        assert_eq!(st.explored().len(), before);
        assert_eq!(st.clock(), 0);
    }

    #[test]
    fn half_edge_with_explored_ancestors() {
        let (map, e) = pit_fixture(2);
        // from the root of tree 1 to its undiscovered right child
        let target = child(map.tree(), e[5], 1);
        let mut st = ExplorationState::from_explored(map, 1, &e, (e[5], target)).unwrap();
        let ev = st.advance().unwrap();
        assert_eq!(ev.kind, EventKind::Explore);
        assert_eq!(st.exploration_steps()[0].vertex, target);
        assert!(st.marked_is_full());
    }

    #[test]
    fn flat_frontier_has_no_pits() {
        let x = d(&[(1, 0.5), (2, 0.5)]);
        let map = LazyMap::half_plane(&x, 1).unwrap();
        let st = ExplorationState::new(map, 1, 1).unwrap();
        assert!(st.pits().is_empty());
        assert!(st.is_flat(5));
    }

    /// Exploration fixture: six trees with a larger explored region.
    fn exploration_fixture() -> (LazyMap, Vec<VertexId>, VertexId, VertexId) {
        let levels = vec![
            vec![1, 1, 2, 2, 2, 1],
            vec![2, 2, 2, 1, 1, 2, 1, 2, 1],
            vec![1, 1, 2, 1, 2, 1, 2, 1, 1, 1, 2, 1, 1, 2],
            vec![2, 1, 1, 1, 2, 1, 1, 1, 1, 1, 2, 1, 1, 2, 1, 2, 1, 1, 2],
        ];
        let mut t = PlaneTree::row_from_levels(&levels, 1).unwrap();
        let roots: Vec<VertexId> = (0..4).map(|i| root(&mut t, i)).collect();
        let mut e: Vec<VertexId> = roots.iter().map(|&r| t.parent(r).unwrap()).collect();
        e.extend(&roots);
        let a = child(&t, roots[0], 0);
        let b = child(&t, roots[1], 0);
        let c = child(&t, roots[3], 0);
        e.extend([a, b, c, child(&t, a, 1), child(&t, b, 0), child(&t, c, 0)]);
        (LazyMap::from_row(t), e, roots[1], c)
    }

    #[test]
    fn exploration_fixture_freeness() {
        let (map, e, x1, x2) = exploration_fixture();
        let mut st = ExplorationState::from_explored(map, 1, &e, (x1, x2)).unwrap();
        assert_eq!(st.free_count(x1, Side::Right, 0, 50).unwrap(), 2);
        assert_eq!(st.free_count(x2, Side::Right, 0, 50).unwrap(), 50);
        assert_eq!(st.free_count(x2, Side::Left, 0, 50).unwrap(), 5);
    }

    #[test]
    fn initial_state() {
        let x = d(&[(1, 0.5), (3, 0.5)]);
        let map = LazyMap::half_plane(&x, 7).unwrap();
        let rho = map.root();
        let st = ExplorationState::new(map, 2, 11).unwrap();
        assert_eq!(st.explored().len(), 2);
        assert_eq!(st.marked().0, rho);
        assert_eq!(st.phi(0), Ok(0));
        assert_eq!(st.phi(1), Err(Error::NotYetReached(1)));
        let again = ExplorationState::new(LazyMap::half_plane(&x, 7).unwrap(), 2, 11).unwrap();
        assert_eq!(again.marked(), st.marked());
    }

    fn check_run(st: &mut ExplorationState, n: usize) {
        let k = st.k();
        let mut last_len = st.explored().len();
        while st.walk_steps_done() < n {
            let ev = st.advance().unwrap();
            let grew = st.explored().len() - last_len;
            assert!(grew <= 2);
            assert!(st.is_stable());
            if ev.kind == EventKind::Walk {
                assert_eq!(grew, 0);
                assert!(st.is_k_flat());
                let m = st.walk_steps_done();
                assert!(st.walk_positions().iter().all(|&x| st.is_explored(x)), "coverage at step {m}");
            } else {
                assert!(grew >= 1);
                let step = *st.exploration_steps().last().unwrap();
                assert_eq!(grew == 2, st.map().tree().height(step.vertex) == -1);
                if st.map().tree().height(step.vertex) >= 0 {
                    st.kfree_witness(ev.clock).unwrap();
                }
            }
            last_len = st.explored().len();
        }
        for m in 0..n {
            let gap = st.phi(m + 1).unwrap() - st.phi(m).unwrap();
            assert!(gap >= 1 && gap <= 7 * k * (m + 1), "phi gap {gap} at {m}");
        }
    }

    #[test]
    fn runs_satisfy_invariants() {
        let x = d(&[(1, 0.5), (2, 0.25), (3, 0.25)]);
        for k in 1..=3 {
            for s in 0..20u64 {
                let map = LazyMap::half_plane(&x, s).unwrap();
                let mut st = ExplorationState::new(map, k, 100 + s).unwrap();
                check_run(&mut st, 200);
            }
        }
    }

    #[test]
    fn online_and_trace_logs_agree() {
        let x = d(&[(1, 0.5), (3, 0.5)]);
        let mut online = ExplorationState::new(LazyMap::half_plane(&x, 3).unwrap(), 2, 42).unwrap();
        online.run_until(150).unwrap();
        let mut map = LazyMap::half_plane(&x, 3).unwrap();
        let r = map.root();
        let trace = run_walk(&mut map, r, 400, 1.0, 42).unwrap();
        let mut replay = ExplorationState::from_trace(map, 2, trace).unwrap();
        replay.run_until(150).unwrap();
        assert_eq!(online.log_jsonl(), replay.log_jsonl());
    }

    #[test]
    fn revealed_counts_follow_the_law() {
        let x = d(&[(1, 0.5), (2, 0.25), (3, 0.25)]);
        let mut counts = [0u64; 4];
        let mut s = 0;
        while counts.iter().sum::<u64>() < 10_000 {
            let mut st = ExplorationState::new(LazyMap::half_plane(&x, s).unwrap(), 2, s).unwrap();
            st.run_until(100).unwrap();
            for c in st.revealed_counts() {
                counts[c] += 1;
            }
            s += 1;
        }
        let chi = chi_square_gof(&counts[1..], &[0.5, 0.25, 0.25], 5.0);
        assert!(chi.p_value > 1e-3, "{chi:?}");
    }

    #[test]
    fn bad_points_are_rare() {
        let x = d(&[(1, 0.5), (3, 0.5)]);
        for (n, k) in [(50usize, 2usize), (100, 3)] {
            let runs = 200;
            let mut bad = 0;
            for s in 0..runs {
                let mut map = LazyMap::half_plane(&x, s).unwrap();
                let r = map.root();
                let t = run_walk(&mut map, r, n, 1.0, s).unwrap();
                let tree = map.tree_mut();
                let mut hit = false;
                for &v in &t.positions {
                    if tree.height(v) >= 0 && is_kbad(tree, k, v).unwrap() {
                        hit = true;
                        break;
                    }
                }
                bad += usize::from(hit);
            }
            let bound = 3.0 * 7.0 * k as f64 * ((n + 1) * (n + 1)) as f64 * 0.5f64.powi((k * k) as i32);
            assert!((bad as f64 / runs as f64) <= bound);
        }
    }
}
