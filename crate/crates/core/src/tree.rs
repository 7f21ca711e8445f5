//! Plane trees stored in an arena, grown lazily from per-vertex seeds.
//!
//! Every vertex carries a seed; its children are drawn from a generator keyed
//! by that seed and each child seed is derived from the parent seed and the
//! child rank. The realized tree is therefore independent of the order in
//! which vertices get expanded.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::ops::Range;
use std::sync::Arc;

use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{parse_err, Error, Result};
use crate::offspring::{DerivedLaws, OffspringDistribution};
use crate::rng::{mix64, rng_from_seed, zigzag};

pub type VertexId = u32;

/// Marker for "no vertex".
pub const NONE: VertexId = u32::MAX;
const UNKNOWN: u32 = u32::MAX - 1;
const UNEXPANDED: u32 = u32::MAX;
const STUB_SALT: u64 = 0x5354_5542;

pub const DEFAULT_SIZE_LIMIT: usize = 10_000_000;

/// How the children of a vertex are generated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Law {
    /// Unconditioned offspring law.
    Plain,
    /// Backbone vertex of a tree conditioned to survive.
    Backbone,
    /// Root of a finite bush hanging off the backbone.
    Bush,
    /// Children fixed at construction.
    Frozen,
}

#[derive(Clone, Debug)]
struct Node {
    parent: VertexId,
    first_child: VertexId,
    n_children: u32,
    height: i32,
    rank: u32,
    seed: u64,
    law: Law,
    backbone: bool,
    left: u32,
    right: u32,
}

#[derive(Debug)]
struct Laws {
    mu: OffspringDistribution,
    derived: Option<DerivedLaws>,
}

#[derive(Clone, Debug)]
enum Roots {
    Single(VertexId),
    Row {
        master: u64,
        lazy: bool,
        first_index: i64,
        ids: VecDeque<VertexId>,
        index_of: HashMap<VertexId, i64>,
    },
}

/// A rooted plane tree, or a left-to-right row of them with a stub below each root.
#[derive(Clone, Debug)]
pub struct PlaneTree {
    nodes: Vec<Node>,
    laws: Option<Arc<Laws>>,
    roots: Roots,
    depth_cap: i32,
    size_limit: usize,
}

impl PlaneTree {
    fn empty(laws: Option<Arc<Laws>>, roots: Roots) -> Self {
        PlaneTree { nodes: Vec::new(), laws, roots, depth_cap: 0, size_limit: DEFAULT_SIZE_LIMIT }
    }

    fn push(&mut self, node: Node) -> Result<VertexId> {
        if self.nodes.len() >= self.size_limit {
            return Err(Error::SizeLimit(self.size_limit));
        }
        self.nodes.push(node);
        Ok((self.nodes.len() - 1) as VertexId)
    }

    fn leaf(parent: VertexId, height: i32, rank: u32, seed: u64, law: Law, backbone: bool) -> Node {
        Node {
            parent,
            first_child: NONE,
            n_children: UNEXPANDED,
            height,
            rank,
            seed,
            law,
            backbone,
            left: UNKNOWN,
            right: UNKNOWN,
        }
    }

    /// An unconditioned Galton-Watson tree, materialized on demand.
    pub fn lazy(d: &OffspringDistribution, seed: u64) -> Self {
        let laws = Arc::new(Laws { mu: d.clone(), derived: DerivedLaws::new(d).ok() });
        let mut t = Self::empty(Some(laws), Roots::Single(0));
        t.nodes.push(Self::leaf(NONE, 0, 0, seed, Law::Plain, false));
        t.nodes[0].left = NONE;
        t.nodes[0].right = NONE;
        t
    }

    /// A tree conditioned to survive, materialized on demand, with backbone flags.
    pub fn lazy_survived(d: &OffspringDistribution, seed: u64) -> Result<Self> {
        let derived = DerivedLaws::new(d)?;
        let laws = Arc::new(Laws { mu: d.clone(), derived: Some(derived) });
        let mut t = Self::empty(Some(laws), Roots::Single(0));
        t.nodes.push(Self::leaf(NONE, 0, 0, seed, Law::Backbone, true));
        t.nodes[0].left = NONE;
        t.nodes[0].right = NONE;
        Ok(t)
    }

    /// A bi-infinite row of i.i.d. trees, each root sitting on a stub at height -1.
    /// Tree `i` is seeded from `(master, i)`.
    pub fn lazy_row(d: &OffspringDistribution, master: u64) -> Result<Self> {
        if d.weight(0) > 0.0 {
            return Err(Error::Mu0Positive);
        }
        let laws = Arc::new(Laws { mu: d.clone(), derived: DerivedLaws::new(d).ok() });
        let roots = Roots::Row {
            master,
            lazy: true,
            first_index: 0,
            ids: VecDeque::new(),
            index_of: HashMap::new(),
        };
        let mut t = Self::empty(Some(laws), roots);
        t.new_row_root(0)?;
        Ok(t)
    }

    fn new_row_root(&mut self, index: i64) -> Result<VertexId> {
        let master = match &self.roots {
            Roots::Row { master, .. } => *master,
            Roots::Single(_) => unreachable!("row operation on single tree"),
        };
        let seed = mix64(master, zigzag(index));
        let mut stub = Self::leaf(NONE, -1, 0, seed ^ STUB_SALT, Law::Frozen, false);
        stub.left = NONE;
        stub.right = NONE;
        let stub_id = self.push(stub)?;
        let root = self.push(Self::leaf(stub_id, 0, 0, seed, Law::Plain, false))?;
        self.nodes[stub_id as usize].first_child = root;
        self.nodes[stub_id as usize].n_children = 1;
        if let Roots::Row { first_index, ids, index_of, .. } = &mut self.roots {
            if ids.is_empty() {
                *first_index = index;
                ids.push_back(root);
            } else if index == *first_index - 1 {
                *first_index = index;
                ids.push_front(root);
            } else {
                debug_assert_eq!(index, *first_index + ids.len() as i64);
                ids.push_back(root);
            }
            index_of.insert(root, index);
        }
        Ok(root)
    }

    /// A frozen tree given by child counts level by level: `levels[h][i]` is the
    /// number of children of the `i`-th vertex at height `h`. Vertices of the
    /// generation after the last listed one are created childless.
    pub fn from_levels(levels: &[Vec<usize>]) -> Result<Self> {
        if levels.first().map(Vec::len) != Some(1) {
            return Err(Error::Invalid("first level must hold exactly the root".into()));
        }
        let mut t = Self::empty(None, Roots::Single(0));
        t.nodes.push(Self::leaf(NONE, 0, 0, 0, Law::Frozen, false));
        t.fill_frozen(vec![0], levels)?;
        Ok(t)
    }

    /// A frozen row of trees. `levels[0]` gives the child counts of the roots,
    /// and tree `origin` receives index 0.
    pub fn row_from_levels(levels: &[Vec<usize>], origin: usize) -> Result<Self> {
        let n_roots = levels.first().map(Vec::len).unwrap_or(0);
        if origin >= n_roots {
            return Err(Error::Invalid("origin outside the row".into()));
        }
        let roots = Roots::Row {
            master: 0,
            lazy: false,
            first_index: -(origin as i64),
            ids: VecDeque::new(),
            index_of: HashMap::new(),
        };
        let mut t = Self::empty(None, roots);
        let mut level0 = Vec::with_capacity(n_roots);
        for i in 0..n_roots {
            let stub_id = t.push(Self::leaf(NONE, -1, 0, mix64(0, i as u64) ^ STUB_SALT, Law::Frozen, false))?;
            let root = t.push(Self::leaf(stub_id, 0, 0, mix64(0, i as u64), Law::Frozen, false))?;
            let stub = &mut t.nodes[stub_id as usize];
            stub.first_child = root;
            stub.n_children = 1;
            stub.left = NONE;
            stub.right = NONE;
            level0.push(root);
            if let Roots::Row { ids, index_of, .. } = &mut t.roots {
                ids.push_back(root);
                index_of.insert(root, i as i64 - origin as i64);
            }
        }
        t.fill_frozen(level0, levels)?;
        Ok(t)
    }

    fn fill_frozen(&mut self, mut level: Vec<VertexId>, levels: &[Vec<usize>]) -> Result<()> {
        for (h, counts) in levels.iter().enumerate() {
            if counts.len() != level.len() {
                return Err(Error::Invalid(format!(
                    "level {h} lists {} vertices, expected {}",
                    counts.len(),
                    level.len()
                )));
            }
            self.link_level(&level);
            let mut next = Vec::new();
            for (&v, &c) in level.iter().zip(counts) {
                let ids = self.attach_frozen(v, c)?;
                next.extend(ids);
            }
            level = next;
        }
        self.link_level(&level);
        for &v in &level {
            self.attach_frozen(v, 0)?;
        }
        self.depth_cap = levels.len() as i32;
        Ok(())
    }

    fn link_level(&mut self, level: &[VertexId]) {
        for (i, &v) in level.iter().enumerate() {
            let n = &mut self.nodes[v as usize];
            n.left = if i == 0 { NONE } else { level[i - 1] };
            n.right = level.get(i + 1).copied().unwrap_or(NONE);
        }
    }

    fn attach_frozen(&mut self, v: VertexId, c: usize) -> Result<Range<VertexId>> {
        let start = self.nodes.len() as VertexId;
        let (h, seed) = (self.nodes[v as usize].height, self.nodes[v as usize].seed);
        for i in 0..c {
            let mut n = Self::leaf(v, h + 1, i as u32, mix64(seed, i as u64), Law::Frozen, false);
            if i > 0 {
                n.left = start + i as u32 - 1;
            }
            if i + 1 < c {
                n.right = start + i as u32 + 1;
            }
            self.push(n)?;
        }
        let node = &mut self.nodes[v as usize];
        node.first_child = if c > 0 { start } else { NONE };
        node.n_children = c as u32;
        Ok(start..start + c as u32)
    }

    /// Unconditioned tree expanded breadth-first up to `depth_cap`.
    pub fn sample_gw<R: Rng + ?Sized>(d: &OffspringDistribution, depth_cap: usize, rng: &mut R) -> Result<Self> {
        Self::sample_gw_limited(d, depth_cap, rng, DEFAULT_SIZE_LIMIT)
    }

    pub fn sample_gw_limited<R: Rng + ?Sized>(
        d: &OffspringDistribution,
        depth_cap: usize,
        rng: &mut R,
        size_limit: usize,
    ) -> Result<Self> {
        let mut t = Self::lazy(d, rng.random());
        t.size_limit = size_limit;
        t.extend_to(depth_cap)?;
        Ok(t)
    }

    /// Tree conditioned to survive, expanded up to `depth_cap`, with backbone flags.
    pub fn sample_gw_survived<R: Rng + ?Sized>(
        d: &OffspringDistribution,
        depth_cap: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut t = Self::lazy_survived(d, rng.random())?;
        t.extend_to(depth_cap)?;
        Ok(t)
    }

    pub fn with_size_limit(mut self, limit: usize) -> Self {
        self.size_limit = limit;
        self
    }

    /// Expand every vertex below height `depth` reachable from the roots
    /// currently present.
    pub fn extend_to(&mut self, depth: usize) -> Result<()> {
        let mut level: Vec<VertexId> = match &self.roots {
            Roots::Single(r) => vec![*r],
            Roots::Row { ids, .. } => ids.iter().copied().collect(),
        };
        for _ in 0..depth {
            let mut next = Vec::new();
            for &v in &level {
                next.extend(self.expand(v)?);
            }
            level = next;
        }
        self.depth_cap = self.depth_cap.max(depth as i32);
        Ok(())
    }

    /// Children of `v`, generating them if needed.
    pub fn expand(&mut self, v: VertexId) -> Result<Range<VertexId>> {
        let node = self.node(v)?;
        if node.n_children != UNEXPANDED {
            return Ok(node.first_child..node.first_child.wrapping_add(node.n_children));
        }
        let laws = self.laws.clone().ok_or(Error::InsufficientMaterialization(v))?;
        let (seed, law, h) = (node.seed, node.law, node.height);
        let mut rng = rng_from_seed(seed);
        let mut kinds: Vec<Law> = match law {
            Law::Plain => vec![Law::Plain; laws.mu.sample(&mut rng)],
            Law::Bush => {
                let bush = laws.derived.as_ref().and_then(|d| d.bush.as_ref()).expect("bush law exists");
                vec![Law::Bush; bush.sample(&mut rng)]
            }
            Law::Backbone => {
                let d = laws.derived.as_ref().expect("derived laws exist");
                let b = d.backbone.sample(&mut rng);
                let j = d.extra[b].as_ref().map_or(0, |w| w.sample(&mut rng));
                let mut slots: Vec<usize> = (0..b + j).collect();
                let (chosen, _) = slots.partial_shuffle(&mut rng, b);
                let mut kinds = vec![Law::Bush; b + j];
                for &s in chosen.iter() {
                    kinds[s] = Law::Backbone;
                }
                kinds
            }
            Law::Frozen => return Err(Error::InsufficientMaterialization(v)),
        };
        let c = kinds.len();
        if self.nodes.len() + c > self.size_limit {
            return Err(Error::SizeLimit(self.size_limit));
        }
        let start = self.nodes.len() as VertexId;
        for (i, k) in kinds.drain(..).enumerate() {
            let mut n = Self::leaf(v, h + 1, i as u32, mix64(seed, i as u64), k, k == Law::Backbone);
            if i > 0 {
                n.left = start + i as u32 - 1;
            }
            if i + 1 < c {
                n.right = start + i as u32 + 1;
            }
            self.nodes.push(n);
        }
        let node = &mut self.nodes[v as usize];
        node.first_child = if c > 0 { start } else { NONE };
        node.n_children = c as u32;
        Ok(start..start + c as u32)
    }

    fn node(&self, v: VertexId) -> Result<&Node> {
        self.nodes.get(v as usize).ok_or(Error::UnknownVertex(v))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, v: VertexId) -> bool {
        (v as usize) < self.nodes.len()
    }

    /// The root (of tree 0 for a row).
    pub fn root(&self) -> VertexId {
        match &self.roots {
            Roots::Single(r) => *r,
            Roots::Row { first_index, ids, .. } => ids[(-*first_index) as usize],
        }
    }

    pub fn is_row(&self) -> bool {
        matches!(self.roots, Roots::Row { .. })
    }

    pub fn depth_cap(&self) -> usize {
        self.depth_cap.max(0) as usize
    }

    pub fn offspring(&self) -> Option<&OffspringDistribution> {
        self.laws.as_ref().map(|l| &l.mu)
    }

    pub fn derived(&self) -> Option<&DerivedLaws> {
        self.laws.as_ref().and_then(|l| l.derived.as_ref())
    }

    pub fn parent(&self, v: VertexId) -> Option<VertexId> {
        let p = self.nodes[v as usize].parent;
        (p != NONE).then_some(p)
    }

    pub fn height(&self, v: VertexId) -> i32 {
        self.nodes[v as usize].height
    }

    /// Position of `v` among its siblings.
    pub fn rank(&self, v: VertexId) -> usize {
        self.nodes[v as usize].rank as usize
    }

    /// A label that identifies the vertex independently of arena order.
    pub fn key(&self, v: VertexId) -> u64 {
        self.nodes[v as usize].seed
    }

    pub fn law(&self, v: VertexId) -> Law {
        self.nodes[v as usize].law
    }

    pub fn on_backbone(&self, v: VertexId) -> bool {
        self.nodes[v as usize].backbone
    }

    pub fn is_stub(&self, v: VertexId) -> bool {
        self.nodes[v as usize].height < 0
    }

    pub fn is_expanded(&self, v: VertexId) -> bool {
        self.nodes[v as usize].n_children != UNEXPANDED
    }

    /// Materialized children; empty when `v` has not been expanded.
    pub fn children(&self, v: VertexId) -> Range<VertexId> {
        let n = &self.nodes[v as usize];
        if n.n_children == UNEXPANDED {
            return 0..0;
        }
        n.first_child..n.first_child.wrapping_add(n.n_children)
    }

    /// Number of children, generating them if needed.
    pub fn child_count(&mut self, v: VertexId) -> Result<usize> {
        Ok(self.expand(v)?.len())
    }

    /// Backbone children of `v`, generating them if needed.
    pub fn backbone_children(&mut self, v: VertexId) -> Result<Vec<VertexId>> {
        let r = self.expand(v)?;
        Ok(r.filter(|&c| self.nodes[c as usize].backbone).collect())
    }

    /// Index of the tree containing root `r` in a row.
    pub fn tree_index(&self, r: VertexId) -> Option<i64> {
        match &self.roots {
            Roots::Single(root) => (*root == r).then_some(0),
            Roots::Row { index_of, .. } => index_of.get(&r).copied(),
        }
    }

    /// Root of tree `index` in a row, created if the row is lazy.
    pub fn row_root(&mut self, index: i64) -> Result<Option<VertexId>> {
        loop {
            let (first, len, lazy) = match &self.roots {
                Roots::Single(r) => return Ok((index == 0).then_some(*r)),
                Roots::Row { first_index, ids, lazy, .. } => (*first_index, ids.len() as i64, *lazy),
            };
            if index >= first && index < first + len {
                if let Roots::Row { ids, .. } = &self.roots {
                    return Ok(Some(ids[(index - first) as usize]));
                }
            }
            if !lazy {
                return Ok(None);
            }
            if index < first {
                self.new_row_root(first - 1)?;
            } else {
                self.new_row_root(first + len)?;
            }
        }
    }

    /// Ancestor of `v` at height `h`.
    pub fn ancestor_at(&self, v: VertexId, h: i32) -> Option<VertexId> {
        let mut u = v;
        while self.height(u) > h {
            u = self.parent(u)?;
        }
        (self.height(u) == h).then_some(u)
    }

    fn is_top(&self, u: VertexId) -> bool {
        match &self.roots {
            Roots::Single(r) => *r == u,
            Roots::Row { .. } => self.nodes[u as usize].height == 0,
        }
    }

    fn next_top(&mut self, u: VertexId, dir: i64) -> Result<Option<VertexId>> {
        match self.tree_index(u) {
            Some(i) if self.is_row() => self.row_root(i + dir),
            _ => Ok(None),
        }
    }

    /// Next subtree root at or below the height of `u`, strictly to the right
    /// (`dir = 1`) or left (`dir = -1`) of the subtree of `u`.
    fn advance(&mut self, mut u: VertexId, dir: i64) -> Result<Option<VertexId>> {
        loop {
            let n = &self.nodes[u as usize];
            let cached = if dir > 0 { n.right } else { n.left };
            if cached != UNKNOWN {
                return Ok((cached != NONE).then_some(cached));
            }
            if self.is_top(u) {
                return self.next_top(u, dir);
            }
            u = n.parent;
        }
    }

    /// First vertex at height `target` found by scanning from the subtree of
    /// `u` towards direction `dir`.
    fn seek(&mut self, mut u: VertexId, target: i32, dir: i64) -> Result<Option<VertexId>> {
        loop {
            while self.nodes[u as usize].height < target {
                let r = self.expand(u)?;
                if r.is_empty() {
                    break;
                }
                u = if dir > 0 { r.start } else { r.end - 1 };
            }
            if self.nodes[u as usize].height == target {
                return Ok(Some(u));
            }
            match self.advance(u, dir)? {
                Some(next) => u = next,
                None => return Ok(None),
            }
        }
    }

    fn neighbour(&mut self, v: VertexId, dir: i64) -> Result<Option<VertexId>> {
        let n = self.node(v)?;
        let cached = if dir > 0 { n.right } else { n.left };
        if cached != UNKNOWN {
            return Ok((cached != NONE).then_some(cached));
        }
        if n.height < 0 {
            return Ok(None);
        }
        let target = n.height;
        let found = match self.advance(v, dir)? {
            Some(start) => self.seek(start, target, dir)?,
            None => None,
        };
        let w = found.unwrap_or(NONE);
        if dir > 0 {
            self.nodes[v as usize].right = w;
            if w != NONE {
                self.nodes[w as usize].left = v;
            }
        } else {
            self.nodes[v as usize].left = w;
            if w != NONE {
                self.nodes[w as usize].right = v;
            }
        }
        Ok(found)
    }

    /// Next vertex to the right at the same height, across trees of a row.
    pub fn right_of(&mut self, v: VertexId) -> Result<Option<VertexId>> {
        self.neighbour(v, 1)
    }

    pub fn left_of(&mut self, v: VertexId) -> Result<Option<VertexId>> {
        self.neighbour(v, -1)
    }

    /// Leftmost vertex at height `h` of a single tree.
    pub fn leftmost_at(&mut self, h: i32) -> Result<Option<VertexId>> {
        let r = self.root();
        self.seek(r, h, 1)
    }

    pub fn rightmost_at(&mut self, h: i32) -> Result<Option<VertexId>> {
        let r = self.root();
        self.seek(r, h, -1)
    }

    /// Materialized vertices of the single tree by level, up to `depth_cap`.
    pub fn levels(&self) -> Vec<Vec<VertexId>> {
        let mut out = vec![vec![self.root()]];
        for _ in 0..self.depth_cap {
            let next: Vec<VertexId> = out.last().unwrap().iter().flat_map(|&v| self.children(v)).collect();
            if next.is_empty() {
                break;
            }
            out.push(next);
        }
        out
    }

    /// Generation sizes `Z_0..Z_depth_cap` of the materialized tree.
    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels().iter().map(Vec::len).collect()
    }

    /// Mask of vertices having a descendant at height `depth_cap`.
    pub fn reaches_cap_mask(&self) -> Vec<bool> {
        let mut reach = vec![false; self.nodes.len()];
        for v in (0..self.nodes.len()).rev() {
            let n = &self.nodes[v];
            if n.height == self.depth_cap {
                reach[v] = true;
            }
            if reach[v] && n.parent != NONE && n.height > 0 {
                reach[n.parent as usize] = true;
            }
        }
        for (v, n) in self.nodes.iter().enumerate() {
            if n.height > self.depth_cap {
                reach[v] = false;
            }
        }
        reach
    }

    /// Vertices having at least one descendant at height `depth_cap`.
    pub fn backbone_to_cap(&self) -> Vec<VertexId> {
        self.reaches_cap_mask()
            .iter()
            .enumerate()
            .filter(|(_, r)| **r)
            .map(|(v, _)| v as VertexId)
            .collect()
    }

    /// True when backbone flags come from a conditioned sample.
    pub fn has_backbone_flags(&self) -> bool {
        self.nodes.first().is_some_and(|n| n.law == Law::Backbone)
    }

    /// Set backbone flags to "has a descendant at height `depth_cap`".
    pub fn mark_backbone_to_cap(&mut self) {
        let mask = self.reaches_cap_mask();
        for (n, m) in self.nodes.iter_mut().zip(mask) {
            n.backbone = m;
        }
    }

    /// Check structural invariants of the materialized part.
    pub fn check_invariants(&self) -> Result<()> {
        for (v, n) in self.nodes.iter().enumerate() {
            if n.n_children != UNEXPANDED {
                for (i, c) in (n.first_child..n.first_child.wrapping_add(n.n_children)).enumerate() {
                    let cn = &self.nodes[c as usize];
                    if cn.parent != v as VertexId || cn.rank as usize != i || cn.height != n.height + 1 {
                        return Err(Error::Invalid(format!("inconsistent child {c} of {v}")));
                    }
                    if cn.backbone && !n.backbone && n.height >= 0 {
                        return Err(Error::Invalid(format!("backbone not ancestor-closed at {c}")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Parent-array text: one line per vertex in breadth-first order,
    /// `parent rank height flag`, with parent -1 for the root.
    pub fn to_text(&self) -> String {
        let levels = self.levels();
        let mut index = HashMap::new();
        let mut out = String::new();
        let mut next = 0usize;
        for level in &levels {
            for &v in level {
                index.insert(v, next);
                next += 1;
                let p = match self.parent(v) {
                    Some(p) if self.height(v) > 0 => index[&p] as i64,
                    _ => -1,
                };
                let _ = writeln!(out, "{p} {} {} {}", self.rank(v), self.height(v), self.on_backbone(v) as u8);
            }
        }
        out
    }

    /// Inverse of [`PlaneTree::to_text`]; the result is frozen.
    pub fn from_text(s: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in s.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(parse_err(i + 1, "expected `parent rank height flag`"));
            }
            let num = |x: &str| x.parse::<i64>().map_err(|e| parse_err(i + 1, e.to_string()));
            rows.push((num(f[0])?, num(f[1])?, num(f[2])?, num(f[3])? != 0));
        }
        if rows.first().map(|r| r.0) != Some(-1) {
            return Err(parse_err(1, "first line must be the root"));
        }
        let mut kids: Vec<Vec<(i64, usize)>> = vec![Vec::new(); rows.len()];
        for (i, r) in rows.iter().enumerate().skip(1) {
            if r.0 < 0 || r.0 as usize >= i {
                return Err(parse_err(i + 1, "parent must precede child"));
            }
            if r.2 != rows[r.0 as usize].2 + 1 {
                return Err(parse_err(i + 1, "height mismatch"));
            }
            kids[r.0 as usize].push((r.1, i));
        }
        for k in &mut kids {
            k.sort();
            if k.iter().enumerate().any(|(j, (rank, _))| *rank != j as i64) {
                return Err(parse_err(1, "child ranks must be 0..c"));
            }
        }
        let mut t = Self::empty(None, Roots::Single(0));
        let mut root = Self::leaf(NONE, 0, 0, 0, Law::Frozen, rows[0].3);
        root.left = NONE;
        root.right = NONE;
        t.nodes.push(root);
        let mut map = vec![0 as VertexId; rows.len()];
        let mut level = vec![0usize];
        let mut depth = 0;
        while !level.is_empty() {
            let ids: Vec<VertexId> = level.iter().map(|&i| map[i]).collect();
            t.link_level(&ids);
            let mut next = Vec::new();
            for &i in &level {
                let range = t.attach_frozen(map[i], kids[i].len())?;
                for (c, &(_, j)) in range.zip(&kids[i]) {
                    map[j] = c;
                    t.nodes[c as usize].backbone = rows[j].3;
                    next.push(j);
                }
            }
            if !next.is_empty() {
                depth += 1;
            }
            level = next;
        }
        t.depth_cap = depth;
        Ok(t)
    }
}
