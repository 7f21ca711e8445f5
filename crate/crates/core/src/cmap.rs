//! Causal maps, causal slices and the half-plane model.
//!
//! [`CausalMap`] is an explicit finite map with a rotation system.
//! [`LazyMap`] answers the same neighbourhood queries on an unbounded map,
//! growing the underlying trees only where it is queried.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::offspring::OffspringDistribution;
use crate::planar::PlanarPiece;
use crate::tree::{PlaneTree, VertexId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Vertical,
    Horizontal,
    Wrap,
    RootStub,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Vertical => "vertical",
            EdgeKind::Horizontal => "horizontal",
            EdgeKind::Wrap => "wrap",
            EdgeKind::RootStub => "root_stub",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Causal,
    Slice,
    HalfPlane,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MapVertex {
    pub height: i32,
    pub level_index: u32,
    pub tree_vertex: Option<VertexId>,
    pub backbone: bool,
}

/// Edge endpoints are ordered: parent then child for vertical and stub
/// edges, left then right for horizontal edges, rightmost then leftmost for
/// wrap edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub u: u32,
    pub v: u32,
    pub kind: EdgeKind,
}

/// One edge-end seen from a vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Incidence {
    pub to: VertexId,
    pub kind: EdgeKind,
    /// True when the edge leads to a child.
    pub up: bool,
}

/// Anything a walk can run on.
pub trait WalkGraph {
    fn height_of(&self, v: VertexId) -> i32;
    fn parent_of(&self, v: VertexId) -> Option<VertexId>;
    /// Incident edge-ends of `v` in clockwise order starting from the parent.
    fn incidences(&mut self, v: VertexId, out: &mut Vec<Incidence>) -> Result<()>;
}

#[derive(Clone, Debug)]
pub struct CausalMap {
    kind: MapKind,
    root: u32,
    vertices: Vec<MapVertex>,
    edges: Vec<Edge>,
    rotation: Vec<Vec<u32>>,
    levels: Vec<Vec<u32>>,
    min_height: i32,
    left_ray: Vec<u32>,
    right_ray: Vec<u32>,
    of_tree: HashMap<VertexId, u32>,
}

fn assemble(
    tree: &PlaneTree,
    kind: MapKind,
    levels: &[Vec<VertexId>],
    min_height: i32,
    root: VertexId,
    flags: &dyn Fn(VertexId) -> bool,
    rays: Option<(&[VertexId], &[VertexId])>,
) -> CausalMap {
    let mut vertices = Vec::new();
    let mut of_tree = HashMap::new();
    let mut map_levels = Vec::with_capacity(levels.len());
    for (i, level) in levels.iter().enumerate() {
        let mut ids = Vec::with_capacity(level.len());
        for (j, &t) in level.iter().enumerate() {
            let id = vertices.len() as u32;
            vertices.push(MapVertex {
                height: min_height + i as i32,
                level_index: j as u32,
                tree_vertex: Some(t),
                backbone: flags(t),
            });
            of_tree.insert(t, id);
            ids.push(id);
        }
        map_levels.push(ids);
    }
    let n = vertices.len();
    let mut edges = Vec::new();
    let mut parent_edge = vec![u32::MAX; n];
    let mut child_edges: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut left_edge = vec![u32::MAX; n];
    let mut right_edge = vec![u32::MAX; n];
    for ids in &map_levels {
        for &v in ids {
            let t = vertices[v as usize].tree_vertex.unwrap();
            if let Some(p) = tree.parent(t).and_then(|p| of_tree.get(&p)) {
                let k = if tree.is_stub(tree.parent(t).unwrap()) { EdgeKind::RootStub } else { EdgeKind::Vertical };
                let e = edges.len() as u32;
                edges.push(Edge { u: *p, v, kind: k });
                parent_edge[v as usize] = e;
                child_edges[*p as usize].push(e);
            }
        }
        if vertices[ids[0] as usize].height < 0 {
            continue;
        }
        for w in ids.windows(2) {
            let e = edges.len() as u32;
            edges.push(Edge { u: w[0], v: w[1], kind: EdgeKind::Horizontal });
            right_edge[w[0] as usize] = e;
            left_edge[w[1] as usize] = e;
        }
        if kind == MapKind::Causal && ids.len() >= 2 {
            let (first, last) = (ids[0], *ids.last().unwrap());
            let e = edges.len() as u32;
            edges.push(Edge { u: last, v: first, kind: EdgeKind::Wrap });
            right_edge[last as usize] = e;
            left_edge[first as usize] = e;
        }
    }
    let rotation = (0..n)
        .map(|v| {
            let mut r = Vec::with_capacity(child_edges[v].len() + 3);
            if parent_edge[v] != u32::MAX {
                r.push(parent_edge[v]);
            }
            if left_edge[v] != u32::MAX {
                r.push(left_edge[v]);
            }
            r.extend(&child_edges[v]);
            if right_edge[v] != u32::MAX {
                r.push(right_edge[v]);
            }
            r
        })
        .collect();
    let (left_ray, right_ray) = match rays {
        Some((l, r)) => (l.iter().map(|t| of_tree[t]).collect(), r.iter().map(|t| of_tree[t]).collect()),
        None => (Vec::new(), Vec::new()),
    };
    CausalMap {
        kind,
        root: of_tree[&root],
        vertices,
        edges,
        rotation,
        levels: map_levels,
        min_height,
        left_ray,
        right_ray,
        of_tree,
    }
}

/// Causal map of the materialized part of `t`.
pub fn build_causal(t: &PlaneTree) -> CausalMap {
    let levels = t.levels();
    let flags = |v: VertexId| t.on_backbone(v);
    assemble(t, MapKind::Causal, &levels, 0, t.root(), &flags, None)
}

/// Causal slice of the materialized part of `t`, between its extreme backbone rays.
/// Backbone flags of a conditioned sample are used when present; otherwise
/// the backbone is the set of vertices reaching the depth cap.
pub fn build_slice(t: &PlaneTree) -> Result<CausalMap> {
    let mask: Vec<bool> = if t.has_backbone_flags() {
        (0..t.len() as VertexId).map(|v| t.on_backbone(v)).collect()
    } else {
        t.reaches_cap_mask()
    };
    let all = t.levels();
    if all.len() < t.depth_cap() + 1 {
        return Err(Error::NoBackbone);
    }
    let mut levels = Vec::with_capacity(all.len());
    let (mut lray, mut rray) = (Vec::new(), Vec::new());
    for level in &all {
        let lo = level.iter().position(|&v| mask[v as usize]).ok_or(Error::NoBackbone)?;
        let hi = level.iter().rposition(|&v| mask[v as usize]).unwrap();
        lray.push(level[lo]);
        rray.push(level[hi]);
        levels.push(level[lo..=hi].to_vec());
    }
    let flags = |v: VertexId| mask[v as usize];
    Ok(assemble(t, MapKind::Slice, &levels, 0, t.root(), &flags, Some((&lray, &rray))))
}

/// Half-plane model with trees `-window..=window` materialized to `depth_cap`.
pub fn build_halfplane<R: Rng + ?Sized>(
    d: &OffspringDistribution,
    window: usize,
    depth_cap: usize,
    rng: &mut R,
) -> Result<LazyMap> {
    let mut m = LazyMap::half_plane(d, rng.random())?;
    let w = window as i64;
    let roots: Vec<VertexId> = (-w..=w).map(|i| m.tree.row_root(i).map(Option::unwrap)).collect::<Result<_>>()?;
    expand_levels(&mut m.tree, roots, depth_cap)?;
    Ok(m)
}

fn expand_levels(t: &mut PlaneTree, start: Vec<VertexId>, depth: usize) -> Result<Vec<Vec<VertexId>>> {
    let mut out = vec![start];
    for _ in 0..depth {
        let mut next = Vec::new();
        for &v in out.last().unwrap() {
            next.extend(t.expand(v)?);
        }
        out.push(next);
    }
    Ok(out)
}

impl CausalMap {
    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn root(&self) -> u32 {
        self.root
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex(&self, v: u32) -> &MapVertex {
        &self.vertices[v as usize]
    }

    pub fn vertices(&self) -> &[MapVertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Map vertex of a tree vertex.
    pub fn of_tree(&self, t: VertexId) -> Option<u32> {
        self.of_tree.get(&t).copied()
    }

    pub fn min_height(&self) -> i32 {
        self.min_height
    }

    pub fn max_height(&self) -> i32 {
        self.min_height + self.levels.len() as i32 - 1
    }

    /// Vertices at height `h`, left to right.
    pub fn level(&self, h: i32) -> &[u32] {
        let i = h - self.min_height;
        if i < 0 {
            return &[];
        }
        self.levels.get(i as usize).map_or(&[], Vec::as_slice)
    }

    pub fn left_ray(&self) -> &[u32] {
        &self.left_ray
    }

    pub fn right_ray(&self) -> &[u32] {
        &self.right_ray
    }

    /// Membership in the slice boundary.
    pub fn on_boundary(&self, v: u32) -> bool {
        let h = self.vertices[v as usize].height as usize;
        self.left_ray.get(h) == Some(&v) || self.right_ray.get(h) == Some(&v)
    }

    fn check(&self, v: u32) -> Result<()> {
        if (v as usize) < self.vertices.len() {
            Ok(())
        } else {
            Err(Error::UnknownVertex(v))
        }
    }

    pub fn degree(&self, v: u32) -> Result<usize> {
        self.check(v)?;
        Ok(self.rotation[v as usize].len())
    }

    /// Incident `(edge, far end)` pairs in clockwise order from the parent.
    pub fn neighbors(&self, v: u32) -> Result<Vec<(u32, u32)>> {
        self.check(v)?;
        Ok(self.rotation[v as usize].iter().map(|&e| (e, self.other(e, v))).collect())
    }

    pub fn other(&self, e: u32, v: u32) -> u32 {
        let ed = self.edges[e as usize];
        if ed.u == v {
            ed.v
        } else {
            ed.u
        }
    }

    pub fn rotation(&self, v: u32) -> &[u32] {
        &self.rotation[v as usize]
    }

    /// Children of `v` in the map, left to right.
    pub fn children(&self, v: u32) -> impl Iterator<Item = u32> + '_ {
        self.rotation[v as usize].iter().filter_map(move |&e| {
            let ed = self.edges[e as usize];
            (ed.u == v && matches!(ed.kind, EdgeKind::Vertical | EdgeKind::RootStub)).then_some(ed.v)
        })
    }

    pub fn parent(&self, v: u32) -> Option<u32> {
        self.rotation[v as usize].first().and_then(|&e| {
            let ed = self.edges[e as usize];
            (ed.v == v && matches!(ed.kind, EdgeKind::Vertical | EdgeKind::RootStub)).then_some(ed.u)
        })
    }

    /// Plane embedding coordinates: concentric rings for causal maps,
    /// columns for slices and the half-plane.
    pub fn positions(&self) -> Vec<(f64, f64)> {
        self.vertices
            .iter()
            .map(|mv| match self.kind {
                MapKind::Causal => {
                    let size = self.level(mv.height).len() as f64;
                    let ang = PI / 2.0 - 2.0 * PI * mv.level_index as f64 / size;
                    let r = mv.height as f64 + 1.0;
                    (r * ang.cos(), r * ang.sin())
                }
                _ => (mv.level_index as f64, mv.height as f64),
            })
            .collect()
    }

    /// The rotation system as a plane piece; slices and half-plane windows
    /// also carry their column coordinates.
    pub fn planar_piece(&self) -> PlanarPiece {
        let edges: Vec<(u32, u32)> = self.edges.iter().map(|e| (e.u, e.v)).collect();
        let rot = (0..self.vertices.len())
            .map(|v| {
                self.rotation[v]
                    .iter()
                    .rev()
                    .map(|&e| if self.edges[e as usize].u == v as u32 { 2 * e } else { 2 * e + 1 })
                    .collect()
            })
            .collect();
        let p = PlanarPiece::from_rotation(self.vertices.len(), edges, rot).expect("consistent rotation");
        match self.kind {
            MapKind::Causal => p,
            _ => p.with_coords(self.positions()),
        }
    }

    /// Number of crossing pairs in the layered drawing: inverted vertical
    /// edges between consecutive levels, plus horizontal edges not joining
    /// level neighbours.
    pub fn crossings(&self) -> usize {
        let mut count = 0;
        let mut by_level: HashMap<i32, Vec<(u32, u32)>> = HashMap::new();
        for e in &self.edges {
            let (a, b) = (self.vertices[e.u as usize], self.vertices[e.v as usize]);
            match e.kind {
                EdgeKind::Vertical | EdgeKind::RootStub => {
                    by_level.entry(a.height).or_default().push((a.level_index, b.level_index))
                }
                EdgeKind::Horizontal => {
                    if b.level_index != a.level_index + 1 {
                        count += 1;
                    }
                }
                EdgeKind::Wrap => {
                    let size = self.level(a.height).len() as u32;
                    if a.level_index != size - 1 || b.level_index != 0 {
                        count += 1;
                    }
                }
            }
        }
        for (_, mut v) in by_level {
            v.sort_unstable();
            count += inversions(v.iter().map(|p| p.1).collect());
        }
        count
    }

    /// Edge list followed by the vertex table.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# vertices: id height level_index");
        for (i, v) in self.vertices.iter().enumerate() {
            let _ = writeln!(s, "{i} {} {}", v.height, v.level_index);
        }
        let _ = writeln!(s, "# edges: u v kind");
        for e in &self.edges {
            let _ = writeln!(s, "{} {} {}", e.u, e.v, e.kind.as_str());
        }
        s
    }
}

fn inversions(mut v: Vec<u32>) -> usize {
    fn sort(v: &mut [u32], buf: &mut Vec<u32>) -> usize {
        let n = v.len();
        if n < 2 {
            return 0;
        }
        let (l, r) = v.split_at_mut(n / 2);
        let mut c = sort(l, buf) + sort(r, buf);
        buf.clear();
        let (mut i, mut j) = (0, 0);
        while i < l.len() && j < r.len() {
            if l[i] <= r[j] {
                buf.push(l[i]);
                i += 1;
            } else {
                buf.push(r[j]);
                c += l.len() - i;
                j += 1;
            }
        }
        buf.extend_from_slice(&l[i..]);
        buf.extend_from_slice(&r[j..]);
        v.copy_from_slice(buf);
        c
    }
    let mut buf = Vec::with_capacity(v.len());
    sort(&mut v, &mut buf)
}

impl WalkGraph for CausalMap {
    fn height_of(&self, v: VertexId) -> i32 {
        self.vertices[v as usize].height
    }

    fn parent_of(&self, v: VertexId) -> Option<VertexId> {
        self.parent(v)
    }

    fn incidences(&mut self, v: VertexId, out: &mut Vec<Incidence>) -> Result<()> {
        self.check(v)?;
        out.clear();
        for &e in &self.rotation[v as usize] {
            let ed = self.edges[e as usize];
            let up = ed.u == v && matches!(ed.kind, EdgeKind::Vertical | EdgeKind::RootStub);
            out.push(Incidence { to: self.other(e, v), kind: ed.kind, up });
        }
        Ok(())
    }
}

/// An unbounded causal map, slice or half-plane grown on demand.
#[derive(Clone, Debug)]
pub struct LazyMap {
    tree: PlaneTree,
    kind: MapKind,
    left_ray: Vec<VertexId>,
    right_ray: Vec<VertexId>,
    first: Vec<VertexId>,
    last: Vec<VertexId>,
}

impl LazyMap {
    pub fn causal(tree: PlaneTree) -> Self {
        let r = tree.root();
        LazyMap { tree, kind: MapKind::Causal, left_ray: vec![], right_ray: vec![], first: vec![r], last: vec![r] }
    }

    /// Slice of a tree conditioned to survive. Frozen trees use the
    /// vertices reaching their depth cap as backbone.
    pub fn slice(mut tree: PlaneTree) -> Self {
        if !tree.has_backbone_flags() {
            tree.mark_backbone_to_cap();
        }
        let r = tree.root();
        LazyMap { tree, kind: MapKind::Slice, left_ray: vec![r], right_ray: vec![r], first: vec![], last: vec![] }
    }

    pub fn half_plane(d: &OffspringDistribution, seed: u64) -> Result<Self> {
        let tree = PlaneTree::lazy_row(d, seed)?;
        Ok(Self::from_row(tree))
    }

    /// Half-plane built on an existing row of trees.
    pub fn from_row(tree: PlaneTree) -> Self {
        LazyMap { tree, kind: MapKind::HalfPlane, left_ray: vec![], right_ray: vec![], first: vec![], last: vec![] }
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn tree(&self) -> &PlaneTree {
        &self.tree
    }

    pub fn tree_mut(&mut self) -> &mut PlaneTree {
        &mut self.tree
    }

    pub fn into_tree(self) -> PlaneTree {
        self.tree
    }

    pub fn root(&self) -> VertexId {
        self.tree.root()
    }

    fn extend_rays(&mut self, h: usize) -> Result<()> {
        while self.left_ray.len() <= h {
            let l = *self.left_ray.last().unwrap();
            let r = *self.right_ray.last().unwrap();
            let lc = self.tree.backbone_children(l)?;
            let rc = self.tree.backbone_children(r)?;
            match (lc.first(), rc.last()) {
                (Some(&a), Some(&b)) => {
                    self.left_ray.push(a);
                    self.right_ray.push(b);
                }
                _ => return Err(Error::InsufficientMaterialization(l)),
            }
        }
        Ok(())
    }

    /// Vertex of the left boundary ray at height `h` (slices only).
    pub fn left_ray_at(&mut self, h: usize) -> Result<VertexId> {
        if self.kind != MapKind::Slice {
            return Err(Error::NotASlice);
        }
        self.extend_rays(h)?;
        Ok(self.left_ray[h])
    }

    pub fn right_ray_at(&mut self, h: usize) -> Result<VertexId> {
        if self.kind != MapKind::Slice {
            return Err(Error::NotASlice);
        }
        self.extend_rays(h)?;
        Ok(self.right_ray[h])
    }

    /// True for vertices on the boundary rays of a slice.
    pub fn on_boundary(&mut self, v: VertexId) -> Result<bool> {
        if self.kind != MapKind::Slice {
            return Ok(false);
        }
        let h = self.tree.height(v) as usize;
        self.extend_rays(h)?;
        Ok(self.left_ray[h] == v || self.right_ray[h] == v)
    }

    fn level_ends(&mut self, h: usize) -> Result<Option<(VertexId, VertexId)>> {
        while self.first.len() <= h {
            let k = self.first.len() as i32;
            match (self.tree.leftmost_at(k)?, self.tree.rightmost_at(k)?) {
                (Some(a), Some(b)) => {
                    self.first.push(a);
                    self.last.push(b);
                }
                _ => return Ok(None),
            }
        }
        Ok(Some((self.first[h], self.last[h])))
    }

    pub fn degree(&mut self, v: VertexId) -> Result<usize> {
        let mut out = Vec::new();
        self.incidences(v, &mut out)?;
        Ok(out.len())
    }

    /// Explicit copy of the part below height `depth`. For the half-plane,
    /// trees `-window..=window` are included.
    pub fn snapshot(&mut self, depth: usize, window: usize) -> Result<CausalMap> {
        match self.kind {
            MapKind::Causal => {
                let r = self.tree.root();
                let mut levels = expand_levels(&mut self.tree, vec![r], depth)?;
                while levels.last().is_some_and(Vec::is_empty) {
                    levels.pop();
                }
                let t = &self.tree;
                let flags = |v: VertexId| t.on_backbone(v);
                Ok(assemble(t, MapKind::Causal, &levels, 0, r, &flags, None))
            }
            MapKind::Slice => {
                self.extend_rays(depth)?;
                let r = self.tree.root();
                let all = expand_levels(&mut self.tree, vec![r], depth)?;
                let mut levels = Vec::with_capacity(all.len());
                for (h, level) in all.iter().enumerate() {
                    let lo = level.iter().position(|&v| v == self.left_ray[h]).unwrap();
                    let hi = level.iter().position(|&v| v == self.right_ray[h]).unwrap();
                    levels.push(level[lo..=hi].to_vec());
                }
                let t = &self.tree;
                let flags = |v: VertexId| t.on_backbone(v);
                let rays = (&self.left_ray[..=depth], &self.right_ray[..=depth]);
                Ok(assemble(t, MapKind::Slice, &levels, 0, r, &flags, Some(rays)))
            }
            MapKind::HalfPlane => {
                let w = window as i64;
                let mut roots = Vec::new();
                for i in -w..=w {
                    if let Some(r) = self.tree.row_root(i)? {
                        roots.push(r);
                    }
                }
                let stubs: Vec<VertexId> = roots.iter().map(|&r| self.tree.parent(r).unwrap()).collect();
                let mut levels = vec![stubs];
                levels.extend(expand_levels(&mut self.tree, roots, depth)?);
                let t = &self.tree;
                let flags = |_: VertexId| false;
                Ok(assemble(t, MapKind::HalfPlane, &levels, -1, t.root(), &flags, None))
            }
        }
    }
}

impl WalkGraph for LazyMap {
    fn height_of(&self, v: VertexId) -> i32 {
        self.tree.height(v)
    }

    fn parent_of(&self, v: VertexId) -> Option<VertexId> {
        self.tree.parent(v)
    }

    fn incidences(&mut self, v: VertexId, out: &mut Vec<Incidence>) -> Result<()> {
        if !self.tree.contains(v) {
            return Err(Error::UnknownVertex(v));
        }
        out.clear();
        let h = self.tree.height(v);
        if let Some(p) = self.tree.parent(v) {
            let kind = if self.tree.is_stub(p) { EdgeKind::RootStub } else { EdgeKind::Vertical };
            out.push(Incidence { to: p, kind, up: false });
        }
        if h < 0 {
            let c = self.tree.expand(v)?;
            out.extend(c.map(|to| Incidence { to, kind: EdgeKind::RootStub, up: true }));
            return Ok(());
        }
        let children = self.tree.expand(v)?;
        let horizontal = |to| Incidence { to, kind: EdgeKind::Horizontal, up: false };
        let wrap = |to| Incidence { to, kind: EdgeKind::Wrap, up: false };
        let (left, right, kids) = match self.kind {
            MapKind::HalfPlane => (
                self.tree.left_of(v)?.map(horizontal),
                self.tree.right_of(v)?.map(horizontal),
                children,
            ),
            MapKind::Causal => {
                let l = self.tree.left_of(v)?;
                let r = self.tree.right_of(v)?;
                let (first, last) = self.level_ends(h as usize)?.expect("level of a known vertex");
                let left = l.map(horizontal).or_else(|| (last != v).then(|| wrap(last)));
                let right = r.map(horizontal).or_else(|| (first != v).then(|| wrap(first)));
                (left, right, children)
            }
            MapKind::Slice => {
                let hu = h as usize;
                self.extend_rays(hu)?;
                let on_left = self.left_ray[hu] == v;
                let on_right = self.right_ray[hu] == v;
                let left = if on_left { None } else { self.tree.left_of(v)?.map(horizontal) };
                let right = if on_right { None } else { self.tree.right_of(v)?.map(horizontal) };
                let mut kids = children;
                if (on_left || on_right) && !kids.is_empty() {
                    self.extend_rays(hu + 1)?;
                    if on_left {
                        kids.start = self.left_ray[hu + 1];
                    }
                    if on_right {
                        kids.end = self.right_ray[hu + 1] + 1;
                    }
                }
                (left, right, kids)
            }
        };
        out.extend(left);
        out.extend(kids.map(|to| Incidence { to, kind: EdgeKind::Vertical, up: true }));
        out.extend(right);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;

    fn d(p: &[(usize, f64)]) -> OffspringDistribution {
        OffspringDistribution::new(p).unwrap()
    }

    fn six_vertex_tree() -> PlaneTree {
        PlaneTree::from_levels(&[vec![2], vec![1, 2]]).unwrap()
    }

    // map ids follow breadth-first order: root 0, a 1, b 2, c 3, d 4, e 5
    #[test]
    fn six_vertex_causal() {
        let m = build_causal(&six_vertex_tree());
        assert_eq!(m.degree(2).unwrap(), 5);
        assert_eq!(m.degree(0).unwrap(), 2);
        assert_eq!(m.degree(3).unwrap(), 3);
        let nb = m.neighbors(2).unwrap();
        assert_eq!(nb.len(), 5);
        assert_eq!(nb.iter().filter(|p| p.1 == 1).count(), 2);
        assert_eq!(m.crossings(), 0);
        assert_eq!(m.planar_piece().euler_characteristic(), 2);
        assert!(matches!(m.degree(99), Err(Error::UnknownVertex(99))));
    }

    #[test]
    fn six_vertex_slice() {
        let s = build_slice(&six_vertex_tree()).unwrap();
        assert_eq!(s.n_vertices(), 6);
        assert_eq!(s.degree(3).unwrap(), 2);
        let h2: Vec<_> = s.edges().iter().filter(|e| e.kind == EdgeKind::Horizontal && s.vertex(e.u).height == 2).collect();
        assert_eq!(h2.len(), 2);
        assert!(s.edges().iter().all(|e| e.kind != EdgeKind::Wrap));
        assert_eq!(s.left_ray(), &[0, 1, 3]);
        assert_eq!(s.right_ray(), &[0, 2, 5]);
    }

    #[test]
    fn path_tree() {
        let t = PlaneTree::from_levels(&[vec![1], vec![1], vec![1]]).unwrap();
        let m = build_causal(&t);
        assert!(m.edges().iter().all(|e| e.kind == EdgeKind::Vertical));
        assert_eq!(m.edges().len(), 3);
        let s = build_slice(&t).unwrap();
        assert_eq!(s.left_ray(), s.right_ray());
        assert_eq!(s.edges().len(), 3);
    }

    #[test]
    fn binary_slice_drops_wraps() {
        let mut rng = rng_from_seed(1);
        let t = PlaneTree::sample_gw(&d(&[(2, 1.0)]), 4, &mut rng).unwrap();
        let m = build_causal(&t);
        let s = build_slice(&t).unwrap();
        let non_wrap = m.edges().iter().filter(|e| e.kind != EdgeKind::Wrap).count();
        assert_eq!(s.edges().len(), non_wrap);
        assert_eq!(s.n_vertices(), m.n_vertices());
    }

    #[test]
    fn dying_tree_has_no_slice() {
        let t = PlaneTree::from_levels(&[vec![1], vec![0]]).unwrap();
        assert_eq!(build_slice(&t).unwrap_err(), Error::NoBackbone);
    }

    #[test]
    fn half_plane_degrees() {
        let mut rng = rng_from_seed(3);
        let mut m = build_halfplane(&d(&[(2, 1.0)]), 2, 4, &mut rng).unwrap();
        let r = m.root();
        assert_eq!(m.degree(r).unwrap(), 5);
        let stub = m.tree().parent(r).unwrap();
        assert_eq!(m.degree(stub).unwrap(), 1);
        let mut v = r;
        for _ in 0..6 {
            v = m.tree_mut().expand(v).unwrap().end - 1;
            assert_eq!(m.degree(v).unwrap(), 5);
        }
        // far outside the initial window
        let far = m.tree_mut().row_root(40).unwrap().unwrap();
        assert_eq!(m.degree(far).unwrap(), 5);
        assert_eq!(
            LazyMap::half_plane(&d(&[(0, 0.25), (2, 0.75)]), 1).unwrap_err(),
            Error::Mu0Positive
        );
        let snap = m.snapshot(3, 2).unwrap();
        assert_eq!(snap.crossings(), 0);
        assert_eq!(snap.planar_piece().euler_characteristic(), 2);
    }

    fn lazy_matches_explicit(mut lazy: LazyMap, depth: usize) {
        let m = lazy.snapshot(depth, 3).unwrap();
        let mut out = Vec::new();
        for v in 0..m.n_vertices() as u32 {
            let mv = *m.vertex(v);
            if mv.height >= depth as i32 || (m.kind() == MapKind::HalfPlane && mv.level_index == 0) {
                continue;
            }
            if m.kind() == MapKind::HalfPlane && mv.level_index as usize + 1 == m.level(mv.height).len() {
                continue;
            }
            let t = mv.tree_vertex.unwrap();
            lazy.incidences(t, &mut out).unwrap();
            let from_lazy: Vec<(u32, EdgeKind)> = out.iter().map(|i| (m.of_tree(i.to).unwrap(), i.kind)).collect();
            let from_map: Vec<(u32, EdgeKind)> =
                m.neighbors(v).unwrap().iter().map(|&(e, w)| (w, m.edges()[e as usize].kind)).collect();
            assert_eq!(from_lazy, from_map, "vertex {v}");
        }
    }

    #[test]
    fn lazy_and_explicit_agree() {
        let x = d(&[(0, 0.2), (1, 0.3), (2, 0.3), (3, 0.2)]);
        for seed in 0..10 {
            lazy_matches_explicit(LazyMap::causal(PlaneTree::lazy(&x, seed)), 6);
            lazy_matches_explicit(LazyMap::slice(PlaneTree::lazy_survived(&x, seed).unwrap()), 6);
            let y = d(&[(1, 0.5), (2, 0.3), (3, 0.2)]);
            lazy_matches_explicit(LazyMap::half_plane(&y, seed).unwrap(), 5);
        }
    }

    #[test]
    fn level_of_size_two_has_parallel_edges() {
        let t = PlaneTree::from_levels(&[vec![2], vec![0, 0]]).unwrap();
        let m = build_causal(&t);
        assert_eq!(m.degree(1).unwrap(), 3);
        assert_eq!(m.planar_piece().euler_characteristic(), 2);
        let mut lazy = LazyMap::causal(t);
        assert_eq!(lazy.degree(1).unwrap(), 3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn sampled_maps_are_planar(seed in any::<u64>()) {
            let x = d(&[(0, 0.2), (1, 0.2), (2, 0.3), (3, 0.3)]);
            let mut rng = rng_from_seed(seed);
            let t = PlaneTree::sample_gw_survived(&x, 7, &mut rng).unwrap();
            let m = build_causal(&t);
            prop_assert_eq!(m.crossings(), 0);
            prop_assert_eq!(m.planar_piece().euler_characteristic(), 2);
            let cap = t.depth_cap() as i32;
            for v in 0..m.n_vertices() as u32 {
                let mv = m.vertex(v);
                if mv.height > 0 && mv.height < cap && m.level(mv.height).len() >= 2 {
                    let c = t.children(mv.tree_vertex.unwrap()).len();
                    prop_assert_eq!(m.degree(v).unwrap(), c + 3);
                }
            }
            let s = build_slice(&t).unwrap();
            prop_assert_eq!(s.crossings(), 0);
            prop_assert_eq!(s.planar_piece().euler_characteristic(), 2);
            for h in 0..=cap {
                let level = s.level(h);
                prop_assert_eq!(level[0], s.left_ray()[h as usize]);
                prop_assert_eq!(*level.last().unwrap(), s.right_ray()[h as usize]);
            }
        }
    }
}
