//! Combinatorial plane graphs: darts, rotations and face tracing.
//!
//! Dart `2e` runs along edge `e` from its first to its second endpoint and
//! dart `2e + 1` runs back. Rotations list outgoing darts counterclockwise.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct PlanarPiece {
    n: usize,
    edges: Vec<(u32, u32)>,
    rot: Vec<Vec<u32>>,
    pos_in_rot: Vec<u32>,
    coords: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone)]
pub struct Faces {
    /// Face lying to the left of each dart.
    pub of_dart: Vec<u32>,
    /// Darts of each face in boundary order.
    pub boundary: Vec<Vec<u32>>,
}

impl PlanarPiece {
    /// Build from counterclockwise dart rotations.
    pub fn from_rotation(n: usize, edges: Vec<(u32, u32)>, rot: Vec<Vec<u32>>) -> Result<Self> {
        let mut pos_in_rot = vec![u32::MAX; 2 * edges.len()];
        for (v, r) in rot.iter().enumerate() {
            for (i, &d) in r.iter().enumerate() {
                let (a, b) = edges[(d / 2) as usize];
                let tail = if d % 2 == 0 { a } else { b };
                if tail as usize != v {
                    return Err(Error::Invalid(format!("dart {d} listed at {v} but leaves {tail}")));
                }
                pos_in_rot[d as usize] = i as u32;
            }
        }
        if pos_in_rot.contains(&u32::MAX) {
            return Err(Error::Invalid("rotation misses a dart".into()));
        }
        Ok(PlanarPiece { n, edges, rot, pos_in_rot, coords: None })
    }

    /// Straight-line embedding: rotations sorted by angle.
    pub fn from_coords(coords: Vec<(f64, f64)>, edges: Vec<(u32, u32)>) -> Result<Self> {
        let n = coords.len();
        let mut rot: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (e, &(a, b)) in edges.iter().enumerate() {
            rot[a as usize].push(2 * e as u32);
            rot[b as usize].push(2 * e as u32 + 1);
        }
        for (v, r) in rot.iter_mut().enumerate() {
            let (x0, y0) = coords[v];
            r.sort_by(|&d1, &d2| {
                let ang = |d: u32| {
                    let (a, b) = edges[(d / 2) as usize];
                    let h = if d % 2 == 0 { b } else { a };
                    let (x, y) = coords[h as usize];
                    (y - y0).atan2(x - x0)
                };
                ang(d1).total_cmp(&ang(d2))
            });
        }
        let mut p = Self::from_rotation(n, edges, rot)?;
        p.coords = Some(coords);
        Ok(p)
    }

    /// Attach coordinates consistent with the rotation.
    pub fn with_coords(mut self, coords: Vec<(f64, f64)>) -> Self {
        self.coords = Some(coords);
        self
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn tail(&self, d: u32) -> u32 {
        let (a, b) = self.edges[(d / 2) as usize];
        if d % 2 == 0 {
            a
        } else {
            b
        }
    }

    pub fn head(&self, d: u32) -> u32 {
        self.tail(d ^ 1)
    }

    /// Dart from `u` to `v` along edge `e`.
    pub fn dart(&self, e: u32, from: u32) -> u32 {
        if self.edges[e as usize].0 == from {
            2 * e
        } else {
            2 * e + 1
        }
    }

    /// Next dart along the face to the left of `d`.
    pub fn face_next(&self, d: u32) -> u32 {
        let r = d ^ 1;
        let v = self.head(d) as usize;
        let i = self.pos_in_rot[r as usize] as usize;
        let k = self.rot[v].len();
        self.rot[v][(i + k - 1) % k]
    }

    pub fn faces(&self) -> Faces {
        let nd = 2 * self.edges.len();
        let mut of_dart = vec![u32::MAX; nd];
        let mut boundary = Vec::new();
        for start in 0..nd as u32 {
            if of_dart[start as usize] != u32::MAX {
                continue;
            }
            let f = boundary.len() as u32;
            let mut walk = Vec::new();
            let mut d = start;
            loop {
                of_dart[d as usize] = f;
                walk.push(d);
                d = self.face_next(d);
                if d == start {
                    break;
                }
            }
            boundary.push(walk);
        }
        Faces { of_dart, boundary }
    }

    /// Euler characteristic V - E + F of a connected piece; 2 for the sphere.
    pub fn euler_characteristic(&self) -> i64 {
        self.n as i64 - self.edges.len() as i64 + self.faces().boundary.len() as i64
    }

    /// Signed area of a face polygon, positive for counterclockwise.
    pub fn face_area(&self, face: &[u32]) -> Option<f64> {
        let c = self.coords.as_ref()?;
        let mut a = 0.0;
        for &d in face {
            let (x0, y0) = c[self.tail(d) as usize];
            let (x1, y1) = c[self.head(d) as usize];
            a += x0 * y1 - x1 * y0;
        }
        Some(a / 2.0)
    }

    /// Index of the unbounded face: the one traced clockwise.
    pub fn outer_face(&self, faces: &Faces) -> Option<u32> {
        if faces.boundary.len() == 1 {
            return Some(0);
        }
        let areas: Vec<f64> = faces.boundary.iter().map(|f| self.face_area(f)).collect::<Option<_>>()?;
        areas
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i as u32)
    }
}
