//! Incremental 2D Delaunay triangulation with exact predicates, plus
//! constraint-edge recovery by edge flipping.
//!
//! The convex hull is closed off with ghost triangles that share one
//! symbolic vertex at infinity, so every point insertion, including points
//! outside the current hull, is a cavity retriangulation with no special
//! cases and no artificial bounding triangle.

use std::collections::{HashMap, HashSet, VecDeque};

use robust::Coord;

const GHOST: usize = usize::MAX;
const NONE: usize = usize::MAX;

#[inline]
fn c(p: [f64; 2]) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

#[inline]
pub fn orient(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    robust::orient2d(c(a), c(b), c(p))
}

/// Positive when `d` lies strictly inside the circle through counter-clockwise `a, b, c`.
#[inline]
pub fn incircle(a: [f64; 2], b: [f64; 2], cc: [f64; 2], d: [f64; 2]) -> f64 {
    robust::incircle(c(a), c(b), c(cc), c(d))
}

#[derive(Debug, Clone, Copy)]
struct Tri {
    v: [usize; 3],
    // n[i] is across the edge opposite v[i], i.e. (v[i+1], v[i+2])
    n: [usize; 3],
    alive: bool,
}

impl Tri {
    fn is_ghost(&self) -> bool {
        self.v.contains(&GHOST)
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum TriangulationError {
    #[error("need at least 3 distinct points, got {0}")]
    TooFewPoints(usize),
    #[error("all points are collinear")]
    Collinear,
    #[error("constraint {0}-{1} passes through another input point")]
    ConstraintThroughPoint(usize, usize),
}

pub struct Triangulation {
    pts: Vec<[f64; 2]>,
    tris: Vec<Tri>,
    free: Vec<usize>,
    vertex_tri: Vec<usize>,
    constrained: HashSet<(usize, usize)>,
    last: usize,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl Triangulation {
    /// Delaunay triangulation of `pts`. Points are inserted in lexicographic
    /// `(x, y)` order; exact duplicates after the first are skipped, and
    /// cocircular configurations keep the triangles formed earliest in that
    /// order.
    pub fn new(pts: Vec<[f64; 2]>) -> Result<Triangulation, TriangulationError> {
        let mut order: Vec<usize> = (0..pts.len()).collect();
        order.sort_by(|&a, &b| pts[a][0].total_cmp(&pts[b][0]).then(pts[a][1].total_cmp(&pts[b][1])).then(a.cmp(&b)));
        order.dedup_by(|a, b| pts[*a] == pts[*b]);
        if order.len() < 3 {
            return Err(TriangulationError::TooFewPoints(order.len()));
        }
        let (i0, i1) = (order[0], order[1]);
        let k = (2..order.len()).find(|&k| orient(pts[i0], pts[i1], pts[order[k]]) != 0.0).ok_or(TriangulationError::Collinear)?;
        let i2 = order[k];
        let mut t = Triangulation {
            vertex_tri: vec![NONE; pts.len()],
            pts,
            tris: Vec::new(),
            free: Vec::new(),
            constrained: HashSet::new(),
            last: 0,
        };
        let (a, b, cc) = if orient(t.pts[i0], t.pts[i1], t.pts[i2]) > 0.0 { (i0, i1, i2) } else { (i0, i2, i1) };
        // real triangle 0, ghosts 1..4 on edges (b,a), (c,b), (a,c)
        t.tris.push(Tri { v: [a, b, cc], n: [2, 3, 1], alive: true });
        t.tris.push(Tri { v: [b, a, GHOST], n: [3, 2, 0], alive: true });
        t.tris.push(Tri { v: [cc, b, GHOST], n: [1, 3, 0], alive: true });
        t.tris.push(Tri { v: [a, cc, GHOST], n: [2, 1, 0], alive: true });
        for v in [a, b, cc] {
            t.vertex_tri[v] = 0;
        }
        for (pos, &p) in order.iter().enumerate() {
            if pos != 0 && pos != 1 && pos != k {
                t.insert(p);
            }
        }
        Ok(t)
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.pts
    }

    fn conflicts(&self, t: usize, p: [f64; 2]) -> bool {
        let tri = &self.tris[t];
        if let Some(g) = tri.v.iter().position(|&v| v == GHOST) {
            let a = self.pts[tri.v[(g + 1) % 3]];
            let b = self.pts[tri.v[(g + 2) % 3]];
            let o = orient(a, b, p);
            if o != 0.0 {
                return o > 0.0;
            }
            // on the hull line: only the open segment counts
            let d = [b[0] - a[0], b[1] - a[1]];
            let s = (p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1];
            return s > 0.0 && s < d[0] * d[0] + d[1] * d[1];
        }
        let [a, b, cc] = tri.v.map(|v| self.pts[v]);
        incircle(a, b, cc, p) > 0.0
    }

    /// Walks from the last real triangle toward `p` and returns a triangle in conflict with it.
    fn locate(&self, p: [f64; 2]) -> usize {
        let mut t = self.last;
        if !self.tris[t].alive || self.tris[t].is_ghost() {
            t = (0..self.tris.len()).find(|&i| self.tris[i].alive && !self.tris[i].is_ghost()).unwrap();
        }
        let mut step = 0usize;
        'walk: loop {
            let tri = self.tris[t];
            if tri.is_ghost() {
                return t;
            }
            step += 1;
            for r in 0..3 {
                let i = (r + step) % 3;
                let a = self.pts[tri.v[(i + 1) % 3]];
                let b = self.pts[tri.v[(i + 2) % 3]];
                if orient(a, b, p) < 0.0 {
                    t = tri.n[i];
                    continue 'walk;
                }
            }
            return t;
        }
    }

    fn alloc(&mut self, tri: Tri) -> usize {
        if let Some(id) = self.free.pop() {
            self.tris[id] = tri;
            id
        } else {
            self.tris.push(tri);
            self.tris.len() - 1
        }
    }

    /// Points the neighbor slot of `t` across its directed edge `a -> b` at `new`.
    fn relink(&mut self, t: usize, a: usize, b: usize, new: usize) {
        let tri = &mut self.tris[t];
        for j in 0..3 {
            if tri.v[(j + 1) % 3] == a && tri.v[(j + 2) % 3] == b {
                tri.n[j] = new;
                return;
            }
        }
        unreachable!("edge not in neighbor triangle");
    }

    fn insert(&mut self, p: usize) {
        let pp = self.pts[p];
        let seed = self.locate(pp);
        let mut cavity = vec![seed];
        let mut in_cavity: HashSet<usize> = HashSet::from([seed]);
        let mut queue = VecDeque::from([seed]);
        while let Some(t) = queue.pop_front() {
            for &nb in &self.tris[t].n {
                if !in_cavity.contains(&nb) && self.conflicts(nb, pp) {
                    in_cavity.insert(nb);
                    cavity.push(nb);
                    queue.push_back(nb);
                }
            }
        }
        // boundary edges (x, y) with their outside neighbor
        let mut boundary = Vec::new();
        for &t in &cavity {
            let tri = self.tris[t];
            for i in 0..3 {
                if !in_cavity.contains(&tri.n[i]) {
                    boundary.push((tri.v[(i + 1) % 3], tri.v[(i + 2) % 3], tri.n[i]));
                }
            }
        }
        for &t in &cavity {
            self.tris[t].alive = false;
            self.free.push(t);
        }
        let mut by_start: HashMap<usize, usize> = HashMap::with_capacity(boundary.len());
        let mut created = Vec::with_capacity(boundary.len());
        for &(x, y, outside) in &boundary {
            let id = self.alloc(Tri { v: [x, y, p], n: [NONE, NONE, outside], alive: true });
            self.relink(outside, y, x, id);
            by_start.insert(x, id);
            created.push((id, x, y));
        }
        for &(id, x, y) in &created {
            self.tris[id].n[0] = by_start[&y];
            let prev = created.iter().find(|&&(_, _, yy)| yy == x).map(|&(t, _, _)| t).unwrap();
            self.tris[id].n[1] = prev;
            for v in [x, y, p] {
                if v != GHOST {
                    self.vertex_tri[v] = id;
                }
            }
            if x != GHOST && y != GHOST {
                self.last = id;
            }
        }
    }

    /// Triangle holding the directed edge `a -> b`, as (triangle, index of the opposite vertex).
    fn find_edge(&self, a: usize, b: usize) -> Option<(usize, usize)> {
        let start = self.vertex_tri[a];
        if start == NONE {
            return None;
        }
        let mut t = start;
        loop {
            let tri = &self.tris[t];
            let i = tri.v.iter().position(|&v| v == a)?;
            if tri.v[(i + 1) % 3] == b {
                return Some((t, (i + 2) % 3));
            }
            // next triangle around `a`: across the edge (v[i+2], a)
            t = tri.n[(i + 1) % 3];
            if t == start {
                return None;
            }
        }
    }

    /// Flips the edge opposite vertex `i` of triangle `t`; returns the new diagonal.
    fn flip(&mut self, t1: usize, i: usize) -> (usize, usize) {
        let tri1 = self.tris[t1];
        let x = tri1.v[i];
        let u = tri1.v[(i + 1) % 3];
        let v = tri1.v[(i + 2) % 3];
        let t2 = tri1.n[i];
        let tri2 = self.tris[t2];
        let j = tri2.v.iter().position(|&w| w != u && w != v).unwrap();
        let y = tri2.v[j];
        // tri1 = (x, u, v) rotated; tri2 holds v -> u with y opposite
        let n_xu = tri1.n[(i + 2) % 3];
        let n_vx = tri1.n[(i + 1) % 3];
        let pos = |tri: &Tri, w: usize| tri.v.iter().position(|&q| q == w).unwrap();
        let n_uy = tri2.n[pos(&tri2, v)];
        let n_yv = tri2.n[pos(&tri2, u)];
        self.tris[t1] = Tri { v: [x, u, y], n: [n_uy, t2, n_xu], alive: true };
        self.tris[t2] = Tri { v: [y, v, x], n: [n_vx, t1, n_yv], alive: true };
        self.relink(n_uy, y, u, t1);
        self.relink(n_vx, x, v, t2);
        for (w, t) in [(x, t1), (u, t1), (y, t1), (v, t2)] {
            self.vertex_tri[w] = t;
        }
        (x, y)
    }

    fn edge_is_delaunay(&self, t: usize, i: usize) -> bool {
        let tri = self.tris[t];
        let t2 = tri.n[i];
        if tri.is_ghost() || self.tris[t2].is_ghost() {
            return true;
        }
        let (u, v) = (tri.v[(i + 1) % 3], tri.v[(i + 2) % 3]);
        if self.constrained.contains(&key(u, v)) {
            return true;
        }
        let other = self.tris[t2].v.iter().copied().find(|&w| w != u && w != v).unwrap();
        let [a, b, cc] = tri.v.map(|w| self.pts[w]);
        incircle(a, b, cc, self.pts[other]) <= 0.0
    }

    fn crosses(&self, a: usize, b: usize, u: usize, v: usize) -> bool {
        if u == a || u == b || v == a || v == b {
            return false;
        }
        let (pa, pb, pu, pv) = (self.pts[a], self.pts[b], self.pts[u], self.pts[v]);
        let (o1, o2) = (orient(pa, pb, pu), orient(pa, pb, pv));
        let (o3, o4) = (orient(pu, pv, pa), orient(pu, pv, pb));
        ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0)) && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    }

    /// Forces the segment `a-b` into the triangulation.
    pub fn insert_constraint(&mut self, a: usize, b: usize) -> Result<(), TriangulationError> {
        if a == b {
            return Ok(());
        }
        if self.find_edge(a, b).is_some() || self.find_edge(b, a).is_some() {
            self.constrained.insert(key(a, b));
            return Ok(());
        }
        let (pa, pb) = (self.pts[a], self.pts[b]);
        let mut queue: VecDeque<(usize, usize)> = VecDeque::new();
        for t in 0..self.tris.len() {
            let tri = self.tris[t];
            if !tri.alive || tri.is_ghost() {
                continue;
            }
            for i in 0..3 {
                let (u, v) = (tri.v[(i + 1) % 3], tri.v[(i + 2) % 3]);
                if (u < v || self.tris[tri.n[i]].is_ghost())
                    && self.crosses(a, b, u, v) {
                        queue.push_back((u, v));
                    }
                let w = tri.v[i];
                if w != a && w != b && orient(pa, pb, self.pts[w]) == 0.0 {
                    let d = [pb[0] - pa[0], pb[1] - pa[1]];
                    let s = (self.pts[w][0] - pa[0]) * d[0] + (self.pts[w][1] - pa[1]) * d[1];
                    if s > 0.0 && s < d[0] * d[0] + d[1] * d[1] {
                        return Err(TriangulationError::ConstraintThroughPoint(a, b));
                    }
                }
            }
        }
        let mut fresh = Vec::new();
        let mut stalls = 0usize;
        while let Some((u, v)) = queue.pop_front() {
            let (t, i) = self.find_edge(u, v).expect("crossing edge exists");
            let x = self.tris[t].v[i];
            let t2 = self.tris[t].n[i];
            let y = self.tris[t2].v.iter().copied().find(|&w| w != u && w != v).unwrap();
            let (px, py) = (self.pts[x], self.pts[y]);
            let convex = {
                let (o1, o2) = (orient(px, py, self.pts[u]), orient(px, py, self.pts[v]));
                (o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0)
            };
            if !convex {
                queue.push_back((u, v));
                stalls += 1;
                assert!(stalls <= 10 * (queue.len() + 1) * (queue.len() + 1), "constraint recovery stalled");
                continue;
            }
            stalls = 0;
            let (nx, ny) = self.flip(t, i);
            if self.crosses(a, b, nx, ny) {
                queue.push_back((nx, ny));
            } else {
                fresh.push((nx, ny));
            }
        }
        self.constrained.insert(key(a, b));
        // restore the Delaunay property around the recovered segment
        let mut changed = true;
        while changed {
            changed = false;
            for e in fresh.iter_mut() {
                if key(e.0, e.1) == key(a, b) {
                    continue;
                }
                if let Some((t, i)) = self.find_edge(e.0, e.1) {
                    if !self.edge_is_delaunay(t, i) {
                        *e = self.flip(t, i);
                        changed = true;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_constrained(&self, a: usize, b: usize) -> bool {
        self.constrained.contains(&key(a, b))
    }

    /// Finite triangles, counter-clockwise, each rotated so its smallest index leads, sorted.
    pub fn triangles(&self) -> Vec<[usize; 3]> {
        let mut out: Vec<[usize; 3]> = self
            .tris
            .iter()
            .filter(|t| t.alive && !t.is_ghost())
            .map(|t| {
                let r = (0..3).min_by_key(|&i| t.v[i]).unwrap();
                [t.v[r], t.v[(r + 1) % 3], t.v[(r + 2) % 3]]
            })
            .collect();
        out.sort_unstable();
        out
    }
}

/// Convenience wrapper: Delaunay triangles of a point set.
pub fn delaunay_2d(pts: &[[f64; 2]]) -> Result<Vec<[usize; 3]>, TriangulationError> {
    Ok(Triangulation::new(pts.to_vec())?.triangles())
}
