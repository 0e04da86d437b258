//! Bounding volume hierarchy over triangles, with closest-point queries.

use crate::geom::{Aabb, Point3, TriMesh};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    // leaf: items[start..start + count]; inner: children at `start` and `start + 1`
    start: usize,
    count: usize,
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    items: Vec<usize>,
}

impl Bvh {
    /// Builds over arbitrary boxes; item ids are indices into `boxes`.
    pub fn new(boxes: &[Aabb]) -> Bvh {
        let mut items: Vec<usize> = (0..boxes.len()).collect();
        let centers: Vec<Point3> = boxes.iter().map(|b| b.center()).collect();
        let mut nodes = vec![Node { bounds: Aabb::EMPTY, start: 0, count: 0 }];
        if !boxes.is_empty() {
            build(&mut nodes, 0, &mut items, 0, boxes, &centers);
        }
        Bvh { nodes, items }
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Calls `hit` for every item in a leaf whose bounds pass `enter`.
    pub fn visit(&self, mut enter: impl FnMut(&Aabb) -> bool, mut hit: impl FnMut(usize)) {
        if self.items.is_empty() {
            return;
        }
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if !enter(&node.bounds) {
                continue;
            }
            if node.count > 0 {
                for &it in &self.items[node.start..node.start + node.count] {
                    hit(it);
                }
            } else {
                stack.push(node.start + 1);
                stack.push(node.start);
            }
        }
    }

    /// Best-first descent. `bound` gives a lower bound for a box, `eval` the
    /// exact value for an item; returns the item with the smallest value.
    /// Ties go to the smaller item id.
    pub fn nearest(&self, bound: impl Fn(&Aabb) -> f64, mut eval: impl FnMut(usize) -> f64) -> Option<(usize, f64)> {
        if self.items.is_empty() {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        let mut stack = vec![(0usize, bound(&self.nodes[0].bounds))];
        while let Some((n, lb)) = stack.pop() {
            if let Some((_, d)) = best {
                if lb > d {
                    continue;
                }
            }
            let node = &self.nodes[n];
            if node.count > 0 {
                for &it in &self.items[node.start..node.start + node.count] {
                    let d = eval(it);
                    let better = match best {
                        None => true,
                        Some((bi, bd)) => d < bd || (d == bd && it < bi),
                    };
                    if better {
                        best = Some((it, d));
                    }
                }
            } else {
                let (a, b) = (node.start, node.start + 1);
                let (la, lb2) = (bound(&self.nodes[a].bounds), bound(&self.nodes[b].bounds));
                // push the farther child first so the nearer is explored first
                if la <= lb2 {
                    stack.push((b, lb2));
                    stack.push((a, la));
                } else {
                    stack.push((a, la));
                    stack.push((b, lb2));
                }
            }
        }
        best
    }
}

fn build(nodes: &mut Vec<Node>, n: usize, items: &mut [usize], offset: usize, boxes: &[Aabb], centers: &[Point3]) {
    let bounds = items.iter().fold(Aabb::EMPTY, |b, &i| b.union(boxes[i]));
    if items.len() <= LEAF_SIZE {
        nodes[n] = Node { bounds, start: offset, count: items.len() };
        return;
    }
    let cb = items.iter().fold(Aabb::EMPTY, |b, &i| b.grow(centers[i]));
    let e = cb.extent();
    let axis = if e.x >= e.y && e.x >= e.z { 0 } else if e.y >= e.z { 1 } else { 2 };
    let mid = items.len() / 2;
    items.select_nth_unstable_by(mid, |&a, &b| centers[a][axis].total_cmp(&centers[b][axis]).then(a.cmp(&b)));
    let first = nodes.len();
    nodes.push(Node { bounds: Aabb::EMPTY, start: 0, count: 0 });
    nodes.push(Node { bounds: Aabb::EMPTY, start: 0, count: 0 });
    nodes[n] = Node { bounds, start: first, count: 0 };
    let (left, right) = items.split_at_mut(mid);
    build(nodes, first, left, offset, boxes, centers);
    build(nodes, first + 1, right, offset + mid, boxes, centers);
}

/// Closest point on triangle `abc` to `p`, by Voronoi-region classification.
pub fn closest_point_on_triangle(p: Point3, a: Point3, b: Point3, c: Point3) -> Point3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = va + vb + vc;
    if denom.abs() < f64::MIN_POSITIVE {
        // zero-area triangle: nearest of its edges
        return [(a, b), (b, c), (c, a)]
            .iter()
            .map(|&(s, t)| closest_point_on_segment(p, s, t))
            .min_by(|x, y| (*x - p).norm_squared().total_cmp(&(*y - p).norm_squared()))
            .unwrap();
    }
    let v = vb / denom;
    let w = vc / denom;
    a + ab * v + ac * w
}

pub fn closest_point_on_segment(p: Point3, a: Point3, b: Point3) -> Point3 {
    let d = b - a;
    let len2 = d.norm_squared();
    if len2 == 0.0 {
        return a;
    }
    a + d * ((p - a).dot(d) / len2).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestHit {
    pub triangle: usize,
    pub point: Point3,
    pub distance: f64,
}

/// BVH over the triangles of a mesh.
#[derive(Debug, Clone)]
pub struct MeshBvh {
    tris: Vec<[Point3; 3]>,
    bvh: Bvh,
}

impl MeshBvh {
    pub fn new(mesh: &TriMesh) -> MeshBvh {
        let tris: Vec<[Point3; 3]> = (0..mesh.triangles().len()).map(|t| mesh.triangle_points(t)).collect();
        let boxes: Vec<Aabb> = tris.iter().map(|t| Aabb::from_points(t.iter())).collect();
        MeshBvh { bvh: Bvh::new(&boxes), tris }
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    pub fn triangle(&self, t: usize) -> [Point3; 3] {
        self.tris[t]
    }

    pub fn closest(&self, p: Point3) -> Option<ClosestHit> {
        let tris = &self.tris;
        let (t, d2) = self.bvh.nearest(
            |b| b.distance_squared(p),
            |t| {
                let [a, b, c] = tris[t];
                (closest_point_on_triangle(p, a, b, c) - p).norm_squared()
            },
        )?;
        let [a, b, c] = tris[t];
        Some(ClosestHit { triangle: t, point: closest_point_on_triangle(p, a, b, c), distance: d2.sqrt() })
    }

    /// Triangles whose bounds meet `query`.
    pub fn overlapping(&self, query: &Aabb) -> Vec<usize> {
        let mut out = Vec::new();
        self.bvh.visit(|b| b.overlaps(query), |t| out.push(t));
        out.sort_unstable();
        out
    }

    /// Triangles whose bounds meet the line through `origin` along coordinate `axis`.
    pub fn along_axis(&self, origin: Point3, axis: usize) -> Vec<usize> {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        let mut out = Vec::new();
        self.bvh.visit(
            |b| b.min[u] <= origin[u] && origin[u] <= b.max[u] && b.min[v] <= origin[v] && origin[v] <= b.max[v],
            |t| out.push(t),
        );
        out.sort_unstable();
        out
    }
}
