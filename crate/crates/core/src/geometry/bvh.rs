use nalgebra::{Point3, Vector3};

use super::TriangleMesh;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy)]
struct Aabb {
    min: Point3<f64>,
    max: Point3<f64>,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            min: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Point3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    fn join(&mut self, other: &Aabb) {
        self.grow(&other.min);
        self.grow(&other.max);
    }

    /// Slab test against the parametric range `[0, t_max]`.
    fn hit(&self, origin: &Point3<f64>, inv_dir: &Vector3<f64>, t_max: f64) -> bool {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for axis in 0..3 {
            let a = (self.min[axis] - origin[axis]) * inv_dir[axis];
            let b = (self.max[axis] - origin[axis]) * inv_dir[axis];
            let (near, far) = if a <= b { (a, b) } else { (b, a) };
            // NaN (0 * inf) leaves the bound untouched.
            if near > t0 {
                t0 = near;
            }
            if far < t1 {
                t1 = far;
            }
            if t0 > t1 {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, len: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Bounding-volume hierarchy over a mesh's triangles, median split on the
/// longest centroid axis. Only answers any-hit segment queries.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
    triangles: Vec<[Point3<f64>; 3]>,
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Self {
        let triangles: Vec<[Point3<f64>; 3]> =
            (0..mesh.triangles().len()).map(|t| mesh.triangle_vertices(t)).collect();
        let centroids: Vec<Point3<f64>> = triangles
            .iter()
            .map(|[a, b, c]| Point3::from((a.coords + b.coords + c.coords) / 3.0))
            .collect();
        let mut order: Vec<u32> = (0..triangles.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * triangles.len() / LEAF_SIZE + 1);
        build_node(&triangles, &centroids, &mut order, 0, &mut nodes);
        Self {
            nodes,
            order,
            triangles,
        }
    }

    /// True if any triangle is crossed by `origin + t * dir` for `t` in `(0, t_max)`.
    pub fn segment_blocked(&self, origin: &Point3<f64>, dir: &Vector3<f64>, t_max: f64) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let inv_dir = dir.map(|d| 1.0 / d);
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if !node.bounds().hit(origin, &inv_dir, t_max) {
                continue;
            }
            match *node {
                Node::Leaf { start, len, .. } => {
                    for &t in &self.order[start..start + len] {
                        if ray_triangle(origin, dir, &self.triangles[t as usize], t_max) {
                            return true;
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        false
    }
}

fn build_node(
    triangles: &[[Point3<f64>; 3]],
    centroids: &[Point3<f64>],
    order: &mut [u32],
    offset: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let mut bounds = Aabb::empty();
    let mut centroid_bounds = Aabb::empty();
    for &t in order.iter() {
        for v in &triangles[t as usize] {
            bounds.grow(v);
        }
        centroid_bounds.grow(&centroids[t as usize]);
    }
    let index = nodes.len();
    if order.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            bounds,
            start: offset,
            len: order.len(),
        });
        return index;
    }
    let extent = centroid_bounds.max - centroid_bounds.min;
    let axis = extent.imax();
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a as usize][axis].total_cmp(&centroids[b as usize][axis])
    });
    // Placeholder, patched once both children exist.
    nodes.push(Node::Leaf {
        bounds,
        start: 0,
        len: 0,
    });
    let (lo, hi) = order.split_at_mut(mid);
    let left = build_node(triangles, centroids, lo, offset, nodes);
    let right = build_node(triangles, centroids, hi, offset + mid, nodes);
    let mut joined = *nodes[left].bounds();
    joined.join(nodes[right].bounds());
    nodes[index] = Node::Inner {
        bounds: joined,
        left,
        right,
    };
    index
}

/// Two-sided Möller–Trumbore test restricted to `t` in `(0, t_max)`.
fn ray_triangle(origin: &Point3<f64>, dir: &Vector3<f64>, tri: &[Point3<f64>; 3], t_max: f64) -> bool {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 * e1.norm() * e2.norm() * dir.norm() {
        return false;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return false;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return false;
    }
    let t = e2.dot(&q) * inv;
    t > 0.0 && t < t_max
}

/// Exhaustive counterpart of [`Bvh::segment_blocked`].
pub fn segment_blocked_brute_force(
    mesh: &TriangleMesh,
    origin: &Point3<f64>,
    dir: &Vector3<f64>,
    t_max: f64,
) -> bool {
    (0..mesh.triangles().len()).any(|t| ray_triangle(origin, dir, &mesh.triangle_vertices(t), t_max))
}
