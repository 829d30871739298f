//! Point-to-surface queries and area-uniform surface sampling.

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{MeshError, TriMesh};

/// Closest point to `p` on triangle `(a, b, c)`.
///
/// Voronoi-region walk over vertices, edges and interior.
pub fn closest_point_on_triangle(
    p: &Point3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> Point3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    min: Point3<f64>,
    max: Point3<f64>,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            min: Point3::from(Vector3::repeat(f64::INFINITY)),
            max: Point3::from(Vector3::repeat(f64::NEG_INFINITY)),
        }
    }

    fn grow(&mut self, p: &Point3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    fn merge(&mut self, o: &Aabb) {
        self.min = self.min.inf(&o.min);
        self.max = self.max.sup(&o.max);
    }

    fn dist2(&self, p: &Point3<f64>) -> f64 {
        let mut d = 0.0;
        for k in 0..3 {
            let e = (self.min[k] - p[k]).max(0.0).max(p[k] - self.max[k]);
            d += e * e;
        }
        d
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

const LEAF_SIZE: usize = 4;

/// Bounding-volume hierarchy over the faces of a mesh for exact
/// closest-point queries.
#[derive(Debug, Clone)]
pub struct SurfaceIndex<'m> {
    mesh: &'m TriMesh,
    nodes: Vec<Node>,
    order: Vec<usize>,
}

/// Answer of a closest-point query.
#[derive(Debug, Clone, Copy)]
pub struct Closest {
    pub point: Point3<f64>,
    pub distance: f64,
    pub face: usize,
}

impl<'m> SurfaceIndex<'m> {
    pub fn new(mesh: &'m TriMesh) -> Result<Self, MeshError> {
        if mesh.is_empty() {
            return Err(MeshError::Empty);
        }
        let centroids: Vec<Point3<f64>> = (0..mesh.face_count())
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                Point3::from((a.coords + b.coords + c.coords) / 3.0)
            })
            .collect();
        let mut order: Vec<usize> = (0..mesh.face_count()).collect();
        let mut nodes = Vec::with_capacity(2 * mesh.face_count() / LEAF_SIZE + 1);
        build(mesh, &centroids, &mut order, 0, mesh.face_count(), &mut nodes);
        Ok(Self { mesh, nodes, order })
    }

    pub fn mesh(&self) -> &TriMesh {
        self.mesh
    }

    pub fn closest(&self, p: &Point3<f64>) -> Closest {
        let mut best = Closest {
            point: *p,
            distance: f64::INFINITY,
            face: usize::MAX,
        };
        let mut best_d2 = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.bounds().dist2(p) >= best_d2 {
                continue;
            }
            match *node {
                Node::Leaf { start, end, .. } => {
                    for &f in &self.order[start..end] {
                        let [a, b, c] = self.mesh.triangle(f);
                        let q = closest_point_on_triangle(p, &a, &b, &c);
                        let d2 = (q - p).norm_squared();
                        if d2 < best_d2 || (d2 == best_d2 && f < best.face) {
                            best_d2 = d2;
                            best = Closest { point: q, distance: 0.0, face: f };
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[left].bounds().dist2(p);
                    let dr = self.nodes[right].bounds().dist2(p);
                    // Visit the nearer child first.
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best.distance = best_d2.sqrt();
        best
    }

    pub fn distance(&self, p: &Point3<f64>) -> f64 {
        self.closest(p).distance
    }
}

fn build(
    mesh: &TriMesh,
    centroids: &[Point3<f64>],
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &f in &order[start..end] {
        for v in mesh.triangle(f) {
            bounds.grow(&v);
        }
        cbounds.grow(&centroids[f]);
    }
    let idx = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { bounds, start, end });
        return idx;
    }
    let extent = cbounds.max - cbounds.min;
    let axis = extent.imax();
    let mid = (start + end) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        centroids[a][axis]
            .total_cmp(&centroids[b][axis])
            .then(a.cmp(&b))
    });
    nodes.push(Node::Leaf { bounds, start, end });
    let left = build(mesh, centroids, order, start, mid, nodes);
    let right = build(mesh, centroids, order, mid, end, nodes);
    let mut merged = *nodes[left].bounds();
    merged.merge(nodes[right].bounds());
    nodes[idx] = Node::Inner { bounds: merged, left, right };
    idx
}

/// Exact minimum distance from `point` to the surface of `mesh`.
pub fn nearest_surface_distance(point: &Point3<f64>, mesh: &TriMesh) -> Result<f64, MeshError> {
    Ok(SurfaceIndex::new(mesh)?.distance(point))
}

/// `n` points drawn area-uniformly on the faces of `mesh`, reproducible for a
/// fixed `seed`.
pub fn surface_samples(mesh: &TriMesh, n: usize, seed: u64) -> Result<Vec<Point3<f64>>, MeshError> {
    if mesh.is_empty() {
        return Err(MeshError::Empty);
    }
    let mut cdf = Vec::with_capacity(mesh.face_count());
    let mut total = 0.0;
    for f in 0..mesh.face_count() {
        total += mesh.face_area(f);
        cdf.push(total);
    }
    if !(total > 0.0) {
        return Err(MeshError::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|_| {
            let u = rng.gen::<f64>() * total;
            let f = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            let [a, b, c] = mesh.triangle(f);
            let r1: f64 = rng.gen();
            let r2: f64 = rng.gen();
            let s = r1.sqrt();
            Point3::from(a.coords * (1.0 - s) + b.coords * (s * (1.0 - r2)) + c.coords * (s * r2))
        })
        .collect();
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::super::shapes::{cube, icosphere};
    use super::*;
    use rand::Rng;

    fn brute_force(p: &Point3<f64>, mesh: &TriMesh) -> f64 {
        (0..mesh.face_count())
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                (closest_point_on_triangle(p, &a, &b, &c) - p).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn vertex_distance_is_zero() {
        let m = cube(10.0);
        for v in &m.vertices {
            assert_eq!(nearest_surface_distance(v, &m).unwrap(), 0.0);
        }
    }

    #[test]
    fn point_above_cube_top() {
        let d = nearest_surface_distance(&Point3::new(0.0, 0.0, 15.0), &cube(10.0)).unwrap();
        assert!((d - 10.0).abs() < 1e-12);
    }

    #[test]
    fn triangle_regions() {
        let a = Point3::new(0.0, 0.0, 0.0);
        let b = Point3::new(1.0, 0.0, 0.0);
        let c = Point3::new(0.0, 1.0, 0.0);
        // interior
        let q = closest_point_on_triangle(&Point3::new(0.2, 0.2, 3.0), &a, &b, &c);
        assert!((q - Point3::new(0.2, 0.2, 0.0)).norm() < 1e-15);
        // vertex regions
        assert_eq!(closest_point_on_triangle(&Point3::new(-1.0, -1.0, 0.0), &a, &b, &c), a);
        assert_eq!(closest_point_on_triangle(&Point3::new(2.0, -0.5, 0.0), &a, &b, &c), b);
        assert_eq!(closest_point_on_triangle(&Point3::new(-0.5, 2.0, 1.0), &a, &b, &c), c);
        // edge regions
        let q = closest_point_on_triangle(&Point3::new(0.5, -1.0, 0.0), &a, &b, &c);
        assert!((q - Point3::new(0.5, 0.0, 0.0)).norm() < 1e-15);
        let q = closest_point_on_triangle(&Point3::new(1.0, 1.0, 0.0), &a, &b, &c);
        assert!((q - Point3::new(0.5, 0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn bvh_matches_brute_force() {
        let m = icosphere(10.0, 2).map_vertices(|p| Point3::new(p.x * 1.3, p.y, p.z * 0.7));
        assert!(m.face_count() <= 500);
        let index = SurfaceIndex::new(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let p = Point3::new(
                rng.gen_range(-25.0..25.0),
                rng.gen_range(-25.0..25.0),
                rng.gen_range(-25.0..25.0),
            );
            let fast = index.distance(&p);
            let slow = brute_force(&p, &m);
            assert!((fast - slow).abs() < 1e-9, "{fast} vs {slow}");
        }
    }

    #[test]
    fn empty_mesh_errors() {
        assert!(nearest_surface_distance(&Point3::origin(), &TriMesh::default()).is_err());
        assert!(surface_samples(&TriMesh::default(), 10, 1).is_err());
    }

    #[test]
    fn samples_on_single_triangle_plane() {
        let m = TriMesh {
            vertices: vec![
                Point3::new(1.0, 2.0, 3.0),
                Point3::new(4.0, -1.0, 2.0),
                Point3::new(0.0, 5.0, 7.0),
            ],
            faces: vec![[0, 1, 2]],
        };
        let [a, b, c] = m.triangle(0);
        let n = (b - a).cross(&(c - a)).normalize();
        for p in surface_samples(&m, 1000, 3).unwrap() {
            assert!((p - a).dot(&n).abs() < 1e-9);
            assert!(brute_force(&p, &m) < 1e-9);
        }
    }

    #[test]
    fn cube_samples_follow_face_area() {
        let m = cube(10.0);
        let pts = surface_samples(&m, 60_000, 11).unwrap();
        // Counting oracle: assign each point to the cube side it lies on.
        let mut counts = [0usize; 6];
        for p in &pts {
            let k = (0..3).max_by(|&i, &j| p[i].abs().total_cmp(&p[j].abs())).unwrap();
            counts[2 * k + usize::from(p[k] > 0.0)] += 1;
        }
        for c in counts {
            let share = c as f64 / pts.len() as f64;
            assert!((share - 1.0 / 6.0).abs() < 0.02, "{counts:?}");
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = icosphere(3.0, 1);
        assert_eq!(surface_samples(&m, 100, 5).unwrap(), surface_samples(&m, 100, 5).unwrap());
        assert_ne!(surface_samples(&m, 100, 5).unwrap(), surface_samples(&m, 100, 6).unwrap());
    }
}
