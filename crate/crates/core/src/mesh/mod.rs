//! Triangle meshes in millimeters.
//!
//! Faces are vertex-index triples wound counter-clockwise when viewed from
//! outside. Volumes are computed with the divergence theorem and reported in
//! cm³; the mm³ → cm³ conversion lives in [`MM3_PER_CM3`] only.

mod obj;
mod query;
pub mod shapes;

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};
use thiserror::Error;

pub use obj::{load_mesh, parse_obj, save_mesh, write_obj};
pub use query::{
    closest_point_on_triangle, nearest_surface_distance, surface_samples, SurfaceIndex,
};

/// Cubic millimeters per cubic centimeter.
pub const MM3_PER_CM3: f64 = 1000.0;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("face {face} references vertex {index} but mesh has {count} vertices")]
    IndexOutOfRange {
        face: usize,
        index: usize,
        count: usize,
    },
    #[error("face {face} is degenerate (repeated vertex index)")]
    DegenerateFace { face: usize },
    #[error("mesh is not closed: edge ({a}, {b}) has no matching opposite edge")]
    UnmatchedEdge { a: usize, b: usize },
    #[error("mesh is not a manifold: directed edge ({a}, {b}) is used by more than one face")]
    DuplicateEdge { a: usize, b: usize },
    #[error("mesh is empty")]
    Empty,
    #[error("non-finite vertex coordinate at vertex {0}")]
    NonFinite(usize),
}

/// Indexed triangle mesh.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub vertices: Vec<Point3<f64>>,
    pub faces: Vec<[usize; 3]>,
}

/// Result of a volume computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Volume {
    /// Absolute enclosed volume in cm³.
    pub cm3: f64,
    /// Set when the raw signed volume was negative (faces wound inward).
    pub inverted: bool,
}

impl TriMesh {
    /// Builds a mesh and checks index bounds and face degeneracy.
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let mesh = Self { vertices, faces };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Index bounds, degenerate faces and finite coordinates.
    pub fn validate(&self) -> Result<(), MeshError> {
        let count = self.vertices.len();
        for (i, v) in self.vertices.iter().enumerate() {
            if !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()) {
                return Err(MeshError::NonFinite(i));
            }
        }
        for (f, tri) in self.faces.iter().enumerate() {
            if let Some(&index) = tri.iter().find(|&&i| i >= count) {
                return Err(MeshError::IndexOutOfRange { face: f, index, count });
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::DegenerateFace { face: f });
            }
        }
        Ok(())
    }

    /// Checks that every directed edge is used once and its reverse exists,
    /// i.e. the surface is closed and consistently oriented.
    pub fn check_closed(&self) -> Result<(), MeshError> {
        let mut directed: HashMap<(usize, usize), u32> = HashMap::with_capacity(self.faces.len() * 3);
        for tri in &self.faces {
            for k in 0..3 {
                let edge = (tri[k], tri[(k + 1) % 3]);
                let n = directed.entry(edge).or_insert(0);
                *n += 1;
                if *n > 1 {
                    return Err(MeshError::DuplicateEdge { a: edge.0, b: edge.1 });
                }
            }
        }
        // Report the smallest unmatched edge so the diagnostic is stable.
        let mut unmatched: Option<(usize, usize)> = None;
        for &(a, b) in directed.keys() {
            if !directed.contains_key(&(b, a)) && unmatched.is_none_or(|u| (a, b) < u) {
                unmatched = Some((a, b));
            }
        }
        match unmatched {
            Some((a, b)) => Err(MeshError::UnmatchedEdge { a, b }),
            None => Ok(()),
        }
    }

    pub fn is_closed(&self) -> bool {
        self.check_closed().is_ok()
    }

    /// Raw divergence-theorem volume in mm³; positive for outward winding.
    pub fn signed_volume_mm3(&self) -> f64 {
        // Summing relative to the centroid keeps the terms small for meshes
        // far from the origin.
        let c = self.centroid().coords;
        self.faces
            .iter()
            .map(|t| {
                let a = self.vertices[t[0]].coords - c;
                let b = self.vertices[t[1]].coords - c;
                let d = self.vertices[t[2]].coords - c;
                a.dot(&b.cross(&d))
            })
            .sum::<f64>()
            / 6.0
    }

    /// Vertex centroid (not area-weighted).
    pub fn centroid(&self) -> Point3<f64> {
        if self.vertices.is_empty() {
            return Point3::origin();
        }
        let sum = self
            .vertices
            .iter()
            .fold(Vector3::zeros(), |acc, v| acc + v.coords);
        Point3::from(sum / self.vertices.len() as f64)
    }

    /// Axis-aligned bounding box `(min, max)`; `None` when there are no vertices.
    pub fn bounds(&self) -> Option<(Point3<f64>, Point3<f64>)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (lo.inf(v), hi.sup(v))
        }))
    }

    pub fn bbox_diagonal(&self) -> f64 {
        self.bounds().map_or(0.0, |(lo, hi)| (hi - lo).norm())
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.triangle(f);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    pub fn triangle(&self, f: usize) -> [Point3<f64>; 3] {
        let t = self.faces[f];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    /// Reverses the winding of every face.
    pub fn flipped(&self) -> Self {
        Self {
            vertices: self.vertices.clone(),
            faces: self.faces.iter().map(|&[a, b, c]| [a, c, b]).collect(),
        }
    }

    /// Applies `f` to every vertex, keeping the topology.
    pub fn map_vertices(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> Self {
        Self {
            vertices: self.vertices.iter().map(f).collect(),
            faces: self.faces.clone(),
        }
    }

    pub fn translated(&self, t: &Vector3<f64>) -> Self {
        self.map_vertices(|v| v + t)
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map_vertices(|v| Point3::from(v.coords * s))
    }

    /// Flattened `[x0, y0, z0, x1, ...]` coordinate vector.
    pub fn flat_coords(&self) -> Vec<f64> {
        self.vertices.iter().flat_map(|v| [v.x, v.y, v.z]).collect()
    }

    /// Inverse of [`TriMesh::flat_coords`] with the given faces.
    pub fn from_flat(coords: &[f64], faces: Vec<[usize; 3]>) -> Self {
        debug_assert_eq!(coords.len() % 3, 0);
        Self {
            vertices: coords
                .chunks_exact(3)
                .map(|c| Point3::new(c[0], c[1], c[2]))
                .collect(),
            faces,
        }
    }

    /// Maximum distance between corresponding vertices of two meshes with the
    /// same vertex count.
    pub fn max_vertex_deviation(&self, other: &Self) -> f64 {
        self.vertices
            .iter()
            .zip(&other.vertices)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Sorted neighbor lists of the vertex adjacency graph.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for t in &self.faces {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }
}

/// Enclosed volume in cm³ of a closed, consistently oriented mesh.
///
/// Inward-wound meshes are accepted: the magnitude is returned and
/// [`Volume::inverted`] is set.
pub fn signed_volume(mesh: &TriMesh) -> Result<Volume, MeshError> {
    if mesh.is_empty() {
        return Err(MeshError::Empty);
    }
    mesh.check_closed()?;
    Ok(volume_unchecked(mesh))
}

/// [`signed_volume`] without the closedness check.
pub fn volume_unchecked(mesh: &TriMesh) -> Volume {
    let raw = mesh.signed_volume_mm3();
    Volume {
        cm3: raw.abs() / MM3_PER_CM3,
        inverted: raw < 0.0,
    }
}

/// Axis-aligned sagittal plane `x = offset` (mm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    offset: f64,
}

impl Plane {
    /// `None` for a non-finite offset.
    pub fn sagittal(offset: f64) -> Option<Self> {
        offset.is_finite().then_some(Self { offset })
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Signed distance of `p` from the plane along +x.
    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        p.x - self.offset
    }
}
