//! Rigid and non-rigid registration.
//!
//! [`nonrigid_fit`] deforms a template onto a target surface so that every
//! member of a population shares the template's vertex topology, and
//! [`generalized_procrustes`] then removes translation and rotation (never
//! scale) across the population.

use nalgebra::{DMatrix, Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::jacobi_svd;
use crate::mesh::{MeshError, SurfaceIndex, TriMesh};

#[derive(Debug, Error)]
pub enum RegisterError {
    #[error("point sets differ in length ({source_len} vs {target_len})")]
    LengthMismatch { source_len: usize, target_len: usize },
    #[error("need at least 3 point pairs, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate point configuration (cross-covariance rank < 2)")]
    Degenerate,
    #[error("non-finite value during non-rigid fit at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("population member {index} has a different topology than member 0")]
    TopologyMismatch { index: usize },
    #[error("need at least 2 meshes, got {0}")]
    TooFewMeshes(usize),
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Proper rigid motion `p ↦ R·p + t` (no reflection, no scale).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply_mesh(&self, mesh: &TriMesh) -> TriMesh {
        mesh.map_vertices(|p| self.apply(p))
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * first.rotation,
            translation: self.rotation * first.translation + self.translation,
        }
    }
}

/// Least-squares rotation and translation taking `source` onto `target`
/// (Kabsch, reflections excluded).
pub fn rigid_align(
    source: &[Point3<f64>],
    target: &[Point3<f64>],
) -> Result<RigidTransform, RegisterError> {
    if source.len() != target.len() {
        return Err(RegisterError::LengthMismatch {
            source_len: source.len(),
            target_len: target.len(),
        });
    }
    if source.len() < 3 {
        return Err(RegisterError::TooFewPoints(source.len()));
    }
    let n = source.len() as f64;
    let cs = source.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let ct = target.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let mut h = Matrix3::zeros();
    for (s, t) in source.iter().zip(target) {
        h += (s.coords - cs) * (t.coords - ct).transpose();
    }
    let svd = jacobi_svd(&DMatrix::from_column_slice(3, 3, h.as_slice()));
    let sv = &svd.singular_values;
    if !(sv[0] > 0.0) || sv[1] <= sv[0] * 1e-12 {
        return Err(RegisterError::Degenerate);
    }
    let mut u = Matrix3::from_column_slice(svd.u.as_slice());
    let v = Matrix3::from_column_slice(svd.v.as_slice());
    if sv[2] <= sv[0] * 1e-12 {
        // Planar configuration: complete the left basis.
        let u3 = u.column(0).cross(&u.column(1));
        u.set_column(2, &u3);
    }
    let d = (v * u.transpose()).determinant().signum();
    let correction = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d));
    let rotation = v * correction * u.transpose();
    if !rotation.iter().all(|x| x.is_finite()) {
        return Err(RegisterError::Degenerate);
    }
    Ok(RigidTransform {
        rotation,
        translation: ct - rotation * cs,
    })
}

/// Parameters of the Laplacian-regularized nearest-point fitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    /// Iteration cap for the non-rigid stage.
    pub iterations: usize,
    /// Weight of the Laplacian smoothness term.
    pub smoothness: f64,
    /// Fraction of the solved update applied per iteration, in (0, 1].
    pub damping: f64,
    /// Stop once the mean per-vertex update falls below this (mm).
    pub tolerance: f64,
    /// Iteration cap for the rigid nearest-point initialization.
    pub rigid_iterations: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            iterations: 50,
            smoothness: 1.0,
            damping: 0.5,
            tolerance: 0.01,
            rigid_iterations: 30,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), RegisterError> {
        if self.iterations == 0 {
            return Err(RegisterError::InvalidConfig("iterations must be >= 1".into()));
        }
        if !(self.smoothness >= 0.0 && self.smoothness.is_finite()) {
            return Err(RegisterError::InvalidConfig("smoothness must be >= 0".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(RegisterError::InvalidConfig("damping must lie in (0, 1]".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(RegisterError::InvalidConfig("tolerance must be >= 0".into()));
        }
        Ok(())
    }
}

/// Outcome of [`nonrigid_fit_traced`].
#[derive(Debug, Clone)]
pub struct FitTrace {
    pub mesh: TriMesh,
    /// Rigid initialization applied to the template before deformation.
    pub initial_pose: RigidTransform,
    /// Objective at the start of every non-rigid iteration, plus the final value.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Deforms `template` onto the surface of `target`, keeping the template's faces.
pub fn nonrigid_fit(
    template: &TriMesh,
    target: &TriMesh,
    cfg: &FitConfig,
) -> Result<TriMesh, RegisterError> {
    nonrigid_fit_traced(template, target, cfg).map(|t| t.mesh)
}

/// [`nonrigid_fit`] with the per-iteration objective history.
///
/// With `X` the rigidly initialized template and `D` the accumulated
/// displacement field, each iteration fixes nearest-point targets `c` for
/// `X + D`, solves `(I + λ·LᵀL)·D* = c − X` and moves `D` a damped step toward
/// `D*`. The objective `Σ dist²(X + D, target) + λ‖L·D‖²` cannot increase.
pub fn nonrigid_fit_traced(
    template: &TriMesh,
    target: &TriMesh,
    cfg: &FitConfig,
) -> Result<FitTrace, RegisterError> {
    cfg.validate()?;
    if template.is_empty() || target.is_empty() {
        return Err(MeshError::Empty.into());
    }
    template.check_closed()?;
    let index = SurfaceIndex::new(target)?;

    let pose = rigid_initialization(template, target, &index, cfg.rigid_iterations)?;
    let base: Vec<Vector3<f64>> = template
        .vertices
        .iter()
        .map(|p| pose.apply(p).coords)
        .collect();
    let laplacian = UniformLaplacian::new(template);
    let m = base.len();

    let mut disp = vec![Vector3::zeros(); m];
    let mut objective = Vec::with_capacity(cfg.iterations + 1);
    let mut converged = false;
    let mut iterations = 0;
    let mut goal = vec![Vector3::zeros(); m];

    for it in 0..cfg.iterations {
        iterations = it + 1;
        let mut data = 0.0;
        for i in 0..m {
            let x = Point3::from(base[i] + disp[i]);
            let c = index.closest(&x);
            data += c.distance * c.distance;
            goal[i] = c.point.coords - base[i];
        }
        objective.push(data + cfg.smoothness * laplacian.energy(&disp));

        let solved = laplacian.solve_regularized(cfg.smoothness, &goal, &disp);
        let mut moved = 0.0;
        for i in 0..m {
            let step = (solved[i] - disp[i]) * cfg.damping;
            disp[i] += step;
            moved += step.norm();
        }
        if !disp.iter().all(|d| d.iter().all(|x| x.is_finite())) {
            return Err(RegisterError::NonFinite { iteration: it });
        }
        if moved / m as f64 <= cfg.tolerance {
            converged = true;
            break;
        }
    }

    let vertices: Vec<Point3<f64>> = base
        .iter()
        .zip(&disp)
        .map(|(b, d)| Point3::from(b + d))
        .collect();
    let data: f64 = vertices.iter().map(|v| index.distance(v).powi(2)).sum();
    objective.push(data + cfg.smoothness * laplacian.energy(&disp));

    Ok(FitTrace {
        mesh: TriMesh {
            vertices,
            faces: template.faces.clone(),
        },
        initial_pose: pose,
        objective,
        iterations,
        converged,
    })
}

/// Rigid pose of `source` on the surface of `target`: centroid match
/// followed by ICP over vertex → nearest surface point pairs.
pub fn rigid_icp(source: &TriMesh, target: &TriMesh, max_rounds: usize) -> Result<RigidTransform, RegisterError> {
    if source.is_empty() || target.is_empty() {
        return Err(MeshError::Empty.into());
    }
    let index = SurfaceIndex::new(target)?;
    rigid_initialization(source, target, &index, max_rounds)
}

/// Centroid match followed by rigid ICP over template-vertex → nearest
/// surface point pairs.
fn rigid_initialization(
    template: &TriMesh,
    target: &TriMesh,
    index: &SurfaceIndex<'_>,
    max_rounds: usize,
) -> Result<RigidTransform, RegisterError> {
    let mut pose = RigidTransform {
        rotation: Matrix3::identity(),
        translation: target.centroid() - template.centroid(),
    };
    let mut moved: Vec<Point3<f64>> = template.vertices.iter().map(|p| pose.apply(p)).collect();
    let mut last_rms = f64::INFINITY;
    for _ in 0..max_rounds {
        let pairs: Vec<Point3<f64>> = moved.iter().map(|p| index.closest(p).point).collect();
        let rms = (moved
            .iter()
            .zip(&pairs)
            .map(|(a, b)| (a - b).norm_squared())
            .sum::<f64>()
            / moved.len() as f64)
            .sqrt();
        if rms == 0.0 || last_rms - rms <= 1e-9 * (1.0 + rms) {
            break;
        }
        last_rms = rms;
        let step = rigid_align(&moved, &pairs)?;
        pose = step.after(&pose);
        moved = template.vertices.iter().map(|p| pose.apply(p)).collect();
    }
    Ok(pose)
}

/// Uniform graph Laplacian `(L·d)_i = d_i − mean_{j ∈ N(i)} d_j`.
struct UniformLaplacian {
    neighbors: Vec<Vec<usize>>,
}

impl UniformLaplacian {
    fn new(mesh: &TriMesh) -> Self {
        Self {
            neighbors: mesh.vertex_neighbors(),
        }
    }

    fn apply(&self, d: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
        self.neighbors
            .iter()
            .enumerate()
            .map(|(i, nb)| {
                if nb.is_empty() {
                    return Vector3::zeros();
                }
                let mean = nb.iter().fold(Vector3::zeros(), |a, &j| a + d[j]) / nb.len() as f64;
                d[i] - mean
            })
            .collect()
    }

    fn apply_transpose(&self, w: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
        let mut out = vec![Vector3::zeros(); w.len()];
        for (i, nb) in self.neighbors.iter().enumerate() {
            if nb.is_empty() {
                continue;
            }
            out[i] += w[i];
            let share = w[i] / nb.len() as f64;
            for &j in nb {
                out[j] -= share;
            }
        }
        out
    }

    fn energy(&self, d: &[Vector3<f64>]) -> f64 {
        self.apply(d).iter().map(|v| v.norm_squared()).sum()
    }

    /// Solves `(I + λ·LᵀL)·x = rhs` by conjugate gradients from `start`.
    /// The operator is SPD with spectrum in `[1, 1 + 4λ]`.
    fn solve_regularized(
        &self,
        lambda: f64,
        rhs: &[Vector3<f64>],
        start: &[Vector3<f64>],
    ) -> Vec<Vector3<f64>> {
        if lambda == 0.0 {
            return rhs.to_vec();
        }
        let op = |x: &[Vector3<f64>]| -> Vec<Vector3<f64>> {
            let ltl = self.apply_transpose(&self.apply(x));
            x.iter().zip(&ltl).map(|(a, b)| a + b * lambda).collect()
        };
        let dot = |a: &[Vector3<f64>], b: &[Vector3<f64>]| -> f64 {
            a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
        };

        let mut x = start.to_vec();
        let ax = op(&x);
        let mut r: Vec<Vector3<f64>> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let mut p = r.clone();
        let mut rr = dot(&r, &r);
        let rhs_norm2 = dot(rhs, rhs).max(f64::MIN_POSITIVE);
        for _ in 0..(4 * rhs.len()).max(200) {
            if rr <= 1e-26 * rhs_norm2 {
                break;
            }
            let ap = op(&p);
            let alpha = rr / dot(&p, &ap);
            for i in 0..x.len() {
                x[i] += p[i] * alpha;
                r[i] -= ap[i] * alpha;
            }
            let rr_next = dot(&r, &r);
            let beta = rr_next / rr;
            rr = rr_next;
            for i in 0..p.len() {
                p[i] = r[i] + p[i] * beta;
            }
        }
        x
    }
}

/// Iteratively aligns every mesh to the running mean shape (rotation and
/// translation only). Outputs are centered at the origin, and their mean is
/// oriented like the mean of the centered inputs.
pub fn generalized_procrustes(
    population: &[TriMesh],
    max_rounds: usize,
) -> Result<Vec<TriMesh>, RegisterError> {
    if population.len() < 2 {
        return Err(RegisterError::TooFewMeshes(population.len()));
    }
    let first = &population[0];
    for (i, m) in population.iter().enumerate().skip(1) {
        if m.vertex_count() != first.vertex_count() || m.faces != first.faces {
            return Err(RegisterError::TopologyMismatch { index: i });
        }
    }
    let mut current: Vec<TriMesh> = population.iter().map(centered).collect();
    let mut mean = mean_shape(&current);
    if rigid_align(&current[0].vertices, &mean.vertices).is_err() {
        mean = current[0].clone();
    }
    for _ in 0..max_rounds.max(1) {
        current = current
            .iter()
            .map(|m| rigid_align(&m.vertices, &mean.vertices).map(|t| centered(&t.apply_mesh(m))))
            .collect::<Result<_, _>>()?;
        let next = centered(&mean_shape(&current));
        let change = next.max_vertex_deviation(&mean);
        mean = next;
        if change < 1e-6 {
            break;
        }
    }
    // The common rotation is arbitrary; express the result in the frame of
    // the input mean.
    let input_mean = mean_shape(&population.iter().map(centered).collect::<Vec<_>>());
    if let Ok(gauge) = rigid_align(&mean.vertices, &input_mean.vertices) {
        let rotate = RigidTransform {
            rotation: gauge.rotation,
            translation: Vector3::zeros(),
        };
        current = current.iter().map(|m| centered(&rotate.apply_mesh(m))).collect();
    }
    Ok(current)
}

fn centered(mesh: &TriMesh) -> TriMesh {
    let c = mesh.centroid().coords;
    mesh.translated(&-c)
}

fn mean_shape(meshes: &[TriMesh]) -> TriMesh {
    let n = meshes.len() as f64;
    let vertices = (0..meshes[0].vertex_count())
        .map(|i| {
            Point3::from(
                meshes
                    .iter()
                    .fold(Vector3::zeros(), |a, m| a + m.vertices[i].coords)
                    / n,
            )
        })
        .collect();
    TriMesh {
        vertices,
        faces: meshes[0].faces.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes::icosphere;
    use nalgebra::{Rotation3, Unit};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Point3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Point3::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)))
            .collect()
    }

    #[test]
    fn identical_sets_give_identity() {
        let pts = random_points(20, 1);
        let t = rigid_align(&pts, &pts).unwrap();
        assert!((t.rotation - Matrix3::identity()).norm() < 1e-12);
        assert!(t.translation.norm() < 1e-12);
    }

    #[test]
    fn recovers_known_motion() {
        let pts = random_points(30, 2);
        let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), 30f64.to_radians());
        let shift = Vector3::new(5.0, 0.0, 0.0);
        let moved: Vec<_> = pts.iter().map(|p| rot * p + shift).collect();
        let t = rigid_align(&pts, &moved).unwrap();
        assert!((t.rotation - rot.matrix()).abs().max() < 1e-9);
        assert!((t.translation - shift).abs().max() < 1e-9);
    }

    #[test]
    fn noisy_target_residual_bounded() {
        let pts = random_points(200, 3);
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(1.0, 1.0, 0.2)), 0.9);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sigma = 0.1;
        let noisy: Vec<_> = pts
            .iter()
            .map(|p| {
                // Box-Muller per coordinate.
                let mut g = || {
                    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
                    let u2: f64 = rng.gen();
                    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos() * sigma
                };
                rot * p + Vector3::new(1.0, -2.0, 3.0) + Vector3::new(g(), g(), g())
            })
            .collect();
        let t = rigid_align(&pts, &noisy).unwrap();
        let rms = (pts
            .iter()
            .zip(&noisy)
            .map(|(p, q)| (t.apply(p) - q).norm_squared())
            .sum::<f64>()
            / pts.len() as f64)
            .sqrt();
        assert!(rms <= 3.0 * sigma, "rms {rms}");
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let pts: Vec<_> = (0..5).map(|i| Point3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        assert!(matches!(rigid_align(&pts, &pts), Err(RegisterError::Degenerate)));
        assert!(matches!(rigid_align(&pts[..2], &pts[..2]), Err(RegisterError::TooFewPoints(2))));
        assert!(matches!(rigid_align(&pts, &pts[..3]), Err(RegisterError::LengthMismatch { .. })));
    }

    #[test]
    fn planar_sets_recover_rotation() {
        let pts: Vec<_> = random_points(12, 6).into_iter().map(|p| Point3::new(p.x, p.y, 0.0)).collect();
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(0.2, 1.0, 0.4)), 1.1);
        let moved: Vec<_> = pts.iter().map(|p| rot * p + Vector3::new(0.0, 2.0, -1.0)).collect();
        let t = rigid_align(&pts, &moved).unwrap();
        assert!((t.rotation - rot.matrix()).abs().max() < 1e-9);
    }

    #[test]
    fn planar_reflection_is_not_returned() {
        // A mirrored planar set: best proper rotation still has det +1.
        let pts: Vec<_> = random_points(10, 5).into_iter().map(|p| Point3::new(p.x, p.y, 0.0)).collect();
        let mirrored: Vec<_> = pts.iter().map(|p| Point3::new(-p.x, p.y, p.z)).collect();
        let t = rigid_align(&pts, &mirrored).unwrap();
        assert!((t.rotation.determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fit_to_self_is_fixed_point() {
        let m = icosphere(20.0, 2);
        let fit = nonrigid_fit(&m, &m, &FitConfig::default()).unwrap();
        assert_eq!(fit.faces, m.faces);
        assert!(fit.max_vertex_deviation(&m) < 0.01);
    }

    #[test]
    fn fit_recovers_rigid_motion() {
        let template = icosphere(20.0, 2).map_vertices(|p| Point3::new(1.6 * p.x, 1.2 * p.y, p.z));
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(0.3, -0.2, 1.0)), 0.25);
        let target = template.map_vertices(|p| rot * p + Vector3::new(4.0, -3.0, 2.0));
        let trace = nonrigid_fit_traced(&template, &target, &FitConfig::default()).unwrap();
        let index = SurfaceIndex::new(&target).unwrap();
        let msd = trace.mesh.vertices.iter().map(|v| index.distance(v)).sum::<f64>()
            / trace.mesh.vertex_count() as f64;
        assert!(msd < 0.1, "mean surface distance {msd}");
    }

    #[test]
    fn objective_never_increases() {
        let template = icosphere(20.0, 2);
        let target = icosphere(22.0, 3).map_vertices(|p| {
            let bump = 1.0 + 0.1 * (-(p - Point3::new(0.0, 0.0, 22.0)).norm_squared() / 100.0).exp();
            Point3::from(p.coords * bump)
        });
        let trace = nonrigid_fit_traced(&template, &target, &FitConfig::default()).unwrap();
        for w in trace.objective.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-12, "{:?}", trace.objective);
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let m = icosphere(1.0, 0);
        let bad = FitConfig { damping: 0.0, ..FitConfig::default() };
        assert!(matches!(nonrigid_fit(&m, &m, &bad), Err(RegisterError::InvalidConfig(_))));
        let bad = FitConfig { iterations: 0, ..FitConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn procrustes_identical_population() {
        let m = icosphere(5.0, 1).translated(&Vector3::new(3.0, 1.0, -2.0));
        let out = generalized_procrustes(&[m.clone(), m.clone(), m], 10).unwrap();
        assert!(out[0].max_vertex_deviation(&out[1]) < 1e-9);
        assert!(out[0].centroid().coords.norm() < 1e-9);
    }

    #[test]
    fn procrustes_removes_rotation() {
        let m = icosphere(5.0, 1).map_vertices(|p| Point3::new(2.0 * p.x, p.y, 0.5 * p.z));
        let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), 0.6);
        let other = m.map_vertices(|p| rot * p + Vector3::new(10.0, 0.0, 0.0));
        let out = generalized_procrustes(&[m, other], 20).unwrap();
        assert!(out[0].max_vertex_deviation(&out[1]) < 1e-6);
        let mean_centroid = (out[0].centroid().coords + out[1].centroid().coords) / 2.0;
        assert!(mean_centroid.norm() < 1e-9);
    }

    #[test]
    fn procrustes_keeps_input_orientation() {
        // Copies rotated by +θ and −θ about z average to the unrotated shape.
        let m = icosphere(5.0, 2).map_vertices(|p| Point3::new(2.0 * p.x, p.y, 0.5 * p.z));
        let spin = |a: f64| {
            let r = Rotation3::from_axis_angle(&Vector3::z_axis(), a);
            m.map_vertices(|p| r * p)
        };
        let out = generalized_procrustes(&[spin(0.3), spin(-0.3), spin(0.2), spin(-0.2)], 20).unwrap();
        for o in &out {
            assert!(o.max_vertex_deviation(&m) < 1e-6, "{}", o.max_vertex_deviation(&m));
        }
    }

    #[test]
    fn rigid_icp_recovers_small_motion() {
        let m = icosphere(10.0, 2).map_vertices(|p| Point3::new(1.5 * p.x, p.y, 0.8 * p.z));
        let r = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(1.0, 2.0, 0.5)), 0.1);
        let moved = m.map_vertices(|p| r * p + Vector3::new(2.0, -1.0, 0.5));
        let t = rigid_icp(&m, &moved, 50).unwrap();
        // Point-to-point ICP slides slowly along the surface near the optimum.
        let dev = t.apply_mesh(&m).max_vertex_deviation(&moved);
        assert!(dev < 0.05, "{dev}");
        assert!(rigid_icp(&TriMesh::default(), &m, 5).is_err());
    }

    #[test]
    fn procrustes_is_idempotent() {
        let base = icosphere(5.0, 2);
        let pop: Vec<TriMesh> = (0..4)
            .map(|i| {
                let r = Rotation3::from_axis_angle(&Vector3::x_axis(), 0.2 * i as f64);
                let k = 1.0 + 0.1 * i as f64;
                base.map_vertices(|p| r * Point3::new(k * p.x, p.y, p.z / k))
            })
            .collect();
        let once = generalized_procrustes(&pop, 50).unwrap();
        let twice = generalized_procrustes(&once, 50).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            assert!(a.max_vertex_deviation(b) < 1e-6);
        }
    }

    #[test]
    fn procrustes_rejects_topology_mismatch() {
        let a = icosphere(1.0, 1);
        let b = icosphere(1.0, 2);
        assert!(matches!(
            generalized_procrustes(&[a.clone(), b], 5),
            Err(RegisterError::TopologyMismatch { index: 1 })
        ));
        assert!(matches!(generalized_procrustes(&[a], 5), Err(RegisterError::TooFewMeshes(1))));
    }
}
