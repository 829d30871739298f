//! PCA shape space over a registered, pose-normalized population.
//!
//! Shapes are flattened to `s = [x0, y0, z0, x1, ...]` (length `3M`). The
//! model stores the mean `s̄`, unit principal directions `v_k` and the
//! standard deviation `σ_k` of the training scores along each direction, so
//! that shape parameters are standardized:
//!
//! ```text
//! shape(α) = s̄ + Σ_k v_k · σ_k · α_k        α_k = v_k · (s − s̄) / σ_k
//! ```

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::jacobi_svd;
use crate::mesh::TriMesh;
use crate::persist::{self, PersistError, Segment};

pub const SSM_FORMAT_VERSION: u32 = 1;

/// Component count used when the population is large enough.
pub const DEFAULT_COMPONENTS: usize = 50;

#[derive(Debug, Error)]
pub enum SsmError {
    #[error("need at least 2 meshes, got {0}")]
    TooFewMeshes(usize),
    #[error("mesh {index} does not share the reference topology")]
    TopologyMismatch { index: usize },
    #[error("requested {requested} components but at most {max} are available")]
    TooManyComponents { requested: usize, max: usize },
    #[error("component count must be at least 1")]
    ZeroComponents,
    #[error("degenerate population: component {component} has no variance")]
    DegeneratePopulation { component: usize },
    #[error("expected {expected} shape parameters, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite shape parameter at index {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Persist(#[from] PersistError),
}

/// Standardized shape parameters α.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShapeParams(pub Vec<f64>);

impl ShapeParams {
    pub fn zeros(k: usize) -> Self {
        Self(vec![0.0; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ShapeParams {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Mean shape, principal directions and score scales.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSpace {
    population_size: usize,
    mean: Vec<f64>,
    /// `3M × K`, unit orthogonal columns.
    components: DMatrix<f64>,
    score_scale: Vec<f64>,
    faces: Vec<[usize; 3]>,
}

/// Component count to request for a population of `n`: the default when
/// it fits, otherwise `n − 1`.
pub fn default_components(n: usize) -> usize {
    DEFAULT_COMPONENTS.min(n.saturating_sub(1))
}

/// Builds a `k`-component shape space from same-topology, aligned meshes.
pub fn build_ssm(population: &[TriMesh], k: usize) -> Result<ShapeSpace, SsmError> {
    let n = population.len();
    if n < 2 {
        return Err(SsmError::TooFewMeshes(n));
    }
    let reference = &population[0];
    for (i, m) in population.iter().enumerate().skip(1) {
        if m.vertex_count() != reference.vertex_count() || m.faces != reference.faces {
            return Err(SsmError::TopologyMismatch { index: i });
        }
    }
    let dim = 3 * reference.vertex_count();
    if k == 0 {
        return Err(SsmError::ZeroComponents);
    }
    let max = (n - 1).min(dim);
    if k > max {
        return Err(SsmError::TooManyComponents { requested: k, max });
    }

    let flat: Vec<Vec<f64>> = population.iter().map(TriMesh::flat_coords).collect();
    let mut mean = vec![0.0; dim];
    for s in &flat {
        for (m, x) in mean.iter_mut().zip(s) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    // Centered data, one column per subject.
    let centered = DMatrix::from_fn(dim, n, |r, c| flat[c][r] - mean[r]);
    let svd = jacobi_svd(&centered);

    let mut components = DMatrix::zeros(dim, k);
    for j in 0..k {
        let mut col = svd.u.column(j).into_owned();
        // Largest-magnitude entry positive; first index wins ties.
        let (imax, _) = col
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bv), (i, &v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
        if col[imax] < 0.0 {
            col.neg_mut();
        }
        components.set_column(j, &col);
    }

    // Population std of the training scores (divisor N). Scores have zero
    // mean because the data are centered.
    let scores = components.transpose() * &centered;
    let score_scale: Vec<f64> = (0..k)
        .map(|j| {
            let row = scores.row(j);
            let mu = row.sum() / n as f64;
            (row.iter().map(|s| (s - mu) * (s - mu)).sum::<f64>() / n as f64).sqrt()
        })
        .collect();
    let top = score_scale.first().copied().unwrap_or(0.0);
    let scale_ref = mean.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1.0);
    for (j, &s) in score_scale.iter().enumerate() {
        if !(s > 1e-12 * scale_ref) || s < 1e-10 * top {
            return Err(SsmError::DegeneratePopulation { component: j });
        }
    }

    Ok(ShapeSpace {
        population_size: n,
        mean,
        components,
        score_scale,
        faces: reference.faces.clone(),
    })
}

impl ShapeSpace {
    /// Vertex count `M` of the reference topology.
    pub fn vertex_count(&self) -> usize {
        self.mean.len() / 3
    }

    /// Training population size `N`.
    pub fn population_size(&self) -> usize {
        self.population_size
    }

    /// Retained component count `K`.
    pub fn component_count(&self) -> usize {
        self.components.ncols()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    pub fn score_scale(&self) -> &[f64] {
        &self.score_scale
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn mean_mesh(&self) -> TriMesh {
        TriMesh::from_flat(&self.mean, self.faces.clone())
    }

    fn check_topology(&self, mesh: &TriMesh) -> Result<(), SsmError> {
        if mesh.vertex_count() != self.vertex_count() || mesh.faces != self.faces {
            return Err(SsmError::TopologyMismatch { index: 0 });
        }
        Ok(())
    }

    /// Standardized scores of `mesh` along the retained components.
    pub fn project(&self, mesh: &TriMesh) -> Result<ShapeParams, SsmError> {
        self.check_topology(mesh)?;
        let flat = mesh.flat_coords();
        let alpha = (0..self.component_count())
            .map(|k| {
                let v = self.components.column(k);
                let dot: f64 = v
                    .iter()
                    .zip(flat.iter().zip(&self.mean))
                    .map(|(vi, (s, m))| vi * (s - m))
                    .sum();
                dot / self.score_scale[k]
            })
            .collect();
        Ok(ShapeParams(alpha))
    }

    /// Mesh for standardized parameters `params`.
    pub fn reconstruct(&self, params: &ShapeParams) -> Result<TriMesh, SsmError> {
        let k = self.component_count();
        if params.len() != k {
            return Err(SsmError::LengthMismatch {
                expected: k,
                found: params.len(),
            });
        }
        if let Some(i) = params.0.iter().position(|a| !a.is_finite()) {
            return Err(SsmError::NonFinite(i));
        }
        let mut flat = self.mean.clone();
        for (j, a) in params.0.iter().enumerate() {
            let w = a * self.score_scale[j];
            if w == 0.0 {
                continue;
            }
            for (x, v) in flat.iter_mut().zip(self.components.column(j).iter()) {
                *x += v * w;
            }
        }
        Ok(TriMesh::from_flat(&flat, self.faces.clone()))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SsmManifest {
    format_version: u32,
    #[serde(rename = "M")]
    vertex_count: usize,
    #[serde(rename = "N")]
    population_size: usize,
    #[serde(rename = "K")]
    components: usize,
    faces: Vec<[usize; 3]>,
    payload: SsmPayload,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SsmPayload {
    file: String,
    mean: Segment,
    /// Column-major `3M × K`.
    components: Segment,
    score_scale: Segment,
}

/// Writes `<path>` (JSON manifest) and its `.bin` sidecar.
pub fn save_ssm(space: &ShapeSpace, path: impl AsRef<Path>) -> Result<(), SsmError> {
    let path = path.as_ref();
    let (bytes, segs) = persist::pack(&[
        &space.mean,
        space.components.as_slice(),
        &space.score_scale,
    ]);
    let manifest = SsmManifest {
        format_version: SSM_FORMAT_VERSION,
        vertex_count: space.vertex_count(),
        population_size: space.population_size,
        components: space.component_count(),
        faces: space.faces.clone(),
        payload: SsmPayload {
            file: sidecar_name(path),
            mean: segs[0],
            components: segs[1],
            score_scale: segs[2],
        },
    };
    persist::write_pair(path, &manifest, &bytes)?;
    Ok(())
}

pub(crate) fn sidecar_name(path: &Path) -> String {
    persist::sidecar_path(path)
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn load_ssm(path: impl AsRef<Path>) -> Result<ShapeSpace, SsmError> {
    let path = path.as_ref();
    let (manifest, bytes) = persist::read_pair::<SsmManifest>(path, |m| {
        persist::contiguous_size(&[m.payload.mean, m.payload.components, m.payload.score_scale])
            .unwrap_or(usize::MAX)
    })
    .map_err(|e| match e {
        // An undecodable layout surfaces as an absurd expected size.
        PersistError::Truncated { expected: usize::MAX, .. } => {
            PersistError::Inconsistent("payload segments are not contiguous".into())
        }
        other => other,
    })?;
    if manifest.format_version != SSM_FORMAT_VERSION {
        return Err(PersistError::Version {
            found: manifest.format_version,
            expected: SSM_FORMAT_VERSION,
        }
        .into());
    }
    let (m, n, k) = (manifest.vertex_count, manifest.population_size, manifest.components);
    let p = &manifest.payload;
    let inconsistent = |what: &str| SsmError::Persist(PersistError::Inconsistent(what.to_string()));
    if p.mean.len != 3 * m {
        return Err(inconsistent("mean length differs from 3M"));
    }
    if p.components.len != 3 * m * k {
        return Err(inconsistent("component payload size differs from 3M x K"));
    }
    if p.score_scale.len != k {
        return Err(inconsistent("score scale length differs from K"));
    }
    if k == 0 || k > n.saturating_sub(1) {
        return Err(inconsistent("K must satisfy 1 <= K <= N - 1"));
    }
    if manifest.faces.iter().flatten().any(|&i| i >= m) {
        return Err(inconsistent("face index out of range"));
    }
    let mean = persist::unpack(&bytes, p.mean, path)?;
    let comps = persist::unpack(&bytes, p.components, path)?;
    let score_scale = persist::unpack(&bytes, p.score_scale, path)?;
    if score_scale.iter().any(|s| !(*s > 0.0)) {
        return Err(inconsistent("score scales must be positive"));
    }
    Ok(ShapeSpace {
        population_size: n,
        mean,
        components: DMatrix::from_column_slice(3 * m, k, &comps),
        score_scale,
        faces: manifest.faces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes::icosphere;
    use nalgebra::Point3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Random smooth radial perturbations of an ellipsoid: cubic polynomial
    /// in the unit direction plus per-axis scales (23 random coefficients).
    fn blobs(n: usize, seed: u64) -> Vec<TriMesh> {
        let base = icosphere(10.0, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let c: [f64; 20] = std::array::from_fn(|_| rng.gen_range(-0.05..0.05));
                let s: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.9..1.1));
                base.map_vertices(|p| {
                    let u = p.coords / 10.0;
                    let mut r = 1.0;
                    let mut j = 0;
                    for a in 0..=3 {
                        for b in 0..=(3 - a) {
                            for d in 0..=(3 - a - b) {
                                r += c[j] * u.x.powi(a) * u.y.powi(b) * u.z.powi(d);
                                j += 1;
                            }
                        }
                    }
                    Point3::new(p.x * r * s[0], p.y * r * 1.2 * s[1], p.z * r * s[2])
                })
            })
            .collect()
    }

    fn assert_orthonormal(space: &ShapeSpace) {
        let v = space.components();
        let gram = v.transpose() * v;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - expect).abs() < 1e-9, "gram[{i},{j}] = {}", gram[(i, j)]);
            }
        }
    }

    #[test]
    fn identical_population_is_degenerate() {
        let m = icosphere(3.0, 1);
        let err = build_ssm(&[m.clone(), m.clone(), m], 1).unwrap_err();
        assert!(matches!(err, SsmError::DegeneratePopulation { component: 0 }));
    }

    #[test]
    fn two_sample_pca_by_hand() {
        let a = icosphere(3.0, 1);
        let delta = nalgebra::Vector3::new(0.5, -1.0, 2.0);
        let b = a.translated(&delta);
        let space = build_ssm(&[a.clone(), b.clone()], 1).unwrap();
        let diff: Vec<f64> = b
            .flat_coords()
            .iter()
            .zip(a.flat_coords())
            .map(|(x, y)| x - y)
            .collect();
        let norm = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
        let v = space.components().column(0);
        let cos: f64 = v.iter().zip(&diff).map(|(x, d)| x * d).sum::<f64>() / norm;
        assert!((cos.abs() - 1.0).abs() < 1e-12, "cos = {cos}");
        assert!((space.score_scale()[0] - norm / 2.0).abs() < 1e-12);
        let mean = a.flat_coords().iter().zip(b.flat_coords()).map(|(x, y)| (x + y) / 2.0).collect::<Vec<_>>();
        assert!(space.mean().iter().zip(&mean).all(|(x, y)| (x - y).abs() < 1e-12));
    }

    #[test]
    fn invariants_on_random_population() {
        let pop = blobs(20, 3);
        let space = build_ssm(&pop, 10).unwrap();
        assert_orthonormal(&space);
        assert!(space.score_scale().windows(2).all(|w| w[0] >= w[1] && w[1] > 0.0));
        // Mean member projects to zero and reconstructs the mean.
        let mean = space.mean_mesh();
        let alpha = space.project(&mean).unwrap();
        assert!(alpha.0.iter().all(|a| a.abs() < 1e-9));
        assert!(space.reconstruct(&alpha).unwrap().max_vertex_deviation(&mean) < 1e-9);
        // Standardized training scores.
        let scores: Vec<ShapeParams> = pop.iter().map(|m| space.project(m).unwrap()).collect();
        for k in 0..10 {
            let mu = scores.iter().map(|s| s.0[k]).sum::<f64>() / 20.0;
            let var = scores.iter().map(|s| (s.0[k] - mu).powi(2)).sum::<f64>() / 20.0;
            assert!(mu.abs() < 1e-8);
            assert!((var.sqrt() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn one_hot_reconstruction() {
        let space = build_ssm(&blobs(8, 4), 3).unwrap();
        let mut a = ShapeParams::zeros(3);
        a.0[1] = 1.0;
        let m = space.reconstruct(&a).unwrap();
        let flat = m.flat_coords();
        let sigma = space.score_scale()[1];
        for (i, x) in flat.iter().enumerate() {
            let expect = space.mean()[i] + sigma * space.components()[(i, 1)];
            assert!((x - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn project_inverts_reconstruct() {
        let space = build_ssm(&blobs(12, 5), 6).unwrap();
        let alpha = ShapeParams(vec![0.3, -1.2, 2.0, 0.0, -0.7, 1.1]);
        let back = space.project(&space.reconstruct(&alpha).unwrap()).unwrap();
        for (a, b) in alpha.0.iter().zip(&back.0) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn full_rank_space_is_exact_on_training_set() {
        let pop = blobs(10, 6);
        let space = build_ssm(&pop, 9).unwrap();
        for m in &pop {
            let r = space.reconstruct(&space.project(m).unwrap()).unwrap();
            assert!(r.max_vertex_deviation(m) / m.bbox_diagonal() < 1e-8);
        }
    }

    #[test]
    fn residual_shrinks_with_more_components() {
        let pop = blobs(30, 7);
        let held_out = &blobs(1, 99)[0];
        let mut last = f64::INFINITY;
        for k in [5, 10, 20] {
            let space = build_ssm(&pop, k).unwrap();
            let r = space.reconstruct(&space.project(held_out).unwrap()).unwrap();
            let err: f64 = r
                .vertices
                .iter()
                .zip(&held_out.vertices)
                .map(|(a, b)| (a - b).norm_squared())
                .sum();
            assert!(err <= last + 1e-12, "k={k}: {err} > {last}");
            last = err;
        }
    }

    #[test]
    fn reconstruct_is_affine() {
        let space = build_ssm(&blobs(10, 8), 4).unwrap();
        let a1 = ShapeParams(vec![1.0, -0.5, 0.2, 2.0]);
        let a2 = ShapeParams(vec![-0.4, 0.9, 1.5, 0.0]);
        let mid = ShapeParams(a1.0.iter().zip(&a2.0).map(|(x, y)| (x + y) / 2.0).collect());
        let (m1, m2, mm) = (
            space.reconstruct(&a1).unwrap(),
            space.reconstruct(&a2).unwrap(),
            space.reconstruct(&mid).unwrap(),
        );
        for i in 0..mm.vertex_count() {
            let expect = nalgebra::center(&m1.vertices[i], &m2.vertices[i]);
            assert!((mm.vertices[i] - expect).norm() < 1e-9);
        }
    }

    #[test]
    fn argument_errors() {
        let pop = blobs(4, 9);
        assert!(matches!(build_ssm(&pop, 4), Err(SsmError::TooManyComponents { max: 3, .. })));
        assert!(matches!(build_ssm(&pop, 0), Err(SsmError::ZeroComponents)));
        assert!(matches!(build_ssm(&pop[..1], 1), Err(SsmError::TooFewMeshes(1))));
        let mut bad = pop.clone();
        bad[2] = icosphere(10.0, 2);
        assert!(matches!(build_ssm(&bad, 1), Err(SsmError::TopologyMismatch { index: 2 })));
        let space = build_ssm(&pop, 2).unwrap();
        assert!(matches!(space.reconstruct(&ShapeParams::zeros(3)), Err(SsmError::LengthMismatch { .. })));
        assert!(matches!(
            space.reconstruct(&ShapeParams(vec![0.0, f64::NAN])),
            Err(SsmError::NonFinite(1))
        ));
        assert!(space.project(&icosphere(1.0, 2)).is_err());
        assert_eq!(default_components(134), 50);
        assert_eq!(default_components(20), 19);
    }

    #[test]
    fn persistence_round_trip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ssm.json");
        let space = build_ssm(&blobs(6, 10), 5).unwrap();
        save_ssm(&space, &path).unwrap();
        let back = load_ssm(&path).unwrap();
        assert_eq!(back, space);
        assert!(back
            .components()
            .iter()
            .zip(space.components().iter())
            .all(|(a, b)| a.to_bits() == b.to_bits()));

        // Truncated payload.
        let bin = dir.path().join("model.ssm.bin");
        let bytes = std::fs::read(&bin).unwrap();
        std::fs::write(&bin, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(load_ssm(&path), Err(SsmError::Persist(PersistError::Truncated { .. }))));
        std::fs::write(&bin, &bytes).unwrap();

        // Manifest claims more components than the payload holds.
        let text = std::fs::read_to_string(&path).unwrap();
        let mut json: serde_json::Value = serde_json::from_str(&text).unwrap();
        json["K"] = serde_json::json!(4);
        std::fs::write(&path, serde_json::to_string(&json).unwrap()).unwrap();
        assert!(load_ssm(&path).is_err());

        json["K"] = serde_json::json!(5);
        json["format_version"] = serde_json::json!(99);
        std::fs::write(&path, serde_json::to_string(&json).unwrap()).unwrap();
        assert!(matches!(load_ssm(&path), Err(SsmError::Persist(PersistError::Version { .. }))));
    }
}
