//! Synthetic liver-sized populations.
//!
//! Each subject is an icosphere whose radius is modulated by a seeded sum of
//! low-order spherical trigonometric modes, stretched to a 1.6 : 1.2 : 1.0
//! aspect, centered at the origin and scaled to a volume drawn uniformly from
//! the configured range.

use std::path::{Path, PathBuf};

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{self, shapes::icosphere, MeshError, Plane, TriMesh};
use crate::persist::{self, PersistError};
use crate::slicer::{cross_section, signed_area, DEFAULT_OFFSETS};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const ASPECT: [f64; 3] = [1.6, 1.2, 1.0];
const MAX_RETRIES: usize = 10;
const RETRY_DAMPING: f64 = 0.7;
const MIN_RADIUS: f64 = 0.25;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth configuration: {0}")]
    InvalidConfig(String),
    #[error("subject {index}: no valid shape after {MAX_RETRIES} retries")]
    RetriesExhausted { index: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Persist(#[from] PersistError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n: usize,
    pub seed: u64,
    /// Subdivision level used when `level_jitter` is empty.
    pub base_level: u32,
    /// Subdivision levels drawn uniformly per subject.
    pub level_jitter: Vec<u32>,
    /// Number of displacement modes, taken lowest order first.
    pub modes: usize,
    /// Bound on each mode coefficient, as a fraction of the radius.
    pub amplitude: f64,
    /// Volume range in cm³.
    pub volume_range: [f64; 2],
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 60,
            seed: 0,
            base_level: 4,
            level_jitter: vec![3, 4],
            modes: 12,
            amplitude: 0.12,
            volume_range: [800.0, 1600.0],
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_string()));
        if self.n < 2 {
            return bad("population size must be at least 2");
        }
        if !(0.0..0.5).contains(&self.amplitude) {
            return bad("amplitude must lie in [0, 0.5)");
        }
        let [lo, hi] = self.volume_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return bad("volume range must be positive and ordered");
        }
        if self.modes > mode_table().len() {
            return bad("too many displacement modes");
        }
        if self.levels().iter().any(|&l| l > 6) {
            return bad("subdivision levels above 6 are not supported");
        }
        Ok(())
    }

    fn levels(&self) -> Vec<u32> {
        if self.level_jitter.is_empty() {
            vec![self.base_level]
        } else {
            self.level_jitter.clone()
        }
    }
}

/// Angular mode `cos(pθ)·sinᵠθ·trig(qφ)`.
#[derive(Debug, Clone, Copy)]
struct Mode {
    p: i32,
    q: i32,
    sine: bool,
}

impl Mode {
    fn eval(&self, theta: f64, phi: f64) -> f64 {
        let azimuth = if self.sine {
            (self.q as f64 * phi).sin()
        } else {
            (self.q as f64 * phi).cos()
        };
        (self.p as f64 * theta).cos() * theta.sin().powi(self.q) * azimuth
    }
}

/// All non-constant modes with orders ≤ 3, lowest total order first.
fn mode_table() -> Vec<Mode> {
    let mut modes = Vec::new();
    for total in 1..=6 {
        for q in 0..=3 {
            let p = total - q;
            if !(0..=3).contains(&p) {
                continue;
            }
            modes.push(Mode { p, q, sine: false });
            if q > 0 {
                modes.push(Mode { p, q, sine: true });
            }
        }
    }
    modes
}

#[derive(Debug, Clone)]
pub struct Subject {
    pub id: String,
    pub mesh: TriMesh,
    pub volume_cm3: f64,
    pub seed: u64,
    pub level: u32,
    /// Coefficient bound actually used after any retries.
    pub amplitude: f64,
}

pub fn subject_id(index: usize) -> String {
    format!("subject_{index:03}")
}

fn sections_valid(mesh: &TriMesh) -> bool {
    let Some((lo, hi)) = mesh.bounds() else {
        return false;
    };
    DEFAULT_OFFSETS.iter().all(|f| {
        let plane = Plane::sagittal(lo.x + f * (hi.x - lo.x)).expect("finite bounds");
        match cross_section(mesh, &plane) {
            Ok(loops) => !loops.is_empty() && loops.iter().all(|l| signed_area(l) > 0.0),
            Err(_) => false,
        }
    })
}

fn shape(sphere: &TriMesh, coeffs: &[f64], modes: &[Mode]) -> Option<TriMesh> {
    let radius = |v: &Point3<f64>| {
        let theta = v.z.clamp(-1.0, 1.0).acos();
        let phi = v.y.atan2(v.x);
        1.0 + coeffs.iter().zip(modes).map(|(a, m)| a * m.eval(theta, phi)).sum::<f64>()
    };
    if sphere.vertices.iter().any(|v| radius(v) < MIN_RADIUS) {
        return None;
    }
    Some(sphere.map_vertices(|v| {
        let r = radius(v);
        Point3::new(ASPECT[0] * r * v.x, ASPECT[1] * r * v.y, ASPECT[2] * r * v.z)
    }))
}

/// Subject `index`, seeded with `cfg.seed + index`.
pub fn generate_subject(cfg: &SynthConfig, index: usize) -> Result<Subject, SynthError> {
    cfg.validate()?;
    let seed = cfg.seed.wrapping_add(index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = cfg.levels();
    let level = levels[rng.gen_range(0..levels.len())];
    let [lo, hi] = cfg.volume_range;
    let target = if hi > lo { rng.gen_range(lo..hi) } else { lo };
    let unit: Vec<f64> = (0..cfg.modes).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let modes = &mode_table()[..cfg.modes];
    let sphere = icosphere(1.0, level);

    let mut amplitude = cfg.amplitude;
    for _ in 0..=MAX_RETRIES {
        let coeffs: Vec<f64> = unit.iter().map(|u| amplitude * u).collect();
        if let Some(raw) = shape(&sphere, &coeffs, modes) {
            let c = raw.centroid();
            let centered = raw.translated(&-c.coords);
            let v0 = centered.signed_volume_mm3();
            if v0 > 0.0 {
                let s = (target * mesh::MM3_PER_CM3 / v0).cbrt();
                let scaled = centered.scaled(s);
                if sections_valid(&scaled) {
                    let volume_cm3 = mesh::signed_volume(&scaled)?.cm3;
                    return Ok(Subject {
                        id: subject_id(index),
                        mesh: scaled,
                        volume_cm3,
                        seed,
                        level,
                        amplitude,
                    });
                }
            }
        }
        amplitude *= RETRY_DAMPING;
    }
    Err(SynthError::RetriesExhausted { index })
}

pub fn generate_population(cfg: &SynthConfig) -> Result<Vec<Subject>, SynthError> {
    cfg.validate()?;
    (0..cfg.n)
        .into_par_iter()
        .map(|i| generate_subject(cfg, i))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthEntry {
    pub id: String,
    pub file: String,
    pub volume_cm3: f64,
    pub seed: u64,
    pub level: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    pub subjects: Vec<GroundTruthEntry>,
}

impl GroundTruth {
    pub fn mesh_path(&self, dir: &Path, id: &str) -> Option<PathBuf> {
        self.subjects.iter().find(|s| s.id == id).map(|s| dir.join(&s.file))
    }
}

/// Writes `<id>.obj` per subject and the ground-truth manifest into `dir`.
pub fn write_population(subjects: &[Subject], dir: impl AsRef<Path>) -> Result<GroundTruth, SynthError> {
    let dir = dir.as_ref();
    let mut entries = Vec::with_capacity(subjects.len());
    for s in subjects {
        let file = format!("{}.obj", s.id);
        mesh::save_mesh(&s.mesh, dir.join(&file))?;
        entries.push(GroundTruthEntry {
            id: s.id.clone(),
            file,
            volume_cm3: s.volume_cm3,
            seed: s.seed,
            level: s.level,
        });
    }
    let gt = GroundTruth { subjects: entries };
    let json = serde_json::to_string_pretty(&gt).expect("ground truth serializes");
    persist::write_file(&dir.join(GROUND_TRUTH_FILE), json.as_bytes())?;
    Ok(gt)
}

pub fn read_ground_truth(dir: impl AsRef<Path>) -> Result<GroundTruth, SynthError> {
    let path = dir.as_ref().join(GROUND_TRUTH_FILE);
    let bytes = persist::read_file(&path)?;
    serde_json::from_slice(&bytes).map_err(|source| {
        PersistError::Json {
            path: path.display().to_string(),
            source,
        }
        .into()
    })
}

/// Axis lengths of the unperturbed ellipsoid with the given volume (cm³).
pub fn ellipsoid_semi_axes(volume_cm3: f64) -> Vector3<f64> {
    let unit = 4.0 / 3.0 * std::f64::consts::PI * ASPECT.iter().product::<f64>();
    let s = (volume_cm3 * mesh::MM3_PER_CM3 / unit).cbrt();
    Vector3::new(ASPECT[0] * s, ASPECT[1] * s, ASPECT[2] * s)
}
