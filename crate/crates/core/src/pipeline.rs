//! End-to-end workflow: synthesize, register and model, slice, train,
//! reconstruct and evaluate, all driven by one JSON config.
//!
//! Layout under `paths.output_dir`:
//!
//! ```text
//! dataset.json              split, reference subject, slicing window
//! registered/<id>.obj       aligned SSM population
//! masks/<id>/stack.json     mask stack per subject (+ slice_<i>.pgm)
//! training_log.csv
//! reconstructions/<id>.obj
//! evaluation.json, evaluation.txt
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{self, MeshError, TriMesh};
use crate::metrics::{self, MetricsError, DEFAULT_SURFACE_SAMPLES};
use crate::persist::{self, PersistError};
use crate::register::{generalized_procrustes, nonrigid_fit, rigid_icp, FitConfig, RegisterError};
use crate::regressor::{self, BinaryInput, RegressorError, Sample, TrainConfig};
use crate::slicer::{self, Box3, SliceError, SliceProtocol, DEFAULT_OFFSETS, DEFAULT_RESOLUTION};
use crate::ssm::{self, ShapeSpace, SsmError, DEFAULT_COMPONENTS};
use crate::stats::{self, PairedTestReport, StatsError};
use crate::synth::{self, SynthConfig, SynthError};

pub const DATASET_FILE: &str = "dataset.json";
pub const EVALUATION_JSON: &str = "evaluation.json";
pub const EVALUATION_TXT: &str = "evaluation.txt";
pub const TRAINING_LOG: &str = "training_log.csv";
pub const THREADS_ENV: &str = "SSMRECON_THREADS";
pub const OURS_LABEL: &str = "Truth & Ours";
pub const BASELINE_LABEL: &str = "Truth & Mean shape";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config {path}: {message}")]
    Config { path: String, message: String },
    #[error("unknown subject {0}")]
    UnknownSubject(String),
    #[error("missing {what} at {path} (run `{step}` first)")]
    Missing {
        what: &'static str,
        path: String,
        step: &'static str,
    },
    #[error("subject {id}: {source}")]
    Subject {
        id: String,
        #[source]
        source: Box<PipelineError>,
    },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Register(#[from] RegisterError),
    #[error(transparent)]
    Ssm(#[from] SsmError),
    #[error(transparent)]
    Slice(#[from] SliceError),
    #[error(transparent)]
    Regressor(#[from] RegressorError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Persist(#[from] PersistError),
}

impl PipelineError {
    /// 1 usage/config, 2 data, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } | Self::UnknownSubject(_) => 1,
            Self::Subject { source, .. } => source.exit_code(),
            Self::Register(RegisterError::NonFinite { .. } | RegisterError::Degenerate)
            | Self::Ssm(SsmError::DegeneratePopulation { .. } | SsmError::NonFinite(_))
            | Self::Regressor(RegressorError::Diverged { .. })
            | Self::Stats(_) => 3,
            Self::Register(RegisterError::InvalidConfig(_))
            | Self::Regressor(RegressorError::InvalidConfig(_))
            | Self::Synth(SynthError::InvalidConfig(_))
            | Self::Slice(SliceError::InvalidProtocol(_)) => 1,
            _ => 2,
        }
    }

    fn for_subject(id: &str) -> impl FnOnce(PipelineError) -> PipelineError + '_ {
        move |e| PipelineError::Subject {
            id: id.to_string(),
            source: Box::new(e),
        }
    }
}

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub population_dir: PathBuf,
    pub ssm_file: PathBuf,
    pub weights_file: PathBuf,
    pub output_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            population_dir: "population".into(),
            ssm_file: "model/ssm.json".into(),
            weights_file: "model/weights.json".into(),
            output_dir: "out".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlicerConfig {
    /// Plane positions as fractions of the window's x extent.
    pub offsets: Vec<f64>,
    pub resolution: usize,
    /// Window padding on each side, as a fraction of the training bbox extent.
    pub margin: f64,
}

impl Default for SlicerConfig {
    fn default() -> Self {
        Self {
            offsets: DEFAULT_OFFSETS.to_vec(),
            resolution: DEFAULT_RESOLUTION,
            margin: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SsmConfig {
    /// Requested component count; capped at (population size − 1).
    pub components: usize,
    /// Build the model from every subject instead of the training split.
    pub use_all_subjects: bool,
    pub procrustes_rounds: usize,
}

impl Default for SsmConfig {
    fn default() -> Self {
        Self {
            components: DEFAULT_COMPONENTS,
            use_all_subjects: false,
            procrustes_rounds: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.74,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateConfig {
    pub surface_samples: usize,
    pub seed: u64,
    /// ICP rounds placing each reconstruction rigidly on the ground truth
    /// before surface distances are measured; 0 compares frames as stored.
    pub align_rounds: usize,
    /// Use the ground-truth mesh as the prediction (checks the report math).
    pub oracle_injection: bool,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            surface_samples: DEFAULT_SURFACE_SAMPLES,
            seed: 0,
            align_rounds: 30,
            oracle_injection: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub synth: SynthConfig,
    pub slicer: SlicerConfig,
    pub ssm: SsmConfig,
    pub register: FitConfig,
    pub regressor: TrainConfig,
    pub split: SplitConfig,
    pub evaluate: EvaluateConfig,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    /// Reads and validates a config; relative paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let config_err = |message: String| PipelineError::Config {
            path: path.display().to_string(),
            message,
        };
        let text = fs::read_to_string(path).map_err(|e| config_err(e.to_string()))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text).map_err(|e| config_err(e.to_string()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate().map_err(config_err)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        let s = &self.split.train_fraction;
        if !(*s > 0.0 && *s < 1.0) {
            return Err("split.train_fraction must lie in (0, 1)".into());
        }
        if self.ssm.components == 0 {
            return Err("ssm.components must be positive".into());
        }
        if !(self.slicer.margin >= 0.0 && self.slicer.margin.is_finite()) {
            return Err("slicer.margin must be non-negative".into());
        }
        if self.evaluate.surface_samples == 0 {
            return Err("evaluate.surface_samples must be positive".into());
        }
        self.synth.validate().map_err(|e| e.to_string())?;
        self.register.validate().map_err(|e| e.to_string())?;
        self.regressor.validate().map_err(|e| e.to_string())?;
        let probe = SliceProtocol {
            offsets: self.slicer.offsets.clone(),
            window: Box3 {
                min: [0.0; 3],
                max: [1.0; 3],
            },
            resolution: self.slicer.resolution,
        };
        probe.validate().map_err(|e| e.to_string())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn population_dir(&self) -> PathBuf {
        self.resolve(&self.paths.population_dir)
    }

    pub fn ssm_file(&self) -> PathBuf {
        self.resolve(&self.paths.ssm_file)
    }

    pub fn weights_file(&self) -> PathBuf {
        self.resolve(&self.paths.weights_file)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.paths.output_dir)
    }

    pub fn dataset_file(&self) -> PathBuf {
        self.output_dir().join(DATASET_FILE)
    }

    pub fn registered_path(&self, id: &str) -> PathBuf {
        self.output_dir().join("registered").join(format!("{id}.obj"))
    }

    pub fn stack_path(&self, id: &str) -> PathBuf {
        self.output_dir().join("masks").join(id).join("stack.json")
    }

    pub fn reconstruction_path(&self, id: &str) -> PathBuf {
        self.output_dir().join("reconstructions").join(format!("{id}.obj"))
    }
}

/// Sizes the global thread pool from `SSMRECON_THREADS` if set. Has no
/// effect once the pool exists.
pub fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

// ---------------------------------------------------------------------------
// Dataset bookkeeping

/// Written by `build-ssm`, read by every later step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dataset {
    pub train: Vec<String>,
    pub test: Vec<String>,
    /// Template subject every SSM member was fitted from.
    pub reference: String,
    pub ssm_members: Vec<String>,
    pub components_requested: usize,
    pub components: usize,
    /// Slicing window: training bounding box plus margin.
    pub window: Box3,
}

impl Dataset {
    pub fn load(cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        let path = cfg.dataset_file();
        let bytes = fs::read(&path).map_err(|_| PipelineError::Missing {
            what: "dataset description",
            path: path.display().to_string(),
            step: "build-ssm",
        })?;
        serde_json::from_slice(&bytes).map_err(|source| {
            PersistError::Json {
                path: path.display().to_string(),
                source,
            }
            .into()
        })
    }
}

/// Seeded shuffle into `(train, test)`, each sorted by id. Both sides keep
/// at least one subject and training keeps at least two.
pub fn split_subjects(ids: &[String], train_fraction: f64, seed: u64) -> (Vec<String>, Vec<String>) {
    let mut shuffled = ids.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = ids.len();
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(2.min(n), n.saturating_sub(1).max(1));
    let mut test = shuffled.split_off(n_train);
    shuffled.sort();
    test.sort();
    (shuffled, test)
}

fn load_population(cfg: &PipelineConfig) -> Result<(synth::GroundTruth, Vec<TriMesh>), PipelineError> {
    let dir = cfg.population_dir();
    let gt = synth::read_ground_truth(&dir).map_err(|_| PipelineError::Missing {
        what: "population ground truth",
        path: dir.join(synth::GROUND_TRUTH_FILE).display().to_string(),
        step: "synth",
    })?;
    let meshes = gt
        .subjects
        .par_iter()
        .map(|s| mesh::load_mesh(dir.join(&s.file)).map_err(|e| PipelineError::for_subject(&s.id)(e.into())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((gt, meshes))
}

fn load_ssm(cfg: &PipelineConfig) -> Result<ShapeSpace, PipelineError> {
    let path = cfg.ssm_file();
    if !path.exists() {
        return Err(PipelineError::Missing {
            what: "shape model",
            path: path.display().to_string(),
            step: "build-ssm",
        });
    }
    Ok(ssm::load_ssm(&path)?)
}

fn load_weights(cfg: &PipelineConfig) -> Result<regressor::MlpParams, PipelineError> {
    let path = cfg.weights_file();
    if !path.exists() {
        return Err(PipelineError::Missing {
            what: "network weights",
            path: path.display().to_string(),
            step: "train",
        });
    }
    Ok(regressor::load_weights(&path)?)
}

fn load_subject_stack(cfg: &PipelineConfig, id: &str) -> Result<slicer::MaskStack, PipelineError> {
    let path = cfg.stack_path(id);
    if !path.exists() {
        return Err(PipelineError::Missing {
            what: "mask stack",
            path: path.display().to_string(),
            step: "slice",
        });
    }
    Ok(slicer::load_stack(&path)?)
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    persist::write_file(path, text.as_bytes())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Commands

pub fn cmd_synth(cfg: &PipelineConfig) -> Result<synth::GroundTruth, PipelineError> {
    let subjects = synth::generate_population(&cfg.synth)?;
    Ok(synth::write_population(&subjects, cfg.population_dir())?)
}

/// Splits the population, fits the reference subject's mesh to every SSM
/// member, aligns them by generalized Procrustes and builds the shape model.
pub fn cmd_build_ssm(cfg: &PipelineConfig) -> Result<Dataset, PipelineError> {
    let (gt, meshes) = load_population(cfg)?;
    if meshes.len() < 3 {
        return Err(PipelineError::Register(RegisterError::TooFewMeshes(meshes.len())));
    }
    let ids: Vec<String> = gt.subjects.iter().map(|s| s.id.clone()).collect();
    let (train, test) = split_subjects(&ids, cfg.split.train_fraction, cfg.split.seed);
    let index_of = |id: &str| ids.iter().position(|x| x == id).expect("id from population");

    let train_meshes: Vec<TriMesh> = train.iter().map(|id| meshes[index_of(id)].clone()).collect();
    let window = Box3::around(&train_meshes, cfg.slicer.margin).ok_or(MeshError::Empty)?;

    let members = if cfg.ssm.use_all_subjects { ids.clone() } else { train.clone() };
    let reference = members[0].clone();
    let template = &meshes[index_of(&reference)];
    let fitted = members
        .par_iter()
        .map(|id| {
            let target = &meshes[index_of(id)];
            if id == &reference {
                Ok(template.clone())
            } else {
                nonrigid_fit(template, target, &cfg.register).map_err(|e| PipelineError::for_subject(id)(e.into()))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let aligned = generalized_procrustes(&fitted, cfg.ssm.procrustes_rounds)?;

    let components = cfg.ssm.components.min(aligned.len() - 1);
    let space = ssm::build_ssm(&aligned, components)?;
    ssm::save_ssm(&space, cfg.ssm_file())?;
    for (id, m) in members.iter().zip(&aligned) {
        mesh::save_mesh(m, cfg.registered_path(id))?;
    }

    let dataset = Dataset {
        train,
        test,
        reference,
        ssm_members: members,
        components_requested: cfg.ssm.components,
        components,
        window,
    };
    let json = serde_json::to_string_pretty(&dataset).expect("dataset serializes");
    write_text(&cfg.dataset_file(), &json)?;
    Ok(dataset)
}

pub fn slice_protocol(cfg: &PipelineConfig, dataset: &Dataset) -> SliceProtocol {
    SliceProtocol {
        offsets: cfg.slicer.offsets.clone(),
        window: dataset.window,
        resolution: cfg.slicer.resolution,
    }
}

/// Mask stacks for every subject, from the original meshes.
pub fn cmd_slice(cfg: &PipelineConfig) -> Result<usize, PipelineError> {
    let dataset = Dataset::load(cfg)?;
    let protocol = slice_protocol(cfg, &dataset);
    let (gt, meshes) = load_population(cfg)?;
    gt.subjects
        .par_iter()
        .zip(&meshes)
        .map(|(s, m)| -> Result<(), PipelineError> {
            let stack = slicer::make_mask_stack(m, &protocol).map_err(|e| PipelineError::for_subject(&s.id)(e.into()))?;
            slicer::save_stack(&stack, cfg.stack_path(&s.id))?;
            Ok(())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(meshes.len())
}

/// Training pairs for `ids`: mask stack input, projected registered mesh target.
pub fn training_samples(cfg: &PipelineConfig, space: &ShapeSpace, ids: &[String]) -> Result<Vec<Sample>, PipelineError> {
    ids.par_iter()
        .map(|id| -> Result<Sample, PipelineError> {
            let wrap = PipelineError::for_subject(id);
            let inner = || -> Result<Sample, PipelineError> {
                let path = cfg.registered_path(id);
                if !path.exists() {
                    return Err(PipelineError::Missing {
                        what: "registered mesh",
                        path: path.display().to_string(),
                        step: "build-ssm",
                    });
                }
                let target = space.project(&mesh::load_mesh(&path)?)?;
                let stack = load_subject_stack(cfg, id)?;
                Ok(Sample {
                    input: BinaryInput::from_stack(&stack),
                    target,
                })
            };
            inner().map_err(wrap)
        })
        .collect()
}

pub fn cmd_train(cfg: &PipelineConfig) -> Result<regressor::TrainLog, PipelineError> {
    let dataset = Dataset::load(cfg)?;
    let space = load_ssm(cfg)?;
    let samples = training_samples(cfg, &space, &dataset.train)?;
    let (params, log) = regressor::train(&samples, &cfg.regressor)?;
    regressor::save_weights(&params, cfg.weights_file())?;
    write_text(&cfg.output_dir().join(TRAINING_LOG), &log.to_csv())?;
    Ok(log)
}

/// What to reconstruct.
#[derive(Debug, Clone)]
pub enum ReconstructSource {
    Subject(String),
    Stack(PathBuf),
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub mesh: TriMesh,
    pub volume_cm3: f64,
    pub params: ssm::ShapeParams,
    pub path: PathBuf,
}

fn predict(space: &ShapeSpace, params: &regressor::MlpParams, stack: &slicer::MaskStack) -> Result<(TriMesh, ssm::ShapeParams), PipelineError> {
    let alpha = regressor::forward(params, stack)?;
    let m = space.reconstruct(&alpha)?;
    Ok((m, alpha))
}

/// Masks → α̂ → mesh; writes the OBJ and returns its volume.
pub fn cmd_reconstruct(cfg: &PipelineConfig, source: &ReconstructSource) -> Result<Reconstruction, PipelineError> {
    let (stack, name) = match source {
        ReconstructSource::Subject(id) => {
            let dataset = Dataset::load(cfg)?;
            if !dataset.train.contains(id) && !dataset.test.contains(id) {
                return Err(PipelineError::UnknownSubject(id.clone()));
            }
            (load_subject_stack(cfg, id)?, id.clone())
        }
        ReconstructSource::Stack(p) => {
            let name = p
                .parent()
                .and_then(|d| d.file_name())
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "stack".into());
            (slicer::load_stack(p)?, name)
        }
    };
    let space = load_ssm(cfg)?;
    let params = load_weights(cfg)?;
    let (m, alpha) = predict(&space, &params, &stack)?;
    let volume_cm3 = mesh::volume_unchecked(&m).cm3;
    let path = cfg.reconstruction_path(&name);
    mesh::save_mesh(&m, &path)?;
    Ok(Reconstruction {
        mesh: m,
        volume_cm3,
        params: alpha,
        path,
    })
}

// ---------------------------------------------------------------------------
// Evaluation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectResult {
    pub id: String,
    pub truth_volume_cm3: f64,
    pub predicted_volume_cm3: f64,
    pub baseline_volume_cm3: f64,
    pub chamfer_mm: f64,
    pub msd_mm: f64,
    pub baseline_chamfer_mm: f64,
    pub baseline_msd_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub name: String,
    pub rmse_cm3: f64,
    pub volume_mean_cm3: f64,
    pub volume_std_cm3: f64,
    pub chamfer_mean_mm: f64,
    pub msd_mean_mm: f64,
    /// Paired test on truth − method volumes.
    pub paired: PairedTestReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub components: usize,
    pub slices: usize,
    pub resolution: usize,
    pub oracle_injection: bool,
    pub truth_volume_mean_cm3: f64,
    pub truth_volume_std_cm3: f64,
    pub subjects: Vec<SubjectResult>,
    /// Regressor first, mean-shape baseline second.
    pub methods: Vec<MethodSummary>,
}

impl EvaluationReport {
    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "Test subjects: {}   K = {}   slices = {}   R = {}{}",
            self.subjects.len(),
            self.components,
            self.slices,
            self.resolution,
            if self.oracle_injection { "   (oracle injection)" } else { "" }
        );
        let _ = writeln!(out);
        let rows: Vec<(String, &PairedTestReport)> = self.methods.iter().map(|m| (m.name.clone(), &m.paired)).collect();
        out.push_str(&stats::format_table(&rows));
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<24} {:>11} {:>11} {:>11} {:>9} {:>9}",
            "Methods", "RMSE (cm³)", "Vol. mean", "Vol. std", "CD (mm)", "MSD (mm)"
        );
        let _ = writeln!(
            out,
            "{:<24} {:>11} {:>11.1} {:>11.1} {:>9} {:>9}",
            "Truth", "", self.truth_volume_mean_cm3, self.truth_volume_std_cm3, "", ""
        );
        for m in &self.methods {
            let _ = writeln!(
                out,
                "{:<24} {:>11.1} {:>11.1} {:>11.1} {:>9.2} {:>9.2}",
                m.name, m.rmse_cm3, m.volume_mean_cm3, m.volume_std_cm3, m.chamfer_mean_mm, m.msd_mean_mm
            );
        }
        out
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    stats::summary(v).unwrap_or((v.first().copied().unwrap_or(f64::NAN), 0.0))
}

fn summarize(name: &str, truth: &[f64], pred: &[f64], cd: &[f64], msd: &[f64]) -> Result<MethodSummary, PipelineError> {
    let (vm, vs) = mean_std(pred);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(MethodSummary {
        name: name.to_string(),
        rmse_cm3: metrics::rmse(pred, truth)?,
        volume_mean_cm3: vm,
        volume_std_cm3: vs,
        chamfer_mean_mm: mean(cd),
        msd_mean_mm: mean(msd),
        paired: stats::paired_t_test(truth, pred)?,
    })
}

/// Reconstructs every test subject, compares with ground truth and with the
/// α = 0 mean shape, and writes `evaluation.json` / `evaluation.txt`.
///
/// Surface distances are taken after rigidly placing each reconstruction on
/// its ground truth (no scaling), so size and shape errors count but the
/// arbitrary pose of the model frame does not.
pub fn cmd_evaluate(cfg: &PipelineConfig) -> Result<EvaluationReport, PipelineError> {
    let dataset = Dataset::load(cfg)?;
    let space = load_ssm(cfg)?;
    let params = if cfg.evaluate.oracle_injection { None } else { Some(load_weights(cfg)?) };
    let (gt, meshes) = load_population(cfg)?;
    let baseline = space.mean_mesh();
    let baseline_volume = mesh::volume_unchecked(&baseline).cm3;
    let (n, seed) = (cfg.evaluate.surface_samples, cfg.evaluate.seed);
    let rounds = cfg.evaluate.align_rounds;
    let place = |m: &TriMesh, truth: &TriMesh| -> Result<TriMesh, PipelineError> {
        if rounds == 0 {
            return Ok(m.clone());
        }
        Ok(rigid_icp(m, truth, rounds)?.apply_mesh(m))
    };

    let subjects = dataset
        .test
        .par_iter()
        .map(|id| -> Result<SubjectResult, PipelineError> {
            let wrap = PipelineError::for_subject(id);
            let inner = || -> Result<SubjectResult, PipelineError> {
                let idx = gt
                    .subjects
                    .iter()
                    .position(|s| &s.id == id)
                    .ok_or_else(|| PipelineError::UnknownSubject(id.clone()))?;
                let truth = &meshes[idx];
                let predicted = match &params {
                    Some(p) => predict(&space, p, &load_subject_stack(cfg, id)?)?.0,
                    None => truth.clone(),
                };
                let ours = metrics::mesh_metrics(&place(&predicted, truth)?, truth, n, seed)?;
                let base = metrics::mesh_metrics(&place(&baseline, truth)?, truth, n, seed)?;
                Ok(SubjectResult {
                    id: id.clone(),
                    truth_volume_cm3: mesh::signed_volume(truth)?.cm3,
                    predicted_volume_cm3: mesh::volume_unchecked(&predicted).cm3,
                    baseline_volume_cm3: baseline_volume,
                    chamfer_mm: ours.chamfer,
                    msd_mm: ours.msd,
                    baseline_chamfer_mm: base.chamfer,
                    baseline_msd_mm: base.msd,
                })
            };
            inner().map_err(wrap)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let col = |f: fn(&SubjectResult) -> f64| subjects.iter().map(f).collect::<Vec<f64>>();
    let truth = col(|s| s.truth_volume_cm3);
    let methods = vec![
        summarize(
            OURS_LABEL,
            &truth,
            &col(|s| s.predicted_volume_cm3),
            &col(|s| s.chamfer_mm),
            &col(|s| s.msd_mm),
        )?,
        summarize(
            BASELINE_LABEL,
            &truth,
            &col(|s| s.baseline_volume_cm3),
            &col(|s| s.baseline_chamfer_mm),
            &col(|s| s.baseline_msd_mm),
        )?,
    ];
    let (tm, ts) = mean_std(&truth);
    let report = EvaluationReport {
        components: space.component_count(),
        slices: cfg.slicer.offsets.len(),
        resolution: cfg.slicer.resolution,
        oracle_injection: cfg.evaluate.oracle_injection,
        truth_volume_mean_cm3: tm,
        truth_volume_std_cm3: ts,
        subjects,
        methods,
    };
    let out = cfg.output_dir();
    write_text(&out.join(EVALUATION_JSON), &serde_json::to_string_pretty(&report).expect("report serializes"))?;
    write_text(&out.join(EVALUATION_TXT), &report.to_text())?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Published statistics check

/// One published paired-test row with its printed values.
#[derive(Debug, Clone, Copy)]
pub struct PublishedRow {
    pub label: &'static str,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    pub sem: f64,
    pub t: f64,
    pub ci95: [f64; 2],
    /// Printed p-value; `None` when printed as `.000`.
    pub p: Option<f64>,
}

pub const PUBLISHED_ROWS: [PublishedRow; 2] = [
    PublishedRow {
        label: "CT & Childs'",
        mean: -201.5,
        std: 234.8,
        n: 35,
        sem: 39.7,
        t: -5.1,
        ci95: [-282.1, -120.8],
        p: None,
    },
    PublishedRow {
        label: "CT & Ours",
        mean: 78.1,
        std: 268.4,
        n: 35,
        sem: 45.4,
        t: 1.7,
        ci95: [-14.1, 170.3],
        p: Some(0.094),
    },
];

pub const SEM_TOLERANCE: f64 = 0.05;
pub const T_TOLERANCE: f64 = 0.05;
pub const CI_TOLERANCE: f64 = 0.15;
pub const P_TOLERANCE: f64 = 0.002;
pub const P_SIGNIFICANT: f64 = 0.001;

#[derive(Debug, Clone)]
pub struct VectorCheck {
    pub label: &'static str,
    pub computed: PairedTestReport,
    pub sem_ok: bool,
    pub t_ok: bool,
    pub ci_ok: bool,
    pub p_ok: bool,
}

impl VectorCheck {
    pub fn passed(&self) -> bool {
        self.sem_ok && self.t_ok && self.ci_ok && self.p_ok
    }
}

pub fn check_published_row(row: &PublishedRow) -> Result<VectorCheck, PipelineError> {
    let r = PairedTestReport::from_summary(row.mean, row.std, row.n)?;
    Ok(VectorCheck {
        label: row.label,
        sem_ok: (r.sem - row.sem).abs() <= SEM_TOLERANCE,
        t_ok: (r.t - row.t).abs() <= T_TOLERANCE,
        ci_ok: (r.ci95[0] - row.ci95[0]).abs() <= CI_TOLERANCE && (r.ci95[1] - row.ci95[1]).abs() <= CI_TOLERANCE,
        p_ok: match row.p {
            Some(p) => (r.p - p).abs() <= P_TOLERANCE,
            None => r.p < P_SIGNIFICANT,
        },
        computed: r,
    })
}

/// Recomputes the published rows and renders computed vs printed values.
pub fn cmd_stats_vectors() -> Result<(String, bool), PipelineError> {
    let mut out = String::new();
    let mut all = true;
    let mark = |ok: bool| if ok { "ok" } else { "MISMATCH" };
    for row in &PUBLISHED_ROWS {
        let c = check_published_row(row)?;
        let r = &c.computed;
        let _ = writeln!(out, "{} (μ = {}, std = {}, n = {})", row.label, row.mean, row.std, row.n);
        let _ = writeln!(out, "  SEM  computed {:>8.3}  published {:>7.1}  {}", r.sem, row.sem, mark(c.sem_ok));
        let _ = writeln!(out, "  t    computed {:>8.3}  published {:>7.1}  {}", r.t, row.t, mark(c.t_ok));
        let _ = writeln!(
            out,
            "  CI   computed ({:.2}, {:.2})  published ({:.1}, {:.1})  {}",
            r.ci95[0], r.ci95[1], row.ci95[0], row.ci95[1], mark(c.ci_ok)
        );
        let printed = row.p.map(stats::format_p).unwrap_or_else(|| ".000".into());
        let _ = writeln!(
            out,
            "  p    computed {:>8.5}  published {:>7}  {}",
            r.p, printed, mark(c.p_ok)
        );
        let _ = writeln!(out, "  {}", if c.passed() { "PASS" } else { "FAIL" });
        all &= c.passed();
    }
    Ok((out, all))
}
