//! Experiment orchestration: configuration, dataset loading, feature
//! extraction and the runners behind each CLI verb.
//!
//! Every runner is a pure function of the config (plus files on disk) and
//! writes its artifacts into `ExperimentConfig::out`.

mod report;
mod run;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::est::{build_est, crop_resize, pool_features, KernelSpec, MlpKernel, PoolGrid, PooledEvents, DEFAULT_BINS, MLP_KERNEL_LAYERS};
use crate::event::{EventStream, SensorGeometry};
use crate::io::{read_event_file, split_dataset, DatasetManifest, SplitRatios};
use crate::noise::{self, NoiseKind, NoiseSpec, OobPolicy, ShiftScope, DEFAULT_LEVELS};
use crate::rng::derive_seed;
use crate::synth::{default_templates, generate_samples, manifest_for};
use crate::trainer::{SampleInput, TrainConfig};

pub use report::{render_svg, run_report, ReportOutcome};
pub use run::{
    run_crossval, run_eval, run_sweep, run_synth, run_train, SweepOutcome, SweepRow, TrainOutcome, SWEEP_HEADER,
};

// Seed streams derived from `ExperimentConfig::seed`.
const SEED_SYNTH: u64 = 1;
const SEED_SPLIT: u64 = 2;
const SEED_TRAIN: u64 = 3;
const SEED_NOISE: u64 = 4;
const SEED_KERNEL: u64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Synth {
        #[serde(default = "default_per_class")]
        per_class: usize,
        #[serde(default = "default_n_events")]
        n_events: usize,
        #[serde(default = "default_geometry")]
        geometry: SensorGeometry,
    },
    /// A `manifest.json`; relative paths resolve against the working directory.
    Manifest { path: PathBuf },
}

fn default_per_class() -> usize {
    200
}

fn default_n_events() -> usize {
    2000
}

fn default_geometry() -> SensorGeometry {
    SensorGeometry::GEN1
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synth {
            per_class: default_per_class(),
            n_events: default_n_events(),
            geometry: default_geometry(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub ratios: SplitRatios,
    /// Re-split a loaded manifest; synthetic data is always split.
    pub resplit: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            ratios: SplitRatios::default(),
            resplit: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Train once on clean data, noise only the test split.
    #[default]
    CleanTrainNoisyTest,
    /// Noise every split and retrain per sweep cell.
    NoisyTrainVal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub kinds: Vec<NoiseKind>,
    pub levels: Vec<f64>,
    pub mode: NoiseMode,
    pub shift_scope: ShiftScope,
    pub oob_policy: OobPolicy,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            kinds: NoiseKind::DEFAULT_GRID.to_vec(),
            levels: DEFAULT_LEVELS.to_vec(),
            mode: NoiseMode::default(),
            shift_scope: ShiftScope::default(),
            oob_policy: OobPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelChoice {
    #[default]
    Trilinear,
    /// MLP kernel initialized to the triangular bump.
    MlpTriangle,
    /// Randomly initialized MLP kernel.
    MlpRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReprConfig {
    pub bins: usize,
    pub kernel: KernelChoice,
    pub pool: PoolGrid,
    /// Resample the tensor to `[height, width]` before pooling.
    pub crop: Option<[usize; 2]>,
}

impl Default for ReprConfig {
    fn default() -> Self {
        Self {
            bins: DEFAULT_BINS,
            kernel: KernelChoice::Trilinear,
            pool: PoolGrid::new(4, 4),
            crop: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed. Dataset, split, training, kernel and noise seeds derive
    /// from it, and `train.seed` is overwritten with the derived value.
    pub seed: u64,
    pub dataset: DatasetSource,
    pub split: SplitConfig,
    pub noise: NoiseConfig,
    pub representation: ReprConfig,
    pub train: TrainConfig,
    pub folds: usize,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dataset: DatasetSource::default(),
            split: SplitConfig::default(),
            noise: NoiseConfig::default(),
            representation: ReprConfig::default(),
            train: TrainConfig::default(),
            folds: 5,
            out: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Canonical serialized form, stored next to every run's outputs.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.resolved()).expect("config serializes");
        s.push('\n');
        s
    }

    /// Copy with derived seeds filled in.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.train.seed = derive_seed(self.seed, SEED_TRAIN);
        c
    }

    pub fn train_config(&self) -> TrainConfig {
        self.resolved().train
    }

    pub fn noise_base_seed(&self) -> u64 {
        derive_seed(self.seed, SEED_NOISE)
    }

    pub fn validate(&self) -> Result<()> {
        self.split.ratios.validate()?;
        self.train.validate()?;
        for &l in &self.noise.levels {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::Config(format!("noise level {l} not in [0, 1]")));
            }
        }
        let r = &self.representation;
        if r.bins < 1 {
            return Err(Error::Config("bins must be at least 1".into()));
        }
        if let Some([h, w]) = r.crop {
            if h == 0 || w == 0 {
                return Err(Error::Config("crop dimensions must be positive".into()));
            }
            if self.train.train_kernel {
                return Err(Error::Config("kernel training is not supported together with crop".into()));
            }
        }
        if let DatasetSource::Synth { per_class, n_events, .. } = self.dataset {
            if per_class == 0 || n_events == 0 {
                return Err(Error::Config("synthetic per_class and n_events must be positive".into()));
            }
        }
        if r.pool.rows == 0 || r.pool.cols == 0 {
            return Err(Error::Config("pool grid must be at least 1x1".into()));
        }
        Ok(())
    }

    /// Kernel applied to event inputs, if not trilinear.
    pub fn kernel(&self) -> Result<Option<MlpKernel>> {
        Ok(match self.representation.kernel {
            KernelChoice::Trilinear => None,
            KernelChoice::MlpTriangle => Some(MlpKernel::triangle(&MLP_KERNEL_LAYERS)?),
            KernelChoice::MlpRandom => Some(MlpKernel::random(&MLP_KERNEL_LAYERS, derive_seed(self.seed, SEED_KERNEL))?),
        })
    }

    /// Pool grid checked against the sensor (or crop) size.
    fn pool_fits(&self, geometry: SensorGeometry) -> Result<()> {
        let (h, w) = match self.representation.crop {
            Some([h, w]) => (h, w),
            None => (geometry.height as usize, geometry.width as usize),
        };
        let p = self.representation.pool;
        if p.rows > h || p.cols > w {
            return Err(Error::Config(format!(
                "pool grid {}x{} does not fit {h}x{w}",
                p.rows, p.cols
            )));
        }
        Ok(())
    }
}

/// A split manifest with its streams in memory, keyed by sample id.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub streams: BTreeMap<String, EventStream>,
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    cfg.validate()?;
    let (manifest, streams, resplit) = match &cfg.dataset {
        DatasetSource::Synth {
            per_class,
            n_events,
            geometry,
        } => {
            let templates = default_templates(*geometry, *n_events);
            let samples = generate_samples(*per_class, &templates, derive_seed(cfg.seed, SEED_SYNTH))?;
            let manifest = manifest_for(&samples, &templates);
            let streams = samples.into_iter().map(|s| (s.id, s.stream)).collect();
            (manifest, streams, true)
        }
        DatasetSource::Manifest { path } => {
            let manifest = DatasetManifest::load(path)?;
            manifest.validate()?;
            let base = path.parent().unwrap_or(Path::new("."));
            let mut streams = BTreeMap::new();
            for s in &manifest.samples {
                let stream = read_event_file(&manifest.resolve(base, s), Some(manifest.geometry))?;
                streams.insert(s.id.clone(), stream.with_label(Some(s.label)));
            }
            (manifest, streams, cfg.split.resplit)
        }
    };
    cfg.pool_fits(manifest.geometry)?;
    let manifest = if resplit {
        split_dataset(&manifest, cfg.split.ratios, derive_seed(cfg.seed, SEED_SPLIT))?
    } else {
        manifest
    };
    Ok(Dataset { manifest, streams })
}

/// Classifier input for one stream. Without a crop the events are kept in
/// pooled form so an MLP kernel can be trained; with a crop the dense tensor
/// is resampled and pooled.
pub fn extract_input(stream: &EventStream, repr: &ReprConfig, kernel: Option<&MlpKernel>) -> SampleInput {
    match repr.crop {
        None => SampleInput::Events(PooledEvents::new(stream, repr.bins, repr.pool)),
        Some([h, w]) => {
            let spec = match kernel {
                Some(k) => KernelSpec::Mlp(k.clone()),
                None => KernelSpec::Trilinear,
            };
            let t = crop_resize(&build_est(stream, repr.bins, &spec), h, w);
            SampleInput::Features(pool_features(&t, repr.pool))
        }
    }
}

/// Seed of the noise draws for the sample at manifest position `index`.
pub fn sample_noise(spec: &NoiseSpec, index: usize) -> NoiseSpec {
    spec.reseeded(derive_seed(spec.seed, index as u64))
}

/// Inputs for every sample; samples for which `noise_for` returns a spec are
/// noised first.
pub fn build_inputs(
    data: &Dataset,
    repr: &ReprConfig,
    kernel: Option<&MlpKernel>,
    noise_for: impl Fn(usize, &crate::io::Sample) -> Option<NoiseSpec>,
) -> Result<BTreeMap<String, SampleInput>> {
    let mut out = BTreeMap::new();
    for (i, s) in data.manifest.samples.iter().enumerate() {
        let stream = data
            .streams
            .get(&s.id)
            .ok_or_else(|| Error::Manifest(format!("missing stream for {}", s.id)))?;
        let input = match noise_for(i, s) {
            Some(spec) => {
                let (noised, _) = noise::apply(stream, &sample_noise(&spec, i))?;
                extract_input(&noised, repr, kernel)
            }
            None => extract_input(stream, repr, kernel),
        };
        out.insert(s.id.clone(), input);
    }
    Ok(out)
}

/// Sweep specs with the configured shift scope and out-of-bounds policy.
pub fn sweep_specs(cfg: &ExperimentConfig) -> Result<Vec<NoiseSpec>> {
    let mut grid = noise::sweep_grid(&cfg.noise.kinds, &cfg.noise.levels, cfg.noise_base_seed())?;
    for s in &mut grid {
        s.shift_scope = cfg.noise.shift_scope;
        s.oob_policy = cfg.noise.oob_policy;
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_roundtrip() {
        let c = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.noise.levels, vec![0.05, 0.10, 0.15, 0.20]);
        let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c.resolved());
        assert_eq!(back.to_json(), c.to_json());
    }

    #[test]
    fn config_rejects_unknown_and_bad_values() {
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
        let c = ExperimentConfig::from_json(r#"{"noise": {"levels": [1.5]}}"#).unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = ExperimentConfig::from_json(r#"{"dataset": {"kind": "synth", "per_class": 3, "geometry": {"width": 8, "height": 8}}, "representation": {"pool": {"rows": 9, "cols": 1}}}"#).unwrap();
        assert!(matches!(load_dataset(&c), Err(Error::Config(_))));
    }

    #[test]
    fn seventeen_sweep_cells() {
        let specs = sweep_specs(&ExperimentConfig::default()).unwrap();
        assert_eq!(specs.len(), 17);
        assert_eq!(specs[0].kind, NoiseKind::Clean);
    }

    #[test]
    fn small_synthetic_dataset_loads_and_splits() {
        let c = ExperimentConfig::from_json(
            r#"{"dataset": {"kind": "synth", "per_class": 20, "n_events": 200}}"#,
        )
        .unwrap();
        let d = load_dataset(&c).unwrap();
        assert_eq!(d.manifest.samples.len(), 40);
        assert_eq!(d.manifest.split_counts(), (28, 6, 6));
        let inputs = build_inputs(&d, &c.representation, None, |_, _| None).unwrap();
        assert_eq!(inputs.len(), 40);
    }
}
