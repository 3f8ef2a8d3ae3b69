use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{build_inputs, load_dataset, sweep_specs, Dataset, ExperimentConfig, NoiseMode, SEED_SYNTH};
use crate::error::{Error, Result};
use crate::est::MlpKernel;
use crate::io::{DatasetManifest, Split};
use crate::metrics::{evaluate, EvalReport};
use crate::noise::NoiseSpec;
use crate::rng::derive_seed;
use crate::synth::{default_templates, generate_dataset};
use crate::trainer::{
    config_hash, cross_validate, fit, positive_class, predict_split, read_checkpoint, write_checkpoint, ModelParams,
    SampleInput, TrainRecord,
};

pub(super) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

pub(super) fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |x| x.to_string())
}

fn write_report(dir: &Path, prefix: &str, report: &EvalReport) -> Result<()> {
    write_file(&dir.join(format!("{prefix}report.txt")), report.to_table())?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    write_file(&dir.join(format!("{prefix}report.json")), json)?;
    if let Some(roc) = &report.roc {
        write_file(&dir.join(format!("{prefix}roc.csv")), roc.to_csv())?;
    }
    if let Some(pr) = &report.pr {
        write_file(&dir.join(format!("{prefix}pr.csv")), pr.to_csv())?;
    }
    Ok(())
}

fn write_checkpoint_file(path: &Path, params: &ModelParams, cfg: &ExperimentConfig) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(params, &config_hash(&cfg.train_config()), &mut buf)?;
    write_file(path, buf)
}

fn test_report(
    params: &ModelParams,
    manifest: &DatasetManifest,
    inputs: &BTreeMap<String, SampleInput>,
) -> Result<EvalReport> {
    let (probs, labels) = predict_split(params, manifest, inputs, Split::Test)?;
    if labels.is_empty() {
        return Err(Error::Config("empty test split".into()));
    }
    evaluate(&probs, &labels, &manifest.classes, positive_class(manifest.num_classes()))
}

/// Writes the synthetic dataset (EVS1 files and `manifest.json`) to `cfg.out`.
/// The manifest records the configured split.
pub fn run_synth(cfg: &ExperimentConfig) -> Result<DatasetManifest> {
    cfg.validate()?;
    let super::DatasetSource::Synth {
        per_class,
        n_events,
        geometry,
    } = cfg.dataset
    else {
        return Err(Error::Config("synth needs a synthetic dataset source".into()));
    };
    let templates = default_templates(geometry, n_events);
    generate_dataset(per_class, &templates, &cfg.out, derive_seed(cfg.seed, SEED_SYNTH))?;
    // Same sample set as `load_dataset`, so reuse its split.
    let data = load_dataset(cfg)?;
    data.manifest.save(&cfg.out.join("manifest.json"))?;
    write_file(&cfg.out.join("config.json"), cfg.to_json())?;
    Ok(data.manifest)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub record: TrainRecord,
    pub test: EvalReport,
}

fn train_clean(cfg: &ExperimentConfig, data: &Dataset) -> Result<(TrainRecord, BTreeMap<String, SampleInput>)> {
    let kernel = cfg.kernel()?;
    let inputs = build_inputs(data, &cfg.representation, kernel.as_ref(), |_, _| None)?;
    let record = fit(&data.manifest, &inputs, &cfg.train_config(), kernel.as_ref())?;
    Ok((record, inputs))
}

/// Trains on clean data and evaluates on the test split.
///
/// Writes `config.json`, `train_record.csv`, `model.ckpt`, `report.txt`,
/// `report.json`, `roc.csv` and `pr.csv`.
pub fn run_train(cfg: &ExperimentConfig) -> Result<TrainOutcome> {
    let data = load_dataset(cfg)?;
    let (record, inputs) = train_clean(cfg, &data)?;
    let test = test_report(&record.best, &data.manifest, &inputs)?;
    let out = &cfg.out;
    write_file(&out.join("config.json"), cfg.to_json())?;
    write_file(&out.join("train_record.csv"), record.to_csv())?;
    write_checkpoint_file(&out.join("model.ckpt"), &record.best, cfg)?;
    write_report(out, "", &test)?;
    Ok(TrainOutcome { record, test })
}

/// Stratified k-fold cross-validation over all samples.
///
/// Writes `crossval.csv` (one row per fold), `fold_<i>_record.csv`, the best
/// fold's test report and `config.json`.
pub fn run_crossval(cfg: &ExperimentConfig) -> Result<crate::trainer::CrossValidation> {
    let data = load_dataset(cfg)?;
    let kernel = cfg.kernel()?;
    let inputs = build_inputs(&data, &cfg.representation, kernel.as_ref(), |_, _| None)?;
    let cv = cross_validate(&data.manifest, &inputs, cfg.folds, &cfg.train_config(), kernel.as_ref())?;
    let out = &cfg.out;
    let mut table = String::from("fold,best_epoch,stopped_epoch,val_accuracy,test_accuracy,test_f1_macro,test_auc,test_ap\n");
    for f in &cv.folds {
        let _ = writeln!(
            table,
            "{},{},{},{},{},{},{},{}",
            f.fold,
            f.record.best_epoch,
            f.record.stopped_epoch,
            f.val_accuracy,
            f.test.accuracy,
            f.test.macro_avg.f1,
            fmt_opt(f.test.auc),
            fmt_opt(f.test.ap)
        );
        write_file(&out.join(format!("fold_{}_record.csv", f.fold)), f.record.to_csv())?;
    }
    write_file(&out.join("crossval.csv"), table)?;
    let best = &cv.folds[cv.best_fold];
    write_file(
        &out.join("crossval.txt"),
        format!("best fold: {} (val accuracy {})\n\n{}", best.fold, best.val_accuracy, best.test.to_table()),
    )?;
    write_checkpoint_file(&out.join("model.ckpt"), &best.record.best, cfg)?;
    write_report(out, "", &best.test)?;
    write_file(&out.join("config.json"), cfg.to_json())?;
    Ok(cv)
}

/// Evaluates a checkpoint on the (optionally noised) test split.
pub fn run_eval(cfg: &ExperimentConfig, checkpoint: &Path, noise: Option<NoiseSpec>) -> Result<EvalReport> {
    let data = load_dataset(cfg)?;
    let file = std::fs::File::open(checkpoint)?;
    let (params, _) = read_checkpoint(std::io::BufReader::new(file))?;
    if let Some(n) = &noise {
        n.validate()?;
    }
    let inputs = build_inputs(&data, &cfg.representation, params.kernel.as_ref(), |_, s| {
        (s.split == Split::Test).then_some(noise).flatten()
    })?;
    let report = test_report(&params, &data.manifest, &inputs)?;
    write_report(&cfg.out, "", &report)?;
    Ok(report)
}

pub const SWEEP_HEADER: &str = "noise_kind,level,seed,accuracy,precision_macro,recall_macro,f1_macro,auc,ap";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub noise_kind: String,
    pub level: f64,
    pub seed: u64,
    pub accuracy: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub f1_macro: f64,
    pub auc: Option<f64>,
    pub ap: Option<f64>,
}

impl SweepRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.noise_kind,
            self.level,
            self.seed,
            self.accuracy,
            self.precision_macro,
            self.recall_macro,
            self.f1_macro,
            fmt_opt(self.auc),
            fmt_opt(self.ap)
        )
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub reports: Vec<EvalReport>,
}

fn cell_name(j: usize, spec: &NoiseSpec) -> String {
    format!("cell_{j:02}_{}_{}", spec.kind, spec.level)
}

fn cell_inputs(
    cfg: &ExperimentConfig,
    data: &Dataset,
    kernel: Option<&MlpKernel>,
    spec: &NoiseSpec,
    all_splits: bool,
) -> Result<BTreeMap<String, SampleInput>> {
    build_inputs(data, &cfg.representation, kernel, |_, s| {
        (all_splits || s.split == Split::Test).then_some(*spec)
    })
}

/// Evaluates every cell of the noise grid (clean first).
///
/// Writes `sweep.csv` with one row per cell, per-cell ROC/PR curves under
/// `curves/`, the clean-cell report and `config.json`. In clean-train mode
/// the single trained model is also saved.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutcome> {
    let data = load_dataset(cfg)?;
    let specs = sweep_specs(cfg)?;
    let kernel = cfg.kernel()?;
    let out = &cfg.out;
    let mut rows = Vec::with_capacity(specs.len());
    let mut reports = Vec::with_capacity(specs.len());

    let clean_model = match cfg.noise.mode {
        NoiseMode::CleanTrainNoisyTest => {
            let (record, _) = train_clean(cfg, &data)?;
            write_file(&out.join("train_record.csv"), record.to_csv())?;
            write_checkpoint_file(&out.join("model.ckpt"), &record.best, cfg)?;
            Some(record.best)
        }
        NoiseMode::NoisyTrainVal => None,
    };

    for (j, spec) in specs.iter().enumerate() {
        let report = match &clean_model {
            Some(params) => {
                let inputs = cell_inputs(cfg, &data, params.kernel.as_ref(), spec, false)?;
                test_report(params, &data.manifest, &inputs)?
            }
            None => {
                let inputs = cell_inputs(cfg, &data, kernel.as_ref(), spec, true)?;
                let record = fit(&data.manifest, &inputs, &cfg.train_config(), kernel.as_ref())?;
                test_report(&record.best, &data.manifest, &inputs)?
            }
        };
        let name = cell_name(j, spec);
        if let Some(roc) = &report.roc {
            write_file(&out.join("curves").join(format!("{name}_roc.csv")), roc.to_csv())?;
        }
        if let Some(pr) = &report.pr {
            write_file(&out.join("curves").join(format!("{name}_pr.csv")), pr.to_csv())?;
        }
        rows.push(SweepRow {
            noise_kind: spec.kind.name().to_string(),
            level: spec.level,
            seed: cfg.seed,
            accuracy: report.accuracy,
            precision_macro: report.macro_avg.precision,
            recall_macro: report.macro_avg.recall,
            f1_macro: report.macro_avg.f1,
            auc: report.auc,
            ap: report.ap,
        });
        reports.push(report);
    }

    let mut csv = format!("{SWEEP_HEADER}\n");
    for r in &rows {
        csv.push_str(&r.to_csv_line());
        csv.push('\n');
    }
    write_file(&out.join("sweep.csv"), csv)?;
    write_report(out, "", &reports[0])?;
    write_file(&out.join("config.json"), cfg.to_json())?;
    Ok(SweepOutcome { rows, reports })
}
