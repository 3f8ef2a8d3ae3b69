use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::model::{loss_and_grad, predict, ModelParams, SampleInput, Standardizer, PROB_FLOOR};
use crate::error::{Error, Result};
use crate::est::MlpKernel;
use crate::io::{kfold, DatasetManifest, Split};
use crate::metrics::{argmax, evaluate, EvalReport};
use crate::rng::{derive_seed, CounterRng};

// Seed streams derived from `TrainConfig::seed`.
const STREAM_INIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_DROPOUT: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Per-epoch multiplicative lr decay.
    pub gamma: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Hidden widths of the head; empty gives a linear classifier.
    pub hidden: Vec<usize>,
    pub dropout_rate: f64,
    /// Back-propagate into the MLP kernel (only for event inputs).
    pub train_kernel: bool,
    /// Z-score features with training-split statistics.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            gamma: 0.34,
            batch_size: 8,
            max_epochs: 50,
            early_stop_patience: 5,
            seed: 0,
            adam: AdamConfig::default(),
            hidden: Vec::new(),
            dropout_rate: 0.0,
            train_kernel: false,
            standardize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma {} not in (0, 1]", self.gamma)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout rate {} not in [0, 1)", self.dropout_rate)));
        }
        Ok(())
    }

    /// Learning rate used during epoch `k` (0-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.gamma.powi(epoch as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub epochs: Vec<EpochStats>,
    /// Epoch with the lowest validation loss; `best` holds its weights.
    pub best_epoch: usize,
    /// Last epoch that was run.
    pub stopped_epoch: usize,
    pub best: ModelParams,
}

impl TrainRecord {
    pub fn best_stats(&self) -> &EpochStats {
        &self.epochs[self.best_epoch]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,val_loss,val_acc,lr\n");
        for e in &self.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                e.epoch, e.train_loss, e.train_acc, e.val_loss, e.val_acc, e.lr
            );
        }
        out
    }
}

fn lookup<'a>(
    inputs: &'a BTreeMap<String, SampleInput>,
    manifest: &DatasetManifest,
    split: Split,
) -> Result<Vec<(&'a SampleInput, usize)>> {
    manifest
        .in_split(split)
        .map(|s| {
            inputs
                .get(&s.id)
                .map(|i| (i, s.label))
                .ok_or_else(|| Error::Manifest(format!("no input for sample {}", s.id)))
        })
        .collect()
}

/// Mean cross-entropy and accuracy in eval mode.
pub fn loss_and_accuracy(params: &ModelParams, items: &[(&SampleInput, usize)]) -> Result<(f64, f64)> {
    if items.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for &(input, label) in items {
        let p = predict(params, input)?;
        loss -= p[label].max(PROB_FLOOR).ln();
        correct += (argmax(&p) == label) as usize;
    }
    let n = items.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Mini-batch Adam training with per-epoch lr decay and early stopping on
/// validation loss.
///
/// Inputs are looked up by sample id. `kernel`, when given, is the EST kernel
/// applied to [`SampleInput::Events`]; it is frozen unless
/// `config.train_kernel` is set.
pub fn fit(
    manifest: &DatasetManifest,
    inputs: &BTreeMap<String, SampleInput>,
    config: &TrainConfig,
    kernel: Option<&MlpKernel>,
) -> Result<TrainRecord> {
    config.validate()?;
    let train_items = lookup(inputs, manifest, Split::Train)?;
    let val_items = lookup(inputs, manifest, Split::Val)?;
    if train_items.is_empty() {
        return Err(Error::Config("empty train split".into()));
    }
    if val_items.is_empty() {
        return Err(Error::Config("empty val split".into()));
    }
    let classes = manifest.num_classes();

    let mut probe = ModelParams::init(&[1, classes.max(1)], 0.0, 0)?;
    probe.kernel = kernel.cloned();
    let train_raw: Vec<Vec<f64>> = train_items.iter().map(|(i, _)| i.raw_features(&probe)).collect();
    let dim = train_raw[0].len();

    let mut layers = vec![dim];
    layers.extend_from_slice(&config.hidden);
    layers.push(classes);
    let mut params = ModelParams::init(&layers, config.dropout_rate, derive_seed(config.seed, STREAM_INIT))?;
    params.kernel = kernel.cloned();
    if config.standardize {
        params.input_norm = Standardizer::fit(train_raw.iter().map(|r| r.as_slice()));
    }

    let learn_kernel = config.train_kernel && params.kernel.is_some();
    // A frozen kernel makes features constant, so compute them once.
    let frozen: Option<(Vec<SampleInput>, Vec<SampleInput>)> = if learn_kernel {
        None
    } else {
        let conv = |items: &[(&SampleInput, usize)]| -> Vec<SampleInput> {
            items
                .iter()
                .map(|(i, _)| SampleInput::Features(i.raw_features(&params)))
                .collect()
        };
        Some((conv(&train_items), conv(&val_items)))
    };
    let (train_set, val_set): (Vec<(&SampleInput, usize)>, Vec<(&SampleInput, usize)>) = match &frozen {
        Some((t, v)) => (
            t.iter().zip(&train_items).map(|(i, (_, l))| (i, *l)).collect(),
            v.iter().zip(&val_items).map(|(i, (_, l))| (i, *l)).collect(),
        ),
        None => (train_items.clone(), val_items.clone()),
    };

    let n_opt = if learn_kernel {
        params.trainable_len()
    } else {
        params.head.params.len()
    };
    let mut state = AdamState::new(n_opt);
    let dropout_base = derive_seed(config.seed, STREAM_DROPOUT);
    let shuffle_base = derive_seed(config.seed, STREAM_SHUFFLE);

    let mut epochs = Vec::new();
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut since_best = 0usize;
    let mut step = 0u64;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..config.max_epochs {
        let lr = config.lr_at(epoch);
        order.sort_unstable();
        CounterRng::new(derive_seed(shuffle_base, epoch as u64)).shuffle(&mut order);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&SampleInput, usize)> = chunk.iter().map(|&i| train_set[i]).collect();
            let seed = (config.dropout_rate > 0.0).then(|| derive_seed(dropout_base, step));
            let (_, grad) = loss_and_grad(&params, &batch, seed)?;
            if learn_kernel {
                let mut flat = params.trainable();
                adam_step(&mut state, &mut flat, &grad.flat(), lr, &config.adam);
                params.set_trainable(&flat);
            } else {
                adam_step(&mut state, &mut params.head.params, &grad.head, lr, &config.adam);
            }
            step += 1;
        }
        if params.head.params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite weights after epoch {epoch}")));
        }
        let (train_loss, train_acc) = loss_and_accuracy(&params, &train_set)?;
        let (val_loss, val_acc) = loss_and_accuracy(&params, &val_set)?;
        epochs.push(EpochStats {
            epoch,
            train_loss,
            train_acc,
            val_loss,
            val_acc,
            lr,
        });
        if best.as_ref().is_none_or(|(l, _, _)| val_loss < *l) {
            best = Some((val_loss, epoch, params.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > config.early_stop_patience {
                break;
            }
        }
    }
    let stopped_epoch = epochs.len() - 1;
    let (_, best_epoch, best) = best.ok_or_else(|| Error::Numeric("validation loss never finite".into()))?;
    Ok(TrainRecord {
        epochs,
        best_epoch,
        stopped_epoch,
        best,
    })
}

/// Class probabilities for every sample of `split`, in manifest order.
pub fn predict_split(
    params: &ModelParams,
    manifest: &DatasetManifest,
    inputs: &BTreeMap<String, SampleInput>,
    split: Split,
) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let items = lookup(inputs, manifest, split)?;
    let probs = items
        .iter()
        .map(|(i, _)| predict(params, i))
        .collect::<Result<Vec<_>>>()?;
    Ok((probs, items.iter().map(|(_, l)| *l).collect()))
}

/// Class whose scores drive ROC/PR curves: class 1 for binary tasks.
pub fn positive_class(classes: usize) -> usize {
    usize::from(classes > 1)
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub fold: usize,
    pub record: TrainRecord,
    /// Validation accuracy of the selected (best-loss) epoch.
    pub val_accuracy: f64,
    pub test_ids: Vec<String>,
    pub test: EvalReport,
}

#[derive(Debug, Clone)]
pub struct CrossValidation {
    pub folds: Vec<FoldResult>,
    /// Fold with the highest validation accuracy; the first wins ties.
    pub best_fold: usize,
}

/// Stratified k-fold training. Fold `i` is the test set, fold `(i + 1) mod k`
/// the validation set and the remaining folds train. Each fold trains with
/// seed `derive_seed(config.seed, i)`.
pub fn cross_validate(
    manifest: &DatasetManifest,
    inputs: &BTreeMap<String, SampleInput>,
    k: usize,
    config: &TrainConfig,
    kernel: Option<&MlpKernel>,
) -> Result<CrossValidation> {
    let folds = kfold(manifest, k, config.seed)?;
    let mut results = Vec::with_capacity(k);
    for i in 0..k {
        let mut m = manifest.clone();
        for s in &mut m.samples {
            let f = folds.fold_of(&s.id).expect("every sample has a fold");
            s.fold = Some(f);
            s.split = if f == i {
                Split::Test
            } else if f == (i + 1) % k {
                Split::Val
            } else {
                Split::Train
            };
        }
        let cfg = TrainConfig {
            seed: derive_seed(config.seed, i as u64),
            ..config.clone()
        };
        let record = fit(&m, inputs, &cfg, kernel)?;
        let (probs, labels) = predict_split(&record.best, &m, inputs, Split::Test)?;
        let test = evaluate(&probs, &labels, &m.classes, positive_class(m.num_classes()))?;
        results.push(FoldResult {
            fold: i,
            val_accuracy: record.best_stats().val_acc,
            test_ids: m.in_split(Split::Test).map(|s| s.id.clone()).collect(),
            record,
            test,
        });
    }
    let mut best_fold = 0;
    for (i, r) in results.iter().enumerate() {
        if r.val_accuracy > results[best_fold].val_accuracy {
            best_fold = i;
        }
    }
    Ok(CrossValidation {
        folds: results,
        best_fold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::SensorGeometry;
    use crate::io::Sample;
    use std::path::PathBuf;

    fn blobs(n_per_class: usize, sep: f64, seed: u64, shuffle_labels: bool) -> (DatasetManifest, BTreeMap<String, SampleInput>) {
        let mut rng = CounterRng::new(seed);
        let mut samples = Vec::new();
        let mut inputs = BTreeMap::new();
        let n = 2 * n_per_class;
        let mut labels: Vec<usize> = (0..n).map(|j| j / n_per_class).collect();
        let feats: Vec<Vec<f64>> = labels
            .iter()
            .map(|&c| {
                let centre = if c == 0 { -sep } else { sep };
                (0..4).map(|d| if d < 2 { centre } else { 0.0 } + rng.next_gaussian()).collect()
            })
            .collect();
        if shuffle_labels {
            rng.shuffle(&mut labels);
        }
        for j in 0..n {
            let id = format!("s{j:04}");
            let split = match j % 10 {
                0..=5 => Split::Train,
                6 | 7 => Split::Val,
                _ => Split::Test,
            };
            samples.push(Sample {
                id: id.clone(),
                path: PathBuf::from(format!("{id}.evs1")),
                label: labels[j],
                split,
                fold: None,
            });
            inputs.insert(id, SampleInput::Features(feats[j].clone()));
        }
        let manifest = DatasetManifest {
            samples,
            classes: vec!["a".into(), "b".into()],
            geometry: SensorGeometry::new(4, 4).unwrap(),
        };
        (manifest, inputs)
    }

    #[test]
    fn separable_blobs_reach_full_val_accuracy_early() {
        let (m, inputs) = blobs(50, 4.0, 3, false);
        let cfg = TrainConfig {
            gamma: 0.9,
            ..TrainConfig::default()
        };
        let rec = fit(&m, &inputs, &cfg, None).unwrap();
        let first_perfect = rec.epochs.iter().position(|e| e.val_acc == 1.0);
        assert!(matches!(first_perfect, Some(e) if e < 10), "{first_perfect:?}");
    }

    #[test]
    fn patience_zero_stops_after_first_regression() {
        let (m, inputs) = blobs(30, 0.3, 5, false);
        let cfg = TrainConfig {
            early_stop_patience: 0,
            gamma: 1.0,
            learning_rate: 0.3,
            max_epochs: 200,
            ..TrainConfig::default()
        };
        let rec = fit(&m, &inputs, &cfg, None).unwrap();
        let last = rec.epochs.len() - 1;
        assert!(last < 199);
        assert!(rec.epochs[last].val_loss >= rec.epochs[last - 1].val_loss);
        for w in rec.epochs[..last].windows(2) {
            assert!(w[1].val_loss < w[0].val_loss);
        }
        assert_eq!(rec.best_epoch, last - 1);
    }

    #[test]
    fn deterministic_records() {
        let (m, inputs) = blobs(20, 1.0, 9, false);
        let cfg = TrainConfig {
            hidden: vec![6],
            dropout_rate: 0.3,
            ..TrainConfig::default()
        };
        let a = fit(&m, &inputs, &cfg, None).unwrap();
        let b = fit(&m, &inputs, &cfg, None).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.best, b.best);
    }

    #[test]
    fn lr_schedule_is_geometric() {
        let cfg = TrainConfig::default();
        for k in 0..30 {
            let want = 1e-2 * 0.34f64.powf(k as f64);
            assert!(((cfg.lr_at(k) - want) / want).abs() <= 1e-15);
        }
    }

    #[test]
    fn shuffled_labels_give_chance_accuracy() {
        let (m, inputs) = blobs(1000, 3.0, 11, true);
        let rec = fit(&m, &inputs, &TrainConfig::default(), None).unwrap();
        let acc = rec.best_stats().val_acc;
        assert!((0.4..=0.6).contains(&acc), "{acc}");
    }

    #[test]
    fn empty_split_is_rejected() {
        let (mut m, inputs) = blobs(10, 1.0, 1, false);
        for s in &mut m.samples {
            if s.split == Split::Val {
                s.split = Split::Train;
            }
        }
        assert!(matches!(fit(&m, &inputs, &TrainConfig::default(), None), Err(Error::Config(_))));
    }

    #[test]
    fn five_fold_cross_validation() {
        let (m, inputs) = blobs(25, 2.0, 2, false);
        let cv = cross_validate(&m, &inputs, 5, &TrainConfig::default(), None).unwrap();
        assert_eq!(cv.folds.len(), 5);
        let best = cv.folds[cv.best_fold].val_accuracy;
        assert!(cv.folds.iter().all(|f| f.val_accuracy <= best));
        let mut seen = std::collections::BTreeSet::new();
        for f in &cv.folds {
            for id in &f.test_ids {
                assert!(seen.insert(id.clone()), "{id} in two test folds");
            }
        }
        assert_eq!(seen.len(), 50);
    }
}
