//! Stratified train/val/test splits and k-fold partitions.
//!
//! Both are pure functions of (manifest, parameters, seed). Within each class,
//! samples are taken in manifest order and shuffled with a generator keyed by
//! `derive_seed(seed, class)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::manifest::{DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, CounterRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    pub const DEFAULT: SplitRatios = SplitRatios {
        train: 0.70,
        val: 0.15,
        test: 0.15,
    };

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::Config(format!("split ratios must be non-negative: {self:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios must sum to 1: {self:?}")));
        }
        Ok(())
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Largest-remainder apportionment of `n` items over `weights` (summing to 1).
/// Ties in the remainder go to the earlier slot.
pub(crate) fn apportion(n: usize, weights: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
    // Tolerance so that 0.7 * 100 = 70.00000000000001 floors to 70, not 69.
    let mut counts: Vec<usize> = quotas.iter().map(|q| (q + 1e-9).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - counts[a] as f64;
        let fb = quotas[b] - counts[b] as f64;
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &slot in order.iter().take(n.saturating_sub(assigned)) {
        counts[slot] += 1;
    }
    counts
}

fn class_members(manifest: &DatasetManifest) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); manifest.num_classes()];
    for (i, s) in manifest.samples.iter().enumerate() {
        members[s.label].push(i);
    }
    members
}

/// Assigns every sample a split, stratified by class.
pub fn split_dataset(
    manifest: &DatasetManifest,
    ratios: SplitRatios,
    seed: u64,
) -> Result<DatasetManifest> {
    ratios.validate()?;
    manifest.validate()?;
    let mut out = manifest.clone();
    for (class, mut members) in class_members(manifest).into_iter().enumerate() {
        if members.is_empty() {
            return Err(Error::Manifest(format!(
                "class {class} ({}) has no samples",
                manifest.classes[class]
            )));
        }
        CounterRng::new(derive_seed(seed, class as u64)).shuffle(&mut members);
        let counts = apportion(members.len(), &[ratios.train, ratios.val, ratios.test]);
        let splits = [Split::Train, Split::Val, Split::Test];
        let mut cursor = members.iter();
        for (split, count) in splits.iter().zip(counts) {
            for &idx in cursor.by_ref().take(count) {
                out.samples[idx].split = *split;
            }
        }
    }
    Ok(out)
}

/// A partition of sample ids into `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub assignment: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn members(&self, fold: usize) -> impl Iterator<Item = &str> {
        self.assignment
            .iter()
            .filter(move |(_, &f)| f == fold)
            .map(|(id, _)| id.as_str())
    }

    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.assignment.get(id).copied()
    }

    /// Writes fold indices into a copy of the manifest.
    pub fn apply(&self, manifest: &DatasetManifest) -> DatasetManifest {
        let mut out = manifest.clone();
        for s in &mut out.samples {
            s.fold = self.fold_of(&s.id);
        }
        out
    }
}

/// Stratified k-fold partition.
///
/// Each class is shuffled and dealt round-robin onto the folds; the dealing
/// offset carries over between classes so total fold sizes also differ by at
/// most one.
pub fn kfold(manifest: &DatasetManifest, k: usize, seed: u64) -> Result<FoldAssignment> {
    manifest.validate()?;
    if k < 2 {
        return Err(Error::Config(format!("k-fold needs k >= 2, got {k}")));
    }
    let members = class_members(manifest);
    let smallest = members.iter().map(Vec::len).min().unwrap_or(0);
    if k > smallest {
        return Err(Error::Config(format!(
            "k = {k} exceeds the smallest class count {smallest}"
        )));
    }
    let mut assignment = BTreeMap::new();
    let mut offset = 0usize;
    for (class, mut ids) in members.into_iter().enumerate() {
        CounterRng::new(derive_seed(seed, class as u64)).shuffle(&mut ids);
        for (pos, idx) in ids.iter().enumerate() {
            assignment.insert(manifest.samples[*idx].id.clone(), (offset + pos) % k);
        }
        offset += ids.len();
    }
    Ok(FoldAssignment { k, assignment })
}
