use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::SensorGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    /// Relative paths resolve against the manifest's directory.
    pub path: PathBuf,
    pub label: usize,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold: Option<usize>,
}

/// `manifest.json`: the sample list of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub samples: Vec<Sample>,
    pub classes: Vec<String>,
    pub geometry: SensorGeometry,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::Manifest("no classes".into()));
        }
        let mut ids = HashSet::new();
        for s in &self.samples {
            if !ids.insert(s.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate sample id {:?}", s.id)));
            }
            if s.label >= self.classes.len() {
                return Err(Error::LabelOutOfRange {
                    label: s.label,
                    classes: self.classes.len(),
                });
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn in_split(&self, split: Split) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(move |s| s.split == split)
    }

    /// Per-split sample counts as (train, val, test).
    pub fn split_counts(&self) -> (usize, usize, usize) {
        let mut c = (0, 0, 0);
        for s in &self.samples {
            match s.split {
                Split::Train => c.0 += 1,
                Split::Val => c.1 += 1,
                Split::Test => c.2 += 1,
            }
        }
        c
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    pub fn resolve(&self, base_dir: &Path, sample: &Sample) -> PathBuf {
        if sample.path.is_absolute() {
            sample.path.clone()
        } else {
            base_dir.join(&sample.path)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(id: &str, label: usize) -> Sample {
        Sample {
            id: id.into(),
            path: format!("{id}.evs1").into(),
            label,
            split: Split::Train,
            fold: None,
        }
    }

    fn manifest(samples: Vec<Sample>) -> DatasetManifest {
        DatasetManifest {
            samples,
            classes: vec!["car".into(), "pedestrian".into()],
            geometry: SensorGeometry::GEN1,
        }
    }

    #[test]
    fn json_field_names() {
        let m = manifest(vec![sample("a", 0)]);
        let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(v["samples"][0]["split"], "train");
        assert_eq!(v["geometry"]["width"], 304);
        assert!(v["samples"][0].get("fold").is_none());
        assert_eq!(DatasetManifest::from_json(&m.to_json()).unwrap(), m);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let m = manifest(vec![sample("a", 0), sample("a", 1)]);
        assert!(matches!(m.validate(), Err(Error::Manifest(_))));
    }

    #[test]
    fn label_range_checked() {
        let m = manifest(vec![sample("a", 2)]);
        assert!(matches!(m.validate(), Err(Error::LabelOutOfRange { label: 2, .. })));
    }
}
