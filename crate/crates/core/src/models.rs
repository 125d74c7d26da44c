//! The on-disk model envelope shared by training, scheduling and serving.
//!
//! One JSON file per host holds the model kind and parameters, the feature
//! order, the training target bounds (which drive the prediction guard) and
//! the per-fan regressions. The format is versioned and diffable; floats
//! serialize in shortest round-trip form, so identical models produce
//! byte-identical files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gbt::TreeEnsemble;
use crate::regress::{LinearModel, MlpModel, Model};
use crate::thermal::FanModels;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Extension used for model files within a model directory.
pub const MODEL_FILE_SUFFIX: &str = ".model.json";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt model file {path}: {detail}")]
    Corrupt { path: PathBuf, detail: String },
    #[error("unsupported model format version {0}")]
    BadVersion(u32),
    #[error("feature vector has {got} entries, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no model for host `{0}`")]
    UnknownHost(String),
    #[error("no model files under {0}")]
    EmptyBank(PathBuf),
}

/// The trained predictor itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Gbt(TreeEnsemble),
    Linear(LinearModel),
    Mlp(MlpModel),
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Gbt(_) => "gbt",
            ModelKind::Linear(_) => "linear",
            ModelKind::Mlp(_) => "mlp",
        }
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        match self {
            ModelKind::Gbt(m) => m.predict_row(x),
            ModelKind::Linear(m) => m.predict_row(x),
            ModelKind::Mlp(m) => m.predict_row(x),
        }
    }
}

/// One host's trained model plus everything needed to use it safely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub host_id: String,
    /// Name of the predicted quantity (the ambient target in production).
    pub target: String,
    pub feature_names: Vec<String>,
    /// (min, max) of the training target; the guard works off these.
    pub target_bounds: (f64, f64),
    pub model: ModelKind,
    /// Fan-speed regressions used to synthesize the fan feature columns at
    /// scheduling time.
    pub fan_models: Option<FanModels>,
}

impl ModelFile {
    pub fn predict(&self, x: &[f64]) -> Result<f64, ModelError> {
        if x.len() != self.feature_names.len() {
            return Err(ModelError::DimensionMismatch {
                expected: self.feature_names.len(),
                got: x.len(),
            });
        }
        Ok(self.model.predict_row(x))
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf, ModelError> {
        let path = dir.join(format!("{}{MODEL_FILE_SUFFIX}", self.host_id));
        let file = File::create(&path)
            .map_err(|source| ModelError::Io { path: path.clone(), source })?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, self)
            .map_err(|e| ModelError::Corrupt { path: path.clone(), detail: e.to_string() })?;
        w.write_all(b"\n")
            .and_then(|()| w.flush())
            .map_err(|source| ModelError::Io { path: path.clone(), source })?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<ModelFile, ModelError> {
        let file = File::open(path)
            .map_err(|source| ModelError::Io { path: path.to_path_buf(), source })?;
        let m: ModelFile = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| ModelError::Corrupt { path: path.to_path_buf(), detail: e.to_string() })?;
        if m.version != MODEL_FORMAT_VERSION {
            return Err(ModelError::BadVersion(m.version));
        }
        Ok(m)
    }
}

/// Every host's model, keyed by host id.
#[derive(Debug, Clone, Default)]
pub struct ModelBank {
    pub models: BTreeMap<String, ModelFile>,
}

impl ModelBank {
    pub fn new(models: impl IntoIterator<Item = ModelFile>) -> ModelBank {
        ModelBank { models: models.into_iter().map(|m| (m.host_id.clone(), m)).collect() }
    }

    /// Load `*.model.json` files under a directory.
    pub fn load_dir(dir: &Path) -> Result<ModelBank, ModelError> {
        let entries = std::fs::read_dir(dir)
            .map_err(|source| ModelError::Io { path: dir.to_path_buf(), source })?;
        let mut models = BTreeMap::new();
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.file_name().is_some_and(|n| n.to_string_lossy().ends_with(MODEL_FILE_SUFFIX)))
            .collect();
        paths.sort();
        for path in paths {
            let m = ModelFile::load(&path)?;
            models.insert(m.host_id.clone(), m);
        }
        if models.is_empty() {
            return Err(ModelError::EmptyBank(dir.to_path_buf()));
        }
        Ok(ModelBank { models })
    }

    pub fn get(&self, host_id: &str) -> Result<&ModelFile, ModelError> {
        self.models.get(host_id).ok_or_else(|| ModelError::UnknownHost(host_id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn host_ids(&self) -> impl Iterator<Item = &String> {
        self.models.keys()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbt::{train, GbtHyper};
    use crate::telemetry::Dataset;

    fn tiny_ensemble() -> TreeEnsemble {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let target: Vec<f64> = rows.iter().map(|r| r[0] * 2.0 + 30.0).collect();
        let d = Dataset::from_parts("h0", vec!["x".into()], rows, target, vec![]);
        train(&d, &GbtHyper { rounds: 3, min_child_weight: 1.0, ..GbtHyper::default() }, 1)
            .unwrap()
    }

    fn model_file(host: &str) -> ModelFile {
        ModelFile {
            version: MODEL_FORMAT_VERSION,
            host_id: host.to_string(),
            target: "T_amb".into(),
            feature_names: vec!["x".into()],
            target_bounds: (30.0, 48.0),
            model: ModelKind::Gbt(tiny_ensemble()),
            fan_models: None,
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = model_file("h0");
        let path = m.save(dir.path()).unwrap();
        let loaded = ModelFile::load(&path).unwrap();
        assert_eq!(m, loaded);
    }

    #[test]
    fn save_twice_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let m = model_file("h0");
        let p1 = m.save(dir.path()).unwrap();
        let bytes1 = std::fs::read(&p1).unwrap();
        let p2 = m.save(dir.path()).unwrap();
        let bytes2 = std::fs::read(&p2).unwrap();
        assert_eq!(bytes1, bytes2);
    }

    #[test]
    fn bank_loads_directory() {
        let dir = tempfile::tempdir().unwrap();
        model_file("h0").save(dir.path()).unwrap();
        model_file("h1").save(dir.path()).unwrap();
        let bank = ModelBank::load_dir(dir.path()).unwrap();
        assert_eq!(bank.len(), 2);
        assert!(bank.get("h0").is_ok());
        assert!(matches!(bank.get("zz"), Err(ModelError::UnknownHost(_))));
    }

    #[test]
    fn empty_bank_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(ModelBank::load_dir(dir.path()), Err(ModelError::EmptyBank(_))));
    }

    #[test]
    fn corrupt_file_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.model.json");
        std::fs::write(&path, b"{ not json").unwrap();
        assert!(matches!(ModelFile::load(&path), Err(ModelError::Corrupt { .. })));
    }

    #[test]
    fn predict_checks_dimension() {
        let m = model_file("h0");
        assert!(m.predict(&[1.0]).is_ok());
        assert!(matches!(
            m.predict(&[1.0, 2.0]),
            Err(ModelError::DimensionMismatch { expected: 1, got: 2 })
        ));
    }
}
