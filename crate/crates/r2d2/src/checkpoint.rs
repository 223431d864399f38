//! Checkpoints: `manifest.json` plus one little-endian `f32` blob.
//!
//! The manifest lists every tensor (name, shape, dtype, byte range) and
//! stores the training configuration, seed, decision threshold and both
//! vocabularies. The vocabulary fingerprint is a SHA-256 over the vocabulary
//! dumps; clients compare it to detect a model/graph mismatch.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use r2d2_core::kg::Relations;
use r2d2_core::{KnowledgeGraph, Model, TrainConfig, Vocab};

use crate::config_file;
use crate::data::{self, Row};
use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
pub const BLOB: &str = "tensors.bin";
const FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    pub offset: u64,
    pub length: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub blob: String,
    pub tensors: Vec<TensorEntry>,
    /// Configuration in `key = value` form.
    pub config: String,
    pub seed: u64,
    pub threshold: f64,
    pub entities: Vec<String>,
    /// Full relation vocabulary: base names, inverses, `NO_OP`.
    pub relations: Vec<String>,
    pub fingerprint: String,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub threshold: f64,
    pub model: Model,
    pub entities: Vocab,
    pub relations: Relations,
    pub fingerprint: String,
}

pub fn fingerprint(entities: &Vocab, relations: &Relations) -> String {
    let mut h = Sha256::new();
    h.update(entities.dump());
    h.update([0u8]);
    h.update(relations.vocab().dump());
    hex::encode(h.finalize())
}

fn vocab_of(names: &[String]) -> Result<Vocab> {
    let mut v = Vocab::new();
    for n in names {
        if v.get(n).is_some() {
            return Err(Error::VocabularyMismatch(format!("duplicate name `{n}`")));
        }
        v.intern(n);
    }
    Ok(v)
}

pub fn save(dir: &Path, kg: &KnowledgeGraph, model: &Model, config: &TrainConfig, threshold: f64) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut blob = Vec::new();
    let mut tensors = Vec::new();
    for id in model.params.ids() {
        let t = model.params.get(id);
        let offset = blob.len() as u64;
        for &v in t.data() {
            blob.extend_from_slice(&(v as f32).to_le_bytes());
        }
        tensors.push(TensorEntry {
            name: model.params.name(id).to_string(),
            shape: t.shape().to_vec(),
            dtype: "f32".into(),
            offset,
            length: blob.len() as u64 - offset,
        });
    }
    let manifest = Manifest {
        format: FORMAT,
        blob: BLOB.into(),
        tensors,
        config: config_file::render(config),
        seed: config.seed,
        threshold,
        entities: kg.entities().names().to_vec(),
        relations: kg.relations().vocab().names().to_vec(),
        fingerprint: fingerprint(kg.entities(), kg.relations()),
    };
    let blob_path = dir.join(BLOB);
    std::fs::write(&blob_path, &blob).map_err(|e| Error::io(&blob_path, e))?;
    data::write_text(&dir.join(MANIFEST), &serde_json::to_string_pretty(&manifest)?)
}

pub fn load(dir: &Path) -> Result<Checkpoint> {
    let manifest_path = dir.join(MANIFEST);
    let manifest: Manifest = serde_json::from_str(&data::read_text(&manifest_path)?)?;
    if manifest.format != FORMAT {
        return Err(Error::format(&manifest_path, format!("unsupported format {}", manifest.format)));
    }
    let config = config_file::parse(&manifest.config, &manifest_path)?;
    let entities = vocab_of(&manifest.entities)?;
    let relations = Relations::from_full(vocab_of(&manifest.relations)?)?;
    let fp = fingerprint(&entities, &relations);
    if fp != manifest.fingerprint {
        return Err(Error::VocabularyMismatch("manifest fingerprint does not match its vocabularies".into()));
    }

    let blob_path: PathBuf = dir.join(&manifest.blob);
    let blob = std::fs::read(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
    let mut model = Model::new(config.model, entities.len(), relations.len(), config.seed)?;
    for id in model.params.ids().collect::<Vec<_>>() {
        let name = model.params.name(id).to_string();
        let entry = manifest
            .tensors
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| Error::format(&manifest_path, format!("missing tensor {name}")))?;
        let dst = model.params.get_mut(id);
        if entry.dtype != "f32" || entry.shape != dst.shape() || entry.length != 4 * dst.len() as u64 {
            return Err(Error::format(&manifest_path, format!("tensor {name} has the wrong layout")));
        }
        let start = entry.offset as usize;
        let bytes = blob
            .get(start..start + entry.length as usize)
            .ok_or_else(|| Error::format(&blob_path, format!("tensor {name} out of range")))?;
        for (v, b) in dst.data_mut().iter_mut().zip(bytes.chunks_exact(4)) {
            *v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64;
        }
    }
    Ok(Checkpoint { config, threshold: manifest.threshold, model, entities, relations, fingerprint: fp })
}

impl Checkpoint {
    /// Graph over this checkpoint's vocabularies.
    pub fn graph(&self, rows: &[Row]) -> Result<KnowledgeGraph> {
        let kg = data::build_graph_with_vocab(rows, self.entities.clone(), &self.relations)?;
        debug_assert_eq!(fingerprint(kg.entities(), kg.relations()), self.fingerprint);
        Ok(kg)
    }
}
