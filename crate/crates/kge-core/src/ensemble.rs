//! Ensembles of independently trained replicas of one model kind, combined
//! at query time by score averaging, plus checkpoint persistence.
//!
//! Replica `j` is initialized with seed `base_seed + j` and trained with the
//! same hyperparameters; the replicas differ only through initialization and
//! sampling randomness. Training `k` replicas is embarrassingly parallel:
//! each task owns its replica exclusively and the dataset is shared
//! read-only, so the outcome is independent of the worker count.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FilterIndex, Triple};
use crate::embedding::{EmbeddingTable, ModelKind, ModelParams, Norm};
use crate::error::{Error, Result};
use crate::evaluation::Scorer;
use crate::scoring::score_unchecked;
use crate::training::{train_with_early_stop_filtered, TrainConfig, TrainingCurve};

/// `k` same-kind, same-size replicas combined by score averaging.
#[derive(Debug, Clone)]
pub struct EnsembleModel {
    replicas: Vec<ModelParams>,
    base_seed: u64,
}

impl EnsembleModel {
    pub fn from_replicas(replicas: Vec<ModelParams>, base_seed: u64) -> Result<Self> {
        if replicas.is_empty() {
            return Err(Error::InvalidConfig("an ensemble needs k >= 1 replicas".into()));
        }
        let kind = replicas[0].kind();
        let d = replicas[0].embedding_size();
        for (j, replica) in replicas.iter().enumerate() {
            if replica.kind() != kind || replica.embedding_size() != d {
                return Err(Error::InvalidConfig(format!(
                    "replica {j} is {} d={} but replica 0 is {} d={}",
                    replica.kind().name(),
                    replica.embedding_size(),
                    kind.name(),
                    d
                )));
            }
        }
        Ok(EnsembleModel {
            replicas,
            base_seed,
        })
    }

    pub fn k(&self) -> usize {
        self.replicas.len()
    }

    pub fn kind(&self) -> ModelKind {
        self.replicas[0].kind()
    }

    /// Per-replica embedding size `d_l`.
    pub fn replica_size(&self) -> usize {
        self.replicas[0].embedding_size()
    }

    /// Overall embedding size `k * d_l`, the total adjustable parameters
    /// per entity across replicas.
    pub fn overall_size(&self) -> usize {
        self.k() * self.replica_size()
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    pub fn replicas(&self) -> &[ModelParams] {
        &self.replicas
    }

    pub fn replica(&self, j: usize) -> &ModelParams {
        &self.replicas[j]
    }
}

impl Scorer for EnsembleModel {
    fn score_ids(&self, head: usize, relation: usize, tail: usize) -> f64 {
        let triple = Triple::new(head, relation, tail);
        let sum: f64 = self
            .replicas
            .iter()
            .map(|r| score_unchecked(r, triple))
            .sum();
        sum / self.replicas.len() as f64
    }
}

/// Arithmetic mean of the replica scores.
pub fn ensemble_score(model: &EnsembleModel, triple: Triple) -> Result<f64> {
    let mut sum = 0.0;
    for replica in model.replicas() {
        sum += crate::scoring::score(replica, triple)?;
    }
    Ok(sum / model.k() as f64)
}

type ReplicaOutcome = Result<(ModelParams, TrainingCurve)>;

/// Trains `k` replicas of `kind` with per-replica seeds `config.seed + j`,
/// running up to `workers` trainings concurrently. Returns the ensemble and
/// the per-replica training curves. Any replica failure aborts the whole
/// training, reported with the failing replica index.
pub fn train_ensemble(
    kind: ModelKind,
    k: usize,
    d_l: usize,
    dataset: &Dataset,
    config: &TrainConfig,
    workers: usize,
) -> Result<(EnsembleModel, Vec<TrainingCurve>)> {
    if k < 1 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    if workers < 1 {
        return Err(Error::InvalidConfig("workers must be >= 1".into()));
    }
    config.validate()?;
    let filter = FilterIndex::build(dataset);

    let results: Mutex<Vec<Option<ReplicaOutcome>>> = Mutex::new((0..k).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let threads = workers.min(k);

    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::SeqCst);
                if j >= k {
                    break;
                }
                let mut replica_config = config.clone();
                replica_config.seed = config.seed + j as u64;
                let outcome = ModelParams::init(
                    kind,
                    dataset.entity_count(),
                    dataset.relation_count(),
                    d_l,
                    replica_config.seed,
                )
                .map(|p| p.with_norm(config.norm))
                .and_then(|params| {
                    train_with_early_stop_filtered(params, dataset, &replica_config, &filter)
                });
                results.lock().unwrap()[j] = Some(outcome);
            });
        }
    });

    let mut replicas = Vec::with_capacity(k);
    let mut curves = Vec::with_capacity(k);
    for (j, slot) in results.into_inner().unwrap().into_iter().enumerate() {
        match slot.expect("every replica index was claimed") {
            Ok((params, curve)) => {
                replicas.push(params);
                curves.push(curve);
            }
            Err(source) => {
                return Err(Error::ReplicaFailed {
                    index: j,
                    source: Box::new(source),
                })
            }
        }
    }
    let model = EnsembleModel::from_replicas(replicas, config.seed)?;
    Ok((model, curves))
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"KGEE";
const CHECKPOINT_VERSION: u16 = 1;

/// Checkpoint metadata, serialized as canonical (sorted-key) JSON.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CheckpointMeta {
    pub kind: ModelKind,
    pub d_l: usize,
    pub k: usize,
    pub seeds: Vec<u64>,
    pub norm: Norm,
    pub entities: usize,
    pub relations: usize,
    pub config_digest: String,
    pub vocab_hash: String,
}

impl CheckpointMeta {
    /// Fails when the checkpoint was trained on a different vocabulary.
    pub fn verify_vocabulary(&self, dataset: &Dataset) -> Result<()> {
        let got = dataset.vocabulary.content_hash();
        if got != self.vocab_hash {
            return Err(Error::VocabularyMismatch {
                expected: self.vocab_hash.clone(),
                got,
            });
        }
        Ok(())
    }
}

/// Writes `model` to `path`.
///
/// Layout: magic "KGEE", u16 version, u32 metadata length + canonical JSON
/// metadata, then per replica the entity table and the relation table, each
/// as a u64 byte length followed by row-major little-endian f64 values.
pub fn save_checkpoint(
    model: &EnsembleModel,
    config_digest: &str,
    vocab_hash: &str,
    path: &Path,
) -> Result<()> {
    let meta = CheckpointMeta {
        kind: model.kind(),
        d_l: model.replica_size(),
        k: model.k(),
        seeds: model.replicas().iter().map(|r| r.seed()).collect(),
        norm: model.replicas()[0].norm(),
        entities: model.replicas()[0].entity_count(),
        relations: model.replicas()[0].relation_count(),
        config_digest: config_digest.to_string(),
        vocab_hash: vocab_hash.to_string(),
    };
    // Via Value: serde_json maps are sorted, giving canonical key order.
    let meta_json = serde_json::to_string(&serde_json::to_value(&meta).expect("meta serializes"))
        .expect("meta serializes");

    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(meta_json.len() as u32).to_le_bytes());
    out.extend_from_slice(meta_json.as_bytes());
    for replica in model.replicas() {
        for table in [replica.entity_table(), replica.relation_table()] {
            let bytes = 8 * table.values().len() as u64;
            out.extend_from_slice(&bytes.to_le_bytes());
            for v in table.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

fn read_exact_or_corrupt(reader: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    reader
        .read_exact(buf)
        .map_err(|_| Error::CorruptCheckpoint(format!("truncated while reading {what}")))
}

/// Reads a checkpoint back; parameters are restored bit-exactly. Payload
/// sizes are validated against the metadata before any model is built.
pub fn load_checkpoint(path: &Path) -> Result<(EnsembleModel, CheckpointMeta)> {
    let file = fs::File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::Io(e)
        }
    })?;
    let mut reader = std::io::BufReader::new(file);

    let mut magic = [0u8; 4];
    read_exact_or_corrupt(&mut reader, &mut magic, "magic")?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::CorruptCheckpoint("bad magic bytes".into()));
    }
    let mut version = [0u8; 2];
    read_exact_or_corrupt(&mut reader, &mut version, "version")?;
    let version = u16::from_le_bytes(version);
    if version != CHECKPOINT_VERSION {
        return Err(Error::CorruptCheckpoint(format!(
            "unsupported format version {version}"
        )));
    }
    let mut meta_len = [0u8; 4];
    read_exact_or_corrupt(&mut reader, &mut meta_len, "metadata length")?;
    let mut meta_bytes = vec![0u8; u32::from_le_bytes(meta_len) as usize];
    read_exact_or_corrupt(&mut reader, &mut meta_bytes, "metadata")?;
    let meta: CheckpointMeta = serde_json::from_slice(&meta_bytes)
        .map_err(|e| Error::CorruptCheckpoint(format!("metadata: {e}")))?;

    if meta.k == 0 || meta.seeds.len() != meta.k {
        return Err(Error::CorruptCheckpoint(format!(
            "metadata lists {} seeds for k={}",
            meta.seeds.len(),
            meta.k
        )));
    }
    let d_rel = meta.kind.relation_width(meta.d_l);
    let mut replicas = Vec::with_capacity(meta.k);
    for j in 0..meta.k {
        let entity = read_table(&mut reader, meta.entities, meta.d_l, &format!("replica {j} entity table"))?;
        let relation = read_table(&mut reader, meta.relations, d_rel, &format!("replica {j} relation table"))?;
        let params = ModelParams::from_tables(meta.kind, entity, relation, meta.seeds[j])?
            .with_norm(meta.norm);
        replicas.push(params);
    }
    let mut trailing = [0u8; 1];
    if reader.read(&mut trailing)? != 0 {
        return Err(Error::CorruptCheckpoint("trailing bytes after payload".into()));
    }

    let base_seed = meta.seeds[0];
    Ok((EnsembleModel::from_replicas(replicas, base_seed)?, meta))
}

fn read_table(
    reader: &mut impl Read,
    rows: usize,
    width: usize,
    what: &str,
) -> Result<EmbeddingTable> {
    let mut len_bytes = [0u8; 8];
    read_exact_or_corrupt(reader, &mut len_bytes, what)?;
    let byte_len = u64::from_le_bytes(len_bytes);
    let expected = 8 * (rows * width) as u64;
    if byte_len != expected {
        return Err(Error::CorruptCheckpoint(format!(
            "{what}: payload is {byte_len} bytes, metadata implies {expected}"
        )));
    }
    let mut table = EmbeddingTable::zeros(rows, width)?;
    let mut buf = [0u8; 8];
    for v in table.values_mut() {
        read_exact_or_corrupt(reader, &mut buf, what)?;
        *v = f64::from_le_bytes(buf);
    }
    Ok(table)
}
