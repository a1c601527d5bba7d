//! Model checkpoints: a JSON manifest next to a little-endian parameter blob.
//!
//! The manifest lists every model part with its config, parameter names and
//! shapes, and the byte range of its scalars in the blob. A checkpoint
//! written mid-training also carries a state blob (current parameters and
//! optimizer moments) so the run can be resumed.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use waytime_core::seqmodel::{
    EpochRecord, Mlp, MlpBank, MlpConfig, ModelConfig, ParamStore, Precision, Real, TrainConfig, Trainable,
    TrainerState, Transformer,
};

use crate::error::{Error, IoContext, Result};
use crate::hash::sha256_hex;
use crate::models::{BankModel, TransformerModel};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Transformer,
    MlpBank,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartManifest {
    pub config: serde_json::Value,
    pub params: Vec<ParamEntry>,
    /// Byte offset and length in the blob.
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub config: TrainConfig,
    pub config_hash: String,
    pub dataset_sha256: String,
    pub include_unconverged: bool,
    /// Smallest and largest waypoint count in the training split.
    pub n_range: (usize, usize),
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResumeMeta {
    pub epoch: usize,
    pub step: usize,
    pub best_val: f64,
    pub state_blob: String,
    pub state_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub version: u32,
    pub kind: ModelKind,
    pub precision: Precision,
    pub seed: u64,
    pub parts: Vec<PartManifest>,
    pub blob: String,
    pub blob_sha256: String,
    #[serde(default)]
    pub training: Option<TrainingMeta>,
    #[serde(default)]
    pub resume: Option<ResumeMeta>,
}

fn precision_of<R: Real>() -> Precision {
    if R::BYTES == 4 {
        Precision::F32
    } else {
        Precision::F64
    }
}

fn entries<R: Real>(p: &ParamStore<R>) -> Vec<ParamEntry> {
    p.names().iter().zip(p.shapes()).map(|(n, (r, c))| ParamEntry { name: n.clone(), shape: [r, c] }).collect()
}

fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn pack<R: Real>(stores: &[(serde_json::Value, &ParamStore<R>)]) -> (Vec<PartManifest>, Vec<u8>) {
    let mut blob = Vec::new();
    let parts = stores
        .iter()
        .map(|(config, p)| {
            let bytes = p.to_le_bytes();
            let part = PartManifest { config: config.clone(), params: entries(p), offset: blob.len(), len: bytes.len() };
            blob.extend_from_slice(&bytes);
            part
        })
        .collect();
    (parts, blob)
}

fn check_store<R: Real>(fresh: &ParamStore<R>, part: &PartManifest) -> Result<()> {
    if entries(fresh) != part.params {
        return Err(Error::Format("checkpoint parameter names or shapes do not match its config".into()));
    }
    Ok(())
}

fn part_bytes<'a>(blob: &'a [u8], part: &PartManifest) -> Result<&'a [u8]> {
    blob.get(part.offset..part.offset + part.len)
        .ok_or_else(|| Error::Format("checkpoint blob is shorter than its manifest".into()))
}

/// Write `<path>` (manifest) and `<path>.bin` (parameters).
fn write(path: &Path, mut manifest: CheckpointManifest, blob: &[u8]) -> Result<()> {
    let blob_path = sibling(path, "bin");
    fs::write(&blob_path, blob).at(&blob_path)?;
    manifest.blob = file_name(&blob_path);
    manifest.blob_sha256 = sha256_hex(blob);
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(path, text + "\n").at(path)
}

pub fn read_manifest(path: &Path) -> Result<CheckpointManifest> {
    let text = fs::read_to_string(path).at(path)?;
    let manifest: CheckpointManifest = serde_json::from_str(&text)?;
    if manifest.version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
            manifest.version
        )));
    }
    Ok(manifest)
}

fn read_blob(path: &Path, name: &str, sha: &str) -> Result<Vec<u8>> {
    let p = path.parent().unwrap_or(Path::new(".")).join(name);
    let blob = fs::read(&p).at(&p)?;
    if sha256_hex(&blob) != sha {
        return Err(Error::Format(format!("{}: checksum mismatch", p.display())));
    }
    Ok(blob)
}

pub fn save_transformer<R: Real>(
    path: &Path,
    model: &Transformer<R>,
    seed: u64,
    training: Option<TrainingMeta>,
) -> Result<()> {
    let config = serde_json::to_value(model.config())?;
    let (parts, blob) = pack(&[(config, model.params())]);
    let manifest = CheckpointManifest {
        version: CHECKPOINT_VERSION,
        kind: ModelKind::Transformer,
        precision: precision_of::<R>(),
        seed,
        parts,
        blob: String::new(),
        blob_sha256: String::new(),
        training,
        resume: None,
    };
    write(path, manifest, &blob)
}

pub fn save_mlp_bank<R: Real>(
    path: &Path,
    bank: &MlpBank<R>,
    seed: u64,
    training: Option<TrainingMeta>,
) -> Result<()> {
    let stores = bank
        .models()
        .iter()
        .map(|m| Ok((serde_json::to_value(m.config())?, m.params())))
        .collect::<Result<Vec<_>>>()?;
    let (parts, blob) = pack(&stores);
    let manifest = CheckpointManifest {
        version: CHECKPOINT_VERSION,
        kind: ModelKind::MlpBank,
        precision: precision_of::<R>(),
        seed,
        parts,
        blob: String::new(),
        blob_sha256: String::new(),
        training,
        resume: None,
    };
    write(path, manifest, &blob)
}

fn load_transformer_as<R: Real>(manifest: &CheckpointManifest, blob: &[u8]) -> Result<Transformer<R>> {
    let [part] = manifest.parts.as_slice() else {
        return Err(Error::Format("a transformer checkpoint has exactly one part".into()));
    };
    let cfg: ModelConfig = serde_json::from_value(part.config.clone())?;
    let mut model = Transformer::<R>::new(cfg, 0)?;
    check_store(model.params(), part)?;
    model.params_mut().load_le_bytes(part_bytes(blob, part)?)?;
    Ok(model)
}

fn load_bank_as<R: Real>(manifest: &CheckpointManifest, blob: &[u8]) -> Result<MlpBank<R>> {
    let mut bank = MlpBank::new();
    for part in &manifest.parts {
        let cfg: MlpConfig = serde_json::from_value(part.config.clone())?;
        let mut mlp = Mlp::<R>::new(cfg, 0)?;
        check_store(mlp.params(), part)?;
        mlp.params_mut().load_le_bytes(part_bytes(blob, part)?)?;
        bank.insert(mlp);
    }
    Ok(bank)
}

pub fn load_transformer(path: &Path) -> Result<(TransformerModel, CheckpointManifest)> {
    let manifest = read_manifest(path)?;
    if manifest.kind != ModelKind::Transformer {
        return Err(Error::Format(format!("{}: not a transformer checkpoint", path.display())));
    }
    let blob = read_blob(path, &manifest.blob, &manifest.blob_sha256)?;
    let model = match manifest.precision {
        Precision::F32 => TransformerModel::F32(load_transformer_as(&manifest, &blob)?),
        Precision::F64 => TransformerModel::F64(load_transformer_as(&manifest, &blob)?),
    };
    Ok((model, manifest))
}

pub fn load_mlp_bank(path: &Path) -> Result<(BankModel, CheckpointManifest)> {
    let manifest = read_manifest(path)?;
    if manifest.kind != ModelKind::MlpBank {
        return Err(Error::Format(format!("{}: not an MLP bank checkpoint", path.display())));
    }
    let blob = read_blob(path, &manifest.blob, &manifest.blob_sha256)?;
    let bank = match manifest.precision {
        Precision::F32 => BankModel::F32(load_bank_as(&manifest, &blob)?),
        Precision::F64 => BankModel::F64(load_bank_as(&manifest, &blob)?),
    };
    Ok((bank, manifest))
}

/// Adds a resumable trainer state to the transformer checkpoint at `path`:
/// best parameters go in the main blob, the current parameters and the
/// optimizer moments in `<path>.state.bin`.
pub fn save_transformer_state<R: Real>(
    path: &Path,
    current: &Transformer<R>,
    state: &TrainerState<R>,
    seed: u64,
    training: TrainingMeta,
) -> Result<()> {
    let best = Transformer::from_params(current.config().clone(), state.best_params.clone())?;
    save_transformer(path, &best, seed, Some(training))?;
    let mut bytes = current.params().to_le_bytes();
    for (m, v) in &state.moments {
        for x in m.iter().chain(v) {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    let state_path = sibling(path, "state.bin");
    fs::write(&state_path, &bytes).at(&state_path)?;
    let mut manifest = read_manifest(path)?;
    manifest.resume = Some(ResumeMeta {
        epoch: state.epoch,
        step: state.step,
        best_val: state.best_val,
        state_blob: file_name(&state_path),
        state_sha256: sha256_hex(&bytes),
    });
    fs::write(path, serde_json::to_string_pretty(&manifest)? + "\n").at(path)
}

/// The model at its latest parameters and the trainer state, from a
/// checkpoint written by [`save_transformer_state`].
pub fn load_transformer_state<R: Real>(path: &Path) -> Result<(Transformer<R>, TrainerState<R>, CheckpointManifest)> {
    let manifest = read_manifest(path)?;
    if manifest.precision != precision_of::<R>() {
        return Err(Error::Format("checkpoint precision differs from the requested one".into()));
    }
    let (Some(resume), Some(training)) = (&manifest.resume, &manifest.training) else {
        return Err(Error::Format(format!("{}: checkpoint has no resumable state", path.display())));
    };
    let blob = read_blob(path, &manifest.blob, &manifest.blob_sha256)?;
    let best = load_transformer_as::<R>(&manifest, &blob)?;
    let bytes = read_blob(path, &resume.state_blob, &resume.state_sha256)?;
    let mut current = best.clone();
    let n = current.params().num_scalars();
    let split = n * R::BYTES;
    if bytes.len() != split + 16 * n {
        return Err(Error::Format("state blob size does not match the model".into()));
    }
    current.params_mut().load_le_bytes(&bytes[..split])?;
    let mut words = bytes[split..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let moments = best
        .params()
        .tensors()
        .iter()
        .map(|t| {
            let m: Vec<f64> = words.by_ref().take(t.len()).collect();
            let v: Vec<f64> = words.by_ref().take(t.len()).collect();
            (m, v)
        })
        .collect();
    let state = TrainerState {
        epoch: resume.epoch,
        step: resume.step,
        history: training.history.clone(),
        best_epoch: training.best_epoch,
        best_val: resume.best_val,
        best_params: best.params().clone(),
        moments,
    };
    Ok((current, state, manifest))
}
