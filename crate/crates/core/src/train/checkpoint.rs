//! `GCKP` files: magic, version, length-prefixed JSON manifest, then raw
//! little-endian `f32` arrays at the offsets the manifest lists.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::error::{Error, Result};
use crate::model::{parameter_layout, ModelConfig, ModelParameters};
use crate::numerics::{AdamConfig, AdamState, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"GCKP";
pub const CHECKPOINT_VERSION: u32 = 1;
const PREFIX_LEN: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayRole {
    Parameter,
    AdamM,
    AdamV,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayEntry {
    pub name: String,
    pub role: ArrayRole,
    pub shape: Vec<usize>,
    /// Byte offset into the payload that follows the manifest.
    pub offset: u64,
}

impl ArrayEntry {
    fn byte_len(&self) -> u64 {
        4 * self.shape.iter().product::<usize>() as u64
    }
}

/// Position of the training RNG: its seed plus the number of 32-bit words consumed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: String,
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream().to_string(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng> {
        use rand::SeedableRng;
        let parse = |s: &str, what: &str| {
            s.parse::<u128>()
                .map_err(|_| Error::Format(format!("checkpoint rng {what} {s:?} is not an integer")))
        };
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(parse(&self.stream, "stream")? as u64);
        rng.set_word_pos(parse(&self.word_pos, "word position")?);
        Ok(rng)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub model: ModelConfig,
    pub training: TrainConfig,
    /// Number of optimizer updates applied so far.
    pub step: u64,
    pub rng: RngState,
    pub adam: AdamConfig,
    pub adam_step: u64,
    pub entries: Vec<ArrayEntry>,
}

/// Everything needed to evaluate a model or resume its training.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub manifest: CheckpointManifest,
    pub params: ModelParameters<f32>,
    pub adam: AdamState<f32>,
}

impl Checkpoint {
    /// Errors unless the saved arrays fit `model` exactly.
    pub fn check_model(&self, model: &ModelConfig) -> Result<()> {
        let saved = &self.manifest.model;
        let geometry = |m: &ModelConfig| (m.clip_len, m.height, m.width, m.blocks.len(), m.per_part_weights);
        if geometry(saved) != geometry(model) {
            return Err(Error::CheckpointMismatch(format!(
                "saved clip/geometry {:?}, configured {:?}",
                geometry(saved),
                geometry(model)
            )));
        }
        for (i, (a, b)) in saved.blocks.iter().zip(&model.blocks).enumerate() {
            if a != b {
                return Err(Error::CheckpointMismatch(format!(
                    "model.blocks[{i}]: saved {a:?}, configured {b:?}"
                )));
            }
        }
        self.params.check_layout(model)
    }
}

fn write_f32s(out: &mut Vec<u8>, t: &Tensor<f32>) {
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Arrays in file order: parameters, then Adam first and second moments.
fn arrays(ckpt: &Checkpoint) -> impl Iterator<Item = (&str, ArrayRole, &Tensor<f32>)> {
    let names = ckpt.params.names().iter().map(String::as_str);
    ckpt.params
        .iter()
        .map(|(n, t)| (n, ArrayRole::Parameter, t))
        .chain(names.clone().zip(&ckpt.adam.m).map(|(n, t)| (n, ArrayRole::AdamM, t)))
        .chain(names.zip(&ckpt.adam.v).map(|(n, t)| (n, ArrayRole::AdamV, t)))
}

/// Manifest entries for the arrays of `ckpt`, as [`save_checkpoint`] lays them out.
pub fn layout_entries(ckpt: &Checkpoint) -> Vec<ArrayEntry> {
    let mut offset = 0;
    arrays(ckpt)
        .map(|(name, role, t)| {
            let e = ArrayEntry {
                name: name.to_string(),
                role,
                shape: t.shape().to_vec(),
                offset,
            };
            offset += e.byte_len();
            e
        })
        .collect()
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let entries = layout_entries(ckpt);
    let mut payload = Vec::new();
    for (_, _, t) in arrays(ckpt) {
        write_f32s(&mut payload, t);
    }
    let manifest = CheckpointManifest {
        entries,
        adam: ckpt.adam.config,
        adam_step: ckpt.adam.step,
        format_version: CHECKPOINT_VERSION,
        ..ckpt.manifest.clone()
    };
    let json = serde_json::to_vec_pretty(&manifest)?;
    let mut bytes = Vec::with_capacity(PREFIX_LEN + json.len() + payload.len());
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&json);
    bytes.extend_from_slice(&payload);

    // Write-then-rename so an interrupted save never leaves a torn checkpoint.
    let tmp = path.with_extension("gckp.tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn decode_checkpoint(bytes: &[u8], origin: &Path) -> Result<Checkpoint> {
    if bytes.len() < PREFIX_LEN {
        return Err(Error::Truncated(format!(
            "{origin:?}: {} bytes, header needs {PREFIX_LEN}",
            bytes.len()
        )));
    }
    if &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic {
            path: origin.to_path_buf(),
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let mlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let rest = &bytes[PREFIX_LEN..];
    if rest.len() < mlen {
        return Err(Error::Truncated(format!(
            "{origin:?}: manifest needs {mlen} bytes, {} present",
            rest.len()
        )));
    }
    let manifest: CheckpointManifest = serde_json::from_slice(&rest[..mlen])?;
    if manifest.format_version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: manifest.format_version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let payload = &rest[mlen..];

    let mut spans: Vec<(u64, u64)> = manifest
        .entries
        .iter()
        .map(|e| (e.offset, e.offset + e.byte_len()))
        .collect();
    spans.sort_unstable();
    for w in spans.windows(2) {
        if w[0].1 > w[1].0 {
            return Err(Error::Format(format!("{origin:?}: overlapping arrays in manifest")));
        }
    }
    let needed = spans.last().map_or(0, |s| s.1);
    if (payload.len() as u64) < needed {
        return Err(Error::Truncated(format!(
            "{origin:?}: payload has {} bytes, manifest needs {needed}",
            payload.len()
        )));
    }
    if payload.len() as u64 != needed {
        return Err(Error::Format(format!(
            "{origin:?}: {} trailing payload bytes",
            payload.len() as u64 - needed
        )));
    }

    let read = |e: &ArrayEntry| -> Result<Tensor<f32>> {
        let raw = &payload[e.offset as usize..(e.offset + e.byte_len()) as usize];
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Tensor::new(&e.shape, data)
    };
    let pick = |role: ArrayRole| -> Result<(Vec<String>, Vec<Tensor<f32>>)> {
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for e in manifest.entries.iter().filter(|e| e.role == role) {
            names.push(e.name.clone());
            tensors.push(read(e)?);
        }
        Ok((names, tensors))
    };
    let (names, tensors) = pick(ArrayRole::Parameter)?;
    let (m_names, m) = pick(ArrayRole::AdamM)?;
    let (v_names, v) = pick(ArrayRole::AdamV)?;
    if m_names != names || v_names != names {
        return Err(Error::Format(format!(
            "{origin:?}: optimizer arrays do not mirror the parameters"
        )));
    }
    for (i, t) in tensors.iter().enumerate() {
        if m[i].shape() != t.shape() || v[i].shape() != t.shape() {
            return Err(Error::Format(format!(
                "{origin:?}: optimizer state shape differs for {}",
                names[i]
            )));
        }
    }
    let params = ModelParameters::from_parts(names, tensors)?;
    let adam = AdamState {
        config: manifest.adam,
        step: manifest.adam_step,
        m,
        v,
    };
    // The manifest's own model section must describe the arrays it carries.
    let expected = parameter_layout(&manifest.model)?;
    if expected.len() != params.len() {
        return Err(Error::CheckpointMismatch(format!(
            "{origin:?}: manifest model implies {} arrays, file holds {}",
            expected.len(),
            params.len()
        )));
    }
    Ok(Checkpoint { manifest, params, adam })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}
