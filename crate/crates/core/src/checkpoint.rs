//! Binary checkpoint: trained parameters plus everything needed to rebuild
//! them and to check they belong to a dataset.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes  "KANECKPT"
//! version      u32
//! header_len   u64
//! header       header_len bytes of UTF-8 JSON
//! data         f64 values of every tensor, in header order, row-major
//! digest       32 bytes, SHA-256 of everything before it
//! ```
//!
//! The header holds the training configuration, model sizes, random
//! generator state, the dataset checksum, entity and relation names, and the
//! name and shape of every tensor.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{KaneError, Result};
use crate::kg::Dataset;
use crate::model::{ModelParams, ModelSizes};
use crate::training::{RngState, TrainConfig, Trained};

pub const MAGIC: &[u8; 8] = b"KANECKPT";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub params: ModelParams,
    pub rng: RngState,
    /// Checksum of the dataset bundle the parameters were trained on.
    pub dataset_checksum: String,
    pub entity_names: Vec<String>,
    pub relation_names: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: TrainConfig,
    sizes: ModelSizes,
    rng_seed: u64,
    /// Decimal, since JSON numbers cannot carry a u128 portably.
    rng_word_pos: String,
    dataset_checksum: String,
    entity_names: Vec<String>,
    relation_names: Vec<String>,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize, PartialEq, Debug)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

fn format_err(msg: impl Into<String>) -> KaneError {
    KaneError::Format(format!("checkpoint: {}", msg.into()))
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, what: &str) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(format_err(format!("truncated while reading {what}")));
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

impl Checkpoint {
    pub fn new(dataset: &Dataset, config: &TrainConfig, trained: Trained) -> Result<Self> {
        Ok(Checkpoint {
            config: config.clone(),
            params: trained.params,
            rng: trained.rng,
            dataset_checksum: dataset.checksum()?,
            entity_names: dataset.kg.entities().names().to_vec(),
            relation_names: dataset.kg.relations().names().to_vec(),
        })
    }

    /// Fails unless `dataset` is the one these parameters were trained on.
    pub fn check_dataset(&self, dataset: &Dataset) -> Result<()> {
        let found = dataset.checksum()?;
        if found != self.dataset_checksum {
            return Err(KaneError::ChecksumMismatch {
                expected: self.dataset_checksum.clone(),
                found,
            });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let tensors = self.params.tensors();
        let header = Header {
            config: self.config.clone(),
            sizes: self.params.sizes(),
            rng_seed: self.rng.seed,
            rng_word_pos: self.rng.word_pos.to_string(),
            dataset_checksum: self.dataset_checksum.clone(),
            entity_names: self.entity_names.clone(),
            relation_names: self.relation_names.clone(),
            tensors: tensors
                .iter()
                .map(|(name, t)| TensorEntry {
                    name: name.clone(),
                    shape: t.shape().to_vec(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| format_err(e.to_string()))?;
        let values: usize = tensors.iter().map(|(_, t)| t.len()).sum();
        let mut out = Vec::with_capacity(8 + 4 + 8 + json.len() + 8 * values + 32);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in &tensors {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 32 || &bytes[..MAGIC.len()] != MAGIC {
            return Err(format_err("not a checkpoint file (bad magic)"));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(format_err("digest mismatch (file is corrupt or truncated)"));
        }
        let mut rest = &body[MAGIC.len()..];
        let version = u32::from_le_bytes(take(&mut rest, 4, "version")?.try_into().unwrap());
        if version != VERSION {
            return Err(format_err(format!("unsupported version {version} (expected {VERSION})")));
        }
        let len = u64::from_le_bytes(take(&mut rest, 8, "header length")?.try_into().unwrap());
        let len = usize::try_from(len).map_err(|_| format_err("header too large"))?;
        let header: Header = serde_json::from_slice(take(&mut rest, len, "header")?)
            .map_err(|e| format_err(format!("bad header: {e}")))?;

        let mut params = ModelParams::zeros(&header.config.model, header.sizes)?;
        let mut slots = params.tensors_mut();
        if slots.len() != header.tensors.len() {
            return Err(format_err(format!(
                "header lists {} tensors, configuration implies {}",
                header.tensors.len(),
                slots.len()
            )));
        }
        for ((name, t), entry) in slots.iter_mut().zip(&header.tensors) {
            if *name != entry.name || t.shape() != entry.shape.as_slice() {
                return Err(format_err(format!(
                    "tensor {} {:?} does not match expected {} {:?}",
                    entry.name,
                    entry.shape,
                    name,
                    t.shape()
                )));
            }
            let raw = take(&mut rest, 8 * t.len(), &entry.name)?;
            for (dst, chunk) in t.data_mut().iter_mut().zip(raw.chunks_exact(8)) {
                *dst = f64::from_le_bytes(chunk.try_into().unwrap());
            }
        }
        if !rest.is_empty() {
            return Err(format_err(format!("{} trailing bytes", rest.len())));
        }
        if header.entity_names.len() != header.sizes.entities
            || header.relation_names.len() != header.sizes.relations
        {
            return Err(format_err("name lists disagree with model sizes"));
        }
        let word_pos = header
            .rng_word_pos
            .parse()
            .map_err(|_| format_err("bad random generator position"))?;
        Ok(Checkpoint {
            config: header.config,
            params,
            rng: RngState {
                seed: header.rng_seed,
                word_pos,
            },
            dataset_checksum: header.dataset_checksum,
            entity_names: header.entity_names,
            relation_names: header.relation_names,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{generate_synthetic_kg, SynthConfig};
    use crate::training::init_params;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> (Dataset, Checkpoint) {
        let (kg, split) = generate_synthetic_kg(&SynthConfig {
            entities: 12,
            clusters: 3,
            ..SynthConfig::default()
        })
        .unwrap();
        let ds = Dataset { kg, split };
        let mut config = TrainConfig::default();
        config.model.dim = 4;
        config.model.head_dim = 3;
        config.task = crate::training::Task::Classification;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = init_params(&ds, &config, &mut rng).unwrap();
        let trained = Trained {
            params,
            report: Default::default(),
            rng: RngState {
                seed: 5,
                word_pos: rng.get_word_pos(),
            },
        };
        let ck = Checkpoint::new(&ds, &config, trained).unwrap();
        (ds, ck)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (ds, ck) = sample();
        let bytes = ck.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert_eq!(back.params, ck.params);
        assert_eq!(back.config, ck.config);
        assert_eq!(back.rng, ck.rng);
        back.check_dataset(&ds).unwrap();
    }

    #[test]
    fn corruption_is_detected() {
        let (_, ck) = sample();
        let mut bytes = ck.to_bytes().unwrap();
        let last = bytes.len() - 40;
        bytes[last] ^= 1;
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(KaneError::Format(_))));
        assert!(Checkpoint::from_bytes(&bytes[..20]).is_err());
        assert!(Checkpoint::from_bytes(b"not a checkpoint at all, really not one").is_err());
    }

    #[test]
    fn other_dataset_is_refused() {
        let (_, ck) = sample();
        let (kg, split) = generate_synthetic_kg(&SynthConfig {
            entities: 12,
            clusters: 3,
            seed: 7,
            ..SynthConfig::default()
        })
        .unwrap();
        assert!(matches!(
            ck.check_dataset(&Dataset { kg, split }),
            Err(KaneError::ChecksumMismatch { .. })
        ));
    }
}
