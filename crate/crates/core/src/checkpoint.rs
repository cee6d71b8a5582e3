//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic        12 bytes  "RFDRONE-CKPT"
//! version      u32       FORMAT_VERSION
//! header_len   u64       byte length of the JSON header
//! header       JSON      CheckpointHeader
//! payload      f64 LE    every tensor listed in `header.tensors`, in order;
//!                        then, when `header.optimizer` is present, the Adam first
//!                        moments and then the second moments of every parameter
//!                        tensor, in the same order
//! ```

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use rfdrone_nn::{Adam, AdamConfig, Module, Slot};

use crate::error::{io_err, Error, Result};
use crate::features::FeatureMethod;
use crate::models::{Classifier, InitInfo, ModelSpec};
use crate::signal::ClassificationCase;

pub const MAGIC: &[u8; 12] = b"RFDRONE-CKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TensorKind {
    Param,
    Buffer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub kind: TensorKind,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerHeader {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub step: u64,
}

/// What a trained model was trained on, so `eval`/`predict` can rebuild the pipeline.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingContext {
    pub features: Option<FeatureMethod>,
    pub case: Option<ClassificationCase>,
    pub class_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub model: ModelSpec,
    pub init: InitInfo,
    pub context: TrainingContext,
    pub tensors: Vec<TensorEntry>,
    pub optimizer: Option<OptimizerHeader>,
}

fn collect_tensors(model: &mut Classifier) -> (Vec<TensorEntry>, Vec<f64>) {
    let mut entries = Vec::new();
    let mut payload = Vec::new();
    model.visit("", &mut |name, slot| {
        let (kind, t) = match slot {
            Slot::Param(p) => (TensorKind::Param, &p.value),
            Slot::Buffer(b) => (TensorKind::Buffer, &*b),
        };
        entries.push(TensorEntry {
            name: name.to_string(),
            kind,
            shape: t.shape().to_vec(),
        });
        payload.extend_from_slice(t.data());
    });
    (entries, payload)
}

pub fn save_checkpoint(
    path: &Path,
    model: &mut Classifier,
    optimizer: Option<&Adam>,
    context: &TrainingContext,
) -> Result<()> {
    let (tensors, mut payload) = collect_tensors(model);
    let optimizer_header = optimizer.map(|adam| {
        for moments in [adam.first_moments(), adam.second_moments()] {
            for m in moments {
                payload.extend_from_slice(m);
            }
        }
        OptimizerHeader {
            lr: adam.config.lr,
            beta1: adam.config.beta1,
            beta2: adam.config.beta2,
            eps: adam.config.eps,
            weight_decay: adam.config.weight_decay,
            step: adam.step_count(),
        }
    });
    let header = CheckpointHeader {
        model: model.spec().clone(),
        init: model.init_info().clone(),
        context: context.clone(),
        tensors,
        optimizer: optimizer_header,
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;

    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for v in &payload {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    };
    write(&mut w).map_err(io_err(path))
}

pub struct LoadedCheckpoint {
    pub model: Classifier,
    pub optimizer: Option<Adam>,
    pub header: CheckpointHeader,
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], path: &Path) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Checkpoint(format!("{} is truncated", path.display()))
        } else {
            Error::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })
}

fn read_f64s<R: Read>(r: &mut R, n: usize, path: &Path) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 8];
    read_exact(r, &mut bytes, path)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

pub fn read_header(path: &Path) -> Result<CheckpointHeader> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    read_header_from(&mut BufReader::new(file), path)
}

fn read_header_from<R: Read>(r: &mut R, path: &Path) -> Result<CheckpointHeader> {
    let mut magic = [0u8; 12];
    read_exact(r, &mut magic, path)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!("{} is not a checkpoint", path.display())));
    }
    let mut word = [0u8; 4];
    read_exact(r, &mut word, path)?;
    let version = u32::from_le_bytes(word);
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    let mut len = [0u8; 8];
    read_exact(r, &mut len, path)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut json = vec![0u8; len];
    read_exact(r, &mut json, path)?;
    serde_json::from_slice(&json).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))
}

/// Rebuilds the model from its spec and fills in every stored tensor.
pub fn load_checkpoint(path: &Path) -> Result<LoadedCheckpoint> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut r = BufReader::new(file);
    let header = read_header_from(&mut r, path)?;
    let mut model = Classifier::build(&header.model, header.init.seed)?;

    let (expected, _) = collect_tensors(&mut model);
    if expected != header.tensors {
        return Err(Error::Checkpoint("tensor list does not match the model spec".into()));
    }
    let mut values = Vec::with_capacity(header.tensors.len());
    for t in &header.tensors {
        values.push(read_f64s(&mut r, t.shape.iter().product(), path)?);
    }
    let mut it = values.into_iter();
    model.visit("", &mut |_, slot| {
        let data = it.next().expect("checked count");
        match slot {
            Slot::Param(p) => p.value.data_mut().copy_from_slice(&data),
            Slot::Buffer(b) => b.data_mut().copy_from_slice(&data),
        }
    });

    let optimizer = match header.optimizer {
        None => None,
        Some(o) => {
            let sizes: Vec<usize> = header
                .tensors
                .iter()
                .filter(|t| t.kind == TensorKind::Param)
                .map(|t| t.shape.iter().product())
                .collect();
            let mut moments = [Vec::new(), Vec::new()];
            for set in &mut moments {
                for &n in &sizes {
                    set.push(read_f64s(&mut r, n, path)?);
                }
            }
            let [m, v] = moments;
            let config = AdamConfig {
                lr: o.lr,
                beta1: o.beta1,
                beta2: o.beta2,
                eps: o.eps,
                weight_decay: o.weight_decay,
            };
            Some(Adam::from_state(config, o.step, m, v)?)
        }
    };
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(io_err(path))? != 0 {
        return Err(Error::Checkpoint("trailing bytes after payload".into()));
    }
    Ok(LoadedCheckpoint {
        model,
        optimizer,
        header,
    })
}
