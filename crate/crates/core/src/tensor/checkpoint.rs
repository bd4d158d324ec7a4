//! Checkpointing: a JSON manifest with model type, hyperparameters, and
//! base64-inlined little-endian f64 tensor data. Round trips are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::ParamTensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub model_type: String,
    pub hyperparams: serde_json::Value,
    pub tensors: Vec<TensorRecord>,
}

fn encode_f64(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    BASE64.encode(bytes)
}

fn decode_f64(data: &str, expected: usize, name: &str) -> Result<Vec<f64>> {
    let bytes = BASE64
        .decode(data)
        .map_err(|e| Error::Data(format!("tensor `{name}`: bad base64: {e}")))?;
    if bytes.len() != expected * 8 {
        return Err(Error::Data(format!(
            "tensor `{name}`: expected {} bytes, got {}",
            expected * 8,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

impl Checkpoint {
    pub fn from_tensors(
        model_type: impl Into<String>,
        hyperparams: serde_json::Value,
        tensors: &[&ParamTensor],
    ) -> Self {
        Checkpoint {
            model_type: model_type.into(),
            hyperparams,
            tensors: tensors
                .iter()
                .map(|t| TensorRecord {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: encode_f64(&t.values),
                })
                .collect(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path)?;
        serde_json::to_writer(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        let ckpt = serde_json::from_reader(BufReader::new(file))?;
        Ok(ckpt)
    }

    /// Copy stored values into `params`, requiring an exact name and shape
    /// match in order.
    pub fn restore_into(&self, params: &mut [&mut ParamTensor]) -> Result<()> {
        if self.tensors.len() != params.len() {
            return Err(Error::Data(format!(
                "checkpoint holds {} tensors, model has {}",
                self.tensors.len(),
                params.len()
            )));
        }
        for (record, param) in self.tensors.iter().zip(params.iter_mut()) {
            if record.name != param.name {
                return Err(Error::Data(format!(
                    "checkpoint tensor `{}` does not match model tensor `{}`",
                    record.name, param.name
                )));
            }
            if record.shape != param.shape {
                return Err(Error::Data(format!(
                    "tensor `{}`: checkpoint shape {:?} vs model shape {:?}",
                    record.name, record.shape, param.shape
                )));
            }
            param.values = decode_f64(&record.data, param.len(), &record.name)?;
            param.zero_grad();
        }
        Ok(())
    }
}
