//! Binary model file.
//!
//! Layout: magic, version byte, record count (u32), records, then the
//! SHA-256 of everything before it. A record is a name (u16 length + UTF-8),
//! a kind byte, and a payload: text is a u64 length plus UTF-8; a tensor is
//! a rank byte, u64 dimensions and little-endian f32 values. All integers
//! are little-endian.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::ArrayD;
use sha2::{Digest, Sha256};

use super::{DetectorError, ModelConfig, ModelParams, TrainedModel, Vocab};
use crate::generator::ClassRegistry;

pub const ARTIFACT_MAGIC: &[u8; 8] = b"FATYPOMD";
pub const ARTIFACT_VERSION: u8 = 1;

const TEXT: u8 = 0;
const TENSOR: u8 = 1;
const CHECKSUM_LEN: usize = 32;

fn bad(msg: impl Into<String>) -> DetectorError {
    DetectorError::Artifact(msg.into())
}

enum Record {
    Text(String),
    Tensor(ArrayD<f64>),
}

fn lines_text<I: IntoIterator<Item = String>>(items: I) -> String {
    items.into_iter().map(|s| s + "\n").collect()
}

fn split_lines(text: &str) -> Vec<String> {
    match text.strip_suffix('\n') {
        None if text.is_empty() => Vec::new(),
        None => vec![text.to_string()],
        Some(body) => body.split('\n').map(str::to_string).collect(),
    }
}

fn put_name(out: &mut Vec<u8>, name: &str) {
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
}

fn put_text(out: &mut Vec<u8>, name: &str, text: &str) {
    put_name(out, name);
    out.push(TEXT);
    out.extend_from_slice(&(text.len() as u64).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
}

fn put_tensor(out: &mut Vec<u8>, name: &str, t: &ndarray::ArrayViewD<'_, f64>) {
    put_name(out, name);
    out.push(TENSOR);
    out.push(t.ndim() as u8);
    for &d in t.shape() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in t.iter() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DetectorError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| bad("truncated file"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, DetectorError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, DetectorError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, DetectorError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<usize, DetectorError> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| bad("length does not fit in memory"))
    }

    fn utf8(&mut self, n: usize) -> Result<String, DetectorError> {
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| bad("record is not UTF-8"))
    }
}

impl TrainedModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(ARTIFACT_MAGIC);
        out.push(ARTIFACT_VERSION);
        let tensors = self.params.tensors();
        out.extend_from_slice(&((5 + tensors.len()) as u32).to_le_bytes());
        put_text(&mut out, "config", &self.config.to_text());
        put_text(&mut out, "vocab.words", &lines_text(self.vocab.words().iter().cloned()));
        put_text(
            &mut out,
            "vocab.chars",
            &lines_text(self.vocab.chars().iter().map(|c| c.to_string())),
        );
        put_text(&mut out, "labels", &self.registry.to_label_map());
        put_text(&mut out, "labels.sha256", &self.registry.digest());
        for (name, t) in &tensors {
            put_tensor(&mut out, name, t);
        }
        let checksum = Sha256::digest(&out);
        out.extend_from_slice(&checksum);
        out
    }

    /// Parse and validate a model file. The training history is not stored.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DetectorError> {
        if bytes.len() < ARTIFACT_MAGIC.len() + 1 + CHECKSUM_LEN || !bytes.starts_with(ARTIFACT_MAGIC) {
            return Err(bad("not a model file"));
        }
        let (body, checksum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
        if Sha256::digest(body).as_slice() != checksum {
            return Err(bad("checksum mismatch"));
        }
        let mut r = Reader {
            bytes: body,
            pos: ARTIFACT_MAGIC.len(),
        };
        let version = r.u8()?;
        if version != ARTIFACT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let count = r.u32()?;
        let mut records = BTreeMap::new();
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = r.utf8(name_len)?;
            let record = match r.u8()? {
                TEXT => {
                    let n = r.u64()?;
                    Record::Text(r.utf8(n)?)
                }
                TENSOR => {
                    let rank = r.u8()? as usize;
                    let shape = (0..rank).map(|_| r.u64()).collect::<Result<Vec<_>, _>>()?;
                    let len = shape
                        .iter()
                        .try_fold(1usize, |a, &d| a.checked_mul(d))
                        .ok_or_else(|| bad("tensor too large"))?;
                    let raw = r.take(len.checked_mul(4).ok_or_else(|| bad("tensor too large"))?)?;
                    let values = raw
                        .chunks_exact(4)
                        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                        .collect();
                    Record::Tensor(
                        ArrayD::from_shape_vec(shape, values).map_err(|e| bad(e.to_string()))?,
                    )
                }
                kind => return Err(bad(format!("unknown record kind {kind}"))),
            };
            if records.insert(name.clone(), record).is_some() {
                return Err(bad(format!("duplicate record {name}")));
            }
        }
        if r.pos != body.len() {
            return Err(bad("trailing bytes"));
        }

        let mut text = |name: &str| match records.remove(name) {
            Some(Record::Text(t)) => Ok(t),
            _ => Err(bad(format!("missing text record {name}"))),
        };
        let config = ModelConfig::parse(&text("config")?)?;
        let words = split_lines(&text("vocab.words")?);
        let chars = split_lines(&text("vocab.chars")?)
            .into_iter()
            .map(|s| {
                let mut it = s.chars();
                match (it.next(), it.next()) {
                    (Some(c), None) => Ok(c),
                    _ => Err(bad("character vocabulary entry is not one character")),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let vocab = Vocab::from_parts(words, chars);
        let registry = ClassRegistry::parse_label_map(&text("labels")?)
            .map_err(|e| bad(format!("label map: {e}")))?;
        if registry.digest() != text("labels.sha256")? {
            return Err(bad("label map digest mismatch"));
        }
        if registry.len() != config.num_classes {
            return Err(bad("class count differs from the label map"));
        }

        let mut params = ModelParams::zeros(&config, &vocab);
        for (name, mut target) in params.tensors_mut() {
            match records.remove(&name) {
                Some(Record::Tensor(t)) if t.shape() == target.shape() => target.assign(&t),
                Some(Record::Tensor(t)) => {
                    return Err(bad(format!(
                        "{name} has shape {:?}, expected {:?}",
                        t.shape(),
                        target.shape()
                    )))
                }
                _ => return Err(bad(format!("missing tensor {name}"))),
            }
        }
        if let Some(name) = records.keys().next() {
            return Err(bad(format!("unexpected record {name}")));
        }
        if !params.is_finite() {
            return Err(bad("non-finite parameter"));
        }
        Ok(Self {
            config,
            vocab,
            registry,
            params,
            history: Vec::new(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), DetectorError> {
        std::fs::write(path, self.to_bytes()).map_err(|source| DetectorError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, DetectorError> {
        let bytes = std::fs::read(path).map_err(|source| DetectorError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}
