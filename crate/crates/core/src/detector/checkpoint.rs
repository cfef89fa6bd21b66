use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DetectorError, DetectorParams, Hyper};
use crate::autodiff::Tensor;
use crate::graph::FeatureStats;

pub const CHECKPOINT_MAGIC: &str = "FRAUDLENS-CKPT 1";
const FORMAT_VERSION: u32 = 1;

/// Trained detector: everything needed to score a graph.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelCheckpoint {
    pub hyper: Hyper,
    pub params: DetectorParams,
    pub stats: FeatureStats,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct Blob {
    shape: [usize; 2],
    data: String,
}

#[derive(Serialize, Deserialize)]
struct Content {
    format_version: u32,
    hyper: Hyper,
    stats: FeatureStats,
    seed: u64,
    params: BTreeMap<String, Blob>,
}

#[derive(Serialize, Deserialize)]
struct File {
    #[serde(flatten)]
    content: Content,
    hash: String,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn encode(t: &Tensor) -> Blob {
    let bytes: Vec<u8> = t.data().iter().flat_map(|v| v.to_le_bytes()).collect();
    Blob { shape: [t.rows(), t.cols()], data: B64.encode(bytes) }
}

fn decode(name: &str, blob: &Blob) -> Result<Tensor, DetectorError> {
    let bad = |m: &str| DetectorError::Checkpoint(format!("parameter `{name}`: {m}"));
    let bytes = B64.decode(&blob.data).map_err(|_| bad("invalid base64"))?;
    if bytes.len() != blob.shape[0] * blob.shape[1] * 8 {
        return Err(bad("byte length does not match shape"));
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(Tensor::new(blob.shape[0], blob.shape[1], data))
}

impl ModelCheckpoint {
    fn content(&self) -> Content {
        Content {
            format_version: FORMAT_VERSION,
            hyper: self.hyper.clone(),
            stats: self.stats,
            seed: self.seed,
            params: self.params.names.iter().cloned().zip(self.params.tensors.iter().map(encode)).collect(),
        }
    }

    /// SHA-256 over the canonical JSON of everything except the hash itself.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_vec(&self.content()).expect("checkpoint serializes");
        hex(&Sha256::digest(json))
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), DetectorError> {
        let hash = self.content_hash();
        writeln!(w, "{CHECKPOINT_MAGIC}")?;
        serde_json::to_writer(&mut w, &File { content: self.content(), hash }).map_err(|e| DetectorError::Checkpoint(e.to_string()))?;
        writeln!(w)?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self, DetectorError> {
        let mut r = BufReader::new(r);
        let mut magic = String::new();
        r.read_line(&mut magic)?;
        if magic.trim_end() != CHECKPOINT_MAGIC {
            return Err(DetectorError::Checkpoint(format!("missing `{CHECKPOINT_MAGIC}` header")));
        }
        let file: File = serde_json::from_reader(r).map_err(|e| DetectorError::Checkpoint(e.to_string()))?;
        let c = file.content;
        if c.format_version != FORMAT_VERSION {
            return Err(DetectorError::Checkpoint(format!("unsupported format version {}", c.format_version)));
        }
        c.hyper.validate()?;
        let mut params = DetectorParams { names: Vec::new(), tensors: Vec::new() };
        for (name, rows, cols) in DetectorParams::expected_shapes(&c.hyper) {
            let blob = c
                .params
                .get(&name)
                .ok_or_else(|| DetectorError::Checkpoint(format!("parameter `{name}` missing")))?;
            let t = decode(&name, blob)?;
            if t.shape() != (rows, cols) {
                return Err(DetectorError::Checkpoint(format!("parameter `{name}` has shape {:?}, expected {:?}", t.shape(), (rows, cols))));
            }
            params.names.push(name);
            params.tensors.push(t);
        }
        if params.len() != c.params.len() {
            return Err(DetectorError::Checkpoint("unexpected extra parameters".into()));
        }
        let ckpt = ModelCheckpoint { hyper: c.hyper, params, stats: c.stats, seed: c.seed };
        if ckpt.content_hash() != file.hash {
            return Err(DetectorError::Checkpoint("content hash mismatch".into()));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DetectorError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DetectorError> {
        Self::read(std::fs::File::open(path)?)
    }
}
