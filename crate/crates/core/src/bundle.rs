//! Trained-model container.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic "FLOWCAST" | version u32 | header length u64 | JSON header
//! tensor count u32 | per tensor: name length u16, name, rows u32, cols u32, rows*cols f64
//! CRC32 of everything above, u32
//! ```

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clustering::ClusterModel;
use crate::encoding::{Encoder, FeatureMode};
use crate::error::{Error, Result};
use crate::eventlog::AttributeSchema;
use crate::harness::ExperimentConfig;
use crate::neuralnet::{Dims, GruNetwork, Tensor};

const MAGIC: &[u8; 8] = b"FLOWCAST";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    /// SHA-256 of the experiment configuration used for training.
    pub config_hash: String,
    pub created_at: String,
    pub best_iteration: usize,
    pub validation_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    schema: AttributeSchema,
    mode: FeatureMode,
    clusters: Option<ClusterModel>,
    input: usize,
    hidden: usize,
    output: usize,
    metadata: TrainingMetadata,
}

/// Everything needed to encode new events and predict with a trained
/// network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub schema: AttributeSchema,
    pub mode: FeatureMode,
    pub clusters: Option<ClusterModel>,
    pub network: GruNetwork,
    pub metadata: TrainingMetadata,
}

impl ModelBundle {
    /// Rebuilds the encoder and checks its width and class count against the
    /// network.
    pub fn encoder(&self) -> Result<Encoder> {
        let encoder = Encoder::new(self.schema.clone(), self.mode, self.clusters.clone())?;
        let dims = self.network.dims();
        if encoder.width() != dims.input || encoder.classes() != dims.output {
            return Err(Error::Model(format!(
                "encoder is {}x{} but network expects {}x{}",
                encoder.width(),
                encoder.classes(),
                dims.input,
                dims.output
            )));
        }
        Ok(encoder)
    }

    pub fn matches_config(&self, config: &ExperimentConfig) -> bool {
        self.metadata.config_hash == config.hash()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let dims = self.network.dims();
        let header = serde_json::to_vec(&Header {
            schema: self.schema.clone(),
            mode: self.mode,
            clusters: self.clusters.clone(),
            input: dims.input,
            hidden: dims.hidden,
            output: dims.output,
            metadata: self.metadata.clone(),
        })?;
        let mut out = Vec::with_capacity(header.len() + 8 * self.network.params().len() + 256);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(Tensor::ALL.len() as u32).to_le_bytes());
        for t in Tensor::ALL {
            let view = self.network.view(t);
            let name = t.name().as_bytes();
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name);
            out.extend_from_slice(&(view.nrows() as u32).to_le_bytes());
            out.extend_from_slice(&(view.ncols() as u32).to_le_bytes());
            for &x in &self.network.params()[self.network.layout().range(t)] {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<ModelBundle> {
        if bytes.len() < MAGIC.len() + 4 + 8 + 4 + 4 || &bytes[..MAGIC.len()] != MAGIC {
            return Err(Error::Model("not a model file".into()));
        }
        let (body, footer) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(footer.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(Error::Model("checksum mismatch; file is corrupted".into()));
        }
        let mut r = Cursor { data: body, pos: MAGIC.len() };
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Model(format!("unsupported format version {version}")));
        }
        let header_len = r.u64()? as usize;
        let header: Header = serde_json::from_slice(r.take(header_len)?)?;
        let dims = Dims {
            input: header.input,
            hidden: header.hidden,
            output: header.output,
        };
        let mut network = GruNetwork::zeros(dims);
        let count = r.u32()? as usize;
        if count != Tensor::ALL.len() {
            return Err(Error::Model(format!("expected {} tensors, found {count}", Tensor::ALL.len())));
        }
        let mut seen = Vec::new();
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Model("tensor name is not UTF-8".into()))?;
            let t = Tensor::from_name(name)
                .ok_or_else(|| Error::Model(format!("unknown tensor `{name}`")))?;
            if seen.contains(&t) {
                return Err(Error::Model(format!("tensor `{name}` repeated")));
            }
            seen.push(t);
            let shape = (r.u32()? as usize, r.u32()? as usize);
            if shape != t.shape(dims) {
                return Err(Error::Model(format!(
                    "tensor `{name}` is {}x{}, expected {}x{}",
                    shape.0,
                    shape.1,
                    t.shape(dims).0,
                    t.shape(dims).1
                )));
            }
            let range = network.layout().range(t);
            let raw = r.take(range.len() * 8)?;
            for (p, chunk) in network.params_mut()[range].iter_mut().zip(raw.chunks_exact(8)) {
                *p = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
            }
        }
        if r.pos != body.len() {
            return Err(Error::Model("trailing bytes after tensors".into()));
        }
        let bundle = ModelBundle {
            schema: header.schema,
            mode: header.mode,
            clusters: header.clusters,
            network,
            metadata: header.metadata,
        };
        bundle.encoder()?;
        Ok(bundle)
    }

    pub fn write<W: Write>(&self, mut sink: W) -> Result<()> {
        sink.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn read<R: Read>(mut source: R) -> Result<ModelBundle> {
        let mut bytes = Vec::new();
        source.read_to_end(&mut bytes)?;
        ModelBundle::from_bytes(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ModelBundle> {
        ModelBundle::from_bytes(&std::fs::read(path)?)
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| Error::Model("file is truncated".into()))?;
        let slice = &self.data[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
