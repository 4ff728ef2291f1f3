//! Binary model container.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic    b"CATRANK\0"
//! version  u32
//! hlen     u64, then hlen bytes of JSON header
//! tensors  repeated: ndim u32, dims u64 * ndim, values f64 * prod(dims)
//! ```
//!
//! The header names every tensor in file order, records the mode, layer
//! shapes and vocabularies, and carries the configuration the model was
//! trained with. The word and category vectors are stored too, so a model
//! file scores documents on its own.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::encoder::{Activation, ConvParams, Pooling};
use crate::error::{Error, Result};
use crate::ranker::model::{ModelSpec, RankModel};
use crate::ranker::scorer::{Dense, ScorerParams};
use crate::skipgram::EmbeddingMatrix;
use crate::util;

const MAGIC: &[u8; 8] = b"CATRANK\0";
pub const MODEL_VERSION: u32 = 1;

/// Provenance stored alongside the parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub config_hash: String,
    /// Effective configuration, TOML.
    pub config: String,
}

#[derive(Serialize, Deserialize)]
struct ConvShape {
    window: usize,
    input_dim: usize,
    output_dim: usize,
    activation: Activation,
    pooling: Pooling,
}

#[derive(Serialize, Deserialize)]
struct VocabHeader {
    tokens: Vec<String>,
    counts: Vec<u64>,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    dims: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    spec: ModelSpec,
    text_conv: Option<ConvShape>,
    cat_conv: Option<ConvShape>,
    /// `[input, hidden..., 1]`.
    scorer_dims: Vec<usize>,
    words: Option<VocabHeader>,
    categories: Option<VocabHeader>,
    metadata: ModelMetadata,
    tensors: Vec<TensorInfo>,
}

fn conv_shape(c: &ConvParams) -> ConvShape {
    ConvShape {
        window: c.window,
        input_dim: c.input_dim,
        output_dim: c.output_dim,
        activation: c.activation,
        pooling: c.pooling,
    }
}

fn vocab_header(e: &EmbeddingMatrix) -> VocabHeader {
    VocabHeader {
        tokens: e.vocab().tokens().to_vec(),
        counts: e.vocab().counts().to_vec(),
        dim: e.dim(),
    }
}

pub fn save_model(path: &Path, model: &RankModel, metadata: &ModelMetadata) -> Result<()> {
    model.validate()?;
    let mut tensors: Vec<(String, Vec<usize>, &[f64])> = Vec::new();
    for (name, e) in [("words.vectors", &model.words), ("categories.vectors", &model.categories)] {
        if let Some(e) = e {
            tensors.push((name.into(), vec![e.rows(), e.dim()], e.values()));
        }
    }
    for (name, c) in [("text_conv", &model.text_conv), ("cat_conv", &model.cat_conv)] {
        if let Some(c) = c {
            tensors.push((format!("{name}.weights"), vec![c.window * c.input_dim, c.output_dim], &c.weights));
            tensors.push((format!("{name}.bias"), vec![c.output_dim], &c.bias));
        }
    }
    for (i, l) in model.scorer.layers.iter().enumerate() {
        tensors.push((format!("scorer.{i}.weights"), vec![l.output_dim, l.input_dim], &l.weights));
        tensors.push((format!("scorer.{i}.bias"), vec![l.output_dim], &l.bias));
    }
    let mut scorer_dims = vec![model.scorer.input_dim()];
    scorer_dims.extend(model.scorer.layers.iter().map(|l| l.output_dim));
    let header = Header {
        spec: model.spec.clone(),
        text_conv: model.text_conv.as_ref().map(conv_shape),
        cat_conv: model.cat_conv.as_ref().map(conv_shape),
        scorer_dims,
        words: model.words.as_deref().map(vocab_header),
        categories: model.categories.as_deref().map(vocab_header),
        metadata: metadata.clone(),
        tensors: tensors.iter().map(|(n, d, _)| TensorInfo { name: n.clone(), dims: d.clone() }).collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Data(e.to_string()))?;

    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for (_, dims, values) in &tensors {
        buf.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for &d in dims {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in *values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    util::write_file(path, &buf)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Data(format!("{}: truncated model file at byte {}", self.path.display(), self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Data(format!("{}: size field overflows", self.path.display())))
    }

    fn tensor(&mut self, info: &TensorInfo) -> Result<Vec<f64>> {
        let ndim = self.u32()? as usize;
        let dims = (0..ndim).map(|_| self.usize()).collect::<Result<Vec<_>>>()?;
        if dims != info.dims {
            return Err(Error::Data(format!(
                "{}: tensor {} has dims {dims:?}, header says {:?}",
                self.path.display(),
                info.name,
                info.dims
            )));
        }
        let n: usize = dims.iter().product();
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Data("tensor too large".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub fn load_model(path: &Path) -> Result<(RankModel, ModelMetadata)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader { bytes: &bytes, pos: 0, path };
    if r.take(8).ok() != Some(MAGIC.as_slice()) {
        return Err(Error::Data(format!("{}: not a model file", path.display())));
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::Version {
            path: path.to_path_buf(),
            found: version,
            expected: MODEL_VERSION,
        });
    }
    let hlen = r.usize()?;
    let header: Header = serde_json::from_slice(r.take(hlen)?)
        .map_err(|e| Error::Data(format!("{}: bad model header: {e}", path.display())))?;

    let mut tensors = std::collections::HashMap::new();
    for info in &header.tensors {
        tensors.insert(info.name.clone(), r.tensor(info)?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Data(format!("{}: trailing bytes after the last tensor", path.display())));
    }
    let mut take = |name: &str| {
        tensors
            .remove(name)
            .ok_or_else(|| Error::Data(format!("{}: missing tensor {name}", path.display())))
    };

    let mut embeddings = |h: &Option<VocabHeader>, name: &str| -> Result<Option<Arc<EmbeddingMatrix>>> {
        match h {
            Some(h) => {
                let vocab = Vocabulary::from_parts(h.tokens.clone(), h.counts.clone())?;
                Ok(Some(Arc::new(EmbeddingMatrix::new(vocab, h.dim, take(name)?)?)))
            }
            None => Ok(None),
        }
    };
    let words = embeddings(&header.words, "words.vectors")?;
    let categories = embeddings(&header.categories, "categories.vectors")?;

    let mut conv = |s: &Option<ConvShape>, name: &str| -> Result<Option<ConvParams>> {
        match s {
            Some(s) => Ok(Some(ConvParams {
                window: s.window,
                input_dim: s.input_dim,
                output_dim: s.output_dim,
                activation: s.activation,
                pooling: s.pooling,
                weights: take(&format!("{name}.weights"))?,
                bias: take(&format!("{name}.bias"))?,
            })),
            None => Ok(None),
        }
    };
    let text_conv = conv(&header.text_conv, "text_conv")?;
    let cat_conv = conv(&header.cat_conv, "cat_conv")?;

    let mut layers = Vec::new();
    for (i, w) in header.scorer_dims.windows(2).enumerate() {
        layers.push(Dense {
            input_dim: w[0],
            output_dim: w[1],
            weights: take(&format!("scorer.{i}.weights"))?,
            bias: take(&format!("scorer.{i}.bias"))?,
        });
    }
    let model = RankModel {
        spec: header.spec,
        text_conv,
        cat_conv,
        scorer: ScorerParams { layers },
        words,
        categories,
    };
    model.validate()?;
    Ok((model, header.metadata))
}
