//! Binary checkpoint container and the model enum it restores.
//!
//! Layout (little-endian): magic `SBRKTCKP`, a length-prefixed version string,
//! `u32` count of config key/value strings, then `u32` count of parameters, each
//! as name, `u32` rank, `u64` dims and raw `f64` values. Strings are `u32`
//! length plus UTF-8 bytes.

use std::collections::BTreeMap;
use std::path::Path;

use crate::baselines::{Bkt, Dkt, DktConfig};
use crate::data::{EncodedStep, Vocab};
use crate::diff::{ParamSet, Tensor};
use crate::error::{Error, Result};
use crate::eval::SequencePredictor;
use crate::sbrkt::{Sbrkt, SbrktConfig};

pub const MAGIC: &[u8; 8] = b"SBRKTCKP";
pub const FORMAT_VERSION: &str = "sbrkt-ckpt/1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: BTreeMap<String, String>,
    pub params: ParamSet,
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("invalid UTF-8 string".into()))
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_str(&mut out, FORMAT_VERSION);
        out.extend_from_slice(&(self.config.len() as u32).to_le_bytes());
        for (k, v) in &self.config {
            put_str(&mut out, k);
            put_str(&mut out, v);
        }
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for (_, name, t) in self.params.iter() {
            put_str(&mut out, name);
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = r.string()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version `{version}`")));
        }
        let mut config = BTreeMap::new();
        for _ in 0..r.u32()? {
            let k = r.string()?;
            config.insert(k, r.string()?);
        }
        let mut params = ParamSet::new();
        for _ in 0..r.u32()? {
            let name = r.string()?;
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("oversized tensor".into()))?)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            if params.find(&name).is_some() {
                return Err(Error::Checkpoint(format!("duplicate parameter `{name}`")));
            }
            params.push(name, Tensor::new(shape, data)?);
        }
        if r.pos != buf.len() {
            return Err(Error::Checkpoint("trailing bytes after parameters".into()));
        }
        Ok(Checkpoint { config, params })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path.as_ref()).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_bytes(&bytes)
    }
}

/// Any trained model, as stored in a checkpoint together with its vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub enum TrainedModel {
    Sbrkt(Sbrkt),
    Bkt(Bkt),
    Dkt(Dkt),
}

impl TrainedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            TrainedModel::Sbrkt(_) => "sbrkt",
            TrainedModel::Bkt(_) => "bkt",
            TrainedModel::Dkt(_) => "dkt",
        }
    }

    pub fn config_kv(&self) -> BTreeMap<String, String> {
        let mut kv = match self {
            TrainedModel::Sbrkt(m) => m.config.to_kv(),
            TrainedModel::Bkt(m) => BTreeMap::from([("n_kcs".to_string(), m.n_kcs().to_string())]),
            TrainedModel::Dkt(m) => m.config.to_kv(),
        };
        kv.insert("model".into(), self.kind().into());
        kv
    }

    pub fn params(&self) -> &ParamSet {
        match self {
            TrainedModel::Sbrkt(m) => &m.params,
            TrainedModel::Bkt(m) => &m.params,
            TrainedModel::Dkt(m) => &m.params,
        }
    }

    /// Checkpoint with the vocabulary and any extra metadata embedded in the config.
    pub fn to_checkpoint(&self, vocab: &Vocab, extra: &BTreeMap<String, String>) -> Checkpoint {
        let mut config = extra.clone();
        config.extend(self.config_kv());
        config.insert("vocab".into(), vocab.to_json());
        Checkpoint {
            config,
            params: self.params().clone(),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<(Self, Vocab)> {
        let kind = ckpt
            .config
            .get("model")
            .ok_or_else(|| Error::Checkpoint("missing config key `model`".into()))?;
        let vocab = Vocab::from_json(
            ckpt.config
                .get("vocab")
                .ok_or_else(|| Error::Checkpoint("missing config key `vocab`".into()))?,
        )?;
        let params = ckpt.params.clone();
        let model = match kind.as_str() {
            "sbrkt" => TrainedModel::Sbrkt(Sbrkt::from_params(SbrktConfig::from_kv(&ckpt.config)?, params)?),
            "bkt" => TrainedModel::Bkt(Bkt::from_params(params)?),
            "dkt" => TrainedModel::Dkt(Dkt::from_params(DktConfig::from_kv(&ckpt.config)?, params)?),
            other => return Err(Error::Checkpoint(format!("unknown model kind `{other}`"))),
        };
        Ok((model, vocab))
    }

    pub fn as_predictor(&self) -> &(dyn SequencePredictor + Sync) {
        match self {
            TrainedModel::Sbrkt(m) => m,
            TrainedModel::Bkt(m) => m,
            TrainedModel::Dkt(m) => m,
        }
    }
}

impl SequencePredictor for TrainedModel {
    fn predict(&self, steps: &[EncodedStep]) -> Result<Vec<f64>> {
        self.as_predictor().predict(steps)
    }
}
