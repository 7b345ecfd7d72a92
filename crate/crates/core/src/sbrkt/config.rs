use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the exercise latent vector is turned into the auxiliary code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Learned two-level {α, β} quantizer (the full model).
    AlphaBeta,
    /// tanh followed by sign discretization to {−1, +1}.
    Tanh,
    /// sigmoid followed by a 0.5 threshold to {0, 1}.
    ZeroOne,
    /// No quantization; the latent vector is used as is.
    Dense,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::AlphaBeta, Variant::Tanh, Variant::ZeroOne, Variant::Dense];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::AlphaBeta => "alphabeta",
            Variant::Tanh => "tanh",
            Variant::ZeroOne => "zeroone",
            Variant::Dense => "dense",
        }
    }

    pub fn is_discrete(self) -> bool {
        self != Variant::Dense
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown variant `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbrktConfig {
    /// Number of KCs `N`.
    pub n_kcs: usize,
    /// Number of training questions `Q`; the table holds one extra row for unseen questions.
    pub n_questions: usize,
    /// Auxiliary KC count `M`.
    pub n_aux: usize,
    /// Exercise embedding dimension `d`.
    pub emb_dim: usize,
    /// Maximum active auxiliary KCs per question.
    pub c_max: usize,
    /// Projection dimension `D`.
    pub proj_dim: usize,
    /// LSTM hidden size `H`.
    pub hidden: usize,
    /// Level scale `c` for α and β.
    pub level_scale: f64,
    pub variant: Variant,
}

impl SbrktConfig {
    pub fn new(n_kcs: usize, n_questions: usize) -> Self {
        SbrktConfig {
            n_kcs,
            n_questions,
            n_aux: 32,
            emb_dim: 32,
            c_max: 4,
            proj_dim: 128,
            hidden: 128,
            level_scale: 1.0,
            variant: Variant::AlphaBeta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("n_kcs", self.n_kcs),
            ("n_questions", self.n_questions),
            ("n_aux", self.n_aux),
            ("emb_dim", self.emb_dim),
            ("proj_dim", self.proj_dim),
            ("hidden", self.hidden),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidInput(format!("{name} must be positive")));
        }
        if self.c_max == 0 || self.c_max > self.n_aux {
            return Err(Error::InvalidInput(format!(
                "c_max must satisfy 1 ≤ c_max ≤ n_aux ({}), got {}",
                self.n_aux, self.c_max
            )));
        }
        if !(self.level_scale > 0.0 && self.level_scale.is_finite()) {
            return Err(Error::InvalidInput("level_scale must be positive".into()));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> BTreeMap<String, String> {
        let mut kv = BTreeMap::new();
        kv.insert("n_kcs".into(), self.n_kcs.to_string());
        kv.insert("n_questions".into(), self.n_questions.to_string());
        kv.insert("n_aux".into(), self.n_aux.to_string());
        kv.insert("emb_dim".into(), self.emb_dim.to_string());
        kv.insert("c_max".into(), self.c_max.to_string());
        kv.insert("proj_dim".into(), self.proj_dim.to_string());
        kv.insert("hidden".into(), self.hidden.to_string());
        kv.insert("level_scale".into(), format!("{:?}", self.level_scale));
        kv.insert("variant".into(), self.variant.to_string());
        kv
    }

    pub fn from_kv(kv: &BTreeMap<String, String>) -> Result<Self> {
        fn get<T: FromStr>(kv: &BTreeMap<String, String>, key: &str) -> Result<T> {
            kv.get(key)
                .ok_or_else(|| Error::Checkpoint(format!("missing config key `{key}`")))?
                .parse()
                .map_err(|_| Error::Checkpoint(format!("bad value for `{key}`")))
        }
        let cfg = SbrktConfig {
            n_kcs: get(kv, "n_kcs")?,
            n_questions: get(kv, "n_questions")?,
            n_aux: get(kv, "n_aux")?,
            emb_dim: get(kv, "emb_dim")?,
            c_max: get(kv, "c_max")?,
            proj_dim: get(kv, "proj_dim")?,
            hidden: get(kv, "hidden")?,
            level_scale: get(kv, "level_scale")?,
            variant: get(kv, "variant")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
