use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sbrkt_core::baselines::DktConfig;
use sbrkt_core::data::DEFAULT_RATIOS;
use sbrkt_core::train::{Optimizer, TrainConfig};
use sbrkt_core::{ModelKind, SbrktConfig};
use serde::Deserialize;

/// Run description read from JSON. Relative input paths (`dataset`, `aux`) resolve
/// against the config file's directory; `out` resolves against the working directory.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default)]
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Auxiliary assignment CSV; only valid for bkt and dkt.
    pub aux: Option<PathBuf>,
    /// Auxiliary KC count `M` for `aux`; defaults to the largest index plus one.
    pub num_aux: Option<usize>,
    #[serde(default)]
    pub sbrkt: SbrktOverrides,
    #[serde(default)]
    pub dkt: DktOverrides,
    #[serde(default)]
    pub train: TrainOverrides,
}

fn default_model() -> String {
    "sbrkt".into()
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbrktOverrides {
    pub n_aux: Option<usize>,
    pub emb_dim: Option<usize>,
    pub c_max: Option<usize>,
    pub proj_dim: Option<usize>,
    pub hidden: Option<usize>,
    pub level_scale: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DktOverrides {
    pub emb_dim: Option<usize>,
    pub hidden: Option<usize>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerName {
    Adam,
    Sgd,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    pub optimizer: Option<OptimizerName>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
    pub max_len: Option<usize>,
    /// Global gradient-norm bound; `0` disables clipping.
    pub clip_norm: Option<f64>,
    pub ratios: Option<[f64; 3]>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.dataset = base.join(&cfg.dataset);
        cfg.aux = cfg.aux.map(|p| base.join(p));
        Ok(cfg)
    }

    pub fn model_kind(&self) -> Result<ModelKind> {
        Ok(self.model.parse()?)
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.model_kind()?;
        if self.aux.is_some() && !matches!(kind, ModelKind::Bkt | ModelKind::Dkt) {
            bail!("`aux` is only valid with the bkt and dkt models, not `{kind}`");
        }
        if self.num_aux.is_some() && self.aux.is_none() {
            bail!("`num_aux` needs `aux`");
        }
        if let Some(r) = self.train.ratios {
            if r.iter().any(|x| x.is_nan() || *x < 0.0) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                bail!("`train.ratios` must be non-negative and sum to 1");
            }
        }
        Ok(())
    }

    pub fn ratios(&self) -> (f64, f64, f64) {
        self.train.ratios.map_or(DEFAULT_RATIOS, |r| (r[0], r[1], r[2]))
    }

    /// SBRKT template; KC and question counts are filled in from the data.
    pub fn sbrkt_template(&self) -> SbrktConfig {
        let mut c = SbrktConfig::new(1, 1);
        let o = &self.sbrkt;
        c.n_aux = o.n_aux.unwrap_or(c.n_aux);
        c.emb_dim = o.emb_dim.unwrap_or(c.emb_dim);
        c.c_max = o.c_max.unwrap_or(c.c_max);
        c.proj_dim = o.proj_dim.unwrap_or(c.proj_dim);
        c.hidden = o.hidden.unwrap_or(c.hidden);
        c.level_scale = o.level_scale.unwrap_or(c.level_scale);
        c
    }

    pub fn dkt_template(&self) -> DktConfig {
        let mut c = DktConfig::new(1);
        c.emb_dim = self.dkt.emb_dim.unwrap_or(c.emb_dim);
        c.hidden = self.dkt.hidden.unwrap_or(c.hidden);
        c
    }

    /// Training settings for `kind`: Adam for the neural models, SGD for BKT,
    /// then the config's overrides.
    pub fn train_config(&self, kind: ModelKind) -> TrainConfig {
        let mut t = match kind {
            ModelKind::Bkt => TrainConfig::sgd(self.seed),
            _ => TrainConfig::adam(self.seed),
        };
        let o = &self.train;
        if let Some(opt) = o.optimizer {
            t.optimizer = match opt {
                OptimizerName::Adam => Optimizer::Adam,
                OptimizerName::Sgd => Optimizer::Sgd,
            };
        }
        t.lr = o.lr.unwrap_or(t.lr);
        t.batch_size = o.batch_size.unwrap_or(t.batch_size);
        t.max_epochs = o.max_epochs.unwrap_or(t.max_epochs);
        t.patience = o.patience.unwrap_or(t.patience);
        t.max_len = o.max_len.unwrap_or(t.max_len);
        if let Some(c) = o.clip_norm {
            t.clip_norm = (c > 0.0).then_some(c);
        }
        t
    }
}
