use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use super::{evaluate_sequences, EvalReport};
use crate::auxpipe::{augment_log, extract_codes, AuxAssignment};
use crate::baselines::{Bkt, Dkt, DktConfig};
use crate::checkpoint::TrainedModel;
use crate::data::{
    build_vocab, encode_log, parse_interactions, split_students, EncodedSequence, InteractionLog, Split, Vocab,
    DEFAULT_RATIOS,
};
use crate::error::{Error, Result};
use crate::sbrkt::{Sbrkt, SbrktConfig, Variant};
use crate::train::{fit, TrainConfig, TrainLog};

/// Model family selectable from configs and the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Sbrkt(Variant),
    Bkt,
    Dkt,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Sbrkt(Variant::AlphaBeta) => "sbrkt",
            ModelKind::Sbrkt(Variant::Tanh) => "sbrkt-tanh",
            ModelKind::Sbrkt(Variant::ZeroOne) => "sbrkt-01",
            ModelKind::Sbrkt(Variant::Dense) => "sbrkt-dense",
            ModelKind::Bkt => "bkt",
            ModelKind::Dkt => "dkt",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sbrkt" => ModelKind::Sbrkt(Variant::AlphaBeta),
            "sbrkt-tanh" => ModelKind::Sbrkt(Variant::Tanh),
            "sbrkt-01" => ModelKind::Sbrkt(Variant::ZeroOne),
            "sbrkt-dense" => ModelKind::Sbrkt(Variant::Dense),
            "bkt" => ModelKind::Bkt,
            "dkt" => ModelKind::Dkt,
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown model `{other}` (expected sbrkt, sbrkt-tanh, sbrkt-01, sbrkt-dense, bkt or dkt)"
                )))
            }
        })
    }
}

/// One step of an experiment pipeline. `aux` stages use codes from the most
/// recent discrete SBRKT stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stage {
    pub model: ModelKind,
    pub aux: bool,
}

impl Stage {
    pub fn plain(model: ModelKind) -> Self {
        Stage { model, aux: false }
    }

    pub fn with_aux(model: ModelKind) -> Self {
        Stage { model, aux: true }
    }

    pub fn label(&self) -> String {
        if self.aux {
            format!("{}+aux", self.model)
        } else {
            self.model.to_string()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub dataset_name: String,
    pub stages: Vec<Stage>,
    pub seed: u64,
    pub ratios: (f64, f64, f64),
    /// Template; `n_kcs`, `n_questions` and `variant` are filled per stage.
    pub sbrkt: SbrktConfig,
    /// Template; `n_kcs` is filled per stage.
    pub dkt: DktConfig,
    /// Used by SBRKT and DKT.
    pub neural_train: TrainConfig,
    pub bkt_train: TrainConfig,
}

impl ExperimentConfig {
    pub fn new(dataset: impl Into<PathBuf>, stages: Vec<Stage>, seed: u64) -> Self {
        let dataset = dataset.into();
        let dataset_name = dataset
            .file_stem()
            .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
        ExperimentConfig {
            dataset,
            dataset_name,
            stages,
            seed,
            ratios: DEFAULT_RATIOS,
            sbrkt: SbrktConfig::new(1, 1),
            dkt: DktConfig::new(1),
            neural_train: TrainConfig::adam(seed),
            bkt_train: TrainConfig::sgd(seed),
        }
    }
}

/// Encoded train/val/test sequences over one vocabulary.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub vocab: Vocab,
    pub train: Vec<EncodedSequence>,
    pub val: Vec<EncodedSequence>,
    pub test: Vec<EncodedSequence>,
}

/// Build the vocabulary on the training students and encode all three parts.
pub fn prepare(split: &Split) -> Result<Prepared> {
    let vocab = build_vocab(&split.train)?;
    Ok(Prepared {
        train: encode_log(&split.train, &vocab).0,
        val: encode_log(&split.val, &vocab).0,
        test: encode_log(&split.test, &vocab).0,
        vocab,
    })
}

pub fn augment_split(split: &Split, aux: &AuxAssignment, n_aux: usize) -> Result<Split> {
    Ok(Split {
        train: augment_log(&split.train, aux, n_aux)?,
        val: augment_log(&split.val, aux, n_aux)?,
        test: augment_log(&split.test, aux, n_aux)?,
    })
}

/// Train one model of `kind` on prepared data.
pub fn train_model(
    kind: ModelKind,
    data: &Prepared,
    sbrkt: &SbrktConfig,
    dkt: &DktConfig,
    neural_train: &TrainConfig,
    bkt_train: &TrainConfig,
) -> Result<(TrainedModel, TrainLog)> {
    let n_kcs = data.vocab.num_kcs();
    match kind {
        ModelKind::Sbrkt(variant) => {
            let cfg = SbrktConfig {
                n_kcs,
                n_questions: data.vocab.num_questions(),
                variant,
                ..sbrkt.clone()
            };
            let mut m = Sbrkt::new(cfg, neural_train.seed)?;
            let log = fit(&mut m, &data.train, &data.val, neural_train)?;
            Ok((TrainedModel::Sbrkt(m), log))
        }
        ModelKind::Bkt => {
            let mut m = Bkt::new(n_kcs)?;
            let log = fit(&mut m, &data.train, &data.val, bkt_train)?;
            Ok((TrainedModel::Bkt(m), log))
        }
        ModelKind::Dkt => {
            let mut m = Dkt::new(DktConfig { n_kcs, ..dkt.clone() }, neural_train.seed)?;
            let log = fit(&mut m, &data.train, &data.val, neural_train)?;
            Ok((TrainedModel::Dkt(m), log))
        }
    }
}

/// Report config: the model's own settings plus the training settings.
pub fn report_config(model: &TrainedModel, train: &TrainConfig) -> BTreeMap<String, String> {
    let mut kv = model.config_kv();
    kv.insert("lr".into(), format!("{:?}", train.lr));
    kv.insert("batch_size".into(), train.batch_size.to_string());
    kv.insert("max_epochs".into(), train.max_epochs.to_string());
    kv.insert("patience".into(), train.patience.to_string());
    kv.insert("max_len".into(), train.max_len.to_string());
    kv.insert("optimizer".into(), format!("{:?}", train.optimizer).to_lowercase());
    kv
}

#[derive(Clone, Debug)]
pub struct StageResult {
    pub stage: Stage,
    pub model: TrainedModel,
    pub vocab: Vocab,
    pub log: TrainLog,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    /// Test-split reports, one per stage, in stage order.
    pub reports: Vec<EvalReport>,
    pub stages: Vec<StageResult>,
    /// Codes from the last discrete SBRKT stage, if any.
    pub aux: Option<AuxAssignment>,
    pub split: Split,
}

/// Load the dataset, split once, and run every stage against that split.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let file = std::fs::File::open(&cfg.dataset).map_err(|e| Error::io(&cfg.dataset, e))?;
    let log = parse_interactions(std::io::BufReader::new(file))?;
    run_experiment_on(&log, cfg)
}

/// [`run_experiment`] on an already loaded log.
pub fn run_experiment_on(log: &InteractionLog, cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let split = split_students(log, cfg.ratios, cfg.seed)?;
    let base = prepare(&split)?;
    let neural = TrainConfig {
        seed: cfg.seed,
        ..cfg.neural_train.clone()
    };
    let bkt = TrainConfig {
        seed: cfg.seed,
        ..cfg.bkt_train.clone()
    };
    let mut aux: Option<(AuxAssignment, usize)> = None;
    let mut augmented: Option<Prepared> = None;
    let mut reports = Vec::new();
    let mut stages = Vec::new();

    for stage in &cfg.stages {
        if stage.aux && matches!(stage.model, ModelKind::Sbrkt(_)) {
            return Err(Error::InvalidInput("auxiliary KCs apply to bkt and dkt only".into()));
        }
        let data = if stage.aux {
            let (assignment, n_aux) = aux
                .as_ref()
                .ok_or_else(|| Error::InvalidInput(format!("stage `{}` needs an earlier discrete SBRKT stage", stage.label())))?;
            if augmented.is_none() {
                augmented = Some(prepare(&augment_split(&split, assignment, *n_aux)?)?);
            }
            augmented.as_ref().expect("set above")
        } else {
            &base
        };
        log::info!("training {}", stage.label());
        let (model, train_log) = train_model(stage.model, data, &cfg.sbrkt, &cfg.dkt, &neural, &bkt)?;
        let train_cfg = if stage.model == ModelKind::Bkt { &bkt } else { &neural };
        let outcome = evaluate_sequences(&model, &data.test, train_cfg.max_len)?;
        let mut config = report_config(&model, train_cfg);
        config.insert("aux".into(), stage.aux.to_string());
        reports.push(EvalReport::new(
            stage.label(),
            cfg.dataset_name.clone(),
            "test",
            outcome.auc,
            outcome.n,
            cfg.seed,
            config,
        ));
        let fresh_codes = match &model {
            TrainedModel::Sbrkt(m) if m.config.variant.is_discrete() => {
                Some((extract_codes(m, &data.vocab)?, m.config.n_aux))
            }
            _ => None,
        };
        stages.push(StageResult {
            stage: *stage,
            model,
            vocab: data.vocab.clone(),
            log: train_log,
        });
        if fresh_codes.is_some() {
            aux = fresh_codes;
            augmented = None;
        }
    }
    Ok(ExperimentOutcome {
        reports,
        stages,
        aux: aux.map(|a| a.0),
        split,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_names_round_trip() {
        for name in ["sbrkt", "sbrkt-tanh", "sbrkt-01", "sbrkt-dense", "bkt", "dkt"] {
            assert_eq!(name.parse::<ModelKind>().unwrap().name(), name);
        }
        assert!("irt".parse::<ModelKind>().is_err());
    }

    #[test]
    fn missing_dataset_names_path() {
        let cfg = ExperimentConfig::new("/nonexistent/x.csv", vec![Stage::plain(ModelKind::Bkt)], 0);
        let err = run_experiment(&cfg).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.csv"));
    }

    #[test]
    fn aux_stage_needs_codes() {
        let rows = crate::synth::toy_rows(0);
        let log = crate::data::log_from_rows(rows);
        let cfg = ExperimentConfig::new("toy.csv", vec![Stage::with_aux(ModelKind::Bkt)], 0);
        assert!(run_experiment_on(&log, &cfg).is_err());
    }
}
