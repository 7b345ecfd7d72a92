use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use sbrkt_core::auxpipe::{augment_log, augment_rows, extract_codes, read_aux_csv, write_aux_csv, AuxAssignment};
use sbrkt_core::data::{
    build_vocab, encode_log, parse_interactions, read_rows, split_students, write_rows, InteractionLog, Vocab,
    DEFAULT_RATIOS,
};
use sbrkt_core::eval::{emit_report, evaluate_sequences, prepare, report_config, train_model, Stage};
use sbrkt_core::{Checkpoint, Error, EvalReport, TrainedModel};

use crate::config::RunConfig;

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const VOCAB_FILE: &str = "vocab.json";
pub const LOSS_LOG_FILE: &str = "loss_log.csv";

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::io(path, e).into())
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e).into())
}

fn load_log(path: &Path) -> Result<InteractionLog> {
    let log = parse_interactions(open(path)?).with_context(|| format!("parsing {}", path.display()))?;
    if log.dropped_rows > 0 {
        log::warn!("{}: dropped {} rows without KCs", path.display(), log.dropped_rows);
    }
    Ok(log)
}

fn load_aux(path: &Path) -> Result<AuxAssignment> {
    read_aux_csv(open(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned())
}

fn write_reports(dir: &Path, reports: &[EvalReport]) -> Result<()> {
    let (jsonl, table) = emit_report(reports);
    write(&dir.join("report.jsonl"), jsonl)?;
    write(&dir.join("report.txt"), &table)?;
    print!("{table}");
    Ok(())
}

pub struct TrainArgs {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub model: Option<String>,
    pub aux: Option<PathBuf>,
}

/// Train on the train split, keep the best validation epoch, and write the
/// checkpoint, vocabulary, loss log and a validation report.
pub fn train(args: TrainArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&args.config)?;
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.model = args.model.unwrap_or(cfg.model);
    cfg.aux = args.aux.or(cfg.aux);
    cfg.validate()
        .with_context(|| format!("invalid run config {} (see `sbrkt train --help`)", args.config.display()))?;
    let kind = cfg.model_kind()?;
    let out = args
        .out
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| anyhow!("no output directory: pass --out or set `out` in the config"))?;

    let mut log = load_log(&cfg.dataset)?;
    if let Some(aux_path) = &cfg.aux {
        let aux = load_aux(aux_path)?;
        let n_aux = cfg.num_aux.unwrap_or_else(|| aux.max_index().map_or(0, |j| j + 1));
        log = augment_log(&log, &aux, n_aux)?;
    }
    let split = split_students(&log, cfg.ratios(), cfg.seed)?;
    let data = prepare(&split)?;
    let train_cfg = cfg.train_config(kind);
    let stage = Stage {
        model: kind,
        aux: cfg.aux.is_some(),
    };
    log::info!(
        "training {} on {} students ({} questions, {} KCs)",
        stage.label(),
        data.train.len(),
        data.vocab.num_questions(),
        data.vocab.num_kcs()
    );
    let (model, train_log) = train_model(kind, &data, &cfg.sbrkt_template(), &cfg.dkt_template(), &train_cfg, &train_cfg)?;
    let outcome = evaluate_sequences(&model, &data.val, train_cfg.max_len).context("evaluating on the validation split")?;

    let mut config = report_config(&model, &train_cfg);
    config.insert("aux".into(), stage.aux.to_string());
    let report = EvalReport::new(stage.label(), dataset_name(&cfg.dataset), "val", outcome.auc, outcome.n, cfg.seed, config);

    let (r_train, r_val, r_test) = cfg.ratios();
    let extra = BTreeMap::from([
        ("label".to_string(), stage.label()),
        ("seed".to_string(), cfg.seed.to_string()),
        ("ratios".to_string(), format!("{r_train:?},{r_val:?},{r_test:?}")),
        ("max_len".to_string(), train_cfg.max_len.to_string()),
    ]);
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    model.to_checkpoint(&data.vocab, &extra).save(out.join(CHECKPOINT_FILE))?;
    write(&out.join(VOCAB_FILE), data.vocab.to_json())?;
    write(&out.join(LOSS_LOG_FILE), train_log.to_csv())?;
    if let TrainedModel::Bkt(m) = &model {
        write(&out.join("bkt_params.csv"), m.export_csv(&data.vocab)?)?;
    }
    write_reports(&out, &[report])
}

fn load_checkpoint(path: &Path) -> Result<(TrainedModel, Vocab, Checkpoint)> {
    let ckpt = Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    let (model, vocab) = TrainedModel::from_checkpoint(&ckpt)?;
    Ok((model, vocab, ckpt))
}

fn check_vocab(expected: &Vocab, got: &Vocab) -> Result<()> {
    match expected.first_mismatch(got) {
        Some(id) => Err(Error::VocabMismatch(id).into()),
        None => Ok(()),
    }
}

/// Write the question → auxiliary KC assignment of an SBRKT checkpoint.
pub fn export_aux(checkpoint: &Path, vocab: &Path, out: &Path) -> Result<()> {
    let (model, embedded, _) = load_checkpoint(checkpoint)?;
    let text = fs::read_to_string(vocab).map_err(|e| Error::io(vocab, e))?;
    let given = Vocab::from_json(&text).with_context(|| format!("parsing {}", vocab.display()))?;
    check_vocab(&embedded, &given)?;
    let TrainedModel::Sbrkt(m) = model else {
        bail!("export-aux needs an SBRKT checkpoint, got `{}`", model.kind());
    };
    let codes = extract_codes(&m, &given)?;
    write(out, write_aux_csv(&codes))?;
    log::info!(
        "wrote {} questions using {} of {} auxiliary KCs",
        codes.len(),
        codes.used_indices().len(),
        m.config.n_aux
    );
    Ok(())
}

/// Append `AUX<j>` KC ids to a dataset, row for row.
pub fn augment(dataset: &Path, aux: &Path, out: &Path, num_aux: Option<usize>) -> Result<()> {
    let rows = read_rows(open(dataset)?).with_context(|| format!("parsing {}", dataset.display()))?;
    let assignment = load_aux(aux)?;
    let n_aux = num_aux.unwrap_or_else(|| assignment.max_index().map_or(0, |j| j + 1));
    let augmented = augment_rows(&rows, &assignment, n_aux)?;
    write(out, write_rows(&augmented))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl SplitName {
    fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Val => "val",
            SplitName::Test => "test",
        }
    }
}

fn parse_ratios(s: &str) -> Option<(f64, f64, f64)> {
    let v: Vec<f64> = s.split(',').map(|x| x.parse().ok()).collect::<Option<_>>()?;
    (v.len() == 3).then(|| (v[0], v[1], v[2]))
}

/// Re-split `dataset` the way training did and evaluate on one part.
/// The train part must rebuild exactly the checkpoint's vocabulary.
pub fn eval(checkpoint: &Path, dataset: &Path, split: SplitName, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let (model, vocab, ckpt) = load_checkpoint(checkpoint)?;
    let get = |key: &str| ckpt.config.get(key);
    let seed = match seed {
        Some(s) => s,
        None => get("seed").and_then(|s| s.parse().ok()).unwrap_or(0),
    };
    let ratios = get("ratios").and_then(|r| parse_ratios(r)).unwrap_or(DEFAULT_RATIOS);
    let max_len = get("max_len").and_then(|s| s.parse().ok()).unwrap_or(sbrkt_core::data::DEFAULT_MAX_LEN);

    let log = load_log(dataset)?;
    let parts = split_students(&log, ratios, seed)?;
    check_vocab(&vocab, &build_vocab(&parts.train)?)?;
    let part = match split {
        SplitName::Train => &parts.train,
        SplitName::Val => &parts.val,
        SplitName::Test => &parts.test,
    };
    let (seqs, stats) = encode_log(part, &vocab);
    if stats.unseen_questions > 0 {
        log::info!("{} interactions on questions unseen in training", stats.unseen_questions);
    }
    let outcome = evaluate_sequences(&model, &seqs, max_len)?;
    let mut config = ckpt.config.clone();
    config.remove("vocab");
    let label = get("label").cloned().unwrap_or_else(|| model.kind().to_string());
    let report = EvalReport::new(label, dataset_name(dataset), split.as_str(), outcome.auc, outcome.n, seed, config);
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            write_reports(dir, &[report])
        }
        None => {
            let (jsonl, table) = emit_report(&[report]);
            print!("{table}");
            log::debug!("{jsonl}");
            Ok(())
        }
    }
}
