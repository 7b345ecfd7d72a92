//! Export learned exercise codes as auxiliary KCs and fold them into datasets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Read;

use crate::data::{CsvRow, InteractionLog, InteractionRecord, Vocab};
use crate::error::{Error, Result};
use crate::sbrkt::{Sbrkt, Variant};

pub const AUX_CSV_HEADER: [&str; 2] = ["question_id", "aux_ids"];

/// Question id → active auxiliary KC indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AuxAssignment {
    pub codes: BTreeMap<String, BTreeSet<usize>>,
}

impl AuxAssignment {
    pub fn get(&self, question: &str) -> Option<&BTreeSet<usize>> {
        self.codes.get(question)
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.codes.values().filter_map(|s| s.last().copied()).max()
    }

    /// Indices that at least one question uses.
    pub fn used_indices(&self) -> BTreeSet<usize> {
        self.codes.values().flatten().copied().collect()
    }
}

/// Read off each training question's code; the shared unseen-question row is skipped.
pub fn extract_codes(model: &Sbrkt, vocab: &Vocab) -> Result<AuxAssignment> {
    if model.config.variant == Variant::Dense {
        return Err(Error::DenseHasNoCodes);
    }
    if vocab.num_questions() != model.config.n_questions {
        return Err(Error::VocabMismatch(format!(
            "vocabulary has {} questions, model has {}",
            vocab.num_questions(),
            model.config.n_questions
        )));
    }
    let mut codes = BTreeMap::new();
    for (q, id) in vocab.questions().iter().enumerate() {
        let (_, bits) = model.code(q)?;
        let bits = bits.ok_or(Error::DenseHasNoCodes)?;
        let set = bits.iter().enumerate().filter(|(_, &b)| b == 1).map(|(i, _)| i).collect();
        codes.insert(id.clone(), set);
    }
    Ok(AuxAssignment { codes })
}

/// KC index set extended with `n_kcs + j` for each auxiliary index `j`.
pub fn augment_indices(kcs: &BTreeSet<usize>, aux: &BTreeSet<usize>, n_kcs: usize) -> BTreeSet<usize> {
    kcs.iter().copied().chain(aux.iter().map(|j| n_kcs + j)).collect()
}

pub fn aux_kc_id(j: usize) -> String {
    format!("AUX{j}")
}

fn check_augmentable<'a>(
    assignment: &AuxAssignment,
    n_aux: usize,
    mut kc_ids: impl Iterator<Item = &'a String>,
) -> Result<()> {
    if let Some(j) = assignment.max_index().filter(|&j| j >= n_aux) {
        return Err(Error::InvalidInput(format!(
            "auxiliary index {j} out of range for {n_aux} auxiliary KCs"
        )));
    }
    let aux_names: BTreeSet<String> = (0..n_aux).map(aux_kc_id).collect();
    if let Some(clash) = kc_ids.find(|k| aux_names.contains(*k)) {
        return Err(Error::InvalidInput(format!("original KC `{clash}` collides with an auxiliary KC name")));
    }
    Ok(())
}

/// Append `AUX<j>` KC ids to every record whose question has a code.
/// Fails if any index is `>= n_aux` or an original KC already uses an `AUX<j>` name.
pub fn augment_log(log: &InteractionLog, assignment: &AuxAssignment, n_aux: usize) -> Result<InteractionLog> {
    check_augmentable(assignment, n_aux, log.records().flat_map(|r| &r.kc_ids))?;
    let records = log.records().map(|r| {
        let mut kc_ids = r.kc_ids.clone();
        if let Some(aux) = assignment.get(&r.question_id) {
            kc_ids.extend(aux.iter().map(|&j| aux_kc_id(j)));
        }
        InteractionRecord { kc_ids, ..r.clone() }
    });
    let mut out = InteractionLog::from_records(records);
    out.dropped_rows = log.dropped_rows;
    Ok(out)
}

/// [`augment_log`] on raw CSV rows: order, KC order and KC-less rows are kept.
pub fn augment_rows(rows: &[CsvRow], assignment: &AuxAssignment, n_aux: usize) -> Result<Vec<CsvRow>> {
    check_augmentable(assignment, n_aux, rows.iter().flat_map(|r| &r.kc_ids))?;
    Ok(rows
        .iter()
        .map(|r| {
            let mut row = r.clone();
            if let Some(aux) = assignment.get(&r.question_id) {
                row.kc_ids.extend(aux.iter().map(|&j| aux_kc_id(j)));
            }
            row
        })
        .collect())
}

/// `question_id,aux_ids` with `;`-joined indices.
pub fn write_aux_csv(assignment: &AuxAssignment) -> String {
    let mut out = format!("{}\n", AUX_CSV_HEADER.join(","));
    for (q, set) in &assignment.codes {
        let ids: Vec<String> = set.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "{q},{}", ids.join(";"));
    }
    out
}

pub fn read_aux_csv<R: Read>(source: R) -> Result<AuxAssignment> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if header.iter().collect::<Vec<_>>() != AUX_CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{}`", AUX_CSV_HEADER.join(",")),
        });
    }
    let mut codes = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let q = rec[0].to_string();
        let set = rec[1]
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<usize>().map_err(|_| Error::Parse {
                    line,
                    message: format!("auxiliary id `{s}` is not a non-negative integer"),
                })
            })
            .collect::<Result<BTreeSet<_>>>()?;
        if codes.insert(q.clone(), set).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("duplicate question `{q}`"),
            });
        }
    }
    Ok(AuxAssignment { codes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_interactions;
    use crate::sbrkt::SbrktConfig;

    fn model(variant: Variant) -> (Sbrkt, Vocab) {
        let mut c = SbrktConfig::new(1, 3);
        (c.n_aux, c.emb_dim, c.c_max, c.proj_dim, c.hidden) = (4, 4, 2, 2, 2);
        c.variant = variant;
        let vocab = Vocab::from_lists(vec!["qa".into(), "qb".into(), "qc".into()], vec!["k".into()]);
        (Sbrkt::new(c, 5).unwrap(), vocab)
    }

    #[test]
    fn codes_follow_presence_bits() {
        let (mut m, vocab) = model(Variant::AlphaBeta);
        let w = m.params.get_mut(m.ids.w_ex).data_mut();
        w.fill(0.0);
        m.params.get_mut(m.ids.b_ex).data_mut().copy_from_slice(&[0.9, -0.1, 0.2, 1.0]);
        let a = extract_codes(&m, &vocab).unwrap();
        assert_eq!(a.len(), 3);
        assert_eq!(a.get("qa"), Some(&BTreeSet::from([0, 3])));
        assert_eq!(a.get("qa"), a.get("qc"));

        m.params.get_mut(m.ids.b_ex).data_mut().fill(-1.0);
        assert!(extract_codes(&m, &vocab).unwrap().codes.values().all(BTreeSet::is_empty));
    }

    #[test]
    fn ablations_export_and_dense_fails() {
        for v in [Variant::Tanh, Variant::ZeroOne] {
            let (m, vocab) = model(v);
            let a = extract_codes(&m, &vocab).unwrap();
            assert!(a.codes.values().all(|s| s.len() <= 2));
        }
        let (m, vocab) = model(Variant::Dense);
        let err = extract_codes(&m, &vocab).unwrap_err();
        assert!(err.to_string().contains("dense variant has no discrete representation"));
    }

    #[test]
    fn index_augmentation_offsets() {
        assert_eq!(
            augment_indices(&BTreeSet::from([2]), &BTreeSet::from([0, 3]), 123),
            BTreeSet::from([2, 123, 126])
        );
        assert_eq!(augment_indices(&BTreeSet::from([2]), &BTreeSet::new(), 123), BTreeSet::from([2]));
    }

    #[test]
    fn record_augmentation() {
        let log = parse_interactions("student_id,question_id,kc_ids,correct\ns1,q1,k1,1\ns1,q2,k2,0\n".as_bytes()).unwrap();
        let a = AuxAssignment {
            codes: BTreeMap::from([("q1".into(), BTreeSet::from([0]))]),
        };
        let out = augment_log(&log, &a, 4).unwrap();
        let recs: Vec<_> = out.records().collect();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].kc_ids, BTreeSet::from(["k1".to_string(), "AUX0".to_string()]));
        assert_eq!(recs[1].kc_ids, BTreeSet::from(["k2".to_string()]));
        assert!(augment_log(&log, &a, 0).is_err());
    }

    #[test]
    fn row_augmentation_keeps_rows_verbatim() {
        let rows = crate::data::read_rows("student_id,question_id,kc_ids,correct\ns1,q1,k1,1\ns1,q3,,0\ns2,q2,k2;k0,0\n".as_bytes()).unwrap();
        let a = AuxAssignment {
            codes: BTreeMap::from([("q1".into(), BTreeSet::from([0])), ("q2".into(), BTreeSet::from([1, 2]))]),
        };
        let out = augment_rows(&rows, &a, 3).unwrap();
        assert_eq!(
            crate::data::write_rows(&out),
            "student_id,question_id,kc_ids,correct\ns1,q1,k1;AUX0,1\ns1,q3,,0\ns2,q2,k2;k0;AUX1;AUX2,0\n"
        );
        assert!(augment_rows(&rows, &a, 2).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let a = AuxAssignment {
            codes: BTreeMap::from([("q1".into(), BTreeSet::from([0, 3])), ("q2".into(), BTreeSet::new())]),
        };
        let text = write_aux_csv(&a);
        assert_eq!(text, "question_id,aux_ids\nq1,0;3\nq2,\n");
        assert_eq!(read_aux_csv(text.as_bytes()).unwrap(), a);
        assert!(read_aux_csv("question_id,aux_ids\nq1,x\n".as_bytes()).is_err());
    }
}
