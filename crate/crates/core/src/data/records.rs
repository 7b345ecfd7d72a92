use std::collections::BTreeSet;
use std::io::Read;

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 4] = ["student_id", "question_id", "kc_ids", "correct"];

/// One row of the canonical CSV, kept verbatim (KC order and empty KC lists preserved).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsvRow {
    pub student_id: String,
    pub question_id: String,
    pub kc_ids: Vec<String>,
    pub correct: u8,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InteractionRecord {
    pub student_id: String,
    pub question_id: String,
    pub kc_ids: BTreeSet<String>,
    pub correct: u8,
    /// Position within the student's history.
    pub order_key: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StudentHistory {
    pub student_id: String,
    pub records: Vec<InteractionRecord>,
}

/// Per-student interaction histories, students in order of first appearance.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InteractionLog {
    pub students: Vec<StudentHistory>,
    /// Rows discarded because they carried no KC.
    pub dropped_rows: usize,
}

impl InteractionLog {
    pub fn num_records(&self) -> usize {
        self.students.iter().map(|s| s.records.len()).sum()
    }

    pub fn records(&self) -> impl Iterator<Item = &InteractionRecord> {
        self.students.iter().flat_map(|s| s.records.iter())
    }

    /// Regroup flat records (any order of students, temporal order within each).
    pub fn from_records(records: impl IntoIterator<Item = InteractionRecord>) -> Self {
        let mut students: Vec<StudentHistory> = Vec::new();
        let mut index = std::collections::HashMap::new();
        for mut r in records {
            let slot = *index.entry(r.student_id.clone()).or_insert_with(|| {
                students.push(StudentHistory {
                    student_id: r.student_id.clone(),
                    records: Vec::new(),
                });
                students.len() - 1
            });
            r.order_key = students[slot].records.len();
            students[slot].records.push(r);
        }
        InteractionLog {
            students,
            dropped_rows: 0,
        }
    }
}

fn split_kcs(field: &str) -> Vec<String> {
    field
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Read canonical CSV rows verbatim.
pub fn read_rows<R: Read>(source: R) -> Result<Vec<CsvRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = rdr.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                CSV_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut rows = Vec::new();
    for result in rdr.records() {
        let rec = result.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let correct = match &rec[3] {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("correct must be 0 or 1, got `{other}`"),
                })
            }
        };
        if rec[0].is_empty() || rec[1].is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty student_id or question_id".into(),
            });
        }
        rows.push(CsvRow {
            student_id: rec[0].to_string(),
            question_id: rec[1].to_string(),
            kc_ids: split_kcs(&rec[2]),
            correct,
        });
    }
    Ok(rows)
}

/// Parse canonical CSV into per-student histories; rows without KCs are dropped and counted.
pub fn parse_interactions<R: Read>(source: R) -> Result<InteractionLog> {
    let rows = read_rows(source)?;
    Ok(log_from_rows(rows))
}

pub fn log_from_rows(rows: Vec<CsvRow>) -> InteractionLog {
    let mut dropped = 0;
    let records = rows.into_iter().filter_map(|r| {
        if r.kc_ids.is_empty() {
            dropped += 1;
            return None;
        }
        Some(InteractionRecord {
            student_id: r.student_id,
            question_id: r.question_id,
            kc_ids: r.kc_ids.into_iter().collect(),
            correct: r.correct,
            order_key: 0,
        })
    });
    let mut log = InteractionLog::from_records(records.collect::<Vec<_>>());
    log.dropped_rows = dropped;
    log
}

pub fn write_rows(rows: &[CsvRow]) -> String {
    let mut out = CSV_HEADER.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.student_id,
            r.question_id,
            r.kc_ids.join(";"),
            r.correct
        ));
    }
    out
}

/// Render a log back to canonical CSV, students one after another.
pub fn write_log(log: &InteractionLog) -> String {
    let rows: Vec<CsvRow> = log
        .records()
        .map(|r| CsvRow {
            student_id: r.student_id.clone(),
            question_id: r.question_id.clone(),
            kc_ids: r.kc_ids.iter().cloned().collect(),
            correct: r.correct,
        })
        .collect();
    write_rows(&rows)
}
