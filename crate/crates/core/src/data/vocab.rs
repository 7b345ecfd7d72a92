use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::records::InteractionLog;
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct VocabJson {
    questions: Vec<String>,
    kcs: Vec<String>,
}

/// Bijections question-id ↔ `[0, Q)` and kc-id ↔ `[0, N)`, sorted lexicographically.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(from = "VocabJson", into = "VocabJson")]
pub struct Vocab {
    questions: Vec<String>,
    kcs: Vec<String>,
    question_index: HashMap<String, usize>,
    kc_index: HashMap<String, usize>,
}

impl PartialEq for Vocab {
    fn eq(&self, other: &Self) -> bool {
        self.questions == other.questions && self.kcs == other.kcs
    }
}

impl From<VocabJson> for Vocab {
    fn from(v: VocabJson) -> Self {
        Vocab::from_lists(v.questions, v.kcs)
    }
}

impl From<Vocab> for VocabJson {
    fn from(v: Vocab) -> Self {
        VocabJson {
            questions: v.questions,
            kcs: v.kcs,
        }
    }
}

impl Vocab {
    pub fn from_lists(questions: Vec<String>, kcs: Vec<String>) -> Self {
        let question_index = questions.iter().enumerate().map(|(i, q)| (q.clone(), i)).collect();
        let kc_index = kcs.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
        Vocab {
            questions,
            kcs,
            question_index,
            kc_index,
        }
    }

    pub fn num_questions(&self) -> usize {
        self.questions.len()
    }

    pub fn num_kcs(&self) -> usize {
        self.kcs.len()
    }

    pub fn questions(&self) -> &[String] {
        &self.questions
    }

    pub fn kcs(&self) -> &[String] {
        &self.kcs
    }

    pub fn question(&self, id: &str) -> Option<usize> {
        self.question_index.get(id).copied()
    }

    pub fn kc(&self, id: &str) -> Option<usize> {
        self.kc_index.get(id).copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("vocab serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// First id (question or KC) on which two vocabularies disagree.
    pub fn first_mismatch(&self, other: &Vocab) -> Option<String> {
        fn first(a: &[String], b: &[String]) -> Option<String> {
            a.iter()
                .zip(b)
                .find(|(x, y)| x != y)
                .map(|(x, _)| x.clone())
                .or_else(|| match a.len().cmp(&b.len()) {
                    std::cmp::Ordering::Greater => Some(a[b.len()].clone()),
                    std::cmp::Ordering::Less => Some(b[a.len()].clone()),
                    std::cmp::Ordering::Equal => None,
                })
        }
        first(&self.questions, &other.questions).or_else(|| first(&self.kcs, &other.kcs))
    }
}

/// Build a vocabulary from training records.
pub fn build_vocab(log: &InteractionLog) -> Result<Vocab> {
    if log.num_records() == 0 {
        return Err(Error::InvalidInput("cannot build a vocabulary from no records".into()));
    }
    let mut questions = BTreeSet::new();
    let mut kcs = BTreeSet::new();
    for r in log.records() {
        questions.insert(r.question_id.clone());
        kcs.extend(r.kc_ids.iter().cloned());
    }
    Ok(Vocab::from_lists(
        questions.into_iter().collect(),
        kcs.into_iter().collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_interactions;

    fn log(src: &str) -> InteractionLog {
        parse_interactions(format!("student_id,question_id,kc_ids,correct\n{src}").as_bytes()).unwrap()
    }

    #[test]
    fn sorted_indices() {
        let v = build_vocab(&log("s,qb,k2,1\ns,qa,k1,0\n")).unwrap();
        assert_eq!(v.question("qa"), Some(0));
        assert_eq!(v.question("qb"), Some(1));
        assert_eq!(v.kc("k1"), Some(0));
        assert_eq!(v.kc("k2"), Some(1));
    }

    #[test]
    fn single_record() {
        let v = build_vocab(&log("s,q,a;b;c,1\n")).unwrap();
        assert_eq!((v.num_questions(), v.num_kcs()), (1, 3));
    }

    #[test]
    fn duplicates_indexed_once() {
        let v = build_vocab(&log("s,q,a,1\nt,q,a;b,1\ns,q,b,0\n")).unwrap();
        assert_eq!((v.num_questions(), v.num_kcs()), (1, 2));
    }

    #[test]
    fn empty_input_errors() {
        assert!(build_vocab(&InteractionLog::default()).is_err());
    }

    #[test]
    fn json_shape() {
        let v = build_vocab(&log("s,q,a,1\n")).unwrap();
        let j: serde_json::Value = serde_json::from_str(&v.to_json()).unwrap();
        assert_eq!(j["questions"][0], "q");
        assert_eq!(j["kcs"][0], "a");
        assert_eq!(Vocab::from_json(&v.to_json()).unwrap(), v);
    }
}
