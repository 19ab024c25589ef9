//! Quiz corpus records, writer-rule validation, post-processing, splits and
//! training-time transforms.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::text_metrics::tokenize;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus is empty")]
    Empty,
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("record {0:?} has no references")]
    NoReferences(String),
    #[error("unknown style label {0:?}")]
    UnknownStyle(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A question with its short answer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QaPair {
    pub question: String,
    pub answer: String,
}

impl QaPair {
    pub fn new(question: impl Into<String>, answer: impl Into<String>) -> Self {
        QaPair {
            question: question.into(),
            answer: answer.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StyleLabel {
    SQuAD,
    NQ,
    NewsQA,
    NewsQuizQA,
}

impl StyleLabel {
    pub const ALL: [StyleLabel; 4] = [
        StyleLabel::SQuAD,
        StyleLabel::NQ,
        StyleLabel::NewsQA,
        StyleLabel::NewsQuizQA,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StyleLabel::SQuAD => "SQuAD",
            StyleLabel::NQ => "NQ",
            StyleLabel::NewsQA => "NewsQA",
            StyleLabel::NewsQuizQA => "NewsQuizQA",
        }
    }
}

impl fmt::Display for StyleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StyleLabel {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StyleLabel::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| CorpusError::UnknownStyle(s.to_string()))
    }
}

/// A summary passage with its human-written reference pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub id: String,
    pub summary: String,
    pub style: StyleLabel,
    pub references: Vec<QaPair>,
}

/// Writer-rule violations, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Violation {
    EmptyField,
    NoQuestionMark,
    YesNoQuestion,
    BlocklistedPhrase,
    AnswerEndPunctuation,
}

const YES_NO_OPENERS: [&str; 17] = [
    "is", "are", "was", "were", "do", "does", "did", "can", "could", "will", "would", "has", "have", "had", "should",
    "may", "might",
];

const ANSWER_END_PUNCTUATION: [char; 6] = ['.', '!', '?', ';', ':', ','];

/// Question/answer rule checker with an extensible phrase blocklist.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairValidator {
    /// Lowercased substrings rejected anywhere in a question.
    blocked_phrases: Vec<String>,
    /// Whole tokens rejected in a question, matched case-sensitively.
    blocked_tokens: Vec<String>,
}

impl Default for PairValidator {
    fn default() -> Self {
        PairValidator {
            blocked_phrases: vec!["according to the passage".to_string()],
            blocked_tokens: vec!["I".to_string()],
        }
    }
}

impl PairValidator {
    pub fn with_phrase(mut self, phrase: &str) -> Self {
        self.blocked_phrases.push(phrase.to_lowercase());
        self
    }

    pub fn with_token(mut self, token: &str) -> Self {
        self.blocked_tokens.push(token.to_string());
        self
    }

    pub fn validate(&self, pair: &QaPair) -> Vec<Violation> {
        let mut out = BTreeSet::new();
        let question = pair.question.trim();
        let answer = pair.answer.trim();
        if question.is_empty() || answer.is_empty() {
            out.insert(Violation::EmptyField);
        }
        if !question.is_empty() {
            if !question.ends_with('?') {
                out.insert(Violation::NoQuestionMark);
            }
            if let Some(first) = tokenize(question).as_slice().first() {
                if YES_NO_OPENERS.contains(&first.as_str()) {
                    out.insert(Violation::YesNoQuestion);
                }
            }
            if self.is_blocklisted(question) {
                out.insert(Violation::BlocklistedPhrase);
            }
        }
        if answer.ends_with(ANSWER_END_PUNCTUATION) {
            out.insert(Violation::AnswerEndPunctuation);
        }
        out.into_iter().collect()
    }

    fn is_blocklisted(&self, question: &str) -> bool {
        let lower = question.to_lowercase();
        if self.blocked_phrases.iter().any(|p| lower.contains(p.as_str())) {
            return true;
        }
        question
            .split(|c: char| !c.is_alphanumeric())
            .any(|tok| self.blocked_tokens.iter().any(|b| b == tok))
    }
}

/// Checks a pair against the default rule set.
pub fn validate_pair(pair: &QaPair) -> Vec<Violation> {
    PairValidator::default().validate(pair)
}

/// Number of references a record must keep to survive post-processing.
pub const REFERENCES_PER_RECORD: usize = 4;

/// Grammar hook, drop invalid pairs, drop the shortest question, keep
/// records with exactly four references.
pub fn postprocess_corpus<F>(records: &[SummaryRecord], grammar_hook: F) -> Vec<SummaryRecord>
where
    F: Fn(&str) -> String,
{
    postprocess_with(records, &PairValidator::default(), grammar_hook)
}

pub fn postprocess_with<F>(records: &[SummaryRecord], validator: &PairValidator, grammar_hook: F) -> Vec<SummaryRecord>
where
    F: Fn(&str) -> String,
{
    records
        .iter()
        .filter_map(|record| {
            let mut refs: Vec<QaPair> = record
                .references
                .iter()
                .map(|p| QaPair::new(grammar_hook(&p.question), p.answer.clone()))
                .filter(|p| validator.validate(p).is_empty())
                .collect();
            if refs.len() > 1 {
                let shortest = shortest_question(&refs);
                refs.remove(shortest);
            }
            (refs.len() == REFERENCES_PER_RECORD).then(|| SummaryRecord {
                references: refs,
                ..record.clone()
            })
        })
        .collect()
}

fn shortest_question(refs: &[QaPair]) -> usize {
    let mut best = 0;
    for (i, p) in refs.iter().enumerate() {
        if p.question.chars().count() < refs[best].question.chars().count() {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl SplitAssignment {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.validation.len(), self.test.len())
    }
}

/// Seeded 80/10/10 split of record ids. Validation and test sizes are
/// rounded to nearest; train takes the remainder.
pub fn split_corpus(records: &[SummaryRecord], seed: u64) -> Result<SplitAssignment, CorpusError> {
    if records.is_empty() {
        return Err(CorpusError::Empty);
    }
    check_unique_ids(records)?;
    let mut ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let tenth = (ids.len() as f64 * 0.1).round() as usize;
    let test = ids.split_off(ids.len() - tenth);
    let validation = ids.split_off(ids.len() - tenth);
    Ok(SplitAssignment {
        train: ids,
        validation,
        test,
    })
}

pub fn check_unique_ids(records: &[SummaryRecord]) -> Result<(), CorpusError> {
    let mut seen = HashSet::new();
    for r in records {
        if !seen.insert(r.id.as_str()) {
            return Err(CorpusError::DuplicateId(r.id.clone()));
        }
    }
    Ok(())
}

/// `"Style <label>: " + summary`.
pub fn apply_style_prefix(record: &SummaryRecord) -> String {
    style_prefixed(record.style, &record.summary)
}

pub fn style_prefixed(style: StyleLabel, text: &str) -> String {
    format!("Style {}: {}", style.name(), text)
}

/// One single-reference training example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SingleRefExample {
    pub record_id: String,
    pub reference_index: usize,
    pub input: String,
    pub pair: QaPair,
}

fn single(record: &SummaryRecord, reference_index: usize) -> SingleRefExample {
    SingleRefExample {
        record_id: record.id.clone(),
        reference_index,
        input: apply_style_prefix(record),
        pair: record.references[reference_index].clone(),
    }
}

/// Flattens every (record, reference) pair and shuffles with `seed`.
pub fn disaggregate(records: &[SummaryRecord], seed: u64) -> Vec<SingleRefExample> {
    let mut out: Vec<SingleRefExample> = records
        .iter()
        .flat_map(|r| (0..r.references.len()).map(move |i| single(r, i)))
        .collect();
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    out
}

/// Picks one reference per record up front, in record order.
pub fn sample_one(records: &[SummaryRecord], seed: u64) -> Vec<SingleRefExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    records
        .iter()
        .filter(|r| !r.references.is_empty())
        .map(|r| single(r, rng.random_range(0..r.references.len())))
        .collect()
}

/// Field names used to ingest corpora that do not follow the native schema.
///
/// Rows either carry a nested list of references (`references` key set) or
/// one flat question/answer each, in which case rows sharing an id are
/// grouped into one record in first-seen order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldMapping {
    pub id: String,
    pub summary: String,
    pub style: Option<String>,
    pub references: Option<String>,
    pub question: String,
    pub answer: String,
    pub default_style: StyleLabel,
}

impl Default for FieldMapping {
    fn default() -> Self {
        FieldMapping {
            id: "id".into(),
            summary: "summary".into(),
            style: Some("style".into()),
            references: Some("references".into()),
            question: "question".into(),
            answer: "answer".into(),
            default_style: StyleLabel::NewsQuizQA,
        }
    }
}

impl FieldMapping {
    fn map_rows(&self, rows: Vec<(usize, Value)>) -> Result<Vec<SummaryRecord>, CorpusError> {
        let mut records: Vec<SummaryRecord> = Vec::new();
        for (line, row) in rows {
            let err = |message: String| CorpusError::Parse { line, message };
            let text = |key: &str| -> Result<String, CorpusError> {
                match row.get(key) {
                    Some(Value::String(s)) => Ok(s.clone()),
                    Some(Value::Number(n)) => Ok(n.to_string()),
                    _ => Err(err(format!("missing string field {key:?}"))),
                }
            };
            let id = text(&self.id)?;
            let style = match self.style.as_deref().and_then(|k| row.get(k)) {
                Some(Value::String(s)) => s.parse()?,
                _ => self.default_style,
            };
            let pair_of = |v: &Value| -> Result<QaPair, CorpusError> {
                let field = |key: &str| {
                    v.get(key)
                        .and_then(Value::as_str)
                        .map(str::to_string)
                        .ok_or_else(|| err(format!("reference missing {key:?}")))
                };
                Ok(QaPair::new(field(&self.question)?, field(&self.answer)?))
            };
            let nested = self.references.as_deref().and_then(|k| row.get(k));
            let pairs = match nested {
                Some(Value::Array(items)) => items.iter().map(pair_of).collect::<Result<Vec<_>, _>>()?,
                Some(_) => return Err(err("references must be an array".into())),
                None => vec![pair_of(&row)?],
            };
            if nested.is_some() {
                records.push(SummaryRecord {
                    id,
                    summary: text(&self.summary)?,
                    style,
                    references: pairs,
                });
            } else if let Some(existing) = records.iter_mut().find(|r| r.id == id) {
                existing.references.extend(pairs);
            } else {
                records.push(SummaryRecord {
                    id,
                    summary: text(&self.summary)?,
                    style,
                    references: pairs,
                });
            }
        }
        Ok(records)
    }
}

/// Reads a JSONL corpus in the native schema.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<SummaryRecord>, CorpusError> {
    read_corpus_mapped(reader, &FieldMapping::default())
}

pub fn read_corpus_mapped<R: BufRead>(reader: R, mapping: &FieldMapping) -> Result<Vec<SummaryRecord>, CorpusError> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        rows.push((i + 1, value));
    }
    let records = mapping.map_rows(rows)?;
    check_unique_ids(&records)?;
    if let Some(r) = records.iter().find(|r| r.references.is_empty()) {
        return Err(CorpusError::NoReferences(r.id.clone()));
    }
    Ok(records)
}

pub fn write_corpus<W: Write>(mut writer: W, records: &[SummaryRecord]) -> Result<(), CorpusError> {
    for r in records {
        serde_json::to_writer(&mut writer, r).map_err(std::io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(q: &str, a: &str) -> QaPair {
        QaPair::new(q, a)
    }

    fn record(id: &str, refs: Vec<QaPair>) -> SummaryRecord {
        SummaryRecord {
            id: id.into(),
            summary: format!("summary {id}"),
            style: StyleLabel::NewsQuizQA,
            references: refs,
        }
    }

    #[test]
    fn validate_examples() {
        assert!(validate_pair(&pair("Who won the 2020 election?", "Joe Biden")).is_empty());
        assert_eq!(
            validate_pair(&pair("Is the sky blue?", "Yes")),
            vec![Violation::YesNoQuestion]
        );
        assert_eq!(
            validate_pair(&pair("What did she say according to the passage?", "Hello.")),
            vec![Violation::BlocklistedPhrase, Violation::AnswerEndPunctuation]
        );
    }

    #[test]
    fn validate_other_rules() {
        assert_eq!(validate_pair(&pair("Who won", "Bob")), vec![Violation::NoQuestionMark]);
        assert_eq!(validate_pair(&pair("  ", "Bob")), vec![Violation::EmptyField]);
        assert_eq!(validate_pair(&pair("Who?", " ")), vec![Violation::EmptyField]);
        assert_eq!(
            validate_pair(&pair("What do I think?", "x")),
            vec![Violation::BlocklistedPhrase]
        );
        assert_eq!(
            validate_pair(&pair("ACCORDING TO THE PASSAGE, who?", "x")),
            vec![Violation::BlocklistedPhrase]
        );
        // "DOES" is a yes/no opener regardless of case
        assert_eq!(
            validate_pair(&pair("DOES it rain?", "x")),
            vec![Violation::YesNoQuestion]
        );
        // "island" contains "is" but is not the token "is"
        assert!(validate_pair(&pair("Island nations: which one?", "Fiji")).is_empty());
    }

    #[test]
    fn validator_blocklist_is_extensible() {
        let v = PairValidator::default().with_phrase("In The Article");
        assert_eq!(
            v.validate(&pair("Who, in the article, spoke?", "Ann")),
            vec![Violation::BlocklistedPhrase]
        );
        let v = PairValidator::default().with_token("we");
        assert_eq!(
            v.validate(&pair("What did we do?", "x")),
            vec![Violation::BlocklistedPhrase]
        );
    }

    #[test]
    fn postprocess_drops_shortest() {
        let refs = vec![
            pair("Who led the march on Monday?", "Ann"),
            pair("Why?", "rain"),
            pair("Where did the march end up?", "the park"),
            pair("How many people joined the march?", "2000"),
            pair("When was the march first planned?", "May"),
        ];
        let out = postprocess_corpus(&[record("a", refs.clone())], |q| q.to_string());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].references.len(), 4);
        assert!(!out[0].references.contains(&refs[1]));
    }

    #[test]
    fn postprocess_drops_record_after_blocklist() {
        let refs = vec![
            pair("What do I know about it?", "x"),
            pair("Who spoke according to the passage?", "y"),
            pair("Who led the march on Monday?", "Ann"),
            pair("Where did it end?", "the park"),
            pair("How many people joined the march?", "2000"),
        ];
        let out = postprocess_corpus(&[record("a", refs)], |q| q.to_string());
        assert!(out.is_empty());
        assert!(postprocess_corpus(&[], |q| q.to_string()).is_empty());
    }

    #[test]
    fn postprocess_applies_grammar_hook_before_validation() {
        let refs: Vec<QaPair> = (0..5)
            .map(|i| pair(&format!("who won round {}", "x".repeat(i + 1)), "Ann"))
            .collect();
        let out = postprocess_corpus(&[record("a", refs)], |q| format!("{q}?"));
        assert_eq!(out.len(), 1);
        assert!(out[0].references.iter().all(|p| p.question.ends_with('?')));
        assert_eq!(out[0].references[0].question, "who won round xx?");
    }

    #[test]
    fn shortest_tie_breaks_to_first() {
        let refs = vec![pair("abc?", "a"), pair("xyz?", "b"), pair("longer?", "c")];
        assert_eq!(shortest_question(&refs), 0);
    }

    #[test]
    fn split_sizes() {
        let mk = |n: usize| -> Vec<SummaryRecord> {
            (0..n)
                .map(|i| record(&format!("r{i}"), vec![pair("q?", "a")]))
                .collect()
        };
        assert_eq!(split_corpus(&mk(10), 1).unwrap().sizes(), (8, 1, 1));
        assert_eq!(split_corpus(&mk(4160), 1).unwrap().sizes(), (3328, 416, 416));
        assert_eq!(split_corpus(&mk(50), 3).unwrap(), split_corpus(&mk(50), 3).unwrap());
        assert_ne!(split_corpus(&mk(50), 3).unwrap(), split_corpus(&mk(50), 4).unwrap());
        assert!(matches!(split_corpus(&[], 0), Err(CorpusError::Empty)));
        let dup = vec![record("x", vec![]), record("x", vec![])];
        assert!(matches!(split_corpus(&dup, 0), Err(CorpusError::DuplicateId(_))));
    }

    #[test]
    fn style_prefix() {
        let mut r = record("a", vec![]);
        r.summary = "X".into();
        r.style = StyleLabel::SQuAD;
        assert_eq!(apply_style_prefix(&r), "Style SQuAD: X");
        r.summary = String::new();
        r.style = StyleLabel::NQ;
        assert_eq!(apply_style_prefix(&r), "Style NQ: ");
        r.summary = "Y".into();
        r.style = StyleLabel::NewsQA;
        assert_eq!(apply_style_prefix(&r), "Style NewsQA: Y");
    }

    #[test]
    fn disaggregate_counts_and_determinism() {
        let refs: Vec<QaPair> = (0..4).map(|i| pair(&format!("q{i}?"), "a")).collect();
        let corpus = vec![record("a", refs.clone()), record("b", refs)];
        let d = disaggregate(&corpus, 5);
        assert_eq!(d.len(), 8);
        assert_eq!(d, disaggregate(&corpus, 5));
        let picked = sample_one(&corpus, 5);
        assert_eq!(picked.len(), 2);
        assert_eq!(picked, sample_one(&corpus, 5));
    }

    #[test]
    fn jsonl_native_and_flat() {
        let native = r#"{"id":"a","summary":"S","style":"NQ","references":[{"question":"q?","answer":"x"}]}"#;
        let recs = read_corpus(native.as_bytes()).unwrap();
        assert_eq!(recs[0].style, StyleLabel::NQ);
        let mut buf = Vec::new();
        write_corpus(&mut buf, &recs).unwrap();
        assert_eq!(read_corpus(buf.as_slice()).unwrap(), recs);

        let flat = "{\"sid\":1,\"text\":\"S\",\"q\":\"a?\",\"a\":\"x\"}\n{\"sid\":1,\"text\":\"S\",\"q\":\"b?\",\"a\":\"y\"}\n";
        let mapping = FieldMapping {
            id: "sid".into(),
            summary: "text".into(),
            style: None,
            references: None,
            question: "q".into(),
            answer: "a".into(),
            default_style: StyleLabel::NewsQuizQA,
        };
        let recs = read_corpus_mapped(flat.as_bytes(), &mapping).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].id, "1");
        assert_eq!(recs[0].references.len(), 2);
    }

    #[test]
    fn jsonl_errors() {
        assert!(matches!(
            read_corpus("{not json}".as_bytes()),
            Err(CorpusError::Parse { line: 1, .. })
        ));
        let bad_style = r#"{"id":"a","summary":"S","style":"Trivia","references":[{"question":"q?","answer":"x"}]}"#;
        assert!(matches!(
            read_corpus(bad_style.as_bytes()),
            Err(CorpusError::UnknownStyle(_))
        ));
        let empty_refs = r#"{"id":"a","summary":"S","references":[]}"#;
        assert!(matches!(
            read_corpus(empty_refs.as_bytes()),
            Err(CorpusError::NoReferences(_))
        ));
    }
}
