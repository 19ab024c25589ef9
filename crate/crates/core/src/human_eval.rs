//! Statistics over rater judgements of multiple-choice options, and survey
//! rating aggregates.
//!
//! Each rating records the options a rater marked as possibly correct and
//! the options they flagged as duplicate or overlapping. Percentages are
//! taken over ratings (question-rater pairs) unless noted otherwise.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StatsError {
    #[error("no ratings supplied")]
    NoRatings,
    #[error("rating by {rater:?} references unknown question {question:?}")]
    UnknownQuestion { rater: String, question: String },
    #[error("rating by {rater:?} on {question:?} references unknown option {option:?}")]
    UnknownOption {
        rater: String,
        question: String,
        option: String,
    },
    #[error("rater {rater:?} rated question {question:?} more than once")]
    DuplicateRating { rater: String, question: String },
    #[error("rating by {rater:?} on {question:?} marks no option")]
    NothingMarked { rater: String, question: String },
    #[error("question {0:?} is malformed: the key must not be a distractor and at least one distractor is required")]
    BadQuestion(String),
    #[error("survey response {0} is outside 1..=5")]
    ResponseOutOfRange(i64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub rater_id: String,
    pub question_id: String,
    pub marked: BTreeSet<String>,
    #[serde(default)]
    pub overlap_flags: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionOptions {
    pub question_id: String,
    pub key_option: String,
    pub distractor_options: BTreeSet<String>,
}

impl QuestionOptions {
    fn contains(&self, option: &str) -> bool {
        self.key_option == option || self.distractor_options.contains(option)
    }

    fn option_count(&self) -> usize {
        1 + self.distractor_options.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub plausible_per_question: f64,
    pub single_plausible_pct: f64,
    /// Zero when no rating marked exactly one option.
    pub single_plausible_is_distractor_pct: f64,
    pub keys_not_plausible_pct: f64,
    pub distractors_plausible_pct: f64,
    pub at_least_one_distractor_plausible_pct: f64,
    /// Share of options (over rated questions) flagged by a strict majority
    /// of that question's raters.
    pub duplicate_overlapping_pct: f64,
}

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

fn validate<'a>(
    ratings: &[RatingRecord],
    questions: &'a [QuestionOptions],
) -> Result<HashMap<&'a str, &'a QuestionOptions>, StatsError> {
    let mut by_id = HashMap::new();
    for q in questions {
        if q.distractor_options.is_empty() || q.distractor_options.contains(&q.key_option) {
            return Err(StatsError::BadQuestion(q.question_id.clone()));
        }
        by_id.insert(q.question_id.as_str(), q);
    }
    let mut seen = HashSet::new();
    for r in ratings {
        let q = by_id
            .get(r.question_id.as_str())
            .ok_or_else(|| StatsError::UnknownQuestion {
                rater: r.rater_id.clone(),
                question: r.question_id.clone(),
            })?;
        if !seen.insert((r.rater_id.as_str(), r.question_id.as_str())) {
            return Err(StatsError::DuplicateRating {
                rater: r.rater_id.clone(),
                question: r.question_id.clone(),
            });
        }
        if r.marked.is_empty() {
            return Err(StatsError::NothingMarked {
                rater: r.rater_id.clone(),
                question: r.question_id.clone(),
            });
        }
        if let Some(bad) = r.marked.iter().chain(&r.overlap_flags).find(|o| !q.contains(o)) {
            return Err(StatsError::UnknownOption {
                rater: r.rater_id.clone(),
                question: r.question_id.clone(),
                option: bad.clone(),
            });
        }
    }
    Ok(by_id)
}

pub fn compute_stats(ratings: &[RatingRecord], questions: &[QuestionOptions]) -> Result<StatsReport, StatsError> {
    let by_id = validate(ratings, questions)?;
    if ratings.is_empty() {
        return Err(StatsError::NoRatings);
    }
    let n = ratings.len();
    let mut marked_total = 0;
    let mut single = 0;
    let mut single_distractor = 0;
    let mut key_missing = 0;
    let mut distractor_pairs = 0;
    let mut distractor_hits = 0;
    let mut any_distractor = 0;
    // question -> (raters, option -> flag count)
    let mut flags: BTreeMap<&str, (usize, HashMap<&str, usize>)> = BTreeMap::new();

    for r in ratings {
        let q = by_id[r.question_id.as_str()];
        let hits = r.marked.iter().filter(|o| q.distractor_options.contains(*o)).count();
        marked_total += r.marked.len();
        if r.marked.len() == 1 {
            single += 1;
            if hits == 1 {
                single_distractor += 1;
            }
        }
        if !r.marked.contains(&q.key_option) {
            key_missing += 1;
        }
        distractor_pairs += q.distractor_options.len();
        distractor_hits += hits;
        if hits > 0 {
            any_distractor += 1;
        }
        let entry = flags.entry(q.question_id.as_str()).or_default();
        entry.0 += 1;
        for o in &r.overlap_flags {
            *entry.1.entry(o.as_str()).or_insert(0) += 1;
        }
    }

    let mut options = 0;
    let mut duplicated = 0;
    for (qid, (raters, counts)) in &flags {
        options += by_id[qid].option_count();
        duplicated += counts.values().filter(|&&c| 2 * c > *raters).count();
    }

    Ok(StatsReport {
        plausible_per_question: marked_total as f64 / n as f64,
        single_plausible_pct: pct(single, n),
        single_plausible_is_distractor_pct: pct(single_distractor, single),
        keys_not_plausible_pct: pct(key_missing, n),
        distractors_plausible_pct: pct(distractor_hits, distractor_pairs),
        at_least_one_distractor_plausible_pct: pct(any_distractor, n),
        duplicate_overlapping_pct: pct(duplicated, options),
    })
}

/// Normal-approximation 95% interval half-width multiplier.
pub const Z_95: f64 = 1.96;

/// Mean of 1..=5 survey responses and the 95% margin
/// `1.96 · s / √n` with the sample standard deviation `s` (0 when n = 1).
pub fn aggregate_ratings(responses: &[i64]) -> Result<(f64, f64), StatsError> {
    if responses.is_empty() {
        return Err(StatsError::NoRatings);
    }
    if let Some(&bad) = responses.iter().find(|r| !(1..=5).contains(*r)) {
        return Err(StatsError::ResponseOutOfRange(bad));
    }
    let n = responses.len() as f64;
    let mean = responses.iter().sum::<i64>() as f64 / n;
    if responses.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = responses.iter().map(|&r| (r as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, Z_95 * var.sqrt() / n.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn question() -> QuestionOptions {
        QuestionOptions {
            question_id: "q1".into(),
            key_option: "K".into(),
            distractor_options: set(&["D1", "D2", "D3"]),
        }
    }

    fn rating(rater: &str, marked: &[&str], flags: &[&str]) -> RatingRecord {
        RatingRecord {
            rater_id: rater.into(),
            question_id: "q1".into(),
            marked: set(marked),
            overlap_flags: set(flags),
        }
    }

    #[test]
    fn all_key_fixture() {
        let ratings: Vec<_> = (0..5).map(|i| rating(&format!("r{i}"), &["K"], &[])).collect();
        let s = compute_stats(&ratings, &[question()]).unwrap();
        assert_eq!(s.plausible_per_question, 1.0);
        assert_eq!(s.single_plausible_pct, 100.0);
        assert_eq!(s.single_plausible_is_distractor_pct, 0.0);
        assert_eq!(s.keys_not_plausible_pct, 0.0);
        assert_eq!(s.distractors_plausible_pct, 0.0);
        assert_eq!(s.at_least_one_distractor_plausible_pct, 0.0);
    }

    #[test]
    fn majority_vote_on_duplicates() {
        let flags3: Vec<_> = (0..5)
            .map(|i| rating(&format!("r{i}"), &["K"], if i < 3 { &["D1"] } else { &[] }))
            .collect();
        // one of four options flagged
        assert_eq!(
            compute_stats(&flags3, &[question()]).unwrap().duplicate_overlapping_pct,
            25.0
        );
        let flags2: Vec<_> = (0..5)
            .map(|i| rating(&format!("r{i}"), &["K"], if i < 2 { &["D1"] } else { &[] }))
            .collect();
        assert_eq!(
            compute_stats(&flags2, &[question()]).unwrap().duplicate_overlapping_pct,
            0.0
        );
        // even panel: 2 of 4 is not a strict majority
        let even: Vec<_> = (0..4)
            .map(|i| rating(&format!("r{i}"), &["K"], if i < 2 { &["D2"] } else { &[] }))
            .collect();
        assert_eq!(
            compute_stats(&even, &[question()]).unwrap().duplicate_overlapping_pct,
            0.0
        );
    }

    #[test]
    fn error_paths() {
        let q = [question()];
        assert_eq!(compute_stats(&[], &q), Err(StatsError::NoRatings));
        let mut r = rating("a", &["K"], &[]);
        r.question_id = "nope".into();
        assert!(matches!(
            compute_stats(&[r], &q),
            Err(StatsError::UnknownQuestion { .. })
        ));
        let r = rating("a", &["X"], &[]);
        assert!(matches!(compute_stats(&[r], &q), Err(StatsError::UnknownOption { .. })));
        let r = rating("a", &["K"], &["Z"]);
        assert!(matches!(compute_stats(&[r], &q), Err(StatsError::UnknownOption { .. })));
        let r = rating("a", &[], &[]);
        assert!(matches!(compute_stats(&[r], &q), Err(StatsError::NothingMarked { .. })));
        let dup = [rating("a", &["K"], &[]), rating("a", &["D1"], &[])];
        assert!(matches!(
            compute_stats(&dup, &q),
            Err(StatsError::DuplicateRating { .. })
        ));
        let mut bad = question();
        bad.distractor_options.insert("K".into());
        assert!(matches!(
            compute_stats(&[rating("a", &["K"], &[])], &[bad]),
            Err(StatsError::BadQuestion(_))
        ));
    }

    #[test]
    fn survey_aggregates() {
        assert_eq!(aggregate_ratings(&[3, 3, 3]).unwrap(), (3.0, 0.0));
        let (mean, margin) = aggregate_ratings(&[1, 5]).unwrap();
        assert_eq!(mean, 3.0);
        // s = 2√2, margin = 1.96 · 2√2 / √2 = 3.92
        assert!((margin - 3.92).abs() < 1e-12);
        assert_eq!(aggregate_ratings(&[4]).unwrap(), (4.0, 0.0));
        assert_eq!(aggregate_ratings(&[]), Err(StatsError::NoRatings));
        assert_eq!(aggregate_ratings(&[3, 6]), Err(StatsError::ResponseOutOfRange(6)));
        assert_eq!(aggregate_ratings(&[0]), Err(StatsError::ResponseOutOfRange(0)));
    }

    #[test]
    fn survey_margin_at_reported_scale() {
        // 41 twos, 221 fours, 738 threes: mean 3.18, sd ≈ 0.48
        let mut responses = vec![2; 41];
        responses.extend(vec![4; 221]);
        responses.extend(vec![3; 738]);
        let (mean, margin) = aggregate_ratings(&responses).unwrap();
        assert!((mean - 3.18).abs() < 1e-12);
        assert!((margin - 0.03).abs() < 0.002, "margin = {margin}");
    }
}
