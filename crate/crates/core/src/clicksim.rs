//! Simulated site users: who asks what, and what they click.
//!
//! Click models only ever see the ordered record ids of a shown list, never
//! the team labels, so simulated behaviour cannot favour either side.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{query_terms, tokenize, Corpus, CorpusError, HeadQuerySet, RecordKind};
use crate::rng::{mix_seed, SplitMix64};
use crate::systems::builtin::jaccard;

/// Attractiveness for relevance grades 0, 1 and 2.
pub const GRADE_TO_ATTRACTIVENESS: [f64; 3] = [0.05, 0.5, 0.95];

#[derive(Debug, thiserror::Error)]
pub enum ClickError {
    #[error("{what} = {value} is not a probability")]
    InvalidProbability { what: &'static str, value: f64 },
    #[error("examination probabilities must be non-increasing in rank")]
    NonMonotoneExamination,
    #[error("zipf exponent must be positive, got {0}")]
    InvalidExponent(f64),
    #[error("qrels line {line}: {message}")]
    Qrels { line: usize, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Graded relevance per `(query or seed item, record)`. Missing pairs are grade 0.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelevanceMap {
    grades: BTreeMap<String, BTreeMap<String, u8>>,
}

impl RelevanceMap {
    pub fn grade(&self, query_id: &str, record_id: &str) -> u8 {
        self.grades
            .get(query_id)
            .and_then(|m| m.get(record_id))
            .copied()
            .unwrap_or(0)
    }

    pub fn insert(&mut self, query_id: &str, record_id: &str, grade: u8) {
        self.grades
            .entry(query_id.to_owned())
            .or_default()
            .insert(record_id.to_owned(), grade.min(2));
    }

    pub fn extend(&mut self, other: RelevanceMap) {
        for (q, docs) in other.grades {
            self.grades.entry(q).or_default().extend(docs);
        }
    }

    /// Number of stored (non-default) judgements.
    pub fn len(&self) -> usize {
        self.grades.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `query_id TAB record_id TAB grade` lines, sorted.
    pub fn to_qrels(&self) -> String {
        let mut out = String::new();
        for (q, docs) in &self.grades {
            for (doc, grade) in docs {
                out.push_str(&format!("{q}\t{doc}\t{grade}\n"));
            }
        }
        out
    }

    pub fn parse_qrels(text: &str) -> Result<Self, ClickError> {
        let mut map = RelevanceMap::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let bad = |message: &str| ClickError::Qrels {
                line: i + 1,
                message: message.into(),
            };
            if cols.len() != 3 {
                return Err(bad("expected query_id<TAB>record_id<TAB>grade"));
            }
            let grade: u8 = cols[2].trim().parse().map_err(|_| bad("grade is not 0, 1 or 2"))?;
            if grade > 2 {
                return Err(bad("grade is not 0, 1 or 2"));
            }
            map.insert(cols[0], cols[1], grade);
        }
        Ok(map)
    }

    pub fn export(&self, path: &Path) -> Result<(), ClickError> {
        fs::write(path, self.to_qrels()).map_err(|e| CorpusError::io(path, e).into())
    }

    pub fn load(path: &Path) -> Result<Self, ClickError> {
        let text = fs::read_to_string(path).map_err(|e| ClickError::from(CorpusError::io(path, e)))?;
        Self::parse_qrels(&text)
    }
}

/// Ad-hoc grades by term overlap: 2 when every query term is in the title,
/// 1 when any query term occurs anywhere in the indexed text, else 0.
pub fn grade_adhoc(corpus: &Corpus, queries: &HeadQuerySet) -> RelevanceMap {
    let mut map = RelevanceMap::default();
    for query in queries.queries() {
        let terms = query_terms(&query.text);
        let mut matched: BTreeSet<u32> = BTreeSet::new();
        for term in &terms {
            matched.extend(corpus.postings(term).iter().map(|p| p.doc));
        }
        for doc in matched {
            let record = corpus.record(doc);
            let title: BTreeSet<String> = tokenize(&record.title).into_iter().collect();
            let grade = if terms.iter().all(|t| title.contains(t)) { 2 } else { 1 };
            map.insert(&query.query_id, &record.id, grade);
        }
    }
    map
}

/// Recommendation grades by topic overlap between a seed publication and a
/// research dataset: 2 for Jaccard ≥ 0.5, 1 for any shared topic, else 0.
pub fn grade_recommendation(corpus: &Corpus, seeds: &HeadQuerySet) -> RelevanceMap {
    let mut map = RelevanceMap::default();
    let datasets: Vec<_> = corpus
        .records()
        .iter()
        .filter(|r| r.kind == RecordKind::ResearchData)
        .collect();
    for seed in seeds.queries() {
        let Some(seed_record) = corpus.get(&seed.query_id) else {
            continue;
        };
        for dataset in &datasets {
            let j = jaccard(&seed_record.topics, &dataset.topics);
            if j > 0.0 {
                map.insert(&seed.query_id, &dataset.id, if j >= 0.5 { 2 } else { 1 });
            }
        }
    }
    map
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClickModel {
    Pbm,
    Cascade,
}

#[derive(Debug, Clone)]
pub struct ClickModelConfig {
    pub model: ClickModel,
    /// Per-rank examination probability (PBM).
    pub examination: Vec<f64>,
    /// Probability of scanning on after a click (cascade).
    pub continuation: f64,
    pub grade_to_attractiveness: [f64; 3],
    pub relevance: Arc<RelevanceMap>,
}

/// `1 / (i + 1)` for ranks `i = 0..k`.
pub fn default_examination(k: usize) -> Vec<f64> {
    (0..k).map(|i| 1.0 / (i as f64 + 1.0)).collect()
}

impl ClickModelConfig {
    pub fn pbm(relevance: Arc<RelevanceMap>, k: usize) -> Self {
        ClickModelConfig {
            model: ClickModel::Pbm,
            examination: default_examination(k),
            continuation: 0.5,
            grade_to_attractiveness: GRADE_TO_ATTRACTIVENESS,
            relevance,
        }
    }

    pub fn cascade(relevance: Arc<RelevanceMap>, continuation: f64) -> Self {
        ClickModelConfig {
            model: ClickModel::Cascade,
            examination: Vec::new(),
            continuation,
            grade_to_attractiveness: GRADE_TO_ATTRACTIVENESS,
            relevance,
        }
    }

    pub fn validate(&self) -> Result<(), ClickError> {
        let check = |what, value: f64| {
            if (0.0..=1.0).contains(&value) {
                Ok(())
            } else {
                Err(ClickError::InvalidProbability { what, value })
            }
        };
        for &e in &self.examination {
            check("examination", e)?;
        }
        if self.examination.windows(2).any(|w| w[1] > w[0]) {
            return Err(ClickError::NonMonotoneExamination);
        }
        check("continuation", self.continuation)?;
        for &a in &self.grade_to_attractiveness {
            check("attractiveness", a)?;
        }
        Ok(())
    }

    pub fn attractiveness(&self, query_id: &str, record_id: &str) -> f64 {
        let grade = self.relevance.grade(query_id, record_id) as usize;
        self.grade_to_attractiveness[grade.min(2)]
    }
}

/// Position-based model: rank `i` is clicked independently with probability
/// `examination[i] * attractiveness(query, doc_i)`; ranks past the end of the
/// examination vector are never examined. One uniform draw per rank.
pub fn simulate_clicks_pbm<S: AsRef<str>>(
    cfg: &ClickModelConfig,
    query_id: &str,
    shown: &[S],
    draw_seed: u64,
) -> BTreeSet<usize> {
    let mut rng = SplitMix64::new(draw_seed);
    let mut clicks = BTreeSet::new();
    for (i, doc) in shown.iter().enumerate() {
        let u = rng.next_f64();
        let examined = cfg.examination.get(i).copied().unwrap_or(0.0);
        if u < examined * cfg.attractiveness(query_id, doc.as_ref()) {
            clicks.insert(i);
        }
    }
    clicks
}

/// Cascade model: scan top-down, click with probability attractiveness; after
/// a click continue with probability `continuation`, otherwise stop.
pub fn simulate_clicks_cascade<S: AsRef<str>>(
    cfg: &ClickModelConfig,
    query_id: &str,
    shown: &[S],
    draw_seed: u64,
) -> BTreeSet<usize> {
    let mut rng = SplitMix64::new(draw_seed);
    let mut clicks = BTreeSet::new();
    for (i, doc) in shown.iter().enumerate() {
        if rng.next_f64() < cfg.attractiveness(query_id, doc.as_ref()) {
            clicks.insert(i);
            if rng.next_f64() >= cfg.continuation {
                break;
            }
        }
    }
    clicks
}

pub fn simulate_clicks<S: AsRef<str>>(
    cfg: &ClickModelConfig,
    query_id: &str,
    shown: &[S],
    draw_seed: u64,
) -> BTreeSet<usize> {
    match cfg.model {
        ClickModel::Pbm => simulate_clicks_pbm(cfg, query_id, shown, draw_seed),
        ClickModel::Cascade => simulate_clicks_cascade(cfg, query_id, shown, draw_seed),
    }
}

/// Head-heavy demand over a [`HeadQuerySet`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulatedUserPool {
    pub zipf_exponent: f64,
    pub rng_seed: u64,
}

impl Default for SimulatedUserPool {
    fn default() -> Self {
        SimulatedUserPool {
            zipf_exponent: 1.0,
            rng_seed: 0,
        }
    }
}

impl SimulatedUserPool {
    pub fn new(zipf_exponent: f64, rng_seed: u64) -> Result<Self, ClickError> {
        if !(zipf_exponent > 0.0 && zipf_exponent.is_finite()) {
            return Err(ClickError::InvalidExponent(zipf_exponent));
        }
        Ok(SimulatedUserPool {
            zipf_exponent,
            rng_seed,
        })
    }
}

/// `P(rank r) = r^-s / Σ_j j^-s` for `r = 1..=n`.
pub fn zipf_probabilities(n: usize, exponent: f64) -> Vec<f64> {
    let weights: Vec<f64> = (1..=n).map(|r| (r as f64).powf(-exponent)).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Draw one query id with Zipf probabilities over frequency rank.
/// Panics if `queries` is empty.
pub fn sample_query<'a>(pool: &SimulatedUserPool, queries: &'a HeadQuerySet, draw_seed: u64) -> &'a str {
    let list = queries.queries();
    assert!(!list.is_empty(), "sample_query needs at least one query");
    let u = SplitMix64::new(mix_seed(pool.rng_seed, draw_seed)).next_f64();
    let probs = zipf_probabilities(list.len(), pool.zipf_exponent);
    let mut cumulative = 0.0;
    for (query, p) in list.iter().zip(probs) {
        cumulative += p;
        if u < cumulative {
            return &query.query_id;
        }
    }
    &list[list.len() - 1].query_id
}
