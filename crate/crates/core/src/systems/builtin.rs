//! In-process rankers: the site baselines and the stock candidates.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{SystemError, Task};
use crate::corpus::{query_terms, tokenize, Corpus, Record, RecordKind};
use crate::rng::{fnv1a64, mix_seed, SplitMix64};

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

/// Years after which the recency prior halves a score.
const RECENCY_HALF_LIFE_YEARS: f64 = 10.0;

const SHUFFLE_SALT: u64 = 0x5348_5546_464c_4521;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinRanker {
    /// Okapi BM25 over title, abstract and topics.
    Bm25,
    /// Cosine between `(1 + ln tf) * idf` vectors.
    TfidfCosine,
    /// BM25 damped by `1 / (1 + age_years / 10)`.
    RecencyBm25,
    /// Matching records in ascending BM25 order: a deliberately poor ranker.
    ReversedBm25,
    /// Matching records in a fixed pseudo-random order per query.
    RandomShuffle,
    /// Research data ranked by Jaccard overlap of topic sets with the seed.
    TopicJaccard,
    /// Research data ranked by abstract TF-IDF cosine with the seed abstract.
    AbstractTfidfCosine,
    /// Research data in a fixed pseudo-random order per seed.
    RandomDatasets,
}

impl BuiltinRanker {
    pub fn task(self) -> Task {
        use BuiltinRanker::*;
        match self {
            Bm25 | TfidfCosine | RecencyBm25 | ReversedBm25 | RandomShuffle => Task::AdhocRetrieval,
            TopicJaccard | AbstractTfidfCosine | RandomDatasets => Task::DatasetRecommendation,
        }
    }

    pub(crate) fn rank(self, corpus: &Corpus, query: &str, k: usize) -> Vec<String> {
        let terms = query_terms(query);
        match self {
            BuiltinRanker::Bm25 => top_k(corpus, bm25_scores(corpus, &terms), k, Order::Descending),
            BuiltinRanker::RecencyBm25 => {
                let reference = corpus.max_year();
                let scored = bm25_scores(corpus, &terms)
                    .into_iter()
                    .map(|(doc, s)| (doc, s * recency_factor(corpus.record(doc), reference)))
                    .collect();
                top_k(corpus, scored, k, Order::Descending)
            }
            BuiltinRanker::ReversedBm25 => {
                top_k(corpus, bm25_scores(corpus, &terms), k, Order::Ascending)
            }
            BuiltinRanker::TfidfCosine => {
                top_k(corpus, tfidf_cosine_scores(corpus, &terms), k, Order::Descending)
            }
            BuiltinRanker::RandomShuffle => {
                let mut ids: Vec<&str> = bm25_scores(corpus, &terms)
                    .into_iter()
                    .map(|(doc, _)| corpus.record(doc).id.as_str())
                    .collect();
                ids.sort_unstable();
                shuffled_prefix(ids, mix_seed(fnv1a64(query), SHUFFLE_SALT), k)
            }
            _ => Vec::new(),
        }
    }

    pub(crate) fn recommend(self, corpus: &Corpus, seed: &Record, k: usize) -> Vec<String> {
        let datasets = corpus
            .records()
            .iter()
            .enumerate()
            .filter(|(_, r)| r.kind == RecordKind::ResearchData);
        match self {
            BuiltinRanker::TopicJaccard => {
                let scored = datasets
                    .map(|(doc, r)| (doc as u32, jaccard(&seed.topics, &r.topics)))
                    .filter(|&(_, s)| s > 0.0)
                    .collect();
                top_k(corpus, scored, k, Order::Descending)
            }
            BuiltinRanker::AbstractTfidfCosine => {
                let seed_vec = tfidf_vector(corpus, &seed.abstract_text);
                let seed_norm = norm(&seed_vec);
                if seed_norm == 0.0 {
                    return Vec::new();
                }
                let scored = datasets
                    .filter_map(|(doc, r)| {
                        let v = tfidf_vector(corpus, &r.abstract_text);
                        let n = norm(&v);
                        if n == 0.0 {
                            return None;
                        }
                        let dot: f64 = seed_vec
                            .iter()
                            .filter_map(|(t, w)| v.get(t).map(|x| w * x))
                            .sum();
                        (dot > 0.0).then(|| (doc as u32, dot / (seed_norm * n)))
                    })
                    .collect();
                top_k(corpus, scored, k, Order::Descending)
            }
            BuiltinRanker::RandomDatasets => {
                let mut ids: Vec<&str> = datasets.map(|(_, r)| r.id.as_str()).collect();
                ids.sort_unstable();
                shuffled_prefix(ids, mix_seed(fnv1a64(&seed.id), SHUFFLE_SALT), k)
            }
            _ => Vec::new(),
        }
    }
}

/// Inverse document frequency: `ln(1 + (N - df + 0.5) / (df + 0.5))`.
pub fn bm25_idf(total_docs: usize, doc_freq: usize) -> f64 {
    let n = total_docs as f64;
    let df = doc_freq as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

/// Saturated, length-normalised term frequency.
pub fn bm25_tf_part(tf: f64, doc_len: f64, avg_len: f64) -> f64 {
    tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * (1.0 - BM25_B + BM25_B * doc_len / avg_len))
}

/// BM25 score of one record. Terms are summed as given (callers dedupe);
/// terms absent from the record contribute nothing.
pub fn score_bm25(corpus: &Corpus, record_id: &str, query_terms: &[String]) -> Result<f64, SystemError> {
    let doc = corpus
        .doc_number(record_id)
        .ok_or_else(|| SystemError::UnknownRecord(record_id.to_owned()))?;
    let len = f64::from(corpus.doc_length(doc));
    let mut score = 0.0;
    for term in query_terms {
        let tf = corpus.term_freq(term, doc);
        if tf > 0 {
            score += bm25_idf(corpus.len(), corpus.doc_freq(term))
                * bm25_tf_part(f64::from(tf), len, corpus.avg_doc_length());
        }
    }
    Ok(score)
}

/// BM25 over the postings of every query term, accumulated in term order.
pub fn bm25_scores(corpus: &Corpus, terms: &[String]) -> Vec<(u32, f64)> {
    let mut acc: HashMap<u32, f64> = HashMap::new();
    let avg = corpus.avg_doc_length();
    for term in terms {
        let postings = corpus.postings(term);
        if postings.is_empty() {
            continue;
        }
        let idf = bm25_idf(corpus.len(), postings.len());
        for p in postings {
            let len = f64::from(corpus.doc_length(p.doc));
            *acc.entry(p.doc).or_insert(0.0) += idf * bm25_tf_part(f64::from(p.tf), len, avg);
        }
    }
    acc.into_iter().collect()
}

fn recency_factor(record: &Record, reference_year: Option<i32>) -> f64 {
    match (record.year, reference_year) {
        (Some(year), Some(reference)) => {
            let age = f64::from((reference - year).max(0));
            1.0 / (1.0 + age / RECENCY_HALF_LIFE_YEARS)
        }
        _ => 1.0,
    }
}

fn tfidf_cosine_scores(corpus: &Corpus, terms: &[String]) -> Vec<(u32, f64)> {
    let norms = corpus.tfidf_norms();
    let weights: Vec<(&String, f64)> = terms
        .iter()
        .map(|t| (t, corpus.tfidf_idf(t)))
        .filter(|&(_, w)| w > 0.0)
        .collect();
    let query_norm = weights.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    if query_norm == 0.0 {
        return Vec::new();
    }
    let mut acc: HashMap<u32, f64> = HashMap::new();
    for (term, qw) in weights {
        for p in corpus.postings(term) {
            *acc.entry(p.doc).or_insert(0.0) += qw * (1.0 + f64::from(p.tf).ln()) * qw;
        }
    }
    acc.into_iter()
        .filter(|&(doc, _)| norms[doc as usize] > 0.0)
        .map(|(doc, dot)| (doc, dot / (query_norm * norms[doc as usize])))
        .collect()
}

fn tfidf_vector(corpus: &Corpus, text: &str) -> HashMap<String, f64> {
    let mut tf: HashMap<String, u32> = HashMap::new();
    for token in tokenize(text) {
        *tf.entry(token).or_default() += 1;
    }
    tf.into_iter()
        .map(|(t, n)| {
            let w = (1.0 + f64::from(n).ln()) * corpus.tfidf_idf(&t);
            (t, w)
        })
        .filter(|(_, w)| *w > 0.0)
        .collect()
}

fn norm(v: &HashMap<String, f64>) -> f64 {
    v.values().map(|w| w * w).sum::<f64>().sqrt()
}

pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let inter = a.intersection(b).count();
    if inter == 0 {
        return 0.0;
    }
    inter as f64 / (a.len() + b.len() - inter) as f64
}

#[derive(Clone, Copy)]
enum Order {
    Descending,
    Ascending,
}

/// Sort by score (in `order`), ties by ascending record id, and keep `k`.
fn top_k(corpus: &Corpus, mut scored: Vec<(u32, f64)>, k: usize, order: Order) -> Vec<String> {
    let cmp = |a: &(u32, f64), b: &(u32, f64)| -> Ordering {
        let by_score = match order {
            Order::Descending => b.1.total_cmp(&a.1),
            Order::Ascending => a.1.total_cmp(&b.1),
        };
        by_score.then_with(|| corpus.record(a.0).id.cmp(&corpus.record(b.0).id))
    };
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, cmp);
        scored.truncate(k);
    }
    scored.sort_unstable_by(cmp);
    scored
        .into_iter()
        .map(|(doc, _)| corpus.record(doc).id.clone())
        .collect()
}

fn shuffled_prefix(mut ids: Vec<&str>, seed: u64, k: usize) -> Vec<String> {
    SplitMix64::new(seed).shuffle(&mut ids);
    ids.into_iter().take(k).map(str::to_owned).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, title: &str) -> Record {
        Record::new(id, RecordKind::Publication, title)
    }

    fn terms(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn single_doc_bm25_value() {
        let c = Corpus::from_records("s", vec![doc("d1", "covid vaccine")]).unwrap();
        let s = score_bm25(&c, "d1", &terms(&["covid"])).unwrap();
        // idf = ln(4/3), tf part = 2.2 / 2.2 = 1
        assert!((s - (4.0f64 / 3.0).ln()).abs() < 1e-12);
        assert!((s - 0.287682).abs() < 1e-6);
        assert_eq!(BuiltinRanker::Bm25.rank(&c, "covid", 10), vec!["d1"]);
    }

    #[test]
    fn missing_term_scores_zero() {
        let c = Corpus::from_records("s", vec![doc("d1", "covid vaccine")]).unwrap();
        assert_eq!(score_bm25(&c, "d1", &terms(&["malaria"])).unwrap(), 0.0);
        assert_eq!(score_bm25(&c, "d1", &[]).unwrap(), 0.0);
        assert!(BuiltinRanker::Bm25.rank(&c, "malaria", 10).is_empty());
    }

    #[test]
    fn higher_tf_ranks_first() {
        // equal lengths: d2 has the term twice, d3 once, d1 not at all
        let c = Corpus::from_records(
            "s",
            vec![
                doc("d1", "alpha beta gamma"),
                doc("d2", "covid covid gamma"),
                doc("d3", "covid beta gamma"),
            ],
        )
        .unwrap();
        assert_eq!(BuiltinRanker::Bm25.rank(&c, "covid", 10), vec!["d2", "d3"]);
        let s2 = score_bm25(&c, "d2", &terms(&["covid"])).unwrap();
        let s3 = score_bm25(&c, "d3", &terms(&["covid"])).unwrap();
        assert!(s2 > s3);
    }

    #[test]
    fn doubling_tf_increases_tf_part() {
        for tf in [1.0, 2.0, 5.0, 17.0] {
            assert!(bm25_tf_part(2.0 * tf, 10.0, 10.0) > bm25_tf_part(tf, 10.0, 10.0));
        }
    }

    #[test]
    fn ties_break_by_id() {
        let c = Corpus::from_records(
            "s",
            vec![doc("b", "covid x"), doc("a", "covid y"), doc("c", "covid z")],
        )
        .unwrap();
        assert_eq!(BuiltinRanker::Bm25.rank(&c, "covid", 10), vec!["a", "b", "c"]);
        assert_eq!(BuiltinRanker::ReversedBm25.rank(&c, "covid", 2), vec!["a", "b"]);
    }

    #[test]
    fn reversed_puts_weakest_match_first() {
        let c = Corpus::from_records(
            "s",
            vec![doc("d2", "covid covid gamma"), doc("d3", "covid beta gamma")],
        )
        .unwrap();
        assert_eq!(BuiltinRanker::ReversedBm25.rank(&c, "covid", 10), vec!["d3", "d2"]);
    }

    #[test]
    fn recency_prefers_newer_among_equals() {
        let mut old = doc("a", "covid vaccine");
        old.year = Some(1990);
        let mut new = doc("b", "covid vaccine");
        new.year = Some(2020);
        let c = Corpus::from_records("s", vec![old, new]).unwrap();
        assert_eq!(BuiltinRanker::RecencyBm25.rank(&c, "covid", 10), vec!["b", "a"]);
        assert_eq!(BuiltinRanker::Bm25.rank(&c, "covid", 10), vec!["a", "b"]);
    }

    #[test]
    fn tfidf_cosine_prefers_focused_doc() {
        let c = Corpus::from_records(
            "s",
            vec![
                doc("a", "covid"),
                doc("b", "covid vaccine trial results study"),
                doc("c", "malaria"),
            ],
        )
        .unwrap();
        assert_eq!(BuiltinRanker::TfidfCosine.rank(&c, "covid", 10), vec!["a", "b"]);
    }

    #[test]
    fn shuffle_is_stable_per_query() {
        let recs = (0..30).map(|i| doc(&format!("d{i:02}"), "covid")).collect();
        let c = Corpus::from_records("s", recs).unwrap();
        let a = BuiltinRanker::RandomShuffle.rank(&c, "covid", 10);
        let b = BuiltinRanker::RandomShuffle.rank(&c, "covid", 10);
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
    }

    fn topics(list: &[&str]) -> BTreeSet<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn jaccard_recommendation_order() {
        let mut seed = doc("p", "seed");
        seed.topics = topics(&["a", "b"]);
        let mut r1 = Record::new("r1", RecordKind::ResearchData, "one");
        r1.topics = topics(&["a", "b"]);
        let mut r2 = Record::new("r2", RecordKind::ResearchData, "two");
        r2.topics = topics(&["b", "c"]);
        let mut r3 = Record::new("r3", RecordKind::ResearchData, "three");
        r3.topics = topics(&["z"]);
        assert!((jaccard(&seed.topics, &r2.topics) - 1.0 / 3.0).abs() < 1e-15);
        let c = Corpus::from_records("s", vec![seed.clone(), r2, r1, r3]).unwrap();
        assert_eq!(BuiltinRanker::TopicJaccard.recommend(&c, &seed, 10), vec!["r1", "r2"]);
    }

    #[test]
    fn empty_seed_topics_recommend_nothing() {
        let seed = doc("p", "seed");
        let mut r1 = Record::new("r1", RecordKind::ResearchData, "one");
        r1.topics = topics(&["a"]);
        let c = Corpus::from_records("s", vec![seed.clone(), r1]).unwrap();
        assert!(BuiltinRanker::TopicJaccard.recommend(&c, &seed, 10).is_empty());
    }

    #[test]
    fn no_datasets_recommend_nothing() {
        let mut seed = doc("p", "seed");
        seed.topics = topics(&["a"]);
        seed.abstract_text = "survey of voting".into();
        let c = Corpus::from_records("s", vec![seed.clone(), doc("p2", "other")]).unwrap();
        for r in [
            BuiltinRanker::TopicJaccard,
            BuiltinRanker::AbstractTfidfCosine,
            BuiltinRanker::RandomDatasets,
        ] {
            assert!(r.recommend(&c, &seed, 10).is_empty());
        }
    }

    #[test]
    fn abstract_cosine_matches_shared_words() {
        let mut seed = doc("p", "seed");
        seed.abstract_text = "voting turnout survey".into();
        let mut r1 = Record::new("r1", RecordKind::ResearchData, "x");
        r1.abstract_text = "turnout voting".into();
        let mut r2 = Record::new("r2", RecordKind::ResearchData, "y");
        r2.abstract_text = "fertility".into();
        let c = Corpus::from_records("s", vec![seed.clone(), r1, r2]).unwrap();
        assert_eq!(
            BuiltinRanker::AbstractTfidfCosine.recommend(&c, &seed, 10),
            vec!["r1"]
        );
    }
}
