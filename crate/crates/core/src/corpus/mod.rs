//! Site corpora: records, the inverted index over them, and head queries.

pub mod synth;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("corpus is empty")]
    Empty,
    #[error("corpus has no indexable tokens")]
    NoIndexableText,
    #[error("missing/empty {}", .0.join(", "))]
    MissingFields(Vec<&'static str>),
    #[error("unknown kind {0:?} (expected publication or research_data)")]
    UnknownKind(String),
    #[error("invalid field {field}: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error("duplicate query id {0:?}")]
    DuplicateQuery(String),
    #[error("head-query file is empty")]
    NoQueries,
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Publication,
    ResearchData,
}

impl RecordKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::Publication => "publication",
            RecordKind::ResearchData => "research_data",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "publication" => Some(RecordKind::Publication),
            "research_data" => Some(RecordKind::ResearchData),
            _ => None,
        }
    }
}

/// A corpus item: a publication or a research dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub kind: RecordKind,
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
    #[serde(default)]
    pub topics: BTreeSet<String>,
    #[serde(default)]
    pub language: String,
    #[serde(default)]
    pub year: Option<i32>,
    #[serde(default)]
    pub extra: BTreeMap<String, String>,
}

impl Record {
    pub fn new(id: impl Into<String>, kind: RecordKind, title: impl Into<String>) -> Self {
        Record {
            id: id.into(),
            kind,
            title: title.into(),
            abstract_text: String::new(),
            topics: BTreeSet::new(),
            language: String::new(),
            year: None,
            extra: BTreeMap::new(),
        }
    }

    /// Tokens of every indexed field: title, abstract, then each topic.
    pub fn indexed_tokens(&self) -> Vec<String> {
        let mut tokens = tokenize(&self.title);
        tokens.extend(tokenize(&self.abstract_text));
        for topic in &self.topics {
            tokens.extend(tokenize(topic));
        }
        tokens
    }
}

pub const MIN_YEAR: i32 = 1800;
pub const MAX_YEAR: i32 = 2100;

/// Lowercase, then split on every non-alphanumeric character and drop empties.
/// No stemming, no stopwords.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Tokenized query with repeated terms removed (first occurrence wins).
pub fn query_terms(text: &str) -> Vec<String> {
    let mut seen = BTreeSet::new();
    tokenize(text)
        .into_iter()
        .filter(|t| seen.insert(t.clone()))
        .collect()
}

const KNOWN_FIELDS: [&str; 8] = [
    "id", "kind", "title", "abstract", "topics", "language", "year", "extra",
];

/// Check a parsed record candidate and turn it into a [`Record`].
/// Keys outside the schema are kept in `extra`.
pub fn validate_record(raw: &Value) -> Result<Record, CorpusError> {
    let obj = raw.as_object().ok_or(CorpusError::InvalidField {
        field: "record",
        reason: "expected an object".into(),
    })?;

    let non_empty_str = |key: &str| {
        obj.get(key)
            .and_then(Value::as_str)
            .filter(|s| !s.trim().is_empty())
    };
    let missing: Vec<&'static str> = ["id", "kind", "title"]
        .into_iter()
        .filter(|k| non_empty_str(k).is_none())
        .collect();
    if !missing.is_empty() {
        return Err(CorpusError::MissingFields(missing));
    }
    let kind_text = non_empty_str("kind").unwrap_or_default();
    let kind =
        RecordKind::parse(kind_text).ok_or_else(|| CorpusError::UnknownKind(kind_text.into()))?;
    let mut record = Record::new(
        non_empty_str("id").unwrap_or_default(),
        kind,
        non_empty_str("title").unwrap_or_default(),
    );

    match obj.get("abstract") {
        None | Some(Value::Null) => {}
        Some(Value::String(s)) => record.abstract_text = s.clone(),
        Some(_) => return Err(invalid("abstract", "expected a string")),
    }
    match obj.get("topics") {
        None | Some(Value::Null) => {}
        Some(Value::Array(items)) => {
            for item in items {
                let topic = item
                    .as_str()
                    .ok_or_else(|| invalid("topics", "expected an array of strings"))?;
                record.topics.insert(topic.to_owned());
            }
        }
        Some(_) => return Err(invalid("topics", "expected an array of strings")),
    }
    match obj.get("language") {
        None | Some(Value::Null) => {}
        Some(Value::String(s)) => {
            if !s.is_empty() && !(s.len() == 2 && s.bytes().all(|b| b.is_ascii_lowercase())) {
                return Err(invalid("language", format!("{s:?} is not an ISO-639-1 code")));
            }
            record.language = s.clone();
        }
        Some(_) => return Err(invalid("language", "expected a string")),
    }
    match obj.get("year") {
        None | Some(Value::Null) => {}
        Some(v) => {
            let year = v
                .as_i64()
                .ok_or_else(|| invalid("year", "expected an integer"))?;
            if !(i64::from(MIN_YEAR)..=i64::from(MAX_YEAR)).contains(&year) {
                return Err(invalid(
                    "year",
                    format!("{year} outside [{MIN_YEAR}, {MAX_YEAR}]"),
                ));
            }
            record.year = Some(year as i32);
        }
    }
    match obj.get("extra") {
        None | Some(Value::Null) => {}
        Some(Value::Object(map)) => {
            for (key, value) in map {
                record.extra.insert(key.clone(), value_to_string(value));
            }
        }
        Some(_) => return Err(invalid("extra", "expected an object")),
    }
    for (key, value) in obj {
        if !KNOWN_FIELDS.contains(&key.as_str()) {
            record.extra.insert(key.clone(), value_to_string(value));
        }
    }
    Ok(record)
}

fn invalid(field: &'static str, reason: impl Into<String>) -> CorpusError {
    CorpusError::InvalidField {
        field,
        reason: reason.into(),
    }
}

fn value_to_string(value: &Value) -> String {
    match value {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// One `(record, term frequency)` entry of a postings list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// An immutable, indexed document collection for one site.
#[derive(Debug)]
pub struct Corpus {
    site_id: String,
    records: Vec<Record>,
    by_id: HashMap<String, u32>,
    index: HashMap<String, Vec<Posting>>,
    doc_lengths: Vec<u32>,
    avg_doc_length: f64,
    max_year: Option<i32>,
    tfidf_norms: OnceLock<Vec<f64>>,
}

impl Corpus {
    /// Index `records` (title + abstract + topics). Postings are sorted by
    /// internal document number.
    pub fn from_records(site_id: impl Into<String>, records: Vec<Record>) -> Result<Self, CorpusError> {
        if records.is_empty() {
            return Err(CorpusError::Empty);
        }
        let mut by_id = HashMap::with_capacity(records.len());
        let mut index: HashMap<String, Vec<Posting>> = HashMap::new();
        let mut doc_lengths = Vec::with_capacity(records.len());
        let mut total: u64 = 0;
        for (doc, record) in records.iter().enumerate() {
            if by_id.insert(record.id.clone(), doc as u32).is_some() {
                return Err(CorpusError::DuplicateId(record.id.clone()));
            }
            let tokens = record.indexed_tokens();
            doc_lengths.push(tokens.len() as u32);
            total += tokens.len() as u64;
            let mut tfs: HashMap<String, u32> = HashMap::new();
            for token in tokens {
                *tfs.entry(token).or_default() += 1;
            }
            for (term, tf) in tfs {
                index.entry(term).or_default().push(Posting {
                    doc: doc as u32,
                    tf,
                });
            }
        }
        if total == 0 {
            return Err(CorpusError::NoIndexableText);
        }
        let avg_doc_length = total as f64 / records.len() as f64;
        let max_year = records.iter().filter_map(|r| r.year).max();
        Ok(Corpus {
            site_id: site_id.into(),
            records,
            by_id,
            index,
            doc_lengths,
            avg_doc_length,
            max_year,
            tfidf_norms: OnceLock::new(),
        })
    }

    pub fn site_id(&self) -> &str {
        &self.site_id
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn doc_number(&self, id: &str) -> Option<u32> {
        self.by_id.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&Record> {
        self.doc_number(id).map(|doc| &self.records[doc as usize])
    }

    pub fn record(&self, doc: u32) -> &Record {
        &self.records[doc as usize]
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.index.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    /// Frequency of `term` in document `doc` (0 when absent).
    pub fn term_freq(&self, term: &str, doc: u32) -> u32 {
        let postings = self.postings(term);
        postings
            .binary_search_by_key(&doc, |p| p.doc)
            .map(|i| postings[i].tf)
            .unwrap_or(0)
    }

    pub fn doc_length(&self, doc: u32) -> u32 {
        self.doc_lengths[doc as usize]
    }

    pub fn doc_length_of(&self, id: &str) -> Option<u32> {
        self.doc_number(id).map(|doc| self.doc_length(doc))
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    /// Newest publication year in the corpus; reference point for recency.
    pub fn max_year(&self) -> Option<i32> {
        self.max_year
    }

    pub fn count_kind(&self, kind: RecordKind) -> usize {
        self.records.iter().filter(|r| r.kind == kind).count()
    }

    /// Smoothed inverse document frequency used by the cosine rankers.
    pub fn tfidf_idf(&self, term: &str) -> f64 {
        let df = self.doc_freq(term);
        if df == 0 {
            0.0
        } else {
            (1.0 + self.len() as f64 / df as f64).ln()
        }
    }

    /// Euclidean norm of each document's `(1 + ln tf) * idf` vector.
    pub fn tfidf_norms(&self) -> &[f64] {
        self.tfidf_norms.get_or_init(|| {
            let mut sq = vec![0.0f64; self.records.len()];
            for (term, postings) in &self.index {
                let idf = self.tfidf_idf(term);
                for p in postings {
                    let w = (1.0 + f64::from(p.tf).ln()) * idf;
                    sq[p.doc as usize] += w * w;
                }
            }
            sq.into_iter().map(f64::sqrt).collect()
        })
    }
}

/// Read a line-delimited corpus file and build its index.
pub fn load_corpus(path: &Path, site_id: &str) -> Result<Corpus, CorpusError> {
    let file = fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: Value = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        let record = validate_record(&raw).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if !seen.insert(record.id.clone()) {
            return Err(CorpusError::DuplicateId(record.id));
        }
        records.push(record);
    }
    Corpus::from_records(site_id, records)
}

/// Serialize one record as a single flat JSON line (no trailing newline).
pub fn record_to_line(record: &Record) -> String {
    let mut obj = Map::new();
    obj.insert("id".into(), Value::from(record.id.clone()));
    obj.insert("kind".into(), Value::from(record.kind.as_str()));
    obj.insert("title".into(), Value::from(record.title.clone()));
    obj.insert("abstract".into(), Value::from(record.abstract_text.clone()));
    obj.insert(
        "topics".into(),
        Value::from(record.topics.iter().cloned().collect::<Vec<_>>()),
    );
    obj.insert("language".into(), Value::from(record.language.clone()));
    obj.insert(
        "year".into(),
        record.year.map(Value::from).unwrap_or(Value::Null),
    );
    obj.insert(
        "extra".into(),
        Value::Object(
            record
                .extra
                .iter()
                .map(|(k, v)| (k.clone(), Value::from(v.clone())))
                .collect(),
        ),
    );
    Value::Object(obj).to_string()
}

pub fn write_corpus(path: &Path, records: &[Record]) -> Result<(), CorpusError> {
    let file = fs::File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for record in records {
        writeln!(out, "{}", record_to_line(record)).map_err(|e| CorpusError::io(path, e))?;
    }
    out.flush().map_err(|e| CorpusError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadQuery {
    pub query_id: String,
    pub text: String,
    pub frequency_rank: u32,
}

/// The head of a site's query (or seed-item) demand, most frequent first.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HeadQuerySet {
    queries: Vec<HeadQuery>,
    by_id: HashMap<String, usize>,
}

impl HeadQuerySet {
    /// Ranks are assigned from list order, starting at 1.
    pub fn from_pairs<I, S, T>(pairs: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        let mut set = HeadQuerySet::default();
        for (id, text) in pairs {
            let query_id = id.into();
            if set.by_id.contains_key(&query_id) {
                return Err(CorpusError::DuplicateQuery(query_id));
            }
            set.by_id.insert(query_id.clone(), set.queries.len());
            set.queries.push(HeadQuery {
                query_id,
                text: text.into(),
                frequency_rank: set.queries.len() as u32 + 1,
            });
        }
        Ok(set)
    }

    pub fn queries(&self) -> &[HeadQuery] {
        &self.queries
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn get(&self, query_id: &str) -> Option<&HeadQuery> {
        self.by_id.get(query_id).map(|&i| &self.queries[i])
    }
}

/// Read `query_id<TAB>text` lines; blank lines are skipped and ranks follow
/// file order.
pub fn load_head_queries(path: &Path) -> Result<HeadQuerySet, CorpusError> {
    let text = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (id, query) = line.split_once('\t').ok_or(CorpusError::Malformed {
            line: i + 1,
            message: "expected query_id<TAB>text".into(),
        })?;
        if id.trim().is_empty() {
            return Err(CorpusError::Malformed {
                line: i + 1,
                message: "empty query id".into(),
            });
        }
        pairs.push((id.trim().to_owned(), query.to_owned()));
    }
    if pairs.is_empty() {
        return Err(CorpusError::NoQueries);
    }
    HeadQuerySet::from_pairs(pairs)
}

pub fn write_head_queries(path: &Path, queries: &HeadQuerySet) -> Result<(), CorpusError> {
    let mut out = String::new();
    for q in queries.queries() {
        out.push_str(&q.query_id);
        out.push('\t');
        out.push_str(&q.text);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CorpusError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let path = dir.path().join(name);
        fs::write(&path, body).unwrap();
        path
    }

    #[test]
    fn single_record_tokenization() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "c.jsonl",
            r#"{"id":"d1","kind":"publication","title":"covid vaccine","abstract":""}"#,
        );
        let corpus = load_corpus(&path, "s").unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.postings("covid"), &[Posting { doc: 0, tf: 1 }]);
        assert_eq!(corpus.postings("vaccine").len(), 1);
        assert_eq!(corpus.doc_length_of("d1"), Some(2));
        assert_eq!(corpus.avg_doc_length(), 2.0);
    }

    #[test]
    fn tokenizer_lowercases_and_splits() {
        assert_eq!(
            tokenize("COVID-19: mRNA  vaccines!"),
            vec!["covid", "19", "mrna", "vaccines"]
        );
        assert!(tokenize("  --  ").is_empty());
        assert_eq!(query_terms("a b a c b"), vec!["a", "b", "c"]);
    }

    #[test]
    fn minimal_record_validates() {
        let r = validate_record(&json!({"id": "x", "kind": "publication", "title": "t"})).unwrap();
        assert!(r.abstract_text.is_empty());
        assert!(r.topics.is_empty());
        assert_eq!(r.year, None);
    }

    #[test]
    fn empty_id_is_rejected() {
        let err = validate_record(&json!({"id": "", "kind": "publication", "title": "t"}))
            .unwrap_err();
        assert_eq!(err.to_string(), "missing/empty id");
        let err = validate_record(&json!({"kind": "publication"})).unwrap_err();
        assert_eq!(err.to_string(), "missing/empty id, title");
    }

    #[test]
    fn dataset_is_not_a_kind() {
        let err =
            validate_record(&json!({"id": "x", "kind": "dataset", "title": "t"})).unwrap_err();
        assert!(matches!(err, CorpusError::UnknownKind(k) if k == "dataset"));
    }

    #[test]
    fn unknown_fields_go_to_extra() {
        let r = validate_record(&json!({
            "id": "x", "kind": "research_data", "title": "t",
            "extra": {"authors": "A"}, "collection_method": "survey", "waves": 3
        }))
        .unwrap();
        assert_eq!(r.extra["authors"], "A");
        assert_eq!(r.extra["collection_method"], "survey");
        assert_eq!(r.extra["waves"], "3");
    }

    #[test]
    fn year_range_enforced() {
        let bad = json!({"id": "x", "kind": "publication", "title": "t", "year": 1700});
        assert!(matches!(
            validate_record(&bad),
            Err(CorpusError::InvalidField { field: "year", .. })
        ));
        let ok = json!({"id": "x", "kind": "publication", "title": "t", "year": 2100});
        assert_eq!(validate_record(&ok).unwrap().year, Some(2100));
    }

    #[test]
    fn malformed_line_names_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "c.jsonl",
            "{\"id\":\"a\",\"kind\":\"publication\",\"title\":\"x\"}\n{not json\n",
        );
        let err = load_corpus(&path, "s").unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 2, .. }), "{err}");
    }

    #[test]
    fn duplicate_id_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let line = r#"{"id":"dup","kind":"publication","title":"x"}"#;
        let path = write(&dir, "c.jsonl", &format!("{line}\n{line}\n"));
        let err = load_corpus(&path, "s").unwrap_err();
        assert!(err.to_string().contains("dup"));
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "c.jsonl", "\n");
        assert!(matches!(load_corpus(&path, "s"), Err(CorpusError::Empty)));
    }

    #[test]
    fn head_queries_ranked_by_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "q.tsv", "q1\tcovid\n\nq2\tvaccine trial\n\n\nq3\tmalaria\n");
        let set = load_head_queries(&path).unwrap();
        let ranks: Vec<u32> = set.queries().iter().map(|q| q.frequency_rank).collect();
        assert_eq!(ranks, vec![1, 2, 3]);
        assert_eq!(set.get("q2").unwrap().text, "vaccine trial");
    }

    #[test]
    fn head_queries_reject_duplicates_and_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "q.tsv", "q1\ta\nq1\tb\n");
        let err = load_head_queries(&path).unwrap_err();
        assert!(err.to_string().contains("q1"));
        let path = write(&dir, "e.tsv", "");
        assert!(matches!(load_head_queries(&path), Err(CorpusError::NoQueries)));
    }
}
