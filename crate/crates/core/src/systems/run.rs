//! Precomputed runs in the six-column TREC format:
//! `query_id  Q0  record_id  rank  score  tag`.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use super::{RankedList, SystemError};

/// Read a run file into one ranked list per query, ordered by the stated rank.
/// Ranks must be exactly `1..=n` per query. An empty file is a valid run that
/// abstains on every query.
pub fn load_precomputed_run(path: &Path) -> Result<BTreeMap<String, RankedList>, SystemError> {
    let err = |message: String| SystemError::Run {
        path: path.to_path_buf(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    parse_run(&text).map_err(err)
}

pub fn parse_run(text: &str) -> Result<BTreeMap<String, RankedList>, String> {
    let mut per_query: BTreeMap<String, Vec<(u32, String)>> = BTreeMap::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.is_empty() {
            continue;
        }
        if cols.len() != 6 {
            return Err(format!("line {}: expected 6 columns, found {}", i + 1, cols.len()));
        }
        let (qid, doc) = (cols[0], cols[2]);
        let rank: u32 = cols[3]
            .parse()
            .map_err(|_| format!("line {}: rank {:?} is not a positive integer", i + 1, cols[3]))?;
        cols[4]
            .parse::<f64>()
            .map_err(|_| format!("line {}: score {:?} is not a number", i + 1, cols[4]))?;
        if !seen.insert((qid.to_owned(), doc.to_owned())) {
            return Err(format!("line {}: duplicate ({qid}, {doc})", i + 1));
        }
        per_query
            .entry(qid.to_owned())
            .or_default()
            .push((rank, doc.to_owned()));
    }

    let mut runs = BTreeMap::new();
    for (qid, mut entries) in per_query {
        entries.sort_by_key(|(rank, _)| *rank);
        for (expected, (rank, _)) in (1u32..).zip(&entries) {
            if *rank != expected {
                return Err(format!("query {qid}: non-consecutive ranks (expected {expected}, found {rank})"));
            }
        }
        let ids = entries.into_iter().map(|(_, doc)| doc).collect();
        runs.insert(qid.clone(), RankedList::new("", &qid, ids));
    }
    Ok(runs)
}
