//! Experimental systems ("participants") and the site baselines.
//!
//! A system is described by a [`SystemDescriptor`] and turned into a runnable
//! [`System`]. Three backends exist: builtin rankers computed in-process,
//! remote participants reached over HTTP, and precomputed TREC-style runs.

pub mod builtin;
pub mod remote;
pub mod run;

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;
use std::time::{Duration, SystemTime};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, RecordKind};

pub use builtin::{score_bm25, BuiltinRanker, BM25_B, BM25_K1};
pub use remote::RemoteParticipant;
pub use run::load_precomputed_run;

/// Default result-list cutoff.
pub const DEFAULT_K: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum SystemError {
    #[error("system {system} unavailable: {reason}")]
    Unavailable { system: String, reason: String },
    #[error("system {system} returned an invalid response: {reason}")]
    InvalidResponse { system: String, reason: String },
    #[error("system {system} has no result for {subject}")]
    Abstained { system: String, subject: String },
    #[error("unknown record {0:?}")]
    UnknownRecord(String),
    #[error("record {id:?} has kind {kind}, expected a publication seed")]
    WrongKind { id: String, kind: &'static str },
    #[error("system {system} serves {actual}, not {expected}")]
    WrongTask {
        system: String,
        expected: Task,
        actual: Task,
    },
    #[error("k must be at least 1")]
    InvalidCutoff,
    #[error("invalid system descriptor: {0}")]
    Descriptor(String),
    #[error("{path}: {message}")]
    Run { path: PathBuf, message: String },
}

impl SystemError {
    /// Errors that make a live session fall back to the baseline.
    pub fn is_participant_failure(&self) -> bool {
        matches!(
            self,
            SystemError::Unavailable { .. }
                | SystemError::InvalidResponse { .. }
                | SystemError::Abstained { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    AdhocRetrieval,
    DatasetRecommendation,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::AdhocRetrieval => "adhoc_retrieval",
            Task::DatasetRecommendation => "dataset_recommendation",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemMode {
    Builtin,
    Remote,
    Precomputed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemDescriptor {
    pub system_id: String,
    pub task: Task,
    pub mode: SystemMode,
    /// Which builtin ranker to run (builtin mode only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<BuiltinRanker>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub address: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_path: Option<PathBuf>,
}

impl SystemDescriptor {
    pub fn builtin(system_id: impl Into<String>, ranker: BuiltinRanker) -> Self {
        SystemDescriptor {
            system_id: system_id.into(),
            task: ranker.task(),
            mode: SystemMode::Builtin,
            builtin: Some(ranker),
            address: None,
            run_path: None,
        }
    }

    pub fn remote(system_id: impl Into<String>, task: Task, address: impl Into<String>) -> Self {
        SystemDescriptor {
            system_id: system_id.into(),
            task,
            mode: SystemMode::Remote,
            builtin: None,
            address: Some(address.into()),
            run_path: None,
        }
    }

    pub fn precomputed(system_id: impl Into<String>, task: Task, run_path: impl Into<PathBuf>) -> Self {
        SystemDescriptor {
            system_id: system_id.into(),
            task,
            mode: SystemMode::Precomputed,
            builtin: None,
            address: None,
            run_path: Some(run_path.into()),
        }
    }

    pub fn validate(&self) -> Result<(), SystemError> {
        let fail = |msg: &str| Err(SystemError::Descriptor(format!("{}: {msg}", self.system_id)));
        if self.system_id.trim().is_empty() {
            return Err(SystemError::Descriptor("empty system_id".into()));
        }
        match self.mode {
            SystemMode::Builtin => match self.builtin {
                None => fail("builtin mode needs a builtin ranker"),
                Some(r) if r.task() != self.task => fail("builtin ranker serves the other task"),
                Some(_) => Ok(()),
            },
            SystemMode::Remote if self.address.as_deref().is_none_or(str::is_empty) => {
                fail("remote mode needs an address")
            }
            SystemMode::Precomputed if self.run_path.is_none() => {
                fail("precomputed mode needs a run_path")
            }
            _ => Ok(()),
        }
    }
}

/// An ordered, duplicate-free list of record ids produced by one system.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub source_system: String,
    pub query_or_item: String,
    pub entries: Vec<String>,
    pub produced_at: SystemTime,
}

impl RankedList {
    pub fn new(source_system: &str, query_or_item: &str, entries: Vec<String>) -> Self {
        RankedList {
            source_system: source_system.to_owned(),
            query_or_item: query_or_item.to_owned(),
            entries,
            produced_at: SystemTime::now(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A head query as handed to a ranker.
#[derive(Debug, Clone, Copy)]
pub struct Query<'a> {
    pub id: &'a str,
    pub text: &'a str,
}

enum Backend {
    Builtin(BuiltinRanker),
    Remote(RemoteParticipant),
    Precomputed(BTreeMap<String, RankedList>),
}

/// A runnable system.
pub struct System {
    descriptor: SystemDescriptor,
    backend: Backend,
}

impl std::fmt::Debug for System {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("System")
            .field("descriptor", &self.descriptor)
            .finish_non_exhaustive()
    }
}

impl System {
    /// Validate the descriptor and prepare its backend. Precomputed runs are
    /// read here.
    pub fn from_descriptor(descriptor: SystemDescriptor) -> Result<Self, SystemError> {
        Self::with_timeout(descriptor, remote::DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(descriptor: SystemDescriptor, timeout: Duration) -> Result<Self, SystemError> {
        descriptor.validate()?;
        let backend = match descriptor.mode {
            SystemMode::Builtin => Backend::Builtin(descriptor.builtin.expect("validated")),
            SystemMode::Remote => Backend::Remote(RemoteParticipant::new(
                &descriptor.system_id,
                descriptor.address.as_deref().expect("validated"),
                timeout,
            )),
            SystemMode::Precomputed => {
                let path = descriptor.run_path.as_deref().expect("validated");
                let mut runs = load_precomputed_run(path)?;
                for list in runs.values_mut() {
                    list.source_system = descriptor.system_id.clone();
                }
                Backend::Precomputed(runs)
            }
        };
        Ok(System {
            descriptor,
            backend,
        })
    }

    pub fn descriptor(&self) -> &SystemDescriptor {
        &self.descriptor
    }

    pub fn id(&self) -> &str {
        &self.descriptor.system_id
    }

    pub fn is_remote(&self) -> bool {
        matches!(self.backend, Backend::Remote(_))
    }

    fn expect_task(&self, task: Task) -> Result<(), SystemError> {
        if self.descriptor.task != task {
            return Err(SystemError::WrongTask {
                system: self.id().to_owned(),
                expected: task,
                actual: self.descriptor.task,
            });
        }
        Ok(())
    }

    /// Ad-hoc retrieval: at most `k` records for `query`, best first.
    pub fn rank(&self, corpus: &Corpus, query: Query<'_>, k: usize) -> Result<RankedList, SystemError> {
        self.expect_task(Task::AdhocRetrieval)?;
        if k == 0 {
            return Err(SystemError::InvalidCutoff);
        }
        let entries = match &self.backend {
            Backend::Builtin(ranker) => ranker.rank(corpus, query.text, k),
            Backend::Remote(remote) => {
                let ids = remote.ranking(query.id, query.text, k)?;
                self.check_response(corpus, ids, k, None)?
            }
            Backend::Precomputed(runs) => {
                let run = runs.get(query.id).ok_or_else(|| SystemError::Abstained {
                    system: self.id().to_owned(),
                    subject: query.id.to_owned(),
                })?;
                let mut ids = run.entries.clone();
                ids.truncate(k);
                self.check_response(corpus, ids, k, None)?
            }
        };
        Ok(RankedList::new(self.id(), query.id, entries))
    }

    /// Dataset recommendation for a publication seed: research data only.
    pub fn recommend(&self, corpus: &Corpus, seed_record: &str, k: usize) -> Result<RankedList, SystemError> {
        self.expect_task(Task::DatasetRecommendation)?;
        if k == 0 {
            return Err(SystemError::InvalidCutoff);
        }
        let seed = corpus
            .get(seed_record)
            .ok_or_else(|| SystemError::UnknownRecord(seed_record.to_owned()))?;
        if seed.kind != RecordKind::Publication {
            return Err(SystemError::WrongKind {
                id: seed_record.to_owned(),
                kind: seed.kind.as_str(),
            });
        }
        let entries = match &self.backend {
            Backend::Builtin(ranker) => ranker.recommend(corpus, seed, k),
            Backend::Remote(remote) => {
                let ids = remote.recommendation(seed_record, k)?;
                self.check_response(corpus, ids, k, Some(RecordKind::ResearchData))?
            }
            Backend::Precomputed(runs) => {
                let run = runs.get(seed_record).ok_or_else(|| SystemError::Abstained {
                    system: self.id().to_owned(),
                    subject: seed_record.to_owned(),
                })?;
                let mut ids = run.entries.clone();
                ids.truncate(k);
                self.check_response(corpus, ids, k, Some(RecordKind::ResearchData))?
            }
        };
        Ok(RankedList::new(self.id(), seed_record, entries))
    }

    /// Enforce the ranked-list invariants on externally produced ids.
    fn check_response(
        &self,
        corpus: &Corpus,
        ids: Vec<String>,
        k: usize,
        kind: Option<RecordKind>,
    ) -> Result<Vec<String>, SystemError> {
        let bad = |reason: String| SystemError::InvalidResponse {
            system: self.id().to_owned(),
            reason,
        };
        if ids.len() > k {
            return Err(bad(format!("{} ids for k={k}", ids.len())));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(bad(format!("duplicate id {id:?}")));
            }
            let record = corpus
                .get(id)
                .ok_or_else(|| bad(format!("unknown id {id:?}")))?;
            if let Some(kind) = kind {
                if record.kind != kind {
                    return Err(bad(format!("{id:?} is a {}", record.kind.as_str())));
                }
            }
        }
        Ok(ids)
    }
}

/// Convenience wrapper for [`System::rank`].
pub fn rank(system: &System, corpus: &Corpus, query: Query<'_>, k: usize) -> Result<RankedList, SystemError> {
    system.rank(corpus, query, k)
}

/// Convenience wrapper for [`System::recommend`].
pub fn recommend(system: &System, corpus: &Corpus, seed_record: &str, k: usize) -> Result<RankedList, SystemError> {
    system.recommend(corpus, seed_record, k)
}

/// The builtin systems every lab registers unless told otherwise.
pub fn default_registry() -> Vec<SystemDescriptor> {
    use BuiltinRanker::*;
    vec![
        SystemDescriptor::builtin("bm25", Bm25),
        SystemDescriptor::builtin("bm25-replica", Bm25),
        SystemDescriptor::builtin("tfidf-cosine", TfidfCosine),
        SystemDescriptor::builtin("recency-bm25", RecencyBm25),
        SystemDescriptor::builtin("reversed-bm25", ReversedBm25),
        SystemDescriptor::builtin("shuffled-matches", RandomShuffle),
        SystemDescriptor::builtin("topic-jaccard", TopicJaccard),
        SystemDescriptor::builtin("topic-jaccard-replica", TopicJaccard),
        SystemDescriptor::builtin("abstract-tfidf", AbstractTfidfCosine),
        SystemDescriptor::builtin("shuffled-datasets", RandomDatasets),
    ]
}
