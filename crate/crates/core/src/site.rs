//! A site: corpus, head queries, head seed items and graded relevance.
//!
//! On disk a site is a directory with `corpus.jsonl`, `queries.tsv`,
//! `head_items.tsv` (optional) and `qrels.tsv` (optional; recomputed when
//! missing).

use std::path::Path;
use std::sync::Arc;

use crate::clicksim::{grade_adhoc, grade_recommendation, ClickError, RelevanceMap};
use crate::corpus::synth::{generate, SiteProfile, SyntheticSite};
use crate::corpus::{load_corpus, load_head_queries, write_corpus, write_head_queries, Corpus, CorpusError, HeadQuerySet};

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const QUERIES_FILE: &str = "queries.tsv";
pub const HEAD_ITEMS_FILE: &str = "head_items.tsv";
pub const QRELS_FILE: &str = "qrels.tsv";

#[derive(Debug, thiserror::Error)]
pub enum SiteError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Relevance(#[from] ClickError),
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
}

#[derive(Debug)]
pub struct Site {
    pub site_id: String,
    pub corpus: Corpus,
    pub queries: HeadQuerySet,
    pub head_items: HeadQuerySet,
    pub relevance: Arc<RelevanceMap>,
}

impl Site {
    pub fn new(corpus: Corpus, queries: HeadQuerySet, head_items: HeadQuerySet) -> Self {
        let mut relevance = grade_adhoc(&corpus, &queries);
        relevance.extend(grade_recommendation(&corpus, &head_items));
        Site {
            site_id: corpus.site_id().to_owned(),
            corpus,
            queries,
            head_items,
            relevance: Arc::new(relevance),
        }
    }

    pub fn from_synthetic(site_id: &str, synthetic: SyntheticSite) -> Result<Self, SiteError> {
        let corpus = Corpus::from_records(site_id, synthetic.records)?;
        Ok(Site::new(corpus, synthetic.queries, synthetic.head_items))
    }

    pub fn generate(site_id: &str, profile: SiteProfile, scale: u64, seed: u64) -> Result<Self, SiteError> {
        Site::from_synthetic(site_id, generate(profile, scale, seed)?)
    }

    pub fn load_dir(site_id: &str, dir: &Path) -> Result<Self, SiteError> {
        let corpus = load_corpus(&dir.join(CORPUS_FILE), site_id)?;
        let queries = load_head_queries(&dir.join(QUERIES_FILE))?;
        let head_items_path = dir.join(HEAD_ITEMS_FILE);
        let head_items = if head_items_path.exists() {
            load_head_queries(&head_items_path)?
        } else {
            HeadQuerySet::default()
        };
        let qrels_path = dir.join(QRELS_FILE);
        if qrels_path.exists() {
            let relevance = RelevanceMap::load(&qrels_path)?;
            return Ok(Site {
                site_id: site_id.to_owned(),
                corpus,
                queries,
                head_items,
                relevance: Arc::new(relevance),
            });
        }
        Ok(Site::new(corpus, queries, head_items))
    }

    pub fn write_dir(&self, dir: &Path) -> Result<(), SiteError> {
        std::fs::create_dir_all(dir).map_err(|e| SiteError::Io(dir.display().to_string(), e))?;
        write_corpus(&dir.join(CORPUS_FILE), self.corpus.records())?;
        write_head_queries(&dir.join(QUERIES_FILE), &self.queries)?;
        write_head_queries(&dir.join(HEAD_ITEMS_FILE), &self.head_items)?;
        self.relevance.export(&dir.join(QRELS_FILE))?;
        Ok(())
    }

    /// Whether `subject` names a head query or a head seed item of this site.
    pub fn subject_text(&self, query_id: &str) -> Option<&str> {
        self.queries.get(query_id).map(|q| q.text.as_str())
    }
}
