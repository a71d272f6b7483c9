//! Simulated campaigns: sample a subject, open a session, click, report.
//!
//! The same loop drives an in-process [`Lab`] or a remote server through
//! [`LabClient`]. Every random draw comes from the master seed, so a
//! campaign against a fresh lab is reproducible bit for bit.

use std::sync::Arc;

use crate::client::LabClient;
use crate::clicksim::{sample_query, simulate_clicks, ClickModel, ClickModelConfig, SimulatedUserPool};
use crate::config::{CampaignConfig, ClickModelSpec, ConfigError, UsersSpec};
use crate::corpus::HeadQuerySet;
use crate::lab::{CreatedSession, ExperimentDraft, Lab, LabError, Report, SessionSubject};
use crate::rng::stream_seed;
use crate::site::Site;
use crate::systems::Task;

#[derive(Debug, thiserror::Error)]
pub enum CampaignError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Lab(#[from] LabError),
    #[error("invalid click model: {0}")]
    ClickModel(String),
    #[error("site {0} has no subjects for this task")]
    NoSubjects(String),
}

/// Operations a campaign needs from a lab.
pub trait LabDriver {
    fn create_experiment(&self, draft: &ExperimentDraft) -> Result<String, LabError>;
    fn start_experiment(&self, experiment_id: &str) -> Result<(), LabError>;
    fn stop_experiment(&self, experiment_id: &str) -> Result<(), LabError>;
    fn create_session(&self, experiment_id: &str, subject: &SessionSubject) -> Result<CreatedSession, LabError>;
    fn record_feedback(&self, session_id: &str, clicks: &[usize]) -> Result<(), LabError>;
    fn report(&self, experiment_id: &str) -> Result<Report, LabError>;
}

impl LabDriver for Lab {
    fn create_experiment(&self, draft: &ExperimentDraft) -> Result<String, LabError> {
        Lab::create_experiment(self, draft.clone())
    }

    fn start_experiment(&self, experiment_id: &str) -> Result<(), LabError> {
        Lab::start_experiment(self, experiment_id).map(drop)
    }

    fn stop_experiment(&self, experiment_id: &str) -> Result<(), LabError> {
        Lab::stop_experiment(self, experiment_id).map(drop)
    }

    fn create_session(&self, experiment_id: &str, subject: &SessionSubject) -> Result<CreatedSession, LabError> {
        Lab::create_session(self, experiment_id, subject.clone())
    }

    fn record_feedback(&self, session_id: &str, clicks: &[usize]) -> Result<(), LabError> {
        Lab::record_feedback(self, session_id, clicks).map(drop)
    }

    fn report(&self, experiment_id: &str) -> Result<Report, LabError> {
        Lab::report(self, experiment_id)
    }
}

impl LabDriver for LabClient {
    fn create_experiment(&self, draft: &ExperimentDraft) -> Result<String, LabError> {
        LabClient::create_experiment(self, draft)
    }

    fn start_experiment(&self, experiment_id: &str) -> Result<(), LabError> {
        LabClient::start_experiment(self, experiment_id).map(drop)
    }

    fn stop_experiment(&self, experiment_id: &str) -> Result<(), LabError> {
        LabClient::stop_experiment(self, experiment_id).map(drop)
    }

    fn create_session(&self, experiment_id: &str, subject: &SessionSubject) -> Result<CreatedSession, LabError> {
        LabClient::create_session(self, experiment_id, subject)
    }

    fn record_feedback(&self, session_id: &str, clicks: &[usize]) -> Result<(), LabError> {
        LabClient::record_feedback(self, session_id, clicks)
    }

    fn report(&self, experiment_id: &str) -> Result<Report, LabError> {
        LabClient::report(self, experiment_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    pub experiment: ExperimentDraft,
    pub sessions: u64,
    pub master_seed: u64,
    pub click_model: ClickModelSpec,
    pub users: UsersSpec,
    /// Stop the experiment once all sessions have feedback.
    pub stop_when_done: bool,
}

impl Campaign {
    pub fn from_config(config: &CampaignConfig) -> Result<Self, ConfigError> {
        Ok(Campaign {
            experiment: config.experiment()?,
            sessions: config.sessions,
            master_seed: config.master_seed,
            click_model: config.click_model.clone(),
            users: config.users.clone(),
            stop_when_done: true,
        })
    }

    pub fn click_config(&self, site: &Site) -> Result<ClickModelConfig, CampaignError> {
        let relevance = Arc::clone(&site.relevance);
        let cfg = match self.click_model.model {
            ClickModel::Pbm => {
                let mut cfg = ClickModelConfig::pbm(relevance, self.experiment.k);
                if let Some(examination) = &self.click_model.examination {
                    cfg.examination = examination.clone();
                }
                cfg
            }
            ClickModel::Cascade => ClickModelConfig::cascade(relevance, self.click_model.continuation),
        };
        if cfg.model == ClickModel::Pbm && cfg.examination.len() < self.experiment.k {
            return Err(CampaignError::ClickModel(format!(
                "examination lists {} ranks, k is {}",
                cfg.examination.len(),
                self.experiment.k
            )));
        }
        cfg.validate().map_err(|e| CampaignError::ClickModel(e.to_string()))?;
        Ok(cfg)
    }

    fn subjects<'a>(&self, site: &'a Site) -> &'a HeadQuerySet {
        match self.experiment.task {
            Task::AdhocRetrieval => &site.queries,
            Task::DatasetRecommendation => &site.head_items,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignOutcome {
    pub experiment_id: String,
    pub report: Report,
}

/// Per-session seeds: subject draw, click draw.
pub fn session_draw_seeds(master_seed: u64, index: u64) -> (u64, u64) {
    (
        stream_seed(master_seed, "query", index),
        stream_seed(master_seed, "click", index),
    )
}

/// Run the whole loop. `site` is the simulator's copy of the experiment's
/// site; it supplies subjects and graded relevance.
pub fn run_campaign<D: LabDriver + ?Sized>(
    driver: &D,
    site: &Site,
    campaign: &Campaign,
) -> Result<CampaignOutcome, CampaignError> {
    if campaign.sessions == 0 {
        return Err(ConfigError::Invalid("campaign sessions must be at least 1".into()).into());
    }
    let clicks_cfg = campaign.click_config(site)?;
    let subjects = campaign.subjects(site);
    if subjects.is_empty() {
        return Err(CampaignError::NoSubjects(site.site_id.clone()));
    }
    let pool = SimulatedUserPool::new(campaign.users.zipf_exponent, stream_seed(campaign.master_seed, "users", 0))
        .map_err(|e| CampaignError::ClickModel(e.to_string()))?;

    let experiment_id = driver.create_experiment(&campaign.experiment)?;
    driver.start_experiment(&experiment_id)?;
    for i in 0..campaign.sessions {
        let (query_seed, click_seed) = session_draw_seeds(campaign.master_seed, i);
        let subject_id = sample_query(&pool, subjects, query_seed).to_owned();
        let subject = match campaign.experiment.task {
            Task::AdhocRetrieval => SessionSubject::QueryId(subject_id.clone()),
            Task::DatasetRecommendation => SessionSubject::SeedRecord(subject_id.clone()),
        };
        let created = driver.create_session(&experiment_id, &subject)?;
        let clicks: Vec<usize> = simulate_clicks(&clicks_cfg, &subject_id, &created.docs, click_seed)
            .into_iter()
            .collect();
        driver.record_feedback(&created.session_id, &clicks)?;
        if (i + 1) % 100 == 0 {
            tracing::debug!(sessions = i + 1, "campaign progress");
        }
    }
    if campaign.stop_when_done {
        driver.stop_experiment(&experiment_id)?;
    }
    let report = driver.report(&experiment_id)?;
    Ok(CampaignOutcome { experiment_id, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synth::SiteProfile;
    use crate::lab::{CandidateRotation, ExperimentMethod, LabOptions};
    use crate::systems::default_registry;

    fn small_campaign(candidate: &str, sessions: u64, seed: u64) -> Campaign {
        Campaign {
            experiment: ExperimentDraft {
                site_id: "ls".into(),
                task: Task::AdhocRetrieval,
                baseline_system: "bm25".into(),
                candidate_systems: vec![candidate.into()],
                method: ExperimentMethod::TeamDraft,
                traffic_fraction_experimental: 0.5,
                candidate_rotation: CandidateRotation::RoundRobin,
                k: 10,
                seed,
            },
            sessions,
            master_seed: seed,
            click_model: ClickModelSpec::default(),
            users: UsersSpec::default(),
            stop_when_done: true,
        }
    }

    fn run(candidate: &str, sessions: u64, seed: u64) -> Report {
        let site = Site::generate("ls", SiteProfile::LifeScience, 2_000, 1).unwrap();
        let sim_site = Site::generate("ls", SiteProfile::LifeScience, 2_000, 1).unwrap();
        let lab = Lab::in_memory(vec![site], default_registry(), LabOptions::default()).unwrap();
        run_campaign(&lab, &sim_site, &small_campaign(candidate, sessions, seed))
            .unwrap()
            .report
    }

    #[test]
    fn deterministic() {
        assert_eq!(run("tfidf-cosine", 60, 5), run("tfidf-cosine", 60, 5));
    }

    #[test]
    fn counts_add_up() {
        let report = run("reversed-bm25", 200, 8);
        let p = &report.profiles[0];
        assert_eq!(p.sessions_total, 200);
        assert_eq!(p.sessions_with_feedback, 200);
        assert_eq!(p.wins + p.losses + p.ties, 200);
        // The reversed ranker loses clearly even on a small corpus.
        assert!(p.outcome.unwrap() < 0.4, "{p:?}");
    }

    #[test]
    fn zero_sessions_rejected() {
        let site = Site::generate("ls", SiteProfile::LifeScience, 200, 1).unwrap();
        let lab = Lab::in_memory(vec![], default_registry(), LabOptions::default()).unwrap();
        assert!(matches!(
            run_campaign(&lab, &site, &small_campaign("bm25-replica", 0, 1)),
            Err(CampaignError::Config(_))
        ));
    }

    #[test]
    fn short_examination_rejected() {
        let site = Site::generate("ls", SiteProfile::LifeScience, 200, 1).unwrap();
        let mut c = small_campaign("bm25-replica", 3, 1);
        c.click_model.examination = Some(vec![1.0, 0.5]);
        assert!(matches!(c.click_config(&site), Err(CampaignError::ClickModel(_))));
        c.click_model.examination = Some(vec![0.5; 9].into_iter().chain([0.9]).collect());
        assert!(matches!(c.click_config(&site), Err(CampaignError::ClickModel(_))));
    }
}
