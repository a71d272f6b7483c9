//! Lab state as a pure fold over the event log.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::events::{Event, EventRecord};
use super::LabError;
use crate::interleave::{assign_credit, InterleavedList, SessionOutcome};
use crate::systems::{SystemDescriptor, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMethod {
    Ab,
    TeamDraft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateRotation {
    #[default]
    RoundRobin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentState {
    Draft,
    Running,
    Stopped,
}

fn default_k() -> usize {
    crate::systems::DEFAULT_K
}

fn default_fraction() -> f64 {
    0.5
}

/// Operator input for a new experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentDraft {
    pub site_id: String,
    pub task: Task,
    pub baseline_system: String,
    pub candidate_systems: Vec<String>,
    pub method: ExperimentMethod,
    #[serde(default = "default_fraction")]
    pub traffic_fraction_experimental: f64,
    #[serde(default)]
    pub candidate_rotation: CandidateRotation,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentDraft {
    /// Checks that need no registry.
    pub fn validate(&self) -> Result<(), LabError> {
        if self.candidate_systems.is_empty() {
            return Err(LabError::BadRequest("at least one candidate system is required".into()));
        }
        if self.candidate_systems.contains(&self.baseline_system) {
            return Err(LabError::BadRequest(format!(
                "baseline {} is also listed as a candidate",
                self.baseline_system
            )));
        }
        let unique: BTreeSet<&String> = self.candidate_systems.iter().collect();
        if unique.len() != self.candidate_systems.len() {
            return Err(LabError::BadRequest("candidate systems must be distinct".into()));
        }
        check_fraction(self.traffic_fraction_experimental)?;
        if self.k == 0 {
            return Err(LabError::BadRequest("k must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_fraction(fraction: f64) -> Result<(), LabError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(LabError::BadRequest(format!("traffic fraction {fraction} outside [0, 1]")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub experiment_id: String,
    pub site_id: String,
    pub task: Task,
    pub baseline_system: String,
    pub candidate_systems: Vec<String>,
    pub method: ExperimentMethod,
    pub traffic_fraction_experimental: f64,
    pub candidate_rotation: CandidateRotation,
    pub k: usize,
    pub seed: u64,
    pub state: ExperimentState,
    pub sessions_created: u64,
}

impl Experiment {
    pub fn from_draft(experiment_id: String, draft: ExperimentDraft) -> Self {
        Experiment {
            experiment_id,
            site_id: draft.site_id,
            task: draft.task,
            baseline_system: draft.baseline_system,
            candidate_systems: draft.candidate_systems,
            method: draft.method,
            traffic_fraction_experimental: draft.traffic_fraction_experimental,
            candidate_rotation: draft.candidate_rotation,
            k: draft.k,
            seed: draft.seed,
            state: ExperimentState::Draft,
            sessions_created: 0,
        }
    }

    /// Candidate for the session with this ordinal.
    pub fn candidate_for(&self, ordinal: u64) -> &str {
        let c = self.candidate_systems.len() as u64;
        &self.candidate_systems[(ordinal % c) as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub experiment_id: String,
    pub ordinal: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_record: Option<String>,
    pub candidate_system: String,
    pub method: ExperimentMethod,
    pub seed: u64,
    pub shown: InterleavedList,
    pub outcome: Option<SessionOutcome>,
    pub clicks: Option<Vec<usize>>,
    pub degraded: bool,
    pub created_at: DateTime<Utc>,
    pub feedback_at: Option<DateTime<Utc>>,
}

impl Session {
    pub fn subject(&self) -> &str {
        self.query_id
            .as_deref()
            .or(self.seed_record.as_deref())
            .unwrap_or_default()
    }
}

pub fn session_id(experiment_id: &str, ordinal: u64) -> String {
    format!("{experiment_id}-s{ordinal:06}")
}

pub fn experiment_id(number: usize) -> String {
    format!("exp-{number:04}")
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabState {
    pub last_sequence_no: u64,
    /// Systems registered through the API; configured systems are not logged.
    pub systems: BTreeMap<String, SystemDescriptor>,
    pub experiments: BTreeMap<String, Experiment>,
    pub sessions: BTreeMap<String, Session>,
}

impl LabState {
    pub fn experiment(&self, id: &str) -> Result<&Experiment, LabError> {
        self.experiments
            .get(id)
            .ok_or_else(|| LabError::NotFound(format!("experiment {id}")))
    }

    pub fn session(&self, id: &str) -> Result<&Session, LabError> {
        self.sessions
            .get(id)
            .ok_or_else(|| LabError::NotFound(format!("session {id}")))
    }

    pub fn sessions_of<'a>(&'a self, experiment_id: &'a str) -> impl Iterator<Item = &'a Session> + 'a {
        let prefix = format!("{experiment_id}-s");
        self.sessions
            .range(prefix.clone()..)
            .take_while(move |(id, _)| id.starts_with(&prefix))
            .map(|(_, s)| s)
            .filter(move |s| s.experiment_id == experiment_id)
    }

    pub fn next_experiment_id(&self) -> String {
        experiment_id(self.experiments.len() + 1)
    }

    /// Would `event` be accepted as the next event?
    pub fn validate(&self, event: &Event) -> Result<(), LabError> {
        match event {
            Event::SystemRegistered(descriptor) => {
                if self.systems.contains_key(&descriptor.system_id) {
                    return Err(LabError::Conflict(format!("system {} already registered", descriptor.system_id)));
                }
            }
            Event::ExperimentCreated(experiment) => {
                if self.experiments.contains_key(&experiment.experiment_id) {
                    return Err(LabError::Conflict(format!(
                        "experiment {} already exists",
                        experiment.experiment_id
                    )));
                }
            }
            Event::Started { experiment_id } => {
                let experiment = self.experiment(experiment_id)?;
                match experiment.state {
                    ExperimentState::Draft => {}
                    ExperimentState::Running => {
                        return Err(LabError::Conflict(format!("experiment {experiment_id} is already running")))
                    }
                    ExperimentState::Stopped => {
                        return Err(LabError::Conflict(format!(
                            "experiment {experiment_id} is in terminal state stopped"
                        )))
                    }
                }
            }
            Event::Stopped { experiment_id } => {
                let experiment = self.experiment(experiment_id)?;
                if experiment.state != ExperimentState::Running {
                    return Err(LabError::Conflict(format!("experiment {experiment_id} is not running")));
                }
            }
            Event::TrafficUpdated {
                experiment_id,
                traffic_fraction_experimental,
            } => {
                let experiment = self.experiment(experiment_id)?;
                check_fraction(*traffic_fraction_experimental)?;
                if experiment.method != ExperimentMethod::Ab {
                    return Err(LabError::BadRequest("traffic fraction applies to ab experiments only".into()));
                }
                if experiment.state == ExperimentState::Stopped {
                    return Err(LabError::Conflict(format!("experiment {experiment_id} is stopped")));
                }
            }
            Event::SessionCreated(session) => {
                let experiment = self.experiment(&session.experiment_id)?;
                if experiment.state != ExperimentState::Running {
                    return Err(LabError::Conflict("experiment is not running".into()));
                }
                if self.sessions.contains_key(&session.session_id) {
                    return Err(LabError::Conflict(format!("session {} already exists", session.session_id)));
                }
            }
            Event::FeedbackRecorded { session_id, clicks, .. } => {
                let session = self.session(session_id)?;
                if session.outcome.is_some() {
                    return Err(LabError::Conflict(format!("feedback for session {session_id} already recorded")));
                }
                credit(&session.shown, clicks)?;
            }
        }
        Ok(())
    }

    /// Fold one record into the state.
    pub fn apply(&mut self, record: &EventRecord) -> Result<(), LabError> {
        let expected = self.last_sequence_no + 1;
        if record.sequence_no != expected {
            return Err(LabError::Corrupt(format!(
                "sequence gap: expected {expected}, found {}",
                record.sequence_no
            )));
        }
        self.validate(&record.event)?;
        match &record.event {
            Event::SystemRegistered(descriptor) => {
                self.systems.insert(descriptor.system_id.clone(), descriptor.clone());
            }
            Event::ExperimentCreated(experiment) => {
                self.experiments
                    .insert(experiment.experiment_id.clone(), experiment.clone());
            }
            Event::Started { experiment_id } => self.set_state(experiment_id, ExperimentState::Running),
            Event::Stopped { experiment_id } => self.set_state(experiment_id, ExperimentState::Stopped),
            Event::TrafficUpdated {
                experiment_id,
                traffic_fraction_experimental,
            } => {
                if let Some(e) = self.experiments.get_mut(experiment_id) {
                    e.traffic_fraction_experimental = *traffic_fraction_experimental;
                }
            }
            Event::SessionCreated(session) => {
                if let Some(e) = self.experiments.get_mut(&session.experiment_id) {
                    e.sessions_created = e.sessions_created.max(session.ordinal + 1);
                }
                self.sessions.insert(session.session_id.clone(), session.clone());
            }
            Event::FeedbackRecorded {
                session_id,
                clicks,
                outcome,
            } => {
                let session = self.sessions.get_mut(session_id).expect("validated");
                session.outcome = Some(*outcome);
                session.clicks = Some(clicks.clone());
                session.feedback_at = Some(record.recorded_at);
            }
        }
        self.last_sequence_no = record.sequence_no;
        Ok(())
    }

    fn set_state(&mut self, experiment_id: &str, state: ExperimentState) {
        if let Some(e) = self.experiments.get_mut(experiment_id) {
            e.state = state;
        }
    }
}

/// Credit clicks on `shown`; positions are a set, repeats collapse.
pub fn credit(shown: &InterleavedList, clicks: &[usize]) -> Result<SessionOutcome, LabError> {
    let positions: BTreeSet<usize> = clicks.iter().copied().collect();
    assign_credit(shown, &positions).map_err(|e| LabError::BadRequest(e.to_string()))
}
