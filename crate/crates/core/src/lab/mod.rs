//! The lab: experiments, sessions, feedback and reports.
//!
//! Every change is an event. [`Lab::commit`] holds the writer lock, checks
//! the event against the current state, appends it to the log and folds it
//! in; readers take the state lock and see only committed events.

pub mod events;
pub mod http;
pub mod state;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::evaluation::{aggregate, EvaluationProfile, PROFILE_SCHEMA_VERSION};
use crate::interleave::{ab_assign, team_draft_interleave, InterleavedList, PresentationMethod, SessionOutcome};
use crate::rng::session_seed;
use crate::site::Site;
use crate::systems::{Query, RankedList, System, SystemDescriptor, SystemError, Task};

pub use events::{load_state, replay_log, Event, EventRecord, EventStore};
pub use state::{
    CandidateRotation, Experiment, ExperimentDraft, ExperimentMethod, ExperimentState, LabState, Session,
};

pub const DEFAULT_SNAPSHOT_EVERY: u64 = 1000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LabError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Unavailable(String),
    #[error("storage: {0}")]
    Storage(String),
    #[error("corrupt event log: {0}")]
    Corrupt(String),
}

impl From<SystemError> for LabError {
    fn from(e: SystemError) -> Self {
        if e.is_participant_failure() {
            LabError::Unavailable(e.to_string())
        } else {
            LabError::BadRequest(e.to_string())
        }
    }
}

/// What a site asks results for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionSubject {
    QueryId(String),
    SeedRecord(String),
}

impl SessionSubject {
    pub fn id(&self) -> &str {
        match self {
            SessionSubject::QueryId(id) | SessionSubject::SeedRecord(id) => id,
        }
    }
}

/// The site-facing view of a new session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreatedSession {
    pub session_id: String,
    pub docs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    pub experiment_id: String,
    pub method: ExperimentMethod,
    pub state: ExperimentState,
    pub profiles: Vec<EvaluationProfile>,
}

#[derive(Debug, Clone)]
pub struct LabOptions {
    pub snapshot_every: u64,
    pub remote_timeout: Duration,
}

impl Default for LabOptions {
    fn default() -> Self {
        LabOptions {
            snapshot_every: DEFAULT_SNAPSHOT_EVERY,
            remote_timeout: crate::systems::remote::DEFAULT_TIMEOUT,
        }
    }
}

pub struct Lab {
    sites: BTreeMap<String, Arc<Site>>,
    systems: RwLock<BTreeMap<String, Arc<System>>>,
    state: RwLock<LabState>,
    store: Mutex<Option<EventStore>>,
    ordinals: Mutex<HashMap<String, AtomicU64>>,
    options: LabOptions,
}

impl std::fmt::Debug for Lab {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Lab")
            .field("sites", &self.sites.keys().collect::<Vec<_>>())
            .finish_non_exhaustive()
    }
}

impl Lab {
    /// A lab without persistence.
    pub fn in_memory(sites: Vec<Site>, systems: Vec<SystemDescriptor>, options: LabOptions) -> Result<Lab, LabError> {
        Lab::build(sites, systems, None, LabState::default(), options)
    }

    /// A lab persisted in `data_dir`, restored from its snapshot and log.
    pub fn open(
        data_dir: &Path,
        sites: Vec<Site>,
        systems: Vec<SystemDescriptor>,
        options: LabOptions,
    ) -> Result<Lab, LabError> {
        let (store, state) = EventStore::open(data_dir)?;
        Lab::build(sites, systems, Some(store), state, options)
    }

    fn build(
        sites: Vec<Site>,
        systems: Vec<SystemDescriptor>,
        store: Option<EventStore>,
        state: LabState,
        options: LabOptions,
    ) -> Result<Lab, LabError> {
        let mut site_map = BTreeMap::new();
        for site in sites {
            if site_map.contains_key(&site.site_id) {
                return Err(LabError::Conflict(format!("site {} configured twice", site.site_id)));
            }
            site_map.insert(site.site_id.clone(), Arc::new(site));
        }
        let mut registry = BTreeMap::new();
        for descriptor in systems.into_iter().chain(state.systems.values().cloned()) {
            if registry.contains_key(&descriptor.system_id) {
                return Err(LabError::Conflict(format!("system {} registered twice", descriptor.system_id)));
            }
            let system = System::with_timeout(descriptor, options.remote_timeout)?;
            registry.insert(system.id().to_owned(), Arc::new(system));
        }
        let ordinals = state
            .experiments
            .values()
            .map(|e| (e.experiment_id.clone(), AtomicU64::new(e.sessions_created)))
            .collect();
        Ok(Lab {
            sites: site_map,
            systems: RwLock::new(registry),
            state: RwLock::new(state),
            store: Mutex::new(store),
            ordinals: Mutex::new(ordinals),
            options,
        })
    }

    pub fn site(&self, site_id: &str) -> Result<Arc<Site>, LabError> {
        self.sites
            .get(site_id)
            .cloned()
            .ok_or_else(|| LabError::NotFound(format!("site {site_id}")))
    }

    pub fn site_ids(&self) -> Vec<String> {
        self.sites.keys().cloned().collect()
    }

    pub fn system(&self, system_id: &str) -> Result<Arc<System>, LabError> {
        self.systems
            .read()
            .unwrap()
            .get(system_id)
            .cloned()
            .ok_or_else(|| LabError::NotFound(format!("system {system_id}")))
    }

    pub fn systems(&self) -> Vec<SystemDescriptor> {
        self.systems
            .read()
            .unwrap()
            .values()
            .map(|s| s.descriptor().clone())
            .collect()
    }

    /// A copy of the folded state.
    pub fn state(&self) -> LabState {
        self.state.read().unwrap().clone()
    }

    pub fn experiments(&self) -> Vec<Experiment> {
        self.state.read().unwrap().experiments.values().cloned().collect()
    }

    pub fn experiment(&self, experiment_id: &str) -> Result<Experiment, LabError> {
        self.state.read().unwrap().experiment(experiment_id).cloned()
    }

    pub fn session(&self, session_id: &str) -> Result<Session, LabError> {
        self.state.read().unwrap().session(session_id).cloned()
    }

    fn commit<F>(&self, build: F) -> Result<EventRecord, LabError>
    where
        F: FnOnce(&LabState) -> Result<Event, LabError>,
    {
        let mut store = self.store.lock().unwrap();
        let mut state = self.state.write().unwrap();
        let event = build(&state)?;
        state.validate(&event)?;
        let record = EventRecord {
            sequence_no: state.last_sequence_no + 1,
            recorded_at: chrono::Utc::now(),
            event,
        };
        if let Some(store) = store.as_mut() {
            store.append(&record)?;
        }
        state.apply(&record).expect("validated event applies");
        if let Some(store) = store.as_ref() {
            let every = self.options.snapshot_every;
            if every > 0 && record.sequence_no.is_multiple_of(every) {
                store.snapshot(&state)?;
            }
        }
        Ok(record)
    }

    /// Write a snapshot now (no-op without persistence).
    pub fn snapshot(&self) -> Result<(), LabError> {
        let store = self.store.lock().unwrap();
        if let Some(store) = store.as_ref() {
            store.snapshot(&self.state.read().unwrap())?;
        }
        Ok(())
    }

    pub fn register_system(&self, descriptor: SystemDescriptor) -> Result<SystemDescriptor, LabError> {
        if self.systems.read().unwrap().contains_key(&descriptor.system_id) {
            return Err(LabError::Conflict(format!("system {} already registered", descriptor.system_id)));
        }
        let system = Arc::new(System::with_timeout(descriptor.clone(), self.options.remote_timeout)?);
        let mut systems = self.systems.write().unwrap();
        if systems.contains_key(&descriptor.system_id) {
            return Err(LabError::Conflict(format!("system {} already registered", descriptor.system_id)));
        }
        self.commit(|_| Ok(Event::SystemRegistered(descriptor.clone())))?;
        systems.insert(descriptor.system_id.clone(), system);
        Ok(descriptor)
    }

    pub fn create_experiment(&self, draft: ExperimentDraft) -> Result<String, LabError> {
        draft.validate()?;
        let site = self.site(&draft.site_id)?;
        if draft.task == Task::DatasetRecommendation && site.head_items.is_empty() {
            return Err(LabError::BadRequest(format!("site {} has no seed items", site.site_id)));
        }
        for id in std::iter::once(&draft.baseline_system).chain(&draft.candidate_systems) {
            let system = self.system(id)?;
            if system.descriptor().task != draft.task {
                return Err(LabError::BadRequest(format!(
                    "system {id} serves {}, not {}",
                    system.descriptor().task,
                    draft.task
                )));
            }
        }
        let record = self.commit(|state| {
            let id = state.next_experiment_id();
            Ok(Event::ExperimentCreated(Experiment::from_draft(id, draft)))
        })?;
        let Event::ExperimentCreated(experiment) = record.event else {
            unreachable!()
        };
        self.ordinals
            .lock()
            .unwrap()
            .insert(experiment.experiment_id.clone(), AtomicU64::new(0));
        Ok(experiment.experiment_id)
    }

    pub fn start_experiment(&self, experiment_id: &str) -> Result<Experiment, LabError> {
        self.commit(|_| {
            Ok(Event::Started {
                experiment_id: experiment_id.to_owned(),
            })
        })?;
        self.experiment(experiment_id)
    }

    pub fn stop_experiment(&self, experiment_id: &str) -> Result<Experiment, LabError> {
        self.commit(|_| {
            Ok(Event::Stopped {
                experiment_id: experiment_id.to_owned(),
            })
        })?;
        self.experiment(experiment_id)
    }

    pub fn set_traffic(&self, experiment_id: &str, fraction: f64) -> Result<Experiment, LabError> {
        self.commit(|_| {
            Ok(Event::TrafficUpdated {
                experiment_id: experiment_id.to_owned(),
                traffic_fraction_experimental: fraction,
            })
        })?;
        self.experiment(experiment_id)
    }

    fn reserve_ordinal(&self, experiment_id: &str) -> u64 {
        let mut ordinals = self.ordinals.lock().unwrap();
        ordinals
            .entry(experiment_id.to_owned())
            .or_insert_with(|| AtomicU64::new(0))
            .fetch_add(1, Ordering::Relaxed)
    }

    fn fetch(&self, system: &System, site: &Site, subject: &SessionSubject, k: usize) -> Result<RankedList, SystemError> {
        match subject {
            SessionSubject::QueryId(id) => {
                let text = site.subject_text(id).expect("checked");
                system.rank(&site.corpus, Query { id, text }, k)
            }
            SessionSubject::SeedRecord(id) => system.recommend(&site.corpus, id, k),
        }
    }

    /// Serve one session. Team labels and system ids stay inside the lab;
    /// the returned view carries only the session id and document ids.
    pub fn create_session(&self, experiment_id: &str, subject: SessionSubject) -> Result<CreatedSession, LabError> {
        let experiment = self.experiment(experiment_id)?;
        if experiment.state != ExperimentState::Running {
            return Err(LabError::Conflict("experiment is not running".into()));
        }
        let site = self.site(&experiment.site_id)?;
        match (&subject, experiment.task) {
            (SessionSubject::QueryId(id), Task::AdhocRetrieval) => {
                if site.subject_text(id).is_none() {
                    return Err(LabError::NotFound(format!("query {id}")));
                }
            }
            (SessionSubject::SeedRecord(id), Task::DatasetRecommendation) => {
                if site.corpus.get(id).is_none() {
                    return Err(LabError::NotFound(format!("record {id}")));
                }
            }
            (SessionSubject::QueryId(_), _) => {
                return Err(LabError::BadRequest("this experiment expects seed_record".into()))
            }
            (SessionSubject::SeedRecord(_), _) => {
                return Err(LabError::BadRequest("this experiment expects query_id".into()))
            }
        }

        let ordinal = self.reserve_ordinal(experiment_id);
        let session_id = state::session_id(experiment_id, ordinal);
        let seed = session_seed(experiment.seed, &session_id);
        let candidate_id = experiment.candidate_for(ordinal).to_owned();
        let baseline = self.system(&experiment.baseline_system)?;
        let candidate = self.system(&candidate_id)?;
        let k = experiment.k;

        let serve_baseline = |degraded: bool| -> Result<(InterleavedList, bool), LabError> {
            let list = self
                .fetch(&baseline, &site, &subject, k)
                .map_err(|e| site_error(&e))?;
            Ok((
                InterleavedList::whole_list(PresentationMethod::AbBaseline, &list.entries, k, seed),
                degraded,
            ))
        };
        let (shown, degraded) = match experiment.method {
            ExperimentMethod::TeamDraft => match self.fetch(&candidate, &site, &subject, k) {
                Ok(exp_list) => {
                    let base_list = self
                        .fetch(&baseline, &site, &subject, k)
                        .map_err(|e| site_error(&e))?;
                    let shown = team_draft_interleave(&base_list.entries, &exp_list.entries, k, seed)
                        .map_err(|e| LabError::BadRequest(e.to_string()))?;
                    (shown, false)
                }
                Err(e) if e.is_participant_failure() => {
                    tracing::warn!(system = %candidate_id, error = %e, "candidate failed; serving baseline");
                    serve_baseline(true)?
                }
                Err(e) => return Err(site_error(&e)),
            },
            ExperimentMethod::Ab => {
                let arm = ab_assign(seed, experiment.traffic_fraction_experimental)
                    .map_err(|e| LabError::BadRequest(e.to_string()))?;
                match arm {
                    PresentationMethod::AbExperimental => match self.fetch(&candidate, &site, &subject, k) {
                        Ok(list) => (InterleavedList::whole_list(arm, &list.entries, k, seed), false),
                        Err(e) if e.is_participant_failure() => {
                            tracing::warn!(system = %candidate_id, error = %e, "candidate failed; serving baseline");
                            serve_baseline(true)?
                        }
                        Err(e) => return Err(site_error(&e)),
                    },
                    _ => serve_baseline(false)?,
                }
            }
        };

        let (query_id, seed_record) = match &subject {
            SessionSubject::QueryId(id) => (Some(id.clone()), None),
            SessionSubject::SeedRecord(id) => (None, Some(id.clone())),
        };
        let docs = shown.documents();
        let session = Session {
            session_id: session_id.clone(),
            experiment_id: experiment_id.to_owned(),
            ordinal,
            query_id,
            seed_record,
            candidate_system: candidate_id,
            method: experiment.method,
            seed,
            shown,
            outcome: None,
            clicks: None,
            degraded,
            created_at: chrono::Utc::now(),
            feedback_at: None,
        };
        self.commit(|_| Ok(Event::SessionCreated(session)))?;
        Ok(CreatedSession { session_id, docs })
    }

    pub fn record_feedback(&self, session_id: &str, clicks: &[usize]) -> Result<SessionOutcome, LabError> {
        let record = self.commit(|state| {
            let session = state.session(session_id)?;
            if session.outcome.is_some() {
                return Err(LabError::Conflict(format!("feedback for session {session_id} already recorded")));
            }
            let outcome = state::credit(&session.shown, clicks)?;
            let mut clicks = clicks.to_vec();
            clicks.sort_unstable();
            clicks.dedup();
            Ok(Event::FeedbackRecorded {
                session_id: session_id.to_owned(),
                clicks,
                outcome,
            })
        })?;
        match record.event {
            Event::FeedbackRecorded { outcome, .. } => Ok(outcome),
            _ => unreachable!(),
        }
    }

    pub fn report(&self, experiment_id: &str) -> Result<Report, LabError> {
        report_from_state(&self.state.read().unwrap(), experiment_id)
    }
}

/// One profile per candidate, in the experiment's candidate order.
pub fn report_from_state(state: &LabState, experiment_id: &str) -> Result<Report, LabError> {
    let experiment = state.experiment(experiment_id)?;
    let mut by_candidate: HashMap<&str, Vec<&Session>> = HashMap::new();
    for session in state.sessions_of(experiment_id) {
        by_candidate
            .entry(session.candidate_system.as_str())
            .or_default()
            .push(session);
    }
    let mut profiles = Vec::with_capacity(experiment.candidate_systems.len());
    for candidate in &experiment.candidate_systems {
        let sessions = by_candidate.remove(candidate.as_str()).unwrap_or_default();
        let profile = aggregate(candidate, experiment.method, sessions).map_err(|e| LabError::Corrupt(e.to_string()))?;
        profiles.push(profile);
    }
    Ok(Report {
        schema_version: PROFILE_SCHEMA_VERSION.to_owned(),
        experiment_id: experiment_id.to_owned(),
        method: experiment.method,
        state: experiment.state,
        profiles,
    })
}

/// Errors a site may see: no system ids, no team names.
fn site_error(e: &SystemError) -> LabError {
    match e {
        SystemError::UnknownRecord(id) => LabError::NotFound(format!("record {id}")),
        SystemError::WrongKind { id, .. } => LabError::BadRequest(format!("record {id} is not a publication")),
        _ => {
            tracing::error!(error = %e, "ranking failed");
            LabError::Unavailable("no results available".into())
        }
    }
}
