//! Blocking HTTP client for a running lab server.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::lab::http::{FeedbackRequest, SessionRequest};
use crate::lab::{CreatedSession, Experiment, ExperimentDraft, LabError, Report, SessionSubject};
use crate::systems::SystemDescriptor;

#[derive(Debug, Clone)]
pub struct LabClient {
    base: String,
    agent: ureq::Agent,
}

#[derive(serde::Deserialize)]
struct CreatedExperiment {
    experiment_id: String,
}

impl LabClient {
    pub fn new(base_url: &str) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .http_status_as_error(false)
            .build()
            .into();
        LabClient {
            base: base_url.trim_end_matches('/').to_owned(),
            agent,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    /// Raw GET, returning status and body text.
    pub fn get_text(&self, path: &str) -> Result<(u16, String), LabError> {
        let response = self
            .agent
            .get(format!("{}{path}", self.base))
            .call()
            .map_err(|e| LabError::Unavailable(format!("{}: {e}", self.base)))?;
        read_text(response)
    }

    /// Raw POST of a JSON body, returning status and body text.
    pub fn post_text<B: Serialize>(&self, path: &str, body: &B) -> Result<(u16, String), LabError> {
        let response = self
            .agent
            .post(format!("{}{path}", self.base))
            .send_json(body)
            .map_err(|e| LabError::Unavailable(format!("{}: {e}", self.base)))?;
        read_text(response)
    }

    fn decode<T: DeserializeOwned>(&self, (status, body): (u16, String)) -> Result<T, LabError> {
        if !(200..300).contains(&status) {
            return Err(status_error(status, &body));
        }
        serde_json::from_str(&body).map_err(|e| LabError::BadRequest(format!("unexpected response: {e}")))
    }

    pub fn health(&self) -> bool {
        matches!(self.get_text("/api/health"), Ok((200, _)))
    }

    pub fn systems(&self) -> Result<Vec<SystemDescriptor>, LabError> {
        self.decode(self.get_text("/api/systems")?)
    }

    pub fn register_system(&self, descriptor: &SystemDescriptor) -> Result<SystemDescriptor, LabError> {
        self.decode(self.post_text("/api/systems", descriptor)?)
    }

    pub fn create_experiment(&self, draft: &ExperimentDraft) -> Result<String, LabError> {
        let created: CreatedExperiment = self.decode(self.post_text("/api/experiments", draft)?)?;
        Ok(created.experiment_id)
    }

    pub fn experiment(&self, id: &str) -> Result<Experiment, LabError> {
        self.decode(self.get_text(&format!("/api/experiments/{id}"))?)
    }

    pub fn start_experiment(&self, id: &str) -> Result<Experiment, LabError> {
        self.decode(self.post_text(&format!("/api/experiments/{id}/start"), &serde_json::json!({}))?)
    }

    pub fn stop_experiment(&self, id: &str) -> Result<Experiment, LabError> {
        self.decode(self.post_text(&format!("/api/experiments/{id}/stop"), &serde_json::json!({}))?)
    }

    pub fn create_session(&self, experiment_id: &str, subject: &SessionSubject) -> Result<CreatedSession, LabError> {
        let body = SessionRequest::new(experiment_id, subject);
        self.decode(self.post_text("/api/sessions", &body)?)
    }

    pub fn record_feedback(&self, session_id: &str, clicks: &[usize]) -> Result<(), LabError> {
        let body = FeedbackRequest {
            clicks: clicks.to_vec(),
        };
        let _: serde_json::Value = self.decode(self.post_text(&format!("/api/sessions/{session_id}/feedback"), &body)?)?;
        Ok(())
    }

    pub fn report_text(&self, id: &str) -> Result<String, LabError> {
        let (status, body) = self.get_text(&format!("/api/experiments/{id}/report"))?;
        if status != 200 {
            return Err(status_error(status, &body));
        }
        Ok(body)
    }

    pub fn report(&self, id: &str) -> Result<Report, LabError> {
        self.decode((200, self.report_text(id)?))
    }
}

fn read_text(mut response: ureq::http::Response<ureq::Body>) -> Result<(u16, String), LabError> {
    let status = response.status().as_u16();
    let body = response
        .body_mut()
        .read_to_string()
        .map_err(|e| LabError::Unavailable(e.to_string()))?;
    Ok((status, body))
}

fn status_error(status: u16, body: &str) -> LabError {
    let message = serde_json::from_str::<serde_json::Value>(body)
        .ok()
        .and_then(|v| v.get("error").and_then(|m| m.as_str()).map(str::to_owned))
        .unwrap_or_else(|| body.trim().to_owned());
    match status {
        404 => LabError::NotFound(message),
        409 => LabError::Conflict(message),
        503 => LabError::Unavailable(message),
        400..=499 => LabError::BadRequest(message),
        _ => LabError::Storage(format!("server error {status}: {message}")),
    }
}
