//! Client side of the participant micro-protocol.
//!
//! ```text
//! GET {address}/ranking?qid=<id>&query=<urlencoded>&k=<int>  -> ["id", ...]
//! GET {address}/recommendation?item=<record_id>&k=<int>      -> ["id", ...]
//! GET {address}/health                                       -> 200 when ready
//! ```
//!
//! Each request gets a 2 s budget and one retry on transport failure before
//! the participant is reported unavailable.

use std::time::Duration;

use super::SystemError;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(2);
const ATTEMPTS: usize = 2;

#[derive(Debug, Clone)]
pub struct RemoteParticipant {
    system_id: String,
    address: String,
    agent: ureq::Agent,
}

impl RemoteParticipant {
    pub fn new(system_id: &str, address: &str, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(true)
            .build()
            .into();
        RemoteParticipant {
            system_id: system_id.to_owned(),
            address: address.trim_end_matches('/').to_owned(),
            agent,
        }
    }

    pub fn ranking(&self, qid: &str, query: &str, k: usize) -> Result<Vec<String>, SystemError> {
        let k = k.to_string();
        self.fetch_ids("ranking", &[("qid", qid), ("query", query), ("k", &k)])
    }

    pub fn recommendation(&self, item: &str, k: usize) -> Result<Vec<String>, SystemError> {
        let k = k.to_string();
        self.fetch_ids("recommendation", &[("item", item), ("k", &k)])
    }

    pub fn health(&self) -> bool {
        self.agent
            .get(format!("{}/health", self.address))
            .call()
            .is_ok()
    }

    fn fetch_ids(&self, endpoint: &str, params: &[(&str, &str)]) -> Result<Vec<String>, SystemError> {
        let url = format!("{}/{endpoint}", self.address);
        let mut last_error = String::new();
        for _ in 0..ATTEMPTS {
            let mut request = self.agent.get(&url);
            for (key, value) in params {
                request = request.query(*key, *value);
            }
            match request.call() {
                Ok(mut response) => {
                    return response
                        .body_mut()
                        .read_json::<Vec<String>>()
                        .map_err(|e| SystemError::InvalidResponse {
                            system: self.system_id.clone(),
                            reason: e.to_string(),
                        });
                }
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(SystemError::Unavailable {
            system: self.system_id.clone(),
            reason: last_error,
        })
    }
}
