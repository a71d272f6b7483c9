//! Evaluation profiles: per-candidate aggregates and their statistics.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::interleave::{PresentationMethod, Winner};
use crate::lab::{ExperimentMethod, Session};

pub const PROFILE_SCHEMA_VERSION: &str = "1";
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("session {session} belongs to {found}, expected {expected}")]
    MixedSessions {
        session: String,
        expected: String,
        found: String,
    },
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("unsupported profile schema version {0:?}")]
    SchemaVersion(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationProfile {
    pub candidate_system: String,
    /// Non-degraded sessions served with this candidate.
    pub sessions_total: u64,
    /// Non-degraded sessions that received feedback.
    pub sessions_with_feedback: u64,
    pub degraded_excluded: u64,
    pub wins: u64,
    pub losses: u64,
    pub ties: u64,
    /// `wins / (wins + losses)` for the candidate; undefined without decided sessions.
    pub outcome: Option<f64>,
    pub ctr_experimental: Option<f64>,
    pub ctr_baseline: Option<f64>,
    pub p_value: Option<f64>,
    pub significant_at_05: bool,
}

impl EvaluationProfile {
    pub fn empty(candidate_system: &str) -> Self {
        EvaluationProfile {
            candidate_system: candidate_system.to_owned(),
            sessions_total: 0,
            sessions_with_feedback: 0,
            degraded_excluded: 0,
            wins: 0,
            losses: 0,
            ties: 0,
            outcome: None,
            ctr_experimental: None,
            ctr_baseline: None,
            p_value: None,
            significant_at_05: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Baseline,
    Experimental,
}

/// Aggregate the sessions of one candidate under one experiment method.
/// Degraded sessions are only counted in `degraded_excluded`; sessions
/// without feedback only in `sessions_total`.
pub fn aggregate<'a, I>(candidate_system: &str, method: ExperimentMethod, sessions: I) -> Result<EvaluationProfile, EvalError>
where
    I: IntoIterator<Item = &'a Session>,
{
    let mut profile = EvaluationProfile::empty(candidate_system);
    let mut counted: Vec<&Session> = Vec::new();
    for session in sessions {
        if session.candidate_system != candidate_system {
            return Err(EvalError::MixedSessions {
                session: session.session_id.clone(),
                expected: candidate_system.to_owned(),
                found: session.candidate_system.clone(),
            });
        }
        if session.method != method {
            return Err(EvalError::MixedSessions {
                session: session.session_id.clone(),
                expected: format!("{method:?}"),
                found: format!("{:?}", session.method),
            });
        }
        if session.degraded {
            profile.degraded_excluded += 1;
            continue;
        }
        profile.sessions_total += 1;
        let Some(outcome) = session.outcome else {
            continue;
        };
        profile.sessions_with_feedback += 1;
        counted.push(session);
        if method == ExperimentMethod::TeamDraft {
            match outcome.winner {
                Winner::Experimental => profile.wins += 1,
                Winner::Baseline => profile.losses += 1,
                Winner::Tie => profile.ties += 1,
            }
        }
    }
    match method {
        ExperimentMethod::TeamDraft => {
            let decided = profile.wins + profile.losses;
            if decided > 0 {
                profile.outcome = Some(profile.wins as f64 / decided as f64);
            }
            profile.p_value = sign_test(profile.wins, profile.losses);
        }
        ExperimentMethod::Ab => {
            profile.ctr_experimental = ctr(counted.iter().copied(), Side::Experimental);
            profile.ctr_baseline = ctr(counted.iter().copied(), Side::Baseline);
        }
    }
    profile.significant_at_05 = profile.p_value.is_some_and(|p| p < SIGNIFICANCE_LEVEL);
    Ok(profile)
}

/// Clicks per session over the A/B sessions served from `side`; undefined
/// when no such session has feedback.
pub fn ctr<'a, I>(sessions: I, side: Side) -> Option<f64>
where
    I: IntoIterator<Item = &'a Session>,
{
    let arm = match side {
        Side::Baseline => PresentationMethod::AbBaseline,
        Side::Experimental => PresentationMethod::AbExperimental,
    };
    let (mut clicks, mut n) = (0u64, 0u64);
    for session in sessions {
        if session.degraded || session.shown.method != arm {
            continue;
        }
        if let Some(outcome) = session.outcome {
            clicks += u64::from(outcome.total_clicks());
            n += 1;
        }
    }
    (n > 0).then(|| clicks as f64 / n as f64)
}

/// Exact two-sided binomial sign test against p = 0.5:
/// `min(1, 2 * P(X <= min(wins, losses)))` with `X ~ Bin(wins + losses, 1/2)`.
/// Undefined for zero decided sessions.
pub fn sign_test(wins: u64, losses: u64) -> Option<f64> {
    let n = wins + losses;
    if n == 0 {
        return None;
    }
    let tail = binomial_half_lower_tail(n, wins.min(losses));
    Some((2.0 * tail).min(1.0))
}

/// `P(X <= m)` for `X ~ Bin(n, 1/2)`, `m <= n / 2`.
fn binomial_half_lower_tail(n: u64, m: u64) -> f64 {
    if n <= 120 {
        // Integer binomial coefficients are exact up to 2^120.
        let mut coeff: u128 = 1;
        let mut sum: u128 = 1;
        for i in 1..=m as u128 {
            coeff = coeff * (n as u128 - i + 1) / i;
            sum += coeff;
        }
        return sum as f64 * 0.5f64.powi(n as i32);
    }
    // ln C(n, i) by recurrence; terms grow with i up to m, so scale by the last.
    let mut log_coeffs = Vec::with_capacity(m as usize + 1);
    let mut lc = 0.0f64;
    log_coeffs.push(lc);
    for i in 1..=m {
        lc += ((n - i + 1) as f64 / i as f64).ln();
        log_coeffs.push(lc);
    }
    let top = lc;
    let scaled: f64 = log_coeffs.iter().map(|l| (l - top).exp()).sum();
    (top - n as f64 * std::f64::consts::LN_2 + scaled.ln()).exp()
}

#[derive(Serialize, Deserialize)]
struct ProfileFile {
    schema_version: String,
    #[serde(flatten)]
    profile: EvaluationProfile,
}

pub fn profile_to_json(profile: &EvaluationProfile) -> String {
    let file = ProfileFile {
        schema_version: PROFILE_SCHEMA_VERSION.to_owned(),
        profile: profile.clone(),
    };
    serde_json::to_string_pretty(&file).expect("profile serializes")
}

/// Write a profile as a JSON object with `schema_version` "1".
pub fn export_profile(profile: &EvaluationProfile, path: &Path) -> Result<(), EvalError> {
    let mut body = profile_to_json(profile);
    body.push('\n');
    fs::write(path, body).map_err(|e| EvalError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn load_profile(path: &Path) -> Result<EvaluationProfile, EvalError> {
    let io = |message: String| EvalError::Io {
        path: path.to_path_buf(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
    let file: ProfileFile = serde_json::from_str(&text).map_err(|e| io(e.to_string()))?;
    if file.schema_version != PROFILE_SCHEMA_VERSION {
        return Err(EvalError::SchemaVersion(file.schema_version));
    }
    Ok(file.profile)
}
