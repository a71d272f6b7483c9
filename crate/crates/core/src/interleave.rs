//! Building the list a user sees, and crediting clicks on it.
//!
//! Two presentation methods exist: an A/B split that serves one side's list
//! whole, and team-draft interleaving that mixes both lists while remembering
//! which side ("team") contributed each entry.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InterleaveError {
    #[error("traffic fraction {0} outside [0, 1]")]
    InvalidFraction(f64),
    #[error("k must be at least 1")]
    InvalidCutoff,
    #[error("click position {position} out of range for a list of {len}")]
    PositionOutOfRange { position: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Team {
    Baseline,
    Experimental,
    /// Credited to neither side.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresentationMethod {
    AbBaseline,
    AbExperimental,
    TeamDraft,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterleavedEntry {
    pub record_id: String,
    pub team: Team,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterleavedList {
    pub entries: Vec<InterleavedEntry>,
    pub method: PresentationMethod,
    pub rng_seed: u64,
}

impl InterleavedList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The team-free view handed to users and click models.
    pub fn documents(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.record_id.clone()).collect()
    }

    pub fn team_count(&self, team: Team) -> usize {
        self.entries.iter().filter(|e| e.team == team).count()
    }

    /// Serve one side's list unchanged (truncated to `k`), every entry
    /// labelled with that side.
    pub fn whole_list(method: PresentationMethod, list: &[String], k: usize, rng_seed: u64) -> Self {
        let team = match method {
            PresentationMethod::AbExperimental => Team::Experimental,
            _ => Team::Baseline,
        };
        InterleavedList {
            entries: list
                .iter()
                .take(k)
                .map(|id| InterleavedEntry {
                    record_id: id.clone(),
                    team,
                })
                .collect(),
            method,
            rng_seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    Baseline,
    Experimental,
    Tie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub winner: Winner,
    pub clicks_baseline: u32,
    pub clicks_experimental: u32,
}

impl SessionOutcome {
    pub fn total_clicks(&self) -> u32 {
        self.clicks_baseline + self.clicks_experimental
    }
}

/// A/B arm for one session: draw `u` as the first uniform of
/// `SplitMix64(session_seed)`; experimental iff `u < fraction`.
pub fn ab_assign(session_seed: u64, traffic_fraction_experimental: f64) -> Result<PresentationMethod, InterleaveError> {
    if !(0.0..=1.0).contains(&traffic_fraction_experimental) {
        return Err(InterleaveError::InvalidFraction(traffic_fraction_experimental));
    }
    let u = SplitMix64::new(session_seed).next_f64();
    Ok(if u < traffic_fraction_experimental {
        PresentationMethod::AbExperimental
    } else {
        PresentationMethod::AbBaseline
    })
}

/// Team-draft interleaving of `baseline` (team A) and `experimental` (team B).
///
/// While fewer than `k` entries are placed: the team with fewer picks drafts
/// next; on equal counts a coin decides (`next_f64() < 0.5` → baseline) when
/// both teams still have unused documents, otherwise the only team with
/// documents left drafts. The drafting team appends its highest-ranked
/// document not yet in the list. Drafting stops when the team due to pick
/// has nothing left, so team sizes never differ by more than one.
pub fn team_draft_interleave(
    baseline: &[String],
    experimental: &[String],
    k: usize,
    rng_seed: u64,
) -> Result<InterleavedList, InterleaveError> {
    if k == 0 {
        return Err(InterleaveError::InvalidCutoff);
    }
    let mut rng = SplitMix64::new(rng_seed);
    let mut used: HashSet<&str> = HashSet::new();
    let mut entries = Vec::with_capacity(k);
    let (mut next_a, mut next_b) = (0usize, 0usize);
    let (mut picks_a, mut picks_b) = (0usize, 0usize);

    while entries.len() < k {
        while next_a < baseline.len() && used.contains(baseline[next_a].as_str()) {
            next_a += 1;
        }
        while next_b < experimental.len() && used.contains(experimental[next_b].as_str()) {
            next_b += 1;
        }
        let a_left = next_a < baseline.len();
        let b_left = next_b < experimental.len();
        let team = match picks_a.cmp(&picks_b) {
            std::cmp::Ordering::Less if a_left => Team::Baseline,
            std::cmp::Ordering::Greater if b_left => Team::Experimental,
            std::cmp::Ordering::Equal => match (a_left, b_left) {
                (true, true) => {
                    if rng.next_f64() < 0.5 {
                        Team::Baseline
                    } else {
                        Team::Experimental
                    }
                }
                (true, false) => Team::Baseline,
                (false, true) => Team::Experimental,
                (false, false) => break,
            },
            _ => break,
        };
        let doc = match team {
            Team::Baseline => {
                picks_a += 1;
                &baseline[next_a]
            }
            _ => {
                picks_b += 1;
                &experimental[next_b]
            }
        };
        used.insert(doc.as_str());
        entries.push(InterleavedEntry {
            record_id: doc.clone(),
            team,
        });
    }
    Ok(InterleavedList {
        entries,
        method: PresentationMethod::TeamDraft,
        rng_seed,
    })
}

/// Count clicks per team. Team-draft sessions are won by the team with
/// strictly more clicks; A/B sessions credit every click to the served side
/// and always report a tie.
pub fn assign_credit(shown: &InterleavedList, clicked_positions: &BTreeSet<usize>) -> Result<SessionOutcome, InterleaveError> {
    if let Some(&position) = clicked_positions.iter().find(|&&p| p >= shown.len()) {
        return Err(InterleaveError::PositionOutOfRange {
            position,
            len: shown.len(),
        });
    }
    let clicks = clicked_positions.len() as u32;
    let outcome = match shown.method {
        PresentationMethod::AbBaseline => SessionOutcome {
            winner: Winner::Tie,
            clicks_baseline: clicks,
            clicks_experimental: 0,
        },
        PresentationMethod::AbExperimental => SessionOutcome {
            winner: Winner::Tie,
            clicks_baseline: 0,
            clicks_experimental: clicks,
        },
        PresentationMethod::TeamDraft => {
            let count = |team| {
                clicked_positions
                    .iter()
                    .filter(|&&p| shown.entries[p].team == team)
                    .count() as u32
            };
            let (b, e) = (count(Team::Baseline), count(Team::Experimental));
            SessionOutcome {
                winner: match b.cmp(&e) {
                    std::cmp::Ordering::Greater => Winner::Baseline,
                    std::cmp::Ordering::Less => Winner::Experimental,
                    std::cmp::Ordering::Equal => Winner::Tie,
                },
                clicks_baseline: b,
                clicks_experimental: e,
            }
        }
    };
    Ok(outcome)
}
