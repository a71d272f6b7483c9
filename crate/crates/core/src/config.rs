//! Lab and campaign configuration (TOML).

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clicksim::ClickModel;
use crate::corpus::synth::SiteProfile;
use crate::lab::{CandidateRotation, ExperimentDraft, ExperimentMethod};
use crate::site::{Site, SiteError};
use crate::systems::{default_registry, SystemDescriptor, Task};

pub const DEFAULT_BIND_ADDR: &str = "127.0.0.1:8080";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("site {site}: {source}")]
    Site { site: String, source: SiteError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub profile: SiteProfile,
    pub scale: u64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteConfig {
    pub site_id: String,
    /// A directory written by `lab gen-corpus`.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
}

impl SiteConfig {
    pub fn load(&self) -> Result<Site, ConfigError> {
        let wrap = |source| ConfigError::Site {
            site: self.site_id.clone(),
            source,
        };
        match (&self.dir, &self.synthetic) {
            (Some(dir), None) => Site::load_dir(&self.site_id, dir).map_err(wrap),
            (None, Some(s)) => Site::generate(&self.site_id, s.profile, s.scale, s.seed).map_err(wrap),
            _ => Err(ConfigError::Invalid(format!(
                "site {}: set exactly one of dir and synthetic",
                self.site_id
            ))),
        }
    }
}

pub fn default_sites() -> Vec<SiteConfig> {
    vec![
        SiteConfig {
            site_id: "livivo-desk".into(),
            dir: None,
            synthetic: Some(SyntheticSpec {
                profile: SiteProfile::LifeScience,
                scale: 25_000,
                seed: 1,
            }),
        },
        SiteConfig {
            site_id: "gesis-desk".into(),
            dir: None,
            synthetic: Some(SyntheticSpec {
                profile: SiteProfile::SocialScience,
                scale: 100,
                seed: 2,
            }),
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClickModelSpec {
    #[serde(default = "default_model")]
    pub model: ClickModel,
    /// PBM examination per rank; `1/(i+1)` when absent.
    #[serde(default)]
    pub examination: Option<Vec<f64>>,
    #[serde(default = "default_continuation")]
    pub continuation: f64,
}

fn default_model() -> ClickModel {
    ClickModel::Pbm
}

fn default_continuation() -> f64 {
    0.5
}

impl Default for ClickModelSpec {
    fn default() -> Self {
        ClickModelSpec {
            model: default_model(),
            examination: None,
            continuation: default_continuation(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UsersSpec {
    #[serde(default = "default_zipf")]
    pub zipf_exponent: f64,
}

fn default_zipf() -> f64 {
    1.0
}

impl Default for UsersSpec {
    fn default() -> Self {
        UsersSpec {
            zipf_exponent: default_zipf(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    /// Name of a built-in experiment preset.
    #[serde(default)]
    pub preset: Option<String>,
    /// Inline experiment; overrides `preset`.
    #[serde(default)]
    pub experiment: Option<ExperimentDraft>,
    pub sessions: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub click_model: ClickModelSpec,
    #[serde(default)]
    pub users: UsersSpec,
}

impl CampaignConfig {
    /// The experiment to run. Unless set inline, the experiment seed is
    /// derived from the master seed.
    pub fn experiment(&self) -> Result<ExperimentDraft, ConfigError> {
        if self.sessions == 0 {
            return Err(ConfigError::Invalid("campaign sessions must be at least 1".into()));
        }
        if let Some(draft) = &self.experiment {
            return Ok(draft.clone());
        }
        let name = self
            .preset
            .as_deref()
            .ok_or_else(|| ConfigError::Invalid("campaign needs a preset or an inline experiment".into()))?;
        let mut draft = preset(name).ok_or_else(|| {
            ConfigError::Invalid(format!("unknown preset {name:?}; known: {}", PRESETS.join(", ")))
        })?;
        draft.seed = crate::rng::stream_seed(self.master_seed, "experiment", 0);
        Ok(draft)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabConfig {
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
    #[serde(default = "default_bind")]
    pub bind_addr: String,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: u64,
    #[serde(default)]
    pub ui_dir: Option<PathBuf>,
    #[serde(default = "yes")]
    pub include_default_systems: bool,
    #[serde(default)]
    pub sites: Vec<SiteConfig>,
    #[serde(default)]
    pub systems: Vec<SystemDescriptor>,
    #[serde(default)]
    pub campaign: Option<CampaignConfig>,
}

fn default_data_dir() -> PathBuf {
    PathBuf::from("lab-data")
}

fn default_bind() -> String {
    DEFAULT_BIND_ADDR.to_owned()
}

fn default_snapshot_every() -> u64 {
    crate::lab::DEFAULT_SNAPSHOT_EVERY
}

fn yes() -> bool {
    true
}

impl Default for LabConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config parses")
    }
}

impl LabConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Read a config file; relative paths inside it resolve against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut config = LabConfig::parse(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data_dir);
        if let Some(ui) = self.ui_dir.as_mut() {
            fix(ui);
        }
        for site in &mut self.sites {
            if let Some(dir) = site.dir.as_mut() {
                fix(dir);
            }
        }
        for system in &mut self.systems {
            if let Some(run) = system.run_path.as_mut() {
                fix(run);
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.bind_socket()?;
        for system in &self.systems {
            system
                .validate()
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        if let Some(campaign) = &self.campaign {
            campaign.experiment()?;
        }
        Ok(())
    }

    pub fn bind_socket(&self) -> Result<SocketAddr, ConfigError> {
        self.bind_addr
            .parse()
            .map_err(|_| ConfigError::Invalid(format!("bind_addr {:?} is not host:port", self.bind_addr)))
    }

    /// Site configs, falling back to the two desk sites.
    pub fn site_configs(&self) -> Vec<SiteConfig> {
        if self.sites.is_empty() {
            default_sites()
        } else {
            self.sites.clone()
        }
    }

    /// Load only the sites in `only` (all when `None`).
    pub fn load_sites(&self, only: Option<&[&str]>) -> Result<Vec<Site>, ConfigError> {
        self.site_configs()
            .iter()
            .filter(|s| only.is_none_or(|ids| ids.contains(&s.site_id.as_str())))
            .map(SiteConfig::load)
            .collect()
    }

    pub fn system_descriptors(&self) -> Vec<SystemDescriptor> {
        let mut all = if self.include_default_systems {
            default_registry()
        } else {
            Vec::new()
        };
        all.extend(self.systems.iter().cloned());
        all
    }
}

pub const PRESETS: &[&str] = &["adhoc-life-science", "dataset-recommendation"];

/// Named experiments mirroring the two evaluation campaigns of the lab.
pub fn preset(name: &str) -> Option<ExperimentDraft> {
    let draft = |site: &str, task, baseline: &str, candidates: &[&str]| ExperimentDraft {
        site_id: site.into(),
        task,
        baseline_system: baseline.into(),
        candidate_systems: candidates.iter().map(|c| c.to_string()).collect(),
        method: ExperimentMethod::TeamDraft,
        traffic_fraction_experimental: 0.5,
        candidate_rotation: CandidateRotation::RoundRobin,
        k: crate::systems::DEFAULT_K,
        seed: 0,
    };
    match name {
        "adhoc-life-science" => Some(draft(
            "livivo-desk",
            Task::AdhocRetrieval,
            "bm25",
            &["tfidf-cosine", "recency-bm25"],
        )),
        "dataset-recommendation" => Some(draft(
            "gesis-desk",
            Task::DatasetRecommendation,
            "topic-jaccard",
            &["abstract-tfidf"],
        )),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_has_defaults() {
        let c = LabConfig::default();
        assert_eq!(c.bind_addr, DEFAULT_BIND_ADDR);
        assert!(c.include_default_systems);
        assert_eq!(c.site_configs().len(), 2);
        assert!(c.campaign.is_none());
    }

    #[test]
    fn presets_resolve() {
        for name in PRESETS {
            assert!(preset(name).unwrap().validate().is_ok());
        }
        assert!(preset("nope").is_none());
    }

    #[test]
    fn campaign_rules() {
        let text = r#"
            [campaign]
            preset = "adhoc-life-science"
            sessions = 0
        "#;
        let c = LabConfig::parse(text, Path::new("x.toml")).unwrap();
        assert!(c.validate().is_err());

        let text = r#"
            [campaign]
            sessions = 5
            master_seed = 9
            [campaign.experiment]
            site_id = "gesis-desk"
            task = "dataset_recommendation"
            baseline_system = "topic-jaccard"
            candidate_systems = ["shuffled-datasets"]
            method = "team_draft"
            seed = 4
            [campaign.click_model]
            model = "cascade"
            continuation = 0.3
        "#;
        let c = LabConfig::parse(text, Path::new("x.toml")).unwrap();
        let campaign = c.campaign.as_ref().unwrap();
        let draft = campaign.experiment().unwrap();
        assert_eq!((draft.seed, draft.k), (4, 10));
        assert_eq!(campaign.click_model.model, ClickModel::Cascade);
        assert_eq!(campaign.users.zipf_exponent, 1.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(LabConfig::parse("colour = 3", Path::new("x.toml")).is_err());
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lab.toml");
        fs::write(
            &path,
            "data_dir = \"d\"\n[[sites]]\nsite_id = \"a\"\ndir = \"corp\"\n",
        )
        .unwrap();
        let c = LabConfig::load(&path).unwrap();
        assert_eq!(c.data_dir, dir.path().join("d"));
        assert_eq!(c.sites[0].dir.as_ref().unwrap(), &dir.path().join("corp"));
        assert!(LabConfig::load(&dir.path().join("missing.toml")).is_err());
    }
}
