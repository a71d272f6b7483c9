use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use livinglab::campaign::{run_campaign, Campaign, CampaignError};
use livinglab::client::LabClient;
use livinglab::clicksim::ClickModel;
use livinglab::config::LabConfig;
use livinglab::corpus::synth::SiteProfile;
use livinglab::evaluation::export_profile;
use livinglab::lab::{load_state, report_from_state, Lab, LabOptions, Report};
use livinglab::report::{render, Format};
use livinglab::site::Site;

#[derive(Parser)]
#[command(name = "lab", version, about = "Living-lab evaluation for academic search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the lab server.
    Serve(ServeArgs),
    /// Write a synthetic site: corpus, head queries, seed items and qrels.
    GenCorpus(GenArgs),
    /// Run a simulated campaign and print the report.
    Simulate(SimulateArgs),
    /// Print the report of an experiment.
    Report(ReportArgs),
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, env = "LAB_DATA_DIR")]
    data_dir: Option<PathBuf>,
    #[arg(long = "bind", env = "LAB_BIND_ADDR")]
    bind_addr: Option<String>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_parser = parse_profile)]
    profile: SiteProfile,
    #[arg(long)]
    scale: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Site id recorded in the corpus (defaults by profile).
    #[arg(long)]
    site_id: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sessions: Option<u64>,
    #[arg(long, value_parser = parse_click_model)]
    click_model: Option<ClickModel>,
    #[arg(long, default_value = "table")]
    format: Format,
    /// Persist the embedded lab here instead of keeping it in memory.
    #[arg(long, env = "LAB_DATA_DIR")]
    data_dir: Option<PathBuf>,
    /// Drive a running server instead of an embedded lab.
    #[arg(long)]
    server: Option<String>,
    /// Write one profile JSON file per candidate into this directory.
    #[arg(long)]
    profiles_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    experiment_id: String,
    #[arg(long, env = "LAB_DATA_DIR", conflicts_with = "server")]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    server: Option<String>,
    #[arg(long, default_value = "table")]
    format: Format,
}

fn parse_profile(text: &str) -> Result<SiteProfile, String> {
    SiteProfile::parse(text).ok_or_else(|| format!("unknown profile {text:?} (life_science, social_science)"))
}

fn parse_click_model(text: &str) -> Result<ClickModel, String> {
    match text {
        "pbm" => Ok(ClickModel::Pbm),
        "cascade" => Ok(ClickModel::Cascade),
        other => Err(format!("unknown click model {other:?} (pbm, cascade)")),
    }
}

/// Failures split by exit code: 2 for configuration, 1 for everything else.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

fn config_error(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn load_config(path: &Path) -> Result<LabConfig, Failure> {
    LabConfig::load(path).map_err(config_error)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve(args) => serve(args),
        Command::GenCorpus(args) => gen_corpus(args),
        Command::Simulate(args) => simulate(args),
        Command::Report(args) => report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("lab: configuration error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("lab: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn serve(args: ServeArgs) -> Result<(), Failure> {
    let mut config = load_config(&args.config)?;
    if let Some(dir) = args.data_dir {
        config.data_dir = dir;
    }
    if let Some(bind) = args.bind_addr {
        config.bind_addr = bind;
    }
    let addr = config.bind_socket().map_err(config_error)?;
    let sites = config.load_sites(None).map_err(config_error)?;
    let options = LabOptions {
        snapshot_every: config.snapshot_every,
        ..LabOptions::default()
    };
    let lab = Lab::open(&config.data_dir, sites, config.system_descriptors(), options)
        .with_context(|| format!("opening {}", config.data_dir.display()))?;
    let lab = Arc::new(lab);

    let runtime = tokio::runtime::Runtime::new()?;
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    runtime
        .block_on(livinglab::lab::http::serve(
            Arc::clone(&lab),
            addr,
            config.ui_dir.clone(),
            shutdown,
            |bound| {
                println!("listening on http://{bound}");
                let _ = std::io::stdout().flush();
            },
        ))
        .with_context(|| format!("serving on {addr}"))?;
    lab.snapshot().context("writing final snapshot")?;
    eprintln!("lab: snapshot written, shutting down");
    Ok(())
}

fn gen_corpus(args: GenArgs) -> Result<(), Failure> {
    if args.scale == 0 {
        return Err(config_error(anyhow!("--scale must be at least 1")));
    }
    let site_id = args.site_id.unwrap_or_else(|| {
        match args.profile {
            SiteProfile::LifeScience => "livivo-desk",
            SiteProfile::SocialScience => "gesis-desk",
        }
        .to_owned()
    });
    let site = Site::generate(&site_id, args.profile, args.scale, args.seed)?;
    site.write_dir(&args.out)?;
    println!(
        "{}: {} records, {} head queries, {} seed items, {} graded pairs -> {}",
        site_id,
        site.corpus.len(),
        site.queries.len(),
        site.head_items.len(),
        site.relevance.len(),
        args.out.display()
    );
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let config = load_config(&args.config)?;
    let mut campaign_config = config
        .campaign
        .clone()
        .ok_or_else(|| config_error(anyhow!("{} has no [campaign] section", args.config.display())))?;
    if let Some(seed) = args.seed {
        campaign_config.master_seed = seed;
    }
    if let Some(sessions) = args.sessions {
        campaign_config.sessions = sessions;
    }
    if let Some(model) = args.click_model {
        campaign_config.click_model.model = model;
    }
    let campaign = Campaign::from_config(&campaign_config).map_err(config_error)?;
    let site_id = campaign.experiment.site_id.as_str();
    let mut sites = config.load_sites(Some(&[site_id])).map_err(config_error)?;
    if sites.is_empty() {
        return Err(config_error(anyhow!("experiment site {site_id} is not configured")));
    }
    let sim_site = sites.remove(0);

    let outcome = match &args.server {
        Some(url) => {
            let client = LabClient::new(url);
            if !client.health() {
                return Err(Failure::Runtime(anyhow!("lab server {url} is unreachable")));
            }
            run_campaign(&client, &sim_site, &campaign)
        }
        None => {
            let lab_site = config.load_sites(Some(&[site_id])).map_err(config_error)?;
            let options = LabOptions {
                snapshot_every: config.snapshot_every,
                ..LabOptions::default()
            };
            let lab = match &args.data_dir {
                Some(dir) => Lab::open(dir, lab_site, config.system_descriptors(), options),
                None => Lab::in_memory(lab_site, config.system_descriptors(), options),
            }?;
            run_campaign(&lab, &sim_site, &campaign)
        }
    };
    let outcome = outcome.map_err(|e| match e {
        CampaignError::Config(_) | CampaignError::ClickModel(_) => config_error(e),
        other => Failure::Runtime(other.into()),
    })?;

    if let Some(dir) = &args.profiles_dir {
        write_profiles(dir, &outcome.report)?;
    }
    print!("{}", render(&outcome.report, args.format));
    Ok(())
}

fn write_profiles(dir: &Path, report: &Report) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for profile in &report.profiles {
        let path = dir.join(format!("{}-{}.json", report.experiment_id, profile.candidate_system));
        export_profile(profile, &path)?;
    }
    Ok(())
}

fn report(args: ReportArgs) -> Result<(), Failure> {
    let report = match (&args.server, &args.data_dir) {
        (Some(url), _) => LabClient::new(url).report(&args.experiment_id)?,
        (None, Some(dir)) => {
            let state = load_state(dir)?;
            report_from_state(&state, &args.experiment_id)?
        }
        (None, None) => return Err(config_error(anyhow!("give --data-dir (or LAB_DATA_DIR) or --server"))),
    };
    print!("{}", render(&report, args.format));
    Ok(())
}
