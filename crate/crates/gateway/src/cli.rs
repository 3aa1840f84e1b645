//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 for invalid input or refused operations, 2
//! for I/O failures.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use chrono::Utc;
use clap::{Args, Parser, Subcommand, ValueEnum};
use gapquest_core::analytics::{self, Format};
use gapquest_core::challenge::{BuildStatus, ChallengeState};
use gapquest_core::orchestrator::{
    EngineError, ProjectConfig, ProjectHandle, ProjectState, RunInput, Store, StoreError,
};
use gapquest_core::quest::QuestState;
use thiserror::Error;

use crate::api::{router, AppState};
use crate::tokens::{TokenError, TokenFile};

#[derive(Debug, Parser)]
#[command(name = "gapquest", version, about = "Turn test gaps into challenges, quests and a leaderboard")]
pub struct Cli {
    /// State directory holding all projects.
    #[arg(long, global = true, env = "GAPQUEST_STATE_DIR", default_value = "state")]
    pub state_dir: PathBuf,
    /// Project to operate on.
    #[arg(long, global = true, env = "GAPQUEST_PROJECT")]
    pub project: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a project.
    Init {
        /// Seed for all random draws of the project.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Manage users.
    #[command(subcommand)]
    User(UserCommand),
    /// Feed CI runs.
    #[command(subcommand)]
    Run(RunCommand),
    /// Reject a current challenge and receive a replacement.
    Reject {
        #[arg(long)]
        user: String,
        #[arg(long)]
        challenge: String,
        #[arg(long)]
        reason: String,
    },
    /// Show a user's score, challenges, quest and achievements.
    Status {
        #[arg(long)]
        user: String,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Per-user statistics.
    #[command(subcommand)]
    Stats(StatsCommand),
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: std::net::IpAddr,
    },
}

#[derive(Debug, Subcommand)]
pub enum UserCommand {
    /// Register a user and print their API token.
    Add {
        /// User id, also used in URLs and file names.
        id: String,
        #[arg(long)]
        name: String,
        #[arg(long)]
        team: Option<String>,
        #[arg(long, default_value_t = 0)]
        avatar: u8,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StatusArg {
    Success,
    Failure,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub user: String,
    #[arg(long)]
    pub commit: String,
    #[arg(long, value_enum)]
    pub status: StatusArg,
    #[arg(long)]
    pub coverage: PathBuf,
    #[arg(long)]
    pub mutations: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    pub tests: Vec<PathBuf>,
    /// Refuse the run unless it gets this sequence number.
    #[arg(long)]
    pub run_seq: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum RunCommand {
    /// Ingest the artifacts of one CI run.
    Ingest(IngestArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum StatsCommand {
    /// Per-user rows as CSV or JSON.
    Export {
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
        /// Write to this file instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Totals, minimum, maximum and mean per metric.
    Summary,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

impl From<EngineError> for CliError {
    fn from(err: EngineError) -> Self {
        match err {
            EngineError::Store(e) => e.into(),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<StoreError> for CliError {
    fn from(err: StoreError) -> Self {
        match err {
            StoreError::NotFound(_) | StoreError::AlreadyExists(_) => CliError::Invalid(err.to_string()),
            other => CliError::Io(other.to_string()),
        }
    }
}

impl From<TokenError> for CliError {
    fn from(err: TokenError) -> Self {
        CliError::Io(err.to_string())
    }
}

fn read_file(path: &PathBuf) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn project_id(cli: &Cli) -> Result<&str, CliError> {
    cli.project
        .as_deref()
        .ok_or_else(|| CliError::Invalid("--project (or GAPQUEST_PROJECT) is required".into()))
}

fn open(cli: &Cli) -> Result<ProjectHandle, CliError> {
    let store = Store::open(&cli.state_dir)?;
    Ok(ProjectHandle::open(store, project_id(cli)?)?)
}

fn print_json(out: &mut dyn Write, value: &impl serde::Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    writeln!(out, "{text}").map_err(|e| CliError::Io(e.to_string()))
}

/// Runs one invocation, writing results to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let io = |e: io::Error| CliError::Io(e.to_string());
    match &cli.command {
        Command::Init { seed } => {
            let mut config = ProjectConfig::default();
            config.generation.seed = *seed;
            let state = ProjectState::new(project_id(&cli)?, config)?;
            let store = Store::open(&cli.state_dir)?;
            ProjectHandle::create(store, state)?;
            writeln!(out, "created project {}", project_id(&cli)?).map_err(io)?;
        }
        Command::User(UserCommand::Add {
            id,
            name,
            team,
            avatar,
        }) => {
            let handle = open(&cli)?;
            handle.update(|p| p.add_user(id, name, *avatar, team.clone()).map(|_| ()))?;
            let dir = handle.store().project_dir(project_id(&cli)?);
            let mut tokens = TokenFile::load(&dir)?;
            let token = tokens.issue(id);
            tokens.save(&dir)?;
            writeln!(out, "added user {id}\ntoken {token}").map_err(io)?;
        }
        Command::Run(RunCommand::Ingest(args)) => {
            let input = RunInput {
                commit: args.commit.clone(),
                build_status: match args.status {
                    StatusArg::Success => BuildStatus::Success,
                    StatusArg::Failure => BuildStatus::Failure,
                },
                received_at: Utc::now(),
                coverage: read_file(&args.coverage)?,
                mutations: read_file(&args.mutations)?,
                tests: args.tests.iter().map(read_file).collect::<Result<_, _>>()?,
                expected_run_seq: args.run_seq,
            };
            let handle = open(&cli)?;
            let report = handle.update(|p| p.ingest_run(&args.user, input))?;
            print_json(out, &report)?;
        }
        Command::Reject {
            user,
            challenge,
            reason,
        } => {
            let handle = open(&cli)?;
            let report = handle.update(|p| p.reject_challenge(user, challenge, reason))?;
            print_json(out, &report)?;
        }
        Command::Status { user, json } => {
            let handle = open(&cli)?;
            let snapshot = handle.snapshot();
            let record = snapshot.user(user)?;
            if *json {
                print_json(out, &record.state)?;
            } else {
                write_status(out, record).map_err(io)?;
            }
        }
        Command::Stats(StatsCommand::Export { format, output }) => {
            let store = Store::open(&cli.state_dir)?;
            let rows = analytics::load_stats(&store, project_id(&cli)?)?;
            let format = match format {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            };
            let bytes = analytics::export(&rows, format);
            match output {
                Some(path) => fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
                None => out.write_all(&bytes).map_err(io)?,
            }
        }
        Command::Stats(StatsCommand::Summary) => {
            let store = Store::open(&cli.state_dir)?;
            let rows = analytics::load_stats(&store, project_id(&cli)?)?;
            let summary = analytics::aggregate(&rows).map_err(|e| CliError::Invalid(e.to_string()))?;
            print_json(out, &summary)?;
        }
        Command::Serve { port, bind } => {
            let store = Store::open(&cli.state_dir)?;
            let addr = SocketAddr::new(*bind, *port);
            serve(store, addr)?;
        }
    }
    Ok(())
}

fn write_status(out: &mut dyn Write, record: &gapquest_core::orchestrator::UserRecord) -> io::Result<()> {
    let user = &record.state;
    writeln!(out, "{} ({})  score {}  runs {}", user.display_name, user.user_id, user.score, record.runs.len())?;
    if let Some(team) = &user.team {
        writeln!(out, "team {team}")?;
    }
    writeln!(out, "current challenges:")?;
    for c in user.challenges_in(ChallengeState::Current) {
        writeln!(out, "  {:<4} {:<16} {:>2} pts  {}", c.id, c.kind.as_str(), c.points, c.description)?;
    }
    let solved = user.challenges_in(ChallengeState::Solved).count();
    let rejected = user.challenges_in(ChallengeState::Rejected).count();
    writeln!(out, "solved {solved}, rejected {rejected}")?;
    match user.current_quest() {
        Some(q) => writeln!(out, "quest {}: {} ({} %)", q.id, q.description(), q.percent())?,
        None => writeln!(out, "no current quest")?,
    }
    let completed = user.quests_in(QuestState::Completed).count();
    writeln!(out, "quests completed {completed}")?;
    let keys: Vec<&str> = user.achievements.keys().map(String::as_str).collect();
    writeln!(out, "achievements: {}", if keys.is_empty() { "none".into() } else { keys.join(", ") })
}

fn serve(store: Store, addr: SocketAddr) -> Result<(), CliError> {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::Io(format!("{addr}: {e}")))?;
        eprintln!("listening on http://{addr}");
        let app = router(Arc::new(AppState::new(store)));
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::Io(e.to_string()))
    })
}

/// Parses `args` and runs the command. Usage errors exit with 1.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return ExitCode::from(code);
        }
    };
    match execute(cli, out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
