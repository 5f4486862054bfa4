use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use meetcues_core::wav::WavAudio;
use meetcues_core::{EngagementWeights, Event, MeetingId, Normalization, SnippetConfig};
use meetcues_server::api::{self, ApiConfig};
use meetcues_server::service::{FileOutbox, MailNotifier, Notifier, NullNotifier, Service, ServiceConfig};
use meetcues_server::sim::generate::{generate, Burst, GenerateConfig};
use meetcues_server::sim::verify::verify;
use meetcues_server::sim::{extract_offline, simulate, SimOptions, Target, Trace};
use meetcues_server::store::{Durability, FileStore};

#[derive(Parser)]
#[command(name = "meetcues", version, about = "Meeting back-channel server and simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP server.
    Serve(ServeArgs),
    /// Replay a trace against a live server or in-process.
    Simulate(SimulateArgs),
    /// Write a seeded synthetic trace.
    Generate(GenerateArgs),
    /// Replay a trace offline and check it against brute-force oracles.
    Verify(VerifyArgs),
    /// Regenerate and print the summary of an ended meeting in a data directory.
    Summarize(SummarizeArgs),
    /// Cut snippets from an event log and a recording without a server.
    Snippets(SnippetsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum NormalizationArg {
    Max,
    Total,
}

#[derive(Args, Clone)]
struct SnippetArgs {
    /// Minimum normalized engagement for a slice to be kept.
    #[arg(long, env = "MEETCUES_SNIPPET_THRESHOLD", default_value_t = 0.3)]
    snippet_threshold: f64,
    #[arg(long, env = "MEETCUES_BUCKET_SECONDS", default_value_t = 60)]
    bucket_seconds: u32,
    /// Lead-in and tail padding added to each snippet.
    #[arg(long, default_value_t = 0)]
    pad_seconds: u32,
    #[arg(long, value_enum, default_value = "max")]
    normalization: NormalizationArg,
}

impl SnippetArgs {
    fn config(&self) -> Result<SnippetConfig> {
        let normalization = match self.normalization {
            NormalizationArg::Max => Normalization::Max,
            NormalizationArg::Total => Normalization::Total,
        };
        Ok(SnippetConfig::new(self.bucket_seconds, self.snippet_threshold, EngagementWeights::default(), self.pad_seconds)?
            .with_normalization(normalization))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum NotifierArg {
    Outbox,
    Null,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "MEETCUES_LISTEN", default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    #[arg(long, env = "MEETCUES_DATA_DIR", default_value = "data")]
    data_dir: PathBuf,
    #[command(flatten)]
    snippets: SnippetArgs,
    /// Subscribers that cannot take a push message within this budget are dropped.
    #[arg(long, env = "MEETCUES_PUSH_LATENCY_BUDGET_MS", default_value_t = 1000)]
    push_latency_budget_ms: u64,
    /// Trust the X-Sim-Time-Ms and X-Sim-Seed headers. Never in production.
    #[arg(long)]
    simulation: bool,
    /// fsync every log append.
    #[arg(long)]
    fsync: bool,
    /// Base URL used in summary notifications.
    #[arg(long, env = "MEETCUES_PUBLIC_URL")]
    public_url: Option<String>,
    #[arg(long, value_enum, default_value = "outbox")]
    notifier: NotifierArg,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Server base URL; omit to run in-process.
    #[arg(long)]
    target: Option<String>,
    /// Replay speed-up; `inf` issues actions back to back.
    #[arg(long, default_value = "inf")]
    speed: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Issue reactions that share a timestamp concurrently.
    #[arg(long)]
    parallel: bool,
    #[command(flatten)]
    snippets: SnippetArgs,
    /// Write the full run report (per-action outcomes) here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write summary.json here.
    #[arg(long)]
    summary_out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    attendees: usize,
    /// Meeting length in seconds.
    #[arg(long)]
    duration: f64,
    /// `start_s:end_s:events_per_min`; repeatable.
    #[arg(long = "burst")]
    bursts: Vec<Burst>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Upload a tone recording of this sample rate at start.
    #[arg(long)]
    audio_rate: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Expected summary.json to diff against.
    #[arg(long)]
    expected: Option<PathBuf>,
    #[command(flatten)]
    snippets: SnippetArgs,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long)]
    meeting: String,
    #[arg(long, env = "MEETCUES_DATA_DIR", default_value = "data")]
    data_dir: PathBuf,
    #[command(flatten)]
    snippets: SnippetArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SnippetsArgs {
    /// Event log (NDJSON, one event per line).
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    audio: PathBuf,
    /// Meeting length; defaults to the longer of the audio and the log.
    #[arg(long)]
    duration_ms: Option<u64>,
    #[arg(long, default_value_t = 0)]
    offset_ms: u64,
    #[arg(long, default_value = "offline")]
    meeting: String,
    #[command(flatten)]
    snippets: SnippetArgs,
    /// Directory receiving `<meeting>/snippets/*.wav`.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn write_output(path: Option<&PathBuf>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.write_all(b"\n")?;
            Ok(())
        }
    }
}

fn read_trace(path: &PathBuf) -> Result<Trace> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Trace::parse(&text)?)
}

async fn serve(args: ServeArgs) -> Result<()> {
    let durability = if args.fsync { Durability::Sync } else { Durability::Flush };
    let store = FileStore::open(&args.data_dir, durability)?;
    let notifier: Arc<dyn Notifier> = match args.notifier {
        NotifierArg::Outbox => {
            Arc::new(MailNotifier::new(FileOutbox::new(&args.data_dir), Some(args.data_dir.join("notifier"))))
        }
        NotifierArg::Null => Arc::new(NullNotifier),
    };
    let listener = tokio::net::TcpListener::bind(args.listen).await?;
    let addr = listener.local_addr()?;
    let config = ServiceConfig {
        snippets: args.snippets.config()?,
        public_url: args.public_url.unwrap_or_else(|| format!("http://{addr}")),
        ..Default::default()
    };
    let service = Service::open(Arc::new(store), config, notifier)?;
    let api = ApiConfig {
        simulation: args.simulation,
        push_budget: Duration::from_millis(args.push_latency_budget_ms),
        ..Default::default()
    };
    if args.simulation {
        tracing::warn!("simulation mode: client-supplied clocks are trusted");
    }
    println!("listening on {addr}");
    std::io::stdout().flush()?;
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    api::serve(listener, service, api, shutdown).await?;
    Ok(())
}

async fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Serve(args) => serve(args).await.map(|_| true),
        Command::Simulate(args) => {
            let trace = read_trace(&args.trace)?;
            let target = match &args.target {
                Some(url) => Target::live(url),
                None => Target::offline(args.snippets.config()?),
            };
            let options = SimOptions {
                speed: args.speed,
                seed: args.seed,
                parallel: args.parallel,
                audio_dir: args.trace.parent().map(PathBuf::from).unwrap_or_default(),
                ..Default::default()
            };
            let report = simulate(&trace, target, &options).await?;
            if let Some(p) = &args.report {
                write_output(Some(p), &serde_json::to_vec_pretty(&report)?)?;
            }
            if let (Some(p), Some(summary)) = (&args.summary_out, &report.summary) {
                write_output(Some(p), summary)?;
            }
            let brief = serde_json::json!({
                "meeting_id": report.meeting_id,
                "accepted": report.accepted,
                "rejected": report.rejected,
                "version": report.final_state.version,
                "attendees": report.final_state.emojis.len(),
                "state_digest": report.state_digest,
                "summary_digest": report.summary_digest,
            });
            write_output(None, serde_json::to_string_pretty(&brief)?.as_bytes())?;
            Ok(true)
        }
        Command::Generate(args) => {
            let trace = generate(&GenerateConfig {
                attendees: args.attendees,
                duration_s: args.duration,
                bursts: args.bursts,
                seed: args.seed,
                audio_rate: args.audio_rate,
            })?;
            let text = trace.to_ndjson();
            match &args.out {
                Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
            Ok(true)
        }
        Command::Verify(args) => {
            let trace = read_trace(&args.trace)?;
            let expected = args.expected.as_ref().map(std::fs::read).transpose().context("reading expected summary")?;
            let report = verify(&trace, &args.snippets.config()?, expected.as_deref()).await?;
            if args.json {
                write_output(None, &serde_json::to_vec_pretty(&report)?)?;
            } else {
                println!("{report}");
            }
            Ok(report.passed())
        }
        Command::Summarize(args) => {
            let id = MeetingId::new(args.meeting.as_str()).context("meeting id")?;
            let store = FileStore::open(&args.data_dir, Durability::Flush)?;
            let config = ServiceConfig {
                snippets: args.snippets.config()?,
                jobs: meetcues_server::service::JobMode::Inline,
                ..Default::default()
            };
            let service = Service::open(Arc::new(store), config, Arc::new(NullNotifier))?;
            service.finalize(&id)?;
            write_output(args.out.as_ref(), &service.summary_json(&id)?)?;
            Ok(true)
        }
        Command::Snippets(args) => {
            let meeting = MeetingId::new(args.meeting.as_str()).context("meeting id")?;
            let log = std::fs::read_to_string(&args.events).with_context(|| format!("reading {}", args.events.display()))?;
            let events: Vec<Event> = log
                .lines()
                .filter(|l| !l.trim().is_empty())
                .enumerate()
                .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("event line {}", i + 1)))
                .collect::<Result<_>>()?;
            meetcues_core::validate_event_log(&events)?;
            let wav = std::fs::read(&args.audio).with_context(|| format!("reading {}", args.audio.display()))?;
            let audio = WavAudio::decode(&wav)?;
            let duration_ms = match args.duration_ms {
                Some(d) => d,
                None => {
                    let audio_ms = (audio.duration_s() * 1000.0).ceil() as u64 + args.offset_ms;
                    audio_ms.max(events.last().map_or(0, |e| e.ts_ms() + 1))
                }
            };
            if duration_ms == 0 {
                bail!("meeting length is zero; pass --duration-ms");
            }
            let extracted = extract_offline(&meeting, &events, &wav, duration_ms, args.offset_ms, &args.snippets.config()?)?;
            for x in &extracted {
                let path = args.out.join(&x.snippet.path);
                if let Some(dir) = path.parent() {
                    std::fs::create_dir_all(dir)?;
                }
                std::fs::write(&path, x.audio.encode()).with_context(|| format!("writing {}", path.display()))?;
            }
            let list: Vec<_> = extracted.into_iter().map(|x| x.snippet).collect();
            write_output(None, &serde_json::to_vec_pretty(&list)?)?;
            Ok(true)
        }
    }
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    let default_level = if matches!(cli.command, Command::Serve(_)) { "info" } else { "warn" };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default_level)),
        )
        .init();
    let runtime = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            return std::process::ExitCode::FAILURE;
        }
    };
    match runtime.block_on(run(cli)) {
        Ok(true) => std::process::ExitCode::SUCCESS,
        Ok(false) => std::process::ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::from(2)
        }
    }
}
