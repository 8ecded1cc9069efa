use std::io::{self, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tickbench_core::bench::{
    build_report, emit_report, export_trajectories, load_results, run_matrix, write_results,
    BenchMatrix, ReportFormat, RunSelector,
};
use tickbench_core::executor::wire::{connect_and_serve, WirePlanner, DEFAULT_HARD_TIMEOUT};
use tickbench_core::policy::PolicySpec;
use tickbench_core::{
    evaluate, run_episode, DisturbanceProfile, Error, ExecutionMode, InProcessPlanner, MapModel,
    MetricOptions, RunConfig, RunRecord,
};

#[derive(Parser)]
#[command(
    name = "tickbench",
    version,
    about = "Multi-agent motion-planning simulator and benchmark harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and write its ground-truth log.
    Simulate {
        /// Map document; the bundled figure-eight when omitted.
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// constant | pursuit | random | wire:HOST:PORT | stdio
        #[arg(long, default_value = "pursuit")]
        policy: String,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<ExecutionMode>,
        /// Disturbance preset (sim | twin | lab), overriding the config.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Log path; a `.meta.json` sidecar is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a benchmark matrix and write a results directory.
    Bench {
        /// Matrix document; the 27-run desk matrix when omitted.
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate a results directory into a table.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "md")]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve episodes to external planners connecting over TCP.
    Serve {
        #[arg(long)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for episode logs.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit after the first episode.
        #[arg(long)]
        once: bool,
    },
    /// Write plot data for one run of a results directory.
    Export {
        #[arg(long = "in")]
        input: PathBuf,
        /// closest-cd | closest-cd:ENV | ENV/CELL
        #[arg(long, default_value = "closest-cd")]
        select: RunSelector,
        #[arg(long)]
        out: PathBuf,
    },
    /// Attach a built-in policy to a running tick server.
    PolicyClient {
        #[arg(long)]
        connect: String,
        #[arg(long, default_value = "pursuit")]
        policy: String,
    },
}

fn parse_mode(s: &str) -> Result<ExecutionMode, String> {
    match s {
        "direct" => Ok(ExecutionMode::Direct),
        "follow" => Ok(ExecutionMode::Follow),
        _ => Err(format!("unknown mode {s:?} (direct | follow)")),
    }
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Episode(String),
    Protocol(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Episode(_) => 3,
            Failure::Protocol(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Episode(m) => write!(f, "episode failed: {m}"),
            Failure::Protocol(m) => write!(f, "protocol error: {m}"),
        }
    }
}

// Setup errors (reading inputs) are configuration problems regardless of kind.
fn setup(e: Error) -> Failure {
    Failure::Config(e.to_string())
}

fn running(e: Error) -> Failure {
    if e.is_protocol() {
        Failure::Protocol(e.to_string())
    } else if e.is_config() {
        Failure::Config(e.to_string())
    } else {
        Failure::Episode(e.to_string())
    }
}

fn load_map(path: Option<&Path>) -> Result<MapModel, Failure> {
    match path {
        Some(p) => MapModel::load(p).map_err(setup),
        None => Ok(MapModel::bundled_loop_intersection()),
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    match path {
        Some(p) => RunConfig::load(p).map_err(setup),
        None => Ok(RunConfig::default()),
    }
}

fn builtin_policy(name: &str) -> Result<PolicySpec, Failure> {
    PolicySpec::from_name(name).ok_or_else(|| {
        Failure::Config(format!(
            "unknown policy {name:?} (constant | pursuit | random)"
        ))
    })
}

fn save_record(record: &RunRecord, out: &Path) -> Result<(), Failure> {
    let dir = out
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = out
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("run.jsonl");
    let stem = name.strip_suffix(".jsonl").unwrap_or(name);
    std::fs::create_dir_all(dir).map_err(|e| Failure::Config(e.to_string()))?;
    let io = |e: Error| Failure::Episode(format!("writing {}: {e}", out.display()));
    let mut log = io::BufWriter::new(std::fs::File::create(out).map_err(|e| io(e.into()))?);
    record.write_jsonl(&mut log).map_err(io)?;
    log.flush().map_err(|e| io(e.into()))?;
    let mut meta =
        std::fs::File::create(dir.join(format!("{stem}.meta.json"))).map_err(|e| io(e.into()))?;
    record.write_meta(&mut meta).map_err(io)?;
    meta.write_all(b"\n").map_err(|e| io(e.into()))
}

fn summarize(record: &RunRecord, map: &MapModel) -> String {
    match evaluate(record, map, &MetricOptions::default()) {
        Ok(m) => serde_json::to_string(&m).unwrap_or_default(),
        Err(e) => format!("{{\"error\":{:?}}}", e.to_string()),
    }
}

fn simulate(
    map: Option<PathBuf>,
    config: Option<PathBuf>,
    policy: String,
    mode: Option<ExecutionMode>,
    preset: Option<String>,
    seed: Option<u64>,
    out: PathBuf,
) -> Result<(), Failure> {
    let map = load_map(map.as_deref())?;
    let mut cfg = load_config(config.as_deref())?;
    if let Some(mode) = mode {
        cfg.mode = mode;
    }
    if let Some(name) = preset {
        cfg.disturbance = DisturbanceProfile::preset(&name).ok_or_else(|| {
            Failure::Config(format!("unknown preset {name:?} (sim | twin | lab)"))
        })?;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(setup)?;

    let record = if let Some(addr) = policy.strip_prefix("wire:") {
        let listener =
            TcpListener::bind(addr).map_err(|e| Failure::Config(format!("bind {addr}: {e}")))?;
        eprintln!(
            "listening on {}",
            listener.local_addr().map_err(|e| setup(e.into()))?
        );
        let mut planner = WirePlanner::accept(&listener, DEFAULT_HARD_TIMEOUT).map_err(running)?;
        run_episode(&cfg, &map, &mut planner).map_err(running)?
    } else if policy == "stdio" {
        // stdout belongs to the planner; nothing else may be printed there
        let mut planner = WirePlanner::new(BufReader::new(io::stdin()), io::stdout());
        let record = run_episode(&cfg, &map, &mut planner).map_err(running)?;
        save_record(&record, &out)?;
        eprintln!("{}", summarize(&record, &map));
        return Ok(());
    } else {
        let policy = builtin_policy(&policy)?.build();
        let mut planner = InProcessPlanner::new(policy.as_ref());
        run_episode(&cfg, &map, &mut planner).map_err(running)?
    };
    save_record(&record, &out)?;
    println!("{}", summarize(&record, &map));
    Ok(())
}

fn bench(matrix: Option<PathBuf>, map: Option<PathBuf>, out: PathBuf) -> Result<(), Failure> {
    let map = load_map(map.as_deref())?;
    let matrix = match matrix {
        Some(p) => BenchMatrix::load(p).map_err(setup)?,
        None => BenchMatrix::desk_default(&map).map_err(setup)?,
    };
    let run = run_matrix(&matrix, &map).map_err(running)?;
    write_results(&out, &matrix, &run).map_err(running)?;
    for env in &run.results.environments {
        let failed = env.failed().count();
        eprintln!("{}: {} runs, {} failed", env.name, env.cells.len(), failed);
    }
    Ok(())
}

fn report(input: PathBuf, format: ReportFormat, out: Option<PathBuf>) -> Result<(), Failure> {
    let results = load_results(&input).map_err(setup)?;
    let report = build_report(&results).map_err(setup)?;
    let text = emit_report(&report, format).map_err(setup)?;
    match out {
        Some(p) => std::fs::write(&p, text).map_err(|e| Failure::Config(e.to_string())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn serve(
    host: String,
    port: u16,
    map: Option<PathBuf>,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    once: bool,
) -> Result<(), Failure> {
    let map = load_map(map.as_deref())?;
    let cfg = load_config(config.as_deref())?;
    let listener = TcpListener::bind((host.as_str(), port))
        .map_err(|e| Failure::Config(format!("bind {host}:{port}: {e}")))?;
    eprintln!(
        "listening on {}",
        listener.local_addr().map_err(|e| setup(e.into()))?
    );
    for episode in 0.. {
        let outcome = WirePlanner::accept(&listener, DEFAULT_HARD_TIMEOUT)
            .and_then(|mut planner| run_episode(&cfg, &map, &mut planner))
            .map_err(running);
        match outcome {
            Ok(record) => {
                if let Some(dir) = &out {
                    save_record(&record, &dir.join(format!("episode_{episode:04}.jsonl")))?;
                }
                println!("{}", summarize(&record, &map));
            }
            Err(f) if once => return Err(f),
            Err(f) => log::warn!("episode {episode}: {f}"),
        }
        if once {
            break;
        }
    }
    Ok(())
}

fn export(input: PathBuf, select: RunSelector, out: PathBuf) -> Result<(), Failure> {
    let (label, csv) = export_trajectories(&input, &select).map_err(|e| match e {
        Error::Io(_) | Error::Parse(_) | Error::UnknownRun(_) | Error::Empty(_) => setup(e),
        other => running(other),
    })?;
    std::fs::write(&out, csv).map_err(|e| Failure::Config(e.to_string()))?;
    eprintln!("exported {label} to {}", out.display());
    Ok(())
}

fn policy_client(connect: String, policy: String) -> Result<(), Failure> {
    let policy = builtin_policy(&policy)?.build();
    let ticks = connect_and_serve(connect.as_str(), policy.as_ref()).map_err(|e| match e {
        Error::Io(e) => Failure::Protocol(format!("connection to {connect}: {e}")),
        other => running(other),
    })?;
    eprintln!("served {ticks} ticks");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let result = match Cli::parse().command {
        Command::Simulate {
            map,
            config,
            policy,
            mode,
            preset,
            seed,
            out,
        } => simulate(map, config, policy, mode, preset, seed, out),
        Command::Bench { matrix, map, out } => bench(matrix, map, out),
        Command::Report { input, format, out } => report(input, format, out),
        Command::Serve {
            port,
            host,
            map,
            config,
            out,
            once,
        } => serve(host, port, map, config, out, once),
        Command::Export { input, select, out } => export(input, select, out),
        Command::PolicyClient { connect, policy } => policy_client(connect, policy),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("tickbench: {f}");
            ExitCode::from(f.code())
        }
    }
}
