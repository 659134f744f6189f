use std::fmt::Write as _;
use std::fs;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use motion_retouch::engine::{
    run_copy, run_retouch, run_teach, InterventionProfile, InterventionSource, InterventionTimeline, LiveConfig,
    LiveSession, LogTable, Scenario, SuccessReport,
};
use motion_retouch::tape::Tape;
use motion_retouch::Error;

/// Scenario names that are not existing paths are looked up here.
const SCENARIO_DIR_ENV: &str = "RETOUCH_SCENARIO_DIR";

#[derive(Parser, Debug)]
#[command(name = "motion-retouch", version, about = "Teach, speed up, copy and retouch motion tapes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Record a tape by bilateral teaching.
    Teach(TeachArgs),
    /// Resample a tape to run `factor` times faster.
    Speedup(SpeedupArgs),
    /// Play a tape back on the follower, repeatedly.
    Copy(CopyArgs),
    /// Replay a tape while an editor pushes on it, and record the result.
    Retouch(RetouchArgs),
    /// Extract one joint signal from run logs for plotting.
    Export(ExportArgs),
    /// Print the effective scenario as TOML.
    Scenario(ScenarioArgs),
}

#[derive(Args, Debug)]
struct ScenarioOpt {
    /// Scenario file or name. Defaults to the built-in tube transfer.
    #[arg(long)]
    scenario: Option<String>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct TeachArgs {
    #[command(flatten)]
    sc: ScenarioOpt,
    #[arg(long)]
    out: PathBuf,
    /// Run log path. Defaults to `<out>.log.csv`.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SpeedupArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    factor: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CopyArgs {
    #[command(flatten)]
    sc: ScenarioOpt,
    #[arg(long)]
    tape: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    trials: u32,
    /// Write one log per trial into this directory.
    #[arg(long)]
    log_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RetouchArgs {
    #[command(flatten)]
    sc: ScenarioOpt,
    #[arg(long)]
    tape: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Scripted intervention profile (TOML).
    #[arg(long)]
    intervention: Option<PathBuf>,
    /// Recorded intervention timeline (JSON) from a live session.
    #[arg(long)]
    timeline: Option<PathBuf>,
    /// Serve a live session instead of a scripted intervention.
    #[arg(long)]
    live: bool,
    #[arg(long, default_value_t = 8080, requires = "live")]
    port: u16,
    #[arg(long, default_value = "127.0.0.1", requires = "live")]
    bind: IpAddr,
    /// Start the live session paused until the client sends `start`.
    #[arg(long, requires = "live")]
    paused: bool,
    /// Override the blend weight.
    #[arg(long)]
    alpha: Option<f64>,
    /// Run log path. Defaults to `<out>.log.csv`.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Signal {
    Angle,
    Torque,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum RoleArg {
    Leader,
    Follower,
    Editor,
}

#[derive(Args, Debug)]
struct ExportArgs {
    /// One or more run logs. Several logs are averaged step by step.
    #[arg(long = "log", required = true, num_args = 1..)]
    logs: Vec<PathBuf>,
    #[arg(long, value_enum)]
    what: Signal,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=8))]
    joint: u8,
    #[arg(long, value_enum, default_value = "follower")]
    role: RoleArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    #[command(flatten)]
    sc: ScenarioOpt,
    /// Write to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Error with the exit code it maps to.
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure { code: 2, msg: msg.into() }
    }
}

/// Bad inputs are usage errors. Anything that goes wrong once a run has
/// started is a runtime failure.
impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Diverged { .. } | Error::NonFinite { .. } | Error::Stream(_) | Error::Protocol(_) => 1,
            Error::Io { .. } => 1,
            _ => 2,
        };
        Failure { code, msg: e.to_string() }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Teach(a) => teach(a),
        Command::Speedup(a) => speedup(a),
        Command::Copy(a) => copy(a),
        Command::Retouch(a) => retouch(a),
        Command::Export(a) => export(a),
        Command::Scenario(a) => dump_scenario(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn resolve_scenario_path(name: &str) -> CliResult<PathBuf> {
    let direct = PathBuf::from(name);
    if direct.is_file() {
        return Ok(direct);
    }
    if let Some(dir) = std::env::var_os(SCENARIO_DIR_ENV) {
        let dir = PathBuf::from(dir);
        for candidate in [dir.join(name), dir.join(format!("{name}.scn"))] {
            if candidate.is_file() {
                return Ok(candidate);
            }
        }
    }
    Err(Failure::usage(format!("scenario file not found: {name}")))
}

fn load_scenario(opt: &ScenarioOpt) -> CliResult<Scenario> {
    let mut sc = match &opt.scenario {
        Some(name) => {
            let path = resolve_scenario_path(name)?;
            Scenario::load(&path).map_err(|e| Failure::usage(e.to_string()))?
        }
        None => Scenario::default(),
    };
    if let Some(seed) = opt.seed {
        sc.seed = seed;
    }
    Ok(sc)
}

fn load_tape(path: &Path) -> CliResult<Tape> {
    Tape::load(path).map_err(|e| Failure::usage(e.to_string()))
}

/// Writes the effective scenario next to `out` and prints a one-line echo.
/// Passing the sidecar back as `--scenario` reproduces the run.
fn echo_config(sc: &Scenario, out: &Path) -> CliResult<PathBuf> {
    let path = out.with_extension("config.toml");
    fs::write(&path, sc.to_toml()).map_err(|e| Failure { code: 1, msg: format!("{}: {e}", path.display()) })?;
    println!("config: scenario={} hash={} seed={} -> {}", sc.name, sc.hash(), sc.seed, path.display());
    Ok(path)
}

fn default_log_path(out: &Path) -> PathBuf {
    out.with_extension("log.csv")
}

fn report_line(r: &SuccessReport) -> String {
    match r.failure {
        None => format!("success (depth {:.4} m, peak lateral {:.2} N)", r.final_depth, r.max_lateral_force),
        Some(f) => format!("failure: {} (region {:?}, depth {:.4} m)", f.as_str(), r.final_region, r.final_depth),
    }
}

fn teach(a: TeachArgs) -> CliResult {
    let sc = load_scenario(&a.sc)?;
    echo_config(&sc, &a.out)?;
    let run = run_teach(&sc)?;
    let log_path = a.log.unwrap_or_else(|| default_log_path(&a.out));
    run.tape.save(&a.out)?;
    run.log.save(&log_path)?;
    println!("tape: {} ({} rows)", a.out.display(), run.tape.len());
    println!("log: {}", log_path.display());
    println!("teach follower: {}", report_line(&run.report));
    Ok(())
}

fn speedup(a: SpeedupArgs) -> CliResult {
    let tape = load_tape(&a.input)?;
    let fast = tape.speed_up(a.factor)?;
    fast.save(&a.out)?;
    println!(
        "tape: {} ({} rows -> {} rows, speed factor {})",
        a.out.display(),
        tape.len(),
        fast.len(),
        fast.meta.speed_factor
    );
    Ok(())
}

fn copy(a: CopyArgs) -> CliResult {
    let sc = load_scenario(&a.sc)?;
    let tape = load_tape(&a.tape)?;
    match &a.log_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Failure { code: 1, msg: format!("{}: {e}", dir.display()) })?;
            echo_config(&sc, &dir.join("scenario"))?;
        }
        None => println!("config: scenario={} hash={} seed={}", sc.name, sc.hash(), sc.seed),
    }
    let mut successes = 0;
    let mut lines = String::new();
    for i in 0..a.trials {
        let seed = sc.seed.wrapping_add(i as u64);
        let run = run_copy(&tape, &sc, seed)?;
        if run.report.success {
            successes += 1;
        }
        let _ = writeln!(lines, "trial {:>2} seed {seed}: {}", i + 1, report_line(&run.report));
        if let Some(dir) = &a.log_dir {
            run.log.save(dir.join(format!("trial-{:02}.csv", i + 1)))?;
        }
    }
    print!("{lines}");
    println!("success: {successes}/{}", a.trials);
    Ok(())
}

fn retouch(a: RetouchArgs) -> CliResult {
    let mut sc = load_scenario(&a.sc)?;
    if let Some(alpha) = a.alpha {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Failure::usage("--alpha must be in [0, 1]"));
        }
        sc.gains.alpha = alpha;
    }
    let flags = [a.intervention.is_some(), a.timeline.is_some(), a.live].iter().filter(|f| **f).count();
    let embedded = sc.intervention.is_some() || sc.live;
    if flags > 1 || (flags == 0 && !embedded) {
        return Err(Failure::usage("give exactly one of --intervention, --timeline, --live"));
    }
    let tape = load_tape(&a.tape)?;
    echo_config(&sc, &a.out)?;
    let log_path = a.log.unwrap_or_else(|| default_log_path(&a.out));

    if a.live || (flags == 0 && sc.live) {
        let mut cfg = LiveConfig::new(&a.out);
        cfg.start_paused = a.paused;
        let session = LiveSession::bind(SocketAddr::new(a.bind, a.port), cfg)?;
        println!("live session on ws://{}", session.local_addr()?);
        let outcome = session.run(&tape, &sc)?;
        outcome.run.log.save(&log_path)?;
        match &outcome.saved {
            Some(path) => println!("tape: {}", path.display()),
            None => println!("session ended without save; no tape written"),
        }
        println!("log: {}", log_path.display());
        println!(
            "stats: stale {} rejected {} clamped {} snapshots dropped {}",
            outcome.stats.stale_dropped, outcome.stats.rejected, outcome.stats.clamped, outcome.stats.snapshots_dropped
        );
        println!("retouch follower: {}", report_line(&outcome.run.report));
        return Ok(());
    }

    let profile;
    let timeline;
    let source = if let Some(path) = &a.intervention {
        profile = InterventionProfile::load(path).map_err(|e| Failure::usage(e.to_string()))?;
        InterventionSource::Profile(&profile)
    } else if let Some(path) = &a.timeline {
        timeline = InterventionTimeline::load(path).map_err(|e| Failure::usage(e.to_string()))?;
        InterventionSource::Timeline(&timeline)
    } else {
        InterventionSource::Profile(sc.intervention.as_ref().expect("checked above"))
    };
    let run = run_retouch(&tape, &sc, source)?;
    run.tape.save(&a.out)?;
    run.log.save(&log_path)?;
    println!("tape: {} ({} rows)", a.out.display(), run.tape.len());
    println!("log: {}", log_path.display());
    println!("retouch follower: {}", report_line(&run.report));
    Ok(())
}

fn export_column(what: Signal, role: RoleArg, joint: u8) -> String {
    let role = match role {
        RoleArg::Leader => "leader",
        RoleArg::Follower => "follower",
        RoleArg::Editor => "editor",
    };
    let field = match what {
        Signal::Angle => "q",
        Signal::Torque => "tau",
    };
    format!("{role}_{field}{joint}")
}

fn export(a: ExportArgs) -> CliResult {
    let column = export_column(a.what, a.role, a.joint);
    let mut t: Vec<f64> = Vec::new();
    let mut sum: Vec<f64> = Vec::new();
    for path in &a.logs {
        let table = LogTable::load(path).map_err(|e| Failure::usage(e.to_string()))?;
        let values =
            table.column(&column).ok_or_else(|| Failure::usage(format!("{}: no column {column}", path.display())))?;
        let times = table.column("t").ok_or_else(|| Failure::usage(format!("{}: no column t", path.display())))?;
        if sum.is_empty() {
            t = times;
            sum = values;
        } else if values.len() != sum.len() {
            return Err(Failure::usage(format!(
                "{}: {} rows, expected {} like the first log",
                path.display(),
                values.len(),
                sum.len()
            )));
        } else {
            for (s, v) in sum.iter_mut().zip(values) {
                *s += v;
            }
        }
    }
    let n = a.logs.len() as f64;
    let mut text = format!("t,{column}\n");
    for (ti, s) in t.iter().zip(&sum) {
        let _ = writeln!(text, "{ti},{}", s / n);
    }
    fs::write(&a.out, text).map_err(|e| Failure { code: 1, msg: format!("{}: {e}", a.out.display()) })?;
    println!("{}: {} rows of {column}, mean over {} log(s)", a.out.display(), t.len(), a.logs.len());
    Ok(())
}

fn dump_scenario(a: ScenarioArgs) -> CliResult {
    let sc = load_scenario(&a.sc)?;
    let text = sc.to_toml();
    match &a.out {
        Some(path) => {
            fs::write(path, text).map_err(|e| Failure { code: 1, msg: format!("{}: {e}", path.display()) })?
        }
        None => print!("{text}"),
    }
    Ok(())
}
