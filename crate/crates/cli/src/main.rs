//! `relaxkit` command-line front-end.

mod commands;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use relaxkit::io::{write_atomic, write_json};
use serde::{Deserialize, Serialize};
use serde_json::json;

use commands::{
    CondkArgs, FieldArgs, GapArgs, H1Args, H2Args, Lemma32Args, Outcome, RecoverArgs, SequenceArgs, SliceArgs,
};

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_COMPUTE: u8 = 2;
const EXIT_VERDICT: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "relaxkit", version, about = "Relaxation toolkit for scalar integral functionals")]
struct Cli {
    /// Output directory; reports are also printed to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Exit with status 3 when the report verdict fails.
    #[arg(long = "assert", global = true)]
    assert_verdict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Command {
    /// Convex envelope of a slice: envelope CSV plus certificate JSON.
    Envelope(SliceArgs),
    /// Detachment set of a slice.
    Detach(SliceArgs),
    /// Condition (K) verdict for a gallery entry.
    Condk(CondkArgs),
    /// Raw and relaxed energies of a field.
    Relax(FieldArgs),
    /// Laminate sequence realizing the relaxed energy.
    Sequence(SequenceArgs),
    /// Strong-recovery sequence for fields off the detachment set.
    Recover(RecoverArgs),
    /// Lavrentiev gap scan on one-dimensional meshes.
    Gap(GapArgs),
    /// Growth condition (H1) on the moving infimum.
    H1check(H1Args),
    /// Growth bound (H2) on g(x, u, 0).
    H2check(H2Args),
    /// Two-route comparison of the relaxed moving infimum.
    Lemma32(Lemma32Args),
    /// Gallery utilities.
    Gallery {
        #[command(subcommand)]
        action: GalleryAction,
    },
    /// Re-run a saved run_config.json.
    Replay { config: PathBuf },
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum GalleryAction {
    /// One line per built-in entry.
    List,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Serialize, Deserialize)]
struct RunConfig {
    tool: String,
    version: String,
    command: Command,
}

fn diag(level: &str, kind: &str, message: &str) {
    let rec = json!({ "level": level, "kind": kind, "message": message });
    eprintln!("{rec}");
}

fn unix_seconds() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn configure_threads() -> Result<usize, String> {
    let Ok(v) = std::env::var("RELAXKIT_THREADS") else {
        return Ok(rayon::current_num_threads());
    };
    let n: usize = v.trim().parse().map_err(|_| format!("RELAXKIT_THREADS must be a positive integer, got `{v}`"))?;
    if n == 0 {
        return Err("RELAXKIT_THREADS must be positive".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    Ok(n)
}

fn dispatch(cmd: &Command) -> relaxkit::Result<Outcome> {
    match cmd {
        Command::Envelope(a) => commands::envelope_cmd(a),
        Command::Detach(a) => commands::detach(a),
        Command::Condk(a) => commands::condk(a),
        Command::Relax(a) => commands::relax(a),
        Command::Sequence(a) => commands::sequence(a),
        Command::Recover(a) => commands::recover(a),
        Command::Gap(a) => commands::gap(a),
        Command::H1check(a) => commands::h1check(a),
        Command::H2check(a) => commands::h2check(a),
        Command::Lemma32(a) => commands::lemma32(a),
        Command::Gallery { action: GalleryAction::List } => commands::gallery_list(),
        Command::Replay { .. } => unreachable!("replay is resolved before dispatch"),
    }
}

fn write_outputs(
    dir: &Path,
    config: &RunConfig,
    outcome: &Outcome,
    started: f64,
    threads: usize,
) -> relaxkit::Result<()> {
    for (name, bytes) in &outcome.files {
        write_atomic(&dir.join(name), bytes)?;
    }
    write_json(&dir.join("run_config.json"), config)?;
    let meta = json!({
        "started_unix": started,
        "finished_unix": unix_seconds(),
        "threads": threads,
        "files": outcome.files.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
    });
    write_atomic(&dir.join("run_meta.json"), format!("{meta}\n").as_bytes())
}

fn run(cli: Cli) -> u8 {
    let started = unix_seconds();
    let threads = match configure_threads() {
        Ok(n) => n,
        Err(e) => {
            diag("error", "usage", &e);
            return EXIT_USAGE;
        }
    };
    let command = match cli.command {
        Command::Replay { config } => {
            let loaded = std::fs::read_to_string(&config)
                .map_err(|e| e.to_string())
                .and_then(|text| serde_json::from_str::<RunConfig>(&text).map_err(|e| e.to_string()));
            match loaded {
                Ok(RunConfig { command: Command::Replay { .. }, .. }) => {
                    diag("error", "usage", "a replay config cannot itself be a replay");
                    return EXIT_USAGE;
                }
                Ok(rc) => rc.command,
                Err(e) => {
                    diag("error", "usage", &format!("cannot load {}: {e}", config.display()));
                    return EXIT_USAGE;
                }
            }
        }
        c => c,
    };
    let config = RunConfig { tool: "relaxkit".into(), version: env!("CARGO_PKG_VERSION").into(), command };
    let outcome = match dispatch(&config.command) {
        Ok(o) => o,
        Err(e) => {
            let kind = match e {
                relaxkit::Error::InvalidArgument(_)
                | relaxkit::Error::UnknownEntry { .. }
                | relaxkit::Error::Parse(_) => "usage",
                _ => "computation",
            };
            diag("error", kind, &e.to_string());
            return if kind == "usage" { EXIT_USAGE } else { EXIT_COMPUTE };
        }
    };
    // A closed pipe (e.g. `| head`) is not an error for us.
    {
        use std::io::Write;
        let _ = writeln!(std::io::stdout().lock(), "{}", outcome.report);
    }
    if let Some(dir) = &cli.out {
        if let Err(e) = write_outputs(dir, &config, &outcome, started, threads) {
            diag("error", "io", &e.to_string());
            return EXIT_COMPUTE;
        }
    }
    diag("info", "verdict", &format!("{}: {}", outcome.verdict_name, if outcome.verdict { "pass" } else { "fail" }));
    if cli.assert_verdict && !outcome.verdict {
        return EXIT_VERDICT;
    }
    EXIT_OK
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::from(EXIT_OK);
            }
            let msg = e.to_string();
            diag("error", "usage", msg.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(EXIT_USAGE);
        }
    };
    ExitCode::from(run(cli))
}
