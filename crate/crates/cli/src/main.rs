//! `nhrabi`: spectra, intersections and diagnostics of the PT-symmetric
//! quantum Rabi model from the command line.
//!
//! Exit codes: 0 complete, 1 partial output (failures listed in a sidecar
//! file, or on stderr when writing to stdout), 2 configuration error.

mod commands;
mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{read_config_file, CommandKind, RunConfig};

#[derive(Parser)]
#[command(name = "nhrabi", version, about = "Exact spectrum of the PT-symmetric quantum Rabi model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// G-functions on a real energy grid, or ln|G|² on a complex grid with --complex
    Gfun,
    /// Oracle and G-function spectrum over a coupling grid
    Spectrum,
    /// Exceptional points: one window with --g-min/--g-max, otherwise a survey
    Ep,
    /// Doubly degenerate crossings on pole lines --n
    Degenerate,
    /// Fidelity susceptibility and c-product scans for --branches
    Fs,
}

impl From<Command> for CommandKind {
    fn from(c: Command) -> Self {
        match c {
            Command::Gfun => CommandKind::Gfun,
            Command::Spectrum => CommandKind::Spectrum,
            Command::Ep => CommandKind::Ep,
            Command::Degenerate => CommandKind::Degenerate,
            Command::Fs => CommandKind::Fs,
        }
    }
}

/// Values stay strings here; typing and validation happen after the config
/// file has been merged in.
#[derive(Args)]
struct Flags {
    #[arg(long, global = true, allow_hyphen_values = true)]
    delta: Option<String>,
    #[arg(long, global = true)]
    g: Option<String>,
    #[arg(long, global = true)]
    g_min: Option<String>,
    #[arg(long, global = true)]
    g_max: Option<String>,
    /// Number of grid points
    #[arg(long, global = true)]
    steps: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    e_min: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    e_max: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    im_min: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    im_max: Option<String>,
    #[arg(long, global = true)]
    im_steps: Option<String>,
    /// Complex-plane grid for gfun
    #[arg(long, global = true)]
    complex: bool,
    /// Photon cutoff N_ph
    #[arg(long, global = true)]
    cutoff: Option<String>,
    /// Relative series tolerance
    #[arg(long, global = true)]
    tol: Option<String>,
    #[arg(long, global = true)]
    out: Option<String>,
    /// csv or json
    #[arg(long, global = true)]
    format: Option<String>,
    #[arg(long, global = true)]
    jobs: Option<String>,
    /// oracle or grid
    #[arg(long, global = true)]
    seed_source: Option<String>,
    /// Number of lowest levels kept
    #[arg(long, global = true)]
    levels: Option<String>,
    /// Pole-line indices, comma separated
    #[arg(long, global = true)]
    n: Option<String>,
    /// + or -
    #[arg(long, global = true, allow_hyphen_values = true)]
    parity: Option<String>,
    /// Inter-pole interval for ep
    #[arg(long, global = true)]
    interval: Option<String>,
    /// Levels to scan, comma separated
    #[arg(long, global = true)]
    branches: Option<String>,
    /// Finite-difference step, or 'grid' to use the grid spacing
    #[arg(long, global = true)]
    epsilon: Option<String>,
    /// branch or sorted
    #[arg(long, global = true)]
    tracking: Option<String>,
    /// Write a plotting script next to --out
    #[arg(long, global = true)]
    plot_script: bool,
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print the resolved configuration and exit
    #[arg(long, global = true)]
    show_config: bool,
}

impl Flags {
    fn pairs(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut put = |k: &str, v: &Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v.clone()));
            }
        };
        put("delta", &self.delta);
        put("g", &self.g);
        put("g-min", &self.g_min);
        put("g-max", &self.g_max);
        put("steps", &self.steps);
        put("e-min", &self.e_min);
        put("e-max", &self.e_max);
        put("im-min", &self.im_min);
        put("im-max", &self.im_max);
        put("im-steps", &self.im_steps);
        put("cutoff", &self.cutoff);
        put("tol", &self.tol);
        put("out", &self.out);
        put("format", &self.format);
        put("jobs", &self.jobs);
        put("seed-source", &self.seed_source);
        put("levels", &self.levels);
        put("n", &self.n);
        put("parity", &self.parity);
        put("interval", &self.interval);
        put("branches", &self.branches);
        put("epsilon", &self.epsilon);
        put("tracking", &self.tracking);
        if self.complex {
            out.push(("complex".into(), "true".into()));
        }
        if self.plot_script {
            out.push(("plot-script".into(), "true".into()));
        }
        out
    }
}

const EXIT_PARTIAL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".failures");
    PathBuf::from(name)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = CommandKind::from(cli.command);
    let file = match cli.flags.config.as_deref().map(read_config_file).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let config = match RunConfig::resolve(command, &file, &cli.flags.pairs()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if cli.flags.show_config {
        print!("{}", config.show());
        return ExitCode::SUCCESS;
    }

    let result = match config.jobs {
        Some(jobs) => match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(pool) => pool.install(|| commands::run(&config)),
            Err(e) => {
                eprintln!("configuration error: cannot start {jobs} worker threads: {e}");
                return ExitCode::from(EXIT_CONFIG);
            }
        },
        None => commands::run(&config),
    };
    let outcome = match result {
        Ok(o) => o,
        Err(e @ (nhrabi::Error::Config(_) | nhrabi::Error::Argument(_) | nhrabi::Error::UnsupportedParameter(_))) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_PARTIAL);
        }
    };

    if let Err(e) = emit(&config, &outcome) {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_PARTIAL);
    }
    if outcome.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_PARTIAL)
    }
}

fn emit(config: &RunConfig, outcome: &commands::Outcome) -> anyhow::Result<()> {
    use anyhow::Context;
    match &config.out {
        Some(path) => {
            std::fs::write(path, &outcome.body).with_context(|| format!("writing {}", path.display()))?;
            let side = sidecar(path);
            if outcome.failures.is_empty() {
                if side.exists() {
                    std::fs::remove_file(&side).with_context(|| format!("removing stale {}", side.display()))?;
                }
            } else {
                std::fs::write(&side, outcome.failures.join("\n") + "\n").with_context(|| format!("writing {}", side.display()))?;
            }
            if config.plot_script {
                let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                if let Some(script) = commands::plot_script(config.command, &name) {
                    let mut target = path.as_os_str().to_owned();
                    target.push(".plot.py");
                    std::fs::write(PathBuf::from(target), script).context("writing plot script")?;
                }
            }
        }
        None => {
            std::io::stdout().lock().write_all(outcome.body.as_bytes()).context("writing stdout")?;
            for f in &outcome.failures {
                eprintln!("failure: {f}");
            }
        }
    }
    Ok(())
}
