//! Run configuration: command-line flags over an optional `key=value` file
//! over per-command defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use nhrabi::diagnostics::{EpsilonMode, Tracking, DEFAULT_EPSILON};
use nhrabi::gfunction::SERIES_TOLERANCE;
use nhrabi::model::FockSpace;
use nhrabi::solver::SeedSource;
use nhrabi::Parity;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Gfun,
    Spectrum,
    Ep,
    Degenerate,
    Fs,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Gfun => "gfun",
            CommandKind::Spectrum => "spectrum",
            CommandKind::Ep => "ep",
            CommandKind::Degenerate => "degenerate",
            CommandKind::Fs => "fs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// A configuration problem; maps to exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// Every key accepted on the command line and in config files.
pub const KEYS: &[&str] = &[
    "branches",
    "complex",
    "cutoff",
    "delta",
    "e-max",
    "e-min",
    "epsilon",
    "format",
    "g",
    "g-max",
    "g-min",
    "im-max",
    "im-min",
    "im-steps",
    "interval",
    "jobs",
    "levels",
    "n",
    "out",
    "parity",
    "plot-script",
    "seed-source",
    "steps",
    "tol",
    "tracking",
];

fn defaults(command: CommandKind) -> BTreeMap<&'static str, String> {
    let mut d: BTreeMap<&'static str, String> = BTreeMap::new();
    let mut set = |k: &'static str, v: &str| {
        d.insert(k, v.to_string());
    };
    set("cutoff", &FockSpace::DEFAULT_CUTOFF.to_string());
    set("tol", &SERIES_TOLERANCE.to_string());
    set("format", if matches!(command, CommandKind::Ep | CommandKind::Degenerate) { "json" } else { "csv" });
    set("seed-source", "oracle");
    set("complex", "false");
    set("plot-script", "false");
    set("levels", "8");
    set("tracking", "branch");
    set("epsilon", &DEFAULT_EPSILON.to_string());
    set("im-min", "0");
    set("im-max", "1");
    set("im-steps", "101");
    set("n", "1");
    match command {
        CommandKind::Gfun => {
            set("steps", "2001");
        }
        CommandKind::Spectrum => {
            set("g-min", "0");
            set("g-max", "1");
            set("steps", "201");
        }
        CommandKind::Ep | CommandKind::Degenerate => {
            set("steps", "301");
        }
        CommandKind::Fs => {
            set("g-min", "0.3");
            set("g-max", "0.7");
            set("steps", "401");
            set("branches", "1,3,5");
        }
    }
    d
}

/// Reads `key = value` lines; `#` starts a comment.
pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read config file {}: {e}", path.display())))?;
    parse_config_text(&text)
}

pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("config line {}: expected key=value", i + 1)))?;
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(bad(format!("config line {}: unknown key '{key}'", i + 1)));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: CommandKind,
    pub delta: f64,
    pub g: Option<f64>,
    pub g_min: Option<f64>,
    pub g_max: Option<f64>,
    pub steps: usize,
    pub e_min: Option<f64>,
    pub e_max: Option<f64>,
    pub im_min: f64,
    pub im_max: f64,
    pub im_steps: usize,
    pub complex: bool,
    pub cutoff: usize,
    pub tol: f64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub jobs: Option<usize>,
    pub seed_source: SeedSource,
    pub levels: usize,
    pub n: Vec<usize>,
    pub parity: Option<Parity>,
    pub interval: Option<usize>,
    pub branches: Vec<usize>,
    pub epsilon: EpsilonMode,
    pub tracking: Tracking,
    pub plot_script: bool,
    /// Resolved key/value view, printed by `--show-config`.
    pub resolved: BTreeMap<String, String>,
}

fn real(map: &BTreeMap<String, String>, key: &str) -> Result<Option<f64>, ConfigError> {
    match map.get(key) {
        None => Ok(None),
        Some(s) => {
            let v: f64 = s.parse().map_err(|_| bad(format!("--{key}: '{s}' is not a number")))?;
            if !v.is_finite() {
                return Err(bad(format!("--{key} must be finite")));
            }
            Ok(Some(v))
        }
    }
}

fn count(map: &BTreeMap<String, String>, key: &str) -> Result<Option<usize>, ConfigError> {
    map.get(key)
        .map(|s| s.parse::<usize>().map_err(|_| bad(format!("--{key}: '{s}' is not a non-negative integer"))))
        .transpose()
}

fn flag(map: &BTreeMap<String, String>, key: &str) -> Result<bool, ConfigError> {
    match map.get(key).map(String::as_str) {
        None | Some("false") | Some("0") | Some("no") => Ok(false),
        Some("true") | Some("1") | Some("yes") | Some("") => Ok(true),
        Some(other) => Err(bad(format!("--{key}: '{other}' is not a boolean"))),
    }
}

fn list(map: &BTreeMap<String, String>, key: &str) -> Result<Vec<usize>, ConfigError> {
    match map.get(key) {
        None => Ok(Vec::new()),
        Some(s) => s
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| bad(format!("--{key}: '{t}' is not a non-negative integer"))))
            .collect(),
    }
}

impl RunConfig {
    /// Merges defaults, config-file entries and flags, in increasing priority.
    pub fn resolve(
        command: CommandKind,
        file: &[(String, String)],
        flags: &[(String, String)],
    ) -> Result<Self, ConfigError> {
        let mut map: BTreeMap<String, String> = defaults(command).into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        for (k, v) in file.iter().chain(flags) {
            map.insert(k.clone(), v.clone());
        }
        // a single coupling replaces the grid
        if flags.iter().any(|(k, _)| k == "g") || (file.iter().any(|(k, _)| k == "g") && !flags.iter().any(|(k, _)| k == "g-min" || k == "g-max")) {
            if let Some(g) = map.get("g").cloned() {
                // gfun steps count energies, not couplings
                if matches!(command, CommandKind::Spectrum | CommandKind::Fs) {
                    map.insert("g-min".into(), g.clone());
                    map.insert("g-max".into(), g);
                    map.insert("steps".into(), "1".into());
                }
            }
        }

        let delta = real(&map, "delta")?.ok_or_else(|| bad("--delta is required"))?;
        let g = real(&map, "g")?;
        let g_min = real(&map, "g-min")?;
        let g_max = real(&map, "g-max")?;
        for (name, v) in [("g", g), ("g-min", g_min), ("g-max", g_max)] {
            if v.is_some_and(|v| v < 0.0) {
                return Err(bad(format!("--{name} must be non-negative")));
            }
        }
        if let (Some(a), Some(b)) = (g_min, g_max) {
            if a > b {
                return Err(bad("--g-min must not exceed --g-max"));
            }
        }
        let steps = count(&map, "steps")?.unwrap_or(1);
        if steps < 1 {
            return Err(bad("--steps must be at least 1"));
        }
        let e_min = real(&map, "e-min")?;
        let e_max = real(&map, "e-max")?;
        if let (Some(a), Some(b)) = (e_min, e_max) {
            if a > b {
                return Err(bad("--e-min must not exceed --e-max"));
            }
        }
        let im_min = real(&map, "im-min")?.unwrap_or(0.0);
        let im_max = real(&map, "im-max")?.unwrap_or(1.0);
        if im_min > im_max {
            return Err(bad("--im-min must not exceed --im-max"));
        }
        let im_steps = count(&map, "im-steps")?.unwrap_or(1).max(1);
        let cutoff = count(&map, "cutoff")?.unwrap_or(FockSpace::DEFAULT_CUTOFF);
        if cutoff < 1 {
            return Err(bad("--cutoff must be at least 1"));
        }
        let tol = real(&map, "tol")?.unwrap_or(SERIES_TOLERANCE);
        if !(tol > 0.0) {
            return Err(bad("--tol must be positive"));
        }
        let format = match map.get("format").map(String::as_str) {
            Some("csv") => Format::Csv,
            Some("json") => Format::Json,
            other => return Err(bad(format!("--format must be csv or json, got {other:?}"))),
        };
        let jobs = count(&map, "jobs")?;
        if jobs == Some(0) {
            return Err(bad("--jobs must be at least 1"));
        }
        let seed_source = match map.get("seed-source").map(String::as_str) {
            Some("oracle") => SeedSource::Oracle,
            Some("grid") => SeedSource::Grid,
            other => return Err(bad(format!("--seed-source must be oracle or grid, got {other:?}"))),
        };
        let levels = count(&map, "levels")?.unwrap_or(8);
        if levels < 1 {
            return Err(bad("--levels must be at least 1"));
        }
        let parity = match map.get("parity") {
            None => None,
            Some(s) => Some(Parity::from_symbol(s).ok_or_else(|| bad(format!("--parity must be + or -, got '{s}'")))?),
        };
        let epsilon = match map.get("epsilon").map(String::as_str) {
            Some("grid") => EpsilonMode::GridStep,
            _ => {
                let e = real(&map, "epsilon")?.unwrap_or(DEFAULT_EPSILON);
                if !(e > 0.0) {
                    return Err(bad("--epsilon must be positive or 'grid'"));
                }
                EpsilonMode::Fixed(e)
            }
        };
        let tracking = match map.get("tracking").map(String::as_str) {
            Some("branch") => Tracking::Branch,
            Some("sorted") => Tracking::Sorted,
            other => return Err(bad(format!("--tracking must be branch or sorted, got {other:?}"))),
        };
        let n = list(&map, "n")?;
        if n.contains(&0) {
            return Err(bad("--n pole-line indices start at 1"));
        }

        Ok(RunConfig {
            command,
            delta,
            g,
            g_min,
            g_max,
            steps,
            e_min,
            e_max,
            im_min,
            im_max,
            im_steps,
            complex: flag(&map, "complex")?,
            cutoff,
            tol,
            out: map.get("out").filter(|s| !s.is_empty()).map(PathBuf::from),
            format,
            jobs,
            seed_source,
            levels,
            n,
            parity,
            interval: count(&map, "interval")?,
            branches: list(&map, "branches")?,
            epsilon,
            tracking,
            plot_script: flag(&map, "plot-script")?,
            resolved: map,
        })
    }

    /// Coupling grid: `steps` evenly spaced points from `g-min` to `g-max`.
    pub fn g_grid(&self) -> Result<Vec<f64>, ConfigError> {
        let lo = self.g_min.or(self.g).ok_or_else(|| bad("--g or --g-min/--g-max is required"))?;
        let hi = self.g_max.or(self.g).unwrap_or(lo);
        Ok(linspace(lo, hi, self.steps))
    }

    pub fn space(&self) -> FockSpace {
        FockSpace::new(self.cutoff).expect("cutoff validated at resolve time")
    }

    pub fn show(&self) -> String {
        let mut out = format!("command={}\n", self.command.name());
        for (k, v) in &self.resolved {
            out.push_str(&format!("{k}={v}\n"));
        }
        out
    }
}

/// `count` points from `lo` to `hi` inclusive; a single point is `lo`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 || hi == lo {
        return vec![lo];
    }
    (0..count).map(|i| if i + 1 == count { hi } else { lo + (hi - lo) * i as f64 / (count - 1) as f64 }).collect()
}
