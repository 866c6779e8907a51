//! The five subcommands. Each returns the full output text plus a list of
//! per-item failures; writing and exit codes are handled by the caller.

use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};

use nhrabi::diagnostics::{fidelity_scan, EpsilonMode, ScanOptions};
use nhrabi::gfunction::{evaluate_g_with, Derivatives, SeriesOptions};
use nhrabi::oracle::{trace_spectrum, CandidateKind, ParityLabel, Provenance, SpectrumLevel, SpectrumRecord, TraceOptions};
use nhrabi::output::{number, scan_csv, spectrum_csv};
use nhrabi::solver::{assemble_spectrum, locate_degenerate, locate_ep, EpOptions, ExceptionalPoint, SpectrumOptions, DEFAULT_DEGENERACY_RANGE};
use nhrabi::{Error, ModelParams, Parity};

use crate::config::{linspace, CommandKind, Format, RunConfig};

pub struct Outcome {
    pub body: String,
    pub failures: Vec<String>,
}

impl Outcome {
    fn complete(body: String) -> Self {
        Self { body, failures: Vec::new() }
    }
}

pub fn run(config: &RunConfig) -> Result<Outcome, Error> {
    match config.command {
        CommandKind::Gfun => gfun(config),
        CommandKind::Spectrum => spectrum(config),
        CommandKind::Ep => ep(config),
        CommandKind::Degenerate => degenerate(config),
        CommandKind::Fs => fs(config),
    }
}

fn default_e_window(config: &RunConfig) -> (f64, f64) {
    let lo = config.e_min.unwrap_or(-0.5 * config.delta.abs() - 1.0);
    let hi = config.e_max.unwrap_or(0.5 * config.levels as f64 + config.delta.abs() + 2.0);
    (lo, hi.max(lo))
}

fn series(config: &RunConfig) -> SeriesOptions {
    SeriesOptions::with_tolerance(config.tol)
}

fn json_number(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn render_json(rows: Vec<Value>) -> String {
    let mut s = serde_json::to_string_pretty(&Value::Array(rows)).expect("json values serialize");
    s.push('\n');
    s
}

fn gfun(config: &RunConfig) -> Result<Outcome, Error> {
    let g = config.g.or(config.g_min).ok_or_else(|| Error::Config("gfun needs --g".into()))?;
    let params = ModelParams::new(config.delta, g)?;
    let (e_lo, e_hi) = default_e_window(config);
    let res = linspace(e_lo, e_hi, config.steps);
    let opts = series(config);
    let ims = if config.complex { linspace(config.im_min, config.im_max, config.im_steps) } else { vec![0.0] };

    let points: Vec<(f64, f64)> = ims.iter().flat_map(|&im| res.iter().map(move |&re| (re, im))).collect();
    let values: Vec<Result<Option<(Complex64, Complex64)>, String>> = points
        .par_iter()
        .map(|&(re, im)| match evaluate_g_with(&params, Complex64::new(re, im), &opts, Derivatives::None) {
            Ok(v) if v.converged => Ok(Some((v.g_plus, v.g_minus))),
            Ok(v) => Err(format!("E={re}{im:+}i: series not converged after {} terms (tail {:e})", v.n_used, v.tail_estimate)),
            Err(Error::PoleProximity { .. }) => Ok(None),
            Err(e) => Err(format!("E={re}{im:+}i: {e}")),
        })
        .collect();

    let mut failures = Vec::new();
    let cells: Vec<(f64, f64, Option<(f64, f64)>)> = points
        .iter()
        .zip(values)
        .map(|(&(re, im), v)| {
            let v = match v {
                Ok(v) => v,
                Err(msg) => {
                    failures.push(msg);
                    None
                }
            };
            let pair = v.map(|(p, m)| if config.complex { (p.norm_sqr().ln(), m.norm_sqr().ln()) } else { (p.re, m.re) });
            (re, im, pair)
        })
        .collect();

    let body = match (config.format, config.complex) {
        (Format::Csv, false) => {
            let mut s = String::from("E,re_Gp,re_Gm\n");
            for (re, _, v) in &cells {
                let (a, b) = v.map(|(a, b)| (number(a), number(b))).unwrap_or_default();
                s.push_str(&format!("{},{a},{b}\n", number(*re)));
            }
            s
        }
        (Format::Csv, true) => {
            let mut s = String::from("re_E,im_E,ln_abs2_Gp,ln_abs2_Gm\n");
            for (re, im, v) in &cells {
                let (a, b) = v.map(|(a, b)| (number(a), number(b))).unwrap_or_default();
                s.push_str(&format!("{},{},{a},{b}\n", number(*re), number(*im)));
            }
            s
        }
        (Format::Json, false) => render_json(
            cells
                .iter()
                .map(|(re, _, v)| json!({"E": re, "re_Gp": v.map(|x| json_number(x.0)), "re_Gm": v.map(|x| json_number(x.1))}))
                .collect(),
        ),
        (Format::Json, true) => render_json(
            cells
                .iter()
                .map(|(re, im, v)| {
                    json!({"re_E": re, "im_E": im, "ln_abs2_Gp": v.map(|x| json_number(x.0)), "ln_abs2_Gm": v.map(|x| json_number(x.1))})
                })
                .collect(),
        ),
    };
    Ok(Outcome { body, failures })
}

/// Inter-pole interval holding a real energy at coupling `g`.
fn interval_of(energy: f64, g: f64) -> usize {
    let x = energy - g * g;
    if x < 0.0 {
        0
    } else {
        x.floor() as usize + 1
    }
}

fn spectrum(config: &RunConfig) -> Result<Outcome, Error> {
    let grid = config.g_grid().map_err(|e| Error::Config(e.0))?;
    let space = config.space();
    let trace = trace_spectrum(config.delta, &grid, &space, &TraceOptions::new(config.levels))?;
    let mut opts = SpectrumOptions::new(default_e_window(config), config.levels);
    opts.space = space;
    opts.series = series(config);
    opts.seed_source = config.seed_source;
    let solved = assemble_spectrum(config.delta, &grid, &opts)?;

    let mut failures = Vec::new();
    let mut rows: Vec<SpectrumRecord> = Vec::new();
    for (oracle, zeros) in trace.records.iter().zip(&solved) {
        let mut levels = oracle.levels.clone();
        for f in &zeros.failures {
            failures.push(format!("g={}: {f}", number(zeros.g)));
        }
        for z in &zeros.levels {
            let id = oracle
                .levels
                .iter()
                .filter(|o| o.parity == z.parity)
                .min_by(|a, b| (a.value - z.value).norm().total_cmp(&(b.value - z.value).norm()))
                .map(|o| o.branch_id)
                .unwrap_or(usize::MAX);
            levels.push(SpectrumLevel { branch_id: id, ..*z });
        }
        rows.push(SpectrumRecord { g: oracle.g, levels, failures: Vec::new() });
    }

    for c in &trace.candidates {
        let at_lo = trace.records.iter().find(|r| r.g == c.g_lo);
        let parity_of = |id: usize| at_lo.and_then(|r| r.levels.iter().find(|l| l.branch_id == id)).map(|l| l.parity);
        match c.kind {
            CandidateKind::Coalescence => {
                let mut o = EpOptions::new((c.g_lo, c.g_hi));
                o.parity = c.parity;
                o.interval = Some(interval_of(c.energy, c.g_lo));
                match locate_ep(config.delta, &o) {
                    Ok(ep) => {
                        let levels = [c.branches.0, c.branches.1]
                            .iter()
                            .map(|&id| SpectrumLevel {
                                value: Complex64::new(ep.e_star, 0.0),
                                parity: ep.parity.into_label(),
                                branch_id: id,
                                provenance: Provenance::ExceptionalPoint,
                                ambiguous: false,
                            })
                            .collect();
                        rows.push(SpectrumRecord { g: ep.g_star, levels, failures: Vec::new() });
                    }
                    Err(e) => failures.push(format!("exceptional point in g=[{}, {}]: {e}", number(c.g_lo), number(c.g_hi))),
                }
            }
            CandidateKind::Crossing => {
                let n = c.pole.unwrap_or(1);
                match locate_degenerate(config.delta, n, (c.g_lo, c.g_hi)) {
                    Ok(d) => {
                        let levels = [c.branches.0, c.branches.1]
                            .iter()
                            .map(|&id| SpectrumLevel {
                                value: Complex64::new(d.e_n, 0.0),
                                parity: parity_of(id).unwrap_or(ParityLabel::Mixed),
                                branch_id: id,
                                provenance: Provenance::InjectedDegeneracy,
                                ambiguous: false,
                            })
                            .collect();
                        rows.push(SpectrumRecord { g: d.g_n, levels, failures: Vec::new() });
                    }
                    Err(e) => failures.push(format!("crossing on pole line {n} in g=[{}, {}]: {e}", number(c.g_lo), number(c.g_hi))),
                }
            }
        }
    }
    rows.sort_by(|a, b| a.g.total_cmp(&b.g));

    let body = match config.format {
        Format::Csv => spectrum_csv(&rows),
        Format::Json => render_json(
            rows.iter()
                .flat_map(|r| {
                    r.levels.iter().map(move |l| {
                        json!({
                            "g": r.g,
                            "re_E": l.value.re,
                            "im_E": l.value.im,
                            "parity": l.parity.symbol(),
                            "branch_id": l.branch_id,
                            "provenance": l.provenance.as_str(),
                        })
                    })
                })
                .collect(),
        ),
    };
    Ok(Outcome { body, failures })
}

trait IntoLabel {
    fn into_label(self) -> ParityLabel;
}

impl IntoLabel for Parity {
    fn into_label(self) -> ParityLabel {
        self.into()
    }
}

fn ep_record(ep: &ExceptionalPoint) -> Value {
    json!({
        "found": true,
        "delta": ep.delta,
        "level_pair": [ep.level_pair.0, ep.level_pair.1],
        "g_star": ep.g_star,
        "E_star": ep.e_star,
        "parity": ep.parity.symbol(),
        "interval": ep.interval,
        "residuals": {"G": ep.residual_g, "dG_dE": ep.residual_dg},
        "d2G_dE2": ep.second_derivative,
        "bracket": [ep.bracket.0, ep.bracket.1],
    })
}

fn not_found(config: &RunConfig, extra: Value, reason: String) -> Value {
    let mut v = json!({"found": false, "delta": config.delta, "reason": reason});
    if let (Value::Object(m), Value::Object(e)) = (&mut v, extra) {
        m.extend(e);
    }
    v
}

/// Absence is an answer: typed search failures become "not found" records.
fn is_absence(e: &Error) -> bool {
    matches!(e, Error::NoExceptionalPoint { .. } | Error::NoDegeneracy { .. })
}

fn ep(config: &RunConfig) -> Result<Outcome, Error> {
    let mut failures = Vec::new();
    let mut records = Vec::new();
    if let (Some(lo), Some(hi)) = (config.g_min, config.g_max) {
        let mut o = EpOptions::new((lo, hi));
        o.parity = config.parity;
        o.interval = config.interval;
        match locate_ep(config.delta, &o) {
            Ok(ep) => records.push(ep_record(&ep)),
            Err(e) if is_absence(&e) => records.push(not_found(config, json!({"window": [lo, hi]}), e.to_string())),
            Err(e) => {
                failures.push(e.to_string());
                records.push(not_found(config, json!({"window": [lo, hi]}), e.to_string()));
            }
        }
    } else {
        // survey: trace the oracle spectrum and refine every coalescence it shows
        let hi = config.g_max.unwrap_or(1.5);
        let lo = config.g_min.unwrap_or(hi / config.steps.max(2) as f64);
        let grid = linspace(lo, hi, config.steps.max(2));
        let trace = trace_spectrum(config.delta, &grid, &config.space(), &TraceOptions::new(config.levels))?;
        for c in trace.candidates.iter().filter(|c| c.kind == CandidateKind::Coalescence) {
            if config.parity.is_some() && c.parity != config.parity {
                continue;
            }
            let mut o = EpOptions::new((c.g_lo, c.g_hi));
            o.parity = c.parity;
            o.interval = Some(interval_of(c.energy, c.g_lo));
            match locate_ep(config.delta, &o) {
                Ok(ep) => records.push(ep_record(&ep)),
                Err(e) => failures.push(format!("candidate g=[{}, {}]: {e}", number(c.g_lo), number(c.g_hi))),
            }
        }
        if records.is_empty() {
            records.push(not_found(config, json!({"window": [lo, hi]}), "no coalescence in the traced spectrum".into()));
        }
    }
    Ok(Outcome { body: render_records(config, records, &EP_COLUMNS), failures })
}

const EP_COLUMNS: [&str; 6] = ["found", "delta", "g_star", "E_star", "parity", "level_pair"];
const DEGENERATE_COLUMNS: [&str; 6] = ["found", "delta", "n", "g_star", "E_star", "f_n_residual"];

fn render_records(config: &RunConfig, records: Vec<Value>, columns: &[&str]) -> String {
    match config.format {
        Format::Json => render_json(records),
        Format::Csv => {
            let mut s = columns.join(",");
            s.push('\n');
            for r in &records {
                let fields: Vec<String> = columns
                    .iter()
                    .map(|c| match r.get(*c) {
                        Some(Value::Number(n)) => n.as_f64().map(number).unwrap_or_default(),
                        Some(Value::Bool(b)) => b.to_string(),
                        Some(Value::String(t)) => t.clone(),
                        Some(Value::Array(a)) => a.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "),
                        _ => String::new(),
                    })
                    .collect();
                s.push_str(&fields.join(","));
                s.push('\n');
            }
            s
        }
    }
}

fn degenerate(config: &RunConfig) -> Result<Outcome, Error> {
    let range = match (config.g_min, config.g_max) {
        (Some(lo), Some(hi)) => (lo.max(1e-9), hi),
        _ => DEFAULT_DEGENERACY_RANGE,
    };
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for &n in &config.n {
        match locate_degenerate(config.delta, n, range) {
            Ok(d) => records.push(json!({
                "found": true,
                "delta": config.delta,
                "n": d.n,
                "g_star": d.g_n,
                "E_star": d.e_n,
                "parity": "+-",
                "f_n_residual": d.f_n_residual,
            })),
            Err(e) if is_absence(&e) => records.push(not_found(config, json!({"n": n, "range": [range.0, range.1]}), e.to_string())),
            Err(e) => {
                failures.push(format!("n={n}: {e}"));
                records.push(not_found(config, json!({"n": n}), e.to_string()));
            }
        }
    }
    Ok(Outcome { body: render_records(config, records, &DEGENERATE_COLUMNS), failures })
}

fn fs(config: &RunConfig) -> Result<Outcome, Error> {
    let grid = config.g_grid().map_err(|e| Error::Config(e.0))?;
    if config.branches.is_empty() {
        return Err(Error::Config("fs needs --branches".into()));
    }
    let options = ScanOptions {
        epsilon: config.epsilon,
        tracking: config.tracking,
        richardson: matches!(config.epsilon, EpsilonMode::Fixed(_)),
    };
    let points = fidelity_scan(config.delta, &grid, &config.branches, &config.space(), &options)?;
    let body = match config.format {
        Format::Csv => scan_csv(&points),
        Format::Json => render_json(
            points
                .iter()
                .map(|p| {
                    json!({
                        "g": p.g,
                        "branch_id": p.branch_id,
                        "sorted_index": p.sorted_index,
                        "re_chi": json_number(p.chi.re),
                        "im_chi": json_number(p.chi.im),
                        "re_F": json_number(p.fidelity.re),
                        "im_F": json_number(p.fidelity.im),
                        "re_c": p.c_product.re,
                        "im_c": p.c_product.im,
                        "abs_c": p.c_product.norm(),
                        "epsilon": p.epsilon_used,
                        "flag": p.flag.map(|f| f.as_str()),
                    })
                })
                .collect(),
        ),
    };
    Ok(Outcome::complete(body))
}

/// Minimal matplotlib script for the CSV written next to it.
pub fn plot_script(command: CommandKind, csv_name: &str) -> Option<String> {
    let (x, ys) = match command {
        CommandKind::Gfun => ("E", "['re_Gp', 're_Gm']"),
        CommandKind::Spectrum => ("g", "['re_E', 'im_E']"),
        CommandKind::Fs => ("g", "['re_chi', 'abs_c']"),
        _ => return None,
    };
    Some(format!(
        "import csv\nimport matplotlib.pyplot as plt\n\nrows = list(csv.DictReader(open({csv_name:?})))\n\
         fig, axes = plt.subplots(1, len({ys}), figsize=(10, 4))\n\
         for ax, col in zip(axes, {ys}):\n    pts = [(float(r[{x:?}]), float(r[col])) for r in rows if r[col]]\n    \
         ax.plot([p[0] for p in pts], [p[1] for p in pts], '.', ms=2)\n    ax.set_xlabel({x:?})\n    ax.set_ylabel(col)\n\
         fig.tight_layout()\nplt.show()\n"
    ))
}
