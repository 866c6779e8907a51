//! Text formats shared by the golden files and the command-line tool.
//!
//! Numbers are written in scientific notation with 17 significant digits,
//! which round-trips every `f64`. Rows end in LF; no locale is involved.

use std::fmt::Write;

use crate::diagnostics::FidelityScanPoint;
use crate::oracle::SpectrumRecord;

pub const SPECTRUM_HEADER: &str = "g,re_E,im_E,parity,branch_id,provenance";
pub const SCAN_HEADER: &str = "g,branch_id,re_chi,im_chi,re_F,im_F,re_c,im_c,abs_c,epsilon,flag";

/// 17 significant digits; non-finite values become an empty field.
pub fn number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

/// Parses a field written by [`number`].
pub fn parse_number(field: &str) -> Option<f64> {
    if field.is_empty() {
        None
    } else {
        field.parse().ok()
    }
}

/// One row per level, grid order, levels in sorted order.
pub fn spectrum_csv(records: &[SpectrumRecord]) -> String {
    let mut out = String::with_capacity(64 * records.len() * 8);
    out.push_str(SPECTRUM_HEADER);
    out.push('\n');
    for r in records {
        for l in &r.levels {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                number(r.g),
                number(l.value.re),
                number(l.value.im),
                l.parity.symbol(),
                l.branch_id,
                l.provenance.as_str()
            );
        }
    }
    out
}

pub fn scan_csv(points: &[FidelityScanPoint]) -> String {
    let mut out = String::new();
    out.push_str(SCAN_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            number(p.g),
            p.branch_id,
            number(p.chi.re),
            number(p.chi.im),
            number(p.fidelity.re),
            number(p.fidelity.im),
            number(p.c_product.re),
            number(p.c_product.im),
            number(p.c_product.norm()),
            number(p.epsilon_used),
            p.flag.map(|f| f.as_str()).unwrap_or("")
        );
    }
    out
}
