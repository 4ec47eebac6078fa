//! Config loading and artifact rendering.
//!
//! Configs are TOML with `deny_unknown_fields` everywhere, so a typo is an
//! error that names the offending key and line. Numbers in CSV output use
//! 12 significant digits, `.` as the decimal point and no grouping.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::harness::{RunOutcome, RunSummary};
use crate::verify::LemmaCheck;
use crate::{Error, Result};

pub const SUMMARY_FILE: &str = "summary.json";
pub const REGRET_CSV: &str = "regret_curve.csv";
pub const POTENTIAL_CSV: &str = "potential.csv";
pub const TIMING_FILE: &str = "timing.json";

pub const REGRET_HEADER: &str = "t,mean_regret,stderr,eq4_bound,remark33_bound";
pub const POTENTIAL_HEADER: &str = "t,mean_gamma_quad,running_sum,thm23_bound";

// ── Config loading ──────────────────────────────────────────────────────

/// Parses TOML into `T`. Errors carry the line number and the parser's
/// description, which names the unknown or malformed field.
pub fn parse_toml<T: DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        let message = e.message().trim().to_string();
        match e.span() {
            Some(span) => {
                let mut line = text[..span.start.min(text.len())].matches('\n').count() + 1;
                // Tagged enums are buffered, so the span covers the whole
                // table; narrow it to the key the message names.
                if let Some(key) = backticked(&message) {
                    if let Some(offset) = key_line(text, line, key) {
                        line = offset;
                    }
                }
                Error::Config(format!("line {line}: {message}"))
            }
            None => Error::Config(message),
        }
    })
}

fn backticked(message: &str) -> Option<&str> {
    let rest = message.split_once('`')?.1;
    Some(rest.split_once('`')?.0)
}

/// First line at or after `from` that assigns `key`, stopping at the next
/// table header.
fn key_line(text: &str, from: usize, key: &str) -> Option<usize> {
    for (i, raw) in text.lines().enumerate().skip(from - 1) {
        let line = raw.trim_start();
        if i + 1 > from && line.starts_with('[') {
            return None;
        }
        if let Some(rest) = line.strip_prefix(key) {
            if rest.trim_start().starts_with('=') {
                return Some(i + 1);
            }
        }
    }
    None
}

pub fn load_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_toml(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Config(e.to_string()))
}

// ── Number formatting ───────────────────────────────────────────────────

/// `%.12g`: 12 significant digits, trailing zeros removed, scientific
/// notation outside `1e-5 ≤ |x| < 1e12`.
pub fn fmt_g12(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

// ── Renderers ───────────────────────────────────────────────────────────

pub fn render_summary_json(summary: &RunSummary) -> Result<String> {
    let mut s = serde_json::to_string_pretty(summary)?;
    s.push('\n');
    Ok(s)
}

pub fn parse_summary_json(text: &str) -> Result<RunSummary> {
    Ok(serde_json::from_str(text)?)
}

pub fn render_regret_csv(summary: &RunSummary) -> String {
    let mut out = String::from(REGRET_HEADER);
    out.push('\n');
    for p in &summary.regret_curve {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            p.t,
            fmt_g12(p.mean_regret),
            fmt_g12(p.stderr),
            fmt_g12(p.eq4_bound),
            fmt_g12(p.remark33_bound)
        );
    }
    out
}

pub fn render_potential_csv(summary: &RunSummary) -> String {
    let mut out = String::from(POTENTIAL_HEADER);
    out.push('\n');
    for p in &summary.potential_curve {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            p.t,
            fmt_g12(p.mean_gamma_quad),
            fmt_g12(p.running_sum),
            fmt_g12(p.thm23_bound)
        );
    }
    out
}

/// Wall time lives in its own file so the other artifacts stay byte-stable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_time_secs: f64,
}

/// The three deterministic artifacts, keyed by file name.
pub fn render_run_artifacts(summary: &RunSummary) -> Result<Vec<(&'static str, String)>> {
    Ok(vec![
        (SUMMARY_FILE, render_summary_json(summary)?),
        (REGRET_CSV, render_regret_csv(summary)),
        (POTENTIAL_CSV, render_potential_csv(summary)),
    ])
}

/// Writes all run artifacts plus `timing.json` into `dir`.
pub fn write_run_artifacts(dir: &Path, outcome: &RunOutcome) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, body) in render_run_artifacts(&outcome.summary)? {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
    }
    let timing = Timing {
        wall_time_secs: outcome.wall_time_secs,
    };
    let path = dir.join(TIMING_FILE);
    fs::write(&path, serde_json::to_string_pretty(&timing)? + "\n")?;
    written.push(path);
    Ok(written)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Fixed-width table: lemma, instances, max violation, tolerance, status.
pub fn render_lemma_table(checks: &[LemmaCheck]) -> String {
    let width = checks
        .iter()
        .map(|c| c.name.len())
        .max()
        .unwrap_or(0)
        .max("lemma".len());
    let mut out = format!(
        "{:<width$}  {:>9}  {:>14}  {:>10}  {}\n",
        "lemma", "instances", "max_violation", "tolerance", "status"
    );
    for c in checks {
        let _ = writeln!(
            out,
            "{:<width$}  {:>9}  {:>14.3e}  {:>10.1e}  {}",
            c.name,
            c.instances,
            c.max_violation,
            c.tolerance,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    out
}
