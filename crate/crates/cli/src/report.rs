//! Report files: one JSON document with the full report, CSV convergence
//! tables and a plain-text summary.
//!
//! JSON keys come out in declaration order (structs) or sorted order
//! (parameter maps), and floats are printed in shortest round-trip form, so
//! identical reports serialize to identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use balayage::pipeline::ExperimentReport;
use balayage::{Error, Result};

use crate::config::Format;

pub fn to_json(rep: &ExperimentReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(rep).map_err(|e| Error::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn level(l: Option<u32>) -> String {
    l.map(|m| m.to_string()).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Columns: stage, level, function, value, stderr, samples.
pub fn stages_csv(rep: &ExperimentReport) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["stage", "level", "function", "value", "stderr", "samples"]).map_err(csv_err)?;
    for s in &rep.stages {
        let lv = level(s.level);
        let samples = s.samples.to_string();
        w.write_record([&s.stage, &lv, "mass", &s.mass.value.to_string(), &s.mass.stderr.to_string(), &samples])
            .map_err(csv_err)?;
        for (name, e) in &s.integrals {
            w.write_record([&s.stage, &lv, name, &e.value.to_string(), &e.stderr.to_string(), &samples])
                .map_err(csv_err)?;
        }
    }
    finish(w)
}

/// Columns: distance, level, function, value (the difference), stderr, samples.
pub fn distances_csv(rep: &ExperimentReport) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["distance", "level", "function", "value", "stderr", "samples"]).map_err(csv_err)?;
    for d in &rep.distances {
        let lv = level(d.level);
        let samples = d.samples.to_string();
        w.write_record([&d.name, &lv, "max", &d.distance.to_string(), &d.stderr.to_string(), &samples])
            .map_err(csv_err)?;
        for r in &d.rows {
            w.write_record([&d.name, &lv, &r.function, &r.difference.to_string(), &r.stderr.to_string(), &samples])
                .map_err(csv_err)?;
        }
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(std::io::Error::other(e)))
}

pub fn summary(rep: &ExperimentReport) -> String {
    let mut s = String::new();
    let failed = rep.failed_checks();
    let _ = writeln!(s, "experiment: {}", rep.experiment);
    let _ = writeln!(s, "runtime: {:.2} s", rep.runtime_seconds);
    let _ = writeln!(s, "checks: {} passed, {} failed", rep.checks.len() - failed.len(), failed.len());
    for c in &rep.checks {
        if c.name.starts_with(balayage::pipeline::MONOTONE_PREFIX) && c.passed {
            continue;
        }
        let _ = writeln!(
            s,
            "  [{}] {}: value {:.6} bound {:.6} stderr {:.2e}",
            if c.passed { "ok" } else { "FAIL" },
            c.name,
            c.value,
            c.bound,
            c.stderr
        );
    }
    let gates = rep.monotonicity_checks().count();
    let _ = writeln!(s, "monotonicity gates: {gates}");
    for d in &rep.distances {
        let _ = writeln!(
            s,
            "distance {}{}: {:.6} ± {:.2e} ({} samples)",
            d.name,
            d.level.map(|m| format!(" m={m}")).unwrap_or_default(),
            d.distance,
            d.stderr,
            d.samples
        );
    }
    for w in &rep.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

/// Writes the report files and returns their paths.
pub fn write_report(rep: &ExperimentReport, dir: &Path, stem: &str, format: Format) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    let mut put = |name: String, text: String| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, text)?;
        out.push(p);
        Ok(())
    };
    if format != Format::Csv {
        put(format!("{stem}.json"), to_json(rep)?)?;
    }
    if format != Format::Json {
        put(format!("{stem}.stages.csv"), stages_csv(rep)?)?;
        if !rep.distances.is_empty() {
            put(format!("{stem}.distances.csv"), distances_csv(rep)?)?;
        }
    }
    put(format!("{stem}.summary.txt"), summary(rep))?;
    Ok(out)
}
