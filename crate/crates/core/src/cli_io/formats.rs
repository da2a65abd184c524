//! On-disk formats: geometry and design JSON, dataset CSV files.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! dataset read back from a file written here compares equal to the original.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};
use crate::loss_budget::{ThermalDataset, ThermalPoint};
use crate::resonator_modes::CavityGeometry;
use crate::ringdown::{RingdownCurve, RingdownDataset, RingdownPoint, SimulationDesign};

pub const THERMAL_HEADER: [&str; 3] = ["temperature_k", "tc_s", "tc_err_s"];
pub const RINGDOWN_HEADER: [&str; 4] = ["time_s", "attenuation_db", "detected", "total"];

fn parse_json<T: DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

pub fn parse_geometry(text: &str) -> Result<CavityGeometry> {
    let geom: CavityGeometry = parse_json(text, "geometry config")?;
    geom.validate()?;
    Ok(geom)
}

pub fn read_geometry(path: &Path) -> Result<CavityGeometry> {
    parse_geometry(&std::fs::read_to_string(path)?)
}

/// Parses a design file. Semantic checks happen when the design is simulated.
pub fn parse_design(text: &str) -> Result<SimulationDesign> {
    parse_json(text, "simulation design")
}

pub fn to_json_pretty<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize infallibly");
    s.push('\n');
    s
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes())
}

fn header_names(rdr: &mut csv::Reader<&[u8]>) -> Result<Vec<String>> {
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse(format!("line 1: {e}")))?;
    Ok(headers.iter().map(str::to_string).collect())
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, name: &str) -> Result<T> {
    let raw = rec.get(idx).unwrap_or("");
    raw.parse().map_err(|_| {
        Error::Parse(format!("line {}: invalid {name} value {raw:?}", line_of(rec)))
    })
}

fn records(rdr: &mut csv::Reader<&[u8]>, width: usize) -> Result<Vec<csv::StringRecord>> {
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Parse(format!("line {line}: {e}"))
        })?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != width {
            return Err(Error::Parse(format!(
                "line {}: expected {width} fields, found {}",
                line_of(&rec),
                rec.len()
            )));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Reads `temperature_k,tc_s[,tc_err_s]`. An empty `tc_err_s` cell means no error bar.
pub fn parse_thermal_csv(text: &str) -> Result<ThermalDataset> {
    let mut rdr = reader(text);
    let names = header_names(&mut rdr)?;
    let width = names.len();
    if !(width == 2 || width == 3) || names.iter().zip(THERMAL_HEADER).any(|(a, b)| a != b) {
        return Err(Error::Parse(format!(
            "line 1: expected header `temperature_k,tc_s[,tc_err_s]`, found `{}`",
            names.join(",")
        )));
    }
    let mut points = Vec::new();
    for rec in records(&mut rdr, width)? {
        let tc_err_s = match rec.get(2) {
            Some("") | None => None,
            Some(_) => Some(field(&rec, 2, "tc_err_s")?),
        };
        let point = ThermalPoint {
            temperature_k: field(&rec, 0, "temperature_k")?,
            tc_s: field(&rec, 1, "tc_s")?,
            tc_err_s,
        };
        // per-row validation so the message can carry the line number
        ThermalDataset::new(vec![point])
            .map_err(|e| Error::Parse(format!("line {}: {e}", line_of(&rec))))?;
        points.push(point);
    }
    ThermalDataset::new(points)
}

pub fn read_thermal_csv(path: &Path) -> Result<ThermalDataset> {
    parse_thermal_csv(&std::fs::read_to_string(path)?)
}

pub fn write_thermal_csv(data: &ThermalDataset) -> String {
    let with_err = data.points().iter().any(|p| p.tc_err_s.is_some());
    let mut out = String::new();
    if with_err {
        out.push_str(&THERMAL_HEADER.join(","));
    } else {
        out.push_str(&THERMAL_HEADER[..2].join(","));
    }
    out.push('\n');
    for p in data.points() {
        let _ = write!(out, "{},{}", p.temperature_k, p.tc_s);
        if with_err {
            out.push(',');
            if let Some(e) = p.tc_err_s {
                let _ = write!(out, "{e}");
            }
        }
        out.push('\n');
    }
    out
}

/// Reads `time_s,attenuation_db,detected,total`; rows are grouped by attenuation
/// and sorted by time, in any input order.
pub fn parse_ringdown_csv(text: &str) -> Result<RingdownDataset> {
    let mut rdr = reader(text);
    let names = header_names(&mut rdr)?;
    if names != RINGDOWN_HEADER {
        return Err(Error::Parse(format!(
            "line 1: expected header `{}`, found `{}`",
            RINGDOWN_HEADER.join(","),
            names.join(",")
        )));
    }
    // keyed by the attenuation's bit pattern (after -0.0 normalization)
    let mut groups: BTreeMap<u64, (f64, Vec<(u64, RingdownPoint)>)> = BTreeMap::new();
    for rec in records(&mut rdr, 4)? {
        let line = line_of(&rec);
        let att: f64 = field(&rec, 1, "attenuation_db")?;
        let point = RingdownPoint {
            time_s: field(&rec, 0, "time_s")?,
            detected: field(&rec, 2, "detected")?,
            total: field(&rec, 3, "total")?,
        };
        RingdownCurve::new(att, vec![point]).map_err(|e| Error::Parse(format!("line {line}: {e}")))?;
        let att = att + 0.0;
        groups
            .entry(att.to_bits())
            .or_insert_with(|| (att, Vec::new()))
            .1
            .push((line, point));
    }
    let mut curves = Vec::with_capacity(groups.len());
    for (_, (att, mut rows)) in groups {
        rows.sort_by(|a, b| a.1.time_s.total_cmp(&b.1.time_s));
        if let Some(w) = rows.windows(2).find(|w| w[0].1.time_s == w[1].1.time_s) {
            return Err(Error::Parse(format!(
                "line {}: duplicate time {} s at {att} dB (first on line {})",
                w[1].0.max(w[0].0),
                w[0].1.time_s,
                w[1].0.min(w[0].0)
            )));
        }
        curves.push(RingdownCurve::new(att, rows.into_iter().map(|r| r.1).collect())?);
    }
    RingdownDataset::new(curves)
}

pub fn read_ringdown_csv(path: &Path) -> Result<RingdownDataset> {
    parse_ringdown_csv(&std::fs::read_to_string(path)?)
}

pub fn write_ringdown_csv(data: &RingdownDataset) -> String {
    let mut out = RINGDOWN_HEADER.join(",");
    out.push('\n');
    for c in data.curves() {
        for p in c.points() {
            let _ = writeln!(out, "{},{},{},{}", p.time_s, c.attenuation_db, p.detected, p.total);
        }
    }
    out
}

/// Sidecar path `<dir>/<stem>.design.json` next to a dataset file.
pub fn sidecar_path(dataset: &Path) -> std::path::PathBuf {
    let stem = dataset.file_stem().map_or_else(
        || "dataset".to_string(),
        |s| s.to_string_lossy().into_owned(),
    );
    dataset.with_file_name(format!("{stem}.design.json"))
}
