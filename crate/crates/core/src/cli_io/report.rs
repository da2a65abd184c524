//! Report documents emitted by the command-line front end.
//!
//! Every report serializes to pretty JSON and parses back to an equal value;
//! re-serializing a parsed report reproduces the original bytes.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::fit_engine::{FitResult, ParamEstimate, Termination};
use crate::loss_budget::{BcsParams, LossBudget};
use crate::resonator_modes::{CavityGeometry, ModeIndices, ModeProperties};
use crate::ringdown::PairShift;

pub const TOOL: &str = "fpcavity";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of_bytes(path: &str, bytes: &[u8]) -> Self {
        Self {
            path: path.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
        }
    }

    pub fn of_file(path: &Path) -> Result<Self> {
        Ok(Self::of_bytes(&path.display().to_string(), &std::fs::read(path)?))
    }
}

/// Tool identity and the invocation that produced a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub inputs: Vec<InputDigest>,
}

impl Provenance {
    pub fn new(command: Vec<String>, inputs: Vec<InputDigest>) -> Self {
        Self {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            command,
            inputs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub method: String,
    pub parameters: Vec<ParamEstimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ssr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dof: Option<usize>,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub termination: Option<Termination>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shift_pairs: Vec<PairShift>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl FitReport {
    pub fn from_fit(provenance: Provenance, method: &str, fit: &FitResult, seed: Option<u64>) -> Self {
        Self {
            provenance,
            method: method.to_string(),
            parameters: fit.parameters.clone(),
            ssr: Some(fit.ssr),
            dof: Some(fit.dof),
            converged: fit.converged,
            iterations: Some(fit.iterations),
            termination: Some(fit.termination),
            seed,
            shift_pairs: Vec::new(),
            warnings: fit.warnings.clone(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&ParamEstimate> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}: {}", self.provenance.tool, self.provenance.version, self.method);
        for input in &self.provenance.inputs {
            let _ = writeln!(out, "input      {} sha256:{}", input.path, input.sha256);
        }
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "seed       {seed}");
        }
        let _ = writeln!(out, "{:<16} {:>16} {:>14}  unit", "parameter", "value", "std_error");
        for p in &self.parameters {
            let se = p.std_error.map_or_else(|| "-".to_string(), |s| format!("{s:.6e}"));
            let _ = writeln!(out, "{:<16} {:>16.9e} {:>14}  {}", p.name, p.value, se, p.unit);
        }
        for s in &self.shift_pairs {
            let _ = writeln!(
                out,
                "shift {:.4} -> {:.4} dB: tau = {:.6e} s, tc = {:.6e} +/- {:.2e} s ({} comparisons)",
                s.attenuation_low_db, s.attenuation_high_db, s.shift_s, s.tc_s, s.std_error_s, s.overlap
            );
        }
        if let (Some(ssr), Some(dof)) = (self.ssr, self.dof) {
            let _ = writeln!(out, "ssr        {ssr:.6e} (dof {dof})");
        }
        let _ = write!(out, "converged  {}", self.converged);
        if let (Some(it), Some(term)) = (self.iterations, self.termination) {
            let _ = write!(out, " after {it} iterations ({term:?})");
        }
        out.push('\n');
        for w in &self.warnings {
            let _ = writeln!(out, "warning    {w}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModesReport {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub geometry: CavityGeometry,
    pub mode: ModeIndices,
    pub g_x: f64,
    pub g_y: f64,
    pub resonance_hz: f64,
    /// Frequency at which the beam geometry below is evaluated.
    pub evaluated_at_hz: f64,
    pub properties: ModeProperties,
    /// Waist and mirror spot of the mean-radius cavity.
    pub mean_radius_waist_m: f64,
    pub mean_radius_mirror_spot_m: f64,
    /// Mirror displacement that detunes the mode by 1 Hz.
    pub displacement_per_hz_m: f64,
}

impl ModesReport {
    pub fn to_text(&self) -> String {
        let p = &self.properties;
        let m = self.mode;
        let rows: Vec<(&str, String)> = vec![
            ("mode", format!("TEM({},{},{})", m.q, m.m, m.n)),
            ("resonance", format!("{:.6} GHz", self.resonance_hz / 1e9)),
            ("evaluated at", format!("{:.6} GHz", self.evaluated_at_hz / 1e9)),
            ("fsr", format!("{:.6} GHz", p.fsr_hz / 1e9)),
            ("g (x, y)", format!("{:.6}, {:.6}", self.g_x, self.g_y)),
            ("gouy (x, y)", format!("{:.6}, {:.6} rad", p.gouy_x_rad, p.gouy_y_rad)),
            ("pol. splitting", format!("{:.4} MHz", p.polarization_splitting_hz / 1e6)),
            ("waist (x, y)", format!("{:.4}, {:.4} mm", p.waist_x_m * 1e3, p.waist_y_m * 1e3)),
            (
                "mirror spot (x, y)",
                format!("{:.4}, {:.4} mm", p.mirror_spot_x_m * 1e3, p.mirror_spot_y_m * 1e3),
            ),
            (
                "rayleigh (x, y)",
                format!("{:.4}, {:.4} mm", p.rayleigh_x_m * 1e3, p.rayleigh_y_m * 1e3),
            ),
            (
                "mean-radius w0, w",
                format!(
                    "{:.4}, {:.4} mm (ratio {:.4})",
                    self.mean_radius_waist_m * 1e3,
                    self.mean_radius_mirror_spot_m * 1e3,
                    self.mean_radius_mirror_spot_m / self.mean_radius_waist_m
                ),
            ),
            ("1 Hz detuning", format!("{:.4} fm", self.displacement_per_hz_m.abs() * 1e15)),
        ];
        render_rows(&rows)
    }
}

fn render_rows(rows: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (k, v) in rows {
        let _ = writeln!(out, "{k:<20} {v}");
    }
    out
}

/// A named input of a loss-channel formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulaInput {
    pub name: String,
    pub value: f64,
    pub unit: String,
}

impl FormulaInput {
    pub fn new(name: &str, value: f64, unit: &str) -> Self {
        Self {
            name: name.into(),
            value,
            unit: unit.into(),
        }
    }
}

/// One loss channel. `q_factor` is `None` for a lossless channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossChannel {
    pub name: String,
    pub q_factor: Option<f64>,
    pub formula: String,
    pub inputs: Vec<FormulaInput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub geometry: CavityGeometry,
    pub frequency_hz: f64,
    pub fsr_hz: f64,
    pub q_index: u32,
    pub temperature_k: f64,
    pub bcs: BcsParams,
    pub residual_plateau_ohm: f64,
    pub channels: Vec<LossChannel>,
    pub budget: LossBudget,
}

impl BudgetReport {
    pub fn to_text(&self) -> String {
        let b = &self.budget;
        let fmt_q = |q: Option<f64>| q.map_or_else(|| "lossless".to_string(), |q| format!("{q:.4e}"));
        let mut rows: Vec<(&str, String)> = vec![
            ("frequency", format!("{:.6} GHz", self.frequency_hz / 1e9)),
            ("temperature", format!("{} K", self.temperature_k)),
        ];
        for c in &self.channels {
            rows.push((c.name.as_str(), fmt_q(c.q_factor)));
        }
        rows.extend([
            ("Q geometric", format!("{:.4e}", b.q_geometric)),
            ("Q combined", format!("{:.4e}", b.q_combined)),
            ("damping time", format!("{:.6} s", b.summary.tc_s)),
            ("finesse Q/q", format!("{:.4e}", b.summary.finesse_q_ratio)),
            ("finesse FSR/FWHM", format!("{:.4e}", b.summary.finesse_fsr)),
            ("FWHM", format!("{:.4} Hz", b.summary.fwhm_hz)),
            ("photon path", format!("{:.4e} km", b.summary.photon_path_m / 1e3)),
            ("R_eff", format!("{:.4e} ohm", b.resistances.r_effective_ohm)),
        ]);
        let mut out = render_rows(&rows);
        for n in &b.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }
}

/// Header block of a simulation sidecar file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSidecar<D> {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub seed: u64,
    pub dataset_sha256: String,
    pub design: D,
}
