//! Command-line front end, file formats and reports.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 parse or usage error, 3 unstable
//! geometry, 4 temperature out of range, 5 invalid simulation design,
//! 6 fit did not converge (the report is still written), 7 degenerate or
//! unidentifiable data.

pub mod formats;
pub mod report;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::loss_budget::{
    self, bcs_resistance, default_temperature_grid, fit_thermal, loss_budget, simulate_thermal,
    tc_vs_temperature, BcsParams, BudgetInputs, ThermalFitInit, DEFAULT_RESIDUAL_OHM,
    GEOMETRY_FACTOR_OHM,
};
use crate::resonator_modes::{
    detuning_to_displacement, intensity_profile, mode_geometry, resonance_frequency, stability_g,
    ModeIndices,
};
use crate::ringdown::{fit_ringdown, shift_estimate, ProbeModel, DB_PER_E_FOLD};
use crate::SPEED_OF_LIGHT;

use formats::{to_json_pretty, write_ringdown_csv, write_thermal_csv};
use report::{
    BudgetReport, FitReport, FormulaInput, InputDigest, LossChannel, ModesReport, Provenance,
    SimulationSidecar,
};

/// Measured frequency of the 51 GHz mode, used where no frequency is given.
pub const DEFAULT_FREQUENCY_HZ: f64 = 51.099e9;
const CURVE_SAMPLES: usize = 201;

pub mod exit {
    pub const IO: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const UNSTABLE: i32 = 3;
    pub const RANGE: i32 = 4;
    pub const DESIGN: i32 = 5;
    pub const NO_CONVERGENCE: i32 = 6;
    pub const DEGENERATE: i32 = 7;
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => exit::IO,
        Error::UnstableGeometry { .. } => exit::UNSTABLE,
        Error::TemperatureOutOfRange { .. } | Error::NonPositiveTemperature(_) => exit::RANGE,
        Error::InvalidDesign(_) | Error::InvalidProbeModel(_) => exit::DESIGN,
        Error::FitDidNotConverge(_) => exit::NO_CONVERGENCE,
        Error::DegenerateRegime(_)
        | Error::Identifiability(_)
        | Error::NonOverlappingSupport { .. }
        | Error::SingularJacobian { .. }
        | Error::InsufficientData(_) => exit::DEGENERATE,
        _ => exit::PARSE,
    }
}

#[derive(Debug, Parser)]
#[command(name = "fpcavity", version, about = "Superconducting Fabry-Perot cavity modeling and ring-down analysis")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Emit reports as JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Write the primary output to this file instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Generator seed for simulations (overrides a design file's seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mode geometry and spectrum of a cavity.
    Modes(ModesArgs),
    /// Loss budget: per-channel quality factors and derived damping figures.
    Budget(BudgetArgs),
    /// Simulate a multi-attenuation ring-down measurement from a design file.
    RingdownSim(RingdownSimArgs),
    /// Estimate the damping time from a ring-down dataset.
    RingdownFit(RingdownFitArgs),
    /// Fit the BCS model to damping time versus temperature.
    ThermalFit(ThermalFitArgs),
    /// Synthetic damping-time versus temperature data.
    ThermalSim(ThermalSimArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Args)]
pub struct ModesArgs {
    /// Geometry config (JSON).
    pub geometry: PathBuf,
    /// Mode indices q,m,n.
    #[arg(long, default_value = "9,0,0")]
    pub qmn: ModeIndices,
    /// Evaluate the beam geometry at this frequency instead of the resonance.
    #[arg(long)]
    pub freq: Option<f64>,
    /// Write intensity samples across the beam to this CSV file.
    #[arg(long, value_name = "CSV")]
    pub profile: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "x")]
    pub profile_axis: Axis,
    #[arg(long, default_value_t = 101)]
    pub profile_points: usize,
    /// Half-width of the sampled line (default: 2.5 spot sizes).
    #[arg(long)]
    pub profile_extent_m: Option<f64>,
    /// Axial plane of the profile, measured from the cavity center.
    #[arg(long, default_value_t = 0.0)]
    pub profile_z_m: f64,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    /// Geometry config (JSON).
    pub geometry: PathBuf,
    /// Mirror temperature in kelvin.
    #[arg(long, default_value_t = 0.8)]
    pub temp: f64,
    /// BCS coefficients A (ohm*K) and gap (K) as `A,GAP`.
    #[arg(long, value_name = "A,GAP")]
    pub bcs: Option<String>,
    /// Temperature-independent plateau resistance in ohm.
    #[arg(long, default_value_t = DEFAULT_RESIDUAL_OHM)]
    pub residual: f64,
    #[arg(long, default_value_t = GEOMETRY_FACTOR_OHM)]
    pub geometry_factor: f64,
    /// Mode frequency (default: resonance of --qmn).
    #[arg(long)]
    pub freq: Option<f64>,
    #[arg(long, default_value = "9,0,0")]
    pub qmn: ModeIndices,
    /// Spot size on the mirror for the diffraction estimate (default: computed).
    #[arg(long)]
    pub mirror_spot_m: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RingdownSimArgs {
    /// Simulation design (JSON).
    pub design: PathBuf,
}

#[derive(Debug, Args)]
pub struct RingdownFitArgs {
    /// Dataset CSV `time_s,attenuation_db,detected,total`.
    pub dataset: PathBuf,
    /// Joint fit of the saturating probe model (default).
    #[arg(long, conflicts_with = "shift_only")]
    pub model_fit: bool,
    /// Model-free estimate from the time shifts between curves.
    #[arg(long)]
    pub shift_only: bool,
    /// Write plot-ready curve samples to this CSV file.
    #[arg(long, value_name = "CSV")]
    pub emit_curves: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ThermalFitArgs {
    /// Dataset CSV `temperature_k,tc_s[,tc_err_s]`.
    pub dataset: PathBuf,
    #[arg(long, default_value_t = GEOMETRY_FACTOR_OHM)]
    pub geometry_factor: f64,
    #[arg(long, default_value_t = DEFAULT_FREQUENCY_HZ)]
    pub freq: f64,
    /// Starting point `A,GAP,R_RES` (default: derived from the data).
    #[arg(long, value_name = "A,GAP,R_RES")]
    pub init: Option<String>,
    /// Write model samples on a reciprocal-temperature grid to this CSV file.
    #[arg(long, value_name = "CSV")]
    pub emit_curves: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ThermalSimArgs {
    /// Relative Gaussian noise on each damping time.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    /// True BCS coefficients as `A,GAP` (default: niobium).
    #[arg(long, value_name = "A,GAP")]
    pub bcs: Option<String>,
    /// True residual resistance in ohm.
    #[arg(long, default_value_t = DEFAULT_RESIDUAL_OHM)]
    pub residual: f64,
    #[arg(long, default_value_t = GEOMETRY_FACTOR_OHM)]
    pub geometry_factor: f64,
    #[arg(long, default_value_t = DEFAULT_FREQUENCY_HZ)]
    pub freq: f64,
    /// Comma-separated temperatures in kelvin (default 0.8, 1.0, ..., 4.2).
    #[arg(long)]
    pub temps: Option<String>,
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let echo: Vec<String> = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match execute(&cli, echo) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cli: &Cli, echo: Vec<String>) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Modes(a) => cmd_modes(g, a, echo),
        Command::Budget(a) => cmd_budget(g, a, echo),
        Command::RingdownSim(a) => cmd_ringdown_sim(g, a, echo),
        Command::RingdownFit(a) => cmd_ringdown_fit(g, a, echo),
        Command::ThermalFit(a) => cmd_thermal_fit(g, a, echo),
        Command::ThermalSim(a) => cmd_thermal_sim(g, a, echo),
    }
}

/// Writes a report to `--out` or stdout, as JSON with `--json`.
fn emit(g: &GlobalOpts, json: String, text: String) -> Result<()> {
    let body = if g.json { json } else { text };
    match &g.out {
        Some(path) => std::fs::write(path, body)?,
        None => print!("{body}"),
    }
    Ok(())
}

fn emit_data(g: &GlobalOpts, body: &str) -> Result<()> {
    match &g.out {
        Some(path) => std::fs::write(path, body)?,
        None => print!("{body}"),
    }
    Ok(())
}

fn parse_floats<const N: usize>(s: &str, what: &str) -> Result<[f64; N]> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(Error::Parse(format!("{what}: expected {N} comma-separated numbers, got {s:?}")));
    }
    let mut out = [0.0; N];
    for (slot, p) in out.iter_mut().zip(&parts) {
        *slot = p
            .parse()
            .map_err(|_| Error::Parse(format!("{what}: bad number {p:?}")))?;
    }
    Ok(out)
}

fn parse_bcs(s: Option<&str>) -> Result<BcsParams> {
    match s {
        None => Ok(BcsParams::NIOBIUM),
        Some(s) => {
            let [a, gap] = parse_floats::<2>(s, "--bcs")?;
            BcsParams::new(a, gap)
        }
    }
}

pub fn cmd_modes(g: &GlobalOpts, a: &ModesArgs, echo: Vec<String>) -> Result<()> {
    let geom = formats::read_geometry(&a.geometry)?;
    let resonance_hz = resonance_frequency(&geom, a.qmn)?;
    let at_hz = a.freq.unwrap_or(resonance_hz);
    if !(at_hz > 0.0) {
        return Err(Error::NonPositiveInput { name: "freq", value: at_hz });
    }
    let props = mode_geometry(&geom, SPEED_OF_LIGHT / at_hz)?;
    let mean = mode_geometry(&geom.with_mean_radius(), SPEED_OF_LIGHT / at_hz)?;
    let (g_x, g_y) = stability_g(&geom);
    let report = ModesReport {
        provenance: Provenance::new(echo, vec![InputDigest::of_file(&a.geometry)?]),
        geometry: geom,
        mode: a.qmn,
        g_x,
        g_y,
        resonance_hz,
        evaluated_at_hz: at_hz,
        properties: props,
        mean_radius_waist_m: mean.waist_x_m,
        mean_radius_mirror_spot_m: mean.mirror_spot_x_m,
        displacement_per_hz_m: detuning_to_displacement(&geom, resonance_hz, 1.0),
    };
    if let Some(path) = &a.profile {
        std::fs::write(path, profile_csv(&props, a)?)?;
    }
    emit(g, to_json_pretty(&report), report.to_text())
}

fn profile_csv(props: &crate::resonator_modes::ModeProperties, a: &ModesArgs) -> Result<String> {
    if a.profile_points < 2 {
        return Err(Error::Parse("--profile-points must be >= 2".into()));
    }
    let spot = match a.profile_axis {
        Axis::X => props.spot_x_at(a.profile_z_m),
        Axis::Y => props.spot_y_at(a.profile_z_m),
    };
    let extent = a.profile_extent_m.unwrap_or(2.5 * spot);
    if !(extent > 0.0) {
        return Err(Error::NonPositiveInput { name: "profile_extent_m", value: extent });
    }
    let n = a.profile_points;
    let mut out = String::from("position_m,intensity\n");
    for i in 0..n {
        let s = extent * (2.0 * i as f64 / (n - 1) as f64 - 1.0);
        let (x, y) = match a.profile_axis {
            Axis::X => (s, 0.0),
            Axis::Y => (0.0, s),
        };
        let _ = writeln!(out, "{s},{}", intensity_profile(props, x, y, a.profile_z_m));
    }
    Ok(out)
}

pub fn cmd_budget(g: &GlobalOpts, a: &BudgetArgs, echo: Vec<String>) -> Result<()> {
    let geom = formats::read_geometry(&a.geometry)?;
    let bcs = parse_bcs(a.bcs.as_deref())?;
    // range check before any geometry work so exit code 4 wins
    bcs_resistance(&bcs, a.temp)?;
    let frequency_hz = match a.freq {
        Some(f) => f,
        None => resonance_frequency(&geom, a.qmn)?,
    };
    if !(frequency_hz > 0.0) {
        return Err(Error::NonPositiveInput { name: "freq", value: frequency_hz });
    }
    let computed_spot = mode_geometry(&geom.with_mean_radius(), SPEED_OF_LIGHT / frequency_hz)?.mirror_spot_x_m;
    let inputs = BudgetInputs {
        geometry: geom,
        frequency_hz,
        fsr_hz: geom.fsr_hz(),
        q_index: a.qmn.q,
        temperature_k: a.temp,
        bcs,
        residual_ohm: a.residual,
        geometry_factor_ohm: a.geometry_factor,
        mirror_spot_m: a.mirror_spot_m.unwrap_or(computed_spot),
        computed_mirror_spot_m: computed_spot,
    };
    let budget = loss_budget(&inputs)?;
    let r = budget.resistances;
    let gf = FormulaInput::new("geometry_factor_ohm", r.geometry_factor_ohm, "ohm");
    let channels = vec![
        LossChannel {
            name: "Q diffraction".into(),
            q_factor: Some(budget.q_diffraction),
            formula: "(omega*L/c)*exp(D^2/(2*w^2))".into(),
            inputs: vec![
                FormulaInput::new("frequency_hz", frequency_hz, "Hz"),
                FormulaInput::new("length_m", geom.length_m, "m"),
                FormulaInput::new("mirror_diameter_m", geom.mirror_diameter_m, "m"),
                FormulaInput::new("mirror_spot_m", inputs.mirror_spot_m, "m"),
            ],
        },
        LossChannel {
            name: "Q surface".into(),
            q_factor: budget.q_surface,
            formula: "c*L/(4*omega*h^2)".into(),
            inputs: vec![
                FormulaInput::new("frequency_hz", frequency_hz, "Hz"),
                FormulaInput::new("length_m", geom.length_m, "m"),
                FormulaInput::new("roughness_rms_m", geom.roughness_rms_m, "m"),
            ],
        },
        LossChannel {
            name: "Q BCS".into(),
            q_factor: budget.q_bcs,
            formula: "G/((A/T)*exp(-gap/T))".into(),
            inputs: vec![
                gf.clone(),
                FormulaInput::new("a_coeff_ohm_k", bcs.a_coeff_ohm_k, "ohm*K"),
                FormulaInput::new("gap_over_kb_k", bcs.gap_over_kb_k, "K"),
                FormulaInput::new("temperature_k", a.temp, "K"),
            ],
        },
        LossChannel {
            name: "Q residual".into(),
            q_factor: budget.q_residual,
            formula: "G/(R_plateau - R_diffraction - R_surface)".into(),
            inputs: vec![
                gf,
                FormulaInput::new("residual_plateau_ohm", a.residual, "ohm"),
                FormulaInput::new("r_residual_ohm", r.r_residual_ohm, "ohm"),
            ],
        },
    ];
    let report = BudgetReport {
        provenance: Provenance::new(echo, vec![InputDigest::of_file(&a.geometry)?]),
        geometry: geom,
        frequency_hz,
        fsr_hz: inputs.fsr_hz,
        q_index: inputs.q_index,
        temperature_k: a.temp,
        bcs,
        residual_plateau_ohm: a.residual,
        channels,
        budget,
    };
    emit(g, to_json_pretty(&report), report.to_text())
}

pub fn cmd_ringdown_sim(g: &GlobalOpts, a: &RingdownSimArgs, echo: Vec<String>) -> Result<()> {
    let text = std::fs::read_to_string(&a.design)?;
    let mut design = formats::parse_design(&text)?;
    if let Some(seed) = g.seed {
        design.seed = seed;
    }
    let data = design.simulate()?;
    let csv = write_ringdown_csv(&data);
    emit_data(g, &csv)?;
    if let Some(out) = &g.out {
        let sidecar = SimulationSidecar {
            provenance: Provenance::new(echo, vec![InputDigest::of_bytes(&a.design.display().to_string(), text.as_bytes())]),
            seed: design.seed,
            dataset_sha256: InputDigest::of_bytes("", csv.as_bytes()).sha256,
            design,
        };
        std::fs::write(formats::sidecar_path(out), to_json_pretty(&sidecar))?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct SidecarSeed {
    seed: u64,
}

/// Seed recorded in a dataset's sidecar, if one sits next to it.
fn sidecar_seed(dataset: &Path, inputs: &mut Vec<InputDigest>) -> Result<Option<u64>> {
    let path = formats::sidecar_path(dataset);
    if !path.is_file() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path)?;
    let parsed: SidecarSeed = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    inputs.push(InputDigest::of_bytes(&path.display().to_string(), text.as_bytes()));
    Ok(Some(parsed.seed))
}

pub fn cmd_ringdown_fit(g: &GlobalOpts, a: &RingdownFitArgs, echo: Vec<String>) -> Result<()> {
    let data = formats::read_ringdown_csv(&a.dataset)?;
    let mut inputs = vec![InputDigest::of_file(&a.dataset)?];
    let seed = sidecar_seed(&a.dataset, &mut inputs)?;
    let provenance = Provenance::new(echo, inputs);

    if a.shift_only {
        let est = shift_estimate(&data)?;
        let report = FitReport {
            provenance,
            method: "time-shift".into(),
            parameters: vec![crate::fit_engine::ParamEstimate {
                name: "tc_s".into(),
                value: est.tc_s,
                std_error: Some(est.std_error_s),
                unit: "s".into(),
            }],
            ssr: None,
            dof: None,
            converged: true,
            iterations: None,
            termination: None,
            seed,
            shift_pairs: est.pairs.clone(),
            warnings: Vec::new(),
        };
        if let Some(path) = &a.emit_curves {
            let reference = data.curves()[0].attenuation_db;
            let mut out = String::from("attenuation_db,time_s,aligned_time_s,fraction\n");
            for c in data.curves() {
                let lag = (c.attenuation_db - reference) / DB_PER_E_FOLD * est.tc_s;
                for p in c.points() {
                    let _ = writeln!(out, "{},{},{},{}", c.attenuation_db, p.time_s, p.time_s + lag, p.fraction());
                }
            }
            std::fs::write(path, out)?;
        }
        return emit(g, to_json_pretty(&report), report.to_text());
    }

    let (fit, failure) = match fit_ringdown(&data, None) {
        Ok(fit) => (fit, None),
        Err(Error::FitDidNotConverge(diag)) => ((*diag).clone(), Some(Error::FitDidNotConverge(diag))),
        Err(e) => return Err(e),
    };
    let report = FitReport::from_fit(provenance, "probe-model fit", &fit, seed);
    if let Some(path) = &a.emit_curves {
        let v = fit.values();
        let model = ProbeModel {
            p_background: v[2],
            p_saturated: v[3],
            u0: v[1],
        };
        let (t0, t1) = data
            .curves()
            .iter()
            .flat_map(|c| c.points())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.time_s), hi.max(p.time_s)));
        let mut out = String::from("attenuation_db,time_s,probability\n");
        for c in data.curves() {
            for i in 0..CURVE_SAMPLES {
                let t = t0 + (t1 - t0) * i as f64 / (CURVE_SAMPLES - 1) as f64;
                // fitted values may sit outside the validated model domain
                let p = model.p_background
                    + (model.p_saturated - model.p_background)
                        * -(-(model.u0 * (-c.attenuation_db / DB_PER_E_FOLD - t / v[0]).exp())).exp_m1();
                let _ = writeln!(out, "{},{t},{p}", c.attenuation_db);
            }
        }
        std::fs::write(path, out)?;
    }
    emit(g, to_json_pretty(&report), report.to_text())?;
    failure.map_or(Ok(()), Err)
}

pub fn cmd_thermal_fit(g: &GlobalOpts, a: &ThermalFitArgs, echo: Vec<String>) -> Result<()> {
    let data = formats::read_thermal_csv(&a.dataset)?;
    let provenance = Provenance::new(echo, vec![InputDigest::of_file(&a.dataset)?]);
    loss_budget::check_thermal_regimes(&data)?;
    let init = match &a.init {
        Some(s) => {
            let [a_coeff, gap, r_res] = parse_floats::<3>(s, "--init")?;
            ThermalFitInit {
                a_coeff_ohm_k: a_coeff,
                gap_over_kb_k: gap,
                r_residual_ohm: r_res,
            }
        }
        None => ThermalFitInit::from_data(&data, a.geometry_factor, a.freq)?,
    };
    let (fit, failure) = match fit_thermal(&data, a.geometry_factor, a.freq, &init) {
        Ok(fit) => (fit, None),
        Err(Error::FitDidNotConverge(diag)) => ((*diag).clone(), Some(Error::FitDidNotConverge(diag))),
        Err(e) => return Err(e),
    };
    let report = FitReport::from_fit(provenance, "bcs thermal fit", &fit, None);
    if let Some(path) = &a.emit_curves {
        let v = fit.values();
        let bcs = BcsParams {
            a_coeff_ohm_k: v[0],
            gap_over_kb_k: v[1],
        };
        let pts = data.points();
        let (inv_lo, inv_hi) = (1.0 / pts[pts.len() - 1].temperature_k, 1.0 / pts[0].temperature_k);
        let mut out = String::from("inverse_temperature_per_k,temperature_k,tc_s\n");
        for i in 0..CURVE_SAMPLES {
            let inv = inv_lo + (inv_hi - inv_lo) * i as f64 / (CURVE_SAMPLES - 1) as f64;
            let t = 1.0 / inv;
            let tc = tc_vs_temperature(&bcs, v[2], a.geometry_factor, a.freq, t)?;
            let _ = writeln!(out, "{inv},{t},{tc}");
        }
        std::fs::write(path, out)?;
    }
    emit(g, to_json_pretty(&report), report.to_text())?;
    failure.map_or(Ok(()), Err)
}

pub fn cmd_thermal_sim(g: &GlobalOpts, a: &ThermalSimArgs, _echo: Vec<String>) -> Result<()> {
    let bcs = parse_bcs(a.bcs.as_deref())?;
    let temps = match &a.temps {
        None => default_temperature_grid(),
        Some(s) => s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("--temps: bad number {t:?}")))
            })
            .collect::<Result<Vec<f64>>>()?,
    };
    let data = simulate_thermal(
        &bcs,
        a.residual,
        a.geometry_factor,
        a.freq,
        &temps,
        a.noise,
        g.seed.unwrap_or(1),
    )?;
    emit_data(g, &write_thermal_csv(&data))
}
