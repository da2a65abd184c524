//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use fpcavity::cli_io::formats::to_json_pretty;
use fpcavity::cli_io::report::{BudgetReport, FitReport, ModesReport};
use fpcavity::fit_engine::{least_squares, numeric_jacobian, FitOptions, FnObjective};
use fpcavity::loss_budget::{
    combine_q, default_temperature_grid, fit_thermal, q_diffraction, q_surface_scattering,
    quality_summary, resistance_from_q, residual_resistance_from_tc, simulate_thermal,
    tc_vs_temperature, BcsParams, ThermalFitInit, DEFAULT_RESIDUAL_OHM, GEOMETRY_FACTOR_OHM,
};
use fpcavity::resonator_modes::{
    detuning_to_displacement, mode_geometry, resonance_frequency, CavityGeometry, ModeIndices,
};
use fpcavity::ringdown::{
    curve_probability, fit_observations, fit_ringdown, Observation, ProbeModel, RingdownFitInit,
    SimulationDesign, DB_PER_E_FOLD,
};
use fpcavity::SPEED_OF_LIGHT;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const NU_MEASURED_HZ: f64 = 51.099e9;
/// Mirror spot size used for the diffraction estimate.
const MIRROR_SPOT_M: f64 = 7.38e-3;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);
type ReportCheck = fn(&[u8]) -> Result<(), String>;

fn within(name: &str, value: f64, target: f64, rel: f64) -> Outcome {
    let err = (value / target - 1.0).abs();
    let line = format!("{name} = {value:.5e} (target {target:.4e} +/- {:.2}%)", rel * 100.0);
    if err <= rel { Ok(line) } else { Err(line) }
}

fn in_range(name: &str, value: f64, lo: f64, hi: f64) -> Outcome {
    let line = format!("{name} = {value:.5e} in [{lo:.4e}, {hi:.4e}]");
    if (lo..=hi).contains(&value) { Ok(line) } else { Err(line) }
}

/// Runs every check and joins their descriptions; fails if any check fails.
fn all(checks: Vec<Outcome>) -> Outcome {
    let failed = checks.iter().any(Result::is_err);
    let text = checks
        .into_iter()
        .map(|c| match c {
            Ok(s) => s,
            Err(s) => format!("[failed] {s}"),
        })
        .collect::<Vec<_>>()
        .join("; ");
    if failed { Err(text) } else { Ok(text) }
}

fn mode_geometry_check() -> Outcome {
    let geom = CavityGeometry::NB_51GHZ.with_mean_radius();
    let m = mode_geometry(&geom, SPEED_OF_LIGHT / NU_MEASURED_HZ).map_err(|e| e.to_string())?;
    all(vec![
        in_range("w0 [m]", m.waist_x_m, 5.9e-3, 6.0e-3),
        in_range("w/w0", m.mirror_spot_x_m / m.waist_x_m, 1.23, 1.24),
    ])
}

fn spectrum_check() -> Outcome {
    let geom = CavityGeometry::NB_51GHZ;
    let nu = resonance_frequency(&geom, ModeIndices::TEM900).map_err(|e| e.to_string())?;
    let m = mode_geometry(&geom, SPEED_OF_LIGHT / nu).map_err(|e| e.to_string())?;
    all(vec![
        within("nu(9,0,0) [Hz]", nu, NU_MEASURED_HZ, 5e-4),
        within("polarization splitting [Hz]", m.polarization_splitting_hz, 1.2e6, 0.15),
    ])
}

fn loss_budget_check() -> Outcome {
    let geom = CavityGeometry::NB_51GHZ;
    let q_surf = q_surface_scattering(&geom, NU_MEASURED_HZ).map_err(|e| e.to_string())?;
    let q_diff = q_diffraction(&geom, NU_MEASURED_HZ, MIRROR_SPOT_M).map_err(|e| e.to_string())?;
    let q_geom = combine_q(&[q_diff, q_surf]).map_err(|e| e.to_string())?;
    let bound = if q_geom >= 4.2e10 {
        Ok("Q' >= measured 4.2e10".to_string())
    } else {
        Err(format!("Q' {q_geom:.3e} below measured 4.2e10"))
    };
    all(vec![
        within("Q_surf", q_surf, 6.4e10, 0.02),
        in_range("Q_diff (w = 7.38 mm)", q_diff, 2.4e11, 3.3e11),
        within("Q'", q_geom, 5.2e10, 0.03),
        bound,
    ])
}

fn conversions_check() -> Outcome {
    let s = quality_summary(NU_MEASURED_HZ, NU_MEASURED_HZ / 9.0, 0.130, 9).map_err(|e| e.to_string())?;
    let omega = 2.0 * PI * NU_MEASURED_HZ;
    let r = residual_resistance_from_tc(GEOMETRY_FACTOR_OHM, omega, 0.130).map_err(|e| e.to_string())?;
    let r_maser = resistance_from_q(1089.0, 4.0e10).map_err(|e| e.to_string())?;
    all(vec![
        within("Q", s.q_factor, 4.2e10, 0.01),
        within("finesse Q/q", s.finesse_q_ratio, 4.6e9, 0.01),
        within("FWHM [Hz]", s.fwhm_hz, 1.22, 0.01),
        within("photon path [m]", s.photon_path_m, 3.9e7, 0.01),
        within("R (G=2800) [ohm]", r, 68e-9, 0.02),
        within("R (G=1089) [ohm]", r_maser, 28e-9, 0.04),
    ])
}

fn displacement_check() -> Outcome {
    let geom = CavityGeometry::NB_51GHZ;
    let nu = resonance_frequency(&geom, ModeIndices::TEM900).map_err(|e| e.to_string())?;
    let dx = detuning_to_displacement(&geom, nu, 1.0).abs();
    within("displacement per Hz [m]", dx, 500e-15, 0.10)
}

fn shift_identity_check() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let pbg = rng.random_range(0.0..0.4);
        let psat = rng.random_range(pbg + 0.05..1.0);
        let m = ProbeModel::new(pbg, psat, rng.random_range(0.1..20.0)).map_err(|e| e.to_string())?;
        let tc = rng.random_range(0.01..1.0);
        let att = rng.random_range(0.0..20.0);
        let shift = tc * att / DB_PER_E_FOLD;
        for i in 0..50 {
            let t = 4.0 * tc * i as f64 / 49.0;
            let a = curve_probability(&m, tc, att, t).map_err(|e| e.to_string())?;
            let b = curve_probability(&m, tc, 0.0, t + shift).map_err(|e| e.to_string())?;
            worst = worst.max((a - b).abs());
        }
    }
    let line = format!("max |P(a, t) - P(0, t + Tc*a/4.343)| = {worst:.2e} over 100 draws x 50 times");
    if worst <= 1e-12 { Ok(line) } else { Err(line) }
}

fn ringdown_statistics_check() -> Outcome {
    let seeds = 40;
    let (mut sq, mut se) = (0.0, 0.0);
    for seed in 0..seeds {
        let design = SimulationDesign::three_efold(seed);
        let fit = fit_ringdown(&design.simulate().map_err(|e| e.to_string())?, None)
            .map_err(|e| format!("seed {seed}: {e}"))?;
        sq += (fit.value("tc_s") - design.tc_s).powi(2);
        se += fit.std_error("tc_s").ok_or("missing std error")?;
    }
    let rms = (sq / seeds as f64).sqrt();
    all(vec![
        in_range(&format!("RMS error over {seeds} seeds [s]"), rms, 0.0, 6e-3),
        in_range("mean std error [s]", se / seeds as f64, 2e-3, 8e-3),
    ])
}

fn thermal_statistics_check() -> Outcome {
    let seeds = 40;
    let temps = default_temperature_grid();
    let (mut sum, mut worst_se) = (0.0, 0.0_f64);
    for seed in 0..seeds {
        let data = simulate_thermal(
            &BcsParams::NIOBIUM,
            DEFAULT_RESIDUAL_OHM,
            GEOMETRY_FACTOR_OHM,
            NU_MEASURED_HZ,
            &temps,
            0.05,
            seed,
        )
        .map_err(|e| e.to_string())?;
        let init = ThermalFitInit::from_data(&data, GEOMETRY_FACTOR_OHM, NU_MEASURED_HZ)
            .map_err(|e| e.to_string())?;
        let fit = fit_thermal(&data, GEOMETRY_FACTOR_OHM, NU_MEASURED_HZ, &init)
            .map_err(|e| format!("seed {seed}: {e}"))?;
        sum += fit.value("gap_over_kb_k");
        worst_se = worst_se.max(fit.std_error("gap_over_kb_k").ok_or("missing std error")?);
    }
    all(vec![
        in_range(&format!("mean gap over {seeds} seeds [K]"), sum / seeds as f64, 19.9, 20.5),
        in_range("largest std error [K]", worst_se, 0.0, 0.5),
    ])
}

fn noiseless_recovery_check() -> Outcome {
    let corners = [1.0 / 3.0, 3.0];
    let mut worst_rd = 0.0_f64;
    let truth = ProbeModel::new(0.1, 0.5, 2.0).unwrap();
    let tc = 0.112;
    let mut obs = Vec::new();
    for k in 0..3 {
        let att = k as f64 * DB_PER_E_FOLD;
        for i in 0..25 {
            let t = 0.4 * i as f64 / 24.0;
            let p = curve_probability(&truth, tc, att, t).unwrap();
            obs.push(Observation {
                attenuation_db: att,
                time_s: t,
                fraction: p,
                variance: p * (1.0 - p) / 1600.0,
            });
        }
    }
    for &ft in &corners {
        for &fu in &corners {
            let init = RingdownFitInit {
                tc_s: tc * ft,
                probe: ProbeModel::new(0.05, 0.6, 2.0 * fu).unwrap(),
            };
            let fit = fit_observations(&obs, &init).map_err(|e| e.to_string())?;
            for (v, t) in fit.values().iter().zip([tc, 2.0, 0.1, 0.5]) {
                worst_rd = worst_rd.max((v / t - 1.0).abs());
            }
        }
    }

    let p = BcsParams::NIOBIUM;
    let data = simulate_thermal(
        &p,
        DEFAULT_RESIDUAL_OHM,
        GEOMETRY_FACTOR_OHM,
        NU_MEASURED_HZ,
        &default_temperature_grid(),
        0.0,
        0,
    )
    .map_err(|e| e.to_string())?;
    let mut worst_th = 0.0_f64;
    let truth_th = [p.a_coeff_ohm_k, p.gap_over_kb_k, DEFAULT_RESIDUAL_OHM];
    for &fa in &corners {
        for &fg in &corners {
            for &fr in &corners {
                let init = ThermalFitInit {
                    a_coeff_ohm_k: truth_th[0] * fa,
                    gap_over_kb_k: truth_th[1] * fg,
                    r_residual_ohm: truth_th[2] * fr,
                };
                let fit = fit_thermal(&data, GEOMETRY_FACTOR_OHM, NU_MEASURED_HZ, &init)
                    .map_err(|e| e.to_string())?;
                for (v, t) in fit.values().iter().zip(truth_th) {
                    worst_th = worst_th.max((v / t - 1.0).abs());
                }
            }
        }
    }
    // sanity: the generator really is the model being fitted
    let direct = tc_vs_temperature(&p, DEFAULT_RESIDUAL_OHM, GEOMETRY_FACTOR_OHM, NU_MEASURED_HZ, 2.0)
        .map_err(|e| e.to_string())?;
    let from_data = data.points().iter().find(|q| q.temperature_k == 2.0).unwrap().tc_s;
    all(vec![
        in_range("ring-down worst relative error (4 inits)", worst_rd, 0.0, 1e-6),
        in_range("thermal worst relative error (8 inits)", worst_th, 0.0, 1e-6),
        in_range("generator mismatch", (direct - from_data).abs(), 0.0, 0.0),
    ])
}

fn fit_engine_check() -> Outcome {
    // weighted straight line y = a + b x against its normal equations
    let xs: Vec<f64> = (0..30).map(|i| i as f64 * 0.37 - 2.0).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 1.5 - 0.8 * x + 0.3 * (3.1 * x).sin()).collect();
    let ws: Vec<f64> = xs.iter().map(|x| 1.0 + 0.1 * x * x).collect();
    let (mut s, mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((x, y), w) in xs.iter().zip(&ys).zip(&ws) {
        s += w;
        sx += w * x;
        sxx += w * x * x;
        sy += w * y;
        sxy += w * x * y;
    }
    let det = s * sxx - sx * sx;
    let a = (sxx * sy - sx * sxy) / det;
    let b = (s * sxy - sx * sy) / det;
    let obj = FnObjective::new(2, |p: &[f64]| {
        xs.iter()
            .zip(&ys)
            .zip(&ws)
            .map(|((x, y), w)| w.sqrt() * (y - p[0] - p[1] * x))
            .collect()
    });
    let fit = least_squares(&obj, &[0.0, 0.0], &FitOptions::default()).map_err(|e| e.to_string())?;
    let v = fit.values();
    let lin_err = ((v[0] - a).abs() / a.abs()).max((v[1] - b).abs() / b.abs());

    // central differences on a smooth function with known derivative
    let f = |p: &[f64]| vec![(p[0] * p[1]).sin(), (0.5 * p[0]).exp() * p[1]];
    let at: [f64; 2] = [0.7, 1.3];
    let exact = [
        [at[1] * (at[0] * at[1]).cos(), at[0] * (at[0] * at[1]).cos()],
        [0.5 * (0.5 * at[0]).exp() * at[1], (0.5 * at[0]).exp()],
    ];
    let err = |h: f64| -> Result<f64, String> {
        let j = numeric_jacobian(f, &at, h).map_err(|e| e.to_string())?;
        let mut m = 0.0_f64;
        for r in 0..2 {
            for c in 0..2 {
                m = m.max((j[(r, c)] - exact[r][c]).abs());
            }
        }
        Ok(m)
    };
    let (e1, e2) = (err(1.0 / 64.0)?, err(1.0 / 128.0)?);
    let order = (e1 / e2).log2();
    all(vec![
        in_range("linear fit vs normal equations (relative)", lin_err, 0.0, 1e-10),
        in_range("Jacobian order under step halving", order, 1.8, f64::INFINITY),
    ])
}

fn cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_fpcavity"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn round_trips<T: serde::de::DeserializeOwned + serde::Serialize>(bytes: &[u8]) -> Result<(), String> {
    let text = std::str::from_utf8(bytes).map_err(|e| e.to_string())?;
    let parsed: T = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if to_json_pretty(&parsed) == text {
        Ok(())
    } else {
        Err("re-serialized report differs".into())
    }
}

fn determinism_check() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let design = data.join("ringdown_design.json");
    let geometry = data.join("nb_51ghz_cavity.json");
    let thermal = data.join("thermal_synthetic.csv");
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let s = |q: &Path| q.to_str().unwrap().to_string();

    cli(&["--out", &p("a.csv"), "ringdown-sim", &s(&design)])?;
    cli(&["--out", &p("b.csv"), "ringdown-sim", &s(&design)])?;
    let read = |name: &str| std::fs::read(dir.path().join(name)).map_err(|e| e.to_string());
    let identical = read("a.csv")? == read("b.csv")?;

    let mut checks = vec![if identical {
        Ok("ringdown-sim output byte-identical".to_string())
    } else {
        Err("ringdown-sim outputs differ".to_string())
    }];
    let reports: [(&str, Vec<u8>, ReportCheck); 5] = [
        ("modes", cli(&["--json", "modes", &s(&geometry)])?, round_trips::<ModesReport>),
        ("budget", cli(&["--json", "budget", &s(&geometry)])?, round_trips::<BudgetReport>),
        ("ringdown-fit", cli(&["--json", "ringdown-fit", &p("a.csv")])?, round_trips::<FitReport>),
        (
            "ringdown-fit --shift-only",
            cli(&["--json", "ringdown-fit", &p("a.csv"), "--shift-only"])?,
            round_trips::<FitReport>,
        ),
        ("thermal-fit", cli(&["--json", "thermal-fit", &s(&thermal)])?, round_trips::<FitReport>),
    ];
    for (name, bytes, check) in reports {
        checks.push(check(&bytes).map(|()| format!("{name} report round-trips")).map_err(|e| format!("{name}: {e}")));
    }
    all(checks)
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("mode geometry", mode_geometry_check),
        ("spectrum", spectrum_check),
        ("loss budget", loss_budget_check),
        ("conversions", conversions_check),
        ("displacement", displacement_check),
        ("ring-down shift identity", shift_identity_check),
        ("ring-down estimation", ringdown_statistics_check),
        ("thermal fit", thermal_statistics_check),
        ("noiseless recovery", noiseless_recovery_check),
        ("fit engine", fit_engine_check),
        ("determinism", determinism_check),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.2} s): {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name} ({secs:.2} s): {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
