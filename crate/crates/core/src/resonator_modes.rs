//! Paraxial Gaussian modes of a symmetric two-mirror cavity with toroidal mirrors.
//!
//! Each mirror carries two radii of curvature in orthogonal principal planes.
//! The planes are treated independently: every per-axis quantity (waist,
//! Rayleigh range, Gouy phase) follows from the symmetric-resonator formulas
//! with that axis' radius. Quantities quoted for "the mode" as a whole use the
//! mean radius, see [`CavityGeometry::mean_radius_m`].
//!
//! Lengths are in meters and frequencies in hertz throughout.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityGeometry {
    /// Mirror apex spacing.
    pub length_m: f64,
    pub radius_x_m: f64,
    pub radius_y_m: f64,
    pub mirror_diameter_m: f64,
    /// r.m.s. surface deviation from the ideal shape.
    pub roughness_rms_m: f64,
}

impl CavityGeometry {
    /// The two-mirror niobium cavity at 51 GHz with 39.4/40.6 mm toroidal mirrors.
    pub const NB_51GHZ: CavityGeometry = CavityGeometry {
        length_m: 27.57e-3,
        radius_x_m: 39.4e-3,
        radius_y_m: 40.6e-3,
        mirror_diameter_m: 50e-3,
        roughness_rms_m: 10e-9,
    };

    pub fn new(
        length_m: f64,
        radius_x_m: f64,
        radius_y_m: f64,
        mirror_diameter_m: f64,
        roughness_rms_m: f64,
    ) -> Result<Self> {
        let geom = Self {
            length_m,
            radius_x_m,
            radius_y_m,
            mirror_diameter_m,
            roughness_rms_m,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// Checks field positivity. Stability is checked separately by the mode operations.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("length_m", self.length_m),
            ("radius_x_m", self.radius_x_m),
            ("radius_y_m", self.radius_y_m),
            ("mirror_diameter_m", self.mirror_diameter_m),
        ];
        for (name, v) in positive {
            // radii may be +inf (planar mirror)
            if !(v > 0.0) || v.is_nan() {
                return Err(Error::InvalidGeometry(format!("{name} must be > 0, got {v}")));
            }
        }
        if !self.length_m.is_finite() || !self.mirror_diameter_m.is_finite() {
            return Err(Error::InvalidGeometry("length and diameter must be finite".into()));
        }
        if !(self.roughness_rms_m >= 0.0) || !self.roughness_rms_m.is_finite() {
            return Err(Error::InvalidGeometry(format!(
                "roughness_rms_m must be >= 0, got {}",
                self.roughness_rms_m
            )));
        }
        Ok(())
    }

    pub fn mean_radius_m(&self) -> f64 {
        0.5 * (self.radius_x_m + self.radius_y_m)
    }

    /// Same cavity with both radii replaced by the mean radius.
    pub fn with_mean_radius(&self) -> Self {
        let r = self.mean_radius_m();
        Self {
            radius_x_m: r,
            radius_y_m: r,
            ..*self
        }
    }

    pub fn fsr_hz(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.length_m)
    }

    fn check_stable(&self) -> Result<(f64, f64)> {
        self.validate()?;
        let (gx, gy) = stability_g(self);
        for (axis, g) in [('x', gx), ('y', gy)] {
            if !(g * g < 1.0) {
                return Err(Error::UnstableGeometry { axis, g });
            }
        }
        Ok((gx, gy))
    }
}

/// Mode indices TEM_qmn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeIndices {
    /// Longitudinal index.
    pub q: u32,
    pub m: u32,
    pub n: u32,
}

impl ModeIndices {
    pub fn new(q: u32, m: u32, n: u32) -> Result<Self> {
        if q < 1 {
            return Err(Error::InvalidModeIndices("q must be >= 1".into()));
        }
        Ok(Self { q, m, n })
    }

    pub const TEM900: ModeIndices = ModeIndices { q: 9, m: 0, n: 0 };
}

impl std::str::FromStr for ModeIndices {
    type Err = Error;

    /// Parses `q,m,n`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("expected q,m,n, got {s:?}")));
        }
        let mut v = [0u32; 3];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p
                .parse()
                .map_err(|_| Error::Parse(format!("bad mode index {p:?} in {s:?}")))?;
        }
        ModeIndices::new(v[0], v[1], v[2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeProperties {
    pub frequency_hz: f64,
    pub fsr_hz: f64,
    pub waist_x_m: f64,
    pub waist_y_m: f64,
    pub rayleigh_x_m: f64,
    pub rayleigh_y_m: f64,
    pub mirror_spot_x_m: f64,
    pub mirror_spot_y_m: f64,
    /// One-way Gouy phase arccos(g_x).
    pub gouy_x_rad: f64,
    pub gouy_y_rad: f64,
    pub polarization_splitting_hz: f64,
}

impl ModeProperties {
    /// Full description of mode `idx`: frequency from the resonance condition,
    /// geometry evaluated at that frequency's wavelength.
    pub fn for_mode(geom: &CavityGeometry, idx: ModeIndices) -> Result<Self> {
        let nu = resonance_frequency(geom, idx)?;
        mode_geometry(geom, SPEED_OF_LIGHT / nu)
    }

    /// Spot size along x at axial position `z_m` measured from the cavity center.
    pub fn spot_x_at(&self, z_m: f64) -> f64 {
        self.waist_x_m * (1.0 + (z_m / self.rayleigh_x_m).powi(2)).sqrt()
    }

    pub fn spot_y_at(&self, z_m: f64) -> f64 {
        self.waist_y_m * (1.0 + (z_m / self.rayleigh_y_m).powi(2)).sqrt()
    }
}

/// Stability parameters `g = 1 − L/R` per axis.
pub fn stability_g(geom: &CavityGeometry) -> (f64, f64) {
    (
        1.0 - geom.length_m / geom.radius_x_m,
        1.0 - geom.length_m / geom.radius_y_m,
    )
}

fn rayleigh_range(length: f64, radius: f64) -> f64 {
    0.5 * (length * (2.0 * radius - length)).sqrt()
}

/// Mode geometry at wavelength `wavelength_m`.
///
/// `frequency_hz` is set to `c/λ`; the spectral fields (FSR, Gouy phases,
/// polarization splitting) are filled in as well since they are cheap.
pub fn mode_geometry(geom: &CavityGeometry, wavelength_m: f64) -> Result<ModeProperties> {
    if !(wavelength_m > 0.0) || !wavelength_m.is_finite() {
        return Err(Error::NonPositiveInput {
            name: "wavelength_m",
            value: wavelength_m,
        });
    }
    let (gx, gy) = geom.check_stable()?;
    let l = geom.length_m;
    let zx = rayleigh_range(l, geom.radius_x_m);
    let zy = rayleigh_range(l, geom.radius_y_m);
    let wx = (wavelength_m * zx / PI).sqrt();
    let wy = (wavelength_m * zy / PI).sqrt();
    let half = 0.5 * l;
    Ok(ModeProperties {
        frequency_hz: SPEED_OF_LIGHT / wavelength_m,
        fsr_hz: geom.fsr_hz(),
        waist_x_m: wx,
        waist_y_m: wy,
        rayleigh_x_m: zx,
        rayleigh_y_m: zy,
        mirror_spot_x_m: wx * (1.0 + (half / zx).powi(2)).sqrt(),
        mirror_spot_y_m: wy * (1.0 + (half / zy).powi(2)).sqrt(),
        gouy_x_rad: gx.acos(),
        gouy_y_rad: gy.acos(),
        polarization_splitting_hz: splitting(geom, wavelength_m),
    })
}

/// Paraxial resonance condition of a symmetric astigmatic cavity:
/// `ν = FSR·[q + (m+½)·arccos(g_x)/π + (n+½)·arccos(g_y)/π]`.
pub fn resonance_frequency(geom: &CavityGeometry, idx: ModeIndices) -> Result<f64> {
    let (gx, gy) = geom.check_stable()?;
    let order = idx.q as f64
        + (idx.m as f64 + 0.5) * gx.acos() / PI
        + (idx.n as f64 + 0.5) * gy.acos() / PI;
    Ok(geom.fsr_hz() * order)
}

fn splitting(geom: &CavityGeometry, wavelength_m: f64) -> f64 {
    let prefactor = SPEED_OF_LIGHT * wavelength_m / (4.0 * PI * PI * geom.length_m);
    prefactor * (1.0 / geom.radius_x_m - 1.0 / geom.radius_y_m).abs()
}

/// Frequency splitting of the two orthogonal linear polarizations,
/// `Δν = (c·λ / 4π²L)·|1/R_x − 1/R_y|`.
pub fn polarization_splitting(geom: &CavityGeometry, wavelength_m: f64) -> Result<f64> {
    if !(wavelength_m > 0.0) {
        return Err(Error::NonPositiveInput {
            name: "wavelength_m",
            value: wavelength_m,
        });
    }
    geom.check_stable()?;
    Ok(splitting(geom, wavelength_m))
}

/// Relative intensity of the Gaussian envelope at `(x, y)` in the plane `z`
/// (axial distance from the cavity center). Equals 1 on axis at the waist.
pub fn intensity_profile(mode: &ModeProperties, x_m: f64, y_m: f64, z_m: f64) -> f64 {
    let wx = mode.spot_x_at(z_m);
    let wy = mode.spot_y_at(z_m);
    (-2.0 * x_m * x_m / (wx * wx)).exp() * (-2.0 * y_m * y_m / (wy * wy)).exp()
}

/// Frequency shift caused by lengthening the cavity by `displacement_m`: `δν = −ν·δL/L`.
pub fn displacement_to_detuning(geom: &CavityGeometry, frequency_hz: f64, displacement_m: f64) -> f64 {
    -frequency_hz * displacement_m / geom.length_m
}

/// Inverse of [`displacement_to_detuning`].
pub fn detuning_to_displacement(geom: &CavityGeometry, frequency_hz: f64, detuning_hz: f64) -> f64 {
    -detuning_hz * geom.length_m / frequency_hz
}
