//! Hartree atomic units (ħ = mₑ = e = 1) and conversions to laboratory units.

use std::f64::consts::PI;

/// Ångström per bohr.
pub const BOHR_IN_ANGSTROM: f64 = 0.529177;
/// Femtoseconds per atomic unit of time.
pub const AU_TIME_IN_FS: f64 = 0.0241888;
/// Metres per second per atomic unit of velocity.
pub const AU_VELOCITY_IN_M_PER_S: f64 = 2.18769e6;

/// Tag written into snapshot headers.
pub const UNITS_TAG: &str = "hartree";

pub fn angstrom_to_bohr(a: f64) -> f64 {
    a / BOHR_IN_ANGSTROM
}

pub fn bohr_to_angstrom(b: f64) -> f64 {
    b * BOHR_IN_ANGSTROM
}

pub fn fs_to_au(t: f64) -> f64 {
    t / AU_TIME_IN_FS
}

pub fn au_to_fs(t: f64) -> f64 {
    t * AU_TIME_IN_FS
}

pub fn m_per_s_to_au(v: f64) -> f64 {
    v / AU_VELOCITY_IN_M_PER_S
}

/// Inverse ångström to inverse bohr.
pub fn per_angstrom_to_per_bohr(k: f64) -> f64 {
    k * BOHR_IN_ANGSTROM
}

/// de Broglie wavelength 2π/|k| for an electron (m = 1).
pub fn de_broglie_wavelength(k: f64) -> f64 {
    2.0 * PI / k.abs()
}

/// Wavenumber of an electron with the given de Broglie wavelength.
pub fn wavenumber_from_wavelength(lambda: f64) -> f64 {
    2.0 * PI / lambda
}

/// Incident wave-vector presets. The quoted electron speed and the quoted
/// wavelength of the source experiment do not describe the same electron, so
/// both are kept and a scenario must say which one it uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamPreset {
    /// v = 2.18×10⁶ m/s, i.e. |k| ≈ 1 a.u.
    Speed,
    /// |k| = 2.83 Å⁻¹, λ = 2.22 Å.
    Wavelength,
}

impl BeamPreset {
    pub fn wavenumber(self) -> f64 {
        match self {
            BeamPreset::Speed => m_per_s_to_au(2.18e6),
            BeamPreset::Wavelength => per_angstrom_to_per_bohr(2.83),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BeamPreset::Speed => "speed",
            BeamPreset::Wavelength => "wavelength",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "speed" => Some(BeamPreset::Speed),
            "wavelength" => Some(BeamPreset::Wavelength),
            _ => None,
        }
    }
}
