//! Natural units and the box-length scaling law.
//!
//! Internally ħ = m = L = 1, so the coupling unit g0 = ħ²/(Lm) is 1 and the
//! single-particle ground energy of the full box is E1 = π²/2. Temperatures are
//! stored as k_BT in these energy units; `reduced_temperature` converts to k_BT/E1.
//!
//! A box of length ℓ with coupling g has the spectrum of the unit box with
//! coupling g·ℓ, divided by ℓ². All spectra are therefore computed in the unit box.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Result, SzilardError};

/// Single-particle ground energy of the unit box, ħ²π²/(2mL²) with ħ = m = L = 1.
pub const E1: f64 = PI * PI / 2.0;

/// Physical quantities in arbitrary but consistent units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    pub n_particles: usize,
    /// Contact coupling g (energy × length).
    pub coupling: f64,
    /// Thermal energy k_BT.
    pub thermal_energy: f64,
    pub length: f64,
    pub mass: f64,
    pub hbar: f64,
}

/// Dimensionless engine configuration with L = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineParams {
    pub n_particles: usize,
    /// g / g0.
    pub coupling: f64,
    /// k_BT in units of ħ²/(mL²); k_BT = E1 corresponds to π²/2.
    pub temperature: f64,
}

impl EngineParams {
    pub const BOX_LENGTH: f64 = 1.0;

    /// Builds parameters from the reduced temperature k_BT/E1 used on all outputs.
    pub fn new(n_particles: usize, coupling: f64, reduced_temperature: f64) -> Result<Self> {
        let params = EngineParams {
            n_particles,
            coupling,
            temperature: reduced_temperature * E1,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(SzilardError::InvalidParameter {
                name: "n_particles",
                reason: "at least one particle is required".into(),
            });
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(SzilardError::InvalidParameter {
                name: "temperature",
                reason: format!("must be positive and finite, got {}", self.temperature),
            });
        }
        if !self.coupling.is_finite() {
            return Err(SzilardError::InvalidParameter {
                name: "coupling",
                reason: "must be finite".into(),
            });
        }
        Ok(())
    }

    /// k_BT / E1.
    pub fn reduced_temperature(&self) -> f64 {
        self.temperature / E1
    }

    pub fn with_temperature(self, temperature: f64) -> Self {
        EngineParams {
            temperature,
            ..self
        }
    }

    pub fn with_reduced_temperature(self, reduced: f64) -> Self {
        self.with_temperature(reduced * E1)
    }

    pub fn with_coupling(self, coupling: f64) -> Self {
        EngineParams { coupling, ..self }
    }

    pub fn to_raw(&self) -> RawParams {
        RawParams {
            n_particles: self.n_particles,
            coupling: self.coupling,
            thermal_energy: self.temperature,
            length: 1.0,
            mass: 1.0,
            hbar: 1.0,
        }
    }
}

/// Converts physical quantities to natural units (ħ = m = L = 1).
pub fn normalize(raw: &RawParams) -> Result<EngineParams> {
    for (name, value) in [
        ("length", raw.length),
        ("mass", raw.mass),
        ("hbar", raw.hbar),
        ("thermal_energy", raw.thermal_energy),
    ] {
        if !(value > 0.0) || !value.is_finite() {
            return Err(SzilardError::InvalidParameter {
                name,
                reason: format!("must be positive and finite, got {value}"),
            });
        }
    }
    let energy_unit = raw.hbar * raw.hbar / (raw.mass * raw.length * raw.length);
    let coupling_unit = raw.hbar * raw.hbar / (raw.length * raw.mass);
    let params = EngineParams {
        n_particles: raw.n_particles,
        coupling: raw.coupling / coupling_unit,
        temperature: raw.thermal_energy / energy_unit,
    };
    params.validate()?;
    Ok(params)
}

/// Maps unit-box energies (computed at coupling g·ℓ) to a box of length ℓ.
pub fn scale_spectrum(unit_box_energies: &[f64], length: f64) -> Result<Vec<f64>> {
    if !(length > 0.0 && length <= 1.0) {
        return Err(SzilardError::Domain {
            what: "length",
            value: length,
            domain: "(0, 1]",
        });
    }
    let factor = 1.0 / (length * length);
    Ok(unit_box_energies.iter().map(|e| e * factor).collect())
}

/// Rounds to 12 significant digits; used to key cached spectra on g·ℓ.
pub fn round_significant(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { 0.0 } else { x };
    }
    let s = format!("{:.11e}", x);
    s.parse().unwrap_or(x)
}

/// Identifies a unit-box diagonalization. Equal keys give identical spectra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsystemKey {
    pub n: usize,
    /// g·ℓ rounded to 12 significant digits.
    pub g_eff: f64,
    pub basis_size: usize,
    /// Rounded like `g_eff`.
    pub energy_cutoff: f64,
}

impl SubsystemKey {
    pub fn new(n: usize, g_eff: f64, basis_size: usize, energy_cutoff: f64) -> Self {
        SubsystemKey {
            n,
            g_eff: round_significant(g_eff),
            basis_size,
            energy_cutoff: round_significant(energy_cutoff),
        }
    }

    pub(crate) fn hash_key(&self) -> (usize, u64, usize, u64) {
        (
            self.n,
            self.g_eff.to_bits(),
            self.basis_size,
            self.energy_cutoff.to_bits(),
        )
    }
}
