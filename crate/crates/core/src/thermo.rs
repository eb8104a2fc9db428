//! Canonical ensemble of the divided box.
//!
//! With the wall at ℓ, contact interactions act only within a side, so the
//! partition function for n particles on the left is Z^left_n(ℓ)·Z^right_{N−n}(1−ℓ).
//! All arithmetic is in log space; outcome probabilities span hundreds of decades
//! at low temperature.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SzilardError};
use crate::spectrum::{Spectrum, SpectrumStore};
use crate::units::EngineParams;

/// ln Σ exp(x_i); −∞ for an empty or all −∞ input.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionValue {
    pub log_z: f64,
    /// Energy subtracted before exponentiation (the ground energy).
    pub ground_energy_offset: f64,
}

impl PartitionValue {
    /// Z itself; may under- or overflow where `log_z` does not.
    pub fn value(&self) -> f64 {
        self.log_z.exp()
    }
}

/// Z = Σ_j exp(−E_j / k_BT), evaluated with the ground energy factored out.
pub fn partition_function(spectrum: &Spectrum, temperature: f64) -> Result<PartitionValue> {
    if !(temperature > 0.0) {
        return Err(SzilardError::InvalidParameter {
            name: "temperature",
            reason: format!("must be positive, got {temperature}"),
        });
    }
    if temperature > spectrum.max_temperature * (1.0 + 1e-9) {
        return Err(SzilardError::Truncated {
            temperature,
            covered: spectrum.max_temperature,
        });
    }
    let e0 = spectrum.ground_energy;
    let shifted = log_sum_exp(spectrum.energies.iter().map(|e| -(e - e0) / temperature));
    Ok(PartitionValue {
        log_z: -e0 / temperature + shifted,
        ground_energy_offset: e0,
    })
}

/// ln Z of one side plus a convergence residual (|Δ ln Z| of the underlying basis).
/// Composite values carry the larger residual of their two sides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideLogZ {
    pub log_z: f64,
    pub residual: f64,
}

impl SideLogZ {
    pub const EMPTY: SideLogZ = SideLogZ {
        log_z: 0.0,
        residual: 0.0,
    };
    pub const IMPOSSIBLE: SideLogZ = SideLogZ {
        log_z: f64::NEG_INFINITY,
        residual: 0.0,
    };

    pub fn exact(log_z: f64) -> Self {
        SideLogZ {
            log_z,
            residual: 0.0,
        }
    }
}

/// Source of single-side partition functions: exact diagonalization or a baseline.
pub trait SubsystemModel: Send + Sync {
    /// ln Z for `n` particles in a hard-wall box of length `length` ∈ (0, 1].
    fn side_log_z(&self, n: usize, length: f64, params: &EngineParams) -> Result<SideLogZ>;

    fn name(&self) -> &'static str;

    /// Largest k_BT (natural units) the model can evaluate, if bounded.
    fn max_temperature(&self) -> Option<f64> {
        None
    }

    /// Residual below which a result counts as converged.
    fn residual_tolerance(&self) -> f64 {
        1e-4
    }
}

/// Interacting bosons, spectra by exact diagonalization.
#[derive(Clone)]
pub struct ExactModel {
    store: Arc<SpectrumStore>,
    max_temperature: f64,
}

impl ExactModel {
    /// Spectra are truncated for k_BT up to `max_temperature` (natural units);
    /// asking for a higher temperature is an error.
    pub fn new(store: Arc<SpectrumStore>, max_temperature: f64) -> Self {
        ExactModel {
            store,
            max_temperature,
        }
    }

    pub fn store(&self) -> &Arc<SpectrumStore> {
        &self.store
    }
}

impl SubsystemModel for ExactModel {
    fn side_log_z(&self, n: usize, length: f64, params: &EngineParams) -> Result<SideLogZ> {
        if params.temperature > self.max_temperature * (1.0 + 1e-9) {
            return Err(SzilardError::Truncated {
                temperature: params.temperature,
                covered: self.max_temperature,
            });
        }
        let l2 = length * length;
        let unit =
            self.store
                .unit_spectrum(n, params.coupling * length, self.max_temperature * l2)?;
        Ok(SideLogZ {
            log_z: unit.log_z(params.temperature * l2)?,
            residual: unit.delta_log_z,
        })
    }

    fn name(&self) -> &'static str {
        "exact"
    }

    fn max_temperature(&self) -> Option<f64> {
        Some(self.max_temperature)
    }

    fn residual_tolerance(&self) -> f64 {
        self.store.policy().z_tolerance
    }
}

/// ln Z_n(ℓ) = ln Z^left_n(ℓ) + ln Z^right_{N−n}(1 − ℓ). A wall at 0 or 1 leaves one
/// side empty; any particle assigned to it makes the configuration impossible.
pub fn composite_log_z(
    model: &dyn SubsystemModel,
    n: usize,
    wall: f64,
    params: &EngineParams,
) -> Result<SideLogZ> {
    let total = params.n_particles;
    if n > total {
        return Err(SzilardError::InvalidParameter {
            name: "n",
            reason: format!("{n} exceeds the particle number {total}"),
        });
    }
    if !(0.0..=1.0).contains(&wall) {
        return Err(SzilardError::Domain {
            what: "wall position",
            value: wall,
            domain: "[0, 1]",
        });
    }
    let side = |count: usize, length: f64| -> Result<SideLogZ> {
        if count == 0 {
            Ok(SideLogZ::EMPTY)
        } else if length <= 0.0 {
            Ok(SideLogZ::IMPOSSIBLE)
        } else {
            model.side_log_z(count, length.min(1.0), params)
        }
    };
    let left = side(n, wall)?;
    if left.log_z == f64::NEG_INFINITY {
        return Ok(SideLogZ::IMPOSSIBLE);
    }
    let right = side(total - n, 1.0 - wall)?;
    if right.log_z == f64::NEG_INFINITY {
        return Ok(SideLogZ::IMPOSSIBLE);
    }
    Ok(SideLogZ {
        log_z: left.log_z + right.log_z,
        residual: left.residual.max(right.residual),
    })
}

/// Probabilities p_n(ℓ) of finding n particles left of the wall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub wall_position: f64,
    pub probabilities: Vec<f64>,
    pub per_outcome_log_z: Vec<f64>,
    /// ln Σ_n Z_n(ℓ).
    pub log_total: f64,
    /// Σ_n p_n times the basis residual of outcome n, each capped at 1.
    pub residual: f64,
}

impl OutcomeDistribution {
    pub fn n_particles(&self) -> usize {
        self.probabilities.len() - 1
    }
}

pub fn outcome_distribution(
    model: &dyn SubsystemModel,
    wall: f64,
    params: &EngineParams,
) -> Result<OutcomeDistribution> {
    let sides: Vec<SideLogZ> = (0..=params.n_particles)
        .map(|n| composite_log_z(model, n, wall, params))
        .collect::<Result<_>>()?;
    let per_outcome_log_z: Vec<f64> = sides.iter().map(|s| s.log_z).collect();
    let log_total = log_sum_exp(per_outcome_log_z.iter().copied());
    let probabilities: Vec<f64> = per_outcome_log_z
        .iter()
        .map(|&lz| (lz - log_total).exp())
        .collect();
    let residual = probabilities
        .iter()
        .zip(&sides)
        .map(|(p, s)| {
            if *p > 0.0 {
                p * s.residual.min(1.0)
            } else {
                0.0
            }
        })
        .sum();
    Ok(OutcomeDistribution {
        wall_position: wall,
        probabilities,
        per_outcome_log_z,
        log_total,
        residual,
    })
}

/// I = −Σ p ln p with 0·ln 0 = 0.
pub fn shannon(probabilities: &[f64]) -> f64 {
    -probabilities
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

pub fn shannon_information(dist: &OutcomeDistribution) -> f64 {
    shannon(&dist.probabilities)
}
