//! Hard-wall sine modes and bosonic occupation-number states over them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SzilardError};

/// Slack on energy comparisons so that states exactly at the cutoff are kept.
const CUTOFF_SLACK: f64 = 1e-9;

/// Single-particle eigenmodes φ_k(x) = √(2/ℓ) sin(kπx/ℓ), k = 1..M, of a box of length ℓ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeBasis {
    pub length: f64,
    pub mode_energies: Vec<f64>,
}

impl ModeBasis {
    pub fn new(length: f64, n_modes: usize) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(SzilardError::Domain {
                what: "length",
                value: length,
                domain: "(0, inf)",
            });
        }
        if n_modes == 0 {
            return Err(SzilardError::InvalidParameter {
                name: "n_modes",
                reason: "at least one mode is required".into(),
            });
        }
        let mode_energies = (1..=n_modes).map(|k| mode_energy(k, length)).collect();
        Ok(ModeBasis {
            length,
            mode_energies,
        })
    }

    pub fn unit_box(n_modes: usize) -> Result<Self> {
        Self::new(1.0, n_modes)
    }

    pub fn n_modes(&self) -> usize {
        self.mode_energies.len()
    }

    /// ε_k for 1-based k.
    pub fn energy(&self, k: usize) -> f64 {
        self.mode_energies[k - 1]
    }
}

/// k²π²/(2ℓ²).
pub fn mode_energy(k: usize, length: f64) -> f64 {
    let k = k as f64;
    k * k * PI * PI / (2.0 * length * length)
}

/// Occupation numbers over modes 1..M; index 0 holds mode 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FockState {
    pub occupations: Vec<u8>,
}

impl FockState {
    pub fn particle_count(&self) -> usize {
        self.occupations.iter().map(|&o| o as usize).sum()
    }

    /// Noninteracting energy Σ_k n_k ε_k.
    pub fn energy(&self, modes: &ModeBasis) -> f64 {
        self.occupations
            .iter()
            .zip(&modes.mode_energies)
            .map(|(&o, e)| o as f64 * e)
            .sum()
    }

    /// Reflection parity about the box centre: 0 even, 1 odd. Modes with even k are odd.
    pub fn parity(&self) -> u8 {
        let odd: usize = self
            .occupations
            .iter()
            .skip(1)
            .step_by(2)
            .map(|&o| o as usize)
            .sum();
        (odd % 2) as u8
    }
}

/// All occupation vectors with `n` particles whose noninteracting energy is at most
/// `energy_cutoff`, in descending lexicographic order (the ground configuration first).
pub fn build_fock_basis(n: usize, modes: &ModeBasis, energy_cutoff: f64) -> Result<Vec<FockState>> {
    let m = modes.n_modes();
    if n == 0 {
        return Ok(vec![FockState {
            occupations: vec![0; m],
        }]);
    }
    if n > u8::MAX as usize {
        return Err(SzilardError::InvalidParameter {
            name: "n",
            reason: format!("at most {} particles per subsystem", u8::MAX),
        });
    }
    let ground = n as f64 * modes.energy(1);
    let cutoff = energy_cutoff * (1.0 + CUTOFF_SLACK) + CUTOFF_SLACK;
    if ground > cutoff {
        return Err(SzilardError::EmptyBasis {
            n,
            cutoff: energy_cutoff,
            ground,
        });
    }
    let mut out = Vec::new();
    let mut current = vec![0u8; m];
    fill(0, n, cutoff, &modes.mode_energies, &mut current, &mut out);
    Ok(out)
}

fn fill(
    idx: usize,
    remaining: usize,
    budget: f64,
    energies: &[f64],
    current: &mut Vec<u8>,
    out: &mut Vec<FockState>,
) {
    if remaining == 0 {
        out.push(FockState {
            occupations: current.clone(),
        });
        return;
    }
    if idx == energies.len() {
        return;
    }
    let e = energies[idx];
    let next_min = energies.get(idx + 1).copied();
    let max_here = ((budget / e).floor() as usize).min(remaining);
    for occ in (0..=max_here).rev() {
        let rest = remaining - occ;
        let spent = occ as f64 * e;
        match next_min {
            None if rest > 0 => continue,
            Some(en) if spent + rest as f64 * en > budget => continue,
            _ => {}
        }
        current[idx] = occ as u8;
        fill(idx + 1, rest, budget - spent, energies, current, out);
        current[idx] = 0;
    }
}

fn overlap_d(a: usize, b: usize) -> f64 {
    if a != b {
        0.0
    } else if a == 0 {
        1.0
    } else {
        0.5
    }
}

/// I_ijkl = ∫₀^ℓ φ_i φ_j φ_k φ_l dx for 1-based sine-mode indices.
///
/// Products of sines reduce to cosines of (i ± j)πx/ℓ and (k ± l)πx/ℓ, whose
/// mutual overlaps are the `overlap_d` weights.
pub fn delta_matrix_element(i: usize, j: usize, k: usize, l: usize, length: f64) -> f64 {
    debug_assert!(i >= 1 && j >= 1 && k >= 1 && l >= 1);
    let dij = i.abs_diff(j);
    let sij = i + j;
    let dkl = k.abs_diff(l);
    let skl = k + l;
    (overlap_d(dij, dkl) - overlap_d(dij, skl) - overlap_d(sij, dkl) + overlap_d(sij, skl)) / length
}
