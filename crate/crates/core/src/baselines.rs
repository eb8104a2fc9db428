//! Reference engines: classical particles, ideal Bose and Fermi gases, first-order
//! perturbation theory, and the peak-temperature estimate.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::engine::{work_total, CyclePlan, WorkBreakdown};
use crate::error::{Result, SzilardError};
use crate::search::{grid_then_golden, Maximum};
use crate::thermo::{log_sum_exp, SideLogZ, SubsystemModel};
use crate::units::{EngineParams, E1};

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Classical cycle work in units of k_BT with removals at m/N.
pub fn classical_work(n_particles: usize, insertion: f64) -> Result<f64> {
    if n_particles == 0 {
        return Err(SzilardError::InvalidParameter {
            name: "n_particles",
            reason: "must be at least 1".into(),
        });
    }
    if !(insertion > 0.0 && insertion < 1.0) {
        return Err(SzilardError::Domain {
            what: "insertion",
            value: insertion,
            domain: "(0, 1)",
        });
    }
    let n = n_particles;
    let x = insertion;
    let y = 1.0 - x;
    let nf = n as f64;
    let mut w = -nf * (x.powi(n as i32) * x.ln() + y.powi(n as i32) * y.ln());
    for m in 1..n {
        let mf = m as f64;
        let ln_p = mf * x.ln() + (nf - mf) * y.ln();
        let q = mf / nf;
        let ln_q = mf * q.ln() + (nf - mf) * (1.0 - q).ln();
        w -= (ln_binomial(n, m) + ln_p).exp() * (ln_p - ln_q);
    }
    Ok(w)
}

/// Maximum of [`classical_work`] over the insertion position.
pub fn classical_optimum(n_particles: usize) -> Result<Maximum> {
    grid_then_golden(
        |x| classical_work(n_particles, x),
        1e-6,
        1.0 - 1e-6,
        2001,
        1e-10,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Statistics {
    Bose,
    Fermi,
}

/// Relative Boltzmann weight the highest supplied level may still carry.
const LEVEL_TOLERANCE: f64 = 1e-12;

/// Exact canonical ln Z of `n` ideal particles on ascending `levels` at temperature
/// `temperature` (k_BT, natural units).
///
/// Bosons use Z_n = (1/n) Σ_k Z_1(kβ) Z_{n−k}. Fermions use the n-th elementary
/// symmetric polynomial of the Boltzmann factors, which equals the signed recursion.
pub fn ideal_canonical_log_z(
    n: usize,
    levels: &[f64],
    temperature: f64,
    statistics: Statistics,
) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    if !(temperature > 0.0) {
        return Err(SzilardError::InvalidParameter {
            name: "temperature",
            reason: format!("must be positive, got {temperature}"),
        });
    }
    if levels.is_empty() {
        return Err(SzilardError::LevelsExhausted { weight: 1.0 });
    }
    let e0 = levels[0];
    let x: Vec<f64> = levels
        .iter()
        .map(|e| (-(e - e0) / temperature).exp())
        .collect();
    // weight of the highest level relative to the highest one that must be occupied
    let reference = match statistics {
        Statistics::Bose => e0,
        Statistics::Fermi => levels[(n - 1).min(levels.len() - 1)],
    };
    let top = (-(levels[levels.len() - 1] - reference) / temperature).exp();
    if top >= LEVEL_TOLERANCE && !(statistics == Statistics::Fermi && levels.len() == n) {
        return Err(SzilardError::LevelsExhausted { weight: top });
    }
    match statistics {
        Statistics::Bose => {
            // shifted quantities: Z_n = e^{−nβε_0} Y_n
            let z1: Vec<f64> = (1..=n)
                .map(|k| x.iter().map(|w| w.powi(k as i32)).sum())
                .collect();
            Ok(ideal_bose_log_space(n, &z1) - n as f64 * e0 / temperature)
        }
        Statistics::Fermi => {
            if levels.len() < n {
                return Ok(f64::NEG_INFINITY);
            }
            // elementary symmetric polynomials in log space
            let mut le = vec![f64::NEG_INFINITY; n + 1];
            le[0] = 0.0;
            for e in levels {
                let lx = -(e - e0) / temperature;
                for j in (1..=n).rev() {
                    le[j] = log_sum_exp([le[j], lx + le[j - 1]]);
                }
            }
            Ok(le[n] - n as f64 * e0 / temperature)
        }
    }
}

fn ideal_bose_log_space(n: usize, z1: &[f64]) -> f64 {
    let mut ly = vec![0.0f64];
    for m in 1..=n {
        let terms = (1..=m).map(|k| z1[k - 1].ln() + ly[m - k]);
        ly.push(log_sum_exp(terms) - (m as f64).ln());
    }
    ly[n]
}

/// Single-particle levels k²π²/(2ℓ²) of a hard-wall box, extending until the weight
/// relative to level `occupied` drops below 1e−16 at `temperature`.
pub fn box_levels(length: f64, temperature: f64, occupied: usize) -> Vec<f64> {
    let e1 = PI * PI / (2.0 * length * length);
    let reach = e1 * (occupied.max(1) * occupied.max(1)) as f64
        + 16.0 * std::f64::consts::LN_10 * temperature;
    let mut out = Vec::new();
    let mut k = 1usize;
    loop {
        let e = e1 * (k * k) as f64;
        out.push(e);
        if e > reach {
            break;
        }
        k += 1;
    }
    out
}

/// Noninteracting bosons or fermions in each side.
#[derive(Debug, Clone, Copy)]
pub struct IdealGasModel {
    pub statistics: Statistics,
}

impl SubsystemModel for IdealGasModel {
    fn side_log_z(&self, n: usize, length: f64, params: &EngineParams) -> Result<SideLogZ> {
        let occupied = match self.statistics {
            Statistics::Bose => 1,
            Statistics::Fermi => n,
        };
        let levels = box_levels(length, params.temperature, occupied);
        Ok(SideLogZ::exact(ideal_canonical_log_z(
            n,
            &levels,
            params.temperature,
            self.statistics,
        )?))
    }

    fn name(&self) -> &'static str {
        match self.statistics {
            Statistics::Bose => "ideal-bose",
            Statistics::Fermi => "ideal-fermi",
        }
    }
}

/// Distinguishable classical particles: Z_n(ℓ) ∝ ℓ^n / n!, giving binomial outcomes.
#[derive(Debug, Clone, Copy, Default)]
pub struct ClassicalModel;

impl SubsystemModel for ClassicalModel {
    fn side_log_z(&self, n: usize, length: f64, _params: &EngineParams) -> Result<SideLogZ> {
        Ok(SideLogZ::exact(n as f64 * length.ln() - ln_factorial(n)))
    }

    fn name(&self) -> &'static str {
        "classical"
    }
}

/// First-order interaction energy of n bosons sharing the ground mode of a box of length ℓ.
pub fn pair_shift(n: usize, length: f64, coupling: f64) -> f64 {
    let pairs = (n * n.saturating_sub(1)) as f64 / 2.0;
    pairs * 3.0 * coupling / (2.0 * length)
}

/// Energy of one side in the single-configuration picture: all n particles in the
/// side's ground mode plus the first-order contact shift.
pub fn perturbative_side_energy(n: usize, length: f64, coupling: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    n as f64 * E1 / (length * length) + pair_shift(n, length, coupling)
}

/// E_n(ℓ) = E_n^(0)(ℓ) + E_n^(1)(ℓ) for n particles left of a wall at ℓ and N − n right of it.
pub fn perturbative_energy(
    n_left: usize,
    n_particles: usize,
    wall: f64,
    coupling: f64,
) -> Result<f64> {
    if n_left > n_particles {
        return Err(SzilardError::InvalidParameter {
            name: "n_left",
            reason: format!("{n_left} exceeds {n_particles}"),
        });
    }
    if !(0.0..=1.0).contains(&wall) {
        return Err(SzilardError::Domain {
            what: "wall position",
            value: wall,
            domain: "[0, 1]",
        });
    }
    let n_right = n_particles - n_left;
    let side = |n: usize, len: f64| {
        if n == 0 {
            0.0
        } else if len <= 0.0 {
            f64::INFINITY
        } else {
            perturbative_side_energy(n, len, coupling)
        }
    };
    Ok(side(n_left, wall) + side(n_right, 1.0 - wall))
}

/// Conditions under which the single-configuration first-order picture applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbativeValidity {
    pub weak_coupling: bool,
    pub low_temperature: bool,
}

impl PerturbativeValidity {
    /// Weak coupling: |g|(N − 1) ≤ π²/10. Low temperature: k_BT ≤ E1.
    pub fn check(params: &EngineParams) -> Self {
        let spread = params.coupling.abs() * params.n_particles.saturating_sub(1) as f64;
        PerturbativeValidity {
            weak_coupling: spread <= PI * PI / 10.0,
            low_temperature: params.temperature <= E1,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.weak_coupling && self.low_temperature
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if !self.weak_coupling {
            w.push(
                "coupling too strong for first-order perturbation theory (|g|(N-1) > pi^2/10)"
                    .into(),
            );
        }
        if !self.low_temperature {
            w.push("temperature above E1: excited single-particle levels are ignored".into());
        }
        w
    }
}

/// Boltzmann weight of the single perturbative configuration per side.
#[derive(Debug, Clone, Copy, Default)]
pub struct PerturbativeModel;

impl SubsystemModel for PerturbativeModel {
    fn side_log_z(&self, n: usize, length: f64, params: &EngineParams) -> Result<SideLogZ> {
        Ok(SideLogZ::exact(
            -perturbative_side_energy(n, length, params.coupling) / params.temperature,
        ))
    }

    fn name(&self) -> &'static str {
        "perturbative"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbativeWork {
    pub breakdown: WorkBreakdown,
    pub validity: PerturbativeValidity,
    pub warnings: Vec<String>,
}

/// Cycle work with outcome probabilities from perturbative configuration energies.
pub fn perturbative_work(params: &EngineParams, plan: &CyclePlan) -> Result<PerturbativeWork> {
    let validity = PerturbativeValidity::check(params);
    let breakdown = work_total(&PerturbativeModel, plan, params)?;
    Ok(PerturbativeWork {
        warnings: validity.warnings(),
        validity,
        breakdown,
    })
}

/// k_BT* ≈ −3(N − 1)g, where thermal excitation out of the all-on-one-side
/// configuration sets in (natural units).
pub fn peak_temperature_estimate(n_particles: usize, coupling: f64) -> Result<f64> {
    if !(coupling < 0.0) {
        return Err(SzilardError::Domain {
            what: "coupling",
            value: coupling,
            domain: "(-inf, 0)",
        });
    }
    Ok(-3.0 * n_particles.saturating_sub(1) as f64 * coupling)
}
