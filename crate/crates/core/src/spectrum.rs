//! Low-lying many-body spectra of one hard-wall subsystem.
//!
//! Spectra are always computed in the unit box at the scaled coupling g·ℓ and
//! mapped to length ℓ afterwards. The Fock basis is truncated twice: by a mode count
//! and by a noninteracting-energy cutoff. The cutoff is chosen from the largest
//! temperature the caller will ask about, and is grown until ln Z at that temperature
//! changes by less than `z_tolerance`.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, RwLock};

use log::debug;
use serde::{Deserialize, Serialize};

use crate::cache::DiskCache;
use crate::eigen::{lanczos_lowest, lowest_eigenvalues, SolverOptions};
use crate::error::{Result, SzilardError};
use crate::fock::{build_fock_basis, mode_energy, FockState, ModeBasis};
use crate::hamiltonian::assemble_hamiltonian;
use crate::thermo::log_sum_exp;
use crate::units::{round_significant, scale_spectrum, SubsystemKey, E1};

/// Basis truncation and convergence controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisPolicy {
    /// Boltzmann weight, relative to the ground state, below which levels are dropped.
    pub truncation_tolerance: f64,
    /// Required |Δ ln Z| between successive bases at the largest temperature.
    pub z_tolerance: f64,
    /// Cutoff headroom above the thermal window, in units of E1.
    pub margin: f64,
    /// Optional cap on the number of single-particle modes.
    pub max_modes: Option<usize>,
    /// Relative growth of the cutoff window per escalation step.
    pub growth: f64,
    pub max_escalations: usize,
    /// Escalation stops once a basis exceeds this many Fock states.
    pub max_dimension: usize,
    pub solver: SolverOptions,
}

impl Default for BasisPolicy {
    fn default() -> Self {
        BasisPolicy {
            truncation_tolerance: 1e-12,
            z_tolerance: 1e-4,
            margin: 12.0,
            max_modes: None,
            growth: 0.5,
            max_escalations: 12,
            max_dimension: 6000,
            solver: SolverOptions::default(),
        }
    }
}

impl BasisPolicy {
    /// Energy window above the ground state needed at unit-box temperature `tau`.
    pub fn thermal_window(&self, tau: f64) -> f64 {
        tau * (1.0 / self.truncation_tolerance).ln()
    }

    /// Initial (cutoff, modes) for `n` particles at unit-box temperature `tau`.
    pub fn initial_basis(&self, n: usize, tau: f64) -> (f64, usize) {
        let rel = self.thermal_window(tau) + self.margin * E1;
        let e_cut = n as f64 * E1 + rel;
        (e_cut, self.modes_for(n, e_cut))
    }

    /// Largest k whose mode still fits under the cutoff with the other particles in mode 1.
    pub fn modes_for(&self, n: usize, e_cut: f64) -> usize {
        let spare = e_cut - n.saturating_sub(1) as f64 * E1;
        let kmax = ((spare / E1).sqrt().floor() as usize).max(1);
        match self.max_modes {
            Some(cap) => kmax.min(cap.max(1)),
            None => kmax,
        }
    }
}

/// Unit-box spectrum as stored in the cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitSpectrum {
    /// Requested basis (cache key).
    pub key: SubsystemKey,
    /// Ascending eigenvalues within the thermal window.
    pub energies: Vec<f64>,
    /// Largest unit-box temperature for which the truncation invariant holds.
    pub max_temperature: f64,
    /// Basis actually used after escalation.
    pub modes: usize,
    pub e_cut: f64,
    pub dimension: usize,
    pub delta_log_z: f64,
    pub converged: bool,
    pub solver_tolerance: f64,
}

impl UnitSpectrum {
    pub fn ground_energy(&self) -> f64 {
        self.energies[0]
    }

    /// ln Z at unit-box temperature `tau`, without the coverage check.
    pub fn log_z_unchecked(&self, tau: f64) -> f64 {
        let e0 = self.energies[0];
        -e0 / tau + log_sum_exp(self.energies.iter().map(|e| -(e - e0) / tau))
    }

    pub fn covers(&self, tau: f64) -> bool {
        tau <= self.max_temperature * (1.0 + 1e-9)
    }

    pub fn log_z(&self, tau: f64) -> Result<f64> {
        if !self.covers(tau) {
            return Err(SzilardError::Truncated {
                temperature: tau,
                covered: self.max_temperature,
            });
        }
        Ok(self.log_z_unchecked(tau))
    }
}

/// Spectrum of `n` particles in a box of length ℓ with coupling g.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub n: usize,
    pub length: f64,
    pub coupling: f64,
    pub key: SubsystemKey,
    pub energies: Vec<f64>,
    pub ground_energy: f64,
    /// Largest k_BT at this length covered by the truncation invariant.
    pub max_temperature: f64,
    pub converged: bool,
    pub delta_log_z: f64,
}

impl Spectrum {
    pub fn from_unit(unit: &UnitSpectrum, length: f64, coupling: f64) -> Result<Self> {
        let energies = scale_spectrum(&unit.energies, length)?;
        Ok(Spectrum {
            n: unit.key.n,
            length,
            coupling,
            key: unit.key,
            ground_energy: energies[0],
            energies,
            max_temperature: unit.max_temperature / (length * length),
            converged: unit.converged,
            delta_log_z: unit.delta_log_z,
        })
    }
}

struct Solved {
    energies: Vec<f64>,
    dimension: usize,
    modes: usize,
}

/// Eigenvalues of the truncated Hamiltonian lying within `window` of its ground state.
fn solve_window(
    n: usize,
    g_eff: f64,
    e_cut: f64,
    modes: usize,
    window: f64,
    opts: &SolverOptions,
) -> Result<Solved> {
    let mode_basis = ModeBasis::unit_box(modes)?;
    let basis = build_fock_basis(n, &mode_basis, e_cut)?;
    let dimension = basis.len();
    let (even, odd): (Vec<FockState>, Vec<FockState>) =
        basis.into_iter().partition(|s| s.parity() == 0);

    let mut all = Vec::new();
    for block in [even, odd] {
        if block.is_empty() {
            continue;
        }
        let free_energies: Vec<f64> = block.iter().map(|s| s.energy(&mode_basis)).collect();
        let h = assemble_hamiltonian(&block, g_eff, &mode_basis);
        let dim = h.dim();
        if dim <= opts.dense_threshold || h.is_diagonal() {
            all.extend(lowest_eigenvalues(&h, dim, opts)?);
            continue;
        }
        let free_min = free_energies.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut k = free_energies
            .iter()
            .filter(|&&e| e <= free_min + window + E1)
            .count()
            .clamp(1, dim);
        loop {
            let ev = lanczos_lowest(dim, |x, y| h.matvec(x, y), k, opts)?;
            let top = *ev.last().unwrap();
            if top >= ev[0] + window || k == dim {
                all.extend(ev);
                break;
            }
            k = (2 * k).min(dim);
        }
    }
    all.sort_by(f64::total_cmp);
    let e0 = all[0];
    all.retain(|&e| e <= e0 + window);
    Ok(Solved {
        energies: all,
        dimension,
        modes,
    })
}

fn log_z_of(energies: &[f64], tau: f64) -> f64 {
    let e0 = energies[0];
    -e0 / tau + log_sum_exp(energies.iter().map(|e| -(e - e0) / tau))
}

/// Computes a unit-box spectrum for `n` particles at coupling `g_eff`, valid for
/// unit-box temperatures up to `tau_max`, growing the basis until converged.
/// True when the observed decay of |Δ ln Z| cannot reach the tolerance within the
/// remaining escalation steps and dimension budget.
fn stalled(history: &[(usize, f64)], policy: &BasisPolicy, steps: usize) -> bool {
    if history.len() < 3 {
        return false;
    }
    let (dim_now, d_now) = history[history.len() - 1];
    let (dim_old, d_old) = history[history.len() - 3];
    let rate = (d_now / d_old).sqrt();
    if !(rate < 1.0) {
        return true;
    }
    let needed = (policy.z_tolerance / d_now).ln() / rate.ln();
    let growth = (dim_now as f64 / dim_old as f64).sqrt().max(1.01);
    let by_dimension = (policy.max_dimension as f64 / dim_now as f64).ln() / growth.ln() + 1.0;
    let affordable = by_dimension.min((policy.max_escalations - steps) as f64);
    needed > affordable + 1.0
}

pub fn compute_unit_spectrum(
    n: usize,
    g_eff: f64,
    tau_max: f64,
    policy: &BasisPolicy,
) -> Result<UnitSpectrum> {
    if !(tau_max > 0.0) || !tau_max.is_finite() {
        return Err(SzilardError::Domain {
            what: "tau_max",
            value: tau_max,
            domain: "(0, inf)",
        });
    }
    let g_eff = round_significant(g_eff);
    let opts = policy.solver;
    let window = policy.thermal_window(tau_max);
    let (e_cut0, modes0) = policy.initial_basis(n, tau_max);
    let key = SubsystemKey::new(n, g_eff, modes0, e_cut0);

    if n == 0 {
        return Ok(UnitSpectrum {
            key,
            energies: vec![0.0],
            max_temperature: f64::INFINITY,
            modes: modes0,
            e_cut: e_cut0,
            dimension: 1,
            delta_log_z: 0.0,
            converged: true,
            solver_tolerance: opts.tolerance,
        });
    }
    if n == 1 {
        // no interaction partner: the spectrum is the sine-mode ladder
        let energies: Vec<f64> = (1..)
            .map(|k| mode_energy(k, 1.0))
            .take_while(|&e| e <= E1 + window)
            .collect();
        return Ok(UnitSpectrum {
            key,
            dimension: energies.len(),
            modes: energies.len(),
            energies,
            max_temperature: tau_max,
            e_cut: E1 + window,
            delta_log_z: 0.0,
            converged: true,
            solver_tolerance: opts.tolerance,
        });
    }

    let ground_free = n as f64 * E1;
    let mut rel = e_cut0 - ground_free;
    let mut current = solve_window(n, g_eff, e_cut0, modes0, window, &opts)?;
    let mut e_cut = e_cut0;
    let mut delta = f64::INFINITY;
    let mut converged = g_eff == 0.0 && !current.energies.is_empty();
    if converged {
        delta = 0.0;
    }
    let mut steps = 0;
    let mut history: Vec<(usize, f64)> = Vec::new();
    while !converged && steps < policy.max_escalations && current.dimension <= policy.max_dimension
    {
        if current.dimension >= opts.dense_threshold && stalled(&history, policy, steps) {
            debug!(
                "n={n} g_eff={g_eff} escalation stalled at dim={}",
                current.dimension
            );
            break;
        }
        let next_rel = rel * (1.0 + policy.growth);
        let next_cut = ground_free + next_rel;
        let next_modes = policy.modes_for(n, next_cut);
        let next = solve_window(n, g_eff, next_cut, next_modes, window, &opts)?;
        if next.dimension == current.dimension
            && policy.max_modes.is_some_and(|cap| next_modes >= cap.max(1))
        {
            // the mode cap binds: the basis cannot grow, so convergence cannot be checked
            debug!(
                "n={n} g_eff={g_eff} basis frozen at dim={}",
                current.dimension
            );
            break;
        }
        delta = (log_z_of(&next.energies, tau_max) - log_z_of(&current.energies, tau_max)).abs();
        debug!(
            "n={n} g_eff={g_eff} cut={next_cut:.2} modes={next_modes} dim={} dlnZ={delta:.2e}",
            next.dimension
        );
        history.push((next.dimension, delta));
        current = next;
        e_cut = next_cut;
        rel = next_rel;
        steps += 1;
        converged = delta < policy.z_tolerance;
    }

    Ok(UnitSpectrum {
        key,
        energies: current.energies,
        max_temperature: tau_max,
        modes: current.modes,
        e_cut,
        dimension: current.dimension,
        delta_log_z: delta,
        converged,
        solver_tolerance: opts.tolerance,
    })
}

type MemKey = (usize, u64, usize, u64);

/// Thread-safe store of unit-box spectra with an optional on-disk record file.
///
/// Reads are concurrent; inserts take the write lock. Two threads computing the same
/// key insert identical values, so the later insert is harmless.
pub struct SpectrumStore {
    policy: BasisPolicy,
    memory: RwLock<HashMap<MemKey, Arc<UnitSpectrum>>>,
    disk: Option<DiskCache>,
    diagonalizations: AtomicUsize,
}

impl SpectrumStore {
    pub fn new(policy: BasisPolicy) -> Self {
        SpectrumStore {
            policy,
            memory: RwLock::new(HashMap::new()),
            disk: None,
            diagonalizations: AtomicUsize::new(0),
        }
    }

    /// Store backed by the record file in `dir`; existing records are loaded.
    pub fn with_disk(policy: BasisPolicy, dir: &Path) -> Result<Self> {
        let disk = DiskCache::open(dir)?;
        let mut map = HashMap::new();
        for spectrum in disk.load()? {
            map.insert(spectrum.key.hash_key(), Arc::new(spectrum));
        }
        Ok(SpectrumStore {
            policy,
            memory: RwLock::new(map),
            disk: Some(disk),
            diagonalizations: AtomicUsize::new(0),
        })
    }

    pub fn policy(&self) -> &BasisPolicy {
        &self.policy
    }

    /// Number of spectra computed (not served from memory or disk) by this store.
    pub fn diagonalizations(&self) -> usize {
        self.diagonalizations.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.memory.read().expect("spectrum cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn keys(&self) -> Vec<SubsystemKey> {
        let mut keys: Vec<SubsystemKey> = self
            .memory
            .read()
            .expect("spectrum cache poisoned")
            .values()
            .map(|s| s.key)
            .collect();
        keys.sort_by(|a, b| {
            (a.n, a.g_eff, a.basis_size, a.energy_cutoff)
                .partial_cmp(&(b.n, b.g_eff, b.basis_size, b.energy_cutoff))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        keys
    }

    /// Unit-box spectrum of `n` particles at coupling `g_eff`, valid up to unit-box
    /// temperature `tau_max`. Unconverged spectra are returned with their flag set.
    pub fn unit_spectrum(&self, n: usize, g_eff: f64, tau_max: f64) -> Result<Arc<UnitSpectrum>> {
        let g_eff = round_significant(g_eff);
        let (e_cut, modes) = self.policy.initial_basis(n, tau_max);
        let key = SubsystemKey::new(n, g_eff, modes, e_cut).hash_key();
        if let Some(hit) = self
            .memory
            .read()
            .expect("spectrum cache poisoned")
            .get(&key)
        {
            if hit.covers(tau_max) {
                return Ok(Arc::clone(hit));
            }
        }
        let spectrum = Arc::new(compute_unit_spectrum(n, g_eff, tau_max, &self.policy)?);
        if n >= 2 {
            self.diagonalizations.fetch_add(1, Ordering::Relaxed);
        }
        if let Some(disk) = &self.disk {
            disk.append(&spectrum)?;
        }
        self.memory
            .write()
            .expect("spectrum cache poisoned")
            .insert(key, Arc::clone(&spectrum));
        Ok(spectrum)
    }

    /// Spectrum of a subsystem of length `length` with coupling `coupling`, covering
    /// k_BT up to `max_temperature`. Fails if the basis could not be converged.
    pub fn subsystem_spectrum(
        &self,
        n: usize,
        length: f64,
        coupling: f64,
        max_temperature: f64,
    ) -> Result<Spectrum> {
        if !(length > 0.0 && length <= 1.0) {
            return Err(SzilardError::Domain {
                what: "length",
                value: length,
                domain: "(0, 1]",
            });
        }
        let unit = self.unit_spectrum(n, coupling * length, max_temperature * length * length)?;
        if !unit.converged {
            return Err(SzilardError::SpectrumNotConverged {
                n,
                g_eff: unit.key.g_eff,
                delta_log_z: unit.delta_log_z,
                modes: unit.modes,
                e_cut: unit.e_cut,
            });
        }
        Spectrum::from_unit(&unit, length, coupling)
    }

    /// Drops all in-memory entries and truncates the record file.
    pub fn clear(&self) -> Result<()> {
        self.memory
            .write()
            .expect("spectrum cache poisoned")
            .clear();
        if let Some(disk) = &self.disk {
            disk.clear()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn vacuum_and_single_particle() {
        let store = SpectrumStore::new(BasisPolicy::default());
        let s0 = store.subsystem_spectrum(0, 0.4, -1.0, 1.0).unwrap();
        assert_eq!(s0.energies, vec![0.0]);
        let s1 = store.subsystem_spectrum(1, 0.5, -3.0, 20.0).unwrap();
        for (k, e) in s1.energies.iter().enumerate() {
            let expected = ((k + 1) as f64).powi(2) * PI * PI / (2.0 * 0.25);
            assert!((e - expected).abs() < 1e-12 * expected);
        }
        assert_eq!(store.diagonalizations(), 0);
    }

    #[test]
    fn free_spectrum_is_exact() {
        let store = SpectrumStore::new(BasisPolicy::default());
        let s = store.unit_spectrum(3, 0.0, 10.0).unwrap();
        assert!(s.converged);
        let modes = ModeBasis::unit_box(s.modes).unwrap();
        let mut free: Vec<f64> = build_fock_basis(3, &modes, s.e_cut)
            .unwrap()
            .iter()
            .map(|f| f.energy(&modes))
            .filter(|&e| e <= 3.0 * E1 + BasisPolicy::default().thermal_window(10.0))
            .collect();
        free.sort_by(f64::total_cmp);
        assert_eq!(free.len(), s.energies.len());
        for (a, b) in free.iter().zip(&s.energies) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn cache_hit_skips_diagonalization() {
        let store = SpectrumStore::new(BasisPolicy::default());
        let a = store.unit_spectrum(2, -0.3, 2.0).unwrap();
        let count = store.diagonalizations();
        let b = store.unit_spectrum(2, -0.3, 2.0).unwrap();
        assert_eq!(count, store.diagonalizations());
        assert_eq!(a, b);
    }

    #[test]
    fn truncated_temperature_is_refused() {
        let store = SpectrumStore::new(BasisPolicy::default());
        let s = store.unit_spectrum(2, -0.3, 2.0).unwrap();
        assert!(s.log_z(2.0).is_ok());
        assert!(matches!(s.log_z(4.0), Err(SzilardError::Truncated { .. })));
    }

    #[test]
    fn capped_modes_are_never_reported_converged() {
        let policy = BasisPolicy {
            max_modes: Some(2),
            margin: 0.0,
            ..BasisPolicy::default()
        };
        let s = compute_unit_spectrum(2, -1.0, 1.0, &policy).unwrap();
        assert_eq!(s.modes, 2);
        assert!(!s.converged);
    }

    #[test]
    fn stall_rule() {
        let policy = BasisPolicy::default();
        // slow geometric decay far from tolerance
        let slow = [(500, 2e-3), (900, 1.8e-3), (1600, 1.6e-3)];
        assert!(stalled(&slow, &policy, 3));
        // fast decay reaches tolerance within budget
        let fast = [(500, 1e-2), (900, 1e-3), (1600, 1e-4 * 1.5)];
        assert!(!stalled(&fast, &policy, 3));
        // growing differences
        let worse = [(500, 1e-3), (900, 2e-3), (1600, 3e-3)];
        assert!(stalled(&worse, &policy, 3));
        assert!(!stalled(&slow[..2], &policy, 2));
    }
}
