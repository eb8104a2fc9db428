//! The four-step cycle: insert a wall at ℓ^ins, measure n, move the wall to ℓ^rem_n
//! quasi-statically, remove it. All works are in units of k_BT, counted as output.
//!
//! W_(i)   = ln[Σ_n Z_n(ℓ^ins) / Z_N(1)]
//! W_(iii) = Σ_n p_n ln[Z_n(ℓ^rem_n) / Z_n(ℓ^ins)]
//! W_(iv)  = Σ_n p_n ln[Z_N(1) / Σ_n' Z_n'(ℓ^rem_n)]
//!
//! which add up to W = −Σ_n p_n(ℓ^ins) ln[p_n(ℓ^ins) / p_n(ℓ^rem_n)].

use std::collections::HashMap;
use std::f64::consts::LN_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SzilardError};
use crate::search::{golden_section_max, linspace, local_maxima, refine_grid_max, Maximum};
use crate::thermo::{outcome_distribution, shannon, OutcomeDistribution, SubsystemModel};
use crate::units::{EngineParams, E1};

/// Controls for the one-dimensional searches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Grid points on [0, 1] for removal positions.
    pub removal_grid: usize,
    /// Golden-section tolerance on wall positions.
    pub position_tolerance: f64,
    /// Grid points on (0, 1/2] for insertion positions.
    pub insertion_grid: usize,
    /// Golden-section tolerance on temperatures, natural units.
    pub temperature_tolerance: f64,
    /// |ℓ^ins − 1/2| above which the optimum counts as asymmetric.
    pub asymmetry_threshold: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            removal_grid: 101,
            position_tolerance: 1e-5,
            insertion_grid: 50,
            temperature_tolerance: 1e-3 * E1,
            asymmetry_threshold: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyclePlan {
    pub insertion: f64,
    /// ℓ^rem_n for n = 0..=N.
    pub removals: Vec<f64>,
}

impl CyclePlan {
    /// Every removal at the insertion point: no expansion, zero net work.
    pub fn stationary(insertion: f64, n_particles: usize) -> Self {
        CyclePlan {
            insertion,
            removals: vec![insertion; n_particles + 1],
        }
    }

    pub fn validate(&self, n_particles: usize) -> Result<()> {
        if !(self.insertion > 0.0 && self.insertion < 1.0) {
            return Err(SzilardError::Domain {
                what: "insertion",
                value: self.insertion,
                domain: "(0, 1)",
            });
        }
        if self.removals.len() != n_particles + 1 {
            return Err(SzilardError::InvalidParameter {
                name: "removals",
                reason: format!(
                    "expected {} positions, got {}",
                    n_particles + 1,
                    self.removals.len()
                ),
            });
        }
        if let Some(&bad) = self.removals.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(SzilardError::Domain {
                what: "removal",
                value: bad,
                domain: "[0, 1]",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkBreakdown {
    pub plan: CyclePlan,
    /// p_n(ℓ^ins).
    pub probabilities: Vec<f64>,
    /// p_n(ℓ^rem_n).
    pub removal_probabilities: Vec<f64>,
    pub w_insert: f64,
    pub w_measure: f64,
    pub w_expand: f64,
    pub w_remove: f64,
    /// −Σ p_n ln[p_n(ℓ^ins)/p_n(ℓ^rem_n)].
    pub w_total: f64,
    /// W_(i) + W_(ii) + W_(iii) + W_(iv).
    pub w_step_sum: f64,
    pub info: f64,
    /// W / (k_BT ln 2).
    pub ratio: f64,
    pub residual: f64,
    pub converged: bool,
}

/// ln Z_N(1), the undivided box.
fn full_log_z(model: &dyn SubsystemModel, params: &EngineParams) -> Result<f64> {
    Ok(model.side_log_z(params.n_particles, 1.0, params)?.log_z)
}

fn check_insertion(insertion: f64) -> Result<()> {
    if insertion > 0.0 && insertion < 1.0 {
        Ok(())
    } else {
        Err(SzilardError::Domain {
            what: "insertion",
            value: insertion,
            domain: "(0, 1)",
        })
    }
}

pub fn work_insertion(
    model: &dyn SubsystemModel,
    insertion: f64,
    params: &EngineParams,
) -> Result<f64> {
    check_insertion(insertion)?;
    let dist = outcome_distribution(model, insertion, params)?;
    Ok(dist.log_total - full_log_z(model, params)?)
}

/// Distributions at each distinct removal position of `plan`.
fn removal_distributions(
    model: &dyn SubsystemModel,
    plan: &CyclePlan,
    params: &EngineParams,
) -> Result<Vec<OutcomeDistribution>> {
    let mut seen: HashMap<u64, OutcomeDistribution> = HashMap::new();
    plan.removals
        .iter()
        .map(|&r| {
            if let Some(d) = seen.get(&r.to_bits()) {
                return Ok(d.clone());
            }
            let d = outcome_distribution(model, r, params)?;
            seen.insert(r.to_bits(), d.clone());
            Ok(d)
        })
        .collect()
}

pub fn work_expansion(
    model: &dyn SubsystemModel,
    plan: &CyclePlan,
    params: &EngineParams,
) -> Result<f64> {
    plan.validate(params.n_particles)?;
    let ins = outcome_distribution(model, plan.insertion, params)?;
    let rem = removal_distributions(model, plan, params)?;
    Ok(expansion_term(&ins, &rem))
}

pub fn work_removal(
    model: &dyn SubsystemModel,
    plan: &CyclePlan,
    params: &EngineParams,
) -> Result<f64> {
    plan.validate(params.n_particles)?;
    let ins = outcome_distribution(model, plan.insertion, params)?;
    let rem = removal_distributions(model, plan, params)?;
    Ok(removal_term(&ins, &rem, full_log_z(model, params)?))
}

fn expansion_term(ins: &OutcomeDistribution, rem: &[OutcomeDistribution]) -> f64 {
    ins.probabilities
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(n, &p)| p * (rem[n].per_outcome_log_z[n] - ins.per_outcome_log_z[n]))
        .sum()
}

fn removal_term(ins: &OutcomeDistribution, rem: &[OutcomeDistribution], full: f64) -> f64 {
    ins.probabilities
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(n, &p)| p * (full - rem[n].log_total))
        .sum()
}

/// Assembles the breakdown from precomputed distributions.
fn breakdown_from(
    plan: CyclePlan,
    ins: &OutcomeDistribution,
    rem: &[OutcomeDistribution],
    full: f64,
    tolerance: f64,
) -> WorkBreakdown {
    let w_insert = ins.log_total - full;
    let w_expand = expansion_term(ins, rem);
    let w_remove = removal_term(ins, rem, full);
    let w_total: f64 = -ins
        .probabilities
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(n, &p)| {
            let ln_p = ins.per_outcome_log_z[n] - ins.log_total;
            let ln_q = rem[n].per_outcome_log_z[n] - rem[n].log_total;
            p * (ln_p - ln_q)
        })
        .sum::<f64>();
    let rem_residual: f64 = ins
        .probabilities
        .iter()
        .zip(rem)
        .map(|(p, d)| p * d.residual)
        .sum();
    let residual = ins.residual.max(rem_residual);
    WorkBreakdown {
        probabilities: ins.probabilities.clone(),
        removal_probabilities: rem
            .iter()
            .enumerate()
            .map(|(n, d)| d.probabilities[n])
            .collect(),
        w_insert,
        w_measure: 0.0,
        w_expand,
        w_remove,
        w_total,
        w_step_sum: w_insert + w_expand + w_remove,
        info: shannon(&ins.probabilities),
        ratio: w_total / LN_2,
        residual,
        converged: residual < tolerance,
        plan,
    }
}

pub fn work_total(
    model: &dyn SubsystemModel,
    plan: &CyclePlan,
    params: &EngineParams,
) -> Result<WorkBreakdown> {
    plan.validate(params.n_particles)?;
    let ins = outcome_distribution(model, plan.insertion, params)?;
    let rem = removal_distributions(model, plan, params)?;
    let full = full_log_z(model, params)?;
    Ok(breakdown_from(
        plan.clone(),
        &ins,
        &rem,
        full,
        model.residual_tolerance(),
    ))
}

/// Removal positions maximizing p_n(ℓ) together with the distributions there.
/// These do not depend on the insertion point.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalRemovals {
    pub positions: Vec<f64>,
    pub distributions: Vec<OutcomeDistribution>,
}

fn log_probability(d: &OutcomeDistribution, n: usize) -> f64 {
    d.per_outcome_log_z[n] - d.log_total
}

/// For each n, argmax over ℓ ∈ [0, 1] of p_n(ℓ): 0 and 1 for the extreme outcomes,
/// otherwise a grid search refined by golden section. Outcomes n > N/2 are mirrored,
/// ℓ^rem_{N−n} = 1 − ℓ^rem_n.
pub fn optimal_removals(
    model: &dyn SubsystemModel,
    params: &EngineParams,
    opts: &SearchOptions,
) -> Result<OptimalRemovals> {
    let total = params.n_particles;
    let mut positions = vec![0.0; total + 1];
    positions[total] = 1.0;
    if total >= 2 {
        let xs = linspace(0.0, 1.0, opts.removal_grid.max(3));
        let grid: Vec<OutcomeDistribution> = xs
            .iter()
            .map(|&x| outcome_distribution(model, x, params))
            .collect::<Result<_>>()?;
        for n in 1..=total / 2 {
            let values: Vec<f64> = grid.iter().map(|d| log_probability(d, n)).collect();
            let best = argmax_toward_center(&xs, &values);
            let refined = refine_grid_max(
                |x| Ok(log_probability(&outcome_distribution(model, x, params)?, n)),
                &xs,
                &values,
                best,
                opts.position_tolerance,
            )?;
            positions[n] = refined.x;
            positions[total - n] = 1.0 - refined.x;
        }
        if total.is_multiple_of(2) && (positions[total / 2] - 0.5).abs() <= opts.position_tolerance
        {
            positions[total / 2] = 0.5;
        }
    }
    let plan = CyclePlan {
        insertion: 0.5,
        removals: positions.clone(),
    };
    let distributions = removal_distributions(model, &plan, params)?;
    Ok(OptimalRemovals {
        positions,
        distributions,
    })
}

/// Index of the largest value; ties go to the point nearest 1/2.
fn argmax_toward_center(xs: &[f64], values: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        let better = values[i] > values[best]
            || (values[i] == values[best] && (xs[i] - 0.5).abs() < (xs[best] - 0.5).abs());
        if better {
            best = i;
        }
    }
    best
}

pub fn optimize_removals(
    model: &dyn SubsystemModel,
    insertion: f64,
    params: &EngineParams,
    opts: &SearchOptions,
) -> Result<CyclePlan> {
    check_insertion(insertion)?;
    Ok(CyclePlan {
        insertion,
        removals: optimal_removals(model, params, opts)?.positions,
    })
}

/// Work with optimal removals for one insertion point.
pub fn optimal_work(
    model: &dyn SubsystemModel,
    insertion: f64,
    params: &EngineParams,
    opts: &SearchOptions,
) -> Result<WorkBreakdown> {
    check_insertion(insertion)?;
    let removals = optimal_removals(model, params, opts)?;
    work_with_removals(model, insertion, params, &removals)
}

fn work_with_removals(
    model: &dyn SubsystemModel,
    insertion: f64,
    params: &EngineParams,
    removals: &OptimalRemovals,
) -> Result<WorkBreakdown> {
    let ins = outcome_distribution(model, insertion, params)?;
    let full = full_log_z(model, params)?;
    let plan = CyclePlan {
        insertion,
        removals: removals.positions.clone(),
    };
    Ok(breakdown_from(
        plan,
        &ins,
        &removals.distributions,
        full,
        model.residual_tolerance(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertionOptimum {
    /// Global maximizer; ties broken toward ℓ^ins = 1/2.
    pub best: WorkBreakdown,
    /// Every local maximum over (0, 1), ascending in ℓ^ins.
    pub maxima: Vec<WorkBreakdown>,
    /// |ℓ^ins* − 1/2| exceeds the asymmetry threshold.
    pub asymmetric: bool,
}

/// Maximizes the optimal-removal work over ℓ^ins. The work is mirror symmetric, so
/// the search runs over (0, 1/2] and maxima below 1/2 are reported with their mirror images.
pub fn optimize_insertion(
    model: &dyn SubsystemModel,
    params: &EngineParams,
    opts: &SearchOptions,
) -> Result<InsertionOptimum> {
    let removals = optimal_removals(model, params, opts)?;
    let points = opts.insertion_grid.max(3);
    let xs: Vec<f64> = (1..=points)
        .map(|i| 0.5 * i as f64 / points as f64)
        .collect();
    let works: Vec<WorkBreakdown> = xs
        .iter()
        .map(|&x| work_with_removals(model, x, params, &removals))
        .collect::<Result<_>>()?;
    let values: Vec<f64> = works.iter().map(|w| w.w_total).collect();

    let mut half: Vec<WorkBreakdown> = Vec::new();
    for idx in local_maxima(&values) {
        let objective = |x: f64| Ok(work_with_removals(model, x, params, &removals)?.w_total);
        let refined: Maximum = if idx + 1 == xs.len() {
            // the grid ends at the mirror axis; its right neighbour is its left one mirrored
            let lo = xs[idx - 1];
            let m = golden_section_max(objective, lo, 0.5, opts.position_tolerance)?;
            if m.value >= values[idx] {
                m
            } else {
                Maximum {
                    x: 0.5,
                    value: values[idx],
                }
            }
        } else {
            refine_grid_max(objective, &xs, &values, idx, opts.position_tolerance)?
        };
        let x = if (refined.x - 0.5).abs() <= opts.position_tolerance {
            0.5
        } else {
            refined.x
        };
        half.push(work_with_removals(model, x, params, &removals)?);
    }

    let mut maxima = half.clone();
    for w in &half {
        if w.plan.insertion < 0.5 {
            maxima.push(work_with_removals(
                model,
                1.0 - w.plan.insertion,
                params,
                &removals,
            )?);
        }
    }
    maxima.sort_by(|a, b| a.plan.insertion.total_cmp(&b.plan.insertion));

    let best = half
        .iter()
        .fold(None::<&WorkBreakdown>, |acc, w| match acc {
            None => Some(w),
            Some(b) => {
                let better = w.w_total > b.w_total + 1e-12
                    || ((w.w_total - b.w_total).abs() <= 1e-12
                        && (w.plan.insertion - 0.5).abs() < (b.plan.insertion - 0.5).abs());
                Some(if better { w } else { b })
            }
        })
        .cloned()
        .ok_or(SzilardError::Bracket { lo: 0.0, hi: 0.5 })?;
    let asymmetric = (best.plan.insertion - 0.5).abs() > opts.asymmetry_threshold;
    Ok(InsertionOptimum {
        best,
        maxima,
        asymmetric,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScanAxis {
    /// k_BT, natural units.
    Temperature,
    Coupling,
    Insertion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InsertionChoice {
    Fixed(f64),
    Optimize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub axis_value: f64,
    pub outcome: std::result::Result<WorkBreakdown, String>,
}

impl ScanPoint {
    pub fn converged(&self) -> bool {
        matches!(&self.outcome, Ok(w) if w.converged)
    }
}

fn evaluate(
    model: &dyn SubsystemModel,
    params: &EngineParams,
    insertion: InsertionChoice,
    opts: &SearchOptions,
) -> Result<WorkBreakdown> {
    match insertion {
        InsertionChoice::Fixed(x) => optimal_work(model, x, params, opts),
        InsertionChoice::Optimize => Ok(optimize_insertion(model, params, opts)?.best),
    }
}

/// Sweeps one axis. Points are independent and run in parallel; a failing point is
/// recorded with its error and the sweep continues. Results follow the order of `values`.
pub fn scan(
    model: &dyn SubsystemModel,
    params: &EngineParams,
    axis: ScanAxis,
    values: &[f64],
    insertion: InsertionChoice,
    opts: &SearchOptions,
) -> Vec<ScanPoint> {
    let removals = if axis == ScanAxis::Insertion {
        Some(optimal_removals(model, params, opts).map_err(|e| e.to_string()))
    } else {
        None
    };
    values
        .par_iter()
        .map(|&v| {
            let outcome = match axis {
                ScanAxis::Temperature => params
                    .with_temperature(v)
                    .validate()
                    .and_then(|_| evaluate(model, &params.with_temperature(v), insertion, opts)),
                ScanAxis::Coupling => evaluate(model, &params.with_coupling(v), insertion, opts),
                ScanAxis::Insertion => {
                    match removals.as_ref().expect("computed for insertion scans") {
                        Ok(r) => {
                            check_insertion(v).and_then(|_| work_with_removals(model, v, params, r))
                        }
                        Err(e) => Err(SzilardError::Cache(e.clone())),
                    }
                }
            };
            ScanPoint {
                axis_value: v,
                outcome: outcome.map_err(|e| e.to_string()),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// k_BT*, natural units.
    pub temperature: f64,
    pub ratio: f64,
    pub breakdown: WorkBreakdown,
}

fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    linspace(lo.ln(), hi.ln(), count)
        .into_iter()
        .map(f64::exp)
        .collect()
}

/// Maximizes W/W1 over temperature. The bracket is centred on `estimate` (natural
/// units); if the best grid point sits on its edge the search widens to a log scan
/// over four decades before refining.
pub fn find_peak(
    model: &dyn SubsystemModel,
    params: &EngineParams,
    estimate: f64,
    insertion: InsertionChoice,
    opts: &SearchOptions,
) -> Result<Peak> {
    if !(estimate > 0.0) {
        return Err(SzilardError::Domain {
            what: "peak estimate",
            value: estimate,
            domain: "(0, inf)",
        });
    }
    let cap = model.max_temperature().unwrap_or(f64::INFINITY);
    let ratio_at = |t: f64| -> Result<f64> {
        Ok(evaluate(model, &params.with_temperature(t), insertion, opts)?.ratio)
    };

    let attempt = |lo: f64, hi: f64, count: usize| -> Result<Option<Maximum>> {
        let hi = hi.min(cap);
        if !(lo < hi) {
            return Ok(None);
        }
        let ts = log_grid(lo, hi, count);
        let values: Vec<f64> = ts.iter().map(|&t| ratio_at(t)).collect::<Result<_>>()?;
        let best = argmax_toward_center(&ts, &values);
        if best == 0 || best == ts.len() - 1 {
            return Ok(None);
        }
        let m = golden_section_max(
            ratio_at,
            ts[best - 1],
            ts[best + 1],
            opts.temperature_tolerance,
        )?;
        Ok(Some(if m.value >= values[best] {
            m
        } else {
            Maximum {
                x: ts[best],
                value: values[best],
            }
        }))
    };

    let found = match attempt(estimate / 6.0, estimate * 6.0, 15)? {
        Some(m) => m,
        None => attempt(estimate / 100.0, estimate * 100.0, 41)?.ok_or(SzilardError::Bracket {
            lo: estimate / 100.0,
            hi: (estimate * 100.0).min(cap),
        })?,
    };
    let breakdown = evaluate(model, &params.with_temperature(found.x), insertion, opts)?;
    Ok(Peak {
        temperature: found.x,
        ratio: breakdown.ratio,
        breakdown,
    })
}

/// Temperature (natural units) at which the optimal insertion point leaves 1/2, by
/// bisection between a symmetric `lo` and an asymmetric `hi`.
pub fn bifurcation_onset(
    model: &dyn SubsystemModel,
    params: &EngineParams,
    lo: f64,
    hi: f64,
    tolerance: f64,
    opts: &SearchOptions,
) -> Result<f64> {
    let asymmetric = |t: f64| -> Result<bool> {
        Ok(optimize_insertion(model, &params.with_temperature(t), opts)?.asymmetric)
    };
    if asymmetric(lo)? || !asymmetric(hi)? {
        return Err(SzilardError::Bracket { lo, hi });
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tolerance {
        let mid = 0.5 * (a + b);
        if asymmetric(mid)? {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(0.5 * (a + b))
}
