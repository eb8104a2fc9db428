//! One-dimensional maximization: uniform grid scan followed by golden-section refinement.

use crate::error::{Result, SzilardError};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
}

/// Golden-section search for a maximum of a unimodal `f` on [lo, hi], stopping when
/// the bracket is narrower than `tol`. The best point seen is returned.
pub fn golden_section_max<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<Maximum>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(SzilardError::Bracket { lo, hi });
    }
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc >= fd {
        Maximum { x: c, value: fc }
    } else {
        Maximum { x: d, value: fd }
    })
}

/// `count` equally spaced points on [lo, hi], endpoints included.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| {
                if i == count - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (count - 1) as f64
                }
            })
            .collect(),
    }
}

/// Indices of strict-or-plateau local maxima of sampled values; a plateau reports its first index.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[j + 1] == values[i] {
            j += 1;
        }
        let left_ok = i == 0 || values[i - 1] < values[i];
        let right_ok = j == n - 1 || values[j + 1] < values[i];
        if left_ok && right_ok && values[i].is_finite() {
            out.push(i);
        }
        i = j + 1;
    }
    out
}

/// Refines a grid maximum at index `idx` of `xs` by golden section within its neighbours.
pub fn refine_grid_max<F>(f: F, xs: &[f64], values: &[f64], idx: usize, tol: f64) -> Result<Maximum>
where
    F: FnMut(f64) -> Result<f64>,
{
    let lo = xs[idx.saturating_sub(1)];
    let hi = xs[(idx + 1).min(xs.len() - 1)];
    let refined = golden_section_max(f, lo, hi, tol)?;
    Ok(if refined.value >= values[idx] {
        refined
    } else {
        Maximum {
            x: xs[idx],
            value: values[idx],
        }
    })
}

/// Global maximum over [lo, hi]: grid of `points`, then golden section around the best point.
pub fn grid_then_golden<F>(mut f: F, lo: f64, hi: f64, points: usize, tol: f64) -> Result<Maximum>
where
    F: FnMut(f64) -> Result<f64>,
{
    let xs = linspace(lo, hi, points.max(3));
    let values: Vec<f64> = xs.iter().map(|&x| f(x)).collect::<Result<_>>()?;
    let best = values
        .iter()
        .enumerate()
        .fold(0, |b, (i, v)| if *v > values[b] { i } else { b });
    refine_grid_max(f, &xs, &values, best, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_vertex() {
        let m = golden_section_max(|x| Ok(-(x - 0.3) * (x - 0.3)), 0.0, 1.0, 1e-8).unwrap();
        assert!((m.x - 0.3).abs() < 1e-7);
    }

    #[test]
    fn golden_handles_boundary_maximum() {
        let m = golden_section_max(Ok, 0.0, 1.0, 1e-8).unwrap();
        assert!(m.x > 1.0 - 1e-7);
    }

    #[test]
    fn grid_picks_global_of_two_peaks() {
        let f = |x: f64| {
            Ok((-(x - 0.2f64).powi(2) * 200.0).exp() + 1.5 * (-(x - 0.8f64).powi(2) * 200.0).exp())
        };
        let m = grid_then_golden(f, 0.0, 1.0, 101, 1e-9).unwrap();
        assert!((m.x - 0.8).abs() < 1e-4, "{m:?}");
    }

    #[test]
    fn linspace_hits_endpoints() {
        let xs = linspace(0.0, 1.0, 101);
        assert_eq!(xs.len(), 101);
        assert_eq!(xs[0], 0.0);
        assert_eq!(xs[100], 1.0);
        assert!((xs[50] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn local_maxima_with_plateau() {
        assert_eq!(local_maxima(&[0.0, 1.0, 0.5, 2.0, 2.0, 1.0]), vec![1, 3]);
        assert_eq!(local_maxima(&[3.0, 1.0, 2.0]), vec![0, 2]);
    }
}
