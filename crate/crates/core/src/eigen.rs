//! Lowest eigenvalues of real symmetric operators.
//!
//! Small matrices go through a dense symmetric eigensolver. Larger ones use Lanczos
//! with full reorthogonalization, touching the operator only through products H·x.
//! Plain Lanczos resolves one vector per degenerate eigenspace, so converged Ritz
//! vectors are locked and the iteration is restarted in their orthogonal complement
//! until no further eigenvalue below the current k-th one appears.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SzilardError};
use crate::hamiltonian::SparseSymmetric;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Dimensions up to this size are solved densely.
    pub dense_threshold: usize,
    /// Relative residual tolerance for Ritz values.
    pub tolerance: f64,
    /// Upper bound on Krylov dimension per restart.
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            dense_threshold: 1500,
            tolerance: 1e-9,
            max_iterations: 3000,
        }
    }
}

/// The `k` smallest eigenvalues of `h`, ascending.
pub fn lowest_eigenvalues(h: &SparseSymmetric, k: usize, opts: &SolverOptions) -> Result<Vec<f64>> {
    let dim = h.dim();
    if k > dim {
        return Err(SzilardError::InvalidParameter {
            name: "k",
            reason: format!("requested {k} eigenvalues of a {dim}-dimensional matrix"),
        });
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    if h.is_diagonal() {
        let mut d = h.diagonal();
        d.sort_by(f64::total_cmp);
        d.truncate(k);
        return Ok(d);
    }
    if dim <= opts.dense_threshold {
        return Ok(dense_lowest(h.to_dense(), k));
    }
    lanczos_lowest(dim, |x, y| h.matvec(x, y), k, opts)
}

pub fn dense_lowest(m: DMatrix<f64>, k: usize) -> Vec<f64> {
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev.truncate(k);
    ev
}

/// Deterministic xorshift start vectors; reruns give bit-identical results.
struct StartVectors(u64);

impl StartVectors {
    fn next_vector(&mut self, dim: usize) -> Vec<f64> {
        (0..dim)
            .map(|_| {
                self.0 ^= self.0 << 13;
                self.0 ^= self.0 >> 7;
                self.0 ^= self.0 << 17;
                (self.0 >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// One classical Gram-Schmidt sweep; callers repeat it for full reorthogonalization.
fn orthogonalize(v: &mut [f64], against: &[Vec<f64>]) {
    for q in against {
        let c = dot(v, q);
        for (vi, qi) in v.iter_mut().zip(q) {
            *vi -= c * qi;
        }
    }
}

struct RitzPairs {
    values: Vec<f64>,
    residuals: Vec<f64>,
    vectors: DMatrix<f64>,
}

fn ritz(alpha: &[f64], beta: &[f64], beta_last: f64) -> RitzPairs {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let residuals = order
        .iter()
        .map(|&i| (beta_last * eig.eigenvectors[(m - 1, i)]).abs())
        .collect();
    let vectors = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
    RitzPairs {
        values,
        residuals,
        vectors,
    }
}

/// Lanczos for the `k` lowest eigenvalues of the operator `apply` (y ← H x).
pub fn lanczos_lowest<F>(dim: usize, apply: F, k: usize, opts: &SolverOptions) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    if k == 0 {
        return Ok(Vec::new());
    }
    if k > dim {
        return Err(SzilardError::InvalidParameter {
            name: "k",
            reason: format!("requested {k} eigenvalues of a {dim}-dimensional operator"),
        });
    }
    let mut starts = StartVectors(0x9E37_79B9_7F4A_7C15);
    let mut locked_vectors: Vec<Vec<f64>> = Vec::new();
    let mut locked_values: Vec<f64> = Vec::new();
    let mut scratch = vec![0.0; dim];
    let max_restarts = 4 * k + 8;

    for _restart in 0..max_restarts {
        let free_dim = dim - locked_vectors.len();
        if free_dim == 0 {
            break;
        }
        let want = k.saturating_sub(locked_values.len()).max(1);

        let mut v = starts.next_vector(dim);
        orthogonalize(&mut v, &locked_vectors);
        orthogonalize(&mut v, &locked_vectors);
        let nv = norm(&v);
        if nv < 1e-300 {
            break;
        }
        v.iter_mut().for_each(|x| *x /= nv);

        let mut basis: Vec<Vec<f64>> = vec![v];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let limit = free_dim.min(opts.max_iterations);
        let accepted: RitzPairs;

        loop {
            let j = basis.len() - 1;
            apply(&basis[j], &mut scratch);
            let mut w = scratch.clone();
            let a = dot(&w, &basis[j]);
            alpha.push(a);
            for _ in 0..2 {
                orthogonalize(&mut w, &basis);
                orthogonalize(&mut w, &locked_vectors);
            }
            let b = norm(&w);
            let steps = alpha.len();
            let invariant = b <= 1e-12 * a.abs().max(1.0) || steps >= free_dim;
            let exhausted = invariant || steps >= limit;
            let check = exhausted || steps.is_multiple_of(10) || steps == want;

            if check {
                let pairs = ritz(&alpha, &beta, if invariant { 0.0 } else { b });
                let needed =
                    if locked_values.len() >= k { 1 } else { want }.min(pairs.values.len());
                let converged = (0..needed)
                    .all(|i| pairs.residuals[i] <= opts.tolerance * pairs.values[i].abs().max(1.0));
                if converged || invariant {
                    accepted = pairs;
                    break;
                }
                if exhausted {
                    let residual = pairs.residuals[..needed]
                        .iter()
                        .cloned()
                        .fold(0.0, f64::max);
                    return Err(SzilardError::EigenConvergence {
                        iterations: steps,
                        residual,
                    });
                }
            }
            beta.push(b);
            w.iter_mut().for_each(|x| *x /= b);
            basis.push(w);
        }

        let pairs = accepted;
        let mut new_found = 0;
        for (idx, &value) in pairs.values.iter().enumerate() {
            let res_ok = pairs.residuals[idx] <= opts.tolerance * value.abs().max(1.0);
            let below = locked_values.len() < k || value < locked_values[k - 1];
            if !(res_ok && below) {
                if !res_ok {
                    break;
                }
                continue;
            }
            let mut vec = vec![0.0; dim];
            for (c, q) in basis.iter().enumerate().take(pairs.vectors.nrows()) {
                let coeff = pairs.vectors[(c, idx)];
                for (vi, qi) in vec.iter_mut().zip(q) {
                    *vi += coeff * qi;
                }
            }
            orthogonalize(&mut vec, &locked_vectors);
            orthogonalize(&mut vec, &locked_vectors);
            let nv = norm(&vec);
            if nv < 1e-8 {
                continue;
            }
            vec.iter_mut().for_each(|x| *x /= nv);
            locked_vectors.push(vec);
            let pos = locked_values.partition_point(|&x| x <= value);
            locked_values.insert(pos, value);
            new_found += 1;
        }
        if new_found == 0 && locked_values.len() >= k {
            locked_values.truncate(k);
            return Ok(locked_values);
        }
        if new_found == 0 && locked_vectors.len() == dim {
            break;
        }
    }
    if locked_values.len() >= k {
        locked_values.truncate(k);
        return Ok(locked_values);
    }
    Err(SzilardError::EigenConvergence {
        iterations: max_restarts,
        residual: f64::NAN,
    })
}

/// Orthonormalizes `new` against `basis` and itself (two Gram-Schmidt passes), appending
/// the survivors to `basis`. Vectors that lose almost all of their norm are dropped.
fn extend_orthonormal(basis: &mut Vec<Vec<f64>>, new: Vec<Vec<f64>>) -> usize {
    let mut added = 0;
    for mut v in new {
        let before = norm(&v);
        if before == 0.0 || !before.is_finite() {
            continue;
        }
        orthogonalize(&mut v, basis);
        orthogonalize(&mut v, basis);
        let after = norm(&v);
        if after <= 1e-10 * before {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= after);
        basis.push(v);
        added += 1;
    }
    added
}

fn combine(
    vectors: &[Vec<f64>],
    coeffs: &DMatrix<f64>,
    col: usize,
    rows: std::ops::Range<usize>,
) -> Vec<f64> {
    let dim = vectors[0].len();
    let mut out = vec![0.0; dim];
    for r in rows {
        let c = coeffs[(r, col)];
        if c != 0.0 {
            for (o, v) in out.iter_mut().zip(&vectors[r]) {
                *o += c * v;
            }
        }
    }
    out
}

/// Lowest `k` eigenvalues by locally optimal block preconditioned conjugate gradients.
/// `precondition` should approximate (H − σ)⁻¹ for a shift σ below the wanted levels.
pub fn lobpcg_lowest<F, P>(
    dim: usize,
    apply: F,
    precondition: P,
    k: usize,
    opts: &SolverOptions,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
{
    if k == 0 {
        return Ok(Vec::new());
    }
    let block = (k + 3).min(dim);
    if k > dim || 3 * block > dim {
        return Err(SzilardError::InvalidParameter {
            name: "k",
            reason: format!("block of {block} too large for a {dim}-dimensional operator"),
        });
    }
    let mut starts = StartVectors(0x2545_F491_4F6C_DD1D);
    let mut x: Vec<Vec<f64>> = Vec::with_capacity(block);
    extend_orthonormal(
        &mut x,
        (0..block).map(|_| starts.next_vector(dim)).collect(),
    );
    let mut previous: Vec<Vec<f64>> = Vec::new();
    let mut values = vec![0.0; block];
    let mut worst = f64::INFINITY;

    for iter in 0..opts.max_iterations {
        let mut basis = x.clone();
        let nx = basis.len();
        if iter > 0 {
            let mut residual_dirs = Vec::with_capacity(nx);
            let mut ax = vec![0.0; dim];
            worst = 0.0f64;
            let mut done = true;
            for (i, xi) in x.iter().enumerate() {
                apply(xi, &mut ax);
                let r: Vec<f64> = ax.iter().zip(xi).map(|(a, b)| a - values[i] * b).collect();
                let rn = norm(&r);
                if i < k {
                    let rel = rn / values[i].abs().max(1.0);
                    worst = worst.max(rel);
                    done &= rel <= opts.tolerance;
                }
                let mut w = vec![0.0; dim];
                precondition(&r, &mut w);
                residual_dirs.push(w);
            }
            if done {
                let mut out = values[..k].to_vec();
                out.sort_by(f64::total_cmp);
                return Ok(out);
            }
            extend_orthonormal(&mut basis, residual_dirs);
            extend_orthonormal(&mut basis, std::mem::take(&mut previous));
        }
        let m = basis.len();
        let images: Vec<Vec<f64>> = basis
            .iter()
            .map(|b| {
                let mut y = vec![0.0; dim];
                apply(b, &mut y);
                y
            })
            .collect();
        let g = DMatrix::from_fn(m, m, |r, c| {
            0.5 * (dot(&basis[r], &images[c]) + dot(&basis[c], &images[r]))
        });
        let eig = SymmetricEigen::new(g);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let coeffs = DMatrix::from_fn(m, block, |r, c| eig.eigenvectors[(r, order[c])]);
        values = order[..block].iter().map(|&i| eig.eigenvalues[i]).collect();
        let new_x: Vec<Vec<f64>> = (0..block)
            .map(|c| combine(&basis, &coeffs, c, 0..m))
            .collect();
        previous = if m > nx {
            (0..block)
                .map(|c| combine(&basis, &coeffs, c, nx..m))
                .collect()
        } else {
            Vec::new()
        };
        x.clear();
        extend_orthonormal(&mut x, new_x);
        let missing = block - x.len();
        if missing > 0 {
            extend_orthonormal(
                &mut x,
                (0..missing).map(|_| starts.next_vector(dim)).collect(),
            );
        }
    }
    Err(SzilardError::EigenConvergence {
        iterations: opts.max_iterations,
        residual: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiagonal(dim: usize) -> SparseSymmetric {
        let mut t = Vec::new();
        for i in 0..dim {
            t.push((i, i, 2.0 + (i as f64) * 0.01));
            if i + 1 < dim {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        SparseSymmetric::from_triplets(dim, t)
    }

    #[test]
    fn diagonal_matrix_gives_sorted_diagonal() {
        let h = SparseSymmetric::from_triplets(
            4,
            vec![(0, 0, 3.0), (1, 1, -1.0), (2, 2, 2.0), (3, 3, 0.5)],
        );
        let ev = lowest_eigenvalues(&h, 3, &SolverOptions::default()).unwrap();
        assert_eq!(ev, vec![-1.0, 0.5, 2.0]);
    }

    #[test]
    fn two_by_two_flip() {
        let h = SparseSymmetric::from_triplets(2, vec![(0, 1, 1.0), (1, 0, 1.0)]);
        let ev = lowest_eigenvalues(&h, 2, &SolverOptions::default()).unwrap();
        assert!((ev[0] + 1.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn too_many_requested() {
        let h = SparseSymmetric::from_triplets(2, vec![(0, 0, 1.0), (1, 1, 1.0)]);
        assert!(lowest_eigenvalues(&h, 3, &SolverOptions::default()).is_err());
    }

    #[test]
    fn lanczos_matches_dense() {
        let h = tridiagonal(400);
        let dense = dense_lowest(h.to_dense(), 8);
        let opts = SolverOptions {
            dense_threshold: 10,
            ..Default::default()
        };
        let lz = lowest_eigenvalues(&h, 8, &opts).unwrap();
        for (a, b) in dense.iter().zip(&lz) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn lobpcg_matches_dense() {
        let h = tridiagonal(400);
        let dense = dense_lowest(h.to_dense(), 5);
        let diag = h.diagonal();
        let opts = SolverOptions {
            max_iterations: 2000,
            ..Default::default()
        };
        // Jacobi preconditioner shifted below the spectrum
        let ev = lobpcg_lowest(
            400,
            |x, y| h.matvec(x, y),
            |r, w| {
                for i in 0..r.len() {
                    w[i] = r[i] / (diag[i] + 0.5);
                }
            },
            5,
            &opts,
        )
        .unwrap();
        for (a, b) in dense.iter().zip(&ev) {
            assert!(
                (a - b).abs() <= 1e-8 * a.abs().max(1.0),
                "{dense:?} vs {ev:?}"
            );
        }
    }

    #[test]
    fn lanczos_recovers_degenerate_levels() {
        // block diagonal copy of the same matrix: every eigenvalue doubly degenerate
        let base = tridiagonal(150);
        let mut t = Vec::new();
        for r in 0..150 {
            for c in 0..150 {
                let v = base.get(r, c);
                if v != 0.0 {
                    t.push((r, c, v));
                    t.push((r + 150, c + 150, v));
                }
            }
        }
        let h = SparseSymmetric::from_triplets(300, t);
        let opts = SolverOptions {
            dense_threshold: 10,
            ..Default::default()
        };
        let lz = lowest_eigenvalues(&h, 6, &opts).unwrap();
        let dense = dense_lowest(h.to_dense(), 6);
        for (a, b) in dense.iter().zip(&lz) {
            assert!(
                (a - b).abs() <= 1e-9 * a.abs().max(1.0),
                "{dense:?} vs {lz:?}"
            );
        }
    }
}
