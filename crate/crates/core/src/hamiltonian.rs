//! Second-quantized contact Hamiltonian on a Fock basis.
//!
//! H = Σ_k ε_k n̂_k + (g/2) Σ_ijkl I_ijkl a†_i a†_j a_l a_k

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::fock::{delta_matrix_element, FockState, ModeBasis};

/// Symmetric matrix in compressed-row form. Both triangles are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSymmetric {
    /// Builds from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            cols.push(c);
            vals.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseSymmetric {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.cols[range.clone()].binary_search(&col) {
            Ok(pos) => self.vals[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.dim).all(|r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).all(|p| self.cols[p] == r || self.vals[p] == 0.0)
        })
    }

    /// y = H x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate().take(self.dim) {
            let mut acc = 0.0;
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[p] * x[self.cols[p]];
            }
            *out = acc;
        }
    }

    /// max |H_ij − H_ji|
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.dim {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[p];
                worst = worst.max((self.vals[p] - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[p])] = self.vals[p];
            }
        }
        m
    }
}

/// Assembles H over `basis`. Transitions leaving the basis (energy cutoff) are dropped,
/// which is the usual truncated configuration-interaction Hamiltonian.
pub fn assemble_hamiltonian(
    basis: &[FockState],
    coupling: f64,
    modes: &ModeBasis,
) -> SparseSymmetric {
    let dim = basis.len();
    let m = modes.n_modes();
    let index: HashMap<&[u8], usize> = basis
        .iter()
        .enumerate()
        .map(|(i, s)| (s.occupations.as_slice(), i))
        .collect();

    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    for (col, state) in basis.iter().enumerate() {
        triplets.push((col, col, state.energy(modes)));
    }
    if coupling == 0.0 {
        return SparseSymmetric::from_triplets(dim, triplets);
    }

    let half_g = 0.5 * coupling;
    let mut work: Vec<u8> = vec![0; m];
    let mut candidates: Vec<(usize, usize)> = Vec::new();
    for (col, state) in basis.iter().enumerate() {
        let occ = &state.occupations;
        let occupied: Vec<usize> = (0..m).filter(|&q| occ[q] > 0).collect();
        for (a, &kq) in occupied.iter().enumerate() {
            for &lq in &occupied[a..] {
                if kq == lq && occ[kq] < 2 {
                    continue;
                }
                // a_k a_l
                let annihilate = if kq == lq {
                    (occ[kq] as f64 * (occ[kq] as f64 - 1.0)).sqrt()
                } else {
                    (occ[kq] as f64 * occ[lq] as f64).sqrt()
                };
                let mult_kl = if kq == lq { 1.0 } else { 2.0 };
                work.copy_from_slice(occ);
                work[kq] -= 1;
                work[lq] -= 1;

                let (k, l) = (kq + 1, lq + 1);
                creation_candidates(k, l, m, &mut candidates);
                for &(i, j) in &candidates {
                    let integral = delta_matrix_element(i, j, k, l, modes.length);
                    if integral == 0.0 {
                        continue;
                    }
                    let (iq, jq) = (i - 1, j - 1);
                    let create = if iq == jq {
                        ((work[iq] as f64 + 1.0) * (work[iq] as f64 + 2.0)).sqrt()
                    } else {
                        ((work[iq] as f64 + 1.0) * (work[jq] as f64 + 1.0)).sqrt()
                    };
                    let mult_ij = if iq == jq { 1.0 } else { 2.0 };
                    work[iq] += 1;
                    work[jq] += 1;
                    if let Some(&row) = index.get(work.as_slice()) {
                        let value = half_g * integral * mult_ij * mult_kl * annihilate * create;
                        triplets.push((row, col, value));
                    }
                    work[iq] -= 1;
                    work[jq] -= 1;
                }
            }
        }
    }
    SparseSymmetric::from_triplets(dim, triplets)
}

/// Unordered pairs (i ≤ j) with a possibly nonzero I_ijkl for fixed (k, l):
/// i + j or |i − j| must equal k + l or |k − l|.
fn creation_candidates(k: usize, l: usize, m: usize, out: &mut Vec<(usize, usize)>) {
    out.clear();
    let targets = [k + l, k.abs_diff(l)];
    for (t_idx, &t) in targets.iter().enumerate() {
        if t_idx == 1 && t == targets[0] {
            continue;
        }
        // i + j = t
        for i in 1..=t / 2 {
            let j = t - i;
            if j <= m && j >= i {
                out.push((i, j));
            }
        }
        // j − i = t
        for i in 1..=m {
            let j = i + t;
            if j > m {
                break;
            }
            out.push((i, j));
        }
    }
    out.sort_unstable();
    out.dedup();
}
