//! Dense and matrix-free linear-algebra helpers.

use nalgebra::DMatrix;

use crate::pauli::C64;

/// Eigenvalues of a Hermitian matrix, ascending. NaN output is treated as a
/// solver failure and reported by the caller with its k-point context.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Option<Vec<f64>> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    if ev.iter().any(|x| !x.is_finite()) {
        return None;
    }
    ev.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Some(ev)
}

/// Hermitian eigendecomposition (eigenvalues ascending, matching columns).
pub fn hermitian_eigen(m: &DMatrix<C64>) -> Option<(Vec<f64>, DMatrix<C64>)> {
    let se = m.clone().symmetric_eigen();
    let n = se.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    if se.eigenvalues.iter().any(|x| !x.is_finite()) {
        return None;
    }
    order.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vecs = DMatrix::<C64>::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vecs.set_column(col, &se.eigenvectors.column(i));
    }
    Some((vals, vecs))
}

/// Operator 2-norm of a dense matrix via SVD.
pub fn opnorm_dense(m: &DMatrix<C64>) -> f64 {
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// A linear operator given by its action and the action of its adjoint.
pub trait ApplyOp {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn apply(&self, x: &[C64], out: &mut [C64]);
    fn apply_adjoint(&self, y: &[C64], out: &mut [C64]);
}

/// Largest singular value of `op` by block power iteration on A†A.
///
/// Uses a 2-column block with Rayleigh–Ritz extraction so near-degenerate
/// top singular pairs do not stall convergence. Deterministic start.
pub fn opnorm_power(op: &dyn ApplyOp, rel_tol: f64, max_iter: usize) -> f64 {
    let n = op.dim_in();
    let m = op.dim_out();
    if n == 0 || m == 0 {
        return 0.0;
    }
    // Deterministic pseudo-random start block.
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut block: Vec<Vec<C64>> = (0..2)
        .map(|_| (0..n).map(|_| C64::new(next(), next())).collect())
        .collect();
    let mut tmp_out = vec![C64::new(0.0, 0.0); m];
    let mut sigma_prev = 0.0f64;
    let mut stable = 0;
    for _ in 0..max_iter {
        // w_i = A†(A v_i)
        let mut new_block: Vec<Vec<C64>> = Vec::with_capacity(2);
        for v in &block {
            op.apply(v, &mut tmp_out);
            let mut w = vec![C64::new(0.0, 0.0); n];
            op.apply_adjoint(&tmp_out, &mut w);
            new_block.push(w);
        }
        // Rayleigh quotient from the leading block vector before
        // orthonormalization: sigma² ≈ <v, A†A v> / <v, v>.
        let num: f64 = block[0]
            .iter()
            .zip(&new_block[0])
            .map(|(a, b)| (a.conj() * b).re)
            .sum();
        let den: f64 = block[0].iter().map(|a| a.norm_sqr()).sum();
        let sigma = (num / den).max(0.0).sqrt();
        // Gram-Schmidt the block for the next round.
        orthonormalize(&mut new_block);
        block = new_block;
        if sigma_prev > 0.0 && (sigma - sigma_prev).abs() <= rel_tol * sigma.max(1e-300) {
            stable += 1;
            if stable >= 3 {
                return sigma;
            }
        } else {
            stable = 0;
        }
        sigma_prev = sigma;
    }
    sigma_prev
}

fn orthonormalize(block: &mut [Vec<C64>]) {
    for i in 0..block.len() {
        for j in 0..i {
            let proj: C64 = block[j]
                .iter()
                .zip(block[i].iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
            let (head, tail) = block.split_at_mut(i);
            for (a, b) in head[j].iter().zip(tail[0].iter_mut()) {
                *b -= proj * a;
            }
        }
        let norm: f64 = block[i].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for z in block[i].iter_mut() {
                *z /= norm;
            }
        }
    }
}

/// Dense matrix wrapped as an `ApplyOp` (used to cross-check the power
/// iteration against the SVD route in tests).
pub struct DenseOp<'a>(pub &'a DMatrix<C64>);

impl ApplyOp for DenseOp<'_> {
    fn dim_in(&self) -> usize {
        self.0.ncols()
    }
    fn dim_out(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, x: &[C64], out: &mut [C64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (j, xv) in x.iter().enumerate() {
                acc += self.0[(i, j)] * xv;
            }
            *o = acc;
        }
    }
    fn apply_adjoint(&self, y: &[C64], out: &mut [C64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (i, yv) in y.iter().enumerate() {
                acc += self.0[(i, j)].conj() * yv;
            }
            *o = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn random_matrix(n: usize, m: usize, seed: u64) -> DMatrix<C64> {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        DMatrix::from_fn(n, m, |_, _| C64::new(next(), next()))
    }

    #[test]
    fn power_iteration_matches_svd() {
        for seed in [1u64, 7, 42] {
            let a = random_matrix(23, 17, seed);
            let svd = opnorm_dense(&a);
            let pow = opnorm_power(&DenseOp(&a), 1e-13, 2000);
            assert_relative_eq!(svd, pow, max_relative = 1e-9);
        }
    }

    #[test]
    fn power_iteration_handles_degenerate_top() {
        // Diagonal with an exactly degenerate largest pair.
        let mut a = DMatrix::<C64>::zeros(6, 6);
        for (i, v) in [3.0, 3.0, 1.0, 0.5, 0.2, 0.1].iter().enumerate() {
            a[(i, i)] = C64::new(*v, 0.0);
        }
        let pow = opnorm_power(&DenseOp(&a), 1e-13, 2000);
        assert_relative_eq!(pow, 3.0, max_relative = 1e-10);
    }

    #[test]
    fn hermitian_eigen_sorted_and_consistent() {
        let a0 = random_matrix(12, 12, 5);
        let h = (&a0 + a0.adjoint()) * C64::new(0.5, 0.0);
        let vals = hermitian_eigenvalues(&h).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let (vals2, vecs) = hermitian_eigen(&h).unwrap();
        for (a, b) in vals.iter().zip(&vals2) {
            assert_relative_eq!(a, b, epsilon = 1e-10);
        }
        // residual check ||Hv - λv||
        for j in 0..vals2.len() {
            let v = vecs.column(j);
            let r = &h * v - v * C64::new(vals2[j], 0.0);
            assert!(r.norm() < 1e-10 * h.norm());
        }
    }
}
