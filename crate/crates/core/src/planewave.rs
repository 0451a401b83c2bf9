//! Truncated plane-wave representation of the Bloch fibers.
//!
//! The fiber at momentum k acts on the unit cell with symbol
//! `σ·F(-i∇_per - 2πk) + β χ_α(x)·σ`. In the Fourier basis
//! Ψ_m = e^{2πi m·x} the kinetic part is block diagonal with 2×2 spin
//! blocks σ·F(2π(m-k)); the potential couples modes through the scaled
//! coefficients c(n) = α² χ̂(αn). Coefficients are always evaluated through
//! that scaling identity at real argument αn, never by sampling χ_α on the
//! cell, so small α costs nothing in aliasing.

use nalgebra::{DMatrix, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::model::{Dispersion, Params, Potential};
use crate::pauli::{sigma_dot, sigma_dot_c, C64};

/// Dense fibers above this size are refused (the eigensolver cost is cubic).
pub const MAX_FIBER_DIM: usize = 20_000;

// ─────────────────────────────────────────────────────────────────────
//  Basis
// ─────────────────────────────────────────────────────────────────────

/// Square-cutoff Fourier basis: modes m with |m₁|, |m₂| ≤ N in row-major
/// order starting at (-N, -N), two spin components per mode.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisSet {
    cutoff: u32,
    modes: Vec<[i32; 2]>,
}

impl BasisSet {
    pub fn new(cutoff: u32) -> Self {
        let n = cutoff as i32;
        let mut modes = Vec::with_capacity(((2 * n + 1) * (2 * n + 1)) as usize);
        for m1 in -n..=n {
            for m2 in -n..=n {
                modes.push([m1, m2]);
            }
        }
        BasisSet { cutoff, modes }
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    pub fn modes(&self) -> &[[i32; 2]] {
        &self.modes
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// Matrix dimension, two spin components per mode.
    pub fn dim(&self) -> usize {
        2 * self.modes.len()
    }

    /// Position of m = (0, 0) in the mode ordering.
    pub fn zero_index(&self) -> usize {
        let n = self.cutoff as usize;
        n * (2 * n + 1) + n
    }

    pub fn index_of(&self, m: [i32; 2]) -> Option<usize> {
        let n = self.cutoff as i32;
        if m[0].abs() > n || m[1].abs() > n {
            return None;
        }
        Some(((m[0] + n) * (2 * n + 1) + (m[1] + n)) as usize)
    }
}

// ─────────────────────────────────────────────────────────────────────
//  Fourier coefficients of the scaled potential
// ─────────────────────────────────────────────────────────────────────

/// Fourier coefficient of the scaled bump: ∫_Ω χ(x/α) e^{-2πi n·x} dx
/// = α² χ̂(αn), componentwise.
pub fn chi_alpha_fourier(pot: &Potential, n: [i32; 2], alpha: f64) -> Result<[C64; 3]> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::AlphaRange(alpha));
    }
    let q = Vector2::new(alpha * n[0] as f64, alpha * n[1] as f64);
    let hat = pot.fourier(q)?;
    let a2 = alpha * alpha;
    Ok([hat[0] * a2, hat[1] * a2, hat[2] * a2])
}

/// Pre-tabulated 2×2 potential blocks β·c(n)·σ on the difference lattice
/// |n₁|, |n₂| ≤ n_max.
#[derive(Clone, Debug)]
pub struct PotentialBlocks {
    n_max: i32,
    blocks: Vec<Matrix2<C64>>,
}

impl PotentialBlocks {
    pub fn build(pot: &Potential, params: &Params, n_max: i32) -> Result<Self> {
        let side = (2 * n_max + 1) as usize;
        let mut blocks = Vec::with_capacity(side * side);
        for n1 in -n_max..=n_max {
            for n2 in -n_max..=n_max {
                let c = chi_alpha_fourier(pot, [n1, n2], params.alpha)?;
                let b = sigma_dot_c(&[
                    c[0] * params.beta,
                    c[1] * params.beta,
                    c[2] * params.beta,
                ]);
                blocks.push(b);
            }
        }
        Ok(PotentialBlocks { n_max, blocks })
    }

    #[inline]
    pub fn get(&self, n: [i32; 2]) -> &Matrix2<C64> {
        let side = 2 * self.n_max + 1;
        let idx = (n[0] + self.n_max) * side + (n[1] + self.n_max);
        &self.blocks[idx as usize]
    }
}

// ─────────────────────────────────────────────────────────────────────
//  Dense fiber matrix
// ─────────────────────────────────────────────────────────────────────

/// Dense truncated fiber Hamiltonian at one Bloch momentum.
#[derive(Clone, Debug)]
pub struct FiberMatrix {
    pub k: Vector2<f64>,
    pub params: Params,
    pub basis: BasisSet,
    matrix: DMatrix<C64>,
}

impl FiberMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// Largest entrywise deviation from Hermiticity (0 by construction).
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.matrix.nrows() {
            for j in 0..=i {
                let d = (self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }
}

fn guard_dim(basis: &BasisSet) -> Result<()> {
    if basis.dim() > MAX_FIBER_DIM {
        return Err(Error::DimensionGuard {
            dim: basis.dim(),
            guard: MAX_FIBER_DIM,
        });
    }
    Ok(())
}

/// Kinetic 2×2 block σ·F(2π(m-k)).
fn kinetic_block(disp: &Dispersion, m: [i32; 2], k: Vector2<f64>) -> Matrix2<C64> {
    let p = Vector2::new(
        2.0 * std::f64::consts::PI * (m[0] as f64 - k[0]),
        2.0 * std::f64::consts::PI * (m[1] as f64 - k[1]),
    );
    sigma_dot(&disp.eval(p))
}

/// Assemble the dense fiber matrix. The upper block triangle is computed
/// and mirrored, so the result is Hermitian to the last ulp.
pub fn assemble_fiber(
    k: Vector2<f64>,
    basis: &BasisSet,
    disp: &Dispersion,
    pot: &Potential,
    params: &Params,
) -> Result<FiberMatrix> {
    guard_dim(basis)?;
    let nm = basis.n_modes();
    let dim = basis.dim();
    let pot_blocks = if params.beta != 0.0 {
        Some(PotentialBlocks::build(pot, params, 2 * basis.cutoff() as i32)?)
    } else {
        None
    };
    let mut h = DMatrix::<C64>::zeros(dim, dim);
    for i in 0..nm {
        let mi = basis.modes()[i];
        for j in i..nm {
            let mj = basis.modes()[j];
            let mut b = Matrix2::<C64>::zeros();
            if let Some(pb) = &pot_blocks {
                b = *pb.get([mi[0] - mj[0], mi[1] - mj[1]]);
            }
            if i == j {
                b += kinetic_block(disp, mi, k);
                // Clamp the diagonal block to exact Hermiticity.
                let d01 = (b[(0, 1)] + b[(1, 0)].conj()) * C64::new(0.5, 0.0);
                b[(0, 1)] = d01;
                b[(1, 0)] = d01.conj();
                b[(0, 0)] = C64::new(b[(0, 0)].re, 0.0);
                b[(1, 1)] = C64::new(b[(1, 1)].re, 0.0);
            }
            for s in 0..2 {
                for t in 0..2 {
                    h[(2 * i + s, 2 * j + t)] = b[(s, t)];
                    if i != j {
                        h[(2 * j + t, 2 * i + s)] = b[(s, t)].conj();
                    }
                }
            }
        }
    }
    Ok(FiberMatrix {
        k,
        params: *params,
        basis: basis.clone(),
        matrix: h,
    })
}

/// Free fiber (β = 0): block diagonal kinetic part only.
pub fn assemble_free(k: Vector2<f64>, basis: &BasisSet, disp: &Dispersion) -> Result<FiberMatrix> {
    guard_dim(basis)?;
    let dim = basis.dim();
    let mut h = DMatrix::<C64>::zeros(dim, dim);
    for (i, &m) in basis.modes().iter().enumerate() {
        let b = kinetic_block(disp, m, k);
        for s in 0..2 {
            for t in 0..2 {
                h[(2 * i + s, 2 * i + t)] = b[(s, t)];
            }
        }
    }
    Ok(FiberMatrix {
        k,
        // α is immaterial at β = 0.
        params: Params { alpha: 0.5, beta: 0.0 },
        basis: basis.clone(),
        matrix: h,
    })
}

// ─────────────────────────────────────────────────────────────────────
//  Block partition
// ─────────────────────────────────────────────────────────────────────

/// The fiber partitioned against P₀ (constant mode, both spins) and its
/// complement Q₀ inside the cutoff.
#[derive(Clone, Debug)]
pub struct Blocks {
    /// 2×2 block on the constant mode.
    pub p0: Matrix2<C64>,
    /// 2×(dim-2) coupling rows from the constant mode into Q₀.
    pub coupling: DMatrix<C64>,
    /// (dim-2)×(dim-2) block on the nonzero modes.
    pub q0: DMatrix<C64>,
}

/// Lossless reindexing of the fiber into (P₀, coupling, Q₀) parts.
pub fn split_blocks(h: &FiberMatrix) -> Result<Blocks> {
    split_matrix(h.matrix(), 2 * h.basis.zero_index())
}

/// Partition any square matrix against the two rows/columns starting at
/// `p_row` (used both by the fiber splitter and the generic Schur tests).
pub fn split_matrix(m: &DMatrix<C64>, p_row: usize) -> Result<Blocks> {
    let dim = m.nrows();
    if dim < 4 {
        return Err(Error::EmptyQ0);
    }
    let q_dim = dim - 2;
    let mut p0 = Matrix2::<C64>::zeros();
    for s in 0..2 {
        for t in 0..2 {
            p0[(s, t)] = m[(p_row + s, p_row + t)];
        }
    }
    let q_cols: Vec<usize> = (0..dim).filter(|&c| c < p_row || c >= p_row + 2).collect();
    let mut coupling = DMatrix::<C64>::zeros(2, q_dim);
    let mut q0 = DMatrix::<C64>::zeros(q_dim, q_dim);
    for (cj, &j) in q_cols.iter().enumerate() {
        for s in 0..2 {
            coupling[(s, cj)] = m[(p_row + s, j)];
        }
        for (ci, &i) in q_cols.iter().enumerate() {
            q0[(ci, cj)] = m[(i, j)];
        }
    }
    Ok(Blocks { p0, coupling, q0 })
}

impl Blocks {
    /// Rebuild the full matrix with the P₀ rows at `p_row` (partition
    /// round-trip used by the tests).
    pub fn reassemble(&self, p_row: usize) -> DMatrix<C64> {
        let q_dim = self.q0.nrows();
        let dim = q_dim + 2;
        let q_cols: Vec<usize> = (0..dim).filter(|&c| c < p_row || c >= p_row + 2).collect();
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for s in 0..2 {
            for t in 0..2 {
                m[(p_row + s, p_row + t)] = self.p0[(s, t)];
            }
        }
        for (cj, &j) in q_cols.iter().enumerate() {
            for s in 0..2 {
                m[(p_row + s, j)] = self.coupling[(s, cj)];
                m[(j, p_row + s)] = self.coupling[(s, cj)].conj();
            }
            for (ci, &i) in q_cols.iter().enumerate() {
                m[(i, j)] = self.q0[(ci, cj)];
            }
        }
        m
    }
}

// ─────────────────────────────────────────────────────────────────────
//  Matrix-free fiber application
// ─────────────────────────────────────────────────────────────────────

/// Matrix-free fiber operator: kinetic diagonal plus potential convolution.
/// Used where the dense matrix would not fit (large cutoffs in the
/// remainder-scaling sweeps).
pub struct FiberApply {
    basis: BasisSet,
    kin: Vec<Matrix2<C64>>,
    f_norms: Vec<f64>,
    pot: Option<PotentialBlocks>,
}

impl FiberApply {
    pub fn new(
        k: Vector2<f64>,
        basis: &BasisSet,
        disp: &Dispersion,
        pot: &Potential,
        params: &Params,
    ) -> Result<Self> {
        let kin: Vec<Matrix2<C64>> = basis
            .modes()
            .iter()
            .map(|&m| kinetic_block(disp, m, k))
            .collect();
        let f_norms = basis
            .modes()
            .iter()
            .map(|&m| {
                let p = Vector2::new(
                    2.0 * std::f64::consts::PI * (m[0] as f64 - k[0]),
                    2.0 * std::f64::consts::PI * (m[1] as f64 - k[1]),
                );
                disp.eval(p).norm()
            })
            .collect();
        let pot_blocks = if params.beta != 0.0 {
            Some(PotentialBlocks::build(pot, params, 2 * basis.cutoff() as i32)?)
        } else {
            None
        };
        Ok(FiberApply {
            basis: basis.clone(),
            kin,
            f_norms,
            pot: pot_blocks,
        })
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// |F(2π(m-k))| per mode (free singular values come straight from it).
    pub fn f_norms(&self) -> &[f64] {
        &self.f_norms
    }

    /// out = H x (full fiber, both kinetic and potential parts).
    pub fn apply(&self, x: &[C64], out: &mut [C64]) {
        let nm = self.basis.n_modes();
        assert_eq!(x.len(), 2 * nm);
        assert_eq!(out.len(), 2 * nm);
        for i in 0..nm {
            let b = &self.kin[i];
            let x0 = x[2 * i];
            let x1 = x[2 * i + 1];
            out[2 * i] = b[(0, 0)] * x0 + b[(0, 1)] * x1;
            out[2 * i + 1] = b[(1, 0)] * x0 + b[(1, 1)] * x1;
        }
        if let Some(pb) = &self.pot {
            let modes = self.basis.modes();
            for i in 0..nm {
                let mi = modes[i];
                let mut acc0 = C64::new(0.0, 0.0);
                let mut acc1 = C64::new(0.0, 0.0);
                for j in 0..nm {
                    let mj = modes[j];
                    let b = pb.get([mi[0] - mj[0], mi[1] - mj[1]]);
                    let x0 = x[2 * j];
                    let x1 = x[2 * j + 1];
                    acc0 += b[(0, 0)] * x0 + b[(0, 1)] * x1;
                    acc1 += b[(1, 0)] * x0 + b[(1, 1)] * x1;
                }
                out[2 * i] += acc0;
                out[2 * i + 1] += acc1;
            }
        }
    }

    /// Zero the constant-mode components in place (projects onto Ran Q₀).
    pub fn project_q(&self, x: &mut [C64]) {
        let z = self.basis.zero_index();
        x[2 * z] = C64::new(0.0, 0.0);
        x[2 * z + 1] = C64::new(0.0, 0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use crate::pauli::{eig2_hermitian, sigma3};
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn standard_potential() -> Potential {
        Potential::square(1.0, [0.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn basis_ordering_and_zero_index() {
        let b = BasisSet::new(2);
        assert_eq!(b.n_modes(), 25);
        assert_eq!(b.dim(), 50);
        assert_eq!(b.modes()[0], [-2, -2]);
        assert_eq!(b.modes()[b.zero_index()], [0, 0]);
        assert_eq!(b.index_of([0, 0]), Some(b.zero_index()));
        assert_eq!(b.index_of([2, -1]), Some(b.modes().iter().position(|&m| m == [2, -1]).unwrap()));
        assert_eq!(b.index_of([3, 0]), None);
    }

    #[test]
    fn chi_alpha_fourier_examples() {
        let pot = standard_potential();
        // n = 0: α²Φ.
        let c = chi_alpha_fourier(&pot, [0, 0], 0.25).unwrap();
        assert_relative_eq!(c[2].re, 0.0625, epsilon = 1e-15);
        assert_eq!(c[0].norm(), 0.0);

        // Unit square, α = 1/2, n = (1, 0): α² sinc(π/2) = 0.25·(2/π).
        let c = chi_alpha_fourier(&pot, [1, 0], 0.5).unwrap();
        assert_relative_eq!(c[2].re, 0.25 * 2.0 / std::f64::consts::PI, epsilon = 1e-14);

        // Reality: coefficient at -n is the conjugate.
        let pot2 = Potential::disk(0.3, [0.2, 0.0, 0.8]).unwrap();
        let cp = chi_alpha_fourier(&pot2, [2, -1], 0.3).unwrap();
        let cm = chi_alpha_fourier(&pot2, [-2, 1], 0.3).unwrap();
        for i in 0..3 {
            assert!((cm[i] - cp[i].conj()).norm() < 1e-14);
        }

        assert!(chi_alpha_fourier(&pot, [0, 0], 0.7).is_err());
    }

    #[test]
    fn single_mode_fiber_is_sigma3_times_lambda() {
        // N = 0, dirac, χ = (0,0,1_Ω), α = 0.1, β = 1: H = 0.01 σ₃.
        let basis = BasisSet::new(0);
        let disp = Dispersion::dirac();
        let pot = standard_potential();
        let params = Params::new(0.1, 1.0).unwrap();
        let h = assemble_fiber(Vector2::zeros(), &basis, &disp, &pot, &params).unwrap();
        let expected = sigma3() * C64::new(0.01, 0.0);
        for s in 0..2 {
            for t in 0..2 {
                assert!((h.matrix()[(s, t)] - expected[(s, t)]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn free_fiber_block_diagonal_spectrum() {
        // β = 0: eigenvalue pairs ±|F(2π(m-k))| per mode.
        let basis = BasisSet::new(1);
        let disp = Dispersion::dirac();
        let k = Vector2::new(0.5, 0.0);
        let h = assemble_free(k, &basis, &disp).unwrap();
        let ev = linalg::hermitian_eigenvalues(h.matrix()).unwrap();
        let mut expected: Vec<f64> = Vec::new();
        for &m in basis.modes() {
            let f = 2.0
                * std::f64::consts::PI
                * ((m[0] as f64 - 0.5).powi(2) + (m[1] as f64).powi(2)).sqrt();
            expected.push(f);
            expected.push(-f);
        }
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in ev.iter().zip(&expected) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
        // ±π present: distance 1/2 to both m = (0,0) and m = (1,0).
        assert!(ev.iter().any(|&x| (x - std::f64::consts::PI).abs() < 1e-12));
        // trace zero
        let tr: C64 = (0..h.dim()).map(|i| h.matrix()[(i, i)]).sum();
        assert!(tr.norm() < 1e-12);
    }

    #[test]
    fn dirac_mode_block_at_2pi() {
        // N = 1, k = 0, diagonal block at m = (1,0) has eigenvalues ±2π.
        let basis = BasisSet::new(1);
        let disp = Dispersion::dirac();
        let pot = standard_potential();
        let params = Params::new(0.1, 1.0).unwrap();
        let h = assemble_fiber(Vector2::zeros(), &basis, &disp, &pot, &params).unwrap();
        let i = basis.index_of([1, 0]).unwrap();
        let mut block = Matrix2::<C64>::zeros();
        for s in 0..2 {
            for t in 0..2 {
                block[(s, t)] = h.matrix()[(2 * i + s, 2 * i + t)];
            }
        }
        // subtract the potential diagonal c(0)σ to isolate the kinetic part
        let c0 = chi_alpha_fourier(&pot, [0, 0], params.alpha).unwrap();
        let kin = block - sigma_dot_c(&[c0[0], c0[1], c0[2]]);
        let (lo, hi) = eig2_hermitian(&kin);
        assert_relative_eq!(hi, 2.0 * std::f64::consts::PI, epsilon = 1e-12);
        assert_relative_eq!(lo, -2.0 * std::f64::consts::PI, epsilon = 1e-12);
    }

    #[test]
    fn hermitian_by_construction() {
        let basis = BasisSet::new(3);
        let disp = Dispersion::multilayer(2).unwrap();
        let pot = Potential::disk(0.25, [0.3, -0.2, 0.9]).unwrap();
        let params = Params::new(0.2, 0.7).unwrap();
        let h = assemble_fiber(Vector2::new(0.17, -0.4), &basis, &disp, &pot, &params).unwrap();
        assert_eq!(h.hermiticity_defect(), 0.0);
    }

    #[test]
    fn potential_part_linear_in_beta() {
        // H(α, 2β) - H(α, β) = H(α, β) - H(α, 0) entrywise.
        let basis = BasisSet::new(2);
        let disp = Dispersion::dirac();
        let pot = standard_potential();
        let k = Vector2::new(0.1, 0.2);
        let h0 = assemble_free(k, &basis, &disp).unwrap();
        let h1 = assemble_fiber(k, &basis, &disp, &pot, &Params::new(0.2, 0.4).unwrap()).unwrap();
        let h2 = assemble_fiber(k, &basis, &disp, &pot, &Params::new(0.2, 0.8).unwrap()).unwrap();
        let lhs = h2.matrix() - h1.matrix();
        let rhs = h1.matrix() - h0.matrix();
        let worst = (lhs - rhs).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(worst < 1e-14);
    }

    #[test]
    fn split_blocks_p0_identity_and_roundtrip() {
        let basis = BasisSet::new(2);
        let disp = Dispersion::dirac();
        let pot = standard_potential();
        let params = Params::new(0.1, 0.2).unwrap();
        let k = Vector2::new(0.21, -0.34);
        let h = assemble_fiber(k, &basis, &disp, &pot, &params).unwrap();
        let blocks = split_blocks(&h).unwrap();

        // P₀ h P₀ = σ·F(-2πk) + α²β Φ·σ exactly.
        let f = disp.eval(Vector2::new(
            -2.0 * std::f64::consts::PI * k[0],
            -2.0 * std::f64::consts::PI * k[1],
        ));
        let lam = params.lambda();
        let expected = sigma_dot(&f) + sigma_dot(&Vector3::new(0.0, 0.0, lam));
        for s in 0..2 {
            for t in 0..2 {
                assert!((blocks.p0[(s, t)] - expected[(s, t)]).norm() < 1e-12);
            }
        }

        // Partition is lossless.
        let rebuilt = blocks.reassemble(2 * basis.zero_index());
        let worst = (rebuilt - h.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert_eq!(worst, 0.0);
    }

    #[test]
    fn coupling_row_matches_fourier_coefficient() {
        // χ = (0,0,1_Ω), α = 0.5, N = 1; entry from m = 0 to m' = (1,0)
        // is β·(0,0, 0.25·2/π)·σ₃-block.
        let basis = BasisSet::new(1);
        let disp = Dispersion::dirac();
        let pot = standard_potential();
        let params = Params::new(0.5, 1.0).unwrap();
        let h = assemble_fiber(Vector2::zeros(), &basis, &disp, &pot, &params).unwrap();
        let i0 = basis.zero_index();
        let j = basis.index_of([1, 0]).unwrap();
        let want = 0.25 * 2.0 / std::f64::consts::PI;
        assert_relative_eq!(h.matrix()[(2 * i0, 2 * j)].re, want, epsilon = 1e-14);
        assert_relative_eq!(h.matrix()[(2 * i0 + 1, 2 * j + 1)].re, -want, epsilon = 1e-14);
        assert!(h.matrix()[(2 * i0, 2 * j + 1)].norm() < 1e-15);
    }

    #[test]
    fn dimension_guard_trips() {
        let basis = BasisSet::new(70); // dim = 2·141² = 39762
        let disp = Dispersion::dirac();
        assert!(matches!(
            assemble_free(Vector2::zeros(), &basis, &disp),
            Err(Error::DimensionGuard { .. })
        ));
    }

    #[test]
    fn matrix_free_apply_agrees_with_dense() {
        let basis = BasisSet::new(2);
        let disp = Dispersion::power(2.0).unwrap();
        let pot = Potential::disk(0.3, [0.5, 0.0, 1.0]).unwrap();
        let params = Params::new(0.25, 0.6).unwrap();
        let k = Vector2::new(-0.12, 0.4);
        let dense = assemble_fiber(k, &basis, &disp, &pot, &params).unwrap();
        let op = FiberApply::new(k, &basis, &disp, &pot, &params).unwrap();
        let dim = basis.dim();
        let x: Vec<C64> = (0..dim)
            .map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut out = vec![C64::new(0.0, 0.0); dim];
        op.apply(&x, &mut out);
        let xv = nalgebra::DVector::from_column_slice(&x);
        let want = dense.matrix() * xv;
        for i in 0..dim {
            assert!((out[i] - want[i]).norm() < 1e-12);
        }
    }
}
