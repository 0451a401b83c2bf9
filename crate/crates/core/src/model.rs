//! Model data: dispersion symbols, bump potentials, run parameters, and the
//! flux decomposition that controls the gap.
//!
//! A dispersion is a map `F: R² → R³` with `F(0) = 0`, growth
//! `K₀′|p|^d ≤ |F(p)| ≤ K₀|p|^d`, and (for the strict presets) a rank-2
//! linearization `F(p) = |p|^{d-1} A p + O(|p|^{d+1})` near the origin.
//! The bump potential is a triple of bounded functions supported in the unit
//! cell; its componentwise integrals form the flux vector Φ, split into the
//! part Φ∥ inside Ran(A) and the transverse part Φ⊥ that opens the gap.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3x2, Vector2, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature;

// ─────────────────────────────────────────────────────────────────────
//  Dispersion
// ─────────────────────────────────────────────────────────────────────

type CustomEval = Arc<dyn Fn(Vector2<f64>) -> Vector3<f64> + Send + Sync>;

#[derive(Clone)]
enum Kind {
    /// F(p) = (p₁, p₂, 0); d = 1.
    Dirac,
    /// F(p) = |p|^{d-1} (p₁, p₂, 0); |F| = |p|^d exactly.
    Power,
    /// F(p) = (Re (p₁+ip₂)^N, Im (p₁+ip₂)^N, 0); |F| = |p|^N.
    Multilayer(u32),
    Custom(CustomEval),
}

/// The kinetic symbol F together with its growth constants and
/// linearization map.
#[derive(Clone)]
pub struct Dispersion {
    kind: Kind,
    d: f64,
    a: Matrix3x2<f64>,
    k0_lower: f64,
    k0_upper: f64,
    /// False when the near-zero expansion |p|^{d-1}Ap does not hold
    /// literally (multilayer N ≥ 2); such presets are excluded from the
    /// λ₀-dependent certificates.
    hypothesis_iii_strict: bool,
}

impl fmt::Debug for Dispersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dispersion")
            .field("kind", &self.kind_name())
            .field("d", &self.d)
            .field("k0_lower", &self.k0_lower)
            .field("k0_upper", &self.k0_upper)
            .field("strict", &self.hypothesis_iii_strict)
            .finish()
    }
}

fn canonical_embedding() -> Matrix3x2<f64> {
    Matrix3x2::new(1.0, 0.0, 0.0, 1.0, 0.0, 0.0)
}

impl Dispersion {
    pub fn dirac() -> Self {
        Dispersion {
            kind: Kind::Dirac,
            d: 1.0,
            a: canonical_embedding(),
            k0_lower: 1.0,
            k0_upper: 1.0,
            hypothesis_iii_strict: true,
        }
    }

    pub fn power(d: f64) -> Result<Self> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::ExponentRange(d));
        }
        Ok(Dispersion {
            kind: Kind::Power,
            d,
            a: canonical_embedding(),
            k0_lower: 1.0,
            k0_upper: 1.0,
            hypothesis_iii_strict: true,
        })
    }

    /// N-th order layer stack; N = 1 coincides with `dirac`. For N ≥ 2 the
    /// literal linearization fails (the symbol winds N times), so the
    /// preset carries `hypothesis_iii_strict = false`.
    pub fn multilayer(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::ExponentRange(0.0));
        }
        Ok(Dispersion {
            kind: Kind::Multilayer(n),
            d: n as f64,
            a: canonical_embedding(),
            k0_lower: 1.0,
            k0_upper: 1.0,
            hypothesis_iii_strict: n == 1,
        })
    }

    /// User-supplied symbol. Runs the full validation: rank of A, the
    /// growth sandwich on a log grid, and (if `strict`) finiteness of the
    /// fitted linearization-remainder constant.
    pub fn custom(
        d: f64,
        a: Matrix3x2<f64>,
        k0_lower: f64,
        k0_upper: f64,
        strict: bool,
        eval: CustomEval,
    ) -> Result<Self> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::ExponentRange(d));
        }
        let disp = Dispersion {
            kind: Kind::Custom(eval),
            d,
            a,
            k0_lower,
            k0_upper,
            hypothesis_iii_strict: strict,
        };
        disp.validate()?;
        Ok(disp)
    }

    pub fn kind_name(&self) -> String {
        match &self.kind {
            Kind::Dirac => "dirac".into(),
            Kind::Power => format!("power-{}", self.d),
            Kind::Multilayer(n) => format!("multilayer-{n}"),
            Kind::Custom(_) => "custom".into(),
        }
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    /// d' = min(d, 2), the effective smallness exponent.
    pub fn d_prime(&self) -> f64 {
        self.d.min(2.0)
    }

    pub fn linearization(&self) -> &Matrix3x2<f64> {
        &self.a
    }

    pub fn k0_lower(&self) -> f64 {
        self.k0_lower
    }

    pub fn k0_upper(&self) -> f64 {
        self.k0_upper
    }

    pub fn is_strict(&self) -> bool {
        self.hypothesis_iii_strict
    }

    /// F(p).
    pub fn eval(&self, p: Vector2<f64>) -> Vector3<f64> {
        let r = p.norm();
        match &self.kind {
            Kind::Dirac => Vector3::new(p[0], p[1], 0.0),
            Kind::Power => {
                if r == 0.0 {
                    Vector3::zeros()
                } else {
                    let s = r.powf(self.d - 1.0);
                    Vector3::new(s * p[0], s * p[1], 0.0)
                }
            }
            Kind::Multilayer(n) => {
                let z = Complex64::new(p[0], p[1]).powu(*n);
                Vector3::new(z.re, z.im, 0.0)
            }
            Kind::Custom(f) => f(p),
        }
    }

    /// The predicted leading term |p|^{d-1} A p of the near-zero expansion.
    pub fn linear_term(&self, p: Vector2<f64>) -> Vector3<f64> {
        let r = p.norm();
        if r == 0.0 {
            return Vector3::zeros();
        }
        self.a * p * r.powf(self.d - 1.0)
    }

    /// Largest sampled ratio |F(p) - |p|^{d-1}Ap| / |p|^{d+1} on
    /// |p| ∈ [1e-4, 1e-1]. This estimates the remainder constant of the
    /// near-zero expansion; it is the only constant the gap thresholds need
    /// that the theory leaves implicit.
    pub fn fit_remainder_constant(&self) -> f64 {
        let mut k_rem: f64 = 0.0;
        for i in 0..40 {
            let r = 1e-4 * (1e3f64).powf(i as f64 / 39.0);
            for j in 0..16 {
                let th = 2.0 * std::f64::consts::PI * j as f64 / 16.0;
                let p = Vector2::new(r * th.cos(), r * th.sin());
                let rem = (self.eval(p) - self.linear_term(p)).norm();
                k_rem = k_rem.max(rem / r.powf(self.d + 1.0));
            }
        }
        k_rem
    }

    /// Construction-time invariants: rank(A) = 2, the Hypothesis sandwich
    /// on a log grid, and (strict presets) a finite remainder constant.
    pub fn validate(&self) -> Result<()> {
        let sv = self.a.svd(false, false).singular_values;
        if sv[0] <= 1e-12 || sv[1] <= 1e-12 {
            return Err(Error::RankDeficient(sv[0], sv[1]));
        }
        // Sandwich K0'|p|^d <= |F(p)| <= K0|p|^d on a 100-point log grid.
        for i in 0..100 {
            let r = 1e-3 * (1e6f64).powf(i as f64 / 99.0);
            for j in 0..12 {
                let th = 2.0 * std::f64::consts::PI * (j as f64 + 0.21) / 12.0;
                let p = Vector2::new(r * th.cos(), r * th.sin());
                let f_norm = self.eval(p).norm();
                let lo = self.k0_lower * r.powf(self.d);
                let hi = self.k0_upper * r.powf(self.d);
                if f_norm < lo * (1.0 - 1e-9) - 1e-300 || f_norm > hi * (1.0 + 1e-9) {
                    return Err(Error::SandwichViolation { p: r, f_norm, lo, hi });
                }
            }
        }
        if self.hypothesis_iii_strict {
            let k_rem = self.fit_remainder_constant();
            if !k_rem.is_finite() {
                return Err(Error::SandwichViolation {
                    p: 0.0,
                    f_norm: k_rem,
                    lo: 0.0,
                    hi: 0.0,
                });
            }
        }
        Ok(())
    }
}

// ─────────────────────────────────────────────────────────────────────
//  Potential
// ─────────────────────────────────────────────────────────────────────

/// Shared spatial profile of the three bump components.
#[derive(Clone, Debug)]
pub enum Shape {
    /// Indicator of a centered square of side `side` (≤ 1).
    Square { side: f64 },
    /// Indicator of a centered disk of radius `radius` (≤ 1/2).
    Disk { radius: f64 },
    /// Smooth bump exp(1 - 1/(1 - (|y|/radius)²)) inside |y| < radius.
    Bump { radius: f64 },
    /// Piecewise-constant values on an n×n grid over the unit cell
    /// (row-major, cell (0,0) at the lower-left corner).
    Grid { n: usize, values: Arc<Vec<f64>> },
}

/// Three bump components χ = (χ₁, χ₂, χ₃) sharing one profile, scaled per
/// component: χᵢ(y) = amplitudes[i] · shape(y).
#[derive(Clone, Debug)]
pub struct Potential {
    shape: Shape,
    amplitudes: [f64; 3],
    quad_order: usize,
}

/// Exact Fourier data of √|χᵢ,α| and sgn(χᵢ,α)√|χᵢ,α|, available for
/// indicator profiles only (there √|χ| is again an indicator).
#[derive(Clone, Debug)]
pub struct IndicatorData {
    /// √|aᵢ| prefactors.
    pub sqrt_abs: [f64; 3],
    /// sgn(aᵢ)√|aᵢ| prefactors.
    pub signed_sqrt: [f64; 3],
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

impl Potential {
    pub fn square(side: f64, amplitudes: [f64; 3]) -> Result<Self> {
        if !(side > 0.0 && side <= 1.0) {
            return Err(Error::SupportEscapes(format!(
                "square side {side} must lie in (0, 1]"
            )));
        }
        Self::check_amplitudes(&amplitudes)?;
        Ok(Potential {
            shape: Shape::Square { side },
            amplitudes,
            quad_order: 64,
        })
    }

    pub fn disk(radius: f64, amplitudes: [f64; 3]) -> Result<Self> {
        if !(radius > 0.0 && radius <= 0.5) {
            return Err(Error::SupportEscapes(format!(
                "disk radius {radius} must lie in (0, 1/2]"
            )));
        }
        Self::check_amplitudes(&amplitudes)?;
        Ok(Potential {
            shape: Shape::Disk { radius },
            amplitudes,
            quad_order: 64,
        })
    }

    pub fn bump(radius: f64, amplitudes: [f64; 3]) -> Result<Self> {
        if !(radius > 0.0 && radius <= 0.5) {
            return Err(Error::SupportEscapes(format!(
                "bump radius {radius} must lie in (0, 1/2]"
            )));
        }
        Self::check_amplitudes(&amplitudes)?;
        Ok(Potential {
            shape: Shape::Bump { radius },
            amplitudes,
            quad_order: 64,
        })
    }

    pub fn grid(n: usize, values: Vec<f64>, amplitudes: [f64; 3]) -> Result<Self> {
        if n == 0 || values.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "grid wants n² = {} values, got {}",
                n * n,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Unbounded("grid contains non-finite values".into()));
        }
        Self::check_amplitudes(&amplitudes)?;
        Ok(Potential {
            shape: Shape::Grid {
                n,
                values: Arc::new(values),
            },
            amplitudes,
            quad_order: 64,
        })
    }

    fn check_amplitudes(a: &[f64; 3]) -> Result<()> {
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Unbounded("non-finite amplitude".into()));
        }
        Ok(())
    }

    pub fn amplitudes(&self) -> [f64; 3] {
        self.amplitudes
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn shape_name(&self) -> String {
        match &self.shape {
            Shape::Square { side } => format!("square(side={side})"),
            Shape::Disk { radius } => format!("disk(r={radius})"),
            Shape::Bump { radius } => format!("bump(r={radius})"),
            Shape::Grid { n, .. } => format!("grid({n}x{n})"),
        }
    }

    /// Pointwise χ(y) for y in the unit cell.
    pub fn eval(&self, y: Vector2<f64>) -> Vector3<f64> {
        let s = self.shape_eval(y);
        Vector3::new(
            self.amplitudes[0] * s,
            self.amplitudes[1] * s,
            self.amplitudes[2] * s,
        )
    }

    fn shape_eval(&self, y: Vector2<f64>) -> f64 {
        match &self.shape {
            Shape::Square { side } => {
                if y[0].abs() <= side / 2.0 && y[1].abs() <= side / 2.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Shape::Disk { radius } => {
                if y.norm() <= *radius {
                    1.0
                } else {
                    0.0
                }
            }
            Shape::Bump { radius } => {
                let t = y.norm() / radius;
                if t < 1.0 {
                    (1.0 - 1.0 / (1.0 - t * t)).exp()
                } else {
                    0.0
                }
            }
            Shape::Grid { n, values } => {
                let nn = *n as f64;
                let ix = ((y[0] + 0.5) * nn).floor();
                let iy = ((y[1] + 0.5) * nn).floor();
                if ix < 0.0 || iy < 0.0 || ix >= nn || iy >= nn {
                    0.0
                } else {
                    values[iy as usize * n + ix as usize]
                }
            }
        }
    }

    /// Fourier transform of the unit-amplitude profile,
    /// ŝ(q) = ∫ shape(y) e^{-2πi q·y} dy, at real argument q.
    pub fn shape_fourier(&self, q: Vector2<f64>) -> Result<Complex64> {
        match &self.shape {
            Shape::Square { side } => {
                let s = *side;
                let v = s * s
                    * sinc(std::f64::consts::PI * q[0] * s)
                    * sinc(std::f64::consts::PI * q[1] * s);
                Ok(Complex64::new(v, 0.0))
            }
            Shape::Disk { radius } => {
                let r = *radius;
                let x = 2.0 * std::f64::consts::PI * q.norm() * r;
                let v = if x.abs() < 1e-8 {
                    std::f64::consts::PI * r * r * (1.0 - x * x / 8.0)
                } else {
                    // 2πr² J₁(x)/x
                    2.0 * std::f64::consts::PI * r * r * libm::j1(x) / x
                };
                Ok(Complex64::new(v, 0.0))
            }
            Shape::Bump { radius } => {
                // Radially symmetric: Hankel form 2π ∫₀^R J₀(2π|q|ρ) b(ρ) ρ dρ.
                let r0 = *radius;
                let qn = q.norm();
                let f = |rho: f64| {
                    let t = rho / r0;
                    let b = if t < 1.0 {
                        (1.0 - 1.0 / (1.0 - t * t)).exp()
                    } else {
                        0.0
                    };
                    libm::j0(2.0 * std::f64::consts::PI * qn * rho) * b * rho
                };
                let base = (2.0 + qn * r0).ceil() as usize * 2;
                let v = quadrature::integrate_1d_converged(&f, 0.0, r0, base, 1e-12)?;
                Ok(Complex64::new(2.0 * std::f64::consts::PI * v, 0.0))
            }
            Shape::Grid { n, values } => {
                // Exact transform of the piecewise-constant profile: a sum
                // of shifted cell indicators.
                let nn = *n as f64;
                let h = 1.0 / nn;
                let cell = h * h
                    * sinc(std::f64::consts::PI * q[0] * h)
                    * sinc(std::f64::consts::PI * q[1] * h);
                let mut acc = Complex64::new(0.0, 0.0);
                for iy in 0..*n {
                    for ix in 0..*n {
                        let v = values[iy * n + ix];
                        if v == 0.0 {
                            continue;
                        }
                        let cx = -0.5 + (ix as f64 + 0.5) * h;
                        let cy = -0.5 + (iy as f64 + 0.5) * h;
                        let phase = -2.0 * std::f64::consts::PI * (q[0] * cx + q[1] * cy);
                        acc += Complex64::from_polar(v, phase);
                    }
                }
                Ok(acc * cell)
            }
        }
    }

    /// Componentwise Fourier coefficients (χ̂₁(q), χ̂₂(q), χ̂₃(q)).
    pub fn fourier(&self, q: Vector2<f64>) -> Result<[Complex64; 3]> {
        let s = self.shape_fourier(q)?;
        Ok([
            s * self.amplitudes[0],
            s * self.amplitudes[1],
            s * self.amplitudes[2],
        ])
    }

    /// Area of the unit-amplitude profile, analytic where possible.
    pub fn shape_area(&self) -> Result<f64> {
        match &self.shape {
            Shape::Square { side } => Ok(side * side),
            Shape::Disk { radius } => Ok(std::f64::consts::PI * radius * radius),
            Shape::Bump { .. } => {
                let v = quadrature::integrate_cell_converged(
                    &|x, y| Complex64::new(self.shape_eval(Vector2::new(x, y)), 0.0),
                    self.quad_order,
                    1e-10,
                )?;
                Ok(v.re)
            }
            Shape::Grid { n, values } => {
                let h2 = 1.0 / (*n as f64 * *n as f64);
                Ok(values.iter().sum::<f64>() * h2)
            }
        }
    }

    /// Exact Fourier data of the square roots, indicator profiles only.
    pub fn indicator_data(&self) -> Result<IndicatorData> {
        match self.shape {
            Shape::Square { .. } | Shape::Disk { .. } => {
                let mut sqrt_abs = [0.0; 3];
                let mut signed = [0.0; 3];
                for i in 0..3 {
                    sqrt_abs[i] = self.amplitudes[i].abs().sqrt();
                    signed[i] = self.amplitudes[i].signum() * sqrt_abs[i];
                }
                // signum(0) is ±1 in IEEE; zero amplitude must stay zero.
                for i in 0..3 {
                    if self.amplitudes[i] == 0.0 {
                        signed[i] = 0.0;
                    }
                }
                Ok(IndicatorData {
                    sqrt_abs,
                    signed_sqrt: signed,
                })
            }
            _ => Err(Error::SqrtChiUnavailable),
        }
    }
}

/// Flux moments Φᵢ = ∫_Ω χᵢ, analytic for indicator profiles, quadrature
/// with an order-doubling certificate otherwise.
pub fn flux_moments(pot: &Potential) -> Result<Vector3<f64>> {
    let area = pot.shape_area()?;
    let a = pot.amplitudes();
    Ok(Vector3::new(a[0] * area, a[1] * area, a[2] * area))
}

// ─────────────────────────────────────────────────────────────────────
//  Parameters and flux decomposition
// ─────────────────────────────────────────────────────────────────────

/// Perturbation parameters. α scales the bump support, β its strength;
/// λ = α²β is the effective coupling of the constant mode. β = 0 is allowed
/// and means the free operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Params {
    pub alpha: f64,
    pub beta: f64,
}

impl Params {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 0.5) {
            return Err(Error::AlphaRange(alpha));
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::BetaRange(beta));
        }
        Ok(Params { alpha, beta })
    }

    /// λ = α²β.
    pub fn lambda(&self) -> f64 {
        self.alpha * self.alpha * self.beta
    }
}

/// Φ split against the range of the linearization map.
#[derive(Clone, Debug)]
pub struct FluxDecomposition {
    pub phi: Vector3<f64>,
    pub phi_par: Vector3<f64>,
    pub phi_perp: Vector3<f64>,
    pub norm_perp: f64,
}

/// Orthogonal decomposition of Φ onto Ran(A) ⊕ Ran(A)⊥ via a QR
/// orthonormalization of A's columns.
pub fn project_flux(phi: Vector3<f64>, a: &Matrix3x2<f64>) -> Result<FluxDecomposition> {
    let sv = a.svd(false, false).singular_values;
    if sv[0] <= 1e-12 || sv[1] <= 1e-12 {
        return Err(Error::RankDeficient(sv[0], sv[1]));
    }
    let qr = a.qr();
    let q = qr.q();
    let phi_par = q * (q.transpose() * phi);
    let phi_perp = phi - phi_par;
    Ok(FluxDecomposition {
        phi,
        phi_par,
        phi_perp,
        norm_perp: phi_perp.norm(),
    })
}

/// The derived threshold constants of the gap bound.
#[derive(Clone, Copy, Debug)]
pub struct GapConstants {
    /// Radius scale: K₀′ M^d - |Φ| = |Φ⊥|/2.
    pub m: f64,
    /// Fitted remainder constant of the near-zero expansion.
    pub k_rem: f64,
    /// Coupling threshold: |Φ⊥| - K_rem M^{d+1} λ₀^{1/d} = |Φ⊥|/2;
    /// +∞ when the linearization is exact (K_rem below 1e-14).
    pub lambda0: f64,
}

/// Solve for (M, K_rem, λ₀). Errors when |Φ⊥| = 0 (the bound is vacuous).
pub fn gap_constants(disp: &Dispersion, flux: &FluxDecomposition) -> Result<GapConstants> {
    if flux.norm_perp <= 0.0 {
        return Err(Error::NoTransverseFlux);
    }
    let d = disp.d();
    let m = ((flux.phi.norm() + flux.norm_perp / 2.0) / disp.k0_lower()).powf(1.0 / d);
    let k_rem = disp.fit_remainder_constant();
    let lambda0 = if k_rem <= 1e-14 {
        f64::INFINITY
    } else {
        (flux.norm_perp / (2.0 * k_rem * m.powf(d + 1.0))).powf(d)
    };
    Ok(GapConstants { m, k_rem, lambda0 })
}

/// Resolution of the polar search grid used by [`inf_check`].
#[derive(Clone, Copy, Debug)]
pub struct InfCheckGrid {
    pub radii: usize,
    pub angles: usize,
}

impl Default for InfCheckGrid {
    fn default() -> Self {
        // The minimizer sits near |p| ~ λ^{1/d}; log spacing covers it.
        InfCheckGrid {
            radii: 512,
            angles: 256,
        }
    }
}

/// Numerical certificate for the constant-mode bound: the minimum of
/// |F(p) + λΦ| over a polar grid (plus p = 0).
pub fn inf_check(
    disp: &Dispersion,
    flux: &FluxDecomposition,
    lambda: f64,
    grid: InfCheckGrid,
) -> Result<f64> {
    if lambda < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    let d = disp.d();
    let m = ((flux.phi.norm() + flux.norm_perp / 2.0) / disp.k0_lower()).powf(1.0 / d);
    let scale = lambda.powf(1.0 / d);
    let r_lo = if lambda > 0.0 { scale * 1e-3 } else { 1e-9 };
    let r_hi = (2.0 * m * scale).max(10.0);
    let mut best = (disp.eval(Vector2::zeros()) + lambda * flux.phi).norm();
    for i in 0..grid.radii {
        let t = i as f64 / (grid.radii - 1).max(1) as f64;
        let r = r_lo * (r_hi / r_lo).powf(t);
        for j in 0..grid.angles {
            let th = 2.0 * std::f64::consts::PI * j as f64 / grid.angles as f64;
            let p = Vector2::new(r * th.cos(), r * th.sin());
            let v = (disp.eval(p) + lambda * flux.phi).norm();
            if v < best {
                best = v;
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dirac_eval_examples() {
        let disp = Dispersion::dirac();
        assert_eq!(disp.eval(Vector2::new(0.0, 0.0)), Vector3::zeros());
        let tau = 2.0 * std::f64::consts::PI;
        assert_eq!(disp.eval(Vector2::new(tau, 0.0)), Vector3::new(tau, 0.0, 0.0));
    }

    #[test]
    fn multilayer_eval_complex_power_oracle() {
        // (1+i)² = 2i, computed independently below.
        let disp = Dispersion::multilayer(2).unwrap();
        let got = disp.eval(Vector2::new(1.0, 1.0));
        let oracle = Complex64::new(1.0, 1.0) * Complex64::new(1.0, 1.0);
        assert_relative_eq!(got[0], oracle.re, epsilon = 1e-14);
        assert_relative_eq!(got[1], oracle.im, epsilon = 1e-14);
        assert_eq!(got[2], 0.0);
        assert!(!disp.is_strict());
    }

    #[test]
    fn presets_validate() {
        Dispersion::dirac().validate().unwrap();
        Dispersion::power(2.0).unwrap().validate().unwrap();
        Dispersion::power(0.7).unwrap().validate().unwrap();
        Dispersion::multilayer(3).unwrap().validate().unwrap();
    }

    #[test]
    fn sandwich_holds_on_log_grid_for_presets() {
        // |F| = |p|^d exactly for every preset.
        for disp in [
            Dispersion::dirac(),
            Dispersion::power(2.0).unwrap(),
            Dispersion::multilayer(2).unwrap(),
        ] {
            for i in 0..100 {
                let r = 1e-3 * (1e6f64).powf(i as f64 / 99.0);
                let p = Vector2::new(r * 0.6, -r * 0.8);
                let f = disp.eval(p).norm();
                let pd = p.norm().powf(disp.d());
                assert!(f >= disp.k0_lower() * pd * (1.0 - 1e-12));
                assert!(f <= disp.k0_upper() * pd * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn rank_deficient_linearization_rejected() {
        let a = Matrix3x2::new(1.0, 2.0, 2.0, 4.0, 0.0, 0.0);
        let err = project_flux(Vector3::new(1.0, 0.0, 0.0), &a).unwrap_err();
        assert!(matches!(err, Error::RankDeficient(_, _)));
    }

    #[test]
    fn flux_moments_examples() {
        // Unit-cell indicator: area 1.
        let p = Potential::square(1.0, [0.0, 0.0, 1.0]).unwrap();
        let phi = flux_moments(&p).unwrap();
        assert_relative_eq!(phi[2], 1.0, epsilon = 1e-14);
        assert_eq!(phi[0], 0.0);

        // Disk r = 0.25: area π/16.
        let p = Potential::disk(0.25, [0.0, 0.0, 1.0]).unwrap();
        let phi = flux_moments(&p).unwrap();
        assert_relative_eq!(phi[2], std::f64::consts::PI / 16.0, epsilon = 1e-14);

        // Linearity in the amplitudes.
        let p = Potential::square(1.0, [0.5, 0.0, 0.5]).unwrap();
        let phi = flux_moments(&p).unwrap();
        assert_relative_eq!(phi[0], 0.5, epsilon = 1e-14);
        assert_eq!(phi[1], 0.0);
        assert_relative_eq!(phi[2], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn flux_moment_matches_fourier_at_zero() {
        for pot in [
            Potential::square(0.7, [0.2, -0.4, 1.0]).unwrap(),
            Potential::disk(0.3, [0.0, 1.5, -0.2]).unwrap(),
            Potential::bump(0.4, [1.0, 0.0, 2.0]).unwrap(),
            Potential::grid(4, (0..16).map(|i| (i % 3) as f64).collect(), [1.0, 0.5, 0.0]).unwrap(),
        ] {
            let phi = flux_moments(&pot).unwrap();
            let f0 = pot.fourier(Vector2::zeros()).unwrap();
            for i in 0..3 {
                assert_relative_eq!(phi[i], f0[i].re, epsilon = 1e-9);
                assert!(f0[i].im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fourier_reality_symmetry() {
        for pot in [
            Potential::square(0.6, [1.0, 0.3, -0.7]).unwrap(),
            Potential::grid(3, vec![0.0, 1.0, 0.5, 2.0, 0.0, 1.0, 0.25, 0.5, 0.0], [1.0, 1.0, 1.0])
                .unwrap(),
        ] {
            let q = Vector2::new(0.31, -0.17);
            let plus = pot.fourier(q).unwrap();
            let minus = pot.fourier(-q).unwrap();
            for i in 0..3 {
                assert!((minus[i] - plus[i].conj()).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn support_escape_rejected() {
        assert!(Potential::square(1.2, [0.0, 0.0, 1.0]).is_err());
        assert!(Potential::disk(0.6, [0.0, 0.0, 1.0]).is_err());
        assert!(Potential::bump(0.51, [1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(Params::new(0.6, 1.0).is_err());
        assert!(Params::new(0.0, 1.0).is_err());
        assert!(Params::new(0.3, -1.0).is_err());
        let p = Params::new(0.1, 0.2).unwrap();
        assert_relative_eq!(p.lambda(), 0.002, epsilon = 1e-18);
    }

    #[test]
    fn project_flux_coordinate_case() {
        let a = canonical_embedding();
        let f = project_flux(Vector3::new(0.1, 0.2, 0.3), &a).unwrap();
        assert_relative_eq!(f.phi_par[0], 0.1, epsilon = 1e-14);
        assert_relative_eq!(f.phi_par[1], 0.2, epsilon = 1e-14);
        assert!(f.phi_par[2].abs() < 1e-15);
        assert_relative_eq!(f.phi_perp[2], 0.3, epsilon = 1e-14);
        assert_relative_eq!(f.norm_perp, 0.3, epsilon = 1e-14);

        let z = project_flux(Vector3::zeros(), &a).unwrap();
        assert_eq!(z.norm_perp, 0.0);
        assert_eq!(z.phi_par, Vector3::zeros());
    }

    #[test]
    fn project_flux_tilted_plane_vs_least_squares_oracle() {
        // Columns (e1+e3)/√2 and e2; Φ = e1 → Φ∥ = (1/2, 0, 1/2).
        let s = 1.0 / 2f64.sqrt();
        let a = Matrix3x2::new(s, 0.0, 0.0, 1.0, s, 0.0);
        let phi = Vector3::new(1.0, 0.0, 0.0);
        let f = project_flux(phi, &a).unwrap();
        assert_relative_eq!(f.phi_par[0], 0.5, epsilon = 1e-13);
        assert_relative_eq!(f.phi_par[1], 0.0, epsilon = 1e-13);
        assert_relative_eq!(f.phi_par[2], 0.5, epsilon = 1e-13);
        assert_relative_eq!(f.phi_perp[0], 0.5, epsilon = 1e-13);
        assert_relative_eq!(f.phi_perp[2], -0.5, epsilon = 1e-13);

        // Independent least-squares oracle: Φ∥ = A (AᵀA)⁻¹ Aᵀ Φ.
        let ata = a.transpose() * a;
        let x = ata.try_inverse().unwrap() * (a.transpose() * phi);
        let oracle = a * x;
        assert!((f.phi_par - oracle).norm() < 1e-13);
    }

    #[test]
    fn projection_idempotent_and_orthogonal() {
        let a = Matrix3x2::new(0.3, -0.2, 1.1, 0.9, -0.4, 0.7);
        let phi = Vector3::new(0.5, -1.2, 2.0);
        let f = project_flux(phi, &a).unwrap();
        assert!((f.phi - (f.phi_par + f.phi_perp)).norm() < 1e-14);
        assert!(f.phi_par.dot(&f.phi_perp).abs() <= 1e-12 * phi.norm_squared());
        let again = project_flux(f.phi_par, &a).unwrap();
        assert!((again.phi_par - f.phi_par).norm() < 1e-12);
        assert!(again.norm_perp < 1e-12);
    }

    #[test]
    fn gap_constants_dirac_closed_form() {
        // dirac, Φ = e3: M = |Φ| + |Φ⊥|/2 = 1.5 and λ₀ = ∞ (exact linearization).
        let disp = Dispersion::dirac();
        let flux = project_flux(Vector3::new(0.0, 0.0, 1.0), disp.linearization()).unwrap();
        let gc = gap_constants(&disp, &flux).unwrap();
        assert_relative_eq!(gc.m, 1.5, epsilon = 1e-12);
        assert!(gc.k_rem <= 1e-14);
        assert!(gc.lambda0.is_infinite());
        // Defining equation to relative 1e-10.
        let lhs = disp.k0_lower() * gc.m.powf(disp.d()) - flux.phi.norm();
        assert_relative_eq!(lhs, flux.norm_perp / 2.0, max_relative = 1e-10);
    }

    #[test]
    fn gap_constants_power_closed_form() {
        let disp = Dispersion::power(2.0).unwrap();
        let flux = project_flux(Vector3::new(0.0, 0.0, 1.0), disp.linearization()).unwrap();
        let gc = gap_constants(&disp, &flux).unwrap();
        assert_relative_eq!(gc.m, 1.5f64.sqrt(), epsilon = 1e-12);
        if gc.lambda0.is_finite() {
            let lhs = flux.norm_perp - gc.k_rem * gc.m.powf(disp.d() + 1.0) * gc.lambda0.powf(1.0 / disp.d());
            assert_relative_eq!(lhs, flux.norm_perp / 2.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn gap_constants_requires_transverse_flux() {
        let disp = Dispersion::dirac();
        let flux = project_flux(Vector3::new(1.0, 0.0, 0.0), disp.linearization()).unwrap();
        assert!(matches!(
            gap_constants(&disp, &flux),
            Err(Error::NoTransverseFlux)
        ));
    }

    #[test]
    fn inf_check_examples() {
        let disp = Dispersion::dirac();
        let grid = InfCheckGrid::default();

        // λ = 0: minimum 0 at p = 0.
        let flux = project_flux(Vector3::new(0.0, 0.0, 1.0), disp.linearization()).unwrap();
        assert_eq!(inf_check(&disp, &flux, 0.0, grid).unwrap(), 0.0);

        // Transverse flux: |F + λΦ|² = |p|² + λ², minimized at p = 0.
        let v = inf_check(&disp, &flux, 0.01, grid).unwrap();
        assert_relative_eq!(v, 0.01, epsilon = 1e-6);

        // Mixed flux: p = (-λ, 0) cancels the parallel part.
        let flux = project_flux(Vector3::new(1.0, 0.0, 1.0), disp.linearization()).unwrap();
        let v = inf_check(&disp, &flux, 0.01, grid).unwrap();
        assert_relative_eq!(v, 0.01, epsilon = 1e-5);
    }

    #[test]
    fn inf_check_certifies_constant_mode_bound() {
        // inf |F + λΦ| ≥ λ|Φ⊥|/2 over λ ∈ [0, min(λ₀, 1)], 20 samples.
        let grid = InfCheckGrid::default();
        for disp in [Dispersion::dirac(), Dispersion::power(2.0).unwrap()] {
            let flux =
                project_flux(Vector3::new(0.3, 0.0, 1.0), disp.linearization()).unwrap();
            let gc = gap_constants(&disp, &flux).unwrap();
            let lam_max = gc.lambda0.min(1.0);
            for i in 0..20 {
                let lam = lam_max * i as f64 / 19.0;
                let v = inf_check(&disp, &flux, lam, grid).unwrap();
                assert!(
                    v >= lam * flux.norm_perp / 2.0 - 1e-12,
                    "preset {} fails at λ = {lam}: {v}",
                    disp.kind_name()
                );
            }
        }
    }

    #[test]
    fn bump_profile_smooth_and_contained() {
        let pot = Potential::bump(0.4, [0.0, 0.0, 1.0]).unwrap();
        assert_eq!(pot.eval(Vector2::new(0.41, 0.0))[2], 0.0);
        assert_relative_eq!(pot.eval(Vector2::zeros())[2], 1.0, epsilon = 1e-14);
        assert!(pot.indicator_data().is_err());
    }

    #[test]
    fn square_indicator_sqrt_data() {
        let pot = Potential::square(1.0, [0.0, -4.0, 1.0]).unwrap();
        let ind = pot.indicator_data().unwrap();
        assert_eq!(ind.sqrt_abs[0], 0.0);
        assert_relative_eq!(ind.sqrt_abs[1], 2.0, epsilon = 1e-15);
        assert_relative_eq!(ind.signed_sqrt[1], -2.0, epsilon = 1e-15);
        assert_eq!(ind.signed_sqrt[0], 0.0);
    }
}
