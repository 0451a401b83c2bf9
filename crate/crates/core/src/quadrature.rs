//! Gauss–Legendre quadrature, 1-D panels and tensor rules on the unit cell.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre polynomial. Accurate to machine precision for n ≤ a few hundred.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x) by recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = pk;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Integrate f over [a, b] with an n-point Gauss–Legendre rule.
pub fn panel<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize) -> f64 {
    let (xs, ws) = gauss_legendre(n);
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    xs.iter().zip(&ws).map(|(&x, &w)| w * f(c + h * x)).sum::<f64>() * h
}

/// Integrate f over [a, b] on precomputed reference nodes.
pub fn panel_with<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, xs: &[f64], ws: &[f64]) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    xs.iter().zip(ws).map(|(&x, &w)| w * f(c + h * x)).sum::<f64>() * h
}

/// Tensor Gauss–Legendre integral of a complex integrand over the unit cell
/// Ω = (-1/2, 1/2]², with `order` nodes per axis.
pub fn integrate_cell<F: Fn(f64, f64) -> Complex64>(f: &F, order: usize) -> Complex64 {
    let (xs, ws) = gauss_legendre(order);
    let mut acc = Complex64::new(0.0, 0.0);
    for (xi, wi) in xs.iter().zip(&ws) {
        let x = 0.5 * xi;
        for (yj, wj) in xs.iter().zip(&ws) {
            let y = 0.5 * yj;
            acc += f(x, y) * (wi * wj);
        }
    }
    acc * 0.25
}

/// Same integral with an order-doubling convergence certificate: doubles the
/// per-axis order until two successive values agree to `rel_tol` relative to
/// the scale of the integral (or 1, whichever is larger).
pub fn integrate_cell_converged<F: Fn(f64, f64) -> Complex64>(
    f: &F,
    base_order: usize,
    rel_tol: f64,
) -> Result<Complex64> {
    let mut order = base_order.max(4);
    let mut prev = integrate_cell(f, order);
    for _ in 0..4 {
        order *= 2;
        let cur = integrate_cell(f, order);
        let delta = (cur - prev).norm();
        let scale = cur.norm().max(1.0);
        if delta <= rel_tol * scale {
            return Ok(cur);
        }
        prev = cur;
    }
    let cur = integrate_cell(f, order * 2);
    let delta = (cur - prev).norm();
    let scale = cur.norm().max(1.0);
    if delta <= rel_tol * scale {
        Ok(cur)
    } else {
        Err(Error::QuadratureNonConvergence {
            delta,
            tol: rel_tol * scale,
        })
    }
}

/// 1-D integral over [a, b] with panel doubling until convergence.
pub fn integrate_1d_converged<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    base_panels: usize,
    rel_tol: f64,
) -> Result<f64> {
    let mut panels = base_panels.max(1);
    let eval = |np: usize| -> f64 {
        let h = (b - a) / np as f64;
        (0..np).map(|i| panel(f, a + i as f64 * h, a + (i + 1) as f64 * h, 16)).sum()
    };
    let mut prev = eval(panels);
    for _ in 0..6 {
        panels *= 2;
        let cur = eval(panels);
        if (cur - prev).abs() <= rel_tol * cur.abs().max(1.0) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::QuadratureNonConvergence {
        delta: f64::NAN,
        tol: rel_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // n-point rule is exact through degree 2n-1.
        let (xs, ws) = gauss_legendre(5);
        let val: f64 = xs.iter().zip(&ws).map(|(&x, &w)| w * x.powi(8)).sum();
        assert_relative_eq!(val, 2.0 / 9.0, epsilon = 1e-14);
        let val9: f64 = xs.iter().zip(&ws).map(|(&x, &w)| w * x.powi(9)).sum();
        assert!(val9.abs() < 1e-15);
    }

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 7, 32, 64, 65] {
            let (_, ws) = gauss_legendre(n);
            assert_relative_eq!(ws.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn cell_integral_of_oscillation() {
        // ∫_Ω e^{-2πi x} dx dy = 0 by orthogonality; ∫_Ω 1 = 1.
        let one = integrate_cell(&|_, _| Complex64::new(1.0, 0.0), 16);
        assert_relative_eq!(one.re, 1.0, epsilon = 1e-14);
        let osc = integrate_cell(
            &|x, _| Complex64::new(0.0, -2.0 * std::f64::consts::PI * x).exp(),
            32,
        );
        assert!(osc.norm() < 1e-13);
    }

    #[test]
    fn converged_integral_certificate() {
        let v = integrate_cell_converged(
            &|x, y| Complex64::new((x * y).cos(), 0.0),
            8,
            1e-12,
        )
        .unwrap();
        // Sharp check against a high-order reference.
        let reference = integrate_cell(&|x, y| Complex64::new((x * y).cos(), 0.0), 128);
        assert_relative_eq!(v.re, reference.re, epsilon = 1e-12);
    }

    #[test]
    fn panel_matches_closed_form() {
        let v = panel(|x| x.exp(), 0.0, 1.0, 24);
        assert_relative_eq!(v, std::f64::consts::E - 1.0, epsilon = 1e-13);
    }
}
