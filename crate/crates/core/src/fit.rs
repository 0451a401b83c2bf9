//! Least-squares helpers for the scaling-law checks.

/// Ordinary least-squares line y = slope·x + intercept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub residual_rms: f64,
    pub n: usize,
}

/// Fit a straight line; returns None with fewer than two distinct abscissae.
pub fn linear(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    Some(LineFit {
        slope,
        intercept,
        residual_rms: (rss / nf).sqrt(),
        n,
    })
}

/// Fit log y = slope·log x + c over the strictly positive pairs.
pub fn log_log(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let mut lx = Vec::with_capacity(xs.len());
    let mut ly = Vec::with_capacity(ys.len());
    for (&x, &y) in xs.iter().zip(ys) {
        if x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite() {
            lx.push(x.ln());
            ly.push(y.ln());
        }
    }
    linear(&lx, &ly)
}

/// Least-squares slope through the origin, Σxy / Σx².
pub fn through_origin(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn recovers_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let fit = linear(&xs, &ys).unwrap();
        assert_relative_eq!(fit.slope, 2.5, epsilon = 1e-12);
        assert_relative_eq!(fit.intercept, -1.0, epsilon = 1e-12);
        assert!(fit.residual_rms < 1e-12);
    }

    #[test]
    fn log_log_recovers_power_law() {
        let xs = [0.05, 0.1, 0.2, 0.4];
        let ys: Vec<f64> = xs.iter().map(|&x: &f64| 7.0 * x.powi(3)).collect();
        let fit = log_log(&xs, &ys).unwrap();
        assert_relative_eq!(fit.slope, 3.0, epsilon = 1e-10);
    }

    #[test]
    fn degenerate_inputs_give_none() {
        assert!(linear(&[1.0], &[2.0]).is_none());
        assert!(linear(&[1.0, 1.0], &[2.0, 3.0]).is_none());
        assert!(log_log(&[-1.0, -2.0], &[1.0, 1.0]).is_none());
    }

    #[test]
    fn through_origin_exact() {
        let xs = [1.0, 2.0, 3.0];
        let ys = [4.0, 8.0, 12.0];
        assert_relative_eq!(through_origin(&xs, &ys).unwrap(), 4.0, epsilon = 1e-14);
    }
}
