//! Small numerical helpers shared across the crate: finite-difference
//! derivative estimates (with Richardson extrapolation) and log-log slope
//! fitting for convergence-order estimation.

use crate::error::Error;

/// Central first derivative of `f` at `x` with spacing `h`.
pub fn central_first<F: Fn(f64) -> f64>(f: &F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Central first derivative with one level of Richardson extrapolation.
///
/// Combines the `h` and `h/2` stencils to cancel the leading `h^2` error
/// term, giving an `O(h^4)` estimate.
pub fn richardson_first<F: Fn(f64) -> f64>(f: &F, x: f64, h: f64) -> f64 {
    let d_h = central_first(f, x, h);
    let d_h2 = central_first(f, x, h / 2.0);
    (4.0 * d_h2 - d_h) / 3.0
}

/// Central second derivative of `f` at `x` with spacing `h`.
pub fn central_second<F: Fn(f64) -> f64>(f: &F, x: f64, h: f64) -> f64 {
    (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
}

/// Central second derivative with one level of Richardson extrapolation.
pub fn richardson_second<F: Fn(f64) -> f64>(f: &F, x: f64, h: f64) -> f64 {
    let d_h = central_second(f, x, h);
    let d_h2 = central_second(f, x, h / 2.0);
    (4.0 * d_h2 - d_h) / 3.0
}

/// Mixed second partial `d^2 f / du dv` at `(u, v)` from the four-corner
/// stencil with spacing `h`.
pub fn central_mixed<F: Fn(f64, f64) -> f64>(f: &F, u: f64, v: f64, h: f64) -> f64 {
    (f(u + h, v + h) - f(u + h, v - h) - f(u - h, v + h) + f(u - h, v - h)) / (4.0 * h * h)
}

/// Mixed second partial with one level of Richardson extrapolation.
pub fn richardson_mixed<F: Fn(f64, f64) -> f64>(f: &F, u: f64, v: f64, h: f64) -> f64 {
    let d_h = central_mixed(f, u, v, h);
    let d_h2 = central_mixed(f, u, v, h / 2.0);
    (4.0 * d_h2 - d_h) / 3.0
}

/// Least-squares slope of `ln y` against `ln x`.
///
/// Non-positive values cannot enter the log fit; such pairs are skipped.
/// Returns an error when fewer than two usable pairs remain, and `+inf`
/// when every `y` is exactly zero (a perfectly converged sequence).
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64, Error> {
    if xs.len() != ys.len() {
        return Err(Error::Precondition(format!(
            "slope fit needs matching lengths, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if ys.iter().all(|&y| y == 0.0) && !ys.is_empty() {
        return Ok(f64::INFINITY);
    }
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys.iter())
        .filter(|(&x, &y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData(
            "fewer than two positive points for log-log slope fit".to_string(),
        ));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < f64::EPSILON * n * sxx.abs().max(1.0) {
        return Err(Error::InsufficientData(
            "degenerate abscissa in log-log slope fit".to_string(),
        ));
    }
    Ok((n * sxy - sx * sy) / denom)
}

/// Geometric grid of `n` points from `lo` to `hi` inclusive (both positive).
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let step = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (step * i as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_derivative_of_sin() {
        let f = |x: f64| x.sin();
        let d = richardson_first(&f, 1.0, 1e-3);
        assert!((d - 1.0f64.cos()).abs() < 1e-12);
    }

    #[test]
    fn second_derivative_of_exp() {
        let f = |x: f64| x.exp();
        let d = richardson_second(&f, 0.5, 1e-2);
        assert!((d - 0.5f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn mixed_derivative_of_product() {
        let f = |u: f64, v: f64| u * v * (1.0 + u);
        // d2/dudv = 1 + 2u
        let d = richardson_mixed(&f, 0.3, -0.2, 1e-2);
        assert!((d - 1.6).abs() < 1e-9);
    }

    #[test]
    fn slope_of_cubic_is_three() {
        let xs = geometric_grid(1e-4, 1e-2, 9);
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x * x * x).collect();
        let s = loglog_slope(&xs, &ys).unwrap();
        assert!((s - 3.0).abs() < 1e-10);
    }

    #[test]
    fn slope_of_zeros_is_infinite() {
        let xs = [1e-3, 1e-2];
        let ys = [0.0, 0.0];
        assert!(loglog_slope(&xs, &ys).unwrap().is_infinite());
    }

    #[test]
    fn slope_rejects_single_point() {
        assert!(loglog_slope(&[1.0], &[1.0]).is_err());
    }
}
