//! Least-squares fits of power laws.

use crate::error::{invalid, Result};

/// `log y = intercept + slope log x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
}

impl PowerFit {
    /// Prefactor `C` of `y ~ C x^slope`.
    pub fn constant(&self) -> f64 {
        self.intercept.exp()
    }
}

/// Ordinary least squares on `(log x, log y)`; every value must be positive.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<PowerFit> {
    if x.len() != y.len() || x.len() < 2 {
        return invalid("log-log fit needs two or more paired samples");
    }
    if x.iter().chain(y).any(|v| !(v.is_finite() && *v > 0.0)) {
        return invalid("log-log fit needs finite positive samples");
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return invalid("log-log fit needs at least two distinct abscissae");
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok(PowerFit {
        slope,
        intercept: my - slope * mx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_power_law() {
        let x: Vec<f64> = (1..=10).map(|i| i as f64 * 0.7).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(-1.25)).collect();
        let f = loglog_fit(&x, &y).unwrap();
        assert!((f.slope + 1.25).abs() < 1e-12);
        assert!((f.constant() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(loglog_fit(&[1.0], &[1.0]).is_err());
        assert!(loglog_fit(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(loglog_fit(&[1.0, 2.0], &[0.0, 2.0]).is_err());
    }
}
