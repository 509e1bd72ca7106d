use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Least-squares fit of log y = exponent · log x + intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Largest absolute residual in log y.
    pub residual_max: f64,
    pub points_used: usize,
}

pub fn fit_exponent(x: &[f64], y: &[f64]) -> CliResult<FitResult> {
    if x.len() != y.len() {
        return Err(CliError::Precondition("x and y differ in length".into()));
    }
    if x.len() < 4 {
        return Err(CliError::Precondition(format!("a fit needs at least 4 points, got {}", x.len())));
    }
    if let Some((a, b)) = x.iter().zip(y).find(|(a, b)| !(**a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())) {
        return Err(CliError::Precondition(format!("non-positive pair ({a}, {b})")));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = ly.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx <= 1e-300 * n || sxx <= f64::EPSILON * lx.iter().map(|a| a * a).sum::<f64>() {
        return Err(CliError::Precondition("rank-deficient fit: all x coincide".into()));
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let residuals: Vec<f64> = lx.iter().zip(&ly).map(|(a, b)| b - (intercept + exponent * a)).collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(FitResult {
        exponent,
        intercept,
        r_squared,
        residual_max: residuals.iter().fold(0.0, |m, r| m.max(r.abs())),
        points_used: x.len(),
    })
}
