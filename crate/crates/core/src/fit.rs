//! Least-squares fits used to turn asymptotic statements into testable numbers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub exponent_stderr: f64,
    pub prefactor: f64,
    pub points: usize,
}

/// Fit `|y| ≈ c·x^p` by least squares on `(ln x, ln |y|)`.
pub fn power_law_fit(xs: &[f64], ys: &[f64]) -> Result<PowerFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidInput("power-law fit needs at least two paired points".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) || xs.iter().any(|&x| x <= 0.0) || ys.iter().any(|&y| y == 0.0) {
        return Err(Error::Domain("power-law fit needs positive x and nonzero finite y".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.abs().ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("power-law fit needs distinct x values".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = if lx.len() > 2 { (rss / (m - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(PowerFit { exponent: slope, exponent_stderr: stderr, prefactor: intercept.exp(), points: lx.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub power: i32,
    pub value: f64,
    pub stderr: f64,
}

/// Fit `y ≈ Σ_p c_p x^{−p}` over the given powers by linear least squares.
pub fn inverse_power_fit(xs: &[f64], ys: &[f64], powers: &[i32]) -> Result<Vec<Coefficient>> {
    let m = xs.len();
    let p = powers.len();
    if ys.len() != m || m < p || p == 0 {
        return Err(Error::InvalidInput("inverse-power fit needs at least as many points as terms".into()));
    }
    // scale columns to unit norm for conditioning
    let raw = DMatrix::from_fn(m, p, |i, j| xs[i].powi(-powers[j]));
    let scales: Vec<f64> = (0..p).map(|j| raw.column(j).norm()).collect();
    let x = DMatrix::from_fn(m, p, |i, j| raw[(i, j)] / scales[j]);
    let y = DVector::from_column_slice(ys);
    let svd = x.clone().svd(true, true);
    let beta = svd
        .solve(&y, 1e-14)
        .map_err(|e| Error::Domain(format!("least-squares solve failed: {e}")))?;
    let resid = &y - &x * &beta;
    let dof = m.saturating_sub(p);
    let sigma2 = if dof > 0 { resid.norm_squared() / dof as f64 } else { 0.0 };
    let xtx = x.transpose() * &x;
    let cov = xtx
        .try_inverse()
        .ok_or_else(|| Error::Domain("singular normal equations".into()))?
        * sigma2;
    Ok((0..p)
        .map(|j| Coefficient {
            power: powers[j],
            value: beta[j] / scales[j],
            stderr: cov[(j, j)].max(0.0).sqrt() / scales[j],
        })
        .collect())
}
