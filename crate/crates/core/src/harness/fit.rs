use serde::{Deserialize, Serialize};

use super::rates::ConvergenceTable;
use crate::error::{Error, Result};

/// Errors below this are treated as round-off and left out of fits.
pub const FIT_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorColumn {
    Rms,
    Max,
    Mean,
}

/// Least-squares fit `log error = intercept - exponent * log cost`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Decay exponent; positive means the error decreases with cost.
    pub exponent: f64,
    /// Natural log of the fitted constant.
    pub intercept: f64,
    /// Root-mean-square of the log residuals.
    pub residual: f64,
    /// Indices of the table rows entering the fit.
    pub rows_used: Vec<usize>,
}

pub fn fit_rate(table: &ConvergenceTable, column: ErrorColumn) -> Result<RateFit> {
    let points: Vec<(usize, f64, f64)> = table
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let e = match column {
                ErrorColumn::Rms => row.error_rms,
                ErrorColumn::Max => row.error_max,
                ErrorColumn::Mean => row.error_mean,
            };
            (i, row.cost as f64, e)
        })
        .filter(|&(_, c, e)| c > 0.0 && e >= FIT_FLOOR && e.is_finite())
        .collect();
    if points.len() < 3 {
        return Err(Error::TooFewRows {
            usable: points.len(),
        });
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.2.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("rate fit needs at least two distinct costs"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(RateFit {
        // Avoid reporting -0.0 for flat data.
        exponent: -slope + 0.0,
        intercept,
        residual,
        rows_used: points.iter().map(|p| p.0).collect(),
    })
}
