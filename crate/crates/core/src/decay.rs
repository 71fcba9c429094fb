//! Least-squares fits of decay rates on log–log scales.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Result of fitting log y = c + slope · log x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log y.
    pub rms: f64,
    pub samples: usize,
}

/// Ordinary least squares line fit of `ys` against `xs`.
pub fn line_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    let m = xs.len();
    if m < 2 || ys.len() != m {
        return Err(Error::Domain(format!("line fit needs >= 2 paired samples, got {m}")));
    }
    let mf = m as f64;
    let mx = xs.iter().sum::<f64>() / mf;
    let my = ys.iter().sum::<f64>() / mf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx <= 0.0 {
        return Err(Error::Domain("line fit needs distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / mf)
        .sqrt();
    Ok((slope, intercept, rms))
}

/// Fits y ≈ C x^slope using samples with x in [lo, hi] and y > 0.
pub fn fit_power_law(xs: &[f64], ys: &[f64], lo: f64, hi: f64) -> Result<PowerFit> {
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for (x, y) in xs.iter().zip(ys) {
        if *x >= lo && *x <= hi && *y > 0.0 && y.is_finite() {
            lx.push(x.ln());
            ly.push(y.ln());
        }
    }
    let (slope, intercept, rms) = line_fit(&lx, &ly)?;
    Ok(PowerFit {
        slope,
        intercept,
        rms,
        samples: lx.len(),
    })
}

/// The fit window [lo, hi] obtained by dropping `trim` of the log-span at each end.
pub fn trimmed_window(r_min: f64, r_max: f64, trim: f64) -> (f64, f64) {
    let (a, b) = (r_min.ln(), r_max.ln());
    let span = b - a;
    ((a + trim * span).exp(), (b - trim * span).exp())
}
