//! Least-squares fits used by the diagnostics: straight lines, log-log power
//! laws and the three-parameter blowup law `lambda = C (T - t)^p`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least {need} usable points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("data span {decades:.2} decades, need {need}")]
    InsufficientRange { decades: f64, need: f64 },
    #[error("non-positive value in a logarithmic fit")]
    NonPositive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub rms: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit, FitError> {
    let n = x.len().min(y.len());
    if n < 2 {
        return Err(FitError::TooFewPoints { need: 2, got: n });
    }
    let nf = n as f64;
    let mx = x[..n].iter().sum::<f64>() / nf;
    let my = y[..n].iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 {
        return Err(FitError::TooFewPoints { need: 2, got: 1 });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Ok(LinearFit { slope, intercept, rms: (ss / nf).sqrt() })
}

/// Log-log fit `y = C x^k`; `slope` is the exponent, residual in natural-log units.
pub fn power_law_fit(x: &[f64], y: &[f64]) -> Result<LinearFit, FitError> {
    if x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return Err(FitError::NonPositive);
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupFit {
    pub blowup_time: f64,
    pub exponent: f64,
    pub prefactor: f64,
    /// RMS residual of `ln lambda`.
    pub rms: f64,
    /// Number of samples used.
    pub samples: usize,
    /// Smallest and largest `lambda` in the window.
    pub window: (f64, f64),
}

/// Fits `lambda = C (T - t)^p` with `T > max(t)` by minimizing the log-log
/// residual over `T` (golden section on `ln(T - t_last)`).
pub fn fit_blowup_law(t: &[f64], lambda: &[f64]) -> Result<BlowupFit, FitError> {
    let n = t.len().min(lambda.len());
    if n < 3 {
        return Err(FitError::TooFewPoints { need: 3, got: n });
    }
    if lambda.iter().any(|&l| !(l > 0.0)) {
        return Err(FitError::NonPositive);
    }
    let t_last = t[..n].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let t_first = t[..n].iter().cloned().fold(f64::INFINITY, f64::min);
    let span = (t_last - t_first).max(f64::MIN_POSITIVE);
    let ly: Vec<f64> = lambda[..n].iter().map(|l| l.ln()).collect();
    let fit_at = |s: f64| -> LinearFit {
        let horizon = t_last + s.exp();
        let lx: Vec<f64> = t[..n].iter().map(|&ti| (horizon - ti).ln()).collect();
        linear_fit(&lx, &ly).unwrap_or(LinearFit { slope: 0.0, intercept: 0.0, rms: f64::INFINITY })
    };
    let (s_lo, s_hi) = ((span * 1e-9).ln(), (span * 1e2).ln());
    let grid = 600;
    let mut best = (f64::INFINITY, s_lo);
    for i in 0..=grid {
        let s = s_lo + (s_hi - s_lo) * i as f64 / grid as f64;
        let r = fit_at(s).rms;
        if r < best.0 {
            best = (r, s);
        }
    }
    let h = (s_hi - s_lo) / grid as f64;
    let (mut a, mut b) = (best.1 - h, best.1 + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (fit_at(c).rms, fit_at(d).rms);
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = fit_at(c).rms;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = fit_at(d).rms;
        }
    }
    let s = 0.5 * (a + b);
    let lf = fit_at(s);
    let lmin = lambda[..n].iter().cloned().fold(f64::INFINITY, f64::min);
    let lmax = lambda[..n].iter().cloned().fold(0.0, f64::max);
    Ok(BlowupFit {
        blowup_time: t_last + s.exp(),
        exponent: lf.slope,
        prefactor: lf.intercept.exp(),
        rms: lf.rms,
        samples: n,
        window: (lmin, lmax),
    })
}
