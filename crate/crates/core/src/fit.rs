//! Least-squares line fits for decay series.

use serde::{Deserialize, Serialize};

use crate::drive::DecayPoint;
use crate::error::{Error, Result};

/// Which points of a series enter a fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FitWindow {
    /// Drop this leading fraction of the points, keep the rest.
    DiscardFraction { fraction: f64 },
    /// Point indices `start..end`.
    Range { start: usize, end: usize },
    /// Points whose time lies in `[t_min, t_max]`.
    Times { t_min: f64, t_max: f64 },
}

impl Default for FitWindow {
    fn default() -> Self {
        Self::DiscardFraction { fraction: 0.2 }
    }
}

impl FitWindow {
    fn select(&self, points: &[DecayPoint]) -> Result<(usize, usize, Vec<usize>)> {
        let n = points.len();
        let (start, end) = match *self {
            Self::DiscardFraction { fraction } => {
                if !(0.0..1.0).contains(&fraction) {
                    return Err(Error::InvalidArgument(format!("discard fraction {fraction} outside [0, 1)")));
                }
                ((fraction * n as f64).floor() as usize, n)
            }
            Self::Range { start, end } => (start, end.min(n)),
            Self::Times { t_min, t_max } => {
                let (lo, hi) = (t_min.ln(), t_max.ln());
                let idx: Vec<usize> = (0..n).filter(|&i| points[i].ln_t >= lo && points[i].ln_t <= hi).collect();
                let (s, e) = (idx.first().copied().unwrap_or(0), idx.last().map_or(0, |&i| i + 1));
                return Ok((s, e, idx));
            }
        };
        Ok((start, end, (start..end.max(start)).collect()))
    }
}

/// Result of fitting `ln Δ` against `ln t` (power law) or `t` (exponential).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Decay rate: `γ` for power laws, `λ` for exponentials (minus the slope).
    pub rate: f64,
    pub intercept: f64,
    /// RMS residual of `ln Δ`.
    pub residual: f64,
    /// Standard error of the rate.
    pub sigma: f64,
    /// Point indices `start..end` that entered the fit.
    pub window: (usize, usize),
    pub n_points: usize,
}

pub const MIN_FIT_POINTS: usize = 4;

/// Ordinary least squares `y = a + b x`; returns `(b, a, rms, σ_b)`.
pub fn least_squares(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64, f64)> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::DimensionMismatch(format!("{} abscissae for {} ordinates", n, y.len())));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two points".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("degenerate abscissae".into()));
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss: f64 = x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum();
    let rms = (ss / nf).sqrt();
    let sigma = if n > 2 { (ss / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok((b, a, rms, sigma))
}

fn fit_with(points: &[DecayPoint], window: FitWindow, x_of: impl Fn(&DecayPoint) -> f64, y_of: impl Fn(&DecayPoint) -> f64) -> Result<FitResult> {
    let (start, end, idx) = window.select(points)?;
    if idx.len() < MIN_FIT_POINTS {
        return Err(Error::InvalidArgument(format!(
            "fit window holds {} points, at least {MIN_FIT_POINTS} required",
            idx.len()
        )));
    }
    let mut x = Vec::with_capacity(idx.len());
    let mut y = Vec::with_capacity(idx.len());
    for &i in &idx {
        let v = y_of(&points[i]);
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!("nonpositive Δ at point {i}")));
        }
        x.push(x_of(&points[i]));
        y.push(v);
    }
    let (b, a, residual, sigma) = least_squares(&x, &y)?;
    Ok(FitResult { rate: -b, intercept: a, residual, sigma, window: (start, end), n_points: idx.len() })
}

/// `Δ ∼ T^{−γ}` from the mean Δ.
pub fn powerlaw_fit(points: &[DecayPoint], window: FitWindow) -> Result<FitResult> {
    fit_with(points, window, |p| p.ln_t, |p| p.ln_delta)
}

/// Power law for a single initial state of a multi-state series.
pub fn powerlaw_fit_state(points: &[DecayPoint], state: usize, window: FitWindow) -> Result<FitResult> {
    if points.iter().any(|p| p.ln_delta_per_state.len() <= state) {
        return Err(Error::InvalidArgument(format!("no initial state with index {state}")));
    }
    fit_with(points, window, |p| p.ln_t, |p| p.ln_delta_per_state[state])
}

/// `Δ ∝ e^{−λ t}`.
pub fn exp_fit(points: &[DecayPoint], window: FitWindow) -> Result<FitResult> {
    fit_with(points, window, |p| p.ln_t.exp(), |p| p.ln_delta)
}
