use crate::error::{Error, Result};

/// Samples on each side a point must dominate to count as a maximum.
pub const DEFAULT_MAXIMA_WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct DampingFit {
    /// Slope of `ln(energy)` through the maxima.
    pub slope: f64,
    pub intercept: f64,
    /// `(t, energy)` at the maxima used, refined by parabolic interpolation.
    pub maxima: Vec<(f64, f64)>,
}

/// Least-squares line through `(t_i, ln E_i)` at the first `count` local
/// maxima of a positive series. A sample is a maximum when it strictly
/// exceeds its left neighbours and is not exceeded by its right neighbours
/// within `window` samples; boundary samples never count.
pub fn fit_damping_rate(time: &[f64], energy: &[f64], count: usize, window: usize) -> Result<DampingFit> {
    if time.len() != energy.len() {
        return Err(Error::InvalidArgument("time and energy lengths differ".into()));
    }
    let w = window.max(1);
    let n = energy.len();
    let mut maxima = Vec::new();
    let mut i = w;
    while i + w < n && maxima.len() < count {
        let e = energy[i];
        let is_max = e > 0.0
            && (i - w..i).all(|j| energy[j] < e)
            && (i + 1..=i + w).all(|j| energy[j] <= e);
        if is_max {
            maxima.push(refine(time, energy, i));
            i += w;
        }
        i += 1;
    }
    if maxima.len() < count {
        return Err(Error::InsufficientData { found: maxima.len(), needed: count });
    }
    let m = maxima.len() as f64;
    let tx: f64 = maxima.iter().map(|p| p.0).sum::<f64>() / m;
    let ly: f64 = maxima.iter().map(|p| p.1.ln()).sum::<f64>() / m;
    let sxy: f64 = maxima.iter().map(|p| (p.0 - tx) * (p.1.ln() - ly)).sum();
    let sxx: f64 = maxima.iter().map(|p| (p.0 - tx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(DampingFit { slope, intercept: ly - slope * tx, maxima })
}

/// Vertex of the parabola through `ln E` at `i - 1, i, i + 1` (uniform
/// spacing assumed locally).
fn refine(time: &[f64], energy: &[f64], i: usize) -> (f64, f64) {
    let (a, b, c) = (energy[i - 1].ln(), energy[i].ln(), energy[i + 1].ln());
    let denom = a - 2.0 * b + c;
    if !(denom < 0.0) || !a.is_finite() || !c.is_finite() {
        return (time[i], energy[i]);
    }
    let h = 0.5 * (time[i + 1] - time[i - 1]);
    let s = (0.5 * (a - c) / denom).clamp(-1.0, 1.0);
    let peak = b - 0.25 * (a - c) * s;
    (time[i] + s * h, peak.exp())
}
