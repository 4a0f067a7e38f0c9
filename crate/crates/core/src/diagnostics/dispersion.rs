//! Analytic reference curves for magnetized-plasma spectra.

use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_BESSEL_TERMS: usize = 50;

/// Relative distance to a cyclotron harmonic below which the Bernstein
/// relation is not evaluated.
pub const POLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hybrid {
    pub omega_l: f64,
    pub omega_r: f64,
}

/// `k → 0` cutoffs of the slow and fast extraordinary branches.
pub fn hybrid_frequencies(omega_p: f64, omega_c: f64) -> Result<Hybrid> {
    if !(omega_c > 0.0) || !(omega_p >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need omega_p >= 0 and omega_c > 0, got {omega_p}, {omega_c}"
        )));
    }
    let root = (omega_c * omega_c + 4.0 * omega_p * omega_p).sqrt();
    Ok(Hybrid { omega_l: 0.5 * (root - omega_c), omega_r: 0.5 * (root + omega_c) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ColdModes {
    pub k: f64,
    pub omega_o: f64,
    pub omega_x_fast: f64,
    pub omega_x_slow: f64,
}

/// Ordinary and extraordinary cold-plasma branches at wavenumber `k` (unit
/// speed of light). The extraordinary roots solve
/// `ω² − ω_p²(ω² − ω_p²)/(ω² − ω_h²) = k²` with `ω_h² = ω_p² + ω_c²`.
/// Without plasma all branches lie on the light line.
pub fn cold_plasma_modes(k: f64, omega_p: f64, omega_c: f64) -> Result<ColdModes> {
    if !(k >= 0.0) {
        return Err(Error::InvalidArgument(format!("k must be non-negative, got {k}")));
    }
    let omega_o = (omega_p * omega_p + k * k).sqrt();
    if omega_p == 0.0 {
        return Ok(ColdModes { k, omega_o, omega_x_fast: k, omega_x_slow: k });
    }
    let h = hybrid_frequencies(omega_p, omega_c)?;
    if k == 0.0 {
        return Ok(ColdModes { k, omega_o, omega_x_fast: h.omega_r, omega_x_slow: h.omega_l });
    }
    let wp2 = omega_p * omega_p;
    let wh2 = wp2 + omega_c * omega_c;
    let f = |w: f64| {
        let w2 = w * w;
        w2 - wp2 * (w2 - wp2) / (w2 - wh2) - k * k
    };
    let wh = wh2.sqrt();
    let slow_hi = wh * (1.0 - 1e-15);
    let slow = bisect(&f, h.omega_l, slow_hi)
        .ok_or_else(|| Error::RootBracket(format!("slow X branch at k = {k}: no sign change on [{}, {slow_hi}]", h.omega_l)))?;
    let mut hi = (h.omega_r * h.omega_r + k * k + wp2).sqrt() + 1.0;
    let mut tries = 0;
    while f(hi) <= 0.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::RootBracket(format!("fast X branch at k = {k}: no upper bracket")));
        }
    }
    let fast = bisect(&f, h.omega_r, hi)
        .ok_or_else(|| Error::RootBracket(format!("fast X branch at k = {k}: no sign change on [{}, {hi}]", h.omega_r)))?;
    Ok(ColdModes { k, omega_o, omega_x_fast: fast, omega_x_slow: slow })
}

/// Bisection to machine precision; `None` unless `f` changes sign on `[a, b]`.
pub fn bisect<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> Option<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if !(fa.signum() != fb.signum()) || !fa.is_finite() && !fb.is_finite() {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Some(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// `e^{−λ} I_n(λ)` for `n = 0..=n_max`, by Miller's downward recurrence
/// normalized with `e^{−λ}(I₀ + 2 Σ I_n) = 1`.
pub fn scaled_bessel_i(n_max: usize, lambda: f64) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    if lambda == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let x = lambda.abs();
    let start = n_max.max(x.ceil() as usize) + 30 + (40.0 * (n_max as f64 + x)).sqrt() as usize;
    let mut next = 0.0; // I_{m+1}
    let mut cur = 1e-300; // I_m
    let mut sum = 0.0;
    for m in (1..=start).rev() {
        let prev = next + 2.0 * m as f64 / x * cur;
        if m <= n_max {
            out[m] = cur;
        }
        sum += 2.0 * cur;
        next = cur;
        cur = prev;
        if cur > 1e250 {
            let s = 1e-250;
            cur *= s;
            next *= s;
            sum *= s;
            out.iter_mut().for_each(|v| *v *= s);
        }
    }
    out[0] = cur;
    sum += cur;
    out.iter_mut().for_each(|v| *v /= sum);
    out
}

/// Electrostatic Bernstein relation
/// `1 − (2ω_p² e^{−λ}/λ) Σ_{n=1..N} n² I_n(λ) / (ω² − n²ω_c²)`,
/// `λ = k² v_th² / ω_c²`.
pub fn bernstein_residual(
    omega: f64,
    k: f64,
    omega_p: f64,
    omega_c: f64,
    v_th: f64,
    terms: usize,
) -> Result<f64> {
    if !(omega_c > 0.0) {
        return Err(Error::InvalidArgument("omega_c must be positive".into()));
    }
    for n in 1..=terms {
        if (omega - n as f64 * omega_c).abs() < POLE_TOL * omega_c {
            return Err(Error::PoleProximity { omega, harmonic: n });
        }
    }
    if omega_p == 0.0 {
        return Ok(1.0);
    }
    let lambda = (k * v_th / omega_c).powi(2);
    let w2 = omega * omega;
    if lambda == 0.0 {
        // e^{−λ} I₁(λ)/λ → 1/2; higher harmonics vanish.
        return Ok(1.0 - omega_p * omega_p / (w2 - omega_c * omega_c));
    }
    let bessel = scaled_bessel_i(terms, lambda);
    let mut sum = 0.0;
    for n in 1..=terms {
        let nf = n as f64;
        sum += nf * nf * bessel[n] / (w2 - nf * nf * omega_c * omega_c);
    }
    Ok(1.0 - 2.0 * omega_p * omega_p / lambda * sum)
}

/// Bernstein roots between consecutive harmonics `nω_c` and `(n+1)ω_c` for
/// `n = 1..=harmonics`, when the residual changes sign there.
pub fn bernstein_roots(k: f64, omega_p: f64, omega_c: f64, v_th: f64, harmonics: usize) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for n in 1..=harmonics {
        let lo = (n as f64 + 1e-5) * omega_c;
        let hi = (n as f64 + 1.0 - 1e-5) * omega_c;
        let f = |w: f64| bernstein_residual(w, k, omega_p, omega_c, v_th, DEFAULT_BESSEL_TERMS).unwrap_or(f64::NAN);
        if let Some(w) = bisect(&f, lo, hi) {
            if f(lo).is_finite() && f(hi).is_finite() {
                out.push((n, w));
            }
        }
    }
    out
}
