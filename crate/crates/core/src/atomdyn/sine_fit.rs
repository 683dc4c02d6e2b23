use std::f64::consts::PI;

use serde::Serialize;

use super::{DynamicsError, RecaptureCurve};
use crate::fit::{FitError, LevenbergMarquardt};

/// `P(t) = C + A·exp(−t/τ)·sin(ω t + φ)` fitted to a recapture curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DampedSineFit {
    /// ω, rad/s.
    pub frequency: f64,
    /// ω/2, rad/s: the survival oscillates at twice the atom's frequency.
    pub atom_frequency: f64,
    /// τ in s; `None` when the fitted envelope does not decay.
    pub damping_time: Option<f64>,
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    /// Variances of `[C, A, 1/τ (1/s), ω (rad/s), φ]`.
    pub covariance_diagonal: [f64; 5],
    pub residual_rms: f64,
    pub iterations: usize,
}

fn model(p: &[f64], t: f64) -> f64 {
    p[0] + p[1] * (-p[2] * t).exp() * (p[3] * t + p[4]).sin()
}

/// Magnitude and phase of `Σ y_k exp(−iωt_k)`.
fn dft(t: &[f64], y: &[f64], omega: f64) -> (f64, f64) {
    let (mut re, mut im) = (0.0, 0.0);
    for (ti, yi) in t.iter().zip(y) {
        re += yi * (omega * ti).cos();
        im -= yi * (omega * ti).sin();
    }
    (re.hypot(im), im.atan2(re))
}

pub fn fit_damped_sine(curve: &RecaptureCurve) -> Result<DampedSineFit, DynamicsError> {
    let n = curve.len();
    if n < 10 {
        return Err(FitError::TooFewPoints { needed: 10, got: n }.into());
    }
    // Work in microseconds so all parameters are of order one.
    let t: Vec<f64> = curve
        .gaps
        .iter()
        .map(|g| (g - curve.gaps[0]) * 1e6)
        .collect();
    let t0 = curve.gaps[0] * 1e6;
    let y = &curve.survival;
    let span = t[n - 1];
    let mean = y.iter().sum::<f64>() / n as f64;
    let spread = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    if !(span > 0.0) || spread < 1e-9 {
        return Err(FitError::Degenerate("flat curve or zero time span".into()).into());
    }

    let detrended: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let nyquist = PI * (n - 1) as f64 / span;
    let d_omega = 0.02 * 2.0 * PI / span;
    let (mut omega0, mut best) = (0.0, (0.0, 0.0));
    let mut w = 2.0 * PI / span;
    while w <= nyquist {
        let c = dft(&t, &detrended, w);
        if c.0 > best.0 {
            best = c;
            omega0 = w;
        }
        w += d_omega;
    }
    if omega0 * span < 1.5 * 2.0 * PI {
        return Err(FitError::Degenerate(format!(
            "curve spans {:.2} periods of its dominant component, need 1.5",
            omega0 * span / (2.0 * PI)
        ))
        .into());
    }
    let a0 = 2.0 * best.0 / n as f64;
    let phi0 = best.1 + 0.5 * PI;

    let residuals = |p: &[f64], out: &mut [f64]| {
        for ((o, ti), yi) in out.iter_mut().zip(&t).zip(y) {
            *o = model(p, *ti) - yi;
        }
    };
    let lm = LevenbergMarquardt::default();
    let mut solution: Option<crate::fit::Solution> = None;
    for rate in [0.0, 1.0 / span, 3.0 / span] {
        let init = [mean, a0, rate, omega0, phi0];
        let scales = [spread.max(1e-3), a0.max(1e-3), 1.0 / span, omega0, 1.0];
        if let Ok(s) = lm.minimize(&init, &scales, n, residuals) {
            if solution.as_ref().is_none_or(|b| s.cost < b.cost) {
                solution = Some(s);
            }
        }
    }
    let s = solution.ok_or(FitError::NoConvergence {
        iterations: lm.max_iterations,
    })?;

    let mut p = s.params.clone();
    if p[1] < 0.0 {
        p[1] = -p[1];
        p[4] += PI;
    }
    if p[3] < 0.0 {
        p[3] = -p[3];
        p[4] = PI - p[4];
    }
    // Refer the phase and amplitude back to the original time origin.
    p[4] -= p[3] * t0;
    p[1] *= (p[2] * t0).exp();
    p[4] = p[4].rem_euclid(2.0 * PI);

    let cov = &s.covariance_diagonal;
    Ok(DampedSineFit {
        frequency: p[3] * 1e6,
        atom_frequency: 0.5 * p[3] * 1e6,
        damping_time: (p[2] > 0.0).then(|| 1e-6 / p[2]),
        amplitude: p[1],
        phase: p[4],
        offset: p[0],
        covariance_diagonal: [cov[0], cov[1], cov[2] * 1e12, cov[3] * 1e12, cov[4]],
        residual_rms: s.residual_rms,
        iterations: s.iterations,
    })
}
