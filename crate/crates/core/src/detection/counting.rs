use serde::{Deserialize, Serialize};

use super::DetectionError;
use crate::fit::LevenbergMarquardt;

/// Count rates seen by the photon counter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhotonRates {
    /// counts/s with no atom
    pub background_rate: f64,
    /// counts/s added by one atom
    pub atom_rate: f64,
    /// s
    pub bin_time: f64,
}

impl PhotonRates {
    pub fn new(
        background_rate: f64,
        atom_rate: f64,
        bin_time: f64,
    ) -> Result<Self, DetectionError> {
        let r = Self {
            background_rate,
            atom_rate,
            bin_time,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), DetectionError> {
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        if !ok(self.background_rate) || !ok(self.atom_rate) || !ok(self.bin_time) {
            return Err(DetectionError::InvalidParameter(format!(
                "rates and bin time must be >= 0: {self:?}"
            )));
        }
        Ok(())
    }

    /// Mean counts per bin without and with an atom.
    pub fn means(&self) -> (f64, f64) {
        let l0 = self.background_rate * self.bin_time;
        (l0, l0 + self.atom_rate * self.bin_time)
    }
}

/// Fraction of the full sphere inside a cone of half-angle `asin(NA)`.
pub fn solid_angle_fraction(numerical_aperture: f64) -> Result<f64, DetectionError> {
    if !(numerical_aperture > 0.0 && numerical_aperture <= 1.0) {
        return Err(DetectionError::InvalidParameter(format!(
            "numerical aperture must be in (0, 1], got {numerical_aperture}"
        )));
    }
    Ok(0.5 * (1.0 - (1.0 - numerical_aperture * numerical_aperture).sqrt()))
}

/// Product of labelled efficiency factors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyBudget {
    pub terms: Vec<(String, f64)>,
    pub total: f64,
}

pub fn overall_efficiency(terms: &[(&str, f64)]) -> Result<EfficiencyBudget, DetectionError> {
    if let Some((label, v)) = terms.iter().find(|(_, v)| !(*v > 0.0 && *v <= 1.0)) {
        return Err(DetectionError::InvalidParameter(format!(
            "efficiency factor '{label}' must be in (0, 1], got {v}"
        )));
    }
    Ok(EfficiencyBudget {
        terms: terms.iter().map(|(l, v)| (l.to_string(), *v)).collect(),
        total: terms.iter().map(|(_, v)| v).product(),
    })
}

/// `ln k!`: exact sum below 20, Stirling series (error < 1e-15) above.
fn ln_factorial(k: u64) -> f64 {
    if k < 20 {
        return (2..=k).map(|j| (j as f64).ln()).sum();
    }
    let x = k as f64;
    let x2 = x * x;
    x * x.ln() - x
        + 0.5 * (2.0 * std::f64::consts::PI * x).ln()
        + (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * x2)) / x2) / x2) / x
}

fn ln_pmf(k: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * lambda.ln() - lambda - ln_factorial(k)
}

fn ln_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = terms.collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// `ln P(X ≥ k)` for `X ~ Poisson(λ)`.
fn ln_upper_tail(k: u64, lambda: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if (k as f64) <= lambda {
        return (-ln_lower_tail(k, lambda).exp()).ln_1p();
    }
    // Terms decrease geometrically past the mean; stop when negligible.
    let first = ln_pmf(k, lambda);
    let mut terms = vec![first];
    let mut j = k + 1;
    loop {
        let t = ln_pmf(j, lambda);
        terms.push(t);
        if t < first - 50.0 {
            break;
        }
        j += 1;
    }
    ln_sum_exp(terms.into_iter())
}

/// `ln P(X < k)` for `X ~ Poisson(λ)`.
fn ln_lower_tail(k: u64, lambda: f64) -> f64 {
    if k == 0 {
        return f64::NEG_INFINITY;
    }
    if (k as f64) > lambda + 1.0 && lambda > 0.0 {
        let upper = ln_upper_tail(k, lambda);
        if upper > -0.7 {
            return (-upper.exp()).ln_1p();
        }
    }
    ln_sum_exp((0..k).map(|j| ln_pmf(j, lambda)))
}

/// `P(X ≥ k)` for `X ~ Poisson(λ)`.
pub fn poisson_upper_tail(k: u64, lambda: f64) -> f64 {
    ln_upper_tail(k, lambda).exp()
}

/// `P(X < k)` for `X ~ Poisson(λ)`.
pub fn poisson_lower_tail(k: u64, lambda: f64) -> f64 {
    ln_lower_tail(k, lambda).exp()
}

/// Decision threshold between two Poisson means; "atom" iff counts ≥ threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    pub threshold: u64,
    pub false_positive: f64,
    pub false_negative: f64,
    pub log10_false_positive: f64,
    pub log10_false_negative: f64,
}

/// False-positive and false-negative probabilities of threshold `k`.
pub fn threshold_errors(lambda0: f64, lambda1: f64, k: u64) -> Threshold {
    let lfp = ln_upper_tail(k, lambda0);
    let lfn = ln_lower_tail(k, lambda1);
    Threshold {
        threshold: k,
        false_positive: lfp.exp(),
        false_negative: lfn.exp(),
        log10_false_positive: lfp / std::f64::consts::LN_10,
        log10_false_negative: lfn / std::f64::consts::LN_10,
    }
}

/// Likelihood-ratio threshold `ceil((λ1 − λ0)/ln(λ1/λ0))`.
pub fn optimal_threshold(lambda0: f64, lambda1: f64) -> Result<Threshold, DetectionError> {
    if !(lambda0 > 0.0 && lambda1 > lambda0 && lambda1.is_finite()) {
        return Err(DetectionError::InvalidParameter(format!(
            "need 0 < lambda0 < lambda1, got {lambda0}, {lambda1}"
        )));
    }
    let crossing = (lambda1 - lambda0) / (lambda1 / lambda0).ln();
    Ok(threshold_errors(lambda0, lambda1, crossing.ceil() as u64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LifetimeFit {
    /// s
    pub tau: f64,
    pub tau_std: f64,
    pub residual_rms: f64,
}

/// Least-squares fit of `P = exp(−T/τ)` to `(T, P)` pairs.
pub fn lifetime_estimate(points: &[(f64, f64)]) -> Result<LifetimeFit, DetectionError> {
    if points.len() < 3 {
        return Err(DetectionError::InvalidParameter(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|&(t, p)| !(t >= 0.0) || !(p > 0.0 && p <= 1.0))
    {
        return Err(DetectionError::InvalidParameter(
            "times must be >= 0 and probabilities in (0, 1]".into(),
        ));
    }
    // Log-linear estimate through the origin seeds the fit.
    let stt: f64 = points.iter().map(|(t, _)| t * t).sum();
    let stl: f64 = points.iter().map(|(t, p)| t * p.ln()).sum();
    if !(stt > 0.0) || !(stl < 0.0) {
        return Err(DetectionError::NotDecaying);
    }
    let rate0 = -stl / stt;
    let s =
        LevenbergMarquardt::default().minimize(&[rate0], &[rate0], points.len(), |q, out| {
            for (o, (t, p)) in out.iter_mut().zip(points) {
                *o = (-q[0] * t).exp() - p;
            }
        })?;
    let rate = s.params[0];
    if !(rate > 0.0) {
        return Err(DetectionError::NotDecaying);
    }
    Ok(LifetimeFit {
        tau: 1.0 / rate,
        tau_std: s.covariance_diagonal[0].sqrt() / (rate * rate),
        residual_rms: s.residual_rms,
    })
}
