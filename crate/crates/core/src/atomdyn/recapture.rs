use std::f64::consts::PI;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::integrator::{verlet, GaussianTrap};
use super::phase_space::{free_flight, ThermalWidths, THERMAL_BLOCK};
use super::DynamicsError;
use crate::rng;
use crate::tweezer::{AtomSpecies, TrapCharacteristics};

/// Integration steps per radial period used for the trapped interval.
pub const STEPS_PER_PERIOD: f64 = 100.0;

/// Trap-off / on / off timing, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSequence {
    pub first_off: f64,
    pub gap: f64,
    pub second_off: f64,
    pub probe_window: f64,
}

impl PulseSequence {
    pub fn new(first_off: f64, gap: f64, second_off: f64) -> Self {
        Self {
            first_off,
            gap,
            second_off,
            probe_window: 50e-3,
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let all = [self.first_off, self.gap, self.second_off, self.probe_window];
        if all.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(DynamicsError::InvalidParameter(format!(
                "pulse durations must be finite and >= 0: {self:?}"
            )));
        }
        if self.first_off + self.gap + self.second_off > self.probe_window {
            return Err(DynamicsError::InvalidParameter(
                "first_off + gap + second_off exceeds the probe window".into(),
            ));
        }
        Ok(())
    }
}

/// Survival probability against the gap between the two release pulses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecaptureCurve {
    pub gaps: Vec<f64>,
    pub survival: Vec<f64>,
    pub trials_per_point: usize,
    pub survivor_counts: Vec<usize>,
}

impl RecaptureCurve {
    pub fn from_counts(
        gaps: Vec<f64>,
        survivor_counts: Vec<usize>,
        trials_per_point: usize,
    ) -> Self {
        let survival = survivor_counts
            .iter()
            .map(|&c| c as f64 / trials_per_point as f64)
            .collect();
        Self {
            gaps,
            survival,
            trials_per_point,
            survivor_counts,
        }
    }

    pub fn len(&self) -> usize {
        self.gaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaps.is_empty()
    }

    /// Binomial standard error of each point.
    pub fn standard_errors(&self) -> Vec<f64> {
        let n = self.trials_per_point as f64;
        self.survival
            .iter()
            .map(|p| (p * (1.0 - p) / n).sqrt())
            .collect()
    }

    /// Frequency (Hz) of the largest non-DC discrete Fourier component of
    /// the mean-subtracted curve, and the bin width. Assumes uniform gaps.
    pub fn dominant_frequency(&self) -> Option<(f64, f64)> {
        let n = self.len();
        if n < 4 {
            return None;
        }
        let dt = (self.gaps[n - 1] - self.gaps[0]) / (n - 1) as f64;
        if !(dt > 0.0) {
            return None;
        }
        let mean = self.survival.iter().sum::<f64>() / n as f64;
        let bin = 1.0 / (n as f64 * dt);
        let power = |k: usize| {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, p) in self.survival.iter().enumerate() {
                let ph = -2.0 * PI * (k * j) as f64 / n as f64;
                re += (p - mean) * ph.cos();
                im += (p - mean) * ph.sin();
            }
            re * re + im * im
        };
        let best = (1..=n / 2).max_by(|&a, &b| power(a).total_cmp(&power(b)))?;
        Some((best as f64 * bin, bin))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "gap_us,survival,count,trials")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.gaps[i] * 1e6,
                self.survival[i],
                self.survivor_counts[i],
                self.trials_per_point
            )?;
        }
        Ok(())
    }
}

struct Setup {
    trap: GaussianTrap,
    widths: ThermalWidths,
    step: f64,
}

impl Setup {
    fn new(
        trap: &TrapCharacteristics,
        species: &AtomSpecies,
        temperature: f64,
    ) -> Result<Self, DynamicsError> {
        let widths = ThermalWidths::new(temperature, trap, species)?;
        let trap = GaussianTrap::new(trap, species);
        let step = 2.0 * PI / (STEPS_PER_PERIOD * trap.radial_frequency);
        Ok(Self { trap, widths, step })
    }

    /// Runs trial `index` through the sequence; the initial state depends
    /// only on `(seed, index)`, so every gap sees the same atoms.
    fn survives(&self, seq: &PulseSequence, seed: u64, index: u64) -> bool {
        let start = self
            .widths
            .draw(&mut rng::stream(seed, THERMAL_BLOCK, index));
        let s = free_flight(&start, seq.first_off);
        let s = verlet(&s, &self.trap, seq.gap, self.step);
        let s = free_flight(&s, seq.second_off);
        self.trap.energy(&s) < 0.0
    }

    fn count(&self, seq: &PulseSequence, trials: usize, seed: u64) -> usize {
        (0..trials as u64)
            .into_par_iter()
            .filter(|&k| self.survives(seq, seed, k))
            .count()
    }
}

fn check_trials(trials: usize) -> Result<(), DynamicsError> {
    if trials == 0 {
        return Err(DynamicsError::InvalidParameter(
            "trial count must be >= 1".into(),
        ));
    }
    Ok(())
}

/// Fraction of thermally sampled atoms still bound after the sequence.
pub fn simulate_release_recapture(
    trap: &TrapCharacteristics,
    species: &AtomSpecies,
    temperature: f64,
    seq: &PulseSequence,
    trials: usize,
    seed: u64,
) -> Result<f64, DynamicsError> {
    seq.validate()?;
    check_trials(trials)?;
    let setup = Setup::new(trap, species, temperature)?;
    Ok(setup.count(seq, trials, seed) as f64 / trials as f64)
}

#[allow(clippy::too_many_arguments)]
pub fn recapture_curve(
    trap: &TrapCharacteristics,
    species: &AtomSpecies,
    temperature: f64,
    first_off: f64,
    second_off: f64,
    gaps: &[f64],
    trials: usize,
    seed: u64,
) -> Result<RecaptureCurve, DynamicsError> {
    if gaps.is_empty() {
        return Err(DynamicsError::InvalidParameter("gap list is empty".into()));
    }
    if gaps.windows(2).any(|w| w[1] < w[0]) {
        return Err(DynamicsError::InvalidParameter(
            "gaps must be ascending".into(),
        ));
    }
    check_trials(trials)?;
    let setup = Setup::new(trap, species, temperature)?;
    let mut counts = Vec::with_capacity(gaps.len());
    for &gap in gaps {
        let seq = PulseSequence::new(first_off, gap, second_off);
        seq.validate()?;
        counts.push(setup.count(&seq, trials, seed));
    }
    Ok(RecaptureCurve::from_counts(gaps.to_vec(), counts, trials))
}
