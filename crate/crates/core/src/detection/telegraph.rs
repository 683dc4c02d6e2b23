use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DetectionError, PhotonRates};
use crate::rng;

const TELEGRAPH_BLOCK: u64 = 0x7e1e_0000_0000_0000;
const COUNTS_BLOCK: u64 = 0xc0de_0000_0000_0000;
const SURVIVAL_BLOCK: u64 = 0x5a1e_0000_0000_0000;

fn default_occupancy() -> u32 {
    0
}

/// Loading and loss of atoms in the tweezer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelegraphConfig {
    /// R, arrivals/s
    pub loading_rate: f64,
    /// γ, 1/s per atom
    pub one_body_loss_rate: f64,
    /// An arrival into an occupied trap ejects both atoms.
    pub blockade: bool,
    /// s
    pub duration: f64,
    pub seed: u64,
    #[serde(default = "default_occupancy")]
    pub initial_occupancy: u32,
}

impl TelegraphConfig {
    pub fn validate(&self) -> Result<(), DetectionError> {
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        if !ok(self.loading_rate) || !ok(self.one_body_loss_rate) || !ok(self.duration) {
            return Err(DetectionError::InvalidParameter(format!(
                "rates and duration must be finite and >= 0: {self:?}"
            )));
        }
        if self.blockade && self.initial_occupancy > 1 {
            return Err(DetectionError::InvalidParameter(
                "blockaded trap cannot start with more than one atom".into(),
            ));
        }
        Ok(())
    }

    /// Long-time probability of one atom under blockade, `R/(2R + γ)`.
    pub fn stationary_single_occupancy(&self) -> f64 {
        let r = self.loading_rate;
        r / (2.0 * r + self.one_body_loss_rate)
    }
}

/// Piecewise-constant occupancy: `events[k] = (t_k, n)` holds from `t_k`
/// to the next event or the end of the trace. The first event is at t = 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TelegraphTrace {
    pub duration: f64,
    pub events: Vec<(f64, u32)>,
}

impl TelegraphTrace {
    pub fn max_occupancy(&self) -> u32 {
        self.events.iter().map(|e| e.1).max().unwrap_or(0)
    }

    pub fn occupancy_at(&self, t: f64) -> u32 {
        let k = self.events.partition_point(|e| e.0 <= t);
        self.events[k.saturating_sub(1)].1
    }

    /// `(start, end, occupancy)` segments covering `[0, duration]`.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, u32)> + '_ {
        self.events.iter().enumerate().map(|(k, &(t, n))| {
            let end = self.events.get(k + 1).map_or(self.duration, |e| e.0);
            (t, end, n)
        })
    }

    /// Fraction of the trace spent with exactly `n` atoms.
    pub fn time_fraction(&self, n: u32) -> f64 {
        self.segments()
            .filter(|s| s.2 == n)
            .map(|s| s.1 - s.0)
            .sum::<f64>()
            / self.duration
    }

    /// Mean occupancy over `[a, b]`.
    pub fn mean_occupancy(&self, a: f64, b: f64) -> f64 {
        let k0 = self.events.partition_point(|e| e.0 <= a).saturating_sub(1);
        let mut acc = 0.0;
        for (s, e, n) in self.segments().skip(k0) {
            if s >= b {
                break;
            }
            acc += n as f64 * (e.min(b) - s.max(a)).max(0.0);
        }
        acc / (b - a)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "time_s,occupancy")?;
        for (t, n) in &self.events {
            writeln!(out, "{t},{n}")?;
        }
        Ok(())
    }
}

fn run<R: Rng>(cfg: &TelegraphConfig, rng: &mut R) -> TelegraphTrace {
    let mut n = cfg.initial_occupancy;
    let mut t = 0.0;
    let mut events = vec![(0.0, n)];
    loop {
        let loss = cfg.one_body_loss_rate * n as f64;
        let total = cfg.loading_rate + loss;
        if total <= 0.0 {
            break;
        }
        let wait: f64 = Exp1.sample(rng);
        t += wait / total;
        if t >= cfg.duration {
            break;
        }
        let arrival = rng.gen::<f64>() * total < cfg.loading_rate;
        n = match (arrival, cfg.blockade) {
            (true, true) if n == 1 => 0,
            (true, _) => n + 1,
            (false, _) => n - 1,
        };
        events.push((t, n));
    }
    TelegraphTrace {
        duration: cfg.duration,
        events,
    }
}

/// Gillespie simulation of the trap occupancy.
pub fn simulate_telegraph(cfg: &TelegraphConfig) -> Result<TelegraphTrace, DetectionError> {
    cfg.validate()?;
    Ok(run(cfg, &mut rng::stream(cfg.seed, TELEGRAPH_BLOCK, 0)))
}

/// Survival probability of one atom held for each time in `hold_times`,
/// with one-body loss only.
pub fn simulate_survival(
    loss_rate: f64,
    hold_times: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>, DetectionError> {
    if trials == 0 {
        return Err(DetectionError::InvalidParameter(
            "trial count must be >= 1".into(),
        ));
    }
    hold_times
        .iter()
        .enumerate()
        .map(|(point, &hold)| {
            let cfg = TelegraphConfig {
                loading_rate: 0.0,
                one_body_loss_rate: loss_rate,
                blockade: true,
                duration: hold,
                seed,
                initial_occupancy: 1,
            };
            cfg.validate()?;
            let kept = (0..trials as u64)
                .into_par_iter()
                .filter(|&k| {
                    let trace = run(
                        &cfg,
                        &mut rng::stream(seed, SURVIVAL_BLOCK + point as u64, k),
                    );
                    trace.events.last().is_some_and(|e| e.1 == 1)
                })
                .count();
            Ok((hold, kept as f64 / trials as f64))
        })
        .collect()
}

/// Photon counts per time bin with the bin's mean occupancy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinnedCounts {
    pub bin_time: f64,
    pub occupancy: Vec<f64>,
    pub counts: Vec<u64>,
}

impl BinnedCounts {
    /// `(bins, mean, variance)` of counts in bins whose mean occupancy is
    /// exactly `occupancy` (no transition inside the bin).
    pub fn mode_statistics(&self, occupancy: f64) -> Option<(usize, f64, f64)> {
        let sel: Vec<f64> = self
            .counts
            .iter()
            .zip(&self.occupancy)
            .filter(|(_, &o)| o == occupancy)
            .map(|(&c, _)| c as f64)
            .collect();
        if sel.len() < 2 {
            return None;
        }
        let n = sel.len() as f64;
        let mean = sel.iter().sum::<f64>() / n;
        let var = sel.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Some((sel.len(), mean, var))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "bin_index,counts")?;
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(out, "{i},{c}")?;
        }
        Ok(())
    }
}

fn poisson_draw<R: Rng>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean)
        .map(|p| p.sample(rng) as u64)
        .unwrap_or(0)
}

/// Poisson counts for the first `n_bins` bins of `trace`; each bin's rate
/// is integrated over the exact time the trap held each atom number.
pub fn bin_counts(
    trace: &TelegraphTrace,
    rates: &PhotonRates,
    n_bins: usize,
    seed: u64,
) -> Result<BinnedCounts, DetectionError> {
    rates.validate()?;
    if !(rates.bin_time > 0.0) {
        return Err(DetectionError::InvalidParameter(
            "bin time must be positive".into(),
        ));
    }
    if n_bins as f64 * rates.bin_time > trace.duration * (1.0 + 1e-9) {
        return Err(DetectionError::InvalidParameter(format!(
            "{n_bins} bins of {} s exceed the trace duration {} s",
            rates.bin_time, trace.duration
        )));
    }
    let occupancy: Vec<f64> = (0..n_bins)
        .map(|i| {
            let a = i as f64 * rates.bin_time;
            trace.mean_occupancy(a, a + rates.bin_time)
        })
        .collect();
    let counts = occupancy
        .par_iter()
        .enumerate()
        .map(|(i, &occ)| {
            let mean = (rates.background_rate + rates.atom_rate * occ) * rates.bin_time;
            poisson_draw(mean, &mut rng::stream(seed, COUNTS_BLOCK, i as u64))
        })
        .collect();
    Ok(BinnedCounts {
        bin_time: rates.bin_time,
        occupancy,
        counts,
    })
}

/// Histogram of counts in unit-width bins starting at zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountHistogram {
    /// `bin_edges[k]..bin_edges[k + 1]` is the bin of count `k`.
    pub bin_edges: Vec<u64>,
    pub frequencies: Vec<u64>,
    /// Mean occupancy of the time bins that landed in each count bin.
    pub occupancy_labels: Option<Vec<Option<f64>>>,
}

impl CountHistogram {
    pub fn from_counts(counts: &[u64], occupancy: Option<&[f64]>) -> Self {
        let top = counts.iter().copied().max().unwrap_or(0) as usize;
        let mut frequencies = vec![0u64; top + 1];
        let mut occ_sum = vec![0.0; top + 1];
        for (i, &c) in counts.iter().enumerate() {
            frequencies[c as usize] += 1;
            if let Some(o) = occupancy {
                occ_sum[c as usize] += o[i];
            }
        }
        let occupancy_labels = occupancy.map(|_| {
            frequencies
                .iter()
                .zip(&occ_sum)
                .map(|(&f, &s)| (f > 0).then(|| s / f as f64))
                .collect()
        });
        Self {
            bin_edges: (0..=top as u64 + 1).collect(),
            frequencies,
            occupancy_labels,
        }
    }

    pub fn total(&self) -> u64 {
        self.frequencies.iter().sum()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "counts,frequency,mean_occupancy")?;
        for (k, f) in self.frequencies.iter().enumerate() {
            let label = self
                .occupancy_labels
                .as_ref()
                .and_then(|l| l[k])
                .map(|v| v.to_string())
                .unwrap_or_default();
            writeln!(out, "{k},{f},{label}")?;
        }
        Ok(())
    }
}

pub fn trace_to_histogram(
    trace: &TelegraphTrace,
    rates: &PhotonRates,
    n_bins: usize,
    seed: u64,
) -> Result<CountHistogram, DetectionError> {
    let binned = bin_counts(trace, rates, n_bins, seed)?;
    Ok(CountHistogram::from_counts(
        &binned.counts,
        Some(&binned.occupancy),
    ))
}
