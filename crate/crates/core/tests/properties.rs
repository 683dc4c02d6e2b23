//! Property tests for the invariants of each module.

use std::f64::consts::PI;

use proptest::prelude::*;
use tweezer::atomdyn::{
    ellipse_stats, evolve_trapped, free_flight, recapture_curve, sample_thermal, scaled_covariance,
    GaussianTrap, PhaseSpaceState, ThermalEnsemble, STEPS_PER_PERIOD,
};
use tweezer::detection::{
    fit_single_gaussian, optimal_threshold, render_ccd, simulate_telegraph, threshold_errors,
    CcdModel, Spot, TelegraphConfig,
};
use tweezer::diffraction::{
    airy_intensity, focal_intensity, strehl_empirical, strehl_from_rms, AberrationSpec, Pupil,
};
use tweezer::tweezer::{
    oscillation_frequencies, potential, trap_depth, waist_from_frequency, AtomSpecies, TrapBeam,
    TrapCharacteristics,
};

const WAVELENGTH: f64 = 850e-9;

fn pupil() -> Pupil {
    Pupil::new(0.5, WAVELENGTH).unwrap()
}

fn paper_trap() -> (TrapBeam, TrapCharacteristics, AtomSpecies) {
    let s = AtomSpecies::rubidium_87();
    let (b, t) =
        TrapCharacteristics::from_radial_frequency(5.6e-3, 2.0 * PI * 119e3, WAVELENGTH, &s)
            .unwrap();
    (b, t, s)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn flux_is_invariant_under_phase_aberrations(
        rms in 0.0..0.1f64,
        coma in 0.0..0.15f64,
        seed in any::<u64>(),
    ) {
        let p = pupil();
        let aberrated = p.with_aberration(AberrationSpec {
            rms_wavefront: rms * WAVELENGTH,
            coma_coefficient: coma * WAVELENGTH,
            spherical_coefficient: 0.0,
            screen_seed: seed,
        }).unwrap();
        let a = focal_intensity(&p, 8e-6, 256, 0.0).unwrap();
        let b = focal_intensity(&aberrated, 8e-6, 256, 0.0).unwrap();
        prop_assert_eq!(a.total_flux, b.total_flux);
        let rel = (b.window_flux() / a.window_flux() - 1.0).abs();
        prop_assert!(rel < 5e-3, "window flux changed by {}", rel);
    }

    /// Strehl ratio of a random screen against the Maréchal estimate. The
    /// bound is checked up to λ/14: since the true ratio is at least
    /// (1 − σ²/2)², the difference exceeds 0.03 before λ/10.
    #[test]
    fn strehl_matches_marechal_for_small_screens(
        inv in 14.0..60.0f64,
        seed in any::<u64>(),
    ) {
        let rms = WAVELENGTH / inv;
        let p = pupil();
        let reference = focal_intensity(&p, 1.5e-6, 64, 0.0).unwrap();
        let map = focal_intensity(&p.with_aberration(AberrationSpec::random(rms, seed)).unwrap(), 1.5e-6, 64, 0.0).unwrap();
        let s = strehl_empirical(&map, &reference).unwrap();
        let m = strehl_from_rms(rms, WAVELENGTH).unwrap();
        prop_assert!((s - m).abs() <= 0.03, "Δ = λ/{inv:.1}: empirical {s}, Maréchal {m}");
        let sigma2 = (2.0 * PI / inv).powi(2);
        prop_assert!(s >= (1.0 - sigma2 / 2.0).powi(2) - 1e-3);
    }

    #[test]
    fn strehl_does_not_increase_with_coma(a in 0.0..0.2f64, b in 0.0..0.2f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let p = pupil();
        let reference = focal_intensity(&p, 1.5e-6, 64, 0.0).unwrap();
        let s = |c: f64| {
            let m = focal_intensity(&p.with_aberration(AberrationSpec::coma(c * WAVELENGTH)).unwrap(), 1.5e-6, 64, 0.0).unwrap();
            strehl_empirical(&m, &reference).unwrap()
        };
        prop_assert!(s(hi) <= s(lo) + 1e-9);
    }
}

#[test]
fn focal_map_matches_airy_within_one_percent_of_peak() {
    let p = pupil();
    let m = focal_intensity(&p, 4e-6, 512, 0.0).unwrap();
    let c = m.size() / 2;
    for j in 0..m.size() {
        for i in 0..m.size() {
            let (x, y) = (m.coordinate(i), m.coordinate(j));
            let r = x.hypot(y);
            if r <= 2e-6 {
                let d = (m.at(i, j) - airy_intensity(r, &p).unwrap()).abs();
                assert!(d <= 0.01 * m.at(c, c), "r = {r}: {d}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn potential_curvature_gives_trap_frequencies(power in 1e-3..20e-3f64, waist in 0.6e-6..3e-6f64) {
        let s = AtomSpecies::rubidium_87();
        let beam = TrapBeam::new(power, waist, WAVELENGTH).unwrap();
        let t = TrapCharacteristics::from_beam(&beam, &s).unwrap();
        let h = 1e-9;
        let u = |r: f64, z: f64| potential(r, z, t.depth, &beam);
        let krr = (u(h, 0.0) - 2.0 * u(0.0, 0.0) + u(-h, 0.0)) / (h * h);
        let kzz = (u(0.0, h) - 2.0 * u(0.0, 0.0) + u(0.0, -h)) / (h * h);
        prop_assert!((krr / (s.mass * t.radial_frequency.powi(2)) - 1.0).abs() < 1e-3);
        prop_assert!((kzz / (s.mass * t.longitudinal_frequency.powi(2)) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn waist_round_trip(power in 1e-3..20e-3f64, waist in 0.5e-6..5e-6f64) {
        let s = AtomSpecies::rubidium_87();
        let beam = TrapBeam::new(power, waist, WAVELENGTH).unwrap();
        let depth = trap_depth(&beam, &s).unwrap();
        let (wr, _) = oscillation_frequencies(depth, &beam, &s).unwrap();
        let back = waist_from_frequency(power, wr, &s, WAVELENGTH).unwrap();
        prop_assert!((back / waist - 1.0).abs() < 1e-12);
    }

    #[test]
    fn depth_rises_with_power_and_falls_with_waist(
        power in 1e-3..20e-3f64,
        waist in 0.5e-6..5e-6f64,
        factor in 1.001..3.0f64,
    ) {
        let s = AtomSpecies::rubidium_87();
        let d = |p: f64, w: f64| trap_depth(&TrapBeam::new(p, w, WAVELENGTH).unwrap(), &s).unwrap();
        prop_assert!(d(power * factor, waist) > d(power, waist));
        prop_assert!(d(power, waist * factor) < d(power, waist));
    }

    #[test]
    fn ellipse_stays_in_range(f_khz in 10.0..500.0f64, t_us in 0.0..20.0f64) {
        let e = ellipse_stats(2.0 * PI * f_khz * 1e3, t_us * 1e-6).unwrap();
        prop_assert!(e.angle > 0.0 && e.angle <= 45.0);
        prop_assert!(e.axis_ratio >= 1.0);
        // Shear preserves the determinant, λ₊λ₋ = 1, so the axis ratio
        // √(λ₊/λ₋) equals λ₊.
        let s = 2.0 * PI * f_khz * 1e3 * t_us * 1e-6;
        let big = 1.0 + 0.5 * s * s + s * (1.0 + 0.25 * s * s).sqrt();
        prop_assert!((e.axis_ratio / big - 1.0).abs() < 1e-9);
    }

    #[test]
    fn likelihood_threshold_minimises_total_error(l0 in 1.0..200.0f64, gap in 1.5..4.0f64) {
        let l1 = l0 * gap;
        let t = optimal_threshold(l0, l1).unwrap();
        let total = |k: u64| {
            let e = threshold_errors(l0, l1, k);
            e.false_positive + e.false_negative
        };
        let best = total(t.threshold);
        for k in (l0.floor() as u64)..=(l1.ceil() as u64) {
            prop_assert!(best <= total(k) * (1.0 + 1e-9), "k = {k} beats k* = {}", t.threshold);
        }
    }

    #[test]
    fn blockade_never_holds_two_atoms(r in 0.0..50.0f64, g in 0.0..5.0f64, seed in any::<u64>()) {
        let trace = simulate_telegraph(&TelegraphConfig {
            loading_rate: r,
            one_body_loss_rate: g,
            blockade: true,
            duration: 20.0,
            seed,
            initial_occupancy: 0,
        }).unwrap();
        prop_assert!(trace.events.iter().all(|e| e.1 <= 1));
        prop_assert!(trace.events.windows(2).all(|w| w[0].0 < w[1].0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn deeply_bound_orbits_conserve_energy(
        fx in -0.2..0.2f64, fy in -0.2..0.2f64, fz in -0.2..0.2f64,
        vx in -0.1..0.1f64, vz in -0.1..0.1f64,
    ) {
        let (_, t, s) = paper_trap();
        let trap = GaussianTrap::new(&t, &s);
        let vscale = t.radial_frequency * t.waist;
        let st = PhaseSpaceState::new(
            [fx * t.waist, fy * t.waist, fz * t.rayleigh_range],
            [vx * vscale, 0.0, vz * vscale],
        );
        let period = 2.0 * PI / t.radial_frequency;
        let out = evolve_trapped(&st, &trap, 100.0 * period, period / STEPS_PER_PERIOD).unwrap();
        let drift = (trap.energy(&out) - trap.energy(&st)).abs() / t.depth;
        prop_assert!(drift <= 1e-4, "drift {}", drift);
    }
}

#[test]
fn free_flight_preserves_phase_space_area() {
    let (_, t, s) = paper_trap();
    let states = sample_thermal(
        &ThermalEnsemble {
            temperature: 50e-6,
            count: 100_000,
            seed: 5,
        },
        &t,
        &s,
    )
    .unwrap();
    let det = |c: [f64; 3]| c[0] * c[2] - c[1] * c[1];
    let before = det(scaled_covariance(&states, t.radial_frequency));
    for dt in [0.5e-6, 1.3e-6, 4e-6] {
        let flown: Vec<_> = states.iter().map(|st| free_flight(st, dt)).collect();
        let after = det(scaled_covariance(&flown, t.radial_frequency));
        assert!(
            (after / before - 1.0).abs() < 0.02,
            "dt = {dt}: {after} vs {before}"
        );
    }
}

#[test]
fn equipartition_and_isotropy() {
    let (_, t, s) = paper_trap();
    let temperature = 50e-6;
    let states = sample_thermal(
        &ThermalEnsemble {
            temperature,
            count: 100_000,
            seed: 8,
        },
        &t,
        &s,
    )
    .unwrap();
    let kt = 1.380_649e-23 * temperature;
    let mean_ke = states
        .iter()
        .map(|st| 0.5 * s.mass * st.velocity.x.powi(2))
        .sum::<f64>()
        / states.len() as f64;
    assert!((mean_ke / (0.5 * kt) - 1.0).abs() < 0.01);
    let c = scaled_covariance(&states, t.radial_frequency);
    assert!((c[0] / c[2] - 1.0).abs() < 0.02);
}

/// At vanishing temperature every atom follows the harmonic map: free
/// flight, rotation at ω in the trap, free flight. Survival is then certain.
#[test]
fn cold_atoms_follow_harmonic_kinematics() {
    let (_, t, s) = paper_trap();
    let trap = GaussianTrap::new(&t, &s);
    let w = t.radial_frequency;
    let (d1, gap, d2) = (0.3e-6, 2.7e-6, 0.4e-6);
    let states = sample_thermal(
        &ThermalEnsemble {
            temperature: 1e-9,
            count: 2000,
            seed: 2,
        },
        &t,
        &s,
    )
    .unwrap();
    for st in &states {
        let a = free_flight(st, d1);
        let b = evolve_trapped(&a, &trap, gap, 2.0 * PI / w / 400.0).unwrap();
        let c = free_flight(&b, d2);
        let x1 = a.position.x * (w * gap).cos() + a.velocity.x / w * (w * gap).sin();
        let v1 = -a.position.x * w * (w * gap).sin() + a.velocity.x * (w * gap).cos();
        let x2 = x1 + v1 * d2;
        let scale = a.position.x.abs().max(a.velocity.x.abs() / w);
        assert!((c.position.x - x2).abs() < 1e-2 * scale);
        assert!(trap.energy(&c) < 0.0);
    }
    let curve = recapture_curve(&t, &s, 1e-9, d1, d2, &[gap], 2000, 2).unwrap();
    assert_eq!(curve.survival[0], 1.0);
}

#[test]
fn recapture_curve_ignores_thread_count() {
    let (_, t, s) = paper_trap();
    let gaps: Vec<f64> = (0..6).map(|k| k as f64 * 1e-6).collect();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| recapture_curve(&t, &s, 50e-6, 1.3e-6, 6.2e-6, &gaps, 3000, 11).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn telegraph_occupancy_matches_stationary_value() {
    let cfg = TelegraphConfig {
        loading_rate: 2.0,
        one_body_loss_rate: 0.5,
        blockade: true,
        duration: 20_000.0,
        seed: 3,
        initial_occupancy: 0,
    };
    let trace = simulate_telegraph(&cfg).unwrap();
    let p1 = cfg.stationary_single_occupancy();
    // Dwell times are ~0.5 s, so 20 000 s holds ~4·10⁴ independent segments.
    let sigma = (p1 * (1.0 - p1) / 2e4).sqrt();
    assert!(
        (trace.time_fraction(1) - p1).abs() < 5.0 * sigma,
        "{} vs {p1}",
        trace.time_fraction(1)
    );
}

#[test]
fn imaging_is_linear_in_photon_budget() {
    let base = CcdModel::default();
    let doubled = CcdModel {
        photon_budget: 2.0 * base.photon_budget,
        ..base
    };
    let truth = [(0.2e-6, -0.1e-6)];
    let mut ratio = Vec::new();
    for seed in 0..20 {
        let a = fit_single_gaussian(
            &render_ccd(&truth, Spot::Gaussian, &base, seed).unwrap(),
            &base,
        )
        .unwrap();
        let b = fit_single_gaussian(
            &render_ccd(&truth, Spot::Gaussian, &doubled, seed).unwrap(),
            &doubled,
        )
        .unwrap();
        ratio.push(b.amplitudes[0] / a.amplitudes[0]);
        for f in [&a, &b] {
            assert!((f.centers[0].0 - truth[0].0).abs() < 4.0 * f.center_errors[0].0);
            assert!((f.waists[0] - base.spot_waist).abs() < 4.0 * f.waist_errors[0]);
        }
    }
    let mean = ratio.iter().sum::<f64>() / ratio.len() as f64;
    assert!((mean - 2.0).abs() < 0.02, "{mean}");
}
