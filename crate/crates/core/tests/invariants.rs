//! Property tests for the structural invariants of each module.

use approx::assert_relative_eq;
use itertools::Itertools;
use num_complex::Complex64;
use proptest::prelude::*;

use spikedec::bench::{gen_instance_seeded, ExperimentConfig, SweepRow, TrialRecord};
use spikedec::certificates::{f1_map, theorem1_certificate, theorem2_certificate};
use spikedec::esprit::esprit;
use spikedec::linalg::singular_values;
use spikedec::metrics::{band_energy, matching_distance, min_separation, weighted_error, PsfMetrics};
use spikedec::model::{psf_diagonal, synthesize, vandermonde, CMatrix, GroundTruth, Psf, SamplingGrid};
use spikedec::pgd::{loss, pgd_run, ParamVector, PgdOptions};

fn psf_strategy() -> impl Strategy<Value = Psf> {
    prop_oneof![Just(Psf::Dirac), (0.02f64..0.08).prop_map(|s| Psf::Gaussian { sigma: s })]
}

/// A seeded instance drawn the same way the Monte Carlo harness draws it.
fn instance(psf: Psf, r: usize, l: usize, snr_db: Option<f64>, seed: u64) -> (GroundTruth, spikedec::model::Measurements, ExperimentConfig) {
    let cfg = ExperimentConfig { psf, r, snapshots: l, snr_db, delta_min: 0.15, ..Default::default() };
    let (truth, meas) = gen_instance_seeded(&cfg, seed).unwrap();
    (truth, meas, cfg)
}

fn permute(truth: &GroundTruth, perm: &[usize]) -> GroundTruth {
    let tau = perm.iter().map(|&j| truth.tau[j]).collect();
    let a = CMatrix::from_fn(truth.r(), truth.snapshots(), |k, l| truth.amplitudes[(perm[k], l)]);
    GroundTruth { tau, amplitudes: a, ..truth.clone() }
}

fn shift(truth: &GroundTruth, c: f64) -> GroundTruth {
    let grid = truth.grid().unwrap();
    GroundTruth::new(&grid, truth.tau.iter().map(|t| t + c).collect(), truth.amplitudes.clone()).unwrap()
}

fn rotation(r: usize, k: usize) -> Vec<usize> {
    (0..r).map(|j| (j + k) % r).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vandermonde_is_periodic(tau in prop::collection::vec(0.0f64..1.0, 1..5), n in 1usize..16, period in 0.5f64..3.0) {
        let grid = SamplingGrid::new(n, period).unwrap();
        let tau: Vec<f64> = tau.iter().map(|t| t * period).collect();
        let shifted: Vec<f64> = tau.iter().map(|t| t + period).collect();
        let (a, b) = (vandermonde(&tau, &grid), vandermonde(&shifted, &grid));
        prop_assert!((a - b).camax() <= 1e-12, "periodicity up to the rounding of τ + T");
    }

    #[test]
    fn synthesize_is_linear_in_amplitudes(psf in psf_strategy(), seed in any::<u64>(), re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let (truth, _, cfg) = instance(psf, 3, 2, None, seed);
        let grid = cfg.grid().unwrap();
        let c = Complex64::new(re, im);
        let scaled = GroundTruth { amplitudes: truth.amplitudes.map(|a| a * c), ..truth.clone() };
        let y = synthesize(&truth, &cfg.psf, &grid, None).unwrap().y;
        let y_scaled = synthesize(&scaled, &cfg.psf, &grid, None).unwrap().y;
        prop_assert!((y_scaled - y.map(|v| v * c)).camax() <= 1e-12 * (1.0 + y.camax() * c.norm()));
    }

    #[test]
    fn dirac_gain_leaves_the_vandermonde_spectrum_alone(seed in any::<u64>(), n in 3usize..16, period in 0.5f64..2.0) {
        let grid = SamplingGrid::new(n, period).unwrap();
        let cfg = ExperimentConfig { n, period, psf: Psf::Dirac, r: 2, delta_min: 0.2 * period, ..Default::default() };
        let (truth, _) = gen_instance_seeded(&cfg, seed).unwrap();
        let v = vandermonde(&truth.tau, &grid);
        let gv = psf_diagonal(&Psf::Dirac, &grid).to_matrix() * &v;
        let (sv, sgv) = (singular_values(&v).unwrap(), singular_values(&gv).unwrap());
        prop_assert!((sv.last().unwrap() - sgv.last().unwrap()).abs() <= 1e-12 * sv[0]);
        let e_g = band_energy(&Psf::Dirac, &grid, 0).unwrap();
        assert_relative_eq!(period * e_g, grid.len() as f64, max_relative = 1e-10);
    }

    #[test]
    fn min_separation_ignores_shift_and_order(tau in prop::collection::vec(0.0f64..1.0, 2..6), c in -2.0f64..2.0, k in 0usize..6) {
        let base = min_separation(&tau, 1.0);
        let shifted: Vec<f64> = tau.iter().map(|t| (t + c).rem_euclid(1.0)).collect();
        let rotated = rotation(tau.len(), k).into_iter().map(|j| tau[j]).collect_vec();
        prop_assert!((min_separation(&shifted, 1.0) - base).abs() <= 1e-12);
        prop_assert!((min_separation(&rotated, 1.0) - base).abs() <= 1e-12);
    }

    #[test]
    fn matching_distance_is_a_pseudometric(
        sets in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 3),
        k in 0usize..3,
    ) {
        let (a, b, c) = (&sets[0], &sets[1], &sets[2]);
        let md = |x: &[f64], y: &[f64]| matching_distance(x, y, 1.0).unwrap();
        prop_assert!((md(a, b) - md(b, a)).abs() <= 1e-12);
        prop_assert_eq!(md(a, a), 0.0);
        let relabelled: Vec<f64> = rotation(3, k).into_iter().map(|j| a[j] + 1.0).collect();
        prop_assert!(md(a, &relabelled) <= 1e-12, "same set on the torus");
        prop_assert!(md(a, c) <= md(a, b) + md(b, c) + 1e-12);
    }

    #[test]
    fn dirac_energy_ratio_scales_as_inverse_square_period(n in 1usize..16, period in 0.25f64..4.0) {
        let unit = SamplingGrid::new(n, 1.0).unwrap();
        let dilated = SamplingGrid::new(n, period).unwrap();
        let ratio = |g: &SamplingGrid| band_energy(&Psf::Dirac, g, 1).unwrap() / band_energy(&Psf::Dirac, g, 0).unwrap();
        prop_assert!(ratio(&unit) >= 0.0);
        assert_relative_eq!(ratio(&dilated) * period * period, ratio(&unit), max_relative = 1e-9);
    }

    #[test]
    fn weighted_error_is_label_free(psf in psf_strategy(), seed in any::<u64>(), k in 1usize..4, noise in 0.0f64..0.02) {
        let (truth, _, cfg) = instance(psf, 4, 2, None, seed);
        let metrics = PsfMetrics::compute(&cfg.psf, &cfg.grid().unwrap()).unwrap();
        let tau_hat: Vec<f64> = truth.tau.iter().enumerate().map(|(j, t)| t + noise * (j as f64 - 1.5)).collect();
        let a_hat = truth.amplitudes.map(|a| a * Complex64::new(1.0 + noise, noise));
        let base = weighted_error(&a_hat, &tau_hat, &truth, &metrics).unwrap();
        let perm = rotation(4, k);
        let tau_p = perm.iter().map(|&j| tau_hat[j]).collect_vec();
        let a_p = CMatrix::from_fn(4, 2, |i, l| a_hat[(perm[i], l)]);
        let truth_p = permute(&truth, &rotation(4, 3 - k % 4));
        assert_relative_eq!(weighted_error(&a_p, &tau_p, &truth_p, &metrics).unwrap(), base, max_relative = 1e-12, epsilon = 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn safeguarded_loss_never_increases(psf in psf_strategy(), seed in any::<u64>(), kick in 0.005f64..0.04) {
        let (truth, meas, cfg) = instance(psf, 3, 2, Some(20.0), seed);
        let grid = cfg.grid().unwrap();
        let tau0: Vec<f64> = truth.tau.iter().enumerate().map(|(j, t)| t + kick * if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let theta0 = ParamVector::new(truth.amplitudes.map(|a| a * 0.7), tau0, 1.0).unwrap();
        let opts = PgdOptions { max_iters: 20, ..Default::default() };
        let (theta, trace) = pgd_run(&theta0, &meas, &cfg.psf, &grid, &opts, None).unwrap();
        let losses = trace.records.iter().map(|r| r.loss).collect_vec();
        for w in losses.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12), "loss rose {} → {}", w[0], w[1]);
        }
        prop_assert!(loss(&theta, &meas, &cfg.psf, &grid).unwrap() <= loss(&theta0, &meas, &cfg.psf, &grid).unwrap());
    }

    #[test]
    fn noiseless_esprit_is_exact_and_on_the_unit_circle(psf in psf_strategy(), seed in any::<u64>(), r in 1usize..5, l in 1usize..4) {
        let l = l.max(r);
        let (truth, meas, cfg) = instance(psf, r, l, None, seed);
        let est = esprit(&meas.y, r, &cfg.psf, &cfg.grid().unwrap()).unwrap();
        prop_assert!(matching_distance(&est.tau_hat, &truth.tau, 1.0).unwrap() <= 1e-8);
        for lambda in &est.eigenvalues {
            prop_assert!((lambda.norm() - 1.0).abs() <= 1e-8, "|λ| = {}", lambda.norm());
        }
    }

    #[test]
    fn esprit_output_ignores_spike_order(psf in psf_strategy(), seed in any::<u64>(), k in 1usize..3) {
        let (truth, _, cfg) = instance(psf, 3, 3, Some(30.0), seed);
        let grid = cfg.grid().unwrap();
        let z = spikedec::model::standard_complex_noise(grid.len(), 3, seed) * Complex64::new(0.05, 0.0);
        let y = synthesize(&truth, &cfg.psf, &grid, Some(&z)).unwrap().y;
        let y_perm = synthesize(&permute(&truth, &rotation(3, k)), &cfg.psf, &grid, Some(&z)).unwrap().y;
        let a = esprit(&y, 3, &cfg.psf, &grid).unwrap();
        let b = esprit(&y_perm, 3, &cfg.psf, &grid).unwrap();
        prop_assert!(matching_distance(&a.tau_hat, &b.tau_hat, 1.0).unwrap() <= 1e-10);
    }

    #[test]
    fn basin_and_limit_are_fixed_points(psf in psf_strategy(), seed in any::<u64>(), z_norm in 0.0f64..0.05) {
        let (truth, _, cfg) = instance(psf, 3, 2, None, seed);
        let metrics = PsfMetrics::compute(&cfg.psf, &cfg.grid().unwrap()).unwrap();
        let cert = theorem1_certificate(&truth, &metrics, z_norm, 1.0).unwrap();
        prop_assume!(cert.applicable);
        for x in [cert.basin_radius, cert.gamma_inf] {
            let fx = f1_map(x, &cert, z_norm, cert.u_min).unwrap();
            prop_assert!((fx - x).abs() <= 1e-10, "f1({x}) = {fx}");
        }
    }

    #[test]
    fn certificates_ignore_order_and_global_shift(psf in psf_strategy(), seed in any::<u64>(), k in 1usize..3, c in -1.0f64..1.0) {
        let (truth, meas, cfg) = instance(psf, 3, 2, Some(25.0), seed);
        let grid = cfg.grid().unwrap();
        let metrics = PsfMetrics::compute(&cfg.psf, &grid).unwrap();
        let z = meas.z.as_ref().unwrap();
        let t1 = |t: &GroundTruth| theorem1_certificate(t, &metrics, meas.noise_norm(), 1.0).unwrap();
        let t2 = |t: &GroundTruth| theorem2_certificate(t, &cfg.psf, &metrics, &grid, None).unwrap();
        let (a1, a2) = (t1(&truth), t2(&truth));
        for other in [permute(&truth, &rotation(3, k)), shift(&truth, c)] {
            let (b1, b2) = (t1(&other), t2(&other));
            prop_assert!((a1.separation - b1.separation).abs() <= 1e-12);
            for (x, y) in [(a1.alpha, b1.alpha), (a1.beta, b1.beta), (a1.basin_radius, b1.basin_radius), (a1.gamma_inf, b1.gamma_inf), (a2.denom, b2.denom), (a2.md_bound_factor, b2.md_bound_factor)] {
                prop_assert!(x.is_nan() && y.is_nan() || (x - y).abs() <= 1e-9 * x.abs().max(1.0), "{x} vs {y}");
            }
        }
        // the subspace certificate with noise is invariant under spike order
        let dk = |t: &GroundTruth| theorem2_certificate(t, &cfg.psf, &metrics, &grid, Some(z)).unwrap().dk_bound;
        match (dk(&truth), dk(&permute(&truth, &rotation(3, k)))) {
            (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-9 * x.max(1e-12)),
            (x, y) => prop_assert_eq!(x.is_some(), y.is_some()),
        }
    }

    #[test]
    fn aggregates_bound_median_by_max_and_count_failures(
        mds in prop::collection::vec((0.0f64..0.5, 0.0f64..0.5, any::<bool>()), 1..40),
    ) {
        let records = mds.iter().enumerate().map(|(i, &(e, p, failed))| TrialRecord {
            trial: i,
            seed: i as u64,
            failed,
            failure: failed.then(|| "singular".to_string()),
            md_esprit: if failed { f64::NAN } else { e },
            md_pgd: if failed { f64::NAN } else { p },
            eta_esprit: f64::NAN,
            eta_final: e + p,
            pgd_iters: 0,
            stop: None,
            theorem1_applicable: false,
            theorem2_applicable: false,
            basin_radius: f64::NAN,
            gamma_inf: f64::NAN,
            dk_bound: None,
            subspace_dist: f64::NAN,
            amplitude_error: f64::NAN,
            amplitude_bound: None,
            wall_time_s: 0.0,
        }).collect_vec();
        let row = SweepRow::aggregate(0.1, &records);
        let failed = mds.iter().filter(|m| m.2).count();
        prop_assert_eq!(row.trials, mds.len());
        prop_assert_eq!(row.failed, failed);
        if failed < mds.len() {
            prop_assert!(row.md_esprit_max >= row.md_esprit_median);
            prop_assert!(row.md_pgd_max >= row.md_pgd_median);
        } else {
            prop_assert!(row.md_esprit_max.is_nan() && row.md_pgd_median.is_nan());
        }
    }
}
