//! Monte Carlo harness: seeded instance generation, the ESPRIT → least
//! squares → PGD pipeline, sweeps with aggregation, and CSV/SVG output.

mod config;
mod plot;

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{AmplitudeModel, ExperimentConfig, SweepAxis, SweepSpec};
pub use plot::{line_plot_svg, Series};

use crate::certificates::{
    amplitude_error_bound, contraction_violations, gram_lower_bound_check, theorem1_certificate,
    theorem2_certificate, Finding, FindingKind,
};
use crate::error::{Error, Result};
use crate::esprit::{esprit_locations, exact_subspace, ls_amplitudes, signal_subspace, subspace_distance, EspritResult};
use crate::metrics::{min_separation, optimal_matching, weighted_error, PsfMetrics};
use crate::model::{add_noise, synthesize, CMatrix, GroundTruth, Measurements, Psf, SamplingGrid};
use crate::pgd::{pgd_run, ParamVector, PgdOptions, PgdTrace, Reference, StopReason};

/// Rejections allowed before placement under the separation floor gives up.
pub const MAX_REJECTIONS: usize = 10_000;

const TOL_CONTRACTION: f64 = 1e-9;
/// Round-off allowance of the subspace and amplitude domination checks.
const TOL_DOMINATION: f64 = 1e-10;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of trial `index` under `master`. Independent of execution order and
/// of the number of trials, and shared by every point of a sweep.
pub fn trial_seed(master: u64, index: usize) -> u64 {
    splitmix64(master ^ splitmix64(index as u64))
}

/// Everything a trial needs that depends only on the configuration.
#[derive(Debug, Clone)]
pub struct PointContext {
    pub config: ExperimentConfig,
    pub grid: SamplingGrid,
    pub metrics: PsfMetrics,
}

impl PointContext {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let grid = config.grid()?;
        let metrics = PsfMetrics::compute(&config.psf, &grid)?;
        Ok(Self { config: config.clone(), grid, metrics })
    }
}

fn draw_locations(rng: &mut ChaCha8Rng, r: usize, period: f64, delta_min: f64) -> Result<Vec<f64>> {
    for _ in 0..=MAX_REJECTIONS {
        let tau: Vec<f64> = (0..r).map(|_| rng.gen_range(0.0..period)).collect();
        if min_separation(&tau, period) >= delta_min {
            return Ok(tau);
        }
    }
    Err(Error::Generation(format!(
        "no placement of {r} spikes with separation {delta_min} after {MAX_REJECTIONS} rejections"
    )))
}

fn draw_amplitudes(rng: &mut ChaCha8Rng, r: usize, l: usize, model: AmplitudeModel) -> CMatrix {
    // row-major draw so the values do not depend on the storage order
    let mut a = DMatrix::zeros(r, l);
    for j in 0..r {
        for ell in 0..l {
            a[(j, ell)] = match model {
                AmplitudeModel::UnitModulus => Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU)),
                AmplitudeModel::ComplexGaussian => {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                }
            };
        }
    }
    a
}

/// Draws the instance of a given seed: locations by rejection under the
/// separation floor, amplitudes per the model, then noise at the configured SNR.
pub fn gen_instance_seeded(config: &ExperimentConfig, seed: u64) -> Result<(GroundTruth, Measurements)> {
    let grid = config.grid()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = draw_locations(&mut rng, config.r, config.period, config.delta_min)?;
    let a = draw_amplitudes(&mut rng, config.r, config.snapshots, config.amplitude_model);
    let truth = GroundTruth::new(&grid, tau, a)?;
    let clean = synthesize(&truth, &config.psf, &grid, None)?;
    let meas = match config.snr_db {
        None => Measurements { z: Some(CMatrix::zeros(grid.len(), config.snapshots)), ..clean },
        Some(snr) => {
            let (y, z) = add_noise(&clean.y, snr, splitmix64(seed ^ 0x006e_6f69_7365))?;
            Measurements { y, z: Some(z), grid }
        }
    };
    Ok((truth, meas))
}

pub fn gen_instance(config: &ExperimentConfig, trial_index: usize) -> Result<(GroundTruth, Measurements)> {
    gen_instance_seeded(config, trial_seed(config.seed, trial_index))
}

/// Output of the full pipeline on one set of measurements.
#[derive(Debug, Clone)]
pub struct Solution {
    pub esprit: EspritResult,
    /// Least-squares amplitudes at the ESPRIT locations.
    pub a_ls: CMatrix,
    pub refined: ParamVector,
    pub trace: PgdTrace,
}

/// ESPRIT locations, least-squares amplitudes, then PGD refinement.
pub fn solve(
    meas: &Measurements,
    r: usize,
    psf: &Psf,
    grid: &SamplingGrid,
    opts: &PgdOptions,
    reference: Option<Reference<'_>>,
) -> Result<Solution> {
    let subspace = signal_subspace(&meas.y, r)?;
    let esprit = esprit_locations(&subspace, psf, grid)?;
    let a_ls = ls_amplitudes(&esprit.tau_hat, &meas.y, psf, grid)?;
    let theta0 = ParamVector::new(a_ls.clone(), esprit.tau_hat.clone(), grid.period())?;
    let (refined, trace) = pgd_run(&theta0, meas, psf, grid, opts, reference)?;
    Ok(Solution { esprit, a_ls, refined, trace })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub failed: bool,
    pub failure: Option<String>,
    pub md_esprit: f64,
    pub md_pgd: f64,
    pub eta_esprit: f64,
    pub eta_final: f64,
    pub pgd_iters: usize,
    pub stop: Option<StopReason>,
    pub theorem1_applicable: bool,
    pub theorem2_applicable: bool,
    pub basin_radius: f64,
    pub gamma_inf: f64,
    pub dk_bound: Option<f64>,
    /// `dist(Û, U)` against the noiseless signal subspace.
    pub subspace_dist: f64,
    /// `‖A★ − Â‖_F / ‖A★‖_F` for the least-squares amplitudes.
    pub amplitude_error: f64,
    pub amplitude_bound: Option<f64>,
    pub wall_time_s: f64,
}

impl TrialRecord {
    fn empty(trial: usize, seed: u64) -> Self {
        Self {
            trial,
            seed,
            failed: false,
            failure: None,
            md_esprit: f64::NAN,
            md_pgd: f64::NAN,
            eta_esprit: f64::NAN,
            eta_final: f64::NAN,
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
        }
    }
}

/// A trial with the domination checks it failed.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub record: TrialRecord,
    pub findings: Vec<Finding>,
}

pub fn run_trial(config: &ExperimentConfig, trial_index: usize) -> Result<TrialOutcome> {
    run_trial_in(&PointContext::new(config)?, trial_index)
}

/// Runs one trial. Numerical failures of the pipeline are recorded in the
/// returned record; only configuration and generation errors propagate.
pub fn run_trial_in(ctx: &PointContext, trial_index: usize) -> Result<TrialOutcome> {
    let started = Instant::now();
    let cfg = &ctx.config;
    let seed = trial_seed(cfg.seed, trial_index);
    let (truth, meas) = gen_instance_seeded(cfg, seed)?;
    let mut record = TrialRecord::empty(trial_index, seed);
    let mut findings = Vec::new();
    match evaluate(ctx, &truth, &meas, &mut record, &mut findings) {
        Ok(()) => {}
        Err(e) if e.is_config() => return Err(e),
        Err(e) => {
            record.failed = true;
            record.failure = Some(e.to_string());
        }
    }
    for f in &mut findings {
        f.seed = seed;
        f.detail = format!("trial {trial_index}; {}", f.detail);
    }
    record.wall_time_s = started.elapsed().as_secs_f64();
    Ok(TrialOutcome { record, findings })
}

fn evaluate(
    ctx: &PointContext,
    truth: &GroundTruth,
    meas: &Measurements,
    record: &mut TrialRecord,
    findings: &mut Vec<Finding>,
) -> Result<()> {
    let (cfg, grid, metrics) = (&ctx.config, &ctx.grid, &ctx.metrics);
    let period = grid.period();
    let z = meas.z.clone().unwrap_or_else(|| CMatrix::zeros(grid.len(), cfg.snapshots));
    let z_norm = z.norm();
    let separation = min_separation(&truth.tau, period);
    let finding = |kind, measured, bound, detail: String| Finding { seed: 0, kind, measured, bound, detail };

    let t1 = theorem1_certificate(truth, metrics, z_norm, period)?;
    let t2 = theorem2_certificate(truth, &cfg.psf, metrics, grid, Some(&z))?;
    record.theorem1_applicable = t1.applicable;
    record.theorem2_applicable = t2.applicable;
    record.basin_radius = t1.basin_radius;
    record.gamma_inf = t1.gamma_inf;
    record.dk_bound = t2.dk_bound;

    let gram = gram_lower_bound_check(truth, &cfg.psf, grid, metrics)?;
    if !gram.holds {
        findings.push(finding(FindingKind::GramLowerBound, gram.sigma_min_sq, gram.bound, "sigma_min(GV)^2 below bound".into()));
    }

    let subspace = signal_subspace(&meas.y, cfg.r)?;
    let u_exact = exact_subspace(truth, &cfg.psf, grid)?;
    record.subspace_dist = subspace_distance(&subspace.basis, &u_exact)?;
    if let Some(bound) = t2.dk_bound {
        if record.subspace_dist > bound + TOL_DOMINATION {
            findings.push(finding(FindingKind::DavisKahan, record.subspace_dist, bound, "subspace distance".into()));
        }
    }

    let esprit = esprit_locations(&subspace, &cfg.psf, grid)?;
    let matching = optimal_matching(&esprit.tau_hat, &truth.tau, period)?;
    record.md_esprit = matching.distance;
    let a_ls = ls_amplitudes(&esprit.tau_hat, &meas.y, &cfg.psf, grid)?;
    let aligned = CMatrix::from_fn(truth.r(), cfg.snapshots, |k, ell| a_ls[(matching.perm[k], ell)]);
    record.amplitude_error = (&truth.amplitudes - &aligned).norm() / truth.amplitudes.norm();
    record.amplitude_bound = amplitude_error_bound(record.md_esprit, metrics, separation);
    if let Some(bound) = record.amplitude_bound {
        if record.amplitude_error > bound + TOL_DOMINATION {
            findings.push(finding(FindingKind::AmplitudeBound, record.amplitude_error, bound, format!("md {:e}", record.md_esprit)));
        }
    }
    record.eta_esprit = weighted_error(&a_ls, &esprit.tau_hat, truth, metrics)?;

    let theta0 = ParamVector::new(a_ls, esprit.tau_hat, period)?;
    let reference = Reference { truth, metrics };
    let (refined, trace) = pgd_run(&theta0, meas, &cfg.psf, grid, &cfg.pgd, Some(reference))?;
    record.md_pgd = optimal_matching(&refined.tau, &truth.tau, period)?.distance;
    record.pgd_iters = trace.iterations();
    record.stop = Some(trace.stop);
    let etas = trace.etas();
    record.eta_final = etas.last().copied().unwrap_or(record.eta_esprit);

    if t1.applicable && record.eta_esprit < t1.basin_radius {
        for (k, measured, bound) in contraction_violations(&etas, &t1, TOL_CONTRACTION) {
            findings.push(finding(FindingKind::Contraction, measured, bound, format!("step {k}")));
        }
        if record.eta_final > t1.gamma_inf + TOL_CONTRACTION {
            findings.push(finding(FindingKind::LimitError, record.eta_final, t1.gamma_inf, "final eta".into()));
        }
    }
    Ok(())
}

/// Aggregates of one sweep point. Statistics run over the trials that did
/// not fail; they are NaN when every trial failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sweep_value: f64,
    pub trials: usize,
    pub failed: usize,
    pub md_esprit_max: f64,
    pub md_esprit_median: f64,
    pub md_pgd_max: f64,
    pub md_pgd_median: f64,
    pub eta_final_median: f64,
    /// Over the trials whose certificate applies.
    pub gamma_inf_median: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.retain(|x| !x.is_nan());
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn max(v: impl Iterator<Item = f64>) -> f64 {
    v.filter(|x| !x.is_nan()).fold(f64::NAN, f64::max)
}

impl SweepRow {
    pub fn aggregate(sweep_value: f64, records: &[TrialRecord]) -> Self {
        let ok: Vec<&TrialRecord> = records.iter().filter(|r| !r.failed).collect();
        let col = |f: fn(&TrialRecord) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<_>>();
        Self {
            sweep_value,
            trials: records.len(),
            failed: records.len() - ok.len(),
            md_esprit_max: max(ok.iter().map(|r| r.md_esprit)),
            md_esprit_median: median(col(|r| r.md_esprit)),
            md_pgd_max: max(ok.iter().map(|r| r.md_pgd)),
            md_pgd_median: median(col(|r| r.md_pgd)),
            eta_final_median: median(col(|r| r.eta_final)),
            gamma_inf_median: median(records.iter().filter(|r| r.theorem1_applicable).map(|r| r.gamma_inf).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
    /// `records[i]` holds the trials of `rows[i]`, in trial order.
    pub records: Vec<Vec<TrialRecord>>,
    pub findings: Vec<Finding>,
}

pub const SWEEP_CSV_HEADER: &str =
    "sweep_value,trials,failed,md_esprit_max,md_esprit_median,md_pgd_max,md_pgd_median,eta_final_median,gamma_inf_median";

fn run_point(ctx: &PointContext) -> Result<Vec<TrialOutcome>> {
    (0..ctx.config.trials).into_par_iter().map(|i| run_trial_in(ctx, i)).collect()
}

/// Runs every sweep point. Trials of a point run in parallel on
/// `config.threads` workers; results are identical for any thread count.
pub fn sweep(config: &ExperimentConfig) -> Result<SweepTable> {
    config.validate()?;
    let spec = config
        .sweep
        .clone()
        .ok_or_else(|| Error::Config("sweep needs a sweep axis in the config".into()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let mut table = SweepTable { axis: spec.axis, rows: Vec::new(), records: Vec::new(), findings: Vec::new() };
    for value in spec.values() {
        let ctx = PointContext::new(&config.at(spec.axis, value)?)?;
        let outcomes = pool.install(|| run_point(&ctx))?;
        let mut records = Vec::with_capacity(outcomes.len());
        for out in outcomes {
            for mut f in out.findings {
                f.detail = format!("{}={value}; {}", spec.axis.label(), f.detail);
                table.findings.push(f);
            }
            records.push(out.record);
        }
        table.rows.push(SweepRow::aggregate(value, &records));
        table.records.push(records);
    }
    Ok(table)
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map_or(String::new(), num)
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{SWEEP_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                num(r.sweep_value),
                r.trials,
                r.failed,
                num(r.md_esprit_max),
                num(r.md_esprit_median),
                num(r.md_pgd_max),
                num(r.md_pgd_median),
                num(r.eta_final_median),
                num(r.gamma_inf_median)
            )?;
        }
        Ok(())
    }

    /// Per-trial CSV. Wall time is left out so that the file is reproducible.
    pub fn write_trials_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "sweep_value,trial,seed,failed,md_esprit,md_pgd,eta_esprit,eta_final,pgd_iters,\
             theorem1_applicable,gamma_inf,dk_bound,subspace_dist,amplitude_error,amplitude_bound"
        )?;
        for (row, records) in self.rows.iter().zip(&self.records) {
            for t in records {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    num(row.sweep_value),
                    t.trial,
                    t.seed,
                    t.failed,
                    num(t.md_esprit),
                    num(t.md_pgd),
                    num(t.eta_esprit),
                    num(t.eta_final),
                    t.pgd_iters,
                    t.theorem1_applicable,
                    num(t.gamma_inf),
                    opt_num(t.dk_bound),
                    num(t.subspace_dist),
                    num(t.amplitude_error),
                    opt_num(t.amplitude_bound)
                )?;
            }
        }
        Ok(())
    }

    pub fn svg(&self) -> String {
        let series = |name: &str, f: fn(&SweepRow) -> f64| Series {
            name: name.to_string(),
            points: self.rows.iter().map(|r| (r.sweep_value, f(r))).collect(),
        };
        line_plot_svg(
            "matching distance",
            self.axis.label(),
            "md",
            &[
                series("esprit max", |r| r.md_esprit_max),
                series("esprit median", |r| r.md_esprit_median),
                series("esprit+pgd max", |r| r.md_pgd_max),
                series("esprit+pgd median", |r| r.md_pgd_median),
            ],
        )
    }

    /// Writes `sweep.csv`, `sweep.svg`, `trials.csv` and `findings.csv`
    /// into `dir`.
    pub fn write_all(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let file = |name: &str| std::fs::File::create(dir.join(name)).map(std::io::BufWriter::new);
        self.write_csv(file("sweep.csv")?)?;
        std::fs::write(dir.join("sweep.svg"), self.svg())?;
        self.write_trials_csv(file("trials.csv")?)?;
        crate::certificates::write_findings_csv(&self.findings, file("findings.csv")?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(snr: Option<f64>) -> ExperimentConfig {
        ExperimentConfig { trials: 4, snr_db: snr, threads: Some(2), ..Default::default() }
    }

    #[test]
    fn generated_locations_respect_the_floor() {
        let cfg = ExperimentConfig { r: 4, delta_min: 0.2, ..small(None) };
        for i in 0..50 {
            let (truth, _) = gen_instance(&cfg, i).unwrap();
            assert!(min_separation(&truth.tau, 1.0) >= 0.2);
        }
    }

    #[test]
    fn instances_are_deterministic() {
        let cfg = small(Some(10.0));
        let (a, ma) = gen_instance(&cfg, 3).unwrap();
        let (b, mb) = gen_instance(&cfg, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(ma, mb);
        let (c, _) = gen_instance(&cfg, 4).unwrap();
        assert_ne!(a.tau, c.tau);
    }

    #[test]
    fn infeasible_floor_exhausts_rejections() {
        let mut cfg = small(None);
        cfg.r = 6;
        cfg.delta_min = 0.166;
        assert!(cfg.validate().is_ok());
        assert!(matches!(gen_instance(&cfg, 0), Err(Error::Generation(_))));
    }

    #[test]
    fn unit_modulus_dynamic_range_concentrates() {
        let cfg = ExperimentConfig { snapshots: 64, ..small(None) };
        let mut ratios = Vec::new();
        for i in 0..20 {
            let (truth, _) = gen_instance(&cfg, i).unwrap();
            let u = truth.row_norms();
            ratios.push(u.iter().copied().fold(0.0, f64::max) / u.iter().copied().fold(f64::INFINITY, f64::min));
        }
        assert!(ratios.iter().all(|&q| (q - 1.0).abs() < 1e-12));
        let g = ExperimentConfig { amplitude_model: AmplitudeModel::ComplexGaussian, ..cfg };
        for i in 0..20 {
            let (truth, _) = gen_instance(&g, i).unwrap();
            let u = truth.row_norms();
            let q = u.iter().copied().fold(0.0, f64::max) / u.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(q < 1.6, "ratio {q}");
        }
    }

    #[test]
    fn noiseless_pipeline_is_exact() {
        let cfg = ExperimentConfig { psf: Psf::Dirac, ..small(None) };
        for i in 0..4 {
            let out = run_trial(&cfg, i).unwrap();
            assert!(!out.record.failed, "{:?}", out.record.failure);
            assert!(out.record.md_pgd <= 1e-10, "md {}", out.record.md_pgd);
            // the Gram lower bound is a conjecture that the Dirac PSF violates
            assert!(out.findings.iter().all(|f| f.kind == FindingKind::GramLowerBound), "{:?}", out.findings);
        }
    }

    #[test]
    fn singular_gain_marks_trial_failed() {
        let cfg = ExperimentConfig { psf: Psf::TruncatedSinc { bandwidth: 20.0 }, ..small(Some(20.0)) };
        let out = run_trial(&cfg, 0).unwrap();
        assert!(out.record.failed);
        assert!(out.record.failure.unwrap().contains("gain"));
    }

    #[test]
    fn doubling_trials_keeps_first_half() {
        let mut cfg = small(Some(20.0));
        cfg.sweep = Some(SweepSpec { axis: SweepAxis::Snr, values: Some(vec![20.0]) });
        let a = sweep(&cfg).unwrap();
        cfg.trials = 8;
        let b = sweep(&cfg).unwrap();
        // NaN fields defeat PartialEq, so compare the printed form
        let strip = |r: &TrialRecord| format!("{:?}", TrialRecord { wall_time_s: 0.0, ..r.clone() });
        let first: Vec<_> = b.records[0][..4].iter().map(strip).collect();
        let all: Vec<_> = a.records[0].iter().map(strip).collect();
        assert_eq!(first, all);
    }

    #[test]
    fn single_point_sweep_matches_run_trial() {
        let mut cfg = small(Some(30.0));
        cfg.trials = 1;
        cfg.sweep = Some(SweepSpec { axis: SweepAxis::Sigma, values: Some(vec![0.1]) });
        let table = sweep(&cfg).unwrap();
        let direct = run_trial(&cfg.at(SweepAxis::Sigma, 0.1).unwrap(), 0).unwrap().record;
        let row = &table.rows[0];
        assert_eq!(row.md_esprit_max, direct.md_esprit);
        assert_eq!(row.md_pgd_median, direct.md_pgd);
        assert!(row.md_esprit_max >= row.md_esprit_median);
    }

    #[test]
    fn median_and_max_skip_nan() {
        assert_eq!(median(vec![3.0, f64::NAN, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(vec![]).is_nan());
        assert_eq!(max([1.0, f64::NAN, 0.5].into_iter()), 1.0);
    }

    #[test]
    fn sweep_csv_header_and_rows() {
        let mut cfg = small(Some(20.0));
        cfg.trials = 2;
        cfg.sweep = Some(SweepSpec { axis: SweepAxis::Snr, values: Some(vec![10.0, 20.0]) });
        let table = sweep(&cfg).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], SWEEP_CSV_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("1e1,2,"));
    }

    #[test]
    fn config_validation() {
        assert!(ExperimentConfig::from_json("{}").is_ok());
        assert!(matches!(ExperimentConfig::from_json(r#"{"trials": 0}"#), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::from_json(r#"{"bogus": 1}"#), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::from_json(r#"{"r": 7, "delta_min": 0.15}"#), Err(Error::Config(_))));
        let bad_axis = r#"{"psf": {"kind": "dirac"}, "sweep": {"axis": "sigma"}}"#;
        assert!(matches!(ExperimentConfig::from_json(bad_axis), Err(Error::Config(_))));
        let cfg = ExperimentConfig::from_json(r#"{"sweep": {"axis": "snr"}, "snr_db": null, "pgd": {"max_iters": 5}}"#).unwrap();
        assert_eq!(cfg.sweep.unwrap().values().len(), 9);
        assert_eq!(cfg.snr_db, None);
        assert_eq!(cfg.pgd.max_iters, 5);
        assert_eq!(SweepAxis::Sigma.default_values().len(), 15);
        assert!((SweepAxis::Sigma.default_values()[14] - 0.4).abs() < 1e-12);
    }
}
