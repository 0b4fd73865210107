//! `spikedec` command-line front end.
//!
//! Exit codes: 0 on success, 1 for configuration or usage errors, 2 when the
//! numerics break down.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use spikedec::bench::{gen_instance, solve, sweep, ExperimentConfig};
use spikedec::certificates::{theorem1_certificate, theorem2_certificate};
use spikedec::esprit::esprit;
use spikedec::metrics::{matching_distance, weighted_error, PsfMetrics};
use spikedec::model::{GroundTruth, Measurements};
use spikedec::pgd::{pgd_run, ParamVector, PgdTrace, Reference};
use spikedec::serde_complex::matrix::rows;
use spikedec::Error;

#[derive(Parser)]
#[command(name = "spikedec", version, about = "Multi-snapshot spike deconvolution: ESPRIT + preconditioned gradient descent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one instance and write truth.json, measurements.json and measurements.csv.
    Synthesize(Common),
    /// Full pipeline (ESPRIT, least squares, PGD) on one instance.
    Solve(Solve),
    /// ESPRIT locations only.
    Esprit(Solve),
    /// Refine a supplied starting point with PGD.
    Pgd(Pgd),
    /// PSF metrics and the certificates of one instance.
    Certify(Solve),
    /// Monte Carlo sweep; writes sweep.csv, sweep.svg, trials.csv, findings.csv.
    Sweep(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (JSON); defaults apply to absent fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed, overriding `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per sweep point, overriding `trials`.
    #[arg(long)]
    trials: Option<usize>,
    /// Machine-readable JSON on stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct Solve {
    #[command(flatten)]
    common: Common,
    /// Measurements JSON as written by `synthesize`; without it an instance
    /// is drawn from the config and seed.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Ground truth JSON used for error reporting with `--input`.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct Pgd {
    #[command(flatten)]
    solve: Solve,
    /// Starting point `{"T", "tau", "amplitudes"}`; a truth.json also works.
    #[arg(long)]
    init: PathBuf,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: if e.is_config() { 1 } else { 2 }, message: e.to_string() }
    }
}

fn config_error(message: String) -> Failure {
    Failure { code: 1, message }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Synthesize(c) => synthesize_cmd(&c),
        Command::Solve(s) => solve_cmd(&s),
        Command::Esprit(s) => esprit_cmd(&s),
        Command::Pgd(p) => pgd_cmd(&p),
        Command::Certify(s) => certify_cmd(&s),
        Command::Sweep(c) => sweep_cmd(&c),
    }
}

fn load_config(c: &Common) -> CliResult<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = c.trials {
        cfg.trials = trials;
    }
    if let Some(out) = &c.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| config_error(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_error(format!("invalid {what} {}: {e}", path.display())))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(Error::from)?;
    }
    Ok(BufWriter::new(File::create(path).map_err(Error::from)?))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> CliResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(Error::from)?;
    writeln!(w).map_err(Error::from)?;
    Ok(())
}

fn print_json(value: &Value) {
    // a closed pipe downstream is not an error worth reporting
    let mut out = std::io::stdout().lock();
    if serde_json::to_writer_pretty(&mut out, value).is_ok() {
        let _ = writeln!(out);
    }
}

/// Measurements plus, when known, the truth behind them.
fn instance(cfg: &ExperimentConfig, s: &Solve) -> CliResult<(Option<GroundTruth>, Measurements)> {
    match &s.input {
        Some(path) => {
            let meas: Measurements = read_json(path, "measurements")?;
            if meas.y.nrows() != meas.grid.len() {
                return Err(config_error(format!(
                    "measurements have {} rows but the grid has {} frequencies",
                    meas.y.nrows(),
                    meas.grid.len()
                )));
            }
            let truth = s.truth.as_deref().map(|p| read_json::<GroundTruth>(p, "ground truth")).transpose()?;
            if let Some(t) = &truth {
                t.validate()?;
            }
            Ok((truth, meas))
        }
        None => {
            let (truth, meas) = gen_instance(cfg, 0)?;
            Ok((Some(truth), meas))
        }
    }
}

fn write_trace(dir: &Path, trace: &PgdTrace) -> CliResult<PathBuf> {
    let path = dir.join("trace.csv");
    let mut w = create(&path)?;
    trace.write_csv(&mut w).map_err(Error::from)?;
    w.flush().map_err(Error::from)?;
    Ok(path)
}

fn synthesize_cmd(c: &Common) -> CliResult<()> {
    let cfg = load_config(c)?;
    let (truth, meas) = gen_instance(&cfg, 0)?;
    let dir = &cfg.out_dir;
    write_json(&dir.join("truth.json"), &truth)?;
    write_json(&dir.join("measurements.json"), &meas)?;
    let mut w = create(&dir.join("measurements.csv"))?;
    meas.write_csv(&mut w).map_err(Error::from)?;
    w.flush().map_err(Error::from)?;
    if c.json {
        print_json(&json!({
            "truth": truth,
            "noise_norm": meas.noise_norm(),
            "files": ["truth.json", "measurements.json", "measurements.csv"],
            "out": dir,
        }));
    } else {
        println!("wrote truth.json, measurements.json, measurements.csv to {}", dir.display());
        println!("tau = {:?}", truth.tau);
    }
    Ok(())
}

fn solve_cmd(s: &Solve) -> CliResult<()> {
    let cfg = load_config(&s.common)?;
    let (truth, meas) = instance(&cfg, s)?;
    let grid = meas.grid;
    let r = truth.as_ref().map_or(cfg.r, GroundTruth::r);
    let metrics = PsfMetrics::compute(&cfg.psf, &grid)?;
    let reference = truth.as_ref().map(|t| Reference { truth: t, metrics: &metrics });
    let sol = solve(&meas, r, &cfg.psf, &grid, &cfg.pgd, reference)?;
    let trace_path = write_trace(&cfg.out_dir, &sol.trace)?;
    let (md, eta) = match &truth {
        Some(t) => (
            Some(matching_distance(&sol.refined.tau, &t.tau, grid.period())?),
            Some(weighted_error(&sol.refined.amplitudes, &sol.refined.tau, t, &metrics)?),
        ),
        None => (None, None),
    };
    if s.common.json {
        print_json(&json!({
            "tau_hat": sol.refined.tau,
            "A_hat": rows(&sol.refined.amplitudes),
            "md": md,
            "eta": eta,
            "trace_path": trace_path,
            "tau_esprit": sol.esprit.tau_hat,
            "iterations": sol.trace.iterations(),
            "stop": sol.trace.stop,
        }));
    } else {
        println!("tau_esprit = {:?}", sol.esprit.tau_hat);
        println!("tau_hat    = {:?}", sol.refined.tau);
        println!("PGD: {} iterations, stop {:?}", sol.trace.iterations(), sol.trace.stop);
        if let (Some(md), Some(eta)) = (md, eta) {
            println!("md = {md:e}, eta = {eta:e}");
        }
        println!("trace: {}", trace_path.display());
    }
    Ok(())
}

fn esprit_cmd(s: &Solve) -> CliResult<()> {
    let cfg = load_config(&s.common)?;
    let (truth, meas) = instance(&cfg, s)?;
    let r = truth.as_ref().map_or(cfg.r, GroundTruth::r);
    let est = esprit(&meas.y, r, &cfg.psf, &meas.grid)?;
    let md = truth.as_ref().map(|t| matching_distance(&est.tau_hat, &t.tau, meas.grid.period())).transpose()?;
    if s.common.json {
        print_json(&json!({
            "tau_hat": est.tau_hat,
            "eigenvalues": est.eigenvalues.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            "singular_values": est.singular_values,
            "subspace_gap": est.subspace_gap,
            "md": md,
        }));
    } else {
        println!("tau_hat = {:?}", est.tau_hat);
        println!("subspace gap = {:e}", est.subspace_gap);
        if let Some(md) = md {
            println!("md = {md:e}");
        }
    }
    Ok(())
}

fn pgd_cmd(p: &Pgd) -> CliResult<()> {
    let s = &p.solve;
    let cfg = load_config(&s.common)?;
    let (truth, meas) = instance(&cfg, s)?;
    let init: ParamVector = read_json(&p.init, "starting point")?;
    let theta0 = ParamVector::new(init.amplitudes, init.tau, init.period)?;
    let metrics = PsfMetrics::compute(&cfg.psf, &meas.grid)?;
    let reference = truth.as_ref().map(|t| Reference { truth: t, metrics: &metrics });
    let (theta, trace) = pgd_run(&theta0, &meas, &cfg.psf, &meas.grid, &cfg.pgd, reference)?;
    let trace_path = write_trace(&cfg.out_dir, &trace)?;
    let (md, eta) = match &truth {
        Some(t) => (
            Some(matching_distance(&theta.tau, &t.tau, meas.grid.period())?),
            Some(weighted_error(&theta.amplitudes, &theta.tau, t, &metrics)?),
        ),
        None => (None, None),
    };
    if s.common.json {
        print_json(&json!({
            "tau_hat": theta.tau,
            "A_hat": rows(&theta.amplitudes),
            "md": md,
            "eta": eta,
            "trace_path": trace_path,
            "iterations": trace.iterations(),
            "stop": trace.stop,
        }));
    } else {
        println!("tau_hat = {:?}", theta.tau);
        println!("{} iterations, stop {:?}", trace.iterations(), trace.stop);
        if let (Some(md), Some(eta)) = (md, eta) {
            println!("md = {md:e}, eta = {eta:e}");
        }
        println!("trace: {}", trace_path.display());
    }
    Ok(())
}

fn certify_cmd(s: &Solve) -> CliResult<()> {
    let cfg = load_config(&s.common)?;
    let (truth, meas) = instance(&cfg, s)?;
    let grid = meas.grid;
    let metrics = PsfMetrics::compute(&cfg.psf, &grid)?;
    let t_eg = grid.period() * metrics.e_g;
    let certs = match &truth {
        Some(t) => {
            let t1 = theorem1_certificate(t, &metrics, meas.noise_norm(), grid.period())?;
            let t2 = theorem2_certificate(t, &cfg.psf, &metrics, &grid, meas.z.as_ref())?;
            Some((t1, t2))
        }
        None => None,
    };
    if s.common.json {
        print_json(&json!({
            "metrics": metrics,
            "T_E_g": t_eg,
            "N": grid.len(),
            "theorem1": certs.as_ref().map(|c| c.0),
            "theorem2": certs.as_ref().map(|c| c.1),
        }));
        return Ok(());
    }
    println!("N = {}", grid.len());
    println!("{:<10} {:>14}", "T·E_g", format!("{t_eg:.6e}"));
    for (name, value) in metrics.table() {
        println!("{name:<10} {:>14}", format!("{value:.6e}"));
    }
    match certs {
        Some((t1, t2)) => {
            println!("\nlocal convergence certificate (applicable: {})", t1.applicable);
            println!("  alpha {:.4e}  beta {:.4e}", t1.alpha, t1.beta);
            println!("  noise condition {:.4e} (needs ≤ 1)", t1.noise_condition_lhs);
            println!("  basin radius {:.4e}  limit error {:.4e}", t1.basin_radius, t1.gamma_inf);
            println!("  separation {:.4} ok: {}", t1.separation, t1.separation_ok);
            println!("\nsubspace certificate (applicable: {})", t2.applicable);
            println!("  denom {:.4e}  dist threshold {:.4e}", t2.denom, t2.dist_threshold);
            println!("  md bound factor {:.4e}", t2.md_bound_factor);
            match t2.dk_bound {
                Some(b) => println!("  Davis-Kahan bound {b:.4e}"),
                None => println!("  Davis-Kahan bound: n/a"),
            }
        }
        None => println!("\nno ground truth supplied; certificates skipped"),
    }
    Ok(())
}

fn sweep_cmd(c: &Common) -> CliResult<()> {
    let cfg = load_config(c)?;
    if cfg.sweep.is_none() {
        return Err(config_error("sweep needs a `sweep` section in the config".into()));
    }
    let table = sweep(&cfg)?;
    table.write_all(&cfg.out_dir)?;
    let failed: usize = table.rows.iter().map(|r| r.failed).sum();
    if c.json {
        print_json(&json!({
            "out": cfg.out_dir,
            "points": table.rows.len(),
            "trials": cfg.trials,
            "failed": failed,
            "findings": table.findings.len(),
            "rows": table.rows,
        }));
    } else {
        println!(
            "{} points × {} trials, {failed} failed, {} findings; wrote {}",
            table.rows.len(),
            cfg.trials,
            table.findings.len(),
            cfg.out_dir.display()
        );
    }
    Ok(())
}
