//! Batch commands behind the `henderson` binary. Each returns a process exit
//! code; errors are reported on stderr.
//!
//! Exit codes: 0 success, 1 runtime failure or failed check, 2 infeasible
//! density, 3 bad configuration or input file, 4 inversion not converged.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use crate::checks::{run_suite, SuiteOptions};
use crate::config::{RunConfig, StatePoint};
use crate::entropy::{Target, MU_TOL};
use crate::error::{Error, Result};
use crate::grid::{integrate, GridFunction};
use crate::imc::{run_imc_with, StopReason};
use crate::oracle::{box_correlations, box_partition_function, box_tail_bound, tonks_reference, TonksInput};
use crate::potentials::{pmf_initial_guess, stability_bound, PairPotential, Shape, PMF_FLOOR};
use crate::thermo::{forward, pair_correlation, solve_mu_star, ThermoState};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Forward,
    Invert,
    Check,
    Oracle,
}

#[derive(Clone, Debug, Default)]
pub struct Options {
    pub config: PathBuf,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Fault injection for the check suite: breaks the symmetry of `F'`.
    pub corrupt_jacobian: bool,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::DensityOutOfRange { .. } => EXIT_INFEASIBLE,
        Error::Parse(_) | Error::MissingKey(_) | Error::Io { .. } | Error::GridMismatch(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

/// Runs one command and maps the outcome to an exit code.
pub fn run(cmd: Command, opts: &Options) -> i32 {
    let result = RunConfig::read(&opts.config).and_then(|mut cfg| {
        if let Some(seed) = opts.seed {
            cfg.seed = seed;
        }
        let out = opts
            .output
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        match cmd {
            Command::Forward => cmd_forward(&cfg, &out),
            Command::Invert => cmd_invert(&cfg, &out),
            Command::Check => cmd_check(&cfg, &out, opts.corrupt_jacobian),
            Command::Oracle => cmd_oracle(&cfg, &out),
        }
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// State at the configured `μ`, or at the `μ` matching the configured density.
fn state_at(cfg: &RunConfig, p: &PairPotential, fallback: Option<StatePoint>) -> Result<ThermoState> {
    match cfg.state.or(fallback).ok_or_else(|| Error::MissingKey("mu".into()))? {
        StatePoint::Mu(mu) => forward(p, mu, cfg.trunc),
        StatePoint::Density(rho) => Ok(solve_mu_star(p, rho, cfg.trunc, MU_TOL)?.1),
    }
}

#[derive(Serialize)]
struct ForwardSummary<'a> {
    config_sha256: &'a str,
    n_max: usize,
    z: f64,
    mu: f64,
    rho: f64,
    beta_p: f64,
    d_mu_rho: f64,
    int_omega2: f64,
}

/// Writes `rdf.dat` (`ρ⁽²⁾/ρ²`), `omega2.dat` and `summary.json`.
pub fn cmd_forward(cfg: &RunConfig, out: &Path) -> Result<i32> {
    let p = cfg.build_potential()?;
    let s = state_at(cfg, &p, None)?;
    let header = cfg.header();
    let rdf = pair_correlation(&s).scaled(1.0 / (s.rho * s.rho));
    rdf.write_table(out.join("rdf.dat"), &header)?;
    s.omega2.write_table(out.join("omega2.dat"), &header)?;
    let summary = ForwardSummary {
        config_sha256: &cfg.hash,
        n_max: cfg.trunc.n_max(),
        z: s.z,
        mu: s.mu,
        rho: s.rho,
        beta_p: s.beta_p,
        d_mu_rho: s.d_mu_rho,
        int_omega2: integrate(&s.omega2),
    };
    write_json(&out.join("summary.json"), &summary)?;
    println!("rho = {:.12e}, beta_p = {:.12e}, mu = {:.12e}", s.rho, s.beta_p, s.mu);
    Ok(EXIT_OK)
}

/// `u` on the grid, `inf` inside the core.
fn u_table(p: &PairPotential) -> GridFunction {
    GridFunction::from_vec(*p.spec(), p.u_values())
}

/// Runs the regularized Newton iteration against the configured target and
/// writes `iterates.jsonl`, per-iterate tables, `u_final.dat` and `invert.json`.
pub fn cmd_invert(cfg: &RunConfig, out: &Path) -> Result<i32> {
    let rho_star = cfg.rho_star.ok_or_else(|| Error::MissingKey("target.rho_star".into()))?;
    let rdf_path = cfg.rdf_path.as_ref().ok_or_else(|| Error::MissingKey("target.rdf_path".into()))?;
    if !(rho_star > 0.0) {
        return Err(Error::DensityOutOfRange {
            rho_star,
            reason: "density must be positive".into(),
        });
    }
    let rdf = GridFunction::read_table(cfg.grid, rdf_path)?;
    let target = Target::new(rho_star, rdf.scaled(rho_star * rho_star))?;
    let start = match cfg.potential {
        Some(_) => cfg.build_potential()?,
        None => pmf_initial_guess(&target.rho2_star, rho_star, cfg.beta, PMF_FLOOR)?,
    };
    let header = cfg.header();
    let log_path = out.join("iterates.jsonl");
    let mut log = fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let outcome = run_imc_with(&start, &target, &cfg.imc, |rec, p, e| {
        let k = rec.iter;
        let u_name = format!("u_{k:04}.dat");
        u_table(p).write_table(out.join(&u_name), &header)?;
        e.grad.write_table(out.join(format!("grad_{k:04}.dat")), &header)?;
        e.state
            .rho2
            .scaled(1.0 / (rho_star * rho_star))
            .write_table(out.join(format!("rdf_model_{k:04}.dat")), &header)?;
        let mut rec = rec.clone();
        rec.u_path = Some(u_name.clone());
        let line = serde_json::to_string(&rec).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(log, "{line}").map_err(|e| Error::io(&log_path, e))?;
        Ok(Some(u_name))
    })?;
    u_table(&outcome.potential).write_table(out.join("u_final.dat"), &header)?;
    let last = outcome.iterates.last().expect("record of the start");
    write_json(
        &out.join("invert.json"),
        &json!({
            "config_sha256": cfg.hash,
            "n_max": cfg.trunc.n_max(),
            "stop": outcome.stop,
            "steps": outcome.steps(),
            "grad_norm": last.grad_norm,
            "residual_norm": last.residual_norm,
            "mu_star": last.mu_star,
            "phi": last.phi,
        }),
    )?;
    println!(
        "stop {:?} after {} steps, sup|grad Phi| = {:.3e}",
        outcome.stop,
        outcome.steps(),
        last.grad_norm
    );
    Ok(match outcome.stop {
        StopReason::Converged => EXIT_OK,
        StopReason::MaxIters | StopReason::LineSearch => EXIT_NOT_CONVERGED,
    })
}

/// Runs the property suite; prints a table and writes `check.json`.
pub fn cmd_check(cfg: &RunConfig, out: &Path, corrupt_jacobian: bool) -> Result<i32> {
    let clock = Instant::now();
    let p = cfg.build_potential()?;
    let s = state_at(cfg, &p, Some(StatePoint::Mu(0.05f64.ln() / cfg.beta)))?;
    let opts = SuiteOptions {
        mu: s.mu,
        probes: cfg.probes,
        pairs: cfg.pairs,
        seed: cfg.seed,
        oracle: cfg.oracle,
        corrupt_jacobian,
    };
    let results = run_suite(&p, cfg.trunc, &opts)?;
    for r in &results {
        println!("{}", r.line());
    }
    let all = results.iter().all(|r| r.pass);
    write_json(
        &out.join("check.json"),
        &json!({
            "config_sha256": cfg.hash,
            "n_max": cfg.trunc.n_max(),
            "seed": cfg.seed,
            "z": s.z,
            "mu": s.mu,
            "all_pass": all,
            "results": results,
        }),
    )?;
    println!(
        "{} of {} checks passed in {:.1} s",
        results.iter().filter(|r| r.pass).count(),
        results.len(),
        clock.elapsed().as_secs_f64()
    );
    Ok(if all { EXIT_OK } else { EXIT_FAILURE })
}

/// Box quadrature against the series at the configured state; writes `oracle.json`.
pub fn cmd_oracle(cfg: &RunConfig, out: &Path) -> Result<i32> {
    let p = cfg.build_potential()?;
    let s = state_at(cfg, &p, None)?;
    let b = cfg.oracle;
    let xi = box_partition_function(&p, s.mu, &b)?;
    let stability = stability_bound(&p, b.n_cap.max(2), 2000, cfg.seed)?;
    let spec = *p.spec();
    let mut pairs = Vec::new();
    let mut worst: f64 = 0.0;
    let h = spec.spacing();
    for d in [0.5, 1.25, 1.5, 2.0, 3.0] {
        let d = (d / h).round() * h;
        if 0.5 * d > 0.25 * b.length || d > spec.extent() {
            continue;
        }
        let t = box_correlations(&p, s.mu, &b, &[-0.5 * d, 0.5 * d])?;
        let w_box = t.rho(3) - t.rho(1) * t.rho(2);
        let w_series = s.omega2.at(spec.index_of(d).expect("node separation"));
        worst = worst.max((t.rho(1) - s.rho).abs()).max((w_box - w_series).abs());
        pairs.push(json!({
            "separation": d,
            "rho_box": t.rho(1),
            "omega2_box": w_box,
            "omega2_series": w_series,
        }));
    }
    let tonks = match p.shape() {
        Some(Shape::HardRod { sigma, tail_depth, .. }) if *tail_depth == 0.0 => {
            Some(tonks_reference(TonksInput::Activity(s.z), *sigma)?)
        }
        _ => None,
    };
    let report = json!({
        "config_sha256": cfg.hash,
        "n_max": cfg.trunc.n_max(),
        "z": s.z,
        "mu": s.mu,
        "box": b,
        "xi": xi,
        "rho_series": s.rho,
        "beta_p_series": s.beta_p,
        "pairs": pairs,
        "max_abs_diff": worst,
        "stability_b": stability.b,
        "tail_bound": box_tail_bound(&p, s.mu, &b, stability.b),
        "tonks": tonks,
    });
    write_json(&out.join("oracle.json"), &report)?;
    println!("Xi = {xi:.12e}, max |series - box| = {worst:.3e}");
    Ok(EXIT_OK)
}
