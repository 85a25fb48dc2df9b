//! `tvflow`: command-line front end for the TV–Wasserstein flow solvers.
//!
//! Every failure prints a JSON object `{"error": kind, "message": ..., "exit_code": ...}`
//! on stderr. Exit codes: 0 success, 2 configuration / input error,
//! 3 solver failure, 4 I/O or file-format error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use tvflow_core::config::parse_config;
use tvflow_core::diagnostics::{
    convex_monotonicity, decay_envelope, dissipation_check, gn_check, holder_modulus, ConvexTestFunction,
    MetricCurveSamples,
};
use tvflow_core::io::{
    execute_run, load_density, load_step, load_trajectory, load_vector_field, prepare_output_dir, read_density_csv,
    read_manifest, read_scalar_csv, read_vector_csv, write_density_csv, write_json, write_scalar_csv,
    write_vector_csv,
};
use tvflow_core::jko::{jko_step, maximum_principle_check, step_regularity_estimates};
use tvflow_core::ot::{w2_entropic, w2_exact_1d, w2_histogram_1d, w2_lp_oracle, EntropicConfig};
use tvflow_core::rof::{rof_div_estimate, rof_h1_estimate, rof_objective};
use tvflow_core::tv::{check_drhodz, check_levelsets, CertifiedPair, GAP_FLOOR};
use tvflow_core::{
    check_pair, rof_solve, total_variation, Density, Error, JkoConfig, PenaltyBarrier, RofConfig, ScalarField,
    VectorField,
};

#[derive(Parser)]
#[command(name = "tvflow", version, about = "TV Wasserstein gradient flow on the flat torus")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the ROF problem `min J(u) + ½‖u − g‖²` with a certified dual.
    Rof {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        gap_tol: f64,
        #[arg(long, default_value_t = 200_000)]
        max_iters: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Squared Wasserstein distance between two densities.
    W2 {
        #[arg(long, value_enum, default_value_t = Method::Exact1d)]
        method: Method,
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        /// Entropic regularisation (entropic method only).
        #[arg(long, default_value_t = 1e-3)]
        sinkhorn_eps: f64,
        /// Also write the potential on `mu` to this CSV file.
        #[arg(long)]
        phi_out: Option<PathBuf>,
    },
    /// One JKO step from a density.
    Step {
        #[arg(long)]
        rho: PathBuf,
        #[arg(long)]
        tau: f64,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[arg(long, default_value_t = 0.05)]
        c: f64,
        #[arg(long, default_value_t = 1e-4)]
        residual_tol: f64,
        #[arg(long, default_value_t = 20_000)]
        outer_iters: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Run a flow described by a TOML configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `[output] dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Check a (density, dual field) pair.
    Certify {
        /// Density or step checkpoint (`.tvck`) or CSV.
        #[arg(long)]
        rho: PathBuf,
        /// Dual field checkpoint or CSV; defaults to the `z` of a step checkpoint.
        #[arg(long)]
        z: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-9)]
        tol_z: f64,
        /// Gap tolerance relative to `J(ρ)`.
        #[arg(long, default_value_t = 1e-6)]
        tol_gap_rel: f64,
        /// Number of interior level-set thresholds to test.
        #[arg(long, default_value_t = 9)]
        levels: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Theorem-level checks on a run directory.
    Diagnose {
        #[arg(long)]
        run: PathBuf,
        /// `all` or a comma list of min,max,convex,dissipation,decay,gn,holder.
        #[arg(long, default_value = "all")]
        checks: String,
        /// Decay fit window as `t_lo,t_hi`; defaults to the second half of the run.
        #[arg(long)]
        window: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Exact1d,
    Histogram1d,
    Entropic,
    Lp,
}

const ALL_CHECKS: [&str; 7] = ["min", "max", "convex", "dissipation", "decay", "gn", "holder"];

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::FormatVersionMismatch(_) => 4,
        Error::Validation { .. }
        | Error::Parse(_)
        | Error::UnknownPreset(_)
        | Error::InvalidGrid(_)
        | Error::InvalidDensity(_)
        | Error::GridMismatch(_)
        | Error::Dimension { .. }
        | Error::TooLarge(_)
        | Error::Index(_) => 2,
        Error::Step { source, .. } => exit_code(source),
        _ => 3,
    }
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message, "exit_code": code }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            return fail("usage", e.to_string(), 2);
        }
    };
    if let Ok(t) = std::env::var("TVFLOW_THREADS") {
        match t.parse::<usize>() {
            Ok(n) if n > 0 => {
                // a second initialisation only happens in tests; ignore it
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => return fail("validation", format!("TVFLOW_THREADS must be a positive integer, got `{t}`"), 2),
        }
    }
    match dispatch(cli.cmd) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("serialisable"));
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.kind(), e.to_string(), exit_code(&e)),
    }
}

fn is_csv(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn read_density(p: &Path) -> tvflow_core::Result<Density> {
    if is_csv(p) {
        read_density_csv(p)
    } else {
        load_density(p).or_else(|e| match e {
            Error::FormatVersionMismatch(_) => load_step(p).map(|s| s.rho_next),
            other => Err(other),
        })
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serialisable")
}

fn dispatch(cmd: Cmd) -> tvflow_core::Result<Value> {
    match cmd {
        Cmd::Rof {
            input,
            gap_tol,
            max_iters,
            out,
            force,
        } => {
            let g = read_scalar_csv(&input)?;
            let cfg = RofConfig {
                gap_tol,
                max_iters,
                ..RofConfig::default()
            };
            cfg.validate()?;
            prepare_output_dir(&out, force)?;
            let sol = rof_solve(&g, &cfg)?;
            write_scalar_csv(&out.join("u.csv"), &sol.u)?;
            write_vector_csv(&out.join("z.csv"), &sol.z)?;
            let report = json!({
                "gap": sol.primal_dual_gap,
                "el_residual": sol.el_residual,
                "iterations": sol.iterations,
                "objective": rof_objective(&g, &sol.u),
                "total_variation": total_variation(&sol.u),
                "h1_estimate": to_value(&rof_h1_estimate(&g, &sol)),
                "div_estimate": to_value(&rof_div_estimate(&g, &sol)),
            });
            write_json(&out.join("report.json"), &report)?;
            Ok(report)
        }
        Cmd::W2 {
            method,
            mu,
            nu,
            sinkhorn_eps,
            phi_out,
        } => {
            let (a, b) = (read_density(&mu)?, read_density(&nu)?);
            let r = match method {
                Method::Exact1d => w2_exact_1d(&a, &b)?,
                Method::Histogram1d => w2_histogram_1d(&a, &b)?,
                Method::Lp => w2_lp_oracle(&a, &b)?,
                Method::Entropic => {
                    let cfg = EntropicConfig {
                        eps: sinkhorn_eps,
                        eps_start: EntropicConfig::default().eps_start.max(sinkhorn_eps),
                        ..EntropicConfig::default()
                    };
                    w2_entropic(&a, &b, &cfg)?
                }
            };
            if let Some(p) = phi_out {
                write_scalar_csv(&p, &r.phi)?;
            }
            Ok(json!({
                "method": r.method.tag(),
                "w2_squared": r.w2_squared,
                "marginal_error": r.marginal_error,
                "dual_value": r.dual_value,
                "entropic_epsilon": r.entropic_epsilon,
                "iterations": r.iterations,
            }))
        }
        Cmd::Step {
            rho,
            tau,
            eps,
            c,
            residual_tol,
            outer_iters,
            out,
            force,
        } => {
            let prev = read_density(&rho)?;
            let cfg = JkoConfig {
                tau,
                barrier: PenaltyBarrier::new(c, eps)?,
                residual_tol,
                outer_iters,
                ..JkoConfig::default()
            };
            cfg.validate()?;
            prepare_output_dir(&out, force)?;
            let r = jko_step(&prev, &cfg)?;
            write_density_csv(&out.join("rho_next.csv"), &r.rho_next)?;
            write_vector_csv(&out.join("z.csv"), &r.z)?;
            write_scalar_csv(&out.join("phi.csv"), &r.phi)?;
            let j = total_variation(r.rho_next.field());
            let cert = check_pair(r.rho_next.field(), &r.z, 1e-9, 1e-6 * j + GAP_FLOOR)?;
            let reg = if cfg.barrier.is_active() {
                Some(to_value(&step_regularity_estimates(&r, &prev, &cfg.barrier)?))
            } else {
                None
            };
            let report = json!({
                "objective_value": r.objective_value,
                "energy_decrease": r.energy_decrease,
                "w2_squared": r.w2_squared,
                "residual_dev": r.residual_dev,
                "outer_iterations": r.outer_iterations,
                "transport_evaluations": r.transport_evaluations,
                "converged": r.converged,
                "mass": r.rho_next.mass(),
                "min": r.rho_next.min(),
                "max": r.rho_next.max(),
                "certificate": to_value(&cert),
                "maximum_principle": to_value(&maximum_principle_check(&prev, &r.rho_next)),
                "regularity": reg,
            });
            write_json(&out.join("report.json"), &report)?;
            Ok(report)
        }
        Cmd::Run { config, out, force } => {
            let cfg = parse_config(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            let outcome = execute_run(&cfg, &dir, force)?;
            if let Some(e) = outcome.error {
                return Err(e);
            }
            let last = outcome.trajectory.records.last().copied();
            Ok(json!({
                "dir": dir.display().to_string(),
                "status": to_value(&outcome.manifest.status),
                "experimental": outcome.manifest.experimental,
                "snapshots": outcome.trajectory.len(),
                "final": last.map(|r| to_value(&r)),
            }))
        }
        Cmd::Certify {
            rho,
            z,
            tol_z,
            tol_gap_rel,
            levels,
            out,
        } => {
            let (density, field): (ScalarField, VectorField) = match z {
                Some(zp) => {
                    let z = if is_csv(&zp) { read_vector_csv(&zp)? } else { load_vector_field(&zp).or_else(|e| match e {
                        Error::FormatVersionMismatch(_) => load_step(&zp).map(|s| s.z),
                        other => Err(other),
                    })? };
                    (read_density(&rho)?.into_field(), z)
                }
                None => {
                    let s = load_step(&rho)?;
                    (s.rho_next.into_field(), s.z)
                }
            };
            let j = total_variation(&density);
            let tol_gap = tol_gap_rel * j + GAP_FLOOR;
            let mut rep = check_pair(&density, &field, tol_z, tol_gap)?;
            let d = check_drhodz(&density, &field)?;
            rep.drhodz_value = Some(d.value);
            rep.pass_drhodz = Some(d.pass);
            let gn = gn_check(&field);
            rep.gn_slack = Some(gn.lhs * (1.0 + 20.0 * field.grid().h()) - gn.rhs);
            rep.pass_gn = Some(gn.pass);
            if rep.pass && levels > 0 {
                let (lo, hi) = (density.values().iter().copied().fold(f64::INFINITY, f64::min), density.max_abs());
                let th: Vec<f64> = (1..=levels).map(|k| lo + (hi - lo) * k as f64 / (levels + 1) as f64).collect();
                let pair = CertifiedPair::new(density, field, tol_z, tol_gap)?;
                rep.levelset_max_mismatch = Some(check_levelsets(&pair, &th));
            }
            rep.refresh_pass();
            let v = to_value(&rep);
            if let Some(p) = out {
                write_json(&p, &v)?;
            }
            Ok(v)
        }
        Cmd::Diagnose { run, checks, window } => diagnose(&run, &checks, window.as_deref()),
    }
}

fn diagnose(dir: &Path, checks: &str, window: Option<&str>) -> tvflow_core::Result<Value> {
    let traj = load_trajectory(dir)?;
    let (alpha, beta) = match read_manifest(dir) {
        Ok(m) => (m.alpha, m.beta),
        Err(_) => traj.initial.minmax(),
    };
    let selected: Vec<&str> = if checks.split(',').any(|c| c.trim() == "all") {
        ALL_CHECKS.to_vec()
    } else {
        let mut v = Vec::new();
        for c in checks.split(',').map(str::trim) {
            match ALL_CHECKS.iter().find(|k| **k == c) {
                Some(k) => v.push(*k),
                None => {
                    return Err(Error::Validation {
                        field: "checks".into(),
                        message: format!("unknown check `{c}`"),
                    })
                }
            }
        }
        v
    };
    let t_end = traj.records.last().map_or(0.0, |r| r.t);
    let window = match window {
        Some(w) => {
            let parts: Vec<f64> = w
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::validation("window", e.to_string()))?;
            match parts[..] {
                [a, b] if a < b => (a, b),
                _ => return Err(Error::validation("window", "expected t_lo,t_hi with t_lo < t_hi")),
            }
        }
        None => (0.5 * t_end, t_end),
    };
    let h = traj.grid.h();
    let mut out = serde_json::Map::new();
    let mut all_pass = true;
    for c in selected {
        let (v, pass) = match c {
            "min" => {
                let tol = 1e-6 + 10.0 * h;
                let worst = traj.densities().map(|d| d.min()).fold(f64::INFINITY, f64::min);
                let pass = worst >= alpha - tol;
                (json!({ "alpha": alpha, "worst_min": worst, "tolerance": tol, "pass": pass }), pass)
            }
            "max" => {
                let worst = traj.densities().map(|d| d.max()).fold(f64::NEG_INFINITY, f64::max);
                let pass = worst <= beta * (1.0 + 1e-8);
                (json!({ "beta": beta, "worst_max": worst, "pass": pass }), pass)
            }
            "convex" => {
                let s_min = if traj.c > 0.0 { traj.c } else { f64::MIN_POSITIVE };
                let hs = [
                    ConvexTestFunction::square(),
                    ConvexTestFunction::entropy(),
                    ConvexTestFunction::power(3.0)?,
                    ConvexTestFunction::inverse_power(2.0, s_min)?,
                ];
                let mut reps = Vec::new();
                let mut pass = true;
                for hf in &hs {
                    let r = convex_monotonicity(&traj, hf)?;
                    pass &= r.pass;
                    reps.push(json!({ "name": r.name, "max_increase": r.max_increase, "tolerance": r.tolerance, "pass": r.pass }));
                }
                (json!({ "functions": reps, "pass": pass }), pass)
            }
            "dissipation" => {
                let m = traj.len();
                let mut worst: Option<Value> = None;
                let mut worst_margin = f64::INFINITY;
                let mut windows = 0usize;
                let mut failed = 0usize;
                for s in 0..m {
                    for t in s + 5..m {
                        let r = dissipation_check(&traj, s, t)?;
                        windows += 1;
                        failed += usize::from(!r.pass);
                        let margin = r.lhs - 0.95 * r.rhs;
                        if margin < worst_margin {
                            worst_margin = margin;
                            worst = Some(to_value(&r));
                        }
                    }
                }
                let pass = failed == 0;
                (json!({ "windows": windows, "failed": failed, "worst": worst, "pass": pass }), pass)
            }
            "decay" => {
                let fit = decay_envelope(&traj, alpha, beta, window)?;
                let mut w = csv_string(&["t", "J", "envelope_t1", "envelope_t13"]);
                for s in &fit.samples {
                    w.push_str(&format!("{},{},{},{}\n", s.t, s.j, s.envelope_t1, s.envelope_t13));
                }
                std::fs::write(dir.join("decay.csv"), w)?;
                let pass = fit.pass_envelope;
                let mut v = to_value(&fit);
                if let Value::Object(o) = &mut v {
                    o.remove("samples");
                    o.insert("pass".into(), pass.into());
                }
                (v, pass)
            }
            "gn" => {
                let reps: Vec<_> = traj.steps.iter().map(|s| gn_check(&s.z)).collect();
                let failed = reps.iter().filter(|r| !r.pass).count();
                let pass = failed == 0;
                (json!({ "fields": reps.len(), "failed": failed, "pass": pass }), pass)
            }
            "holder" => {
                let samples = MetricCurveSamples::from_trajectory(&traj, 2.0, 1.0 / 3.0)?;
                let r = holder_modulus(&samples);
                let pass = r.c_prime.is_finite();
                let mut v = to_value(&r);
                if let Value::Object(o) = &mut v {
                    o.insert("pass".into(), pass.into());
                }
                (v, pass)
            }
            _ => unreachable!("validated above"),
        };
        all_pass &= pass;
        out.insert(c.into(), v);
    }
    out.insert("pass".into(), all_pass.into());
    out.insert("experimental".into(), traj.is_experimental().into());
    let v = Value::Object(out);
    write_json(&dir.join("diagnostics.json"), &v)?;
    Ok(v)
}

fn csv_string(header: &[&str]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    s
}
