//! Minimizing-movement trajectories: repeated JKO steps, per-step records,
//! and ε-continuation across flows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{div, grad, Density, TorusGrid};
use crate::jko::{energy, jko_step_warm, JkoConfig, JkoStepResult, JkoWarmStart, PenaltyBarrier};
use crate::tv::total_variation;

/// Barrier strength along a flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EpsSchedule {
    Constant { eps: f64 },
    /// `ε_j = eps0 · ratio^j` on consecutive blocks of `block` steps.
    /// Experimental: decreasing ε inside one flow.
    Geometric { eps0: f64, ratio: f64, block: usize },
}

impl EpsSchedule {
    pub fn constant(eps: f64) -> Self {
        EpsSchedule::Constant { eps }
    }

    /// ε used for step `k` (1-based).
    pub fn eps_at(&self, k: usize) -> f64 {
        match *self {
            EpsSchedule::Constant { eps } => eps,
            EpsSchedule::Geometric { eps0, ratio, block } => eps0 * ratio.powi(((k.max(1) - 1) / block) as i32),
        }
    }

    pub fn is_experimental(&self) -> bool {
        matches!(self, EpsSchedule::Geometric { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EpsSchedule::Constant { eps } if eps >= 0.0 && eps.is_finite() => Ok(()),
            EpsSchedule::Constant { .. } => Err(Error::validation("barrier.eps", "must be finite and >= 0")),
            EpsSchedule::Geometric { eps0, ratio, block } => {
                if !(eps0 > 0.0 && eps0.is_finite()) {
                    Err(Error::validation("barrier.eps0", "must be positive"))
                } else if !(ratio > 0.0 && ratio <= 1.0) {
                    Err(Error::validation("barrier.ratio", "must lie in (0, 1]"))
                } else if block == 0 {
                    Err(Error::validation("barrier.block", "must be positive"))
                } else {
                    Ok(())
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub steps: usize,
    pub schedule: EpsSchedule,
    /// Step template; `barrier.epsilon` is overwritten from `schedule`.
    pub step: JkoConfig,
}

impl FlowConfig {
    pub fn new(tau: f64, steps: usize, eps: f64, c: f64) -> Self {
        Self {
            steps,
            schedule: EpsSchedule::constant(eps),
            step: JkoConfig {
                tau,
                barrier: PenaltyBarrier { c, epsilon: eps },
                ..JkoConfig::default()
            },
        }
    }

    pub fn tau(&self) -> f64 {
        self.step.tau
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.step.validate()
    }
}

/// Scalars recorded for snapshot `k` (k = 0 is the initial datum).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub t: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub min: f64,
    pub max: f64,
    /// `W₂²(ρ_{k−1}, ρ_k)`
    pub w2_step: f64,
    pub residual_dev: f64,
    /// `Σ ρ_k |grad div z_k|² h^d`
    pub dissipation: f64,
    pub eps: f64,
    /// `F_ε(ρ_k) = J(ρ_k) + ε Σ f(ρ_k) h^d`
    pub energy: f64,
    /// `ε Σ ρ |f''(ρ)| |grad ρ| h^d`
    pub penalty_flux: f64,
    pub outer_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TorusGrid,
    pub tau: f64,
    pub c: f64,
    pub schedule: EpsSchedule,
    pub seed: Option<u64>,
    pub initial: Density,
    pub steps: Vec<JkoStepResult>,
    pub records: Vec<StepRecord>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Density at snapshot `k`.
    pub fn density(&self, k: usize) -> &Density {
        if k == 0 {
            &self.initial
        } else {
            &self.steps[k - 1].rho_next
        }
    }

    pub fn densities(&self) -> impl Iterator<Item = &Density> {
        std::iter::once(&self.initial).chain(self.steps.iter().map(|s| &s.rho_next))
    }

    /// Whether the run used the experimental ε-decreasing schedule.
    pub fn is_experimental(&self) -> bool {
        self.schedule.is_experimental()
    }
}

/// A failed flow: the trajectory up to the last successful step plus the cause.
#[derive(Debug, thiserror::Error)]
#[error("flow stopped after {} completed steps: {error}", .partial.steps.len())]
pub struct FlowError {
    pub partial: Box<Trajectory>,
    #[source]
    pub error: Error,
}

fn penalty_flux(rho: &Density, barrier: &PenaltyBarrier) -> Result<f64> {
    if !barrier.is_active() {
        return Ok(0.0);
    }
    let g = grad(rho.field()).pointwise_norms();
    let mut s = 0.0;
    for (&r, &gn) in rho.values().iter().zip(&g) {
        s += r * barrier.f_second(r)?.abs() * gn;
    }
    Ok(barrier.epsilon * s * rho.grid().cell_volume())
}

fn record(k: usize, tau: f64, rho: &Density, step: Option<&JkoStepResult>, barrier: &PenaltyBarrier) -> Result<StepRecord> {
    let (min, max) = rho.minmax();
    let dissipation = match step {
        Some(s) => {
            let gd = grad(&div(&s.z)).pointwise_norms();
            rho.values().iter().zip(&gd).map(|(r, g)| r * g * g).sum::<f64>() * rho.grid().cell_volume()
        }
        None => 0.0,
    };
    Ok(StepRecord {
        k,
        t: k as f64 * tau,
        j: total_variation(rho.field()),
        min,
        max,
        w2_step: step.map_or(0.0, |s| s.w2_squared),
        residual_dev: step.map_or(0.0, |s| s.residual_dev),
        dissipation,
        eps: barrier.epsilon,
        energy: energy(rho.field(), barrier)?,
        penalty_flux: penalty_flux(rho, barrier)?,
        outer_iterations: step.map_or(0, |s| s.outer_iterations),
    })
}

/// Runs `cfg.steps` JKO steps from `rho0`. On a failing step, the error carries
/// the step index and the partial trajectory.
pub fn run_flow(rho0: &Density, cfg: &FlowConfig) -> std::result::Result<Trajectory, FlowError> {
    run_flow_with(rho0, cfg, |_, _| {})
}

/// As [`run_flow`], calling `on_step(k, trajectory)` after each completed step.
pub fn run_flow_with<F>(rho0: &Density, cfg: &FlowConfig, mut on_step: F) -> std::result::Result<Trajectory, FlowError>
where
    F: FnMut(usize, &Trajectory),
{
    let tau = cfg.tau();
    let b0 = PenaltyBarrier {
        c: cfg.step.barrier.c,
        epsilon: cfg.schedule.eps_at(1),
    };
    let mut traj = Trajectory {
        grid: *rho0.grid(),
        tau,
        c: cfg.step.barrier.c,
        schedule: cfg.schedule,
        seed: None,
        initial: rho0.clone(),
        steps: Vec::with_capacity(cfg.steps),
        records: Vec::with_capacity(cfg.steps + 1),
    };
    let fail = |traj: Trajectory, error: Error| FlowError {
        partial: Box::new(traj),
        error,
    };
    if let Err(e) = cfg.validate() {
        return Err(fail(traj, e));
    }
    match record(0, tau, rho0, None, &b0) {
        Ok(r) => traj.records.push(r),
        Err(e) => return Err(fail(traj, e)),
    }
    on_step(0, &traj);
    let mut warm = JkoWarmStart::default();
    for k in 1..=cfg.steps {
        let mut step_cfg = cfg.step.clone();
        step_cfg.barrier.epsilon = cfg.schedule.eps_at(k);
        let prev = traj.density(k - 1).clone();
        let outcome = jko_step_warm(&prev, &step_cfg, &mut warm)
            .and_then(|s| record(k, tau, &s.rho_next, Some(&s), &step_cfg.barrier).map(|r| (s, r)));
        match outcome {
            Ok((s, r)) => {
                traj.steps.push(s);
                traj.records.push(r);
            }
            Err(e) => {
                return Err(fail(
                    traj,
                    Error::Step {
                        step: k,
                        source: Box::new(e),
                    },
                ))
            }
        }
        on_step(k, &traj);
    }
    Ok(traj)
}

/// `W₂(ρ_k, ρ_{k+1})/τ` per step.
pub fn metric_derivative_estimate(traj: &Trajectory) -> Vec<f64> {
    traj.steps.iter().map(|s| s.w2_squared.max(0.0).sqrt() / traj.tau).collect()
}

/// Outcome of [`eps_continuation`], ordered like the input ε list.
#[derive(Debug, Clone)]
pub struct Continuation {
    pub eps: Vec<f64>,
    pub trajectories: Vec<Trajectory>,
    /// Max over matched times of the `h^d`-weighted `L²` distance between
    /// the trajectories for `eps[i]` and `eps[i + 1]`.
    pub consecutive_distance: Vec<f64>,
    /// Time-integrated penalty flux `Σ_k τ · flux_k` per ε.
    pub penalty_flux: Vec<f64>,
}

/// Runs one constant-ε flow per entry of `eps` (in parallel) and compares them.
pub fn eps_continuation(rho0: &Density, cfg: &FlowConfig, eps: &[f64]) -> Result<Continuation> {
    let runs: Vec<std::result::Result<Trajectory, FlowError>> = eps
        .par_iter()
        .map(|&e| {
            let mut c = cfg.clone();
            c.schedule = EpsSchedule::constant(e);
            c.step.barrier.epsilon = e;
            run_flow(rho0, &c)
        })
        .collect();
    let mut trajectories = Vec::with_capacity(runs.len());
    for r in runs {
        trajectories.push(r.map_err(|f| f.error)?);
    }
    let consecutive_distance = trajectories
        .windows(2)
        .map(|w| {
            w[0].densities()
                .zip(w[1].densities())
                .map(|(a, b)| {
                    let d = a.field().zip_map(b.field(), |x, y| x - y);
                    d.l2_norm()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let penalty_flux = trajectories
        .iter()
        .map(|t| t.records.iter().skip(1).map(|r| t.tau * r.penalty_flux).sum())
        .collect();
    Ok(Continuation {
        eps: eps.to_vec(),
        trajectories,
        consecutive_distance,
        penalty_flux,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step_datum(n: usize) -> Density {
        let g = TorusGrid::new(1, n).unwrap();
        Density::new(g, (0..n).map(|i| if i < n / 2 { 1.5 } else { 0.5 }).collect()).unwrap()
    }

    #[test]
    fn uniform_flow_is_stationary() {
        let g = TorusGrid::new(1, 16).unwrap();
        let t = run_flow(&Density::uniform(g), &FlowConfig::new(0.05, 10, 1e-3, 0.05)).unwrap();
        assert_eq!(t.len(), 11);
        assert!(t.records.iter().all(|r| r.j == 0.0 && (r.max - 1.0).abs() < 1e-12));
        assert!(metric_derivative_estimate(&t).iter().all(|&v| v < 1e-9));
        assert!(t.times().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn step_flow_properties() {
        let rho0 = step_datum(64);
        let cfg = FlowConfig::new(0.02, 10, 1e-3, 0.1);
        let t = run_flow(&rho0, &cfg).unwrap();
        let f0 = t.records[0].energy;
        for w in t.records.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-8);
            assert!(w[1].j <= w[0].j + 1e-12);
        }
        for r in &t.records {
            assert!(r.min >= 0.5 - 1e-6 - 10.0 / 64.0);
            assert!(r.max <= 1.5 * (1.0 + 1e-8));
            assert!(r.j <= f0);
        }
        let md = metric_derivative_estimate(&t);
        let lhs: f64 = md.iter().map(|v| cfg.tau() * v * v).sum();
        let drop = f0 - t.records.last().unwrap().energy;
        assert!(lhs <= drop + 1e-6 * f0, "{lhs} {drop}");
    }

    #[test]
    fn failure_returns_partial_trajectory() {
        let rho0 = step_datum(16);
        let mut cfg = FlowConfig::new(0.02, 3, 1e-3, 0.1);
        cfg.step.outer_iters = 1;
        let err = run_flow(&rho0, &cfg).unwrap_err();
        assert!(matches!(err.error, Error::Step { step: 1, .. }));
        assert_eq!(err.partial.len(), 1);
    }

    #[test]
    fn schedule() {
        let s = EpsSchedule::Geometric { eps0: 1e-2, ratio: 0.1, block: 5 };
        assert_eq!(s.eps_at(1), 1e-2);
        assert_eq!(s.eps_at(5), 1e-2);
        assert!((s.eps_at(6) - 1e-3).abs() < 1e-18);
        assert!(s.is_experimental() && !EpsSchedule::constant(0.0).is_experimental());
        assert!(EpsSchedule::constant(-1.0).validate().is_err());
    }

    #[test]
    fn uniform_continuation_is_identical() {
        let g = TorusGrid::new(1, 8).unwrap();
        let c = eps_continuation(&Density::uniform(g), &FlowConfig::new(0.05, 3, 1e-3, 0.05), &[1e-2, 1e-3]).unwrap();
        assert!(c.consecutive_distance.iter().all(|&d| d < 1e-12));
    }
}
