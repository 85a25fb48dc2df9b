//! TOML run configuration.
//!
//! ```toml
//! [grid]
//! dim = 1
//! n = 64
//!
//! [datum]
//! preset = "step"
//! lo = 0.5
//! hi = 1.5
//!
//! [time]
//! tau = 0.05
//! steps = 10
//!
//! [barrier]
//! eps = 1e-3
//! c = 0.05
//! ```
//!
//! Optional sections: `[solver]`, `[diagnostics]`, `[output]`. Unknown keys
//! are rejected everywhere.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datum::DatumSpec;
use crate::error::{Error, Result};
use crate::flow::{EpsSchedule, FlowConfig};
use crate::grid::TorusGrid;
use crate::jko::{JkoConfig, JkoTransport, PenaltyBarrier};
use crate::ot::EntropicConfig;
use crate::rof::RofConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub tau: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    #[default]
    Constant,
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierSection {
    pub c: f64,
    /// Constant strength; for a geometric schedule this is `ε₀`.
    pub eps: f64,
    #[serde(default)]
    pub schedule: ScheduleKind,
    pub ratio: Option<f64>,
    pub block: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub outer_iters: usize,
    pub residual_tol: f64,
    pub rof_gap_tol: f64,
    pub rof_max_iters: usize,
    pub transport: JkoTransport,
    pub sinkhorn_eps: f64,
    pub sinkhorn_tol: f64,
    pub sinkhorn_max_iters: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let j = JkoConfig::default();
        Self {
            outer_iters: j.outer_iters,
            residual_tol: j.residual_tol,
            rof_gap_tol: j.rof.gap_tol,
            rof_max_iters: j.rof.max_iters,
            transport: j.transport,
            sinkhorn_eps: j.entropic.eps,
            sinkhorn_tol: j.entropic.tol,
            sinkhorn_max_iters: j.entropic.max_iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsSection {
    /// `all` or any of `min, max, convex, dissipation, decay, gn, holder`.
    pub checks: Vec<String>,
    /// Time window of the decay fit; defaults to the second half of the run.
    pub decay_window: Option<[f64; 2]>,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            checks: vec!["all".into()],
            decay_window: None,
        }
    }
}

pub const CHECKS: [&str; 7] = ["min", "max", "convex", "dissipation", "decay", "gn", "holder"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Write a binary checkpoint per snapshot.
    pub checkpoints: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("run"),
            checkpoints: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub datum: DatumSpec,
    pub time: TimeSection,
    pub barrier: BarrierSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn check(ok: bool, field: &str, message: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::validation(field, message))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        check(matches!(self.grid.dim, 1 | 2), "grid.dim", "must be 1 or 2")?;
        check(self.grid.n >= 2, "grid.n", "must be >= 2")?;
        check(self.time.tau > 0.0 && self.time.tau.is_finite(), "time.tau", "must be positive")?;
        check(self.time.steps > 0, "time.steps", "must be positive")?;
        check(self.barrier.eps >= 0.0 && self.barrier.eps.is_finite(), "barrier.eps", "must be >= 0")?;
        check(self.barrier.c >= 0.0 && self.barrier.c.is_finite(), "barrier.c", "must be >= 0")?;
        self.datum.validate()?;
        let s = &self.solver;
        check(s.outer_iters > 0, "solver.outer_iters", "must be positive")?;
        check(s.residual_tol > 0.0, "solver.residual_tol", "must be positive")?;
        check(s.rof_gap_tol > 0.0, "solver.rof_gap_tol", "must be positive")?;
        check(s.rof_max_iters > 0, "solver.rof_max_iters", "must be positive")?;
        check(s.sinkhorn_eps > 0.0, "solver.sinkhorn_eps", "must be positive")?;
        check(s.sinkhorn_tol > 0.0, "solver.sinkhorn_tol", "must be positive")?;
        check(s.sinkhorn_max_iters > 0, "solver.sinkhorn_max_iters", "must be positive")?;
        for c in &self.diagnostics.checks {
            check(
                c == "all" || CHECKS.contains(&c.as_str()),
                "diagnostics.checks",
                &format!("unknown check `{c}`"),
            )?;
        }
        if let Some([a, b]) = self.diagnostics.decay_window {
            check(a >= 0.0 && b > a, "diagnostics.decay_window", "need 0 <= t_lo < t_hi")?;
        }
        self.schedule()?.validate()?;
        self.flow_config()?.validate()
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.grid.dim, self.grid.n)
    }

    pub fn schedule(&self) -> Result<EpsSchedule> {
        let b = &self.barrier;
        Ok(match b.schedule {
            ScheduleKind::Constant => EpsSchedule::constant(b.eps),
            ScheduleKind::Geometric => EpsSchedule::Geometric {
                eps0: b.eps,
                ratio: b
                    .ratio
                    .ok_or_else(|| Error::validation("barrier.ratio", "required by the geometric schedule"))?,
                block: b
                    .block
                    .ok_or_else(|| Error::validation("barrier.block", "required by the geometric schedule"))?,
            },
        })
    }

    pub fn flow_config(&self) -> Result<FlowConfig> {
        let s = &self.solver;
        let schedule = self.schedule()?;
        Ok(FlowConfig {
            steps: self.time.steps,
            schedule,
            step: JkoConfig {
                tau: self.time.tau,
                barrier: PenaltyBarrier {
                    c: self.barrier.c,
                    epsilon: schedule.eps_at(1),
                },
                outer_iters: s.outer_iters,
                rof: RofConfig {
                    gap_tol: s.rof_gap_tol,
                    max_iters: s.rof_max_iters,
                    ..JkoConfig::default().rof
                },
                transport: s.transport,
                entropic: EntropicConfig {
                    eps: s.sinkhorn_eps,
                    eps_start: EntropicConfig::default().eps_start.max(s.sinkhorn_eps),
                    tol: s.sinkhorn_tol,
                    max_iters: s.sinkhorn_max_iters,
                    ..EntropicConfig::default()
                },
                residual_tol: s.residual_tol,
                ..JkoConfig::default()
            },
        })
    }

    /// Selected checks with `all` expanded.
    pub fn checks(&self) -> Vec<&'static str> {
        if self.diagnostics.checks.iter().any(|c| c == "all") {
            return CHECKS.to_vec();
        }
        CHECKS
            .iter()
            .copied()
            .filter(|c| self.diagnostics.checks.iter().any(|s| s == c))
            .collect()
    }
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[grid]
dim = 1
n = 64

[datum]
preset = "uniform"

[time]
tau = 0.05
steps = 10

[barrier]
eps = 1e-3
c = 0.05
"#;

    #[test]
    fn minimal_config_parses() {
        let c = parse_config_str(MINIMAL).unwrap();
        assert_eq!(c.grid, GridSection { dim: 1, n: 64 });
        let f = c.flow_config().unwrap();
        assert_eq!(f.steps, 10);
        assert_eq!(f.step.barrier, PenaltyBarrier { c: 0.05, epsilon: 1e-3 });
        assert_eq!(c.checks().len(), CHECKS.len());
    }

    #[test]
    fn zero_tau_is_rejected() {
        let e = parse_config_str(&MINIMAL.replace("tau = 0.05", "tau = 0")).unwrap_err();
        assert!(matches!(e, Error::Validation { ref field, .. } if field == "time.tau"), "{e}");
    }

    #[test]
    fn unknown_key_is_named() {
        let e = parse_config_str(&MINIMAL.replace("steps = 10", "steps = 10\ntheta = 1")).unwrap_err();
        match e {
            Error::Parse(m) => assert!(m.contains("theta") && m.contains("line"), "{m}"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unknown_preset_and_geometric_schedule() {
        let e = parse_config_str(&MINIMAL.replace("\"uniform\"", "\"spiral\"")).unwrap_err();
        assert!(matches!(e, Error::UnknownPreset(_)));
        let geo = MINIMAL.replace("c = 0.05", "c = 0.05\nschedule = \"geometric\"\nratio = 0.5");
        assert!(matches!(parse_config_str(&geo), Err(Error::Validation { ref field, .. }) if field == "barrier.block"));
        let geo = geo.replace("ratio = 0.5", "ratio = 0.5\nblock = 5");
        assert!(parse_config_str(&geo).unwrap().schedule().unwrap().is_experimental());
    }
}
