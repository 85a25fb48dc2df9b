//! One step of the approximated TV-JKO scheme:
//!
//! `ρ⁺ = argmin_ρ  W₂²(ρ_prev, ρ)/(2τ) + J(ρ) + ε Σ f(ρ) h^d`, `f(s) = 1/(s − c)`.
//!
//! The solver is a monotone accelerated proximal-gradient method (FISTA with
//! restart and backtracking). The smooth part is the transport term plus the
//! barrier; its gradient in the `h`-weighted inner product is
//! `φ/τ + ε f'(ρ)` projected to zero mean, so every iterate keeps unit mass.
//! The nonsmooth part is handled by the TV proximal map, which also yields the
//! certificate `z`. At a proximal point `ρ⁺ = prox_{σJ}(y − σ∇G(y))` the
//! optimality residual is `∇G(ρ⁺) − div z = φ/τ + εf'(ρ⁺) − div z`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{div, grad, Density, ScalarField, VectorField};
use crate::ot::{w2_entropic_warm, w2_histogram_1d, EntropicConfig, EntropicWarmStart};
use crate::rof::{tv_prox, RofConfig};
use crate::tv::total_variation;

/// `ε f(s)` with `f(s) = 1/(s − c)` for `s > c`, `+∞` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct PenaltyBarrier {
    pub c: f64,
    pub epsilon: f64,
}

impl PenaltyBarrier {
    pub fn new(c: f64, epsilon: f64) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::validation("barrier.c", "must be finite and >= 0"));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::validation("barrier.eps", "must be finite and >= 0"));
        }
        Ok(Self { c, epsilon })
    }

    pub fn disabled() -> Self {
        Self { c: 0.0, epsilon: 0.0 }
    }

    pub fn is_active(&self) -> bool {
        self.epsilon > 0.0
    }

    pub fn f(&self, s: f64) -> Result<f64> {
        if s <= self.c {
            return Err(Error::BarrierViolation { value: s, c: self.c });
        }
        Ok(1.0 / (s - self.c))
    }

    pub fn f_prime(&self, s: f64) -> Result<f64> {
        if s <= self.c {
            return Err(Error::BarrierViolation { value: s, c: self.c });
        }
        Ok(-1.0 / ((s - self.c) * (s - self.c)))
    }

    pub fn f_second(&self, s: f64) -> Result<f64> {
        if s <= self.c {
            return Err(Error::BarrierViolation { value: s, c: self.c });
        }
        Ok(2.0 / (s - self.c).powi(3))
    }

    /// Whether `s` lies in the domain of the penalised energy.
    fn admissible(&self, s: f64) -> bool {
        if self.is_active() {
            s > self.c
        } else {
            s >= 0.0
        }
    }

    /// `ε Σ f(ρ) h^d`; zero when disabled.
    pub fn energy(&self, rho: &ScalarField) -> Result<f64> {
        if !self.is_active() {
            return Ok(0.0);
        }
        let mut s = 0.0;
        for &v in rho.values() {
            s += self.f(v)?;
        }
        Ok(self.epsilon * s * rho.grid().cell_volume())
    }

    /// `ε f'(ρ)` cellwise; zero when disabled.
    pub fn gradient(&self, rho: &ScalarField) -> Result<ScalarField> {
        if !self.is_active() {
            return Ok(ScalarField::zeros(*rho.grid()));
        }
        let mut out = Vec::with_capacity(rho.values().len());
        for &v in rho.values() {
            out.push(self.epsilon * self.f_prime(v)?);
        }
        Ok(ScalarField::from_vec_unchecked(*rho.grid(), out))
    }
}

/// Transport model for the `W₂²` term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JkoTransport {
    /// Exact histogram transport in 1D, entropic in 2D.
    Auto,
    Histogram1d,
    Entropic,
}

/// Consecutive non-improving outer iterations after which a step is
/// declared stalled (the objective has hit the accuracy floor of the
/// inner solvers).
pub const STALL_LIMIT: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct JkoConfig {
    pub tau: f64,
    pub barrier: PenaltyBarrier,
    pub outer_iters: usize,
    /// Inner TV-prox settings (used by the 2D primal–dual prox).
    pub rof: RofConfig,
    pub transport: JkoTransport,
    pub entropic: EntropicConfig,
    /// Stop once `residual_dev ≤ residual_tol · (‖div z‖₂ + 1)`.
    pub residual_tol: f64,
    /// Initial proximal step; `None` uses `τ`.
    pub sigma0: Option<f64>,
    /// Backtracking shrink factor in `(0, 1)`.
    pub backtrack: f64,
    /// Fail with `NoConvergence` when the residual test is not met.
    pub require_convergence: bool,
}

impl Default for JkoConfig {
    fn default() -> Self {
        Self {
            tau: 0.05,
            barrier: PenaltyBarrier { c: 0.05, epsilon: 1e-3 },
            outer_iters: 20_000,
            // the prox data w/σ is large and TV-dominated, where fixed-step
            // PDHG crawls; the accelerated variant reaches a usable gap fast
            rof: RofConfig {
                gap_tol: 1e-9,
                max_iters: 50_000,
                accelerate: true,
                ..RofConfig::default()
            },
            transport: JkoTransport::Auto,
            entropic: EntropicConfig::default(),
            residual_tol: 1e-4,
            sigma0: None,
            backtrack: 0.5,
            require_convergence: true,
        }
    }
}

impl JkoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::validation("tau", "must be positive"));
        }
        PenaltyBarrier::new(self.barrier.c, self.barrier.epsilon)?;
        if self.outer_iters == 0 {
            return Err(Error::validation("solver.outer_iters", "must be positive"));
        }
        if !(self.residual_tol > 0.0) {
            return Err(Error::validation("solver.residual_tol", "must be positive"));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::validation("solver.backtrack", "must lie in (0, 1)"));
        }
        if let Some(s) = self.sigma0 {
            if !(s > 0.0) {
                return Err(Error::validation("solver.sigma0", "must be positive"));
            }
        }
        self.rof.validate()?;
        self.entropic.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JkoStepResult {
    pub rho_next: Density,
    pub z: VectorField,
    pub phi: ScalarField,
    /// `φ/τ − div z + ε f'(ρ_next)`
    pub residual_field: ScalarField,
    /// Standard deviation of `residual_field` over cells.
    pub residual_dev: f64,
    pub objective_value: f64,
    /// `F(ρ_prev) − [F(ρ_next) + W₂²/(2τ)]` with `F = J + ε Σ f h^d`.
    pub energy_decrease: f64,
    pub w2_squared: f64,
    pub outer_iterations: usize,
    pub transport_evaluations: usize,
    pub final_sigma: f64,
    pub converged: bool,
}

/// State carried between consecutive steps of one flow.
#[derive(Debug, Clone, Default)]
pub struct JkoWarmStart {
    pub sigma: Option<f64>,
    pub z: Option<VectorField>,
    entropic: EntropicWarmStart,
}

/// `F(ρ) = J(ρ) + ε Σ f(ρ) h^d`.
pub fn energy(rho: &ScalarField, barrier: &PenaltyBarrier) -> Result<f64> {
    Ok(total_variation(rho) + barrier.energy(rho)?)
}

struct Smooth<'a> {
    prev: &'a Density,
    tau: f64,
    barrier: PenaltyBarrier,
    entropic: bool,
    ecfg: &'a EntropicConfig,
    ws: &'a mut EntropicWarmStart,
    evals: usize,
}

struct SmoothEval {
    value: f64,
    grad: Vec<f64>,
    w2: f64,
    phi: ScalarField,
}

impl Smooth<'_> {
    fn eval(&mut self, x: &[f64]) -> Result<SmoothEval> {
        let grid = *self.prev.grid();
        let rho = Density::renormalized_unchecked(grid, x.to_vec());
        self.evals += 1;
        let res = if self.entropic {
            w2_entropic_warm(&rho, self.prev, self.ecfg, self.ws)?
        } else {
            w2_histogram_1d(&rho, self.prev)?
        };
        let bar = self.barrier.energy(rho.field())?;
        let bg = self.barrier.gradient(rho.field())?;
        let mut g: Vec<f64> = res
            .phi
            .values()
            .iter()
            .zip(bg.values())
            .map(|(p, b)| p / self.tau + b)
            .collect();
        let m = g.iter().sum::<f64>() / g.len() as f64;
        g.iter_mut().for_each(|v| *v -= m);
        Ok(SmoothEval {
            value: res.w2_squared / (2.0 * self.tau) + bar,
            grad: g,
            w2: res.w2_squared,
            phi: res.phi,
        })
    }
}

fn std_dev(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    let maxdev = v.iter().map(|x| (x - m).abs()).fold(0.0, f64::max);
    (var.sqrt(), maxdev)
}

/// `W₂²(ρ_prev, ρ)/(2τ) + J(ρ) + ε Σ f(ρ) h^d` with the step's transport model.
pub fn jko_objective(rho_prev: &Density, rho: &Density, cfg: &JkoConfig) -> Result<f64> {
    let mut ws = EntropicWarmStart::default();
    let entropic = use_entropic(rho_prev, cfg)?;
    let mut s = Smooth {
        prev: rho_prev,
        tau: cfg.tau,
        barrier: cfg.barrier,
        entropic,
        ecfg: &cfg.entropic,
        ws: &mut ws,
        evals: 0,
    };
    Ok(s.eval(rho.values())?.value + total_variation(rho.field()))
}

fn use_entropic(rho: &Density, cfg: &JkoConfig) -> Result<bool> {
    let dim = rho.grid().dim();
    match cfg.transport {
        JkoTransport::Auto => Ok(dim == 2),
        JkoTransport::Entropic => Ok(true),
        JkoTransport::Histogram1d if dim == 1 => Ok(false),
        JkoTransport::Histogram1d => Err(Error::Dimension { expected: 1, got: dim }),
    }
}

pub fn jko_step(rho_prev: &Density, cfg: &JkoConfig) -> Result<JkoStepResult> {
    jko_step_warm(rho_prev, cfg, &mut JkoWarmStart::default())
}

/// One JKO step, reusing step size, dual field and transport potentials from `warm`.
pub fn jko_step_warm(rho_prev: &Density, cfg: &JkoConfig, warm: &mut JkoWarmStart) -> Result<JkoStepResult> {
    cfg.validate()?;
    let grid = *rho_prev.grid();
    let barrier = cfg.barrier;
    if let Some(v) = rho_prev.values().iter().find(|&&v| !barrier.admissible(v)) {
        return Err(Error::BarrierViolation { value: *v, c: barrier.c });
    }
    let entropic = use_entropic(rho_prev, cfg)?;
    let h_d = grid.cell_volume();
    let tau = cfg.tau;
    let f_prev = energy(rho_prev.field(), &barrier)?;

    let mut smooth = Smooth {
        prev: rho_prev,
        tau,
        barrier,
        entropic,
        ecfg: &cfg.entropic,
        ws: &mut warm.entropic,
        evals: 0,
    };
    let admissible = |v: &[f64]| v.iter().all(|&s| barrier.admissible(s));

    let mut x = rho_prev.values().to_vec();
    let mut x_old = x.clone();
    let mut obj_x = f_prev + smooth.eval(&x)?.value - barrier.energy(rho_prev.field())?;
    let mut t = 1.0f64;
    let mut sigma = warm.sigma.or(cfg.sigma0).unwrap_or(tau);
    let sigma_min = 1e-14 * tau;
    let mut z_warm = warm.z.clone().filter(|z| *z.grid() == grid);

    // the accepted point and its certificate
    let mut best: Option<(ScalarField, VectorField, SmoothEval, Vec<f64>, f64)> = None;
    let mut converged = false;
    let mut stalled = false;
    let mut rejected = 0usize;
    let mut iters = 0;

    for k in 1..=cfg.outer_iters {
        iters = k;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        let mut y: Vec<f64> = x.iter().zip(&x_old).map(|(a, b)| a + beta * (a - b)).collect();
        if !admissible(&y) {
            y.clone_from(&x);
        }
        let sy = smooth.eval(&y)?;
        let ynorm = ScalarField::from_vec_unchecked(grid, y.clone());

        // backtracking on the quadratic upper model
        let (xp, zp, sp) = loop {
            let w: Vec<f64> = y.iter().zip(&sy.grad).map(|(a, g)| a - sigma * g).collect();
            let wf = ScalarField::from_vec_unchecked(grid, w);
            let (u, z) = tv_prox(&wf, sigma, z_warm.as_ref(), &cfg.rof)?;
            if admissible(u.values()) {
                let su = smooth.eval(u.values())?;
                let d = u.zip_map(&ynorm, |a, b| a - b);
                let lin: f64 = d.values().iter().zip(&sy.grad).map(|(a, b)| a * b).sum::<f64>() * h_d;
                let model = sy.value + lin + d.inner(&d) / (2.0 * sigma);
                if su.value <= model + 1e-13 * (1.0 + sy.value.abs()) {
                    break (u, z, su);
                }
            }
            sigma *= cfg.backtrack;
            if sigma < sigma_min {
                let m = y.iter().copied().fold(f64::INFINITY, f64::min);
                return Err(Error::BarrierViolation { value: m, c: barrier.c });
            }
        };
        z_warm = Some(zp.clone());

        let obj_p = sp.value + total_variation(&xp);
        let dz = div(&zp);
        let resid: Vec<f64> = sp.grad.iter().zip(dz.values()).map(|(g, d)| g - d).collect();
        let (dev, _) = std_dev(&resid);
        let div_norm = dz.l2_norm();

        if obj_p <= obj_x || best.is_none() {
            rejected = 0;
            x_old = std::mem::replace(&mut x, xp.values().to_vec());
            obj_x = obj_p;
            t = t_next;
            best = Some((xp, zp, sp, resid, dev));
            if dev <= cfg.residual_tol * (div_norm + 1.0) {
                converged = true;
                break;
            }
        } else {
            // monotone restart: drop momentum, keep the current point
            x_old.clone_from(&x);
            t = 1.0;
            rejected += 1;
            if rejected >= STALL_LIMIT {
                stalled = true;
                break;
            }
        }
        // mild step recovery after successful iterations
        sigma = (sigma / cfg.backtrack.sqrt()).min(1e6 * tau);
    }

    let (xp, zp, sp, _, _) = best.expect("at least one outer iteration");
    warm.sigma = Some(sigma);
    warm.z = Some(zp.clone());
    let evals = smooth.evals;

    let rho_next = Density::renormalized_unchecked(grid, xp.into_values());
    // recompute the residual on the stored representation, with the raw potential
    let bg = barrier.gradient(rho_next.field())?;
    let dz = div(&zp);
    let phi = sp.phi.clone();
    let residual_field = ScalarField::from_vec_unchecked(
        grid,
        phi.values()
            .iter()
            .zip(dz.values())
            .zip(bg.values())
            .map(|((p, d), b)| p / tau - d + b)
            .collect(),
    );
    let (residual_dev, _) = std_dev(residual_field.values());
    let f_next = energy(rho_next.field(), &barrier)?;
    let objective_value = f_next + sp.w2 / (2.0 * tau);
    let result = JkoStepResult {
        energy_decrease: f_prev - objective_value,
        rho_next,
        z: zp,
        phi,
        residual_field,
        residual_dev,
        objective_value,
        w2_squared: sp.w2,
        outer_iterations: iters,
        transport_evaluations: evals,
        final_sigma: sigma,
        converged,
    };
    if !converged && cfg.require_convergence {
        return Err(Error::NoConvergence {
            solver: "jko",
            iterations: iters,
            detail: format!(
                "residual_dev {:e} above {:e}{}",
                result.residual_dev,
                cfg.residual_tol * (div(&result.z).l2_norm() + 1.0),
                if stalled { " (stalled)" } else { "" }
            ),
        });
    }
    Ok(result)
}

/// `(dev, max_abs_dev)` of the Euler–Lagrange residual about its mean.
pub fn el_residual(result: &JkoStepResult) -> (f64, f64) {
    std_dev(result.residual_field.values())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaxPrincipleCheck {
    pub max_prev: f64,
    pub max_next: f64,
    /// `max(0, max_next − max_prev)`
    pub violation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// `max ρ_next ≤ max ρ_prev` up to `1e−8 · max ρ_prev`.
pub fn maximum_principle_check(rho_prev: &Density, rho_next: &Density) -> MaxPrincipleCheck {
    let (a, b) = (rho_prev.max(), rho_next.max());
    let tolerance = 1e-8 * a;
    let violation = (b - a).max(0.0);
    MaxPrincipleCheck {
        max_prev: a,
        max_next: b,
        violation,
        tolerance,
        pass: violation <= tolerance,
    }
}

/// Three a-posteriori gradient estimates of a converged step, with
/// `ψ = −div z + ε f'(ρ)`:
///
/// * `‖∇(ε f'(ρ))‖ ≤ ‖∇ψ‖`
/// * `‖∇ div z‖ ≤ ‖∇ψ‖`
/// * `‖∇ρ‖ ≤ C ‖∇ψ‖` with `C = (inf_{(c, M]} f'')⁻¹/ε = (M − c)³/(2ε)`, `M = max ρ_prev`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularityReport {
    pub grad_fprime: f64,
    pub grad_div_z: f64,
    pub grad_rho: f64,
    pub grad_psi: f64,
    pub constant_c: f64,
    pub pass_fprime: bool,
    pub pass_div_z: bool,
    pub pass_rho: bool,
    pub slack: f64,
}

impl RegularityReport {
    pub fn pass(&self) -> bool {
        self.pass_fprime && self.pass_div_z && self.pass_rho
    }
}

/// Relative slack of [`step_regularity_estimates`].
pub const REGULARITY_SLACK: f64 = 1e-3;

pub fn step_regularity_estimates(
    result: &JkoStepResult,
    rho_prev: &Density,
    barrier: &PenaltyBarrier,
) -> Result<RegularityReport> {
    let fp = barrier.gradient(result.rho_next.field())?;
    let dz = div(&result.z);
    let psi = fp.zip_map(&dz, |a, b| a - b);
    let grad_psi = grad(&psi).l2_norm();
    let grad_fprime = grad(&fp).l2_norm();
    let grad_div_z = grad(&dz).l2_norm();
    let grad_rho = grad(result.rho_next.field()).l2_norm();
    let m = rho_prev.max();
    let constant_c = if barrier.is_active() {
        (m - barrier.c).powi(3) / (2.0 * barrier.epsilon)
    } else {
        f64::INFINITY
    };
    let s = 1.0 + REGULARITY_SLACK;
    let tiny = 1e-12;
    Ok(RegularityReport {
        grad_fprime,
        grad_div_z,
        grad_rho,
        grad_psi,
        constant_c,
        pass_fprime: grad_fprime <= grad_psi * s + tiny,
        pass_div_z: grad_div_z <= grad_psi * s + tiny,
        pass_rho: grad_rho <= constant_c * grad_psi * s + tiny,
        slack: REGULARITY_SLACK,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use crate::tv::{check_pair, GAP_FLOOR};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pattern(n: usize) -> Density {
        let g = TorusGrid::new(1, n).unwrap();
        Density::normalized(g, (0..n).map(|i| if i % 8 < 4 { 2.0 } else { 1.0 }).collect()).unwrap()
    }

    fn cfg() -> JkoConfig {
        JkoConfig {
            tau: 0.05,
            barrier: PenaltyBarrier::new(0.05, 1e-3).unwrap(),
            ..JkoConfig::default()
        }
    }

    #[test]
    fn barrier_domain() {
        let b = PenaltyBarrier::new(0.1, 1.0).unwrap();
        assert!(b.f(0.1).is_err() && b.f_prime(0.05).is_err());
        assert_eq!(b.f(0.6).unwrap(), 2.0);
        assert_eq!(b.f_prime(0.6).unwrap(), -4.0);
        assert_eq!(b.f_second(0.6).unwrap(), 16.0);
        assert!(PenaltyBarrier::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn uniform_is_a_fixed_point() {
        for dim in [1, 2] {
            let g = TorusGrid::new(dim, 8).unwrap();
            let r = jko_step(&Density::uniform(g), &cfg()).unwrap();
            assert!(r.rho_next.values().iter().all(|&v| (v - 1.0).abs() < 1e-12));
            assert!(div(&r.z).max_abs() < 1e-12);
            assert!(r.residual_dev <= 1e-10);
        }
    }

    #[test]
    fn step_pattern_is_certified_and_decreases_energy() {
        for tau in [0.05, 2e-3] {
            step_pattern_checks(tau);
        }
    }

    fn step_pattern_checks(tau: f64) {
        let prev = pattern(16);
        let c = JkoConfig { tau, ..cfg() };
        let r = jko_step(&prev, &c).unwrap();
        assert!(r.converged);
        assert!((r.rho_next.mass() - 1.0).abs() <= 1e-12);
        assert!(r.rho_next.min() > c.barrier.c);
        let j = total_variation(r.rho_next.field());
        let rep = check_pair(r.rho_next.field(), &r.z, 1e-9, 1e-6 * j + GAP_FLOOR).unwrap();
        assert!(rep.pass, "{rep:?} {r:?}");
        assert!(r.energy_decrease >= -1e-8);
        assert!(maximum_principle_check(&prev, &r.rho_next).pass);
        let reg = step_regularity_estimates(&r, &prev, &c.barrier).unwrap();
        assert!(reg.pass(), "{reg:?}");
    }

    #[test]
    fn random_probes_do_not_improve_the_minimiser() {
        let prev = pattern(16);
        let c = cfg();
        let r = jko_step(&prev, &c).unwrap();
        let best = jko_objective(&prev, &r.rho_next, &c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10_000 {
            let mut d: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
            let m = d.iter().sum::<f64>() / 16.0;
            d.iter_mut().for_each(|v| *v -= m);
            let s = rng.random_range(1e-6..1e-2);
            let vals: Vec<f64> = r.rho_next.values().iter().zip(&d).map(|(a, b)| a + s * b).collect();
            let cand = Density::renormalized_unchecked(*prev.grid(), vals);
            match jko_objective(&prev, &cand, &c) {
                Ok(v) => assert!(v >= best - 1e-12),
                Err(Error::BarrierViolation { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn unconverged_snapshot_has_larger_residual() {
        let prev = pattern(16);
        let mut c = cfg();
        let conv = jko_step(&prev, &c).unwrap();
        c.outer_iters = 1;
        c.require_convergence = false;
        let one = jko_step(&prev, &c).unwrap();
        assert!(!one.converged);
        assert!(el_residual(&one).0 > el_residual(&conv).0);
        c.require_convergence = true;
        assert!(matches!(jko_step(&prev, &c), Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn residual_is_gauge_invariant() {
        let prev = pattern(16);
        let r = jko_step(&prev, &cfg()).unwrap();
        let mut shifted = r.clone();
        shifted.residual_field = r.residual_field.map(|v| v + 3.0);
        let (a, b) = (el_residual(&r), el_residual(&shifted));
        assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
    }

    #[test]
    fn max_principle_negative_control() {
        let prev = pattern(16);
        let mut v = prev.values().to_vec();
        v[0] += 0.1;
        v[15] -= 0.1;
        let bad = Density::new(*prev.grid(), v).unwrap();
        let chk = maximum_principle_check(&prev, &bad);
        assert!(!chk.pass && chk.violation > 0.09);
    }

    #[test]
    fn rejects_start_below_barrier() {
        let g = TorusGrid::new(1, 4).unwrap();
        let d = Density::new(g, vec![0.02, 1.98, 1.0, 1.0]).unwrap();
        assert!(matches!(jko_step(&d, &cfg()), Err(Error::BarrierViolation { .. })));
    }
}
