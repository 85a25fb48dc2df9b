//! Log-domain Sinkhorn on the torus with the separable cost `d_𝕋²`.
//!
//! The kernel factorises over axes, so one soft-min sweep costs `O(N·n·d)`.
//! In 2D the sweep runs on `exp(−d²/ε)` products whenever the log-weights
//! have a safe dynamic range, and in the log domain otherwise.
//! With debiasing the returned value is the Sinkhorn divergence
//! `S_ε(μ,ν) = OT_ε(μ,ν) − ½OT_ε(μ,μ) − ½OT_ε(ν,ν)`, which approximates
//! `W₂²`; the potential is `½(f_μν − p_μ)`, the first variation of `½S_ε`.

use serde::{Deserialize, Serialize};

use super::{OtMethod, TransportResult};
use crate::error::{Error, Result};
use crate::grid::{Density, ScalarField, TorusGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropicConfig {
    /// Target regularisation.
    pub eps: f64,
    /// First level of the halving schedule.
    pub eps_start: f64,
    /// L¹ marginal tolerance at the target level.
    pub tol: f64,
    /// Iteration cap per solve at the target level.
    pub max_iters: usize,
    pub debias: bool,
}

impl Default for EntropicConfig {
    fn default() -> Self {
        Self {
            eps: 1e-3,
            eps_start: 1e-2,
            tol: 1e-9,
            max_iters: 100_000,
            debias: true,
        }
    }
}

impl EntropicConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::validation("ot.eps", "must be positive"));
        }
        if !(self.eps_start > 0.0) {
            return Err(Error::validation("ot.eps_start", "must be positive"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::validation("ot.tol", "must be positive"));
        }
        Ok(())
    }

    fn schedule(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut e = self.eps_start.max(self.eps);
        while e > self.eps {
            out.push(e);
            e *= 0.5;
        }
        out.push(self.eps);
        out
    }
}

/// Potentials kept between calls, on the grid of the last solve.
#[derive(Debug, Clone, Default)]
pub struct EntropicWarmStart {
    state: Option<WarmState>,
}

#[derive(Debug, Clone)]
struct WarmState {
    grid: TorusGrid,
    eps: f64,
    f: Vec<f64>,
    g: Vec<f64>,
    pa: Vec<f64>,
    pb: Vec<f64>,
    nu: Vec<f64>,
}

struct Kernel {
    grid: TorusGrid,
    n: usize,
    /// `d²(i, j)` along one axis, `n × n`.
    d2: Vec<f64>,
}

impl Kernel {
    fn new(grid: TorusGrid) -> Self {
        let n = grid.n();
        let h = grid.h();
        let mut d2 = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let k = i.abs_diff(j).min(n - i.abs_diff(j)) as f64 * h;
                d2[i * n + j] = k * k;
            }
        }
        Self { grid, n, d2 }
    }

    /// `out_i = −ε log Σ_j exp(w_j − d²(i,j)/ε)` where `w` are log-weights.
    fn softmin(&self, eps: f64, w: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) {
        let n = self.n;
        let inv = 1.0 / eps;
        if self.grid.dim() == 1 {
            for i in 0..n {
                let row = &self.d2[i * n..(i + 1) * n];
                out[i] = -eps * lse(w.iter().zip(row).map(|(&a, &c)| a - c * inv));
            }
            return;
        }
        if self.softmin_scaled(eps, w, out, scratch) {
            return;
        }
        // stage 1: contract axis 0 → a[i0 + n·j1]
        scratch.resize(n * n, 0.0);
        for j1 in 0..n {
            let wr = &w[j1 * n..(j1 + 1) * n];
            for i0 in 0..n {
                let row = &self.d2[i0 * n..(i0 + 1) * n];
                scratch[i0 + n * j1] = lse(wr.iter().zip(row).map(|(&a, &c)| a - c * inv));
            }
        }
        // stage 2: contract axis 1
        let mut col = vec![0.0; n];
        for i0 in 0..n {
            for (j1, c) in col.iter_mut().enumerate() {
                *c = scratch[i0 + n * j1];
            }
            for i1 in 0..n {
                let row = &self.d2[i1 * n..(i1 + 1) * n];
                out[i0 + n * i1] = -eps * lse(col.iter().zip(row).map(|(&a, &c)| a - c * inv));
            }
        }
    }

    /// 2D softmin through products with `exp(−d²/ε)` after shifting `w` by
    /// its maximum. Declines (returns `false`) when the spread of `w` could
    /// make dropped underflowing terms matter; the caller then falls back to
    /// the log-domain contraction.
    fn softmin_scaled(&self, eps: f64, w: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) -> bool {
        const MAX_SPREAD: f64 = 300.0;
        let n = self.n;
        let finite = w.iter().copied().filter(|v| v.is_finite());
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !(hi - lo <= MAX_SPREAD) {
            return false;
        }
        let k: Vec<f64> = self.d2.iter().map(|&c| (-c / eps).exp()).collect();
        let e: Vec<f64> = w.iter().map(|&v| (v - hi).exp()).collect();
        scratch.resize(n * n, 0.0);
        for j1 in 0..n {
            let er = &e[j1 * n..(j1 + 1) * n];
            for i0 in 0..n {
                let row = &k[i0 * n..(i0 + 1) * n];
                scratch[i0 + n * j1] = row.iter().zip(er).map(|(a, b)| a * b).sum();
            }
        }
        let mut col = vec![0.0; n];
        for i0 in 0..n {
            for (j1, c) in col.iter_mut().enumerate() {
                *c = scratch[i0 + n * j1];
            }
            for i1 in 0..n {
                let row = &k[i1 * n..(i1 + 1) * n];
                let s: f64 = row.iter().zip(&col).map(|(a, b)| a * b).sum();
                // every row has k_ii = 1, so s ≥ e^{−MAX_SPREAD} unless w_i = −∞ throughout
                if !(s > 1e-290) {
                    return false;
                }
                out[i0 + n * i1] = -eps * (hi + s.ln());
            }
        }
        true
    }
}

fn lse(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + it.map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn log_weights(pot: &[f64], logm: &[f64], eps: f64, out: &mut [f64]) {
    for ((o, &p), &l) in out.iter_mut().zip(pot).zip(logm) {
        *o = if l == f64::NEG_INFINITY { l } else { l + p / eps };
    }
}

/// Runs alternating Sinkhorn for `OT_ε(a, b)`; returns `(iterations, marginal error)`.
#[allow(clippy::too_many_arguments)]
fn sinkhorn(
    k: &Kernel,
    eps: f64,
    la: &[f64],
    lb: &[f64],
    a: &[f64],
    f: &mut [f64],
    g: &mut [f64],
    tol: f64,
    max_iters: usize,
) -> (usize, f64) {
    let n = a.len();
    let mut w = vec![0.0; n];
    let mut ft = vec![0.0; n];
    let mut scratch = Vec::new();
    let mut err = f64::INFINITY;
    log_weights(g, lb, eps, &mut w);
    k.softmin(eps, &w, f, &mut scratch);
    for it in 1..=max_iters {
        log_weights(f, la, eps, &mut w);
        k.softmin(eps, &w, g, &mut scratch);
        // a-marginal after the g-update is a_i exp((f_i − f̃_i)/ε)
        log_weights(g, lb, eps, &mut w);
        k.softmin(eps, &w, &mut ft, &mut scratch);
        err = a
            .iter()
            .zip(f.iter().zip(&ft))
            .filter(|(&ai, _)| ai > 0.0)
            .map(|(&ai, (&fi, &fti))| ai * (((fi - fti) / eps).exp() - 1.0).abs())
            .sum();
        f.copy_from_slice(&ft);
        if !err.is_finite() || err <= tol {
            return (it, err);
        }
    }
    (max_iters, err)
}

/// Symmetric iteration for `OT_ε(a, a)`; returns `(iterations, fixed-point residual)`.
fn sinkhorn_sym(k: &Kernel, eps: f64, la: &[f64], p: &mut [f64], tol: f64, max_iters: usize) -> (usize, f64) {
    let n = p.len();
    let mut w = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut scratch = Vec::new();
    let mut res = f64::INFINITY;
    for it in 1..=max_iters {
        log_weights(p, la, eps, &mut w);
        k.softmin(eps, &w, &mut t, &mut scratch);
        res = 0.0;
        for ((pi, &ti), &l) in p.iter_mut().zip(&t).zip(la) {
            let new = 0.5 * (*pi + ti);
            if l > f64::NEG_INFINITY {
                res += l.exp() * (((new - *pi) / eps).exp() - 1.0).abs();
            }
            *pi = new;
        }
        if res <= tol {
            return (it, res);
        }
    }
    (max_iters, res)
}

fn logs(m: &[f64]) -> Vec<f64> {
    m.iter().map(|&v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY }).collect()
}

/// Entropic `W₂²` estimate between `μ` and `ν`; see the module docs.
pub fn w2_entropic(mu: &Density, nu: &Density, cfg: &EntropicConfig) -> Result<TransportResult> {
    w2_entropic_warm(mu, nu, cfg, &mut EntropicWarmStart::default())
}

/// As [`w2_entropic`], reusing and updating potentials from `warm`.
///
/// When the warm state matches the grid and target `ε`, the halving schedule
/// is skipped and Sinkhorn restarts from the stored potentials.
pub fn w2_entropic_warm(
    mu: &Density,
    nu: &Density,
    cfg: &EntropicConfig,
    warm: &mut EntropicWarmStart,
) -> Result<TransportResult> {
    cfg.validate()?;
    mu.grid().check_same(nu.grid())?;
    let grid = *mu.grid();
    let n = grid.len();
    let w = grid.cell_volume();
    let a: Vec<f64> = mu.values().iter().map(|v| v * w).collect();
    let b: Vec<f64> = nu.values().iter().map(|v| v * w).collect();
    let (la, lb) = (logs(&a), logs(&b));
    let kern = Kernel::new(grid);

    let reuse = warm
        .state
        .as_ref()
        .is_some_and(|s| s.grid == grid && s.eps == cfg.eps);
    let (mut f, mut g, mut pa, mut pb, levels, same_nu) = match (&warm.state, reuse) {
        (Some(s), true) => {
            let same_nu = s.nu == b;
            (s.f.clone(), s.g.clone(), s.pa.clone(), s.pb.clone(), vec![cfg.eps], same_nu)
        }
        _ => (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], cfg.schedule(), false),
    };

    let mut iters = 0;
    let mut err = f64::INFINITY;
    let last = levels.len() - 1;
    for (li, &eps) in levels.iter().enumerate() {
        let (tol, cap) = if li == last {
            (cfg.tol, cfg.max_iters)
        } else {
            (cfg.tol.max(1e-3), 200)
        };
        let (it, e) = sinkhorn(&kern, eps, &la, &lb, &a, &mut f, &mut g, tol, cap);
        iters += it;
        err = e;
        if cfg.debias {
            iters += sinkhorn_sym(&kern, eps, &la, &mut pa, tol, cap).0;
            if !same_nu {
                iters += sinkhorn_sym(&kern, eps, &lb, &mut pb, tol, cap).0;
            }
        }
    }
    if !err.is_finite() {
        return Err(Error::NumericalUnderflow("entropic transport potentials".into()));
    }
    if err > cfg.tol {
        return Err(Error::NoConvergence {
            solver: "sinkhorn",
            iterations: iters,
            detail: format!("marginal error {err:e} > tol {:e}", cfg.tol),
        });
    }

    let dot = |x: &[f64], y: &[f64]| -> f64 {
        x.iter().zip(y).filter(|(&m, _)| m > 0.0).map(|(m, p)| m * p).sum()
    };
    let ot_ab = dot(&a, &f) + dot(&b, &g);
    let (value, phi, psi) = if cfg.debias {
        let ot_aa = 2.0 * dot(&a, &pa);
        let ot_bb = 2.0 * dot(&b, &pb);
        let phi: Vec<f64> = f.iter().zip(&pa).map(|(x, y)| 0.5 * (x - y)).collect();
        let psi: Vec<f64> = g.iter().zip(&pb).map(|(x, y)| 0.5 * (x - y)).collect();
        (ot_ab - 0.5 * ot_aa - 0.5 * ot_bb, phi, psi)
    } else {
        let phi: Vec<f64> = f.iter().map(|x| 0.5 * x).collect();
        let psi: Vec<f64> = g.iter().map(|x| 0.5 * x).collect();
        (ot_ab, phi, psi)
    };
    let zero_mean = |mut v: Vec<f64>| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter_mut().for_each(|x| *x -= m);
        v
    };
    warm.state = Some(WarmState {
        grid,
        eps: cfg.eps,
        f,
        g,
        pa,
        pb,
        nu: b,
    });
    Ok(TransportResult {
        w2_squared: value.max(0.0),
        phi: ScalarField::from_vec_unchecked(grid, zero_mean(phi)),
        psi: Some(ScalarField::from_vec_unchecked(grid, zero_mean(psi))),
        method: OtMethod::Entropic,
        entropic_epsilon: Some(cfg.eps),
        marginal_error: err,
        dual_value: None,
        iterations: iters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::w2_exact_1d;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn self_distance_vanishes() {
        let g = TorusGrid::new(2, 12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mu = Density::normalized(g, (0..g.len()).map(|_| rng.random_range(0.2..1.0)).collect()).unwrap();
        let r = w2_entropic(&mu, &mu, &EntropicConfig::default()).unwrap();
        assert!(r.w2_squared <= 1e-8, "{}", r.w2_squared);
    }

    #[test]
    fn close_to_exact_in_1d() {
        let n = 128;
        let g = TorusGrid::new(1, n).unwrap();
        let bump = |c: usize| {
            Density::normalized(g, (0..n).map(|i| if i == c || i == c + 1 { 1.0 } else { 0.0 }).collect())
                .unwrap()
        };
        let (mu, nu) = (bump(30), bump(62));
        let ex = w2_exact_1d(&mu, &nu).unwrap().w2_squared;
        let cfg = EntropicConfig {
            eps: 5e-4,
            ..EntropicConfig::default()
        };
        let en = w2_entropic(&mu, &nu, &cfg).unwrap();
        assert!((en.w2_squared - ex).abs() / ex < 1e-2, "{} vs {ex}", en.w2_squared);
        assert!(en.marginal_error <= cfg.tol);
    }

    #[test]
    fn scaled_softmin_matches_log_domain() {
        let g = TorusGrid::new(2, 12).unwrap();
        let k = Kernel::new(g);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for spread in [1.0, 50.0, 250.0] {
            let w: Vec<f64> = (0..g.len()).map(|_| rng.random_range(0.0..spread)).collect();
            let (mut a, mut b, mut s) = (vec![0.0; g.len()], vec![0.0; g.len()], Vec::new());
            assert!(k.softmin_scaled(1e-3, &w, &mut a, &mut s));
            // reference: direct log-sum-exp over all pairs
            for i in 0..g.len() {
                let [i0, i1] = g.coords(i);
                b[i] = -1e-3
                    * lse((0..g.len()).map(|j| {
                        let [j0, j1] = g.coords(j);
                        w[j] - (k.d2[i0 * 12 + j0] + k.d2[i1 * 12 + j1]) / 1e-3
                    }));
            }
            let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-12, "spread {spread}: {diff:e}");
        }
        let w: Vec<f64> = (0..g.len()).map(|i| if i == 0 { 0.0 } else { -400.0 }).collect();
        assert!(!k.softmin_scaled(1e-3, &w, &mut vec![0.0; g.len()], &mut Vec::new()));
    }

    #[test]
    fn warm_start_reproduces_cold_result() {
        let g = TorusGrid::new(1, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mu = Density::normalized(g, (0..32).map(|_| rng.random_range(0.2..1.0)).collect()).unwrap();
        let nu = Density::normalized(g, (0..32).map(|_| rng.random_range(0.2..1.0)).collect()).unwrap();
        let cfg = EntropicConfig::default();
        let cold = w2_entropic(&mu, &nu, &cfg).unwrap();
        let mut ws = EntropicWarmStart::default();
        w2_entropic_warm(&mu, &nu, &cfg, &mut ws).unwrap();
        let again = w2_entropic_warm(&mu, &nu, &cfg, &mut ws).unwrap();
        assert!((cold.w2_squared - again.w2_squared).abs() < 1e-8);
        assert!(again.iterations < cold.iterations);
    }
}
