//! A-posteriori checks on stored trajectories and fields.
//!
//! Nothing here is called by the solvers. Every check recomputes what it needs
//! from densities and dual fields, so a solver bug cannot hide behind a
//! shared helper.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::grid::{div, grad, Density, ScalarField, VectorField};
use crate::ot::{w2_entropic, w2_histogram_1d, EntropicConfig};
use crate::tv::total_variation;

/// Per-step tolerance of [`convex_monotonicity`], relative to the sequence scale.
pub const CONVEX_STEP_TOL: f64 = 1e-8;
/// Discretisation allowance of [`dissipation_check`].
pub const DISSIPATION_SLACK: f64 = 0.05;
/// Envelope slack of [`decay_envelope`].
pub const ENVELOPE_SLACK: f64 = 1.2;
/// `J` values at or below `JFLOOR · J(ρ₀)` count as extinct in decay fits.
pub const JFLOOR: f64 = 1e-12;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A convex `H` with its second derivative and validity range `(s_min, s_max)`.
#[derive(Clone)]
pub struct ConvexTestFunction {
    name: String,
    h: ScalarFn,
    h2: ScalarFn,
    range: (f64, f64),
}

impl fmt::Debug for ConvexTestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvexTestFunction")
            .field("name", &self.name)
            .field("range", &self.range)
            .finish()
    }
}

impl ConvexTestFunction {
    /// Registers `H`; rejects it unless `H'' ≥ 0` on 10³ points of the range.
    pub fn new(
        name: impl Into<String>,
        h: impl Fn(f64) -> f64 + Send + Sync + 'static,
        h2: impl Fn(f64) -> f64 + Send + Sync + 'static,
        range: (f64, f64),
    ) -> Result<Self> {
        let name = name.into();
        let (lo, hi) = range;
        if !(lo < hi) {
            return Err(Error::validation("range", "s_min must be below s_max"));
        }
        // an unbounded range is sampled on a geometric grid above its lower end
        for i in 0..1000 {
            let u = (i as f64 + 0.5) / 1000.0;
            let s = if hi.is_finite() {
                lo + u * (hi - lo)
            } else {
                lo + lo.abs().max(1.0) * (1e6f64.powf(u) - 1.0)
            };
            let v = h2(s);
            if v.is_nan() || v < 0.0 {
                return Err(Error::validation(
                    format!("convex.{name}"),
                    format!("H'' = {v} < 0 at s = {s}"),
                ));
            }
        }
        Ok(Self {
            name,
            h: Arc::new(h),
            h2: Arc::new(h2),
            range,
        })
    }

    pub fn square() -> Self {
        Self::new("s^2", |s| s * s, |_| 2.0, (0.0, f64::INFINITY)).expect("convex")
    }

    pub fn entropy() -> Self {
        Self::new("s log s", |s| if s == 0.0 { 0.0 } else { s * s.ln() }, |s| 1.0 / s, (0.0, f64::INFINITY))
            .expect("convex")
    }

    /// `s^q`, `q > 1`, on `[0, ∞)`.
    pub fn power(q: f64) -> Result<Self> {
        if !(q > 1.0) {
            return Err(Error::validation("q", "power preset needs q > 1"));
        }
        Self::new(format!("s^{q}"), move |s| s.powf(q), move |s| q * (q - 1.0) * s.powf(q - 2.0), (0.0, f64::INFINITY))
    }

    /// `s^{−q}`, `q > 0`, on `(s_min, ∞)` with `s_min > 0`.
    pub fn inverse_power(q: f64, s_min: f64) -> Result<Self> {
        if !(q > 0.0) || !(s_min > 0.0) {
            return Err(Error::validation("q", "inverse power preset needs q > 0 and s_min > 0"));
        }
        Self::new(
            format!("s^-{q}"),
            move |s| s.powf(-q),
            move |s| q * (q + 1.0) * s.powf(-q - 2.0),
            (s_min, f64::INFINITY),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    pub fn eval(&self, s: f64) -> f64 {
        (self.h)(s)
    }

    pub fn second_derivative(&self, s: f64) -> f64 {
        (self.h2)(s)
    }

    /// `Σ H(ρ) h^d`
    pub fn integral(&self, rho: &Density) -> Result<f64> {
        let (lo, hi) = self.range;
        let mut s = 0.0;
        for &v in rho.values() {
            if v < lo || v > hi || (v == lo && !self.eval(v).is_finite()) {
                return Err(Error::RangeViolation {
                    name: self.name.clone(),
                    value: v,
                    lo,
                    hi,
                });
            }
            s += self.eval(v);
        }
        Ok(s * rho.grid().cell_volume())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub name: String,
    pub values: Vec<f64>,
    pub max_increase: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// `Σ H(ρ_k) h^d` along the trajectory; passes iff non-increasing up to
/// `1e−8 · max(1, max |value|)` per step.
pub fn convex_monotonicity(traj: &Trajectory, h: &ConvexTestFunction) -> Result<MonotonicityReport> {
    let values: Vec<f64> = traj.densities().map(|d| h.integral(d)).collect::<Result<_>>()?;
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tolerance = CONVEX_STEP_TOL * scale;
    let max_increase = values.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let max_increase = if values.len() < 2 { 0.0 } else { max_increase };
    Ok(MonotonicityReport {
        name: h.name().to_owned(),
        pass: max_increase <= tolerance,
        values,
        max_increase,
        tolerance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DissipationReport {
    pub s: usize,
    pub t: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub alpha: f64,
    pub pass: bool,
}

/// `J(ρ_s) − J(ρ_t) ≥ (1 − 0.05) · α τ Σ_{k=s+1}^{t} Σ |grad div z_k|² h^d − 1e−8`,
/// with `α` the minimum density over snapshots `s..=t`.
pub fn dissipation_check(traj: &Trajectory, s: usize, t: usize) -> Result<DissipationReport> {
    if s >= t || t >= traj.len() {
        return Err(Error::Index(format!(
            "window ({s}, {t}) invalid for a trajectory of {} snapshots",
            traj.len()
        )));
    }
    let lhs = total_variation(traj.density(s).field()) - total_variation(traj.density(t).field());
    let alpha = (s..=t).map(|k| traj.density(k).min()).fold(f64::INFINITY, f64::min);
    let hd = traj.grid.cell_volume();
    let sum: f64 = (s + 1..=t)
        .map(|k| {
            let g = grad(&div(&traj.steps[k - 1].z)).pointwise_norms();
            g.iter().map(|v| v * v).sum::<f64>() * hd
        })
        .sum();
    let rhs = alpha * traj.tau * sum;
    Ok(DissipationReport {
        s,
        t,
        lhs,
        rhs,
        alpha,
        pass: lhs >= rhs * (1.0 - DISSIPATION_SLACK) - 1e-8,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// `4π² Σ v² h^d ≤ Σ |grad v|² h^d · (1 + 10h)` after zero-meaning `v`.
pub fn poincare_check(v: &ScalarField) -> InequalityReport {
    let v = v.zero_mean();
    let lhs = 4.0 * PI * PI * v.inner(&v);
    let g = grad(&v);
    let rhs = g.inner(&g);
    InequalityReport {
        lhs,
        rhs,
        pass: lhs <= rhs * (1.0 + 10.0 * v.grid().h()) + 1e-300,
    }
}

/// `Σ (div z)⁴ h^d ≤ 9 ‖z‖∞² Σ |grad div z|² h^d · (1 + 20h)`.
pub fn gn_check(z: &VectorField) -> InequalityReport {
    let d = div(z);
    let g = grad(&d);
    let lhs = 9.0 * z.sup_norm().powi(2) * g.inner(&g);
    let rhs = d.values().iter().map(|v| v.powi(4)).sum::<f64>() * z.grid().cell_volume();
    InequalityReport {
        lhs,
        rhs,
        pass: rhs <= lhs * (1.0 + 20.0 * z.grid().h()),
    }
}

/// `Σ ρ|K|^q h^d ≥ (Σ ρ|K| h^d)^q ≥ J(ρ)^q`, `K = div z`: the Jensen chain
/// behind the decay argument (unit mass makes `ρ h^d` a probability).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JensenChain {
    pub q: f64,
    pub top: f64,
    pub middle: f64,
    pub bottom: f64,
    pub pass: bool,
}

pub fn jensen_chain_check(rho: &Density, z: &VectorField, q: f64) -> JensenChain {
    let k = div(z);
    let hd = rho.grid().cell_volume();
    let top: f64 = rho.values().iter().zip(k.values()).map(|(r, v)| r * v.abs().powf(q)).sum::<f64>() * hd;
    let m1: f64 = rho.values().iter().zip(k.values()).map(|(r, v)| r * v.abs()).sum::<f64>() * hd;
    let middle = m1.powf(q);
    let bottom = total_variation(rho.field()).powf(q);
    let tol = 1e-9 * top.abs().max(1.0);
    JensenChain {
        q,
        top,
        middle,
        bottom,
        pass: top + tol >= middle && middle + tol >= bottom,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeSample {
    pub t: f64,
    #[serde(rename = "J")]
    pub j: f64,
    /// `A / t`
    pub envelope_t1: f64,
    /// `B t^{−1/3}`
    pub envelope_t13: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub a: f64,
    pub b: f64,
    pub slack: f64,
    pub samples: Vec<EnvelopeSample>,
    pub pass_envelope: bool,
    pub window: (f64, f64),
    /// Exponent `p` of the least-squares fit `J ≈ C t^p` over the window.
    pub exponent: Option<f64>,
    pub constant: Option<f64>,
    /// RMS residual of the fit in `log J`.
    pub fit_residual: Option<f64>,
    pub fit_points: usize,
    /// Every `J` in the window is at or below the extinction floor.
    pub extinct: bool,
}

impl DecayFit {
    /// Fitted exponent `≤ p_max`, an extinct window counting as faster than any power.
    pub fn decays_at_least(&self, p_max: f64) -> bool {
        match self.exponent {
            Some(p) => p <= p_max,
            None => self.extinct,
        }
    }
}

/// Decay envelope `J(ρ(t)) ≤ 1.2 · min{A/t, B t^{−1/3}, J(ρ₀)}` with
/// `A = κ/4π²`, `B = 3κ^{1/3}`, `κ = β/α`, together with a log-log fit of `J`
/// over `window = (t_lo, t_hi)`.
pub fn decay_envelope(traj: &Trajectory, alpha: f64, beta: f64, window: (f64, f64)) -> Result<DecayFit> {
    if !(alpha > 0.0 && beta >= alpha) {
        return Err(Error::validation("alpha", "need 0 < alpha <= beta"));
    }
    let tol = 1e-8 * beta;
    for d in traj.densities() {
        let (lo, hi) = d.minmax();
        if lo < alpha - tol || hi > beta + tol {
            return Err(Error::BoundsViolated(format!(
                "density range [{lo}, {hi}] leaves [{alpha}, {beta}]"
            )));
        }
    }
    let kappa = beta / alpha;
    let a = kappa / (4.0 * PI * PI);
    let b = 3.0 * kappa.cbrt();
    let j0 = total_variation(traj.initial.field());
    let samples: Vec<EnvelopeSample> = traj
        .densities()
        .zip(traj.times())
        .map(|(d, t)| {
            let j = total_variation(d.field());
            let (e1, e13) = if t > 0.0 {
                (a / t, b * t.powf(-1.0 / 3.0))
            } else {
                (f64::INFINITY, f64::INFINITY)
            };
            let bound = e1.min(e13).min(j0);
            EnvelopeSample {
                t,
                j,
                envelope_t1: e1,
                envelope_t13: e13,
                bound,
                pass: j <= ENVELOPE_SLACK * bound + 1e-14,
            }
        })
        .collect();
    let pass_envelope = samples.iter().all(|s| s.pass);

    let in_window: Vec<&EnvelopeSample> = samples
        .iter()
        .filter(|s| s.t > 0.0 && s.t >= window.0 && s.t <= window.1)
        .collect();
    let floor = JFLOOR * j0.max(f64::MIN_POSITIVE);
    let pts: Vec<(f64, f64)> = in_window
        .iter()
        .filter(|s| s.j > floor)
        .map(|s| (s.t.ln(), s.j.ln()))
        .collect();
    let extinct = !in_window.is_empty() && pts.is_empty();
    let (exponent, constant, fit_residual) = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx > 0.0 {
            let p = sxy / sxx;
            let c = my - p * mx;
            let r = (pts.iter().map(|q| (q.1 - c - p * q.0).powi(2)).sum::<f64>() / n).sqrt();
            (Some(p), Some(c.exp()), Some(r))
        } else {
            (None, None, None)
        }
    } else {
        (None, None, None)
    };
    Ok(DecayFit {
        alpha,
        beta,
        kappa,
        a,
        b,
        slack: ENVELOPE_SLACK,
        samples,
        pass_envelope,
        window,
        exponent,
        constant,
        fit_residual,
        fit_points: pts.len(),
        extinct,
    })
}

/// Closed-form bound for `φ' ≤ −c φ^q`, `φ(0) = J0`:
/// `min{J0, [c(q−1)t]^{−1/(q−1)}}`.
pub fn inverse_ode_decay_oracle(j0: f64, c: f64, q: f64, times: &[f64]) -> Result<Vec<f64>> {
    if !(q > 1.0) || !(c > 0.0) {
        return Err(Error::validation("q", "need q > 1 and c > 0"));
    }
    Ok(times
        .iter()
        .map(|&t| {
            if t <= 0.0 {
                j0
            } else {
                j0.min((c * (q - 1.0) * t).powf(-1.0 / (q - 1.0)))
            }
        })
        .collect())
}

type DistanceFn = Arc<dyn Fn(usize, usize) -> f64 + Send + Sync>;

/// Samples of a curve `ω` in a metric space with exponents for the
/// modulus `d(ω(s), ω(t)) ≤ C′ |t − s|^{1 − (γ+1)/q}`.
#[derive(Clone)]
pub struct MetricCurveSamples {
    pub times: Vec<f64>,
    distance: DistanceFn,
    pub q: f64,
    pub gamma: f64,
}

impl fmt::Debug for MetricCurveSamples {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricCurveSamples")
            .field("times", &self.times.len())
            .field("q", &self.q)
            .field("gamma", &self.gamma)
            .finish()
    }
}

impl MetricCurveSamples {
    pub fn new(
        times: Vec<f64>,
        distance: impl Fn(usize, usize) -> f64 + Send + Sync + 'static,
        q: f64,
        gamma: f64,
    ) -> Result<Self> {
        if !(gamma > 0.0 && gamma < q - 1.0) {
            return Err(Error::validation("gamma", "need 0 < gamma < q - 1"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("times", "must be strictly increasing"));
        }
        Ok(Self {
            times,
            distance: Arc::new(distance),
            q,
            gamma,
        })
    }

    /// Real-valued curve with `d = |ω(s) − ω(t)|`.
    pub fn real(times: Vec<f64>, values: Vec<f64>, q: f64, gamma: f64) -> Result<Self> {
        if values.len() != times.len() {
            return Err(Error::validation("values", "one value per time"));
        }
        Self::new(times, move |i, j| (values[i] - values[j]).abs(), q, gamma)
    }

    /// The snapshots of `traj`, with `W₂` distances (exact histogram transport
    /// in 1D, debiased entropic in 2D) computed up front.
    pub fn from_trajectory(traj: &Trajectory, q: f64, gamma: f64) -> Result<Self> {
        let dens: Vec<&Density> = traj.densities().collect();
        let m = dens.len();
        let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
        let ecfg = EntropicConfig::default();
        let d: Vec<f64> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let r = if traj.grid.dim() == 1 {
                    w2_histogram_1d(dens[i], dens[j])
                } else {
                    w2_entropic(dens[i], dens[j], &ecfg)
                };
                r.map(|r| r.w2_squared.max(0.0).sqrt())
            })
            .collect::<Result<_>>()?;
        let mut table = vec![0.0; m * m];
        for (&(i, j), v) in pairs.iter().zip(d) {
            table[i * m + j] = v;
            table[j * m + i] = v;
        }
        Self::new(traj.times(), move |i, j| table[i * m + j], q, gamma)
    }

    pub fn exponent(&self) -> f64 {
        1.0 - (self.gamma + 1.0) / self.q
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        (self.distance)(i, j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderReport {
    pub c_prime: f64,
    pub worst_pair: Option<(usize, usize)>,
    pub exponent: f64,
}

/// `C′ = max_{s<t} d(ω(s), ω(t)) / |t − s|^{1 − (γ+1)/q}` over sampled pairs.
pub fn holder_modulus(samples: &MetricCurveSamples) -> HolderReport {
    let e = samples.exponent();
    let m = samples.times.len();
    let mut best = 0.0;
    let mut worst = None;
    for i in 0..m {
        for j in i + 1..m {
            let r = samples.distance(i, j) / (samples.times[j] - samples.times[i]).powf(e);
            if r > best {
                best = r;
                worst = Some((i, j));
            }
        }
    }
    HolderReport {
        c_prime: best,
        worst_pair: worst,
        exponent: e,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{run_flow, FlowConfig};
    use crate::grid::TorusGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn step_flow() -> Trajectory {
        let n = 64;
        let g = TorusGrid::new(1, n).unwrap();
        let rho0 = Density::new(g, (0..n).map(|i| if i < n / 2 { 1.5 } else { 0.5 }).collect()).unwrap();
        run_flow(&rho0, &FlowConfig::new(2e-4, 12, 1e-3, 0.1)).unwrap()
    }

    #[test]
    fn registration_rejects_concave() {
        assert!(ConvexTestFunction::new("-s^2", |s| -s * s, |_| -2.0, (0.0, 1.0)).is_err());
        assert!(ConvexTestFunction::power(0.5).is_err());
        assert!(ConvexTestFunction::inverse_power(2.0, 0.0).is_err());
        let h = ConvexTestFunction::inverse_power(2.0, 0.1).unwrap();
        assert_eq!(h.eval(0.5), 4.0);
        assert_eq!(h.second_derivative(1.0), 6.0);
    }

    #[test]
    fn uniform_sequences_are_constant() {
        let g = TorusGrid::new(1, 8).unwrap();
        let t = run_flow(&Density::uniform(g), &FlowConfig::new(0.05, 3, 1e-3, 0.05)).unwrap();
        for h in [ConvexTestFunction::square(), ConvexTestFunction::entropy()] {
            let r = convex_monotonicity(&t, &h).unwrap();
            assert!(r.pass && r.values.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-14));
        }
        let d = dissipation_check(&t, 0, 3).unwrap();
        assert!(d.pass && d.lhs == 0.0);
        assert!(dissipation_check(&t, 2, 2).is_err());
        let fit = decay_envelope(&t, 1.0, 1.0, (0.0, 1.0)).unwrap();
        assert!(fit.pass_envelope);
    }

    #[test]
    fn range_violation() {
        let t = step_flow();
        let h = ConvexTestFunction::inverse_power(2.0, 0.7).unwrap();
        assert!(matches!(convex_monotonicity(&t, &h), Err(Error::RangeViolation { .. })));
    }

    #[test]
    fn step_flow_checks() {
        let t = step_flow();
        for h in [
            ConvexTestFunction::square(),
            ConvexTestFunction::entropy(),
            ConvexTestFunction::power(3.0).unwrap(),
            ConvexTestFunction::inverse_power(2.0, 0.1).unwrap(),
        ] {
            let r = convex_monotonicity(&t, &h).unwrap();
            assert!(r.pass, "{r:?}");
        }
        let d = dissipation_check(&t, 0, t.len() - 1).unwrap();
        assert!(d.pass && d.rhs > 0.0, "{d:?}");
        for s in &t.steps {
            assert!(gn_check(&s.z).pass);
            for q in [2.0, 4.0] {
                assert!(jensen_chain_check(&s.rho_next, &s.z, q).pass);
            }
        }
        assert!(matches!(decay_envelope(&t, 0.6, 1.5, (0.0, 1.0)), Err(Error::BoundsViolated(_))));
        let fit = decay_envelope(&t, 0.5, 1.5, (0.0, 1.0)).unwrap();
        assert!(fit.pass_envelope);
    }

    #[test]
    fn poincare_modes() {
        for n in [64, 128] {
            let g = TorusGrid::new(1, n).unwrap();
            let h = 1.0 / n as f64;
            let c1 = poincare_check(&ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).cos()));
            assert!((c1.lhs / c1.rhs - 1.0).abs() <= 2.0 * PI * PI * h * h && c1.pass);
            let c2 = poincare_check(&ScalarField::from_fn(g, |x| (4.0 * PI * x[0]).cos()));
            assert!((c2.lhs / c2.rhs - 0.25).abs() <= 8.0 * PI * PI * h * h);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = TorusGrid::new(2, 32).unwrap();
        for _ in 0..50 {
            let modes: Vec<(f64, f64, f64, f64)> = (0..6)
                .map(|_| {
                    (
                        rng.random_range(-1.0..1.0),
                        rng.random_range(0..4) as f64,
                        rng.random_range(0..4) as f64,
                        rng.random_range(0.0..1.0),
                    )
                })
                .collect();
            let v = ScalarField::from_fn(g, |x| {
                modes.iter().map(|m| m.0 * (2.0 * PI * (m.1 * x[0] + m.2 * x[1] + m.3)).cos()).sum()
            });
            assert!(poincare_check(&v).pass);
        }
    }

    #[test]
    fn gn_smooth_and_zero() {
        let g = TorusGrid::new(1, 128).unwrap();
        assert!(gn_check(&VectorField::zeros(g)).pass);
        let z = VectorField::from_fn(g, |x| [(2.0 * PI * x[0]).sin() / (2.0 * PI), 0.0]);
        let r = gn_check(&z);
        assert!(r.pass && r.rhs < 0.5 * r.lhs);
    }

    #[test]
    fn decay_oracle_constants() {
        let kappa = 3.0;
        let times = [0.0, 0.01, 0.1, 1.0, 10.0, 1e6];
        let a = kappa / (4.0 * PI * PI);
        let big = 1e9;
        let q2 = inverse_ode_decay_oracle(big, 4.0 * PI * PI / kappa, 2.0, &times).unwrap();
        for (t, v) in times.iter().zip(&q2).skip(1) {
            assert!((v - a / t).abs() <= 1e-12 * v);
        }
        // q = 4, c = 1/(9κ): the closed form is (3κ)^{1/3} t^{-1/3}, below 3κ^{1/3} t^{-1/3}
        let q4 = inverse_ode_decay_oracle(big, 1.0 / (9.0 * kappa), 4.0, &times).unwrap();
        for (t, v) in times.iter().zip(&q4).skip(1) {
            let closed = (t / (3.0 * kappa)).powf(-1.0 / 3.0);
            assert!((v - closed).abs() <= 1e-12 * v);
            assert!((v - (3.0 * kappa).cbrt() * t.powf(-1.0 / 3.0)).abs() <= 1e-12 * v);
            assert!(*v < 3.0 * kappa.cbrt() * t.powf(-1.0 / 3.0));
        }
        assert_eq!(q4[0], big);
        assert!(q4.windows(2).all(|w| w[1] <= w[0]) && *q4.last().unwrap() < 1e-1);
    }

    #[test]
    fn holder_calibration() {
        let (q, gamma) = (2.0, 1.0 / 3.0);
        let e = 1.0 - (gamma + 1.0) / q;
        let times: Vec<f64> = (0..=200).map(|k| k as f64 / 200.0).collect();
        let values = times.iter().map(|t| t.powf(e)).collect();
        let r = holder_modulus(&MetricCurveSamples::real(times.clone(), values, q, gamma).unwrap());
        assert!((r.c_prime - 1.0).abs() <= 1e-6, "{r:?}");
        let flat = MetricCurveSamples::real(times.clone(), vec![2.0; times.len()], q, gamma).unwrap();
        assert_eq!(holder_modulus(&flat).c_prime, 0.0);
        assert!(MetricCurveSamples::real(times, vec![0.0; 201], 2.0, 1.0).is_err());
    }
}
