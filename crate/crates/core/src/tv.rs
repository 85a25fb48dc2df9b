//! Discrete isotropic total variation and executable checks on
//! density/certificate pairs `(ρ, z)`.
//!
//! A pair is *certified* when `‖z‖∞ ≤ 1` and `J(ρ) ≤ −Σ ρ div z h^d`. Since
//! `‖z‖∞ ≤ 1` already forces `−Σ ρ div z h^d ≤ J(ρ)`, the slack
//! `gap = J(ρ) + Σ ρ div z h^d` is nonnegative and a valid certificate is one
//! whose gap vanishes up to tolerance.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{div, dot, grad, ScalarField, VectorField};

/// `J(s) = Σ |grad s| h^d` with the Euclidean norm of the forward-difference vector.
pub fn total_variation(s: &ScalarField) -> f64 {
    grad(s).pointwise_norms().iter().sum::<f64>() * s.grid().cell_volume()
}

/// `gap = J(ρ) + Σ ρ div z h^d`.
pub fn certificate_gap(rho: &ScalarField, z: &VectorField) -> Result<f64> {
    rho.grid().check_same(z.grid())?;
    Ok(total_variation(rho) + rho.inner(&div(z)))
}

/// A scalar field together with a dual field that (approximately) realises
/// its total variation.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifiedPair {
    pub rho: ScalarField,
    pub z: VectorField,
    pub gap: f64,
    pub tol_z: f64,
    pub tol_gap: f64,
}

impl CertifiedPair {
    /// Builds a pair and fails unless it passes [`check_pair`] at the given tolerances.
    pub fn new(rho: ScalarField, z: VectorField, tol_z: f64, tol_gap: f64) -> Result<Self> {
        let report = check_pair(&rho, &z, tol_z, tol_gap)?;
        if !report.pass {
            return Err(Error::validation(
                "certificate",
                format!(
                    "pair not certified: gap {:e} (tol {tol_gap:e}), sup-norm excess {:e} (tol {tol_z:e})",
                    report.gap, report.sup_norm_violation
                ),
            ));
        }
        Ok(Self {
            rho,
            z,
            gap: report.gap,
            tol_z,
            tol_gap,
        })
    }

    pub fn is_valid(&self) -> bool {
        let excess = (self.z.sup_norm() - 1.0).max(0.0);
        excess <= self.tol_z && self.gap <= self.tol_gap && self.gap >= -self.tol_gap
    }
}

/// Outcome of [`check_pair`], optionally extended by the other checks in this module.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub total_variation: f64,
    pub sup_norm: f64,
    pub sup_norm_violation: f64,
    pub gap: f64,
    pub tol_z: f64,
    pub tol_gap: f64,
    pub pass_sup_norm: bool,
    pub pass_gap: bool,
    pub drhodz_value: Option<f64>,
    pub pass_drhodz: Option<bool>,
    pub gn_slack: Option<f64>,
    pub pass_gn: Option<bool>,
    pub levelset_max_mismatch: Option<f64>,
    pub pass: bool,
}

impl CertificateReport {
    /// Recomputes `pass` from the individual flags.
    pub fn refresh_pass(&mut self) {
        self.pass = self.pass_sup_norm
            && self.pass_gap
            && self.pass_drhodz.unwrap_or(true)
            && self.pass_gn.unwrap_or(true);
    }
}

pub fn check_pair(
    rho: &ScalarField,
    z: &VectorField,
    tol_z: f64,
    tol_gap: f64,
) -> Result<CertificateReport> {
    rho.grid().check_same(z.grid())?;
    let j = total_variation(rho);
    let gap = j + rho.inner(&div(z));
    let sup = z.sup_norm();
    let violation = (sup - 1.0).max(0.0);
    let pass_sup_norm = violation <= tol_z;
    let pass_gap = gap.abs() <= tol_gap;
    Ok(CertificateReport {
        total_variation: j,
        sup_norm: sup,
        sup_norm_violation: violation,
        gap,
        tol_z,
        tol_gap,
        pass_sup_norm,
        pass_gap,
        drhodz_value: None,
        pass_drhodz: None,
        gn_slack: None,
        pass_gn: None,
        levelset_max_mismatch: None,
        pass: pass_sup_norm && pass_gap,
    })
}

/// Result of the sign check `Σ grad ρ · grad(div z) h^d ≤ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DrhodzCheck {
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Absolute round-off floor added to relative gap tolerances: a pair with
/// `J = 0` still carries a gap of a few ulps.
pub const GAP_FLOOR: f64 = 1e-14;

/// Relative tolerance of [`check_drhodz`], scaled by `‖∇ρ‖·‖∇div z‖`.
pub const LEMMA2_REL_TOL: f64 = 1e-6;

pub fn check_drhodz(rho: &ScalarField, z: &VectorField) -> Result<DrhodzCheck> {
    rho.grid().check_same(z.grid())?;
    let gr = grad(rho);
    let gd = grad(&div(z));
    let value = gr.inner(&gd);
    let tolerance = LEMMA2_REL_TOL * gr.l2_norm() * gd.l2_norm();
    Ok(DrhodzCheck {
        value,
        tolerance,
        pass: value <= tolerance,
    })
}

/// Applies an increasing map `g` to the density part of `pair` and
/// re-evaluates the certificate gap of `(g(ρ), z)`.
///
/// `g_prime` is sampled on 1000 points of `[min ρ, max ρ]` and at every cell
/// value; any nonpositive sample is rejected.
pub fn contrast_change(
    pair: &CertifiedPair,
    g: impl Fn(f64) -> f64,
    g_prime: impl Fn(f64) -> f64,
) -> Result<CertifiedPair> {
    let vals = pair.rho.values();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    const SAMPLES: usize = 1000;
    let samples = (0..SAMPLES)
        .map(|k| lo + (hi - lo) * k as f64 / (SAMPLES - 1) as f64)
        .chain(vals.iter().copied());
    for s in samples {
        let d = g_prime(s);
        if d.is_nan() || d <= 0.0 {
            return Err(Error::NonMonotoneMap { at: s, derivative: d });
        }
    }
    let rho = ScalarField::new(*pair.rho.grid(), vals.iter().map(|&v| g(v)).collect())?;
    let gap = certificate_gap(&rho, &pair.z)?;
    Ok(CertifiedPair {
        rho,
        z: pair.z.clone(),
        gap,
        tol_z: pair.tol_z,
        tol_gap: pair.tol_gap,
    })
}

/// For each threshold `t`, compares the perimeter of `{ρ ≥ t}` (the discrete
/// TV of its indicator) with `−Σ_{ρ≥t} div z h^d`; returns the largest
/// absolute mismatch.
pub fn check_levelsets(pair: &CertifiedPair, thresholds: &[f64]) -> f64 {
    let grid = *pair.rho.grid();
    let dz = div(&pair.z);
    let w = grid.cell_volume();
    thresholds
        .iter()
        .map(|&t| {
            let ind: Vec<f64> = pair
                .rho
                .values()
                .iter()
                .map(|&v| if v >= t { 1.0 } else { 0.0 })
                .collect();
            let inside = dot(&ind, dz.values()) * w;
            let per = total_variation(&ScalarField::from_vec_unchecked(grid, ind));
            (per + inside).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Density, TorusGrid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn step_1d(n: usize, hi: f64, lo: f64) -> ScalarField {
        let g = TorusGrid::new(1, n).unwrap();
        ScalarField::new(g, (0..n).map(|i| if i < n / 2 { hi } else { lo }).collect()).unwrap()
    }

    /// The piecewise-linear certificate of a two-level periodic step: `−1` on the
    /// down-jump edge, `+1` on the wrap-around up-jump edge.
    fn step_certificate(n: usize) -> VectorField {
        let g = TorusGrid::new(1, n).unwrap();
        let m = n / 2;
        let z: Vec<f64> = (0..n)
            .map(|i| {
                if i < m {
                    // from +1 at i = -1 (== n-1) down to -1 at i = m-1
                    1.0 - 2.0 * (i + 1) as f64 / m as f64
                } else {
                    -1.0 + 2.0 * (i + 1 - m) as f64 / m as f64
                }
            })
            .collect();
        VectorField::new(g, vec![z]).unwrap()
    }

    #[test]
    fn tv_of_constant_and_step() {
        let g = TorusGrid::new(2, 8).unwrap();
        assert_eq!(total_variation(Density::uniform(g).field()), 0.0);
        let s = step_1d(8, 1.5, 0.5);
        assert!((total_variation(&s) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn tv_of_disk_approaches_perimeter() {
        // radially smoothed indicator with a transition layer of fixed width;
        // its continuum TV is the perimeter 2πr times the unit jump
        let (r, w) = (0.25, 0.02);
        let mut errs = Vec::new();
        for n in [64, 128, 256] {
            let g = TorusGrid::new(2, n).unwrap();
            let s = ScalarField::from_fn(g, |x| {
                let rad = ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)).sqrt();
                0.5 * (1.0 - ((rad - r) / w).tanh())
            });
            errs.push((total_variation(&s) - 2.0 * PI * r).abs() / (2.0 * PI * r));
        }
        assert!(errs.iter().all(|&e| e < 0.05), "{errs:?}");
        assert!(errs.windows(2).all(|p| p[1] <= p[0]), "{errs:?}");
    }

    #[test]
    fn uniform_pairs_pass() {
        let g = TorusGrid::new(2, 8).unwrap();
        let rho = Density::uniform(g);
        let r = check_pair(rho.field(), &VectorField::zeros(g), 1e-12, 1e-12).unwrap();
        assert!(r.pass && r.gap == 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = VectorField::from_fn(g, |_| {
            let a: f64 = rng.random_range(0.0..2.0 * PI);
            [0.7 * a.cos(), 0.7 * a.sin()]
        });
        assert!(check_pair(rho.field(), &z, 1e-12, 1e-12).unwrap().pass);
    }

    #[test]
    fn grid_mismatch_detected() {
        let a = TorusGrid::new(1, 8).unwrap();
        let b = TorusGrid::new(1, 16).unwrap();
        assert!(matches!(
            check_pair(&ScalarField::zeros(a), &VectorField::zeros(b), 0.0, 0.0),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn hand_certificate_of_step() {
        for n in [8, 32, 64] {
            let s = step_1d(n, 1.5, 0.5);
            let z = step_certificate(n);
            assert!(z.sup_norm() <= 1.0 + 1e-15);
            let r = check_pair(&s, &z, 1e-12, 1e-12).unwrap();
            assert!(r.pass, "gap {}", r.gap);
            let pair = CertifiedPair::new(s, z, 1e-12, 1e-12).unwrap();
            let h = 1.0 / n as f64;
            let m = check_levelsets(&pair, &[0.4, 0.5, 1.0, 1.5, 1.6]);
            assert!(m <= 2.0 * h, "mismatch {m}");
            // gap = 0 pairs satisfy the sign lemma exactly
            let d = check_drhodz(&pair.rho, &pair.z).unwrap();
            assert!(d.pass, "{d:?}");
        }
    }

    #[test]
    fn contrast_change_identity_and_scaling() {
        let s = step_1d(64, 1.5, 0.5);
        let pair = CertifiedPair::new(s, step_certificate(64), 1e-12, 1e-12).unwrap();
        let same = contrast_change(&pair, |v| v, |_| 1.0).unwrap();
        assert_eq!(same, pair);
        let doubled = contrast_change(&pair, |v| 2.0 * v, |_| 2.0).unwrap();
        assert!(doubled.gap <= 2.0 * pair.gap + 1e-8);
        let c = 0.05;
        assert!(contrast_change(&pair, |v| -1.0 / (v - c), |v| 1.0 / (v - c).powi(2)).is_ok());
        assert!(matches!(
            contrast_change(&pair, |v| -v, |_| -1.0),
            Err(Error::NonMonotoneMap { .. })
        ));
    }

    #[test]
    fn subgradient_inequality_on_random_tests() {
        let s = step_1d(32, 1.5, 0.5);
        let z = step_certificate(32);
        let gap = certificate_gap(&s, &z).unwrap();
        let dz = div(&z);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let sigma = ScalarField::new(*s.grid(), (0..32).map(|_| rng.random_range(0.0..3.0)).collect())
                .unwrap();
            let diff = sigma.zip_map(&s, |a, b| a - b);
            let lower = total_variation(&s) - diff.inner(&dz) - gap;
            assert!(total_variation(&sigma) >= lower - 1e-12);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn tv_is_shift_invariant(v in prop::collection::vec(0.0f64..5.0, 36), k in -10isize..10, axis in 0usize..2) {
                let g = TorusGrid::new(2, 6).unwrap();
                let s = ScalarField::new(g, v).unwrap();
                let a = total_variation(&s);
                let b = total_variation(&s.shift(axis, k));
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
            }

            #[test]
            fn tv_is_positively_homogeneous(v in prop::collection::vec(0.0f64..5.0, 16), a in 0.01f64..10.0, b in -5.0f64..5.0) {
                let g = TorusGrid::new(1, 16).unwrap();
                let s = ScalarField::new(g, v).unwrap();
                let j = total_variation(&s);
                let ja = total_variation(&s.map(|x| a * x + b));
                prop_assert!((ja - a * j).abs() <= 1e-9 * (1.0 + a * j));
            }
        }
    }
}
