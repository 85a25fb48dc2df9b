//! Exact quadratic transport on the circle `ℝ/ℤ`.
//!
//! Both models use the lifted monotone coupling: with cumulative
//! distributions `F` (source) and `G` (target), extended by `G(s+1) = G(s)+1`,
//! the coupling with shift `θ` pairs `F⁻¹(t)` with `G⁻¹(t + θ)` and costs
//! `∫₀¹ |F⁻¹(t) − G⁻¹(t+θ)|² dt`, a convex function of `θ`. Its minimum over
//! `θ` is the squared Wasserstein distance on the circle.
//!
//! * [`atomic`] treats the cell values as point masses at cell centres (the
//!   same discrete measures as the LP oracle).
//! * [`histogram`] treats them as piecewise-constant densities; this is the
//!   model the JKO solver uses, because its potential is the exact first
//!   variation of `½W₂²` with respect to the cell values.

use super::{OtMethod, PeriodicCost, TransportResult};
use crate::error::{Error, Result};
use crate::grid::{Density, ScalarField};

fn check_1d(mu: &Density, nu: &Density) -> Result<()> {
    mu.grid().check_same(nu.grid())?;
    if mu.grid().dim() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            got: mu.grid().dim(),
        });
    }
    Ok(())
}

fn cumulative(masses: &[f64]) -> Vec<f64> {
    let mut c = Vec::with_capacity(masses.len() + 1);
    let mut s = 0.0;
    c.push(0.0);
    for &m in masses {
        s += m;
        c.push(s);
    }
    // close the circle exactly
    let total = s;
    for v in c.iter_mut() {
        *v /= total;
    }
    c
}

/// Lifted cell pointer into the target distribution: cell `j` of copy `m`
/// spans `[G_j + m, G_{j+1} + m]` in quantile space.
#[derive(Debug, Clone, Copy)]
struct Cursor {
    j: usize,
    m: i64,
}

fn locate(gc: &[f64], b: &[f64], t: f64) -> Cursor {
    let n = b.len();
    let m = t.floor();
    let tt = t - m;
    let mut j = gc.partition_point(|&g| g <= tt).saturating_sub(1).min(n - 1);
    let mut cur = Cursor { j, m: m as i64 };
    // skip empty cells (their interval is degenerate)
    let mut guard = 0;
    while b[j] <= 0.0 && guard < n {
        j += 1;
        if j == n {
            j = 0;
            cur.m += 1;
        }
        guard += 1;
    }
    cur.j = j;
    cur
}

fn advance(cur: &mut Cursor, b: &[f64]) {
    let n = b.len();
    let mut guard = 0;
    loop {
        cur.j += 1;
        if cur.j == n {
            cur.j = 0;
            cur.m += 1;
        }
        guard += 1;
        if b[cur.j] > 0.0 || guard > n {
            break;
        }
    }
}

/// Piecewise-constant (histogram) model.
pub mod histogram {
    use super::*;

    /// One linear piece of the optimal map on `[x0, x1]` inside source cell `k`;
    /// `d = x − T(x)` at both ends.
    #[derive(Debug, Clone, Copy)]
    pub(crate) struct Piece {
        pub k: usize,
        pub x0: f64,
        pub x1: f64,
        pub d0: f64,
        pub d1: f64,
    }

    pub(crate) struct Problem<'a> {
        pub a: &'a [f64],
        pub fc: Vec<f64>,
        pub b: &'a [f64],
        pub gc: Vec<f64>,
        pub h: f64,
    }

    impl<'a> Problem<'a> {
        pub fn new(a: &'a [f64], b: &'a [f64]) -> Self {
            let n = a.len();
            Self {
                a,
                fc: cumulative(a),
                b,
                gc: cumulative(b),
                h: 1.0 / n as f64,
            }
        }

        fn ginv(&self, cur: Cursor, t: f64) -> f64 {
            let (j, m) = (cur.j, cur.m as f64);
            let lo = self.gc[cur.j] + m;
            let frac = ((t - lo) / (self.gc[j + 1] - self.gc[j])).clamp(0.0, 1.0);
            (j as f64 + frac) * self.h + m
        }

        /// Visits every linear piece of `x ↦ x − G⁻¹(F(x) + θ)` on `[0, 1]`.
        pub fn walk(&self, theta: f64, mut f: impl FnMut(Piece)) {
            let n = self.a.len();
            let h = self.h;
            let mut cur = locate(&self.gc, self.b, theta);
            for k in 0..n {
                let xk = k as f64 * h;
                let ts = self.fc[k] + theta;
                let te = self.fc[k + 1] + theta;
                if te <= ts {
                    let t = self.ginv(cur, ts);
                    f(Piece {
                        k,
                        x0: xk,
                        x1: xk + h,
                        d0: xk - t,
                        d1: xk + h - t,
                    });
                    continue;
                }
                let slope = h / (te - ts);
                let xof = |t: f64| xk + (t - ts) * slope;
                let mut ta = ts;
                loop {
                    let gend = self.gc[cur.j + 1] + cur.m as f64;
                    let tb = te.min(gend);
                    let (xa, xb) = (xof(ta), if tb >= te { xk + h } else { xof(tb) });
                    f(Piece {
                        k,
                        x0: xa,
                        x1: xb,
                        d0: xa - self.ginv(cur, ta),
                        d1: xb - self.ginv(cur, tb),
                    });
                    if te <= gend {
                        break;
                    }
                    ta = gend;
                    advance(&mut cur, self.b);
                }
            }
        }

        /// `2∫₀¹ (T_θ(x) − x) dx`, the derivative of the coupling cost in `θ`.
        pub fn slope(&self, theta: f64) -> f64 {
            let mut s = 0.0;
            self.walk(theta, |p| s -= (p.x1 - p.x0) * (p.d0 + p.d1));
            s
        }

        pub fn cost(&self, theta: f64) -> f64 {
            let h = self.h;
            let mut c = 0.0;
            self.walk(theta, |p| {
                let dens = (self.fc[p.k + 1] - self.fc[p.k]) / h;
                c += dens * (p.x1 - p.x0) * (p.d0 * p.d0 + p.d0 * p.d1 + p.d1 * p.d1) / 3.0;
            });
            c
        }

        /// Optimal shift: root of the nondecreasing [`slope`](Self::slope) in `[−1, 1]`.
        pub fn optimal_theta(&self) -> f64 {
            let (mut lo, mut hi) = (-1.0f64, 1.0f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if self.slope(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }

        /// Cell averages of the potential `φ` with `φ' = x − T(x)`, zero-meaned.
        pub fn potential(&self, theta: f64) -> Vec<f64> {
            let n = self.a.len();
            let mut avg = vec![0.0; n];
            let mut phi = 0.0;
            self.walk(theta, |p| {
                let l = p.x1 - p.x0;
                avg[p.k] += phi * l + l * l * (2.0 * p.d0 + p.d1) / 6.0;
                phi += l * (p.d0 + p.d1) / 2.0;
            });
            let inv_h = 1.0 / self.h;
            for v in avg.iter_mut() {
                *v *= inv_h;
            }
            let mean = avg.iter().sum::<f64>() / n as f64;
            for v in avg.iter_mut() {
                *v -= mean;
            }
            avg
        }
    }

    /// `W₂²(μ, ν)` between piecewise-constant densities, with the potential
    /// `φ` on `μ` (cell averages, zero mean) such that `T = id − φ'`.
    ///
    /// `φ` is the gradient of `½W₂²(·, ν)` at `μ` with respect to the cell
    /// values under the `h`-weighted inner product.
    pub fn w2_histogram_1d(mu: &Density, nu: &Density) -> Result<TransportResult> {
        check_1d(mu, nu)?;
        let p = Problem::new(mu.values(), nu.values());
        let theta = p.optimal_theta();
        let w2 = p.cost(theta).max(0.0);
        let phi = p.potential(theta);
        Ok(TransportResult {
            w2_squared: w2,
            phi: ScalarField::from_vec_unchecked(*mu.grid(), phi),
            psi: None,
            method: OtMethod::Histogram1d,
            entropic_epsilon: None,
            marginal_error: 0.0,
            dual_value: None,
            iterations: 0,
        })
    }
}

/// Point-mass model: cell `i` carries mass `value_i · h` at its centre.
pub mod atomic {
    use super::*;

    /// One segment of the lifted monotone coupling.
    #[derive(Debug, Clone, Copy)]
    pub(crate) struct Segment {
        pub i: usize,
        pub j: usize,
        /// Lifted target position
        pub y: f64,
        pub mass: f64,
    }

    struct Problem<'a> {
        a: &'a [f64],
        fc: Vec<f64>,
        b: &'a [f64],
        gc: Vec<f64>,
        h: f64,
    }

    impl Problem<'_> {
        fn walk(&self, theta: f64, mut f: impl FnMut(Segment)) {
            let n = self.a.len();
            let mut cur = locate(&self.gc, self.b, theta);
            for i in 0..n {
                let ts = self.fc[i] + theta;
                let te = self.fc[i + 1] + theta;
                if te <= ts {
                    continue;
                }
                let mut ta = ts;
                loop {
                    let gend = self.gc[cur.j + 1] + cur.m as f64;
                    let tb = te.min(gend);
                    if tb > ta {
                        f(Segment {
                            i,
                            j: cur.j,
                            y: (cur.j as f64 + 0.5) * self.h + cur.m as f64,
                            mass: tb - ta,
                        });
                    }
                    if te <= gend {
                        break;
                    }
                    ta = gend;
                    advance(&mut cur, self.b);
                }
            }
        }

        fn cost(&self, theta: f64) -> f64 {
            let h = self.h;
            let mut c = 0.0;
            self.walk(theta, |s| {
                let x = (s.i as f64 + 0.5) * h;
                c += s.mass * (x - s.y) * (x - s.y);
            });
            c
        }

        /// Golden-section search of the convex piecewise-linear cost on `[−1, 1]`.
        fn optimal_theta(&self) -> f64 {
            let r = 0.5 * (5f64.sqrt() - 1.0);
            let (mut lo, mut hi) = (-1.0f64, 1.0f64);
            let mut x1 = hi - r * (hi - lo);
            let mut x2 = lo + r * (hi - lo);
            let mut f1 = self.cost(x1);
            let mut f2 = self.cost(x2);
            for _ in 0..200 {
                if hi - lo <= 4.0 * f64::EPSILON {
                    break;
                }
                if f1 <= f2 {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - r * (hi - lo);
                    f1 = self.cost(x1);
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + r * (hi - lo);
                    f2 = self.cost(x2);
                }
            }
            if f1 <= f2 {
                x1
            } else {
                x2
            }
        }
    }

    /// Exact `W₂²` between point-mass measures on the circle.
    ///
    /// The potential is built along the coupling's support chain and then
    /// made `c`-concave by a double `c`-transform with the periodic cost, so
    /// it is defined on empty cells too.
    pub fn w2_exact_1d(mu: &Density, nu: &Density) -> Result<TransportResult> {
        check_1d(mu, nu)?;
        let grid = *mu.grid();
        let h = grid.h();
        let n = grid.n();
        let a: Vec<f64> = mu.values().iter().map(|v| v * h).collect();
        let b: Vec<f64> = nu.values().iter().map(|v| v * h).collect();
        let p = Problem {
            a: &a,
            fc: cumulative(&a),
            b: &b,
            gc: cumulative(&b),
            h,
        };
        let theta = p.optimal_theta();
        let mut segs = Vec::new();
        p.walk(theta, |s| segs.push(s));
        let w2_plan: f64 = segs
            .iter()
            .map(|s| {
                let x = (s.i as f64 + 0.5) * h;
                s.mass * (x - s.y) * (x - s.y)
            })
            .sum();

        // chain: consecutive segments share a source or a target atom
        let mut phi = vec![f64::NAN; n];
        let mut psi = vec![f64::NAN; n];
        for s in &segs {
            let x = (s.i as f64 + 0.5) * h;
            let c = 0.5 * (x - s.y) * (x - s.y);
            if phi[s.i].is_nan() && psi[s.j].is_nan() {
                phi[s.i] = 0.0;
                psi[s.j] = c;
            } else if psi[s.j].is_nan() {
                psi[s.j] = c - phi[s.i];
            } else if phi[s.i].is_nan() {
                phi[s.i] = c - psi[s.j];
            }
        }
        let cost = PeriodicCost::new(grid);
        let supp_mu: Vec<usize> = (0..n).filter(|&i| a[i] > 0.0).collect();
        let supp_nu: Vec<usize> = (0..n).filter(|&j| b[j] > 0.0).collect();
        let ctrans_phi = |psi: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    supp_nu
                        .iter()
                        .map(|&j| cost.c(i, j) - psi[j])
                        .fold(f64::INFINITY, f64::min)
                })
                .collect()
        };
        let ctrans_psi = |phi: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|j| {
                    supp_mu
                        .iter()
                        .map(|&i| cost.c(i, j) - phi[i])
                        .fold(f64::INFINITY, f64::min)
                })
                .collect()
        };
        let phi1 = ctrans_phi(&psi);
        let psi1 = ctrans_psi(&phi1);
        let mut phi2 = ctrans_phi(&psi1);
        let psi2 = ctrans_psi(&phi2);
        let dual: f64 = supp_mu.iter().map(|&i| a[i] * phi2[i]).sum::<f64>()
            + supp_nu.iter().map(|&j| b[j] * psi2[j]).sum::<f64>();
        let mut psi2 = psi2;
        let shift = phi2.iter().sum::<f64>() / n as f64;
        for v in phi2.iter_mut() {
            *v -= shift;
        }
        for v in psi2.iter_mut() {
            *v += shift;
        }
        Ok(TransportResult {
            w2_squared: w2_plan.max(0.0),
            phi: ScalarField::from_vec_unchecked(grid, phi2),
            psi: Some(ScalarField::from_vec_unchecked(grid, psi2)),
            method: OtMethod::Exact1d,
            entropic_epsilon: None,
            marginal_error: 0.0,
            dual_value: Some(2.0 * dual),
            iterations: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::atomic::w2_exact_1d;
    use super::histogram::{w2_histogram_1d, Problem};
    use crate::grid::{Density, TorusGrid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_density(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> Density {
        let g = TorusGrid::new(1, n).unwrap();
        Density::normalized(g, (0..n).map(|_| floor + rng.random_range(0.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn identical_inputs_have_zero_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mu = random_density(&mut rng, 32, 0.1);
        let a = w2_exact_1d(&mu, &mu).unwrap();
        let hgm = w2_histogram_1d(&mu, &mu).unwrap();
        assert!(a.w2_squared < 1e-15, "{}", a.w2_squared);
        assert!(hgm.w2_squared < 1e-15, "{}", hgm.w2_squared);
        assert!(hgm.phi.max_abs() < 1e-12);
    }

    #[test]
    fn translation_of_uniform_block() {
        // a block translated by s: W₂² = s² in both models
        let n = 64;
        let g = TorusGrid::new(1, n).unwrap();
        let block = |off: usize| {
            Density::normalized(g, (0..n).map(|i| if (i + n - off) % n < 8 { 1.0 } else { 0.0 }).collect())
                .unwrap()
        };
        let s = 10.0 / n as f64;
        let a = w2_exact_1d(&block(0), &block(10)).unwrap();
        let hgm = w2_histogram_1d(&block(0), &block(10)).unwrap();
        assert!((a.w2_squared - s * s).abs() < 1e-14);
        assert!((hgm.w2_squared - s * s).abs() < 1e-14);
        // the short way around: shift by n − 10 cells is a distance of 10 cells
        let back = w2_exact_1d(&block(10), &block(0)).unwrap();
        assert!((back.w2_squared - s * s).abs() < 1e-14);
    }

    #[test]
    fn slope_is_the_derivative_of_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mu = random_density(&mut rng, 40, 0.0);
        let nu = random_density(&mut rng, 40, 0.0);
        let p = Problem::new(mu.values(), nu.values());
        for &th in &[-0.3, -0.05, 0.0, 0.12, 0.4] {
            let d = 1e-6;
            let fd = (p.cost(th + d) - p.cost(th - d)) / (2.0 * d);
            assert!((fd - p.slope(th)).abs() < 1e-6, "{fd} vs {}", p.slope(th));
        }
    }

    #[test]
    fn histogram_potential_is_gradient_of_half_w2() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 24;
        let mu = random_density(&mut rng, n, 0.2);
        let nu = random_density(&mut rng, n, 0.2);
        let r = w2_histogram_1d(&mu, &nu).unwrap();
        let h = 1.0 / n as f64;
        for _ in 0..5 {
            // mass-preserving direction
            let mut dir: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let m = dir.iter().sum::<f64>() / n as f64;
            dir.iter_mut().for_each(|v| *v -= m);
            let f = |t: f64| {
                let vals: Vec<f64> = mu.values().iter().zip(&dir).map(|(a, b)| a + t * b).collect();
                let d = Density::renormalized_unchecked(*mu.grid(), vals);
                0.5 * w2_histogram_1d(&d, &nu).unwrap().w2_squared
            };
            let eps = 1e-5;
            let fd = (f(eps) - f(-eps)) / (2.0 * eps);
            let an: f64 = r.phi.values().iter().zip(&dir).map(|(p, d)| p * d).sum::<f64>() * h;
            assert!((fd - an).abs() < 1e-7 * (1.0 + an.abs()), "{fd} vs {an}");
        }
    }

    #[test]
    fn atomic_duality_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let mu = random_density(&mut rng, 32, 0.0);
            let nu = random_density(&mut rng, 32, 0.0);
            let r = w2_exact_1d(&mu, &nu).unwrap();
            let dual = r.dual_value.unwrap();
            assert!((dual - r.w2_squared).abs() < 1e-12, "{dual} vs {}", r.w2_squared);
            let rev = w2_exact_1d(&nu, &mu).unwrap();
            assert!((rev.w2_squared - r.w2_squared).abs() < 1e-12);
        }
    }
}
