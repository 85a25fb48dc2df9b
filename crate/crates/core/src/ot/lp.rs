//! Exact discrete transport between point masses at cell centres, solved as
//! a min-cost flow by successive shortest paths with node potentials.
//!
//! Only meant as an oracle: every Dijkstra pass is dense, `O(N²)`.

use super::{OtMethod, PeriodicCost, TransportResult};
use crate::error::{Error, Result};
use crate::grid::{Density, ScalarField};

/// Largest number of cells accepted by [`w2_lp_oracle`].
pub const LP_MAX_CELLS: usize = 4096;

pub fn w2_lp_oracle(mu: &Density, nu: &Density) -> Result<TransportResult> {
    Ok(w2_lp_oracle_with_plan(mu, nu)?.0)
}

/// As [`w2_lp_oracle`], also returning the optimal plan as `(i, j, mass)` triples.
pub fn w2_lp_oracle_with_plan(mu: &Density, nu: &Density) -> Result<(TransportResult, Vec<(usize, usize, f64)>)> {
    mu.grid().check_same(nu.grid())?;
    let grid = *mu.grid();
    let n = grid.len();
    if n > LP_MAX_CELLS {
        return Err(Error::TooLarge(n));
    }
    let w = grid.cell_volume();
    let mut supply: Vec<f64> = mu.values().iter().map(|v| v * w).collect();
    let mut demand: Vec<f64> = nu.values().iter().map(|v| v * w).collect();
    let a = supply.clone();
    let b = demand.clone();
    let cost = PeriodicCost::new(grid);
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            c[i * n + j] = cost.c(i, j);
        }
    }
    let eps_mass = 1e-15;

    // potentials: left nodes 0..n, right nodes n..2n
    let mut pot = vec![0.0; 2 * n];
    // sparse flows per target: (source, amount)
    let mut flow: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut dist = vec![0.0; 2 * n];
    let mut prev = vec![usize::MAX; 2 * n];
    let mut done = vec![false; 2 * n];

    let mut rounds = 0usize;
    loop {
        let remaining: f64 = demand.iter().filter(|&&d| d > eps_mass).sum();
        if remaining <= 1e-14 || supply.iter().all(|&s| s <= eps_mass) {
            break;
        }
        rounds += 1;
        if rounds > 50 * n + 1000 {
            return Err(Error::NoConvergence {
                solver: "lp-oracle",
                iterations: rounds,
                detail: "augmentation limit reached".into(),
            });
        }
        for v in 0..2 * n {
            dist[v] = f64::INFINITY;
            prev[v] = usize::MAX;
            done[v] = false;
        }
        for i in 0..n {
            if supply[i] > eps_mass {
                dist[i] = 0.0;
            }
        }
        let mut target = usize::MAX;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..2 * n {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u >= n {
                let j = u - n;
                if demand[j] > eps_mass {
                    target = u;
                    break;
                }
                for &(i, x) in &flow[j] {
                    if x > 0.0 && !done[i] {
                        let rc = (-c[i * n + j] + pot[u] - pot[i]).max(0.0);
                        if dist[u] + rc < dist[i] {
                            dist[i] = dist[u] + rc;
                            prev[i] = u;
                        }
                    }
                }
            } else {
                let i = u;
                for j in 0..n {
                    let v = n + j;
                    if !done[v] {
                        let rc = (c[i * n + j] + pot[i] - pot[v]).max(0.0);
                        if dist[u] + rc < dist[v] {
                            dist[v] = dist[u] + rc;
                            prev[v] = u;
                        }
                    }
                }
            }
        }
        if target == usize::MAX {
            return Err(Error::NoConvergence {
                solver: "lp-oracle",
                iterations: rounds,
                detail: "no augmenting path".into(),
            });
        }
        let dt = dist[target];
        for v in 0..2 * n {
            pot[v] += dist[v].min(dt);
        }
        // bottleneck along the path
        let mut amount = demand[target - n];
        let mut v = target;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u >= n {
                // backward edge j → i reduces flow (i, j)
                let j = u - n;
                let x = flow[j].iter().find(|e| e.0 == v).map_or(0.0, |e| e.1);
                amount = amount.min(x);
            }
            v = u;
        }
        amount = amount.min(supply[v]);
        let src = v;
        let mut v = target;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u < n {
                let j = v - n;
                match flow[j].iter_mut().find(|e| e.0 == u) {
                    Some(e) => e.1 += amount,
                    None => flow[j].push((u, amount)),
                }
            } else {
                let j = u - n;
                if let Some(e) = flow[j].iter_mut().find(|e| e.0 == v) {
                    e.1 -= amount;
                }
                flow[j].retain(|e| e.1 > 0.0);
            }
            v = u;
        }
        supply[src] -= amount;
        demand[target - n] -= amount;
    }

    let mut primal = 0.0;
    for (j, fl) in flow.iter().enumerate() {
        for &(i, x) in fl {
            primal += x * c[i * n + j];
        }
    }
    let mut phi: Vec<f64> = pot[..n].iter().map(|p| -p).collect();
    let mut psi: Vec<f64> = pot[n..].to_vec();
    let dual: f64 = a.iter().zip(&phi).map(|(m, p)| m * p).sum::<f64>()
        + b.iter().zip(&psi).map(|(m, p)| m * p).sum::<f64>();
    let mean = phi.iter().sum::<f64>() / n as f64;
    phi.iter_mut().for_each(|v| *v -= mean);
    psi.iter_mut().for_each(|v| *v += mean);
    let marginal_error: f64 = demand.iter().map(|d| d.abs()).sum::<f64>() + supply.iter().map(|s| s.abs()).sum::<f64>();
    let plan = flow
        .iter()
        .enumerate()
        .flat_map(|(j, fl)| fl.iter().map(move |&(i, x)| (i, j, x)))
        .collect();
    let res = TransportResult {
        w2_squared: 2.0 * primal,
        phi: ScalarField::from_vec_unchecked(grid, phi),
        psi: Some(ScalarField::from_vec_unchecked(grid, psi)),
        method: OtMethod::LpOracle,
        entropic_epsilon: None,
        marginal_error,
        dual_value: Some(2.0 * dual),
        iterations: rounds,
    };
    Ok((res, plan))
}
