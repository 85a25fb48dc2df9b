//! Squared Wasserstein distances on the torus and Kantorovich potentials.
//!
//! Conventions: `W₂²` is stored unscaled; the potential `φ` returned for
//! `(μ, ν)` lives on `μ`, is zero-meaned, and belongs to the cost
//! `½ d_𝕋²`, so the optimal map is `T = id − ∇φ` with `T#μ = ν`.

mod circle;
mod entropic;
mod lp;

pub use circle::atomic::w2_exact_1d;
pub use circle::histogram::w2_histogram_1d;
pub use entropic::{w2_entropic, w2_entropic_warm, EntropicConfig, EntropicWarmStart};
pub use lp::{w2_lp_oracle, w2_lp_oracle_with_plan, LP_MAX_CELLS};

use serde::{Deserialize, Serialize};

use crate::grid::{grad, ScalarField, TorusGrid, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OtMethod {
    /// Point masses at cell centres, exact circle transport.
    Exact1d,
    /// Piecewise-constant densities, exact circle transport.
    Histogram1d,
    /// Debiased entropic transport (Sinkhorn divergence).
    Entropic,
    /// Exact discrete linear program.
    LpOracle,
}

impl OtMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            OtMethod::Exact1d => "exact-1d",
            OtMethod::Histogram1d => "histogram-1d",
            OtMethod::Entropic => "entropic",
            OtMethod::LpOracle => "lp-oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportResult {
    pub w2_squared: f64,
    /// Potential on the source measure, zero mean.
    pub phi: ScalarField,
    /// Potential on the target measure, when the method produces one.
    pub psi: Option<ScalarField>,
    pub method: OtMethod,
    pub entropic_epsilon: Option<f64>,
    pub marginal_error: f64,
    /// Dual objective rescaled to the `W₂²` scale, when available.
    pub dual_value: Option<f64>,
    pub iterations: usize,
}

/// Squared geodesic distance per axis on the unit torus, halved:
/// `c(x, y) = ½ Σ_d min(|x_d − y_d|, 1 − |x_d − y_d|)²` between cell centres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicCost {
    grid: TorusGrid,
}

impl PeriodicCost {
    pub fn new(grid: TorusGrid) -> Self {
        Self { grid }
    }

    /// Periodic distance between cell indices `a` and `b` along one axis, in cells.
    #[inline]
    pub fn axis_cells(&self, a: usize, b: usize) -> usize {
        let n = self.grid.n();
        let d = a.abs_diff(b);
        d.min(n - d)
    }

    /// `d_𝕋(x_i, x_j)²`
    pub fn dist2(&self, i: usize, j: usize) -> f64 {
        let ci = self.grid.coords(i);
        let cj = self.grid.coords(j);
        let h = self.grid.h();
        let mut s = 0.0;
        for d in 0..self.grid.dim() {
            let k = self.axis_cells(ci[d], cj[d]) as f64 * h;
            s += k * k;
        }
        s
    }

    /// `½ d_𝕋(x_i, x_j)²`
    pub fn c(&self, i: usize, j: usize) -> f64 {
        0.5 * self.dist2(i, j)
    }
}

/// `grad(φ)/τ`: the velocity `−(T − id)/τ` implied by the potential.
pub fn potential_gradient_velocity(res: &TransportResult, tau: f64) -> VectorField {
    grad(&res.phi).scale(1.0 / tau)
}
