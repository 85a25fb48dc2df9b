//! Periodic grids on the unit torus, grid functions, and the discrete
//! gradient/divergence pair.
//!
//! Cells are indexed with axis 0 running fastest: `idx = i0 + n * i1`.
//! Vector fields are staggered on forward edges: component `d` at cell `i`
//! lives on the edge from `i` to `i + e_d`. The divergence is the negative
//! adjoint of the gradient under plain (unweighted) sums:
//! `Σ div(v)·s = −Σ v·grad(s)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|Σ ρ h^d − 1|` accepted by [`Density::new`].
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dim must be 1 or 2, got {dim}")));
        }
        if n < 2 {
            return Err(Error::InvalidGrid(format!("n must be >= 2, got {n}")));
        }
        Ok(Self { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Total number of cells, `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `h^dim`
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    pub fn coords(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx % self.n, idx / self.n]
        }
    }

    pub fn index(&self, coords: [usize; 2]) -> usize {
        if self.dim == 1 {
            coords[0] % self.n
        } else {
            coords[0] % self.n + self.n * (coords[1] % self.n)
        }
    }

    /// Neighbour of `idx` one cell forward (or backward) along `axis`, wrapping.
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, forward: bool) -> usize {
        let n = self.n;
        let (stride, pos) = if axis == 0 {
            (1, idx % n)
        } else {
            (n, (idx / n) % n)
        };
        if forward {
            if pos + 1 == n {
                idx + stride - n * stride
            } else {
                idx + stride
            }
        } else if pos == 0 {
            idx + n * stride - stride
        } else {
            idx - stride
        }
    }

    /// Cell centre `((i + 1/2) h, ...)`.
    pub fn center(&self, idx: usize) -> [f64; 2] {
        let h = self.h();
        let c = self.coords(idx);
        [(c[0] as f64 + 0.5) * h, (c[1] as f64 + 0.5) * h]
    }

    pub fn check_same(&self, other: &TorusGrid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!(
                "dim {} n {} vs dim {} n {}",
                self.dim, self.n, other.dim, other.n
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidDensity(format!("non-finite value {v}")));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: TorusGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: TorusGrid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    /// Samples `f` at cell centres.
    pub fn from_fn(grid: TorusGrid, mut f: impl FnMut([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.center(i))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Same field with its mean subtracted.
    pub fn zero_mean(&self) -> Self {
        let m = self.mean();
        self.map(|v| v - m)
    }

    /// `Σ a·b·h^d`
    pub fn inner(&self, other: &ScalarField) -> f64 {
        dot(&self.values, &other.values) * self.grid.cell_volume()
    }

    /// `(Σ v² h^d)^{1/2}`
    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Cyclic shift by `k` cells along `axis`: `out(x) = self(x − k e_axis)`.
    pub fn shift(&self, axis: usize, k: isize) -> Self {
        let grid = self.grid;
        let n = grid.n() as isize;
        let mut out = vec![0.0; self.values.len()];
        for (idx, &v) in self.values.iter().enumerate() {
            let mut c = grid.coords(idx);
            c[axis] = (c[axis] as isize + k).rem_euclid(n) as usize;
            out[grid.index(c)] = v;
        }
        Self { grid, values: out }
    }
}

/// Vector field with `dim` components per cell, staggered on forward edges.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: TorusGrid,
    // component-major: comps[d * N + idx]
    comps: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            comps: vec![0.0; grid.dim() * grid.len()],
        }
    }

    /// Builds a field from one vector of values per component.
    pub fn new(grid: TorusGrid, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != grid.dim() {
            return Err(Error::GridMismatch(format!(
                "expected {} components, got {}",
                grid.dim(),
                components.len()
            )));
        }
        let mut comps = Vec::with_capacity(grid.dim() * grid.len());
        for c in components {
            if c.len() != grid.len() {
                return Err(Error::GridMismatch(format!(
                    "component length {} != {}",
                    c.len(),
                    grid.len()
                )));
            }
            comps.extend(c);
        }
        if let Some(v) = comps.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidDensity(format!("non-finite component {v}")));
        }
        Ok(Self { grid, comps })
    }

    pub(crate) fn from_flat_unchecked(grid: TorusGrid, comps: Vec<f64>) -> Self {
        debug_assert_eq!(comps.len(), grid.dim() * grid.len());
        Self { grid, comps }
    }

    pub fn from_fn(grid: TorusGrid, mut f: impl FnMut([f64; 2]) -> [f64; 2]) -> Self {
        let n = grid.len();
        let mut comps = vec![0.0; grid.dim() * n];
        for i in 0..n {
            let v = f(grid.center(i));
            for d in 0..grid.dim() {
                comps[d * n + i] = v[d];
            }
        }
        Self { grid, comps }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn component(&self, d: usize) -> &[f64] {
        let n = self.grid.len();
        &self.comps[d * n..(d + 1) * n]
    }

    pub fn flat(&self) -> &[f64] {
        &self.comps
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.comps
    }

    pub fn at(&self, idx: usize) -> [f64; 2] {
        let n = self.grid.len();
        let mut v = [0.0; 2];
        for (d, slot) in v.iter_mut().enumerate().take(self.grid.dim()) {
            *slot = self.comps[d * n + idx];
        }
        v
    }

    /// Euclidean norm of the component vector at each cell.
    pub fn pointwise_norms(&self) -> Vec<f64> {
        let n = self.grid.len();
        (0..n)
            .map(|i| {
                let mut s = 0.0;
                for d in 0..self.grid.dim() {
                    let c = self.comps[d * n + i];
                    s += c * c;
                }
                s.sqrt()
            })
            .collect()
    }

    /// `max_i |v_i|` with the Euclidean norm per cell.
    pub fn sup_norm(&self) -> f64 {
        self.pointwise_norms().into_iter().fold(0.0, f64::max)
    }

    /// `Σ v·w h^d`
    pub fn inner(&self, other: &VectorField) -> f64 {
        dot(&self.comps, &other.comps) * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            grid: self.grid,
            comps: self.comps.iter().map(|v| a * v).collect(),
        }
    }

    pub fn map_flat(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            comps: self.comps.iter().enumerate().map(|(i, &v)| f(i, v)).collect(),
        }
    }

    pub fn shift(&self, axis: usize, k: isize) -> Self {
        let n = self.grid.len();
        let mut comps = Vec::with_capacity(self.comps.len());
        for d in 0..self.grid.dim() {
            let c = ScalarField::from_vec_unchecked(self.grid, self.component(d).to_vec());
            comps.extend(c.shift(axis, k).into_values());
        }
        debug_assert_eq!(comps.len(), n * self.grid.dim());
        Self {
            grid: self.grid,
            comps,
        }
    }
}

/// Probability density on the torus, stored as cell values.
///
/// Cell masses are `value · h^d`; values are nonnegative with unit total mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    field: ScalarField,
}

impl Density {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        let field = ScalarField::new(grid, values)?;
        Self::from_field(field)
    }

    pub fn from_field(field: ScalarField) -> Result<Self> {
        if let Some(v) = field.values().iter().find(|&&v| v < 0.0) {
            return Err(Error::InvalidDensity(format!("negative value {v}")));
        }
        let mass = field.values().iter().sum::<f64>() * field.grid().cell_volume();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidDensity(format!("mass {mass} != 1")));
        }
        Ok(Self { field })
    }

    /// Rescales nonnegative values to unit mass.
    pub fn normalized(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        let field = ScalarField::new(grid, values)?;
        if let Some(v) = field.values().iter().find(|&&v| v < 0.0) {
            return Err(Error::InvalidDensity(format!("negative value {v}")));
        }
        let mass = field.values().iter().sum::<f64>() * grid.cell_volume();
        if mass <= 0.0 {
            return Err(Error::InvalidDensity("zero total mass".into()));
        }
        Ok(Self {
            field: field.map(|v| v / mass),
        })
    }

    /// Projects values that are already mass-one up to roundoff.
    pub(crate) fn renormalized_unchecked(grid: TorusGrid, values: Vec<f64>) -> Self {
        let mass = values.iter().sum::<f64>() * grid.cell_volume();
        let field = ScalarField::from_vec_unchecked(grid, values).map(|v| v / mass);
        Self { field }
    }

    pub fn uniform(grid: TorusGrid) -> Self {
        Self {
            field: ScalarField::constant(grid, 1.0),
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        self.field.grid()
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn into_field(self) -> ScalarField {
        self.field
    }

    pub fn mass(&self) -> f64 {
        self.values().iter().sum::<f64>() * self.grid().cell_volume()
    }

    pub fn min(&self) -> f64 {
        self.values().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn minmax(&self) -> (f64, f64) {
        (self.min(), self.max())
    }

    /// `(Σ ρ^p h^d)^{1/p}`; `p = ∞` gives the max.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.max();
        }
        let s: f64 = self.values().iter().map(|v| v.powf(p)).sum::<f64>() * self.grid().cell_volume();
        s.powf(1.0 / p)
    }

    pub fn shift(&self, axis: usize, k: isize) -> Self {
        Self {
            field: self.field.shift(axis, k),
        }
    }
}

/// Forward differences divided by `h`, wrapping periodically.
pub fn grad(s: &ScalarField) -> VectorField {
    let grid = *s.grid();
    let mut comps = vec![0.0; grid.dim() * grid.len()];
    grad_into(&grid, s.values(), &mut comps);
    VectorField { grid, comps }
}

/// Backward differences divided by `h`; the negative adjoint of [`grad`].
pub fn div(v: &VectorField) -> ScalarField {
    let grid = *v.grid();
    let mut out = vec![0.0; grid.len()];
    div_into(&grid, &v.comps, &mut out);
    ScalarField { grid, values: out }
}

/// [`grad`] on raw slices; `out` has length `dim * N`.
pub(crate) fn grad_into(grid: &TorusGrid, v: &[f64], out: &mut [f64]) {
    let n = grid.n();
    let inv_h = n as f64;
    let len = grid.len();
    // axis 0
    for row in 0..len / n {
        let base = row * n;
        for i in 0..n - 1 {
            out[base + i] = (v[base + i + 1] - v[base + i]) * inv_h;
        }
        out[base + n - 1] = (v[base] - v[base + n - 1]) * inv_h;
    }
    if grid.dim() == 2 {
        let o = &mut out[len..2 * len];
        for idx in 0..len - n {
            o[idx] = (v[idx + n] - v[idx]) * inv_h;
        }
        for idx in len - n..len {
            o[idx] = (v[idx + n - len] - v[idx]) * inv_h;
        }
    }
}

/// [`div`] on raw slices; `comps` has length `dim * N`.
pub(crate) fn div_into(grid: &TorusGrid, comps: &[f64], out: &mut [f64]) {
    let n = grid.n();
    let inv_h = n as f64;
    let len = grid.len();
    let c = &comps[..len];
    for row in 0..len / n {
        let base = row * n;
        out[base] = (c[base] - c[base + n - 1]) * inv_h;
        for i in 1..n {
            out[base + i] = (c[base + i] - c[base + i - 1]) * inv_h;
        }
    }
    if grid.dim() == 2 {
        let c = &comps[len..2 * len];
        for idx in 0..n {
            out[idx] += (c[idx] - c[idx + len - n]) * inv_h;
        }
        for idx in n..len {
            out[idx] += (c[idx] - c[idx - n]) * inv_h;
        }
    }
}

/// `div(grad s)`, the five-point (three-point in 1D) periodic Laplacian.
pub fn laplacian(s: &ScalarField) -> ScalarField {
    div(&grad(s))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
