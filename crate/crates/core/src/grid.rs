//! Discretisation of the strip: a periodic horizontal interval of length
//! `lx` sampled at `nx` equispaced points, times the unit interval in `y`
//! sampled either at Chebyshev–Gauss–Lobatto points or uniformly.
//!
//! The vertical operators are stored as dense real matrices acting on the
//! column of nodal values of one horizontal mode. Nodes are ordered by
//! increasing `y`, so row `0` is the bottom wall and row `ny - 1` the top.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerticalScheme {
    ChebyshevCollocation,
    FiniteDifference2nd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lx: f64,
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "default_vertical")]
    pub vertical: VerticalScheme,
}

fn default_vertical() -> VerticalScheme {
    VerticalScheme::ChebyshevCollocation
}

impl GridSpec {
    pub fn new(lx: f64, nx: usize, ny: usize, vertical: VerticalScheme) -> Self {
        GridSpec {
            lx,
            nx,
            ny,
            vertical,
        }
    }

    pub fn chebyshev(lx: f64, nx: usize, ny: usize) -> Self {
        Self::new(lx, nx, ny, VerticalScheme::ChebyshevCollocation)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lx.is_finite() && self.lx > 0.0) {
            return Err(Error::InvalidGrid(format!("lx must be positive, got {}", self.lx)));
        }
        if self.nx < 8 || self.nx % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "nx must be even and at least 8, got {}",
                self.nx
            )));
        }
        if self.ny < 9 {
            return Err(Error::InvalidGrid(format!(
                "ny must be at least 9, got {}",
                self.ny
            )));
        }
        Ok(())
    }

    /// Fundamental horizontal wavenumber `2π / lx`.
    pub fn dxi(&self) -> f64 {
        2.0 * PI / self.lx
    }

    /// Largest resolved wavenumber (the Nyquist mode).
    pub fn xi_max(&self) -> f64 {
        self.dxi() * (self.nx / 2) as f64
    }
}

/// Precomputed operators for one [`GridSpec`]. Shared between fields through
/// an `Arc`.
pub struct Grid {
    spec: GridSpec,
    xi: Vec<f64>,
    y: Vec<f64>,
    weights: Vec<f64>,
    d1: DMatrix<f64>,
    d2: DMatrix<f64>,
    integ: DMatrix<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    fwd_pad: Arc<dyn Fft<f64>>,
    inv_pad: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("spec", &self.spec).finish()
    }
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Arc<Grid>> {
        spec.validate()?;
        let nx = spec.nx;
        let xi = (0..nx)
            .map(|k| spec.dxi() * signed_mode(k, nx) as f64)
            .collect();
        let (y, weights, d1, d2, integ) = match spec.vertical {
            VerticalScheme::ChebyshevCollocation => chebyshev_operators(spec.ny),
            VerticalScheme::FiniteDifference2nd => finite_difference_operators(spec.ny),
        };
        let mut planner = FftPlanner::new();
        let npad = 3 * nx / 2;
        Ok(Arc::new(Grid {
            spec,
            xi,
            y,
            weights,
            d1,
            d2,
            integ,
            fwd: planner.plan_fft_forward(nx),
            inv: planner.plan_fft_inverse(nx),
            fwd_pad: planner.plan_fft_forward(npad),
            inv_pad: planner.plan_fft_inverse(npad),
        }))
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn nx(&self) -> usize {
        self.spec.nx
    }

    pub fn ny(&self) -> usize {
        self.spec.ny
    }

    /// Wavenumber of FFT slot `k` (standard FFT ordering).
    pub fn xi(&self, k: usize) -> f64 {
        self.xi[k]
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.xi
    }

    /// Index of the Nyquist slot.
    pub fn nyquist(&self) -> usize {
        self.spec.nx / 2
    }

    pub fn x(&self, i: usize) -> f64 {
        self.spec.lx * i as f64 / self.spec.nx as f64
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Quadrature weights on `[0, 1]` (Clenshaw–Curtis or trapezoid).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn d1(&self) -> &DMatrix<f64> {
        &self.d1
    }

    pub fn d2(&self) -> &DMatrix<f64> {
        &self.d2
    }

    /// Maps nodal values of `f` to nodal values of `y ↦ ∫_0^y f`.
    pub fn integration(&self) -> &DMatrix<f64> {
        &self.integ
    }

    pub(crate) fn fft_forward(&self) -> &Arc<dyn Fft<f64>> {
        &self.fwd
    }

    pub(crate) fn fft_inverse(&self) -> &Arc<dyn Fft<f64>> {
        &self.inv
    }

    pub(crate) fn fft_forward_padded(&self) -> &Arc<dyn Fft<f64>> {
        &self.fwd_pad
    }

    pub(crate) fn fft_inverse_padded(&self) -> &Arc<dyn Fft<f64>> {
        &self.inv_pad
    }
}

/// Signed mode number of FFT slot `k`; the Nyquist slot maps to `-nx/2`.
pub fn signed_mode(k: usize, nx: usize) -> i64 {
    if k < nx / 2 {
        k as i64
    } else {
        k as i64 - nx as i64
    }
}

type Operators = (Vec<f64>, Vec<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>);

fn chebyshev_operators(ny: usize) -> Operators {
    let n = ny - 1;
    let nf = n as f64;
    // x_j = cos(πj/n) runs from 1 down to -1; y = (1 - x)/2 = sin²(πj/2n) runs upward.
    let y: Vec<f64> = (0..=n)
        .map(|j| {
            let s = (PI * j as f64 / (2.0 * nf)).sin();
            s * s
        })
        .collect();
    let c = |i: usize| if i == 0 || i == n { 2.0 } else { 1.0 };

    let mut dx = DMatrix::zeros(ny, ny);
    for i in 0..=n {
        for j in 0..=n {
            if i == j {
                continue;
            }
            // x_i - x_j through the product form, accurate near the ends.
            let diff = 2.0
                * (PI * (i + j) as f64 / (2.0 * nf)).sin()
                * (PI * (j as f64 - i as f64) / (2.0 * nf)).sin();
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            dx[(i, j)] = c(i) / c(j) * sign / diff;
        }
    }
    negative_sum_diagonal(&mut dx);
    let d1 = dx * -2.0;
    let mut d2 = &d1 * &d1;
    negative_sum_diagonal(&mut d2);

    let weights = clenshaw_curtis(n).into_iter().map(|w| 0.5 * w).collect();
    let integ = chebyshev_integration(n);
    (y, weights, d1, d2, integ)
}

fn negative_sum_diagonal(m: &mut DMatrix<f64>) {
    for i in 0..m.nrows() {
        let mut s = 0.0;
        for j in 0..m.ncols() {
            if i != j {
                s += m[(i, j)];
            }
        }
        m[(i, i)] = -s;
    }
}

/// Clenshaw–Curtis weights on `[-1, 1]` for nodes `cos(πj/n)`.
fn clenshaw_curtis(n: usize) -> Vec<f64> {
    let nf = n as f64;
    let mut w = vec![0.0; n + 1];
    let mut v = vec![1.0; n.saturating_sub(1)];
    let theta = |j: usize| PI * j as f64 / nf;
    if n % 2 == 0 {
        w[0] = 1.0 / (nf * nf - 1.0);
        w[n] = w[0];
        for k in 1..n / 2 {
            let kf = k as f64;
            for (idx, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * kf * theta(idx + 1)).cos() / (4.0 * kf * kf - 1.0);
            }
        }
        for (idx, vi) in v.iter_mut().enumerate() {
            *vi -= (nf * theta(idx + 1)).cos() / (nf * nf - 1.0);
        }
    } else {
        w[0] = 1.0 / (nf * nf);
        w[n] = w[0];
        for k in 1..=(n - 1) / 2 {
            let kf = k as f64;
            for (idx, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * kf * theta(idx + 1)).cos() / (4.0 * kf * kf - 1.0);
            }
        }
    }
    for (idx, vi) in v.into_iter().enumerate() {
        w[idx + 1] = 2.0 * vi / nf;
    }
    w
}

/// Spectral integration matrix `y ↦ ∫_0^y` on the Chebyshev nodes.
///
/// Works through Chebyshev coefficients: the antiderivative of the degree-n
/// interpolant is a degree n+1 polynomial, evaluated exactly at the nodes.
fn chebyshev_integration(n: usize) -> DMatrix<f64> {
    let nf = n as f64;
    let ny = n + 1;
    let c = |i: usize| if i == 0 || i == n { 2.0 } else { 1.0 };
    let cosines = DMatrix::from_fn(ny, n + 2, |j, k| (PI * (j * k) as f64 / nf).cos());
    let mut integ = DMatrix::zeros(ny, ny);
    for col in 0..ny {
        // coefficients of the Lagrange basis function attached to node `col`
        let a: Vec<f64> = (0..=n)
            .map(|k| 2.0 / nf / c(k) / c(col) * cosines[(col, k)])
            .collect();
        let coef = |k: usize| if k <= n { a[k] } else { 0.0 };
        let mut b = vec![0.0; n + 2];
        b[1] = coef(0) - 0.5 * coef(2);
        for (k, bk) in b.iter_mut().enumerate().skip(2) {
            *bk = (coef(k - 1) - coef(k + 1)) / (2.0 * k as f64);
        }
        // F(1) - F(x_j), halved for the change of variable y = (1 - x)/2.
        for j in 0..ny {
            let mut s = 0.0;
            for (k, bk) in b.iter().enumerate().skip(1) {
                s += bk * (1.0 - cosines[(j, k)]);
            }
            integ[(j, col)] = 0.5 * s;
        }
    }
    integ
}

fn finite_difference_operators(ny: usize) -> Operators {
    let n = ny - 1;
    let h = 1.0 / n as f64;
    let y = (0..ny).map(|j| j as f64 * h).collect();
    let mut weights = vec![h; ny];
    weights[0] = 0.5 * h;
    weights[n] = 0.5 * h;

    let mut d1 = DMatrix::zeros(ny, ny);
    d1[(0, 0)] = -1.5 / h;
    d1[(0, 1)] = 2.0 / h;
    d1[(0, 2)] = -0.5 / h;
    d1[(n, n)] = 1.5 / h;
    d1[(n, n - 1)] = -2.0 / h;
    d1[(n, n - 2)] = 0.5 / h;
    for j in 1..n {
        d1[(j, j - 1)] = -0.5 / h;
        d1[(j, j + 1)] = 0.5 / h;
    }

    let h2 = h * h;
    let mut d2 = DMatrix::zeros(ny, ny);
    for (k, coef) in [2.0, -5.0, 4.0, -1.0].into_iter().enumerate() {
        d2[(0, k)] = coef / h2;
        d2[(n, n - k)] = coef / h2;
    }
    for j in 1..n {
        d2[(j, j - 1)] = 1.0 / h2;
        d2[(j, j)] = -2.0 / h2;
        d2[(j, j + 1)] = 1.0 / h2;
    }

    let mut integ = DMatrix::zeros(ny, ny);
    for j in 1..ny {
        for i in 0..=j {
            integ[(j, i)] = if i == 0 || i == j { 0.5 * h } else { h };
        }
    }
    (y, weights, d1, d2, integ)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
            .collect()
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(GridSpec::chebyshev(0.0, 16, 16).validate().is_err());
        assert!(GridSpec::chebyshev(1.0, 7, 16).validate().is_err());
        assert!(GridSpec::chebyshev(1.0, 10, 8).validate().is_err());
        assert!(GridSpec::chebyshev(1.0, 8, 9).validate().is_ok());
    }

    #[test]
    fn chebyshev_weights_integrate_polynomials() {
        let g = Grid::new(GridSpec::chebyshev(1.0, 8, 17)).unwrap();
        for p in 0..=16 {
            let q: f64 = g.y().iter().zip(g.weights()).map(|(y, w)| w * y.powi(p)).sum();
            assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "degree {p}");
        }
    }

    #[test]
    fn chebyshev_integration_last_row_is_quadrature() {
        let g = Grid::new(GridSpec::chebyshev(1.0, 8, 33)).unwrap();
        let last = g.ny() - 1;
        for j in 0..g.ny() {
            assert!((g.integration()[(last, j)] - g.weights()[j]).abs() < 1e-14);
            assert_eq!(g.integration()[(0, j)], 0.0);
        }
    }

    #[test]
    fn chebyshev_derivatives_are_spectral() {
        let g = Grid::new(GridSpec::chebyshev(1.0, 8, 64)).unwrap();
        let f: Vec<f64> = g.y().iter().map(|y| (3.0 * PI * y).sin()).collect();
        let df = apply(g.d1(), &f);
        let d2f = apply(g.d2(), &f);
        for (j, y) in g.y().iter().enumerate() {
            assert!((df[j] - 3.0 * PI * (3.0 * PI * y).cos()).abs() < 1e-9);
            assert!((d2f[j] + 9.0 * PI * PI * f[j]).abs() < 1e-7);
        }
    }

    #[test]
    fn finite_difference_second_order() {
        let err = |ny: usize| {
            let g = Grid::new(GridSpec::new(1.0, 8, ny, VerticalScheme::FiniteDifference2nd))
                .unwrap();
            let f: Vec<f64> = g.y().iter().map(|y| (PI * y).sin()).collect();
            let d2f = apply(g.d2(), &f);
            (1..ny - 1)
                .map(|j| (d2f[j] + PI * PI * f[j]).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(33) / err(65);
        assert!((3.8..4.2).contains(&ratio), "ratio {ratio}");
    }
}
