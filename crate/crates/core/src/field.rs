//! Scalar fields on the strip in mixed representation: horizontal Fourier
//! coefficients times vertical nodal values.
//!
//! # Normalisation
//!
//! Coefficients are Fourier *series* coefficients,
//! `f(x, y) = Σ_m f̂_m(y) e^{i ξ_m x}` with `ξ_m = 2π m / Lx`, so the forward
//! transform divides the FFT by `Nx`. A field `cos(2πx/Lx)` therefore has
//! coefficient `1/2` on `m = ±1`. The matching `L²` norm is taken per unit
//! horizontal period,
//!
//! ```text
//! ‖f‖²_{L²} = (1/Lx) ∫∫ |f|² dx dy = Σ_m Σ_j w_j |f̂_m(y_j)|²,
//! ```
//!
//! with `w_j` the vertical quadrature weights, which is Parseval's identity
//! for this convention. Every norm in the crate uses it.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone)]
pub struct Field2D {
    grid: Arc<Grid>,
    /// `coeffs[k * ny + j]` is the coefficient of FFT slot `k` at node `y_j`.
    coeffs: Vec<Complex64>,
}

impl Field2D {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Field2D {
            grid: grid.clone(),
            coeffs: vec![Complex64::new(0.0, 0.0); grid.nx() * grid.ny()],
        }
    }

    pub fn from_coeffs(grid: &Arc<Grid>, coeffs: Vec<Complex64>) -> Result<Self> {
        let expected = grid.nx() * grid.ny();
        if coeffs.len() != expected {
            return Err(Error::SizeMismatch {
                expected,
                got: coeffs.len(),
            });
        }
        Ok(Field2D {
            grid: grid.clone(),
            coeffs,
        })
    }

    /// Forward transform of real physical values laid out as
    /// `values[i * ny + j] = f(x_i, y_j)`.
    pub fn transform(grid: &Arc<Grid>, values: &[f64]) -> Result<Self> {
        let (nx, ny) = (grid.nx(), grid.ny());
        if values.len() != nx * ny {
            return Err(Error::SizeMismatch {
                expected: nx * ny,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("physical values"));
        }
        let mut out = Self::zeros(grid);
        let mut row = vec![Complex64::new(0.0, 0.0); nx];
        let scale = 1.0 / nx as f64;
        for j in 0..ny {
            for (i, r) in row.iter_mut().enumerate() {
                *r = Complex64::new(values[i * ny + j], 0.0);
            }
            grid.fft_forward().process(&mut row);
            for (k, r) in row.iter().enumerate() {
                out.coeffs[k * ny + j] = r * scale;
            }
        }
        Ok(out)
    }

    /// Samples `f(x, y)` on the grid and transforms.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let mut values = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            let x = grid.x(i);
            for &y in grid.y() {
                values.push(f(x, y));
            }
        }
        Self::transform(grid, &values).expect("sampled values match the grid")
    }

    /// Inverse transform; returns the real part of the physical values in the
    /// layout accepted by [`Field2D::transform`].
    pub fn inverse_transform(&self) -> Vec<f64> {
        self.inverse_transform_complex()
            .into_iter()
            .map(|c| c.re)
            .collect()
    }

    pub fn inverse_transform_complex(&self) -> Vec<Complex64> {
        let (nx, ny) = (self.nx(), self.ny());
        let mut out = vec![Complex64::new(0.0, 0.0); nx * ny];
        let mut row = vec![Complex64::new(0.0, 0.0); nx];
        for j in 0..ny {
            for (k, r) in row.iter_mut().enumerate() {
                *r = self.coeffs[k * ny + j];
            }
            self.grid.fft_inverse().process(&mut row);
            for (i, r) in row.iter().enumerate() {
                out[i * ny + j] = *r;
            }
        }
        out
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn nx(&self) -> usize {
        self.grid.nx()
    }

    pub fn ny(&self) -> usize {
        self.grid.ny()
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn coeff(&self, k: usize, j: usize) -> Complex64 {
        self.coeffs[k * self.ny() + j]
    }

    /// Vertical column of FFT slot `k`.
    pub fn mode(&self, k: usize) -> &[Complex64] {
        let ny = self.ny();
        &self.coeffs[k * ny..(k + 1) * ny]
    }

    pub fn mode_mut(&mut self, k: usize) -> &mut [Complex64] {
        let ny = self.ny();
        &mut self.coeffs[k * ny..(k + 1) * ny]
    }

    pub fn same_grid(&self, other: &Field2D) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid.spec() == other.grid.spec()
    }

    pub(crate) fn check_grid(&self, other: &Field2D) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Largest violation of `f̂(-ξ) = conj f̂(ξ)`; zero for real data.
    pub fn hermitian_defect(&self) -> f64 {
        let nx = self.nx();
        let mut worst: f64 = 0.0;
        for k in 0..nx {
            let kk = (nx - k) % nx;
            for j in 0..self.ny() {
                worst = worst.max((self.coeff(k, j) - self.coeff(kk, j).conj()).norm());
            }
        }
        worst
    }

    /// Multiplies FFT slot `k` by `factor(k, ξ_k)`.
    pub fn map_modes(&self, factor: impl Fn(usize, f64) -> Complex64) -> Field2D {
        let mut out = self.clone();
        for k in 0..self.nx() {
            let c = factor(k, self.grid.xi(k));
            for v in out.mode_mut(k) {
                *v *= c;
            }
        }
        out
    }

    /// Same as [`Field2D::map_modes`] with a real factor depending on `|ξ|`.
    pub fn scale_modes(&self, factor: impl Fn(f64) -> f64) -> Field2D {
        self.map_modes(|_, xi| Complex64::new(factor(xi.abs()), 0.0))
    }

    /// Applies a real `ny × ny` matrix to every vertical column.
    pub fn apply_vertical(&self, m: &DMatrix<f64>) -> Field2D {
        let mut out = Field2D::zeros(&self.grid);
        for k in 0..self.nx() {
            real_matvec_into(m, self.mode(k), out.mode_mut(k));
        }
        out
    }

    /// `∂_x`: multiplies mode `m` by `i ξ_m`. The Nyquist slot is zeroed, as
    /// its derivative is not representable as a real field.
    pub fn d_dx(&self) -> Field2D {
        let nyq = self.grid.nyquist();
        self.map_modes(|k, xi| {
            if k == nyq {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, xi)
            }
        })
    }

    pub fn d2_dx2(&self) -> Field2D {
        self.map_modes(|_, xi| Complex64::new(-xi * xi, 0.0))
    }

    pub fn d_dy(&self) -> Field2D {
        self.apply_vertical(self.grid.d1())
    }

    pub fn d2_dy2(&self) -> Field2D {
        self.apply_vertical(self.grid.d2())
    }

    /// `y ↦ ∫_0^y f(x, s) ds`; vanishes identically on the bottom row.
    pub fn integral_y_from_0(&self) -> Field2D {
        let mut out = self.apply_vertical(self.grid.integration());
        for k in 0..self.nx() {
            out.mode_mut(k)[0] = Complex64::new(0.0, 0.0);
        }
        out
    }

    /// `∫_0^1 f dy` as Fourier coefficients of a horizontal profile.
    pub fn mean_y(&self) -> Vec<Complex64> {
        let w = self.grid.weights();
        (0..self.nx())
            .map(|k| self.mode(k).iter().zip(w).map(|(c, w)| c * *w).sum())
            .collect()
    }

    /// Physical values of `∫_0^1 f dy` at the points `x_i`.
    pub fn mean_y_physical(&self) -> Vec<f64> {
        let mut row = self.mean_y();
        self.grid.fft_inverse().process(&mut row);
        row.into_iter().map(|c| c.re).collect()
    }

    /// Field constant in `y` with the given horizontal coefficients.
    pub fn from_profile(grid: &Arc<Grid>, profile: &[Complex64]) -> Field2D {
        let mut out = Field2D::zeros(grid);
        for (k, c) in profile.iter().enumerate().take(grid.nx()) {
            for v in out.mode_mut(k) {
                *v = *c;
            }
        }
        out
    }

    /// Pointwise product with 3/2-rule horizontal dealiasing.
    ///
    /// The result is the exact product of the two represented trigonometric
    /// polynomials, truncated to `|m| < Nx/2`; the Nyquist slot of the result
    /// is set to zero because it receives aliased contributions.
    pub fn multiply(&self, other: &Field2D) -> Result<Field2D> {
        self.check_grid(other)?;
        let (nx, ny) = (self.nx(), self.ny());
        let npad = 3 * nx / 2;
        let half = nx / 2;
        let mut out = Field2D::zeros(&self.grid);
        let mut a = vec![Complex64::new(0.0, 0.0); npad];
        let mut b = vec![Complex64::new(0.0, 0.0); npad];
        for j in 0..ny {
            pad_row(self, j, &mut a);
            pad_row(other, j, &mut b);
            self.grid.fft_inverse_padded().process(&mut a);
            self.grid.fft_inverse_padded().process(&mut b);
            for (x, y) in a.iter_mut().zip(&b) {
                *x *= y;
            }
            self.grid.fft_forward_padded().process(&mut a);
            let scale = 1.0 / npad as f64;
            for k in 0..half {
                out.coeffs[k * ny + j] = a[k] * scale;
            }
            for k in half + 1..nx {
                out.coeffs[k * ny + j] = a[npad - (nx - k)] * scale;
            }
        }
        Ok(out)
    }

    /// `L²` norm per unit horizontal period (see the module docs).
    pub fn l2_norm(&self) -> f64 {
        self.mode_energies().iter().sum::<f64>().sqrt()
    }

    /// `Σ_j w_j |f̂_k(y_j)|²` for every FFT slot `k`.
    pub fn mode_energies(&self) -> Vec<f64> {
        let w = self.grid.weights();
        (0..self.nx())
            .map(|k| self.mode(k).iter().zip(w).map(|(c, w)| w * c.norm_sqr()).sum())
            .collect()
    }

    /// Largest physical magnitude over the grid nodes.
    pub fn max_abs(&self) -> f64 {
        self.inverse_transform_complex()
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// Largest coefficient magnitude on the wall rows.
    pub fn boundary_defect(&self) -> f64 {
        let ny = self.ny();
        (0..self.nx())
            .map(|k| self.coeff(k, 0).norm().max(self.coeff(k, ny - 1).norm()))
            .fold(0.0, f64::max)
    }

    /// Zeroes the wall rows `y = 0` and `y = 1`.
    pub fn enforce_dirichlet(&mut self) {
        let ny = self.ny();
        for k in 0..self.nx() {
            let col = self.mode_mut(k);
            col[0] = Complex64::new(0.0, 0.0);
            col[ny - 1] = Complex64::new(0.0, 0.0);
        }
    }

    /// Largest coefficient modulus.
    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// Krasny filter: zeroes every horizontal mode whose largest coefficient
    /// is below `floor`.
    pub fn krasny_filter(&mut self, floor: f64) {
        for k in 0..self.nx() {
            let col = self.mode_mut(k);
            if col.iter().all(|c| c.norm() < floor) {
                col.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            }
        }
    }

    pub fn scale(&self, s: f64) -> Field2D {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Field2D) -> Field2D {
        let mut out = self.clone();
        out.add_scaled(s, other);
        out
    }

    pub fn add_scaled(&mut self, s: f64, other: &Field2D) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * s;
        }
    }
}

fn pad_row(f: &Field2D, j: usize, buf: &mut [Complex64]) {
    let (nx, ny) = (f.nx(), f.ny());
    let npad = buf.len();
    let half = nx / 2;
    buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
    for k in 0..half {
        buf[k] = f.coeffs[k * ny + j];
    }
    for k in half + 1..nx {
        buf[npad - (nx - k)] = f.coeffs[k * ny + j];
    }
    // The Nyquist coefficient stands for a cosine; split it over ±nx/2.
    let nyq = f.coeffs[half * ny + j] * 0.5;
    buf[half] = nyq;
    buf[npad - half] = nyq;
}

/// `out = m · x` for a real matrix and complex vector.
pub(crate) fn real_matvec_into(m: &DMatrix<f64>, x: &[Complex64], out: &mut [Complex64]) {
    out.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
    for (col, xv) in x.iter().enumerate() {
        if xv.re == 0.0 && xv.im == 0.0 {
            continue;
        }
        let column = m.column(col);
        for (o, mv) in out.iter_mut().zip(column.iter()) {
            *o += xv * *mv;
        }
    }
}

pub(crate) fn real_matvec(m: &DMatrix<f64>, x: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); m.nrows()];
    real_matvec_into(m, x, &mut out);
    out
}

impl Add<&Field2D> for &Field2D {
    type Output = Field2D;
    fn add(self, rhs: &Field2D) -> Field2D {
        self.axpy(1.0, rhs)
    }
}

impl Sub<&Field2D> for &Field2D {
    type Output = Field2D;
    fn sub(self, rhs: &Field2D) -> Field2D {
        self.axpy(-1.0, rhs)
    }
}

impl Neg for &Field2D {
    type Output = Field2D;
    fn neg(self) -> Field2D {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &Field2D {
    type Output = Field2D;
    fn mul(self, rhs: f64) -> Field2D {
        self.scale(rhs)
    }
}

impl AddAssign<&Field2D> for Field2D {
    fn add_assign(&mut self, rhs: &Field2D) {
        self.add_scaled(1.0, rhs);
    }
}

impl SubAssign<&Field2D> for Field2D {
    fn sub_assign(&mut self, rhs: &Field2D) {
        self.add_scaled(-1.0, rhs);
    }
}
