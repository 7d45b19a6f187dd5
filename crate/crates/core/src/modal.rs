//! Per-horizontal-mode linear algebra shared by the two solvers.
//!
//! For a horizontal wavenumber `ξ`, write `z = ∂_t²u + ∂_t u` on the interior
//! nodes. Eliminating the pressure through the vertical momentum equation and
//! slaving `v = −iξ ∫_0^y u` to `u` gives
//!
//! ```text
//! (I − ξ²ε² J J) z = (Δ_ε − ξ²ε² J Δ_ε J) u + f − g·1,    w·z = 0,
//! ```
//!
//! with `Δ_ε = ∂_y² − ε²ξ²`, `J` the integration-from-the-bottom matrix, `f`
//! the explicit forcing and `g = iξ p(·, 0)` a scalar multiplier enforcing
//! `∫_0^1 ∂_t²u dy = 0`. At `ε = 0` this is the hydrostatic system with
//! `g = ∂_x p`. Both systems share the constraint `∫_0^1 u dy = 0` for every
//! horizontal mode, including the horizontal mean.
//!
//! The bordered system is solved once per mode; `Q` maps `f` to `z` and
//! `g_row` extracts the multiplier. Time stepping uses the trapezoidal rule
//! for the linear part and Heun's method for the forcing (an IMEX pair of
//! order two whose implicit stage is the Crank–Nicolson step).

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{real_matvec, Field2D};
use crate::grid::Grid;

/// Whether the pressure multiplier is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// `∫_0^1 u dy = 0` enforced through the pressure.
    ZeroMean,
    /// No pressure: the free damped wave operator (linear modal studies).
    Free,
}

#[derive(Debug, Clone)]
struct ModeOperators {
    /// forcing to `z`
    q: DMatrix<f64>,
    /// forcing to multiplier `g`
    g_row: Vec<f64>,
    /// linear stiffness to `z`: `Q L`
    k: DMatrix<f64>,
    /// `(I − c K)^{-1}` with `c = h²/(1 + h)`, `h = dt/2`
    s_inv: DMatrix<f64>,
    /// `Q` applied to the stiffness part only gives `g` through this row
    g_lin: Vec<f64>,
}

/// Precomputed per-mode operators for one `(grid, ε, dt)` triple.
#[derive(Debug, Clone)]
pub struct ModalSystem {
    grid: Arc<Grid>,
    eps: f64,
    dt: f64,
    constraint: Constraint,
    modes: Vec<ModeOperators>,
}

/// Largest `ε · ξ_max` accepted; the pressure elimination integrates from
/// the bottom wall and amplifies round-off like `e^{εξ}`.
pub const MAX_EPS_XI: f64 = 12.0;

/// Relative floor of the Krasny filter applied after every step. Round-off
/// in the vertical operators leaves a plateau near `1e-11` of the largest
/// coefficient, which the analytic weights `e^{a|ξ|}` would otherwise blow
/// up in every diagnostic.
pub const KRASNY_FLOOR: f64 = 1e-10;

/// Filters `(u, ∂_t u)` against a floor relative to their largest coefficient.
pub fn krasny_pair(u: &mut Field2D, ut: &mut Field2D) {
    let floor = KRASNY_FLOOR * u.max_coeff().max(ut.max_coeff());
    u.krasny_filter(floor);
    ut.krasny_filter(floor);
}

impl ModalSystem {
    pub fn new(grid: &Arc<Grid>, eps: f64, dt: f64, constraint: Constraint) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Invariant(format!("dt must be positive, got {dt}")));
        }
        if !(eps >= 0.0) {
            return Err(Error::Invariant(format!("ε must be nonnegative, got {eps}")));
        }
        let exi = eps * grid.spec().xi_max();
        if exi > MAX_EPS_XI {
            return Err(Error::config(
                "eps",
                format!("ε·ξ_max = {exi:.3} exceeds {MAX_EPS_XI}; reduce nx or ε"),
            ));
        }
        let modes = (0..=grid.nx() / 2)
            .map(|m| {
                let xi = grid.spec().dxi() * m as f64;
                build_mode(grid, xi, eps, dt, constraint)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModalSystem {
            grid: grid.clone(),
            eps,
            dt,
            constraint,
            modes,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn constraint(&self) -> Constraint {
        self.constraint
    }

    fn op(&self, slot: usize) -> &ModeOperators {
        let nx = self.grid.nx();
        &self.modes[slot.min(nx - slot)]
    }

    /// Acceleration `∂_t²u` and multiplier `g` (per FFT slot) for the state
    /// `(u, ut)` under forcing `f`. Wall rows of the acceleration are zero.
    pub fn acceleration(
        &self,
        u: &Field2D,
        ut: &Field2D,
        forcing: &Field2D,
    ) -> (Field2D, Vec<Complex64>) {
        let ny = self.grid.ny();
        let mut acc = Field2D::zeros(&self.grid);
        let mut g = vec![Complex64::new(0.0, 0.0); self.grid.nx()];
        for slot in 0..self.grid.nx() {
            let op = self.op(slot);
            let ui = &u.mode(slot)[1..ny - 1];
            let fi = &forcing.mode(slot)[1..ny - 1];
            let z_lin = real_matvec(&op.k, ui);
            let z_f = real_matvec(&op.q, fi);
            g[slot] = dot(&op.g_lin, ui) + dot(&op.g_row, fi);
            let uti = &ut.mode(slot)[1..ny - 1];
            let col = acc.mode_mut(slot);
            for i in 0..ny - 2 {
                col[i + 1] = z_lin[i] + z_f[i] - uti[i];
            }
        }
        (acc, g)
    }

    /// One IMEX step. `forcing` maps `u` to the explicit forcing field.
    pub fn step(
        &self,
        u: &Field2D,
        ut: &Field2D,
        forcing: impl Fn(&Field2D) -> Result<Field2D>,
    ) -> Result<(Field2D, Field2D)> {
        let ny = self.grid.ny();
        let n = ny - 2;
        let h = 0.5 * self.dt;
        let dt = self.dt;
        let f_n = forcing(u)?;

        let mut u_new = Field2D::zeros(&self.grid);
        let mut ut_new = Field2D::zeros(&self.grid);
        let mut qf_n = vec![Vec::new(); self.grid.nx()];
        for slot in 0..self.grid.nx() {
            let op = self.op(slot);
            let ui = &u.mode(slot)[1..ny - 1];
            let uti = &ut.mode(slot)[1..ny - 1];
            let fi = &forcing_slice(&f_n, slot, ny);
            let qf = real_matvec(&op.q, fi);
            let ku = real_matvec(&op.k, ui);
            let mut ru = vec![Complex64::new(0.0, 0.0); n];
            let mut rt = vec![Complex64::new(0.0, 0.0); n];
            for i in 0..n {
                ru[i] = ui[i] + uti[i] * h;
                rt[i] = uti[i] + (ku[i] - uti[i]) * h + qf[i] * dt;
            }
            let rhs: Vec<Complex64> = (0..n).map(|i| ru[i] + rt[i] * (h / (1.0 + h))).collect();
            let us = real_matvec(&op.s_inv, &rhs);
            let kus = real_matvec(&op.k, &us);
            let ucol = u_new.mode_mut(slot);
            for i in 0..n {
                ucol[i + 1] = us[i];
            }
            let tcol = ut_new.mode_mut(slot);
            for i in 0..n {
                tcol[i + 1] = (rt[i] + kus[i] * h) / (1.0 + h);
            }
            qf_n[slot] = qf;
        }
        let f_star = forcing(&u_new)?;
        for (slot, qf) in qf_n.iter().enumerate() {
            let op = self.op(slot);
            let fi = &forcing_slice(&f_star, slot, ny);
            let qs = real_matvec(&op.q, fi);
            let tcol = ut_new.mode_mut(slot);
            for i in 0..n {
                tcol[i + 1] += (qs[i] - qf[i]) * (0.5 * dt);
            }
        }
        krasny_pair(&mut u_new, &mut ut_new);
        Ok((u_new, ut_new))
    }
}

fn forcing_slice(f: &Field2D, slot: usize, ny: usize) -> Vec<Complex64> {
    f.mode(slot)[1..ny - 1].to_vec()
}

fn dot(row: &[f64], x: &[Complex64]) -> Complex64 {
    row.iter().zip(x).map(|(r, x)| x * *r).sum()
}

fn interior(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows() - 2;
    m.view((1, 1), (n, n)).into_owned()
}

fn build_mode(
    grid: &Arc<Grid>,
    xi: f64,
    eps: f64,
    dt: f64,
    constraint: Constraint,
) -> Result<ModeOperators> {
    let ny = grid.ny();
    let n = ny - 2;
    let j = grid.integration();
    let k2 = xi * xi * eps * eps;
    let mut lap = grid.d2().clone();
    for d in 0..ny {
        lap[(d, d)] -= k2;
    }
    let (mass, stiff) = if k2 == 0.0 {
        (DMatrix::identity(n, n), interior(&lap))
    } else {
        let jj = j * j;
        let jlj = j * &lap * j;
        (
            DMatrix::identity(n, n) - interior(&jj) * k2,
            interior(&lap) - interior(&jlj) * k2,
        )
    };

    let (q, g_row) = match constraint {
        Constraint::ZeroMean => {
            let w = grid.weights();
            let mut bordered = DMatrix::zeros(n + 1, n + 1);
            bordered.view_mut((0, 0), (n, n)).copy_from(&mass);
            for i in 0..n {
                bordered[(i, n)] = 1.0;
                bordered[(n, i)] = w[i + 1];
            }
            let inv = bordered
                .try_inverse()
                .ok_or(Error::Singular("bordered modal system"))?;
            let q = inv.view((0, 0), (n, n)).into_owned();
            let g_row = (0..n).map(|i| inv[(n, i)]).collect();
            (q, g_row)
        }
        Constraint::Free => {
            let q = mass.try_inverse().ok_or(Error::Singular("modal mass"))?;
            (q, vec![0.0; n])
        }
    };
    let k = &q * &stiff;
    let g_lin: Vec<f64> = (0..n)
        .map(|c| (0..n).map(|r| g_row[r] * stiff[(r, c)]).sum())
        .collect();
    let h = 0.5 * dt;
    let c = h * h / (1.0 + h);
    let s = DMatrix::identity(n, n) - &k * c;
    let s_inv = s.try_inverse().ok_or(Error::Singular("implicit step"))?;
    Ok(ModeOperators {
        q,
        g_row,
        k,
        s_inv,
        g_lin,
    })
}
