//! Scaled anisotropic hyperbolic system
//!
//! ```text
//! ∂_t²u + ∂_t u + N₁ − ε²∂_x²u − ∂_y²u + ∂_x p = 0,
//! ε²(∂_t²v + ∂_t v + N₂ − ε²∂_x²v − ∂_y²v) + ∂_y p = 0,
//! ∂_x u + ∂_y v = 0,
//! ```
//!
//! with `N₁ = u∂_x u + v∂_y u`, `N₂ = u∂_x v + v∂_y v` and homogeneous
//! Dirichlet data on both walls. The vertical velocity is slaved to `u`
//! through `v = −∫_0^y ∂_x u`, so the pair is divergence-free by
//! construction; see [`crate::modal`] for the pressure elimination.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::band::{apply_exponent, AnalyticBandState, ClockKind};
use crate::besov::besov_norm;
use crate::error::{Error, Result};
use crate::field::Field2D;
use crate::grid::Grid;
use crate::hydro::{recover_v, Physics};
use crate::modal::ModalSystem;

#[derive(Debug, Clone)]
pub struct AnisoState {
    pub u: Field2D,
    pub ut: Field2D,
    pub v: Field2D,
    pub vt: Field2D,
    pub t: f64,
    pub eps: f64,
    pub band: AnalyticBandState,
}

impl AnisoState {
    pub fn grid(&self) -> &Arc<Grid> {
        self.u.grid()
    }

    /// `(‖∂_x u + ∂_y v‖, ‖∂_x ∂_t u + ∂_y ∂_t v‖)` in `L²`.
    pub fn divergence(&self) -> (f64, f64) {
        (
            (&self.u.d_dx() + &self.v.d_dy()).l2_norm(),
            (&self.ut.d_dx() + &self.vt.d_dy()).l2_norm(),
        )
    }

    /// `E_ε`: the damped-wave energy of the linear system.
    pub fn linear_energy(&self) -> f64 {
        let e2 = self.eps * self.eps;
        let sq = |f: &Field2D| f.l2_norm().powi(2);
        0.5 * (sq(&self.ut)
            + e2 * sq(&self.vt)
            + sq(&self.u.d_dy())
            + e2 * sq(&self.v.d_dy())
            + e2 * sq(&self.u.d_dx())
            + e2 * e2 * sq(&self.v.d_dx()))
    }
}

/// Well-prepared initial state: `v₀`, `v₁` diagnosed from `u₀`, `u₁`.
pub fn prepare_initial(u0: &Field2D, u1: &Field2D, eps: f64, a: f64, lambda: f64) -> Result<AnisoState> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::config("eps", format!("ε must lie in (0, 1], got {eps}")));
    }
    let mut u = u0.clone();
    let mut ut = u1.clone();
    u.enforce_dirichlet();
    ut.enforce_dirichlet();
    let v = recover_v(&u)?;
    let vt = recover_v(&ut)?;
    Ok(AnisoState {
        u,
        ut,
        v,
        vt,
        t: 0.0,
        eps,
        band: AnalyticBandState::new(a, lambda, ClockKind::Tau),
    })
}

/// `(N₁, N₂)` for a divergence-free pair.
pub fn advection_pair(u: &Field2D, v: &Field2D) -> Result<(Field2D, Field2D)> {
    let ux = u.d_dx();
    let uy = u.d_dy();
    let n1 = &u.multiply(&ux)? + &v.multiply(&uy)?;
    let n2 = &u.multiply(&v.d_dx())? + &v.multiply(&v.d_dy())?;
    Ok((n1, n2))
}

/// Output of the pressure Poisson problem.
#[derive(Debug, Clone)]
pub struct PressureSolution {
    pub p: Field2D,
    pub dpdx: Field2D,
    pub dpdy: Field2D,
    /// Size of the constant absorbed by the `ξ = 0` Neumann problem.
    pub compatibility_residual: f64,
}

/// Solves `∂_x²p + ε⁻²∂_y²p = s` with `∂_y p = g_b` at `y = 0` and
/// `∂_y p = g_t` at `y = 1`, per horizontal mode, by Chebyshev collocation.
/// The `ξ = 0` problem is fixed by `∫_0^1 p dy = 0`; its incompatible part
/// is absorbed by an interior constant, reported in the solution.
pub fn neumann_poisson(
    eps: f64,
    source: &Field2D,
    bottom: &[Complex64],
    top: &[Complex64],
) -> Result<PressureSolution> {
    let grid = source.grid().clone();
    let (nx, ny) = (grid.nx(), grid.ny());
    let d1 = grid.d1();
    let d2 = grid.d2();
    let w = grid.weights();
    let e2 = eps * eps;
    let mut p = Field2D::zeros(&grid);
    let mut residual: f64 = 0.0;
    for k in 0..nx {
        let xi = grid.xi(k);
        let zero = k == 0;
        let n = if zero { ny + 1 } else { ny };
        let mut a = DMatrix::<f64>::zeros(n, n);
        for r in 1..ny - 1 {
            for c in 0..ny {
                a[(r, c)] = d2[(r, c)];
            }
            a[(r, r)] -= e2 * xi * xi;
        }
        for c in 0..ny {
            a[(0, c)] = d1[(0, c)];
            a[(ny - 1, c)] = d1[(ny - 1, c)];
        }
        if zero {
            for r in 1..ny - 1 {
                a[(r, ny)] = 1.0;
            }
            for c in 0..ny {
                a[(ny, c)] = w[c];
            }
        }
        let lu = a.lu();
        let mut re = nalgebra::DVector::zeros(n);
        let mut im = nalgebra::DVector::zeros(n);
        let col = source.mode(k);
        for r in 1..ny - 1 {
            re[r] = e2 * col[r].re;
            im[r] = e2 * col[r].im;
        }
        re[0] = bottom[k].re;
        im[0] = bottom[k].im;
        re[ny - 1] = top[k].re;
        im[ny - 1] = top[k].im;
        let sr = lu.solve(&re).ok_or(Error::Singular("Neumann pressure"))?;
        let si = lu.solve(&im).ok_or(Error::Singular("Neumann pressure"))?;
        let out = p.mode_mut(k);
        for j in 0..ny {
            out[j] = Complex64::new(sr[j], si[j]);
        }
        if zero {
            residual = residual.max(Complex64::new(sr[ny], si[ny]).norm() / e2);
        }
    }
    Ok(PressureSolution {
        dpdx: p.d_dx(),
        dpdy: p.d_dy(),
        p,
        compatibility_residual: residual,
    })
}

/// Pressure of a divergence-free state from the Poisson problem obtained by
/// taking the divergence of the momentum equations, with Neumann data
/// `∂_y p = ε²∂_y²v` on the walls.
pub fn pressure_solve(state: &AnisoState) -> Result<PressureSolution> {
    let (n1, n2) = advection_pair(&state.u, &state.v)?;
    let source = -&(&n1.d_dx() + &n2.d_dy());
    let vyy = state.v.d2_dy2();
    let ny = state.u.ny();
    let e2 = state.eps * state.eps;
    let bottom: Vec<Complex64> = (0..state.u.nx()).map(|k| vyy.coeff(k, 0) * e2).collect();
    let top: Vec<Complex64> = (0..state.u.nx()).map(|k| vyy.coeff(k, ny - 1) * e2).collect();
    neumann_poisson(state.eps, &source, &bottom, &top)
}

/// Accelerations and the pressure gradient used by the stepper.
#[derive(Debug, Clone)]
pub struct AnisoRhs {
    pub utt: Field2D,
    pub vtt: Field2D,
    pub dpdx: Field2D,
    pub dpdy: Field2D,
}

#[derive(Debug, Clone)]
pub struct AnisoSolver {
    sys: ModalSystem,
    physics: Physics,
}

impl AnisoSolver {
    pub fn new(grid: &Arc<Grid>, eps: f64, dt: f64, physics: Physics) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::config("eps", format!("ε must lie in (0, 1], got {eps}")));
        }
        Ok(AnisoSolver {
            sys: ModalSystem::new(grid, eps, dt, physics.constraint())?,
            physics,
        })
    }

    pub fn eps(&self) -> f64 {
        self.sys.eps()
    }

    pub fn dt(&self) -> f64 {
        self.sys.dt()
    }

    pub fn dt_max(&self, u: &Field2D) -> f64 {
        if !self.physics.nonlinear {
            return f64::INFINITY;
        }
        let dx = u.grid().spec().lx / u.nx() as f64;
        let umax = u.max_abs();
        let r = if umax > 0.0 { dx / umax } else { f64::INFINITY };
        0.25 * r.min(1.0)
    }

    /// `−N₁ + ε²∂_x ∫_0^y N₂`.
    fn forcing(&self, u: &Field2D) -> Result<Field2D> {
        if !self.physics.nonlinear {
            return Ok(Field2D::zeros(u.grid()));
        }
        let v = recover_v(u)?;
        let (n1, n2) = advection_pair(u, &v)?;
        let e2 = self.eps() * self.eps();
        Ok((-&n1).axpy(e2, &n2.integral_y_from_0().d_dx()))
    }

    pub fn rhs(&self, state: &AnisoState) -> Result<AnisoRhs> {
        let grid = state.grid();
        let e2 = self.eps() * self.eps();
        let f = self.forcing(&state.u)?;
        let (utt, g) = self.sys.acceleration(&state.u, &state.ut, &f);
        let vtt = -&utt.d_dx().integral_y_from_0();
        // ∂_y p = −ε²(∂_t²v + ∂_t v + N₂ − ε²∂_x²v − ∂_y²v)
        let n2 = if self.physics.nonlinear {
            advection_pair(&state.u, &state.v)?.1
        } else {
            Field2D::zeros(grid)
        };
        let lap_v = &state.v.d2_dy2() + &state.v.d2_dx2().scale(e2);
        let mut av = &(&vtt + &state.vt) + &n2;
        av -= &lap_v;
        let dpdy = av.scale(-e2);
        let mut dpdx = Field2D::from_profile(grid, &g);
        dpdx -= &av.integral_y_from_0().d_dx().scale(e2);
        Ok(AnisoRhs {
            utt,
            vtt,
            dpdx,
            dpdy,
        })
    }

    /// `τ̇ = ‖∂_y u_Θ‖_{B^{1/2}} + ε‖∂_y v_Θ‖_{B^{1/2}}` at band width `width`.
    pub fn clock_driver_at(&self, u: &Field2D, v: &Field2D, width: f64) -> Result<f64> {
        let w = width.max(0.0);
        let a = besov_norm(&apply_exponent(&u.d_dy(), w)?, 0.5).total;
        let b = besov_norm(&apply_exponent(&v.d_dy(), w)?, 0.5).total;
        Ok(a + self.eps() * b)
    }

    pub fn step(&self, state: &mut AnisoState) -> Result<()> {
        let dt = self.dt();
        let limit = self.dt_max(&state.u);
        if dt > limit {
            return Err(Error::StepTooLarge { dt, limit });
        }
        let d0 = self.clock_driver_at(&state.u, &state.v, state.band.width())?;
        let (u, ut) = self.sys.step(&state.u, &state.ut, |u| self.forcing(u))?;
        if !(u.is_finite() && ut.is_finite()) {
            return Err(Error::BlowUp { time: state.t + dt });
        }
        let v = -&u.d_dx().integral_y_from_0();
        let vt = -&ut.d_dx().integral_y_from_0();
        let width_pred = state.band.width() - state.band.rate * d0 * dt;
        let d1 = self.clock_driver_at(&u, &v, width_pred)?;
        state.u = u;
        state.ut = ut;
        state.v = v;
        state.vt = vt;
        state.t += dt;
        state.band.step_clock(0.5 * (d0 + d1), dt)?;
        Ok(())
    }
}
