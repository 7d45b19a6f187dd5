//! Hydrostatic hyperbolic system
//!
//! ```text
//! ∂_t²u + ∂_t u + u ∂_x u + v ∂_y u − ∂_y²u + ∂_x p = 0,   ∂_y p = 0,
//! ∂_x u + ∂_y v = 0,   (u, v) = 0 on y = 0, 1,
//! ```
//!
//! with `v = −∫_0^y ∂_x u` and `∂_x p` the multiplier that keeps
//! `∫_0^1 u dy = 0`. On the periodic interval the horizontal mean of `∂_x p`
//! is kept as a force constant in `x`, so the constraint holds for every
//! horizontal mode.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::band::{apply_exponent, AnalyticBandState, ClockKind};
use crate::besov::besov_norm;
use crate::error::{Error, Result};
use crate::field::Field2D;
use crate::grid::Grid;
use crate::modal::{Constraint, ModalSystem};

/// Which terms of the equations are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    pub nonlinear: bool,
    pub pressure: bool,
}

impl Default for Physics {
    fn default() -> Self {
        Physics {
            nonlinear: true,
            pressure: true,
        }
    }
}

impl Physics {
    pub fn linear() -> Self {
        Physics {
            nonlinear: false,
            pressure: true,
        }
    }

    pub(crate) fn constraint(&self) -> Constraint {
        if self.pressure {
            Constraint::ZeroMean
        } else {
            Constraint::Free
        }
    }
}

#[derive(Debug, Clone)]
pub struct HydroState {
    pub u: Field2D,
    pub ut: Field2D,
    pub t: f64,
    pub band: AnalyticBandState,
}

impl HydroState {
    pub fn new(u: Field2D, ut: Field2D, a: f64, lambda: f64) -> Self {
        HydroState {
            u,
            ut,
            t: 0.0,
            band: AnalyticBandState::new(a, lambda, ClockKind::Theta),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.u.grid()
    }

    /// Largest `|∫_0^1 u dy|` and `|∫_0^1 ∂_t u dy|` over the grid points.
    pub fn mean_defect(&self) -> f64 {
        let a = self.u.mean_y_physical();
        let b = self.ut.mean_y_physical();
        a.iter().chain(&b).fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Relative tolerance on `∫_0^1 u dy` accepted by [`recover_v`].
pub const MEAN_TOLERANCE: f64 = 1e-8;

/// `v = −∫_0^y ∂_x u`.
pub fn recover_v(u: &Field2D) -> Result<Field2D> {
    let ux = u.d_dx();
    let v = -&ux.integral_y_from_0();
    let ny = u.ny();
    let top = (0..u.nx()).map(|k| v.coeff(k, ny - 1).norm()).fold(0.0, f64::max);
    let scale = ux.l2_norm();
    if top > MEAN_TOLERANCE * scale + 1e-14 {
        return Err(Error::Compatibility {
            what: "∫_0^1 ∂_x u dy",
            magnitude: top,
            tolerance: MEAN_TOLERANCE * scale,
        });
    }
    Ok(v)
}

/// `∂_x p = ∂_y u(·, 1) − ∂_y u(·, 0) − ∂_x ∫_0^1 u² dy`, as a field constant
/// in `y`.
pub fn pressure_gradient(u: &Field2D) -> Result<Field2D> {
    let uy = u.d_dy();
    let ny = u.ny();
    let sq = u.multiply(u)?;
    let m = sq.mean_y();
    let grid = u.grid();
    let nyq = grid.nyquist();
    let profile: Vec<Complex64> = (0..u.nx())
        .map(|k| {
            let dx = if k == nyq {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, grid.xi(k)) * m[k]
            };
            uy.coeff(k, ny - 1) - uy.coeff(k, 0) - dx
        })
        .collect();
    Ok(Field2D::from_profile(grid, &profile))
}

/// `u ∂_x u + v ∂_y u` with `v` recovered from `u`.
pub fn advection(u: &Field2D) -> Result<Field2D> {
    let v = recover_v(u)?;
    let a = u.multiply(&u.d_dx())?;
    let b = v.multiply(&u.d_dy())?;
    Ok(&a + &b)
}

/// Initial data adjusted to zero vertical mean: `f − (∫_0^1 f dy)·6y(1 − y)`.
pub fn enforce_compatibility(u0: &Field2D, u1: &Field2D) -> (Field2D, Field2D) {
    (remove_mean(u0), remove_mean(u1))
}

fn remove_mean(f: &Field2D) -> Field2D {
    let grid = f.grid();
    let m = f.mean_y();
    let mut out = f.clone();
    for (k, mk) in m.iter().enumerate() {
        for (j, c) in out.mode_mut(k).iter_mut().enumerate() {
            let y = grid.y()[j];
            *c -= mk * (6.0 * y * (1.0 - y));
        }
    }
    out
}

/// `‖e^{width|D_x|} ∂_y f‖_{B^{1/2}}` with the width clamped at zero.
pub(crate) fn weighted_dy_norm(f: &Field2D, width: f64) -> Result<f64> {
    Ok(besov_norm(&apply_exponent(&f.d_dy(), width.max(0.0))?, 0.5).total)
}

/// Time stepper for the hydrostatic system at a fixed `dt`.
#[derive(Debug, Clone)]
pub struct HydroSolver {
    sys: ModalSystem,
    physics: Physics,
}

impl HydroSolver {
    pub fn new(grid: &Arc<Grid>, dt: f64, physics: Physics) -> Result<Self> {
        Ok(HydroSolver {
            sys: ModalSystem::new(grid, 0.0, dt, physics.constraint())?,
            physics,
        })
    }

    pub fn dt(&self) -> f64 {
        self.sys.dt()
    }

    pub fn physics(&self) -> Physics {
        self.physics
    }

    /// `0.25 · min(Δx / max|u|, 1)`; unbounded when advection is off.
    pub fn dt_max(&self, u: &Field2D) -> f64 {
        if !self.physics.nonlinear {
            return f64::INFINITY;
        }
        let dx = u.grid().spec().lx / u.nx() as f64;
        let umax = u.max_abs();
        let r = if umax > 0.0 { dx / umax } else { f64::INFINITY };
        0.25 * r.min(1.0)
    }

    fn forcing(&self, u: &Field2D) -> Result<Field2D> {
        if self.physics.nonlinear {
            Ok(-&advection(u)?)
        } else {
            Ok(Field2D::zeros(u.grid()))
        }
    }

    /// `(∂_t²u, ∂_x p)`.
    pub fn rhs_with_pressure(&self, state: &HydroState) -> Result<(Field2D, Field2D)> {
        let f = self.forcing(&state.u)?;
        let (acc, g) = self.sys.acceleration(&state.u, &state.ut, &f);
        Ok((acc, Field2D::from_profile(state.grid(), &g)))
    }

    /// `∂_t²u = −∂_t u − u∂_x u − v∂_y u + ∂_y²u − ∂_x p`.
    pub fn rhs(&self, state: &HydroState) -> Result<Field2D> {
        Ok(self.rhs_with_pressure(state)?.0)
    }

    /// Instantaneous θ driver `‖∂_y u_φ‖_{B^{1/2}}` at the current band.
    pub fn clock_driver(&self, state: &HydroState) -> Result<f64> {
        weighted_dy_norm(&state.u, state.band.width())
    }

    /// Advances the state by one step and the θ clock by the trapezoid of
    /// its driver (the end value uses the Euler-predicted band).
    pub fn step(&self, state: &mut HydroState) -> Result<()> {
        let dt = self.dt();
        let limit = self.dt_max(&state.u);
        if dt > limit {
            return Err(Error::StepTooLarge { dt, limit });
        }
        let d0 = self.clock_driver(state)?;
        let (u, ut) = self.sys.step(&state.u, &state.ut, |u| self.forcing(u))?;
        if !(u.is_finite() && ut.is_finite()) {
            return Err(Error::BlowUp { time: state.t + dt });
        }
        let width_pred = state.band.width() - state.band.rate * d0 * dt;
        let d1 = weighted_dy_norm(&u, width_pred)?;
        state.u = u;
        state.ut = ut;
        state.t += dt;
        state.band.step_clock(0.5 * (d0 + d1), dt)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid(nx: usize, ny: usize) -> Arc<Grid> {
        Grid::new(GridSpec::chebyshev(2.0 * PI, nx, ny)).unwrap()
    }

    fn random_admissible(g: &Arc<Grid>, rng: &mut ChaCha8Rng) -> Field2D {
        let mut u = Field2D::zeros(g);
        for m in 0..4 {
            for n in 1..4 {
                let (a, b) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let f = Field2D::from_fn(g, |x, y| {
                    (a * (m as f64 * x).cos() + b * (m as f64 * x).sin()) * (n as f64 * PI * y).sin()
                });
                u += &f;
            }
        }
        remove_mean(&u)
    }

    #[test]
    fn recover_v_examples() {
        let g = grid(16, 33);
        let u = Field2D::from_fn(&g, |_, y| (2.0 * PI * y).sin());
        assert!(recover_v(&u).unwrap().max_abs() < 1e-14);
        let u = Field2D::from_fn(&g, |x, y| x.sin() * (2.0 * PI * y).sin());
        let v = recover_v(&u).unwrap();
        let exact = Field2D::from_fn(&g, |x, y| -x.cos() * (1.0 - (2.0 * PI * y).cos()) / (2.0 * PI));
        assert!((&v - &exact).max_abs() < 1e-12);
        let bad = Field2D::from_fn(&g, |x, y| x.sin() * y * (1.0 - y));
        assert!(matches!(recover_v(&bad), Err(Error::Compatibility { .. })));
    }

    #[test]
    fn divergence_of_recovered_v() {
        let g = grid(16, 33);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let u = random_admissible(&g, &mut rng);
            let v = recover_v(&u).unwrap();
            let div = &u.d_dx() + &v.d_dy();
            assert!(div.max_abs() < 1e-8);
            assert!(v.boundary_defect() < 1e-10);
        }
    }

    #[test]
    fn pressure_examples() {
        let g = grid(16, 33);
        assert_eq!(pressure_gradient(&Field2D::zeros(&g)).unwrap().max_abs(), 0.0);
        let a = 0.7;
        let u = Field2D::from_fn(&g, |x, y| a * x.sin() * (2.0 * PI * y).sin());
        // −∂_x ∫ a² sin²x sin²(2πy) dy = −(a²/2) sin 2x
        let exact = Field2D::from_fn(&g, |x, _| -0.5 * a * a * (2.0 * x).sin());
        assert!((&pressure_gradient(&u).unwrap() - &exact).max_abs() < 1e-11);
        let u = Field2D::from_fn(&g, |_, y| (2.0 * PI * y).sin());
        assert!(pressure_gradient(&u).unwrap().max_abs() < 1e-10);
    }

    fn multiplier_mismatch(ny: usize) -> f64 {
        let g = grid(16, ny);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let solver = HydroSolver::new(&g, 0.01, Physics::default()).unwrap();
        let u = random_admissible(&g, &mut rng).scale(0.3);
        let ut = random_admissible(&g, &mut rng);
        let st = HydroState::new(u.clone(), ut, 0.5, 1.0);
        let (_, px) = solver.rhs_with_pressure(&st).unwrap();
        let lit = pressure_gradient(&u).unwrap();
        (&px - &lit).max_abs() / lit.max_abs()
    }

    #[test]
    fn discrete_multiplier_converges_to_pressure_identity() {
        // the collocation multiplier misses the wall rows, whose quadrature
        // weight is O(ny⁻²)
        let (a, b) = (multiplier_mismatch(41), multiplier_mismatch(81));
        assert!(a < 1e-3, "{a}");
        assert!(b < a / 3.0, "{a} {b}");
    }

    #[test]
    fn y_mean_identity() {
        let g = grid(16, 33);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let solver = HydroSolver::new(&g, 0.01, Physics::default()).unwrap();
        for _ in 0..5 {
            let st = HydroState::new(
                random_admissible(&g, &mut rng),
                random_admissible(&g, &mut rng),
                0.5,
                1.0,
            );
            let acc = solver.rhs(&st).unwrap();
            for (a, b) in acc.mean_y().iter().zip(st.ut.mean_y()) {
                assert!((a + b).norm() < 1e-10);
            }
        }
        let zero = HydroState::new(Field2D::zeros(&g), Field2D::zeros(&g), 0.5, 1.0);
        assert_eq!(solver.rhs(&zero).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn compatibility_corrector() {
        let g = grid(8, 17);
        let u0 = Field2D::from_fn(&g, |_, y| y * (1.0 - y));
        let (c, z) = enforce_compatibility(&u0, &Field2D::zeros(&g));
        assert!(c.mean_y().iter().all(|m| m.norm() < 1e-12));
        assert_eq!(z.max_abs(), 0.0);
        let (cc, _) = enforce_compatibility(&c, &z);
        assert!((&cc - &c).max_abs() < 1e-15);
    }

    fn modal_error(dt: f64) -> f64 {
        let g = grid(8, 25);
        let phys = Physics {
            nonlinear: false,
            pressure: false,
        };
        let solver = HydroSolver::new(&g, dt, phys).unwrap();
        let mut st = HydroState::new(
            Field2D::from_fn(&g, |_, y| (PI * y).sin()),
            Field2D::zeros(&g),
            0.5,
            1.0,
        );
        let steps = (1.0 / dt).round() as usize;
        for _ in 0..steps {
            solver.step(&mut st).unwrap();
        }
        let w = (PI * PI - 0.25f64).sqrt();
        let exact = (-0.5f64).exp() * (w.cos() + w.sin() / (2.0 * w));
        let e = Field2D::from_fn(&g, |_, y| exact * (PI * y).sin());
        (&st.u - &e).max_abs()
    }

    #[test]
    fn linear_modal_second_order() {
        let (e1, e2, e3) = (modal_error(0.02), modal_error(0.01), modal_error(0.005));
        for r in [e1 / e2, e2 / e3] {
            assert!((3.6..=4.4).contains(&r), "ratio {r}");
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = grid(8, 17);
        let solver = HydroSolver::new(&g, 0.01, Physics::default()).unwrap();
        let mut st = HydroState::new(Field2D::zeros(&g), Field2D::zeros(&g), 0.5, 1.0);
        for _ in 0..1000 {
            solver.step(&mut st).unwrap();
        }
        assert_eq!(st.u.max_abs(), 0.0);
        assert_eq!(st.band.clock, 0.0);
    }

    #[test]
    fn linear_energy_dissipates() {
        let g = grid(16, 33);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let solver = HydroSolver::new(&g, 0.01, Physics::linear()).unwrap();
        let mut st = HydroState::new(
            random_admissible(&g, &mut rng),
            random_admissible(&g, &mut rng),
            0.5,
            1.0,
        );
        let energy = |s: &HydroState| 0.5 * (s.ut.l2_norm().powi(2) + s.u.d_dy().l2_norm().powi(2));
        let e0 = energy(&st);
        let mut prev = e0;
        for _ in 0..300 {
            solver.step(&mut st).unwrap();
            let e = energy(&st);
            assert!(e <= prev + 1e-10 * e0, "{e} > {prev}");
            prev = e;
        }
        assert!(prev < e0);
        assert!(st.mean_defect() < 1e-12);
    }
}
