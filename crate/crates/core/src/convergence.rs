//! Paired anisotropic/hydrostatic runs, the remainder
//! `(R¹, R²) = (u^ε − u, v^ε − v)` and ε-sweeps of its functional.
//!
//! The remainder system is
//!
//! ```text
//! ∂_t²R¹ + ∂_tR¹ − Δ_ε R¹ + ∂_x q = F¹
//! ε²(∂_t²R² + ∂_tR² − Δ_ε R²) + ∂_y q = F²
//! ```
//!
//! with `q = p^ε − p`, `F¹ = ε²∂_x²u − (N₁^ε − N₁)` and
//! `F² = −ε²(∂_t²v + ∂_tv − Δ_ε v + u^ε∂_x v^ε + v^ε∂_y v^ε)`, where `u, v`
//! is the hydrostatic pair.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aniso::{advection_pair, prepare_initial, AnisoSolver, AnisoState};
use crate::band::{AnalyticBandState, ClockKind};
use crate::catalog::InitialData;
use crate::config::RunConfig;
use crate::energy::{pair_data_norm, track_remainder, weighted_besov, EnergyLedger, LedgerKind, Remainder};
use crate::error::{Error, Result};
use crate::field::Field2D;
use crate::grid::{Grid, GridSpec};
use crate::hydro::{recover_v, HydroSolver, HydroState, Physics};

/// Relative tolerance on matching time stamps.
const TIME_TOL: f64 = 1e-12;

/// `(u^ε − u, ∂_t u^ε − ∂_t u, v^ε − v, ∂_t v^ε − ∂_t v)` with the
/// hydrostatic `v` recovered from `u`.
pub fn remainder(aniso: &AnisoState, hydro: &HydroState) -> Result<Remainder> {
    if (aniso.t - hydro.t).abs() > TIME_TOL * aniso.t.abs().max(1.0) {
        return Err(Error::TimeMismatch(aniso.t, hydro.t));
    }
    aniso.u.check_grid(&hydro.u)?;
    let v = recover_v(&hydro.u)?;
    let vt = recover_v(&hydro.ut)?;
    Ok(Remainder {
        r1: &aniso.u - &hydro.u,
        rt1: &aniso.ut - &hydro.ut,
        r2: &aniso.v - &v,
        rt2: &aniso.vt - &vt,
    })
}

/// Both sides of the remainder system at one synchronized time level.
#[derive(Debug, Clone)]
pub struct ForcingResidual {
    pub res1: Field2D,
    pub res2: Field2D,
    pub f1: Field2D,
    pub f2: Field2D,
}

impl ForcingResidual {
    /// `(‖res¹‖/‖F¹‖, ‖res²‖/‖F²‖)` over interior rows; 0 when both vanish.
    pub fn relative(&self) -> (f64, f64) {
        let rel = |r: &Field2D, f: &Field2D| {
            let (rn, fn_) = (interior_norm(r), interior_norm(f));
            if rn == 0.0 {
                0.0
            } else {
                rn / fn_
            }
        };
        (rel(&self.res1, &self.f1), rel(&self.res2, &self.f2))
    }
}

/// `L²` norm with the wall rows dropped. The walls carry the Dirichlet
/// condition instead of the momentum equations.
fn interior_norm(f: &Field2D) -> f64 {
    let mut g = f.clone();
    g.enforce_dirichlet();
    g.l2_norm()
}

/// Evaluates `res_i = (left side i) − F^i` using the accelerations and
/// pressure gradients each solver produces at the given states.
pub fn forcing_residual(
    aniso_solver: &AnisoSolver,
    hydro_solver: &HydroSolver,
    aniso: &AnisoState,
    hydro: &HydroState,
) -> Result<ForcingResidual> {
    let rem = remainder(aniso, hydro)?;
    let eps = aniso_solver.eps();
    let e2 = eps * eps;
    let nonlinear = hydro_solver.physics().nonlinear;
    let ar = aniso_solver.rhs(aniso)?;
    let (utt, dpdx) = hydro_solver.rhs_with_pressure(hydro)?;
    let v = recover_v(&hydro.u)?;
    let vt = recover_v(&hydro.ut)?;
    let vtt = recover_v(&utt)?;
    let lap = |f: &Field2D| &f.d2_dy2() + &f.d2_dx2().scale(e2);

    // F¹ = ε²∂_x²u − (N₁^ε − N₁)
    let mut f1 = hydro.u.d2_dx2().scale(e2);
    let mut n2e = Field2D::zeros(aniso.grid());
    if nonlinear {
        let (n1e, n2) = advection_pair(&aniso.u, &aniso.v)?;
        let (n1, _) = advection_pair(&hydro.u, &v)?;
        f1 -= &(&n1e - &n1);
        n2e = n2;
    }
    // F² = −ε²(∂_t²v + ∂_tv − Δ_ε v + N₂^ε)
    let mut a2 = &(&vtt + &vt) - &lap(&v);
    a2 += &n2e;
    let f2 = a2.scale(-e2);

    let mut res1 = &(&ar.utt - &utt) + &rem.rt1;
    res1 -= &lap(&rem.r1);
    res1 += &(&ar.dpdx - &dpdx);
    res1 -= &f1;

    // the hydrostatic pressure does not depend on y
    let mut res2 = (&(&(&ar.vtt - &vtt) + &rem.rt2) - &lap(&rem.r2)).scale(e2);
    res2 += &ar.dpdy;
    res2 -= &f2;

    Ok(ForcingResidual { res1, res2, f1, f2 })
}

/// `η̇ = ‖(∂_y u^ε, ε∂_x u^ε)_Θ‖_{B^{1/2}} + ‖∂_y u_φ‖_{B^{1/2}}`, where `Θ`
/// uses the anisotropic band and `φ` uses `eta_width = a − μη`.
pub fn eta_clock_driver(aniso: &AnisoState, hydro: &HydroState, eta_width: f64) -> Result<f64> {
    eta_driver_fields(&aniso.u, aniso.eps, aniso.band.width(), &hydro.u, eta_width)
}

fn eta_driver_fields(ue: &Field2D, eps: f64, theta_width: f64, u: &Field2D, eta_width: f64) -> Result<f64> {
    let (uy_e, ux_e) = (ue.d_dy(), ue.d_dx());
    let uy = u.d_dy();
    Ok(weighted_besov(&[(1.0, &uy_e), (eps, &ux_e)], theta_width.max(0.0), 0.5)?
        + weighted_besov(&[(1.0, &uy)], eta_width.max(0.0), 0.5)?)
}

/// Knobs of a paired run that are not part of the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairParams {
    pub a: f64,
    pub lambda: f64,
    pub mu: f64,
    pub r: f64,
    pub dt: f64,
    pub steps: usize,
    pub physics: Physics,
    /// Ill-prepared mode: the anisotropic data are `(1 + δ)` times the
    /// hydrostatic data. Zero gives well-prepared data.
    pub perturbation: f64,
}

impl PairParams {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        Ok(PairParams {
            a: cfg.band.a,
            lambda: cfg.band.lambda,
            mu: cfg.mu(),
            r: cfg.resolved_r()?,
            dt: cfg.dt,
            steps: cfg.steps(),
            physics: cfg.physics,
            perturbation: 0.0,
        })
    }
}

/// Time series and terminal values of one paired run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemainderRecord {
    pub eps: f64,
    pub times: Vec<f64>,
    /// Instantaneous weighted `B^{1/2}` norms of `(R¹ + ∂_tR¹, ε(R² + ∂_tR²))`,
    /// `∂_y(R¹, εR²)`, `ε∂_x(R¹, εR²)` and `(∂_tR¹, ε∂_tR²)`.
    pub groupings: Vec<[f64; 4]>,
    /// Chemin–Lerner totals of every term of the functional.
    pub terminal_terms: Vec<(String, f64)>,
    /// `L̃^∞_t(B^{1/2})` part of the functional at the final time.
    pub terminal_norm: f64,
    /// The whole functional at the final time.
    pub lhs: f64,
    /// Data-difference norm; zero for well-prepared data.
    pub data_norm: f64,
    /// `(t, η)` samples.
    pub eta_history: Vec<(f64, f64)>,
    /// `a/(2μ)`.
    pub eta_limit: f64,
}

impl RemainderRecord {
    pub fn eta_final(&self) -> f64 {
        self.eta_history.last().map_or(0.0, |s| s.1)
    }
}

/// An anisotropic and a hydrostatic run advanced in lockstep.
pub struct PairedRun {
    pub hydro_solver: HydroSolver,
    pub aniso_solver: AnisoSolver,
    pub hydro: HydroState,
    pub aniso: AnisoState,
    pub eta: AnalyticBandState,
    pub ledger: EnergyLedger,
    params: PairParams,
    step: usize,
    record: RemainderRecord,
}

impl PairedRun {
    pub fn new(data: &InitialData, eps: f64, params: PairParams) -> Result<Self> {
        let grid = data.u0.grid();
        let hydro = HydroState::new(data.u0.clone(), data.u1.clone(), params.a, params.lambda);
        let scale = 1.0 + params.perturbation;
        let aniso = prepare_initial(
            &data.u0.scale(scale),
            &data.u1.scale(scale),
            eps,
            params.a,
            params.lambda,
        )?;
        let rem0 = remainder(&aniso, &hydro)?;
        let data_norm = pair_data_norm(&rem0.r1, &rem0.rt1, &rem0.r2, &rem0.rt2, eps, params.a)?;
        let ledger = EnergyLedger::new(grid, LedgerKind::Remainder, params.r, 0.5, data_norm);
        let mut run = PairedRun {
            hydro_solver: HydroSolver::new(grid, params.dt, params.physics)?,
            aniso_solver: AnisoSolver::new(grid, eps, params.dt, params.physics)?,
            hydro,
            aniso,
            eta: AnalyticBandState::new(params.a, params.mu, ClockKind::Eta),
            ledger,
            params,
            step: 0,
            record: RemainderRecord {
                eps,
                times: Vec::new(),
                groupings: Vec::new(),
                terminal_terms: Vec::new(),
                terminal_norm: 0.0,
                lhs: 0.0,
                data_norm,
                eta_history: Vec::new(),
                eta_limit: params.a / (2.0 * params.mu),
            },
        };
        run.observe(rem0)?;
        Ok(run)
    }

    pub fn params(&self) -> &PairParams {
        &self.params
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.params.steps
    }

    pub fn eps(&self) -> f64 {
        self.aniso.eps
    }

    /// Trapezoid weight of the current time level.
    fn weight(&self) -> f64 {
        if self.step == 0 || self.step == self.params.steps {
            0.5 * self.params.dt
        } else {
            self.params.dt
        }
    }

    fn observe(&mut self, rem: Remainder) -> Result<()> {
        let eps = self.eps();
        let width = self.eta.width();
        let t = self.aniso.t;
        let w = self.weight();
        track_remainder(&mut self.ledger, &rem, eps, width, t, w)?;
        let sum1 = &rem.r1 + &rem.rt1;
        let sum2 = &rem.r2 + &rem.rt2;
        let (r1y, r2y, r1x, r2x) = (rem.r1.d_dy(), rem.r2.d_dy(), rem.r1.d_dx(), rem.r2.d_dx());
        let wd = width.max(0.0);
        let g = [
            weighted_besov(&[(1.0, &sum1), (eps, &sum2)], wd, 0.5)?,
            weighted_besov(&[(1.0, &r1y), (eps, &r2y)], wd, 0.5)?,
            eps * weighted_besov(&[(1.0, &r1x), (eps, &r2x)], wd, 0.5)?,
            weighted_besov(&[(1.0, &rem.rt1), (eps, &rem.rt2)], wd, 0.5)?,
        ];
        self.record.times.push(t);
        self.record.groupings.push(g);
        Ok(())
    }

    /// Advances both runs and the η clock by one step.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.params.dt;
        let d0 = eta_clock_driver(&self.aniso, &self.hydro, self.eta.width())?;
        self.hydro_solver.step(&mut self.hydro)?;
        self.aniso_solver.step(&mut self.aniso)?;
        let pred = self.eta.width() - self.eta.rate * d0 * dt;
        let d1 = eta_clock_driver(&self.aniso, &self.hydro, pred)?;
        self.eta.step_clock(0.5 * (d0 + d1), dt)?;
        self.step += 1;
        for band in [&self.hydro.band, &self.aniso.band, &self.eta] {
            if let Some(time) = band.exhausted_at {
                return Err(Error::BandExhausted {
                    time,
                    width: band.width(),
                });
            }
        }
        let rem = remainder(&self.aniso, &self.hydro)?;
        self.observe(rem)
    }

    /// Terminal record, valid at any point of the run.
    pub fn record(&self) -> RemainderRecord {
        let mut rec = self.record.clone();
        rec.terminal_terms = self.ledger.values();
        rec.terminal_norm = self.ledger.sup_part();
        rec.lhs = self.ledger.lhs();
        rec.eta_history = self.eta.history.clone();
        rec
    }

    pub fn run_to_end(mut self) -> Result<RemainderRecord> {
        while !self.is_done() {
            self.step()?;
        }
        Ok(self.record())
    }
}

/// One ε of a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub eps: f64,
    /// Terminal remainder norm; `None` when the run failed.
    pub norm: Option<f64>,
    /// `norm / ε`.
    pub m_hat: Option<f64>,
    pub eta_final: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// Least-squares slope of `log norm` against `log ε`.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// Root-mean-square residual of the fit in `log` space.
    pub residual: Option<f64>,
    /// Slopes between neighbouring successful points.
    pub pair_slopes: Vec<f64>,
    /// `max M̂ / min M̂ − 1` over successful points.
    pub m_hat_variation: Option<f64>,
    /// Set when fewer than two points have a positive norm.
    pub degenerate: bool,
}

/// Least-squares line through `(x, y)`: `(slope, intercept, rms residual)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    Some((slope, intercept, (ss / nf).sqrt()))
}

impl SweepResult {
    pub fn from_points(points: Vec<SweepPoint>) -> Self {
        let ok: Vec<(f64, f64)> = points
            .iter()
            .filter_map(|p| p.norm.filter(|n| *n > 0.0).map(|n| (p.eps, n)))
            .collect();
        let lx: Vec<f64> = ok.iter().map(|p| p.0.ln()).collect();
        let ly: Vec<f64> = ok.iter().map(|p| p.1.ln()).collect();
        let fit = fit_line(&lx, &ly);
        let pair_slopes = ok
            .windows(2)
            .map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln())
            .collect();
        let m: Vec<f64> = ok.iter().map(|p| p.1 / p.0).collect();
        let m_hat_variation = (m.len() >= 2).then(|| {
            let hi = m.iter().cloned().fold(f64::MIN, f64::max);
            let lo = m.iter().cloned().fold(f64::MAX, f64::min);
            hi / lo - 1.0
        });
        SweepResult {
            points,
            slope: fit.map(|f| f.0),
            intercept: fit.map(|f| f.1),
            residual: fit.map(|f| f.2),
            pair_slopes,
            m_hat_variation,
            degenerate: fit.is_none(),
        }
    }

    /// Rows `eps,norm,m_hat,eta_final,failure` with a header line.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(crate::fmt_f64).unwrap_or_default();
        let mut s = String::from("eps,norm,m_hat,eta_final,failure\n");
        for p in &self.points {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                crate::fmt_f64(p.eps),
                opt(p.norm),
                opt(p.m_hat),
                opt(p.eta_final),
                p.failure.as_deref().unwrap_or("")
            ));
        }
        s
    }
}

fn check_eps_list(eps_list: &[f64]) -> Result<()> {
    if eps_list.is_empty() {
        return Err(Error::config("eps_list", "must not be empty"));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config("eps_list", "values must be strictly decreasing"));
    }
    Ok(())
}

/// Runs one paired simulation per ε on shared data, in parallel, and fits
/// the convergence order. Results are ordered as `eps_list`.
pub fn sweep(data: &InitialData, params: PairParams, eps_list: &[f64]) -> Result<SweepResult> {
    check_eps_list(eps_list)?;
    let outcomes: Vec<Result<RemainderRecord>> = eps_list
        .par_iter()
        .map(|&eps| PairedRun::new(data, eps, params)?.run_to_end())
        .collect();
    let mut points = Vec::with_capacity(eps_list.len());
    for (&eps, out) in eps_list.iter().zip(outcomes) {
        points.push(match out {
            Ok(rec) => SweepPoint {
                eps,
                norm: Some(rec.terminal_norm),
                m_hat: Some(rec.terminal_norm / eps),
                eta_final: Some(rec.eta_final()),
                failure: None,
            },
            Err(e @ (Error::BlowUp { .. } | Error::BandExhausted { .. } | Error::StepTooLarge { .. })) => {
                SweepPoint {
                    eps,
                    norm: None,
                    m_hat: None,
                    eta_final: None,
                    failure: Some(e.to_string()),
                }
            }
            Err(e) => return Err(e),
        });
    }
    Ok(SweepResult::from_points(points))
}

/// Sweep driven by a run configuration (`eps_list`, or the single `eps`).
pub fn sweep_config(cfg: &RunConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let eps_list = match (&cfg.eps_list, cfg.eps) {
        (Some(l), _) => l.clone(),
        (None, Some(e)) => vec![e],
        (None, None) => return Err(Error::config("eps_list", "required for a sweep")),
    };
    let grid = Grid::new(cfg.grid.clone())?;
    let data = cfg.data.build(&grid, cfg.band.a, cfg.c0)?;
    sweep(&data, PairParams::from_config(cfg)?, &eps_list)
}

/// One resolution level of the self-consistency gate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefinementLevel {
    pub nx: usize,
    pub ny: usize,
    pub dt: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateReport {
    pub eps: f64,
    pub levels: Vec<RefinementLevel>,
    /// `|n_fine − n_prev| / n_fine` between the two finest levels.
    pub relative_change: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub const GATE_TOLERANCE: f64 = 0.10;

/// Terminal remainder norm at `(Nx/2, Ny/2, 2dt)`, `(Nx, Ny, dt)` and
/// `(2Nx, 3Ny/2, dt/2)`. The amplitude is resolved once on the base grid so
/// every level sees the same datum.
pub fn refinement_gate(cfg: &RunConfig, eps: f64) -> Result<GateReport> {
    cfg.validate()?;
    let base = &cfg.grid;
    let grid = Grid::new(base.clone())?;
    let mut spec = cfg.data.clone();
    spec.amplitude = Some(spec.build(&grid, cfg.band.a, cfg.c0)?.amplitude);
    let params = PairParams::from_config(cfg)?;
    let levels = [
        (base.nx / 2, base.ny / 2, 2.0, 0.5),
        (base.nx, base.ny, 1.0, 1.0),
        (2 * base.nx, base.ny + base.ny / 2, 0.5, 2.0),
    ];
    let out: Vec<Result<RefinementLevel>> = levels
        .par_iter()
        .map(|&(nx, ny, dt_scale, step_scale)| {
            let g = Grid::new(GridSpec::new(base.lx, nx, ny, base.vertical))?;
            let data = spec.build(&g, cfg.band.a, cfg.c0)?;
            let mut p = params;
            p.dt = params.dt * dt_scale;
            p.steps = (params.steps as f64 * step_scale).round() as usize;
            let rec = PairedRun::new(&data, eps, p)?.run_to_end()?;
            Ok(RefinementLevel {
                nx,
                ny,
                dt: p.dt,
                norm: rec.terminal_norm,
            })
        })
        .collect();
    let levels: Vec<RefinementLevel> = out.into_iter().collect::<Result<_>>()?;
    let (prev, fine) = (levels[1].norm, levels[2].norm);
    let relative_change = if fine == 0.0 && prev == 0.0 {
        0.0
    } else {
        (fine - prev).abs() / fine.abs().max(prev.abs())
    };
    Ok(GateReport {
        eps,
        levels,
        relative_change,
        tolerance: GATE_TOLERANCE,
        passed: relative_change < GATE_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::DataSpec;
    use std::sync::Arc;
    use std::f64::consts::PI;

    fn grid(nx: usize, ny: usize) -> Arc<Grid> {
        Grid::new(GridSpec::chebyshev(2.0 * PI, nx, ny)).unwrap()
    }

    fn params(physics: Physics, steps: usize, dt: f64) -> PairParams {
        PairParams {
            a: 0.5,
            lambda: 1.0,
            mu: 1.0,
            r: 0.1,
            dt,
            steps,
            physics,
            perturbation: 0.0,
        }
    }

    fn data(g: &Arc<Grid>, amp: f64) -> InitialData {
        let mut d = DataSpec::named("gauss-sine");
        d.amplitude = Some(amp);
        d.sigma = 0.8;
        d.build(g, 0.5, 0.1).unwrap()
    }

    #[test]
    fn identical_states_give_zero_remainder() {
        let g = grid(16, 17);
        let d = data(&g, 0.1);
        let h = HydroState::new(d.u0.clone(), d.u1.clone(), 0.5, 1.0);
        let a = prepare_initial(&d.u0, &d.u1, 0.1, 0.5, 1.0).unwrap();
        let r = remainder(&a, &h).unwrap();
        for f in [&r.r1, &r.rt1, &r.r2, &r.rt2] {
            assert_eq!(f.max_abs(), 0.0);
        }
    }

    #[test]
    fn zero_hydro_gives_aniso_fields() {
        let g = grid(16, 17);
        let d = data(&g, 0.1);
        let z = Field2D::zeros(&g);
        let h = HydroState::new(z.clone(), z, 0.5, 1.0);
        let a = prepare_initial(&d.u0, &d.u1, 0.1, 0.5, 1.0).unwrap();
        let r = remainder(&a, &h).unwrap();
        assert_eq!((&r.r1 - &a.u).max_abs(), 0.0);
        assert_eq!((&r.r2 - &a.v).max_abs(), 0.0);
    }

    #[test]
    fn time_mismatch_is_an_error() {
        let g = grid(8, 9);
        let z = Field2D::zeros(&g);
        let mut h = HydroState::new(z.clone(), z.clone(), 0.5, 1.0);
        h.t = 0.5;
        let a = prepare_initial(&z, &z, 0.1, 0.5, 1.0).unwrap();
        assert!(matches!(remainder(&a, &h), Err(Error::TimeMismatch(..))));
    }

    #[test]
    fn zero_states_have_zero_residual_and_driver() {
        let g = grid(16, 17);
        let z = Field2D::zeros(&g);
        let h = HydroState::new(z.clone(), z.clone(), 0.5, 1.0);
        let a = prepare_initial(&z, &z, 0.1, 0.5, 1.0).unwrap();
        let hs = HydroSolver::new(&g, 0.01, Physics::default()).unwrap();
        let as_ = AnisoSolver::new(&g, 0.1, 0.01, Physics::default()).unwrap();
        let r = forcing_residual(&as_, &hs, &a, &h).unwrap();
        assert_eq!(r.relative(), (0.0, 0.0));
        assert_eq!(eta_clock_driver(&a, &h, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn eta_driver_reduces_to_hydro_part() {
        let g = grid(16, 17);
        let d = data(&g, 0.1);
        let z = Field2D::zeros(&g);
        let h = HydroState::new(d.u0.clone(), d.u1.clone(), 0.5, 1.0);
        let a = prepare_initial(&z, &z, 0.1, 0.5, 1.0).unwrap();
        let want = crate::hydro::weighted_dy_norm(&d.u0, 0.3).unwrap();
        assert!((eta_clock_driver(&a, &h, 0.3).unwrap() - want).abs() <= 1e-14 * want);
    }

    #[test]
    fn forcing_residual_mid_run() {
        let g = grid(32, 33);
        let d = data(&g, 0.05);
        let mut run = PairedRun::new(&d, 0.1, params(Physics::default(), 50, 0.01)).unwrap();
        for _ in 0..25 {
            run.step().unwrap();
        }
        let r = forcing_residual(&run.aniso_solver, &run.hydro_solver, &run.aniso, &run.hydro).unwrap();
        let (a, b) = r.relative();
        assert!(a < 1e-6 && b < 1e-6, "{a:e} {b:e}");
    }

    #[test]
    fn well_prepared_start_is_zero() {
        let g = grid(16, 17);
        let d = data(&g, 0.05);
        let run = PairedRun::new(&d, 0.1, params(Physics::default(), 4, 0.01)).unwrap();
        let rec = run.record();
        assert_eq!(rec.groupings[0], [0.0; 4]);
        assert_eq!(rec.data_norm, 0.0);
    }

    #[test]
    fn zero_data_sweep_is_degenerate() {
        let g = grid(16, 17);
        let z = Field2D::zeros(&g);
        let d = InitialData {
            u0: z.clone(),
            u1: z,
            amplitude: 0.0,
        };
        let res = sweep(&d, params(Physics::default(), 5, 0.02), &[0.1, 0.05, 0.025]).unwrap();
        assert!(res.degenerate && res.slope.is_none());
        assert!(res.points.iter().all(|p| p.norm == Some(0.0)));
    }

    #[test]
    fn increasing_eps_list_is_rejected() {
        let g = grid(8, 9);
        let d = data(&g, 0.0);
        assert!(sweep(&d, params(Physics::default(), 1, 0.01), &[0.05, 0.1]).is_err());
    }

    #[test]
    fn fit_recovers_a_power_law() {
        let x: Vec<f64> = [0.1f64, 0.05, 0.025].iter().map(|e| e.ln()).collect();
        let y: Vec<f64> = [0.1f64, 0.05, 0.025].iter().map(|e| (3.0 * e * e).ln()).collect();
        let (s, i, r) = fit_line(&x, &y).unwrap();
        assert!((s - 2.0).abs() < 1e-12 && (i - 3f64.ln()).abs() < 1e-12 && r < 1e-12);
    }

    #[test]
    fn linear_sweep_is_second_order() {
        let g = grid(32, 25);
        let d = data(&g, 0.1);
        let res = sweep(&d, params(Physics::linear(), 50, 0.02), &[0.1, 0.05, 0.025]).unwrap();
        let slope = res.slope.unwrap();
        assert!((1.8..=2.2).contains(&slope), "slope {slope}, {:?}", res.pair_slopes);
    }
}
