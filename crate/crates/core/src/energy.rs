//! Weighted energy functionals along a run, smallness conditions on the
//! initial data, and the discrete Poincaré constant.
//!
//! A functional is a list of terms `c · ‖e^{Rt} (f₁, f₂, …)_φ‖_{L̃^p_t(B^s)}`,
//! each backed by a [`CheminLernerAccumulator`]. The tuple norm is the
//! energy sum `‖Δ_q(f₁, f₂)‖² = ‖Δ_q f₁‖² + ‖Δ_q f₂‖²`. Trackers are fed one
//! snapshot per time level together with its quadrature weight, so the
//! caller decides the time rule (the harness uses the trapezoid).
//!
//! Constants in the estimates are not quantified; the ledger reports the
//! ratio of the left side to the initial-data norms instead of asserting
//! an inequality.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::aniso::AnisoState;
use crate::band::MAX_EXPONENT;
use crate::besov::{besov_from_block_norms, CheminLernerAccumulator, TimeNorm};
use crate::dyadic::{block_norms_from_energies, CutoffPair, DyadicRange};
use crate::error::{Error, Result};
use crate::field::Field2D;
use crate::grid::{Grid, GridSpec, VerticalScheme};
use crate::hydro::{recover_v, HydroState};

/// Block norms of `(c₁ f₁, c₂ f₂, …)` weighted by `e^{width|ξ|}`.
pub fn weighted_block_norms(parts: &[(f64, &Field2D)], width: f64) -> Result<Vec<f64>> {
    let grid = parts[0].1.grid();
    let top = width * grid.spec().xi_max();
    if top > MAX_EXPONENT {
        return Err(Error::WeightOverflow {
            exponent: top,
            cap: MAX_EXPONENT,
        });
    }
    let mut energies = vec![0.0; grid.nx()];
    for (c, f) in parts {
        f.check_grid(parts[0].1)?;
        for (e, fe) in energies.iter_mut().zip(f.mode_energies()) {
            *e += c * c * fe;
        }
    }
    for (k, e) in energies.iter_mut().enumerate() {
        *e *= (2.0 * width * grid.xi(k).abs()).exp();
    }
    Ok(block_norms_from_energies(grid, &energies, &CutoffPair::new()))
}

/// `‖e^{width|D_x|}(c₁ f₁, …)‖_{B^s}`.
pub fn weighted_besov(parts: &[(f64, &Field2D)], width: f64, s: f64) -> Result<f64> {
    let q_min = DyadicRange::for_grid(parts[0].1.grid()).q_min;
    Ok(besov_from_block_norms(q_min, &weighted_block_norms(parts, width)?, s).total)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    pub coeff: f64,
    pub acc: CheminLernerAccumulator,
}

impl Term {
    pub fn value(&self) -> f64 {
        self.coeff * self.acc.total()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LedgerKind {
    Hydro,
    Aniso,
    Vorticity,
    Remainder,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub kind: LedgerKind,
    /// Exponential time weight `e^{Rt}`.
    pub r: f64,
    pub s: f64,
    pub terms: Vec<Term>,
    /// Sum of the initial-data norms on the right of the estimate.
    pub data_norm: f64,
    pub events: Vec<String>,
}

/// Term layout `(name, coefficient, time norm)` of each functional.
fn layout(kind: LedgerKind) -> Vec<(&'static str, f64, TimeNorm)> {
    use TimeNorm::{Lp, Sup};
    match kind {
        LedgerKind::Hydro => vec![
            ("u+ut:inf", 0.5, Sup),
            ("dy_u:inf", 1.0, Sup),
            ("ut:2", 0.5, Lp(2.0)),
            ("dy_u:2", 0.5, Lp(2.0)),
            ("ut:inf", 0.5, Sup),
        ],
        LedgerKind::Aniso | LedgerKind::Remainder => vec![
            ("u+ut:inf", 0.5, Sup),
            ("dy_u:inf", 1.0, Sup),
            ("eps_dx_u:inf", 1.0, Sup),
            ("ut:inf", 0.5, Sup),
            ("ut:2", 1.0, Lp(2.0)),
            ("dy_u:2", 1.0, Lp(2.0)),
            ("eps_dx_u:2", 1.0, Lp(2.0)),
        ],
        LedgerKind::Vorticity => vec![
            ("dy(u+ut):inf", 0.5, Sup),
            ("dy_ut:inf", 0.5, Sup),
            ("dyy_u:inf", 1.0, Sup),
            ("dy_ut:2", 0.5, Lp(2.0)),
            ("dyy_u:2", 0.5, Lp(2.0)),
        ],
    }
}

impl EnergyLedger {
    pub fn new(grid: &Arc<Grid>, kind: LedgerKind, r: f64, s: f64, data_norm: f64) -> Self {
        let terms = layout(kind)
            .into_iter()
            .map(|(name, coeff, norm)| Term {
                name: name.to_string(),
                coeff,
                acc: CheminLernerAccumulator::new(grid, s, norm),
            })
            .collect();
        EnergyLedger {
            kind,
            r,
            s,
            terms,
            data_norm,
            events: Vec::new(),
        }
    }

    /// Left side of the estimate so far.
    pub fn lhs(&self) -> f64 {
        self.terms.iter().map(Term::value).sum()
    }

    /// Sum of the `L̃^∞` terms only.
    pub fn sup_part(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.acc.norm == TimeNorm::Sup)
            .map(Term::value)
            .sum()
    }

    /// `lhs / data_norm`, or `None` for zero data.
    pub fn ratio(&self) -> Option<f64> {
        (self.data_norm > 0.0).then(|| self.lhs() / self.data_norm)
    }

    pub fn values(&self) -> Vec<(String, f64)> {
        self.terms.iter().map(|t| (t.name.clone(), t.value())).collect()
    }

    /// Feeds one snapshot: `groups[i]` is the field tuple of term `i`.
    fn feed(&mut self, groups: Vec<Vec<(f64, &Field2D)>>, width: f64, t: f64, weight: f64) -> Result<()> {
        let scale = (self.r * t).exp();
        for (term, parts) in self.terms.iter_mut().zip(groups) {
            let blocks: Vec<f64> = weighted_block_norms(&parts, width)?
                .into_iter()
                .map(|b| scale * b)
                .collect();
            term.acc.update(&blocks, t, weight, 1.0)?;
        }
        Ok(())
    }
}

fn expect_kind(ledger: &EnergyLedger, kind: LedgerKind) -> Result<()> {
    if ledger.kind == kind {
        Ok(())
    } else {
        Err(Error::Invariant(format!(
            "ledger of kind {:?} fed with {kind:?} data",
            ledger.kind
        )))
    }
}

/// Feeds a hydrostatic snapshot with quadrature weight `dt`.
pub fn track_hydro(ledger: &mut EnergyLedger, state: &HydroState, dt: f64) -> Result<()> {
    expect_kind(ledger, LedgerKind::Hydro)?;
    let sum = &state.u + &state.ut;
    let uy = state.u.d_dy();
    let groups = vec![
        vec![(1.0, &sum)],
        vec![(1.0, &uy)],
        vec![(1.0, &state.ut)],
        vec![(1.0, &uy)],
        vec![(1.0, &state.ut)],
    ];
    ledger.feed(groups, state.band.width().max(0.0), state.t, dt)
}

/// Feeds an anisotropic snapshot with quadrature weight `dt`.
pub fn track_aniso(ledger: &mut EnergyLedger, state: &AnisoState, dt: f64) -> Result<()> {
    expect_kind(ledger, LedgerKind::Aniso)?;
    let g = PairGroups::new(&state.u, &state.ut, &state.v, &state.vt, state.eps);
    ledger.feed(g.groups(), state.band.width().max(0.0), state.t, dt)
}

/// Feeds a remainder snapshot `(R¹, ∂_t R¹, R², ∂_t R²)` at band width
/// `width = a − μη`.
pub fn track_remainder(
    ledger: &mut EnergyLedger,
    rem: &Remainder,
    eps: f64,
    width: f64,
    t: f64,
    dt: f64,
) -> Result<()> {
    expect_kind(ledger, LedgerKind::Remainder)?;
    let g = PairGroups::new(&rem.r1, &rem.rt1, &rem.r2, &rem.rt2, eps);
    ledger.feed(g.groups(), width.max(0.0), t, dt)
}

/// Feeds the vorticity functional `w = ∂_y u` of a hydrostatic snapshot.
pub fn track_vorticity(ledger: &mut EnergyLedger, state: &HydroState, dt: f64) -> Result<()> {
    expect_kind(ledger, LedgerKind::Vorticity)?;
    let w = state.u.d_dy();
    let wt = state.ut.d_dy();
    let sum = &w + &wt;
    let wy = w.d_dy();
    let groups = vec![
        vec![(1.0, &sum)],
        vec![(1.0, &wt)],
        vec![(1.0, &wy)],
        vec![(1.0, &wt)],
        vec![(1.0, &wy)],
    ];
    ledger.feed(groups, state.band.width().max(0.0), state.t, dt)
}

/// Differences `R¹ = u^ε − u`, `R² = v^ε − v` and their time derivatives.
#[derive(Debug, Clone)]
pub struct Remainder {
    pub r1: Field2D,
    pub rt1: Field2D,
    pub r2: Field2D,
    pub rt2: Field2D,
}

/// Derived fields of the `(u, εv)` groupings.
struct PairGroups {
    eps: f64,
    sum_u: Field2D,
    sum_v: Field2D,
    uy: Field2D,
    vy: Field2D,
    ux: Field2D,
    vx: Field2D,
    ut: Field2D,
    vt: Field2D,
}

impl PairGroups {
    fn new(u: &Field2D, ut: &Field2D, v: &Field2D, vt: &Field2D, eps: f64) -> Self {
        PairGroups {
            eps,
            sum_u: u + ut,
            sum_v: v + vt,
            uy: u.d_dy(),
            vy: v.d_dy(),
            ux: u.d_dx(),
            vx: v.d_dx(),
            ut: ut.clone(),
            vt: vt.clone(),
        }
    }

    fn groups(&self) -> Vec<Vec<(f64, &Field2D)>> {
        let e = self.eps;
        let dy = vec![(1.0, &self.uy), (e, &self.vy)];
        let dx = vec![(e, &self.ux), (e * e, &self.vx)];
        let dt = vec![(1.0, &self.ut), (e, &self.vt)];
        vec![
            vec![(1.0, &self.sum_u), (e, &self.sum_v)],
            dy.clone(),
            dx.clone(),
            dt.clone(),
            dt,
            dy,
            dx,
        ]
    }
}

/// Norms of the smallness conditions on the initial data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmallnessReport {
    pub a: f64,
    pub c0: f64,
    /// `‖e^{a|D|}∂_y u₀‖, ‖e^{a|D|}(u₀ + u₁)‖, ‖e^{a|D|}u₁‖` in `B^{1/2}`.
    pub norms: [f64; 3],
    pub sum: f64,
    pub threshold: f64,
    pub passes: bool,
    /// The same three norms in `B^{3/2}`.
    pub norms_32: [f64; 3],
    /// `c₀ a / (2 + Σ norms_32)`, used by the convergence estimate.
    pub threshold_convergence: f64,
    pub passes_convergence: bool,
}

/// Checks `Σ norms ≤ c₀ a` and the stricter convergence variant (with the
/// same small constant).
pub fn smallness_check(u0: &Field2D, u1: &Field2D, a: f64, c0: f64) -> Result<SmallnessReport> {
    let uy = u0.d_dy();
    let sum = u0 + u1;
    let norms_at = |s: f64| -> Result<[f64; 3]> {
        Ok([
            weighted_besov(&[(1.0, &uy)], a, s)?,
            weighted_besov(&[(1.0, &sum)], a, s)?,
            weighted_besov(&[(1.0, u1)], a, s)?,
        ])
    };
    let norms = norms_at(0.5)?;
    let norms_32 = norms_at(1.5)?;
    let total: f64 = norms.iter().sum();
    let threshold = c0 * a;
    let threshold_convergence = c0 * a / (2.0 + norms_32.iter().sum::<f64>());
    Ok(SmallnessReport {
        a,
        c0,
        norms,
        sum: total,
        threshold,
        passes: total <= threshold,
        norms_32,
        threshold_convergence,
        passes_convergence: total <= threshold_convergence,
    })
}

/// Right side of the hydrostatic estimate at index `s` (constants set to 1).
pub fn hydro_data_norm(u0: &Field2D, u1: &Field2D, a: f64, s: f64) -> Result<f64> {
    let uy = u0.d_dy();
    let sum = u0 + u1;
    Ok(weighted_besov(&[(1.0, &uy)], a, s)?
        + weighted_besov(&[(1.0, &sum)], a, s)?
        + weighted_besov(&[(1.0, u1)], a, s)?)
}

/// Right side of the vorticity estimate at index `s` (constants set to 1).
pub fn vorticity_data_norm(u0: &Field2D, u1: &Field2D, a: f64, s: f64) -> Result<f64> {
    let w0 = u0.d_dy();
    let w1 = u1.d_dy();
    let wy = w0.d_dy();
    let sum = &w0 + &w1;
    let b = |f: &Field2D, s: f64| weighted_besov(&[(1.0, f)], a, s);
    Ok(b(&wy, s)? + b(&sum, s)? + b(&w1, s)? + b(u0, s + 2.0)? + b(u0, s + 1.0)? + b(u1, s + 1.0)?)
}

/// Right side of the anisotropic estimate, with `v₀, v₁` recovered from
/// `u₀, u₁`.
pub fn aniso_data_norm(u0: &Field2D, u1: &Field2D, eps: f64, a: f64) -> Result<f64> {
    let v0 = recover_v(u0)?;
    let v1 = recover_v(u1)?;
    pair_data_norm(u0, u1, &v0, &v1, eps, a)
}

/// `‖∂_y(f₀, εg₀)‖ + ε‖∂_x(f₀, εg₀)‖ + ‖(f₁, εg₁)‖ + ‖(f₀ + f₁, ε(g₀ + g₁))‖`
/// in `B^{1/2}` with weight `e^{a|D|}`.
pub fn pair_data_norm(
    f0: &Field2D,
    f1: &Field2D,
    g0: &Field2D,
    g1: &Field2D,
    eps: f64,
    a: f64,
) -> Result<f64> {
    let (fy, gy, fx, gx) = (f0.d_dy(), g0.d_dy(), f0.d_dx(), g0.d_dx());
    let fs = f0 + f1;
    let gs = g0 + g1;
    let h = 0.5;
    Ok(weighted_besov(&[(1.0, &fy), (eps, &gy)], a, h)?
        + eps * weighted_besov(&[(1.0, &fx), (eps, &gx)], a, h)?
        + weighted_besov(&[(1.0, f1), (eps, g1)], a, h)?
        + weighted_besov(&[(1.0, &fs), (eps, &gs)], a, h)?)
}

/// Smallest eigenvalue of the discrete Dirichlet `−∂_y²`, by inverse
/// iteration.
pub fn poincare_constant(spec: &GridSpec) -> Result<f64> {
    let grid = Grid::new(spec.clone())?;
    let n = grid.ny() - 2;
    let a: DMatrix<f64> = -grid.d2().view((1, 1), (n, n)).into_owned();
    let lu = a.lu();
    let mut x = nalgebra::DVector::from_fn(n, |i, _| {
        let y = grid.y()[i + 1];
        y * (1.0 - y)
    });
    let mut lambda = 0.0;
    for _ in 0..200 {
        let next = lu.solve(&x).ok_or(Error::Singular("Dirichlet Laplacian"))?;
        let est = x.norm() / next.norm();
        x = next / x.norm();
        x /= x.norm();
        if (est - lambda).abs() <= 1e-15 * est {
            lambda = est;
            break;
        }
        lambda = est;
    }
    Ok(lambda)
}

/// Exact smallest eigenvalue of the second-order finite-difference
/// Laplacian with `ny` points.
pub fn fd_poincare_exact(ny: usize) -> f64 {
    let h = 1.0 / (ny - 1) as f64;
    2.0 * (1.0 - (std::f64::consts::PI * h).cos()) / (h * h)
}

/// Default exponential rate `0.9 · min(1/8, k/8)`.
pub fn default_r(spec: &GridSpec) -> Result<f64> {
    let k = poincare_constant(spec)?;
    Ok(0.9 * (1.0f64 / 8.0).min(k / 8.0))
}

/// Whether the spec's vertical scheme has a closed-form Poincaré value.
pub fn poincare_reference(spec: &GridSpec) -> f64 {
    match spec.vertical {
        VerticalScheme::ChebyshevCollocation => std::f64::consts::PI.powi(2),
        VerticalScheme::FiniteDifference2nd => fd_poincare_exact(spec.ny),
    }
}
