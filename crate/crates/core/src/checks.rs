//! Littlewood–Paley property suite: partition of unity, Bernstein
//! bounds, Bony reconstruction, `f⁺` identities, Poincaré and Agmon
//! constants. Each check returns its worst measured value next to the
//! pinned tolerance.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::band::{apply_exponent, plus_abs};
use crate::besov::{agmon_ratio, bony_decompose};
use crate::dyadic::{dyadic_project, ladder, CutoffPair, DyadicRange};
use crate::energy::poincare_constant;
use crate::error::Result;
use crate::field::Field2D;
use crate::grid::{Grid, GridSpec};

/// Outcome of one property check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub id: String,
    pub name: String,
    pub passed: bool,
    /// Worst value seen, in the units of `tolerance`.
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
    pub seconds: f64,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        format!(
            "{} {} {}: measured {:.3e} (tolerance {:.3e}) {} [{:.2}s]",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance,
            self.detail,
            self.seconds
        )
    }
}

pub const PARTITION_TOL: f64 = 1e-12;
pub const LADDER_TOL: f64 = 1e-12;
pub const BERNSTEIN_SAMPLES: usize = 100;
pub const BERNSTEIN_SLACK: f64 = 1e-12;
pub const BONY_PAIRS: usize = 50;
pub const BONY_TOL: f64 = 1e-10;
pub const PLANCHEREL_TOL: f64 = 1e-12;
pub const DOMINATION_SLACK: f64 = -1e-10;
pub const POINCARE_TOL: f64 = 1e-8;
pub const AGMON_SAMPLES: usize = 100;
pub const AGMON_REL: f64 = 1e-6;

fn lp_grid() -> Arc<Grid> {
    Grid::new(GridSpec::chebyshev(2.0 * PI, 64, 17)).expect("fixed grid is valid")
}

/// Random field with every resolved horizontal mode populated, scaled to
/// unit size. The Nyquist slot is cleared, as `∂_x` does.
pub fn random_field(g: &Arc<Grid>, rng: &mut ChaCha8Rng) -> Field2D {
    let vals: Vec<f64> = (0..g.nx() * g.ny()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nyq = g.nyquist();
    let f = Field2D::transform(g, &vals)
        .expect("sizes match")
        .map_modes(|k, _| Complex64::new(if k == nyq { 0.0 } else { 1.0 }, 0.0));
    let n = f.l2_norm();
    f.scale(1.0 / n)
}

fn timed(id: &str, name: &str, tol: f64, f: impl FnOnce() -> Result<(f64, bool, String)>) -> Result<CheckOutcome> {
    let start = Instant::now();
    let (measured, passed, detail) = f()?;
    Ok(CheckOutcome {
        id: id.into(),
        name: name.into(),
        passed,
        measured,
        tolerance: tol,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Partition of unity on every resolved wavenumber, exact disjointness of
/// non-neighbouring blocks and ladder reconstruction of random fields.
pub fn partition_check(seed: u64) -> Result<CheckOutcome> {
    timed("AC-1", "Littlewood-Paley identities", PARTITION_TOL, || {
        let g = lp_grid();
        let c = CutoffPair::new();
        let range = DyadicRange::for_grid(&g);
        let mut unity = 0.0f64;
        let mut overlap = 0usize;
        for k in 0..=g.nyquist() {
            let xi = g.xi(k).abs();
            let sum = c.low(range.q_min, xi) + range.iter().map(|q| c.block(q, xi)).sum::<f64>();
            unity = unity.max((sum - 1.0).abs());
        }
        // disjointness on a fine continuum sample as well as the grid
        for i in 0..20_000 {
            let xi = 64.0 * i as f64 / 20_000.0;
            for q in range.iter() {
                for q2 in q + 2..=range.q_max {
                    if c.block(q, xi) * c.block(q2, xi) != 0.0 {
                        overlap += 1;
                    }
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut recon = 0.0f64;
        for _ in 0..20 {
            let f = random_field(&g, &mut rng);
            let l = ladder(&f, &c);
            recon = recon.max((&l.reconstruct() - &f).l2_norm() / f.l2_norm());
        }
        let worst = unity.max(recon);
        Ok((
            worst,
            unity <= PARTITION_TOL && recon <= LADDER_TOL && overlap == 0,
            format!("unity {unity:.1e}, ladder {recon:.1e}, overlaps {overlap}"),
        ))
    })
}

/// `(3/4)2^q ≤ ‖∂_xΔ_q f‖/‖Δ_q f‖ ≤ (8/3)2^q` on every nonzero block.
pub fn bernstein_check(seed: u64) -> Result<CheckOutcome> {
    timed("AC-2", "Bernstein bounds", BERNSTEIN_SLACK, || {
        let g = lp_grid();
        let c = CutoffPair::new();
        let range = DyadicRange::for_grid(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // worst relative violation; ≤ 0 means inside the bounds
        let mut worst = f64::NEG_INFINITY;
        let mut blocks = 0usize;
        for _ in 0..BERNSTEIN_SAMPLES {
            let f = random_field(&g, &mut rng);
            for q in range.iter() {
                let b = dyadic_project(&f, q, &c)?;
                let n = b.l2_norm();
                if n <= 1e-14 {
                    continue;
                }
                blocks += 1;
                let r = b.d_dx().l2_norm() / n;
                let scale = 2f64.powi(q);
                let lo = 0.75 * scale;
                let hi = 8.0 / 3.0 * scale;
                worst = worst.max((lo - r) / lo).max((r - hi) / hi);
            }
        }
        Ok((
            worst,
            worst <= BERNSTEIN_SLACK,
            format!("{blocks} nonzero blocks over {BERNSTEIN_SAMPLES} fields"),
        ))
    })
}

/// `T_f g + T_g f + R(f, g)` against the dealiased product.
pub fn bony_check(seed: u64) -> Result<CheckOutcome> {
    timed("AC-3", "Bony reconstruction", BONY_TOL, || {
        let g = lp_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..BONY_PAIRS {
            let f = random_field(&g, &mut rng);
            let h = random_field(&g, &mut rng);
            let prod = f.multiply(&h)?;
            let parts = bony_decompose(&f, &h)?;
            worst = worst.max((&parts.sum() - &prod).l2_norm() / prod.l2_norm());
        }
        Ok((worst, worst <= BONY_TOL, format!("{BONY_PAIRS} random pairs")))
    })
}

/// `‖f⁺‖ = ‖f‖` and `|(e^{w|D|}(fg))^| ≤ (f⁺_w g⁺_w)^` per coefficient.
pub fn plus_check(seed: u64) -> Result<CheckOutcome> {
    timed("AC-4", "f+ Plancherel and weighted domination", PLANCHEREL_TOL, || {
        let g = lp_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut plancherel = 0.0f64;
        let mut slack = f64::INFINITY;
        for _ in 0..20 {
            let f = random_field(&g, &mut rng);
            let h = random_field(&g, &mut rng);
            plancherel = plancherel.max((plus_abs(&f).l2_norm() - f.l2_norm()).abs() / f.l2_norm());
            let width = rng.gen_range(0.0..0.5);
            let lhs = apply_exponent(&f.multiply(&h)?, width)?;
            let rhs = apply_exponent(&plus_abs(&f), width)?.multiply(&apply_exponent(&plus_abs(&h), width)?)?;
            for (l, r) in lhs.coeffs().iter().zip(rhs.coeffs()) {
                slack = slack.min(r.re - l.norm());
            }
        }
        Ok((
            plancherel,
            plancherel <= PLANCHEREL_TOL && slack >= DOMINATION_SLACK,
            format!("min domination slack {slack:.2e}"),
        ))
    })
}

/// Random Dirichlet profile `Σ c_n sin(nπy)` with decaying coefficients.
fn random_dirichlet_profile(g: &Grid, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let c: Vec<f64> = (1..=10).map(|n| rng.gen_range(-1.0..1.0) / n as f64).collect();
    g.y()
        .iter()
        .map(|&y| {
            c.iter()
                .enumerate()
                .map(|(i, ci)| ci * ((i + 1) as f64 * PI * y).sin())
                .sum()
        })
        .collect()
}

/// Smallest Dirichlet eigenvalue at `Ny = 64` and the Agmon ratio.
pub fn poincare_agmon_check(seed: u64) -> Result<CheckOutcome> {
    timed("AC-5", "discrete Poincare and Agmon", POINCARE_TOL, || {
        let spec = GridSpec::chebyshev(2.0 * PI, 8, 64);
        let k = poincare_constant(&spec)?;
        let err = (k - PI * PI).abs();
        let g = Grid::new(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let agmon = (0..AGMON_SAMPLES)
            .map(|_| agmon_ratio(&g, &random_dirichlet_profile(&g, &mut rng)))
            .fold(0.0, f64::max);
        let cap = 2f64.sqrt() * (1.0 + AGMON_REL);
        Ok((
            err,
            err <= POINCARE_TOL && agmon <= cap,
            format!("k = {k:.12}, max Agmon ratio {agmon:.6} (cap {cap:.6})"),
        ))
    })
}

/// The whole suite, in order.
pub fn lp_suite(seed: u64) -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        partition_check(seed)?,
        bernstein_check(seed)?,
        bony_check(seed)?,
        plus_check(seed)?,
        poincare_agmon_check(seed)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for out in lp_suite(7).unwrap() {
            println!("{}", out.line());
            assert!(out.passed, "{}", out.line());
        }
    }
}
