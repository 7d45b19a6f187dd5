//! Horizontal Littlewood–Paley decomposition.
//!
//! The cutoffs come from one smooth plateau `χ` equal to 1 on `|z| ≤ 3/4` and
//! vanishing for `|z| ≥ 4/3`. Then `ψ = χ` and `φ(z) = χ(z/2) − χ(z)`, so
//! `supp φ ⊂ {3/4 ≤ |z| ≤ 8/3}` and the sums over dyadic dilations telescope
//! to one.
//!
//! On the periodic grid only finitely many blocks can be nonzero. With
//! `ξ₁ = 2π/Lx` the first nonzero wavenumber and `ξ_N` the Nyquist wavenumber,
//! the ladder runs from the largest `q_min` with `(4/3)·2^{q_min} ≤ ξ₁` to the
//! smallest `q_max` with `(3/4)·2^{q_max+1} ≥ ξ_N`. The low block
//! `S_{q_min} f` then carries exactly the horizontal mean, and every block
//! outside the range vanishes identically.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::Field2D;
use crate::grid::Grid;

const INNER: f64 = 0.75;
const OUTER: f64 = 4.0 / 3.0;

/// The pair `(ψ, φ)` of smooth cutoff profiles.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CutoffPair;

impl CutoffPair {
    pub fn new() -> Self {
        CutoffPair
    }

    /// Smooth plateau: 1 on `|z| ≤ 3/4`, 0 on `|z| ≥ 4/3`.
    pub fn chi(&self, z: f64) -> f64 {
        let r = z.abs();
        if r <= INNER {
            1.0
        } else if r >= OUTER {
            0.0
        } else {
            smooth_step((OUTER - r) / (OUTER - INNER))
        }
    }

    pub fn psi(&self, z: f64) -> f64 {
        self.chi(z)
    }

    pub fn phi(&self, z: f64) -> f64 {
        self.chi(0.5 * z) - self.chi(z)
    }

    /// Multiplier of block `q` at wavenumber `xi`.
    pub fn block(&self, q: i32, xi: f64) -> f64 {
        self.phi(xi * 2f64.powi(-q))
    }

    /// Multiplier of the low-pass `S_q` at wavenumber `xi`.
    pub fn low(&self, q: i32, xi: f64) -> f64 {
        self.psi(xi * 2f64.powi(-q))
    }
}

/// `C^∞` transition from 0 at `t = 0` to 1 at `t = 1`.
fn smooth_step(t: f64) -> f64 {
    let h = |s: f64| if s <= 0.0 { 0.0 } else { (-1.0 / s).exp() };
    let a = h(t);
    let b = h(1.0 - t);
    a / (a + b)
}

/// Inclusive range of dyadic blocks that can be nonzero on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DyadicRange {
    pub q_min: i32,
    pub q_max: i32,
}

impl DyadicRange {
    pub fn for_grid(grid: &Grid) -> Self {
        let xi1 = grid.spec().dxi();
        let xin = grid.spec().xi_max();
        let mut q_min = (INNER * xi1).log2().floor() as i32;
        while OUTER * 2f64.powi(q_min + 1) <= xi1 {
            q_min += 1;
        }
        while OUTER * 2f64.powi(q_min) > xi1 {
            q_min -= 1;
        }
        let mut q_max = (xin / (2.0 * INNER)).log2().ceil() as i32;
        while INNER * 2f64.powi(q_max) >= xin {
            q_max -= 1;
        }
        while INNER * 2f64.powi(q_max + 1) < xin {
            q_max += 1;
        }
        DyadicRange { q_min, q_max }
    }

    pub fn contains(&self, q: i32) -> bool {
        (self.q_min..=self.q_max).contains(&q)
    }

    pub fn iter(&self) -> impl Iterator<Item = i32> {
        self.q_min..=self.q_max
    }

    pub fn len(&self) -> usize {
        (self.q_max - self.q_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.q_max < self.q_min
    }

    fn check(&self, q: i32) -> Result<()> {
        if self.contains(q) {
            Ok(())
        } else {
            Err(Error::BlockOutOfRange {
                q,
                min: self.q_min,
                max: self.q_max,
            })
        }
    }
}

/// `Δ_q^h f`.
pub fn dyadic_project(f: &Field2D, q: i32, cutoff: &CutoffPair) -> Result<Field2D> {
    DyadicRange::for_grid(f.grid()).check(q)?;
    Ok(f.scale_modes(|xi| cutoff.block(q, xi)))
}

/// `S_q^h f`. Accepts `q` up to `q_max + 1`, where it is the identity.
pub fn low_pass(f: &Field2D, q: i32, cutoff: &CutoffPair) -> Result<Field2D> {
    let range = DyadicRange::for_grid(f.grid());
    DyadicRange {
        q_min: range.q_min,
        q_max: range.q_max + 1,
    }
    .check(q)?;
    Ok(f.scale_modes(|xi| cutoff.low(q, xi)))
}

/// `f = S_{q_min} f + Σ_q Δ_q f` over the resolvable range.
#[derive(Debug, Clone)]
pub struct DyadicLadder {
    pub q_min: i32,
    pub q_max: i32,
    pub blocks: Vec<Field2D>,
    pub low: Field2D,
}

impl DyadicLadder {
    pub fn block(&self, q: i32) -> Option<&Field2D> {
        if q < self.q_min || q > self.q_max {
            None
        } else {
            Some(&self.blocks[(q - self.q_min) as usize])
        }
    }

    pub fn reconstruct(&self) -> Field2D {
        let mut out = self.low.clone();
        for b in &self.blocks {
            out += b;
        }
        out
    }
}

pub fn ladder(f: &Field2D, cutoff: &CutoffPair) -> DyadicLadder {
    let range = DyadicRange::for_grid(f.grid());
    let blocks = range
        .iter()
        .map(|q| f.scale_modes(|xi| cutoff.block(q, xi)))
        .collect();
    DyadicLadder {
        q_min: range.q_min,
        q_max: range.q_max,
        blocks,
        low: f.scale_modes(|xi| cutoff.low(range.q_min, xi)),
    }
}

/// `‖Δ_q f‖_{L²}` for every block in the range, from per-slot energies as
/// returned by [`Field2D::mode_energies`].
pub fn block_norms_from_energies(
    grid: &Arc<Grid>,
    energies: &[f64],
    cutoff: &CutoffPair,
) -> Vec<f64> {
    let range = DyadicRange::for_grid(grid);
    range
        .iter()
        .map(|q| {
            energies
                .iter()
                .enumerate()
                .map(|(k, e)| {
                    let w = cutoff.block(q, grid.xi(k).abs());
                    w * w * e
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}
