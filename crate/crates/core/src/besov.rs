//! Anisotropic Besov norms, Chemin–Lerner time norms and Bony's
//! paraproduct decomposition in the horizontal variable.
//!
//! `‖f‖_{B^s} = Σ_q 2^{qs} ‖Δ_q f‖_{L²}`, summed over the resolvable block
//! range. The horizontal mean lives in the low block only and so is not
//! seen by these norms (they are homogeneous). The same direct dyadic sum is
//! used for every `s`, including `s > 1/2`.
//!
//! A Chemin–Lerner norm takes the time norm block by block before the
//! `ℓ¹` sum over blocks:
//!
//! ```text
//! ‖f‖_{L̃^p_t(B^s)} = Σ_q 2^{qs} (∫_0^t δ(t') ‖Δ_q f(t')‖^p dt')^{1/p}
//! ```

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dyadic::{block_norms_from_energies, CutoffPair, DyadicRange};
use crate::error::{Error, Result};
use crate::field::Field2D;
use crate::grid::Grid;

/// Supported regularity indices.
pub const S_RANGE: (f64, f64) = (-2.0, 4.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BesovReport {
    pub s: f64,
    pub q_min: i32,
    /// `2^{qs} ‖Δ_q f‖_{L²}` for `q = q_min, q_min + 1, …`.
    pub per_block: Vec<f64>,
    pub total: f64,
}

fn check_s(s: f64) {
    assert!(
        (S_RANGE.0..=S_RANGE.1).contains(&s),
        "Besov index {s} outside the supported range {S_RANGE:?}"
    );
}

/// Builds the report from unweighted per-block `L²` norms.
pub fn besov_from_block_norms(q_min: i32, block_norms: &[f64], s: f64) -> BesovReport {
    check_s(s);
    let per_block: Vec<f64> = block_norms
        .iter()
        .enumerate()
        .map(|(i, b)| 2f64.powf((q_min + i as i32) as f64 * s) * b)
        .collect();
    BesovReport {
        s,
        q_min,
        total: per_block.iter().sum(),
        per_block,
    }
}

/// Per-block `L²` norms `‖Δ_q f‖` of a field.
pub fn block_norms(f: &Field2D) -> Vec<f64> {
    block_norms_from_energies(f.grid(), &f.mode_energies(), &CutoffPair::new())
}

/// Per-block norms of a tuple `(f₁, f₂, …)` with `‖(f₁, f₂)‖² = ‖f₁‖² + ‖f₂‖²`.
pub fn block_norms_tuple(parts: &[&Field2D]) -> Vec<f64> {
    let grid = parts[0].grid();
    let mut energies = vec![0.0; grid.nx()];
    for p in parts {
        for (e, pe) in energies.iter_mut().zip(p.mode_energies()) {
            *e += pe;
        }
    }
    block_norms_from_energies(grid, &energies, &CutoffPair::new())
}

pub fn besov_norm(f: &Field2D, s: f64) -> BesovReport {
    let range = DyadicRange::for_grid(f.grid());
    besov_from_block_norms(range.q_min, &block_norms(f), s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TimeNorm {
    /// `L^p` in time, `1 ≤ p < ∞`.
    Lp(f64),
    /// Supremum in time.
    Sup,
}

/// Running Chemin–Lerner norm, stored as one stream per dyadic block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheminLernerAccumulator {
    pub s: f64,
    pub norm: TimeNorm,
    pub q_min: i32,
    /// Running `∫ δ ‖Δ_q f‖^p dt` (or running max for `Sup`).
    pub per_block: Vec<f64>,
    pub last_time: Option<f64>,
    /// Per-update block norms, kept only in snapshot mode.
    pub snapshots: Option<Vec<Vec<f64>>>,
}

impl CheminLernerAccumulator {
    pub fn new(grid: &Arc<Grid>, s: f64, norm: TimeNorm) -> Self {
        check_s(s);
        if let TimeNorm::Lp(p) = norm {
            assert!(p >= 1.0, "time exponent must be at least 1");
        }
        let range = DyadicRange::for_grid(grid);
        CheminLernerAccumulator {
            s,
            norm,
            q_min: range.q_min,
            per_block: vec![0.0; range.len()],
            last_time: None,
            snapshots: None,
        }
    }

    /// Keeps every update's block norms, for brute-force checks.
    pub fn with_snapshots(mut self) -> Self {
        self.snapshots = Some(Vec::new());
        self
    }

    /// Records block norms sampled at time `t`, standing for an interval of
    /// length `dt` with time weight `delta`.
    pub fn update(&mut self, block_norms: &[f64], t: f64, dt: f64, delta: f64) -> Result<()> {
        if let Some(prev) = self.last_time {
            if t < prev {
                return Err(Error::NonMonotoneTime {
                    previous: prev,
                    current: t,
                });
            }
        }
        if !(dt >= 0.0 && delta >= 0.0) {
            return Err(Error::Invariant(format!(
                "dt and time weight must be nonnegative (dt = {dt}, delta = {delta})"
            )));
        }
        self.last_time = Some(t);
        match self.norm {
            TimeNorm::Sup => {
                for (acc, b) in self.per_block.iter_mut().zip(block_norms) {
                    *acc = acc.max(*b);
                }
            }
            TimeNorm::Lp(p) => {
                for (acc, b) in self.per_block.iter_mut().zip(block_norms) {
                    *acc += delta * dt * b.powf(p);
                }
            }
        }
        if let Some(snaps) = self.snapshots.as_mut() {
            snaps.push(block_norms.to_vec());
        }
        Ok(())
    }

    pub fn update_field(&mut self, f: &Field2D, t: f64, dt: f64, delta: f64) -> Result<()> {
        self.update(&block_norms(f), t, dt, delta)
    }

    /// Per-block time norms (before the `2^{qs}` weight).
    pub fn block_totals(&self) -> Vec<f64> {
        match self.norm {
            TimeNorm::Sup => self.per_block.clone(),
            TimeNorm::Lp(p) => self.per_block.iter().map(|v| v.powf(1.0 / p)).collect(),
        }
    }

    pub fn total(&self) -> f64 {
        besov_from_block_norms(self.q_min, &self.block_totals(), self.s).total
    }
}

/// The three pieces of `fg = T_f g + T_g f + R(f, g)`.
#[derive(Debug, Clone)]
pub struct BonyParts {
    pub t_f_g: Field2D,
    pub t_g_f: Field2D,
    pub remainder: Field2D,
}

impl BonyParts {
    pub fn sum(&self) -> Field2D {
        let mut s = self.t_f_g.clone();
        s += &self.t_g_f;
        s += &self.remainder;
        s
    }
}

/// Bony decomposition over the full resolvable range.
pub fn bony_decompose(f: &Field2D, g: &Field2D) -> Result<BonyParts> {
    let range = DyadicRange::for_grid(f.grid());
    bony_decompose_in(f, g, range.q_min, range.q_max)
}

/// Bony decomposition with blocks `q_lo..=q_hi` below which everything is
/// lumped into `S_{q_lo}`. Fails when either factor has content in a block
/// above `q_hi`.
pub fn bony_decompose_in(f: &Field2D, g: &Field2D, q_lo: i32, q_hi: i32) -> Result<BonyParts> {
    f.check_grid(g)?;
    let cutoff = CutoffPair::new();
    let full = DyadicRange::for_grid(f.grid());
    let missing: Vec<i32> = (q_hi + 1..=full.q_max)
        .filter(|&q| {
            [f, g].iter().any(|h| {
                h.scale_modes(|xi| cutoff.block(q, xi)).l2_norm() > 0.0
            })
        })
        .collect();
    if !missing.is_empty() {
        return Err(Error::InsufficientLadder { missing });
    }
    // pieces[0] is the low block S_{q_lo}, pieces[i] the block q_lo + i - 1
    let pieces = |h: &Field2D| -> Vec<Field2D> {
        std::iter::once(h.scale_modes(|xi| cutoff.low(q_lo, xi)))
            .chain((q_lo..=q_hi).map(|q| h.scale_modes(|xi| cutoff.block(q, xi))))
            .collect()
    };
    let pf = pieces(f);
    let pg = pieces(g);
    let n = pf.len();
    // partial sums: low_sum[i] = Σ_{i' < i} pieces[i']
    let prefix = |p: &[Field2D]| -> Vec<Field2D> {
        let mut out = Vec::with_capacity(n + 1);
        let mut acc = Field2D::zeros(f.grid());
        out.push(acc.clone());
        for piece in p {
            acc += piece;
            out.push(acc.clone());
        }
        out
    };
    let sf = prefix(&pf);
    let sg = prefix(&pg);

    let mut t_f_g = Field2D::zeros(f.grid());
    let mut t_g_f = Field2D::zeros(f.grid());
    let mut remainder = Field2D::zeros(f.grid());
    for i in 0..n {
        // S_{k-1} h = Σ_{k' ≤ k-2} pieces, i.e. the prefix ending before i - 1
        if i >= 2 {
            t_f_g += &sf[i - 1].multiply(&pg[i])?;
            t_g_f += &sg[i - 1].multiply(&pf[i])?;
        }
        let lo = i.saturating_sub(1);
        let hi = (i + 1).min(n - 1);
        let mut widened = Field2D::zeros(f.grid());
        for piece in &pf[lo..=hi] {
            widened += piece;
        }
        remainder += &widened.multiply(&pg[i])?;
    }
    Ok(BonyParts {
        t_f_g,
        t_g_f,
        remainder,
    })
}

/// `sup|f| / √(‖f‖ ‖∂_y f‖)` for a real vertical profile vanishing at
/// `y = 0`; bounded by `√2`.
pub fn agmon_ratio(grid: &Grid, profile: &[f64]) -> f64 {
    let w = grid.weights();
    let d1 = grid.d1();
    let l2: f64 = profile.iter().zip(w).map(|(f, w)| w * f * f).sum::<f64>().sqrt();
    let dl2: f64 = (0..grid.ny())
        .map(|i| {
            let d: f64 = (0..grid.ny()).map(|j| d1[(i, j)] * profile[j]).sum();
            w[i] * d * d
        })
        .sum::<f64>()
        .sqrt();
    let sup = profile.iter().fold(0.0f64, |m, f| m.max(f.abs()));
    sup / (l2 * dl2).sqrt()
}

/// `max_q ‖S_{q−1} f‖_{L^∞} / ‖∂_y f‖_{B^{1/2}}`, the constant in the
/// low-frequency `L^∞` bound used for the nonlinear terms.
pub fn linf_dominance_ratio(f: &Field2D) -> f64 {
    let cutoff = CutoffPair::new();
    let range = DyadicRange::for_grid(f.grid());
    let denom = besov_norm(&f.d_dy(), 0.5).total;
    range
        .iter()
        .map(|q| f.scale_modes(|xi| cutoff.low(q - 1, xi)).max_abs() / denom)
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid() -> Arc<Grid> {
        Grid::new(GridSpec::chebyshev(2.0 * PI, 32, 17)).unwrap()
    }

    fn random_band_limited(g: &Arc<Grid>, band: usize, rng: &mut ChaCha8Rng) -> Field2D {
        let terms: Vec<(f64, f64, f64, f64)> = (0..=band)
            .map(|m| {
                (
                    m as f64,
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(0.0..6.3),
                    rng.gen_range(1.0..4.0),
                )
            })
            .collect();
        Field2D::from_fn(g, |x, y| {
            terms
                .iter()
                .map(|(m, a, ph, n)| a * (m * x + ph).cos() * (n * y).sin())
                .sum()
        })
    }

    #[test]
    fn zero_and_single_block() {
        let g = grid();
        assert_eq!(besov_norm(&Field2D::zeros(&g), 0.5).total, 0.0);
        // φ = 1 exactly on [4/3, 3/2]; ξ = 11 = 1.375·2^3 sits only in block 3.
        let c = CutoffPair::new();
        assert_eq!(c.phi(1.375), 1.0);
        assert_eq!(c.phi(2.75), 0.0);
        assert_eq!(c.phi(0.6875), 0.0);
        let f = Field2D::from_fn(&g, |x, y| (11.0 * x).cos() * (PI * y).sin());
        let a = f.l2_norm();
        for s in [-1.0, 0.5, 1.5, 3.5] {
            let r = besov_norm(&f, s);
            assert!((r.total - 8f64.powf(s) * a).abs() < 1e-12 * r.total);
        }
    }

    #[test]
    fn homogeneity() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let f = random_band_limited(&g, 12, &mut rng);
            let c = rng.gen_range(-3.0..3.0);
            let lhs = besov_norm(&f.scale(c), 0.5).total;
            assert!((lhs - c.abs() * besov_norm(&f, 0.5).total).abs() < 1e-12 * lhs);
        }
    }

    #[test]
    fn constant_in_time_l2() {
        let g = grid();
        let f = Field2D::from_fn(&g, |x, y| (3.0 * x).sin() * y * (1.0 - y));
        let mut acc = CheminLernerAccumulator::new(&g, 0.5, TimeNorm::Lp(2.0));
        let dt = 0.01;
        for n in 1..=200 {
            acc.update_field(&f, n as f64 * dt, dt, 1.0).unwrap();
        }
        let expect = 2f64.sqrt() * besov_norm(&f, 0.5).total;
        assert!((acc.total() - expect).abs() < 1e-12 * expect);

        let mut zero = CheminLernerAccumulator::new(&g, 0.5, TimeNorm::Lp(2.0));
        zero.update_field(&f, 0.1, 0.1, 0.0).unwrap();
        assert_eq!(zero.total(), 0.0);
        assert!(matches!(
            zero.update_field(&f, 0.05, 0.1, 1.0),
            Err(Error::NonMonotoneTime { .. })
        ));
    }

    #[test]
    fn sup_norm_dominates_every_snapshot() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut acc = CheminLernerAccumulator::new(&g, 0.5, TimeNorm::Sup).with_snapshots();
        let mut best_snapshot: f64 = 0.0;
        for n in 0..10 {
            let f = random_band_limited(&g, 10, &mut rng);
            best_snapshot = best_snapshot.max(besov_norm(&f, 0.5).total);
            acc.update_field(&f, n as f64, 1.0, 1.0).unwrap();
        }
        // brute force: block-wise max over stored snapshots, then reassemble
        let snaps = acc.snapshots.clone().unwrap();
        let maxes: Vec<f64> = (0..snaps[0].len())
            .map(|i| snaps.iter().map(|s| s[i]).fold(0.0, f64::max))
            .collect();
        let brute = besov_from_block_norms(acc.q_min, &maxes, 0.5).total;
        assert!((acc.total() - brute).abs() < 1e-13 * brute);
        assert!(acc.total() >= best_snapshot);
    }

    #[test]
    fn bony_examples() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_band_limited(&g, 14, &mut rng);
        let c = Field2D::from_fn(&g, |_, y| 1.0 + y);
        let parts = bony_decompose(&f, &c).unwrap();
        assert!(parts.t_f_g.l2_norm() < 1e-15);
        let prod = f.multiply(&c).unwrap();
        assert!((&parts.sum() - &prod).l2_norm() < 1e-12 * prod.l2_norm());

        let z = bony_decompose(&Field2D::zeros(&g), &f).unwrap();
        assert_eq!(z.sum().l2_norm(), 0.0);

        let err = bony_decompose_in(&f, &f, -1, 2).unwrap_err();
        match err {
            Error::InsufficientLadder { missing } => assert_eq!(missing, vec![3, 4]),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn agmon_on_sine() {
        let g = Grid::new(GridSpec::chebyshev(2.0 * PI, 8, 65)).unwrap();
        let p: Vec<f64> = g.y().iter().map(|y| (PI * y).sin()).collect();
        let r = agmon_ratio(&g, &p);
        // sup = 1, ‖f‖ = 1/√2, ‖f'‖ = π/√2
        assert!((r - (2.0 / PI).sqrt()).abs() < 1e-10);
    }
}
