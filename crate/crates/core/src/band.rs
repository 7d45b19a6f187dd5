//! Analytic weights `e^{(a − r·c(t))|D_x|}` and the clocks `c(t)` that
//! measure how much of the initial band `a` has been consumed.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field2D;

/// Largest exponent `width · |ξ|` allowed in a weight.
pub const MAX_EXPONENT: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockKind {
    /// Hydrostatic solution.
    Theta,
    /// Anisotropic solution.
    Tau,
    /// Difference of the two.
    Eta,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalyticBandState {
    pub a: f64,
    pub rate: f64,
    pub clock: f64,
    pub kind: ClockKind,
    pub time: f64,
    /// `(t, clock)` samples, starting at `(0, 0)`.
    pub history: Vec<(f64, f64)>,
    /// First time the band width reached zero, if it did.
    pub exhausted_at: Option<f64>,
}

impl AnalyticBandState {
    pub fn new(a: f64, rate: f64, kind: ClockKind) -> Self {
        AnalyticBandState {
            a,
            rate,
            clock: 0.0,
            kind,
            time: 0.0,
            history: vec![(0.0, 0.0)],
            exhausted_at: None,
        }
    }

    /// `a − rate · clock`.
    pub fn width(&self) -> f64 {
        self.a - self.rate * self.clock
    }

    pub fn is_exhausted(&self) -> bool {
        self.exhausted_at.is_some()
    }

    /// `φ(ξ) = width · |ξ|`.
    pub fn phase(&self, xi: f64) -> f64 {
        self.width() * xi.abs()
    }

    /// Advances the clock by `driver · dt`. The solvers pass the time average
    /// of the driver over the step, which makes this the midpoint/trapezoid
    /// quadrature of the clock equation.
    pub fn step_clock(&mut self, driver: f64, dt: f64) -> Result<()> {
        if !(driver >= 0.0) {
            return Err(Error::Invariant(format!(
                "clock driver must be nonnegative, got {driver}"
            )));
        }
        if !(dt > 0.0) {
            return Err(Error::Invariant(format!("dt must be positive, got {dt}")));
        }
        let before = self.width();
        self.clock += driver * dt;
        let t0 = self.time;
        self.time += dt;
        self.history.push((self.time, self.clock));
        if self.exhausted_at.is_none() && self.width() <= 0.0 {
            // linear interpolation of the crossing inside the step
            let frac = if before > 0.0 {
                before / (before - self.width())
            } else {
                0.0
            };
            self.exhausted_at = Some(t0 + frac * dt);
        }
        Ok(())
    }

    /// Rows `t, clock, band_width` with a header line.
    pub fn history_csv(&self) -> String {
        let mut s = String::from("t,clock,band_width\n");
        for (t, c) in &self.history {
            let _ = writeln!(
                s,
                "{},{},{}",
                crate::fmt_f64(*t),
                crate::fmt_f64(*c),
                crate::fmt_f64(self.a - self.rate * c)
            );
        }
        s
    }
}

/// `e^{width |D_x|} f` for an explicit exponent coefficient.
pub fn apply_exponent(f: &Field2D, width: f64) -> Result<Field2D> {
    let top = width * f.grid().spec().xi_max();
    if top > MAX_EXPONENT {
        return Err(Error::WeightOverflow {
            exponent: top,
            cap: MAX_EXPONENT,
        });
    }
    Ok(f.scale_modes(|xi| (width * xi).exp()))
}

/// `f_φ = e^{φ(t, D_x)} f` with `φ = (a − rate · clock)|ξ|`.
pub fn apply_weight(f: &Field2D, band: &AnalyticBandState) -> Result<Field2D> {
    let width = band.width();
    if width < 0.0 {
        return Err(Error::BandExhausted {
            time: band.exhausted_at.unwrap_or(band.time),
            width,
        });
    }
    apply_exponent(f, width)
}

/// Inverse weight `e^{−φ(t, D_x)} f`.
pub fn remove_weight(f: &Field2D, band: &AnalyticBandState) -> Result<Field2D> {
    apply_exponent(f, -band.width())
}

/// `f⁺`: the field whose coefficients are the moduli of those of `f`.
pub fn plus_abs(f: &Field2D) -> Field2D {
    let mut out = f.clone();
    for c in out.coeffs_mut() {
        *c = Complex64::new(c.norm(), 0.0);
    }
    out
}

/// Subadditivity `φ(ξ) ≤ φ(ξ − η) + φ(η)` of the phase.
pub fn convexity_check(xi: f64, eta: f64, band: &AnalyticBandState) -> bool {
    let lhs = band.phase(xi);
    let rhs = band.phase(xi - eta) + band.phase(eta);
    lhs <= rhs + 1e-12 * (lhs.abs() + rhs.abs())
}
