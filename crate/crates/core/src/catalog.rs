//! Named analytic initial data.
//!
//! | name         | `u₀(x, y)`                                                     |
//! |--------------|----------------------------------------------------------------|
//! | `gauss-sine` | `A e^{−(x−c)²/(2σ²)} sin(k₀(x−c)) sin(2πny)`                   |
//! | `gauss-poly` | `A e^{−(x−c)²/(2σ²)} sin(k₀(x−c)) · 12√3 y(1−y)(1−2y)`        |
//! | `mode`       | `A cos(k₀ x) sin(2πny)` with `k₀` rounded to a resolved mode  |
//! | `zero`       | `0`                                                            |
//!
//! In every case `u₁ = b · u₀`. All vertical profiles vanish on the walls
//! and have zero vertical mean, so the data are compatible without the
//! corrector. When the amplitude is left unset it is chosen so that the
//! smallness sum equals half the threshold `c₀ a`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energy::smallness_check;
use crate::error::{Error, Result};
use crate::field::Field2D;
use crate::grid::Grid;

pub const NAMES: [&str; 4] = ["gauss-sine", "gauss-poly", "mode", "zero"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub name: String,
    /// `A`; `None` selects the amplitude from the smallness condition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Center `c`; `None` means `Lx/2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    #[serde(default = "default_k0")]
    pub k0: f64,
    /// Vertical index `n`.
    #[serde(default = "default_n")]
    pub n: u32,
    /// `u₁ = b u₀`.
    #[serde(default)]
    pub b: f64,
}

fn default_sigma() -> f64 {
    0.5
}
fn default_k0() -> f64 {
    1.0
}
fn default_n() -> u32 {
    1
}

impl DataSpec {
    pub fn named(name: &str) -> Self {
        DataSpec {
            name: name.to_string(),
            amplitude: None,
            sigma: default_sigma(),
            center: None,
            k0: default_k0(),
            n: default_n(),
            b: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !NAMES.contains(&self.name.as_str()) {
            return Err(Error::UnknownCatalog(self.name.clone()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::config("data.sigma", "must be positive"));
        }
        if self.n == 0 {
            return Err(Error::config("data.n", "must be at least 1"));
        }
        if let Some(a) = self.amplitude {
            if !a.is_finite() {
                return Err(Error::config("data.amplitude", "must be finite"));
            }
        }
        if !self.b.is_finite() || !self.k0.is_finite() {
            return Err(Error::config("data", "b and k0 must be finite"));
        }
        Ok(())
    }

    /// Unit-amplitude `u₀`.
    fn shape(&self, grid: &Arc<Grid>) -> Field2D {
        let c = self.center.unwrap_or(0.5 * grid.spec().lx);
        let s2 = 2.0 * self.sigma * self.sigma;
        let n = self.n as f64;
        let tau = std::f64::consts::TAU;
        let envelope = |x: f64| (-(x - c).powi(2) / s2).exp() * (self.k0 * (x - c)).sin();
        match self.name.as_str() {
            "gauss-sine" => Field2D::from_fn(grid, |x, y| envelope(x) * (tau * n * y).sin()),
            "gauss-poly" => Field2D::from_fn(grid, |x, y| {
                envelope(x) * 12.0 * 3f64.sqrt() * y * (1.0 - y) * (1.0 - 2.0 * y)
            }),
            "mode" => {
                let m = (self.k0 / grid.spec().dxi()).round() * grid.spec().dxi();
                Field2D::from_fn(grid, |x, y| (m * x).cos() * (tau * n * y).sin())
            }
            _ => Field2D::zeros(grid),
        }
    }

    /// `(u₀, u₁)` with the amplitude resolved against `(a, c₀)`.
    pub fn build(&self, grid: &Arc<Grid>, a: f64, c0: f64) -> Result<InitialData> {
        self.validate()?;
        let mut u0 = self.shape(grid);
        u0.enforce_dirichlet();
        let mut u1 = u0.scale(self.b);
        crate::modal::krasny_pair(&mut u0, &mut u1);
        let amplitude = match self.amplitude {
            Some(amp) => amp,
            None => {
                let unit = smallness_check(&u0, &u1, a, c0)?;
                if unit.sum > 0.0 {
                    0.5 * c0 * a / unit.sum
                } else {
                    0.0
                }
            }
        };
        Ok(InitialData {
            u0: u0.scale(amplitude),
            u1: u1.scale(amplitude),
            amplitude,
        })
    }
}

#[derive(Debug, Clone)]
pub struct InitialData {
    pub u0: Field2D,
    pub u1: Field2D,
    pub amplitude: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use std::f64::consts::PI;

    #[test]
    fn catalog_profiles_are_compatible() {
        let g = Grid::new(GridSpec::chebyshev(2.0 * PI, 32, 33)).unwrap();
        for name in NAMES {
            let mut d = DataSpec::named(name);
            d.amplitude = Some(1.0);
            d.b = -0.5;
            let data = d.build(&g, 0.5, 0.1).unwrap();
            for f in [&data.u0, &data.u1] {
                assert!(f.boundary_defect() < 1e-15);
                assert!(f.mean_y().iter().all(|m| m.norm() < 1e-12), "{name}");
            }
        }
    }

    #[test]
    fn auto_amplitude_meets_half_threshold() {
        let g = Grid::new(GridSpec::chebyshev(2.0 * PI, 64, 33)).unwrap();
        let data = DataSpec::named("gauss-sine").build(&g, 0.5, 0.1).unwrap();
        let rep = smallness_check(&data.u0, &data.u1, 0.5, 0.1).unwrap();
        assert!((rep.sum - 0.025).abs() < 1e-12);
        assert!(rep.passes && 2.0 * rep.sum <= rep.threshold * (1.0 + 1e-12));
    }

    #[test]
    fn unknown_name_is_rejected() {
        let g = Grid::new(GridSpec::chebyshev(2.0 * PI, 8, 9)).unwrap();
        assert!(matches!(
            DataSpec::named("vortex").build(&g, 0.5, 0.1),
            Err(Error::UnknownCatalog(_))
        ));
    }
}
