//! Run configuration, read from TOML. Unknown keys are errors.
//!
//! ```toml
//! schema_version = 1
//! system = "hydrostatic"        # or "anisotropic", "paired"
//! t_end = 10.0
//! dt = 0.01
//!
//! [grid]
//! lx = 6.283185307179586
//! nx = 64
//! ny = 64
//! vertical = "chebyshev-collocation"
//!
//! [data]
//! name = "gauss-sine"
//!
//! [band]
//! a = 0.5
//! lambda = 1.0
//! ```

use serde::{Deserialize, Serialize};

use crate::catalog::{DataSpec, NAMES};
use crate::energy::default_r;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::hydro::Physics;
use crate::modal::MAX_EPS_XI;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Hydrostatic,
    Anisotropic,
    Paired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub a: f64,
    pub lambda: f64,
    /// Rate of the comparison clock; defaults to `lambda`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Monitor {
    /// Energy functional of the run's own system.
    Energy,
    /// Vorticity functional (hydrostatic runs).
    Vorticity,
    /// Remainder functional (paired runs).
    Remainder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    /// Snapshot cadence in steps; 0 writes only the final state.
    #[serde(default)]
    pub snapshot_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub system: SystemKind,
    pub grid: GridSpec,
    pub data: DataSpec,
    pub band: BandConfig,
    /// Exponential rate `R`; defaults to `0.9 · min(1/8, k/8)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
    pub t_end: f64,
    pub dt: f64,
    /// Small constant of the smallness condition.
    #[serde(default = "default_c0")]
    pub c0: f64,
    #[serde(default)]
    pub physics: Physics,
    #[serde(default = "default_monitors")]
    pub monitors: Vec<Monitor>,
    /// Besov indices of the vorticity monitor.
    #[serde(default = "default_vorticity_s")]
    pub vorticity_s: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
    #[serde(default)]
    pub seed: u64,
}

fn default_c0() -> f64 {
    0.1
}
fn default_monitors() -> Vec<Monitor> {
    vec![Monitor::Energy]
}
fn default_vorticity_s() -> Vec<f64> {
    vec![0.5, 1.5]
}

/// One field-level validation message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl RunConfig {
    /// Defaults matching the small-data hydrostatic acceptance run.
    pub fn hydrostatic_default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            system: SystemKind::Hydrostatic,
            grid: GridSpec::chebyshev(std::f64::consts::TAU, 64, 64),
            data: DataSpec::named("gauss-sine"),
            band: BandConfig {
                a: 0.5,
                lambda: 1.0,
                mu: None,
            },
            r: None,
            eps: None,
            eps_list: None,
            t_end: 10.0,
            dt: 0.01,
            c0: default_c0(),
            physics: Physics::default(),
            monitors: default_monitors(),
            vorticity_s: default_vorticity_s(),
            output: None,
            seed: 0,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn mu(&self) -> f64 {
        self.band.mu.unwrap_or(self.band.lambda)
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// `R`, computing the default from the discrete Poincaré constant.
    pub fn resolved_r(&self) -> Result<f64> {
        match self.r {
            Some(r) => Ok(r),
            None => default_r(&self.grid),
        }
    }

    /// Every violated constraint, without running any physics.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut push = |field: &str, message: String| {
            out.push(Diagnostic {
                field: field.to_string(),
                message,
            })
        };
        if self.schema_version != SCHEMA_VERSION {
            push(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            );
        }
        if let Err(e) = self.grid.validate() {
            push("grid", e.to_string());
        }
        if !NAMES.contains(&self.data.name.as_str()) {
            push(
                "data.name",
                format!("unknown catalog entry {:?}; known: {}", self.data.name, NAMES.join(", ")),
            );
        } else if let Err(e) = self.data.validate() {
            push("data", e.to_string());
        }
        if !(self.band.a > 0.0 && self.band.a.is_finite()) {
            push("band.a", format!("must be positive, got {}", self.band.a));
        } else if self.grid.validate().is_ok()
            && self.band.a * self.grid.xi_max() > crate::band::MAX_EXPONENT
        {
            push(
                "band.a",
                format!(
                    "a·ξ_max = {:.3} exceeds {}",
                    self.band.a * self.grid.xi_max(),
                    crate::band::MAX_EXPONENT
                ),
            );
        }
        if !(self.band.lambda > 0.0 && self.band.lambda.is_finite()) {
            push("band.lambda", format!("must be positive, got {}", self.band.lambda));
        }
        if let Some(mu) = self.band.mu {
            if !(mu >= self.band.lambda && mu.is_finite()) {
                push("band.mu", format!("must be finite and at least lambda, got {mu}"));
            }
        }
        if let Some(r) = self.r {
            if !(r >= 0.0 && r.is_finite()) {
                push("r", format!("must be nonnegative, got {r}"));
            }
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            push("t_end", format!("must be positive, got {}", self.t_end));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            push("dt", format!("must be positive, got {}", self.dt));
        } else if self.t_end > 0.0 {
            let n = self.t_end / self.dt;
            if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
                push("dt", format!("t_end / dt = {n} is not an integer"));
            }
        }
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            push("c0", format!("must be positive, got {}", self.c0));
        }
        let xi_max = self.grid.xi_max();
        let check_eps = |field: &str, e: f64, out: &mut Vec<Diagnostic>| {
            if !(e > 0.0 && e <= 1.0) {
                out.push(Diagnostic {
                    field: field.to_string(),
                    message: format!("ε must lie in (0, 1], got {e}"),
                });
            } else if e * xi_max > MAX_EPS_XI {
                out.push(Diagnostic {
                    field: field.to_string(),
                    message: format!("ε·ξ_max = {:.3} exceeds {MAX_EPS_XI}", e * xi_max),
                });
            }
        };
        match self.system {
            SystemKind::Hydrostatic => {}
            SystemKind::Anisotropic => match self.eps {
                Some(e) => check_eps("eps", e, &mut out),
                None => out.push(Diagnostic {
                    field: "eps".into(),
                    message: "required for the anisotropic system".into(),
                }),
            },
            SystemKind::Paired => match (&self.eps, &self.eps_list) {
                (None, None) => out.push(Diagnostic {
                    field: "eps".into(),
                    message: "paired runs need eps or eps_list".into(),
                }),
                (e, list) => {
                    if let Some(e) = e {
                        check_eps("eps", *e, &mut out);
                    }
                    if let Some(list) = list {
                        for (i, e) in list.iter().enumerate() {
                            check_eps(&format!("eps_list[{i}]"), *e, &mut out);
                        }
                        if list.windows(2).any(|w| w[1] >= w[0]) {
                            out.push(Diagnostic {
                                field: "eps_list".into(),
                                message: "values must be strictly decreasing".into(),
                            });
                        }
                    }
                }
            },
        }
        for s in &self.vorticity_s {
            if !(0.0..=crate::besov::S_RANGE.1 - 2.0).contains(s) {
                out.push(Diagnostic {
                    field: "vorticity_s".into(),
                    message: format!("{s} outside [0, 2]"),
                });
            }
        }
        out
    }

    /// First diagnostic as an error.
    pub fn validate(&self) -> Result<()> {
        match self.diagnostics().into_iter().next() {
            None => Ok(()),
            Some(d) => Err(Error::Config {
                field: d.field,
                message: d.message,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips() {
        let c = RunConfig::hydrostatic_default();
        assert!(c.diagnostics().is_empty(), "{:?}", c.diagnostics());
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn missing_eps_is_named() {
        let mut c = RunConfig::hydrostatic_default();
        c.system = SystemKind::Anisotropic;
        let d = c.diagnostics();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].field, "eps");
    }

    #[test]
    fn unknown_keys_and_names_are_rejected() {
        let mut text = RunConfig::hydrostatic_default().to_toml().unwrap();
        text.push_str("\nbogus = 1\n");
        assert!(RunConfig::from_toml(&text).is_err());
        let mut c = RunConfig::hydrostatic_default();
        c.data.name = "nope".into();
        assert_eq!(c.diagnostics()[0].field, "data.name");
    }

    #[test]
    fn range_violations() {
        let mut c = RunConfig::hydrostatic_default();
        c.dt = 0.003;
        c.band.a = 20.0;
        let fields: Vec<String> = c.diagnostics().into_iter().map(|d| d.field).collect();
        assert!(fields.contains(&"dt".to_string()));
        assert!(fields.contains(&"band.a".to_string()));
    }
}
