//! Student-t resampling kernels.
//!
//! Three locality assumptions weight observed events by their closeness to
//! the location/time being imputed:
//!
//! * `TL`: closeness in time, `psi(c * (t_new - t_j))`
//! * `GL`: closeness in space, `psi(c * dist)`
//! * `GLC`: closeness in space and in time of day,
//!   `psi(c1 * dist) * psi(c2 * circadian_lag)`
//!
//! Scale constants are per unit: `c` multiplies seconds for `TL` and meters
//! for `GL`. Weights are left unnormalized.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::projection::PlanarPoint;

pub const DAY_S: f64 = 86_400.0;

/// Base scales, multiplied by the configured scale multiplier.
pub const BASE_TIME_SCALE: f64 = 1.0 / 3600.0;
pub const BASE_SPACE_SCALE: f64 = 1.0 / 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelFamily {
    #[serde(rename = "TL")]
    Tl,
    #[serde(rename = "GL")]
    Gl,
    #[serde(rename = "GLC")]
    Glc,
    /// Constant weight; every donor is equally likely.
    #[serde(rename = "UNIFORM")]
    Uniform,
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelFamily::Tl => "TL",
            KernelFamily::Gl => "GL",
            KernelFamily::Glc => "GLC",
            KernelFamily::Uniform => "UNIFORM",
        })
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "TL" => Ok(KernelFamily::Tl),
            "GL" => Ok(KernelFamily::Gl),
            "GLC" => Ok(KernelFamily::Glc),
            "UNIFORM" => Ok(KernelFamily::Uniform),
            other => Err(Error::InvalidParameter(format!("unknown kernel family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub nu: f64,
    /// Scale for TL (per second) or GL (per meter).
    pub c: f64,
    /// Spatial scale for GLC (per meter).
    pub c1: f64,
    /// Circadian scale for GLC (per second).
    pub c2: f64,
    pub day_length: f64,
}

impl KernelSpec {
    pub fn tl(nu: f64, c: f64) -> Result<Self> {
        Self { family: KernelFamily::Tl, nu, c, c1: 0.0, c2: 0.0, day_length: DAY_S }.validated()
    }

    pub fn gl(nu: f64, c: f64) -> Result<Self> {
        Self { family: KernelFamily::Gl, nu, c, c1: 0.0, c2: 0.0, day_length: DAY_S }.validated()
    }

    pub fn glc(nu: f64, c1: f64, c2: f64) -> Result<Self> {
        Self { family: KernelFamily::Glc, nu, c: 0.0, c1, c2, day_length: DAY_S }.validated()
    }

    pub fn uniform() -> Self {
        Self { family: KernelFamily::Uniform, nu: 1.0, c: 0.0, c1: 0.0, c2: 0.0, day_length: DAY_S }
    }

    /// Default scales times `scale_mult`.
    pub fn with_defaults(family: KernelFamily, nu: f64, scale_mult: f64) -> Result<Self> {
        match family {
            KernelFamily::Tl => Self::tl(nu, BASE_TIME_SCALE * scale_mult),
            KernelFamily::Gl => Self::gl(nu, BASE_SPACE_SCALE * scale_mult),
            KernelFamily::Glc => Self::glc(nu, BASE_SPACE_SCALE * scale_mult, BASE_TIME_SCALE * scale_mult),
            KernelFamily::Uniform => Ok(Self::uniform()),
        }
    }

    pub fn validated(self) -> Result<Self> {
        let pos = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        pos(self.nu, "nu")?;
        pos(self.day_length, "day_length")?;
        match self.family {
            KernelFamily::Tl | KernelFamily::Gl => pos(self.c, "c")?,
            KernelFamily::Glc => {
                pos(self.c1, "c1")?;
                pos(self.c2, "c2")?;
            }
            KernelFamily::Uniform => {}
        }
        Ok(self)
    }
}

/// Student-t density with `nu` degrees of freedom.
pub fn t_density(u: f64, nu: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::InvalidParameter(format!("degrees of freedom must be positive, got {nu}")));
    }
    Ok(TDensity::new(nu).eval(u))
}

/// Student-t density with its normalizing constant precomputed.
#[derive(Debug, Clone, Copy)]
pub struct TDensity {
    nu: f64,
    norm: f64,
}

impl TDensity {
    pub fn new(nu: f64) -> Self {
        let ln_norm = ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (nu * PI).ln();
        TDensity { nu, norm: ln_norm.exp() }
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        let base = 1.0 + u * u / self.nu;
        if self.nu == 1.0 {
            self.norm / base
        } else {
            self.norm * base.powf(-(self.nu + 1.0) / 2.0)
        }
    }
}

/// Smallest separation in time of day, in `[0, day_length / 2]`.
pub fn circadian_lag(t_a: f64, t_b: f64, day_length: f64) -> f64 {
    let m = (t_a - t_b).abs() % day_length;
    m.min(day_length - m)
}

/// Precomputed evaluator for one kernel specification.
#[derive(Debug, Clone, Copy)]
pub struct Weighter {
    spec: KernelSpec,
    psi: TDensity,
}

impl Weighter {
    pub fn new(spec: &KernelSpec) -> Self {
        Weighter { spec: *spec, psi: TDensity::new(spec.nu) }
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    #[inline]
    pub fn weight(&self, z_new: &PlanarPoint, z_j: &PlanarPoint) -> f64 {
        let s = &self.spec;
        match s.family {
            KernelFamily::Tl => self.psi.eval(s.c * (z_new.t - z_j.t)),
            KernelFamily::Gl => self.psi.eval(s.c * z_new.dist(z_j)),
            KernelFamily::Glc => {
                self.psi.eval(s.c1 * z_new.dist(z_j)) * self.psi.eval(s.c2 * circadian_lag(z_new.t, z_j.t, s.day_length))
            }
            KernelFamily::Uniform => 1.0,
        }
    }
}

/// Resampling weight of the observed event starting at `z_j` for an event
/// to be imputed at `z_new`.
pub fn weight(spec: &KernelSpec, z_new: &PlanarPoint, z_j: &PlanarPoint) -> f64 {
    Weighter::new(spec).weight(z_new, z_j)
}
