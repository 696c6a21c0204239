use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::LinalgError;

/// Default sampling density, points per unit length.
pub const DEFAULT_POINTS_PER_UNIT: usize = 2000;

/// Uniform grid in `x`, optionally paired with a uniform grid in `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x0: f64,
    pub x1: f64,
    pub nx: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nt: Option<usize>,
}

impl GridSpec {
    pub fn new(x0: f64, x1: f64, nx: usize) -> Result<Self, LinalgError> {
        let g = Self { x0, x1, nx, t0: None, t1: None, nt: None };
        g.validate()?;
        Ok(g)
    }

    pub fn new_2d(x0: f64, x1: f64, nx: usize, t0: f64, t1: f64, nt: usize) -> Result<Self, LinalgError> {
        let g = Self { x0, x1, nx, t0: Some(t0), t1: Some(t1), nt: Some(nt) };
        g.validate()?;
        Ok(g)
    }

    /// Grid on `[x0, x1]` with the default density.
    pub fn with_default_density(x0: f64, x1: f64) -> Result<Self, LinalgError> {
        let nx = ((x1 - x0) * DEFAULT_POINTS_PER_UNIT as f64).ceil().max(1.0) as usize + 1;
        Self::new(x0, x1, nx)
    }

    pub fn validate(&self) -> Result<(), LinalgError> {
        let bad = |m: String| Err(LinalgError::InvalidGrid(m));
        if !(self.x0.is_finite() && self.x1.is_finite()) || self.x0 >= self.x1 {
            return bad(format!("need finite x0 < x1, got [{}, {}]", self.x0, self.x1));
        }
        if self.nx < 2 {
            return bad(format!("need nx >= 2, got {}", self.nx));
        }
        match (self.t0, self.t1, self.nt) {
            (None, None, None) => Ok(()),
            (Some(t0), Some(t1), Some(nt)) => {
                if !(t0.is_finite() && t1.is_finite()) || t0 >= t1 {
                    return bad(format!("need finite t0 < t1, got [{t0}, {t1}]"));
                }
                if nt < 2 {
                    return bad(format!("need nt >= 2, got {nt}"));
                }
                Ok(())
            }
            _ => bad("t0, t1 and nt must be given together".into()),
        }
    }

    pub fn has_t(&self) -> bool {
        self.nt.is_some()
    }

    pub fn hx(&self) -> f64 {
        (self.x1 - self.x0) / (self.nx - 1) as f64
    }

    pub fn ht(&self) -> Option<f64> {
        Some((self.t1? - self.t0?) / (self.nt? - 1) as f64)
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.nx {
            self.x1
        } else {
            self.x0 + i as f64 * self.hx()
        }
    }

    pub fn t(&self, k: usize) -> f64 {
        let (t0, t1, nt) = (self.t0.unwrap_or(0.0), self.t1.unwrap_or(0.0), self.nt.unwrap_or(1));
        if k + 1 == nt {
            t1
        } else {
            t0 + k as f64 * (t1 - t0) / (nt - 1) as f64
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn ts(&self) -> Vec<f64> {
        (0..self.nt.unwrap_or(0)).map(|k| self.t(k)).collect()
    }

    /// Number of time samples, 1 for a purely spatial grid.
    pub fn nt_or_one(&self) -> usize {
        self.nt.unwrap_or(1)
    }

    /// Same domain with step sizes halved.
    pub fn refined(&self) -> Self {
        Self { nx: 2 * self.nx - 1, nt: self.nt.map(|n| 2 * n - 1), ..*self }
    }
}

impl FromStr for GridSpec {
    type Err = LinalgError;

    /// Parses `"x0,x1,nx"` or `"x0,x1,nx,t0,t1,nt"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || LinalgError::InvalidGrid(format!("cannot parse grid '{s}'"));
        let f = |p: &str| p.parse::<f64>().map_err(|_| bad());
        let u = |p: &str| p.parse::<usize>().map_err(|_| bad());
        match parts.len() {
            3 => Self::new(f(parts[0])?, f(parts[1])?, u(parts[2])?),
            6 => Self::new_2d(f(parts[0])?, f(parts[1])?, u(parts[2])?, f(parts[3])?, f(parts[4])?, u(parts[5])?),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.x0, self.x1, self.nx)?;
        if let (Some(t0), Some(t1), Some(nt)) = (self.t0, self.t1, self.nt) {
            write!(f, ",{t0},{t1},{nt}")?;
        }
        Ok(())
    }
}
