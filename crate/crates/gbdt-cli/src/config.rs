//! Run configuration: system tag, command, seed, grid and tolerances.

use std::fmt;
use std::path::{Path, PathBuf};

use gbdt::{CMat, GridSpec};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::CliError;

/// Default bound on both the PDE residual and the deviation checked by
/// `verify`.
pub const DEFAULT_VERIFY_TOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum System {
    DiracSa,
    DiracGpe,
    DiracSkew,
    Nwave,
    Fnls,
    Chiral,
    SineGordon,
    SinhGordon,
    Radial,
}

impl System {
    pub fn tag(self) -> &'static str {
        match self {
            System::DiracSa => "dirac-sa",
            System::DiracGpe => "dirac-gpe",
            System::DiracSkew => "dirac-skew",
            System::Nwave => "nwave",
            System::Fnls => "fnls",
            System::Chiral => "chiral",
            System::SineGordon => "sine-gordon",
            System::SinhGordon => "sinh-gordon",
            System::Radial => "radial",
        }
    }

    pub fn supports(self, command: Command) -> bool {
        match command {
            Command::Construct | Command::Verify => true,
            Command::Weyl | Command::Invert => matches!(self, System::DiracSa | System::DiracSkew | System::Nwave),
            Command::Scatter => self == System::DiracGpe,
            Command::Evolve => self == System::Nwave,
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Construct,
    Weyl,
    Scatter,
    Invert,
    Verify,
    Evolve,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::Construct => "construct",
            Command::Weyl => "weyl",
            Command::Scatter => "scatter",
            Command::Invert => "invert",
            Command::Verify => "verify",
            Command::Evolve => "evolve",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default)]
    pub verify: Option<f64>,
}

/// Known solution a chiral or elliptic transformation starts from.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Background {
    /// Constant invertible chiral field `z`.
    Constant { z: CMat },
    /// Chiral field `z = diag(exp(α_k x + β_k t))`.
    DiagonalExponential { alpha: Vec<f64>, beta: Vec<f64> },
    /// Scalar `v ≡ 0`.
    Zero,
    /// Sine-Gordon kink `v = 4 atan(e^x)`.
    Kink,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: System,
    pub command: Command,
    #[serde(default)]
    pub seed: Option<serde_json::Value>,
    /// `"x0,x1,nx[,t0,t1,nt]"` or an object with those fields.
    #[serde(default, deserialize_with = "grid_field")]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub background: Option<Background>,
    /// Realization inverted by `invert`.
    #[serde(default)]
    pub function: Option<serde_json::Value>,
    /// Diagonals of `D` and `D̂` for an N-wave `invert`.
    #[serde(rename = "D", default)]
    pub d: Option<Vec<f64>>,
    #[serde(rename = "D_hat", default)]
    pub d_hat: Option<Vec<f64>>,
    /// CSV checked by `verify`.
    #[serde(default)]
    pub input: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    /// Reads a config file; relative `output` and `input` paths resolve
    /// against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.output, &mut cfg.input].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), CliError> {
        if !self.system.supports(self.command) {
            return Err(CliError::Config(format!(
                "command {} is not supported for system {}",
                self.command, self.system
            )));
        }
        if let Some(g) = &self.grid {
            g.validate().map_err(|e| CliError::Config(format!("grid: {e}")))?;
        }
        if let Some(t) = self.tolerances.verify {
            check_tol(t)?;
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec, CliError> {
        self.grid.ok_or_else(|| CliError::Config(format!("{} needs a grid", self.command)))
    }

    pub fn seed_text(&self) -> Result<String, CliError> {
        self.seed
            .as_ref()
            .map(|v| v.to_string())
            .ok_or_else(|| CliError::Config(format!("{} needs a seed", self.command)))
    }
}

fn grid_field<'de, D: Deserializer<'de>>(d: D) -> Result<Option<GridSpec>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Field {
        Text(String),
        Spec(GridSpec),
    }
    match Option::<Field>::deserialize(d)? {
        None => Ok(None),
        Some(Field::Spec(g)) => Ok(Some(g)),
        Some(Field::Text(s)) => s.parse().map(Some).map_err(serde::de::Error::custom),
    }
}

pub fn check_tol(t: f64) -> Result<(), CliError> {
    if !(t.is_finite() && t > 0.0) {
        return Err(CliError::Config(format!("tolerance must be positive and finite, got {t}")));
    }
    Ok(())
}
