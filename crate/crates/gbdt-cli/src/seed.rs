//! System-specific seeds and the solutions they generate.

use gbdt::dirac::{DiracKind, DiracSeed};
use gbdt::nonlinear::chiral::{chiral_transform, ChiralBackground};
use gbdt::nonlinear::elliptic::{elliptic_transform, EllipticSeed, EllipticVariant, ScalarBackground};
use gbdt::nonlinear::nls::{nls_solution, NlsSeed};
use gbdt::nonlinear::nwave::{nwave_solution, NWaveSeed};
use gbdt::radial::{radial_construct, Boundedness, RadialSeed};
use gbdt::residuals::PdeKind;
use gbdt::{Error, GridSpec, SNode, SolutionGrid};

use crate::config::{Background, RunConfig, System};
use crate::error::CliError;

pub enum Seed {
    Dirac(DiracSeed),
    NWave(NWaveSeed),
    Nls(NlsSeed),
    Chiral(SNode),
    Elliptic(EllipticSeed),
    Radial(RadialSeed),
}

/// A constructed field with optional radial diagnostics.
pub struct Construction {
    pub field: SolutionGrid,
    pub boundedness: Option<(i64, Boundedness)>,
}

fn dirac_kind(system: System) -> Option<DiracKind> {
    match system {
        System::DiracSa => Some(DiracKind::SelfAdjoint),
        System::DiracGpe => Some(DiracKind::GeneralizedPe),
        System::DiracSkew => Some(DiracKind::SkewSelfAdjoint),
        _ => None,
    }
}

impl Seed {
    pub fn parse(system: System, text: &str) -> Result<Self, CliError> {
        let seed = match system {
            System::DiracSa | System::DiracGpe | System::DiracSkew => {
                let seed = DiracSeed::from_json(text)?;
                let want = dirac_kind(system).expect("Dirac system");
                if seed.kind() != want {
                    return Err(CliError::Config(format!("system {system} needs a {want:?} seed, got {:?}", seed.kind())));
                }
                seed.validate()?;
                Seed::Dirac(seed)
            }
            System::Nwave => {
                let seed = NWaveSeed::from_json(text)?;
                seed.validate()?;
                Seed::NWave(seed)
            }
            System::Fnls => {
                let seed: NlsSeed =
                    serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("NLS seed JSON: {e}")))?;
                seed.validate()?;
                Seed::Nls(seed)
            }
            System::Chiral => Seed::Chiral(SNode::from_json(text)?),
            System::SineGordon | System::SinhGordon => {
                let seed = EllipticSeed::from_json(text)?;
                let want = if system == System::SineGordon {
                    EllipticVariant::SineGordon
                } else {
                    EllipticVariant::SinhGordon
                };
                if seed.variant != want {
                    return Err(CliError::Config(format!("system {system} needs a {want:?} seed")));
                }
                Seed::Elliptic(seed)
            }
            System::Radial => {
                let seed = RadialSeed::from_json(text)?;
                seed.validate()?;
                Seed::Radial(seed)
            }
        };
        Ok(seed)
    }

    /// Residual of the node identity the seed must satisfy.
    pub fn identity_residual(&self) -> Result<f64, CliError> {
        Ok(match self {
            Seed::Dirac(s) => s.identity_defect().norm_fro(),
            Seed::NWave(s) => s.identity_residual(),
            Seed::Nls(s) => s.node_at(0.0, 0.0)?.identity_residual(),
            Seed::Chiral(n) => n.identity_residual(),
            Seed::Elliptic(s) => s.identity_defect().norm_fro(),
            Seed::Radial(s) => {
                let (d1, d2) = s.identity_defects();
                d1.max(d2)
            }
        })
    }

    /// Seed JSON in the format [`Seed::parse`] reads.
    pub fn to_json(&self) -> String {
        match self {
            Seed::Dirac(s) => s.to_json(),
            Seed::NWave(s) => s.to_json(),
            Seed::Nls(s) => serde_json::to_string(s).expect("seed serializes"),
            Seed::Chiral(n) => n.to_json(),
            Seed::Elliptic(s) => s.to_json(),
            Seed::Radial(s) => s.to_json(),
        }
    }

    pub fn construct(&self, cfg: &RunConfig, grid: &GridSpec) -> Result<Construction, CliError> {
        let field = match self {
            Seed::Dirac(s) => s.potential(grid)?,
            Seed::NWave(s) => nwave_solution(s, grid)?,
            Seed::Nls(s) => nls_solution(s, grid)?,
            Seed::Chiral(n) => chiral_transform(n, &chiral_background(cfg, n.m())?, grid)?,
            Seed::Elliptic(s) => elliptic_transform(s, &scalar_background(cfg)?, grid)?,
            Seed::Radial(s) => {
                let c = radial_construct(s, grid)?;
                return Ok(Construction { field: c.upsilon_grid()?, boundedness: Some((c.kappa, c.boundedness)) });
            }
        };
        Ok(Construction { field, boundedness: None })
    }

    /// Equation whose residual `verify` reports, if the system has one.
    pub fn pde(&self) -> Option<PdeKind> {
        match self {
            Seed::NWave(s) => Some(PdeKind::NWave { d: s.d(), d_hat: s.d_hat() }),
            Seed::Nls(_) => Some(PdeKind::Fnls),
            Seed::Chiral(_) => Some(PdeKind::Chiral),
            Seed::Elliptic(s) => Some(match s.variant {
                EllipticVariant::SineGordon => PdeKind::SineGordon,
                EllipticVariant::SinhGordon => PdeKind::SinhGordon,
            }),
            Seed::Dirac(_) | Seed::Radial(_) => None,
        }
    }
}

fn chiral_background(cfg: &RunConfig, m: usize) -> Result<ChiralBackground, CliError> {
    let bg = match &cfg.background {
        None => ChiralBackground::constant(gbdt::CMat::identity(m)),
        Some(Background::Constant { z }) => ChiralBackground::constant(z.clone()),
        Some(Background::DiagonalExponential { alpha, beta }) => {
            ChiralBackground::diagonal_exponential(alpha.clone(), beta.clone())?
        }
        Some(_) => return Err(CliError::Config("chiral background must be constant or diagonal_exponential".into())),
    };
    if bg.m() != m {
        return Err(CliError::Config(format!("chiral background has order {}, the node needs {m}", bg.m())));
    }
    Ok(bg)
}

fn scalar_background(cfg: &RunConfig) -> Result<ScalarBackground, CliError> {
    match &cfg.background {
        None | Some(Background::Zero) => Ok(ScalarBackground::zero()),
        Some(Background::Kink) if cfg.system == System::SineGordon => Ok(ScalarBackground::new(
            |x, _| 4.0 * x.exp().atan(),
            |x, _| 2.0 / x.cosh(),
            |_, _| 0.0,
        )),
        Some(_) => Err(CliError::Config("elliptic background must be zero, or kink for sine-Gordon".into())),
    }
}
