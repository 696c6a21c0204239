//! Command dispatch.

use gbdt::dirac::{
    gpe_scattering, halfplane_samples, skew_weyl_direct, skew_weyl_inverse, weyl_direct, weyl_inverse, HalfPlane,
    WeylFunction,
};
use gbdt::nonlinear::nwave::{nwave_evolve, nwave_inverse, nwave_weyl};
use gbdt::residuals::{pde_residual, ResidualReport};
use gbdt::{Realization, SolutionGrid};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{Command, RunConfig, System, DEFAULT_VERIFY_TOL};
use crate::error::CliError;
use crate::seed::Seed;

/// Output body, metadata and, for a failed `verify`, the reason.
pub struct Outcome {
    pub body: String,
    pub meta: Value,
    pub failure: Option<String>,
}

/// Largest entrywise deviation between two fields and where it occurs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Deviation {
    pub max: f64,
    pub ix: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub it: Option<usize>,
    pub x: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

#[derive(Serialize)]
struct VerifyReport {
    system: System,
    pass: bool,
    tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pde_residual: Option<ResidualReport>,
    deviation: Deviation,
}

#[derive(Serialize)]
struct Snapshot {
    t: f64,
    realization: Realization,
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output serializes");
    s.push('\n');
    s
}

fn base_meta(cfg: &RunConfig) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("system".into(), json!(cfg.system));
    m.insert("command".into(), json!(cfg.command));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("grid".into(), json!(cfg.grid.map(|g| g.to_string())));
    m
}

fn parse_seed(cfg: &RunConfig) -> Result<Seed, CliError> {
    Seed::parse(cfg.system, &cfg.seed_text()?)
}

/// Validates the seed and reports its identity residual.
pub fn seed_check(cfg: &RunConfig) -> Result<String, CliError> {
    let seed = parse_seed(cfg)?;
    let r = seed.identity_residual()?;
    Ok(pretty(&json!({ "system": cfg.system, "valid": true, "seed_identity_residual": r })))
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.check()?;
    match cfg.command {
        Command::Construct => construct(cfg),
        Command::Weyl => weyl(cfg),
        Command::Scatter => scatter(cfg),
        Command::Invert => invert(cfg),
        Command::Verify => verify(cfg),
        Command::Evolve => evolve(cfg),
    }
}

fn done(body: String, meta: Map<String, Value>) -> Result<Outcome, CliError> {
    Ok(Outcome { body, meta: Value::Object(meta), failure: None })
}

fn construct(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let seed = parse_seed(cfg)?;
    let grid = cfg.grid()?;
    let c = seed.construct(cfg, &grid)?;
    let mut meta = base_meta(cfg);
    meta.insert("seed_identity_residual".into(), json!(seed.identity_residual()?));
    meta.insert("flagged".into(), json!(c.field.flagged_count()));
    if let Some((kappa, b)) = c.boundedness {
        meta.insert("kappa".into(), json!(kappa));
        meta.insert("boundedness".into(), json!(b));
    }
    done(c.field.to_csv(), meta)
}

fn weyl(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let seed = parse_seed(cfg)?;
    let w = match (&seed, cfg.system) {
        (Seed::Dirac(s), System::DiracSa) => weyl_direct(s)?,
        (Seed::Dirac(s), System::DiracSkew) => skew_weyl_direct(s)?,
        (Seed::NWave(s), _) => {
            let t = cfg.grid.and_then(|g| g.t0).unwrap_or(0.0);
            WeylFunction { realization: nwave_weyl(s, t)?, halfplane: HalfPlane::Lower }
        }
        _ => unreachable!("support matrix checked"),
    };
    let mut meta = base_meta(cfg);
    meta.insert("seed_identity_residual".into(), json!(seed.identity_residual()?));
    done(pretty(&w), meta)
}

fn scatter(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let seed = parse_seed(cfg)?;
    let Seed::Dirac(s) = &seed else { unreachable!("support matrix checked") };
    let sc = gpe_scattering(s)?;
    let mut meta = base_meta(cfg);
    meta.insert("seed_identity_residual".into(), json!(seed.identity_residual()?));
    done(pretty(&sc), meta)
}

fn invert(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let text = cfg
        .function
        .as_ref()
        .ok_or_else(|| CliError::Config("invert needs a \"function\" realization".into()))?
        .to_string();
    let phi = Realization::from_json(&text)?;
    let (seed, direct, half) = match cfg.system {
        System::DiracSa => {
            let s = weyl_inverse(&phi)?;
            let w = weyl_direct(&s)?;
            (Seed::Dirac(s), w.realization, w.halfplane)
        }
        System::DiracSkew => {
            let s = skew_weyl_inverse(&phi)?;
            let w = skew_weyl_direct(&s)?;
            (Seed::Dirac(s), w.realization, w.halfplane)
        }
        System::Nwave => {
            let (d, d_hat) = match (&cfg.d, &cfg.d_hat) {
                (Some(d), Some(dh)) => (d.clone(), dh.clone()),
                _ => return Err(CliError::Config("N-wave invert needs \"D\" and \"D_hat\"".into())),
            };
            let s = nwave_inverse(&phi, d, d_hat)?;
            let w = nwave_weyl(&s, 0.0)?;
            (Seed::NWave(s), w, HalfPlane::Lower)
        }
        _ => unreachable!("support matrix checked"),
    };
    let samples = halfplane_samples(half);
    let mut max_error: f64 = 0.0;
    for &lam in &samples {
        max_error = max_error.max((&phi.eval(lam)? - &direct.eval(lam)?).norm_fro());
    }
    let mut meta = base_meta(cfg);
    meta.insert("seed_identity_residual".into(), json!(seed.identity_residual()?));
    meta.insert(
        "round_trip".into(),
        json!({ "max_error": max_error, "samples": samples.len(), "halfplane": half }),
    );
    let mut body = seed.to_json();
    body.push('\n');
    done(body, meta)
}

fn evolve(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let seed = parse_seed(cfg)?;
    let Seed::NWave(s) = &seed else { unreachable!("support matrix checked") };
    let ts = cfg.grid()?.ts();
    if ts.is_empty() {
        return Err(CliError::Config("evolve needs a grid with t0,t1,nt".into()));
    }
    let snaps: Vec<Snapshot> = nwave_evolve(s, &ts)?
        .into_iter()
        .zip(ts)
        .map(|(realization, t)| Snapshot { t, realization })
        .collect();
    let mut meta = base_meta(cfg);
    meta.insert("seed_identity_residual".into(), json!(seed.identity_residual()?));
    done(pretty(&snaps), meta)
}

/// Entrywise maximum of `|a - b|` over samples flagged in neither field.
pub fn max_deviation(a: &SolutionGrid, b: &SolutionGrid) -> Result<Deviation, CliError> {
    if a.len() != b.len() || a.shape() != b.shape() {
        return Err(CliError::Config("fields differ in size or shape".into()));
    }
    let grid = a.grid;
    let mut dev = Deviation { max: 0.0, ix: 0, it: grid.nt.map(|_| 0), x: grid.x0, t: grid.t0 };
    for it in 0..grid.nt_or_one() {
        for ix in 0..grid.nx {
            let i = a.index(ix, it);
            if a.is_flagged(i) || b.is_flagged(i) {
                continue;
            }
            let d = a.values()[i]
                .as_slice()
                .iter()
                .zip(b.values()[i].as_slice())
                .map(|(p, q)| (p - q).norm())
                .fold(0.0, |m: f64, v| if v.is_nan() { v } else { m.max(v) });
            if d > dev.max || (d.is_nan() && !dev.max.is_nan()) {
                dev = Deviation {
                    max: d,
                    ix,
                    it: grid.nt.map(|_| it),
                    x: grid.x(ix),
                    t: grid.nt.map(|_| grid.t(it)),
                };
            }
        }
    }
    Ok(dev)
}

fn verify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let seed = parse_seed(cfg)?;
    let tol = cfg.tolerances.verify.unwrap_or(DEFAULT_VERIFY_TOL);
    let (field, fresh) = match &cfg.input {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
            let field = SolutionGrid::from_csv(cfg.system.tag(), &text)?;
            let fresh = seed.construct(cfg, &field.grid)?.field;
            (field, fresh)
        }
        None => {
            let field = seed.construct(cfg, &cfg.grid()?)?.field;
            (field.clone(), field)
        }
    };
    let deviation = max_deviation(&field, &fresh)?;
    let pde = match seed.pde() {
        Some(kind) if field.grid.nt.is_some() => Some(pde_residual(&kind, &field)?),
        _ => None,
    };
    let pde_ok = pde.as_ref().is_none_or(|r| r.max_residual <= tol);
    let pass = deviation.max <= tol && pde_ok;
    let failure = (!pass).then(|| {
        let mut parts = Vec::new();
        if !(deviation.max <= tol) {
            parts.push(format!("deviation {:e} at x = {}{}", deviation.max, deviation.x, at_t(deviation.t)));
        }
        if let Some(r) = pde.as_ref().filter(|_| !pde_ok) {
            parts.push(format!("PDE residual {:e} at x = {}{}", r.max_residual, r.x, at_t(r.t)));
        }
        format!("{} exceeds tolerance {tol:e}", parts.join(", "))
    });
    let report = VerifyReport { system: cfg.system, pass, tolerance: tol, pde_residual: pde, deviation };
    let mut meta = base_meta(cfg);
    meta.insert("grid".into(), json!(field.grid.to_string()));
    meta.insert("seed_identity_residual".into(), json!(seed.identity_residual()?));
    meta.insert("pass".into(), json!(pass));
    Ok(Outcome { body: pretty(&report), meta: Value::Object(meta), failure })
}

fn at_t(t: Option<f64>) -> String {
    t.map(|t| format!(", t = {t}")).unwrap_or_default()
}
