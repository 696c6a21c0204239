//! State-space realizations `W(λ) = D + C (λI - A)^{-1} B` of rational
//! matrix functions.

use std::sync::OnceLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::matcore::{
    controllable_basis, eigenvalues, numerical_rank, solve_linear, CMat, LinalgError, Svd, C64,
};

/// Relative distance to the spectrum of `A` below which evaluation fails.
pub const POLE_TOL: f64 = 1e-12;

pub struct Realization {
    pub a: CMat,
    pub b: CMat,
    pub c: CMat,
    pub d: CMat,
    poles: OnceLock<std::result::Result<Vec<C64>, LinalgError>>,
}

impl Clone for Realization {
    fn clone(&self) -> Self {
        Self::assemble(self.a.clone(), self.b.clone(), self.c.clone(), self.d.clone())
    }
}

impl PartialEq for Realization {
    fn eq(&self, o: &Self) -> bool {
        self.a == o.a && self.b == o.b && self.c == o.c && self.d == o.d
    }
}

impl std::fmt::Debug for Realization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Realization")
            .field("a", &self.a)
            .field("b", &self.b)
            .field("c", &self.c)
            .field("d", &self.d)
            .finish()
    }
}

impl Realization {
    fn assemble(a: CMat, b: CMat, c: CMat, d: CMat) -> Self {
        Self { a, b, c, d, poles: OnceLock::new() }
    }

    pub fn new(a: CMat, b: CMat, c: CMat, d: CMat) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() {
            return invalid(format!("state matrix must be square, got {:?}", a.shape()));
        }
        let (m2, m1) = d.shape();
        if b.shape() != (n, m1) {
            return invalid(format!("B has shape {:?}, expected {:?}", b.shape(), (n, m1)));
        }
        if c.shape() != (m2, n) {
            return invalid(format!("C has shape {:?}, expected {:?}", c.shape(), (m2, n)));
        }
        if ![&a, &b, &c, &d].iter().all(|m| m.is_finite()) {
            return Err(LinalgError::NonFinite.into());
        }
        Ok(Self::assemble(a, b, c, d))
    }

    /// Constant function `W ≡ D` with an empty state space.
    pub fn constant(d: CMat) -> Self {
        let (m2, m1) = d.shape();
        Self::assemble(CMat::zeros(0, 0), CMat::zeros(0, m1), CMat::zeros(m2, 0), d)
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.d.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.d.nrows()
    }

    pub fn poles(&self) -> Result<&[C64]> {
        match self.poles.get_or_init(|| eigenvalues(&self.a)) {
            Ok(v) => Ok(v),
            Err(e) => Err(e.clone().into()),
        }
    }

    /// Distance from `lambda` to the nearest pole candidate.
    pub fn pole_distance(&self, lambda: C64) -> Result<f64> {
        Ok(self.poles()?.iter().map(|p| (p - lambda).norm()).fold(f64::INFINITY, f64::min))
    }

    /// Evaluates `D + C (λI - A)^{-1} B`.
    pub fn eval(&self, lambda: C64) -> Result<CMat> {
        if !(lambda.re.is_finite() && lambda.im.is_finite()) {
            return Err(LinalgError::NonFinite.into());
        }
        let n = self.order();
        if n == 0 {
            return Ok(self.d.clone());
        }
        let dist = self.pole_distance(lambda)?;
        if dist < POLE_TOL * self.a.norm_fro().max(1.0) {
            return Err(Error::NearPole(format!("{lambda}")));
        }
        let shifted = -self.a.shift(lambda);
        let x = solve_linear(&shifted, &self.b).map_err(|e| match e {
            LinalgError::Singular { .. } => Error::NearPole(format!("{lambda}")),
            other => other.into(),
        })?;
        Ok(&self.d + &(&self.c * &x))
    }

    pub fn is_controllable(&self) -> Result<bool> {
        Ok(controllable_basis(&self.a, &self.b)?.ncols() == self.order())
    }

    pub fn is_observable(&self) -> Result<bool> {
        Ok(controllable_basis(&self.a.adjoint(), &self.c.adjoint())?.ncols() == self.order())
    }

    /// Popov-Belevitch-Hautus controllability test, an independent check on
    /// [`Realization::is_controllable`].
    pub fn pbh_controllable(&self) -> Result<bool> {
        pbh(&self.a, &self.b)
    }

    pub fn pbh_observable(&self) -> Result<bool> {
        pbh(&self.a.adjoint(), &self.c.adjoint())
    }

    /// Removes uncontrollable and then unobservable states.
    pub fn minimal(&self) -> Result<Realization> {
        let qc = controllable_basis(&self.a, &self.b)?;
        let a1 = &(&qc.adjoint() * &self.a) * &qc;
        let b1 = &qc.adjoint() * &self.b;
        let c1 = &self.c * &qc;
        let qo = controllable_basis(&a1.adjoint(), &c1.adjoint())?;
        let a2 = &(&qo.adjoint() * &a1) * &qo;
        let b2 = &qo.adjoint() * &b1;
        let c2 = &c1 * &qo;
        Realization::new(a2, b2, c2, self.d.clone())
    }

    /// Realization of `W^{-1}`; requires `D = I`.
    pub fn invert(&self) -> Result<Realization> {
        let m = self.outputs();
        if self.inputs() != m || self.d.dist(&CMat::identity(m)) > 1e-12 {
            return invalid("inversion requires D = I");
        }
        let ax = &self.a - &(&self.b * &self.c);
        Realization::new(ax, self.b.clone(), -&self.c, self.d.clone())
    }

    /// `(T A T^{-1}, T B, C T^{-1}, D)`.
    pub fn similar(&self, t: &CMat) -> Result<Realization> {
        if t.shape() != self.a.shape() {
            return invalid("similarity transform has the wrong shape");
        }
        let tinv = crate::matcore::inverse(t)?;
        Realization::new(&(t * &self.a) * &tinv, t * &self.b, &self.c * &tinv, self.d.clone())
    }

    /// Series connection `self · other` (apply `other` first).
    pub fn product(&self, other: &Realization) -> Result<Realization> {
        if self.inputs() != other.outputs() {
            return invalid("product dimension mismatch");
        }
        let (n1, n2) = (self.order(), other.order());
        let mut a = CMat::zeros(n1 + n2, n1 + n2);
        a.set_block(0, 0, &self.a);
        a.set_block(0, n1, &(&self.b * &other.c));
        a.set_block(n1, n1, &other.a);
        let b = CMat::vstack(&[&(&self.b * &other.d), &other.b]);
        let c = CMat::hstack(&[&self.c, &(&self.d * &other.c)]);
        Realization::new(a, b, c, &self.d * &other.d)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("matrices serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("realization JSON: {e}")))
    }
}

fn pbh(a: &CMat, b: &CMat) -> Result<bool> {
    let n = a.nrows();
    let scale = a.norm_fro().max(b.norm_fro());
    for mu in eigenvalues(a)? {
        let m = CMat::hstack(&[&a.shift(mu), b]);
        let s = Svd::new(&m)?.s;
        if numerical_rank(&s, scale) < n {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Minimal realization of the same transfer function.
pub fn minimal_realize(r: &Realization) -> Result<Realization> {
    r.minimal()
}

#[derive(Serialize, Deserialize)]
struct Raw {
    #[serde(rename = "A")]
    a: CMat,
    #[serde(rename = "B")]
    b: CMat,
    #[serde(rename = "C")]
    c: CMat,
    #[serde(rename = "D")]
    d: CMat,
}

impl Serialize for Realization {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        Raw { a: self.a.clone(), b: self.b.clone(), c: self.c.clone(), d: self.d.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Realization {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = Raw::deserialize(de)?;
        let n = raw.a.nrows();
        let (m2, m1) = raw.d.shape();
        // Empty JSON arrays lose their column count; restore it from D.
        let b = if n == 0 { CMat::zeros(0, m1) } else { raw.b };
        let c = if n == 0 { CMat::zeros(m2, 0) } else { raw.c };
        let a = if n == 0 { CMat::zeros(0, 0) } else { raw.a };
        Realization::new(a, b, c, raw.d).map_err(serde::de::Error::custom)
    }
}
