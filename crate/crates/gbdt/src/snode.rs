//! S-nodes `(A1, A2, S, Π1, Π2)` satisfying `A1 S - S A2 = Π1 Π2^*`, their
//! transfer functions, factorization and composition.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::matcore::{inverse, solve_linear, CMat, LinalgError, C64};
use crate::realization::Realization;

/// Relative tolerance for the node identity checked on construction.
pub const IDENTITY_TOL: f64 = 1e-9;
/// Absolute tolerance for the zero block required by [`SNode::factorize`].
pub const TRIANGULAR_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SNode {
    a1: CMat,
    a2: CMat,
    s: CMat,
    pi1: CMat,
    pi2: CMat,
}

impl SNode {
    /// Builds a node and checks the identity to within
    /// `1e-9 (‖A1‖‖S‖ + ‖Π1‖‖Π2‖)`.
    pub fn new(a1: CMat, a2: CMat, s: CMat, pi1: CMat, pi2: CMat) -> Result<Self> {
        let node = Self::new_unchecked(a1, a2, s, pi1, pi2)?;
        let residual = node.identity_residual();
        let tolerance = node.identity_tolerance();
        if !(residual <= tolerance) {
            return Err(Error::IdentityViolation { residual, tolerance });
        }
        Ok(node)
    }

    /// Builds a node checking only shapes and finiteness.
    pub fn new_unchecked(a1: CMat, a2: CMat, s: CMat, pi1: CMat, pi2: CMat) -> Result<Self> {
        let n = a1.nrows();
        let m = pi1.ncols();
        for (name, mat, want) in [
            ("A1", &a1, (n, n)),
            ("A2", &a2, (n, n)),
            ("S", &s, (n, n)),
            ("Pi1", &pi1, (n, m)),
            ("Pi2", &pi2, (n, m)),
        ] {
            if mat.shape() != want {
                return invalid(format!("{name} has shape {:?}, expected {:?}", mat.shape(), want));
            }
            if !mat.is_finite() {
                return Err(LinalgError::NonFinite.into());
            }
        }
        Ok(Self { a1, a2, s, pi1, pi2 })
    }

    /// Node given `Π2^*` instead of `Π2`.
    pub fn from_adjoint(a1: CMat, a2: CMat, s: CMat, pi1: CMat, pi2_adj: &CMat) -> Result<Self> {
        Self::new(a1, a2, s, pi1, pi2_adj.adjoint())
    }

    /// Empty node (`n = 0`) with `m` channels.
    pub fn empty(m: usize) -> Self {
        let z = CMat::zeros(0, 0);
        Self { a1: z.clone(), a2: z.clone(), s: z, pi1: CMat::zeros(0, m), pi2: CMat::zeros(0, m) }
    }

    pub fn n(&self) -> usize {
        self.a1.nrows()
    }

    pub fn m(&self) -> usize {
        self.pi1.ncols()
    }

    pub fn a1(&self) -> &CMat {
        &self.a1
    }

    pub fn a2(&self) -> &CMat {
        &self.a2
    }

    pub fn s(&self) -> &CMat {
        &self.s
    }

    pub fn pi1(&self) -> &CMat {
        &self.pi1
    }

    pub fn pi2(&self) -> &CMat {
        &self.pi2
    }

    pub fn pi2_adj(&self) -> CMat {
        self.pi2.adjoint()
    }

    /// `A1 S - S A2 - Π1 Π2^*`.
    pub fn identity_defect(&self) -> CMat {
        &(&(&self.a1 * &self.s) - &(&self.s * &self.a2)) - &(&self.pi1 * &self.pi2.adjoint())
    }

    /// Frobenius norm of the identity defect.
    pub fn identity_residual(&self) -> f64 {
        self.identity_defect().norm_fro()
    }

    pub fn identity_tolerance(&self) -> f64 {
        IDENTITY_TOL * (self.a1.norm_fro() * self.s.norm_fro() + self.pi1.norm_fro() * self.pi2.norm_fro())
    }

    /// Realization `(A1, Π1, Π2^* S^{-1}, I)` of the transfer function.
    pub fn transfer_realization(&self) -> Result<Realization> {
        let c = solve_linear(&self.s.adjoint(), &self.pi2)?.adjoint();
        Realization::new(self.a1.clone(), self.pi1.clone(), c, CMat::identity(self.m()))
    }

    /// Realization `(A2, S^{-1} Π1, -Π2^*, I)` of the inverse transfer function.
    pub fn transfer_inverse_realization(&self) -> Result<Realization> {
        let b = solve_linear(&self.s, &self.pi1)?;
        Realization::new(self.a2.clone(), b, -self.pi2.adjoint(), CMat::identity(self.m()))
    }

    /// `w_A(λ) = I - Π2^* S^{-1} (A1 - λI)^{-1} Π1`.
    pub fn transfer_eval(&self, lambda: C64) -> Result<CMat> {
        self.transfer_realization()?.eval(lambda)
    }

    /// `w_A(λ)^{-1} = I + Π2^* (A2 - λI)^{-1} S^{-1} Π1`.
    pub fn transfer_inverse_eval(&self, lambda: C64) -> Result<CMat> {
        self.transfer_inverse_realization()?.eval(lambda)
    }

    /// Splits the node at `n1` so that `w = w2 · w1`.
    ///
    /// Requires `A1` block lower and `A2` block upper triangular at the split
    /// and an invertible leading block of `S`.
    pub fn factorize(&self, n1: usize) -> Result<(SNode, SNode)> {
        let n = self.n();
        let m = self.m();
        if n1 > n {
            return invalid(format!("split {n1} exceeds node order {n}"));
        }
        let n2 = n - n1;
        if self.a1.block(0, n1, n1, n2).max_abs() > TRIANGULAR_TOL {
            return invalid("A1 is not block lower triangular at the split");
        }
        if self.a2.block(n1, 0, n2, n1).max_abs() > TRIANGULAR_TOL {
            return invalid("A2 is not block upper triangular at the split");
        }
        if n1 == 0 {
            return Ok((SNode::empty(m), self.clone()));
        }
        let s11 = self.s.block(0, 0, n1, n1);
        let s12 = self.s.block(0, n1, n1, n2);
        let s21 = self.s.block(n1, 0, n2, n1);
        let s22 = self.s.block(n1, n1, n2, n2);
        let p1 = self.pi1.rows_range(0, n1);
        let p2 = self.pi2.rows_range(0, n1);
        let node1 = SNode::new(
            self.a1.block(0, 0, n1, n1),
            self.a2.block(0, 0, n1, n1),
            s11.clone(),
            p1.clone(),
            p2.clone(),
        )?;
        if n2 == 0 {
            return Ok((node1, SNode::empty(m)));
        }
        let s11_inv = inverse(&s11)?;
        let left = &s21 * &s11_inv;
        let right_adj = (&s11_inv * &s12).adjoint();
        let schur = &s22 - &(&left * &s12);
        let q1 = &self.pi1.rows_range(n1, n2) - &(&left * &p1);
        let q2 = &self.pi2.rows_range(n1, n2) - &(&right_adj * &p2);
        let node2 = SNode::new(self.a1.block(n1, n1, n2, n2), self.a2.block(n1, n1, n2, n2), schur, q1, q2)?;
        Ok((node1, node2))
    }

    /// Joins two nodes into one whose transfer function is `w2 · w1`.
    pub fn compose(node1: &SNode, node2: &SNode) -> Result<SNode> {
        let m = node1.m();
        if node2.m() != m {
            return invalid(format!("channel counts differ: {m} vs {}", node2.m()));
        }
        let (n1, n2) = (node1.n(), node2.n());
        let s1_inv = inverse(&node1.s)?;
        let r = &(&node2.pi1 * &node1.pi2.adjoint()) * &s1_inv;
        let r2 = -(&(&s1_inv * &node1.pi1) * &node2.pi2.adjoint());
        let mut a1 = CMat::zeros(n1 + n2, n1 + n2);
        a1.set_block(0, 0, &node1.a1);
        a1.set_block(n1, 0, &r);
        a1.set_block(n1, n1, &node2.a1);
        let mut a2 = CMat::zeros(n1 + n2, n1 + n2);
        a2.set_block(0, 0, &node1.a2);
        a2.set_block(0, n1, &r2);
        a2.set_block(n1, n1, &node2.a2);
        SNode::new(
            a1,
            a2,
            CMat::block_diag(&[&node1.s, &node2.s]),
            CMat::vstack(&[&node1.pi1, &node2.pi1]),
            CMat::vstack(&[&node1.pi2, &node2.pi2]),
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("matrices serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("S-node JSON: {e}")))
    }
}

#[derive(Serialize, Deserialize)]
struct Raw {
    #[serde(rename = "A1")]
    a1: CMat,
    #[serde(rename = "A2")]
    a2: CMat,
    #[serde(rename = "S")]
    s: CMat,
    #[serde(rename = "Pi1")]
    pi1: CMat,
    #[serde(rename = "Pi2")]
    pi2: CMat,
}

impl Serialize for SNode {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        Raw {
            a1: self.a1.clone(),
            a2: self.a2.clone(),
            s: self.s.clone(),
            pi1: self.pi1.clone(),
            pi2: self.pi2.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SNode {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let r = Raw::deserialize(de)?;
        SNode::new(r.a1, r.a2, r.s, r.pi1, r.pi2).map_err(serde::de::Error::custom)
    }
}
