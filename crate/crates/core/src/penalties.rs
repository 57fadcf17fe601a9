//! GTV penalty functions `φ` and their edge-wise dual update operators.
//!
//! The dual update is `argmin_z λA_e φ*(z/(λA_e)) + (1/(2σ))‖v − z‖²`. For
//! norm penalties `φ*` is the indicator of the dual-norm unit ball and the
//! update reduces to clipping; the norm pairing is fixed to `ℓ2 ↔ ℓ2` and
//! `ℓ1 ↔ ℓ∞`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{GtvError, Result};
use crate::linalg::{self, SymEigen};

/// Relative slack accepted on the dual-norm ball; clipping lands on the
/// boundary only up to round-off.
pub const DUAL_FEASIBILITY_RTOL: f64 = 1e-12;

/// Vector clipping: `γ v/‖v‖₂` when `‖v‖₂ ≥ γ`, otherwise `v`.
pub fn clip(v: &[f64], gamma: f64) -> Vec<f64> {
    let norm = linalg::norm2(v);
    if norm >= gamma && norm > 0.0 {
        let s = gamma / norm;
        v.iter().map(|x| x * s).collect()
    } else {
        v.to_vec()
    }
}

/// Scalar clipping (sign-preserving clamp to `[−γ, γ]`).
pub fn clip_scalar(x: f64, gamma: f64) -> f64 {
    x.clamp(-gamma, gamma)
}

#[derive(Debug, Clone, PartialEq)]
pub enum GtvPenalty {
    /// `‖v‖₂` (network lasso)
    Norm2,
    /// `‖v‖₁`
    Norm1,
    /// `½‖v‖₂²`
    Quadratic,
    /// `½ vᵀQv` with positive-definite `Q`
    QuadraticQ(QuadraticPenalty),
}

/// Matrix-weighted quadratic penalty with its eigendecomposition cached.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticPenalty {
    q: DMatrix<f64>,
    eig: SymEigen,
}

impl QuadraticPenalty {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }
}

impl GtvPenalty {
    /// `½ vᵀQv`; `Q` must be symmetric positive definite.
    pub fn quadratic_q(q: DMatrix<f64>) -> Result<Self> {
        linalg::check_symmetric(&q, "penalty matrix")?;
        let eig = SymEigen::new(&q);
        if eig.min() <= 1e-12 * eig.max().max(1.0) {
            return Err(GtvError::Singular(format!(
                "penalty matrix must be positive definite (smallest eigenvalue {:e})",
                eig.min()
            )));
        }
        Ok(GtvPenalty::QuadraticQ(QuadraticPenalty { q, eig }))
    }

    /// Whether `φ` is a norm (the setting of the cluster-recovery guarantee).
    pub fn is_norm(&self) -> bool {
        matches!(self, GtvPenalty::Norm2 | GtvPenalty::Norm1)
    }

    /// `φ(v)`
    pub fn eval(&self, v: &[f64]) -> f64 {
        match self {
            GtvPenalty::Norm2 => linalg::norm2(v),
            GtvPenalty::Norm1 => linalg::norm1(v),
            GtvPenalty::Quadratic => 0.5 * linalg::dot(v, v),
            GtvPenalty::QuadraticQ(p) => 0.5 * linalg::dot(v, &linalg::mat_vec(&p.q, v)),
        }
    }

    /// Dual norm `‖u‖*` for norm penalties.
    pub fn dual_norm(&self, u: &[f64]) -> Option<f64> {
        match self {
            GtvPenalty::Norm2 => Some(linalg::norm2(u)),
            GtvPenalty::Norm1 => Some(linalg::norm_inf(u)),
            _ => None,
        }
    }

    /// Dual update with step `sigma` and edge scale `lam_a = λ·A_e`.
    pub fn dual_update(&self, v: &[f64], sigma: f64, lam_a: f64) -> Vec<f64> {
        match self {
            GtvPenalty::Norm2 => clip(v, lam_a),
            GtvPenalty::Norm1 => v.iter().map(|&x| clip_scalar(x, lam_a)).collect(),
            GtvPenalty::Quadratic => {
                let s = 1.0 / (1.0 + sigma / lam_a);
                v.iter().map(|x| x * s).collect()
            }
            // ((σ/λA)Q⁻¹ + I)⁻¹ = V diag(μ/(μ + σ/λA)) Vᵀ
            GtvPenalty::QuadraticQ(p) => {
                let r = sigma / lam_a;
                p.eig.apply(v, |mu| mu / (mu + r))
            }
        }
    }

    /// Whether `u` lies in the domain of `u ↦ λA φ*(u/λA)`. Always true for the
    /// quadratic kinds.
    pub fn conjugate_domain_ok(&self, u: &[f64], lam_a: f64) -> bool {
        match self.dual_norm(u) {
            Some(norm) => norm <= lam_a * (1.0 + DUAL_FEASIBILITY_RTOL),
            None => true,
        }
    }

    /// Scaled conjugate `λA φ*(u/λA)`: `0`/`+∞` (dual-ball indicator) for norm
    /// kinds, `‖u‖²/(2λA)` for `Quadratic` and `uᵀQ⁻¹u/(2λA)` for `QuadraticQ`.
    pub fn scaled_conjugate(&self, u: &[f64], lam_a: f64) -> f64 {
        match self {
            GtvPenalty::Norm2 | GtvPenalty::Norm1 => {
                if self.conjugate_domain_ok(u, lam_a) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            GtvPenalty::Quadratic => linalg::dot(u, u) / (2.0 * lam_a),
            GtvPenalty::QuadraticQ(p) => linalg::dot(u, &p.eig.apply(u, |mu| 1.0 / mu)) / (2.0 * lam_a),
        }
    }

    /// Parses a penalty token. `quadratic_q:<file>` tokens need a matrix
    /// loader and are handled by [`crate::io::parse_penalty`].
    pub fn from_token(token: &str) -> Result<Self> {
        token.parse()
    }

    pub fn token(&self) -> &'static str {
        match self {
            GtvPenalty::Norm2 => "norm2",
            GtvPenalty::Norm1 => "norm1",
            GtvPenalty::Quadratic => "quadratic",
            GtvPenalty::QuadraticQ(_) => "quadratic_q",
        }
    }
}

impl FromStr for GtvPenalty {
    type Err = GtvError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "norm2" => Ok(GtvPenalty::Norm2),
            "norm1" => Ok(GtvPenalty::Norm1),
            "quadratic" => Ok(GtvPenalty::Quadratic),
            other if other.starts_with("quadratic_q:") => Err(GtvError::InvalidArgument(
                "quadratic_q penalties are loaded from a matrix file".into(),
            )),
            other => Err(GtvError::Parse(format!(
                "unknown penalty '{other}' (expected norm2, norm1, quadratic or quadratic_q:<file>)"
            ))),
        }
    }
}

impl fmt::Display for GtvPenalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}
