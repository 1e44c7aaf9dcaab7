//! Mixed p-spin covariance ξ, its Hadamard derivatives, θ, and the field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMat;

/// One series term: (β_p ⊗ β_p) ⊙ A^{∘p}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub p: u32,
    pub beta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
struct ModelDoc {
    m: usize,
    terms: Vec<Term>,
    #[serde(default)]
    h: Option<Vec<f64>>,
    #[serde(default)]
    series_tail_tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDoc")]
pub struct MixedModel {
    pub m: usize,
    pub terms: Vec<Term>,
    pub h: Vec<f64>,
    pub series_tail_tol: f64,
}

/// The rank-one field matrix h hᵀ.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldOuter {
    pub matrix: SymMat,
}

pub const DEFAULT_TAIL_TOL: f64 = 1e-12;
/// Slack on the correlation-scale argument range [-1, 1].
pub const ARG_SLACK: f64 = 0.2;

impl TryFrom<ModelDoc> for MixedModel {
    type Error = Error;
    fn try_from(d: ModelDoc) -> Result<Self> {
        let h = d.h.unwrap_or_else(|| vec![0.0; d.m]);
        let mut model = MixedModel::new(d.m, d.terms, h)?;
        if let Some(t) = d.series_tail_tol {
            model.series_tail_tol = t;
        }
        Ok(model)
    }
}

fn falling(p: u32, k: usize) -> f64 {
    (0..k as u32).map(|i| (p - i) as f64).product()
}

impl MixedModel {
    pub fn new(m: usize, terms: Vec<Term>, h: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("m must be positive".into()));
        }
        if h.len() != m {
            return Err(Error::DimensionMismatch { expected: m, found: h.len() });
        }
        for t in &terms {
            if t.p < 2 {
                return Err(Error::InvalidInput(format!("term order p = {} < 2", t.p)));
            }
            if t.beta.len() != m {
                return Err(Error::DimensionMismatch { expected: m, found: t.beta.len() });
            }
            if t.beta.iter().any(|b| !b.is_finite()) {
                return Err(Error::InvalidInput("non-finite beta".into()));
            }
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite field".into()));
        }
        let model = MixedModel { m, terms, h, series_tail_tol: DEFAULT_TAIL_TOL };
        if !model.is_even() {
            log::warn!("model contains odd-p terms; results outside the even-model setting");
        }
        Ok(model)
    }

    /// Single-term model with identical coefficient `beta` on every copy.
    pub fn pure(m: usize, p: u32, beta: f64, h: Vec<f64>) -> Result<Self> {
        Self::new(m, vec![Term { p, beta: vec![beta; m] }], h)
    }

    pub fn is_even(&self) -> bool {
        self.terms.iter().all(|t| t.p % 2 == 0 || t.beta.iter().all(|&b| b == 0.0))
    }

    pub fn max_p(&self) -> u32 {
        self.terms.iter().map(|t| t.p).max().unwrap_or(0)
    }

    /// Inverse-temperature scaling: ξ → β²ξ and h → βh.
    pub fn scaled(&self, beta: f64) -> MixedModel {
        let mut out = self.clone();
        for t in &mut out.terms {
            for b in &mut t.beta {
                *b *= beta;
            }
        }
        for v in &mut out.h {
            *v *= beta;
        }
        out
    }

    /// Coefficient β_p(i)β_p(j) for the 2-spin term (0 if absent).
    pub fn two_spin_outer(&self) -> SymMat {
        let mut out = SymMat::zeros(self.m);
        for t in self.terms.iter().filter(|t| t.p == 2) {
            out = &out + &SymMat::outer(&t.beta);
        }
        out
    }

    pub fn field_outer(&self) -> FieldOuter {
        FieldOuter { matrix: SymMat::outer(&self.h) }
    }

    pub fn hh(&self) -> SymMat {
        SymMat::outer(&self.h)
    }

    fn check_arg(&self, a: &SymMat) -> Result<()> {
        if a.dim() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, found: a.dim() });
        }
        let bound = 1.0 + ARG_SLACK;
        for i in 0..self.m {
            for j in i..self.m {
                let v = a.get(i, j);
                if !(v.abs() <= bound) {
                    return Err(Error::ArgumentOutOfRange { value: v });
                }
            }
        }
        Ok(())
    }

    /// Scalar entry ξ^{(order)}_{ij}(a).
    pub fn xi_entry(&self, i: usize, j: usize, a: f64, order: usize) -> f64 {
        let mut s = 0.0;
        for t in &self.terms {
            if (t.p as usize) < order {
                continue;
            }
            let c = t.beta[i] * t.beta[j];
            if c == 0.0 {
                continue;
            }
            s += c * falling(t.p, order) * a.powi(t.p as i32 - order as i32);
        }
        s
    }

    /// ξ^{(order)}(A) = Σ_p p!/(p−order)! (β_p⊗β_p) ⊙ A^{∘(p−order)}.
    pub fn xi_eval(&self, a: &SymMat, order: usize) -> Result<SymMat> {
        if order > 4 {
            return Err(Error::OrderOutOfRange(order));
        }
        self.check_arg(a)?;
        Ok(a.map(|i, j, v| self.xi_entry(i, j, v, order)))
    }

    /// θ(A) = A ⊙ ξ'(A) − ξ(A) = Σ_p (p−1)(β_p⊗β_p) ⊙ A^{∘p}.
    pub fn theta_eval(&self, a: &SymMat) -> Result<SymMat> {
        self.check_arg(a)?;
        Ok(a.map(|i, j, v| {
            self.terms
                .iter()
                .map(|t| (t.p as f64 - 1.0) * t.beta[i] * t.beta[j] * v.powi(t.p as i32))
                .sum()
        }))
    }
}

/// Truncated (β⊗β) ⊙ (ch A − E): β_{2k}(j) = beta/√((2k)!) for 2k ≤ truncation_order.
pub fn cosh_model(
    beta: f64,
    m: usize,
    q_scale_hint: f64,
    truncation_order: u32,
) -> Result<MixedModel> {
    if !(beta > 0.0) {
        return Err(Error::InvalidInput(format!("beta must be positive, got {beta}")));
    }
    if truncation_order < 4 || truncation_order % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "truncation order must be even and >= 4, got {truncation_order}"
        )));
    }
    let bound = cosh_tail_bound(beta, q_scale_hint, truncation_order);
    if bound > DEFAULT_TAIL_TOL {
        return Err(Error::InvalidTruncation { bound, tol: DEFAULT_TAIL_TOL });
    }
    let mut terms = Vec::new();
    let mut fact = 1.0f64;
    for n in 1..=truncation_order {
        fact *= n as f64;
        if n % 2 == 0 {
            terms.push(Term { p: n, beta: vec![beta / fact.sqrt(); m] });
        }
    }
    MixedModel::new(m, terms, vec![0.0; m])
}

/// β² a^{T+2}/(T+2)! times the geometric factor bounding the remaining terms.
pub fn cosh_tail_bound(beta: f64, a: f64, truncation_order: u32) -> f64 {
    let t = truncation_order as f64;
    let first = (1..=truncation_order + 2).fold(a.abs().powi(truncation_order as i32 + 2), |acc, n| {
        acc / n as f64
    });
    let ratio = a * a / ((t + 3.0) * (t + 4.0));
    beta * beta * first / (1.0 - ratio).max(f64::MIN_POSITIVE)
}
