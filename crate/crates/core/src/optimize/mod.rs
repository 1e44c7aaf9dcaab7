//! Minimization of the discrete functionals over order parameters.

pub mod bfgs;
mod cs;
mod gse;
pub mod param;
mod sup;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{DiscreteOrderParam, ZeroTempTriple};
use crate::linalg::SymMat;

pub use bfgs::{bfgs, numerical_gradient, LocalResult, Objective};
pub use cs::{minimize_discrete_cs, minimize_discrete_parisi, CsObjective, ParisiObjective};
pub use gse::{gse_triple, minimize_gse, rs_gse_closed_form, GseObjective, RsGse};
pub use sup::{sup_over_q, unit_diag_from, SupResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Floor ε in the multiplier parametrizations Λ₁ = εI + ΓΓᵀ and
    /// L − ∫αΦ' = εI + ΓΓᵀ.
    pub penalty_weight: f64,
    pub seed: u64,
    pub r_schedule: Vec<usize>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            restarts: 4,
            max_iters: 400,
            grad_tol: 1e-7,
            penalty_weight: 1e-10,
            seed: 0,
            r_schedule: vec![2, 3, 4],
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts < 1 {
            return Err(Error::InvalidInput("restarts must be at least 1".into()));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidInput("grad_tol must be positive".into()));
        }
        if !(self.penalty_weight >= 0.0) {
            return Err(Error::InvalidInput("penalty_weight must be nonnegative".into()));
        }
        if self.r_schedule.is_empty() || self.r_schedule.iter().any(|&r| r < 2) {
            return Err(Error::InvalidInput("r_schedule entries must be >= 2".into()));
        }
        Ok(())
    }

    fn schedule(&self) -> Vec<usize> {
        let mut s = self.r_schedule.clone();
        s.sort_unstable();
        s.dedup();
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArgMin {
    Discrete {
        order_param: DiscreteOrderParam,
    },
    Parisi {
        order_param: DiscreteOrderParam,
        lambda: SymMat,
    },
    ZeroTemp {
        triple: ZeroTempTriple,
        /// Step values of α, one per segment.
        a: Vec<f64>,
        #[serde(rename = "Qs")]
        qs: Vec<SymMat>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub r: usize,
    pub best_value: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptReport {
    pub best_value: f64,
    pub argmin: ArgMin,
    /// Best value of every restart, in schedule order then restart order.
    pub per_restart_values: Vec<f64>,
    pub converged: bool,
    /// Sup-norm of the gradient in the free coordinates at the reported point.
    pub kkt_residual: f64,
    pub levels: Vec<LevelSummary>,
}

pub(crate) fn restart_rng(seed: u64, r: usize, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((r as u64) << 32) | restart as u64);
    rng
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

/// Runs BFGS from every start; returns the per-start values and the index of
/// the winner (ties within 1e-10 go to the smaller parameter norm, then the
/// earlier start).
pub(crate) fn run_starts(
    obj: &dyn Objective,
    starts: &[Vec<f64>],
    cfg: &OptimizerConfig,
) -> (Vec<f64>, Option<(usize, LocalResult)>) {
    let mut values = Vec::with_capacity(starts.len());
    let mut best: Option<(usize, LocalResult)> = None;
    for (i, s) in starts.iter().enumerate() {
        let Some(res) = bfgs(obj, s, cfg.max_iters, cfg.grad_tol) else {
            values.push(f64::INFINITY);
            continue;
        };
        log::debug!("start {i}: value {:.12} iters {} grad {:.2e}", res.f, res.iters, res.grad_norm);
        values.push(res.f);
        let better = match &best {
            None => true,
            Some((_, b)) => {
                res.f < b.f - 1e-10 || ((res.f - b.f).abs() <= 1e-10 && norm2(&res.x) < norm2(&b.x))
            }
        };
        if better {
            best = Some((i, res));
        }
    }
    (values, best)
}
