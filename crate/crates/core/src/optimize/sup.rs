use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::bfgs::{bfgs, Objective};
use super::param::tri_len;
use super::{minimize_discrete_cs, restart_rng, OptReport, OptimizerConfig};
use crate::error::{Error, Result};
use crate::linalg::SymMat;
use crate::model::MixedModel;

/// Unit-diagonal PSD matrix R Rᵀ from lower-triangular rows normalized to
/// unit length. `None` when a row vanishes.
pub fn unit_diag_from(p: &[f64], m: usize) -> Option<SymMat> {
    let mut rows = nalgebra::DMatrix::zeros(m, m);
    let mut k = 0;
    for i in 0..m {
        let row = &p[k..k + i + 1];
        let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(n > 1e-12) {
            return None;
        }
        for (j, v) in row.iter().enumerate() {
            rows[(i, j)] = v / n;
        }
        k += i + 1;
    }
    let q = SymMat::from_matrix(&(&rows * rows.transpose()));
    Some(q.map(|i, j, v| if i == j { 1.0 } else { v.clamp(-1.0, 1.0) }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupResult {
    #[serde(rename = "Q")]
    pub q: SymMat,
    pub value: f64,
    pub inner: OptReport,
    pub outer_converged: bool,
}

struct Outer<'a> {
    model: &'a MixedModel,
    cfg: OptimizerConfig,
}

impl Objective for Outer<'_> {
    fn dim(&self) -> usize {
        tri_len(self.model.m)
    }

    fn value(&self, p: &[f64]) -> Option<f64> {
        let q = unit_diag_from(p, self.model.m)?;
        minimize_discrete_cs(self.model, &q, &self.cfg).ok().map(|r| -r.best_value)
    }
}

/// Best-found maximizer over unit-diagonal Q of the inner discrete CS
/// minimum. No global optimality is claimed.
pub fn sup_over_q(model: &MixedModel, cfg: &OptimizerConfig) -> Result<SupResult> {
    cfg.validate()?;
    let m = model.m;
    if m == 1 {
        let q = SymMat::identity(1);
        let inner = minimize_discrete_cs(model, &q, cfg)?;
        return Ok(SupResult { q, value: inner.best_value, inner, outer_converged: true });
    }
    let outer = Outer { model, cfg: cfg.clone() };
    let mut ident = Vec::with_capacity(tri_len(m));
    for i in 0..m {
        for j in 0..=i {
            ident.push(if i == j { 1.0 } else { 0.0 });
        }
    }
    let mut starts = vec![ident];
    for k in 1..cfg.restarts.min(3) {
        let mut rng = restart_rng(cfg.seed ^ 0x5eed, m, k);
        let mut s = starts[0].clone();
        for v in s.iter_mut() {
            *v += 0.5 * rng.sample::<f64, _>(StandardNormal) + rng.gen_range(-0.1..0.1);
        }
        starts.push(s);
    }
    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    for s in &starts {
        let Some(res) = bfgs(&outer, s, cfg.max_iters.min(60), 1e-5) else { continue };
        log::debug!("outer start: value {:.10} iters {}", -res.f, res.iters);
        if best.as_ref().map_or(true, |b| res.f < b.0 - 1e-10) {
            best = Some((res.f, res.x, res.converged));
        }
    }
    let (_, p, outer_converged) = best.ok_or(Error::NoFeasibleStart { restarts: starts.len() })?;
    let q = unit_diag_from(&p, m).expect("accepted point is valid");
    let inner = minimize_discrete_cs(model, &q, cfg)?;
    Ok(SupResult { q, value: inner.best_value, inner, outer_converged })
}
