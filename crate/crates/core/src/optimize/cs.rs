use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::bfgs::Objective;
use super::param::{gram, lower_from, lower_to, psd_factor, split_widest, tri_len, LevelLayout};
use super::{restart_rng, run_starts, ArgMin, LevelSummary, OptReport, OptimizerConfig};
use crate::error::{Error, Result};
use crate::functionals::{discrete_cs, discrete_cs_grad, discrete_parisi, DiscreteOrderParam};
use crate::linalg::SymMat;
use crate::model::MixedModel;

/// Checks Q ∈ 𝕄: symmetric PSD with unit diagonal.
pub(crate) fn check_constraint(model: &MixedModel, q: &SymMat) -> Result<()> {
    if q.dim() != model.m {
        return Err(Error::DimensionMismatch { expected: model.m, found: q.dim() });
    }
    for i in 0..q.dim() {
        if (q.get(i, i) - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInput(format!("Q[{i}][{i}] = {} is not 1", q.get(i, i))));
        }
    }
    let me = q.min_eig();
    if me < -1e-10 {
        return Err(Error::NotPositiveDefinite { min_eig: me });
    }
    Ok(())
}

/// Discrete CS over (x, Q_1..Q_{r−1}) for fixed Q_r = Q, with the exact
/// gradient pulled back through the level coordinates.
pub struct CsObjective<'a> {
    pub model: &'a MixedModel,
    pub q: SymMat,
    pub layout: LevelLayout,
}

impl<'a> CsObjective<'a> {
    pub fn new(model: &'a MixedModel, q: &SymMat, r: usize) -> Self {
        CsObjective { model, q: q.clone(), layout: LevelLayout { m: model.m, r } }
    }

    pub fn decode(&self, p: &[f64]) -> DiscreteOrderParam {
        self.layout.decode(p, &self.q)
    }

    pub fn encode(&self, op: &DiscreteOrderParam) -> Vec<f64> {
        self.layout.encode(&op.x, &op.qs)
    }
}

impl Objective for CsObjective<'_> {
    fn dim(&self) -> usize {
        self.layout.n_u() + self.layout.n_f()
    }

    fn value(&self, p: &[f64]) -> Option<f64> {
        discrete_cs(self.model, &self.decode(p)).ok()
    }

    fn gradient(&self, p: &[f64], _f0: f64) -> Option<Vec<f64>> {
        let lay = self.layout;
        let nu = lay.n_u();
        let g = discrete_cs_grad(self.model, &self.decode(p)).ok()?;
        let mut out = vec![0.0; self.dim()];
        let jac = lay.x_jacobian(&p[..nu]);
        for (k, row) in jac.iter().enumerate() {
            for j in 0..nu {
                out[j] += g.dx[k] * row[j];
            }
        }
        let t = tri_len(lay.m);
        // ∂/∂F_i = 2 (Σ_{k>i} ∂C/∂Q_k) F_i
        let mut tail = SymMat::zeros(lay.m);
        for i in (0..lay.r - 1).rev() {
            tail = &tail + &g.dq[i];
            let f = lower_from(&p[nu + i * t..nu + (i + 1) * t], lay.m);
            let gf = tail.as_matrix() * &f * 2.0;
            out[nu + i * t..nu + (i + 1) * t].copy_from_slice(&lower_to(&gf));
        }
        Some(out)
    }
}

/// Discrete Parisi over (x, Q_1..Q_{r−1}, Λ) with Λ = D + εI + ΓΓᵀ and
/// D = Σ x_k(ξ'(Q_{k+1}) − ξ'(Q_k)).
pub struct ParisiObjective<'a> {
    pub model: &'a MixedModel,
    pub q: SymMat,
    pub layout: LevelLayout,
    pub eps: f64,
}

impl<'a> ParisiObjective<'a> {
    pub fn new(model: &'a MixedModel, q: &SymMat, r: usize, eps: f64) -> Self {
        ParisiObjective { model, q: q.clone(), layout: LevelLayout { m: model.m, r }, eps }
    }

    fn floor(&self, op: &DiscreteOrderParam) -> Option<SymMat> {
        let mut acc = SymMat::zeros(self.layout.m);
        for k in 1..op.r() {
            let d = &self.model.xi_eval(&op.q(k + 1), 1).ok()? - &self.model.xi_eval(&op.q(k), 1).ok()?;
            acc.axpy(op.x[k], &d);
        }
        Some(acc)
    }

    pub fn decode(&self, p: &[f64]) -> Option<(DiscreteOrderParam, SymMat)> {
        let n = self.layout.n_u() + self.layout.n_f();
        let op = self.layout.decode(&p[..n], &self.q);
        let gamma = gram(&lower_from(&p[n..], self.layout.m));
        let mut lam = &self.floor(&op)? + &gamma;
        lam = &lam + &SymMat::identity(self.layout.m).scale(self.eps);
        Some((op, lam))
    }

    /// Coordinates for (x, Q) with Λ₁ = lambda1.
    pub fn encode(&self, op: &DiscreteOrderParam, lambda1: &SymMat) -> Vec<f64> {
        let mut out = self.layout.encode(&op.x, &op.qs);
        let rest = lambda1 - &SymMat::identity(self.layout.m).scale(self.eps);
        out.extend(lower_to(&psd_factor(&rest)));
        out
    }
}

impl Objective for ParisiObjective<'_> {
    fn dim(&self) -> usize {
        self.layout.n_u() + self.layout.n_f() + tri_len(self.layout.m)
    }

    fn value(&self, p: &[f64]) -> Option<f64> {
        let (op, lam) = self.decode(p)?;
        discrete_parisi(self.model, &lam, &op).ok()
    }
}

/// Even spacing: x_k = k/(r−1), Q_k = (k/r)·Q.
pub(crate) fn even_levels(q: &SymMat, r: usize) -> DiscreteOrderParam {
    let x = (0..r).map(|k| k as f64 / (r - 1) as f64).collect();
    let mut qs: Vec<SymMat> = (1..r).map(|k| q.scale(k as f64 / r as f64)).collect();
    qs.push(q.clone());
    DiscreteOrderParam { x, qs }
}

/// Q_k = Q^{1/2} S_k Q^{1/2} with random increasing S_k ≤ I; sorted uniform x.
pub(crate) fn random_levels(rng: &mut ChaCha8Rng, q: &SymMat, r: usize) -> Option<DiscreteOrderParam> {
    let m = q.dim();
    let half = q.sqrt().ok()?;
    let mut inner: Vec<f64> = (0..r - 2).map(|_| rng.gen_range(0.05..0.95)).collect();
    inner.sort_by(f64::total_cmp);
    let mut x = vec![0.0];
    x.extend(inner);
    x.push(1.0);
    let incs: Vec<SymMat> = (0..r - 1)
        .map(|_| {
            let g = nalgebra::DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
            &SymMat::from_matrix(&(&g * g.transpose())) + &SymMat::identity(m).scale(0.1)
        })
        .collect();
    let mut total = SymMat::zeros(m);
    for e in &incs {
        total = &total + e;
    }
    let c = rng.gen_range(0.3..0.9) / total.eigenvalues()[m - 1];
    let mut acc = SymMat::zeros(m);
    let mut qs = Vec::with_capacity(r);
    for e in &incs {
        acc.axpy(c, e);
        qs.push(acc.sandwich(&half));
    }
    qs.push(q.clone());
    Some(DiscreteOrderParam { x, qs })
}

/// Embeds a coarser scheme into `r` levels by midpoint splits.
fn embed(op: &DiscreteOrderParam, r: usize, exact: bool) -> DiscreteOrderParam {
    let (mut x, mut qs) = (op.x.clone(), op.qs.clone());
    let mut first = true;
    while qs.len() < r {
        (x, qs) = split_widest(&x, &qs, 1.0, exact || !first);
        first = false;
    }
    DiscreteOrderParam { x, qs }
}

/// Starting order parameters for level count r.
fn level_starts(
    q: &SymMat,
    r: usize,
    cfg: &OptimizerConfig,
    warm: Option<&DiscreteOrderParam>,
    feasible: impl Fn(&DiscreteOrderParam) -> bool,
) -> Vec<DiscreteOrderParam> {
    let mut out = Vec::new();
    let total = match warm {
        Some(w) => {
            out.push(embed(w, r, true));
            out.push(embed(w, r, false));
            cfg.restarts.max(2)
        }
        None => {
            out.push(even_levels(q, r));
            cfg.restarts
        }
    };
    out.truncate(total);
    while out.len() < total {
        let mut rng = restart_rng(cfg.seed, r, out.len());
        let pick = (0..20).filter_map(|_| random_levels(&mut rng, q, r)).find(|p| feasible(p));
        out.push(pick.unwrap_or_else(|| even_levels(q, r)));
    }
    out
}

/// Minimizes the discrete CS functional over order parameters with Q_r = Q,
/// for each level count in the schedule.
pub fn minimize_discrete_cs(model: &MixedModel, q: &SymMat, cfg: &OptimizerConfig) -> Result<OptReport> {
    cfg.validate()?;
    check_constraint(model, q)?;
    let mut warm: Option<DiscreteOrderParam> = None;
    let mut best: Option<(f64, DiscreteOrderParam, f64, bool)> = None;
    let mut per_restart = Vec::new();
    let mut levels = Vec::new();
    for r in cfg.schedule() {
        let obj = CsObjective::new(model, q, r);
        let starts: Vec<Vec<f64>> =
            level_starts(q, r, cfg, warm.as_ref(), |p| discrete_cs(model, p).is_ok())
                .iter()
                .map(|p| obj.encode(p))
                .collect();
        let (vals, win) = run_starts(&obj, &starts, cfg);
        per_restart.extend(vals);
        let Some((_, res)) = win else { continue };
        let op = obj.decode(&res.x);
        levels.push(LevelSummary { r, best_value: res.f, converged: res.converged });
        if best.as_ref().map_or(true, |b| res.f < b.0) {
            best = Some((res.f, op.clone(), res.grad_norm, res.converged));
        }
        warm = Some(op);
    }
    let (best_value, op, kkt, converged) =
        best.ok_or(Error::NoFeasibleStart { restarts: per_restart.len() })?;
    Ok(OptReport {
        best_value,
        argmin: ArgMin::Discrete { order_param: op },
        per_restart_values: per_restart,
        converged,
        kkt_residual: kkt,
        levels,
    })
}

/// Minimizes the discrete Parisi functional jointly over (x, Q_1..Q_{r−1}, Λ).
pub fn minimize_discrete_parisi(model: &MixedModel, q: &SymMat, cfg: &OptimizerConfig) -> Result<OptReport> {
    cfg.validate()?;
    check_constraint(model, q)?;
    let m = model.m;
    let eps = cfg.penalty_weight;
    // Λ₁ matched to D₁⁻¹ of the start, the stationary value for fixed levels
    let lambda1_for = |op: &DiscreteOrderParam| -> SymMat {
        let mut d1 = SymMat::zeros(m);
        for k in 1..op.r() {
            d1.axpy(op.x[k], &(&op.q(k + 1) - &op.q(k)));
        }
        d1.inverse().unwrap_or_else(|_| SymMat::identity(m))
    };
    let mut warm: Option<(DiscreteOrderParam, SymMat)> = None;
    let mut best: Option<(f64, DiscreteOrderParam, SymMat, f64, bool)> = None;
    let mut per_restart = Vec::new();
    let mut levels = Vec::new();
    for r in cfg.schedule() {
        let obj = ParisiObjective::new(model, q, r, eps);
        let feasible = |p: &DiscreteOrderParam| discrete_cs(model, p).is_ok();
        let ops = level_starts(q, r, cfg, warm.as_ref().map(|w| &w.0), feasible);
        let starts: Vec<Vec<f64>> = ops
            .iter()
            .enumerate()
            .map(|(i, op)| match (&warm, i) {
                (Some((_, l1)), 0 | 1) => obj.encode(op, l1),
                _ => obj.encode(op, &lambda1_for(op)),
            })
            .collect();
        let (vals, win) = run_starts(&obj, &starts, cfg);
        per_restart.extend(vals);
        let Some((_, res)) = win else { continue };
        let Some((op, lam)) = obj.decode(&res.x) else { continue };
        levels.push(LevelSummary { r, best_value: res.f, converged: res.converged });
        let lam1 = crate::functionals::lambda_levels(model, &lam, &op)?.swap_remove(0);
        if best.as_ref().map_or(true, |b| res.f < b.0) {
            best = Some((res.f, op.clone(), lam, res.grad_norm, res.converged));
        }
        warm = Some((op, lam1));
    }
    let (best_value, op, lambda, kkt, converged) =
        best.ok_or(Error::NoFeasibleStart { restarts: per_restart.len() })?;
    Ok(OptReport {
        best_value,
        argmin: ArgMin::Parisi { order_param: op, lambda },
        per_restart_values: per_restart,
        converged,
        kkt_residual: kkt,
        levels,
    })
}
