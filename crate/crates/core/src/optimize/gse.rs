use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::bfgs::Objective;
use super::cs::{check_constraint, even_levels, random_levels};
use super::param::{gram, lower_from, lower_to, psd_factor, split_widest, tri_len, LevelLayout};
use super::{restart_rng, run_starts, ArgMin, LevelSummary, OptReport, OptimizerConfig};
use crate::error::{Error, Result};
use crate::functionals::{
    gse_discrete, Interp, MatrixPath, MeasureFn, MeasureMode, PathSegment, SegmentKind, ZeroTempTriple,
};
use crate::linalg::{pd_floor, SymMat};
use crate::model::MixedModel;

/// Replica-symmetric zero-temperature minimizer L₀ and its value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RsGse {
    #[serde(rename = "L0")]
    pub l0: SymMat,
    /// trace((Q^{1/2}(ξ'(Q)+hhᵀ)Q^{1/2})^{1/2}), the functional at L₀.
    pub value: f64,
    /// Entry sum of the same matrix square root.
    pub sum_value: f64,
    /// ‖ξ'(Q)+hhᵀ − L₀⁻¹QL₀⁻¹‖_F.
    pub stationarity: f64,
}

impl RsGse {
    pub fn variants_disagree(&self) -> bool {
        (self.value - self.sum_value).abs() > 1e-10 * (1.0 + self.value.abs())
    }
}

pub fn rs_gse_closed_form(model: &MixedModel, q: &SymMat) -> Result<RsGse> {
    if q.dim() != model.m {
        return Err(Error::DimensionMismatch { expected: model.m, found: q.dim() });
    }
    let me = q.min_eig();
    if me <= pd_floor(q) {
        return Err(Error::NotPositiveDefinite { min_eig: me });
    }
    let top = &model.xi_eval(q, 1)? + &model.hh();
    let me = top.min_eig();
    if me <= pd_floor(&top) {
        return Err(Error::NotPositiveDefinite { min_eig: me });
    }
    let half = q.sqrt()?;
    let mm = top.sandwich(&half);
    let root = mm.sqrt()?;
    let l0 = mm.inv_pow(0.5)?.sandwich(&half);
    let l0_inv = l0.inverse()?;
    let stationarity = (&top - &q.sandwich(&l0_inv)).frob_norm();
    if mm.dim() > 1 && log::log_enabled!(log::Level::Debug) {
        log::debug!("RS GSE trace {} vs entry sum {}", root.trace(), root.sum_all());
    }
    Ok(RsGse { l0, value: root.trace(), sum_value: root.sum_all(), stationarity })
}

/// Builds the triple for step α (a_k on the segment from Q_k to Q_{k+1}) and
/// a sine-interpolated path through Q_1..Q_r parametrized by trace.
pub fn gse_triple(l: &SymMat, a: &[f64], qs: &[SymMat]) -> Result<ZeroTempTriple> {
    let m = l.dim();
    let mut segments = Vec::new();
    let mut knots = Vec::new();
    let mut prev = SymMat::zeros(m);
    let mut prev_t = 0.0;
    for (k, q) in qs.iter().enumerate() {
        let t1 = q.trace();
        if t1 - prev_t < 1e-12 {
            continue;
        }
        knots.push((prev_t, a[k]));
        segments.push(PathSegment { kind: SegmentKind::Sine, t0: prev_t, t1, start: prev, end: q.clone() });
        prev = q.clone();
        prev_t = t1;
    }
    if segments.is_empty() {
        return Err(Error::DegenerateKnots { level: 0, gap: 0.0 });
    }
    let alpha = MeasureFn::new(knots, Interp::Step, MeasureMode::ZeroTemperature, prev_t)?;
    Ok(ZeroTempTriple { l: l.clone(), alpha, path: MatrixPath::new(segments)? })
}

/// Zero-temperature functional over (Q_1..Q_{r−1}, α steps, L) with
/// a_k = Σ_{j≤k} s_j² and L = Σ a_k ΔQ_k + εI + ΓΓᵀ.
pub struct GseObjective<'a> {
    pub model: &'a MixedModel,
    pub q: SymMat,
    pub layout: LevelLayout,
    pub eps: f64,
}

pub struct GsePoint {
    pub l: SymMat,
    pub a: Vec<f64>,
    pub qs: Vec<SymMat>,
}

impl<'a> GseObjective<'a> {
    pub fn new(model: &'a MixedModel, q: &SymMat, r: usize, eps: f64) -> Self {
        GseObjective { model, q: q.clone(), layout: LevelLayout { m: model.m, r }, eps }
    }

    fn acc(a: &[f64], qs: &[SymMat]) -> SymMat {
        let mut acc = SymMat::zeros(qs[0].dim());
        let mut prev = SymMat::zeros(qs[0].dim());
        for (ak, q) in a.iter().zip(qs) {
            acc.axpy(*ak, &(q - &prev));
            prev = q.clone();
        }
        acc
    }

    pub fn decode(&self, p: &[f64]) -> GsePoint {
        let lay = self.layout;
        let nf = lay.n_f();
        let qs = lay.qs_from(&p[..nf], &self.q);
        let mut a = Vec::with_capacity(lay.r);
        let mut c = 0.0;
        for s in &p[nf..nf + lay.r] {
            c += s * s;
            a.push(c);
        }
        let mut l = Self::acc(&a, &qs);
        l = &l + &gram(&lower_from(&p[nf + lay.r..], lay.m));
        l = &l + &SymMat::identity(lay.m).scale(self.eps);
        GsePoint { l, a, qs }
    }

    pub fn encode(&self, pt: &GsePoint) -> Vec<f64> {
        let lay = self.layout;
        let mut out = lay.f_from(&pt.qs);
        let mut prev = 0.0;
        for ak in &pt.a {
            out.push((ak - prev).max(0.0).sqrt());
            prev = *ak;
        }
        let rest = &(&pt.l - &Self::acc(&pt.a, &pt.qs)) - &SymMat::identity(lay.m).scale(self.eps);
        out.extend(lower_to(&psd_factor(&rest)));
        out
    }
}

impl Objective for GseObjective<'_> {
    fn dim(&self) -> usize {
        self.layout.n_f() + self.layout.r + tri_len(self.layout.m)
    }

    fn value(&self, p: &[f64]) -> Option<f64> {
        let pt = self.decode(p);
        let r = pt.qs.len();
        let last = &pt.qs[r - 1] - if r > 1 { &pt.qs[r - 2] } else { &pt.qs[r - 1] };
        if r > 1 && last.min_eig() < -1e-12 {
            return None;
        }
        gse_discrete(self.model, &pt.l, &pt.a, &pt.qs).ok()
    }
}

fn base_l(model: &MixedModel, q: &SymMat) -> SymMat {
    rs_gse_closed_form(model, q).map(|rs| rs.l0).unwrap_or_else(|_| SymMat::identity(model.m))
}

/// Minimizes the zero-temperature functional over step α and discrete paths
/// ending at Q, for each segment count in the schedule.
pub fn minimize_gse(model: &MixedModel, q: &SymMat, cfg: &OptimizerConfig) -> Result<OptReport> {
    cfg.validate()?;
    check_constraint(model, q)?;
    let eps = cfg.penalty_weight;
    let l0 = base_l(model, q);
    let mut warm: Option<GsePoint> = None;
    let mut best: Option<(f64, GsePoint, f64, bool)> = None;
    let mut per_restart = Vec::new();
    let mut levels = Vec::new();
    for r in cfg.schedule() {
        let obj = GseObjective::new(model, q, r, eps);
        let mut starts = Vec::new();
        let total = if warm.is_some() { cfg.restarts.max(2) } else { cfg.restarts };
        if let Some(w) = &warm {
            let top = *w.a.last().unwrap();
            for exact in [true, false] {
                let (mut a, mut qs) = (w.a.clone(), w.qs.clone());
                let mut first = true;
                while qs.len() < r {
                    (a, qs) = split_widest(&a, &qs, top, exact || !first);
                    first = false;
                }
                let l = &(&w.l - &GseObjective::acc(&w.a, &w.qs)) + &GseObjective::acc(&a, &qs);
                starts.push(obj.encode(&GsePoint { l, a, qs }));
            }
        } else {
            let op = even_levels(q, r);
            let a: Vec<f64> = (0..r).map(|k| 0.01 * (k + 1) as f64).collect();
            let l = &l0 + &GseObjective::acc(&a, &op.qs);
            starts.push(obj.encode(&GsePoint { l, a, qs: op.qs }));
        }
        starts.truncate(total);
        while starts.len() < total {
            let mut rng = restart_rng(cfg.seed, r, starts.len());
            let mut pick = None;
            for _ in 0..20 {
                let Some(op) = random_levels(&mut rng, q, r) else { break };
                let mut a = Vec::with_capacity(r);
                let mut c = 0.0;
                for _ in 0..r {
                    let s: f64 = 0.7 * rng.sample::<f64, _>(StandardNormal);
                    c += s * s;
                    a.push(c);
                }
                let scale = rng.gen_range(0.5..2.0);
                let l = &l0.scale(scale) + &GseObjective::acc(&a, &op.qs);
                let p = obj.encode(&GsePoint { l, a, qs: op.qs });
                if obj.value(&p).is_some() {
                    pick = Some(p);
                    break;
                }
            }
            let p = pick.unwrap_or_else(|| {
                let op = even_levels(q, r);
                obj.encode(&GsePoint { l: l0.clone(), a: vec![0.0; r], qs: op.qs })
            });
            starts.push(p);
        }
        let (vals, win) = run_starts(&obj, &starts, cfg);
        per_restart.extend(vals);
        let Some((_, res)) = win else { continue };
        let pt = obj.decode(&res.x);
        levels.push(LevelSummary { r, best_value: res.f, converged: res.converged });
        if best.as_ref().map_or(true, |b| res.f < b.0) {
            best = Some((res.f, GsePoint { l: pt.l.clone(), a: pt.a.clone(), qs: pt.qs.clone() }, res.grad_norm, res.converged));
        }
        warm = Some(pt);
    }
    let (best_value, pt, kkt, converged) =
        best.ok_or(Error::NoFeasibleStart { restarts: per_restart.len() })?;
    let triple = gse_triple(&pt.l, &pt.a, &pt.qs)?;
    Ok(OptReport {
        best_value,
        argmin: ArgMin::ZeroTemp { triple, a: pt.a, qs: pt.qs },
        per_restart_values: per_restart,
        converged,
        kkt_residual: kkt,
        levels,
    })
}

/// ½[⟨ξ'(Q)+hhᵀ, L⟩ + ⟨L⁻¹, Q⟩], the functional at α ≡ 0.
#[cfg(test)]
fn rs_value_at(model: &MixedModel, q: &SymMat, l: &SymMat) -> Result<f64> {
    let top = &model.xi_eval(q, 1)? + &model.hh();
    Ok(0.5 * (crate::linalg::ip(&top, l) + crate::linalg::ip(&l.inverse()?, q)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_two_spin_closed_form() {
        let model = MixedModel::pure(1, 2, 1.0, vec![0.0]).unwrap();
        let rs = rs_gse_closed_form(&model, &SymMat::identity(1)).unwrap();
        assert!((rs.l0.get(0, 0) - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((rs.value - 2f64.sqrt()).abs() < 1e-14);
        assert!(rs.stationarity < 1e-12);
        let v = rs_value_at(&model, &SymMat::identity(1), &rs.l0).unwrap();
        assert!((v - rs.value).abs() < 1e-14);
    }

    #[test]
    fn encode_decode_roundtrip() {
        let model = MixedModel::pure(2, 2, 0.8, vec![0.0, 0.0]).unwrap();
        let q = SymMat::from_rows(&[vec![1.0, 0.2], vec![0.2, 1.0]]).unwrap();
        let obj = GseObjective::new(&model, &q, 3, 1e-10);
        let op = even_levels(&q, 3);
        let a = vec![0.1, 0.3, 0.35];
        let l = &SymMat::identity(2) + &GseObjective::acc(&a, &op.qs);
        let pt = obj.decode(&obj.encode(&GsePoint { l: l.clone(), a: a.clone(), qs: op.qs.clone() }));
        assert!((&pt.l - &l).max_abs() < 1e-12);
        for (x, y) in pt.a.iter().zip(&a) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
