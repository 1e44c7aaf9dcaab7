//! Optimality residuals and characterization checks for order parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::continuous::{alpha_integral, phi_hat, sample, triple_grid};
use crate::functionals::{
    continuous_cs, gse_functional, Grid, Interp, MatrixPath, MeasureFn, MeasureMode, Side, ZeroTempTriple,
    DEFAULT_N_QUAD,
};
use crate::linalg::{ip, pd_floor, SymMat};
use crate::model::{cosh_model, MixedModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualKind {
    /// ‖F(t)‖_F for the matrix equation F(t) = 0.
    Matrix,
    /// |⟨F(t), Φ'(t)⟩|.
    Projected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport {
    pub kind: ResidualKind,
    /// Max residual over in-support points.
    pub residual_sup: f64,
    pub support_grid: Vec<(f64, bool)>,
    pub per_point_residuals: Vec<(f64, f64)>,
    pub verdict: Verdict,
}

impl OptimalityReport {
    /// CSV rows (t, residual, in_support).
    pub fn profile(&self) -> Vec<(f64, f64, bool)> {
        self.per_point_residuals
            .iter()
            .zip(&self.support_grid)
            .map(|(&(t, r), &(_, s))| (t, r, s))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct CriticalOptions {
    pub support_tol: f64,
    pub kind: ResidualKind,
    pub n_quad: usize,
    pub tol: f64,
}

impl Default for CriticalOptions {
    fn default() -> Self {
        CriticalOptions { support_tol: 1e-8, kind: ResidualKind::Matrix, n_quad: DEFAULT_N_QUAD, tol: 1e-5 }
    }
}

fn checked_inverse(a: &SymMat, t: f64) -> Result<SymMat> {
    let me = a.min_eig();
    if me <= pd_floor(a) {
        return Err(Error::SingularPath { t, min_eig: me });
    }
    a.inverse()
}

fn support_flags(x: &MeasureFn, ts: &[f64], tol: f64) -> Vec<bool> {
    (0..ts.len())
        .map(|i| {
            let left = if i > 0 { ts[i] - ts[i - 1] } else { f64::INFINITY };
            let right = if i + 1 < ts.len() { ts[i + 1] - ts[i] } else { f64::INFINITY };
            let d = left.min(right);
            let d = if d.is_finite() { d } else { 0.0 };
            x.eval_left(ts[i] + d) - x.eval(ts[i] - d) > tol
        })
        .collect()
}

/// Residual of ξ'(Φ(t)) + hhᵀ = ∫₀^t Φ̂⁻¹Φ'Φ̂⁻¹ on the support of dx.
pub fn critical_residual(model: &MixedModel, x: &MeasureFn, path: &MatrixPath, support_tol: f64) -> Result<OptimalityReport> {
    critical_residual_with(model, x, path, &CriticalOptions { support_tol, ..Default::default() })
}

pub fn critical_residual_with(
    model: &MixedModel,
    x: &MeasureFn,
    path: &MatrixPath,
    opts: &CriticalOptions,
) -> Result<OptimalityReport> {
    let end = path.end_time();
    let t_x = x.t_x();
    if t_x >= end - 1e-12 {
        return Err(Error::SingularPath { t: end, min_eig: 0.0 });
    }
    let mut breaks = path.knots();
    breaks.extend(x.breakpoints());
    breaks.push(t_x);
    let grid = Grid::new(&breaks, end, opts.n_quad);
    let s = sample(&grid, x, path)?;
    let hat = phi_hat(&grid, &s)?;
    let zero = SymMat::zeros(model.m);
    let w = grid.map(&hat, |pi, i, t, _, ph| {
        if t > t_x + 1e-13 {
            return Ok(zero.clone());
        }
        Ok(s.dphi[pi][i].sandwich(&checked_inverse(ph, t)?))
    })?;
    let cum = grid.cumulative_left(&w);
    let h = model.hh();
    let res = grid.map(&cum, |pi, i, t, _, c| {
        if t > t_x + 1e-13 {
            return Ok(f64::NAN);
        }
        let f = &(&model.xi_eval(&s.phi[pi][i], 1)? + &h) - c;
        Ok(match opts.kind {
            ResidualKind::Matrix => f.frob_norm(),
            ResidualKind::Projected => ip(&f, &s.dphi[pi][i]).abs(),
        })
    })?;
    let flat: Vec<(f64, f64)> = grid.flatten(&res).into_iter().filter(|p| !p.1.is_nan()).collect();
    let ts: Vec<f64> = flat.iter().map(|p| p.0).collect();
    let flags = support_flags(x, &ts, opts.support_tol);
    let residual_sup = flat.iter().zip(&flags).filter(|(_, &f)| f).map(|(p, _)| p.1).fold(0.0, f64::max);
    Ok(OptimalityReport {
        kind: opts.kind,
        residual_sup,
        support_grid: ts.iter().copied().zip(flags).collect(),
        per_point_residuals: flat,
        verdict: Verdict { pass: residual_sup <= opts.tol, tol: opts.tol },
    })
}

/// ⟨ξ'''(Φ), Φ'^{∘3}⟩ / (2 trace((Φ'^{1/2}(ξ''(Φ)⊙Φ')Φ'^{1/2})^{3/2})) at u.
pub fn parisi_density(model: &MixedModel, path: &MatrixPath, u: f64) -> Result<f64> {
    let phi = path.eval(u);
    let d = path.derivative(u);
    let num = ip(&model.xi_eval(&phi, 3)?, &d.hadamard_pow(3));
    let half = d.sqrt()?;
    let mm = model.xi_eval(&phi, 2)?.hadamard(&d)?.sandwich(&half);
    let den = 2.0 * mm.pow(1.5)?.trace();
    if !(den > 1e-14) {
        return Err(Error::DegenerateDerivative { u, denominator: den });
    }
    Ok(num / den)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RsCondition {
    /// Loewner reading: min_eig(ξ'(Q)+hhᵀ − ξ''(Q)⊙Q) ≥ −1e-10.
    pub flag: bool,
    pub margin: f64,
    /// Entrywise reading of the same inequality.
    pub entrywise_flag: bool,
    pub entrywise_margin: f64,
}

pub fn rs_condition(model: &MixedModel, q: &SymMat) -> Result<RsCondition> {
    let diff = &(&model.xi_eval(q, 1)? + &model.hh()) - &model.xi_eval(q, 2)?.hadamard(q)?;
    let margin = diff.min_eig();
    let n = diff.dim();
    let mut entry = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            entry = entry.min(diff.get(i, j));
        }
    }
    Ok(RsCondition { flag: margin >= -1e-10, margin, entrywise_flag: entry >= -1e-10, entrywise_margin: entry })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroTempReport {
    pub value: f64,
    /// ‖ξ'(Q)+hhᵀ − ∫ZΦ'Z‖_F.
    pub stationarity: f64,
    pub g_min: f64,
    pub g_tol: f64,
    /// Total increase of α at points where |g| > g_tol.
    pub off_support_mass: f64,
    pub support_ok: bool,
    pub profile: Vec<(f64, f64)>,
}

/// Zero-temperature optimality: stationarity in L, g ≥ 0 and the α-measure
/// carried by {g = 0}. Ḡ includes hhᵀ so that g(m) = 0 at stationarity.
pub fn zero_temp_g(model: &MixedModel, triple: &ZeroTempTriple, n_quad: usize) -> Result<ZeroTempReport> {
    let value = gse_functional(model, triple, n_quad)?;
    let grid = triple_grid(triple, n_quad);
    let (s, a) = alpha_integral(&grid, triple)?;
    let w = grid.map(&a, |pi, i, t, _, acc| {
        let gap = &triple.l - acc;
        let me = gap.min_eig();
        if me <= pd_floor(&gap) {
            return Err(Error::InfeasibleTriple { t, min_eig: me });
        }
        Ok(s.dphi[pi][i].sandwich(&gap.inverse()?))
    })?;
    let j = grid.cumulative_left(&w);
    let total = j.last().unwrap().last().unwrap().clone();
    let q = triple.path.end_value();
    let top = &model.xi_eval(q, 1)? + &model.hh();
    let stationarity = (&top - &total).frob_norm();
    let h = model.hh();
    let gbar = grid.map(&j, |pi, i, _, _, jt| {
        let big = &(&model.xi_eval(&s.phi[pi][i], 1)? + &h) - jt;
        Ok(ip(&s.dphi[pi][i], &big))
    })?;
    let g = grid.cumulative_right(&gbar);
    let profile = grid.flatten(&g);
    let g_tol = 1e-6 * (1.0 + value.abs());
    let g_min = profile.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let mut off = 0.0;
    let mut prev = 0.0;
    for &(t, gv) in &profile {
        let now = triple.alpha.eval(t);
        if t < triple.path.end_time() && gv.abs() > g_tol {
            off += (now - prev).max(0.0);
        }
        prev = now;
    }
    Ok(ZeroTempReport { value, stationarity, g_min, g_tol, off_support_mass: off, support_ok: off <= 1e-6, profile })
}

/// ∫_u^m x Φ' by Simpson on [u, m].
fn phi_hat_at(x: &MeasureFn, path: &MatrixPath, u: f64, n_quad: usize) -> Result<SymMat> {
    let end = path.end_time();
    let mut breaks: Vec<f64> = path.knots().into_iter().chain(x.breakpoints()).map(|t| t - u).collect();
    breaks.retain(|&t| t > 0.0);
    let grid = Grid::new(&breaks, end - u, n_quad);
    let tab = grid.eval(|t, side| Ok(path.derivative_side(t + u, side).scale(x.eval_side(t + u, side))))?;
    Ok(grid.integrate(&tab))
}

/// (2⟨β₂⊗β₂, Φ'(0)^{∘2}⟩, ⟨Φ̂(0)⁻¹Φ'(0), Φ̂(0)⁻¹Φ'(0)⟩).
pub fn sk_isolation_check(model: &MixedModel, x: &MeasureFn, path: &MatrixPath) -> Result<(f64, f64)> {
    let d0 = path.derivative_side(0.0, Side::Right);
    let lhs = 2.0 * ip(&model.two_spin_outer(), &d0.hadamard_pow(2));
    let hat = phi_hat_at(x, path, 0.0, DEFAULT_N_QUAD)?;
    let prod = checked_inverse(&hat, 0.0)?.as_matrix() * d0.as_matrix();
    Ok((lhs, prod.norm_squared()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityPoint {
    pub u: f64,
    pub y: f64,
    pub y2: f64,
    pub z: Option<f64>,
    pub z2: Option<f64>,
    pub z_concave: Option<bool>,
}

fn y_at(model: &MixedModel, path: &MatrixPath, u: f64) -> Result<f64> {
    let d = path.derivative(u);
    let v = ip(&model.xi_eval(&path.eval(u), 2)?, &d.hadamard_pow(2));
    if !(v > 1e-300) {
        return Err(Error::DegenerateDerivative { u, denominator: v });
    }
    Ok(v.powf(-0.5))
}

fn z_at(x: &MeasureFn, path: &MatrixPath, u: f64) -> Result<f64> {
    let hat = phi_hat_at(x, path, u, DEFAULT_N_QUAD)?;
    let d = path.derivative(u);
    let v = ip(&d.sandwich(&checked_inverse(&hat, u)?), &d);
    if !(v > 1e-300) {
        return Err(Error::DegenerateDerivative { u, denominator: v });
    }
    Ok(v.powf(-0.5))
}

/// Second difference of f at u with the stencil pushed inside [0, end].
fn second_diff(f: impl Fn(f64) -> Result<f64>, u: f64, h: f64, end: f64) -> Result<f64> {
    let c = u.clamp(h, end - h);
    Ok((f(c - h)? - 2.0 * f(c)? + f(c + h)?) / (h * h))
}

/// Samples y(u) = ⟨ξ''(Φ), Φ'^{∘2}⟩^{−1/2} and, when x is given,
/// z(u) = ⟨Φ̂⁻¹Φ'Φ̂⁻¹, Φ'⟩^{−1/2} with their second differences on [a, b].
pub fn convexity_profile(
    model: &MixedModel,
    path: &MatrixPath,
    x: Option<&MeasureFn>,
    interval: (f64, f64),
    n: usize,
) -> Result<Vec<ConvexityPoint>> {
    let (a, b) = interval;
    let end = path.end_time();
    if !(a >= 0.0 && b <= end && a < b) || n < 2 {
        return Err(Error::InvalidInput(format!("bad interval [{a}, {b}] with {n} points")));
    }
    let h = 1e-3 * (b - a);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let u = a + (b - a) * i as f64 / (n - 1) as f64;
        let y = y_at(model, path, u)?;
        let y2 = second_diff(|v| y_at(model, path, v), u, h, end)?;
        let (z, z2) = match x {
            Some(x) => {
                let zh = 1e-2 * (b - a);
                (Some(z_at(x, path, u)?), Some(second_diff(|v| z_at(x, path, v), u, zh, x.t_x().min(end))?))
            }
            None => (None, None),
        };
        let z_concave = z2.map(|v| v <= 1e-6 * (1.0 + z.unwrap().abs()));
        out.push(ConvexityPoint { u, y, y2, z, z2, z_concave });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpCheck {
    /// ⟨ξ''(Q), Φ'(u₀)^{∘2}⟩
    pub lhs: f64,
    /// ⟨Q⁻¹Φ'(u₀), Q⁻¹Φ'(u₀)⟩
    pub rhs: f64,
    pub hypothesis_holds: bool,
}

pub fn jump_hypothesis(model: &MixedModel, path: &MatrixPath, u0: f64) -> Result<JumpCheck> {
    let q = path.end_value();
    let d = path.derivative(u0);
    let lhs = ip(&model.xi_eval(q, 2)?, &d.hadamard_pow(2));
    let qi = q.inverse()?;
    let rhs = (qi.as_matrix() * d.as_matrix()).norm_squared();
    Ok(JumpCheck { lhs, rhs, hypothesis_holds: lhs < rhs })
}

/// The two-copy cosh example with Q = [[1, 0.1], [0.1, 1]].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RsbExample {
    pub beta: f64,
    pub model: MixedModel,
    pub x: MeasureFn,
    pub path: MatrixPath,
    pub q0: f64,
    pub phi0: f64,
    pub x_monotone: bool,
    /// x(q₀−)
    pub x_left_q0: f64,
    /// Projected critical residual on the support.
    pub report: OptimalityReport,
    /// sup over [0, q₀] of ‖Φ̂(q) − √2 φ(q) Φ'(q)‖_F.
    pub identity_residual: f64,
    /// Continuous CS functional at (x, Φ).
    pub value: f64,
    /// max over interior sample points of |parisi_density(u) − x(u)|.
    pub density_gap: f64,
}

pub const RSB_TRUNCATION: u32 = 24;
const RSB_KNOTS: usize = 4000;

pub fn rsb_constraint() -> SymMat {
    SymMat::from_rows(&[vec![1.0, 0.1], vec![0.1, 1.0]]).expect("symmetric")
}

/// φ(q) and φ'(q) for Φ(q) = (q/2)Q.
fn phi_pair(model: &MixedModel, q: &SymMat, u: f64) -> Result<(f64, f64)> {
    let phi = q.scale(0.5 * u);
    let d = q.scale(0.5);
    let a = ip(&model.xi_eval(&phi, 2)?, &d.hadamard_pow(2));
    let b = ip(&model.xi_eval(&phi, 3)?, &d.hadamard_pow(3));
    Ok((a.powf(-0.5), -0.5 * a.powf(-1.5) * b))
}

pub fn rsb_example_build(beta: f64) -> Result<RsbExample> {
    let q = rsb_constraint();
    let threshold = (2.0 / q.hadamard_pow(2).sum_all()).sqrt();
    if !(beta > threshold) {
        return Err(Error::BetaTooSmall { beta, threshold });
    }
    let model = cosh_model(beta, 2, 1.0, RSB_TRUNCATION)?;
    let end = 2.0;
    let target = |u: f64| (end - u) / 2f64.sqrt();
    let (lo, hi) = (1e-9, end - 1e-9);
    let f = |u: f64| -> Result<f64> { Ok(phi_pair(&model, &q, u)?.0 - target(u)) };
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a)?, f(b)?);
    if !(fa < 0.0 && fb > 0.0) {
        return Err(Error::RootNotBracketed { f_lo: fa, f_hi: fb });
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if f(mid)? < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
        if b - a <= 1e-12 {
            break;
        }
    }
    let q0 = 0.5 * (a + b);
    let phi0 = phi_pair(&model, &q, 0.0)?.0;
    let mut knots = Vec::with_capacity(RSB_KNOTS + 3);
    for i in 0..=RSB_KNOTS {
        let u = q0 * i as f64 / RSB_KNOTS as f64;
        knots.push((u, -(2f64.sqrt()) * phi_pair(&model, &q, u)?.1));
    }
    let x_left_q0 = knots.last().unwrap().1;
    let x_monotone = knots.windows(2).all(|w| w[1].1 >= w[0].1) && x_left_q0 <= 1.0;
    // clamp tiny negatives at 0 from rounding
    knots[0].1 = knots[0].1.max(0.0);
    knots.push((q0, 1.0_f64.max(x_left_q0)));
    knots.push((end, 1.0_f64.max(x_left_q0)));
    let x = MeasureFn::new(knots, Interp::Linear, MeasureMode::FiniteTemperature, end)?;
    let path = MatrixPath::linear(&q, end);
    let n_quad = 8001;
    let opts = CriticalOptions { kind: ResidualKind::Projected, n_quad, ..Default::default() };
    let report = critical_residual_with(&model, &x, &path, &opts)?;

    let mut breaks = x.breakpoints();
    breaks.push(q0);
    let grid = Grid::new(&breaks, end, n_quad);
    let s = sample(&grid, &x, &path)?;
    let hat = phi_hat(&grid, &s)?;
    let mut identity_residual: f64 = 0.0;
    for (t, ph) in grid.flatten(&hat) {
        if t <= q0 {
            let want = q.scale(0.5 * 2f64.sqrt() * phi_pair(&model, &q, t)?.0);
            identity_residual = identity_residual.max((&ph - &want).frob_norm());
        }
    }
    let value = continuous_cs(&model, &x, &path, None, n_quad)?;
    let mut density_gap: f64 = 0.0;
    for i in 1..20 {
        let u = q0 * i as f64 / 20.0;
        density_gap = density_gap.max((parisi_density(&model, &path, u)? - x.eval(u)).abs());
    }
    Ok(RsbExample {
        beta,
        model,
        x,
        path,
        q0,
        phi0,
        x_monotone,
        x_left_q0,
        report,
        identity_residual,
        value,
        density_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_scalar_four_spin() {
        let model = MixedModel::pure(1, 4, 1.0, vec![0.0]).unwrap();
        let path = MatrixPath::linear(&SymMat::identity(1), 1.0);
        let v = parisi_density(&model, &path, 0.5).unwrap();
        assert!((v - 12.0 / (2.0 * 3f64.powf(1.5))).abs() < 1e-12);
        let sk = MixedModel::pure(1, 2, 1.0, vec![0.0]).unwrap();
        assert_eq!(parisi_density(&sk, &path, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn rs_condition_scalar() {
        let q = SymMat::identity(1);
        let sk = rs_condition(&MixedModel::pure(1, 2, 1.0, vec![0.0]).unwrap(), &q).unwrap();
        assert!(sk.flag && sk.margin.abs() < 1e-14);
        let p4 = rs_condition(&MixedModel::pure(1, 4, 1.0, vec![0.0]).unwrap(), &q).unwrap();
        assert!(!p4.flag && (p4.margin + 8.0).abs() < 1e-12);
        let p4h = rs_condition(&MixedModel::pure(1, 4, 1.0, vec![8f64.sqrt()]).unwrap(), &q).unwrap();
        assert!(p4h.flag);
    }
}
