use crate::error::{Error, Result};
use crate::functionals::order::{MatrixPath, MeasureFn, ZeroTempTriple};
use crate::functionals::quadrature::{Grid, Table};
use crate::linalg::{ip, pd_floor, SymMat};
use crate::model::MixedModel;

fn check_dims(model: &MixedModel, path: &MatrixPath) -> Result<()> {
    if path.dim() != model.m {
        return Err(Error::DimensionMismatch { expected: model.m, found: path.dim() });
    }
    Ok(())
}

fn grid_for(x: &MeasureFn, path: &MatrixPath, extra: &[f64], n_quad: usize) -> Grid {
    let mut breaks = path.knots();
    breaks.extend(x.breakpoints());
    breaks.extend_from_slice(extra);
    Grid::new(&breaks, path.end_time(), n_quad)
}

fn inverse_at(a: &SymMat, t: f64) -> Result<SymMat> {
    let me = a.min_eig();
    if me <= pd_floor(a) {
        return Err(Error::SingularPath { t, min_eig: me });
    }
    a.inverse()
}

/// Path samples on a grid: Φ, one-sided Φ', and x.
pub(crate) struct Samples {
    pub phi: Table<SymMat>,
    pub dphi: Table<SymMat>,
    pub x: Table<f64>,
}

pub(crate) fn sample(grid: &Grid, x: &MeasureFn, path: &MatrixPath) -> Result<Samples> {
    Ok(Samples {
        phi: grid.eval(|t, _| Ok(path.eval(t)))?,
        dphi: grid.eval(|t, s| Ok(path.derivative_side(t, s)))?,
        x: grid.eval(|t, s| Ok(x.eval_side(t, s)))?,
    })
}

/// Φ̂(t) = ∫_t^m x Φ' on the grid.
pub(crate) fn phi_hat(grid: &Grid, s: &Samples) -> Result<Table<SymMat>> {
    let xd = grid.map(&s.dphi, |pi, i, _, _, d| Ok(d.scale(s.x[pi][i])))?;
    Ok(grid.cumulative_right(&xd))
}

fn resolve_t_hat(x: &MeasureFn, path: &MatrixPath, t_hat: Option<f64>) -> Result<f64> {
    let m = path.end_time();
    let t_x = x.t_x();
    let t_hat = t_hat.unwrap_or(t_x + 0.5 * (m - t_x));
    if !(t_hat > t_x && t_hat < m) {
        return Err(Error::InvalidThat { t_hat, t_x, m });
    }
    Ok(t_hat)
}

/// Continuous Crisanti–Sommers functional by segment-aligned Simpson
/// quadrature. `t_hat` defaults to t_x + (m − t_x)/2.
pub fn continuous_cs(
    model: &MixedModel,
    x: &MeasureFn,
    path: &MatrixPath,
    t_hat: Option<f64>,
    n_quad: usize,
) -> Result<f64> {
    check_dims(model, path)?;
    let t_hat = resolve_t_hat(x, path, t_hat)?;
    let grid = grid_for(x, path, &[t_hat], n_quad);
    let s = sample(&grid, x, path)?;
    let h = model.hh();
    let first = grid.map(&s.phi, |pi, i, _, _, phi| {
        let a = &model.xi_eval(phi, 1)? + &h;
        Ok(s.x[pi][i] * ip(&a, &s.dphi[pi][i]))
    })?;
    let hat = phi_hat(&grid, &s)?;
    let third = grid.map(&hat, |pi, i, t, _, ph| {
        if t > t_hat + 1e-13 {
            return Ok(0.0);
        }
        Ok(ip(&inverse_at(ph, t)?, &s.dphi[pi][i]))
    })?;
    let gap = path.end_value() - &path.eval(t_hat);
    let me = gap.min_eig();
    if me <= pd_floor(&gap) {
        return Err(Error::SingularPath { t: t_hat, min_eig: me });
    }
    let logdet = gap.logdet()?;
    Ok(0.5 * (grid.integrate(&first) + logdet + grid.integrate_upto(&third, t_hat)))
}

/// The integrated-by-parts form with Φ̌(t) = ∫₀^t x Φ'.
pub fn continuous_cs_rewritten(
    model: &MixedModel,
    x: &MeasureFn,
    path: &MatrixPath,
    n_quad: usize,
) -> Result<f64> {
    check_dims(model, path)?;
    let t_x = x.t_x();
    let grid = grid_for(x, path, &[t_x], n_quad);
    let s = sample(&grid, x, path)?;
    let xd = grid.map(&s.dphi, |pi, i, _, _, d| Ok(d.scale(s.x[pi][i])))?;
    let check = grid.cumulative_left(&xd);
    let total = check.last().unwrap().last().unwrap().clone();
    let q = path.end_value();
    let top = &model.xi_eval(q, 1)? + &model.hh();
    let second = grid.map(&check, |pi, i, _, _, c| {
        let w = model.xi_eval(&s.phi[pi][i], 2)?.hadamard(&s.dphi[pi][i])?;
        Ok(ip(c, &w))
    })?;
    let third = grid.map(&check, |pi, i, t, _, c| {
        if t > t_x + 1e-13 {
            return Ok(0.0);
        }
        Ok(ip(&inverse_at(&(&total - c), t)?, &s.dphi[pi][i]))
    })?;
    let gap = q - &path.eval(t_x);
    let me = gap.min_eig();
    if me <= pd_floor(&gap) {
        return Err(Error::SingularPath { t: t_x, min_eig: me });
    }
    Ok(0.5
        * (ip(&top, &total) - grid.integrate(&second)
            + grid.integrate_upto(&third, t_x)
            + gap.logdet()?))
}

/// D^x(q) = ∫_q^m x ξ''(Φ)⊙Φ' on the grid.
pub(crate) fn d_x(grid: &Grid, model: &MixedModel, s: &Samples) -> Result<Table<SymMat>> {
    let w = grid.map(&s.phi, |pi, i, _, _, phi| {
        Ok(model.xi_eval(phi, 2)?.hadamard(&s.dphi[pi][i])?.scale(s.x[pi][i]))
    })?;
    Ok(grid.cumulative_right(&w))
}

/// Continuous Parisi functional for a fixed multiplier Λ.
pub fn continuous_parisi(
    model: &MixedModel,
    x: &MeasureFn,
    lambda: &SymMat,
    path: &MatrixPath,
    n_quad: usize,
) -> Result<f64> {
    check_dims(model, path)?;
    let grid = grid_for(x, path, &[], n_quad);
    let s = sample(&grid, x, path)?;
    let dx = d_x(&grid, model, &s)?;
    let mut lam0_inv = None;
    let first = grid.map(&dx, |pi, i, _, _, d| {
        let gap = lambda - d;
        let me = gap.min_eig();
        if me <= pd_floor(&gap) {
            return Err(Error::SingularLambda { level: 0, min_eig: me });
        }
        let inv = gap.inverse()?;
        if pi == 0 && i == 0 {
            lam0_inv = Some(inv.clone());
        }
        let w = model.xi_eval(&s.phi[pi][i], 2)?.hadamard(&s.dphi[pi][i])?;
        Ok(ip(&w, &inv))
    })?;
    let third = grid.map(&s.phi, |pi, i, _, _, phi| {
        let w = model.xi_eval(phi, 2)?.hadamard(phi)?;
        Ok(s.x[pi][i] * ip(&w, &s.dphi[pi][i]))
    })?;
    let me = lambda.min_eig();
    if me <= pd_floor(lambda) {
        return Err(Error::SingularLambda { level: 0, min_eig: me });
    }
    let q = path.end_value();
    let field = ip(&model.hh(), lam0_inv.as_ref().unwrap());
    Ok(0.5
        * (grid.integrate(&first) + field - grid.integrate(&third) + ip(lambda, q)
            - model.m as f64
            - lambda.logdet()?))
}

/// A(t) = ∫₀^t α Φ' on the grid.
pub(crate) fn alpha_integral(grid: &Grid, triple: &ZeroTempTriple) -> Result<(Samples, Table<SymMat>)> {
    let s = sample(grid, &triple.alpha, &triple.path)?;
    let w = grid.map(&s.dphi, |pi, i, _, _, d| Ok(d.scale(s.x[pi][i])))?;
    let a = grid.cumulative_left(&w);
    Ok((s, a))
}

pub(crate) fn triple_grid(triple: &ZeroTempTriple, n_quad: usize) -> Grid {
    grid_for(&triple.alpha, &triple.path, &[], n_quad)
}

/// Zero-temperature functional 𝒞(L, α, Φ) by quadrature.
pub fn gse_functional(model: &MixedModel, triple: &ZeroTempTriple, n_quad: usize) -> Result<f64> {
    check_dims(model, &triple.path)?;
    let grid = triple_grid(triple, n_quad);
    let (s, a) = alpha_integral(&grid, triple)?;
    let l = &triple.l;
    let first = grid.map(&a, |pi, i, t, _, acc| {
        let gap = l - acc;
        let me = gap.min_eig();
        if me <= pd_floor(&gap) {
            return Err(Error::InfeasibleTriple { t, min_eig: me });
        }
        Ok(ip(&gap.inverse()?, &s.dphi[pi][i]))
    })?;
    let second = grid.map(&a, |pi, i, _, _, acc| {
        let w = model.xi_eval(&s.phi[pi][i], 2)?.hadamard(&s.dphi[pi][i])?;
        Ok(ip(&w, acc))
    })?;
    let q = triple.path.end_value();
    let top = &model.xi_eval(q, 1)? + &model.hh();
    Ok(0.5 * (ip(&top, l) + grid.integrate(&first) - grid.integrate(&second)))
}
