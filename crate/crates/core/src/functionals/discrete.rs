use crate::error::{Error, Result};
use crate::functionals::order::DiscreteOrderParam;
use crate::linalg::{ip, pd_floor, SymMat};
use crate::model::MixedModel;

/// (1/s)·log|I + s·B^{-1/2} Δ B^{-1/2}|, with the s → 0 limit ⟨B⁻¹, Δ⟩.
/// Stable for small |s|.
pub fn log1p_ratio(base: &SymMat, delta: &SymMat, s: f64) -> Result<f64> {
    let half = base.inv_pow(0.5)?;
    let nu = delta.sandwich(&half).eigenvalues();
    if s == 0.0 {
        return Ok(nu.iter().sum());
    }
    let mut acc = 0.0;
    for v in nu {
        let arg = s * v;
        if arg <= -1.0 {
            return Err(Error::NotPositiveDefinite { min_eig: 1.0 + arg });
        }
        acc += arg.ln_1p();
    }
    Ok(acc / s)
}

fn check_pd(a: &SymMat) -> std::result::Result<(), f64> {
    let me = a.min_eig();
    if me > pd_floor(a) {
        Ok(())
    } else {
        Err(me)
    }
}

struct CsParts {
    qs: Vec<SymMat>,
    dq: Vec<SymMat>,
    dinv: Vec<SymMat>,
    dlog: Vec<f64>,
    value: f64,
}

fn cs_parts(model: &MixedModel, p: &DiscreteOrderParam) -> Result<CsParts> {
    p.validate()?;
    let r = p.r();
    if r < 2 {
        return Err(Error::InvalidInput("discrete CS needs r >= 2".into()));
    }
    if p.dim() != model.m {
        return Err(Error::DimensionMismatch { expected: model.m, found: p.dim() });
    }
    let x = &p.x;
    if let Some(k) = (1..r).find(|&k| !(x[k] > 0.0)) {
        return Err(Error::MonotonicityViolation(format!("x_{k} must be positive")));
    }
    let m = model.m;
    let qs: Vec<SymMat> = (0..=r).map(|k| p.q(k)).collect();
    let dq: Vec<SymMat> = (0..r).map(|k| &qs[k + 1] - &qs[k]).collect();
    // index 0 unused so that d[p] is D_p
    let mut d = vec![SymMat::zeros(m); r];
    d[r - 1] = dq[r - 1].scale(x[r - 1]);
    for k in (1..r - 1).rev() {
        let mut v = d[k + 1].clone();
        v.axpy(x[k], &dq[k]);
        d[k] = v;
    }
    let mut dinv = vec![SymMat::zeros(m); r];
    let mut dlog = vec![0.0; r];
    for k in 1..r {
        check_pd(&d[k]).map_err(|me| Error::SingularD { level: k, min_eig: me })?;
        let (inv, ld) = d[k].inverse_logdet()?;
        dinv[k] = inv;
        dlog[k] = ld;
    }
    let h = model.hh();
    let last = (dlog[r - 1] - m as f64 * x[r - 1].ln()) / x[r - 1];
    let mut log_sum = 0.0;
    for k in 1..r.saturating_sub(1) {
        log_sum += log1p_ratio(&d[k + 1], &dq[k], x[k])?;
    }
    let mut xi_sum = 0.0;
    let mut prev = model.xi_eval(&qs[1], 0)?.sum_all();
    for k in 1..r {
        let next = model.xi_eval(&qs[k + 1], 0)?.sum_all();
        xi_sum += x[k] * (next - prev);
        prev = next;
    }
    let value = 0.5 * (ip(&h, &d[1]) + last + log_sum + ip(&qs[1], &dinv[1]) + xi_sum);
    Ok(CsParts { qs, dq, dinv, dlog, value })
}

/// Discrete Crisanti–Sommers functional.
pub fn discrete_cs(model: &MixedModel, p: &DiscreteOrderParam) -> Result<f64> {
    Ok(cs_parts(model, p)?.value)
}

/// Partial derivatives of [`discrete_cs`] with respect to x_1..x_{r−1} and
/// the free levels Q_1..Q_{r−1} (Q_r fixed).
#[derive(Clone, Debug)]
pub struct CsGradient {
    pub value: f64,
    pub dx: Vec<f64>,
    pub dq: Vec<SymMat>,
}

pub fn discrete_cs_grad(model: &MixedModel, p: &DiscreteOrderParam) -> Result<CsGradient> {
    let parts = cs_parts(model, p)?;
    let r = p.r();
    let x = &p.x;
    let m = model.m;
    let h = model.hh();
    let CsParts { qs, dq, dinv, dlog, value } = parts;
    // ∂C/∂D_p (without the overall 1/2)
    let mut gd = vec![SymMat::zeros(m); r];
    for k in 1..r {
        let mut c = 0.0;
        if k + 2 <= r {
            c += 1.0 / x[k];
        }
        if k >= 2 {
            c -= 1.0 / x[k - 1];
        }
        let mut g = dinv[k].scale(c);
        if k == 1 {
            g = &g + &h;
            g = &g - &qs[1].sandwich(&dinv[1]);
        }
        gd[k] = g;
    }
    let mut grad_q = Vec::with_capacity(r - 1);
    let mut prefix = SymMat::zeros(m);
    for j in 1..r {
        let mut g = gd[j].scale(-x[j]);
        g.axpy(x[j - 1] - x[j], &prefix);
        g.axpy(x[j - 1] - x[j], &model.xi_eval(&qs[j], 1)?);
        if j == 1 {
            g = &g + &dinv[1];
        }
        if j == r - 1 {
            g = &g - &dinv[r - 1];
        }
        grad_q.push(g.scale(0.5));
        prefix = &prefix + &gd[j];
    }
    let mut grad_x = Vec::with_capacity(r - 1);
    let mut cum = SymMat::zeros(m);
    for k in 1..r {
        cum = &cum + &gd[k];
        let mut g = ip(&cum, &dq[k]);
        g += model.xi_eval(&qs[k + 1], 0)?.sum_all() - model.xi_eval(&qs[k], 0)?.sum_all();
        if k + 2 <= r {
            g -= (dlog[k] - dlog[k + 1]) / (x[k] * x[k]);
        } else {
            let ld = dlog[r - 1] - m as f64 * x[r - 1].ln();
            g -= ld / (x[k] * x[k]);
        }
        grad_x.push(0.5 * g);
    }
    Ok(CsGradient { value, dx: grad_x, dq: grad_q })
}

/// Field-term convention for [`discrete_parisi_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldTerm {
    /// ⟨hhᵀ, Λ₁⁻¹⟩, consistent with the continuous form.
    Lambda1,
    /// ⟨hhᵀ, Λ⁻¹⟩ as literally displayed.
    Lambda,
}

/// Λ_1..Λ_r with Λ_r = Λ and Λ_p = Λ − Σ_{k≥p} x_k(ξ'(Q_{k+1}) − ξ'(Q_k)).
pub fn lambda_levels(
    model: &MixedModel,
    lambda: &SymMat,
    p: &DiscreteOrderParam,
) -> Result<Vec<SymMat>> {
    let r = p.r();
    let mut out = vec![lambda.clone(); r];
    let mut prev_xi = model.xi_eval(&p.q(r), 1)?;
    for k in (1..r).rev() {
        let xi = model.xi_eval(&p.q(k), 1)?;
        let mut v = out[k].clone();
        v.axpy(-p.x[k], &(&prev_xi - &xi));
        out[k - 1] = v;
        prev_xi = xi;
    }
    Ok(out)
}

/// Discrete Parisi functional with the Λ₁⁻¹ field term.
pub fn discrete_parisi(model: &MixedModel, lambda: &SymMat, p: &DiscreteOrderParam) -> Result<f64> {
    discrete_parisi_with(model, lambda, p, FieldTerm::Lambda1)
}

pub fn discrete_parisi_with(
    model: &MixedModel,
    lambda: &SymMat,
    p: &DiscreteOrderParam,
    field: FieldTerm,
) -> Result<f64> {
    p.validate()?;
    if p.dim() != model.m || lambda.dim() != model.m {
        return Err(Error::DimensionMismatch { expected: model.m, found: lambda.dim() });
    }
    let r = p.r();
    let lam = lambda_levels(model, lambda, p)?;
    for (k, l) in lam.iter().enumerate() {
        check_pd(l).map_err(|me| Error::SingularLambda { level: k + 1, min_eig: me })?;
    }
    let q = p.target();
    let (lam1_inv, _) = lam[0].inverse_logdet()?;
    let (lam_inv, lam_logdet) = lambda.inverse_logdet()?;
    let h = model.hh();
    let field_val = match field {
        FieldTerm::Lambda1 => ip(&h, &lam1_inv),
        FieldTerm::Lambda => ip(&h, &lam_inv),
    };
    let mut log_sum = 0.0;
    let mut theta_sum = 0.0;
    let mut prev_xi = model.xi_eval(&p.q(1), 1)?;
    let mut prev_theta = model.theta_eval(&p.q(1))?.sum_all();
    for k in 1..r {
        let xi = model.xi_eval(&p.q(k + 1), 1)?;
        let theta = model.theta_eval(&p.q(k + 1))?.sum_all();
        log_sum += log1p_ratio(&lam[k], &(&xi - &prev_xi), -p.x[k])?;
        theta_sum += p.x[k] * (theta - prev_theta);
        prev_xi = xi;
        prev_theta = theta;
    }
    let xi1 = model.xi_eval(&p.q(1), 1)?;
    Ok(0.5
        * (field_val + ip(lambda, q) - model.m as f64 - lam_logdet + log_sum + ip(&xi1, &lam1_inv)
            - theta_sum))
}

/// Zero-temperature functional for a step α (value a_k on the k-th segment
/// from Q_k to Q_{k+1}), in closed form. Independent of the path between knots.
pub fn gse_discrete(model: &MixedModel, l: &SymMat, a: &[f64], qs: &[SymMat]) -> Result<f64> {
    let r = qs.len();
    if a.len() != r || r == 0 {
        return Err(Error::DimensionMismatch { expected: r, found: a.len() });
    }
    let m = model.m;
    let q = &qs[r - 1];
    let mut acc_a = SymMat::zeros(m);
    let mut prev_q = SymMat::zeros(m);
    let mut prev_xi = SymMat::zeros(m);
    let mut prev_theta = 0.0;
    let mut i1 = 0.0;
    let mut i2 = 0.0;
    for k in 0..r {
        let gap = l - &acc_a;
        check_pd(&gap).map_err(|me| Error::InfeasibleTriple { t: prev_q.trace(), min_eig: me })?;
        let dq = &qs[k] - &prev_q;
        let xi = model.xi_eval(&qs[k], 1)?;
        let theta = model.theta_eval(&qs[k])?.sum_all();
        let dxi = &xi - &prev_xi;
        i1 += log1p_ratio(&gap, &dq, -a[k])
            .map_err(|_| Error::InfeasibleTriple { t: qs[k].trace(), min_eig: (&gap - &dq.scale(a[k])).min_eig() })?;
        i2 += ip(&dxi, &acc_a) + a[k] * (theta - prev_theta - ip(&dxi, &prev_q));
        acc_a.axpy(a[k], &dq);
        prev_q = qs[k].clone();
        prev_xi = xi;
        prev_theta = theta;
    }
    let gap = l - &acc_a;
    check_pd(&gap).map_err(|me| Error::InfeasibleTriple { t: q.trace(), min_eig: me })?;
    let top = &model.xi_eval(q, 1)? + &model.hh();
    Ok(0.5 * (ip(&top, l) + i1 - i2))
}
