//! Unconstrained coordinates for monotone level sequences.
//!
//! Q_k = Σ_{j<k} F_j F_jᵀ for k < r with lower-triangular F_j, and Q_r = Q
//! (the final increment Q − Q_{r−1} is whatever remains; infeasible points are
//! rejected by the objective). x_k = c_k / c_{r−1} with c_k = Σ_{j≤k} e^{u_j},
//! so 0 < x_1 ≤ … ≤ x_{r−1} = 1. The common shift of u is a flat direction.

use nalgebra::DMatrix;

use crate::functionals::DiscreteOrderParam;
use crate::linalg::SymMat;

const U_CLAMP: f64 = 40.0;

pub fn tri_len(m: usize) -> usize {
    m * (m + 1) / 2
}

pub fn lower_from(p: &[f64], m: usize) -> DMatrix<f64> {
    let mut f = DMatrix::zeros(m, m);
    let mut k = 0;
    for i in 0..m {
        for j in 0..=i {
            f[(i, j)] = p[k];
            k += 1;
        }
    }
    f
}

pub fn lower_to(f: &DMatrix<f64>) -> Vec<f64> {
    let m = f.nrows();
    let mut out = Vec::with_capacity(tri_len(m));
    for i in 0..m {
        for j in 0..=i {
            out.push(f[(i, j)]);
        }
    }
    out
}

pub fn gram(f: &DMatrix<f64>) -> SymMat {
    SymMat::from_matrix(&(f * f.transpose()))
}

/// Lower-triangular F with F Fᵀ = A for PSD A (singular allowed).
pub fn psd_factor(a: &SymMat) -> DMatrix<f64> {
    let m = a.dim();
    if let Ok(l) = a.cholesky() {
        return l;
    }
    let e = a.eig();
    let vals: Vec<f64> = e.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    let s = e.reconstruct_with(&vals);
    // S = Rᵀ Qᵀ from the QR of Sᵀ, so S Sᵀ = Rᵀ R
    let qr = s.as_matrix().transpose().qr();
    let r = qr.r();
    let mut f = r.transpose();
    for j in 0..m {
        if f[(j, j)] < 0.0 {
            for i in 0..m {
                f[(i, j)] = -f[(i, j)];
            }
        }
    }
    f
}

#[derive(Clone, Copy, Debug)]
pub struct LevelLayout {
    pub m: usize,
    pub r: usize,
}

impl LevelLayout {
    pub fn n_u(&self) -> usize {
        self.r.saturating_sub(1)
    }

    pub fn n_f(&self) -> usize {
        (self.r - 1) * tri_len(self.m)
    }

    pub fn x_from(&self, u: &[f64]) -> Vec<f64> {
        let r = self.r;
        if r == 1 {
            return vec![0.0];
        }
        let logw: Vec<f64> = u.iter().map(|v| v.clamp(-U_CLAMP, U_CLAMP)).collect();
        let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = w.iter().sum();
        let mut x = vec![0.0];
        let mut c = 0.0;
        for (k, wk) in w.iter().enumerate() {
            c += wk;
            x.push(if k + 1 == r - 1 { 1.0 } else { (c / total).min(1.0) });
        }
        x
    }

    /// ∂x_k/∂u_j for k, j = 1..r−1.
    pub fn x_jacobian(&self, u: &[f64]) -> Vec<Vec<f64>> {
        let x = self.x_from(u);
        let n = self.n_u();
        let logw: Vec<f64> = u.iter().map(|v| v.clamp(-U_CLAMP, U_CLAMP)).collect();
        let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = w.iter().sum();
        (1..self.r)
            .map(|k| {
                (0..n)
                    .map(|j| {
                        if u[j].abs() > U_CLAMP {
                            return 0.0;
                        }
                        let ind = if j + 1 <= k { 1.0 } else { 0.0 };
                        w[j] * (ind - x[k]) / total
                    })
                    .collect()
            })
            .collect()
    }

    pub fn u_from(&self, x: &[f64]) -> Vec<f64> {
        let r = self.r;
        let tiny = 1e-300;
        let w: Vec<f64> = (1..r).map(|k| (x[k] - x[k - 1]).max(0.0)).collect();
        let top = w.iter().cloned().fold(tiny, f64::max);
        w.iter().map(|v| (v.max(tiny) / top).ln().clamp(-U_CLAMP, 0.0)).collect()
    }

    /// Q_1..Q_r from factor coordinates.
    pub fn qs_from(&self, f: &[f64], q: &SymMat) -> Vec<SymMat> {
        let t = tri_len(self.m);
        let mut acc = SymMat::zeros(self.m);
        let mut out = Vec::with_capacity(self.r);
        for j in 0..self.r - 1 {
            acc = &acc + &gram(&lower_from(&f[j * t..(j + 1) * t], self.m));
            out.push(acc.clone());
        }
        out.push(q.clone());
        out
    }

    pub fn f_from(&self, qs: &[SymMat]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_f());
        let mut prev = SymMat::zeros(self.m);
        for q in qs.iter().take(self.r - 1) {
            out.extend(lower_to(&psd_factor(&(q - &prev))));
            prev = q.clone();
        }
        out
    }

    pub fn decode(&self, p: &[f64], q: &SymMat) -> DiscreteOrderParam {
        let nu = self.n_u();
        DiscreteOrderParam { x: self.x_from(&p[..nu]), qs: self.qs_from(&p[nu..nu + self.n_f()], q) }
    }

    pub fn encode(&self, x: &[f64], qs: &[SymMat]) -> Vec<f64> {
        let mut out = self.u_from(x);
        out.extend(self.f_from(qs));
        out
    }
}

/// Inserts the midpoint of the widest segment. Weights are per segment
/// (segment k runs from Q_k to Q_{k+1}, Q_0 = 0). With `exact` the new half
/// repeats the weight, which leaves every discrete functional unchanged;
/// otherwise it takes the mean of the neighbouring weights.
pub fn split_widest(w: &[f64], qs: &[SymMat], top: f64, exact: bool) -> (Vec<f64>, Vec<SymMat>) {
    let m = qs[0].dim();
    let mut best = (0, f64::NEG_INFINITY);
    let mut prev = SymMat::zeros(m);
    for (k, q) in qs.iter().enumerate() {
        let width = q.trace() - prev.trace();
        if width > best.1 {
            best = (k, width);
        }
        prev = q.clone();
    }
    let k = best.0;
    let lo = if k == 0 { SymMat::zeros(m) } else { qs[k - 1].clone() };
    let mid = (&lo + &qs[k]).scale(0.5);
    let new_w = if exact { w[k] } else { 0.5 * (w[k] + w.get(k + 1).copied().unwrap_or(top)) };
    let mut w2 = w[..=k].to_vec();
    w2.push(new_w);
    w2.extend_from_slice(&w[k + 1..]);
    let mut q2 = qs[..k].to_vec();
    q2.push(mid);
    q2.extend_from_slice(&qs[k..]);
    (w2, q2)
}
