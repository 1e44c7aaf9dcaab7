#![allow(dead_code)]

use nalgebra::DMatrix;
use parisi_core::functionals::DiscreteOrderParam;
use parisi_core::model::Term;
use parisi_core::{MixedModel, SymMat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss_matrix(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Unit-diagonal PD matrix from normalized Gaussian rows, mixed toward I so
/// it stays well conditioned.
pub fn random_corr(rng: &mut ChaCha8Rng, m: usize, max_off: f64) -> SymMat {
    let g = gauss_matrix(rng, m);
    let mut rows = g.clone();
    for i in 0..m {
        let n = g.row(i).norm();
        for j in 0..m {
            rows[(i, j)] = g[(i, j)] / n;
        }
    }
    let c = SymMat::from_matrix(&(&rows * rows.transpose()));
    c.map(|i, j, v| if i == j { 1.0 } else { v * max_off })
}

/// Random feasible discrete order parameter with Q_r = q and x_{r−1} = 1.
pub fn random_discrete(rng: &mut ChaCha8Rng, q: &SymMat, r: usize) -> DiscreteOrderParam {
    let m = q.dim();
    let mut inner: Vec<f64> = (0..r.saturating_sub(2)).map(|_| rng.gen_range(0.05..0.95)).collect();
    inner.sort_by(f64::total_cmp);
    let mut xs = vec![0.0];
    xs.extend(inner);
    xs.push(1.0);
    // increments of Q^{1/2} S Q^{1/2} with S climbing from 0 to I
    let incs: Vec<SymMat> = (0..r - 1)
        .map(|_| {
            let g = gauss_matrix(rng, m);
            SymMat::from_matrix(&(&g * g.transpose())) + SymMat::identity(m).scale(0.05)
        })
        .collect();
    let mut total = SymMat::zeros(m);
    for e in &incs {
        total = &total + e;
    }
    let c = rng.gen_range(0.3..0.8) / total.eigenvalues()[m - 1];
    let half = q.sqrt().unwrap();
    let mut acc = SymMat::zeros(m);
    let mut qs = Vec::new();
    for e in &incs {
        acc = &acc + &e.scale(c);
        qs.push(acc.sandwich(&half));
    }
    qs.push(q.clone());
    DiscreteOrderParam::new(xs, qs).unwrap()
}

/// Even model with p ∈ {2, 4}, coefficients in [0.2, 0.9] and optional field.
pub fn random_even_model(rng: &mut ChaCha8Rng, m: usize, field: f64) -> MixedModel {
    let mut terms = Vec::new();
    for p in [2u32, 4] {
        terms.push(Term { p, beta: (0..m).map(|_| rng.gen_range(0.2..0.9)).collect() });
    }
    let h = (0..m).map(|_| field * rng.gen_range(0.3..1.0)).collect();
    MixedModel::new(m, terms, h).unwrap()
}

/// Scalar ξ and derivatives for a model with m = 1.
pub struct Scalar {
    pub terms: Vec<(u32, f64)>,
    pub h: f64,
}

impl Scalar {
    pub fn from_model(model: &MixedModel) -> Scalar {
        assert_eq!(model.m, 1);
        Scalar { terms: model.terms.iter().map(|t| (t.p, t.beta[0] * t.beta[0])).collect(), h: model.h[0] }
    }
    pub fn xi(&self, s: f64) -> f64 {
        self.terms.iter().map(|&(p, c)| c * s.powi(p as i32)).sum()
    }
    pub fn d1(&self, s: f64) -> f64 {
        self.terms.iter().map(|&(p, c)| c * p as f64 * s.powi(p as i32 - 1)).sum()
    }
    pub fn theta(&self, s: f64) -> f64 {
        s * self.d1(s) - self.xi(s)
    }
}

/// Scalar discrete CS on levels 0 = q_0 < q_1 < ... < q_r with x_{r−1} = 1,
/// derived from ½[∫x(ξ'+h²) + ∫₀^{q̂} dq/φ̂(q) + log(1−q̂)], q_r the constraint.
pub fn scalar_cs(s: &Scalar, x: &[f64], q: &[f64]) -> f64 {
    let r = x.len();
    assert_eq!(q.len(), r + 1);
    let mut val = 0.0;
    for k in 0..r {
        val += x[k] * (s.xi(q[k + 1]) - s.xi(q[k]) + s.h * s.h * (q[k + 1] - q[k]));
    }
    // φ̂ at level starts
    let mut phi = vec![0.0; r + 1];
    for k in (0..r).rev() {
        phi[k] = phi[k + 1] + x[k] * (q[k + 1] - q[k]);
    }
    for k in 0..r - 1 {
        if x[k] == 0.0 {
            val += (q[k + 1] - q[k]) / phi[k + 1];
        } else {
            val += (phi[k] / phi[k + 1]).ln() / x[k];
        }
    }
    val += (q[r] - q[r - 1]).ln();
    0.5 * val
}

/// Scalar Parisi functional with multiplier b, same level conventions.
pub fn scalar_parisi(s: &Scalar, b: f64, x: &[f64], q: &[f64]) -> f64 {
    let r = x.len();
    let mut dv = vec![0.0; r + 1];
    for k in (0..r).rev() {
        dv[k] = dv[k + 1] + x[k] * (s.d1(q[k + 1]) - s.d1(q[k]));
    }
    let mut val = s.h * s.h / (b - dv[0]) + b - 1.0 - b.ln();
    for k in 0..r {
        let (lo, hi) = (b - dv[k], b - dv[k + 1]);
        if x[k] == 0.0 {
            val += (s.d1(q[k + 1]) - s.d1(q[k])) / hi;
        } else {
            val += (hi / lo).ln() / x[k];
        }
        val -= x[k] * (s.theta(q[k + 1]) - s.theta(q[k]));
    }
    0.5 * val
}

/// Scalar zero-temperature functional for step α with values a_k on [q_k, q_{k+1}].
pub fn scalar_gse(s: &Scalar, l: f64, a: &[f64], q: &[f64]) -> f64 {
    let r = a.len();
    let mut val = (s.d1(q[r]) + s.h * s.h) * l;
    let mut acc = 0.0;
    for k in 0..r {
        let dq = q[k + 1] - q[k];
        if a[k] == 0.0 {
            val += dq / (l - acc);
        } else {
            val += ((l - acc) / (l - acc - a[k] * dq)).ln() / a[k];
        }
        // ∫ ξ''(q)(acc + a_k(q − q_k)) dq
        val -= (s.d1(q[k + 1]) - s.d1(q[k])) * acc
            + a[k] * (s.theta(q[k + 1]) - s.theta(q[k]) - q[k] * (s.d1(q[k + 1]) - s.d1(q[k])));
        acc += a[k] * dq;
    }
    0.5 * val
}

pub fn scalar_param(p: &DiscreteOrderParam) -> (Vec<f64>, Vec<f64>) {
    let mut q = vec![0.0];
    q.extend(p.qs.iter().map(|m| m.get(0, 0)));
    (p.x.clone(), q)
}
