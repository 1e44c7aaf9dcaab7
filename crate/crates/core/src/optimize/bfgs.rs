//! Quasi-Newton minimization with Armijo backtracking.
//!
//! Infeasible points report `None` from [`Objective::value`]; the line search
//! treats them as +∞ and shrinks the step.

use nalgebra::{DMatrix, DVector};

pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, p: &[f64]) -> Option<f64>;

    /// Central differences, falling back to one-sided near the boundary.
    fn gradient(&self, p: &[f64], f0: f64) -> Option<Vec<f64>> {
        numerical_gradient(|q| self.value(q), p, f0)
    }
}

pub fn numerical_gradient(
    f: impl Fn(&[f64]) -> Option<f64>,
    p: &[f64],
    f0: f64,
) -> Option<Vec<f64>> {
    let mut g = vec![0.0; p.len()];
    let mut q = p.to_vec();
    for i in 0..p.len() {
        let h = 1e-6 * p[i].abs().max(1.0);
        q[i] = p[i] + h;
        let fp = f(&q);
        q[i] = p[i] - h;
        let fm = f(&q);
        q[i] = p[i];
        g[i] = match (fp, fm) {
            (Some(a), Some(b)) => (a - b) / (2.0 * h),
            (Some(a), None) => (a - f0) / h,
            (None, Some(b)) => (f0 - b) / h,
            (None, None) => return None,
        };
    }
    Some(g)
}

#[derive(Clone, Debug)]
pub struct LocalResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iters: usize,
    pub converged: bool,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Returns `None` if the start is infeasible.
pub fn bfgs(obj: &dyn Objective, x0: &[f64], max_iters: usize, grad_tol: f64) -> Option<LocalResult> {
    let n = obj.dim();
    let mut x = DVector::from_column_slice(x0);
    let mut f = obj.value(x.as_slice())?;
    if !f.is_finite() {
        return None;
    }
    if n == 0 {
        return Some(LocalResult { x: vec![], f, grad_norm: 0.0, iters: 0, converged: true });
    }
    let mut g = DVector::from_vec(obj.gradient(x.as_slice(), f)?);
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut first = true;
    let mut stall = 0;
    let mut iters = 0;
    while iters < max_iters {
        if inf_norm(g.as_slice()) <= grad_tol {
            break;
        }
        iters += 1;
        let mut d = -(&hinv * &g);
        let mut slope = g.dot(&d);
        if !(slope < 0.0) {
            hinv = DMatrix::identity(n, n);
            d = -g.clone();
            slope = g.dot(&d);
        }
        let mut step = if first { (1.0 / g.norm()).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + &d * step;
            if let Some(ft) = obj.value(trial.as_slice()) {
                if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            if first {
                break;
            }
            // restart from steepest descent once before giving up
            hinv = DMatrix::identity(n, n);
            first = true;
            continue;
        };
        let Some(gn) = obj.gradient(xn.as_slice(), fnew) else { break };
        let gn = DVector::from_vec(gn);
        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if first {
                hinv = DMatrix::identity(n, n) * (sy / y.dot(&y));
            }
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            hinv += (&s * s.transpose()) * (rho * rho * yhy + rho)
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
            first = false;
        }
        if (f - fnew).abs() <= 1e-15 * (1.0 + f.abs()) {
            stall += 1;
        } else {
            stall = 0;
        }
        x = xn;
        f = fnew;
        g = gn;
        if stall >= 8 {
            break;
        }
    }
    let grad_norm = inf_norm(g.as_slice());
    Some(LocalResult { x: x.as_slice().to_vec(), f, grad_norm, iters, converged: grad_norm <= grad_tol })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosen;
    impl Objective for Rosen {
        fn dim(&self) -> usize {
            2
        }
        fn value(&self, p: &[f64]) -> Option<f64> {
            Some((1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2))
        }
    }

    struct Barrier;
    impl Objective for Barrier {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, p: &[f64]) -> Option<f64> {
            (p[0] > 0.0).then(|| p[0] - p[0].ln())
        }
    }

    #[test]
    fn rosenbrock() {
        let r = bfgs(&Rosen, &[-1.2, 1.0], 2000, 1e-7).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5, "{r:?}");
    }

    #[test]
    fn respects_infeasible_region() {
        let r = bfgs(&Barrier, &[5.0], 200, 1e-9).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-6);
        assert!(bfgs(&Barrier, &[-1.0], 10, 1e-9).is_none());
    }
}
