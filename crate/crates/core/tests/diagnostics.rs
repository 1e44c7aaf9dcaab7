mod common;

use common::*;
use parisi_core::diagnostics::*;
use parisi_core::functionals::*;
use parisi_core::optimize::*;
use parisi_core::{Error, MixedModel, SymMat};

/// φ(q)^{-2} = β² Σ_ij cosh(q c_ij/2) (c_ij/2)² for C = [[1, .1], [.1, 1]].
fn cosh_phi(beta: f64, q: f64) -> f64 {
    let mut s = 0.0;
    for c in [1.0, 0.1, 0.1, 1.0f64] {
        s += beta * beta * (q * c / 2.0).cosh() * (c / 2.0).powi(2);
    }
    s.powf(-0.5)
}

fn oracle_q0(beta: f64) -> f64 {
    let f = |q: f64| cosh_phi(beta, q) - (2.0 - q) / 2f64.sqrt();
    let (mut a, mut b) = (0.0, 2.0);
    for _ in 0..100 {
        let c = 0.5 * (a + b);
        if f(c) < 0.0 {
            a = c
        } else {
            b = c
        }
    }
    0.5 * (a + b)
}

#[test]
fn rsb_example_at_beta_1_2() {
    let ex = rsb_example_build(1.2).unwrap();
    assert!((ex.q0 - oracle_q0(1.2)).abs() < 1e-10, "{} vs {}", ex.q0, oracle_q0(1.2));
    assert!((ex.q0 - 0.3543784879).abs() < 1e-9);
    assert!((ex.phi0 - cosh_phi(1.2, 0.0)).abs() < 1e-12);
    assert!(ex.x_monotone && ex.x_left_q0 <= 1.0);
    assert_eq!(ex.report.kind, ResidualKind::Projected);
    assert!(ex.report.residual_sup < 1e-5, "{}", ex.report.residual_sup);
    assert!(ex.identity_residual < 1e-6, "{}", ex.identity_residual);
    assert!((ex.value - 0.781636976).abs() < 1e-8, "{}", ex.value);

    // isolation identity at 0: both sides equal φ(0)^{-2}
    let (lhs, rhs) = sk_isolation_check(&ex.model, &ex.x, &ex.path).unwrap();
    let want = ex.phi0.powi(-2);
    assert!((lhs - want).abs() < 1e-10 && (rhs - want).abs() < 1e-6, "{lhs} {rhs} {want}");
}

#[test]
fn rsb_example_matrix_residual_does_not_vanish() {
    let ex = rsb_example_build(1.2).unwrap();
    let m = critical_residual(&ex.model, &ex.x, &ex.path, 1e-8).unwrap();
    assert!(m.residual_sup > 1e-2, "{}", m.residual_sup);
}

#[test]
fn rsb_density_differs_by_the_eigenvalue_spread() {
    // x from the example is ⟨ξ''', Φ'^{∘3}⟩/(√2 (tr M)^{3/2}); the density
    // uses 2 tr(M^{3/2}). The ratio depends only on the spectrum of M.
    let ex = rsb_example_build(1.2).unwrap();
    for u in [0.05, 0.15, 0.3] {
        let phi = ex.path.eval(u);
        let d = ex.path.derivative(u);
        let half = d.sqrt().unwrap();
        let mm = ex.model.xi_eval(&phi, 2).unwrap().hadamard(&d).unwrap().sandwich(&half);
        let ev = mm.eigenvalues();
        let ratio = 2f64.sqrt() * (ev[0] + ev[1]).powf(1.5) / (2.0 * (ev[0].powf(1.5) + ev[1].powf(1.5)));
        let got = parisi_density(&ex.model, &ex.path, u).unwrap() / ex.x.eval(u);
        assert!((got - ratio).abs() < 1e-5, "u={u}: {got} vs {ratio}");
    }
}

#[test]
fn rsb_example_rejects_small_beta() {
    assert!(matches!(rsb_example_build(0.99), Err(Error::BetaTooSmall { .. })));
    let t = (2.0f64 / 2.02).sqrt();
    assert!(matches!(rsb_example_build(t), Err(Error::BetaTooSmall { .. })));
}

#[test]
fn cs_minimizer_is_critical() {
    let mut g = rng(4);
    for _ in 0..2 {
        let model = random_even_model(&mut g, 2, 0.5);
        let q = random_corr(&mut g, 2, 0.6);
        let rep = minimize_discrete_cs(&model, &q, &OptimizerConfig::default()).unwrap();
        let ArgMin::Discrete { order_param } = &rep.argmin else { panic!("wrong argmin") };
        let (x, path) = sine_interpolate(order_param).unwrap();
        let c = critical_residual(&model, &x, &path, 1e-8).unwrap();
        assert!(c.residual_sup < 1e-3, "{}", c.residual_sup);
        assert!(c.support_grid.iter().any(|p| p.1));
    }
}

#[test]
fn non_optimal_point_is_flagged() {
    let model = MixedModel::pure(1, 2, 1.0, vec![0.0]).unwrap();
    let p = DiscreteOrderParam::new(vec![0.0, 1.0], vec![SymMat::diag(&[0.6]), SymMat::diag(&[1.0])]).unwrap();
    let (x, path) = sine_interpolate(&p).unwrap();
    let c = critical_residual(&model, &x, &path, 1e-8).unwrap();
    // F(q) = 2q − q/(1−q)² at the atom q = 0.6
    let want = (1.2 - 0.6 / 0.16f64).abs();
    assert!((c.residual_sup - want).abs() < 1e-6, "{} vs {want}", c.residual_sup);
    assert!(!c.verdict.pass);
    let flagged: Vec<f64> = c.support_grid.iter().filter(|p| p.1).map(|p| p.0).collect();
    assert_eq!(flagged.len(), 1);
    assert!((flagged[0] - 0.6).abs() < 1e-12);
}

#[test]
fn zero_temperature_optimality_of_gse_output() {
    let mut g = rng(4);
    let model = random_even_model(&mut g, 2, 0.5);
    let q = random_corr(&mut g, 2, 0.6);
    let rep = minimize_gse(&model, &q, &OptimizerConfig::default()).unwrap();
    let ArgMin::ZeroTemp { triple, .. } = &rep.argmin else { panic!("wrong argmin") };
    let z = zero_temp_g(&model, triple, DEFAULT_N_QUAD).unwrap();
    assert!((z.value - rep.best_value).abs() < 1e-8);
    assert!(z.stationarity < 1e-5, "{}", z.stationarity);
    assert!(z.g_min > -1e-6, "{}", z.g_min);
    assert!(z.support_ok, "{}", z.off_support_mass);
}

#[test]
fn rs_condition_readings() {
    let model = MixedModel::pure(2, 2, 0.8, vec![0.6, 0.4]).unwrap();
    let q = SymMat::from_rows(&[vec![1.0, 0.3], vec![0.3, 1.0]]).unwrap();
    let c = rs_condition(&model, &q).unwrap();
    // pure 2-spin: ξ' = 2B⊙Q and ξ''⊙Q = 2B⊙Q, so the difference is hhᵀ
    assert!((c.margin - 0.0).abs() < 1e-12 && c.flag);
    assert!((c.entrywise_margin - 0.16).abs() < 1e-12);
    let p4 = MixedModel::pure(2, 4, 0.8, vec![0.0, 0.0]).unwrap();
    assert!(!rs_condition(&p4, &q).unwrap().flag);
}

#[test]
fn convexity_matches_closed_form_on_linear_path() {
    let model = random_even_model(&mut rng(9), 2, 0.0);
    let q = SymMat::from_rows(&[vec![1.0, 0.2], vec![0.2, 1.0]]).unwrap();
    let path = MatrixPath::linear(&q, 2.0);
    let prof = convexity_profile(&model, &path, None, (0.2, 1.8), 9).unwrap();
    let d = q.scale(0.5);
    for pt in &prof {
        let phi = path.eval(pt.u);
        let s = |k: usize| {
            let dk = d.hadamard_pow(k as u32);
            parisi_core::linalg::ip(&model.xi_eval(&phi, k).unwrap(), &dk)
        };
        let (s2, s3, s4) = (s(2), s(3), s(4));
        let y = s2.powf(-0.5);
        let y2 = 0.25 * s2.powf(-2.5) * (3.0 * s3 * s3 - 2.0 * s4 * s2);
        assert!((pt.y - y).abs() < 1e-12);
        assert!((pt.y2 - y2).abs() < 1e-5 * (1.0 + y2.abs()), "u={} {} vs {y2}", pt.u, pt.y2);
        assert!(pt.z.is_none());
    }
}

#[test]
fn convexity_z_on_rsb_support() {
    let ex = rsb_example_build(1.2).unwrap();
    let prof = convexity_profile(&ex.model, &ex.path, Some(&ex.x), (0.05, 0.3), 4).unwrap();
    for pt in &prof {
        // Φ̂ = √2 φ Φ' on the support, so ⟨Φ̂⁻¹Φ'Φ̂⁻¹, Φ'⟩ = m/(2φ²) = φ⁻²
        let z = pt.z.unwrap();
        let want = cosh_phi(1.2, pt.u);
        assert!((z - want).abs() < 1e-6, "u={} {z} vs {want}", pt.u);
    }
}

#[test]
fn jump_hypothesis_scalar() {
    let path = MatrixPath::linear(&SymMat::identity(1), 1.0);
    for (beta, holds) in [(0.6, true), (0.8, false)] {
        let model = MixedModel::pure(1, 2, beta, vec![0.0]).unwrap();
        let j = jump_hypothesis(&model, &path, 0.3).unwrap();
        assert!((j.lhs - 2.0 * beta * beta).abs() < 1e-14 && (j.rhs - 1.0).abs() < 1e-14);
        assert_eq!(j.hypothesis_holds, holds);
    }
}

#[test]
fn density_needs_nonzero_derivative() {
    let model = MixedModel::pure(1, 4, 1.0, vec![0.0]).unwrap();
    let flat = MatrixPath::linear(&SymMat::identity(1), 1.0);
    assert!(parisi_density(&model, &flat, 0.0).is_err());
}
