mod common;

use common::*;
use parisi_core::functionals::*;
use parisi_core::{MixedModel, SymMat};
use proptest::prelude::*;

const NQ: usize = DEFAULT_N_QUAD;

#[test]
fn bridge_on_random_instances() {
    let mut g = rng(11);
    for (m, r) in [(1, 2), (2, 3), (3, 5), (2, 2), (1, 5)] {
        let model = random_even_model(&mut g, m, 0.5);
        let q = random_corr(&mut g, m, 0.6);
        let p = random_discrete(&mut g, &q, r);
        let d = discrete_cs(&model, &p).unwrap();
        let (x, path) = sine_interpolate(&p).unwrap();
        let c = continuous_cs(&model, &x, &path, None, NQ).unwrap();
        assert!((d - c).abs() < 1e-6 * (1.0 + d.abs()), "m={m} r={r}: {d} vs {c}");
        let rw = continuous_cs_rewritten(&model, &x, &path, NQ).unwrap();
        assert!((c - rw).abs() < 1e-7, "rewritten {c} vs {rw}");
    }
}

#[test]
fn scalar_example_through_every_form() {
    let model = MixedModel::pure(1, 2, 1.0, vec![0.0]).unwrap();
    let p = DiscreteOrderParam::new(vec![0.0, 1.0], vec![SymMat::diag(&[0.3]), SymMat::diag(&[1.0])]).unwrap();
    let x = MeasureFn::step(vec![(0.0, 0.0), (0.3, 1.0)], MeasureMode::FiniteTemperature, 1.0).unwrap();
    let path = MatrixPath::linear(&SymMat::identity(1), 1.0);
    let expect = 0.5 * (0.7f64.ln() + 0.3 / 0.7 + 0.91);
    assert!((discrete_cs(&model, &p).unwrap() - expect).abs() < 1e-14);
    assert!((continuous_cs(&model, &x, &path, None, NQ).unwrap() - expect).abs() < 1e-10);
    assert!((continuous_cs_rewritten(&model, &x, &path, NQ).unwrap() - expect).abs() < 1e-10);
    let lam = SymMat::diag(&[1.0 / 0.7 + 1.4]);
    assert!((continuous_parisi(&model, &x, &lam, &path, NQ).unwrap() - expect).abs() < 1e-10);
}

#[test]
fn t_hat_independence() {
    let mut g = rng(5);
    let model = random_even_model(&mut g, 2, 0.3);
    let q = random_corr(&mut g, 2, 0.5);
    let p = random_discrete(&mut g, &q, 3);
    let (x, path) = sine_interpolate(&p).unwrap();
    let (tx, m) = (x.t_x(), path.end_time());
    let vals: Vec<f64> = [0.2, 0.35, 0.5, 0.65, 0.8]
        .iter()
        .map(|f| continuous_cs(&model, &x, &path, Some(tx + f * (m - tx)), NQ).unwrap())
        .collect();
    for v in &vals {
        assert!((v - vals[0]).abs() < 1e-8, "{vals:?}");
    }
    assert!(matches!(
        continuous_cs(&model, &x, &path, Some(tx * 0.5), NQ),
        Err(parisi_core::Error::InvalidThat { .. })
    ));
}

#[test]
fn parisi_bridge() {
    let mut g = rng(8);
    let model = random_even_model(&mut g, 2, 0.4);
    let q = random_corr(&mut g, 2, 0.5);
    let p = random_discrete(&mut g, &q, 4);
    let lam = &lambda_floor(&model, &p) + &SymMat::identity(2).scale(1.5);
    let d = discrete_parisi(&model, &lam, &p).unwrap();
    let (x, path) = sine_interpolate(&p).unwrap();
    let c = continuous_parisi(&model, &x, &lam, &path, NQ).unwrap();
    assert!((d - c).abs() < 1e-6, "{d} vs {c}");
}

#[test]
fn merging_flat_levels_keeps_values() {
    let mut g = rng(12);
    let model = random_even_model(&mut g, 2, 0.4);
    let q = random_corr(&mut g, 2, 0.5);
    let mut p = random_discrete(&mut g, &q, 5);
    p.x[3] = p.x[2];
    p.x[4] = 1.0;
    let merged = p.merged(1e-12);
    assert_eq!(merged.r(), 4);
    assert_eq!(merged.target(), p.target());
    let lam = &lambda_floor(&model, &p) + &SymMat::identity(2);
    let (a, b) = (discrete_cs(&model, &p).unwrap(), discrete_cs(&model, &merged).unwrap());
    assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    let (a, b) = (discrete_parisi(&model, &lam, &p).unwrap(), discrete_parisi(&model, &lam, &merged).unwrap());
    assert!((a - b).abs() < 1e-12, "{a} vs {b}");
}

fn lambda_floor(model: &MixedModel, p: &DiscreteOrderParam) -> SymMat {
    let mut acc = SymMat::zeros(model.m);
    for k in 1..p.r() {
        let dxi = &model.xi_eval(&p.q(k + 1), 1).unwrap() - &model.xi_eval(&p.q(k), 1).unwrap();
        acc = &acc + &dxi.scale(p.x[k]);
    }
    acc
}

#[test]
fn gse_quadrature_matches_closed_form() {
    let mut g = rng(21);
    let model = random_even_model(&mut g, 2, 0.5);
    let q = random_corr(&mut g, 2, 0.5);
    let p = random_discrete(&mut g, &q, 3);
    let a = vec![0.2, 0.9, 1.7];
    let (_, path) = sine_interpolate(&p).unwrap();
    let mut l = SymMat::identity(2).scale(0.4);
    let mut prev = SymMat::zeros(2);
    for (k, qk) in p.qs.iter().enumerate() {
        l = &l + &(qk - &prev).scale(a[k]);
        prev = qk.clone();
    }
    let knots: Vec<(f64, f64)> = (0..3).map(|k| (p.q(k).trace(), a[k])).collect();
    let alpha = MeasureFn::step(knots, MeasureMode::ZeroTemperature, path.end_time()).unwrap();
    let triple = ZeroTempTriple { l: l.clone(), alpha, path };
    let quad = gse_functional(&model, &triple, NQ).unwrap();
    let closed = gse_discrete(&model, &l, &a, &p.qs).unwrap();
    assert!((quad - closed).abs() < 1e-7, "{quad} vs {closed}");
}

#[test]
fn gse_alpha_zero_linear_path() {
    let mut g = rng(3);
    let model = random_even_model(&mut g, 3, 0.5);
    let q = random_corr(&mut g, 3, 0.4);
    let l = SymMat::from_rows(&[vec![0.9, 0.1, 0.0], vec![0.1, 1.1, 0.05], vec![0.0, 0.05, 0.8]]).unwrap();
    let alpha = MeasureFn::step(vec![(0.0, 0.0)], MeasureMode::ZeroTemperature, 3.0).unwrap();
    let triple = ZeroTempTriple { l: l.clone(), alpha, path: MatrixPath::linear(&q, 3.0) };
    let v = gse_functional(&model, &triple, NQ).unwrap();
    let top = &model.xi_eval(&q, 1).unwrap() + &model.hh();
    let expect = 0.5 * (top.frob_ip(&l).unwrap() + l.inverse().unwrap().frob_ip(&q).unwrap());
    assert!((v - expect).abs() < 1e-12);
}

#[test]
fn quadrature_convergence() {
    let mut g = rng(99);
    let model = random_even_model(&mut g, 2, 0.3);
    let q = random_corr(&mut g, 2, 0.5);
    let p = random_discrete(&mut g, &q, 3);
    let (x, path) = sine_interpolate(&p).unwrap();
    let a = continuous_cs(&model, &x, &path, None, NQ).unwrap();
    let b = continuous_cs(&model, &x, &path, None, 2 * NQ - 1).unwrap();
    assert!((a - b).abs() < 1e-8, "{a} vs {b}");
}

#[test]
fn scalar_reduction_matches_oracle() {
    let mut g = rng(17);
    for r in [2, 3, 4] {
        let model = random_even_model(&mut g, 1, 0.6);
        let s = Scalar::from_model(&model);
        let p = random_discrete(&mut g, &SymMat::identity(1), r);
        let (xs, qs) = scalar_param(&p);
        let d = discrete_cs(&model, &p).unwrap();
        assert!((d - scalar_cs(&s, &xs, &qs)).abs() < 1e-12);
        let b = 3.0 + lambda_floor(&model, &p).get(0, 0);
        let dp = discrete_parisi(&model, &SymMat::diag(&[b]), &p).unwrap();
        assert!((dp - scalar_parisi(&s, b, &xs, &qs)).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn prop_bridge_and_forms(seed in 0u64..10_000, m in 1usize..=3, r in 2usize..=4) {
        let mut g = rng(seed);
        let model = random_even_model(&mut g, m, 0.5);
        let q = random_corr(&mut g, m, 0.6);
        let p = random_discrete(&mut g, &q, r);
        let d = discrete_cs(&model, &p).unwrap();
        let (x, path) = sine_interpolate(&p).unwrap();
        let c = continuous_cs(&model, &x, &path, None, NQ).unwrap();
        prop_assert!((d - c).abs() <= 1e-6 * (1.0 + d.abs()));
        let rw = continuous_cs_rewritten(&model, &x, &path, NQ).unwrap();
        prop_assert!((c - rw).abs() <= 1e-7);
    }
}
