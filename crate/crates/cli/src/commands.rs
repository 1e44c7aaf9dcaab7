use anyhow::Result;
use parisi_core::diagnostics::{critical_residual, critical_residual_with, rs_condition, rsb_constraint, rsb_example_build, CriticalOptions, ResidualKind};
use parisi_core::functionals::{
    continuous_cs, discrete_cs, discrete_parisi, gse_discrete, gse_functional, sine_interpolate,
};
use parisi_core::optimize::{
    gse_triple, minimize_discrete_cs, minimize_discrete_parisi, minimize_gse, rs_gse_closed_form, sup_over_q,
    OptReport, OptimizerConfig,
};
use parisi_core::sampler::{extrapolate_gse, simulate};
use parisi_core::{MixedModel, SymMat};
use serde_json::{json, Value};

use crate::config::{Command, Functional};

/// Rows for CSV output. Cells are preformatted.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

pub struct Outcome {
    pub result: Value,
    pub table: Option<Table>,
}

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn constraint(model: &MixedModel, q: &Option<SymMat>) -> SymMat {
    q.clone().unwrap_or_else(|| SymMat::identity(model.m))
}

fn with_seed(mut cfg: OptimizerConfig, seed: Option<u64>) -> OptimizerConfig {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg
}

fn restart_table(rep: &OptReport) -> Table {
    Table {
        header: vec!["restart", "value"],
        rows: rep.per_restart_values.iter().enumerate().map(|(i, v)| vec![i.to_string(), num(*v)]).collect(),
    }
}

fn plain(result: Value) -> Outcome {
    Outcome { result, table: None }
}

pub fn execute(command: &Command, seed: Option<u64>) -> Result<Outcome> {
    Ok(match command {
        Command::EvalCs(c) => {
            let value = discrete_cs(&c.model, &c.order_param)?;
            let (x, path) = sine_interpolate(&c.order_param)?;
            let continuous = continuous_cs(&c.model, &x, &path, None, c.n_quad)?;
            plain(json!({ "value": value, "continuous_value": continuous, "r": c.order_param.r() }))
        }
        Command::EvalParisi(c) => {
            plain(json!({ "value": discrete_parisi(&c.model, &c.lambda, &c.order_param)? }))
        }
        Command::EvalGse(c) => {
            let value = gse_discrete(&c.model, &c.l, &c.a, &c.qs)?;
            let triple = gse_triple(&c.l, &c.a, &c.qs)?;
            let continuous = gse_functional(&c.model, &triple, c.n_quad)?;
            plain(json!({ "value": value, "continuous_value": continuous }))
        }
        Command::Minimize(c) => {
            let q = constraint(&c.model, &c.q);
            let cfg = with_seed(c.optimizer.clone(), seed);
            let rep = match c.functional {
                Functional::Cs => minimize_discrete_cs(&c.model, &q, &cfg)?,
                Functional::Parisi => minimize_discrete_parisi(&c.model, &q, &cfg)?,
            };
            let table = restart_table(&rep);
            Outcome { result: serde_json::to_value(&rep)?, table: Some(table) }
        }
        Command::MinimizeGse(c) => {
            let q = constraint(&c.model, &c.q);
            let rep = minimize_gse(&c.model, &q, &with_seed(c.optimizer.clone(), seed))?;
            let rs = rs_gse_closed_form(&c.model, &q).ok();
            let table = restart_table(&rep);
            let mut result = serde_json::to_value(&rep)?;
            result["rs_closed_form"] = serde_json::to_value(&rs)?;
            Outcome { result, table: Some(table) }
        }
        Command::SupQ(c) => {
            let res = sup_over_q(&c.model, &with_seed(c.optimizer.clone(), seed))?;
            plain(serde_json::to_value(&res)?)
        }
        Command::VerifyRs(c) => {
            let q = constraint(&c.model, &c.q);
            let cond = rs_condition(&c.model, &q)?;
            let mut result = serde_json::to_value(&cond)?;
            result["rs_closed_form"] = serde_json::to_value(rs_gse_closed_form(&c.model, &q).ok())?;
            plain(result)
        }
        Command::VerifyCritical(c) => {
            let (x, path) = sine_interpolate(&c.order_param)?;
            let opts = CriticalOptions { support_tol: c.support_tol, kind: c.residual, n_quad: c.n_quad, tol: c.tol };
            let rep = critical_residual_with(&c.model, &x, &path, &opts)?;
            let rows = rep
                .profile()
                .into_iter()
                .map(|(t, r, s)| vec![num(t), num(r), s.to_string()])
                .collect();
            Outcome {
                result: serde_json::to_value(&rep)?,
                table: Some(Table { header: vec!["t", "residual", "in_support"], rows }),
            }
        }
        Command::RsbExample(c) => {
            let ex = rsb_example_build(c.beta)?;
            let matrix = critical_residual(&ex.model, &ex.x, &ex.path, 1e-8)?;
            let mut result = json!({
                "beta": ex.beta,
                "q0": ex.q0,
                "phi0": ex.phi0,
                "x_monotone": ex.x_monotone,
                "x_left_q0": ex.x_left_q0,
                "residual_kind": ResidualKind::Projected,
                "residual_sup": ex.report.residual_sup,
                "matrix_residual_sup": matrix.residual_sup,
                "identity_residual": ex.identity_residual,
                "value": ex.value,
                "density_gap": ex.density_gap,
            });
            if c.compare_discrete {
                let rep = minimize_discrete_cs(&ex.model, &rsb_constraint(), &with_seed(c.optimizer.clone(), seed))?;
                result["discrete_min"] = json!(rep.best_value);
                result["discrete_gap"] = json!(rep.best_value - ex.value);
            }
            plain(result)
        }
        Command::Simulate(c) => {
            let q = constraint(&c.model, &c.q);
            let rep = simulate(&c.model, &q, &c.simulation, seed.unwrap_or(0))?;
            let rows = rep
                .rows
                .iter()
                .map(|r| vec![r.n.to_string(), r.seed.to_string(), r.restart.to_string(), num(r.energy)])
                .collect();
            Outcome {
                result: serde_json::to_value(&rep)?,
                table: Some(Table { header: vec!["N", "seed", "restart", "energy"], rows }),
            }
        }
        Command::Extrapolate(c) => plain(serde_json::to_value(extrapolate_gse(&c.values, c.exponent)?)?),
    })
}

/// Two-column fallback: every scalar field of the top-level result.
pub fn scalar_table(result: &Value) -> Table {
    let mut rows = Vec::new();
    if let Value::Object(map) = result {
        for (k, v) in map {
            let cell = match v {
                Value::Number(n) => n.as_f64().map(num),
                Value::Bool(b) => Some(b.to_string()),
                Value::String(s) => Some(s.clone()),
                _ => None,
            };
            if let Some(c) = cell {
                rows.push(vec![k.clone(), c]);
            }
        }
    }
    Table { header: vec!["field", "value"], rows }
}
