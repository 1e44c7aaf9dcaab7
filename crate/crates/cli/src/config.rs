use std::fmt;
use std::path::PathBuf;

use parisi_core::diagnostics::ResidualKind;
use parisi_core::functionals::{DiscreteOrderParam, DEFAULT_N_QUAD};
use parisi_core::optimize::OptimizerConfig;
use parisi_core::sampler::SimulationConfig;
use parisi_core::{MixedModel, SymMat};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

/// Schema violation, located by a JSON pointer into the config document.
#[derive(Debug)]
pub struct ConfigError {
    pub pointer: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pointer.is_empty() {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config at {}: {}", self.pointer, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(pointer: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { pointer: pointer.into(), message: message.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

fn n_quad() -> usize {
    DEFAULT_N_QUAD
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalCs {
    pub model: MixedModel,
    pub order_param: DiscreteOrderParam,
    #[serde(default = "n_quad")]
    pub n_quad: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalParisi {
    pub model: MixedModel,
    pub order_param: DiscreteOrderParam,
    pub lambda: SymMat,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalGse {
    pub model: MixedModel,
    #[serde(rename = "L")]
    pub l: SymMat,
    pub a: Vec<f64>,
    #[serde(rename = "Qs")]
    pub qs: Vec<SymMat>,
    #[serde(default = "n_quad")]
    pub n_quad: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Functional {
    #[default]
    Cs,
    Parisi,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Minimize {
    pub model: MixedModel,
    #[serde(rename = "Q")]
    pub q: Option<SymMat>,
    #[serde(default)]
    pub functional: Functional,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimizeGse {
    pub model: MixedModel,
    #[serde(rename = "Q")]
    pub q: Option<SymMat>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupQ {
    pub model: MixedModel,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyRs {
    pub model: MixedModel,
    #[serde(rename = "Q")]
    pub q: Option<SymMat>,
}

fn support_tol() -> f64 {
    1e-8
}

fn residual_tol() -> f64 {
    1e-5
}

fn matrix_kind() -> ResidualKind {
    ResidualKind::Matrix
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyCritical {
    pub model: MixedModel,
    pub order_param: DiscreteOrderParam,
    #[serde(default = "support_tol")]
    pub support_tol: f64,
    #[serde(default = "matrix_kind")]
    pub residual: ResidualKind,
    #[serde(default = "residual_tol")]
    pub tol: f64,
    #[serde(default = "n_quad")]
    pub n_quad: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RsbExample {
    pub beta: f64,
    /// Also run the discrete CS minimizer on the same model and constraint.
    #[serde(default)]
    pub compare_discrete: bool,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Simulate {
    pub model: MixedModel,
    #[serde(rename = "Q")]
    pub q: Option<SymMat>,
    #[serde(default)]
    pub simulation: SimulationConfig,
}

fn exponent() -> f64 {
    -2.0 / 3.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Extrapolate {
    pub values: Vec<(usize, f64)>,
    #[serde(default = "exponent")]
    pub exponent: f64,
}

#[derive(Debug)]
pub enum Command {
    EvalCs(EvalCs),
    EvalParisi(EvalParisi),
    EvalGse(EvalGse),
    Minimize(Minimize),
    MinimizeGse(MinimizeGse),
    SupQ(SupQ),
    VerifyRs(VerifyRs),
    VerifyCritical(VerifyCritical),
    RsbExample(RsbExample),
    Simulate(Simulate),
    Extrapolate(Extrapolate),
}

pub const COMMANDS: &[&str] = &[
    "eval-cs",
    "eval-parisi",
    "eval-gse",
    "minimize",
    "minimize-gse",
    "sup-q",
    "verify-rs",
    "verify-critical",
    "rsb-example",
    "simulate",
    "extrapolate",
];

#[derive(Debug)]
pub struct RunConfig {
    pub name: String,
    pub command: Command,
    pub seed: Option<u64>,
    pub output: OutputSpec,
    /// The document as read, echoed into reports.
    pub input: Value,
}

fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        let part = match seg {
            Segment::Seq { index } => index.to_string(),
            Segment::Map { key } => key.replace('~', "~0").replace('/', "~1"),
            Segment::Enum { variant } => variant.clone(),
            Segment::Unknown => continue,
        };
        out.push('/');
        out.push_str(&part);
    }
    out
}

fn parse<T: DeserializeOwned>(v: Value) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(v).map_err(|e| ConfigError { pointer: pointer(e.path()), message: e.inner().to_string() })
}

fn take<T: DeserializeOwned>(obj: &mut serde_json::Map<String, Value>, key: &str) -> Result<Option<T>, ConfigError> {
    match obj.remove(key) {
        None => Ok(None),
        Some(v) => parse(v).map(Some).map_err(|e| ConfigError { pointer: format!("/{key}{}", e.pointer), ..e }),
    }
}

pub fn load(text: &str) -> Result<RunConfig, ConfigError> {
    let input: Value = serde_json::from_str(text).map_err(|e| invalid("", e.to_string()))?;
    let Value::Object(mut obj) = input.clone() else { return Err(invalid("", "expected a JSON object")) };
    let name: String = take(&mut obj, "command")?.ok_or_else(|| invalid("/command", "missing field"))?;
    let seed = take(&mut obj, "seed")?;
    let output = take(&mut obj, "output")?.unwrap_or_default();
    let rest = Value::Object(obj);
    let command = match name.as_str() {
        "eval-cs" => Command::EvalCs(parse(rest)?),
        "eval-parisi" => Command::EvalParisi(parse(rest)?),
        "eval-gse" => Command::EvalGse(parse(rest)?),
        "minimize" => Command::Minimize(parse(rest)?),
        "minimize-gse" => Command::MinimizeGse(parse(rest)?),
        "sup-q" => Command::SupQ(parse(rest)?),
        "verify-rs" => Command::VerifyRs(parse(rest)?),
        "verify-critical" => Command::VerifyCritical(parse(rest)?),
        "rsb-example" => Command::RsbExample(parse(rest)?),
        "simulate" => Command::Simulate(parse(rest)?),
        "extrapolate" => Command::Extrapolate(parse(rest)?),
        other => {
            return Err(invalid("/command", format!("unknown command {other:?}, expected one of {}", COMMANDS.join(", "))))
        }
    };
    Ok(RunConfig { name, command, seed, output, input })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pointer_reaches_nested_fields() {
        let e = load(r#"{"command":"verify-rs","model":{"m":1,"terms":[{"p":"two","beta":[1.0]}]}}"#).unwrap_err();
        assert_eq!(e.pointer, "/model/terms/0/p");
        let e = load(r#"{"command":"minimize","model":{"m":1,"terms":[]},"optimizer":{"restarts":"x"}}"#).unwrap_err();
        assert_eq!(e.pointer, "/optimizer/restarts");
        let e = load(r#"{"command":"extrapolate","values":[[1,2.0],[2,"a"]]}"#).unwrap_err();
        assert_eq!(e.pointer, "/values/1/1");
    }

    #[test]
    fn unknown_fields_and_commands_are_rejected() {
        let e = load(r#"{"command":"extrapolate","values":[],"bogus":1}"#).unwrap_err();
        assert!(e.message.contains("bogus"), "{e}");
        let e = load(r#"{"command":"nope"}"#).unwrap_err();
        assert_eq!(e.pointer, "/command");
        let e = load(r#"{"values":[]}"#).unwrap_err();
        assert_eq!(e.pointer, "/command");
    }
}
