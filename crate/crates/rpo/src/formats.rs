//! Plain-text file formats: empirical value files, key=value files and
//! serialized demand models.

use std::fmt::Write as _;
use std::path::Path;

use rpo_core::demand::{DemandKind, DemandModel, DemandParams, MlpParams, HIDDEN_UNITS};
use rpo_core::market::ValueDistribution;

use crate::error::{io_err, parse_err, HarnessError, Result};

/// Parses one value per line. Blank lines and `#` comments are skipped.
/// With `declared_max`, values above it are rejected and the support is
/// divided by it.
pub fn parse_empirical(text: &str, source_name: &str, declared_max: Option<f64>) -> Result<ValueDistribution> {
    let mut values = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| parse_err(source_name, i + 1, format!("not a number: {line:?}")))?;
        if !v.is_finite() {
            return Err(parse_err(source_name, i + 1, format!("non-finite value {line:?}")));
        }
        if v < 0.0 {
            return Err(parse_err(source_name, i + 1, format!("negative value {v}")));
        }
        if let Some(max) = declared_max {
            if v > max {
                return Err(parse_err(source_name, i + 1, format!("value {v} above declared maximum {max}")));
            }
        }
        values.push(v);
    }
    Ok(ValueDistribution::empirical(values, declared_max)?)
}

pub fn load_empirical(path: &Path, declared_max: Option<f64>) -> Result<ValueDistribution> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_empirical(&text, &path.display().to_string(), declared_max)
}

/// One `key = value` entry with its 1-based line number.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Splits `key = value` lines, skipping blanks and `#` comments. Duplicate
/// keys are an error.
pub fn parse_key_values(text: &str, source_name: &str) -> Result<Vec<Entry>> {
    let mut entries: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(source_name, i + 1, format!("expected key = value, got {line:?}")))?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(parse_err(source_name, i + 1, "empty key"));
        }
        if let Some(prev) = entries.iter().find(|e| e.key == key) {
            return Err(parse_err(source_name, i + 1, format!("duplicate key {key:?} (first on line {})", prev.line)));
        }
        entries.push(Entry { line: i + 1, key, value: value.trim().to_string() });
    }
    Ok(entries)
}

pub(crate) fn parse_value<T: std::str::FromStr>(e: &Entry, source_name: &str) -> Result<T> {
    e.value
        .parse()
        .map_err(|_| parse_err(source_name, e.line, format!("invalid value {:?} for {}", e.value, e.key)))
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Serializes a fitted model. Floats use Rust's shortest round-trip
/// formatting, so [`parse_demand_model`] restores the exact bits.
pub fn write_demand_model(model: &DemandModel) -> Result<String> {
    let params = model.params().ok_or(rpo_core::Error::UnfittedModel)?;
    let mut out = String::new();
    let kind = match model.kind() {
        DemandKind::Logistic => "logistic",
        DemandKind::Mlp => "mlp",
    };
    let _ = writeln!(out, "kind = {kind}");
    let _ = writeln!(out, "trained_on = {}", model.trained_on());
    match params {
        DemandParams::Constant(p) => {
            let _ = writeln!(out, "form = constant\nprobability = {p}");
        }
        DemandParams::Logistic { intercept, slope } => {
            let _ = writeln!(out, "form = logistic\nintercept = {intercept}\nslope = {slope}");
        }
        DemandParams::Mlp(m) => {
            let _ = writeln!(out, "form = mlp");
            let _ = writeln!(out, "input_offset = {}", m.input_offset);
            let _ = writeln!(out, "input_scale = {}", m.input_scale);
            let _ = writeln!(out, "hidden_weights = {}", join(&m.hidden_weights));
            let _ = writeln!(out, "hidden_biases = {}", join(&m.hidden_biases));
            let _ = writeln!(out, "output_weights = {}", join(&m.output_weights));
            let _ = writeln!(out, "output_bias = {}", m.output_bias);
        }
    }
    Ok(out)
}

pub fn parse_demand_model(text: &str, source_name: &str) -> Result<DemandModel> {
    let entries = parse_key_values(text, source_name)?;
    let get = |key: &str| {
        entries
            .iter()
            .find(|e| e.key == key)
            .ok_or_else(|| HarnessError::Config(format!("{source_name}: missing key {key:?}")))
    };
    let float = |key: &str| -> Result<f64> { parse_value(get(key)?, source_name) };
    let array = |key: &str| -> Result<[f64; HIDDEN_UNITS]> {
        let e = get(key)?;
        let parts: Vec<f64> = e
            .value
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(source_name, e.line, format!("invalid number list for {key}")))?;
        parts
            .try_into()
            .map_err(|_| parse_err(source_name, e.line, format!("{key} needs {HIDDEN_UNITS} entries")))
    };
    let kind = match get("kind")?.value.as_str() {
        "logistic" => DemandKind::Logistic,
        "mlp" => DemandKind::Mlp,
        other => return Err(HarnessError::Config(format!("{source_name}: unknown demand kind {other:?}"))),
    };
    let trained_on: usize = parse_value(get("trained_on")?, source_name)?;
    let params = match get("form")?.value.as_str() {
        "constant" => DemandParams::Constant(float("probability")?),
        "logistic" => DemandParams::Logistic { intercept: float("intercept")?, slope: float("slope")? },
        "mlp" => DemandParams::Mlp(MlpParams {
            input_offset: float("input_offset")?,
            input_scale: float("input_scale")?,
            hidden_weights: array("hidden_weights")?,
            hidden_biases: array("hidden_biases")?,
            output_weights: array("output_weights")?,
            output_bias: float("output_bias")?,
        }),
        other => return Err(HarnessError::Config(format!("{source_name}: unknown model form {other:?}"))),
    };
    Ok(DemandModel::from_parts(kind, params, trained_on)?)
}
