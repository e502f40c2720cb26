//! Flat `key = value` config files. Keys are the field names of
//! [`SynthConfig`](crate::synthdata::SynthConfig) and
//! [`RunConfig`](crate::pipeline::RunConfig); `seed` sets both seeds.

use std::path::Path;

use serde_json::{Map, Number, Value};

use crate::error::{Error, Result};
use crate::pipeline::ExperimentConfig;

fn scalar(raw: &str) -> Value {
    if let Ok(u) = raw.parse::<u64>() {
        return Value::Number(u.into());
    }
    if let Ok(i) = raw.parse::<i64>() {
        return Value::Number(i.into());
    }
    if let Some(n) = raw.parse::<f64>().ok().and_then(Number::from_f64) {
        return Value::Number(n);
    }
    let unquoted = raw.strip_prefix('"').and_then(|r| r.strip_suffix('"')).unwrap_or(raw);
    Value::String(unquoted.to_string())
}

fn as_object(v: serde_json::Result<Value>) -> Map<String, Value> {
    match v {
        Ok(Value::Object(m)) => m,
        _ => unreachable!("config structs serialise to objects"),
    }
}

/// Applies `key = value` lines on top of `base`. `#` starts a comment.
pub fn apply_config_text(base: &ExperimentConfig, text: &str, origin: &str) -> Result<ExperimentConfig> {
    let mut data = as_object(serde_json::to_value(&base.data));
    let mut run = as_object(serde_json::to_value(&base.run));
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, raw) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("{origin}:{}: expected 'key = value', got '{line}'", n + 1))
        })?;
        let (key, raw) = (key.trim(), raw.trim());
        let value = scalar(raw);
        let mut known = false;
        for map in [&mut data, &mut run] {
            if let Some(slot) = map.get_mut(key) {
                *slot = value.clone();
                known = true;
            }
        }
        if !known {
            return Err(Error::Config(format!("{origin}:{}: unknown config key '{key}'", n + 1)));
        }
    }
    let bad = |e: serde_json::Error| Error::Config(format!("{origin}: {e}"));
    let exp = ExperimentConfig {
        data: serde_json::from_value(Value::Object(data)).map_err(bad)?,
        run: serde_json::from_value(Value::Object(run)).map_err(bad)?,
    };
    exp.validate()?;
    Ok(exp)
}

pub fn read_config_file(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    apply_config_text(&ExperimentConfig::default(), &text, &path.display().to_string())
}
