//! Flat `key = value` run configuration.
//!
//! Keys are the serialized field names of a config struct; fields of nested
//! structs are addressed by their own name. `-` and `_` are interchangeable
//! in keys, `#` starts a comment and `none` clears an optional value.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub fn normalize_key(key: &str) -> String {
    key.trim().replace('-', "_")
}

pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: k + 1,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = normalize_key(key);
        if key.is_empty() {
            return Err(Error::Parse {
                line: k + 1,
                msg: "empty key".into(),
            });
        }
        if out.iter().any(|(existing, _)| *existing == key) {
            return Err(Error::Parse {
                line: k + 1,
                msg: format!("duplicate key `{key}`"),
            });
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

/// All settable keys of `config`, nested fields flattened.
pub fn config_keys<C: Serialize>(config: &C) -> Result<Vec<String>> {
    let value = serde_json::to_value(config)?;
    let mut keys = Vec::new();
    if let Value::Object(map) = value {
        for (k, v) in map {
            match v {
                Value::Object(inner) => keys.extend(inner.keys().cloned()),
                _ => keys.push(k),
            }
        }
    }
    Ok(keys)
}

fn convert(current: &Value, raw: &str, key: &str) -> Result<Value> {
    if raw.eq_ignore_ascii_case("none") {
        return Ok(Value::Null);
    }
    let bad = || Error::InvalidArgument(format!("invalid value `{raw}` for `{key}`"));
    Ok(match current {
        Value::Bool(_) => Value::Bool(raw.parse().map_err(|_| bad())?),
        Value::Number(n) if n.is_f64() => serde_json::Number::from_f64(raw.parse().map_err(|_| bad())?)
            .map(Value::Number)
            .ok_or_else(bad)?,
        Value::Number(_) => match raw.parse::<u64>() {
            Ok(u) => Value::from(u),
            Err(_) => serde_json::Number::from_f64(raw.parse().map_err(|_| bad())?)
                .map(Value::Number)
                .ok_or_else(bad)?,
        },
        Value::String(_) => Value::String(raw.to_string()),
        _ => serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string())),
    })
}

fn slot<'a>(map: &'a mut Map<String, Value>, key: &str) -> Option<&'a mut Value> {
    if map.contains_key(key) && !map[key].is_object() {
        return map.get_mut(key);
    }
    map.values_mut()
        .filter_map(|v| v.as_object_mut())
        .find_map(|inner| inner.get_mut(key))
}

/// `base` with each override applied in order; unknown keys are errors.
pub fn apply_overrides<C: Serialize + DeserializeOwned>(base: &C, overrides: &[(String, String)]) -> Result<C> {
    let mut value = serde_json::to_value(base)?;
    let map = value
        .as_object_mut()
        .ok_or_else(|| Error::InvalidArgument("config is not a struct".into()))?;
    for (key, raw) in overrides {
        let key = normalize_key(key);
        let target = slot(map, &key).ok_or_else(|| Error::InvalidArgument(format!("unknown config key `{key}`")))?;
        *target = convert(target, raw, &key)?;
    }
    serde_json::from_value(value).map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// Renders `config` in the file format, one key per line.
pub fn to_kv<C: Serialize>(config: &C) -> Result<String> {
    let value = serde_json::to_value(config)?;
    let mut flat = BTreeMap::new();
    if let Value::Object(map) = value {
        for (k, v) in map {
            match v {
                Value::Object(inner) => flat.extend(inner),
                other => {
                    flat.insert(k, other);
                }
            }
        }
    }
    let mut s = String::new();
    for (k, v) in flat {
        let text = match v {
            Value::Null => "none".to_string(),
            Value::String(s) => s,
            other => other.to_string(),
        };
        s.push_str(&format!("{k} = {text}\n"));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControlConfig;
    use crate::morph::{MorphCondition, MorphConfig};

    #[test]
    fn parse_lines() {
        let kv = parse_kv("# comment\nsteps = 10\n\nlearning-rate=0.01 # trailing\n").unwrap();
        assert_eq!(kv, vec![("steps".into(), "10".into()), ("learning_rate".into(), "0.01".into())]);
    }

    #[test]
    fn parse_errors_carry_line() {
        match parse_kv("steps = 1\nnonsense\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_kv("a = 1\na = 2\n").is_err());
        assert!(parse_kv(" = 2\n").is_err());
    }

    #[test]
    fn overrides_apply_by_type() {
        let cfg = apply_overrides(
            &MorphConfig::default(),
            &[
                ("steps".into(), "12".into()),
                ("condition".into(), "lr5".into()),
                ("learning-rate".into(), "0.5".into()),
                ("hub_count".into(), "3".into()),
                ("pattern".into(), "toy4".into()),
            ],
        )
        .unwrap();
        assert_eq!(cfg.steps, 12);
        assert_eq!(cfg.condition, MorphCondition::Lr5);
        assert_eq!(cfg.learning_rate, 0.5);
        assert_eq!(cfg.hub_count, Some(3));
        assert_eq!(cfg.pattern, "toy4");
        let cleared = apply_overrides(&cfg, &[("hub_count".into(), "none".into())]).unwrap();
        assert_eq!(cleared.hub_count, None);
    }

    #[test]
    fn unknown_and_bad_values_rejected() {
        let base = MorphConfig::default();
        assert!(apply_overrides(&base, &[("nope".into(), "1".into())]).is_err());
        assert!(apply_overrides(&base, &[("steps".into(), "ten".into())]).is_err());
        assert!(apply_overrides(&base, &[("condition".into(), "v7".into())]).is_err());
    }

    #[test]
    fn nested_env_keys() {
        let base = ControlConfig::default();
        let keys = config_keys(&base).unwrap();
        assert!(keys.contains(&"wind_power".to_string()));
        assert!(!keys.contains(&"env".to_string()));
        let cfg = apply_overrides(&base, &[("wind_power".into(), "0".into()), ("steps_per_action".into(), "2".into())]).unwrap();
        assert_eq!(cfg.env.wind_power, 0.0);
        assert_eq!(cfg.steps_per_action, 2);
    }

    #[test]
    fn kv_round_trip() {
        for text in [to_kv(&MorphConfig::default()).unwrap(), to_kv(&ControlConfig::default()).unwrap()] {
            let kv = parse_kv(&text).unwrap();
            let m = apply_overrides(&MorphConfig::default(), &kv);
            let c = apply_overrides(&ControlConfig::default(), &kv);
            assert!(m.is_ok() != c.is_ok());
        }
        let m = MorphConfig {
            steps: 7,
            hub_count: Some(2),
            ..MorphConfig::default()
        };
        let back = apply_overrides(&MorphConfig::default(), &parse_kv(&to_kv(&m).unwrap()).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
