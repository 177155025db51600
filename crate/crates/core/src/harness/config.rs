use std::path::PathBuf;

use serde_json::{Map, Value};

use super::ExperimentSpec;
use crate::error::{Error, Result};

/// Keys a config document may carry next to the experiment fields.
pub const GLOBAL_KEYS: [&str; 3] = ["workers", "verbose", "output"];

/// An experiment plus the options that only affect how it is run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub spec: ExperimentSpec,
    pub workers: Option<usize>,
    pub verbose: bool,
    pub output: Option<PathBuf>,
}

/// Parses a JSON config document, applies `key=value` overrides and
/// validates the result. Dotted keys reach into nested objects
/// (`family.gamma=0.8`); values are read as JSON and fall back to plain
/// strings, so `algorithms=["qavg"]` and `kind=e_sweep` both work.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut doc: Value = serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    for item in overrides {
        apply_override(&mut doc, item)?;
    }
    let Value::Object(mut map) = doc else {
        return Err(Error::Config("config must be a JSON object".into()));
    };

    let workers = match map.remove("workers") {
        None | Some(Value::Null) => None,
        Some(v) => Some(v.as_u64().ok_or_else(|| {
            Error::Config(format!(
                "key `workers`: expected a non-negative integer, got {v}"
            ))
        })? as usize),
    };
    let verbose = match map.remove("verbose") {
        None | Some(Value::Null) => false,
        Some(Value::Bool(b)) => b,
        Some(v) => {
            return Err(Error::Config(format!(
                "key `verbose`: expected a boolean, got {v}"
            )))
        }
    };
    let output = match map.remove("output") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(v) => {
            return Err(Error::Config(format!(
                "key `output`: expected a path string, got {v}"
            )))
        }
    };

    let spec: ExperimentSpec =
        serde_json::from_value(Value::Object(map)).map_err(|e| Error::Config(e.to_string()))?;
    spec.validate()?;
    Ok(RunConfig {
        spec,
        workers,
        verbose,
        output,
    })
}

fn apply_override(doc: &mut Value, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{item}` is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("override `{item}` has an empty key")));
    }
    let value =
        serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().expect("nonempty key");
    let mut node = doc;
    for part in parts {
        let Value::Object(map) = node else {
            return Err(Error::Config(format!(
                "override `{key}`: `{part}` is not inside an object"
            )));
        };
        node = map
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    match node {
        Value::Object(map) => {
            map.insert(leaf.to_string(), value);
            Ok(())
        }
        _ => Err(Error::Config(format!(
            "override `{key}`: parent is not an object"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algo::{Algorithm, LocalUpdates};
    use crate::harness::{ExperimentKind, Family};

    #[test]
    fn globals_are_split_off() {
        let cfg = parse_config(
            r#"{"kind": "e_sweep", "workers": 3, "verbose": true, "output": "out/x", "num_task_seeds": 4}"#,
            &[],
        )
        .unwrap();
        assert_eq!(cfg.workers, Some(3));
        assert!(cfg.verbose);
        assert_eq!(cfg.output, Some(PathBuf::from("out/x")));
        assert_eq!(cfg.spec.num_task_seeds, 4);
        assert_eq!(cfg.spec.kind, ExperimentKind::ESweep);
    }

    #[test]
    fn overrides_win() {
        let text = r#"{"kind": "kappa_sweep", "kappa_list": [0], "num_task_seeds": 50}"#;
        let overrides = [
            "num_task_seeds=5".to_string(),
            "algorithms=[\"softpavg\", \"qavg\"]".to_string(),
            "e_list=[2, \"inf\"]".to_string(),
            "family.gamma=0.8".to_string(),
            "family.type=random_mdp".to_string(),
            "name=sweep_a".to_string(),
        ];
        let cfg = parse_config(text, &overrides).unwrap();
        assert_eq!(cfg.spec.num_task_seeds, 5);
        assert_eq!(
            cfg.spec.algorithms,
            vec![Algorithm::SoftPavg, Algorithm::Qavg]
        );
        assert_eq!(
            cfg.spec.e_list,
            vec![LocalUpdates::Every(2), LocalUpdates::Infinite]
        );
        assert!(matches!(cfg.spec.family, Family::RandomMdp { gamma, .. } if gamma == 0.8));
        assert_eq!(cfg.spec.experiment_name(), "sweep_a");
    }

    #[test]
    fn errors_point_at_the_problem() {
        let err = parse_config("{\n  \"kind\": \"e_sweep\",\n  oops\n}", &[])
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 3"), "{err}");
        let err = parse_config(r#"{"kind": "e_sweep", "foo": 1}"#, &[])
            .unwrap_err()
            .to_string();
        assert!(err.contains("`foo`"), "{err}");
        let err = parse_config(r#"{"kind": "e_sweep", "workers": "many"}"#, &[])
            .unwrap_err()
            .to_string();
        assert!(err.contains("workers"), "{err}");
        assert!(parse_config(r#"{"kind": "e_sweep"}"#, &["novalue".to_string()]).is_err());
        assert!(parse_config(r#"{"kind": "e_sweep", "n": 1}"#, &["n.x=1".to_string()]).is_err());
        assert!(matches!(
            parse_config(r#"{"kind": "e_sweep", "num_task_seeds": 0}"#, &[]),
            Err(Error::Config(_))
        ));
    }
}
