use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::{Table, Value};

use crate::error::{Error, Result};

/// A TOML-backed experiment config. Every key has a default; a config file
/// and then `key=value` overrides are layered on top of the defaults.
pub trait ConfigFile: Serialize + DeserializeOwned + Default {
    fn validate(&self) -> Result<()> {
        Ok(())
    }
}

fn to_table<T: Serialize>(value: &T) -> Result<Table> {
    Table::try_from(value).map_err(|e| Error::Config(e.to_string()))
}

fn merge(base: &mut Table, layer: Table, prefix: &str) -> Result<()> {
    for (key, value) in layer {
        let name = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
        match (base.get_mut(&key), value) {
            (None, _) => return Err(Error::Config(format!("unknown config key `{name}`"))),
            (Some(Value::Table(inner)), Value::Table(layer)) => merge(inner, layer, &name)?,
            (Some(Value::Table(_)), _) => {
                return Err(Error::Config(format!("`{name}` is a table; set its fields as `{name}.<field>`")))
            }
            (Some(slot), value) => *slot = value,
        }
    }
    Ok(())
}

fn parse_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_owned()))
}

fn apply_override(table: &mut Table, text: &str) -> Result<()> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{text}` is not of the form key=value")))?;
    let key = key.trim();
    let mut path: Vec<&str> = key.split('.').collect();
    let last = path.pop().unwrap_or_default();
    let mut slot = &mut *table;
    for part in path {
        slot = match slot.get_mut(part) {
            Some(Value::Table(t)) => t,
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        };
    }
    match slot.get_mut(last) {
        Some(Value::Table(_)) | None => Err(Error::Config(format!("unknown config key `{key}`"))),
        Some(v) => {
            *v = parse_value(raw.trim());
            Ok(())
        }
    }
}

/// Defaults, then the file at `path`, then each `key=value` override.
pub fn load_config<T: ConfigFile>(path: Option<&Path>, overrides: &[String]) -> Result<T> {
    let mut table = to_table(&T::default())?;
    if let Some(path) = path {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let file: Table = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        merge(&mut table, file, "")?;
    }
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let cfg: T = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Every dotted key with its default, in declaration order.
pub fn config_keys<T: ConfigFile>() -> Vec<(String, String)> {
    fn walk(table: &Table, prefix: &str, out: &mut Vec<(String, String)>) {
        for (k, v) in table {
            let name = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            match v {
                Value::Table(t) => walk(t, &name, out),
                v => out.push((name, v.to_string())),
            }
        }
    }
    let mut out = Vec::new();
    if let Ok(t) = to_table(&T::default()) {
        walk(&t, "", &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    #[serde(deny_unknown_fields)]
    struct Inner {
        normalize: bool,
    }

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    #[serde(deny_unknown_fields)]
    struct Demo {
        seed: u64,
        taps: Vec<usize>,
        name: String,
        inner: Inner,
    }

    impl Default for Demo {
        fn default() -> Self {
            Self {
                seed: 1,
                taps: vec![2, 4],
                name: "er".into(),
                inner: Inner { normalize: false },
            }
        }
    }

    impl ConfigFile for Demo {}

    #[test]
    fn layering_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "seed = 9\n[inner]\nnormalize = true\n").unwrap();
        let cfg: Demo = load_config(Some(&path), &["taps=[3]".into(), "name=small_world".into()]).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.taps, vec![3]);
        assert_eq!(cfg.name, "small_world");
        assert!(cfg.inner.normalize);
        let cfg: Demo = load_config(Some(&path), &["inner.normalize=false".into(), "seed=2".into()]).unwrap();
        assert_eq!((cfg.seed, cfg.inner.normalize), (2, false));
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        for o in ["sed=3", "inner.x=1", "inner=1", "noequals"] {
            let err = load_config::<Demo>(None, &[o.to_string()]).unwrap_err();
            assert!(err.is_config_error(), "{o}: {err}");
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "seeds = 9\n").unwrap();
        assert!(load_config::<Demo>(Some(&path), &[]).unwrap_err().is_config_error());
        assert!(load_config::<Demo>(None, &["seed=\"x\"".into()]).unwrap_err().is_config_error());
    }

    #[test]
    fn keys_listed_with_defaults() {
        let keys = config_keys::<Demo>();
        assert!(keys.contains(&("inner.normalize".to_string(), "false".to_string())));
        assert!(keys.contains(&("taps".to_string(), "[2, 4]".to_string())));
    }
}
