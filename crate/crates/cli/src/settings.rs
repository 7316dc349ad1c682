//! Configuration layering: defaults, then the TOML file, then `QPMSEG_*`
//! environment variables, then command-line flags.

use std::path::Path;

use anyhow::{anyhow, Context};
use qpmseg::Config;
use serde::de::DeserializeOwned;
use serde::Serialize;

pub const ENV_PREFIX: &str = "QPMSEG_";

/// A configuration problem; reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(ConfigError(msg.into()))
}

/// Environment value as a TOML scalar, falling back to a plain string.
fn env_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()))
}

fn layered<T: Serialize + DeserializeOwned + Default>(
    file: Option<&Path>,
    env: impl IntoIterator<Item = (String, String)>,
    optional_keys: &[&str],
) -> anyhow::Result<T> {
    let mut table = match file {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str::<toml::Table>(&text).map_err(|e| config_err(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    let defaults = toml::Table::try_from(T::default()).map_err(|e| config_err(e.to_string()))?;
    for (key, value) in env {
        let Some(field) = key.strip_prefix(ENV_PREFIX) else { continue };
        let field = field.to_ascii_lowercase();
        if defaults.contains_key(&field) || optional_keys.contains(&field.as_str()) {
            log::debug!("{key} overrides {field}");
            table.insert(field, env_value(&value));
        }
    }
    toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| config_err(e.to_string()))
}

pub fn load_config(file: Option<&Path>, env: impl IntoIterator<Item = (String, String)>) -> anyhow::Result<Config> {
    let cfg: Config = layered(file, env, &["fallback_threshold"])?;
    cfg.validate().map_err(|e| config_err(e.to_string()))?;
    Ok(cfg)
}

pub fn load_toml<T: Serialize + DeserializeOwned + Default>(file: Option<&Path>) -> anyhow::Result<T> {
    layered(file, std::iter::empty(), &[])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults_without_file_or_env() {
        assert_eq!(load_config(None, env(&[])).unwrap(), Config::default());
    }

    #[test]
    fn env_overrides_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "r_min_um = 4.0\ngradient_factor = 3.0\n").unwrap();
        let cfg = load_config(
            Some(&p),
            env(&[("QPMSEG_R_MIN_UM", "5"), ("QPMSEG_PLAUSIBILITY_CHECKS", "false"), ("OTHER", "1")]),
        )
        .unwrap();
        assert_eq!(cfg.r_min_um, 5.0);
        assert_eq!(cfg.gradient_factor, 3.0);
        assert!(!cfg.plausibility_checks);
    }

    #[test]
    fn optional_field_from_env() {
        let cfg = load_config(None, env(&[("QPMSEG_FALLBACK_THRESHOLD", "0.2")])).unwrap();
        assert_eq!(cfg.fallback_threshold, Some(0.2));
    }

    #[test]
    fn unknown_file_key_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "r_min = 4.0\n").unwrap();
        let e = load_config(Some(&p), env(&[])).unwrap_err();
        assert!(e.downcast_ref::<ConfigError>().is_some());
    }

    #[test]
    fn invalid_value_is_a_config_error() {
        let e = load_config(None, env(&[("QPMSEG_GRADIENT_BOUNDARY_FRACTION", "1.5")])).unwrap_err();
        assert!(e.downcast_ref::<ConfigError>().is_some());
    }
}
