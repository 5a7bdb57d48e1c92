//! Flat `key=value` configuration files.
//!
//! One assignment per line; `#` starts a comment; list values are
//! comma-separated. Unknown keys are rejected.

use std::collections::BTreeMap;

use crate::als::AlsConfig;
use crate::error::{Error, Result};
use crate::vbi::{PruneRule, VbiConfig};

pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
        let k = k.trim().to_string();
        if out.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key {k}", lineno + 1)));
        }
    }
    Ok(out)
}

pub fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

pub fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

pub fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::Config(format!("{key}: expected a boolean, got {other:?}"))),
    }
}

/// Applies one key to a VBI config. Returns `false` if the key is not a VBI key.
pub fn apply_vbi_key(cfg: &mut VbiConfig, key: &str, v: &str) -> Result<bool> {
    match key {
        "r_init" => cfg.r_init = Some(parse_value(key, v)?),
        "max_iters" => cfg.max_iters = parse_value(key, v)?,
        "tol" => cfg.tol = parse_value(key, v)?,
        "patience" => cfg.patience = parse_value(key, v)?,
        "prune_threshold" => cfg.prune_threshold = parse_value(key, v)?,
        "prune_rule" => {
            cfg.prune_rule = match v.trim() {
                "power" => PruneRule::Power,
                "lambda" => PruneRule::Lambda,
                other => return Err(Error::Config(format!("prune_rule: unknown rule {other:?}"))),
            }
        }
        "burn_in" => cfg.burn_in = parse_value(key, v)?,
        "seed" => cfg.seed = parse_value(key, v)?,
        "priors.a" => cfg.priors.a = parse_value(key, v)?,
        "priors.b" => cfg.priors.b = parse_value(key, v)?,
        "priors.c" => cfg.priors.c = parse_value(key, v)?,
        "priors.d" => cfg.priors.d = parse_value(key, v)?,
        "init_snr" => cfg.init_snr = Some(parse_value(key, v)?),
        "overwrite_observed" => cfg.overwrite_observed = parse_bool(key, v)?,
        _ => return Ok(false),
    }
    Ok(true)
}

/// Applies one key to an ALS config. Returns `false` if the key is not an ALS key.
pub fn apply_als_key(cfg: &mut AlsConfig, key: &str, v: &str) -> Result<bool> {
    match key {
        "max_iters" => cfg.max_iters = parse_value(key, v)?,
        "tol" => cfg.tol = parse_value(key, v)?,
        "ridge" => cfg.ridge = parse_value(key, v)?,
        "seed" => cfg.seed = parse_value(key, v)?,
        _ => return Ok(false),
    }
    Ok(true)
}

/// Reads a VBI config file; `ranks` and `ridge` are accepted and ignored so
/// one file can drive both methods.
pub fn vbi_config_from_str(text: &str) -> Result<VbiConfig> {
    let mut cfg = VbiConfig::default();
    for (k, v) in parse_kv(text)? {
        if !apply_vbi_key(&mut cfg, &k, &v)? && k != "ranks" && k != "ridge" {
            return Err(Error::Config(format!("unknown key {k}")));
        }
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_vbi_config() {
        let cfg = vbi_config_from_str(
            "# comment\nr_init = 6\nmax_iters=50\npriors.a=1e-6\nprune_rule = lambda\noverwrite_observed=false\n",
        )
        .unwrap();
        assert_eq!(cfg.r_init, Some(6));
        assert_eq!(cfg.max_iters, 50);
        assert_eq!(cfg.priors.a, 1e-6);
        assert_eq!(cfg.prune_rule, PruneRule::Lambda);
        assert!(!cfg.overwrite_observed);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(vbi_config_from_str("bogus=1").is_err());
        assert!(vbi_config_from_str("r_init").is_err());
        assert!(vbi_config_from_str("r_init=x").is_err());
        assert!(parse_kv("a=1\na=2").is_err());
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list::<f64>("mr", "0.1, 0.3,0.5").unwrap(), vec![0.1, 0.3, 0.5]);
        assert!(parse_list::<usize>("dims", "").unwrap().is_empty());
    }
}
