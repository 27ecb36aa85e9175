//! Simulation settings from presets, configuration files and flags.
//!
//! Later sources win: case preset, then the configuration file, then
//! explicit command-line flags.

use std::path::Path;

use pcskew::sim::{Case, Method, ScoreDistribution, SimSpec};
use serde_json::Value;

use crate::error::CliError;

/// Partially specified simulation settings; `None` leaves the value alone.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimOverrides {
    /// `None` inside means `custom`.
    pub case: Option<Option<Case>>,
    pub d: Option<usize>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub s: Option<f64>,
    pub g: Option<f64>,
    pub beta: Option<f64>,
    pub distribution: Option<ScoreDistribution>,
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub alpha: Option<f64>,
    pub kn_alpha: Option<f64>,
    pub estimators: Option<Vec<Method>>,
    pub max_k: Option<usize>,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::config(format!("invalid value `{value}` for `{key}`")))
}

pub fn parse_case(value: &str) -> Result<Option<Case>, CliError> {
    if value.trim().eq_ignore_ascii_case("custom") {
        return Ok(None);
    }
    value.trim().parse::<Case>().map(Some).map_err(|e| CliError::config(e.to_string()))
}

pub fn parse_estimators(value: &str) -> Result<Vec<Method>, CliError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<Method>().map_err(|e| CliError::config(e.to_string())))
        .collect()
}

impl SimOverrides {
    /// Sets one key; accepts the JSON field names of the simulation config
    /// and the short flag names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        match key.as_str() {
            "kind" => {
                if value.trim() != "simulation" {
                    return Err(CliError::config(format!("config kind must be `simulation`, got `{value}`")));
                }
            }
            "case" => self.case = Some(parse_case(value)?),
            "d" => self.d = Some(parse(&key, value)?),
            "n" => self.n = Some(parse(&key, value)?),
            "m" => self.m = Some(parse(&key, value)?),
            "s" => self.s = Some(parse(&key, value)?),
            "g" => self.g = Some(parse(&key, value)?),
            "beta" => self.beta = Some(parse(&key, value)?),
            "dist" | "distribution" => {
                self.distribution = Some(value.trim().parse().map_err(|e: pcskew::sim::SimError| CliError::config(e.to_string()))?)
            }
            "seed" => self.seed = Some(parse(&key, value)?),
            "reps" | "replicates" => self.replicates = Some(parse(&key, value)?),
            "alpha" => self.alpha = Some(parse(&key, value)?),
            "kn_alpha" => self.kn_alpha = Some(parse(&key, value)?),
            "estimators" => self.estimators = Some(parse_estimators(value)?),
            "max_k" => {
                if !value.trim().eq_ignore_ascii_case("null") && !value.trim().eq_ignore_ascii_case("default") {
                    self.max_k = Some(parse(&key, value)?);
                }
            }
            other => return Err(CliError::config(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    /// `key = value` lines (`#` comments) or a JSON object with the same keys.
    pub fn parse_config(text: &str) -> Result<Self, CliError> {
        let mut out = SimOverrides::default();
        if text.trim_start().starts_with('{') {
            let map: serde_json::Map<String, Value> =
                serde_json::from_str(text).map_err(|e| CliError::config(format!("invalid JSON config: {e}")))?;
            for (key, value) in map {
                let text = match value {
                    Value::Null => "null".to_string(),
                    Value::String(s) => s,
                    Value::Array(items) => items
                        .iter()
                        .map(|v| v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string()))
                        .collect::<Vec<_>>()
                        .join(","),
                    other => other.to_string(),
                };
                out.set(&key, &text)?;
            }
            return Ok(out);
        }
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("config line {}: expected `key = value`", i + 1)))?;
            out.set(key, value)
                .map_err(|e| CliError::config(format!("config line {}: {}", i + 1, e.message)))?;
        }
        Ok(out)
    }

    pub fn read_config(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_config(&text)
    }

    /// `self` with every value set in `later` replaced.
    pub fn merged(mut self, later: &SimOverrides) -> Self {
        macro_rules! take {
            ($($f:ident),*) => {$( if later.$f.is_some() { self.$f = later.$f.clone(); } )*};
        }
        take!(case, d, n, m, s, g, beta, distribution, seed, replicates, alpha, kn_alpha, estimators, max_k);
        self
    }

    /// Builds the spec, with warnings for values that override a case preset.
    pub fn to_spec(&self) -> (SimSpec, Vec<String>) {
        let case = self.case.flatten().unwrap_or(Case::I);
        let mut spec = SimSpec::case(case, self.d.unwrap_or(2000), self.n.unwrap_or(100), self.m.unwrap_or(3));
        let mut warnings = Vec::new();
        if let Some(Some(case)) = self.case {
            let preset = case.parameters();
            let overridden: Vec<&str> = [
                ("s", self.s.is_some_and(|v| v != preset.0)),
                ("g", self.g.is_some_and(|v| v != preset.1)),
                ("beta", self.beta.is_some_and(|v| v != preset.2)),
                ("dist", self.distribution.is_some_and(|v| v != preset.3)),
            ]
            .into_iter()
            .filter_map(|(name, hit)| hit.then_some(name))
            .collect();
            if !overridden.is_empty() {
                warnings.push(format!("{} override the case {case:?} preset", overridden.join(", ")));
            }
        }
        if let Some(v) = self.s {
            spec.s = v;
        }
        if let Some(v) = self.g {
            spec.g = v;
        }
        if let Some(v) = self.beta {
            spec.beta = v;
        }
        if let Some(v) = self.distribution {
            spec.distribution = v;
        }
        if let Some(v) = self.seed {
            spec.seed = v;
        }
        if let Some(v) = self.replicates {
            spec.replicates = v;
        }
        if let Some(v) = self.alpha {
            spec.alpha = v;
        }
        if let Some(v) = self.kn_alpha {
            spec.kn_alpha = v;
        }
        if let Some(v) = &self.estimators {
            spec.estimators = v.clone();
        }
        spec.max_k = self.max_k;
        (spec, warnings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_and_json_agree() {
        let kv = SimOverrides::parse_config("case = IV\nd = 500 # dims\nn=40\nestimators = dagostino, kn\n").unwrap();
        let json = SimOverrides::parse_config(r#"{"case": "IV", "d": 500, "n": 40, "estimators": ["dagostino", "kritchman_nadler"]}"#)
            .unwrap();
        assert_eq!(kv, json);
        let (spec, warnings) = kv.to_spec();
        assert_eq!((spec.s, spec.g, spec.beta), (0.1, 0.5, 0.3));
        assert_eq!(spec.distribution, ScoreDistribution::StudentT3);
        assert!(warnings.is_empty());
    }

    #[test]
    fn spec_json_round_trips_through_config() {
        let mut spec = SimSpec::case(Case::II, 300, 30, 2);
        spec.seed = 99;
        spec.max_k = Some(12);
        let text = serde_json::to_string(&spec).unwrap();
        let (back, _) = SimOverrides::parse_config(&text).unwrap().to_spec();
        assert_eq!(back, spec);
    }

    #[test]
    fn flags_override_file() {
        let file = SimOverrides::parse_config("seed = 1\nreps = 10").unwrap();
        let flags = SimOverrides {
            seed: Some(5),
            ..Default::default()
        };
        let (spec, _) = file.merged(&flags).to_spec();
        assert_eq!((spec.seed, spec.replicates), (5, 10));
    }

    #[test]
    fn preset_override_warns() {
        let o = SimOverrides {
            case: Some(Some(Case::I)),
            beta: Some(0.3),
            ..Default::default()
        };
        let (spec, warnings) = o.to_spec();
        assert_eq!(spec.beta, 0.3);
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn bad_keys_rejected() {
        assert!(SimOverrides::parse_config("colour = red").is_err());
        assert!(SimOverrides::parse_config("d = many").is_err());
        assert!(SimOverrides::parse_config("just text").is_err());
    }
}
