//! Resolved run settings: command-line flags over config file over defaults.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use iteforest_core::{Error, Result};

pub struct Key {
    pub name: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const fn key(name: &'static str, default: Option<&'static str>, help: &'static str) -> Key {
    Key { name, default, help }
}

pub const SEED: Key = key("seed", Some("0"), "base random seed");

pub const ESTIMATOR_KEYS: &[Key] = &[
    key("trees", Some("1000"), "trees per forest"),
    key("mtry", Some("third"), "candidate variables per node: 'third' or a count"),
    key("nodesize", Some("3"), "minimum leaf size for vt, vti and cf"),
    key("bivariate_nodesize", Some("1"), "minimum leaf size for the bivariate forest"),
    key("iterations", Some("5"), "bivariate imputation iterations"),
    key("honest_nodesize", Some("1"), "minimum leaf size for the honest forest"),
    key("per_tree_split", Some("false"), "honest forest: redraw the half split per tree"),
    key("base_trees", Some("250"), "trees per synthetic base learner"),
    key("final_trees", Some("1000"), "trees in the final synthetic forest"),
    key("final_nodesize", Some("3"), "minimum leaf size of the final synthetic forest"),
    key("nodesize_grid", Some("1,2,3,4,5,6,7,8,9,10,20,30,50,100"), "synthetic base-learner nodesizes"),
    key("mtry_grid", Some("1,10,20"), "synthetic base-learner mtry values"),
];

pub const DATA_KEYS: &[Key] = &[
    key("data", None, "input data file (header + delimited values)"),
    key("schema", Some(""), "schema sidecar; defaults to <data>.schema"),
];

pub fn command_keys(command: &str) -> Vec<&'static Key> {
    const SIMULATE: &[Key] = &[
        key("model", Some("m1"), "simulation model: m1, m2 or m3"),
        key("n", Some("500"), "sample size"),
        key("sigma", Some("0.1"), "noise standard deviation"),
        key("replicate", Some("0"), "replicate index; the data seed is seed + replicate"),
        key("out", None, "output data file"),
    ];
    const ESTIMATE: &[Key] = &[
        key("method", Some("syncf"), "vt, vti, cf, syncf, bivariate or honest"),
        key("out", None, "output effect file, one value per line"),
    ];
    const BENCHMARK: &[Key] = &[
        key("models", Some("m1,m2,m3"), "simulation models"),
        key("estimators", Some("vt,vti,cf,syncf,bivariate,honest"), "estimators to compare"),
        key("n", Some("500"), "sample size"),
        key("replicates", Some("50"), "independent replicates per model"),
        key("strata", Some("20"), "propensity strata"),
        key("sigma", Some("0.1"), "noise standard deviation"),
        key("external_dir", Some(""), "directory of <model>_<replicate>.txt effect files"),
        key("out", None, "output directory"),
    ];
    const INFER: &[Key] = &[
        key("method", Some("syncf"), "effect estimator re-run on every subsample"),
        key("fraction", Some("0.1"), "subsample size as a fraction of n"),
        key("replicates", Some("1000"), "number of subsamples"),
        key("rescale", Some("true"), "scale replicate SDs by sqrt(m/n)"),
        key("response", Some("all"), "rows whose effects are regressed: all, treated or control"),
        key("regressors", Some("all"), "covariate names to regress on"),
        key("out", None, "output coefficient table"),
    ];
    const COPLOT: &[Key] = &[
        key("tau", None, "effect file, one value per line"),
        key("x", None, "x-axis variable"),
        key("panel", Some(""), "variable distinguishing groups within a panel"),
        key("vertical", None, "vertical conditioning variable"),
        key("horizontal", None, "horizontal conditioning variable"),
        key("bins_vertical", Some("4"), "vertical conditioning intervals"),
        key("bins_horizontal", Some("3"), "horizontal conditioning intervals"),
        key("overlap", Some("0"), "interval overlap fraction; 0 gives disjoint bins"),
        key("out", None, "output panel file"),
    ];
    let mut keys: Vec<&'static Key> = vec![&SEED];
    match command {
        "simulate" => keys.extend(SIMULATE),
        "estimate" => keys.extend(DATA_KEYS.iter().chain(ESTIMATE).chain(ESTIMATOR_KEYS)),
        "benchmark" => keys.extend(BENCHMARK.iter().chain(ESTIMATOR_KEYS)),
        "infer" => keys.extend(DATA_KEYS.iter().chain(INFER).chain(ESTIMATOR_KEYS)),
        "coplot" => keys.extend(DATA_KEYS.iter().chain(COPLOT)),
        _ => {}
    }
    keys
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Parses a flat `key = value` document. `#` starts a comment line.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_err(format!("config line {}: expected key = value", k + 1)))?;
        let key = key.trim().to_string();
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(config_err(format!("config line {}: duplicate key '{key}'", k + 1)));
        }
    }
    Ok(map)
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub command: String,
    values: BTreeMap<String, String>,
}

impl Settings {
    /// Merges flags over the config file over defaults, rejecting keys the
    /// command does not know.
    pub fn resolve(
        command: &str,
        flags: BTreeMap<String, String>,
        config: Option<&Path>,
    ) -> Result<Settings> {
        let keys = command_keys(command);
        let mut values = BTreeMap::new();
        for k in &keys {
            if let Some(d) = k.default {
                values.insert(k.name.to_string(), d.to_string());
            }
        }
        if let Some(path) = config {
            let text = fs::read_to_string(path)
                .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
            for (key, value) in parse_config(&text)? {
                if key == "command" {
                    if value != command {
                        return Err(config_err(format!(
                            "config is for command '{value}', not '{command}'"
                        )));
                    }
                    continue;
                }
                if key == "threads" {
                    continue;
                }
                if !keys.iter().any(|k| k.name == key) {
                    return Err(config_err(format!("unknown config key '{key}' for {command}")));
                }
                values.insert(key, value);
            }
        }
        values.extend(flags);
        for k in &keys {
            if !values.contains_key(k.name) {
                return Err(config_err(format!("missing required setting '{}'", k.name)));
            }
        }
        Ok(Settings {
            command: command.to_string(),
            values,
        })
    }

    pub fn str(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("setting '{key}' not declared"))
    }

    pub fn opt_str(&self, key: &str) -> Option<&str> {
        Some(self.str(key)).filter(|s| !s.is_empty())
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.str(key);
        v.parse()
            .map_err(|_| config_err(format!("invalid value '{v}' for '{key}'")))
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        match self.str(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            v => Err(config_err(format!("invalid boolean '{v}' for '{key}'"))),
        }
    }

    pub fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>> {
        self.str(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| config_err(format!("invalid list entry '{s}' for '{key}'")))
            })
            .collect()
    }

    /// The resolved settings as a config document that reproduces the run.
    pub fn manifest(&self) -> String {
        let mut s = format!(
            "# iteforest {} run manifest; replay with --config\ncommand = {}\n",
            env!("CARGO_PKG_VERSION"),
            self.command
        );
        for (k, v) in &self.values {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    pub fn write_manifest(&self, path: &Path) -> Result<()> {
        fs::write(path, self.manifest())?;
        Ok(())
    }
}
