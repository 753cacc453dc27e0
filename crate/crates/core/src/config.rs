//! Line-oriented configuration: `[section]` headers and `key = value` lines,
//! `#` comments. Keys are addressed as `section.key`; `--set` overrides use the
//! same form.
//!
//! ```text
//! [data]
//! source = synthetic          # or: dir
//! dir = data/pair
//!
//! [generator]
//! signal_strength = 1.0
//! source_posts = [10, 20]
//!
//! [features]
//! variant = crmp
//! feature_set = heterogeneous
//! se = with
//! exclude_self = true
//!
//! [experiment]
//! gamma_A = 0.8
//! gamma_T = 1.0
//! folds = 5
//! seeds = 0:9
//!
//! [classifier]
//! c = 1.0
//! loss = hinge
//! ```
//!
//! `[generator]` and `[classifier]` accept any field of
//! [`GeneratorConfig`] / [`TrainOptions`], with JSON literal values.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::classifier::TrainOptions;
use crate::error::{Error, Result};
use crate::eval::{DataSource, ExperimentConfig, GridPoint};
use crate::features::FeatureSpec;
use crate::syngen::GeneratorConfig;

const SECTIONS: [&str; 5] = ["data", "generator", "features", "experiment", "classifier"];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

fn check_key(key: &str) -> Result<()> {
    match key.split_once('.') {
        Some((section, name)) if SECTIONS.contains(&section) && !name.is_empty() => Ok(()),
        _ => Err(Error::Config(format!(
            "key `{key}` must be `<section>.<name>` with section one of {}",
            SECTIONS.join(", ")
        ))),
    }
}

impl Config {
    pub fn parse(text: &str, origin: &Path) -> Result<Config> {
        let mut entries = BTreeMap::new();
        let mut section: Option<String> = None;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(Error::parse(origin, no + 1, format!("unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, no + 1, "expected `key = value`"))?;
            let sec = section
                .as_deref()
                .ok_or_else(|| Error::parse(origin, no + 1, "key outside any [section]"))?;
            entries.insert(format!("{sec}.{}", key.trim()), value.trim().to_string());
        }
        Ok(Config { entries })
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::parse(&text, path)
    }

    /// Apply `section.key=value`.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` must be `section.key=value`")))?;
        let key = key.trim();
        check_key(key)?;
        self.entries.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Config(format!("bad value `{v}` for {key}")))
            })
            .transpose()
    }

    fn section(&self, name: &str) -> BTreeMap<&str, &str> {
        self.entries
            .iter()
            .filter_map(|(k, v)| {
                let (s, key) = k.split_once('.')?;
                (s == name).then_some((key, v.as_str()))
            })
            .collect()
    }

    /// Canonical text form, sorted by section then key.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for sec in SECTIONS {
            let entries = self.section(sec);
            if entries.is_empty() {
                continue;
            }
            writeln!(out, "[{sec}]").unwrap();
            for (k, v) in entries {
                writeln!(out, "{k} = {v}").unwrap();
            }
        }
        out
    }

    pub fn generator(&self) -> Result<GeneratorConfig> {
        overlay(&GeneratorConfig::default(), &self.section("generator"), "generator")
    }

    pub fn train_options(&self) -> Result<TrainOptions> {
        overlay(&TrainOptions::default(), &self.section("classifier"), "classifier")
    }

    pub fn feature_spec(&self) -> Result<FeatureSpec> {
        let mut spec = FeatureSpec::default();
        for (key, value) in self.section("features") {
            let full = format!("features.{key}");
            match key {
                "variant" => spec.variant = value.parse()?,
                "feature_set" => spec.feature_set = value.parse()?,
                "se" => {
                    spec.similarity_extension = match value {
                        "with" | "true" => true,
                        "without" | "false" => false,
                        _ => return Err(Error::Config(format!("{full} must be with|without, got `{value}`"))),
                    }
                }
                "exclude_self" => spec.exclude_self = self.parsed(&full)?.unwrap(),
                _ => return Err(Error::Config(format!("unknown key `{full}`"))),
            }
        }
        Ok(spec)
    }

    /// Resolve the full experiment description. Command-line flags such as
    /// `--data` are expected to have been folded in with [`set`](Self::set).
    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        let data = self.section("data");
        for key in data.keys() {
            if !["source", "dir", "max_edges_per_link"].contains(key) {
                return Err(Error::Config(format!("unknown key `data.{key}`")));
            }
        }
        let source = data
            .get("source")
            .copied()
            .unwrap_or(if data.contains_key("dir") { "dir" } else { "synthetic" });
        cfg.data = match source {
            "synthetic" => DataSource::Synthetic(self.generator()?),
            "dir" => DataSource::Directory {
                path: PathBuf::from(
                    data.get("dir")
                        .ok_or_else(|| Error::Config("data.source = dir needs data.dir".into()))?,
                ),
                max_edges_per_link: self.parsed("data.max_edges_per_link")?,
            },
            other => return Err(Error::Config(format!("data.source must be synthetic|dir, got `{other}`"))),
        };
        cfg.point = GridPoint {
            spec: self.feature_spec()?,
            ..GridPoint::default()
        };
        for (key, value) in self.section("experiment") {
            let full = format!("experiment.{key}");
            match key {
                "gamma_A" | "gamma_a" => cfg.point.gamma_a = self.parsed(&full)?.unwrap(),
                "gamma_T" | "gamma_t" => cfg.point.gamma_t = self.parsed(&full)?.unwrap(),
                "folds" => cfg.folds = self.parsed(&full)?.unwrap(),
                "negative_cap" => cfg.negative_cap = self.parsed(&full)?,
                "seeds" => cfg.seeds = parse_seeds(value)?,
                _ => return Err(Error::Config(format!("unknown key `{full}`"))),
            }
        }
        cfg.train = self.train_options()?;
        cfg.point.validate().map_err(|e| Error::Config(e.to_string()))?;
        if cfg.folds < 2 {
            return Err(Error::Config(format!("experiment.folds = {} must be at least 2", cfg.folds)));
        }
        Ok(cfg)
    }
}

/// `3`, `0,4,7` or `0:9` (inclusive).
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("bad seed list `{text}`"));
    if let Some((a, b)) = text.split_once(':') {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

// Replace fields of `base` named in `section`, each value read as a JSON
// literal (bare words fall back to strings).
fn overlay<T: Serialize + DeserializeOwned>(base: &T, section: &BTreeMap<&str, &str>, name: &str) -> Result<T> {
    let mut value = serde_json::to_value(base)?;
    let obj = value.as_object_mut().expect("config structs serialize to objects");
    for (key, raw) in section {
        if !obj.contains_key(*key) {
            return Err(Error::Config(format!("unknown key `{name}.{key}`")));
        }
        let v = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        obj.insert(key.to_string(), v);
    }
    serde_json::from_value(value).map_err(|e| Error::Config(format!("[{name}]: {e}")))
}
