use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Service;
use crate::builtin;
use crate::cache::{load_snapshot_file, CacheError};
use crate::env::{Environment, DEFAULT_MAX_TURNS};
use crate::reward::DEFAULT_LAMBDA;
use crate::schema::{Registry, RegistryError};
use crate::synth::read_dataset;
use crate::template::{load_templates_dir, TemplateError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("dataset {path}: {source}")]
    Dataset {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// Server settings. Every path is optional; missing ones fall back to the
/// bundled registry and the two bundled example episodes with their cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub cache_path: Option<PathBuf>,
    pub dataset_path: Option<PathBuf>,
    pub registry_path: Option<PathBuf>,
    /// Used to label samples that carry no logic type with their template's.
    pub templates_dir: Option<PathBuf>,
    pub lambda: f64,
    pub max_turns: usize,
    /// Picks the sample for a `reset` that names none.
    pub seed: u64,
    /// `stdio` or a TCP address such as `127.0.0.1:7878`.
    pub listen: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            cache_path: None,
            dataset_path: None,
            registry_path: None,
            templates_dir: None,
            lambda: DEFAULT_LAMBDA,
            max_turns: DEFAULT_MAX_TURNS,
            seed: 0,
            listen: "stdio".into(),
        }
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })
}

impl ServiceConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml_str(&read(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(ConfigError::Invalid(format!("lambda {} is outside [0, 1]", self.lambda)));
        }
        if self.max_turns == 0 {
            return Err(ConfigError::Invalid("max_turns must be at least 1".into()));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Service, ConfigError> {
        self.validate()?;
        let registry = match &self.registry_path {
            Some(p) => Registry::from_json(&read(p)?)?,
            None => builtin::registry(),
        };
        let mut samples = match &self.dataset_path {
            Some(p) => read_dataset(&read(p)?).map_err(|source| ConfigError::Dataset {
                path: p.display().to_string(),
                source,
            })?,
            None => vec![builtin::car_rental_sample(), builtin::montreal_sample()],
        };
        let store = match &self.cache_path {
            Some(p) => load_snapshot_file(p)?,
            None => builtin::fixture_cache(&samples)?,
        };
        if let Some(dir) = &self.templates_dir {
            let logic: HashMap<String, _> = load_templates_dir(dir)?
                .into_iter()
                .map(|t| (t.id, t.logic))
                .collect();
            for s in samples.iter_mut().filter(|s| s.logic.is_none()) {
                s.logic = logic.get(&s.provenance.template_id).copied().flatten();
            }
        }
        let env = Environment::new(Arc::new(store), Arc::new(registry));
        Ok(Service::new(env, samples, self.lambda, self.max_turns).with_seed(self.seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = ServiceConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ServiceConfig::default());
        let cfg = ServiceConfig::from_toml_str("lambda = 0.25\nmax_turns = 4\nlisten = \"127.0.0.1:0\"").unwrap();
        assert_eq!((cfg.lambda, cfg.max_turns, cfg.listen.as_str()), (0.25, 4, "127.0.0.1:0"));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ServiceConfig::from_toml_str("lambda = 1.5").is_err());
        assert!(ServiceConfig::from_toml_str("lambda = -0.1").is_err());
        assert!(ServiceConfig::from_toml_str("max_turns = 0").is_err());
        assert!(ServiceConfig::from_toml_str("bogus = 1").is_err());
        assert!(ServiceConfig::from_toml_str("lambda = \"x\"").is_err());
    }

    #[test]
    fn builds_from_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut car = builtin::car_rental_sample();
        car.logic = None;
        let ds = dir.path().join("d.jsonl");
        std::fs::write(&ds, crate::synth::dataset_bytes(&[car.clone()])).unwrap();
        let cache = dir.path().join("c.jsonl");
        let store = builtin::fixture_cache(&[car]).unwrap();
        std::fs::write(&cache, crate::cache::snapshot_string(&store)).unwrap();
        let tdir = dir.path().join("t");
        std::fs::create_dir(&tdir).unwrap();
        std::fs::write(
            tdir.join("car_rental_packages.json"),
            builtin::template("car_rental_packages").unwrap().serialize(),
        )
        .unwrap();
        let text = format!(
            "dataset_path = {:?}\ncache_path = {:?}\ntemplates_dir = {:?}\n",
            ds.display().to_string(),
            cache.display().to_string(),
            tdir.display().to_string()
        );
        let svc = ServiceConfig::from_toml_str(&text).unwrap().build().unwrap();
        assert_eq!(svc.samples().len(), 1);
        assert_eq!(svc.env().store().len(), 3);
        assert!(svc.samples()[0].logic.is_some());

        let missing = ServiceConfig {
            cache_path: Some(dir.path().join("nope")),
            ..Default::default()
        };
        assert!(missing.build().is_err());
    }
}
