use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backend::{Backend, HttpBackend, HttpBackendConfig, MockBackend, MockScript};
use crate::error::{Error, Result};
use crate::jsonl;
use crate::prompt::Strategy;
use crate::types::MatchConfig;

/// A mock script given inline or as a path to a JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptSource {
    Path(PathBuf),
    Inline(MockScript),
}

/// One trained model, reachable as a backend.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendSpec {
    Mock { script: ScriptSource },
    Http(HttpBackendConfig),
}

impl BackendSpec {
    pub fn build(&self, id: &str) -> Result<Arc<dyn Backend>> {
        Ok(match self {
            BackendSpec::Mock { script } => {
                let script = match script {
                    ScriptSource::Path(p) => MockScript::load(p)?,
                    ScriptSource::Inline(s) => s.clone(),
                };
                Arc::new(MockBackend::new(id, script))
            }
            BackendSpec::Http(cfg) => Arc::new(HttpBackend::new(id, cfg.clone())?),
        })
    }

    fn resolve(&mut self, base: &Path) {
        if let BackendSpec::Mock {
            script: ScriptSource::Path(p),
        } = self
        {
            *p = base.join(&*p);
        }
    }
}

fn default_parallelism() -> usize {
    4
}
fn default_cell_parallelism() -> usize {
    1
}

/// Everything a matrix run needs. Relative paths are resolved against the
/// directory of the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub train: PathBuf,
    pub test: PathBuf,
    pub schema: PathBuf,
    pub templates: PathBuf,
    /// JSON Lines `{"id", "vector"}` for train and test examples; needed by
    /// `similar_3_shot`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    pub train_strategies: Vec<Strategy>,
    pub infer_strategies: Vec<Strategy>,
    /// Backend per training strategy name; `default_backend` covers the rest.
    #[serde(default)]
    pub backends: BTreeMap<String, BackendSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_backend: Option<BackendSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Cells run concurrently up to this limit; 1 runs them in order.
    #[serde(default = "default_cell_parallelism")]
    pub cell_parallelism: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_shot_ids: Option<Vec<String>>,
    #[serde(default)]
    pub matching: MatchConfig,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg: RunConfig = jsonl::read_json(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.train, &mut self.test, &mut self.schema, &mut self.templates, &mut self.out_dir] {
            *p = base.join(&*p);
        }
        if let Some(e) = &mut self.embeddings {
            *e = base.join(&*e);
        }
        for spec in self.backends.values_mut().chain(self.default_backend.as_mut()) {
            spec.resolve(base);
        }
    }

    pub fn backend_spec(&self, train: Strategy) -> Option<&BackendSpec> {
        self.backends.get(train.as_str()).or(self.default_backend.as_ref())
    }

    /// Checks everything that can be checked before any backend is called.
    pub fn validate(&self) -> Result<()> {
        if self.train_strategies.is_empty() || self.infer_strategies.is_empty() {
            return Err(Error::Invalid("strategy lists must not be empty".into()));
        }
        if let Some(s) = self.train_strategies.iter().find(|s| s.is_inference_only()) {
            return Err(Error::InferenceOnlyStrategy(s.to_string()));
        }
        if self.parallelism == 0 || self.cell_parallelism == 0 {
            return Err(Error::Invalid("parallelism must be at least 1".into()));
        }
        let mut paths = vec![&self.train, &self.test, &self.schema, &self.templates];
        paths.extend(self.embeddings.as_ref());
        if let Some(p) = paths.into_iter().find(|p| !p.exists()) {
            return Err(Error::Invalid(format!("path {} does not exist", p.display())));
        }
        if self.embeddings.is_none() && self.infer_strategies.contains(&Strategy::Similar3Shot) {
            return Err(Error::Invalid("similar_3_shot needs `embeddings`".into()));
        }
        for t in &self.train_strategies {
            match self.backend_spec(*t) {
                None => return Err(Error::Invalid(format!("no backend for training strategy `{t}`"))),
                Some(BackendSpec::Mock {
                    script: ScriptSource::Path(p),
                }) if !p.exists() => {
                    return Err(Error::Invalid(format!("mock script {} does not exist", p.display())))
                }
                Some(_) => {}
            }
        }
        for k in self.backends.keys() {
            k.parse::<Strategy>()?;
        }
        Ok(())
    }
}
