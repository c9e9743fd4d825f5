use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use super::config::{BackendSpec, RunConfig};
use crate::backend::{Backend, DecodeParams};
use crate::error::Result;
use crate::inference::{classify_all, classify_all_ppl, ParseOptions, ScoringScope};
use crate::metrics::evaluate;
use crate::prompt::{ParseMode, Phase, PromptBuilder, PromptTemplates, ShotContext, Strategy};
use crate::retrieval::{load_embeddings, EmbeddingStore};
use crate::selection::ShotSelector;
use crate::types::{validate_dataset, validate_schema, Dataset, LabelSchema, MatchConfig, MetricsReport, Prediction, Split};

/// Loaded and validated run inputs.
#[derive(Debug)]
pub struct Inputs {
    pub train: Dataset,
    pub test: Dataset,
    pub builder: PromptBuilder,
    pub embeddings: Option<(EmbeddingStore, HashMap<String, Vec<f64>>)>,
}

impl Inputs {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let schema = LabelSchema::load(&cfg.schema)?;
        validate_schema(&schema).into_result("schema")?;
        let train = Dataset::load(&cfg.train, Split::Train)?;
        let test = Dataset::load(&cfg.test, Split::Test)?;
        validate_dataset(&train, &schema).into_result("train set")?;
        validate_dataset(&test, &schema).into_result("test set")?;
        let templates = PromptTemplates::load(&cfg.templates)?;
        let embeddings = match &cfg.embeddings {
            Some(p) => {
                let vectors = load_embeddings(p)?;
                Some((EmbeddingStore::for_dataset(&train, &vectors)?, vectors))
            }
            None => None,
        };
        Ok(Self {
            train,
            test,
            builder: PromptBuilder::new(schema, templates),
            embeddings,
        })
    }

    pub fn schema(&self) -> &LabelSchema {
        &self.builder.schema
    }

    pub fn selector(&self, seed: u64, fixed_ids: Option<&[String]>) -> Result<ShotSelector<'_>> {
        let sel = ShotSelector::new(&self.train, seed, fixed_ids)?;
        Ok(match &self.embeddings {
            Some((store, vectors)) => sel.with_retrieval(store, vectors),
            None => sel,
        })
    }
}

/// What was needed to produce one set of predictions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceManifest {
    pub infer_strategy: Strategy,
    pub seed: u64,
    pub backend_id: String,
    pub parse_mode: ParseMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decode: Option<DecodeParams>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fixed_shot_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ppl_scoring: Option<ScoringScope>,
    pub parallelism: usize,
    pub matching: MatchConfig,
}

/// Classifies every test example under `strategy`.
pub async fn run_inference(
    inputs: &Inputs,
    backend: &dyn Backend,
    strategy: Strategy,
    seed: u64,
    fixed_ids: Option<&[String]>,
    parallelism: usize,
    matching: MatchConfig,
) -> Result<(Vec<Prediction>, InferenceManifest)> {
    let selector = inputs.selector(seed, fixed_ids)?;
    let mut manifest = InferenceManifest {
        infer_strategy: strategy,
        seed,
        backend_id: backend.id().to_string(),
        parse_mode: strategy.parse_mode(),
        decode: None,
        fixed_shot_ids: if strategy == Strategy::Fixed3Shot {
            selector.fixed_ids()
        } else {
            Vec::new()
        },
        ppl_scoring: None,
        parallelism,
        matching,
    };
    let schema = inputs.schema();
    if strategy == Strategy::Ppl {
        let items = inputs
            .test
            .examples
            .iter()
            .map(|ex| {
                let p = inputs.builder.render(strategy, ex, &ShotContext::none(), Phase::Inference)?;
                Ok((ex.id.clone(), p.text))
            })
            .collect::<Result<Vec<_>>>()?;
        let (preds, scope) = classify_all_ppl(backend, &items, schema, parallelism).await?;
        manifest.ppl_scoring = scope;
        return Ok((preds, manifest));
    }
    let prompts = inputs
        .test
        .examples
        .iter()
        .map(|ex| {
            let ctx = selector.context(strategy, ex)?;
            inputs.builder.render(strategy, ex, &ctx, Phase::Inference)
        })
        .collect::<Result<Vec<_>>>()?;
    let params = DecodeParams::for_mode(strategy.parse_mode(), Some(seed));
    let opts = ParseOptions {
        matching,
        allow_uncertain: false,
    };
    let preds = classify_all(backend, &prompts, schema, &params, opts, parallelism).await?;
    manifest.decode = Some(params);
    Ok((preds, manifest))
}

/// Inputs shared by every cell, recorded so a cell can be rerun alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataManifest {
    pub train: PathBuf,
    pub test: PathBuf,
    pub schema: PathBuf,
    pub templates: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellManifest {
    pub train_strategy: Strategy,
    pub backend: BackendSpec,
    pub data: DataManifest,
    /// Absent when the cell failed before inference finished.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inference: Option<InferenceManifest>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub train_strategy: Strategy,
    pub infer_strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub manifest: CellManifest,
    #[serde(skip)]
    pub predictions: Vec<Prediction>,
}

/// Row-major grid of cells: all inference strategies of the first
/// training strategy, then the next.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixResult {
    pub train_strategies: Vec<Strategy>,
    pub infer_strategies: Vec<Strategy>,
    pub cells: Vec<Cell>,
}

impl MatrixResult {
    pub fn cell(&self, train: Strategy, infer: Strategy) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.train_strategy == train && c.infer_strategy == infer)
    }

    pub fn n_failed(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }

    /// 0 when every cell succeeded, 3 when some failed, 4 when all failed.
    pub fn exit_code(&self) -> i32 {
        match self.n_failed() {
            0 => 0,
            n if n == self.cells.len() => 4,
            _ => 3,
        }
    }
}

/// Runs every (training, inference) pair. Config and input errors abort;
/// failures inside a cell are recorded on that cell.
pub async fn run_matrix(cfg: &RunConfig) -> Result<MatrixResult> {
    cfg.validate()?;
    let inputs = Inputs::load(cfg)?;
    let data = DataManifest {
        train: cfg.train.clone(),
        test: cfg.test.clone(),
        schema: cfg.schema.clone(),
        templates: cfg.templates.clone(),
        embeddings: cfg.embeddings.clone(),
    };

    let mut backends: HashMap<Strategy, std::result::Result<Arc<dyn Backend>, String>> = HashMap::new();
    for &t in &cfg.train_strategies {
        let spec = cfg.backend_spec(t).expect("validated");
        backends.insert(t, spec.build(t.as_str()).map_err(|e| e.to_string()));
    }

    let pairs: Vec<(Strategy, Strategy)> = cfg
        .train_strategies
        .iter()
        .flat_map(|&t| cfg.infer_strategies.iter().map(move |&i| (t, i)))
        .collect();
    let inputs = &inputs;
    let backends = &backends;
    let data = &data;
    let cells = stream::iter(pairs)
        .map(|(t, i)| async move {
            let mut manifest = CellManifest {
                train_strategy: t,
                backend: cfg.backend_spec(t).expect("validated").clone(),
                data: data.clone(),
                inference: None,
            };
            let outcome = match &backends[&t] {
                Ok(backend) => {
                    run_cell(inputs, backend.as_ref(), i, cfg, &mut manifest).await.map_err(|e| e.to_string())
                }
                Err(e) => Err(e.clone()),
            };
            let (metrics, error, predictions) = match outcome {
                Ok((m, p)) => (Some(m), None, p),
                Err(e) => (None, Some(e), Vec::new()),
            };
            Cell {
                train_strategy: t,
                infer_strategy: i,
                metrics,
                error,
                manifest,
                predictions,
            }
        })
        .buffered(cfg.cell_parallelism.max(1))
        .collect()
        .await;

    Ok(MatrixResult {
        train_strategies: cfg.train_strategies.clone(),
        infer_strategies: cfg.infer_strategies.clone(),
        cells,
    })
}

async fn run_cell(
    inputs: &Inputs,
    backend: &dyn Backend,
    infer: Strategy,
    cfg: &RunConfig,
    manifest: &mut CellManifest,
) -> Result<(MetricsReport, Vec<Prediction>)> {
    let (preds, inf) = run_inference(
        inputs,
        backend,
        infer,
        cfg.seed,
        cfg.fixed_shot_ids.as_deref(),
        cfg.parallelism,
        cfg.matching,
    )
    .await?;
    manifest.inference = Some(inf);
    let metrics = evaluate(&preds, &inputs.test, inputs.schema(), cfg.matching)?;
    Ok((metrics, preds))
}
