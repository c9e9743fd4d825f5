//! Per-example shot contexts for every strategy.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::prompt::{derive_seed, sample_shots, select_fixed_shots, ShotContext, ShotSource, Strategy};
use crate::retrieval::EmbeddingStore;
use crate::types::{Dataset, Example};

/// Chooses exemplars from a training set.
///
/// Random shots are drawn with a seed derived from the run seed and the
/// target id, so a record's shots do not depend on corpus order. Fixed shots
/// are the configured ids, or three ids drawn once from the run seed. The
/// target example never appears among its own random or similar shots.
#[derive(Clone, Debug)]
pub struct ShotSelector<'a> {
    train: &'a Dataset,
    seed: u64,
    fixed: ShotContext,
    retrieval: Option<(&'a EmbeddingStore, &'a HashMap<String, Vec<f64>>)>,
}

impl<'a> ShotSelector<'a> {
    pub fn new(train: &'a Dataset, seed: u64, fixed_ids: Option<&[String]>) -> Result<Self> {
        let fixed = match fixed_ids {
            Some(ids) => select_fixed_shots(train, ids)?,
            None if train.len() >= 3 => ShotContext {
                source: ShotSource::Fixed,
                ..sample_shots(train, 3, seed, None)?
            },
            None => ShotContext::none(),
        };
        Ok(Self {
            train,
            seed,
            fixed,
            retrieval: None,
        })
    }

    /// Enables similar-shot retrieval. `queries` maps example ids (of any
    /// split) to their embedding vectors.
    pub fn with_retrieval(mut self, store: &'a EmbeddingStore, queries: &'a HashMap<String, Vec<f64>>) -> Self {
        self.retrieval = Some((store, queries));
        self
    }

    pub fn fixed_ids(&self) -> Vec<String> {
        self.fixed.ids().into_iter().map(str::to_string).collect()
    }

    pub fn context(&self, strategy: Strategy, example: &Example) -> Result<ShotContext> {
        let n = strategy.shot_count();
        match strategy.shot_source() {
            ShotSource::None => Ok(ShotContext::none()),
            ShotSource::Random => sample_shots(self.train, n, derive_seed(self.seed, &example.id), Some(&example.id)),
            ShotSource::Fixed => {
                if self.fixed.len() != n {
                    return Err(Error::InsufficientExamples {
                        requested: n,
                        available: self.fixed.len(),
                    });
                }
                Ok(self.fixed.clone())
            }
            ShotSource::Retrieved => {
                let (store, queries) = self
                    .retrieval
                    .ok_or_else(|| Error::Invalid(format!("strategy `{strategy}` needs embeddings")))?;
                let query = queries
                    .get(&example.id)
                    .ok_or_else(|| Error::MissingEmbedding(example.id.clone()))?;
                let index = self.train.index();
                let shots = store
                    .top_k(query, n, Some(&example.id))?
                    .into_iter()
                    .map(|(id, _)| index.get(id.as_str()).map(|e| (*e).clone()).ok_or(Error::UnknownId(id)))
                    .collect::<Result<_>>()?;
                Ok(ShotContext {
                    shots,
                    source: ShotSource::Retrieved,
                })
            }
        }
    }
}
