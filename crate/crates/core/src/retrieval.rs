//! Exact cosine top-k over an in-memory embedding store.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;
use crate::types::Dataset;

/// One line of an embedding file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub vector: Vec<f64>,
}

/// Reads an embedding file. The dimension of the first record is enforced on
/// every later one.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<HashMap<String, Vec<f64>>> {
    let records: Vec<EmbeddingRecord> = jsonl::read_jsonl(path)?;
    let mut out = HashMap::with_capacity(records.len());
    let mut dim = None;
    for r in records {
        let d = *dim.get_or_insert(r.vector.len());
        if r.vector.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: r.vector.len(),
            });
        }
        if out.insert(r.id.clone(), r.vector).is_some() {
            return Err(Error::DuplicateId(r.id));
        }
    }
    Ok(out)
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq)]
struct Entry {
    id: String,
    vector: Vec<f64>,
    norm: f64,
}

/// Immutable id → vector store. Entries are kept in ascending id order.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    entries: Vec<Entry>,
}

impl EmbeddingStore {
    pub fn new<I, S>(vectors: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut map = BTreeMap::new();
        let mut dim = None;
        for (id, vector) in vectors {
            let id = id.into();
            let d = *dim.get_or_insert(vector.len());
            if d == 0 {
                return Err(Error::Invalid("embedding dimension must be positive".into()));
            }
            if vector.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: vector.len(),
                });
            }
            if map.contains_key(&id) {
                return Err(Error::DuplicateId(id));
            }
            map.insert(id, vector);
        }
        let entries = map
            .into_iter()
            .map(|(id, vector)| {
                let n = norm(&vector);
                if n == 0.0 {
                    return Err(Error::ZeroVector);
                }
                Ok(Entry { id, vector, norm: n })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dim: dim.unwrap_or(0),
            entries,
        })
    }

    /// Builds a store over the training examples only; every training id
    /// must have a vector.
    pub fn for_dataset(train: &Dataset, vectors: &HashMap<String, Vec<f64>>) -> Result<Self> {
        let pairs = train
            .examples
            .iter()
            .map(|e| {
                vectors
                    .get(&e.id)
                    .map(|v| (e.id.clone(), v.clone()))
                    .ok_or_else(|| Error::MissingEmbedding(e.id.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(pairs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.binary_search_by(|e| e.id.as_str().cmp(id)).is_ok()
    }

    /// The `k` entries most cosine-similar to `query`, best first. Equal
    /// scores rank by ascending id; `exclude_id` is never returned.
    pub fn top_k(&self, query: &[f64], k: usize, exclude_id: Option<&str>) -> Result<Vec<(String, f64)>> {
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: query.len(),
            });
        }
        let qn = norm(query);
        if qn == 0.0 {
            return Err(Error::ZeroVector);
        }
        let excluded = exclude_id.is_some_and(|id| self.contains(id));
        let available = self.entries.len() - usize::from(excluded);
        if k > available {
            return Err(Error::InsufficientExamples {
                requested: k,
                available,
            });
        }

        let mut scored: Vec<(&str, f64)> = self
            .entries
            .iter()
            .filter(|e| Some(e.id.as_str()) != exclude_id)
            .map(|e| (e.id.as_str(), (dot(query, &e.vector) / (qn * e.norm)).clamp(-1.0, 1.0)))
            .collect();
        // Entries are id-sorted, so a stable sort on score alone keeps
        // ascending-id order among ties.
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal));
        scored.truncate(k);
        Ok(scored.into_iter().map(|(id, s)| (id.to_string(), s)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_hand_cases() {
        assert_eq!(cosine(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 2.0], &[2.0, 1.0]).unwrap() - 0.8).abs() < 1e-12);
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroVector)));
        assert!(matches!(cosine(&[1.0], &[1.0, 0.0]), Err(Error::DimensionMismatch { .. })));
    }

    fn abc() -> EmbeddingStore {
        EmbeddingStore::new([
            ("a", vec![1.0, 0.0]),
            ("b", vec![0.0, 1.0]),
            ("c", vec![1.0, 1.0]),
        ])
        .unwrap()
    }

    #[test]
    fn top_two() {
        let r = abc().top_k(&[1.0, 0.0], 2, None).unwrap();
        assert_eq!(r[0].0, "a");
        assert!((r[0].1 - 1.0).abs() < 1e-12);
        assert_eq!(r[1].0, "c");
        assert!((r[1].1 - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-4);
    }

    #[test]
    fn full_ranking_is_a_permutation() {
        let mut ids: Vec<_> = abc().top_k(&[0.3, 0.7], 3, None).unwrap().into_iter().map(|p| p.0).collect();
        ids.sort();
        assert_eq!(ids, vec!["a", "b", "c"]);
    }

    #[test]
    fn ties_go_to_smaller_id() {
        let s = EmbeddingStore::new([("z", vec![1.0, 2.0]), ("m", vec![1.0, 2.0]), ("q", vec![-1.0, 0.0])]).unwrap();
        assert_eq!(s.top_k(&[1.0, 1.0], 1, None).unwrap()[0].0, "m");
    }

    #[test]
    fn exclusion_and_capacity() {
        let s = abc();
        let r = s.top_k(&[1.0, 0.0], 2, Some("a")).unwrap();
        assert_eq!(r.iter().map(|p| p.0.as_str()).collect::<Vec<_>>(), vec!["c", "b"]);
        assert!(matches!(
            s.top_k(&[1.0, 0.0], 3, Some("a")),
            Err(Error::InsufficientExamples { requested: 3, available: 2 })
        ));
        // Excluding an id that is not stored removes nothing.
        assert_eq!(s.top_k(&[1.0, 0.0], 3, Some("nope")).unwrap().len(), 3);
    }

    #[test]
    fn store_rejects_ragged_or_zero_vectors() {
        assert!(EmbeddingStore::new([("a", vec![1.0]), ("b", vec![1.0, 2.0])]).is_err());
        assert!(matches!(EmbeddingStore::new([("a", vec![0.0, 0.0])]), Err(Error::ZeroVector)));
    }
}
