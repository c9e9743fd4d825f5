use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::TrainingRecord;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PackMode {
    /// Segments attend across each other.
    Standard,
    /// Each segment attends only within itself.
    Neat,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub example_id: String,
    pub offset: usize,
    pub length: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pack {
    pub mode: PackMode,
    pub max_len: usize,
    pub segments: Vec<Segment>,
    pub total_length: usize,
}

/// Greedy order-preserving packing: a record joins the open pack if it
/// fits, otherwise it starts a new one. Records are never split.
pub fn pack(records: &[TrainingRecord], max_len: usize, mode: PackMode) -> Result<Vec<Pack>> {
    let mut packs: Vec<Pack> = Vec::new();
    for r in records {
        let length = r.token_length.ok_or_else(|| Error::MissingTokenLength(r.example_id.clone()))?;
        if length > max_len {
            return Err(Error::RecordTooLong {
                id: r.example_id.clone(),
                length,
                max_len,
            });
        }
        let fits = packs.last().is_some_and(|p| p.total_length + length <= max_len);
        if !fits {
            packs.push(Pack {
                mode,
                max_len,
                segments: Vec::new(),
                total_length: 0,
            });
        }
        let p = packs.last_mut().expect("a pack is open");
        p.segments.push(Segment {
            example_id: r.example_id.clone(),
            offset: p.total_length,
            length,
        });
        p.total_length += length;
    }
    Ok(packs)
}

/// Row-major `total_length x total_length` causal mask; `true` means
/// position `i` may attend to `j`. Neat packs are block-diagonal.
pub fn attention_mask(p: &Pack) -> Vec<Vec<bool>> {
    let n = p.total_length;
    let mut seg_of = vec![0; n];
    for (s, seg) in p.segments.iter().enumerate() {
        seg_of[seg.offset..seg.offset + seg.length].fill(s);
    }
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| j <= i && (p.mode == PackMode::Standard || seg_of[i] == seg_of[j]))
                .collect()
        })
        .collect()
}
