//! Output parsers. Every parser is total: any input maps to a parse or to
//! `None` (format failure).

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::prompt::{ParseMode, CATEGORY_PREFIX};
use crate::types::{LabelSchema, MatchConfig};

/// Label-parsing knobs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseOptions {
    #[serde(default)]
    pub matching: MatchConfig,
    /// Accept the schema's uncertain label. Only training targets of the
    /// uncertainty strategy use it; at inference it is a format failure.
    #[serde(default)]
    pub allow_uncertain: bool,
}

/// A parsed label plus the byte range of its answer text in the output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedLabel {
    pub label: String,
    pub span: Range<usize>,
}

/// Parses the first line starting with `Category:`; later lines are ignored.
///
/// Text mode needs a schema label after the prefix; numeric mode needs an
/// in-range index, which maps back to its label.
pub fn parse_category(text: &str, schema: &LabelSchema, mode: ParseMode, opts: ParseOptions) -> Option<ParsedLabel> {
    let mut offset = 0;
    let line = text.split_inclusive('\n').find_map(|line| {
        let here = offset;
        offset += line.len();
        let lead = line.len() - line.trim_start().len();
        line[lead..].starts_with(CATEGORY_PREFIX).then_some((here + lead, line))
    });
    let (start, line) = line?;
    let after = start + CATEGORY_PREFIX.len();
    let line_end = start + line.trim_start().len();
    let payload_raw = &text[after..line_end];
    let payload = payload_raw.trim();
    let pstart = after + (payload_raw.len() - payload_raw.trim_start().len());
    let span = pstart..pstart + payload.len();

    let label = match mode {
        ParseMode::CategoryNumeric => {
            if payload.is_empty() || !payload.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            let idx: usize = payload.parse().ok()?;
            schema.label_for_numeric(idx)?.to_string()
        }
        _ => match schema.canonical(payload, opts.matching) {
            Some(l) => l.to_string(),
            None if opts.allow_uncertain && schema.is_uncertain(payload, opts.matching) => {
                schema.uncertain_label.as_deref()?.trim().to_string()
            }
            None => return None,
        },
    };
    Some(ParsedLabel { label, span })
}

/// A tag block in a structured answer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    Think,
    Reason,
    Answer,
}

impl Tag {
    pub const ALL: [Tag; 3] = [Tag::Think, Tag::Reason, Tag::Answer];

    pub fn name(self) -> &'static str {
        match self {
            Tag::Think => "think",
            Tag::Reason => "reason",
            Tag::Answer => "answer",
        }
    }

    pub fn open(self) -> String {
        format!("<{}>", self.name())
    }

    pub fn close(self) -> String {
        format!("</{}>", self.name())
    }

    /// The block as shown in a format instruction, e.g.
    /// `<reason> reasoning process here </reason>`.
    pub fn placeholder_block(self) -> String {
        let what = match self {
            Tag::Think => "thinking process here",
            Tag::Reason => "reasoning process here",
            Tag::Answer => "answer here",
        };
        format!("{} {what} {}", self.open(), self.close())
    }
}

/// The canonical reasoning layout: one reason block, then one answer block.
pub const REASON_ANSWER: &[Tag] = &[Tag::Reason, Tag::Answer];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaggedBlock {
    pub tag: Tag,
    /// Trimmed block content.
    pub content: String,
    /// Byte range of `content` in the parsed text.
    pub span: Range<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaggedOutput {
    pub blocks: Vec<TaggedBlock>,
}

impl TaggedOutput {
    pub fn get(&self, tag: Tag) -> Option<&TaggedBlock> {
        self.blocks.iter().find(|b| b.tag == tag)
    }

    pub fn reason(&self) -> Option<&str> {
        self.get(Tag::Reason).map(|b| b.content.as_str())
    }

    pub fn answer(&self) -> Option<&str> {
        self.get(Tag::Answer).map(|b| b.content.as_str())
    }
}

/// Parses `<reason>..</reason> <answer>..</answer>`.
pub fn parse_tagged(text: &str) -> Option<TaggedOutput> {
    parse_tagged_layout(text, REASON_ANSWER)
}

/// Succeeds iff `text` is exactly the blocks of `layout`, in order, each
/// properly closed, with only whitespace between and around them. Block
/// contents may not contain any tag marker.
pub fn parse_tagged_layout(text: &str, layout: &[Tag]) -> Option<TaggedOutput> {
    let markers: Vec<String> = Tag::ALL.iter().flat_map(|t| [t.open(), t.close()]).collect();
    let mut pos = 0;
    let mut blocks = Vec::with_capacity(layout.len());
    for &tag in layout {
        pos += text[pos..].len() - text[pos..].trim_start().len();
        let open = tag.open();
        if !text[pos..].starts_with(&open) {
            return None;
        }
        let body_start = pos + open.len();
        let close = tag.close();
        let body_len = text[body_start..].find(&close)?;
        let body = &text[body_start..body_start + body_len];
        if markers.iter().any(|m| body.contains(m.as_str())) {
            return None;
        }
        let content = body.trim();
        let cstart = body_start + (body.len() - body.trim_start().len());
        blocks.push(TaggedBlock {
            tag,
            content: content.to_string(),
            span: cstart..cstart + content.len(),
        });
        pos = body_start + body_len + close.len();
    }
    text[pos..].trim().is_empty().then_some(TaggedOutput { blocks })
}

/// Parses a raw answer under `mode` into a schema label.
///
/// Tagged mode requires the canonical reason/answer layout with a schema
/// label as the answer. Direct mode accepts the bare label or its
/// `Category: <label>` rendering.
pub fn parse_label(text: &str, schema: &LabelSchema, mode: ParseMode, opts: ParseOptions) -> Option<ParsedLabel> {
    match mode {
        ParseMode::CategoryText | ParseMode::CategoryNumeric => parse_category(text, schema, mode, opts),
        ParseMode::TaggedReasoning => {
            let out = parse_tagged(text)?;
            let answer = out.get(Tag::Answer)?;
            let label = schema.canonical(&answer.content, opts.matching)?;
            Some(ParsedLabel {
                label: label.to_string(),
                span: answer.span.clone(),
            })
        }
        ParseMode::Direct => {
            let trimmed = text.trim();
            let lead = text.len() - text.trim_start().len();
            let (payload, start) = match trimmed.strip_prefix(CATEGORY_PREFIX) {
                Some(rest) => {
                    let inner = rest.trim_start();
                    (inner, lead + CATEGORY_PREFIX.len() + (rest.len() - inner.len()))
                }
                None => (trimmed, lead),
            };
            let label = schema.canonical(payload, opts.matching)?;
            Some(ParsedLabel {
                label: label.to_string(),
                span: start..start + payload.len(),
            })
        }
    }
}
