//! `{{placeholder}}` templates loaded from a directory of block files.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Named template blocks, one `<name>.txt` file per block.
///
/// Blocks used by the renderer: `header`, `categories`, `numeric_categories`,
/// `format_requirement`, `format_requirement_numeric`,
/// `format_requirement_uncertain`, `format_requirement_reasoning`,
/// `format_requirement_direct`, `definitions_header`, `definition`,
/// `example`, `current_case`, `instruction`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PromptTemplates {
    blocks: BTreeMap<String, String>,
}

impl PromptTemplates {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut blocks = BTreeMap::new();
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let Some(name) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            // Editors like to append a final newline; block boundaries are
            // owned by the renderer.
            let text = text.strip_suffix('\n').unwrap_or(&text);
            let text = text.strip_suffix('\r').unwrap_or(text);
            blocks.insert(name.to_string(), text.to_string());
        }
        Ok(Self { blocks })
    }

    pub fn from_blocks<I, K, V>(blocks: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        Self {
            blocks: blocks.into_iter().map(|(k, v)| (k.into(), v.into())).collect(),
        }
    }

    pub fn block(&self, name: &str) -> Result<&str> {
        self.blocks
            .get(name)
            .map(String::as_str)
            .ok_or_else(|| Error::MissingTemplate(name.to_string()))
    }

    pub fn set(&mut self, name: impl Into<String>, text: impl Into<String>) {
        self.blocks.insert(name.into(), text.into());
    }

    pub fn render_block(&self, name: &str, vars: &[(&str, &str)]) -> Result<String> {
        fill(self.block(name)?, vars)
    }
}

/// Substitutes every `{{name}}` in `template`. Values are inserted verbatim
/// and never rescanned. An unbound name is an error.
pub fn fill(template: &str, vars: &[(&str, &str)]) -> Result<String> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let Some(end) = after.find("}}") else {
            out.push_str(&rest[start..]);
            return Ok(out);
        };
        let name = after[..end].trim();
        let value = vars
            .iter()
            .rev()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::UnboundPlaceholder(name.to_string()))?;
        out.push_str(value);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}
