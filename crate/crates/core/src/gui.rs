//! Candidate input views from layout XML.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::RTable;
use crate::pi::PiKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewElement {
    pub view_class: String,
    pub id_name: Option<String>,
    pub numeric_id: Option<u32>,
    pub hint: Option<String>,
    pub text: Option<String>,
    pub layout_file: PathBuf,
    /// Set by classification.
    pub pi: Option<PiKind>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GuiError {
    #[error("{file}:{line}:{column}: {message}")]
    XmlSyntax {
        file: PathBuf,
        line: u32,
        column: u32,
        message: String,
    },
    #[error("widget registry line {line}: {message}")]
    RegistrySyntax { line: usize, message: String },
}

/// Known widget names; the input-capable subset is emitted, the rest are
/// traversed only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WidgetRegistry {
    known_views: BTreeSet<String>,
    input_capable: BTreeSet<String>,
}

const DEFAULT_WIDGETS: &str = include_str!("../data/widgets.txt");

impl WidgetRegistry {
    pub fn builtin() -> Self {
        WidgetRegistry::parse(DEFAULT_WIDGETS).expect("shipped widget registry is valid")
    }

    /// One `input:Name` or `container:Name` per line; `#` comments.
    pub fn parse(text: &str) -> Result<Self, GuiError> {
        let mut reg = WidgetRegistry {
            known_views: BTreeSet::new(),
            input_capable: BTreeSet::new(),
        };
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| GuiError::RegistrySyntax { line: idx + 1, message };
            let (role, name) = line
                .split_once(':')
                .ok_or_else(|| err(format!("expected `input:<Widget>` or `container:<Widget>`, got `{line}`")))?;
            let name = name.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
                return Err(err(format!("invalid widget name `{name}`")));
            }
            match role.trim() {
                "input" => {
                    reg.input_capable.insert(name.to_owned());
                }
                "container" => {}
                other => return Err(err(format!("unknown widget role `{other}`"))),
            }
            reg.known_views.insert(name.to_owned());
        }
        Ok(reg)
    }

    pub fn is_known(&self, tag: &str) -> bool {
        self.known_views.contains(tag)
    }

    pub fn is_input(&self, tag: &str) -> bool {
        self.input_capable.contains(tag)
    }

    /// Whether an element with this tag is emitted as a candidate view.
    /// Dotted tags whose simple name is registered follow the registry;
    /// other dotted tags are custom views and count as input-capable.
    pub fn emits(&self, tag: &str) -> bool {
        if self.is_known(tag) {
            return self.is_input(tag);
        }
        match tag.rsplit_once('.') {
            Some((_, simple)) if self.is_known(simple) => self.is_input(simple),
            Some(_) => true,
            None => false,
        }
    }
}

fn strip_id_prefix(value: &str) -> &str {
    match value.find("id/") {
        Some(pos) if value.starts_with('@') => &value[pos + 3..],
        _ => value,
    }
}

/// Every emitted element of a layout, in document order.
pub fn extract_views(layout: &str, file: &Path, registry: &WidgetRegistry) -> Result<Vec<ViewElement>, GuiError> {
    let doc = roxmltree::Document::parse(layout).map_err(|e| {
        let pos = e.pos();
        GuiError::XmlSyntax {
            file: file.to_path_buf(),
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })?;
    let mut out = Vec::new();
    for node in doc.root().descendants().filter(|n| n.is_element()) {
        let tag = node.tag_name().name();
        if !registry.emits(tag) {
            continue;
        }
        let attr = |local: &str| {
            node.attributes()
                .find(|a| a.name() == local)
                .map(|a| a.value().to_owned())
        };
        out.push(ViewElement {
            view_class: tag.to_owned(),
            id_name: attr("id").map(|v| strip_id_prefix(&v).to_owned()).filter(|v| !v.is_empty()),
            numeric_id: None,
            hint: attr("hint"),
            text: attr("text"),
            layout_file: file.to_path_buf(),
            pi: None,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnmatchedId {
    pub id_name: String,
    pub layout_file: PathBuf,
}

/// Attach numeric ids from the resource table. Views are neither dropped
/// nor added; each id name missing from the table yields a warning.
pub fn join_rtable(views: Vec<ViewElement>, rtable: &RTable) -> (Vec<ViewElement>, Vec<UnmatchedId>) {
    let mut warnings = Vec::new();
    let views = views
        .into_iter()
        .map(|mut v| {
            v.numeric_id = v.id_name.as_deref().and_then(|n| rtable.get(n));
            if let (Some(name), None) = (&v.id_name, v.numeric_id) {
                warnings.push(UnmatchedId {
                    id_name: name.clone(),
                    layout_file: v.layout_file.clone(),
                });
            }
            v
        })
        .collect();
    (views, warnings)
}
