//! The per-app pipeline: views, labels, sources, graph, leaks.

use std::path::Path;

use thiserror::Error;

use crate::gui::{extract_views, join_rtable, GuiError, UnmatchedId, ViewElement, WidgetRegistry};
use crate::ir::{parse_bundle, AppBundle, BundleError};
use crate::pi::{classify, Lexicon};
use crate::sourcesink::{resolve_sources, SinkRegistry, SourceResolution};
use crate::taint::{build_graph, extract_leaks, Leak};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Gui(#[from] GuiError),
}

/// Configuration shared by every app in a run.
#[derive(Debug, Clone)]
pub struct Analyzer {
    pub widgets: WidgetRegistry,
    pub lexicon: Lexicon,
    pub sinks: SinkRegistry,
}

impl Default for Analyzer {
    fn default() -> Self {
        Analyzer {
            widgets: WidgetRegistry::builtin(),
            lexicon: Lexicon::builtin(),
            sinks: SinkRegistry::builtin(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub bundle: AppBundle,
    /// Every extracted view, joined and classified, in layout order.
    pub views: Vec<ViewElement>,
    pub unmatched_ids: Vec<UnmatchedId>,
    pub sources: SourceResolution,
    pub leaks: Vec<Leak>,
}

impl Analyzer {
    pub fn analyze_dir(&self, dir: &Path) -> Result<Analysis, AnalysisError> {
        let bundle = parse_bundle(dir)?;
        self.analyze(bundle)
    }

    pub fn analyze(&self, bundle: AppBundle) -> Result<Analysis, AnalysisError> {
        let mut views = Vec::new();
        for layout in &bundle.layouts {
            views.extend(extract_views(&layout.source, &layout.path, &self.widgets)?);
        }
        let (mut views, unmatched_ids) = join_rtable(views, &bundle.rtable);
        for v in &mut views {
            v.pi = classify(v, &self.lexicon);
        }
        let labeled: Vec<ViewElement> = views.iter().filter(|v| v.pi.is_some()).cloned().collect();
        let sources = resolve_sources(&bundle, &labeled);
        let graph = build_graph(&bundle, &sources.sources, &self.sinks);
        let leaks = extract_leaks(&graph, &bundle.app_package);
        Ok(Analysis {
            bundle,
            views,
            unmatched_ids,
            sources,
            leaks,
        })
    }
}
