//! Bundle directory loading: manifest, resource-id table, layouts, code.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;
use walkdir::WalkDir;

use super::lexer::parse_int;
use super::parser::parse_code_unit_in;
use super::{AppBundle, CodeUnit, IrError};

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("missing manifest: {0}")]
    MissingManifest(PathBuf),
    #[error("malformed manifest {path}: {reason}")]
    MalformedManifest { path: PathBuf, reason: String },
    #[error("class {class} is declared in both {first} and {second}")]
    DuplicateClass {
        class: String,
        first: PathBuf,
        second: PathBuf,
    },
    #[error(transparent)]
    Ir(#[from] IrError),
    #[error("{file}:{line}: {message}")]
    RTableSyntax {
        file: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Resource name to numeric id. Both directions are unique.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RTable {
    by_name: BTreeMap<String, u32>,
    by_id: BTreeMap<u32, String>,
}

impl RTable {
    pub fn get(&self, name: &str) -> Option<u32> {
        self.by_name.get(name).copied()
    }

    pub fn name_of(&self, id: u32) -> Option<&str> {
        self.by_id.get(&id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.by_name.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_name.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.by_name.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Add an entry; fails if the name or the id is already taken.
    pub fn insert(&mut self, name: impl Into<String>, id: u32) -> Result<(), String> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(format!("duplicate resource name `{name}`"));
        }
        if let Some(other) = self.by_id.get(&id) {
            return Err(format!("id {id:#x} already assigned to `{other}`"));
        }
        self.by_id.insert(id, name.clone());
        self.by_name.insert(name, id);
        Ok(())
    }

    /// `id <name> <int>` lines sorted by name.
    pub fn to_text(&self) -> String {
        self.by_name
            .iter()
            .map(|(n, v)| format!("id {n} {v:#010x}\n"))
            .collect()
    }
}

/// A layout XML file, kept as source text; extraction parses it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayoutDoc {
    /// Relative to the bundle root.
    pub path: PathBuf,
    pub source: String,
}

pub fn parse_rtable(text: &str, file: &Path) -> Result<RTable, BundleError> {
    let mut table = RTable::default();
    for (idx, raw) in text.lines().enumerate() {
        let err = |message: String| BundleError::RTableSyntax {
            file: file.to_path_buf(),
            line: idx + 1,
            message,
        };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [kw, name, value] = parts.as_slice() else {
            return Err(err(format!("expected `id <name> <int>`, got `{line}`")));
        };
        if *kw != "id" {
            return Err(err(format!("unknown entry kind `{kw}`")));
        }
        if !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(err(format!("invalid resource name `{name}`")));
        }
        let value = parse_int(value)
            .and_then(|v| u32::try_from(v).ok())
            .ok_or_else(|| err(format!("invalid 32-bit id `{value}`")))?;
        table.insert(*name, value).map_err(err)?;
    }
    Ok(table)
}

/// Extract and validate the `package` attribute of the manifest root.
pub fn parse_manifest(text: &str, path: &Path) -> Result<String, BundleError> {
    let malformed = |reason: String| BundleError::MalformedManifest {
        path: path.to_path_buf(),
        reason,
    };
    let doc = roxmltree::Document::parse(text).map_err(|e| malformed(e.to_string()))?;
    let package = doc
        .root_element()
        .attribute("package")
        .ok_or_else(|| malformed("root element has no package attribute".into()))?;
    let valid = package.split('.').all(|seg| {
        let mut chars = seg.chars();
        chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
            && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
    });
    if !valid {
        return Err(malformed(format!("invalid package name `{package}`")));
    }
    Ok(package.to_owned())
}

fn read_text(path: &Path) -> Result<String, BundleError> {
    let bytes = fs::read(path).map_err(|source| BundleError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    String::from_utf8(bytes).map_err(|e| {
        let valid = &e.as_bytes()[..e.utf8_error().valid_up_to()];
        let prefix = String::from_utf8_lossy(valid);
        let line = prefix.matches('\n').count() + 1;
        let column = prefix.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        BundleError::Ir(IrError::Syntax {
            file: path.display().to_string(),
            line,
            column,
            message: "invalid UTF-8".into(),
        })
    })
}

fn sorted_files(dir: &Path, ext: &str, recursive: bool) -> Result<Vec<PathBuf>, BundleError> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let walker = WalkDir::new(dir).sort_by_file_name();
    let walker = if recursive { walker } else { walker.max_depth(1) };
    let mut out = Vec::new();
    for entry in walker {
        let entry = entry.map_err(|e| BundleError::Io {
            path: dir.to_path_buf(),
            source: e.into(),
        })?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|x| x == ext) {
            out.push(entry.into_path());
        }
    }
    Ok(out)
}

/// Load a decompiled bundle directory:
/// `manifest.xml`, `res/rtable.txt`, `res/layout/*.xml`, `code/**/*.jtac`.
/// Absent resource or code directories are treated as empty.
pub fn parse_bundle(dir: &Path) -> Result<AppBundle, BundleError> {
    let manifest_path = dir.join("manifest.xml");
    if !manifest_path.is_file() {
        return Err(BundleError::MissingManifest(manifest_path));
    }
    let app_package = parse_manifest(&read_text(&manifest_path)?, &manifest_path)?;

    let rtable_path = dir.join("res").join("rtable.txt");
    let rtable = if rtable_path.is_file() {
        parse_rtable(&read_text(&rtable_path)?, &rtable_path)?
    } else {
        RTable::default()
    };

    let mut layouts = Vec::new();
    for path in sorted_files(&dir.join("res").join("layout"), "xml", false)? {
        let source = read_text(&path)?;
        let rel = path.strip_prefix(dir).unwrap_or(&path).to_path_buf();
        layouts.push(LayoutDoc { path: rel, source });
    }

    let mut code_units: BTreeMap<String, CodeUnit> = BTreeMap::new();
    let mut origin: BTreeMap<String, PathBuf> = BTreeMap::new();
    for path in sorted_files(&dir.join("code"), "jtac", true)? {
        let text = read_text(&path)?;
        let rel = path.strip_prefix(dir).unwrap_or(&path).to_path_buf();
        let unit = parse_code_unit_in(&text, &rel.display().to_string())?;
        if let Some(first) = origin.get(&unit.class_name) {
            return Err(BundleError::DuplicateClass {
                class: unit.class_name,
                first: first.clone(),
                second: rel,
            });
        }
        origin.insert(unit.class_name.clone(), rel);
        code_units.insert(unit.class_name.clone(), unit);
    }

    Ok(AppBundle {
        root: dir.to_path_buf(),
        app_package,
        layouts,
        rtable,
        code_units,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rtable_forms() {
        let t = parse_rtable("# ids\nid weightEditText 0x7f0800e5\nid other 12 # trailing\n", Path::new("r"))
            .unwrap();
        assert_eq!(t.get("weightEditText"), Some(0x7f0800e5));
        assert_eq!(t.get("other"), Some(12));
        assert_eq!(t.name_of(12), Some("other"));
    }

    #[test]
    fn rtable_rejects_duplicates() {
        assert!(parse_rtable("id a 1\nid a 2\n", Path::new("r")).is_err());
        let err = parse_rtable("id a 1\nid b 1\n", Path::new("r")).unwrap_err();
        assert!(matches!(err, BundleError::RTableSyntax { line: 2, .. }));
    }

    #[test]
    fn rtable_rejects_garbage() {
        assert!(parse_rtable("id a\n", Path::new("r")).is_err());
        assert!(parse_rtable("name a 1\n", Path::new("r")).is_err());
        assert!(parse_rtable("id a 0x1ffffffff\n", Path::new("r")).is_err());
        assert!(parse_rtable("id a -1\n", Path::new("r")).is_err());
    }

    #[test]
    fn rtable_text_round_trip() {
        let t = parse_rtable("id b 0x7f000002\nid a 5\n", Path::new("r")).unwrap();
        assert_eq!(parse_rtable(&t.to_text(), Path::new("r")).unwrap(), t);
    }

    #[test]
    fn manifest_package() {
        let p = Path::new("manifest.xml");
        assert_eq!(parse_manifest(r#"<manifest package="com.panic.shield"/>"#, p).unwrap(), "com.panic.shield");
        assert!(matches!(parse_manifest("<manifest/>", p), Err(BundleError::MalformedManifest { .. })));
        assert!(parse_manifest(r#"<manifest package="com..x"/>"#, p).is_err());
        assert!(parse_manifest("<manifest", p).is_err());
    }
}
