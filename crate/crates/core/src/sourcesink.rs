//! Taint sources (`findViewById` sites bound to labeled views) and the
//! sink registry.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gui::ViewElement;
use crate::ir::{parse_method_sig, AppBundle, Atom, MethodBody, MethodSig, Reg, RTable, Statement, StmtId, StmtKind};
use crate::pi::PiKind;

/// Leak destinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SinkCategory {
    Net,
    LocalStore,
    Log,
    FileIO,
}

impl SinkCategory {
    pub const ALL: [SinkCategory; 4] = [SinkCategory::Net, SinkCategory::LocalStore, SinkCategory::Log, SinkCategory::FileIO];

    pub fn key(self) -> &'static str {
        match self {
            SinkCategory::Net => "net",
            SinkCategory::LocalStore => "localstore",
            SinkCategory::Log => "log",
            SinkCategory::FileIO => "fileio",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SinkCategory::Net => "Net",
            SinkCategory::LocalStore => "LocalStore",
            SinkCategory::Log => "Log",
            SinkCategory::FileIO => "FileIO",
        }
    }
}

impl fmt::Display for SinkCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SinkCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        SinkCategory::ALL
            .into_iter()
            .find(|c| c.key() == lower)
            .ok_or_else(|| format!("unknown sink category `{s}`"))
    }
}

/// Operand position of a call: the receiver or a zero-based argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Position {
    Recv,
    Arg(usize),
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Position::Recv => f.write_str("recv"),
            Position::Arg(i) => write!(f, "arg{i}"),
        }
    }
}

impl FromStr for Position {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "recv" {
            return Ok(Position::Recv);
        }
        s.strip_prefix("arg")
            .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|d| d.parse().ok())
            .map(Position::Arg)
            .ok_or_else(|| format!("invalid position `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SinkSpec {
    pub category: SinkCategory,
    pub sig: MethodSig,
    pub positions: BTreeSet<Position>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SinkError {
    #[error("sink line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("sink line {line}: position {position} is out of range for a {arity}-argument method")]
    BadPosition { line: usize, position: Position, arity: usize },
}

type SigKey = (String, String, Vec<String>);

fn sig_key(sig: &MethodSig) -> SigKey {
    (sig.declaring_class.clone(), sig.name.clone(), sig.param_types.clone())
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SinkRegistry {
    specs: Vec<SinkSpec>,
    by_sig: BTreeMap<SigKey, Vec<usize>>,
}

const DEFAULT_SINKS: &str = include_str!("../data/sinks.tsv");

impl SinkRegistry {
    pub fn builtin() -> Self {
        SinkRegistry::parse(DEFAULT_SINKS).expect("shipped sink list is valid")
    }

    pub fn specs(&self) -> &[SinkSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    /// `<category>\t<signature>\t<positions>` lines; positions is a comma
    /// list of `recv`/`argN`, or `*` for the receiver and every argument.
    pub fn parse(text: &str) -> Result<Self, SinkError> {
        let mut reg = SinkRegistry::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let syntax = |message: String| SinkError::Syntax { line, message };
            let content = match raw.trim_start().starts_with('#') {
                true => "",
                false => raw.trim_end(),
            };
            if content.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = content.split('\t').collect();
            let [category, sig, positions] = cols.as_slice() else {
                return Err(syntax(format!("expected 3 tab-separated columns, found {}", cols.len())));
            };
            let category: SinkCategory = category.trim().parse().map_err(syntax)?;
            let sig = parse_method_sig(sig.trim()).map_err(|e| syntax(e.to_string()))?;
            let positions = parse_positions(positions.trim(), &sig).map_err(|e| match e {
                Ok(position) => SinkError::BadPosition {
                    line,
                    position,
                    arity: sig.arity(),
                },
                Err(message) => syntax(message),
            })?;
            reg.push(SinkSpec { category, sig, positions }).map_err(syntax)?;
        }
        Ok(reg)
    }

    /// Add a spec; (signature, category) pairs must be unique.
    pub fn push(&mut self, spec: SinkSpec) -> Result<(), String> {
        let key = sig_key(&spec.sig);
        let slots = self.by_sig.entry(key).or_default();
        if slots.iter().any(|&i| self.specs[i].category == spec.category) {
            return Err(format!("duplicate sink {} for {}", spec.sig, spec.category));
        }
        slots.push(self.specs.len());
        self.specs.push(spec);
        Ok(())
    }

    pub fn to_text(&self) -> String {
        self.specs
            .iter()
            .map(|s| {
                let pos: Vec<String> = s.positions.iter().map(ToString::to_string).collect();
                format!("{}\t{}\t{}\n", s.category.key(), s.sig, pos.join(","))
            })
            .collect()
    }

    /// Specs whose declaring class, name and parameter types equal the
    /// callee's.
    pub fn lookup(&self, sig: &MethodSig) -> Vec<&SinkSpec> {
        self.by_sig
            .get(&sig_key(sig))
            .map(|ix| ix.iter().map(|&i| &self.specs[i]).collect())
            .unwrap_or_default()
    }
}

/// `Err(Ok(pos))` is an out-of-range position, `Err(Err(msg))` a syntax error.
fn parse_positions(text: &str, sig: &MethodSig) -> Result<BTreeSet<Position>, Result<Position, String>> {
    if text == "*" {
        let mut all: BTreeSet<Position> = (0..sig.arity()).map(Position::Arg).collect();
        all.insert(Position::Recv);
        return Ok(all);
    }
    let mut out = BTreeSet::new();
    for part in text.split(',') {
        let p: Position = part.trim().parse().map_err(Err)?;
        if let Position::Arg(i) = p {
            if i >= sig.arity() {
                return Err(Ok(p));
            }
        }
        out.insert(p);
    }
    if out.is_empty() {
        return Err(Err("empty position list".into()));
    }
    Ok(out)
}

pub fn load_sinks(text: &str) -> Result<SinkRegistry, SinkError> {
    SinkRegistry::parse(text)
}

/// All specs matching the statement's callee; empty for non-invokes.
pub fn match_sink<'r>(stmt: &Statement, reg: &'r SinkRegistry) -> Vec<&'r SinkSpec> {
    match stmt.invoke() {
        Some(expr) => reg.lookup(&expr.method),
        None => Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourcePoint {
    pub stmt: StmtId,
    /// Register receiving the view, absent when the result is discarded.
    pub result: Option<Reg>,
    pub view: ViewElement,
    pub pi: PiKind,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceTally {
    pub call_sites: usize,
    pub sources: usize,
    pub unlabeled_id_skips: usize,
    pub unresolved_argument_skips: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceResolution {
    pub sources: Vec<SourcePoint>,
    pub tally: SourceTally,
}

pub fn is_find_view_by_id(stmt: &Statement) -> bool {
    stmt.invoke()
        .is_some_and(|e| e.method.name == "findViewById" && e.method.param_types == ["int"])
}

fn is_r_id_class(class: &str) -> bool {
    class.rsplit('.').next() == Some("R$id")
}

/// The integer a `findViewById` argument denotes, when it is a literal,
/// or a register whose every assignment in the method is a constant
/// (an int literal or an `R$id` field known to the resource table) and
/// all of them agree.
pub fn resolve_view_id(method: &MethodBody, arg: &Atom, rtable: &RTable) -> Option<i64> {
    match arg {
        Atom::Int(v) => Some(*v),
        Atom::Reg(r) => {
            let mut values = BTreeSet::new();
            let mut defs = 0;
            for s in method.statements.iter().filter(|s| s.defined_reg() == Some(r)) {
                defs += 1;
                let v = match &s.kind {
                    StmtKind::AssignAtom { src: Atom::Int(v), .. } => *v,
                    StmtKind::FieldRead { base: None, field, .. } if is_r_id_class(&field.declaring_class) => {
                        i64::from(rtable.get(&field.name)?)
                    }
                    _ => return None,
                };
                values.insert(v);
            }
            match (defs, values.len()) {
                (1.., 1) => values.into_iter().next(),
                _ => None,
            }
        }
        Atom::Str(_) | Atom::Null => None,
    }
}

/// Bind every `findViewById` call site whose id argument resolves to a
/// labeled view. The first labeled view carrying an id wins.
pub fn resolve_sources(bundle: &AppBundle, labeled_views: &[ViewElement]) -> SourceResolution {
    let mut by_id: HashMap<i64, &ViewElement> = HashMap::new();
    for v in labeled_views {
        if let (Some(id), Some(_)) = (v.numeric_id, v.pi) {
            by_id.entry(i64::from(id)).or_insert(v);
        }
    }
    let mut out = SourceResolution::default();
    for method in bundle.methods() {
        for stmt in method.statements.iter().filter(|s| is_find_view_by_id(s)) {
            out.tally.call_sites += 1;
            let StmtKind::Invoke { dst, expr } = &stmt.kind else { unreachable!() };
            let Some(id) = resolve_view_id(method, &expr.args[0], &bundle.rtable) else {
                out.tally.unresolved_argument_skips += 1;
                continue;
            };
            match by_id.get(&id) {
                Some(view) => {
                    out.tally.sources += 1;
                    out.sources.push(SourcePoint {
                        stmt: stmt.id.clone(),
                        result: dst.clone(),
                        view: (*view).clone(),
                        pi: view.pi.expect("labeled"),
                    });
                }
                None => out.tally.unlabeled_id_skips += 1,
            }
        }
    }
    out.sources.sort_by(|a, b| a.stmt.cmp(&b.stmt));
    out
}
