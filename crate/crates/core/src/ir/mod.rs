//! Three-address intermediate representation of decompiled app code.
//!
//! Code units are written in JTAC, a Jimple-like text format with one class
//! per file. The statement forms are deliberately few: atom and cast
//! assignments, field reads and writes, the four invoke kinds, and returns.
//! There is no control flow; the taint engine does not need it.

mod bundle;
mod lexer;
mod parser;
mod render;
mod resolve;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use bundle::{parse_bundle, parse_manifest, parse_rtable, BundleError, LayoutDoc, RTable};
pub use parser::{parse_code_unit, parse_field_sig, parse_method_sig, IrError};
pub use resolve::{resolve_call, ResolvedTarget};

/// A parsed, decompiled app.
#[derive(Debug, Clone, PartialEq)]
pub struct AppBundle {
    pub root: PathBuf,
    pub app_package: String,
    pub layouts: Vec<LayoutDoc>,
    pub rtable: RTable,
    pub code_units: BTreeMap<String, CodeUnit>,
}

impl AppBundle {
    pub fn class(&self, name: &str) -> Option<&CodeUnit> {
        self.code_units.get(name)
    }

    /// Every method body in the bundle, in class then declaration order.
    pub fn methods(&self) -> impl Iterator<Item = &MethodBody> {
        self.code_units.values().flat_map(|u| u.methods.iter())
    }

    pub fn statement(&self, id: &StmtId) -> Option<&Statement> {
        let unit = self.code_units.get(&id.class)?;
        let method = unit.methods.iter().find(|m| m.sig.sub_signature() == id.method)?;
        method.statements.get(id.ordinal as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeUnit {
    pub class_name: String,
    pub superclass: Option<String>,
    pub fields: Vec<FieldSig>,
    pub methods: Vec<MethodBody>,
}

impl CodeUnit {
    pub fn method(&self, name: &str, param_types: &[String]) -> Option<&MethodBody> {
        self.methods
            .iter()
            .find(|m| m.sig.name == name && m.sig.param_types == param_types)
    }
}

/// `<Class: RetType name(T1,T2)>`
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MethodSig {
    pub declaring_class: String,
    pub return_type: String,
    pub name: String,
    pub param_types: Vec<String>,
}

impl MethodSig {
    /// `name(T1,T2)`, unique within a class.
    pub fn sub_signature(&self) -> String {
        format!("{}({})", self.name, self.param_types.join(","))
    }

    pub fn arity(&self) -> usize {
        self.param_types.len()
    }
}

/// `<Class: Type name>`
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldSig {
    pub declaring_class: String,
    pub field_type: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodBody {
    pub sig: MethodSig,
    pub params: Vec<Reg>,
    pub is_static: bool,
    pub statements: Vec<Statement>,
}

/// A register name. `this` is an ordinary register bound on entry to
/// instance methods.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Reg(String);

impl Reg {
    pub fn new(name: impl Into<String>) -> Self {
        Reg(name.into())
    }

    pub fn this() -> Self {
        Reg("this".to_owned())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_this(&self) -> bool {
        self.0 == "this"
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Statement identity: enclosing class, method sub-signature, ordinal.
/// The derived ordering is lexicographic on the triple.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StmtId {
    pub class: String,
    pub method: String,
    pub ordinal: u32,
}

impl fmt::Display for StmtId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}#{}", self.class, self.method, self.ordinal)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Atom {
    Reg(Reg),
    Int(i64),
    Str(String),
    Null,
}

impl Atom {
    pub fn as_reg(&self) -> Option<&Reg> {
        match self {
            Atom::Reg(r) => Some(r),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InvokeKind {
    Virtual,
    Interface,
    Special,
    Static,
}

impl InvokeKind {
    pub fn keyword(self) -> &'static str {
        match self {
            InvokeKind::Virtual => "virtualinvoke",
            InvokeKind::Interface => "interfaceinvoke",
            InvokeKind::Special => "specialinvoke",
            InvokeKind::Static => "staticinvoke",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        match word {
            "virtualinvoke" => Some(InvokeKind::Virtual),
            "interfaceinvoke" => Some(InvokeKind::Interface),
            "specialinvoke" => Some(InvokeKind::Special),
            "staticinvoke" => Some(InvokeKind::Static),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvokeExpr {
    pub kind: InvokeKind,
    /// Absent exactly when `kind` is static.
    pub receiver: Option<Reg>,
    pub method: MethodSig,
    pub args: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    AssignAtom { dst: Reg, src: Atom },
    AssignCast { dst: Reg, cast_type: String, src: Reg },
    FieldRead { dst: Reg, base: Option<Reg>, field: FieldSig },
    FieldWrite { base: Option<Reg>, field: FieldSig, value: Atom },
    Invoke { dst: Option<Reg>, expr: InvokeExpr },
    Return { value: Option<Atom> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub id: StmtId,
    pub kind: StmtKind,
}

impl Statement {
    pub fn invoke(&self) -> Option<&InvokeExpr> {
        match &self.kind {
            StmtKind::Invoke { expr, .. } => Some(expr),
            _ => None,
        }
    }

    /// The register this statement assigns, if any.
    pub fn defined_reg(&self) -> Option<&Reg> {
        match &self.kind {
            StmtKind::AssignAtom { dst, .. }
            | StmtKind::AssignCast { dst, .. }
            | StmtKind::FieldRead { dst, .. } => Some(dst),
            StmtKind::Invoke { dst, .. } => dst.as_ref(),
            StmtKind::FieldWrite { .. } | StmtKind::Return { .. } => None,
        }
    }

    /// Registers read by this statement, in operand order.
    pub fn used_regs(&self) -> Vec<&Reg> {
        let mut out = Vec::new();
        match &self.kind {
            StmtKind::AssignAtom { src, .. } => out.extend(src.as_reg()),
            StmtKind::AssignCast { src, .. } => out.push(src),
            StmtKind::FieldRead { base, .. } => out.extend(base.as_ref()),
            StmtKind::FieldWrite { base, value, .. } => {
                out.extend(base.as_ref());
                out.extend(value.as_reg());
            }
            StmtKind::Invoke { expr, .. } => {
                out.extend(expr.receiver.as_ref());
                out.extend(expr.args.iter().filter_map(Atom::as_reg));
            }
            StmtKind::Return { value } => out.extend(value.as_ref().and_then(Atom::as_reg)),
        }
        out
    }
}
