//! Canonical JTAC text.

use std::fmt::{self, Write as _};

use super::lexer::escape_str;
use super::{Atom, CodeUnit, FieldSig, InvokeExpr, MethodSig, Statement, StmtKind};

impl fmt::Display for MethodSig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "<{}: {} {}({})>",
            self.declaring_class,
            self.return_type,
            self.name,
            self.param_types.join(",")
        )
    }
}

impl fmt::Display for FieldSig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}: {} {}>", self.declaring_class, self.field_type, self.name)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Reg(r) => write!(f, "{r}"),
            Atom::Int(v) => write!(f, "{v}"),
            Atom::Str(s) => f.write_str(&escape_str(s)),
            Atom::Null => f.write_str("null"),
        }
    }
}

impl fmt::Display for InvokeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.keyword())?;
        f.write_char(' ')?;
        if let Some(recv) = &self.receiver {
            write!(f, "{recv}.")?;
        }
        write!(f, "{}(", self.method)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_char(')')
    }
}

impl fmt::Display for StmtKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StmtKind::AssignAtom { dst, src } => write!(f, "{dst} = {src}"),
            StmtKind::AssignCast { dst, cast_type, src } => write!(f, "{dst} = ({cast_type}) {src}"),
            StmtKind::FieldRead { dst, base: Some(b), field } => write!(f, "{dst} = {b}.{field}"),
            StmtKind::FieldRead { dst, base: None, field } => write!(f, "{dst} = {field}"),
            StmtKind::FieldWrite { base: Some(b), field, value } => write!(f, "{b}.{field} = {value}"),
            StmtKind::FieldWrite { base: None, field, value } => write!(f, "{field} = {value}"),
            StmtKind::Invoke { dst: Some(d), expr } => write!(f, "{d} = {expr}"),
            StmtKind::Invoke { dst: None, expr } => write!(f, "{expr}"),
            StmtKind::Return { value: Some(v) } => write!(f, "return {v}"),
            StmtKind::Return { value: None } => f.write_str("return"),
        }
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.kind.fmt(f)
    }
}

impl CodeUnit {
    /// Render back to a JTAC file that parses to an equal unit.
    pub fn to_jtac(&self) -> String {
        let mut out = String::new();
        out.push_str("class ");
        out.push_str(&self.class_name);
        if let Some(sup) = &self.superclass {
            out.push_str(" extends ");
            out.push_str(sup);
        }
        out.push('\n');
        if !self.fields.is_empty() {
            out.push('\n');
        }
        for field in &self.fields {
            let _ = writeln!(out, "field {} {}", field.field_type, field.name);
        }
        for m in &self.methods {
            out.push_str("\nmethod ");
            if m.is_static {
                out.push_str("static ");
            }
            let params: Vec<String> = m
                .sig
                .param_types
                .iter()
                .zip(&m.params)
                .map(|(t, r)| format!("{t} {r}"))
                .collect();
            let _ = writeln!(out, "{} {}({}):", m.sig.return_type, m.sig.name, params.join(", "));
            for s in &m.statements {
                let _ = writeln!(out, "    {s}");
            }
        }
        out
    }
}
