use std::collections::HashSet;

use thiserror::Error;

use super::lexer::{lex_line, Tok, Token};
use super::{
    Atom, CodeUnit, FieldSig, InvokeExpr, InvokeKind, MethodBody, MethodSig, Reg, Statement,
    StmtId, StmtKind,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IrError {
    #[error("{file}:{line}:{column}: {message}")]
    Syntax {
        file: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{file}:{line}:{column}: unknown invoke kind `{kind}`")]
    UnknownInvokeKind {
        file: String,
        line: usize,
        column: usize,
        kind: String,
    },
    #[error("{file}:{line}:{column}: malformed signature: {message}")]
    MalformedSignature {
        file: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{file}:{line}:{column}: duplicate method {sub_signature}")]
    DuplicateMethod {
        file: String,
        line: usize,
        column: usize,
        sub_signature: String,
    },
    #[error("{file}:{line}:{column}: register `{reg}` is never assigned")]
    UndefinedRegister {
        file: String,
        line: usize,
        column: usize,
        reg: String,
    },
}

impl IrError {
    /// `(file, line, column)` of the offending input.
    pub fn location(&self) -> (&str, usize, usize) {
        match self {
            IrError::Syntax { file, line, column, .. }
            | IrError::UnknownInvokeKind { file, line, column, .. }
            | IrError::MalformedSignature { file, line, column, .. }
            | IrError::DuplicateMethod { file, line, column, .. }
            | IrError::UndefinedRegister { file, line, column, .. } => (file, *line, *column),
        }
    }
}

const RESERVED: &[&str] = &[
    "class",
    "extends",
    "field",
    "method",
    "static",
    "return",
    "null",
    "virtualinvoke",
    "interfaceinvoke",
    "specialinvoke",
    "staticinvoke",
];

/// Parse one JTAC class file.
pub fn parse_code_unit(text: &str) -> Result<CodeUnit, IrError> {
    parse_code_unit_in(text, "<input>")
}

pub(crate) fn parse_code_unit_in(text: &str, file: &str) -> Result<CodeUnit, IrError> {
    UnitParser::new(file).parse(text)
}

/// Parse a canonical method signature, `<Class: Ret name(T1,T2)>`.
pub fn parse_method_sig(text: &str) -> Result<MethodSig, IrError> {
    let toks = lex_snippet(text)?;
    let mut c = Cursor::new(&toks, "<signature>", 1, text.chars().count());
    c.expect_punct('<', "expected `<`")?;
    let sig = match c.sig_body()? {
        SigBody::Method(m) => m,
        SigBody::Field(_) => return Err(c.sig_error("expected a method signature")),
    };
    c.finish()?;
    Ok(sig)
}

/// Parse a canonical field signature, `<Class: Type name>`.
pub fn parse_field_sig(text: &str) -> Result<FieldSig, IrError> {
    let toks = lex_snippet(text)?;
    let mut c = Cursor::new(&toks, "<signature>", 1, text.chars().count());
    c.expect_punct('<', "expected `<`")?;
    let sig = match c.sig_body()? {
        SigBody::Field(f) => f,
        SigBody::Method(_) => return Err(c.sig_error("expected a field signature")),
    };
    c.finish()?;
    Ok(sig)
}

fn lex_snippet(text: &str) -> Result<Vec<Token>, IrError> {
    lex_line(text).map_err(|e| IrError::MalformedSignature {
        file: "<signature>".to_owned(),
        line: 1,
        column: e.col,
        message: e.message,
    })
}

struct PendingMethod {
    body: MethodBody,
    reads: Vec<(Reg, usize, usize)>,
}

struct UnitParser<'f> {
    file: &'f str,
    class: Option<(String, Option<String>)>,
    fields: Vec<FieldSig>,
    methods: Vec<MethodBody>,
    seen: HashSet<String>,
    current: Option<PendingMethod>,
}

impl<'f> UnitParser<'f> {
    fn new(file: &'f str) -> Self {
        UnitParser {
            file,
            class: None,
            fields: Vec::new(),
            methods: Vec::new(),
            seen: HashSet::new(),
            current: None,
        }
    }

    fn parse(mut self, text: &str) -> Result<CodeUnit, IrError> {
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let toks = lex_line(raw).map_err(|e| IrError::Syntax {
                file: self.file.to_owned(),
                line: line_no,
                column: e.col,
                message: e.message,
            })?;
            let mut c = Cursor::new(&toks, self.file, line_no, raw.chars().count());
            self.line(&mut c)?;
        }
        self.close_method()?;
        let (class_name, superclass) = self.class.ok_or_else(|| IrError::Syntax {
            file: self.file.to_owned(),
            line: text.lines().count().max(1),
            column: 1,
            message: "missing class declaration".into(),
        })?;
        Ok(CodeUnit {
            class_name,
            superclass,
            fields: self.fields,
            methods: self.methods,
        })
    }

    fn line(&mut self, c: &mut Cursor<'_>) -> Result<(), IrError> {
        let first = match c.peek() {
            Some(Tok::Word(w)) => Some(w.clone()),
            _ => None,
        };
        match first.as_deref() {
            Some("class") => {
                if self.class.is_some() {
                    return Err(c.error("only one class declaration per file"));
                }
                c.bump();
                let name = c.qname("expected class name")?;
                let superclass = if c.eat_word("extends") {
                    Some(c.qname("expected superclass name")?)
                } else {
                    None
                };
                c.finish()?;
                self.class = Some((name, superclass));
            }
            Some("field") => {
                let class = self.require_class(c)?;
                if self.current.is_some() || !self.methods.is_empty() {
                    return Err(c.error("fields must precede methods"));
                }
                c.bump();
                let field_type = c.type_name()?;
                let name = c.name("expected field name")?;
                c.finish()?;
                self.fields.push(FieldSig {
                    declaring_class: class,
                    field_type,
                    name,
                });
            }
            Some("method") => {
                let class = self.require_class(c)?;
                self.close_method()?;
                let col = c.col();
                c.bump();
                let is_static = c.eat_word("static");
                let return_type = c.type_name()?;
                let name = c.name("expected method name")?;
                c.expect_punct('(', "expected `(`")?;
                let mut param_types = Vec::new();
                let mut params: Vec<Reg> = Vec::new();
                if !c.eat_punct(')') {
                    loop {
                        param_types.push(c.type_name()?);
                        let reg_col = c.col();
                        let reg = c.reg("expected parameter register")?;
                        if reg.is_this() || params.contains(&reg) {
                            return Err(c.error_at(reg_col, format!("invalid parameter register `{reg}`")));
                        }
                        params.push(reg);
                        if c.eat_punct(')') {
                            break;
                        }
                        c.expect_punct(',', "expected `,` or `)`")?;
                    }
                }
                c.expect_punct(':', "expected `:` after parameter list")?;
                c.finish()?;
                let sig = MethodSig {
                    declaring_class: class,
                    return_type,
                    name,
                    param_types,
                };
                let sub = sig.sub_signature();
                if !self.seen.insert(sub.clone()) {
                    return Err(IrError::DuplicateMethod {
                        file: self.file.to_owned(),
                        line: c.line,
                        column: col,
                        sub_signature: sub,
                    });
                }
                self.current = Some(PendingMethod {
                    body: MethodBody {
                        sig,
                        params,
                        is_static,
                        statements: Vec::new(),
                    },
                    reads: Vec::new(),
                });
            }
            _ => {
                let class = self.require_class(c)?;
                let Some(pending) = self.current.as_mut() else {
                    return Err(c.error("statement outside of a method"));
                };
                let kind = c.statement()?;
                c.finish()?;
                for (reg, col) in c.reads.drain(..) {
                    pending.reads.push((reg, c.line, col));
                }
                let ordinal = pending.body.statements.len() as u32;
                pending.body.statements.push(Statement {
                    id: StmtId {
                        class,
                        method: pending.body.sig.sub_signature(),
                        ordinal,
                    },
                    kind,
                });
            }
        }
        Ok(())
    }

    fn require_class(&self, c: &Cursor<'_>) -> Result<String, IrError> {
        match &self.class {
            Some((name, _)) => Ok(name.clone()),
            None => Err(c.error("expected `class` declaration first")),
        }
    }

    fn close_method(&mut self) -> Result<(), IrError> {
        let Some(pending) = self.current.take() else {
            return Ok(());
        };
        let mut defined: HashSet<&Reg> = pending.body.params.iter().collect();
        let this = Reg::this();
        if !pending.body.is_static {
            defined.insert(&this);
        }
        defined.extend(pending.body.statements.iter().filter_map(Statement::defined_reg));
        if let Some((reg, line, column)) = pending.reads.iter().find(|(r, _, _)| !defined.contains(r)) {
            return Err(IrError::UndefinedRegister {
                file: self.file.to_owned(),
                line: *line,
                column: *column,
                reg: reg.to_string(),
            });
        }
        self.methods.push(pending.body);
        Ok(())
    }
}

enum SigBody {
    Method(MethodSig),
    Field(FieldSig),
}

struct Cursor<'t> {
    toks: &'t [Token],
    pos: usize,
    file: &'t str,
    line: usize,
    line_len: usize,
    reads: Vec<(Reg, usize)>,
}

impl<'t> Cursor<'t> {
    fn new(toks: &'t [Token], file: &'t str, line: usize, line_len: usize) -> Self {
        Cursor {
            toks,
            pos: 0,
            file,
            line,
            line_len,
            reads: Vec::new(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, offset: usize) -> Option<&Tok> {
        self.toks.get(self.pos + offset).map(|t| &t.tok)
    }

    fn bump(&mut self) -> Option<&'t Token> {
        let t = self.toks.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.line_len + 1, |t| t.col)
    }

    fn error(&self, message: impl Into<String>) -> IrError {
        self.error_at(self.col(), message)
    }

    fn error_at(&self, column: usize, message: impl Into<String>) -> IrError {
        IrError::Syntax {
            file: self.file.to_owned(),
            line: self.line,
            column,
            message: message.into(),
        }
    }

    fn sig_error(&self, message: impl Into<String>) -> IrError {
        IrError::MalformedSignature {
            file: self.file.to_owned(),
            line: self.line,
            column: self.col(),
            message: message.into(),
        }
    }

    fn finish(&self) -> Result<(), IrError> {
        if self.pos < self.toks.len() {
            Err(self.error("unexpected trailing tokens"))
        } else {
            Ok(())
        }
    }

    fn eat_punct(&mut self, p: char) -> bool {
        if self.peek() == Some(&Tok::Punct(p)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: char, message: &str) -> Result<(), IrError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.error(message))
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Word(x)) if x == w) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn word(&mut self, message: &str) -> Result<String, IrError> {
        match self.peek() {
            Some(Tok::Word(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            _ => Err(self.error(message)),
        }
    }

    fn qname(&mut self, message: &str) -> Result<String, IrError> {
        let col = self.col();
        let w = self.word(message)?;
        if w.contains('[') {
            return Err(self.error_at(col, format!("`{w}` is not a class name")));
        }
        Ok(w)
    }

    fn type_name(&mut self) -> Result<String, IrError> {
        self.word("expected type name")
    }

    fn name(&mut self, message: &str) -> Result<String, IrError> {
        let col = self.col();
        let w = self.word(message)?;
        if w.contains('.') || w.contains('[') {
            return Err(self.error_at(col, format!("`{w}` is not a simple identifier")));
        }
        Ok(w)
    }

    fn reg(&mut self, message: &str) -> Result<Reg, IrError> {
        let col = self.col();
        let w = self.word(message)?;
        if w.contains('.') || w.contains('[') || RESERVED.contains(&w.as_str()) || w == "$" {
            return Err(self.error_at(col, format!("`{w}` is not a register name")));
        }
        Ok(Reg::new(w))
    }

    /// A register that is read; its position is recorded for the
    /// definedness check.
    fn read_reg(&mut self, message: &str) -> Result<Reg, IrError> {
        let col = self.col();
        let r = self.reg(message)?;
        self.reads.push((r.clone(), col));
        Ok(r)
    }

    fn atom(&mut self) -> Result<Atom, IrError> {
        match self.peek() {
            Some(Tok::Int(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(Atom::Int(v))
            }
            Some(Tok::Str(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(Atom::Str(s))
            }
            Some(Tok::Word(w)) if w == "null" => {
                self.pos += 1;
                Ok(Atom::Null)
            }
            Some(Tok::Word(_)) => Ok(Atom::Reg(self.read_reg("expected operand")?)),
            _ => Err(self.error("expected operand")),
        }
    }

    /// Everything after `<` up to and including `>`.
    fn sig_body(&mut self) -> Result<SigBody, IrError> {
        let declaring_class = match self.peek() {
            Some(Tok::Word(w)) if !w.contains('[') => {
                let w = w.clone();
                self.pos += 1;
                w
            }
            _ => return Err(self.sig_error("expected declaring class")),
        };
        if !self.eat_punct(':') {
            return Err(self.sig_error("expected `:` after declaring class"));
        }
        let ty = match self.bump() {
            Some(Token { tok: Tok::Word(w), .. }) => w.clone(),
            _ => return Err(self.sig_error("expected type")),
        };
        let name = match self.bump() {
            Some(Token { tok: Tok::Word(w), .. }) if !w.contains('.') && !w.contains('[') => w.clone(),
            _ => return Err(self.sig_error("expected member name")),
        };
        let body = if self.eat_punct('(') {
            let mut param_types = Vec::new();
            if !self.eat_punct(')') {
                loop {
                    match self.bump() {
                        Some(Token { tok: Tok::Word(w), .. }) => param_types.push(w.clone()),
                        _ => return Err(self.sig_error("expected parameter type")),
                    }
                    if self.eat_punct(')') {
                        break;
                    }
                    if !self.eat_punct(',') {
                        return Err(self.sig_error("expected `,` or `)` in parameter list"));
                    }
                }
            }
            SigBody::Method(MethodSig {
                declaring_class,
                return_type: ty,
                name,
                param_types,
            })
        } else {
            SigBody::Field(FieldSig {
                declaring_class,
                field_type: ty,
                name,
            })
        };
        if !self.eat_punct('>') {
            return Err(self.sig_error("expected `>`"));
        }
        Ok(body)
    }

    fn field_sig(&mut self) -> Result<FieldSig, IrError> {
        self.expect_punct('<', "expected `<`")?;
        match self.sig_body()? {
            SigBody::Field(f) => Ok(f),
            SigBody::Method(_) => Err(self.sig_error("expected a field signature, found a method")),
        }
    }

    fn is_invoke_word(&self) -> Option<Result<InvokeKind, String>> {
        match self.peek() {
            Some(Tok::Word(w)) => match InvokeKind::from_keyword(w) {
                Some(k) => Some(Ok(k)),
                None if w.ends_with("invoke") && !w.contains('.') => Some(Err(w.clone())),
                None => None,
            },
            _ => None,
        }
    }

    fn invoke(&mut self) -> Result<InvokeExpr, IrError> {
        let col = self.col();
        let kind = match self.is_invoke_word() {
            Some(Ok(k)) => k,
            Some(Err(w)) => {
                return Err(IrError::UnknownInvokeKind {
                    file: self.file.to_owned(),
                    line: self.line,
                    column: col,
                    kind: w,
                })
            }
            None => return Err(self.error("expected invoke expression")),
        };
        self.pos += 1;
        let receiver = if kind == InvokeKind::Static {
            if !matches!(self.peek(), Some(Tok::Punct('<'))) {
                return Err(self.error("staticinvoke takes no receiver"));
            }
            None
        } else {
            if matches!(self.peek(), Some(Tok::Punct('<'))) {
                return Err(self.error(format!("{} requires a receiver", kind.keyword())));
            }
            let r = self.read_reg("expected receiver register")?;
            self.expect_punct('.', "expected `.` after receiver")?;
            Some(r)
        };
        self.expect_punct('<', "expected `<`")?;
        let method = match self.sig_body()? {
            SigBody::Method(m) => m,
            SigBody::Field(_) => return Err(self.sig_error("expected a method signature, found a field")),
        };
        self.expect_punct('(', "expected argument list")?;
        let mut args = Vec::new();
        if !self.eat_punct(')') {
            loop {
                args.push(self.atom()?);
                if self.eat_punct(')') {
                    break;
                }
                self.expect_punct(',', "expected `,` or `)` in argument list")?;
            }
        }
        if args.len() != method.param_types.len() {
            return Err(self.error_at(
                col,
                format!(
                    "call passes {} arguments but the signature declares {}",
                    args.len(),
                    method.param_types.len()
                ),
            ));
        }
        Ok(InvokeExpr {
            kind,
            receiver,
            method,
            args,
        })
    }

    fn statement(&mut self) -> Result<StmtKind, IrError> {
        if self.eat_word("return") {
            let value = if self.peek().is_some() { Some(self.atom()?) } else { None };
            return Ok(StmtKind::Return { value });
        }
        if self.is_invoke_word().is_some() {
            let expr = self.invoke()?;
            return Ok(StmtKind::Invoke { dst: None, expr });
        }
        if matches!(self.peek(), Some(Tok::Punct('<'))) {
            let field = self.field_sig()?;
            self.expect_punct('=', "expected `=`")?;
            let value = self.atom()?;
            return Ok(StmtKind::FieldWrite { base: None, field, value });
        }
        if matches!(self.peek_at(1), Some(Tok::Punct('.'))) {
            let base = self.read_reg("expected base register")?;
            self.pos += 1;
            let field = self.field_sig()?;
            self.expect_punct('=', "expected `=`")?;
            let value = self.atom()?;
            return Ok(StmtKind::FieldWrite {
                base: Some(base),
                field,
                value,
            });
        }
        let dst_col = self.col();
        let dst = self.reg("expected statement")?;
        if dst.is_this() {
            return Err(self.error_at(dst_col, "cannot assign to `this`"));
        }
        self.expect_punct('=', "expected `=`")?;
        self.rhs(dst)
    }

    fn rhs(&mut self, dst: Reg) -> Result<StmtKind, IrError> {
        if self.eat_punct('(') {
            let cast_type = self.type_name()?;
            self.expect_punct(')', "expected `)` after cast type")?;
            let src = self.read_reg("expected register after cast")?;
            return Ok(StmtKind::AssignCast { dst, cast_type, src });
        }
        if self.is_invoke_word().is_some() {
            let expr = self.invoke()?;
            return Ok(StmtKind::Invoke { dst: Some(dst), expr });
        }
        if matches!(self.peek(), Some(Tok::Punct('<'))) {
            let field = self.field_sig()?;
            return Ok(StmtKind::FieldRead { dst, base: None, field });
        }
        if matches!(self.peek_at(1), Some(Tok::Punct('.'))) {
            let base = self.read_reg("expected base register")?;
            self.pos += 1;
            let field = self.field_sig()?;
            return Ok(StmtKind::FieldRead {
                dst,
                base: Some(base),
                field,
            });
        }
        let src = self.atom()?;
        Ok(StmtKind::AssignAtom { dst, src })
    }
}
