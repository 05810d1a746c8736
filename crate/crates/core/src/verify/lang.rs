//! The annotated contract mini-language.
//!
//! Integer variables, read-only `int[]` parameters, straight-line code,
//! `if`/`else` and `for` loops with a static step. Annotations live in line
//! comments: `// requires e`, `// ensures e` before a method, `// invariant e`
//! at member level (contract invariant) or before a loop. A comment line that
//! starts with `&&` or `||` continues the previous annotation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LangError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: Pos, msg: String },
    #[error("unknown variable `{name}` at {pos}")]
    UnknownVariable { pos: Pos, name: String },
    #[error("semantic error at {pos}: {msg}")]
    Semantic { pos: Pos, msg: String },
    #[error("unbounded loop at {pos}: {msg}")]
    UnboundedLoop { pos: Pos, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    /// Only produced by VC generation.
    Implies,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::Implies => "==>",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Var(String),
    Index(String, Box<Expr>),
    Length(String),
    Old(Box<Expr>),
    Result,
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Unary(UnOp::Not, Box::new(e))
    }

    pub fn and_all(es: impl IntoIterator<Item = Expr>) -> Expr {
        es.into_iter().reduce(|a, b| Expr::bin(BinOp::And, a, b)).unwrap_or(Expr::Bool(true))
    }

    /// Applies `f` bottom-up; `f` returning `Some` replaces the node without descending.
    pub fn rewrite(&self, f: &mut dyn FnMut(&Expr) -> Option<Expr>) -> Expr {
        if let Some(e) = f(self) {
            return e;
        }
        match self {
            Expr::Int(_) | Expr::Bool(_) | Expr::Var(_) | Expr::Length(_) | Expr::Result => self.clone(),
            Expr::Index(a, i) => Expr::Index(a.clone(), Box::new(i.rewrite(f))),
            Expr::Old(e) => Expr::Old(Box::new(e.rewrite(f))),
            Expr::Unary(op, e) => Expr::Unary(*op, Box::new(e.rewrite(f))),
            Expr::Binary(op, a, b) => Expr::Binary(*op, Box::new(a.rewrite(f)), Box::new(b.rewrite(f))),
        }
    }

    /// Replaces free occurrences of `name` outside `\old`.
    pub fn subst(&self, name: &str, by: &Expr) -> Expr {
        self.rewrite(&mut |e| match e {
            Expr::Var(v) if v == name => Some(by.clone()),
            Expr::Old(_) => Some(e.clone()),
            _ => None,
        })
    }

    pub fn visit(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Index(_, i) => i.visit(f),
            Expr::Old(e) | Expr::Unary(_, e) => e.visit(f),
            Expr::Binary(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }

    pub fn mentions_result(&self) -> bool {
        let mut hit = false;
        self.visit(&mut |e| hit |= matches!(e, Expr::Result));
        hit
    }

    pub fn mentions_old(&self) -> bool {
        let mut hit = false;
        self.visit(&mut |e| hit |= matches!(e, Expr::Old(_)));
        hit
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| match e {
            Expr::Var(v) | Expr::Index(v, _) | Expr::Length(v) => {
                out.insert(v.clone());
            }
            _ => {}
        });
        out
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(v) => write!(f, "{v}"),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Index(a, i) => write!(f, "{a}[{i}]"),
            Expr::Length(a) => write!(f, "{a}.length"),
            Expr::Old(e) => write!(f, "\\old({e})"),
            Expr::Result => write!(f, "\\result"),
            Expr::Unary(UnOp::Neg, e) => write!(f, "-({e})"),
            Expr::Unary(UnOp::Not, e) => write!(f, "!({e})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AnnotationKind {
    Requires,
    Ensures,
    Invariant,
}

impl AnnotationKind {
    pub fn keyword(self) -> &'static str {
        match self {
            AnnotationKind::Requires => "requires",
            AnnotationKind::Ensures => "ensures",
            AnnotationKind::Invariant => "invariant",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Annotation {
    pub kind: AnnotationKind,
    pub expr: Expr,
    pub pos: Pos,
    /// Where it is attached: the contract, a method, or `method:loopN`.
    pub scope: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub array: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stmt {
    Local { name: String, init: Option<Expr> },
    Assign { name: String, value: Expr, pos: Pos },
    If { cond: Expr, then: Vec<Stmt>, els: Vec<Stmt> },
    For(Box<Loop>),
    Return(Option<Expr>, Pos),
    Call { target: Option<String>, method: String, args: Vec<Expr>, pos: Pos },
}

/// `for (int var = init; var < bound; var += step)`, or `<=` when `inclusive`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Loop {
    pub id: usize,
    pub var: String,
    pub init: Expr,
    pub bound: Expr,
    pub inclusive: bool,
    pub step: i64,
    pub body: Vec<Stmt>,
    pub invariants: Vec<Annotation>,
    pub pos: Pos,
}

impl Loop {
    pub fn guard(&self) -> Expr {
        let op = if self.inclusive { BinOp::Le } else { BinOp::Lt };
        Expr::bin(op, Expr::Var(self.var.clone()), self.bound.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Method {
    pub name: String,
    pub returns_int: bool,
    pub constructor: bool,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
    pub requires: Vec<Annotation>,
    pub ensures: Vec<Annotation>,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Field {
    pub name: String,
    pub init: Option<i64>,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub name: String,
    pub fields: Vec<Field>,
    pub invariants: Vec<Annotation>,
    pub methods: Vec<Method>,
}

impl Program {
    pub fn method(&self, name: &str) -> Option<&Method> {
        self.methods.iter().find(|m| m.name == name)
    }

    pub fn field(&self, name: &str) -> Option<&Field> {
        self.fields.iter().find(|f| f.name == name)
    }

    /// Every annotation in source order of attachment.
    pub fn annotations(&self) -> Vec<Annotation> {
        fn loops(stmts: &[Stmt], out: &mut Vec<Annotation>) {
            for s in stmts {
                match s {
                    Stmt::For(l) => {
                        out.extend(l.invariants.iter().cloned());
                        loops(&l.body, out);
                    }
                    Stmt::If { then, els, .. } => {
                        loops(then, out);
                        loops(els, out);
                    }
                    _ => {}
                }
            }
        }
        let mut out = self.invariants.clone();
        for m in &self.methods {
            out.extend(m.requires.iter().cloned());
            out.extend(m.ensures.iter().cloned());
            loops(&m.body, &mut out);
        }
        out
    }

    /// Fields with an initialiser that no method assigns.
    pub fn constants(&self) -> BTreeMap<String, i64> {
        let assigned: BTreeSet<String> = self.methods.iter().flat_map(|m| assigned_vars(&m.body)).collect();
        self.fields
            .iter()
            .filter_map(|f| Some((f.name.clone(), f.init?)))
            .filter(|(n, _)| !assigned.contains(n))
            .collect()
    }

    /// Fields written by `method`, following calls.
    pub fn fields_written(&self, method: &str) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut out = BTreeSet::new();
        self.collect_written(method, &mut seen, &mut out);
        out
    }

    fn collect_written(&self, method: &str, seen: &mut BTreeSet<String>, out: &mut BTreeSet<String>) {
        if !seen.insert(method.to_string()) {
            return;
        }
        let Some(m) = self.method(method) else { return };
        for v in assigned_vars(&m.body) {
            if self.field(&v).is_some() {
                out.insert(v);
            }
        }
        for c in calls(&m.body) {
            self.collect_written(&c, seen, out);
        }
    }

    /// Integer literals appearing anywhere; used to seed boundary values.
    pub fn literals(&self) -> BTreeSet<i64> {
        let mut out: BTreeSet<i64> = self.fields.iter().filter_map(|f| f.init).collect();
        let mut add = |e: &Expr| {
            e.visit(&mut |x| {
                if let Expr::Int(v) = x {
                    out.insert(*v);
                }
            })
        };
        fn stmts_exprs<'a>(s: &'a [Stmt], acc: &mut Vec<&'a Expr>) {
            for st in s {
                match st {
                    Stmt::Local { init: Some(e), .. } | Stmt::Assign { value: e, .. } | Stmt::Return(Some(e), _) => acc.push(e),
                    Stmt::If { cond, then, els } => {
                        acc.push(cond);
                        stmts_exprs(then, acc);
                        stmts_exprs(els, acc);
                    }
                    Stmt::For(l) => {
                        acc.push(&l.init);
                        acc.push(&l.bound);
                        acc.extend(l.invariants.iter().map(|a| &a.expr));
                        stmts_exprs(&l.body, acc);
                    }
                    Stmt::Call { args, .. } => acc.extend(args.iter()),
                    _ => {}
                }
            }
        }
        let mut acc = Vec::new();
        for m in &self.methods {
            stmts_exprs(&m.body, &mut acc);
        }
        let anns = self.annotations();
        acc.extend(anns.iter().map(|a| &a.expr));
        for e in acc {
            add(e);
        }
        out
    }
}

pub fn assigned_vars(stmts: &[Stmt]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for s in stmts {
        match s {
            Stmt::Local { name, .. } | Stmt::Assign { name, .. } => {
                out.insert(name.clone());
            }
            Stmt::Call { target: Some(t), .. } => {
                out.insert(t.clone());
            }
            Stmt::If { then, els, .. } => {
                out.extend(assigned_vars(then));
                out.extend(assigned_vars(els));
            }
            Stmt::For(l) => {
                out.insert(l.var.clone());
                out.extend(assigned_vars(&l.body));
            }
            _ => {}
        }
    }
    out
}

pub fn calls(stmts: &[Stmt]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for s in stmts {
        match s {
            Stmt::Call { method, .. } => {
                out.insert(method.clone());
            }
            Stmt::If { then, els, .. } => {
                out.extend(calls(then));
                out.extend(calls(els));
            }
            Stmt::For(l) => out.extend(calls(&l.body)),
            _ => {}
        }
    }
    out
}

// ---- lexer

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(i64),
    Sym(&'static str),
    Annot(AnnotationKind, String, Pos),
    Old,
    Result,
    Eof,
}

const SYMBOLS: [&str; 28] = [
    "==>", ".", "+=", "-=", "*=", "++", "--", "==", "!=", "<=", ">=", "&&", "||", "{", "}", "(", ")", "[", "]", ";", ",", "=", "<",
    ">", "+", "-", "*", "!",
];

fn syntax(pos: Pos, msg: impl Into<String>) -> LangError {
    LangError::Syntax { pos, msg: msg.into() }
}

fn lex(src: &str, origin: Pos, annotations: bool) -> Result<Vec<(Tok, Pos)>, LangError> {
    let bytes = src.as_bytes();
    let mut out: Vec<(Tok, Pos)> = Vec::new();
    let (mut i, mut line, mut col) = (0usize, origin.line, origin.col);
    let mut last_comment_annot = false;
    macro_rules! bump {
        () => {{
            if bytes[i] == b'\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }
    while i < bytes.len() {
        let c = bytes[i];
        let pos = Pos { line, col };
        if c.is_ascii_whitespace() {
            bump!();
            continue;
        }
        if src[i..].starts_with("//") {
            let end = src[i..].find('\n').map_or(bytes.len(), |k| i + k);
            let text = &src[i + 2..end];
            let body = text.trim_start();
            let body_pos = Pos { line, col: col + 2 + (text.len() - body.len()) };
            let kw = [AnnotationKind::Requires, AnnotationKind::Ensures, AnnotationKind::Invariant].into_iter().find(|k| {
                body.strip_prefix(k.keyword()).is_some_and(|r| r.is_empty() || !r.as_bytes()[0].is_ascii_alphanumeric())
            });
            if let Some(k) = kw {
                let expr_text = &body[k.keyword().len()..];
                let expr_pos = Pos { line, col: body_pos.col + k.keyword().len() };
                out.push((Tok::Annot(k, expr_text.to_string(), expr_pos), body_pos));
                last_comment_annot = true;
            } else if last_comment_annot && (body.starts_with("&&") || body.starts_with("||")) {
                if let Some((Tok::Annot(_, t, _), _)) = out.last_mut() {
                    t.push(' ');
                    t.push_str(body);
                }
            } else {
                last_comment_annot = false;
            }
            while i < end {
                bump!();
            }
            continue;
        }
        last_comment_annot = false;
        if src[i..].starts_with("/*") {
            let Some(k) = src[i + 2..].find("*/") else { return Err(syntax(pos, "unterminated block comment")) };
            let end = i + 2 + k + 2;
            while i < end {
                bump!();
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                bump!();
            }
            let v = src[start..i].parse::<i64>().map_err(|_| syntax(pos, "integer literal out of range"))?;
            out.push((Tok::Num(v), pos));
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                bump!();
            }
            out.push((Tok::Ident(src[start..i].to_string()), pos));
            continue;
        }
        if c == b'\\' {
            let start = i + 1;
            bump!();
            while i < bytes.len() && bytes[i].is_ascii_alphabetic() {
                bump!();
            }
            let tok = match &src[start..i] {
                "old" if annotations => Tok::Old,
                "result" if annotations => Tok::Result,
                w => return Err(syntax(pos, format!("unexpected `\\{w}`"))),
            };
            out.push((tok, pos));
            continue;
        }
        let Some(sym) = SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) else {
            return Err(syntax(pos, format!("unexpected character `{}`", src[i..].chars().next().unwrap_or('?'))));
        };
        for _ in 0..sym.len() {
            bump!();
        }
        out.push((Tok::Sym(sym), pos));
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

// ---- parser

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    loops: usize,
    method: String,
}

const MODIFIERS: [&str; 5] = ["public", "private", "protected", "static", "final"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.at + k).min(self.toks.len() - 1)].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn next(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == w)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        let hit = self.is_sym(s);
        if hit {
            self.next();
        }
        hit
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), LangError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(syntax(self.pos(), format!("expected `{s}`, found {}", describe(self.peek()))))
        }
    }

    fn ident(&mut self) -> Result<String, LangError> {
        match self.next() {
            (Tok::Ident(s), _) => Ok(s),
            (t, p) => Err(syntax(p, format!("expected identifier, found {}", describe(&t)))),
        }
    }

    fn expect_word(&mut self, w: &str) -> Result<(), LangError> {
        if self.is_word(w) {
            self.next();
            Ok(())
        } else {
            Err(syntax(self.pos(), format!("expected `{w}`, found {}", describe(self.peek()))))
        }
    }

    fn skip_modifiers(&mut self) {
        while MODIFIERS.iter().any(|m| self.is_word(m)) {
            self.next();
        }
    }

    fn program(&mut self) -> Result<Program, LangError> {
        self.skip_modifiers();
        if !(self.is_word("contract") || self.is_word("class")) {
            return Err(syntax(self.pos(), "expected `contract` or `class`"));
        }
        self.next();
        let name = self.ident()?;
        self.expect_sym("{")?;
        let mut prog = Program { name: name.clone(), fields: vec![], invariants: vec![], methods: vec![] };
        let mut pending: Vec<(AnnotationKind, String, Pos)> = Vec::new();
        loop {
            if let Tok::Annot(k, text, p) = self.peek().clone() {
                self.next();
                if k == AnnotationKind::Invariant {
                    let expr = parse_annotation_expr(&text, p)?;
                    prog.invariants.push(Annotation { kind: k, expr, pos: p, scope: name.clone() });
                } else {
                    pending.push((k, text, p));
                }
                continue;
            }
            if self.eat_sym("}") {
                break;
            }
            if *self.peek() == Tok::Eof {
                return Err(syntax(self.pos(), "unexpected end of input"));
            }
            self.skip_modifiers();
            let pos = self.pos();
            let is_ctor = self.is_word(&name) && matches!(self.peek_at(1), Tok::Sym("("));
            if is_ctor {
                self.next();
                let m = self.method_rest(name.clone(), false, true, pos, std::mem::take(&mut pending))?;
                prog.methods.push(m);
                continue;
            }
            let ty = self.ident()?;
            if ty != "int" && ty != "void" {
                return Err(syntax(pos, format!("expected `int` or `void`, found `{ty}`")));
            }
            let mname = self.ident()?;
            if self.is_sym("(") {
                let m = self.method_rest(mname, ty == "int", false, pos, std::mem::take(&mut pending))?;
                prog.methods.push(m);
            } else {
                if ty != "int" {
                    return Err(syntax(pos, "fields must be `int`"));
                }
                if let Some((_, _, p)) = pending.first() {
                    return Err(LangError::Semantic { pos: *p, msg: "requires/ensures must precede a method".into() });
                }
                let init = if self.eat_sym("=") { Some(self.const_int()?) } else { None };
                self.expect_sym(";")?;
                prog.fields.push(Field { name: mname, init, pos });
            }
        }
        if let Some((_, _, p)) = pending.first() {
            return Err(LangError::Semantic { pos: *p, msg: "requires/ensures must precede a method".into() });
        }
        if *self.peek() != Tok::Eof {
            return Err(syntax(self.pos(), "trailing input after contract"));
        }
        Ok(prog)
    }

    fn const_int(&mut self) -> Result<i64, LangError> {
        let neg = self.eat_sym("-");
        match self.next() {
            (Tok::Num(v), _) => Ok(if neg { -v } else { v }),
            (t, p) => Err(syntax(p, format!("expected integer constant, found {}", describe(&t)))),
        }
    }

    fn method_rest(
        &mut self,
        name: String,
        returns_int: bool,
        constructor: bool,
        pos: Pos,
        anns: Vec<(AnnotationKind, String, Pos)>,
    ) -> Result<Method, LangError> {
        self.expect_sym("(")?;
        let mut params = Vec::new();
        if !self.is_sym(")") {
            loop {
                self.skip_modifiers();
                self.expect_word("int")?;
                let array = if self.eat_sym("[") {
                    self.expect_sym("]")?;
                    true
                } else {
                    false
                };
                params.push(Param { name: self.ident()?, array });
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        self.method = name.clone();
        self.loops = 0;
        let body = self.block()?;
        let mut requires = Vec::new();
        let mut ensures = Vec::new();
        for (k, text, p) in anns {
            let expr = parse_annotation_expr(&text, p)?;
            let a = Annotation { kind: k, expr, pos: p, scope: name.clone() };
            match k {
                AnnotationKind::Requires => requires.push(a),
                _ => ensures.push(a),
            }
        }
        Ok(Method { name, returns_int, constructor, params, body, requires, ensures, pos })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, LangError> {
        self.expect_sym("{")?;
        let mut out = Vec::new();
        let mut invariants: Vec<(String, Pos)> = Vec::new();
        loop {
            if let Tok::Annot(k, text, p) = self.peek().clone() {
                self.next();
                if k != AnnotationKind::Invariant {
                    return Err(LangError::Semantic { pos: p, msg: format!("`{}` inside a method body", k.keyword()) });
                }
                invariants.push((text, p));
                continue;
            }
            if self.eat_sym("}") {
                break;
            }
            if !invariants.is_empty() && !self.is_word("for") {
                return Err(LangError::Semantic { pos: invariants[0].1, msg: "loop invariant must precede a `for` loop".into() });
            }
            let invs = std::mem::take(&mut invariants);
            self.stmt(&mut out, invs)?;
        }
        if let Some((_, p)) = invariants.first() {
            return Err(LangError::Semantic { pos: *p, msg: "loop invariant must precede a `for` loop".into() });
        }
        Ok(out)
    }

    fn body(&mut self) -> Result<Vec<Stmt>, LangError> {
        if self.is_sym("{") {
            self.block()
        } else {
            let mut out = Vec::new();
            self.stmt(&mut out, vec![])?;
            Ok(out)
        }
    }

    fn stmt(&mut self, out: &mut Vec<Stmt>, invariants: Vec<(String, Pos)>) -> Result<(), LangError> {
        let pos = self.pos();
        if self.is_sym("{") {
            out.extend(self.block()?);
            return Ok(());
        }
        if self.is_word("while") || self.is_word("do") {
            return Err(LangError::UnboundedLoop { pos, msg: "only `for` loops with a static step are allowed".into() });
        }
        if self.is_word("for") {
            self.next();
            let l = self.for_loop(pos, invariants)?;
            out.push(Stmt::For(Box::new(l)));
            return Ok(());
        }
        if self.is_word("if") {
            self.next();
            self.expect_sym("(")?;
            let cond = self.expr()?;
            self.expect_sym(")")?;
            let then = self.body()?;
            let els = if self.is_word("else") {
                self.next();
                self.body()?
            } else {
                vec![]
            };
            out.push(Stmt::If { cond, then, els });
            return Ok(());
        }
        if self.is_word("return") {
            self.next();
            let e = if self.is_sym(";") { None } else { Some(self.expr()?) };
            self.expect_sym(";")?;
            out.push(Stmt::Return(e, pos));
            return Ok(());
        }
        if self.is_word("int") {
            self.next();
            if self.is_sym("[") {
                return Err(LangError::Semantic { pos, msg: "arrays are only allowed as parameters".into() });
            }
            let name = self.ident()?;
            let init = if self.eat_sym("=") { Some(self.expr()?) } else { None };
            self.expect_sym(";")?;
            out.push(Stmt::Local { name, init });
            return Ok(());
        }
        let s = self.simple(pos)?;
        self.expect_sym(";")?;
        out.push(s);
        Ok(())
    }

    /// Assignment, increment or call, without the trailing `;`.
    fn simple(&mut self, pos: Pos) -> Result<Stmt, LangError> {
        if self.is_sym("++") || self.is_sym("--") {
            let (Tok::Sym(op), _) = self.next() else { unreachable!() };
            let name = self.ident()?;
            return Ok(incr(name, if op == "++" { 1 } else { -1 }, pos));
        }
        let name = self.ident()?;
        if self.is_sym("(") {
            let args = self.args()?;
            return Ok(Stmt::Call { target: None, method: name, args, pos });
        }
        if self.is_sym("[") {
            return Err(LangError::Semantic { pos, msg: format!("array `{name}` is read-only") });
        }
        let op_pos = self.pos();
        match self.next() {
            (Tok::Sym("++"), _) => Ok(incr(name, 1, pos)),
            (Tok::Sym("--"), _) => Ok(incr(name, -1, pos)),
            (Tok::Sym("="), _) => {
                if matches!(self.peek(), Tok::Ident(_)) && matches!(self.peek_at(1), Tok::Sym("(")) {
                    let method = self.ident()?;
                    let args = self.args()?;
                    return Ok(Stmt::Call { target: Some(name), method, args, pos });
                }
                Ok(Stmt::Assign { name, value: self.expr()?, pos })
            }
            (Tok::Sym(op @ ("+=" | "-=" | "*=")), _) => {
                let bop = match op {
                    "+=" => BinOp::Add,
                    "-=" => BinOp::Sub,
                    _ => BinOp::Mul,
                };
                let rhs = self.expr()?;
                Ok(Stmt::Assign { value: Expr::bin(bop, Expr::Var(name.clone()), rhs), name, pos })
            }
            (t, _) => Err(syntax(op_pos, format!("expected assignment or call, found {}", describe(&t)))),
        }
    }

    fn args(&mut self) -> Result<Vec<Expr>, LangError> {
        self.expect_sym("(")?;
        let mut args = Vec::new();
        if !self.is_sym(")") {
            loop {
                args.push(self.expr()?);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        Ok(args)
    }

    fn for_loop(&mut self, pos: Pos, invariants: Vec<(String, Pos)>) -> Result<Loop, LangError> {
        let unbounded = |msg: &str| LangError::UnboundedLoop { pos, msg: msg.into() };
        self.expect_sym("(")?;
        if !self.is_word("int") {
            return Err(unbounded("loop must declare its counter: `for (int i = ...`"));
        }
        self.next();
        let var = self.ident()?;
        self.expect_sym("=")?;
        let init = self.expr()?;
        self.expect_sym(";")?;
        let cond = self.expr()?;
        let (inclusive, bound) = match cond {
            Expr::Binary(BinOp::Lt, a, b) if *a == Expr::Var(var.clone()) => (false, *b),
            Expr::Binary(BinOp::Le, a, b) if *a == Expr::Var(var.clone()) => (true, *b),
            _ => return Err(unbounded("condition must be `i < e` or `i <= e`")),
        };
        self.expect_sym(";")?;
        let step_pos = self.pos();
        let step = match self.simple(step_pos)? {
            Stmt::Assign { name, value: Expr::Binary(BinOp::Add, a, b), .. } if name == var && *a == Expr::Var(var.clone()) => {
                match *b {
                    Expr::Int(k) if k > 0 => k,
                    _ => return Err(unbounded("step must be a positive constant")),
                }
            }
            _ => return Err(unbounded("step must increase the counter by a constant")),
        };
        self.expect_sym(")")?;
        let id = self.loops;
        self.loops += 1;
        let scope = format!("{}:loop{id}", self.method);
        let invariants = invariants
            .into_iter()
            .map(|(t, p)| {
                Ok(Annotation { kind: AnnotationKind::Invariant, expr: parse_annotation_expr(&t, p)?, pos: p, scope: scope.clone() })
            })
            .collect::<Result<Vec<_>, LangError>>()?;
        let body = self.body()?;
        Ok(Loop { id, var, init, bound, inclusive, step, body, invariants, pos })
    }

    fn expr(&mut self) -> Result<Expr, LangError> {
        let lhs = self.binary(0)?;
        if self.eat_sym("==>") {
            let rhs = self.expr()?;
            return Ok(Expr::bin(BinOp::Implies, lhs, rhs));
        }
        Ok(lhs)
    }

    fn binary(&mut self, level: usize) -> Result<Expr, LangError> {
        const LEVELS: [&[(&str, BinOp)]; 5] = [
            &[("||", BinOp::Or)],
            &[("&&", BinOp::And)],
            &[("==", BinOp::Eq), ("!=", BinOp::Ne), ("<=", BinOp::Le), (">=", BinOp::Ge), ("<", BinOp::Lt), (">", BinOp::Gt)],
            &[("+", BinOp::Add), ("-", BinOp::Sub)],
            &[("*", BinOp::Mul)],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        loop {
            let Some(&(_, op)) = LEVELS[level].iter().find(|(s, _)| self.is_sym(s)) else { break };
            self.next();
            let rhs = self.binary(level + 1)?;
            lhs = Expr::bin(op, lhs, rhs);
            if level == 2 && LEVELS[2].iter().any(|(s, _)| self.is_sym(s)) {
                return Err(syntax(self.pos(), "comparisons do not chain; add parentheses"));
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, LangError> {
        if self.eat_sym("-") {
            return Ok(match self.unary()? {
                Expr::Int(v) => Expr::Int(-v),
                e => Expr::Unary(UnOp::Neg, Box::new(e)),
            });
        }
        if self.eat_sym("!") {
            return Ok(Expr::not(self.unary()?));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, LangError> {
        match self.next() {
            (Tok::Num(v), _) => Ok(Expr::Int(v)),
            (Tok::Ident(w), _) if w == "true" => Ok(Expr::Bool(true)),
            (Tok::Ident(w), _) if w == "false" => Ok(Expr::Bool(false)),
            (Tok::Ident(w), _) => {
                if self.eat_sym("[") {
                    let i = self.expr()?;
                    self.expect_sym("]")?;
                    Ok(Expr::Index(w, Box::new(i)))
                } else if self.eat_sym(".") {
                    self.expect_word("length")?;
                    Ok(Expr::Length(w))
                } else {
                    Ok(Expr::Var(w))
                }
            }
            (Tok::Result, _) => Ok(Expr::Result),
            (Tok::Old, _) => {
                self.expect_sym("(")?;
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(Expr::Old(Box::new(e)))
            }
            (Tok::Sym("("), _) => {
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            (t, p) => Err(syntax(p, format!("expected expression, found {}", describe(&t)))),
        }
    }
}

fn incr(name: String, by: i64, pos: Pos) -> Stmt {
    Stmt::Assign { value: Expr::bin(BinOp::Add, Expr::Var(name.clone()), Expr::Int(by)), name, pos }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Num(v) => format!("`{v}`"),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::Annot(k, _, _) => format!("`{}` annotation", k.keyword()),
        Tok::Old => "`\\old`".into(),
        Tok::Result => "`\\result`".into(),
        Tok::Eof => "end of input".into(),
    }
}

fn parse_annotation_expr(text: &str, pos: Pos) -> Result<Expr, LangError> {
    let trimmed = text.trim_end();
    let trimmed = trimmed.strip_suffix(';').unwrap_or(trimmed);
    let toks = lex(trimmed, pos, true)?;
    let mut p = Parser { toks, at: 0, loops: 0, method: String::new() };
    if *p.peek() == Tok::Eof {
        return Err(syntax(pos, "empty annotation"));
    }
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return Err(syntax(p.pos(), format!("unexpected {} in annotation", describe(p.peek()))));
    }
    Ok(e)
}

// ---- semantic checks

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Ty {
    Int,
    Bool,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Ctx {
    Code,
    Requires,
    Ensures { int_result: bool },
    Invariant,
    LoopInvariant,
}

struct Scope<'a> {
    prog: &'a Program,
    ints: BTreeSet<String>,
    arrays: BTreeSet<String>,
}

impl Scope<'_> {
    fn declare(&mut self, name: &str, pos: Pos) -> Result<(), LangError> {
        if self.ints.contains(name) || self.arrays.contains(name) {
            return Err(LangError::Semantic { pos, msg: format!("`{name}` is already declared") });
        }
        self.ints.insert(name.to_string());
        Ok(())
    }

    fn ty(&self, e: &Expr, ctx: Ctx, pos: Pos) -> Result<Ty, LangError> {
        let sem = |msg: String| LangError::Semantic { pos, msg };
        let want = |t: Ty, got: Ty, what: &str| if t == got { Ok(()) } else { Err(sem(format!("{what} must be {t:?}, found {got:?}"))) };
        match e {
            Expr::Int(_) => Ok(Ty::Int),
            Expr::Bool(_) => Ok(Ty::Bool),
            Expr::Var(v) => {
                if self.ints.contains(v) {
                    Ok(Ty::Int)
                } else if self.arrays.contains(v) {
                    Err(sem(format!("array `{v}` used as an integer")))
                } else {
                    Err(LangError::UnknownVariable { pos, name: v.clone() })
                }
            }
            Expr::Index(a, i) => {
                if !self.arrays.contains(a) {
                    return if self.ints.contains(a) {
                        Err(sem(format!("`{a}` is not an array")))
                    } else {
                        Err(LangError::UnknownVariable { pos, name: a.clone() })
                    };
                }
                want(Ty::Int, self.ty(i, ctx, pos)?, "index")?;
                Ok(Ty::Int)
            }
            Expr::Length(a) => {
                if self.arrays.contains(a) {
                    Ok(Ty::Int)
                } else if self.ints.contains(a) {
                    Err(sem(format!("`{a}` is not an array")))
                } else {
                    Err(LangError::UnknownVariable { pos, name: a.clone() })
                }
            }
            Expr::Result => match ctx {
                Ctx::Ensures { int_result: true } => Ok(Ty::Int),
                Ctx::Ensures { int_result: false } => Err(sem("`\\result` in a method without a result".into())),
                _ => Err(sem("`\\result` is only valid in `ensures`".into())),
            },
            Expr::Old(inner) => match ctx {
                Ctx::Ensures { .. } => {
                    if inner.mentions_old() || inner.mentions_result() {
                        return Err(sem("`\\old` argument must be a pre-state expression".into()));
                    }
                    self.ty(inner, ctx, pos)
                }
                _ => Err(sem("`\\old` is only valid in `ensures`".into())),
            },
            Expr::Unary(UnOp::Neg, x) => {
                want(Ty::Int, self.ty(x, ctx, pos)?, "operand of `-`")?;
                Ok(Ty::Int)
            }
            Expr::Unary(UnOp::Not, x) => {
                want(Ty::Bool, self.ty(x, ctx, pos)?, "operand of `!`")?;
                Ok(Ty::Bool)
            }
            Expr::Binary(op, a, b) => {
                let (ta, tb) = (self.ty(a, ctx, pos)?, self.ty(b, ctx, pos)?);
                match op {
                    BinOp::Add | BinOp::Sub | BinOp::Mul => {
                        want(Ty::Int, ta, "arithmetic operand")?;
                        want(Ty::Int, tb, "arithmetic operand")?;
                        Ok(Ty::Int)
                    }
                    BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        want(Ty::Int, ta, "comparison operand")?;
                        want(Ty::Int, tb, "comparison operand")?;
                        Ok(Ty::Bool)
                    }
                    BinOp::Eq | BinOp::Ne => {
                        want(ta, tb, "right operand of equality")?;
                        Ok(Ty::Bool)
                    }
                    BinOp::And | BinOp::Or | BinOp::Implies => {
                        want(Ty::Bool, ta, "logical operand")?;
                        want(Ty::Bool, tb, "logical operand")?;
                        Ok(Ty::Bool)
                    }
                }
            }
        }
    }

    fn cond(&self, e: &Expr, ctx: Ctx, pos: Pos) -> Result<(), LangError> {
        match self.ty(e, ctx, pos)? {
            Ty::Bool => Ok(()),
            Ty::Int => Err(LangError::Semantic { pos, msg: "condition must be boolean".into() }),
        }
    }

    fn int(&self, e: &Expr, pos: Pos) -> Result<(), LangError> {
        match self.ty(e, Ctx::Code, pos)? {
            Ty::Int => Ok(()),
            Ty::Bool => Err(LangError::Semantic { pos, msg: "expected an integer expression".into() }),
        }
    }

    fn stmts(&mut self, m: &Method, stmts: &[Stmt]) -> Result<(), LangError> {
        for s in stmts {
            match s {
                Stmt::Local { name, init } => {
                    if let Some(e) = init {
                        self.int(e, m.pos)?;
                    }
                    self.declare(name, m.pos)?;
                }
                Stmt::Assign { name, value, pos } => {
                    self.assignable(name, *pos)?;
                    self.int(value, *pos)?;
                }
                Stmt::If { cond, then, els } => {
                    self.cond(cond, Ctx::Code, m.pos)?;
                    self.stmts(m, then)?;
                    self.stmts(m, els)?;
                }
                Stmt::Return(e, pos) => match (e, m.returns_int) {
                    (Some(e), true) => self.int(e, *pos)?,
                    (None, false) => {}
                    (Some(_), false) => return Err(LangError::Semantic { pos: *pos, msg: "`void` method returns a value".into() }),
                    (None, true) => return Err(LangError::Semantic { pos: *pos, msg: "missing return value".into() }),
                },
                Stmt::Call { target, method, args, pos } => {
                    let sem = |msg: String| LangError::Semantic { pos: *pos, msg };
                    let callee = self.prog.method(method).ok_or_else(|| sem(format!("unknown method `{method}`")))?;
                    if callee.constructor {
                        return Err(sem("constructors cannot be called".into()));
                    }
                    if callee.params.len() != args.len() {
                        return Err(sem(format!("`{method}` takes {} arguments", callee.params.len())));
                    }
                    for (p, a) in callee.params.iter().zip(args) {
                        if p.array {
                            match a {
                                Expr::Var(v) if self.arrays.contains(v) => {}
                                _ => return Err(sem(format!("argument `{}` must be an array parameter", p.name))),
                            }
                        } else {
                            self.int(a, *pos)?;
                        }
                    }
                    if let Some(t) = target {
                        if !callee.returns_int {
                            return Err(sem(format!("`{method}` returns no value")));
                        }
                        self.assignable(t, *pos)?;
                    }
                }
                Stmt::For(l) => {
                    self.int(&l.init, l.pos)?;
                    self.declare(&l.var, l.pos)?;
                    self.int(&l.bound, l.pos)?;
                    for inv in &l.invariants {
                        self.cond(&inv.expr, Ctx::LoopInvariant, inv.pos)?;
                    }
                    let mut written = assigned_vars(&l.body);
                    for c in calls(&l.body) {
                        written.extend(self.prog.fields_written(&c));
                    }
                    let mut frozen = l.bound.vars();
                    frozen.insert(l.var.clone());
                    if let Some(v) = frozen.intersection(&written).next() {
                        return Err(LangError::UnboundedLoop { pos: l.pos, msg: format!("loop body assigns `{v}`") });
                    }
                    self.stmts(m, &l.body)?;
                }
            }
        }
        Ok(())
    }

    fn assignable(&self, name: &str, pos: Pos) -> Result<(), LangError> {
        if self.arrays.contains(name) {
            return Err(LangError::Semantic { pos, msg: format!("array `{name}` is read-only") });
        }
        if !self.ints.contains(name) {
            return Err(LangError::UnknownVariable { pos, name: name.to_string() });
        }
        Ok(())
    }
}

fn check(prog: &mut Program) -> Result<(), LangError> {
    let mut names = BTreeSet::new();
    for f in &prog.fields {
        if !names.insert(f.name.clone()) {
            return Err(LangError::Semantic { pos: f.pos, msg: format!("duplicate field `{}`", f.name) });
        }
    }
    let fields: BTreeSet<String> = names;
    let mut mnames = BTreeSet::new();
    for m in &prog.methods {
        if !mnames.insert(m.name.clone()) {
            return Err(LangError::Semantic { pos: m.pos, msg: format!("duplicate method `{}`", m.name) });
        }
    }
    let field_scope = Scope { prog, ints: fields.clone(), arrays: BTreeSet::new() };
    for inv in &prog.invariants {
        field_scope.cond(&inv.expr, Ctx::Invariant, inv.pos)?;
    }
    let mut rewritten = Vec::new();
    for m in &prog.methods {
        let mut scope = Scope { prog, ints: fields.clone(), arrays: BTreeSet::new() };
        for p in &m.params {
            if scope.ints.contains(&p.name) || scope.arrays.contains(&p.name) {
                return Err(LangError::Semantic { pos: m.pos, msg: format!("parameter `{}` shadows a name", p.name) });
            }
            if p.array {
                scope.arrays.insert(p.name.clone());
            } else {
                scope.ints.insert(p.name.clone());
            }
        }
        for a in &m.requires {
            scope.cond(&a.expr, Ctx::Requires, a.pos)?;
        }
        for a in &m.ensures {
            scope.cond(&a.expr, Ctx::Ensures { int_result: m.returns_int }, a.pos)?;
        }
        scope.stmts(m, &m.body)?;
        // Parameters in a postcondition denote their values on entry.
        let params: BTreeSet<&str> = m.params.iter().filter(|p| !p.array).map(|p| p.name.as_str()).collect();
        let ensures: Vec<Annotation> = m
            .ensures
            .iter()
            .map(|a| Annotation {
                expr: a.expr.rewrite(&mut |e| match e {
                    Expr::Var(v) if params.contains(v.as_str()) => Some(Expr::Old(Box::new(e.clone()))),
                    Expr::Old(_) => Some(e.clone()),
                    _ => None,
                }),
                ..a.clone()
            })
            .collect();
        rewritten.push(ensures);
    }
    check_recursion(prog)?;
    for (m, ens) in prog.methods.iter_mut().zip(rewritten) {
        m.ensures = ens;
    }
    Ok(())
}

fn check_recursion(prog: &Program) -> Result<(), LangError> {
    fn visit<'a>(prog: &'a Program, m: &'a Method, stack: &mut Vec<&'a str>) -> Result<(), LangError> {
        if stack.contains(&m.name.as_str()) {
            return Err(LangError::Semantic { pos: m.pos, msg: format!("recursive call through `{}`", m.name) });
        }
        stack.push(&m.name);
        for c in calls(&m.body) {
            if let Some(callee) = prog.method(&c) {
                visit(prog, callee, stack)?;
            }
        }
        stack.pop();
        Ok(())
    }
    for m in &prog.methods {
        visit(prog, m, &mut Vec::new())?;
    }
    Ok(())
}

/// Parses and checks a contract, returning the program and its annotations.
pub fn parse_annotations(source: &str) -> Result<(Program, Vec<Annotation>), LangError> {
    let toks = lex(source, Pos { line: 1, col: 1 }, false)?;
    let mut p = Parser { toks, at: 0, loops: 0, method: String::new() };
    let mut prog = p.program()?;
    check(&mut prog)?;
    let anns = prog.annotations();
    Ok((prog, anns))
}

pub fn parse_program(source: &str) -> Result<Program, LangError> {
    parse_annotations(source).map(|(p, _)| p)
}

pub fn parse_expr(text: &str) -> Result<Expr, LangError> {
    parse_annotation_expr(text, Pos { line: 1, col: 1 })
}
