//! Verification conditions by weakest precondition, and their bounded discharge.
//!
//! Loops use their invariants: one condition for entry, one for preservation
//! and the continuation under the invariant and the negated guard, with every
//! variable the loop writes renamed to a fresh one. Calls are inlined;
//! the callee's precondition becomes a condition of the caller.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::lang::{assigned_vars, calls, BinOp, Expr, Method, Program, Stmt, UnOp};
use crate::crypto::Digest;

/// A closed formula, universally quantified over its free variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vc {
    /// Unique identifier: `tag#k`.
    pub id: String,
    /// `method:ensures`, `method:loop0:init`, ...; the handle for required specs.
    pub tag: String,
    pub formula: Expr,
}

impl Vc {
    pub fn text(&self) -> String {
        format!("{}: {}", self.id, self.formula)
    }

    pub fn digest(&self) -> Digest {
        Digest::of(self.text().as_bytes())
    }

    /// Free variables; each array read is its own variable, named by its text.
    pub fn free_vars(&self) -> Vec<String> {
        let mut out = BTreeSet::new();
        collect_atoms(&self.formula, &mut out);
        out.into_iter().collect()
    }
}

fn collect_atoms(e: &Expr, out: &mut BTreeSet<String>) {
    match e {
        Expr::Var(v) => {
            out.insert(v.clone());
        }
        Expr::Index(..) | Expr::Length(_) => {
            out.insert(e.to_string());
        }
        Expr::Old(x) | Expr::Unary(_, x) => collect_atoms(x, out),
        Expr::Binary(_, a, b) => {
            collect_atoms(a, out);
            collect_atoms(b, out);
        }
        _ => {}
    }
}

#[derive(Clone, Debug)]
enum Goal {
    Leaf(String, Expr),
    And(Vec<Goal>),
    Implies(Expr, Box<Goal>),
}

impl Goal {
    fn map(&self, f: &mut dyn FnMut(&Expr) -> Expr) -> Goal {
        match self {
            Goal::Leaf(t, e) => Goal::Leaf(t.clone(), f(e)),
            Goal::And(gs) => Goal::And(gs.iter().map(|g| g.map(f)).collect()),
            Goal::Implies(h, g) => Goal::Implies(f(h), Box::new(g.map(f))),
        }
    }

    fn subst(&self, name: &str, by: &Expr) -> Goal {
        self.map(&mut |e| e.subst(name, by))
    }

    fn flatten(&self, hyps: &mut Vec<Expr>, out: &mut Vec<(String, Vec<Expr>, Expr)>) {
        match self {
            Goal::Leaf(t, e) => out.push((t.clone(), hyps.clone(), e.clone())),
            Goal::And(gs) => gs.iter().for_each(|g| g.flatten(hyps, out)),
            Goal::Implies(h, g) => {
                hyps.push(h.clone());
                g.flatten(hyps, out);
                hyps.pop();
            }
        }
    }
}

enum Ret<'a> {
    /// A return from the verified method: `\result` receives the value.
    Method(&'a Goal),
    /// A return from an inlined call: the caller's target receives the value.
    Inline(Option<&'a str>, &'a Goal),
}

struct Gen<'p> {
    prog: &'p Program,
    method: String,
    fresh: usize,
}

impl Gen<'_> {
    fn fresh(&mut self, base: &str) -> String {
        self.fresh += 1;
        format!("{base}#{}", self.fresh)
    }

    fn seq(&mut self, stmts: &[Stmt], post: Goal, ret: &Ret) -> Goal {
        stmts.iter().rev().fold(post, |g, s| self.stmt(s, g, ret))
    }

    fn stmt(&mut self, s: &Stmt, post: Goal, ret: &Ret) -> Goal {
        match s {
            Stmt::Local { name, init } => post.subst(name, init.as_ref().unwrap_or(&Expr::Int(0))),
            Stmt::Assign { name, value, .. } => post.subst(name, value),
            Stmt::If { cond, then, els } => {
                let a = self.seq(then, post.clone(), ret);
                let b = self.seq(els, post, ret);
                Goal::And(vec![Goal::Implies(cond.clone(), Box::new(a)), Goal::Implies(Expr::not(cond.clone()), Box::new(b))])
            }
            Stmt::Return(e, _) => match (ret, e) {
                (Ret::Method(g), Some(e)) => g.map(&mut |x| subst_result(x, e)),
                (Ret::Method(g), None) => (*g).clone(),
                (Ret::Inline(Some(t), g), Some(e)) => g.subst(t, e),
                (Ret::Inline(_, g), _) => (*g).clone(),
            },
            Stmt::Call { target, method, args, .. } => self.call(target.as_deref(), method, args, post),
            Stmt::For(l) => {
                let mut modified = assigned_vars(&l.body);
                for c in calls(&l.body) {
                    modified.extend(self.prog.fields_written(&c));
                }
                modified.insert(l.var.clone());
                let renames: Vec<(String, Expr)> = modified.iter().map(|v| (v.clone(), Expr::Var(self.fresh(v)))).collect();
                let havoc = |g: &Goal| renames.iter().fold(g.clone(), |g, (v, e)| g.subst(v, e));
                let havoc_e = |x: &Expr| renames.iter().fold(x.clone(), |x, (v, e)| x.subst(v, e));
                let scope = format!("{}:loop{}", self.method, l.id);
                let inv = Expr::and_all(l.invariants.iter().map(|a| a.expr.clone()));
                let init = Goal::Leaf(format!("{scope}:init"), inv.clone());
                let mut body = l.body.clone();
                body.push(Stmt::Assign {
                    name: l.var.clone(),
                    value: Expr::bin(BinOp::Add, Expr::Var(l.var.clone()), Expr::Int(l.step)),
                    pos: l.pos,
                });
                let preserved = self.seq(&body, Goal::Leaf(format!("{scope}:preserve"), inv.clone()), ret);
                let hyp_in = Expr::bin(BinOp::And, inv.clone(), l.guard());
                let hyp_out = Expr::bin(BinOp::And, inv, Expr::not(l.guard()));
                let preserve = Goal::Implies(havoc_e(&hyp_in), Box::new(havoc(&preserved)));
                let exit = Goal::Implies(havoc_e(&hyp_out), Box::new(havoc(&post)));
                Goal::And(vec![init, preserve, exit]).subst(&l.var, &l.init)
            }
        }
    }

    fn call(&mut self, target: Option<&str>, name: &str, args: &[Expr], post: Goal) -> Goal {
        let callee: &Method = self.prog.method(name).expect("checked call");
        let mut locals: BTreeSet<String> = assigned_vars(&callee.body);
        locals.retain(|v| self.prog.field(v).is_none());
        let mut ints = Vec::new();
        let mut arrays = BTreeMap::new();
        for (p, a) in callee.params.iter().zip(args) {
            if p.array {
                let Expr::Var(src) = a else { unreachable!("checked array argument") };
                arrays.insert(p.name.clone(), src.clone());
            } else {
                locals.insert(p.name.clone());
                ints.push((p.name.clone(), a.clone()));
            }
        }
        let renamed: BTreeMap<String, String> = locals.iter().map(|v| (v.clone(), self.fresh(v))).collect();
        let rename = |e: &Expr| {
            e.rewrite(&mut |x| match x {
                Expr::Var(v) => renamed.get(v).map(|n| Expr::Var(n.clone())),
                Expr::Index(a, i) => {
                    let base = arrays.get(a).cloned().unwrap_or_else(|| a.clone());
                    Some(Expr::Index(base, Box::new(rename_inner(i, &renamed))))
                }
                Expr::Length(a) => Some(Expr::Length(arrays.get(a).cloned().unwrap_or_else(|| a.clone()))),
                _ => None,
            })
        };
        let body = rename_stmts(&callee.body, &rename, &renamed);
        let tag = format!("{}:call-{}:requires", self.method, name);
        let mut pre: Vec<Expr> = self.prog.invariants.iter().map(|a| rename(&a.expr)).collect();
        pre.extend(callee.requires.iter().map(|a| rename(&a.expr)));
        let scoped = format!("{}/{name}", self.method);
        let saved = std::mem::replace(&mut self.method, scoped);
        let ret = Ret::Inline(target, &post);
        let inner = self.seq(&body, post.clone(), &ret);
        self.method = saved;
        let mut g = Goal::And(vec![Goal::Leaf(tag, Expr::and_all(pre)), inner]);
        for (p, a) in ints.iter().rev() {
            g = g.subst(&renamed[p], a);
        }
        g
    }
}

fn rename_inner(e: &Expr, renamed: &BTreeMap<String, String>) -> Expr {
    e.rewrite(&mut |x| match x {
        Expr::Var(v) => renamed.get(v).map(|n| Expr::Var(n.clone())),
        _ => None,
    })
}

fn rename_stmts(stmts: &[Stmt], f: &dyn Fn(&Expr) -> Expr, renamed: &BTreeMap<String, String>) -> Vec<Stmt> {
    let name = |n: &str| renamed.get(n).cloned().unwrap_or_else(|| n.to_string());
    stmts
        .iter()
        .map(|s| match s {
            Stmt::Local { name: n, init } => Stmt::Local { name: name(n), init: init.as_ref().map(f) },
            Stmt::Assign { name: n, value, pos } => Stmt::Assign { name: name(n), value: f(value), pos: *pos },
            Stmt::If { cond, then, els } => {
                Stmt::If { cond: f(cond), then: rename_stmts(then, f, renamed), els: rename_stmts(els, f, renamed) }
            }
            Stmt::Return(e, p) => Stmt::Return(e.as_ref().map(f), *p),
            Stmt::Call { target, method, args, pos } => Stmt::Call {
                target: target.as_deref().map(name),
                method: method.clone(),
                args: args.iter().map(f).collect(),
                pos: *pos,
            },
            Stmt::For(l) => {
                let mut l = (**l).clone();
                l.var = name(&l.var);
                l.init = f(&l.init);
                l.bound = f(&l.bound);
                l.body = rename_stmts(&l.body, f, renamed);
                for a in &mut l.invariants {
                    a.expr = f(&a.expr);
                }
                Stmt::For(Box::new(l))
            }
        })
        .collect()
}

fn subst_result(e: &Expr, by: &Expr) -> Expr {
    e.rewrite(&mut |x| matches!(x, Expr::Result).then(|| by.clone()))
}

fn strip_old(e: &Expr) -> Expr {
    e.rewrite(&mut |x| match x {
        Expr::Old(inner) => Some(strip_old(inner)),
        _ => None,
    })
}

/// Verification conditions of every method, in source order.
pub fn gen_vcs(prog: &Program) -> Vec<Vc> {
    let consts = prog.constants();
    let mut out = Vec::new();
    for m in &prog.methods {
        let mut leaves: Vec<Goal> = m.ensures.iter().map(|a| Goal::Leaf(format!("{}:ensures", m.name), a.expr.clone())).collect();
        leaves.extend(prog.invariants.iter().map(|a| Goal::Leaf(format!("{}:class-invariant", m.name), a.expr.clone())));
        let post = Goal::And(leaves);
        let mut g = Gen { prog, method: m.name.clone(), fresh: 0 };
        let goal = g.seq(&m.body, post.clone(), &Ret::Method(&post));
        let mut hyps: Vec<Expr> = m.requires.iter().map(|a| a.expr.clone()).collect();
        if !m.constructor {
            hyps.extend(prog.invariants.iter().map(|a| a.expr.clone()));
        }
        let mut flat = Vec::new();
        goal.flatten(&mut Vec::new(), &mut flat);
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for (tag, hs, concl) in flat {
            let all_hyps = Expr::and_all(hyps.iter().cloned().chain(hs));
            let mut f = strip_old(&Expr::bin(BinOp::Implies, all_hyps, concl));
            if m.constructor {
                for fld in prog.fields.iter().filter(|x| !consts.contains_key(&x.name)) {
                    f = f.subst(&fld.name, &Expr::Int(fld.init.unwrap_or(0)));
                }
            }
            for (c, v) in &consts {
                f = f.subst(c, &Expr::Int(*v));
            }
            let k = counts.entry(tag.clone()).or_default();
            out.push(Vc { id: format!("{tag}#{k}"), tag, formula: simplify(&f) });
            *k += 1;
        }
    }
    out
}

/// Constant folding of the boolean skeleton; keeps formulas short and digests stable.
pub fn simplify(e: &Expr) -> Expr {
    match e {
        Expr::Unary(UnOp::Not, x) => match simplify(x) {
            Expr::Bool(b) => Expr::Bool(!b),
            s => Expr::not(s),
        },
        Expr::Binary(op @ (BinOp::And | BinOp::Or | BinOp::Implies), a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            match (op, &a, &b) {
                (BinOp::And, Expr::Bool(true), _) => b,
                (BinOp::And, _, Expr::Bool(true)) => a,
                (BinOp::And, Expr::Bool(false), _) | (BinOp::And, _, Expr::Bool(false)) => Expr::Bool(false),
                (BinOp::Or, Expr::Bool(false), _) => b,
                (BinOp::Or, _, Expr::Bool(false)) => a,
                (BinOp::Or, Expr::Bool(true), _) | (BinOp::Or, _, Expr::Bool(true)) => Expr::Bool(true),
                (BinOp::Implies, Expr::Bool(true), _) => b,
                (BinOp::Implies, Expr::Bool(false), _) | (BinOp::Implies, _, Expr::Bool(true)) => Expr::Bool(true),
                _ => Expr::bin(*op, a, b),
            }
        }
        _ => e.clone(),
    }
}

// ---- bounded discharge

pub const DEFAULT_DISCHARGE_BOUND: i64 = 64;
/// Larger domains are reported as too large rather than enumerated.
pub const MAX_POINTS: u64 = 50_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DischargeResult {
    Discharged,
    Counterexample { assignment: BTreeMap<String, i64> },
    TooLarge,
}

impl fmt::Display for DischargeResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DischargeResult::Discharged => write!(f, "discharged"),
            DischargeResult::TooLarge => write!(f, "too-large"),
            DischargeResult::Counterexample { assignment } => {
                let parts: Vec<String> = assignment.iter().map(|(k, v)| format!("{k}={v}")).collect();
                write!(f, "counterexample {}", parts.join(","))
            }
        }
    }
}

/// Evidence for one condition: what was enumerated and what was found.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DischargeTranscript {
    pub id: String,
    pub tag: String,
    pub digest: Digest,
    pub bound: i64,
    pub vars: Vec<String>,
    pub points: u64,
    pub result: DischargeResult,
}

enum Compiled {
    Const(i64),
    Slot(usize),
    Neg(Box<Compiled>),
    Not(Box<Compiled>),
    Bin(BinOp, Box<Compiled>, Box<Compiled>),
}

fn compile(e: &Expr, slots: &BTreeMap<String, usize>) -> Compiled {
    match e {
        Expr::Int(v) => Compiled::Const(*v),
        Expr::Bool(b) => Compiled::Const(*b as i64),
        Expr::Var(v) => Compiled::Slot(slots[v]),
        Expr::Index(..) | Expr::Length(_) => Compiled::Slot(slots[&e.to_string()]),
        Expr::Old(x) => compile(x, slots),
        Expr::Result => Compiled::Const(0),
        Expr::Unary(UnOp::Neg, x) => Compiled::Neg(Box::new(compile(x, slots))),
        Expr::Unary(UnOp::Not, x) => Compiled::Not(Box::new(compile(x, slots))),
        Expr::Binary(op, a, b) => Compiled::Bin(*op, Box::new(compile(a, slots)), Box::new(compile(b, slots))),
    }
}

/// Arithmetic wraps; values in the bounded domain stay far from the limits.
fn run(c: &Compiled, env: &[i64]) -> i64 {
    match c {
        Compiled::Const(v) => *v,
        Compiled::Slot(k) => env[*k],
        Compiled::Neg(x) => run(x, env).wrapping_neg(),
        Compiled::Not(x) => (run(x, env) == 0) as i64,
        Compiled::Bin(op, a, b) => {
            let x = run(a, env);
            match op {
                BinOp::And if x == 0 => return 0,
                BinOp::Or if x != 0 => return 1,
                BinOp::Implies if x == 0 => return 1,
                _ => {}
            }
            let y = run(b, env);
            match op {
                BinOp::Add => x.wrapping_add(y),
                BinOp::Sub => x.wrapping_sub(y),
                BinOp::Mul => x.wrapping_mul(y),
                BinOp::Eq => (x == y) as i64,
                BinOp::Ne => (x != y) as i64,
                BinOp::Lt => (x < y) as i64,
                BinOp::Le => (x <= y) as i64,
                BinOp::Gt => (x > y) as i64,
                BinOp::Ge => (x >= y) as i64,
                BinOp::And | BinOp::Or | BinOp::Implies => (y != 0) as i64,
            }
        }
    }
}

/// Domain values in the order 0, 1, -1, 2, -2, ... so small counterexamples come first.
fn domain(bound: i64) -> Vec<i64> {
    let mut d = vec![0];
    for k in 1..=bound {
        d.push(k);
        d.push(-k);
    }
    d
}

fn conjuncts(e: &Expr, out: &mut Vec<Expr>) {
    match e {
        Expr::Binary(BinOp::And, a, b) => {
            conjuncts(a, out);
            conjuncts(b, out);
        }
        _ => out.push(e.clone()),
    }
}

fn atoms(e: &Expr) -> BTreeSet<String> {
    let mut s = BTreeSet::new();
    collect_atoms(e, &mut s);
    s
}

/// First point of `[-bound, bound]^vars` where `e` evaluates to `want`.
fn search(e: &Expr, vars: &[String], dom: &[i64], want: bool) -> Option<BTreeMap<String, i64>> {
    let slots: BTreeMap<String, usize> = vars.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
    let code = compile(e, &slots);
    let k = vars.len();
    let mut idx = vec![0usize; k];
    let mut env = vec![dom[0]; k];
    loop {
        if (run(&code, &env) != 0) == want {
            return Some(vars.iter().cloned().zip(env.iter().copied()).collect());
        }
        let mut d = 0;
        while d < k {
            idx[d] += 1;
            if idx[d] < dom.len() {
                env[d] = dom[idx[d]];
                break;
            }
            idx[d] = 0;
            env[d] = dom[0];
            d += 1;
        }
        if d == k {
            return None;
        }
    }
}

/// Checks one condition on every point of `[-bound, bound]^k`.
///
/// Hypotheses sharing no variable with the conclusion, directly or through
/// other hypotheses, only need to be satisfiable: the condition holds
/// vacuously otherwise, and their witnesses complete any counterexample.
pub fn discharge_one(vc: &Vc, bound: i64) -> DischargeTranscript {
    let vars = vc.free_vars();
    let dom = domain(bound);
    let size = |n: usize| (dom.len() as u64).checked_pow(n as u32).unwrap_or(u64::MAX);
    let mut t = DischargeTranscript {
        id: vc.id.clone(),
        tag: vc.tag.clone(),
        digest: vc.digest(),
        bound,
        vars: vars.clone(),
        points: 0,
        result: DischargeResult::TooLarge,
    };
    let (hyps, concl) = match &vc.formula {
        Expr::Binary(BinOp::Implies, h, c) => {
            let mut hs = Vec::new();
            conjuncts(h, &mut hs);
            (hs, (**c).clone())
        }
        f => (vec![], f.clone()),
    };
    // Components over shared variables; the conclusion seeds the main one.
    let mut main_vars = atoms(&concl);
    let mut main = Vec::new();
    let mut rest: Vec<Expr> = Vec::new();
    for h in hyps {
        if atoms(&h).is_empty() {
            main.push(h);
        } else {
            rest.push(h);
        }
    }
    loop {
        let (joined, other): (Vec<Expr>, Vec<Expr>) = rest.into_iter().partition(|h| !atoms(h).is_disjoint(&main_vars));
        rest = other;
        if joined.is_empty() {
            break;
        }
        for h in &joined {
            main_vars.extend(atoms(h));
        }
        main.extend(joined);
    }
    let mut side: Vec<(Vec<Expr>, BTreeSet<String>)> = Vec::new();
    for h in rest {
        let hv = atoms(&h);
        let hits: Vec<usize> = (0..side.len()).filter(|&i| !side[i].1.is_disjoint(&hv)).collect();
        let mut comp = (vec![h], hv);
        for &i in hits.iter().rev() {
            let (es, vs) = side.remove(i);
            comp.0.extend(es);
            comp.1.extend(vs);
        }
        side.push(comp);
    }
    let mut sizes: Vec<u64> = side.iter().map(|(_, v)| size(v.len())).collect();
    sizes.push(size(main_vars.len()));
    if sizes.iter().any(|&s| s > MAX_POINTS) {
        t.points = sizes.iter().fold(0u64, |a, &b| a.saturating_add(b));
        return t;
    }
    t.points = sizes.iter().sum();
    let mut witness = BTreeMap::new();
    for (es, vs) in &side {
        let vs: Vec<String> = vs.iter().cloned().collect();
        match search(&Expr::and_all(es.iter().cloned()), &vs, &dom, true) {
            Some(w) => witness.extend(w),
            None => {
                t.result = DischargeResult::Discharged;
                return t;
            }
        }
    }
    let mv: Vec<String> = main_vars.into_iter().collect();
    let goal = Expr::bin(BinOp::Implies, Expr::and_all(main), concl);
    t.result = match search(&goal, &mv, &dom, false) {
        Some(cx) => {
            witness.extend(cx);
            DischargeResult::Counterexample { assignment: witness }
        }
        None => DischargeResult::Discharged,
    };
    t
}

pub fn discharge_bounded(vcs: &[Vc], bound: i64) -> Vec<DischargeTranscript> {
    vcs.iter().map(|v| discharge_one(v, bound)).collect()
}
