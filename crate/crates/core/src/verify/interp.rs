//! Runtime assertion checking: direct execution of the program with every
//! annotation evaluated at its program point.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::lang::{BinOp, Expr, Loop, Method, Program, Stmt, UnOp};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArgValue {
    Int(i64),
    Array(Vec<i64>),
}

impl fmt::Display for ArgValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArgValue::Int(v) => write!(f, "{v}"),
            ArgValue::Array(xs) => {
                let s: Vec<String> = xs.iter().map(|x| x.to_string()).collect();
                write!(f, "[{}]", s.join(", "))
            }
        }
    }
}

/// Initial field values and arguments for one method execution.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Case {
    pub fields: BTreeMap<String, i64>,
    pub args: BTreeMap<String, ArgValue>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub method: String,
    /// `method:ensures`, `method:loop0:preserve`, `method:runtime`, ...
    pub tag: String,
    pub case: Case,
    pub result: Option<i64>,
    pub detail: String,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violated", self.tag)?;
        let mut parts: Vec<String> = self.case.fields.iter().map(|(k, v)| format!("{k}={v}")).collect();
        parts.extend(self.case.args.iter().map(|(k, v)| format!("{k}={v}")));
        if !parts.is_empty() {
            write!(f, " with {}", parts.join(", "))?;
        }
        if let Some(r) = self.result {
            write!(f, " (result {r})")?;
        }
        write!(f, ": {}", self.detail)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// The case does not satisfy the method's precondition.
    Excluded,
    Pass { result: Option<i64>, fields: BTreeMap<String, i64> },
    Fail(Counterexample),
}

#[derive(Clone, Debug)]
struct Failure {
    tag: String,
    detail: String,
}

struct Frame {
    vars: HashMap<String, i64>,
    arrays: HashMap<String, Vec<i64>>,
}

struct Machine<'p> {
    prog: &'p Program,
    fields: HashMap<String, i64>,
}

enum Flow {
    Normal,
    Return(Option<i64>),
}

fn arith(op: BinOp, a: i64, b: i64) -> Option<i64> {
    match op {
        BinOp::Add => a.checked_add(b),
        BinOp::Sub => a.checked_sub(b),
        BinOp::Mul => a.checked_mul(b),
        _ => None,
    }
}

impl<'p> Machine<'p> {
    fn lookup(&self, frame: &Frame, v: &str) -> Result<i64, String> {
        frame.vars.get(v).or_else(|| self.fields.get(v)).copied().ok_or_else(|| format!("`{v}` read before assignment"))
    }

    fn eval(&self, e: &Expr, frame: &Frame, old: Option<&(HashMap<String, i64>, Frame)>, result: Option<i64>) -> Result<i64, String> {
        Ok(match e {
            Expr::Int(v) => *v,
            Expr::Bool(b) => *b as i64,
            Expr::Var(v) => self.lookup(frame, v)?,
            Expr::Index(a, i) => {
                let idx = self.eval(i, frame, old, result)?;
                let arr = frame.arrays.get(a).ok_or_else(|| format!("unknown array `{a}`"))?;
                *usize::try_from(idx).ok().and_then(|k| arr.get(k)).ok_or_else(|| format!("index {idx} out of bounds for `{a}` of length {}", arr.len()))?
            }
            Expr::Length(a) => frame.arrays.get(a).ok_or_else(|| format!("unknown array `{a}`"))?.len() as i64,
            Expr::Old(inner) => {
                let (f, fr) = old.ok_or("`\\old` outside a postcondition")?;
                let m = Machine { prog: self.prog, fields: f.clone() };
                m.eval(inner, fr, None, None)?
            }
            Expr::Result => result.ok_or("`\\result` without a result")?,
            Expr::Unary(UnOp::Neg, x) => self.eval(x, frame, old, result)?.checked_neg().ok_or("integer overflow")?,
            Expr::Unary(UnOp::Not, x) => (self.eval(x, frame, old, result)? == 0) as i64,
            Expr::Binary(op, a, b) => {
                let x = self.eval(a, frame, old, result)?;
                match op {
                    BinOp::And if x == 0 => return Ok(0),
                    BinOp::Or if x != 0 => return Ok(1),
                    BinOp::Implies if x == 0 => return Ok(1),
                    _ => {}
                }
                let y = self.eval(b, frame, old, result)?;
                match op {
                    BinOp::Add | BinOp::Sub | BinOp::Mul => arith(*op, x, y).ok_or("integer overflow")?,
                    BinOp::Eq => (x == y) as i64,
                    BinOp::Ne => (x != y) as i64,
                    BinOp::Lt => (x < y) as i64,
                    BinOp::Le => (x <= y) as i64,
                    BinOp::Gt => (x > y) as i64,
                    BinOp::Ge => (x >= y) as i64,
                    BinOp::And | BinOp::Or | BinOp::Implies => (y != 0) as i64,
                }
            }
        })
    }

    fn holds(&self, e: &Expr, frame: &Frame, tag: &str) -> Result<(), Failure> {
        match self.eval(e, frame, None, None) {
            Ok(0) => Err(Failure { tag: tag.to_string(), detail: format!("`{e}` is false") }),
            Ok(_) => Ok(()),
            Err(d) => Err(Failure { tag: tag.to_string(), detail: d }),
        }
    }

    fn runtime(&self, m: &Method, detail: String) -> Failure {
        Failure { tag: format!("{}:runtime", m.name), detail }
    }

    /// Runs `m` with checks; the caller has already established its precondition.
    fn call(&mut self, m: &Method, frame: Frame) -> Result<Option<i64>, Failure> {
        let old = (self.fields.clone(), Frame { vars: frame.vars.clone(), arrays: frame.arrays.clone() });
        let mut frame = frame;
        let ret = match self.block(m, &m.body, &mut frame)? {
            Flow::Return(r) => r,
            Flow::Normal if m.returns_int => return Err(self.runtime(m, "no value returned".into())),
            Flow::Normal => None,
        };
        for a in &m.ensures {
            let tag = format!("{}:ensures", m.name);
            match self.eval(&a.expr, &frame, Some(&old), ret) {
                Ok(0) => return Err(Failure { tag, detail: format!("`{}` is false", a.expr) }),
                Ok(_) => {}
                Err(d) => return Err(Failure { tag, detail: d }),
            }
        }
        for inv in &self.prog.invariants {
            self.holds(&inv.expr, &frame, &format!("{}:class-invariant", m.name))?;
        }
        Ok(ret)
    }

    fn block(&mut self, m: &Method, stmts: &[Stmt], frame: &mut Frame) -> Result<Flow, Failure> {
        for s in stmts {
            if let Flow::Return(r) = self.stmt(m, s, frame)? {
                return Ok(Flow::Return(r));
            }
        }
        Ok(Flow::Normal)
    }

    fn set(&mut self, frame: &mut Frame, name: &str, v: i64) {
        if let Some(slot) = frame.vars.get_mut(name) {
            *slot = v;
        } else {
            self.fields.insert(name.to_string(), v);
        }
    }

    fn stmt(&mut self, m: &Method, s: &Stmt, frame: &mut Frame) -> Result<Flow, Failure> {
        let ev = |me: &Self, e: &Expr, fr: &Frame| me.eval(e, fr, None, None).map_err(|d| me.runtime(m, d));
        match s {
            Stmt::Local { name, init } => {
                let v = match init {
                    Some(e) => ev(self, e, frame)?,
                    None => 0,
                };
                frame.vars.insert(name.clone(), v);
            }
            Stmt::Assign { name, value, .. } => {
                let v = ev(self, value, frame)?;
                self.set(frame, name, v);
            }
            Stmt::If { cond, then, els } => {
                let c = ev(self, cond, frame)?;
                return self.block(m, if c != 0 { then } else { els }, frame);
            }
            Stmt::Return(e, _) => {
                let r = match e {
                    Some(e) => Some(ev(self, e, frame)?),
                    None => None,
                };
                return Ok(Flow::Return(r));
            }
            Stmt::Call { target, method, args, .. } => {
                let callee = self.prog.method(method).expect("checked call");
                let mut cf = Frame { vars: HashMap::new(), arrays: HashMap::new() };
                for (p, a) in callee.params.iter().zip(args) {
                    if p.array {
                        let Expr::Var(src) = a else { unreachable!("checked array argument") };
                        cf.arrays.insert(p.name.clone(), frame.arrays[src].clone());
                    } else {
                        cf.vars.insert(p.name.clone(), ev(self, a, frame)?);
                    }
                }
                let tag = format!("{}:call-{}:requires", m.name, callee.name);
                for inv in &self.prog.invariants {
                    self.holds(&inv.expr, &cf, &tag)?;
                }
                for r in &callee.requires {
                    self.holds(&r.expr, &cf, &tag)?;
                }
                let r = self.call(callee, cf)?;
                if let (Some(t), Some(v)) = (target, r) {
                    self.set(frame, t, v);
                }
            }
            Stmt::For(l) => return self.for_loop(m, l, frame),
        }
        Ok(Flow::Normal)
    }

    fn for_loop(&mut self, m: &Method, l: &Loop, frame: &mut Frame) -> Result<Flow, Failure> {
        let v = self.eval(&l.init, frame, None, None).map_err(|d| self.runtime(m, d))?;
        frame.vars.insert(l.var.clone(), v);
        let inv = |me: &Self, fr: &Frame, phase: &str| -> Result<(), Failure> {
            for a in &l.invariants {
                me.holds(&a.expr, fr, &format!("{}:loop{}:{phase}", m.name, l.id))?;
            }
            Ok(())
        };
        inv(self, frame, "init")?;
        loop {
            let g = self.eval(&l.guard(), frame, None, None).map_err(|d| self.runtime(m, d))?;
            if g == 0 {
                break;
            }
            if let Flow::Return(r) = self.block(m, &l.body, frame)? {
                return Ok(Flow::Return(r));
            }
            let i = frame.vars[&l.var].checked_add(l.step).ok_or_else(|| self.runtime(m, "integer overflow".into()))?;
            frame.vars.insert(l.var.clone(), i);
            inv(self, frame, "preserve")?;
        }
        Ok(Flow::Normal)
    }
}

/// Initial field values for a case: constants are fixed, a constructor starts
/// from the initialisers, every other method from the supplied values.
fn initial_fields(prog: &Program, m: &Method, case: &Case) -> Result<HashMap<String, i64>, String> {
    let consts = prog.constants();
    let mut out = HashMap::new();
    for f in &prog.fields {
        let v = if let Some(c) = consts.get(&f.name) {
            *c
        } else if m.constructor {
            f.init.unwrap_or(0)
        } else {
            *case.fields.get(&f.name).ok_or_else(|| format!("missing value for field `{}`", f.name))?
        };
        out.insert(f.name.clone(), v);
    }
    Ok(out)
}

/// Executes one method on one case, checking every annotation on the way.
pub fn run_case(prog: &Program, method: &str, case: &Case) -> Result<Outcome, String> {
    let m = prog.method(method).ok_or_else(|| format!("unknown method `{method}`"))?;
    let fields = initial_fields(prog, m, case)?;
    let mut frame = Frame { vars: HashMap::new(), arrays: HashMap::new() };
    for p in &m.params {
        match (case.args.get(&p.name), p.array) {
            (Some(ArgValue::Int(v)), false) => {
                frame.vars.insert(p.name.clone(), *v);
            }
            (Some(ArgValue::Array(xs)), true) => {
                frame.arrays.insert(p.name.clone(), xs.clone());
            }
            _ => return Err(format!("missing or mistyped argument `{}`", p.name)),
        }
    }
    let mut machine = Machine { prog, fields };
    let mut pre: Vec<&Expr> = m.requires.iter().map(|a| &a.expr).collect();
    if !m.constructor {
        pre.extend(prog.invariants.iter().map(|a| &a.expr));
    }
    for e in pre {
        match machine.eval(e, &frame, None, None) {
            Ok(0) | Err(_) => return Ok(Outcome::Excluded),
            Ok(_) => {}
        }
    }
    let fail = |f: Failure, result| {
        Outcome::Fail(Counterexample { method: m.name.clone(), tag: f.tag, case: case.clone(), result, detail: f.detail })
    };
    match machine.call(m, frame) {
        Ok(result) => Ok(Outcome::Pass { result, fields: machine.fields.into_iter().collect() }),
        Err(f) => {
            let result = if f.tag.ends_with(":ensures") {
                // Re-run without checks to report the offending result.
                result_of(prog, m, case)
            } else {
                None
            };
            Ok(fail(f, result))
        }
    }
}

fn result_of(prog: &Program, m: &Method, case: &Case) -> Option<i64> {
    let stripped = Program {
        invariants: vec![],
        methods: prog.methods.iter().map(|x| Method { ensures: vec![], ..x.clone() }).collect(),
        ..prog.clone()
    };
    match run_case(&stripped, &m.name, case) {
        Ok(Outcome::Pass { result, .. }) => result,
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSamples {
    pub method: String,
    pub attempts: u64,
    pub satisfied: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level2Report {
    pub pass: bool,
    pub samples: Vec<MethodSamples>,
    pub counterexample: Option<Counterexample>,
    pub warnings: Vec<String>,
}

/// Values are drawn from `[-bound, bound]`, a quarter of the time from the
/// boundary set (0, ±1, ±bound and literals near the program's constants).
pub struct Sampler {
    rng: ChaCha20Rng,
    bound: i64,
    boundary: Vec<i64>,
}

impl Sampler {
    pub fn new(prog: &Program, bound: i64, seed: u64) -> Self {
        let mut b: Vec<i64> = vec![0, 1, -1, bound, -bound];
        for c in prog.literals() {
            for d in [-1, 0, 1] {
                let v = c.saturating_add(d);
                if v.abs() <= bound.max(c.abs() + 1) {
                    b.push(v);
                }
            }
        }
        b.sort_unstable();
        b.dedup();
        Sampler { rng: ChaCha20Rng::seed_from_u64(seed), bound, boundary: b }
    }

    pub fn int(&mut self) -> i64 {
        if self.rng.gen_bool(0.25) {
            self.boundary[self.rng.gen_range(0..self.boundary.len())]
        } else {
            self.rng.gen_range(-self.bound..=self.bound)
        }
    }

    pub fn case(&mut self, prog: &Program, m: &Method) -> Case {
        let consts = prog.constants();
        let mut case = Case::default();
        if !m.constructor {
            for f in prog.fields.iter().filter(|f| !consts.contains_key(&f.name)) {
                case.fields.insert(f.name.clone(), self.int());
            }
        }
        for p in &m.params {
            let v = if p.array {
                let len = self.rng.gen_range(0..=self.bound);
                ArgValue::Array((0..len).map(|_| self.int()).collect())
            } else {
                ArgValue::Int(self.int())
            };
            case.args.insert(p.name.clone(), v);
        }
        case
    }
}

pub const DEFAULT_BOUND: i64 = 64;

/// Samples `budget` precondition-satisfying cases per method and checks them.
pub fn check_program_level2(prog: &Program, budget: u64, seed: u64) -> Level2Report {
    let mut sampler = Sampler::new(prog, DEFAULT_BOUND, seed);
    let mut samples = Vec::new();
    let mut warnings = Vec::new();
    if prog.annotations().is_empty() {
        warnings.push("no annotations to check".into());
    }
    for m in &prog.methods {
        let mut stat = MethodSamples { method: m.name.clone(), attempts: 0, satisfied: 0 };
        while stat.satisfied < budget && stat.attempts < budget.saturating_mul(50).max(1) {
            stat.attempts += 1;
            let case = sampler.case(prog, m);
            match run_case(prog, &m.name, &case) {
                Ok(Outcome::Excluded) => {}
                Ok(Outcome::Pass { .. }) => stat.satisfied += 1,
                Ok(Outcome::Fail(cx)) => {
                    samples.push(stat);
                    return Level2Report { pass: false, samples, counterexample: Some(cx), warnings };
                }
                Err(e) => {
                    warnings.push(format!("{}: {e}", m.name));
                    break;
                }
            }
        }
        if stat.satisfied == 0 {
            warnings.push(format!("{}: budget exhausted without satisfying the precondition", m.name));
        }
        samples.push(stat);
    }
    Level2Report { pass: true, samples, counterexample: None, warnings }
}
