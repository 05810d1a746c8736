//! The application contracts: each pairs a compiled circuit with a plaintext
//! reference function, typed input/output schemas and an input sampler.

pub mod finance;
mod sources;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::fixed::{self, FixedFormat, FixedPoint, Q16_16};
use crate::circuit::words::{self, constant, sign_extend, zero_extend};
use crate::circuit::{bits_to_int, bits_to_uint, int_to_bits, Bit, Circuit, CircuitBuilder, GateCounts, Word};

pub use finance::OptionKind;
pub use sources::{annotated_source, ANNOTATED_SOURCES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContractError {
    #[error("unknown contract {0:?}")]
    Unknown(String),
    #[error("{contract}: expected {expected} parties, got {got}")]
    PartyCount { contract: String, expected: String, got: usize },
    #[error("party {party}: expected {expected} values, got {got}")]
    Arity { party: usize, expected: usize, got: usize },
    #[error("{field}: {value} is not representable as {ty}")]
    Range { field: String, value: String, ty: String },
    #[error("{field}: expected {ty}")]
    Type { field: String, ty: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ValueType {
    Int { width: usize },
    UInt { width: usize },
    Fixed { format: FixedFormat },
}

impl ValueType {
    pub const INT32: ValueType = ValueType::Int { width: 32 };
    pub const UINT32: ValueType = ValueType::UInt { width: 32 };
    pub const Q16: ValueType = ValueType::Fixed { format: Q16_16 };

    pub fn width(self) -> usize {
        match self {
            ValueType::Int { width } | ValueType::UInt { width } => width,
            ValueType::Fixed { format } => format.width(),
        }
    }

    pub fn is_fixed(self) -> bool {
        matches!(self, ValueType::Fixed { .. })
    }

    pub fn name(self) -> String {
        match self {
            ValueType::Int { width } => format!("int{width}"),
            ValueType::UInt { width } => format!("uint{width}"),
            ValueType::Fixed { format } => format!("q{}.{}", format.int_bits, format.frac_bits),
        }
    }

    /// Integer types accept values inside their range; fixed-point types round
    /// to the nearest representable value and reject values outside the range.
    pub fn encode(self, field: &str, v: &Value) -> Result<Vec<bool>, ContractError> {
        let range_err = || ContractError::Range { field: field.into(), value: v.to_string(), ty: self.name() };
        match (self, v) {
            (ValueType::Int { width }, Value::Int(x)) => {
                let (lo, hi) = (-(1i128 << (width - 1)), (1i128 << (width - 1)) - 1);
                if (*x as i128) < lo || (*x as i128) > hi {
                    return Err(range_err());
                }
                Ok(int_to_bits(*x as i128, width))
            }
            (ValueType::UInt { width }, Value::Int(x)) => {
                if *x < 0 || (*x as i128) >= (1i128 << width) {
                    return Err(range_err());
                }
                Ok(int_to_bits(*x as i128, width))
            }
            (ValueType::Fixed { format }, v) => {
                let x = v.as_f64();
                let half = format.ulp() / 2.0;
                if !x.is_finite() || x > format.max_value() + half || x < -format.max_value() - 2.0 * half {
                    return Err(range_err());
                }
                Ok(FixedPoint::from_f64(x, format).to_bits())
            }
            _ => Err(ContractError::Type { field: field.into(), ty: self.name() }),
        }
    }

    pub fn decode(self, bits: &[bool]) -> Value {
        match self {
            ValueType::Int { .. } => Value::Int(bits_to_int(bits) as i64),
            ValueType::UInt { .. } => Value::Int(bits_to_uint(bits) as i64),
            ValueType::Fixed { format } => Value::Real(FixedPoint::from_bits(bits, format).to_f64()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Real(f64),
}

impl Value {
    pub fn as_f64(&self) -> f64 {
        match *self {
            Value::Int(x) => x as f64,
            Value::Real(x) => x,
        }
    }

    pub fn as_int(&self) -> i64 {
        match *self {
            Value::Int(x) => x,
            Value::Real(x) => x as i64,
        }
    }

    /// Parses "12" as an integer and anything with a point or exponent as real.
    pub fn parse(s: &str) -> Option<Value> {
        let s = s.trim();
        if let Ok(i) = s.parse::<i64>() {
            return Some(Value::Int(i));
        }
        s.parse::<f64>().ok().filter(|x| x.is_finite()).map(Value::Real)
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Int(x) => write!(f, "{x}"),
            Value::Real(x) => write!(f, "{x}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    #[serde(flatten)]
    pub ty: ValueType,
}

fn field(name: &str, ty: ValueType) -> Field {
    Field { name: name.into(), ty }
}

type OracleFn = fn(&[Vec<Value>]) -> Vec<Value>;
type SamplerFn = fn(&mut dyn RngCore, usize) -> Vec<Vec<Value>>;

/// Relative tolerance between a fixed-point circuit and its double oracle.
pub const FIXED_REL_TOL: f64 = 1e-2;

#[derive(Clone)]
pub struct ContractSpec {
    pub name: String,
    /// Row label used in the gate-count comparison table.
    pub title: &'static str,
    /// AND-gate count reported for this application in the published table.
    pub paper_and_gates: Option<u64>,
    pub parties: Vec<Vec<Field>>,
    pub outputs: Vec<Field>,
    pub circuit: Circuit,
    oracle: OracleFn,
    sampler: SamplerFn,
}

impl std::fmt::Debug for ContractSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ContractSpec")
            .field("name", &self.name)
            .field("parties", &self.parties)
            .field("outputs", &self.outputs)
            .field("gates", &self.circuit.gate_counts())
            .finish()
    }
}

impl ContractSpec {
    pub fn num_parties(&self) -> usize {
        self.parties.len()
    }

    pub fn is_fixed_point(&self) -> bool {
        self.outputs.iter().any(|f| f.ty.is_fixed())
    }

    pub fn gate_counts(&self) -> GateCounts {
        self.circuit.gate_counts()
    }

    pub fn encode_inputs(&self, inputs: &[Vec<Value>]) -> Result<Vec<Vec<bool>>, ContractError> {
        if inputs.len() != self.parties.len() {
            return Err(ContractError::PartyCount {
                contract: self.name.clone(),
                expected: self.parties.len().to_string(),
                got: inputs.len(),
            });
        }
        inputs
            .iter()
            .zip(&self.parties)
            .enumerate()
            .map(|(i, (vals, fields))| {
                if vals.len() != fields.len() {
                    return Err(ContractError::Arity { party: i + 1, expected: fields.len(), got: vals.len() });
                }
                let mut bits = Vec::new();
                for (v, f) in vals.iter().zip(fields) {
                    bits.extend(f.ty.encode(&f.name, v)?);
                }
                Ok(bits)
            })
            .collect()
    }

    pub fn decode_outputs(&self, bits: &[bool]) -> Vec<Value> {
        let mut pos = 0;
        self.outputs
            .iter()
            .map(|f| {
                let w = f.ty.width();
                let v = f.ty.decode(&bits[pos..pos + w]);
                pos += w;
                v
            })
            .collect()
    }

    /// Inputs as the circuit sees them after encoding.
    pub fn quantize(&self, inputs: &[Vec<Value>]) -> Result<Vec<Vec<Value>>, ContractError> {
        let bits = self.encode_inputs(inputs)?;
        Ok(bits
            .iter()
            .zip(&self.parties)
            .map(|(b, fields)| {
                let mut pos = 0;
                fields
                    .iter()
                    .map(|f| {
                        let w = f.ty.width();
                        let v = f.ty.decode(&b[pos..pos + w]);
                        pos += w;
                        v
                    })
                    .collect()
            })
            .collect())
    }

    /// Plaintext reference result, computed on the quantized inputs.
    pub fn oracle(&self, inputs: &[Vec<Value>]) -> Result<Vec<Value>, ContractError> {
        Ok((self.oracle)(&self.quantize(inputs)?))
    }

    /// Clear evaluation of the compiled circuit.
    pub fn eval(&self, inputs: &[Vec<Value>]) -> Result<Vec<Value>, ContractError> {
        let bits = self.encode_inputs(inputs)?;
        let out = self.circuit.eval_plaintext(&bits).expect("encoded inputs match the circuit");
        Ok(self.decode_outputs(&out))
    }

    /// Random inputs from the contract's benchmark domain.
    pub fn sample_inputs(&self, rng: &mut dyn RngCore) -> Vec<Vec<Value>> {
        (self.sampler)(rng, self.parties.len())
    }

    /// Exact equality for integer outputs, relative tolerance for fixed-point.
    pub fn outputs_agree(&self, circuit: &[Value], oracle: &[Value]) -> bool {
        circuit.len() == oracle.len()
            && self.outputs.iter().zip(circuit.iter().zip(oracle)).all(|(f, (c, o))| {
                if f.ty.is_fixed() {
                    relative_error(c.as_f64(), o.as_f64()) <= FIXED_REL_TOL
                } else {
                    c.as_int() == o.as_int()
                }
            })
    }
}

pub fn relative_error(got: f64, want: f64) -> f64 {
    if got == want {
        0.0
    } else {
        (got - want).abs() / want.abs()
    }
}

/// Contract names accepted by [`build`].
pub const REGISTRY: [&str; 9] = [
    "millionaire",
    "second_price_auction",
    "exchange_option",
    "fx_call_option",
    "fx_put_option",
    "crowdfund",
    "dao_invest_fund",
    "double_auction",
    "secrecy_discount",
];

/// The seven applications of the published gate-count table, in table order.
pub const TABLE1: [&str; 7] = [
    "millionaire",
    "second_price_auction",
    "exchange_option",
    "fx_call_option",
    "crowdfund",
    "dao_invest_fund",
    "double_auction",
];

pub const AUCTION_BIDS: usize = 3;
pub const BOOK_SIDE: usize = 4;
const CROWDFUND_MINIMUM: i64 = 1000;

/// Builds a contract with its default party count.
pub fn build(name: &str) -> Result<ContractSpec, ContractError> {
    build_with_parties(name, None)
}

/// Builds a contract; the n-party contracts (auction, crowdfund, fund) accept a party count.
pub fn build_with_parties(name: &str, parties: Option<usize>) -> Result<ContractSpec, ContractError> {
    let n_party = |default: usize, min: usize| -> Result<usize, ContractError> {
        let n = parties.unwrap_or(default);
        if n < min || n > 64 {
            return Err(ContractError::PartyCount { contract: name.into(), expected: format!("{min}..=64"), got: n });
        }
        Ok(n)
    };
    let fixed_parties = |n: usize| -> Result<(), ContractError> {
        match parties {
            Some(p) if p != n => Err(ContractError::PartyCount { contract: name.into(), expected: n.to_string(), got: p }),
            _ => Ok(()),
        }
    };
    match name {
        "millionaire" => {
            fixed_parties(2)?;
            Ok(millionaire())
        }
        "second_price_auction" => Ok(second_price_auction(n_party(AUCTION_BIDS, 2)?)),
        "exchange_option" => {
            fixed_parties(2)?;
            Ok(exchange_option())
        }
        "fx_call_option" => {
            fixed_parties(2)?;
            Ok(fx_option(OptionKind::Call))
        }
        "fx_put_option" => {
            fixed_parties(2)?;
            Ok(fx_option(OptionKind::Put))
        }
        "crowdfund" => Ok(crowdfund(n_party(2, 1)?)),
        "dao_invest_fund" => Ok(dao_invest_fund(n_party(2, 1)?)),
        "double_auction" => {
            fixed_parties(2)?;
            Ok(double_auction())
        }
        "secrecy_discount" => {
            fixed_parties(1)?;
            Ok(secrecy_discount())
        }
        _ => Err(ContractError::Unknown(name.into())),
    }
}

fn ints(rng: &mut dyn RngCore, n: usize, lo: i64, hi: i64) -> Vec<Value> {
    (0..n).map(|_| Value::Int(rng.gen_range(lo..=hi))).collect()
}

fn reals(v: &[f64]) -> Vec<Value> {
    v.iter().map(|&x| Value::Real(x)).collect()
}

fn real_args(inputs: &[Vec<Value>]) -> Vec<f64> {
    inputs.iter().flatten().map(Value::as_f64).collect()
}

// ---- millionaire

pub fn millionaire_plain(x: i32, y: i32) -> bool {
    y > x
}

fn millionaire() -> ContractSpec {
    let mut b = CircuitBuilder::new();
    let x = b.input(32);
    let y = b.input(32);
    let r = words::gt_signed(&mut b, &y, &x);
    b.output(&[r]);
    ContractSpec {
        name: "millionaire".into(),
        title: "Millionaire",
        paper_and_gates: Some(96),
        parties: vec![vec![field("wealth", ValueType::INT32)], vec![field("wealth", ValueType::INT32)]],
        outputs: vec![field("richer", ValueType::UInt { width: 1 })],
        circuit: b.finish(),
        oracle: |v| vec![Value::Int(millionaire_plain(v[0][0].as_int() as i32, v[1][0].as_int() as i32) as i64)],
        sampler: |rng, n| (0..n).map(|_| ints(rng, 1, i32::MIN as i64, i32::MAX as i64)).collect(),
    }
}

// ---- second-price auction

/// Winner is the highest bid (lowest index on ties); the price is the highest remaining bid.
pub fn second_price_plain(bids: &[i32]) -> Option<(usize, i32)> {
    if bids.len() < 2 {
        return None;
    }
    let mut winner = 0;
    for (i, &b) in bids.iter().enumerate() {
        if b > bids[winner] {
            winner = i;
        }
    }
    let price = bids.iter().enumerate().filter(|&(i, _)| i != winner).map(|(_, &b)| b).max()?;
    Some((winner, price))
}

const WINNER_BITS: usize = 8;

fn second_price_auction(n: usize) -> ContractSpec {
    let mut b = CircuitBuilder::new();
    let bids: Vec<Word> = (0..n).map(|_| b.input(32)).collect();
    let c = words::gt_signed(&mut b, &bids[1], &bids[0]);
    let mut max = words::mux(&mut b, c, &bids[0], &bids[1]);
    let mut second = words::mux(&mut b, c, &bids[1], &bids[0]);
    let mut idx: Word = vec![c];
    idx.resize(WINNER_BITS, Bit::ZERO);
    for (i, bid) in bids.iter().enumerate().skip(2) {
        let above_max = words::gt_signed(&mut b, bid, &max);
        let above_second = words::gt_signed(&mut b, bid, &second);
        let s = words::mux(&mut b, above_second, &second, bid);
        second = words::mux(&mut b, above_max, &s, &max);
        max = words::mux(&mut b, above_max, &max, bid);
        idx = words::mux(&mut b, above_max, &idx, &constant(i as u128, WINNER_BITS));
    }
    b.output(&idx);
    b.output(&second);
    ContractSpec {
        name: "second_price_auction".into(),
        title: "Second-price Auction",
        paper_and_gates: Some(192),
        parties: (0..n).map(|_| vec![field("bid", ValueType::INT32)]).collect(),
        outputs: vec![field("winner", ValueType::UInt { width: WINNER_BITS }), field("price", ValueType::INT32)],
        circuit: b.finish(),
        oracle: |v| {
            let bids: Vec<i32> = v.iter().map(|p| p[0].as_int() as i32).collect();
            let (w, p) = second_price_plain(&bids).expect("at least two bids");
            vec![Value::Int(w as i64), Value::Int(p as i64)]
        },
        sampler: |rng, n| {
            // Narrow ranges make ties likely.
            let hi = if rng.gen_bool(0.5) { 8 } else { i32::MAX as i64 };
            (0..n).map(|_| ints(rng, 1, -hi, hi)).collect()
        },
    }
}

// ---- crowdfunding and investment fund

pub fn crowdfund_plain(inputs: &[i32]) -> i32 {
    let sum = inputs.iter().fold(0i32, |s, &x| s.wrapping_add(x));
    if sum as i64 >= CROWDFUND_MINIMUM {
        sum
    } else {
        0
    }
}

/// Fund value in double precision; zero below the minimum.
pub fn dao_plain(inputs: &[i32]) -> f64 {
    let sum = inputs.iter().fold(0i32, |s, &x| s.wrapping_add(x));
    if sum as i64 >= CROWDFUND_MINIMUM {
        sum as f64 * finance::dao_growth()
    } else {
        0.0
    }
}

fn sum_and_threshold(b: &mut CircuitBuilder, xs: &[Word]) -> (Word, Bit) {
    let mut sum = xs[0].clone();
    for x in &xs[1..] {
        sum = words::add(b, &sum, x);
    }
    let min = constant(CROWDFUND_MINIMUM as u128, 32);
    let ok = words::ge_signed(b, &sum, &min);
    (sum, ok)
}

fn crowdfund(n: usize) -> ContractSpec {
    let mut b = CircuitBuilder::new();
    let xs: Vec<Word> = (0..n).map(|_| b.input(32)).collect();
    let (sum, ok) = sum_and_threshold(&mut b, &xs);
    let r = words::and_bit(&mut b, &sum, ok);
    b.output(&r);
    ContractSpec {
        name: "crowdfund".into(),
        title: "Crowdfunding smart contract",
        paper_and_gates: Some(128),
        parties: (0..n).map(|_| vec![field("contribution", ValueType::INT32)]).collect(),
        outputs: vec![field("raised", ValueType::INT32)],
        circuit: b.finish(),
        oracle: |v| {
            let xs: Vec<i32> = v.iter().map(|p| p[0].as_int() as i32).collect();
            vec![Value::Int(crowdfund_plain(&xs) as i64)]
        },
        sampler: |rng, n| {
            let hi = if rng.gen_bool(0.5) { 1500 } else { i32::MAX as i64 };
            (0..n).map(|_| ints(rng, 1, -hi, hi)).collect()
        },
    }
}

/// Largest sum whose compounded value stays representable in Q16.16.
pub const DAO_MAX_SUM: i64 = 26_000;

fn dao_invest_fund(n: usize) -> ContractSpec {
    let mut b = CircuitBuilder::new();
    let xs: Vec<Word> = (0..n).map(|_| b.input(32)).collect();
    let (sum, ok) = sum_and_threshold(&mut b, &xs);
    // int32 -> Q16.16 with saturation, then the folded growth constant.
    let mut wide = constant(0, 16);
    wide.extend_from_slice(&sum);
    let fx = fixed::saturate(&mut b, &wide, 32);
    let grown = fixed::fixed_mul_const(&mut b, &fx, finance::dao_growth(), Q16_16);
    let r = words::and_bit(&mut b, &grown, ok);
    b.output(&r);
    ContractSpec {
        name: "dao_invest_fund".into(),
        title: "DAO-like Investment Fund",
        paper_and_gates: Some(2144),
        parties: (0..n).map(|_| vec![field("contribution", ValueType::INT32)]).collect(),
        outputs: vec![field("value", ValueType::Q16)],
        circuit: b.finish(),
        oracle: |v| {
            let xs: Vec<i32> = v.iter().map(|p| p[0].as_int() as i32).collect();
            vec![Value::Real(dao_plain(&xs))]
        },
        sampler: |rng, n| {
            let hi = DAO_MAX_SUM / n as i64;
            (0..n).map(|_| ints(rng, 1, -hi / 4, hi)).collect()
        },
    }
}

// ---- double auction

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Order {
    pub price: u32,
    pub qty: u16,
}

/// Uniform-price clearing. Buys are ranked by price descending and sells by
/// price ascending, ties by position. The first `k` ranked pairs cross while
/// the k-th buy price is at least the k-th sell price; the clearing price is
/// the floor midpoint of the last crossing pair and the matched quantity is
/// the smaller of the two cumulative quantities over the crossing prefix.
pub fn double_auction_plain(buys: &[Order], sells: &[Order]) -> (u32, u32) {
    let mut bs: Vec<(usize, Order)> = buys.iter().copied().enumerate().collect();
    let mut ss: Vec<(usize, Order)> = sells.iter().copied().enumerate().collect();
    bs.sort_by(|a, b| b.1.price.cmp(&a.1.price).then(a.0.cmp(&b.0)));
    ss.sort_by(|a, b| a.1.price.cmp(&b.1.price).then(a.0.cmp(&b.0)));
    let (mut price, mut qb, mut qs) = (0u32, 0u32, 0u32);
    for ((_, b), (_, s)) in bs.iter().zip(&ss) {
        if b.price < s.price {
            break;
        }
        price = ((b.price as u64 + s.price as u64) / 2) as u32;
        qb += b.qty as u32;
        qs += s.qty as u32;
    }
    (price, qb.min(qs))
}

const IDX_BITS: usize = 2;

/// Compare-exchange on (key, payload) records; after it `a` ranks first.
fn compare_exchange(b: &mut CircuitBuilder, a: &mut Word, c: &mut Word, key: usize, descending: bool) {
    let swap = if descending {
        words::lt_unsigned(b, &a[..key], &c[..key])
    } else {
        words::gt_unsigned(b, &a[..key], &c[..key])
    };
    // Conditional swap with one AND per bit.
    for i in 0..a.len() {
        let d = b.xor(a[i], c[i]);
        let m = b.and(d, swap);
        a[i] = b.xor(a[i], m);
        c[i] = b.xor(c[i], m);
    }
}

fn sort4(b: &mut CircuitBuilder, v: &mut [Word], key: usize, descending: bool) {
    for (i, j) in [(0, 1), (2, 3), (0, 2), (1, 3), (1, 2)] {
        let (lo, hi) = v.split_at_mut(j);
        compare_exchange(b, &mut lo[i], &mut hi[0], key, descending);
    }
}

fn double_auction() -> ContractSpec {
    let mut b = CircuitBuilder::new();
    let buys = b.input(BOOK_SIDE * 48);
    let sells = b.input(BOOK_SIDE * 48);
    // Record layout: [tie-break index | price | qty]; the key is index and price.
    let record = |side: &Word, i: usize, desc: bool| -> Word {
        let o = &side[i * 48..(i + 1) * 48];
        let rank = if desc { BOOK_SIDE - 1 - i } else { i };
        let mut r = constant(rank as u128, IDX_BITS);
        r.extend_from_slice(&o[..32]);
        r.extend_from_slice(&o[32..48]);
        r
    };
    let mut bv: Vec<Word> = (0..BOOK_SIDE).map(|i| record(&buys, i, true)).collect();
    let mut sv: Vec<Word> = (0..BOOK_SIDE).map(|i| record(&sells, i, false)).collect();
    let key = IDX_BITS + 32;
    sort4(&mut b, &mut bv, key, true);
    sort4(&mut b, &mut sv, key, false);
    let mut price = constant(0, 32);
    let mut qb = constant(0, 32);
    let mut qs = constant(0, 32);
    let mut live = Bit::ONE;
    for k in 0..BOOK_SIDE {
        let bp = &bv[k][IDX_BITS..key];
        let sp = &sv[k][IDX_BITS..key];
        let below = words::lt_unsigned(&mut b, bp, sp);
        let not_below = b.not(below);
        live = b.and(live, not_below);
        let s = words::add(&mut b, &zero_extend(bp, 33), &zero_extend(sp, 33));
        let mid = words::shr_const(&s, 1);
        price = words::mux(&mut b, live, &price, &mid[..32]);
        let bq = words::and_bit(&mut b, &zero_extend(&bv[k][key..], 32), live);
        let sq = words::and_bit(&mut b, &zero_extend(&sv[k][key..], 32), live);
        qb = words::add(&mut b, &qb, &bq);
        qs = words::add(&mut b, &qs, &sq);
    }
    let lt = words::lt_unsigned(&mut b, &qb, &qs);
    let qty = words::mux(&mut b, lt, &qs, &qb);
    b.output(&price);
    b.output(&qty);
    let side = |tag: &str| -> Vec<Field> {
        (0..BOOK_SIDE)
            .flat_map(|i| {
                [
                    field(&format!("{tag}{i}_price"), ValueType::UINT32),
                    field(&format!("{tag}{i}_qty"), ValueType::UInt { width: 16 }),
                ]
            })
            .collect()
    };
    ContractSpec {
        name: "double_auction".into(),
        title: "Double auction",
        paper_and_gates: Some(567829),
        parties: vec![side("buy"), side("sell")],
        outputs: vec![field("price", ValueType::UINT32), field("qty", ValueType::UINT32)],
        circuit: b.finish(),
        oracle: |v| {
            let orders = |p: &[Value]| -> Vec<Order> {
                p.chunks(2).map(|c| Order { price: c[0].as_int() as u32, qty: c[1].as_int() as u16 }).collect()
            };
            let (p, q) = double_auction_plain(&orders(&v[0]), &orders(&v[1]));
            vec![Value::Int(p as i64), Value::Int(q as i64)]
        },
        sampler: |rng, _| {
            let hi: i64 = if rng.gen_bool(0.5) { 20 } else { u32::MAX as i64 };
            (0..2)
                .map(|_| {
                    (0..BOOK_SIDE)
                        .flat_map(|_| [Value::Int(rng.gen_range(0..=hi)), Value::Int(rng.gen_range(0..=u16::MAX as i64))])
                        .collect()
                })
                .collect()
        },
    }
}

// ---- fixed-point pricing circuits

fn mul(b: &mut CircuitBuilder, x: &[Bit], y: &[Bit]) -> Word {
    fixed::fixed_mul(b, x, y, Q16_16)
}

/// Discounted forward s·e^{-q·t}.
fn discounted(b: &mut CircuitBuilder, s: &[Bit], q: &[Bit], t: &[Bit]) -> Word {
    let qt = mul(b, q, t);
    let zero = fixed::fixed_const(0.0, Q16_16);
    let nqt = fixed::fixed_sub(b, &zero, &qt);
    let e = fixed::fixed_exp(b, &nqt, Q16_16);
    mul(b, s, &e)
}

/// (d1, d2) from ln(a/b) and the drift, given σ and t.
fn d1_d2(b: &mut CircuitBuilder, ratio: &[Bit], drift: &[Bit], sigma: &[Bit], t: &[Bit]) -> (Word, Word) {
    let ln = fixed::fixed_ln(b, ratio, Q16_16);
    let s2 = mul(b, sigma, sigma);
    let half = words::sar_const(&s2, 1);
    let mu = fixed::fixed_add(b, drift, &half);
    let mut_ = mul(b, &mu, t);
    let num = fixed::fixed_add(b, &ln, &mut_);
    let st = fixed::fixed_sqrt(b, t, Q16_16);
    let vs = mul(b, sigma, &st);
    let d1 = fixed::fixed_div(b, &num, &vs, Q16_16);
    let d2 = fixed::fixed_sub(b, &d1, &vs);
    (d1, d2)
}

fn fneg(b: &mut CircuitBuilder, x: &[Bit]) -> Word {
    let zero = fixed::fixed_const(0.0, Q16_16);
    fixed::fixed_sub(b, &zero, x)
}

fn exchange_option() -> ContractSpec {
    let mut b = CircuitBuilder::new();
    let p1 = b.input(4 * 32);
    let p2 = b.input(4 * 32);
    let (s1, q1, sig1, t) = (&p1[..32], &p1[32..64], &p1[64..96], &p1[96..128]);
    let (s2, q2, sig2, rho) = (&p2[..32], &p2[32..64], &p2[64..96], &p2[96..128]);
    // σ² = σ1² + σ2² − 2ρσ1σ2
    let a = mul(&mut b, sig1, sig1);
    let c = mul(&mut b, sig2, sig2);
    let x = mul(&mut b, sig1, sig2);
    let rx = mul(&mut b, rho, &x);
    let rx2 = words::shl_const(&sign_extend(&rx, 33), 1);
    let rx2 = fixed::saturate(&mut b, &rx2, 32);
    let ac = fixed::fixed_add(&mut b, &a, &c);
    let var = fixed::fixed_sub(&mut b, &ac, &rx2);
    let sigma = fixed::fixed_sqrt(&mut b, &var, Q16_16);
    let ratio = fixed::fixed_div(&mut b, s1, s2, Q16_16);
    let drift = fixed::fixed_sub(&mut b, q2, q1);
    let (d1, d2) = d1_d2(&mut b, &ratio, &drift, &sigma, t);
    let f1 = discounted(&mut b, s1, q1, t);
    let f2 = discounted(&mut b, s2, q2, t);
    let n1 = fixed::fixed_phi(&mut b, &d1, Q16_16);
    let n2 = fixed::fixed_phi(&mut b, &d2, Q16_16);
    let l = mul(&mut b, &f1, &n1);
    let r = mul(&mut b, &f2, &n2);
    let price = fixed::fixed_sub(&mut b, &l, &r);
    b.output(&price);
    let q = ValueType::Q16;
    ContractSpec {
        name: "exchange_option".into(),
        title: "European Exchange Options",
        paper_and_gates: Some(267507),
        parties: vec![
            vec![field("s1", q), field("q1", q), field("sigma1", q), field("t", q)],
            vec![field("s2", q), field("q2", q), field("sigma2", q), field("rho", q)],
        ],
        outputs: vec![field("price", q)],
        circuit: b.finish(),
        oracle: |v| {
            let a = real_args(v);
            let (s1, q1, sig1, t, s2, q2, sig2, rho) = (a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7]);
            vec![Value::Real(finance::margrabe(s1, s2, q1, q2, sig1, sig2, rho, t))]
        },
        sampler: |rng, _| {
            let s2 = rng.gen_range(50.0..150.0);
            let s1 = s2 * rng.gen_range(0.95..1.05);
            let t: f64 = rng.gen_range(0.25..2.0);
            let rho = rng.gen_range(-0.5..0.5);
            // Keep the combined volatility over a total horizon away from zero.
            let (sig1, sig2) = loop {
                let (a, c) = (rng.gen_range(0.05..0.5), rng.gen_range(0.05..0.5));
                if finance::combined_volatility(a, c, rho) * t.sqrt() >= 0.1 {
                    break (a, c);
                }
            };
            vec![
                reals(&[s1, rng.gen_range(0.0..0.08), sig1, t]),
                reals(&[s2, rng.gen_range(0.0..0.08), sig2, rho]),
            ]
        },
    }
}

fn fx_option(kind: OptionKind) -> ContractSpec {
    let mut b = CircuitBuilder::new();
    let p1 = b.input(4 * 32);
    let p2 = b.input(2 * 32);
    let (s0, x, r, t) = (&p1[..32], &p1[32..64], &p1[64..96], &p1[96..128]);
    let (rf, sigma) = (&p2[..32], &p2[32..64]);
    let ratio = fixed::fixed_div(&mut b, s0, x, Q16_16);
    let drift = fixed::fixed_sub(&mut b, r, rf);
    let (d1, d2) = d1_d2(&mut b, &ratio, &drift, sigma, t);
    let fs = discounted(&mut b, s0, rf, t);
    let fx = discounted(&mut b, x, r, t);
    let price = match kind {
        OptionKind::Call => {
            let n1 = fixed::fixed_phi(&mut b, &d1, Q16_16);
            let n2 = fixed::fixed_phi(&mut b, &d2, Q16_16);
            let l = mul(&mut b, &fs, &n1);
            let r = mul(&mut b, &fx, &n2);
            fixed::fixed_sub(&mut b, &l, &r)
        }
        OptionKind::Put => {
            let m1 = fneg(&mut b, &d1);
            let m2 = fneg(&mut b, &d2);
            let n1 = fixed::fixed_phi(&mut b, &m1, Q16_16);
            let n2 = fixed::fixed_phi(&mut b, &m2, Q16_16);
            let l = mul(&mut b, &fx, &n2);
            let r = mul(&mut b, &fs, &n1);
            fixed::fixed_sub(&mut b, &l, &r)
        }
    };
    b.output(&price);
    let q = ValueType::Q16;
    let (name, title, paper) = match kind {
        OptionKind::Call => ("fx_call_option", "Currency Call Options", Some(323529)),
        OptionKind::Put => ("fx_put_option", "Currency Put Options", None),
    };
    ContractSpec {
        name: name.into(),
        title,
        paper_and_gates: paper,
        parties: vec![
            vec![field("s0", q), field("strike", q), field("r", q), field("t", q)],
            vec![field("r_foreign", q), field("sigma", q)],
        ],
        outputs: vec![field("price", q)],
        circuit: b.finish(),
        oracle: match kind {
            OptionKind::Call => |v| {
                let a = real_args(v);
                vec![Value::Real(finance::garman_kohlhagen(a[0], a[1], a[2], a[4], a[5], a[3], OptionKind::Call))]
            },
            OptionKind::Put => |v| {
                let a = real_args(v);
                vec![Value::Real(finance::garman_kohlhagen(a[0], a[1], a[2], a[4], a[5], a[3], OptionKind::Put))]
            },
        },
        sampler: |rng, _| {
            let x = rng.gen_range(0.5..2.0);
            let s0 = x * rng.gen_range(0.95..1.05);
            let t: f64 = rng.gen_range(0.25..2.0);
            let sigma = rng.gen_range(0.1..0.4) / t.sqrt().min(1.0);
            vec![
                reals(&[s0, x, rng.gen_range(0.0..0.08), t]),
                reals(&[rng.gen_range(0.0..0.08), sigma.min(0.6)]),
            ]
        },
    }
}

fn secrecy_discount() -> ContractSpec {
    let mut b = CircuitBuilder::new();
    let p = b.input(3 * 32);
    let (y, sigma, t) = (&p[..32], &p[32..64], &p[64..96]);
    let st = fixed::fixed_sqrt(&mut b, t, Q16_16);
    let vs = mul(&mut b, sigma, &st);
    let arg = words::sar_const(&vs, 1);
    let phi = fixed::fixed_phi(&mut b, &arg, Q16_16);
    let two_phi = words::shl_const(&phi, 1);
    let one = fixed::fixed_const(1.0, Q16_16);
    let spread = fixed::fixed_sub(&mut b, &two_phi, &one);
    let e = discounted(&mut b, &spread, y, t);
    b.output(&e);
    let q = ValueType::Q16;
    ContractSpec {
        name: "secrecy_discount".into(),
        title: "Secrecy discount",
        paper_and_gates: None,
        parties: vec![vec![field("yield", q), field("sigma", q), field("t", q)]],
        outputs: vec![field("discount", q)],
        circuit: b.finish(),
        oracle: |v| {
            let a = real_args(v);
            vec![Value::Real(finance::secrecy_discount(a[0], a[1], a[2]))]
        },
        sampler: |rng, _| vec![reals(&[rng.gen_range(0.0..0.1), rng.gen_range(0.1..0.6), rng.gen_range(0.5..5.0)])],
    }
}

/// Boundary inputs checked alongside random samples.
pub fn boundary_inputs(spec: &ContractSpec) -> Vec<Vec<Vec<Value>>> {
    let n = spec.num_parties();
    let each = |vals: &[i64]| -> Vec<Vec<Vec<Value>>> {
        vals.iter().map(|&v| (0..n).map(|_| vec![Value::Int(v)]).collect()).collect()
    };
    match spec.name.as_str() {
        "millionaire" => vec![
            vec![vec![Value::Int(3)], vec![Value::Int(5)]],
            vec![vec![Value::Int(5)], vec![Value::Int(3)]],
            vec![vec![Value::Int(7)], vec![Value::Int(7)]],
            vec![vec![Value::Int(i32::MIN as i64)], vec![Value::Int(i32::MAX as i64)]],
            vec![vec![Value::Int(i32::MAX as i64)], vec![Value::Int(i32::MIN as i64)]],
            vec![vec![Value::Int(-1)], vec![Value::Int(0)]],
        ],
        "second_price_auction" => each(&[0, i32::MAX as i64, i32::MIN as i64, -1]),
        "crowdfund" | "dao_invest_fund" if n == 2 => vec![
            vec![vec![Value::Int(600)], vec![Value::Int(500)]],
            vec![vec![Value::Int(400)], vec![Value::Int(500)]],
            vec![vec![Value::Int(1000)], vec![Value::Int(0)]],
            vec![vec![Value::Int(999)], vec![Value::Int(0)]],
            vec![vec![Value::Int(0)], vec![Value::Int(0)]],
        ],
        _ => Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_examples() {
        assert!(millionaire_plain(3, 5));
        assert!(!millionaire_plain(5, 3));
        assert!(!millionaire_plain(7, 7));
        assert_eq!(second_price_plain(&[5, 9, 7]), Some((1, 7)));
        assert_eq!(second_price_plain(&[4, 4]), Some((0, 4)));
        assert_eq!(second_price_plain(&[4]), None);
        assert_eq!(crowdfund_plain(&[600, 500]), 1100);
        assert_eq!(crowdfund_plain(&[400, 500]), 0);
        assert_eq!(crowdfund_plain(&[1000, 0]), 1000);
        assert!((dao_plain(&[1000, 0]) - 1220.19).abs() < 0.01);
        let o = |price, qty| Order { price, qty };
        assert_eq!(double_auction_plain(&[o(10, 1)], &[o(8, 1)]), (9, 1));
        assert_eq!(double_auction_plain(&[o(5, 1)], &[o(8, 1)]), (0, 0));
    }

    #[test]
    fn value_encoding() {
        let t = ValueType::INT32;
        assert!(t.encode("x", &Value::Int(1 << 31)).is_err());
        assert_eq!(t.decode(&t.encode("x", &Value::Int(-5)).unwrap()), Value::Int(-5));
        assert!(ValueType::UINT32.encode("x", &Value::Int(-1)).is_err());
        assert!(ValueType::Q16.encode("x", &Value::Real(40000.0)).is_err());
        assert!(ValueType::INT32.encode("x", &Value::Real(1.5)).is_err());
        assert_eq!(Value::parse("12"), Some(Value::Int(12)));
        assert_eq!(Value::parse("0.5"), Some(Value::Real(0.5)));
    }
}
