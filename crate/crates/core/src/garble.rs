//! Yao garbling with free-XOR and point-and-permute.
//!
//! Every wire carries a zero-label `w0`; the one-label is `w0 ^ R` where `R`
//! is a global offset whose least significant bit is forced to 1, so the two
//! labels of a wire always have opposite permute bits. XOR gates are free, INV
//! gates are free (the output zero-label is the input one-label), and each AND
//! gate gets four authenticated rows indexed by the permute bits of its inputs.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{emit_circuit, parse_circuit, Circuit, Gate};
use crate::crypto::{fingerprint, open_row, seal_row, Block, Digest, Row, KAPPA, ROW_BYTES};

pub type Seed = [u8; 32];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WireLabel(pub Block);

impl WireLabel {
    pub fn permute_bit(self) -> bool {
        self.0.lsb()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GarbleError {
    #[error("expected {expected} labels, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("no row of AND gate {gate} decrypts under the given labels")]
    DecryptionFailure { gate: usize },
    #[error("label on output wire {wire} matches neither output label")]
    UnknownLabel { wire: usize },
    #[error("malformed garbled circuit: {0}")]
    Format(String),
}

#[derive(Clone, PartialEq, Eq)]
pub struct GarbledCircuit {
    circuit: Circuit,
    tables: Vec<[Row; 4]>,
    circuit_digest: Digest,
    free_xor: bool,
}

impl std::fmt::Debug for GarbledCircuit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GarbledCircuit")
            .field("tables", &self.tables.len())
            .field("circuit_digest", &self.circuit_digest)
            .finish()
    }
}

/// Label pairs for the primary inputs, represented by the zero-labels and `R`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputEncoding {
    zero: Vec<Block>,
    delta: Block,
}

/// Per output wire: the permute bit of the zero-label, plus fingerprints of
/// both labels so foreign labels are rejected.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputDecoding {
    pub permute_bits: Vec<bool>,
    fingerprints: Vec<(u64, u64)>,
}

/// Everything the garbler knows after garbling.
pub struct Garbling {
    pub gc: GarbledCircuit,
    pub encoding: InputEncoding,
    pub decoding: OutputDecoding,
    /// Zero-label of every wire; garbler-side secret kept for tests and audits.
    pub wire_zero_labels: Vec<Block>,
}

/// Evaluation statistics: rows of each AND table that authenticate under the
/// evaluator's labels (trial decryption of all four rows).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EvalTrace {
    pub rows_opened: Vec<u8>,
    pub active_labels: Vec<Block>,
}

const OUT_DOMAIN: &[u8] = b"pvsc/out-label";

fn gate_key(a: Block, b: Block) -> [u8; 32] {
    let mut k = [0u8; 32];
    k[..16].copy_from_slice(&a.to_bytes());
    k[16..].copy_from_slice(&b.to_bytes());
    k
}

fn tweak(gate: usize) -> [u8; 8] {
    (gate as u64).to_le_bytes()
}

pub fn garble(circuit: &Circuit, seed: &Seed) -> (GarbledCircuit, InputEncoding, OutputDecoding) {
    let g = garble_full(circuit, seed);
    (g.gc, g.encoding, g.decoding)
}

pub fn garble_full(circuit: &Circuit, seed: &Seed) -> Garbling {
    let mut rng = ChaCha20Rng::from_seed(*seed);
    let delta = Block(Block::random(&mut rng).0 | 1);
    let n_in = circuit.num_inputs();
    let mut w0 = vec![Block::ZERO; circuit.num_wires()];
    for l in w0.iter_mut().take(n_in) {
        *l = Block::random(&mut rng);
    }
    let mut tables = Vec::with_capacity(circuit.gate_counts().and_count);
    for (gi, g) in circuit.gates().iter().enumerate() {
        match *g {
            Gate::Xor { a, b, out } => w0[out] = w0[a] ^ w0[b],
            Gate::Inv { a, out } => w0[out] = w0[a] ^ delta,
            Gate::And { a, b, out } => {
                let z = Block::random(&mut rng);
                w0[out] = z;
                let mut rows = [[0u8; ROW_BYTES]; 4];
                for va in [false, true] {
                    for vb in [false, true] {
                        let la = w0[a] ^ delta.select(va);
                        let lb = w0[b] ^ delta.select(vb);
                        let lo = z ^ delta.select(va & vb);
                        let idx = 2 * la.lsb() as usize + lb.lsb() as usize;
                        rows[idx] = seal_row(&gate_key(la, lb), &tweak(gi), lo);
                    }
                }
                tables.push(rows);
            }
        }
    }
    let outs = circuit.output_wires();
    let decoding = OutputDecoding {
        permute_bits: w0[outs.clone()].iter().map(|l| l.lsb()).collect(),
        fingerprints: w0[outs]
            .iter()
            .map(|&l| (fingerprint(OUT_DOMAIN, l), fingerprint(OUT_DOMAIN, l ^ delta)))
            .collect(),
    };
    let encoding = InputEncoding { zero: w0[..n_in].to_vec(), delta };
    let gc = GarbledCircuit { circuit: circuit.clone(), tables, circuit_digest: circuit.digest(), free_xor: true };
    Garbling { gc, encoding, decoding, wire_zero_labels: w0 }
}

impl InputEncoding {
    pub fn len(&self) -> usize {
        self.zero.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zero.is_empty()
    }

    /// `(w0, w1)` for input wire `i`.
    pub fn pair(&self, i: usize) -> (WireLabel, WireLabel) {
        (WireLabel(self.zero[i]), WireLabel(self.zero[i] ^ self.delta))
    }

    pub fn label(&self, i: usize, bit: bool) -> WireLabel {
        WireLabel(self.zero[i] ^ self.delta.select(bit))
    }

    /// Global offset; garbler secret.
    pub fn delta(&self) -> Block {
        self.delta
    }
}

/// Labels `w^{x[i]}` for a full input vector.
pub fn encode(encoding: &InputEncoding, inputs: &[bool]) -> Result<Vec<WireLabel>, GarbleError> {
    if inputs.len() != encoding.len() {
        return Err(GarbleError::Arity { expected: encoding.len(), got: inputs.len() });
    }
    Ok(inputs.iter().enumerate().map(|(i, &b)| encoding.label(i, b)).collect())
}

/// Labels for the wires in `range` only.
pub fn encode_range(
    encoding: &InputEncoding,
    range: std::ops::Range<usize>,
    bits: &[bool],
) -> Result<Vec<WireLabel>, GarbleError> {
    if bits.len() != range.len() {
        return Err(GarbleError::Arity { expected: range.len(), got: bits.len() });
    }
    Ok(range.zip(bits).map(|(i, &b)| encoding.label(i, b)).collect())
}

impl GarbledCircuit {
    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn circuit_digest(&self) -> Digest {
        self.circuit_digest
    }

    pub fn free_xor(&self) -> bool {
        self.free_xor
    }

    pub fn tables(&self) -> &[[Row; 4]] {
        &self.tables
    }

    pub fn row_count(&self) -> usize {
        4 * self.tables.len()
    }

    /// Flips one bit of one row; used by tamper tests.
    pub fn tamper_row(&mut self, table: usize, row: usize, bit: usize) {
        self.tables[table][row][bit / 8] ^= 1 << (bit % 8);
    }

    const MAGIC: &'static [u8; 5] = b"PVGC\x01";

    /// Binary form: magic, κ, counts, digest, circuit text, then table rows.
    pub fn to_bytes(&self) -> Vec<u8> {
        let text = emit_circuit(&self.circuit);
        let mut out = Vec::with_capacity(64 + text.len() + self.tables.len() * 4 * ROW_BYTES);
        out.extend_from_slice(Self::MAGIC);
        out.extend_from_slice(&(KAPPA as u16).to_le_bytes());
        out.push(self.free_xor as u8);
        out.extend_from_slice(&(self.tables.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.circuit_digest.0);
        out.extend_from_slice(&(text.len() as u32).to_le_bytes());
        out.extend_from_slice(text.as_bytes());
        for t in &self.tables {
            for r in t {
                out.extend_from_slice(r);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GarbleError> {
        let bad = |m: &str| GarbleError::Format(m.to_string());
        let mut r = bytes;
        let mut take = |n: usize| -> Result<&[u8], GarbleError> {
            if r.len() < n {
                return Err(GarbleError::Format("truncated".into()));
            }
            let (h, t) = r.split_at(n);
            r = t;
            Ok(h)
        };
        if take(5)? != Self::MAGIC {
            return Err(bad("bad magic"));
        }
        let kappa = u16::from_le_bytes(take(2)?.try_into().unwrap());
        if kappa as usize != KAPPA {
            return Err(bad("unsupported label length"));
        }
        let free_xor = take(1)?[0] == 1;
        let n_tables = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let digest = Digest(take(32)?.try_into().unwrap());
        let tlen = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let text = std::str::from_utf8(take(tlen)?).map_err(|_| bad("circuit text is not UTF-8"))?;
        let circuit = parse_circuit(text).map_err(|e| GarbleError::Format(e.to_string()))?;
        if circuit.digest() != digest {
            return Err(bad("circuit digest mismatch"));
        }
        if circuit.gate_counts().and_count != n_tables {
            return Err(bad("table count does not match AND count"));
        }
        let mut tables = Vec::with_capacity(n_tables);
        for _ in 0..n_tables {
            let mut t = [[0u8; ROW_BYTES]; 4];
            for row in t.iter_mut() {
                row.copy_from_slice(take(ROW_BYTES)?);
            }
            tables.push(t);
        }
        if !r.is_empty() {
            return Err(bad("trailing bytes"));
        }
        Ok(GarbledCircuit { circuit, tables, circuit_digest: digest, free_xor })
    }
}

/// Evaluates with one label per input wire and returns the output labels.
pub fn eval_garbled(gc: &GarbledCircuit, labels: &[WireLabel]) -> Result<Vec<WireLabel>, GarbleError> {
    eval_inner(gc, labels, false).map(|(o, _)| o)
}

/// Like [`eval_garbled`] but trial-decrypts all four rows of every AND table
/// and records how many authenticate, together with every active label.
pub fn eval_garbled_traced(
    gc: &GarbledCircuit,
    labels: &[WireLabel],
) -> Result<(Vec<WireLabel>, EvalTrace), GarbleError> {
    eval_inner(gc, labels, true)
}

fn eval_inner(
    gc: &GarbledCircuit,
    labels: &[WireLabel],
    trace: bool,
) -> Result<(Vec<WireLabel>, EvalTrace), GarbleError> {
    let c = &gc.circuit;
    if labels.len() != c.num_inputs() {
        return Err(GarbleError::Arity { expected: c.num_inputs(), got: labels.len() });
    }
    let mut w = vec![Block::ZERO; c.num_wires()];
    for (i, l) in labels.iter().enumerate() {
        w[i] = l.0;
    }
    let mut tr = EvalTrace::default();
    let mut t = 0usize;
    for (gi, g) in c.gates().iter().enumerate() {
        match *g {
            // The evaluator cannot tell which label it holds; INV keeps the label.
            Gate::Xor { a, b, out } => w[out] = w[a] ^ w[b],
            Gate::Inv { a, out } => w[out] = w[a],
            Gate::And { a, b, out } => {
                let (la, lb) = (w[a], w[b]);
                let key = gate_key(la, lb);
                let tw = tweak(gi);
                let rows = &gc.tables[t];
                t += 1;
                let idx = 2 * la.lsb() as usize + lb.lsb() as usize;
                if trace {
                    let opened = rows.iter().filter(|r| open_row(&key, &tw, r).is_some()).count();
                    tr.rows_opened.push(opened as u8);
                }
                w[out] = open_row(&key, &tw, &rows[idx]).ok_or(GarbleError::DecryptionFailure { gate: gi })?;
            }
        }
    }
    let outs = w[c.output_wires()].iter().map(|&l| WireLabel(l)).collect();
    if trace {
        tr.active_labels = w;
    }
    Ok((outs, tr))
}

/// Maps active output labels to bits via the permute bits, rejecting labels
/// that match neither of a wire's two labels.
pub fn decode(decoding: &OutputDecoding, labels: &[WireLabel]) -> Result<Vec<bool>, GarbleError> {
    if labels.len() != decoding.permute_bits.len() {
        return Err(GarbleError::Arity { expected: decoding.permute_bits.len(), got: labels.len() });
    }
    labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let fp = fingerprint(OUT_DOMAIN, l.0);
            let (f0, f1) = decoding.fingerprints[i];
            if fp != f0 && fp != f1 {
                return Err(GarbleError::UnknownLabel { wire: i });
            }
            Ok(l.permute_bit() ^ decoding.permute_bits[i])
        })
        .collect()
}

impl OutputDecoding {
    pub fn len(&self) -> usize {
        self.permute_bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permute_bits.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("serializable")
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, GarbleError> {
        serde_json::from_slice(b).map_err(|e| GarbleError::Format(e.to_string()))
    }
}
