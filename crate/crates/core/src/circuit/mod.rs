//! Boolean circuit intermediate representation.
//!
//! A [`Circuit`] is a topologically ordered list of AND/XOR/INV gates. Primary
//! inputs occupy the first wires, grouped into one contiguous segment per party;
//! outputs occupy the last wires, grouped into output segments. Every other wire
//! is driven by exactly one gate, so `num_wires = inputs + gates`.
//!
//! Multi-bit values are little-endian: bit 0 of a segment is the least
//! significant bit.

mod bristol;
mod builder;
pub mod fixed;
mod gadgets;
pub mod testing;
pub mod words;

use std::fmt;

use thiserror::Error;

use crate::crypto::Digest;

pub use bristol::{emit_circuit, parse_circuit};
pub use builder::{Bit, CircuitBuilder, Word};
pub use fixed::{FixedFormat, FixedPoint, Q16_16};
pub use gadgets::{build_gadget, GadgetKind};

pub type WireId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Gate {
    And { a: WireId, b: WireId, out: WireId },
    Xor { a: WireId, b: WireId, out: WireId },
    Inv { a: WireId, out: WireId },
}

impl Gate {
    pub fn out(&self) -> WireId {
        match *self {
            Gate::And { out, .. } | Gate::Xor { out, .. } | Gate::Inv { out, .. } => out,
        }
    }

    fn inputs(&self) -> (WireId, Option<WireId>) {
        match *self {
            Gate::And { a, b, .. } | Gate::Xor { a, b, .. } => (a, Some(b)),
            Gate::Inv { a, .. } => (a, None),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CircuitError {
    #[error("input arity mismatch: party {party} expects {expected} bits, got {got}")]
    InputArity { party: usize, expected: usize, got: usize },
    #[error("expected {expected} input parties, got {got}")]
    PartyCount { expected: usize, got: usize },
    #[error("malformed circuit: {0}")]
    Malformed(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown gadget `{0}`")]
    UnknownGadget(String),
    #[error("gadget `{kind}` does not support width {width}")]
    UnsupportedWidth { kind: String, width: usize },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GateCounts {
    pub and_count: usize,
    pub xor_count: usize,
    pub inv_count: usize,
}

impl GateCounts {
    pub fn total(&self) -> usize {
        self.and_count + self.xor_count + self.inv_count
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct Circuit {
    num_wires: usize,
    gates: Vec<Gate>,
    input_widths: Vec<usize>,
    output_widths: Vec<usize>,
}

impl fmt::Debug for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Circuit")
            .field("num_wires", &self.num_wires)
            .field("gates", &self.gates.len())
            .field("input_widths", &self.input_widths)
            .field("output_widths", &self.output_widths)
            .finish()
    }
}

impl Circuit {
    /// Validates the structural invariants and builds the circuit.
    pub fn new(
        num_wires: usize,
        gates: Vec<Gate>,
        input_widths: Vec<usize>,
        output_widths: Vec<usize>,
    ) -> Result<Self, CircuitError> {
        let n_in: usize = input_widths.iter().sum();
        let n_out: usize = output_widths.iter().sum();
        if num_wires != n_in + gates.len() {
            return Err(CircuitError::Malformed(format!(
                "{num_wires} wires but {n_in} inputs and {} gates",
                gates.len()
            )));
        }
        if n_out > num_wires {
            return Err(CircuitError::Malformed(format!(
                "{n_out} outputs exceed {num_wires} wires"
            )));
        }
        let mut defined = vec![false; num_wires];
        defined[..n_in].iter_mut().for_each(|d| *d = true);
        for (i, g) in gates.iter().enumerate() {
            let (a, b) = g.inputs();
            for w in std::iter::once(a).chain(b) {
                if w >= num_wires || !defined[w] {
                    return Err(CircuitError::Malformed(format!(
                        "gate {i} reads wire {w} before it is driven"
                    )));
                }
            }
            let out = g.out();
            if out >= num_wires {
                return Err(CircuitError::Malformed(format!("gate {i} drives wire {out} out of range")));
            }
            if defined[out] {
                return Err(CircuitError::Malformed(format!("wire {out} driven twice (gate {i})")));
            }
            defined[out] = true;
        }
        Ok(Circuit { num_wires, gates, input_widths, output_widths })
    }

    pub fn empty() -> Self {
        Circuit { num_wires: 0, gates: Vec::new(), input_widths: Vec::new(), output_widths: Vec::new() }
    }

    pub fn num_wires(&self) -> usize {
        self.num_wires
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn input_widths(&self) -> &[usize] {
        &self.input_widths
    }

    pub fn output_widths(&self) -> &[usize] {
        &self.output_widths
    }

    pub fn num_inputs(&self) -> usize {
        self.input_widths.iter().sum()
    }

    pub fn num_outputs(&self) -> usize {
        self.output_widths.iter().sum()
    }

    /// Wire range of party `p`'s input segment.
    pub fn input_range(&self, party: usize) -> std::ops::Range<usize> {
        let start: usize = self.input_widths[..party].iter().sum();
        start..start + self.input_widths[party]
    }

    pub fn output_wires(&self) -> std::ops::Range<usize> {
        self.num_wires - self.num_outputs()..self.num_wires
    }

    pub fn gate_counts(&self) -> GateCounts {
        let mut c = GateCounts::default();
        for g in &self.gates {
            match g {
                Gate::And { .. } => c.and_count += 1,
                Gate::Xor { .. } => c.xor_count += 1,
                Gate::Inv { .. } => c.inv_count += 1,
            }
        }
        c
    }

    /// SHA-256 over the Bristol text form.
    pub fn digest(&self) -> Digest {
        Digest::of(emit_circuit(self).as_bytes())
    }

    pub fn check_inputs(&self, inputs: &[Vec<bool>]) -> Result<(), CircuitError> {
        if inputs.len() != self.input_widths.len() {
            return Err(CircuitError::PartyCount { expected: self.input_widths.len(), got: inputs.len() });
        }
        for (party, (bits, &w)) in inputs.iter().zip(&self.input_widths).enumerate() {
            if bits.len() != w {
                return Err(CircuitError::InputArity { party, expected: w, got: bits.len() });
            }
        }
        Ok(())
    }

    /// Evaluates the circuit in the clear on one bit vector per party.
    pub fn eval_plaintext(&self, inputs: &[Vec<bool>]) -> Result<Vec<bool>, CircuitError> {
        self.check_inputs(inputs)?;
        let flat: Vec<bool> = inputs.iter().flatten().copied().collect();
        Ok(self.eval_flat(&flat))
    }

    /// Evaluates on the concatenated input bits. Panics on arity mismatch.
    pub fn eval_flat(&self, inputs: &[bool]) -> Vec<bool> {
        assert_eq!(inputs.len(), self.num_inputs(), "input arity");
        let mut w = vec![false; self.num_wires];
        w[..inputs.len()].copy_from_slice(inputs);
        for g in &self.gates {
            match *g {
                Gate::And { a, b, out } => w[out] = w[a] & w[b],
                Gate::Xor { a, b, out } => w[out] = w[a] ^ w[b],
                Gate::Inv { a, out } => w[out] = !w[a],
            }
        }
        w[self.output_wires()].to_vec()
    }

    /// Bit-sliced evaluation of up to 64 input vectors at once: lane `k` of every
    /// word belongs to the `k`-th input vector.
    pub fn eval_lanes(&self, inputs: &[u64]) -> Vec<u64> {
        assert_eq!(inputs.len(), self.num_inputs(), "input arity");
        let mut w = vec![0u64; self.num_wires];
        w[..inputs.len()].copy_from_slice(inputs);
        for g in &self.gates {
            match *g {
                Gate::And { a, b, out } => w[out] = w[a] & w[b],
                Gate::Xor { a, b, out } => w[out] = w[a] ^ w[b],
                Gate::Inv { a, out } => w[out] = !w[a],
            }
        }
        w[self.output_wires()].to_vec()
    }

    /// Evaluates many flat input vectors, 64 at a time through [`Self::eval_lanes`].
    pub fn eval_batch(&self, inputs: &[Vec<bool>]) -> Vec<Vec<bool>> {
        let n_in = self.num_inputs();
        let mut out = Vec::with_capacity(inputs.len());
        for chunk in inputs.chunks(64) {
            let mut lanes = vec![0u64; n_in];
            for (k, v) in chunk.iter().enumerate() {
                assert_eq!(v.len(), n_in, "input arity");
                for (i, &bit) in v.iter().enumerate() {
                    lanes[i] |= (bit as u64) << k;
                }
            }
            let res = self.eval_lanes(&lanes);
            for k in 0..chunk.len() {
                out.push(res.iter().map(|&w| (w >> k) & 1 == 1).collect());
            }
        }
        out
    }

    /// Splits a flat output vector into its output segments.
    pub fn split_outputs(&self, bits: &[bool]) -> Vec<Vec<bool>> {
        let mut out = Vec::with_capacity(self.output_widths.len());
        let mut pos = 0;
        for &w in &self.output_widths {
            out.push(bits[pos..pos + w].to_vec());
            pos += w;
        }
        out
    }
}

/// Re-emits `c` inside a builder on the given input bits and returns its output bits.
pub fn replay(b: &mut CircuitBuilder, c: &Circuit, inputs: &[Bit]) -> Vec<Bit> {
    assert_eq!(inputs.len(), c.num_inputs(), "input arity");
    let mut w = vec![Bit::ZERO; c.num_wires()];
    w[..inputs.len()].copy_from_slice(inputs);
    for g in c.gates() {
        w[g.out()] = match *g {
            Gate::And { a, b: y, .. } => b.and(w[a], w[y]),
            Gate::Xor { a, b: y, .. } => b.xor(w[a], w[y]),
            Gate::Inv { a, .. } => b.not(w[a]),
        };
    }
    w[c.output_wires()].to_vec()
}

/// Little-endian bits of the low `width` bits of `value`.
pub fn int_to_bits(value: i128, width: usize) -> Vec<bool> {
    (0..width).map(|i| i < 128 && (value >> i) & 1 == 1).collect()
}

/// Unsigned value of a little-endian bit vector (at most 128 bits).
pub fn bits_to_uint(bits: &[bool]) -> u128 {
    bits.iter().enumerate().fold(0u128, |acc, (i, &b)| acc | ((b as u128) << i))
}

/// Two's-complement value of a little-endian bit vector (at most 128 bits).
pub fn bits_to_int(bits: &[bool]) -> i128 {
    let n = bits.len();
    let u = bits_to_uint(bits);
    if n == 0 || n >= 128 || !bits[n - 1] {
        u as i128
    } else {
        u as i128 - (1i128 << n)
    }
}

/// Packs bits into bytes, least significant bit first.
pub fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            out[i / 8] |= 1 << (i % 8);
        }
    }
    out
}

pub fn unpack_bits(bytes: &[u8], n: usize) -> Option<Vec<bool>> {
    if bytes.len() != n.div_ceil(8) {
        return None;
    }
    Some((0..n).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(gate: Gate) -> Circuit {
        Circuit::new(3, vec![gate], vec![1, 1], vec![1]).unwrap()
    }

    #[test]
    fn and_truth_table() {
        let c = single(Gate::And { a: 0, b: 1, out: 2 });
        assert_eq!(c.eval_plaintext(&[vec![true], vec![true]]).unwrap(), vec![true]);
        assert_eq!(c.eval_plaintext(&[vec![true], vec![false]]).unwrap(), vec![false]);
    }

    #[test]
    fn xor_truth_table() {
        let c = single(Gate::Xor { a: 0, b: 1, out: 2 });
        assert_eq!(c.eval_plaintext(&[vec![true], vec![true]]).unwrap(), vec![false]);
        assert_eq!(c.eval_plaintext(&[vec![false], vec![true]]).unwrap(), vec![true]);
    }

    #[test]
    fn input_arity_error() {
        let c = single(Gate::And { a: 0, b: 1, out: 2 });
        assert_eq!(
            c.eval_plaintext(&[vec![true, false], vec![true]]),
            Err(CircuitError::InputArity { party: 0, expected: 1, got: 2 })
        );
        assert!(matches!(c.eval_plaintext(&[vec![true]]), Err(CircuitError::PartyCount { .. })));
    }

    #[test]
    fn gate_counts_tally() {
        assert_eq!(Circuit::empty().gate_counts(), GateCounts::default());
        let c = Circuit::new(
            4,
            vec![Gate::And { a: 0, b: 1, out: 2 }, Gate::Xor { a: 2, b: 0, out: 3 }],
            vec![1, 1],
            vec![1],
        )
        .unwrap();
        assert_eq!(c.gate_counts(), GateCounts { and_count: 1, xor_count: 1, inv_count: 0 });
    }

    #[test]
    fn rejects_non_topological_and_double_drive() {
        let bad = Circuit::new(
            4,
            vec![Gate::And { a: 0, b: 3, out: 2 }, Gate::Xor { a: 0, b: 1, out: 3 }],
            vec![1, 1],
            vec![1],
        );
        assert!(matches!(bad, Err(CircuitError::Malformed(_))));
        let twice = Circuit::new(
            4,
            vec![Gate::And { a: 0, b: 1, out: 2 }, Gate::Xor { a: 0, b: 1, out: 2 }],
            vec![1, 1],
            vec![1],
        );
        assert!(matches!(twice, Err(CircuitError::Malformed(_))));
    }

    #[test]
    fn lanes_agree_with_scalar_eval() {
        let c = single(Gate::And { a: 0, b: 1, out: 2 });
        let out = c.eval_lanes(&[0b1100, 0b1010]);
        assert_eq!(out, vec![0b1000]);
    }

    #[test]
    fn bit_helpers() {
        assert_eq!(bits_to_int(&int_to_bits(-5, 8)), -5);
        assert_eq!(bits_to_uint(&int_to_bits(200, 8)), 200);
        let bits = int_to_bits(0x1234, 13);
        assert_eq!(unpack_bits(&pack_bits(&bits), 13).unwrap(), bits);
    }
}
