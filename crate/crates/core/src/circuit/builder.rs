//! Circuit construction with constant folding.

use super::{Circuit, Gate, WireId};

/// A bit during construction: either a known constant or a builder wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Bit {
    Const(bool),
    Wire(WireId),
}

impl Bit {
    pub const ZERO: Bit = Bit::Const(false);
    pub const ONE: Bit = Bit::Const(true);

    pub fn constant(self) -> Option<bool> {
        match self {
            Bit::Const(c) => Some(c),
            Bit::Wire(_) => None,
        }
    }
}

/// Little-endian vector of bits.
pub type Word = Vec<Bit>;

#[derive(Clone, Copy, Debug)]
enum Node {
    Input,
    And(WireId, WireId),
    Xor(WireId, WireId),
    Inv(WireId),
}

#[derive(Default)]
pub struct CircuitBuilder {
    nodes: Vec<Node>,
    input_widths: Vec<usize>,
    outputs: Vec<Word>,
}

impl CircuitBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares the next party's input segment.
    pub fn input(&mut self, width: usize) -> Word {
        self.input_widths.push(width);
        (0..width)
            .map(|_| {
                self.nodes.push(Node::Input);
                Bit::Wire(self.nodes.len() - 1)
            })
            .collect()
    }

    pub fn output(&mut self, word: &[Bit]) {
        self.outputs.push(word.to_vec());
    }

    fn push(&mut self, n: Node) -> Bit {
        self.nodes.push(n);
        Bit::Wire(self.nodes.len() - 1)
    }

    pub fn and(&mut self, a: Bit, b: Bit) -> Bit {
        match (a, b) {
            (Bit::Const(false), _) | (_, Bit::Const(false)) => Bit::ZERO,
            (Bit::Const(true), x) | (x, Bit::Const(true)) => x,
            (Bit::Wire(x), Bit::Wire(y)) if x == y => a,
            (Bit::Wire(x), Bit::Wire(y)) => self.push(Node::And(x, y)),
        }
    }

    pub fn xor(&mut self, a: Bit, b: Bit) -> Bit {
        match (a, b) {
            (Bit::Const(false), x) | (x, Bit::Const(false)) => x,
            (Bit::Const(true), x) | (x, Bit::Const(true)) => self.not(x),
            (Bit::Wire(x), Bit::Wire(y)) if x == y => Bit::ZERO,
            (Bit::Wire(x), Bit::Wire(y)) => self.push(Node::Xor(x, y)),
        }
    }

    pub fn not(&mut self, a: Bit) -> Bit {
        match a {
            Bit::Const(c) => Bit::Const(!c),
            Bit::Wire(x) => match self.nodes[x] {
                Node::Inv(y) => Bit::Wire(y),
                _ => self.push(Node::Inv(x)),
            },
        }
    }

    pub fn or(&mut self, a: Bit, b: Bit) -> Bit {
        let x = self.xor(a, b);
        let y = self.and(a, b);
        self.xor(x, y)
    }

    /// `sel ? t : f`, one AND gate.
    pub fn mux(&mut self, sel: Bit, f: Bit, t: Bit) -> Bit {
        let d = self.xor(f, t);
        let m = self.and(sel, d);
        self.xor(f, m)
    }

    /// Majority of three bits, one AND gate.
    pub fn maj(&mut self, a: Bit, b: Bit, c: Bit) -> Bit {
        let ab = self.xor(a, b);
        let ac = self.xor(a, c);
        let m = self.and(ab, ac);
        self.xor(a, m)
    }

    pub fn and_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::And(..))).count()
    }

    /// Produces the canonical circuit: inputs first, live gates in order, and
    /// the output bits on the final wires.
    pub fn finish(self) -> Circuit {
        let CircuitBuilder { mut nodes, input_widths, outputs } = self;
        let out_bits: Vec<Bit> = outputs.iter().flatten().copied().collect();
        let output_widths: Vec<usize> = outputs.iter().map(Vec::len).collect();
        let n_in: usize = input_widths.iter().sum();

        // Constants on output wires need a concrete wire: x ^ x, optionally inverted.
        let mut zero: Option<WireId> = None;
        let mut one: Option<WireId> = None;
        let mut out_nodes: Vec<WireId> = Vec::with_capacity(out_bits.len());
        for b in &out_bits {
            let w = match *b {
                Bit::Wire(w) => w,
                Bit::Const(c) => {
                    assert!(n_in > 0, "constant output requires at least one input wire");
                    let z = *zero.get_or_insert_with(|| {
                        nodes.push(Node::Xor(0, 0));
                        nodes.len() - 1
                    });
                    if c {
                        *one.get_or_insert_with(|| {
                            nodes.push(Node::Inv(z));
                            nodes.len() - 1
                        })
                    } else {
                        z
                    }
                }
            };
            out_nodes.push(w);
        }

        // Liveness from outputs.
        let mut live = vec![false; nodes.len()];
        for &w in &out_nodes {
            live[w] = true;
        }
        for i in (0..nodes.len()).rev() {
            if !live[i] {
                continue;
            }
            match nodes[i] {
                Node::Input => {}
                Node::And(a, b) | Node::Xor(a, b) => {
                    live[a] = true;
                    live[b] = true;
                }
                Node::Inv(a) => live[a] = true,
            }
        }

        // A gate can sit on its output wire directly if nothing else reads it and
        // no other output claims it; otherwise it is copied through two inverters.
        let mut readers = vec![0usize; nodes.len()];
        for (i, n) in nodes.iter().enumerate() {
            if !live[i] {
                continue;
            }
            match *n {
                Node::And(a, b) | Node::Xor(a, b) => {
                    readers[a] += 1;
                    readers[b] += 1;
                }
                Node::Inv(a) => readers[a] += 1,
                Node::Input => {}
            }
        }
        let mut claims = vec![0usize; nodes.len()];
        for &w in &out_nodes {
            claims[w] += 1;
        }
        let mut tail = vec![false; nodes.len()];
        let mut tail_src: Vec<(WireId, bool)> = Vec::with_capacity(out_nodes.len());
        for &w in &out_nodes {
            let movable = !matches!(nodes[w], Node::Input) && readers[w] == 0 && claims[w] == 1;
            if movable {
                tail[w] = true;
            }
            tail_src.push((w, movable));
        }

        let mut map = vec![usize::MAX; nodes.len()];
        let mut gates = Vec::new();
        let mut next = 0usize;
        for (i, n) in nodes.iter().enumerate() {
            if matches!(n, Node::Input) {
                map[i] = next;
                next += 1;
            }
        }
        let emit = |n: Node, out: WireId, map: &[usize]| -> Gate {
            match n {
                Node::And(a, b) => Gate::And { a: map[a], b: map[b], out },
                Node::Xor(a, b) => Gate::Xor { a: map[a], b: map[b], out },
                Node::Inv(a) => Gate::Inv { a: map[a], out },
                Node::Input => unreachable!(),
            }
        };
        for (i, n) in nodes.iter().enumerate() {
            if matches!(n, Node::Input) || !live[i] || tail[i] {
                continue;
            }
            map[i] = next;
            gates.push(emit(*n, next, &map));
            next += 1;
        }
        // First inverter of each copy.
        let mut copy_mid = Vec::new();
        for &(w, movable) in &tail_src {
            if !movable {
                gates.push(Gate::Inv { a: map[w], out: next });
                copy_mid.push(next);
                next += 1;
            }
        }
        let mut mids = copy_mid.into_iter();
        for &(w, movable) in &tail_src {
            if movable {
                map[w] = next;
                gates.push(emit(nodes[w], next, &map));
            } else {
                gates.push(Gate::Inv { a: mids.next().unwrap(), out: next });
            }
            next += 1;
        }
        Circuit::new(next, gates, input_widths, output_widths).expect("builder produces valid circuits")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_folding() {
        let mut b = CircuitBuilder::new();
        let x = b.input(1)[0];
        assert_eq!(b.and(x, Bit::ZERO), Bit::ZERO);
        assert_eq!(b.and(x, Bit::ONE), x);
        assert_eq!(b.xor(x, x), Bit::ZERO);
        let nx = b.not(x);
        assert_eq!(b.not(nx), x);
        assert_eq!(b.and_count(), 0);
    }

    #[test]
    fn outputs_on_tail_wires() {
        let mut b = CircuitBuilder::new();
        let x = b.input(2);
        let y = b.and(x[0], x[1]);
        let z = b.xor(y, x[0]);
        b.output(&[y, z, x[1], Bit::ONE, y]);
        let c = b.finish();
        let n = c.num_wires();
        assert_eq!(c.output_wires(), n - 5..n);
        for v in 0..4u8 {
            let i = vec![v & 1 == 1, v & 2 == 2];
            let a = i[0] & i[1];
            assert_eq!(c.eval_flat(&i), vec![a, a ^ i[0], i[1], true, a]);
        }
    }

    #[test]
    fn dead_gates_dropped() {
        let mut b = CircuitBuilder::new();
        let x = b.input(2);
        let _dead = b.and(x[0], x[1]);
        let y = b.xor(x[0], x[1]);
        b.output(&[y]);
        let c = b.finish();
        assert_eq!(c.gate_counts().and_count, 0);
        assert_eq!(c.gates().len(), 1);
    }
}
