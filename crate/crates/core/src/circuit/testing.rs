//! Random circuit generation for property tests.

use rand::Rng;

use super::{Circuit, Gate};

/// A random canonical circuit. Gates pick their operands uniformly among the
/// wires defined so far; the last `n_outputs` gates drive the outputs.
pub fn random_circuit<R: Rng + ?Sized>(
    rng: &mut R,
    input_widths: &[usize],
    n_gates: usize,
    n_outputs: usize,
) -> Circuit {
    let n_in: usize = input_widths.iter().sum();
    assert!(n_in > 0 && n_outputs <= n_gates);
    let mut gates = Vec::with_capacity(n_gates);
    for i in 0..n_gates {
        let out = n_in + i;
        let a = rng.gen_range(0..out);
        let b = rng.gen_range(0..out);
        gates.push(match rng.gen_range(0..5) {
            0 | 1 => Gate::And { a, b, out },
            2 | 3 => Gate::Xor { a, b, out },
            _ => Gate::Inv { a, out },
        });
    }
    Circuit::new(n_in + n_gates, gates, input_widths.to_vec(), vec![n_outputs]).expect("valid by construction")
}

pub fn random_bits<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<bool> {
    (0..n).map(|_| rng.gen()).collect()
}
