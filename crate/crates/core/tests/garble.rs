use proptest::prelude::*;
use pvsc_core::circuit::testing::{random_bits, random_circuit};
use pvsc_core::circuit::{bits_to_uint, build_gadget, int_to_bits};
use pvsc_core::garble::{decode, encode, eval_garbled, eval_garbled_traced, garble, garble_full, GarbleError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn correctness_on_random_circuits() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let n_gates = rng.gen_range(1..=2000);
        let widths = [rng.gen_range(1..12), rng.gen_range(1..12)];
        let outs = rng.gen_range(1..=n_gates.min(16));
        let c = random_circuit(&mut rng, &widths, n_gates, outs);
        let seed: [u8; 32] = rng.gen();
        let (gc, enc, dec) = garble(&c, &seed);
        let x = random_bits(&mut rng, c.num_inputs());
        let got = decode(&dec, &eval_garbled(&gc, &encode(&enc, &x).unwrap()).unwrap()).unwrap();
        assert_eq!(got, c.eval_flat(&x));
    }
}

#[test]
fn a_thousand_gate_circuit_on_a_hundred_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let c = random_circuit(&mut rng, &[16, 16], 1000, 32);
    let (gc, enc, dec) = garble(&c, &[7; 32]);
    for _ in 0..100 {
        let x = random_bits(&mut rng, 32);
        let got = decode(&dec, &eval_garbled(&gc, &encode(&enc, &x).unwrap()).unwrap()).unwrap();
        assert_eq!(got, c.eval_flat(&x));
    }
}

#[test]
fn adder_end_to_end() {
    let c = build_gadget("add", 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let (a, b) = (rng.gen_range(0..256i128), rng.gen_range(0..256i128));
        let g = garble_full(&c, &rng.gen());
        let x = [int_to_bits(a, 8), int_to_bits(b, 8)].concat();
        let out = eval_garbled(&g.gc, &encode(&g.encoding, &x).unwrap()).unwrap();
        assert_eq!(bits_to_uint(&decode(&g.decoding, &out).unwrap()) as i128, (a + b) % 256);
    }
}

#[test]
fn obliviousness_and_free_xor_instrumented() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let c = random_circuit(&mut rng, &[6, 6], 500, 8);
        let g = garble_full(&c, &rng.gen());
        let delta = g.encoding.delta();
        assert!(delta.lsb());
        for i in 0..c.num_inputs() {
            let (w0, w1) = g.encoding.pair(i);
            assert_eq!(w0.0 ^ w1.0, delta);
        }
        let x = random_bits(&mut rng, 12);
        let (_, trace) = eval_garbled_traced(&g.gc, &encode(&g.encoding, &x).unwrap()).unwrap();
        assert!(trace.rows_opened.iter().all(|&n| n == 1), "exactly one row per AND gate");
        // Plaintext value of every wire, to check the evaluator holds exactly
        // the label for that value and never its sibling.
        let mut vals = x.clone();
        for gate in c.gates() {
            vals.push(match *gate {
                pvsc_core::circuit::Gate::And { a, b, .. } => vals[a] & vals[b],
                pvsc_core::circuit::Gate::Xor { a, b, .. } => vals[a] ^ vals[b],
                pvsc_core::circuit::Gate::Inv { a, .. } => !vals[a],
            });
        }
        for (w, &active) in trace.active_labels.iter().enumerate() {
            let zero = g.wire_zero_labels[w];
            assert_eq!(active, zero ^ delta.select(vals[w]), "wire {w}");
        }
    }
}

#[test]
fn every_row_bit_flip_detected() {
    let c = build_gadget("gt", 2).unwrap();
    let (gc, enc, _) = garble(&c, &[8; 32]);
    let x = [true, false, false, true];
    let labels = encode(&enc, &x).unwrap();
    let (_, trace) = eval_garbled_traced(&gc, &labels).unwrap();
    // Find the row actually used at the first AND gate and flip each of its bits.
    let first_and = c.gates().iter().position(|g| matches!(g, pvsc_core::circuit::Gate::And { .. })).unwrap();
    let (a, b) = match c.gates()[first_and] {
        pvsc_core::circuit::Gate::And { a, b, .. } => (a, b),
        _ => unreachable!(),
    };
    let idx = 2 * trace.active_labels[a].lsb() as usize + trace.active_labels[b].lsb() as usize;
    for bit in 0..160 {
        let mut t = gc.clone();
        t.tamper_row(0, idx, bit);
        assert!(matches!(eval_garbled(&t, &labels), Err(GarbleError::DecryptionFailure { .. })), "bit {bit}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn garbled_matches_plaintext(seed in any::<[u8; 32]>(), cseed in any::<u64>(), x in proptest::collection::vec(any::<bool>(), 10)) {
        let mut rng = ChaCha8Rng::seed_from_u64(cseed);
        let c = random_circuit(&mut rng, &[4, 6], 300, 5);
        let (gc, enc, dec) = garble(&c, &seed);
        let got = decode(&dec, &eval_garbled(&gc, &encode(&enc, &x).unwrap()).unwrap()).unwrap();
        prop_assert_eq!(got, c.eval_flat(&x));
    }
}
