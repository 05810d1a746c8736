use proptest::prelude::*;
use pvsc_core::chain::{
    consensus, encrypt_params, gas_cost, oracle_roundtrip, ChainError, Ledger, OracleCall, OracleConfig,
    OracleExecutor, OracleResult, Record,
};
use pvsc_core::transport::PartyId;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn n(i: usize) -> PartyId {
    PartyId::node(i)
}

#[test]
fn quorum_semantics() {
    let mut l = Ledger::new();
    let same = vec![(n(1), b"r".to_vec()), (n(2), b"r".to_vec()), (n(3), b"r".to_vec())];
    l.append_with_consensus("sc", &same, 3).unwrap();
    assert_eq!(l.height(), 1);

    let one_off = vec![(n(1), b"r".to_vec()), (n(2), b"x".to_vec()), (n(3), b"r".to_vec())];
    match l.append_with_consensus("sc", &one_off, 3) {
        Err(ChainError::ConsensusFailure { dissenting, agreeing: 2, needed: 3 }) => assert_eq!(dissenting, vec![n(2)]),
        other => panic!("{other:?}"),
    }
    assert_eq!(l.height(), 1, "failure appends nothing");

    let four = vec![(n(1), b"a".to_vec()), (n(2), b"b".to_vec()), (n(3), b"b".to_vec()), (n(4), b"b".to_vec())];
    let blk = l.append_with_consensus("sc", &four, 3).unwrap();
    match &blk.payload[0] {
        Record::Result { bytes, nodes, .. } => {
            assert_eq!(bytes, b"b");
            assert_eq!(nodes, &vec![n(2), n(3), n(4)]);
        }
        r => panic!("{r:?}"),
    }
    assert!(matches!(consensus(&same[..2], 3), Err(ChainError::InsufficientResults { got: 2, needed: 3 })));
}

#[test]
fn consensus_is_pure() {
    let r = vec![(n(1), b"q".to_vec()), (n(2), b"q".to_vec()), (n(3), b"z".to_vec())];
    assert_eq!(consensus(&r, 2), consensus(&r, 2));
}

#[test]
fn cost_ratio() {
    let ratio = gas_cost(10_000_000, 5, 21.0, 380.0) / 0.000000022;
    assert!((ratio / 1.8136e10 - 1.0).abs() < 1e-3);
}

#[test]
fn oracle_sizes_and_errors() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let ex = OracleExecutor::generate(&mut rng);
    let mut l = Ledger::new();
    let params = encrypt_params(&ex.public, b"price?", &mut rng).unwrap();
    let call = OracleCall { params: params.clone(), gas_budget: 100_000 };
    let small = oracle_roundtrip(&mut l, &call, &ex, OracleConfig::default(), |p| {
        assert_eq!(p, b"price?");
        vec![7u8; 16]
    })
    .unwrap();
    assert_eq!(small, OracleResult::Inline(vec![7u8; 16]));
    let big = oracle_roundtrip(&mut l, &call, &ex, OracleConfig::default(), |_| vec![9u8; 4096]).unwrap();
    match big {
        OracleResult::Blob(d) => assert_eq!(l.blob(&d).unwrap(), &vec![9u8; 4096][..]),
        r => panic!("{r:?}"),
    }
    let broke = OracleCall { params: params.clone(), gas_budget: 0 };
    assert!(matches!(
        oracle_roundtrip(&mut l, &broke, &ex, OracleConfig::default(), |_| vec![]),
        Err(ChainError::InsufficientGas { budget: 0, .. })
    ));
    let other = OracleExecutor::generate(&mut rng);
    assert_eq!(oracle_roundtrip(&mut l, &call, &other, OracleConfig::default(), |_| vec![]), Err(ChainError::Decryption));
    l.verify_integrity().unwrap();
}

#[test]
fn export_import_round_trip() {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let ex = OracleExecutor::generate(&mut rng);
    let mut l = Ledger::new();
    let call = OracleCall { params: encrypt_params(&ex.public, b"x", &mut rng).unwrap(), gas_budget: 50_000 };
    oracle_roundtrip(&mut l, &call, &ex, OracleConfig::default(), |_| vec![1u8; 2000]).unwrap();
    l.append_with_consensus("c", &[(n(1), vec![1]), (n(2), vec![1])], 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    l.export_blobs(dir.path()).unwrap();
    let blobs = Ledger::read_blobs(dir.path()).unwrap();
    let back = Ledger::import_jsonl(&l.export_jsonl(), blobs).unwrap();
    assert_eq!(back, l);
    assert!(l.export_jsonl().lines().all(|line| line.contains("\"digest\":\"")));
    // Missing blob store breaks integrity.
    assert!(Ledger::import_jsonl(&l.export_jsonl(), Default::default()).is_err());
}

proptest! {
    #[test]
    fn any_payload_mutation_detected(results in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 1..8), 1..6),
                                     which in any::<prop::sample::Index>(), byte in any::<u8>()) {
        let mut l = Ledger::new();
        for r in &results {
            l.append_with_consensus("c", &[(n(1), r.clone())], 1).unwrap();
        }
        prop_assert!(l.verify_integrity().is_ok());
        let h = 1 + which.index(results.len());
        if let Record::Result { bytes, .. } = &mut l.payload_mut(h)[0] {
            let old = bytes[0];
            bytes[0] = if byte == old { old.wrapping_add(1) } else { byte };
        }
        prop_assert_eq!(l.verify_integrity(), Err(ChainError::Integrity(h as u64)));
    }
}
