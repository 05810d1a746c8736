use pvsc_core::chain::{ChainError, Ledger};
use pvsc_core::circuit::pack_bits;
use pvsc_core::contracts::{self, Value};
use pvsc_core::mpcrun::{
    run_private_contract, transcript_contains, Clearance, Engine, EngineChoice, MpcError, RunConfig,
};
use pvsc_core::ot::OtKind;
use pvsc_core::transport::PartyId;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn seed(i: u64) -> [u8; 32] {
    let mut s = [0u8; 32];
    s[..8].copy_from_slice(&i.to_le_bytes());
    s
}

fn run(name: &str, inputs: &[Vec<Value>], cfg: &RunConfig) -> Vec<Value> {
    let spec = contracts::build_with_parties(name, Some(inputs.len())).unwrap();
    let bits = spec.encode_inputs(inputs).unwrap();
    let engines = EngineChoice::unanimous(inputs.len(), Engine::YaoSemiHonest);
    let mut ledger = Ledger::new();
    let r = run_private_contract(&spec.circuit, &bits, &engines, &Clearance::waived(), cfg, &mut ledger).unwrap();
    assert_eq!(r.output, spec.circuit.eval_plaintext(&bits).unwrap());
    for res in &r.results {
        assert_eq!(res, &r.output);
    }
    assert!(r.block.is_some());
    spec.decode_outputs(&r.output)
}

fn ints(v: &[i64]) -> Vec<Vec<Value>> {
    v.iter().map(|&x| vec![Value::Int(x)]).collect()
}

#[test]
fn millionaire_and_crowdfund_examples() {
    let cfg = RunConfig::new(seed(1));
    assert_eq!(run("millionaire", &ints(&[3, 5]), &cfg), vec![Value::Int(1)]);
    assert_eq!(run("crowdfund", &ints(&[600, 500]), &cfg), vec![Value::Int(1100)]);
    let mut group = RunConfig::new(seed(2));
    group.ot = OtKind::Group;
    assert_eq!(run("millionaire", &ints(&[5, 3]), &group), vec![Value::Int(0)]);
}

#[test]
fn shared_inputs_for_many_parties() {
    let cfg = RunConfig::new(seed(3));
    assert_eq!(run("second_price_auction", &ints(&[5, 9, 7]), &cfg), vec![Value::Int(1), Value::Int(7)]);
    assert_eq!(run("crowdfund", &ints(&[300, 200, 100, 250, 150]), &cfg), vec![Value::Int(1000)]);
    assert_eq!(run("crowdfund", &ints(&[1200]), &cfg), vec![Value::Int(1200)]);
}

#[test]
fn oracle_equivalence_for_registered_contracts() {
    let mut rng = ChaCha20Rng::seed_from_u64(21);
    for name in contracts::REGISTRY {
        let spec = contracts::build(name).unwrap();
        let trials = if spec.gate_counts().and_count > 10_000 { 5 } else { 100 };
        for i in 0..trials {
            let inputs = spec.sample_inputs(&mut rng);
            let mut cfg = RunConfig::new(seed(100 + i));
            cfg.nodes = 2 + (i as usize % 3);
            let got = run(name, &inputs, &cfg);
            assert_eq!(got, spec.eval(&inputs).unwrap(), "{name}");
            assert!(spec.outputs_agree(&got, &spec.oracle(&inputs).unwrap()), "{name}");
        }
    }
}

#[test]
fn engine_disagreement_sends_nothing() {
    let spec = contracts::build("millionaire").unwrap();
    let bits = spec.encode_inputs(&ints(&[3, 5])).unwrap();
    let engines = EngineChoice { declared: vec![Some(Engine::YaoSemiHonest), None] };
    let mut ledger = Ledger::new();
    let err = run_private_contract(&spec.circuit, &bits, &engines, &Clearance::waived(), &RunConfig::new(seed(4)), &mut ledger)
        .unwrap_err();
    assert!(matches!(err.error, MpcError::EngineDisagreement(_)));
    assert!(err.transcript.is_empty());
    assert_eq!(ledger.height(), 0);
}

#[test]
fn evaluator_never_sees_garbler_party_input() {
    let spec = contracts::build("millionaire").unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    for i in 0..20 {
        let canary = rand::Rng::gen_range(&mut rng, 0x0101_0101i64..0x7f7f_7f7f);
        let bits = spec.encode_inputs(&ints(&[canary, 12345])).unwrap();
        let engines = EngineChoice::unanimous(2, Engine::YaoSemiHonest);
        let mut ledger = Ledger::new();
        let r = run_private_contract(&spec.circuit, &bits, &engines, &Clearance::waived(), &RunConfig::new(seed(i)), &mut ledger)
            .unwrap();
        let needle = pack_bits(&bits[0]);
        assert!(transcript_contains(&r.transcript, PartyId::GARBLER, &needle));
        assert!(!transcript_contains(&r.transcript, PartyId::EVALUATOR, &needle));
    }
}

#[test]
fn dissenting_node_breaks_full_quorum() {
    let spec = contracts::build("crowdfund").unwrap();
    let bits = spec.encode_inputs(&ints(&[600, 500])).unwrap();
    let engines = EngineChoice::unanimous(2, Engine::YaoSemiHonest);
    let mut cfg = RunConfig::new(seed(5));
    cfg.nodes = 3;
    cfg.dissent = vec![PartyId::node(3)];
    let mut ledger = Ledger::new();
    // Parties notice the disagreement first.
    let err = run_private_contract(&spec.circuit, &bits, &engines, &Clearance::waived(), &cfg, &mut ledger).unwrap_err();
    assert!(matches!(err.error, MpcError::ResultMismatch(_)), "{err}");
    assert!(!err.transcript.is_empty());
    assert_eq!(ledger.height(), 0);
}

#[test]
fn consensus_quorum_is_checked() {
    use pvsc_core::chain::consensus;
    let reports = vec![(PartyId::GARBLER, vec![1u8]), (PartyId::EVALUATOR, vec![1]), (PartyId::node(3), vec![2])];
    assert!(matches!(consensus(&reports, 3), Err(ChainError::ConsensusFailure { .. })));
    let (value, agreeing) = consensus(&reports, 2).unwrap();
    assert_eq!(value, vec![1]);
    assert_eq!(agreeing, vec![PartyId::GARBLER, PartyId::EVALUATOR]);
}

#[test]
fn too_few_nodes_and_bad_inputs() {
    let spec = contracts::build("millionaire").unwrap();
    let bits = spec.encode_inputs(&ints(&[3, 5])).unwrap();
    let engines = EngineChoice::unanimous(2, Engine::YaoSemiHonest);
    let mut cfg = RunConfig::new(seed(6));
    cfg.nodes = 1;
    let mut ledger = Ledger::new();
    let err = run_private_contract(&spec.circuit, &bits, &engines, &Clearance::waived(), &cfg, &mut ledger).unwrap_err();
    assert!(matches!(err.error, MpcError::TooFewNodes(1)));
    let err = run_private_contract(&spec.circuit, &bits[..1], &engines, &Clearance::waived(), &RunConfig::new(seed(6)), &mut ledger)
        .unwrap_err();
    assert!(matches!(err.error, MpcError::Circuit(_)));
}

#[test]
fn sessions_are_deterministic() {
    let spec = contracts::build("crowdfund").unwrap();
    let bits = spec.encode_inputs(&ints(&[700, 800])).unwrap();
    let engines = EngineChoice::unanimous(2, Engine::YaoSemiHonest);
    let go = || {
        let mut l = Ledger::new();
        run_private_contract(&spec.circuit, &bits, &engines, &Clearance::waived(), &RunConfig::new(seed(9)), &mut l).unwrap()
    };
    let (a, b) = (go(), go());
    assert_eq!(a.transcript.digest(), b.transcript.digest());
    assert_eq!(a.block, b.block);
    let mut ledger = Ledger::new();
    let mut cfg = RunConfig::new(seed(9));
    cfg.write_ledger = false;
    let r = run_private_contract(&spec.circuit, &bits, &engines, &Clearance::waived(), &cfg, &mut ledger).unwrap();
    assert!(r.block.is_none());
    assert_eq!(ledger.height(), 0);
}

#[test]
fn unreachable_quorum_propagates_chain_error() {
    let spec = contracts::build("crowdfund").unwrap();
    let bits = spec.encode_inputs(&ints(&[600, 500])).unwrap();
    let engines = EngineChoice::unanimous(2, Engine::YaoSemiHonest);
    let mut cfg = RunConfig::new(seed(7));
    cfg.quorum = Some(3);
    let mut ledger = Ledger::new();
    let err = run_private_contract(&spec.circuit, &bits, &engines, &Clearance::waived(), &cfg, &mut ledger).unwrap_err();
    assert!(matches!(err.error, MpcError::Chain(ChainError::InsufficientResults { .. })), "{err}");
    assert_eq!(ledger.height(), 0);
}
