//! Secure execution of a contract circuit by two nodes running Yao's protocol,
//! with the result committed to the ledger through quorum consensus.
//!
//! With exactly two contract parties, `E1` hands its input to the garbler node
//! `NG` and `E2` to the evaluator node `NE`. With any other number, every party
//! XOR-shares its input between the two nodes and the circuit is wrapped so the
//! shares are recombined by XOR gates before the contract logic. Additional
//! nodes receive the output labels and the decoding table and act as decoding
//! replicas for consensus.

use std::cell::RefCell;
use std::rc::Rc;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainError, Ledger};
use crate::circuit::{pack_bits, replay, unpack_bits, Circuit, CircuitBuilder, CircuitError, GateCounts};
use crate::crypto::{Block, Digest};
use crate::garble::{self, GarbleError, GarbledCircuit, OutputDecoding, WireLabel};
use crate::ot::{self, OtError, OtKind, OtMessagePair};
use crate::transport::{run_session, Ctx, Party, PartyId, SessionConfig, Transcript, TransportError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Engine {
    YaoSemiHonest,
}

impl Engine {
    pub fn parse(s: &str) -> Option<Engine> {
        match s {
            "yao" | "yao_semi_honest" => Some(Engine::YaoSemiHonest),
            _ => None,
        }
    }
}

/// Each party's engine selection; `None` means the party picked nothing usable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EngineChoice {
    pub declared: Vec<Option<Engine>>,
}

impl EngineChoice {
    pub fn unanimous(n: usize, e: Engine) -> Self {
        EngineChoice { declared: vec![Some(e); n] }
    }

    pub fn agreed(&self) -> Option<Engine> {
        let first = (*self.declared.first()?)?;
        self.declared.iter().all(|d| *d == Some(first)).then_some(first)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum ClearanceKind {
    Verified { package: Digest, level: u8 },
    Waived,
}

/// Evidence that the contract was verified before execution, or an explicit waiver.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clearance(ClearanceKind);

impl Clearance {
    pub(crate) fn verified(package: Digest, level: u8) -> Self {
        Clearance(ClearanceKind::Verified { package, level })
    }

    pub fn waived() -> Self {
        Clearance(ClearanceKind::Waived)
    }

    pub fn is_waived(&self) -> bool {
        self.0 == ClearanceKind::Waived
    }

    pub fn verified_level(&self) -> Option<u8> {
        match self.0 {
            ClearanceKind::Verified { level, .. } => Some(level),
            ClearanceKind::Waived => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MpcError {
    #[error("engine disagreement: {0:?}")]
    EngineDisagreement(Vec<Option<Engine>>),
    #[error("need at least two nodes, got {0}")]
    TooFewNodes(usize),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Garble(#[from] GarbleError),
    #[error(transparent)]
    Ot(#[from] OtError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("party {0} received conflicting results")]
    ResultMismatch(PartyId),
    #[error("malformed message: {0}")]
    Malformed(String),
}

/// A failed run together with everything that was sent before it failed.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{error}")]
pub struct MpcAbort {
    pub error: MpcError,
    pub transcript: Transcript,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub nodes: usize,
    /// Consensus quorum; defaults to every node.
    pub quorum: Option<usize>,
    pub ot: OtKind,
    pub seed: [u8; 32],
    pub session_id: u64,
    pub latency_ms: f64,
    pub label: String,
    pub write_ledger: bool,
    /// Nodes that report a corrupted result (fault injection for tests).
    pub dissent: Vec<PartyId>,
}

impl RunConfig {
    pub fn new(seed: [u8; 32]) -> Self {
        RunConfig {
            nodes: 2,
            quorum: None,
            ot: OtKind::Dealer,
            seed,
            session_id: 1,
            latency_ms: 0.0,
            label: "contract".into(),
            write_ledger: true,
            dissent: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub garble_ms: f64,
    pub ot_ms: f64,
    pub evaluate_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockRef {
    pub height: u64,
    pub digest: Digest,
}

#[derive(Clone, Debug)]
pub struct SessionResult {
    pub output: Vec<bool>,
    /// Result vector delivered to each contract party.
    pub results: Vec<Vec<bool>>,
    pub node_results: Vec<(PartyId, Vec<bool>)>,
    pub block: Option<BlockRef>,
    pub transcript: Transcript,
    pub gate_counts: GateCounts,
    pub estimated_latency_ms: f64,
    pub timings: PhaseTimings,
}

/// Wraps `c` so that each party's input arrives as two XOR shares: segment 0
/// holds the garbler-side shares of all parties, segment 1 the evaluator-side.
pub fn shared_input_circuit(c: &Circuit) -> Circuit {
    let n = c.num_inputs();
    let mut b = CircuitBuilder::new();
    let g = b.input(n);
    let e = b.input(n);
    let x: Vec<_> = g.iter().zip(&e).map(|(&p, &q)| b.xor(p, q)).collect();
    let outs = replay(&mut b, c, &x);
    let mut pos = 0;
    for &w in c.output_widths() {
        b.output(&outs[pos..pos + w]);
        pos += w;
    }
    b.finish()
}

enum Out {
    Party(Result<Vec<bool>, MpcError>),
    Node(Result<Vec<bool>, MpcError>),
    Dealer(Result<(), MpcError>),
}

fn blocks_bytes(ls: &[WireLabel]) -> Vec<u8> {
    ls.iter().flat_map(|l| l.0.to_bytes()).collect()
}

fn bytes_blocks(b: &[u8], n: usize) -> Result<Vec<WireLabel>, MpcError> {
    if b.len() != 16 * n {
        return Err(MpcError::Malformed(format!("expected {n} labels")));
    }
    Ok(b.chunks(16).map(|c| WireLabel(Block::from_slice(c).expect("16 bytes"))).collect())
}

fn recv_bits(bytes: &[u8], n: usize) -> Result<Vec<bool>, MpcError> {
    unpack_bits(bytes, n).ok_or_else(|| MpcError::Malformed("bit vector".into()))
}

/// Runs `circuit` on the parties' inputs.
///
/// The engine check happens before any message is sent, so a disagreement
/// aborts with an empty transcript.
pub fn run_private_contract(
    circuit: &Circuit,
    inputs: &[Vec<bool>],
    engines: &EngineChoice,
    clearance: &Clearance,
    config: &RunConfig,
    ledger: &mut Ledger,
) -> Result<SessionResult, MpcAbort> {
    let abort = |error: MpcError| MpcAbort { error, transcript: Transcript::default() };
    let _ = clearance;
    if engines.agreed().is_none() {
        return Err(abort(MpcError::EngineDisagreement(engines.declared.clone())));
    }
    if config.nodes < 2 {
        return Err(abort(MpcError::TooFewNodes(config.nodes)));
    }
    circuit.check_inputs(inputs).map_err(|e| abort(e.into()))?;
    let started = Instant::now();
    let n_parties = inputs.len();
    let direct = n_parties == 2;
    let exec = if direct { circuit.clone() } else { shared_input_circuit(circuit) };
    let g_range = exec.input_range(0);
    let e_range = exec.input_range(1);
    let n_out = exec.num_outputs();
    let (g_len, e_len) = (g_range.len(), e_range.len());
    let parties_ids: Vec<PartyId> = (1..=n_parties).map(PartyId::party).collect();
    let replicas: Vec<PartyId> = (3..=config.nodes).map(PartyId::node).collect();
    let mut nodes = vec![PartyId::GARBLER, PartyId::EVALUATOR];
    nodes.extend(&replicas);
    let timings = Rc::new(RefCell::new(PhaseTimings::default()));
    let ot_kind = config.ot;
    let widths: Vec<usize> = inputs.iter().map(Vec::len).collect();

    let mut parties: Vec<Party<'_, Out>> = Vec::new();
    for (i, &id) in parties_ids.iter().enumerate() {
        let x = inputs[i].clone();
        let nodes = nodes.clone();
        parties.push(Party::new(id, move |mut ctx: Ctx| async move {
            let r: Result<Vec<bool>, MpcError> = async {
                if direct {
                    let to = if i == 0 { PartyId::GARBLER } else { PartyId::EVALUATOR };
                    ctx.send(to, pack_bits(&x))?;
                } else {
                    let a: Vec<bool> = (0..x.len()).map(|_| ctx.rng().gen()).collect();
                    let b: Vec<bool> = x.iter().zip(&a).map(|(p, q)| p ^ q).collect();
                    ctx.send(PartyId::GARBLER, pack_bits(&a))?;
                    ctx.send(PartyId::EVALUATOR, pack_bits(&b))?;
                }
                let mut first: Option<Vec<bool>> = None;
                for &nd in &nodes {
                    let r = recv_bits(&ctx.recv(nd).await?, n_out)?;
                    match &first {
                        None => first = Some(r),
                        Some(f) if *f != r => return Err(MpcError::ResultMismatch(ctx.id())),
                        Some(_) => {}
                    }
                }
                Ok(first.unwrap_or_default())
            }
            .await;
            Out::Party(r)
        }));
    }

    // Garbler node.
    {
        let exec = &exec;
        let (g_range, e_range) = (g_range.clone(), e_range.clone());
        let parties_ids = parties_ids.clone();
        let widths = widths.clone();
        let replicas = replicas.clone();
        let timings = timings.clone();
        let dissent = config.dissent.contains(&PartyId::GARBLER);
        parties.push(Party::new(PartyId::GARBLER, move |mut ctx: Ctx| async move {
            let r: Result<Vec<bool>, MpcError> = async {
                let xg: Vec<bool> = if direct {
                    recv_bits(&ctx.recv(parties_ids[0]).await?, widths[0])?
                } else {
                    let mut v = Vec::new();
                    for (i, &p) in parties_ids.iter().enumerate() {
                        v.extend(recv_bits(&ctx.recv(p).await?, widths[i])?);
                    }
                    v
                };
                let t0 = Instant::now();
                let seed: [u8; 32] = ctx.rng().gen();
                let (gc, enc, dec) = garble::garble(exec, &seed);
                timings.borrow_mut().garble_ms = t0.elapsed().as_secs_f64() * 1e3;
                ctx.send(PartyId::EVALUATOR, gc.to_bytes())?;
                let gl = garble::encode_range(&enc, g_range.clone(), &xg)?;
                ctx.send(PartyId::EVALUATOR, blocks_bytes(&gl))?;
                let t1 = Instant::now();
                let pairs: Vec<OtMessagePair> = e_range
                    .clone()
                    .map(|i| {
                        let (w0, w1) = enc.pair(i);
                        OtMessagePair::new(w0.0, w1.0)
                    })
                    .collect();
                ot::ot_send(&mut ctx, ot_kind, PartyId::EVALUATOR, &pairs).await?;
                timings.borrow_mut().ot_ms = t1.elapsed().as_secs_f64() * 1e3;
                let out_labels = bytes_blocks(&ctx.recv(PartyId::EVALUATOR).await?, n_out)?;
                let dbytes = dec.to_bytes();
                ctx.send(PartyId::EVALUATOR, dbytes.clone())?;
                for &r in &replicas {
                    ctx.send(r, dbytes.clone())?;
                }
                let mut y = garble::decode(&dec, &out_labels)?;
                if dissent {
                    y[0] = !y[0];
                }
                for &p in &parties_ids {
                    ctx.send(p, pack_bits(&y))?;
                }
                Ok(y)
            }
            .await;
            Out::Node(r)
        }));
    }

    // Evaluator node.
    {
        let parties_ids = parties_ids.clone();
        let widths = widths.clone();
        let replicas = replicas.clone();
        let timings = timings.clone();
        let dissent = config.dissent.contains(&PartyId::EVALUATOR);
        parties.push(Party::new(PartyId::EVALUATOR, move |mut ctx: Ctx| async move {
            let r: Result<Vec<bool>, MpcError> = async {
                let xe: Vec<bool> = if direct {
                    recv_bits(&ctx.recv(parties_ids[1]).await?, widths[1])?
                } else {
                    let mut v = Vec::new();
                    for (i, &p) in parties_ids.iter().enumerate() {
                        v.extend(recv_bits(&ctx.recv(p).await?, widths[i])?);
                    }
                    v
                };
                debug_assert_eq!(xe.len(), e_len);
                let gc = GarbledCircuit::from_bytes(&ctx.recv(PartyId::GARBLER).await?)?;
                let mut labels = bytes_blocks(&ctx.recv(PartyId::GARBLER).await?, g_len)?;
                let el = ot::ot_receive(&mut ctx, ot_kind, PartyId::GARBLER, &xe).await?;
                labels.extend(el.into_iter().map(WireLabel));
                let t0 = Instant::now();
                let out = garble::eval_garbled(&gc, &labels)?;
                timings.borrow_mut().evaluate_ms = t0.elapsed().as_secs_f64() * 1e3;
                let ob = blocks_bytes(&out);
                ctx.send(PartyId::GARBLER, ob.clone())?;
                for &r in &replicas {
                    ctx.send(r, ob.clone())?;
                }
                let dec = OutputDecoding::from_bytes(&ctx.recv(PartyId::GARBLER).await?)?;
                let mut y = garble::decode(&dec, &out)?;
                if dissent {
                    y[0] = !y[0];
                }
                for &p in &parties_ids {
                    ctx.send(p, pack_bits(&y))?;
                }
                Ok(y)
            }
            .await;
            Out::Node(r)
        }));
    }

    for &rid in &replicas {
        let parties_ids = parties_ids.clone();
        let dissent = config.dissent.contains(&rid);
        parties.push(Party::new(rid, move |ctx: Ctx| async move {
            let r: Result<Vec<bool>, MpcError> = async {
                let out = bytes_blocks(&ctx.recv(PartyId::EVALUATOR).await?, n_out)?;
                let dec = OutputDecoding::from_bytes(&ctx.recv(PartyId::GARBLER).await?)?;
                let mut y = garble::decode(&dec, &out)?;
                if dissent {
                    y[0] = !y[0];
                }
                for &p in &parties_ids {
                    ctx.send(p, pack_bits(&y))?;
                }
                Ok(y)
            }
            .await;
            Out::Node(r)
        }));
    }

    if ot_kind == OtKind::Dealer {
        let n = e_len;
        parties.push(Party::new(PartyId::DEALER, move |mut ctx: Ctx| async move {
            Out::Dealer(ot::ot_dealer(&mut ctx, PartyId::GARBLER, PartyId::EVALUATOR, n).await.map_err(Into::into))
        }));
    }

    let mut scfg = SessionConfig::new(config.session_id, config.seed);
    scfg.latency_ms = config.latency_ms;
    let out = run_session(&scfg, parties).map_err(|e| abort(e.into()))?;
    let transcript = out.transcript.clone();
    let fail = |error: MpcError| MpcAbort { error, transcript: transcript.clone() };

    let mut results = Vec::new();
    let mut node_results = Vec::new();
    let mut error: Option<MpcError> = None;
    let mut note = |e: MpcError| {
        // Closed channels are usually the echo of a failure elsewhere.
        let secondary = |e: &MpcError| matches!(e, MpcError::Transport(_) | MpcError::Ot(OtError::Aborted(_)));
        if error.as_ref().is_none_or(secondary) && !(error.is_some() && secondary(&e)) {
            error = Some(e);
        }
    };
    for (id, o) in out.outputs {
        match o {
            Out::Party(Ok(y)) => results.push(y),
            Out::Node(Ok(y)) => node_results.push((id, y)),
            Out::Dealer(Ok(())) => {}
            Out::Party(Err(e)) | Out::Node(Err(e)) | Out::Dealer(Err(e)) => note(e),
        }
    }
    if let Some(e) = error {
        return Err(fail(e));
    }
    let output = node_results
        .iter()
        .find(|(id, _)| *id == PartyId::GARBLER)
        .map(|(_, y)| y.clone())
        .unwrap_or_default();
    let block = if config.write_ledger {
        let reports: Vec<(PartyId, Vec<u8>)> = node_results.iter().map(|(id, y)| (*id, pack_bits(y))).collect();
        let quorum = config.quorum.unwrap_or(config.nodes);
        let b = ledger.append_with_consensus(&config.label, &reports, quorum).map_err(|e| fail(e.into()))?;
        Some(BlockRef { height: b.height, digest: b.digest })
    } else {
        None
    };
    let mut timings = timings.borrow().clone();
    timings.total_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(SessionResult {
        output,
        results,
        node_results,
        block,
        transcript: out.transcript,
        gate_counts: exec.gate_counts(),
        estimated_latency_ms: out.estimated_latency_ms,
        timings,
    })
}

/// Whether any payload delivered to `party` contains `needle`.
pub fn transcript_contains(transcript: &Transcript, party: PartyId, needle: &[u8]) -> bool {
    !needle.is_empty() && transcript.to_party(party).any(|m| m.payload.windows(needle.len()).any(|w| w == needle))
}
