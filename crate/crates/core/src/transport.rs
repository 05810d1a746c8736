//! Deterministic in-memory network.
//!
//! Each party is an async program polled by a round-robin scheduler on the
//! calling thread; no executor or threads are involved, so a session is a pure
//! function of its programs and seed. Channels are directed, FIFO and reliable.
//! Every send is recorded in the session transcript.

use std::cell::RefCell;
use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::future::{poll_fn, Future};
use std::pin::Pin;
use std::rc::Rc;
use std::task::{Context, Poll, Waker};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{derive_seed, Digest};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    ContractParty,
    Node,
    Garbler,
    Evaluator,
    TrustedSigner,
    Outsourcer,
    /// Supplies correlated randomness to the dealer OT.
    Dealer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PartyId {
    pub role: Role,
    pub index: usize,
}

impl PartyId {
    pub const GARBLER: PartyId = PartyId { role: Role::Garbler, index: 0 };
    pub const EVALUATOR: PartyId = PartyId { role: Role::Evaluator, index: 0 };
    pub const DEALER: PartyId = PartyId { role: Role::Dealer, index: 0 };

    pub fn party(index: usize) -> Self {
        PartyId { role: Role::ContractParty, index }
    }

    pub fn node(index: usize) -> Self {
        PartyId { role: Role::Node, index }
    }

    pub fn signer(index: usize) -> Self {
        PartyId { role: Role::TrustedSigner, index }
    }

    pub fn outsourcer(index: usize) -> Self {
        PartyId { role: Role::Outsourcer, index }
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.role {
            Role::ContractParty => write!(f, "E{}", self.index),
            Role::Node => write!(f, "N{}", self.index),
            Role::Garbler => f.write_str("NG"),
            Role::Evaluator => f.write_str("NE"),
            Role::TrustedSigner => write!(f, "T{}", self.index),
            Role::Outsourcer => write!(f, "O{}", self.index),
            Role::Dealer => f.write_str("D"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransportError {
    #[error("channel {from}->{to} is closed")]
    Closed { from: PartyId, to: PartyId },
    #[error("unknown party {0}")]
    UnknownParty(PartyId),
    #[error("duplicate party {0}")]
    DuplicateParty(PartyId),
    #[error("deadlock: blocked parties {}", .blocked.iter().map(|(p, w)| format!("{p} (waiting on {w})")).collect::<Vec<_>>().join(", "))]
    Deadlock { blocked: Vec<(PartyId, PartyId)> },
    #[error("malformed frame: {0}")]
    Frame(String),
}

/// Wire format of one message: session id, per-channel step, body length, body.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub session: u64,
    pub step: u32,
    pub body: Vec<u8>,
}

impl Frame {
    pub fn encode(&self) -> Vec<u8> {
        let mut v = Vec::with_capacity(16 + self.body.len());
        v.extend_from_slice(&self.session.to_le_bytes());
        v.extend_from_slice(&self.step.to_le_bytes());
        v.extend_from_slice(&(self.body.len() as u32).to_le_bytes());
        v.extend_from_slice(&self.body);
        v
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, TransportError> {
        if bytes.len() < 16 {
            return Err(TransportError::Frame("short header".into()));
        }
        let session = u64::from_le_bytes(bytes[..8].try_into().unwrap());
        let step = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        let len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        if bytes.len() != 16 + len {
            return Err(TransportError::Frame(format!("length {len} does not match {} body bytes", bytes.len() - 16)));
        }
        Ok(Frame { session, step, body: bytes[16..].to_vec() })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    /// Scheduler step at which the message was sent.
    pub step: u64,
    pub from: PartyId,
    pub to: PartyId,
    /// Position of the message on its channel.
    pub seq: u32,
    /// Causal depth: 1 + deepest message the sender had received.
    pub depth: u32,
    pub payload: Vec<u8>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub messages: Vec<Message>,
}

impl Transcript {
    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn total_bytes(&self) -> usize {
        self.messages.iter().map(|m| m.payload.len()).sum()
    }

    pub fn from_party(&self, p: PartyId) -> impl Iterator<Item = &Message> {
        self.messages.iter().filter(move |m| m.from == p)
    }

    pub fn to_party(&self, p: PartyId) -> impl Iterator<Item = &Message> {
        self.messages.iter().filter(move |m| m.to == p)
    }

    pub fn count_from_role(&self, role: Role) -> usize {
        self.messages.iter().filter(|m| m.from.role == role).count()
    }

    /// Longest chain of causally dependent messages.
    pub fn rounds(&self) -> u32 {
        self.messages.iter().map(|m| m.depth).max().unwrap_or(0)
    }

    /// One line per message: `step from to bytes`.
    pub fn to_text(&self) -> String {
        self.messages.iter().map(|m| format!("{} {} {} {}\n", m.step, m.from, m.to, m.payload.len())).collect()
    }

    pub fn digest(&self) -> Digest {
        let mut parts: Vec<Vec<u8>> = Vec::new();
        for m in &self.messages {
            parts.push(format!("{} {} {} {} ", m.step, m.from, m.to, m.seq).into_bytes());
            parts.push(m.payload.clone());
        }
        let refs: Vec<&[u8]> = parts.iter().map(Vec::as_slice).collect();
        Digest::of_parts(&refs)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub sent: u64,
    pub delivered: u64,
    pub closed: bool,
}

#[derive(Default)]
struct Channel {
    queue: VecDeque<(Vec<u8>, u32)>,
    stats: ChannelStats,
}

struct Net {
    session: u64,
    parties: Vec<PartyId>,
    channels: BTreeMap<(PartyId, PartyId), Channel>,
    transcript: Transcript,
    step: u64,
    progress: u64,
    depth: BTreeMap<PartyId, u32>,
    waiting: BTreeMap<PartyId, PartyId>,
}

impl Net {
    fn check(&self, p: PartyId) -> Result<(), TransportError> {
        if self.parties.contains(&p) {
            Ok(())
        } else {
            Err(TransportError::UnknownParty(p))
        }
    }
}

/// A party's handle on the network during a session.
pub struct Ctx {
    id: PartyId,
    net: Rc<RefCell<Net>>,
    rng: ChaCha20Rng,
}

impl Ctx {
    pub fn id(&self) -> PartyId {
        self.id
    }

    pub fn session_id(&self) -> u64 {
        self.net.borrow().session
    }

    /// Party-local randomness derived from the session seed and the party id.
    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }

    pub fn send(&self, to: PartyId, payload: Vec<u8>) -> Result<(), TransportError> {
        let mut net = self.net.borrow_mut();
        net.check(to)?;
        let depth = net.depth.get(&self.id).copied().unwrap_or(0) + 1;
        let step = net.step;
        let session = net.session;
        let ch = net.channels.entry((self.id, to)).or_default();
        if ch.stats.closed {
            return Err(TransportError::Closed { from: self.id, to });
        }
        let seq = ch.stats.sent as u32;
        let frame = Frame { session, step: seq, body: payload.clone() }.encode();
        ch.queue.push_back((frame, depth));
        ch.stats.sent += 1;
        net.transcript.messages.push(Message { step, from: self.id, to, seq, depth, payload });
        net.progress += 1;
        Ok(())
    }

    /// Receives the next message from `from`, waiting until one arrives.
    /// Fails once the channel is closed and drained.
    pub async fn recv(&self, from: PartyId) -> Result<Vec<u8>, TransportError> {
        self.net.borrow().check(from)?;
        let me = self.id;
        poll_fn(|_| {
            let mut net = self.net.borrow_mut();
            let ch = net.channels.entry((from, me)).or_default();
            if let Some((frame, depth)) = ch.queue.pop_front() {
                ch.stats.delivered += 1;
                net.waiting.remove(&me);
                net.progress += 1;
                let d = net.depth.entry(me).or_insert(0);
                *d = (*d).max(depth);
                let session = net.session;
                let f = Frame::decode(&frame)?;
                if f.session != session {
                    return Poll::Ready(Err(TransportError::Frame("foreign session".into())));
                }
                Poll::Ready(Ok(f.body))
            } else if ch.stats.closed {
                net.waiting.remove(&me);
                Poll::Ready(Err(TransportError::Closed { from, to: me }))
            } else {
                net.waiting.insert(me, from);
                Poll::Pending
            }
        })
        .await
    }

    /// Closes this party's outgoing channel to `to`.
    pub fn close(&self, to: PartyId) {
        let mut net = self.net.borrow_mut();
        net.channels.entry((self.id, to)).or_default().stats.closed = true;
        net.progress += 1;
    }
}

type LocalFuture<'a, T> = Pin<Box<dyn Future<Output = T> + 'a>>;

/// A party and its program.
pub struct Party<'a, T> {
    pub id: PartyId,
    program: Box<dyn FnOnce(Ctx) -> LocalFuture<'a, T> + 'a>,
}

impl<'a, T: 'a> Party<'a, T> {
    pub fn new<F, Fut>(id: PartyId, program: F) -> Self
    where
        F: FnOnce(Ctx) -> Fut + 'a,
        Fut: Future<Output = T> + 'a,
    {
        Party { id, program: Box::new(move |ctx| Box::pin(program(ctx))) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionConfig {
    pub session_id: u64,
    pub seed: [u8; 32],
    /// Consecutive scheduler steps without progress before declaring deadlock.
    pub idle_budget: u64,
    /// Per-message latency used only for reporting.
    pub latency_ms: f64,
}

impl SessionConfig {
    pub fn new(session_id: u64, seed: [u8; 32]) -> Self {
        SessionConfig { session_id, seed, idle_budget: 10_000, latency_ms: 0.0 }
    }
}

#[derive(Debug)]
pub struct SessionOutput<T> {
    pub outputs: Vec<(PartyId, T)>,
    pub transcript: Transcript,
    pub channels: BTreeMap<(PartyId, PartyId), ChannelStats>,
    pub steps: u64,
    pub estimated_latency_ms: f64,
}

impl<T> SessionOutput<T> {
    pub fn output(&self, p: PartyId) -> Option<&T> {
        self.outputs.iter().find(|(q, _)| *q == p).map(|(_, t)| t)
    }

    pub fn take(&mut self, p: PartyId) -> Option<T> {
        let i = self.outputs.iter().position(|(q, _)| *q == p)?;
        Some(self.outputs.remove(i).1)
    }
}

/// Runs all parties to completion. When a party finishes, its outgoing
/// channels close so peers waiting on it fail instead of hanging.
pub fn run_session<'a, T: 'a>(config: &SessionConfig, parties: Vec<Party<'a, T>>) -> Result<SessionOutput<T>, TransportError> {
    let ids: Vec<PartyId> = parties.iter().map(|p| p.id).collect();
    for (i, p) in ids.iter().enumerate() {
        if ids[..i].contains(p) {
            return Err(TransportError::DuplicateParty(*p));
        }
    }
    let net = Rc::new(RefCell::new(Net {
        session: config.session_id,
        parties: ids.clone(),
        channels: BTreeMap::new(),
        transcript: Transcript::default(),
        step: 0,
        progress: 0,
        depth: BTreeMap::new(),
        waiting: BTreeMap::new(),
    }));
    let mut running: Vec<Option<LocalFuture<'a, T>>> = parties
        .into_iter()
        .map(|p| {
            let seed = derive_seed(&config.seed, p.id.to_string().as_bytes());
            let ctx = Ctx { id: p.id, net: net.clone(), rng: ChaCha20Rng::from_seed(seed) };
            Some((p.program)(ctx))
        })
        .collect();
    let mut results: Vec<Option<T>> = (0..ids.len()).map(|_| None).collect();
    let mut cx = Context::from_waker(Waker::noop());
    let mut idle = 0u64;
    let mut remaining = ids.len();
    while remaining > 0 {
        for i in 0..running.len() {
            let Some(fut) = running[i].as_mut() else { continue };
            let before = net.borrow().progress;
            net.borrow_mut().step += 1;
            match fut.as_mut().poll(&mut cx) {
                Poll::Ready(v) => {
                    results[i] = Some(v);
                    running[i] = None;
                    remaining -= 1;
                    let mut n = net.borrow_mut();
                    let me = ids[i];
                    for &to in &ids {
                        n.channels.entry((me, to)).or_default().stats.closed = true;
                    }
                    n.waiting.remove(&me);
                    n.progress += 1;
                }
                Poll::Pending => {}
            }
            if net.borrow().progress == before {
                idle += 1;
            } else {
                idle = 0;
            }
            if idle > config.idle_budget {
                let n = net.borrow();
                let blocked = n.waiting.iter().map(|(p, w)| (*p, *w)).collect();
                return Err(TransportError::Deadlock { blocked });
            }
        }
    }
    drop(running);
    let net = Rc::try_unwrap(net).map_err(|_| TransportError::Frame("party handle outlived its session".into()))?;
    let net = net.into_inner();
    let rounds = net.transcript.rounds();
    Ok(SessionOutput {
        outputs: ids.into_iter().zip(results.into_iter().map(|r| r.expect("finished"))).collect(),
        transcript: net.transcript,
        channels: net.channels.into_iter().map(|(k, c)| (k, c.stats)).collect(),
        steps: net.step,
        estimated_latency_ms: rounds as f64 * config.latency_ms,
    })
}

/// Length-prefixed concatenation helpers for message bodies.
pub mod codec {
    use super::TransportError;

    #[derive(Default)]
    pub struct Writer(pub Vec<u8>);

    impl Writer {
        pub fn new() -> Self {
            Writer(Vec::new())
        }

        pub fn u64(&mut self, v: u64) -> &mut Self {
            self.0.extend_from_slice(&v.to_le_bytes());
            self
        }

        pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
            self.u64(b.len() as u64);
            self.0.extend_from_slice(b);
            self
        }

        pub fn finish(&mut self) -> Vec<u8> {
            std::mem::take(&mut self.0)
        }
    }

    pub struct Reader<'a>(&'a [u8]);

    impl<'a> Reader<'a> {
        pub fn new(b: &'a [u8]) -> Self {
            Reader(b)
        }

        pub fn u64(&mut self) -> Result<u64, TransportError> {
            if self.0.len() < 8 {
                return Err(TransportError::Frame("truncated body".into()));
            }
            let (h, t) = self.0.split_at(8);
            self.0 = t;
            Ok(u64::from_le_bytes(h.try_into().unwrap()))
        }

        pub fn bytes(&mut self) -> Result<&'a [u8], TransportError> {
            let n = self.u64()? as usize;
            if self.0.len() < n {
                return Err(TransportError::Frame("truncated body".into()));
            }
            let (h, t) = self.0.split_at(n);
            self.0 = t;
            Ok(h)
        }

        pub fn is_empty(&self) -> bool {
            self.0.is_empty()
        }
    }
}
