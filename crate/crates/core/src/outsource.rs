//! Server-aided computation with offline parties.
//!
//! Each party `E_j` shares a key `k_j` with the garbler node through a
//! non-interactive key exchange over the set `{N_G, E_j}`. It uploads PRF
//! encodings of its input bits to `N_E` once and can then go offline. For each
//! computation `N_G` garbles the circuit and sends, per input wire, a pivot pair
//! that maps the stored encoding to the matching garbled label.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{pack_bits, unpack_bits, Circuit};
use crate::crypto::{derive_seed, open_row, prf, seal_row, Block, Digest, Row, ROW_BYTES};
use crate::garble::{self, GarbleError, GarbledCircuit, InputEncoding, WireLabel};
use crate::group::{PrimeOrderGroup, Ristretto};
use crate::transport::codec::{Reader, Writer};
use crate::transport::{run_session, Ctx, Party, PartyId, SessionConfig, Transcript, TransportError};

pub type SharedKey = [u8; 32];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OutsourceError {
    #[error("party {0} is not a member of the key set")]
    NotInSet(usize),
    #[error("key set of size {size} exceeds the maximum {max}")]
    SetTooLarge { size: usize, max: usize },
    #[error("index {index} outside 0..{n}")]
    IndexRange { index: usize, n: usize },
    #[error("no public key for index {0}")]
    MissingKey(usize),
    #[error("secret key does not match public key of index {0}")]
    KeyMismatch(usize),
    #[error("no stored encoding for party {0}")]
    MissingParty(usize),
    #[error("party {party}: circuit expects {expected} input bits, store holds {got}")]
    Width { party: usize, expected: usize, got: usize },
    #[error("pivot entry for party {party} bit {bit} did not decrypt")]
    PivotDecryption { party: usize, bit: usize },
    #[error(transparent)]
    Garble(#[from] GarbleError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("malformed data: {0}")]
    Format(String),
}

// ---- non-interactive key exchange

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NikeKind {
    /// Trusted-dealer test scheme: every secret key carries the dealer's master
    /// key, so it only separates keys across independent setups.
    Dealer,
    /// Pairwise Diffie-Hellman over Ristretto255; sets of at most two members.
    Group,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NikeParams {
    pub kind: NikeKind,
    /// Largest supported set.
    pub max_set: usize,
    /// Number of indices.
    pub parties: usize,
    pub lambda: usize,
    master: Option<[u8; 32]>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicKey(#[serde(with = "hex::serde")] pub Vec<u8>);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecretKey {
    pub index: usize,
    bytes: Vec<u8>,
}

pub fn nike_setup(kind: NikeKind, max_set: usize, parties: usize, lambda: usize, seed: &[u8; 32]) -> NikeParams {
    let master = match kind {
        NikeKind::Dealer => Some(derive_seed(seed, b"nike/master")),
        NikeKind::Group => None,
    };
    let max_set = match kind {
        NikeKind::Dealer => max_set,
        NikeKind::Group => max_set.min(2),
    };
    NikeParams { kind, max_set, parties, lambda, master }
}

pub fn nike_publish<R: RngCore + rand::CryptoRng>(
    params: &NikeParams,
    index: usize,
    rng: &mut R,
) -> Result<(PublicKey, SecretKey), OutsourceError> {
    if index >= params.parties {
        return Err(OutsourceError::IndexRange { index, n: params.parties });
    }
    match params.kind {
        NikeKind::Dealer => {
            let master = params.master.expect("dealer setup has a master key");
            let mut sk = master.to_vec();
            sk.extend_from_slice(&rng.gen::<[u8; 16]>());
            let pk = Digest::of_parts(&[b"nike/dealer-pk", &sk]).0.to_vec();
            Ok((PublicKey(pk), SecretKey { index, bytes: sk }))
        }
        NikeKind::Group => {
            let s = Ristretto::random_scalar(rng);
            let pk = Ristretto::encode(&Ristretto::mul_gen(&s));
            Ok((PublicKey(pk), SecretKey { index, bytes: s.to_bytes().to_vec() }))
        }
    }
}

/// Derives `k_S` for the set `set` as member `sk.index`.
pub fn nike_keygen(
    params: &NikeParams,
    sk: &SecretKey,
    set: &[usize],
    pks: &BTreeMap<usize, PublicKey>,
) -> Result<SharedKey, OutsourceError> {
    let mut s = set.to_vec();
    s.sort_unstable();
    s.dedup();
    if s.len() > params.max_set {
        return Err(OutsourceError::SetTooLarge { size: s.len(), max: params.max_set });
    }
    if let Some(&bad) = s.iter().find(|&&i| i >= params.parties) {
        return Err(OutsourceError::IndexRange { index: bad, n: params.parties });
    }
    if !s.contains(&sk.index) {
        return Err(OutsourceError::NotInSet(sk.index));
    }
    let mut parts: Vec<Vec<u8>> = vec![b"nike/key".to_vec()];
    for &i in &s {
        let pk = pks.get(&i).ok_or(OutsourceError::MissingKey(i))?;
        parts.push((i as u64).to_le_bytes().to_vec());
        parts.push(pk.0.clone());
    }
    match params.kind {
        NikeKind::Dealer => {
            // Set keys depend on the master key only; the member's own key pair is checked.
            let own = Digest::of_parts(&[b"nike/dealer-pk", &sk.bytes]).0.to_vec();
            if pks.get(&sk.index).map(|p| &p.0) != Some(&own) {
                return Err(OutsourceError::KeyMismatch(sk.index));
            }
            let mut keyed = vec![b"nike/dealer".to_vec(), sk.bytes[..32].to_vec()];
            keyed.extend(s.iter().map(|i| (*i as u64).to_le_bytes().to_vec()));
            let refs: Vec<&[u8]> = keyed.iter().map(Vec::as_slice).collect();
            Ok(Digest::of_parts(&refs).0)
        }
        NikeKind::Group => {
            let scalar = curve25519_dalek::scalar::Scalar::from_canonical_bytes(sk.bytes[..].try_into().expect("32 bytes"));
            let scalar = Option::<curve25519_dalek::scalar::Scalar>::from(scalar).ok_or(OutsourceError::KeyMismatch(sk.index))?;
            let own = Ristretto::encode(&Ristretto::mul_gen(&scalar));
            if pks.get(&sk.index).map(|p| &p.0) != Some(&own) {
                return Err(OutsourceError::KeyMismatch(sk.index));
            }
            let other = *s.iter().find(|&&i| i != sk.index).unwrap_or(&sk.index);
            let pk = Ristretto::decode(&pks[&other].0).ok_or(OutsourceError::MissingKey(other))?;
            parts.push(Ristretto::encode(&Ristretto::mul(&pk, &scalar)));
            let refs: Vec<&[u8]> = parts.iter().map(Vec::as_slice).collect();
            Ok(Digest::of_parts(&refs).0)
        }
    }
}

// ---- encodings and pivot tables

/// `PRF_k(bit, l, nonce, party)` with fixed-width fields.
pub fn encode_bit(key: &SharedKey, party: usize, bit: bool, l: usize, nonce: &[u8; 16]) -> Block {
    let mut input = Vec::with_capacity(1 + 8 + 16 + 8);
    input.push(bit as u8);
    input.extend_from_slice(&(l as u64).to_le_bytes());
    input.extend_from_slice(nonce);
    input.extend_from_slice(&(party as u64).to_le_bytes());
    prf(key, &input)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedInput {
    pub party: usize,
    #[serde(with = "hex::serde")]
    pub nonce: [u8; 16],
    pub encodings: Vec<Block>,
}

impl EncodedInput {
    pub fn new(key: &SharedKey, party: usize, bits: &[bool], nonce: [u8; 16]) -> Self {
        let encodings = bits.iter().enumerate().map(|(l, &b)| encode_bit(key, party, b, l, &nonce)).collect();
        EncodedInput { party, nonce, encodings }
    }

    fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u64(self.party as u64).bytes(&self.nonce);
        let enc: Vec<u8> = self.encodings.iter().flat_map(|b| b.to_bytes()).collect();
        w.bytes(&enc);
        w.finish()
    }

    fn from_bytes(b: &[u8]) -> Result<Self, OutsourceError> {
        let bad = |_| OutsourceError::Format("encoded input".into());
        let mut r = Reader::new(b);
        let party = r.u64().map_err(bad)? as usize;
        let nonce: [u8; 16] = r.bytes().map_err(bad)?.try_into().map_err(|_| OutsourceError::Format("nonce".into()))?;
        let enc = r.bytes().map_err(bad)?;
        if enc.len() % 16 != 0 || !r.is_empty() {
            return Err(OutsourceError::Format("encoded input".into()));
        }
        let encodings = enc.chunks(16).map(|c| Block::from_slice(c).expect("16 bytes")).collect();
        Ok(EncodedInput { party, nonce, encodings })
    }
}

/// The evaluator node's store of uploaded encodings, keyed by party index.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EncodingStore {
    pub records: BTreeMap<usize, EncodedInput>,
}

impl EncodingStore {
    pub fn insert(&mut self, e: EncodedInput) {
        self.records.insert(e.party, e);
    }

    /// One line per party: `party nonce enc,enc,...` in hex.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in self.records.values() {
            let enc: Vec<String> = r.encodings.iter().map(|b| hex::encode(b.to_bytes())).collect();
            s.push_str(&format!("{} {} {}\n", r.party, hex::encode(r.nonce), enc.join(",")));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, OutsourceError> {
        let mut store = EncodingStore::default();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = || OutsourceError::Format(format!("store line {}", n + 1));
            let mut it = line.split_whitespace();
            let party: usize = it.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
            let nonce: [u8; 16] =
                hex::decode(it.next().ok_or_else(bad)?).ok().and_then(|v| v.try_into().ok()).ok_or_else(bad)?;
            let encodings = match it.next() {
                None => Vec::new(),
                Some(list) => list
                    .split(',')
                    .map(|h| hex::decode(h).ok().and_then(|v| Block::from_slice(&v)).ok_or_else(bad))
                    .collect::<Result<_, _>>()?,
            };
            if it.next().is_some() {
                return Err(bad());
            }
            store.insert(EncodedInput { party, nonce, encodings });
        }
        Ok(store)
    }
}

/// Per (party, bit) a pair of sealed labels in random order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PivotTable {
    pub entries: BTreeMap<usize, Vec<[Row; 2]>>,
}

fn pivot_tweak(party: usize, l: usize) -> [u8; 16] {
    let mut t = [0u8; 16];
    t[..8].copy_from_slice(&(party as u64).to_le_bytes());
    t[8..].copy_from_slice(&(l as u64).to_le_bytes());
    t
}

impl PivotTable {
    /// `segments` lists (party, nonce, wire offset) for each circuit input segment.
    pub fn build<R: Rng + ?Sized>(
        keys: &BTreeMap<usize, SharedKey>,
        segments: &[(usize, [u8; 16], std::ops::Range<usize>)],
        encoding: &InputEncoding,
        rng: &mut R,
    ) -> Result<Self, OutsourceError> {
        let mut entries = BTreeMap::new();
        for (party, nonce, range) in segments {
            let key = keys.get(party).ok_or(OutsourceError::MissingParty(*party))?;
            let rows: Vec<[Row; 2]> = range
                .clone()
                .enumerate()
                .map(|(l, wire)| {
                    let tweak = pivot_tweak(*party, l);
                    let (w0, w1) = encoding.pair(wire);
                    let s0 = encode_bit(key, *party, false, l, nonce);
                    let s1 = encode_bit(key, *party, true, l, nonce);
                    let mut pair = [seal_row(&s0.to_bytes(), &tweak, w0.0), seal_row(&s1.to_bytes(), &tweak, w1.0)];
                    pair.shuffle(rng);
                    pair
                })
                .collect();
            entries.insert(*party, rows);
        }
        Ok(PivotTable { entries })
    }

    /// Number of entries of pair (party, l) that authenticate under `encoding`.
    pub fn openable(&self, party: usize, l: usize, encoding: Block) -> usize {
        let tweak = pivot_tweak(party, l);
        self.entries
            .get(&party)
            .and_then(|v| v.get(l))
            .map_or(0, |pair| pair.iter().filter(|r| open_row(&encoding.to_bytes(), &tweak, r).is_some()).count())
    }

    pub fn open(&self, party: usize, l: usize, encoding: Block) -> Result<WireLabel, OutsourceError> {
        let tweak = pivot_tweak(party, l);
        let pair = self.entries.get(&party).and_then(|v| v.get(l)).ok_or(OutsourceError::MissingParty(party))?;
        pair.iter()
            .find_map(|r| open_row(&encoding.to_bytes(), &tweak, r))
            .map(WireLabel)
            .ok_or(OutsourceError::PivotDecryption { party, bit: l })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u64(self.entries.len() as u64);
        for (p, rows) in &self.entries {
            let flat: Vec<u8> = rows.iter().flat_map(|pair| pair.iter().flatten().copied()).collect();
            w.u64(*p as u64).bytes(&flat);
        }
        w.finish()
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, OutsourceError> {
        let bad = |_| OutsourceError::Format("pivot table".into());
        let mut r = Reader::new(b);
        let n = r.u64().map_err(bad)?;
        let mut entries = BTreeMap::new();
        for _ in 0..n {
            let p = r.u64().map_err(bad)? as usize;
            let flat = r.bytes().map_err(bad)?;
            if flat.len() % (2 * ROW_BYTES) != 0 {
                return Err(OutsourceError::Format("pivot table".into()));
            }
            let rows = flat
                .chunks(2 * ROW_BYTES)
                .map(|c| {
                    let mut pair = [[0u8; ROW_BYTES]; 2];
                    pair[0].copy_from_slice(&c[..ROW_BYTES]);
                    pair[1].copy_from_slice(&c[ROW_BYTES..]);
                    pair
                })
                .collect();
            entries.insert(p, rows);
        }
        if !r.is_empty() {
            return Err(OutsourceError::Format("pivot table".into()));
        }
        Ok(PivotTable { entries })
    }
}

// ---- deployment and sessions

/// NIKE index of the garbler node; party `E_j` has index `j`.
pub const GARBLER_INDEX: usize = 0;

#[derive(Clone, Debug)]
pub struct SeccompResult {
    pub output: Vec<bool>,
    /// Result delivered to each party, in party order.
    pub results: Vec<(usize, Vec<bool>)>,
    pub transcript: Transcript,
}

/// Keys of all participants plus the evaluator's encoding store.
#[derive(Clone, Debug)]
pub struct Deployment {
    pub params: NikeParams,
    pub public_keys: BTreeMap<usize, PublicKey>,
    party_secrets: BTreeMap<usize, SecretKey>,
    garbler_secret: SecretKey,
    pub store: EncodingStore,
    seed: [u8; 32],
    uploads: usize,
}

impl Deployment {
    pub fn new(kind: NikeKind, parties: usize, seed: [u8; 32]) -> Result<Self, OutsourceError> {
        let params = nike_setup(kind, 2, parties + 1, 128, &seed);
        let mut rng = ChaCha20Rng::from_seed(derive_seed(&seed, b"nike/keys"));
        let mut public_keys = BTreeMap::new();
        let mut party_secrets = BTreeMap::new();
        let (pk, garbler_secret) = nike_publish(&params, GARBLER_INDEX, &mut rng)?;
        public_keys.insert(GARBLER_INDEX, pk);
        for j in 1..=parties {
            let (pk, sk) = nike_publish(&params, j, &mut rng)?;
            public_keys.insert(j, pk);
            party_secrets.insert(j, sk);
        }
        Ok(Deployment { params, public_keys, party_secrets, garbler_secret, store: EncodingStore::default(), seed, uploads: 0 })
    }

    pub fn parties(&self) -> usize {
        self.party_secrets.len()
    }

    /// `k_j` as derived by party `j`.
    pub fn party_key(&self, j: usize) -> Result<SharedKey, OutsourceError> {
        let sk = self.party_secrets.get(&j).ok_or(OutsourceError::MissingParty(j))?;
        nike_keygen(&self.params, sk, &[GARBLER_INDEX, j], &self.public_keys)
    }

    /// `k_j` as derived by the garbler node.
    pub fn garbler_key(&self, j: usize) -> Result<SharedKey, OutsourceError> {
        nike_keygen(&self.params, &self.garbler_secret, &[GARBLER_INDEX, j], &self.public_keys)
    }

    /// Number of completed uploads.
    pub fn uploads(&self) -> usize {
        self.uploads
    }

    /// Party `j` encodes its bits under a fresh nonce and uploads them to `N_E`.
    pub fn send_private_parameters(&mut self, j: usize, bits: &[bool], session_id: u64) -> Result<Transcript, OutsourceError> {
        let key = self.party_key(j)?;
        let seed = derive_seed(&self.seed, format!("upload/{session_id}").as_bytes());
        let bits = bits.to_vec();
        let parties: Vec<Party<'_, Option<EncodedInput>>> = vec![
            Party::new(PartyId::party(j), move |mut ctx: Ctx| async move {
                let nonce: [u8; 16] = ctx.rng().gen();
                let rec = EncodedInput::new(&key, j, &bits, nonce);
                ctx.send(PartyId::EVALUATOR, rec.to_bytes()).ok()?;
                None
            }),
            Party::new(PartyId::EVALUATOR, move |ctx: Ctx| async move {
                let b = ctx.recv(PartyId::party(j)).await.ok()?;
                EncodedInput::from_bytes(&b).ok()
            }),
        ];
        let mut out = run_session(&SessionConfig::new(session_id, seed), parties)?;
        let rec = out
            .take(PartyId::EVALUATOR)
            .flatten()
            .ok_or_else(|| OutsourceError::Format("upload was not stored".into()))?;
        if rec.party != j {
            return Err(OutsourceError::Format("upload for the wrong party".into()));
        }
        self.store.insert(rec);
        self.uploads += 1;
        Ok(out.transcript)
    }

    /// Runs `circuit` on stored encodings; segment `i` of the circuit takes party `i + 1`'s input.
    ///
    /// Parties take part only as receivers of the result.
    pub fn seccomp(&self, circuit: &Circuit, requester: usize, session_id: u64) -> Result<SeccompResult, OutsourceError> {
        self.seccomp_with_store(circuit, requester, &self.store, session_id)
    }

    pub fn seccomp_with_store(
        &self,
        circuit: &Circuit,
        requester: usize,
        store: &EncodingStore,
        session_id: u64,
    ) -> Result<SeccompResult, OutsourceError> {
        let n = circuit.input_widths().len();
        if requester == 0 || requester > n {
            return Err(OutsourceError::MissingParty(requester));
        }
        for (i, &w) in circuit.input_widths().iter().enumerate() {
            let rec = store.records.get(&(i + 1)).ok_or(OutsourceError::MissingParty(i + 1))?;
            if rec.encodings.len() != w {
                return Err(OutsourceError::Width { party: i + 1, expected: w, got: rec.encodings.len() });
            }
        }
        let keys: BTreeMap<usize, SharedKey> =
            (1..=n).map(|j| Ok((j, self.garbler_key(j)?))).collect::<Result<_, OutsourceError>>()?;
        let seed = derive_seed(&self.seed, format!("seccomp/{session_id}").as_bytes());
        let n_out = circuit.num_outputs();
        let store = store.clone();
        let party_ids: Vec<PartyId> = (1..=n).map(PartyId::party).collect();

        enum Out {
            Node(Result<Vec<bool>, OutsourceError>),
            Party(Option<Vec<bool>>),
        }
        let mut parties: Vec<Party<'_, Out>> = Vec::new();
        {
            let party_ids = party_ids.clone();
            parties.push(Party::new(PartyId::GARBLER, move |mut ctx: Ctx| async move {
                let r: Result<Vec<bool>, OutsourceError> = async {
                    let nb = ctx.recv(PartyId::EVALUATOR).await?;
                    let mut rd = Reader::new(&nb);
                    let mut segments = Vec::new();
                    for j in 1..=n {
                        let nonce: [u8; 16] =
                            rd.bytes()?.try_into().map_err(|_| OutsourceError::Format("nonce".into()))?;
                        segments.push((j, nonce, circuit.input_range(j - 1)));
                    }
                    let gseed: [u8; 32] = ctx.rng().gen();
                    let (gc, enc, dec) = garble::garble(circuit, &gseed);
                    let pivots = PivotTable::build(&keys, &segments, &enc, ctx.rng())?;
                    ctx.send(PartyId::EVALUATOR, gc.to_bytes())?;
                    ctx.send(PartyId::EVALUATOR, pivots.to_bytes())?;
                    let ob = ctx.recv(PartyId::EVALUATOR).await?;
                    if ob.len() != 16 * n_out {
                        return Err(OutsourceError::Format("output labels".into()));
                    }
                    let labels: Vec<WireLabel> =
                        ob.chunks(16).map(|c| WireLabel(Block::from_slice(c).expect("16 bytes"))).collect();
                    let y = garble::decode(&dec, &labels)?;
                    for &p in &party_ids {
                        ctx.send(p, pack_bits(&y))?;
                    }
                    Ok(y)
                }
                .await;
                Out::Node(r)
            }));
        }
        parties.push(Party::new(PartyId::EVALUATOR, move |ctx: Ctx| async move {
            let r: Result<Vec<bool>, OutsourceError> = async {
                let mut w = Writer::new();
                for j in 1..=n {
                    w.bytes(&store.records[&j].nonce);
                }
                ctx.send(PartyId::GARBLER, w.finish())?;
                let gc = GarbledCircuit::from_bytes(&ctx.recv(PartyId::GARBLER).await?)?;
                let pivots = PivotTable::from_bytes(&ctx.recv(PartyId::GARBLER).await?)?;
                let mut labels = Vec::new();
                for j in 1..=n {
                    for (l, &x) in store.records[&j].encodings.iter().enumerate() {
                        labels.push(pivots.open(j, l, x)?);
                    }
                }
                let out = garble::eval_garbled(&gc, &labels)?;
                let ob: Vec<u8> = out.iter().flat_map(|l| l.0.to_bytes()).collect();
                ctx.send(PartyId::GARBLER, ob)?;
                Ok(Vec::new())
            }
            .await;
            Out::Node(r)
        }));
        for &p in &party_ids {
            parties.push(Party::new(p, move |ctx: Ctx| async move {
                let b = ctx.recv(PartyId::GARBLER).await.ok();
                Out::Party(b.and_then(|b| unpack_bits(&b, n_out)))
            }));
        }
        let out = run_session(&SessionConfig::new(session_id, seed), parties)?;
        let transcript = out.transcript;
        let mut output = Vec::new();
        let mut results: Vec<(usize, Option<Vec<bool>>)> = Vec::new();
        let mut error: Option<OutsourceError> = None;
        for (id, o) in out.outputs {
            match o {
                Out::Node(Err(e)) => {
                    // A closed channel is usually the echo of the other node's failure.
                    if error.as_ref().is_none_or(|f| matches!(f, OutsourceError::Transport(_))) {
                        error = Some(e);
                    }
                }
                Out::Node(Ok(y)) => {
                    if id == PartyId::GARBLER {
                        output = y;
                    }
                }
                Out::Party(r) => results.push((id.index, r)),
            }
        }
        if let Some(e) = error {
            return Err(e);
        }
        let mut results: Vec<(usize, Vec<bool>)> = results
            .into_iter()
            .map(|(i, r)| r.map(|y| (i, y)).ok_or_else(|| OutsourceError::Format(format!("party {i} received no result"))))
            .collect::<Result<_, _>>()?;
        results.sort_by_key(|r| r.0);
        Ok(SeccompResult { output, results, transcript })
    }
}
