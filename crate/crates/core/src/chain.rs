//! Simulated blockchain: hash-linked blocks, a content-addressed blob store,
//! byte-equality quorum consensus, an encrypted oracle-call round trip, gas
//! arithmetic and deposits.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{hmac256, keystream_xor, Digest};
use crate::group::{PrimeOrderGroup, Ristretto};
use crate::transport::PartyId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChainError {
    #[error("consensus failure: {agreeing} identical results, {needed} needed; dissenting nodes: {}", fmt_ids(.dissenting))]
    ConsensusFailure { agreeing: usize, needed: usize, dissenting: Vec<PartyId> },
    #[error("{got} distinct nodes reported, quorum needs {needed}")]
    InsufficientResults { got: usize, needed: usize },
    #[error("insufficient gas: budget {budget}, return costs {required}")]
    InsufficientGas { budget: u64, required: u64 },
    #[error("oracle parameters do not decrypt under the executor key")]
    Decryption,
    #[error("invalid deposit transition {from:?} on {event:?}")]
    InvalidTransition { from: DepositStatus, event: DepositEvent },
    #[error("integrity violation at height {0}")]
    Integrity(u64),
    #[error("blob {0} referenced but not stored")]
    MissingBlob(Digest),
    #[error("ledger import: {0}")]
    Import(String),
}

fn fmt_ids(ids: &[PartyId]) -> String {
    ids.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(", ")
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(b))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DepositStatus {
    Held,
    Confiscated,
    Returned,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DepositEvent {
    Misbehavior,
    Completion,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepositRecord {
    pub party: PartyId,
    pub amount: u64,
    pub status: DepositStatus,
}

impl DepositRecord {
    pub fn held(party: PartyId, amount: u64) -> Self {
        DepositRecord { party, amount, status: DepositStatus::Held }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Result {
        label: String,
        #[serde(with = "hex_bytes")]
        bytes: Vec<u8>,
        nodes: Vec<PartyId>,
    },
    BlobRef {
        label: String,
        digest: Digest,
    },
    Deposit(DepositRecord),
    Package {
        name: String,
        digest: Digest,
    },
    OracleCall {
        params_digest: Digest,
        gas_budget: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub height: u64,
    pub payload: Vec<Record>,
    pub prev_digest: Digest,
    pub digest: Digest,
}

impl Block {
    pub fn compute_digest(height: u64, payload: &[Record], prev: &Digest) -> Digest {
        let body = serde_json::to_vec(payload).expect("records serialize");
        Digest::of_parts(&[b"pvsc/block", &height.to_le_bytes(), &body, &prev.0])
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ledger {
    blocks: Vec<Block>,
    blobs: BTreeMap<Digest, Vec<u8>>,
}

impl Default for Ledger {
    fn default() -> Self {
        Self::new()
    }
}

impl Ledger {
    /// A ledger holding only the empty genesis block.
    pub fn new() -> Self {
        let prev = Digest([0; 32]);
        let genesis = Block { height: 0, payload: Vec::new(), prev_digest: prev, digest: Block::compute_digest(0, &[], &prev) };
        Ledger { blocks: vec![genesis], blobs: BTreeMap::new() }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn height(&self) -> u64 {
        self.blocks.len() as u64 - 1
    }

    pub fn tip(&self) -> &Block {
        self.blocks.last().expect("genesis")
    }

    pub fn put_blob(&mut self, bytes: Vec<u8>) -> Digest {
        let d = Digest::of(&bytes);
        self.blobs.insert(d, bytes);
        d
    }

    pub fn blob(&self, d: &Digest) -> Option<&[u8]> {
        self.blobs.get(d).map(Vec::as_slice)
    }

    pub fn append(&mut self, payload: Vec<Record>) -> Result<&Block, ChainError> {
        for r in &payload {
            if let Record::BlobRef { digest, .. } = r {
                if !self.blobs.contains_key(digest) {
                    return Err(ChainError::MissingBlob(*digest));
                }
            }
        }
        let height = self.blocks.len() as u64;
        let prev = self.tip().digest;
        let digest = Block::compute_digest(height, &payload, &prev);
        self.blocks.push(Block { height, payload, prev_digest: prev, digest });
        Ok(self.tip())
    }

    /// Recomputes every digest and link from genesis.
    pub fn verify_integrity(&self) -> Result<(), ChainError> {
        let mut prev = Digest([0; 32]);
        for (i, b) in self.blocks.iter().enumerate() {
            if b.height != i as u64 || b.prev_digest != prev || Block::compute_digest(b.height, &b.payload, &prev) != b.digest {
                return Err(ChainError::Integrity(i as u64));
            }
            for r in &b.payload {
                if let Record::BlobRef { digest, .. } = r {
                    match self.blobs.get(digest) {
                        Some(bytes) if Digest::of(bytes) == *digest => {}
                        _ => return Err(ChainError::Integrity(i as u64)),
                    }
                }
            }
            prev = b.digest;
        }
        Ok(())
    }

    /// Test hook: mutable access to a block's payload.
    pub fn payload_mut(&mut self, height: usize) -> &mut Vec<Record> {
        &mut self.blocks[height].payload
    }

    /// Commits a result reported by at least `quorum` nodes with identical bytes.
    pub fn append_with_consensus(
        &mut self,
        label: &str,
        results: &[(PartyId, Vec<u8>)],
        quorum: usize,
    ) -> Result<&Block, ChainError> {
        let (bytes, nodes) = consensus(results, quorum)?;
        self.append(vec![Record::Result { label: label.to_string(), bytes, nodes }])
    }

    /// One JSON object per line.
    pub fn export_jsonl(&self) -> String {
        self.blocks.iter().map(|b| serde_json::to_string(b).expect("serializable") + "\n").collect()
    }

    pub fn import_jsonl(text: &str, blobs: BTreeMap<Digest, Vec<u8>>) -> Result<Self, ChainError> {
        let blocks = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| ChainError::Import(e.to_string())))
            .collect::<Result<Vec<Block>, _>>()?;
        let l = Ledger { blocks, blobs };
        l.verify_integrity()?;
        Ok(l)
    }

    /// Writes each blob to `dir/<hex digest>`.
    pub fn export_blobs(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (d, b) in &self.blobs {
            std::fs::write(dir.join(d.to_hex()), b)?;
        }
        Ok(())
    }

    pub fn read_blobs(dir: &Path) -> std::io::Result<BTreeMap<Digest, Vec<u8>>> {
        let mut out = BTreeMap::new();
        for e in std::fs::read_dir(dir)? {
            let e = e?;
            if let Some(d) = e.file_name().to_str().and_then(Digest::from_hex) {
                out.insert(d, std::fs::read(e.path())?);
            }
        }
        Ok(out)
    }
}

/// Byte-equality quorum: the largest group of identical results wins if it has
/// at least `quorum` members. Ties go to the group reported first.
pub fn consensus(results: &[(PartyId, Vec<u8>)], quorum: usize) -> Result<(Vec<u8>, Vec<PartyId>), ChainError> {
    let mut distinct: Vec<PartyId> = results.iter().map(|(p, _)| *p).collect();
    distinct.sort();
    distinct.dedup();
    if distinct.len() < quorum || distinct.len() != results.len() {
        return Err(ChainError::InsufficientResults { got: distinct.len(), needed: quorum });
    }
    let mut groups: Vec<(&[u8], Vec<PartyId>)> = Vec::new();
    for (p, r) in results {
        match groups.iter_mut().find(|(b, _)| *b == r.as_slice()) {
            Some((_, v)) => v.push(*p),
            None => groups.push((r, vec![*p])),
        }
    }
    let best = groups.iter().enumerate().max_by_key(|(i, g)| (g.1.len(), std::cmp::Reverse(*i))).map(|(_, g)| g);
    let (bytes, nodes) = best.expect("non-empty results");
    if nodes.len() >= quorum.max(1) {
        Ok((bytes.to_vec(), nodes.clone()))
    } else {
        let dissenting = results.iter().map(|(p, _)| *p).filter(|p| !nodes.contains(p)).collect();
        Err(ChainError::ConsensusFailure { agreeing: nodes.len(), needed: quorum, dissenting })
    }
}

/// USD cost of `ops` operations at `gas_per_op`, priced in gwei per gas.
pub fn gas_cost(ops: u64, gas_per_op: u64, gwei_per_gas: f64, usd_per_eth: f64) -> f64 {
    ops as f64 * gas_per_op as f64 * gwei_per_gas * 1e-9 * usd_per_eth
}

/// Applies a deposit event and records the new state on the ledger.
pub fn manage_deposit(ledger: &mut Ledger, record: &DepositRecord, event: DepositEvent) -> Result<DepositRecord, ChainError> {
    if record.status != DepositStatus::Held {
        return Err(ChainError::InvalidTransition { from: record.status, event });
    }
    let status = match event {
        DepositEvent::Misbehavior => DepositStatus::Confiscated,
        DepositEvent::Completion => DepositStatus::Returned,
    };
    let next = DepositRecord { status, ..record.clone() };
    ledger.append(vec![Record::Deposit(next.clone())])?;
    Ok(next)
}

/// Off-chain executor of oracle calls, holding the decryption key.
pub struct OracleExecutor {
    secret: <Ristretto as PrimeOrderGroup>::Scalar,
    pub public: Vec<u8>,
}

/// Parameters encrypted to the executor (hashed ElGamal with an HMAC tag).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncryptedParams {
    pub ephemeral: Vec<u8>,
    pub ciphertext: Vec<u8>,
    pub tag: [u8; 16],
}

impl EncryptedParams {
    fn digest(&self) -> Digest {
        Digest::of_parts(&[&self.ephemeral, &self.ciphertext, &self.tag])
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleCall {
    pub params: EncryptedParams,
    pub gas_budget: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleResult {
    Inline(Vec<u8>),
    Blob(Digest),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleConfig {
    /// Gas charged for posting the result back on chain.
    pub return_gas: u64,
    pub inline_limit: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { return_gas: 21_000, inline_limit: 1024 }
    }
}

fn elgamal_key(ephemeral: &[u8], shared: &<Ristretto as PrimeOrderGroup>::Element) -> [u8; 32] {
    Digest::of_parts(&[b"pvsc/oracle", ephemeral, &Ristretto::encode(shared)]).0
}

impl OracleExecutor {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let secret = Ristretto::random_scalar(rng);
        let public = Ristretto::encode(&Ristretto::mul_gen(&secret));
        OracleExecutor { secret, public }
    }

    fn decrypt(&self, p: &EncryptedParams) -> Result<Vec<u8>, ChainError> {
        let eph = Ristretto::decode(&p.ephemeral).ok_or(ChainError::Decryption)?;
        let key = elgamal_key(&p.ephemeral, &Ristretto::mul(&eph, &self.secret));
        if hmac256(&key, &p.ciphertext)[..16] != p.tag {
            return Err(ChainError::Decryption);
        }
        let mut pt = p.ciphertext.clone();
        keystream_xor(&key, &mut pt);
        Ok(pt)
    }
}

pub fn encrypt_params<R: RngCore + CryptoRng>(public: &[u8], params: &[u8], rng: &mut R) -> Result<EncryptedParams, ChainError> {
    let pk = Ristretto::decode(public).ok_or(ChainError::Decryption)?;
    let r = Ristretto::random_scalar(rng);
    let ephemeral = Ristretto::encode(&Ristretto::mul_gen(&r));
    let key = elgamal_key(&ephemeral, &Ristretto::mul(&pk, &r));
    let mut ciphertext = params.to_vec();
    keystream_xor(&key, &mut ciphertext);
    let tag: [u8; 16] = hmac256(&key, &ciphertext)[..16].try_into().expect("16 bytes");
    Ok(EncryptedParams { ephemeral, ciphertext, tag })
}

/// The call pattern: the call is logged on chain, the executor decrypts and
/// runs `callback` off chain, and the result comes back inline when small or
/// as a blob digest otherwise.
pub fn oracle_roundtrip(
    ledger: &mut Ledger,
    call: &OracleCall,
    executor: &OracleExecutor,
    config: OracleConfig,
    callback: impl FnOnce(&[u8]) -> Vec<u8>,
) -> Result<OracleResult, ChainError> {
    if call.gas_budget < config.return_gas || call.gas_budget == 0 {
        return Err(ChainError::InsufficientGas { budget: call.gas_budget, required: config.return_gas });
    }
    let params = executor.decrypt(&call.params)?;
    let result = callback(&params);
    let call_rec = Record::OracleCall { params_digest: call.params.digest(), gas_budget: call.gas_budget };
    if result.len() <= config.inline_limit {
        ledger.append(vec![call_rec, Record::Result { label: "oracle".into(), bytes: result.clone(), nodes: Vec::new() }])?;
        Ok(OracleResult::Inline(result))
    } else {
        let d = ledger.put_blob(result);
        ledger.append(vec![call_rec, Record::BlobRef { label: "oracle".into(), digest: d }])?;
        Ok(OracleResult::Blob(d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gas_examples() {
        assert!((gas_cost(10_000_000, 5, 21.0, 380.0) - 399.0).abs() < 1e-9);
        assert!((gas_cost(32_768, 2000, 21.0, 380.0) - 522.98).abs() < 0.01);
        assert_eq!(gas_cost(12345, 0, 21.0, 380.0), 0.0);
    }

    #[test]
    fn deposit_transitions() {
        let mut l = Ledger::new();
        let d = DepositRecord::held(PartyId::outsourcer(1), 1_000_000);
        assert_eq!(manage_deposit(&mut l, &d, DepositEvent::Misbehavior).unwrap().status, DepositStatus::Confiscated);
        let r = manage_deposit(&mut l, &d, DepositEvent::Completion).unwrap();
        assert_eq!(r.status, DepositStatus::Returned);
        assert!(matches!(manage_deposit(&mut l, &r, DepositEvent::Completion), Err(ChainError::InvalidTransition { .. })));
        assert_eq!(l.height(), 2);
    }
}
