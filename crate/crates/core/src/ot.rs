//! 1-out-of-2 oblivious transfer of κ-bit strings.
//!
//! Two instantiations share one interface:
//!
//! * [`OtKind::Dealer`]: a dealer hands the sender random `(r0, r1)` and the
//!   receiver `(c, r_c)`; the receiver sends `e = b ^ c` and the sender answers
//!   `(m0 ^ r_e, m1 ^ r_{1^e})`. The sender sees only `e`, which is uniform.
//! * [`OtKind::Group`]: the Chou-Orlandi "simplest OT" over a prime-order
//!   group. Sender publishes `S = yG`; receiver sends `R = xG + cS`; the sender
//!   derives `k0 = H(yR)`, `k1 = H(y(R - S))` and the receiver can compute only
//!   `k_c = H(xS)`.

use std::marker::PhantomData;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::crypto::Block;
use crate::group::{PrimeOrderGroup, Ristretto};
use crate::transport::codec::{Reader, Writer};
use crate::transport::{Ctx, PartyId, TransportError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OtMessagePair {
    pub m0: Block,
    pub m1: Block,
}

impl OtMessagePair {
    pub fn new(m0: Block, m1: Block) -> Self {
        OtMessagePair { m0, m1 }
    }

    pub fn get(&self, b: bool) -> Block {
        if b {
            self.m1
        } else {
            self.m0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OtKind {
    Dealer,
    Group,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OtError {
    #[error("OT session aborted: {0}")]
    Aborted(#[from] TransportError),
    #[error("OT message malformed: {0}")]
    Malformed(String),
}

fn blocks_to_bytes(bs: &[Block]) -> Vec<u8> {
    bs.iter().flat_map(|b| b.to_bytes()).collect()
}

fn bytes_to_blocks(b: &[u8], n: usize) -> Result<Vec<Block>, OtError> {
    if b.len() != 16 * n {
        return Err(OtError::Malformed(format!("expected {n} blocks, got {} bytes", b.len())));
    }
    Ok(b.chunks(16).map(|c| Block::from_slice(c).expect("16 bytes")).collect())
}

fn bits_to_bytes(bits: &[bool]) -> Vec<u8> {
    bits.iter().map(|&b| b as u8).collect()
}

fn bytes_to_bits(b: &[u8], n: usize) -> Result<Vec<bool>, OtError> {
    if b.len() != n || b.iter().any(|&x| x > 1) {
        return Err(OtError::Malformed("choice vector".into()));
    }
    Ok(b.iter().map(|&x| x == 1).collect())
}

/// Correlated randomness for a dealer OT batch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DealerRandomness {
    pub r0: Vec<Block>,
    pub r1: Vec<Block>,
    pub c: Vec<bool>,
}

impl DealerRandomness {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Self {
        DealerRandomness {
            r0: (0..n).map(|_| Block::random(rng)).collect(),
            r1: (0..n).map(|_| Block::random(rng)).collect(),
            c: (0..n).map(|_| rng.gen()).collect(),
        }
    }
}

/// The dealer's program: samples correlations for `n` transfers.
pub async fn ot_dealer(ctx: &mut Ctx, sender: PartyId, receiver: PartyId, n: usize) -> Result<(), OtError> {
    let r = DealerRandomness::sample(ctx.rng(), n);
    ot_dealer_with(ctx, sender, receiver, &r).await
}

pub async fn ot_dealer_with(
    ctx: &mut Ctx,
    sender: PartyId,
    receiver: PartyId,
    r: &DealerRandomness,
) -> Result<(), OtError> {
    let mut w = Writer::new();
    w.bytes(&blocks_to_bytes(&r.r0)).bytes(&blocks_to_bytes(&r.r1));
    ctx.send(sender, w.finish())?;
    let rc: Vec<Block> = (0..r.c.len()).map(|i| if r.c[i] { r.r1[i] } else { r.r0[i] }).collect();
    let mut w = Writer::new();
    w.bytes(&bits_to_bytes(&r.c)).bytes(&blocks_to_bytes(&rc));
    ctx.send(receiver, w.finish())?;
    Ok(())
}

/// Sender side of a batch.
pub async fn ot_send(
    ctx: &mut Ctx,
    kind: OtKind,
    receiver: PartyId,
    pairs: &[OtMessagePair],
) -> Result<(), OtError> {
    match kind {
        OtKind::Dealer => {
            let n = pairs.len();
            let d = ctx.recv(PartyId::DEALER).await?;
            let mut rd = Reader::new(&d);
            let r0 = bytes_to_blocks(rd.bytes()?, n)?;
            let r1 = bytes_to_blocks(rd.bytes()?, n)?;
            let e = bytes_to_bits(&ctx.recv(receiver).await?, n)?;
            let mut y = Vec::with_capacity(2 * n);
            for i in 0..n {
                let (re, rne) = if e[i] { (r1[i], r0[i]) } else { (r0[i], r1[i]) };
                y.push(pairs[i].m0 ^ re);
                y.push(pairs[i].m1 ^ rne);
            }
            ctx.send(receiver, blocks_to_bytes(&y))?;
            Ok(())
        }
        OtKind::Group => GroupOt::<Ristretto>::send(ctx, receiver, pairs).await,
    }
}

/// Receiver side of a batch.
pub async fn ot_receive(
    ctx: &mut Ctx,
    kind: OtKind,
    sender: PartyId,
    choices: &[bool],
) -> Result<Vec<Block>, OtError> {
    match kind {
        OtKind::Dealer => {
            let n = choices.len();
            let d = ctx.recv(PartyId::DEALER).await?;
            let mut rd = Reader::new(&d);
            let c = bytes_to_bits(rd.bytes()?, n)?;
            let rc = bytes_to_blocks(rd.bytes()?, n)?;
            let e: Vec<bool> = choices.iter().zip(&c).map(|(b, c)| b ^ c).collect();
            ctx.send(sender, bits_to_bytes(&e))?;
            let y = bytes_to_blocks(&ctx.recv(sender).await?, 2 * n)?;
            Ok((0..n).map(|i| y[2 * i + choices[i] as usize] ^ rc[i]).collect())
        }
        OtKind::Group => GroupOt::<Ristretto>::receive(ctx, sender, choices).await,
    }
}

/// Single-transfer convenience wrappers.
pub async fn ot_transfer_send(ctx: &mut Ctx, kind: OtKind, receiver: PartyId, pair: OtMessagePair) -> Result<(), OtError> {
    ot_send(ctx, kind, receiver, &[pair]).await
}

pub async fn ot_transfer_receive(ctx: &mut Ctx, kind: OtKind, sender: PartyId, choice: bool) -> Result<Block, OtError> {
    Ok(ot_receive(ctx, kind, sender, &[choice]).await?[0])
}

pub struct GroupOt<G>(PhantomData<G>);

impl<G: PrimeOrderGroup> GroupOt<G> {
    fn kdf(i: usize, s: &[u8], r: &[u8], p: &G::Element) -> Block {
        let mut h = Sha256::new();
        h.update(b"pvsc/ot");
        h.update((i as u64).to_le_bytes());
        h.update(s);
        h.update(r);
        h.update(G::encode(p));
        let out: [u8; 32] = h.finalize().into();
        Block::from_slice(&out[..16]).expect("16 bytes")
    }

    fn points(b: &[u8], n: usize) -> Result<Vec<Vec<u8>>, OtError> {
        if b.len() != n * G::ELEMENT_BYTES {
            return Err(OtError::Malformed("group element vector".into()));
        }
        Ok(b.chunks(G::ELEMENT_BYTES).map(|c| c.to_vec()).collect())
    }

    pub async fn send(ctx: &mut Ctx, receiver: PartyId, pairs: &[OtMessagePair]) -> Result<(), OtError> {
        let n = pairs.len();
        let y = G::random_scalar(ctx.rng());
        let s = G::mul_gen(&y);
        let s_enc = G::encode(&s);
        ctx.send(receiver, s_enc.clone())?;
        let rs = Self::points(&ctx.recv(receiver).await?, n)?;
        let mut out = Vec::with_capacity(2 * n);
        for (i, r_enc) in rs.iter().enumerate() {
            let r = G::decode(r_enc).ok_or_else(|| OtError::Malformed("invalid group element".into()))?;
            let k0 = Self::kdf(i, &s_enc, r_enc, &G::mul(&r, &y));
            let k1 = Self::kdf(i, &s_enc, r_enc, &G::mul(&G::sub(&r, &s), &y));
            out.push(pairs[i].m0 ^ k0);
            out.push(pairs[i].m1 ^ k1);
        }
        ctx.send(receiver, blocks_to_bytes(&out))?;
        Ok(())
    }

    pub async fn receive(ctx: &mut Ctx, sender: PartyId, choices: &[bool]) -> Result<Vec<Block>, OtError> {
        let n = choices.len();
        let s_enc = ctx.recv(sender).await?;
        let s = G::decode(&s_enc).ok_or_else(|| OtError::Malformed("invalid sender element".into()))?;
        let mut xs = Vec::with_capacity(n);
        let mut rs = Vec::with_capacity(n * G::ELEMENT_BYTES);
        let mut r_encs = Vec::with_capacity(n);
        for &c in choices {
            let x = G::random_scalar(ctx.rng());
            let mut r = G::mul_gen(&x);
            if c {
                r = G::add(&r, &s);
            }
            let e = G::encode(&r);
            rs.extend_from_slice(&e);
            r_encs.push(e);
            xs.push(x);
        }
        ctx.send(sender, rs)?;
        let y = bytes_to_blocks(&ctx.recv(sender).await?, 2 * n)?;
        Ok((0..n)
            .map(|i| {
                let k = Self::kdf(i, &s_enc, &r_encs[i], &G::mul(&s, &xs[i]));
                y[2 * i + choices[i] as usize] ^ k
            })
            .collect())
    }
}
