//! Shared symmetric primitives: 128-bit blocks, hashing and the authenticated
//! single-block cipher used for garbled rows and pivot tables.

use std::fmt;
use std::ops::{BitXor, BitXorAssign};

use hmac::{Hmac, Mac};
use rand::{CryptoRng, Rng};
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

/// Security parameter in bits.
pub const KAPPA: usize = 128;

/// Length in bytes of an authenticated row: a block plus a 32-bit tag.
pub const ROW_BYTES: usize = 20;

/// A κ-bit string. The least significant bit doubles as the point-and-permute bit.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Block(pub u128);

impl Block {
    pub const ZERO: Block = Block(0);

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Block(rng.gen())
    }

    pub fn lsb(self) -> bool {
        self.0 & 1 == 1
    }

    pub fn to_bytes(self) -> [u8; 16] {
        self.0.to_le_bytes()
    }

    pub fn from_bytes(bytes: [u8; 16]) -> Self {
        Block(u128::from_le_bytes(bytes))
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Self> {
        let arr: [u8; 16] = bytes.try_into().ok()?;
        Some(Self::from_bytes(arr))
    }

    /// `self` if `bit` is set, zero otherwise.
    pub fn select(self, bit: bool) -> Self {
        if bit {
            self
        } else {
            Block::ZERO
        }
    }
}

impl BitXor for Block {
    type Output = Block;
    fn bitxor(self, rhs: Block) -> Block {
        Block(self.0 ^ rhs.0)
    }
}

impl BitXorAssign for Block {
    fn bitxor_assign(&mut self, rhs: Block) {
        self.0 ^= rhs.0;
    }
}

impl fmt::Debug for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Block({:032x})", self.0)
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

/// A 256-bit digest, hex encoded in every text export.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub fn of(bytes: &[u8]) -> Self {
        Digest(Sha256::digest(bytes).into())
    }

    pub fn of_parts(parts: &[&[u8]]) -> Self {
        let mut h = Sha256::new();
        for p in parts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p);
        }
        Digest(h.finalize().into())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let bytes = hex::decode(s.trim()).ok()?;
        Some(Digest(bytes.try_into().ok()?))
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", &self.to_hex()[..16])
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Digest::from_hex(&s).ok_or_else(|| serde::de::Error::custom("invalid hex digest"))
    }
}

/// Authenticated encryption of one block under a key and a tweak.
///
/// The pad is a keyed hash of `(key, tweak)`; the plaintext is the block followed
/// by a 32-bit tag derived from `(tweak, block)`, so a wrong key or any altered
/// ciphertext bit fails the tag check except with probability 2^-32.
pub type Row = [u8; ROW_BYTES];

fn row_pad(key: &[u8], tweak: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"pvsc/row-pad");
    h.update((key.len() as u32).to_le_bytes());
    h.update(key);
    h.update(tweak);
    h.finalize().into()
}

fn row_tag(tweak: &[u8], block: Block) -> [u8; 4] {
    let mut h = Sha256::new();
    h.update(b"pvsc/row-tag");
    h.update(tweak);
    h.update(block.to_bytes());
    let out: [u8; 32] = h.finalize().into();
    [out[0], out[1], out[2], out[3]]
}

pub fn seal_row(key: &[u8], tweak: &[u8], block: Block) -> Row {
    let pad = row_pad(key, tweak);
    let tag = row_tag(tweak, block);
    let mut row = [0u8; ROW_BYTES];
    row[..16].copy_from_slice(&block.to_bytes());
    row[16..].copy_from_slice(&tag);
    for (r, p) in row.iter_mut().zip(pad.iter()) {
        *r ^= p;
    }
    row
}

/// Returns `None` when the tag does not authenticate.
pub fn open_row(key: &[u8], tweak: &[u8], row: &Row) -> Option<Block> {
    let pad = row_pad(key, tweak);
    let mut pt = *row;
    for (r, p) in pt.iter_mut().zip(pad.iter()) {
        *r ^= p;
    }
    let block = Block::from_slice(&pt[..16])?;
    if row_tag(tweak, block) == pt[16..] {
        Some(block)
    } else {
        None
    }
}

/// Short fingerprint of a block, used to recognise labels without storing them.
pub fn fingerprint(domain: &[u8], block: Block) -> u64 {
    let mut h = Sha256::new();
    h.update(domain);
    h.update(block.to_bytes());
    let out: [u8; 32] = h.finalize().into();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}

/// HMAC-SHA256 truncated to κ bits.
pub fn prf(key: &[u8], input: &[u8]) -> Block {
    let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(key).expect("hmac accepts any key length");
    mac.update(input);
    let out = mac.finalize().into_bytes();
    Block::from_slice(&out[..16]).expect("16 bytes")
}

/// Full-width HMAC-SHA256.
pub fn hmac256(key: &[u8], input: &[u8]) -> [u8; 32] {
    let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(key).expect("hmac accepts any key length");
    mac.update(input);
    mac.finalize().into_bytes().into()
}

/// XOR keystream expanded from a 32-byte key with SHA-256 in counter mode.
pub fn keystream_xor(key: &[u8; 32], data: &mut [u8]) {
    for (counter, chunk) in data.chunks_mut(32).enumerate() {
        let mut h = Sha256::new();
        h.update(b"pvsc/stream");
        h.update(key);
        h.update((counter as u64).to_le_bytes());
        let pad: [u8; 32] = h.finalize().into();
        for (d, p) in chunk.iter_mut().zip(pad.iter()) {
            *d ^= p;
        }
    }
}

/// Derives a 32-byte seed for a sub-component from a parent seed and a label.
pub fn derive_seed(parent: &[u8], label: &[u8]) -> [u8; 32] {
    Digest::of_parts(&[b"pvsc/seed", parent, label]).0
}

/// Random 32-byte seed.
pub fn random_seed<R: Rng + CryptoRng + ?Sized>(rng: &mut R) -> [u8; 32] {
    let mut s = [0u8; 32];
    rng.fill(&mut s);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn row_round_trip_and_wrong_key() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let b = Block::random(&mut rng);
        let row = seal_row(b"key-a", b"tw", b);
        assert_eq!(open_row(b"key-a", b"tw", &row), Some(b));
        assert_eq!(open_row(b"key-b", b"tw", &row), None);
        assert_eq!(open_row(b"key-a", b"tx", &row), None);
    }

    #[test]
    fn every_single_bit_flip_is_detected() {
        let b = Block(0x0123_4567_89ab_cdef_0011_2233_4455_6677);
        let row = seal_row(b"k", b"t", b);
        for i in 0..ROW_BYTES * 8 {
            let mut bad = row;
            bad[i / 8] ^= 1 << (i % 8);
            assert_eq!(open_row(b"k", b"t", &bad), None, "bit {i}");
        }
    }

    #[test]
    fn digest_hex_round_trip() {
        let d = Digest::of(b"abc");
        assert_eq!(
            d.to_hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(Digest::from_hex(&d.to_hex()), Some(d));
    }
}
