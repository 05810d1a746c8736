//! Prime-order group abstraction used by OT, the pairwise NIKE and the
//! oracle-call encryption. The only instantiation is Ristretto255.

use curve25519_dalek::constants::RISTRETTO_BASEPOINT_POINT;
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use curve25519_dalek::traits::Identity;
use rand::{CryptoRng, RngCore};
use sha2::{Digest as _, Sha512};

pub trait PrimeOrderGroup {
    type Scalar: Clone;
    type Element: Clone + PartialEq;
    const ELEMENT_BYTES: usize;

    fn random_scalar<R: RngCore + CryptoRng>(rng: &mut R) -> Self::Scalar;
    fn scalar_from_hash(data: &[u8]) -> Self::Scalar;
    fn identity() -> Self::Element;
    fn mul_gen(s: &Self::Scalar) -> Self::Element;
    fn mul(e: &Self::Element, s: &Self::Scalar) -> Self::Element;
    fn add(a: &Self::Element, b: &Self::Element) -> Self::Element;
    fn sub(a: &Self::Element, b: &Self::Element) -> Self::Element;
    fn encode(e: &Self::Element) -> Vec<u8>;
    fn decode(bytes: &[u8]) -> Option<Self::Element>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Ristretto;

impl PrimeOrderGroup for Ristretto {
    type Scalar = Scalar;
    type Element = RistrettoPoint;
    const ELEMENT_BYTES: usize = 32;

    fn random_scalar<R: RngCore + CryptoRng>(rng: &mut R) -> Scalar {
        let mut wide = [0u8; 64];
        rng.fill_bytes(&mut wide);
        Scalar::from_bytes_mod_order_wide(&wide)
    }

    fn scalar_from_hash(data: &[u8]) -> Scalar {
        let h: [u8; 64] = Sha512::digest(data).into();
        Scalar::from_bytes_mod_order_wide(&h)
    }

    fn identity() -> RistrettoPoint {
        RistrettoPoint::identity()
    }

    fn mul_gen(s: &Scalar) -> RistrettoPoint {
        RISTRETTO_BASEPOINT_POINT * s
    }

    fn mul(e: &RistrettoPoint, s: &Scalar) -> RistrettoPoint {
        e * s
    }

    fn add(a: &RistrettoPoint, b: &RistrettoPoint) -> RistrettoPoint {
        a + b
    }

    fn sub(a: &RistrettoPoint, b: &RistrettoPoint) -> RistrettoPoint {
        a - b
    }

    fn encode(e: &RistrettoPoint) -> Vec<u8> {
        e.compress().to_bytes().to_vec()
    }

    fn decode(bytes: &[u8]) -> Option<RistrettoPoint> {
        CompressedRistretto::from_slice(bytes).ok()?.decompress()
    }
}
