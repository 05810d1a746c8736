//! Preprocessing material: BDOZ-authenticated bits, SPDZ-authenticated field
//! shares, resharing from outsourcing parties `O` to executing parties `E`,
//! and the random cover that decides which `O` party serves which `E` party.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand::rngs::SmallRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::Block;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PreprocError {
    #[error("MAC check failed")]
    MacFailure,
    #[error("infeasible cover parameters: {0}")]
    Infeasible(String),
    #[error("cover leaves executing party {0} unserved")]
    IncompleteCover(usize),
    #[error("share shape mismatch: {0}")]
    Shape(String),
    #[error("malformed share bundle: {0}")]
    Format(String),
}

// ---- BDOZ

/// One party's share of a BDOZ-authenticated bit.
///
/// `macs[j]` is held by the share's holder, `keys[j]` by verifier `j`; both are
/// `None` at the holder's own index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BdozBit {
    pub holder: usize,
    pub x: bool,
    pub macs: Vec<Option<Block>>,
    pub keys: Vec<Option<Block>>,
}

/// An XOR-shared bit with pairwise MACs under each verifier's global key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BdozSharing {
    pub deltas: Vec<Block>,
    pub shares: Vec<BdozBit>,
}

pub fn bdoz_deltas<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Block> {
    (0..n)
        .map(|_| loop {
            let d = Block::random(rng);
            if d != Block::ZERO {
                break d;
            }
        })
        .collect()
}

/// Shares `x` among `n ≥ 2` parties with fresh global keys.
pub fn bdoz_authenticate<R: Rng + ?Sized>(x: bool, n: usize, rng: &mut R) -> BdozSharing {
    assert!(n >= 2, "BDOZ needs at least two parties");
    let deltas = bdoz_deltas(n, rng);
    bdoz_authenticate_with(x, &deltas, rng)
}

pub fn bdoz_authenticate_with<R: Rng + ?Sized>(x: bool, deltas: &[Block], rng: &mut R) -> BdozSharing {
    let n = deltas.len();
    let mut bits: Vec<bool> = (0..n - 1).map(|_| rng.gen()).collect();
    bits.push(bits.iter().fold(x, |a, b| a ^ b));
    let shares = bits
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            let mut macs = vec![None; n];
            let mut keys = vec![None; n];
            for j in (0..n).filter(|&j| j != i) {
                let k = Block::random(rng);
                keys[j] = Some(k);
                macs[j] = Some(k ^ deltas[j].select(xi));
            }
            BdozBit { holder: i, x: xi, macs, keys }
        })
        .collect();
    BdozSharing { deltas: deltas.to_vec(), shares }
}

/// Every pairwise relation `M_j[x_i] = K_j[x_i] ⊕ x_i·Δ_j` holds.
pub fn bdoz_check(s: &BdozSharing) -> bool {
    let n = s.deltas.len();
    s.shares.len() == n
        && s.shares.iter().enumerate().all(|(i, b)| {
            b.holder == i
                && b.macs.len() == n
                && b.keys.len() == n
                && (0..n).all(|j| match (b.macs[j], b.keys[j]) {
                    (None, None) => j == i,
                    (Some(m), Some(k)) => j != i && m == k ^ s.deltas[j].select(b.x),
                    _ => false,
                })
        })
}

/// Opens the bit after checking all MACs.
pub fn bdoz_open(s: &BdozSharing) -> Result<bool, PreprocError> {
    if !bdoz_check(s) {
        return Err(PreprocError::MacFailure);
    }
    Ok(s.shares.iter().fold(false, |a, b| a ^ b.x))
}

/// Local XOR of two sharings under the same global keys.
pub fn bdoz_xor(a: &BdozSharing, b: &BdozSharing) -> Result<BdozSharing, PreprocError> {
    if a.deltas != b.deltas || a.shares.len() != b.shares.len() {
        return Err(PreprocError::Shape("BDOZ sharings under different keys".into()));
    }
    let xo = |p: Option<Block>, q: Option<Block>| p.zip(q).map(|(p, q)| p ^ q);
    let shares = a
        .shares
        .iter()
        .zip(&b.shares)
        .map(|(p, q)| BdozBit {
            holder: p.holder,
            x: p.x ^ q.x,
            macs: p.macs.iter().zip(&q.macs).map(|(m, n)| xo(*m, *n)).collect(),
            keys: p.keys.iter().zip(&q.keys).map(|(m, n)| xo(*m, *n)).collect(),
        })
        .collect();
    Ok(BdozSharing { deltas: a.deltas.clone(), shares })
}

// ---- SPDZ over p = 2^61 - 1

pub const P61: u64 = (1 << 61) - 1;

#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fp(u64);

impl Fp {
    pub const ZERO: Fp = Fp(0);
    pub const ONE: Fp = Fp(1);

    pub fn new(v: u64) -> Self {
        Fp(v % P61)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Fp(rng.gen_range(0..P61))
    }

    fn reduce(x: u128) -> Fp {
        let lo = (x as u64) & P61;
        let hi = (x >> 61) as u64;
        let mut s = lo + (hi & P61) + (hi >> 61);
        while s >= P61 {
            s -= P61;
        }
        Fp(s)
    }
}

impl fmt::Debug for Fp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::ops::Add for Fp {
    type Output = Fp;
    fn add(self, o: Fp) -> Fp {
        let s = self.0 + o.0;
        Fp(if s >= P61 { s - P61 } else { s })
    }
}

impl std::ops::Sub for Fp {
    type Output = Fp;
    fn sub(self, o: Fp) -> Fp {
        Fp(if self.0 >= o.0 { self.0 - o.0 } else { self.0 + P61 - o.0 })
    }
}

impl std::ops::Mul for Fp {
    type Output = Fp;
    fn mul(self, o: Fp) -> Fp {
        Fp::reduce(self.0 as u128 * o.0 as u128)
    }
}

impl std::iter::Sum for Fp {
    fn sum<I: Iterator<Item = Fp>>(it: I) -> Fp {
        it.fold(Fp::ZERO, |a, b| a + b)
    }
}

/// Additive shares of the global MAC key α.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpdzKey {
    pub alpha_shares: Vec<Fp>,
}

impl SpdzKey {
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        SpdzKey { alpha_shares: (0..n).map(|_| Fp::random(rng)).collect() }
    }

    pub fn parties(&self) -> usize {
        self.alpha_shares.len()
    }

    pub fn alpha(&self) -> Fp {
        self.alpha_shares.iter().copied().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpdzShare {
    pub shares: Vec<Fp>,
    pub macs: Vec<Fp>,
}

fn additive<R: Rng + ?Sized>(x: Fp, n: usize, rng: &mut R) -> Vec<Fp> {
    let mut v: Vec<Fp> = (0..n - 1).map(|_| Fp::random(rng)).collect();
    let s: Fp = v.iter().copied().sum();
    v.push(x - s);
    v
}

pub fn spdz_share<R: Rng + ?Sized>(x: Fp, key: &SpdzKey, rng: &mut R) -> SpdzShare {
    let n = key.parties();
    SpdzShare { shares: additive(x, n, rng), macs: additive(key.alpha() * x, n, rng) }
}

/// Opens the value, then checks that `Σ (γ_i − α_i·x)` vanishes.
pub fn spdz_open_check(s: &SpdzShare, key: &SpdzKey) -> Result<Fp, PreprocError> {
    if s.shares.len() != key.parties() || s.macs.len() != key.parties() {
        return Err(PreprocError::Shape("share count differs from key".into()));
    }
    let x: Fp = s.shares.iter().copied().sum();
    let sigma: Fp = s.macs.iter().zip(&key.alpha_shares).map(|(&g, &a)| g - a * x).sum();
    if sigma == Fp::ZERO {
        Ok(x)
    } else {
        Err(PreprocError::MacFailure)
    }
}

impl SpdzShare {
    pub fn add(&self, o: &SpdzShare) -> SpdzShare {
        SpdzShare {
            shares: self.shares.iter().zip(&o.shares).map(|(&a, &b)| a + b).collect(),
            macs: self.macs.iter().zip(&o.macs).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn scale(&self, c: Fp) -> SpdzShare {
        SpdzShare {
            shares: self.shares.iter().map(|&a| a * c).collect(),
            macs: self.macs.iter().map(|&a| a * c).collect(),
        }
    }

    /// Adds a public constant: party 0 shifts its share, everyone shifts its MAC by `α_i·c`.
    pub fn add_const(&self, c: Fp, key: &SpdzKey) -> SpdzShare {
        let mut r = self.clone();
        r.shares[0] = r.shares[0] + c;
        for (m, &a) in r.macs.iter_mut().zip(&key.alpha_shares) {
            *m = *m + a * c;
        }
        r
    }

    /// `modulus p`, `parties n`, then one `share mac` line per party in hex.
    pub fn to_text(&self) -> String {
        let mut s = format!("modulus {P61:x}\nparties {}\n", self.shares.len());
        for (x, m) in self.shares.iter().zip(&self.macs) {
            s.push_str(&format!("{:016x} {:016x}\n", x.0, m.0));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, PreprocError> {
        let bad = |m: &str| PreprocError::Format(m.into());
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let modulus = lines.next().and_then(|l| l.strip_prefix("modulus ")).ok_or_else(|| bad("modulus"))?;
        if u64::from_str_radix(modulus.trim(), 16).ok() != Some(P61) {
            return Err(bad("unsupported modulus"));
        }
        let n: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("parties "))
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| bad("parties"))?;
        let mut shares = Vec::with_capacity(n);
        let mut macs = Vec::with_capacity(n);
        for line in lines {
            let mut it = line.split_whitespace();
            let mut field = || -> Result<Fp, PreprocError> {
                let v = it.next().and_then(|h| u64::from_str_radix(h, 16).ok()).ok_or_else(|| bad("share line"))?;
                if v >= P61 {
                    return Err(bad("element out of range"));
                }
                Ok(Fp(v))
            };
            shares.push(field()?);
            macs.push(field()?);
        }
        if shares.len() != n {
            return Err(bad("party count"));
        }
        Ok(SpdzShare { shares, macs })
    }
}

// ---- covers

/// Which executing parties each outsourcing party serves.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cover {
    pub n_e: usize,
    pub n_o: usize,
    pub l: usize,
    pub assignment: Vec<BTreeSet<usize>>,
}

impl Cover {
    pub fn check(&self) -> Result<(), PreprocError> {
        if self.assignment.len() != self.n_o {
            return Err(PreprocError::Shape(format!("{} O-parties, expected {}", self.assignment.len(), self.n_o)));
        }
        for e in 0..self.n_e {
            if !self.assignment.iter().any(|s| s.contains(&e)) {
                return Err(PreprocError::IncompleteCover(e));
            }
        }
        Ok(())
    }

    /// Adjacency list, one line per O-party: `O1: E1 E3`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, set) in self.assignment.iter().enumerate() {
            let es: Vec<String> = set.iter().map(|e| format!("E{}", e + 1)).collect();
            s.push_str(&format!("O{}: {}\n", k + 1, es.join(" ")));
        }
        s
    }

    /// Secure when an honest O-party serves an honest E-party.
    pub fn is_secure(&self, corrupt_e: &BTreeSet<usize>, corrupt_o: &BTreeSet<usize>) -> bool {
        self.assignment
            .iter()
            .enumerate()
            .any(|(k, set)| !corrupt_o.contains(&k) && set.iter().any(|e| !corrupt_e.contains(e)))
    }
}

pub fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

fn check_cover_params(n_e: usize, n_o: usize, l: usize) -> Result<usize, PreprocError> {
    if n_e == 0 || n_o == 0 {
        return Err(PreprocError::Infeasible("empty party set".into()));
    }
    if n_e > 64 {
        return Err(PreprocError::Infeasible("at most 64 executing parties".into()));
    }
    let c = ceil_div(n_e, n_o);
    if l < c {
        return Err(PreprocError::Infeasible(format!("l = {l} below ceil(n_E/n_O) = {c}")));
    }
    if l > n_e {
        return Err(PreprocError::Infeasible(format!("l = {l} exceeds n_E = {n_e}")));
    }
    Ok(c)
}

/// Step 1 deals a random ordering of `E` in blocks of `c` to the O-parties in a
/// random order, wrapping around once `E` is exhausted; step 2 pads each
/// O-party with uniformly chosen further E-parties up to `l`.
fn sample_cover_masks<R: Rng + ?Sized>(rng: &mut R, n_e: usize, n_o: usize, l: usize, c: usize, out: &mut Vec<u64>) {
    let mut pi = [0u8; 64];
    for (i, p) in pi.iter_mut().enumerate().take(n_e) {
        *p = i as u8;
    }
    pi[..n_e].shuffle(rng);
    let mut sigma = [0u8; 64];
    for (i, s) in sigma.iter_mut().enumerate().take(n_o) {
        *s = i as u8;
    }
    sigma[..n_o].shuffle(rng);
    let all = full_mask(n_e);
    out.clear();
    out.resize(n_o, 0);
    for (k, &o) in sigma[..n_o].iter().enumerate() {
        let mut m = 0u64;
        for i in 0..c {
            m |= 1 << pi[(k * c + i) % n_e];
        }
        out[o as usize] = m | sample_mask(rng, all & !m, l - c);
    }
}

fn full_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Uniform `k`-subset of the set bits of `pool`.
fn sample_mask<R: Rng + ?Sized>(rng: &mut R, pool: u64, k: usize) -> u64 {
    let mut items = [0u8; 64];
    let mut n = 0;
    let mut p = pool;
    while p != 0 {
        items[n] = p.trailing_zeros() as u8;
        n += 1;
        p &= p - 1;
    }
    let mut m = 0u64;
    for i in 0..k {
        let j = rng.gen_range(i..n);
        items.swap(i, j);
        m |= 1 << items[i];
    }
    m
}

pub fn assign_cover(n_e: usize, n_o: usize, l: usize, seed: u64) -> Result<Cover, PreprocError> {
    let c = check_cover_params(n_e, n_o, l)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut masks = Vec::new();
    sample_cover_masks(&mut rng, n_e, n_o, l, c, &mut masks);
    let assignment = masks.iter().map(|&m| (0..n_e).filter(|e| m & (1 << e) != 0).collect()).collect();
    Ok(Cover { n_e, n_o, l, assignment })
}

// ---- reshare

/// Moves an SPDZ-shared value from the O-set to the E-set along `cover`.
///
/// Each O-party splits its share among the E-parties it serves. The E-set then
/// authenticates the result under its own key with a preprocessed random mask
/// `r`: it opens `v − r` and adds it to the shares of `r`.
pub fn reshare<R: Rng + ?Sized>(
    o_shares: &SpdzShare,
    cover: &Cover,
    e_key: &SpdzKey,
    rng: &mut R,
) -> Result<SpdzShare, PreprocError> {
    cover.check()?;
    if o_shares.shares.len() != cover.n_o || e_key.parties() != cover.n_e {
        return Err(PreprocError::Shape("share or key size differs from the cover".into()));
    }
    let mut sigma = vec![Fp::ZERO; cover.n_e];
    for (k, set) in cover.assignment.iter().enumerate() {
        let targets: Vec<usize> = set.iter().copied().collect();
        if targets.is_empty() {
            return Err(PreprocError::Shape(format!("O-party {k} serves nobody")));
        }
        for (&e, piece) in targets.iter().zip(additive(o_shares.shares[k], targets.len(), rng)) {
            sigma[e] = sigma[e] + piece;
        }
    }
    let mask = Fp::random(rng);
    let r = spdz_share(mask, e_key, rng);
    let opened: Fp = sigma.iter().zip(&r.shares).map(|(&s, &m)| s - m).sum();
    Ok(r.add_const(opened, e_key))
}

// ---- secure-cover probability

fn rat(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// `(a)_k / (b)_k` as an exact rational; zero once the numerator runs out.
fn falling_ratio(a: usize, b: usize, k: usize) -> BigRational {
    let mut r = BigRational::one();
    for i in 0..k {
        if i >= a {
            return BigRational::zero();
        }
        r *= BigRational::new(BigInt::from(a - i), BigInt::from(b - i));
    }
    r
}

fn binom(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut r = BigInt::one();
    for i in 0..k {
        r = r * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    r
}

/// Probability that one honest O-party's padding lands on corrupt E-parties only.
fn padding_all_corrupt(n_e: usize, t_e: usize, l: usize, c: usize) -> BigRational {
    if t_e < c {
        return BigRational::zero();
    }
    BigRational::new(binom(t_e - c, l - c), binom(n_e - c, l - c))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverFormula {
    ClosedForm,
    /// Outside the closed form's validity domain; the exact value is returned.
    ExactFallback,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverProbability {
    pub value: f64,
    #[serde(skip)]
    pub exact: BigRational,
    pub formula: CoverFormula,
    /// The closed form's own value, also reported outside its domain.
    pub closed_form: f64,
}

fn check_corruption(n_e: usize, n_o: usize, t_e: usize, t_o: usize) -> Result<(), PreprocError> {
    if t_e >= n_e || t_o >= n_o {
        return Err(PreprocError::Infeasible("every set needs an honest party".into()));
    }
    Ok(())
}

/// The closed form with `h = n_O − t_O` honest O-parties:
/// `1 − (t_E)_{hc}/(n_E)_{hc} · (C(t_E−c, l−c)/C(n_E−c, l−c))^h`.
pub fn cover_closed_form(n_e: usize, n_o: usize, t_e: usize, t_o: usize, l: usize) -> Result<BigRational, PreprocError> {
    let c = check_cover_params(n_e, n_o, l)?;
    check_corruption(n_e, n_o, t_e, t_o)?;
    let h = n_o - t_o;
    let first = if h * c > n_e { BigRational::zero() } else { falling_ratio(t_e, n_e, h * c) };
    let q = padding_all_corrupt(n_e, t_e, l, c);
    let mut p = first;
    for _ in 0..h {
        p *= &q;
    }
    Ok(BigRational::one() - p)
}

/// Exact probability under the cover distribution of [`assign_cover`].
///
/// Step-1 blocks are cyclic windows over a uniform ordering of `E`, so the
/// union of the honest blocks is a uniform subset of known size; honest
/// placements are uniform over the O-parties.
pub fn cover_exact_probability(n_e: usize, n_o: usize, t_e: usize, t_o: usize, l: usize) -> Result<BigRational, PreprocError> {
    let c = check_cover_params(n_e, n_o, l)?;
    check_corruption(n_e, n_o, t_e, t_o)?;
    let h = n_o - t_o;
    let block = |k: usize| -> u64 { (0..c).fold(0u64, |m, i| m | 1 << ((k * c + i) % n_e)) };
    let blocks: Vec<u64> = (0..n_o).map(block).collect();
    let mut all_blocks_corrupt = BigRational::zero();
    let mut count = 0u64;
    for honest in subsets(n_o, h) {
        let union = honest.iter().fold(0u64, |m, &k| m | blocks[k]);
        all_blocks_corrupt += falling_ratio(t_e, n_e, union.count_ones() as usize);
        count += 1;
    }
    all_blocks_corrupt /= rat(count);
    let q = padding_all_corrupt(n_e, t_e, l, c);
    let mut p = all_blocks_corrupt;
    for _ in 0..h {
        p *= &q;
    }
    Ok(BigRational::one() - p)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Whether the closed form's independence assumption holds: honest step-1
/// blocks never overlap and its factorial arguments stay non-negative.
pub fn closed_form_valid(n_e: usize, n_o: usize, t_o: usize, l: usize) -> bool {
    let c = ceil_div(n_e, n_o);
    let h = n_o - t_o;
    l >= c && (h <= 1 || n_o * c == n_e)
}

pub fn cover_secure_probability(n_e: usize, n_o: usize, t_e: usize, t_o: usize, l: usize) -> Result<CoverProbability, PreprocError> {
    let closed = cover_closed_form(n_e, n_o, t_e, t_o, l)?;
    let clamp = |x: f64| x.clamp(0.0, 1.0);
    let closed_f = clamp(closed.to_f64().unwrap_or(f64::NAN));
    if closed_form_valid(n_e, n_o, t_o, l) {
        Ok(CoverProbability { value: closed_f, exact: closed, formula: CoverFormula::ClosedForm, closed_form: closed_f })
    } else {
        let exact = cover_exact_probability(n_e, n_o, t_e, t_o, l)?;
        Ok(CoverProbability {
            value: clamp(exact.to_f64().unwrap_or(f64::NAN)),
            exact,
            formula: CoverFormula::ExactFallback,
            closed_form: closed_f,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub successes: u64,
    pub trials: u64,
    /// 95% Wilson interval.
    pub ci_low: f64,
    pub ci_high: f64,
}

impl McEstimate {
    /// Whether `p` lies within `k` binomial standard deviations of the estimate.
    pub fn within_sigmas(&self, p: f64, k: f64) -> bool {
        let sd = (p * (1.0 - p) / self.trials as f64).sqrt();
        (self.estimate - p).abs() <= k * sd + 1e-12
    }
}

pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let d = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / d;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / d;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Fraction of sampled (cover, corruption) pairs that are secure.
pub fn mc_cover_probability(
    n_e: usize,
    n_o: usize,
    t_e: usize,
    t_o: usize,
    l: usize,
    trials: u64,
    seed: u64,
) -> Result<McEstimate, PreprocError> {
    let c = check_cover_params(n_e, n_o, l)?;
    check_corruption(n_e, n_o, t_e, t_o)?;
    if trials == 0 {
        return Err(PreprocError::Infeasible("no trials".into()));
    }
    let mut rng = SmallRng::seed_from_u64(seed);
    let mut masks = Vec::with_capacity(n_o);
    let mut successes = 0u64;
    let all_e = full_mask(n_e);
    for _ in 0..trials {
        sample_cover_masks(&mut rng, n_e, n_o, l, c, &mut masks);
        let bad_e = sample_mask(&mut rng, all_e, t_e);
        let bad_o = sample_mask(&mut rng, full_mask(n_o), t_o);
        let honest_e = !bad_e & all_e;
        if masks.iter().enumerate().any(|(k, &m)| bad_o & (1 << k) == 0 && m & honest_e != 0) {
            successes += 1;
        }
    }
    let (ci_low, ci_high) = wilson_interval(successes, trials, 1.96);
    Ok(McEstimate { estimate: successes as f64 / trials as f64, successes, trials, ci_low, ci_high })
}

// ---- Sybil deposits

/// Settles each miner's deposit: confiscated when it misbehaved, returned otherwise.
pub fn settle_deposits(
    ledger: &mut crate::chain::Ledger,
    deposits: &[crate::chain::DepositRecord],
    misbehaving: &[crate::transport::PartyId],
) -> Result<Vec<crate::chain::DepositRecord>, crate::chain::ChainError> {
    use crate::chain::{manage_deposit, DepositEvent};
    deposits
        .iter()
        .map(|d| {
            let ev = if misbehaving.contains(&d.party) { DepositEvent::Misbehavior } else { DepositEvent::Completion };
            manage_deposit(ledger, d, ev)
        })
        .collect()
}
