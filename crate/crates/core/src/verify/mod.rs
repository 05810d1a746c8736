//! Contract verification: annotated sources, the four verification levels,
//! certificates, trusted signers and local security policies.
//!
//! | level | evidence shipped                | check                                  |
//! |-------|---------------------------------|----------------------------------------|
//! | 1     | annotated source, signature     | signatures over the package digest     |
//! | 2     | as 1                            | sampled runtime assertion checking     |
//! | 3     | as 2 plus VC digests and proofs | regenerate VCs, re-run bounded proofs  |
//! | 4     | as 3 plus a certificate         | certificate binding and signature      |
//!
//! Each level also runs the checks of the levels below it.

pub mod interp;
pub mod lang;
pub mod vc;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use interp::{check_program_level2, run_case, ArgValue, Case, Counterexample, Level2Report, Outcome, DEFAULT_BOUND};
pub use lang::{parse_annotations, parse_program, Annotation, AnnotationKind, Expr, LangError, Program};
pub use vc::{discharge_bounded, discharge_one, gen_vcs, DischargeResult, DischargeTranscript, Vc, DEFAULT_DISCHARGE_BOUND};

use crate::crypto::Digest;
use crate::mpcrun::Clearance;

/// Runtime checks per method in level-2 verification.
pub const LEVEL2_SAMPLES: u64 = 1000;
/// Certified code grows by this factor over the uncertified size.
pub const CERTIFICATE_OVERHEAD: f64 = 1.30;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VerifyError {
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error("verification level must be 1-4, got {0}")]
    Level(u8),
    #[error("level {0} needs proofs")]
    MissingProofs(u8),
    #[error("condition {0} is not discharged")]
    Unproven(String),
    #[error("embedded proofs do not match the source")]
    DigestMismatch,
    #[error("malformed {0}")]
    Format(String),
}

// ---- signatures

/// A named signing key: contract authors and trusted third parties.
pub struct SigningIdentity {
    pub id: String,
    key: SigningKey,
}

impl SigningIdentity {
    pub fn from_seed(id: &str, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        SigningIdentity { id: id.to_string(), key: SigningKey::generate(&mut rng) }
    }

    pub fn public_key(&self) -> [u8; 32] {
        self.key.verifying_key().to_bytes()
    }

    fn sign(&self, d: &Digest) -> Vec<u8> {
        self.key.sign(&d.0).to_bytes().to_vec()
    }
}

fn signature_valid(public_key: &[u8], signature: &[u8], d: &Digest) -> bool {
    let Ok(pk) = <[u8; 32]>::try_from(public_key) else { return false };
    let Ok(sig) = <[u8; 64]>::try_from(signature) else { return false };
    let Ok(vk) = VerifyingKey::from_bytes(&pk) else { return false };
    vk.verify(&d.0, &Signature::from_bytes(&sig)).is_ok()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackageSignature {
    pub signer: String,
    #[serde(with = "hex::serde")]
    pub public_key: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub signature: Vec<u8>,
}

/// Signer id to public key.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TrustStore {
    pub keys: BTreeMap<String, [u8; 32]>,
}

impl TrustStore {
    pub fn insert(&mut self, id: &str, key: [u8; 32]) {
        self.keys.insert(id.to_string(), key);
    }

    pub fn with(mut self, who: &SigningIdentity) -> Self {
        self.insert(&who.id, who.public_key());
        self
    }

    /// One `id hexkey` pair per line; `#` starts a comment.
    pub fn to_text(&self) -> String {
        self.keys.iter().map(|(id, k)| format!("{id} {}\n", hex::encode(k))).collect()
    }

    pub fn from_text(text: &str) -> Result<Self, VerifyError> {
        let mut store = TrustStore::default();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let bad = || VerifyError::Format(format!("trust store line `{line}`"));
            let (id, key) = line.split_once(char::is_whitespace).ok_or_else(bad)?;
            let bytes = hex::decode(key.trim()).map_err(|_| bad())?;
            store.insert(id, bytes.try_into().map_err(|_| bad())?);
        }
        Ok(store)
    }
}

// ---- proofs and certificates

/// Level-3 evidence: every condition with its discharge transcript.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofSet {
    pub bound: i64,
    pub entries: Vec<DischargeTranscript>,
}

impl ProofSet {
    pub fn serialized(&self) -> String {
        serde_json::to_string(self).expect("proof set serialises")
    }

    pub fn all_discharged(&self) -> bool {
        self.entries.iter().all(|e| e.result == DischargeResult::Discharged)
    }
}

pub fn prove(prog: &Program, bound: i64) -> ProofSet {
    ProofSet { bound, entries: discharge_bounded(&gen_vcs(prog), bound) }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub source_digest: Digest,
    pub vc_digests: Vec<Digest>,
    pub transcripts_digest: Digest,
    pub proof_bytes: u64,
    pub size_bytes: u64,
    pub signer: String,
    #[serde(with = "hex::serde")]
    pub public_key: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub signature: Vec<u8>,
}

impl Certificate {
    fn digest(&self) -> Digest {
        let mut parts: Vec<Vec<u8>> = vec![b"pvsc-certificate".to_vec(), self.source_digest.0.to_vec()];
        parts.extend(self.vc_digests.iter().map(|d| d.0.to_vec()));
        parts.push(self.transcripts_digest.0.to_vec());
        parts.push(self.proof_bytes.to_le_bytes().to_vec());
        parts.push(self.size_bytes.to_le_bytes().to_vec());
        parts.push(self.signer.as_bytes().to_vec());
        parts.push(self.public_key.clone());
        let refs: Vec<&[u8]> = parts.iter().map(|p| p.as_slice()).collect();
        Digest::of_parts(&refs)
    }
}

pub fn certified_size(bytes: u64) -> u64 {
    (bytes as f64 * CERTIFICATE_OVERHEAD).round() as u64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PccEstimate {
    pub gen_seconds: f64,
    pub verify_seconds: f64,
    pub certified_size_bytes: f64,
}

/// Proof generation and checking times for code of `bytecode_size` bytes.
pub fn estimate_pcc_times(bytecode_size: u64) -> PccEstimate {
    let bs = bytecode_size as f64;
    PccEstimate { gen_seconds: 1.5 + bs / 1500.0, verify_seconds: 0.25 + bs / 6000.0, certified_size_bytes: CERTIFICATE_OVERHEAD * bs }
}

// ---- packages

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractPackage {
    pub level: u8,
    pub source: String,
    pub circuit_digest: Digest,
    pub proofs: Option<ProofSet>,
    pub certificate: Option<Certificate>,
    pub signatures: Vec<PackageSignature>,
}

impl ContractPackage {
    /// Builds and signs a package, generating the evidence its level requires.
    pub fn build(source: &str, circuit_digest: Digest, level: u8, author: &SigningIdentity) -> Result<Self, VerifyError> {
        if !(1..=4).contains(&level) {
            return Err(VerifyError::Level(level));
        }
        let prog = parse_program(source)?;
        let mut pkg = ContractPackage {
            level,
            source: source.to_string(),
            circuit_digest,
            proofs: None,
            certificate: None,
            signatures: vec![],
        };
        if level >= 3 {
            pkg.proofs = Some(prove(&prog, DEFAULT_DISCHARGE_BOUND));
        }
        if level == 4 {
            pkg.certificate = Some(make_certificate(&pkg, author)?);
        }
        pkg.sign(author);
        Ok(pkg)
    }

    /// Digest covered by signatures: everything except the signatures themselves.
    pub fn digest(&self) -> Digest {
        let proofs = self.proofs.as_ref().map(|p| p.serialized()).unwrap_or_default();
        let cert = self.certificate.as_ref().map(|c| serde_json::to_string(c).expect("serialises")).unwrap_or_default();
        Digest::of_parts(&[
            b"pvsc-package",
            &[self.level],
            self.source.as_bytes(),
            &self.circuit_digest.0,
            proofs.as_bytes(),
            cert.as_bytes(),
        ])
    }

    pub fn sign(&mut self, who: &SigningIdentity) {
        let d = self.digest();
        self.signatures.retain(|s| s.signer != who.id);
        self.signatures.push(PackageSignature { signer: who.id.clone(), public_key: who.public_key().to_vec(), signature: who.sign(&d) });
    }

    /// Text form: a header, the source with its byte length, then optional
    /// proof and certificate sections as JSON lines.
    pub fn to_text(&self) -> String {
        let mut s = format!("pvsc-package 1\nlevel {}\ncircuit {}\n", self.level, self.circuit_digest.to_hex());
        s.push_str(&format!("source-digest {}\n", Digest::of(self.source.as_bytes()).to_hex()));
        for sig in &self.signatures {
            s.push_str(&format!("signature {} {} {}\n", sig.signer, hex::encode(&sig.public_key), hex::encode(&sig.signature)));
        }
        s.push_str(&format!("source {}\n{}\n", self.source.len(), self.source));
        if let Some(p) = &self.proofs {
            s.push_str(&format!("proofs {}\n", p.serialized()));
        }
        if let Some(c) = &self.certificate {
            s.push_str(&format!("certificate {}\n", serde_json::to_string(c).expect("serialises")));
        }
        s.push_str("end\n");
        s
    }

    pub fn from_text(text: &str) -> Result<Self, VerifyError> {
        let bad = |m: &str| VerifyError::Format(format!("package: {m}"));
        let mut rest = text;
        let mut line = || -> Result<&str, VerifyError> {
            let (l, r) = rest.split_once('\n').ok_or_else(|| bad("truncated"))?;
            rest = r;
            Ok(l)
        };
        if line()? != "pvsc-package 1" {
            return Err(bad("unknown header"));
        }
        let mut level = None;
        let mut circuit = None;
        let mut signatures = Vec::new();
        let source = loop {
            let l = line()?;
            let (key, val) = l.split_once(' ').ok_or_else(|| bad("header line"))?;
            match key {
                "level" => level = Some(val.parse::<u8>().map_err(|_| bad("level"))?),
                "circuit" => circuit = Some(Digest::from_hex(val).ok_or_else(|| bad("circuit digest"))?),
                "source-digest" => {}
                "signature" => {
                    let f: Vec<&str> = val.split(' ').collect();
                    let [signer, pk, sig] = f[..] else { return Err(bad("signature line")) };
                    signatures.push(PackageSignature {
                        signer: signer.to_string(),
                        public_key: hex::decode(pk).map_err(|_| bad("signature key"))?,
                        signature: hex::decode(sig).map_err(|_| bad("signature"))?,
                    });
                }
                "source" => {
                    let n: usize = val.parse().map_err(|_| bad("source length"))?;
                    let src = rest.get(..n).ok_or_else(|| bad("source truncated"))?.to_string();
                    rest = rest[n..].strip_prefix('\n').ok_or_else(|| bad("source terminator"))?;
                    break src;
                }
                _ => return Err(bad("unknown header field")),
            }
        };
        let mut proofs = None;
        let mut certificate = None;
        for l in rest.lines() {
            match l.split_once(' ') {
                Some(("proofs", j)) => proofs = Some(serde_json::from_str(j).map_err(|_| bad("proofs"))?),
                Some(("certificate", j)) => certificate = Some(serde_json::from_str(j).map_err(|_| bad("certificate"))?),
                None if l == "end" => {
                    return Ok(ContractPackage {
                        level: level.ok_or_else(|| bad("missing level"))?,
                        source,
                        circuit_digest: circuit.ok_or_else(|| bad("missing circuit"))?,
                        proofs,
                        certificate,
                        signatures,
                    })
                }
                _ => return Err(bad("unknown section")),
            }
        }
        Err(bad("missing end"))
    }
}

/// Binds the package's VC digests and proof transcripts to its source.
pub fn make_certificate(pkg: &ContractPackage, signer: &SigningIdentity) -> Result<Certificate, VerifyError> {
    let proofs = pkg.proofs.as_ref().ok_or(VerifyError::MissingProofs(pkg.level))?;
    let prog = parse_program(&pkg.source)?;
    let vcs = gen_vcs(&prog);
    if !proofs_match(&vcs, proofs) {
        return Err(VerifyError::DigestMismatch);
    }
    if let Some(e) = proofs.entries.iter().find(|e| e.result != DischargeResult::Discharged) {
        return Err(VerifyError::Unproven(e.id.clone()));
    }
    let serialized = proofs.serialized();
    let mut cert = Certificate {
        source_digest: Digest::of(pkg.source.as_bytes()),
        vc_digests: vcs.iter().map(Vc::digest).collect(),
        transcripts_digest: Digest::of(serialized.as_bytes()),
        proof_bytes: serialized.len() as u64,
        size_bytes: certified_size(serialized.len() as u64),
        signer: signer.id.clone(),
        public_key: signer.public_key().to_vec(),
        signature: vec![],
    };
    cert.signature = signer.sign(&cert.digest());
    Ok(cert)
}

fn proofs_match(vcs: &[Vc], proofs: &ProofSet) -> bool {
    vcs.len() == proofs.entries.len() && vcs.iter().zip(&proofs.entries).all(|(v, e)| v.id == e.id && v.digest() == e.digest)
}

/// Recomputes everything the certificate binds, then checks its signature.
pub fn check_certificate(pkg: &ContractPackage) -> bool {
    let (Some(cert), Some(proofs)) = (&pkg.certificate, &pkg.proofs) else { return false };
    if cert.source_digest != Digest::of(pkg.source.as_bytes()) {
        return false;
    }
    let Ok(prog) = parse_program(&pkg.source) else { return false };
    let vcs = gen_vcs(&prog);
    let serialized = proofs.serialized();
    proofs_match(&vcs, proofs)
        && cert.vc_digests == vcs.iter().map(Vc::digest).collect::<Vec<_>>()
        && cert.transcripts_digest == Digest::of(serialized.as_bytes())
        && cert.proof_bytes == serialized.len() as u64
        && cert.size_bytes == certified_size(cert.proof_bytes)
        && proofs.all_discharged()
        && signature_valid(&cert.public_key, &cert.signature, &cert.digest())
}

/// Level-2 runtime assertion checking of the package source.
pub fn check_level2(pkg: &ContractPackage, budget: u64, seed: u64) -> Result<Level2Report, VerifyError> {
    let prog = parse_program(&pkg.source)?;
    Ok(check_program_level2(&prog, budget, seed))
}

// ---- policies and verdicts

/// A party's local acceptance policy.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SecurityProfile {
    pub mandatory_signers: BTreeSet<String>,
    pub required_spec_ids: BTreeSet<String>,
    /// Accept packages without discharged proofs.
    pub accept_unproven: bool,
    pub min_level: u8,
}

impl Default for SecurityProfile {
    fn default() -> Self {
        SecurityProfile { mandatory_signers: BTreeSet::new(), required_spec_ids: BTreeSet::new(), accept_unproven: true, min_level: 1 }
    }
}

impl SecurityProfile {
    pub fn permissive() -> Self {
        Self::default()
    }

    pub fn from_toml(text: &str) -> Result<Self, VerifyError> {
        toml::from_str(text).map_err(|e| VerifyError::Format(format!("policy: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reason {
    pub code: String,
    pub detail: String,
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.detail.is_empty() {
            write!(f, "{}", self.code)
        } else {
            write!(f, "{}: {}", self.code, self.detail)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub ok: bool,
    pub level: u8,
    pub package: Digest,
    pub reasons: Vec<Reason>,
    pub counterexample: Option<Counterexample>,
    pub vc_failures: Vec<DischargeTranscript>,
}

impl Verdict {
    pub fn has(&self, code: &str) -> bool {
        self.reasons.iter().any(|r| r.code == code)
    }

    fn fail(&mut self, code: &str, detail: impl Into<String>) {
        self.ok = false;
        self.reasons.push(Reason { code: code.to_string(), detail: detail.into() });
    }

    /// Clearance to run the contract, when verification succeeded.
    pub fn clearance(&self) -> Option<Clearance> {
        self.ok.then(|| Clearance::verified(self.package, self.level))
    }
}

fn level2_seed(d: &Digest) -> u64 {
    u64::from_le_bytes(d.0[..8].try_into().expect("8 bytes"))
}

/// Standard verification: the level's checks, then the local policy.
pub fn verify_standard(pkg: &ContractPackage, policy: &SecurityProfile) -> Verdict {
    let digest = pkg.digest();
    let mut v = Verdict { ok: true, level: pkg.level, package: digest, reasons: vec![], counterexample: None, vc_failures: vec![] };
    if !(1..=4).contains(&pkg.level) {
        v.fail("bad-level", pkg.level.to_string());
        return v;
    }
    let prog = match parse_program(&pkg.source) {
        Ok(p) => p,
        Err(e) => {
            v.fail("parse-error", e.to_string());
            return v;
        }
    };
    // Level 1.
    if pkg.signatures.is_empty() {
        v.fail("missing-signature", "");
    }
    for s in &pkg.signatures {
        if !signature_valid(&s.public_key, &s.signature, &digest) {
            v.fail("bad-signature", s.signer.clone());
        }
    }
    // Level 2.
    if pkg.level >= 2 {
        let report = check_program_level2(&prog, LEVEL2_SAMPLES, level2_seed(&digest));
        if let Some(cx) = report.counterexample {
            v.fail("level2-counterexample", cx.to_string());
            v.counterexample = Some(cx);
        }
    }
    // Level 3: regenerate and re-check the embedded proofs.
    if pkg.level >= 3 {
        match &pkg.proofs {
            None => v.fail("missing-proofs", ""),
            Some(p) => {
                let vcs = gen_vcs(&prog);
                if !proofs_match(&vcs, p) {
                    v.fail("vc-mismatch", "embedded conditions differ from the source");
                } else {
                    let rechecked = discharge_bounded(&vcs, p.bound);
                    if rechecked != p.entries {
                        v.fail("proof-mismatch", "embedded transcripts do not replay");
                    }
                    for t in rechecked {
                        match t.result {
                            DischargeResult::Discharged => {}
                            DischargeResult::Counterexample { .. } => {
                                v.fail("vc-counterexample", format!("{}: {}", t.id, t.result));
                                v.vc_failures.push(t);
                            }
                            DischargeResult::TooLarge => {
                                if !policy.accept_unproven {
                                    v.fail("undischarged-vc", t.id.clone());
                                }
                                v.vc_failures.push(t);
                            }
                        }
                    }
                }
            }
        }
    }
    // Level 4.
    if pkg.level == 4 {
        if pkg.certificate.is_none() {
            v.fail("missing-certificate", "");
        } else if !check_certificate(pkg) {
            v.fail("bad-certificate", "");
        }
    }
    // Local policy.
    if pkg.level < policy.min_level {
        v.fail("level-below-policy", format!("{} < {}", pkg.level, policy.min_level));
    }
    if !policy.accept_unproven && (pkg.level < 3 || prog.annotations().is_empty()) {
        v.fail("unproven", "policy requires discharged proofs of annotated code");
    }
    v
}

/// Extended verification: standard verification plus mandatory trusted
/// signatures and required specifications.
pub fn verify_extended(pkg: &ContractPackage, policy: &SecurityProfile, trusted: &TrustStore) -> Verdict {
    let mut v = verify_standard(pkg, policy);
    let digest = pkg.digest();
    for id in &policy.mandatory_signers {
        let Some(key) = trusted.keys.get(id) else {
            v.fail("missing-trusted-signature", format!("{id} is not in the trust store"));
            continue;
        };
        let sigs: Vec<&PackageSignature> = pkg.signatures.iter().filter(|s| &s.signer == id).collect();
        if sigs.is_empty() {
            v.fail("missing-trusted-signature", id.clone());
        } else if !sigs.iter().any(|s| s.public_key == key.as_slice()) {
            v.fail("missing-trusted-signature", format!("{id} signed with an untrusted key"));
        } else if !sigs.iter().any(|s| s.public_key == key.as_slice() && signature_valid(key, &s.signature, &digest)) {
            v.fail("missing-trusted-signature", format!("{id}: invalid"));
        }
    }
    let proved: BTreeSet<&str> = pkg
        .proofs
        .iter()
        .flat_map(|p| p.entries.iter())
        .filter(|e| e.result == DischargeResult::Discharged)
        .map(|e| e.tag.as_str())
        .collect();
    for spec in &policy.required_spec_ids {
        if !proved.contains(spec.as_str()) {
            v.fail("missing-spec", spec.clone());
        }
    }
    v
}
