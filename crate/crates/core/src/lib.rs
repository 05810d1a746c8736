//! Private and verifiable smart contracts at desk scale.
//!
//! The crate bundles every piece needed to run a smart contract as a secure
//! computation and to check it before it runs:
//!
//! * [`circuit`]: boolean circuits, a gadget compiler and the plaintext evaluator
//!   used as the correctness oracle for every secure evaluation.
//! * [`garble`] and [`ot`]: a free-XOR, point-and-permute Yao garbling scheme and
//!   1-out-of-2 oblivious transfer.
//! * [`transport`]: a deterministic in-memory network with transcripts.
//! * [`chain`]: an append-only ledger with quorum consensus, an encrypted oracle
//!   call pattern, gas arithmetic and deposits.
//! * [`mpcrun`]: two-node Yao execution of a contract with results committed to
//!   the ledger.
//! * [`outsource`]: server-aided execution for offline parties using PRF-encoded
//!   inputs and pivot tables.
//! * [`preproc`]: BDOZ/SPDZ authenticated shares, resharing along a cover and
//!   the secure-cover probability.
//! * [`verify`]: annotated contracts, verification levels, certificates and
//!   trusted-signer policies.
//! * [`contracts`]: the registered financial contracts with plaintext oracles.

pub mod chain;
pub mod circuit;
pub mod contracts;
pub mod crypto;
pub mod garble;
pub mod group;
pub mod mpcrun;
pub mod ot;
pub mod outsource;
pub mod preproc;
pub mod transport;
pub mod verify;
