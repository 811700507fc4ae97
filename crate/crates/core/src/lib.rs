//! Verifiable federated learning: committed client updates, a simulated
//! confidential aggregator with a checkable aggregation proof, and a
//! simulated permissioned ledger that gates, records and audits every round.

pub mod adversary;
pub mod crypto;
pub mod encoding;
pub mod fl;
mod hexser;
pub mod ledger;
pub mod protocol;
pub mod session;
pub mod wire;

/// The guide's code blocks, compiled and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/encoding.md")]
    mod encoding {}
    #[doc = include_str!("../../../book/src/commitments.md")]
    mod commitments {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    mod protocol {}
    #[doc = include_str!("../../../book/src/ledger.md")]
    mod ledger {}
    #[doc = include_str!("../../../book/src/adversary.md")]
    mod adversary {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
