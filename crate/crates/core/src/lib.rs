//! Rybu to IMDS compiler and explicit-state deadlock checker.
//!
//! The pipeline is: Rybu source ([`rybu`]) is lowered ([`lower`]) to an IMDS
//! [`SystemModel`](imds::SystemModel) together with equivalent Dedan text
//! ([`dedan`]); the model's reachable state space is built and analysed for
//! total and partial deadlocks ([`lts`]); counterexamples and graphs are
//! rendered by [`report`].

pub mod dedan;
pub mod imds;
pub mod lower;
pub mod lts;
pub mod report;
pub mod rybu;
