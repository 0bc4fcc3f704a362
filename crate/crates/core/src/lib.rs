//! Passive network situational awareness engine.
//!
//! Turns classic pcap captures into per-device profiles and higher level
//! insights: device discovery, policy violations, L2/L3 topology and
//! resiliency, behavior modes and occupancy.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is a pure
//! function of its input bytes and tables; reading files, parsing JSON/CSV
//! and the command line live in the `netsight` companion crate.
//!
//! Data flows through the modules in this order:
//!
//! - [`ingest`] parses the capture into [`ingest::PacketRecord`]s,
//! - [`decoders`] turns packets into flows and typed protocol events,
//! - [`pipeline`] publishes them on an in-process topic bus, binds device
//!   identities, runs the configured engine chain and composes profiles,
//! - [`analyzers`], [`policy`] and [`topology`] derive claims, violations
//!   and graphs,
//! - [`trafficgen`] writes labeled synthetic captures for testing all of the
//!   above.
#![no_std]
#![warn(rust_2018_idioms, missing_debug_implementations)]

extern crate alloc;

pub mod analyzers;
pub mod decoders;
pub mod ingest;
pub mod knowledge;
pub mod pipeline;
pub mod policy;
pub mod topology;
pub mod trafficgen;
mod types;

pub use types::{is_internal_ip, MacAddr, ParseMacError, Timestamp};
