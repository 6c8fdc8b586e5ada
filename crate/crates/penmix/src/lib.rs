//! Command-line front end for `penmix-core`: CSV ingestion, the JSON file
//! formats, SVG plots, a parallel study runner and the `penmix` subcommands.
//!
//! Every JSON document written here is read back by the matching reader in
//! [`wire`] without loss. Non-finite floats are written as the strings
//! `"inf"`, `"-inf"` and `"nan"`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod io;
pub mod plot;
pub mod runner;
pub mod wire;

pub use penmix_core as core;
