//! Toolkit for building crosslingual evaluation datasets and running
//! multiple-choice, open-ended and embedding-probe evaluations against models
//! reached over a small HTTP protocol (or in-process mocks).

pub mod cli;
pub mod conformance;
pub mod datamodel;
pub mod embedprobe;
pub mod evalharness;
pub mod http;
pub mod plot;
pub mod retrieval;
pub mod rng;
pub mod translate;
pub mod unitsplit;
pub mod variantgen;
