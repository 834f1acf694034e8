//! Annotation engine for brain cell-type marker gene sets.
//!
//! The crate is organised around the stages of the annotation workflow:
//!
//! * [`ontology`] parses the Gene Ontology, answers graph-distance queries and
//!   turns terms into prose ("verbalization").
//! * [`corpus`] ingests gene registries, gene→PubMed links, abstracts, GMT
//!   libraries, atlas cluster metadata and derives Top-20 DEG marker sets.
//! * [`retrieval`] is the literature agent: candidate collection, semantic
//!   ranking and TopPM / TopGene evidence selection.
//! * [`agents`] holds the query, RAG and cell-summary agents plus the
//!   end-to-end pipeline.
//! * [`evaluation`] reproduces the measurement apparatus (ROUGE, GO-topology
//!   hit rate, random-BP baseline, over-representation, word frequencies).
//! * [`store`] persists everything append-only and serves portal searches.
//!
//! Language-model and embedding providers sit behind the traits in
//! [`gateway`]; deterministic mock implementations ship with the crate so the
//! whole pipeline runs offline.

pub mod agents;
pub mod clock;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod gateway;
pub mod ontology;
pub mod prompts;
pub mod retrieval;
pub mod store;
pub mod text;

pub use error::{Error, Result};
