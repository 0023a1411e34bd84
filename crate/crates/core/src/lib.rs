//! Factual-precision scoring for long-form generations that mention ambiguous
//! entities.
//!
//! The crate computes FActScore (any-support precision over atomic facts) and
//! D-FActScore, which groups facts by the individual a reader would perceive
//! and verifies each group only against the single knowledge-source entity it
//! links to. Supporting modules cover corpus ingestion, lexical retrieval,
//! LLM-judge clients with replayable transcripts, biography generation,
//! human-annotation bookkeeping and agreement analysis.

pub mod analysis;
pub mod annotation;
pub mod generation;
pub mod judge;
pub mod knowledge;
pub mod pipeline;
pub mod retrieval;
pub mod scoring;
pub mod text;
pub mod types;

pub use scoring::{
    categorize, citation_recall, count_distinct_entities, d_fact_score, fact_score, ScoreError,
};
pub use types::{
    AtomicFact, Category, EntityRef, FactGroup, FactId, FactLabel, Fraction, GroupLink, PageId,
    ParagraphReport, SentenceCitationRecord,
};
