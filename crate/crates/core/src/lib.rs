//! Session-level search intent detection and knowledge-gain prediction.
//!
//! The crate turns raw behavioral search logs into labeled sessions, computes
//! fixed-catalog feature vectors, and trains/evaluates six classifier families
//! implemented from scratch:
//!
//! ```text
//! ingest ─▶ segment ─▶ features ─▶ classifiers ─▶ eval (grid search, report, IG ranking)
//!                                        ▲
//!                          knowledge ────┘ (pre/post test scores → 3-class labels)
//! ```
//!
//! `synth` produces seeded synthetic corpora in the same file formats so the
//! whole pipeline can be exercised without the original annotated logs.
//!
//! Data-parallel loops (random-forest trees, grid-search cells, per-session
//! extraction and generation) run on rayon when the `rayon` feature is on and
//! fall back to plain iterators otherwise. Results are identical either way.

pub mod classifiers;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod knowledge;
pub mod model;
pub mod par;
pub mod segment;
pub mod synth;

mod error;

pub use error::Error;

pub use classifiers::{predict, ClassScores, Dataset, Family, Hyperparams, ModelArtifact};
pub use eval::{evaluate, grid_search, information_gain_ranking, stratified_kfold, EvalReport};
pub use features::{extract_intent_vector, extract_knowledge_vector, FeatureCatalog, FeatureVector};
pub use ingest::{build_corpus, load_labels, parse_event_log, write_event_log, Corpus};
pub use model::{validate_session, Event, EventPayload, IntentClass, Session};
pub use segment::{segment_by_gap, GapPolicy};

pub type Result<T, E = Error> = std::result::Result<T, E>;
