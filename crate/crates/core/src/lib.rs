//! Web access log mining for next-page prediction and prefetching.
//!
//! Raw logs are filtered and split into sessions, the sessions are
//! clustered and one working cluster selected. Page frequencies (level 1)
//! and adjacent page pairs (level 2) are each pruned by a vague-set score,
//! and the surviving pairs become association rules that drive next-page
//! prediction. [`eval`] measures the result and replays it through a
//! prefetch cache; [`synth`] generates logs with a known answer.

pub mod cluster;
pub mod config;
pub mod eval;
pub mod ingest;
pub mod markov;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod rules;
pub mod session;
pub mod synth;
pub mod vague;

pub use config::ModelConfig;
pub use eval::{evaluate, simulate_prefetch_cache, split_sessions, EvalReport};
pub use ingest::{LogFormat, LogRecord, PageCatalog, PageId};
pub use model::{load_model, save_model, PredictionModel};
pub use pipeline::{train, Dataset, PipelineError, TrainSummary, Trained};
pub use session::Session;
pub use synth::{generate_synthetic_log, SyntheticLog, SyntheticSpec};
