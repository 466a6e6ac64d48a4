//! Evaluation: held-out splits, ranking metrics, synthetic corpora.

mod metrics;
mod split;
mod synth;

pub use metrics::{
    average_precision_at, evaluate, ndcg_at, precision_at, reciprocal_rank, ApDenominator, MetricsReport, Qrels,
    DEFAULT_KS,
};
pub use split::{make_split, Split, SplitSpec};
pub use synth::{bilingual_schema, generate_synthetic, SynthGraph, SynthSpec, BILINGUAL_SCHEMA};
