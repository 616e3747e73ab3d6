//! Evaluation harness. A policy picks a region per sample and the grounder
//! answers inside it; accuracy is point-in-box on the global point.

mod bench;
mod grounder;
mod samples;
mod synth;

use std::path::Path;
use std::time::Duration;

use thiserror::Error;

pub use bench::{
    action_lattice, baseline_policies, evaluate_sample, forward_focus_chain, reward_lattice, run_benchmark, Accuracy,
    AccuracyRow, BenchOptions, EvalContext, EvalRecord, EvalReport, Policy,
};
pub use grounder::{
    Grounder, GrounderConfig, GrounderError, GrounderKind, GroundingRequest, RemoteGrounder, ScriptedGrounder,
};
pub use samples::{load_samples, parse_samples, samples_to_json, DataType, Sample, SampleRecord, SampleSchema};
pub use synth::{generate_synthetic, GeneratorSpec, Profile, SyntheticCorpus};

use crate::config::{ProviderConfig, ProviderKind};
use crate::perceptor::{FileEmbeddings, HashingEmbedder, ProviderError, RelevanceProvider, RemoteEmbedder};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed sample file: {0}")]
    Parse(String),
    #[error("sample {id}: {message}")]
    InvalidSample { id: usize, message: String },
    #[error("generator: {0}")]
    Generator(String),
    #[error("no samples to evaluate")]
    EmptyBenchmark,
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl HarnessError {
    fn in_file(self, path: &Path) -> Self {
        match self {
            HarnessError::Parse(m) => HarnessError::Parse(format!("{}: {m}", path.display())),
            HarnessError::InvalidSample { id, message } => {
                HarnessError::InvalidSample { id, message: format!("{message} (in {})", path.display()) }
            }
            other => other,
        }
    }
}

pub fn build_provider(config: &ProviderConfig) -> Result<Box<dyn RelevanceProvider>, ProviderError> {
    Ok(match config.kind {
        ProviderKind::Mock => Box::new(HashingEmbedder::new(config.mock_dimension)),
        ProviderKind::File => {
            let path = config.embeddings_file.as_deref().unwrap_or_default();
            Box::new(FileEmbeddings::load(path)?)
        }
        ProviderKind::Remote => Box::new(RemoteEmbedder::new(
            config.endpoint.clone().unwrap_or_default(),
            Duration::from_millis(config.timeout_ms),
        )),
    })
}

pub fn build_grounder(config: &GrounderConfig) -> Box<dyn Grounder> {
    match config.kind {
        GrounderKind::Scripted => Box::new(ScriptedGrounder::from_config(config)),
        GrounderKind::Remote => Box::new(RemoteGrounder::new(
            config.endpoint.clone().unwrap_or_default(),
            Duration::from_millis(config.timeout_ms),
            config.retries,
        )),
    }
}
