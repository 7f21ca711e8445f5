//! Experiment harness for random causal maps: configuration, seeded parallel
//! trials, result files and SVG rendering.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod render;

use std::time::Instant;

use causal_core::rng::rng_from_seed;
use causal_core::{build_causal, build_slice, CausalMap, LazyMap, OffspringDistribution, PlaneTree};
use serde::{Deserialize, Serialize};

pub use config::{Experiment, ExperimentConfig, Overrides};
pub use error::{CliError, Result};
pub use experiment::{Metric, Outcome, Summary};

/// Run the configured experiment, write its files and return the summary.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Summary> {
    let start = Instant::now();
    let out = experiment::run(cfg)?;
    output::write_outcome(cfg, &out, start.elapsed().as_secs_f64())?;
    Ok(out.summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Causal,
    Slice,
    Halfplane,
}

/// A finite map of the given model up to height `depth`. Causal maps and
/// slices come from a tree conditioned to reach `depth`; half-plane windows
/// hold trees `-window..=window`.
pub fn sample_map(model: Model, d: &OffspringDistribution, depth: usize, window: usize, seed: u64) -> Result<CausalMap> {
    match model {
        Model::Causal | Model::Slice => {
            let t = PlaneTree::sample_gw_survived(d, depth, &mut rng_from_seed(seed))?;
            Ok(if model == Model::Causal { build_causal(&t) } else { build_slice(&t)? })
        }
        Model::Halfplane => Ok(LazyMap::half_plane(d, seed)?.snapshot(depth, window)?),
    }
}
