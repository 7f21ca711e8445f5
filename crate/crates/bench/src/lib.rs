//! Fixtures shared by the benchmarks.

use causal_core::electric::ResistanceNetwork;
use causal_core::rng::rng_from_seed;
use causal_core::{build_slice, CausalMap, OffspringDistribution, PlaneTree};

/// The law with weights 1/4 on 0 and 3/4 on 2 children.
pub fn leafy_law() -> OffspringDistribution {
    OffspringDistribution::new(&[(0, 0.25), (2, 0.75)]).expect("valid law")
}

/// The law with weights 1/2 on 1 and 1/2 on 2 children.
pub fn leafless_law() -> OffspringDistribution {
    OffspringDistribution::new(&[(1, 0.5), (2, 0.5)]).expect("valid law")
}

pub fn slice(depth: usize, seed: u64) -> CausalMap {
    let t = PlaneTree::sample_gw_survived(&leafy_law(), depth, &mut rng_from_seed(seed)).expect("survived tree");
    build_slice(&t).expect("slice")
}

/// Unit network of a slice with the root as source and the top level as sink.
pub fn slice_network(depth: usize, seed: u64) -> ResistanceNetwork {
    let s = slice(depth, seed);
    let top = s.level(s.max_height()).to_vec();
    ResistanceNetwork::from_map(&s, &[s.root()], &top).expect("valid network")
}
