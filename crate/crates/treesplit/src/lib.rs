//! Random balanced partitions of lattice regions by tree splitting.
//!
//! The core primitive draws a spanning tree of a region, weighted like a
//! uniform spanning tree, conditioned on admitting an edge whose removal
//! splits the vertex weight in half. Rather than rejection-sampling whole
//! trees, the sampler grows the tree with loop-erased random walks in the
//! wired dual and abandons unhelpful growth early, which keeps expected
//! work linear in the region size. On top of that sit a relaxed q-balanced
//! variant that also counts its candidate edges, a plain spanning-tree
//! sampler, and recombination chain drivers for multi-district plans.

pub mod batch;
pub mod chains;
pub mod graph;
pub mod lattice;
pub mod oracle;
pub mod policy;
pub mod walks;
pub mod region;
pub mod region_tree;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use batch::{balanced_cost, dual_wilson_cost, run_batch, ust_cost, CostPoint};
pub use chains::{
    initial_plan, recom_step, revrecom_step, run_chain, run_experiment, ChainError, ChainStats,
    ExperimentConfig, InitKind, Method, Plan, StepOutcome, TrialRow,
};
pub use lattice::{Lattice, LatticeParams, Z2};
pub use policy::{PolicyMode, PolicyParams};
pub use region::{build_grid_region, grid_block, PlanarRegion, RegionError};
pub use rng::WalkRng;
pub use sampler::{
    sample_balanced, sample_q_balanced, sample_ust, Partition2, SampleError, SampleOutcome,
    SampleStats, SamplerConfig,
};
