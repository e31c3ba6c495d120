//! Cartesian genetic programming of feed-forward neural networks.

mod config;
mod eval;
mod genotype;
mod mutation;

pub use config::{CgpConfig, Transfer};
pub use eval::{evaluate_ann, merge_duplicates, network_evaluations, softmax, Network, Phenotype, PostTransform};
pub use genotype::{Genotype, Node};
pub use mutation::{mutate_probabilistic, mutate_single_active, Mutation};
