//! Shared test genotypes.

use std::sync::Arc;

use crate::cgp::{CgpConfig, Genotype, Node};

pub(crate) fn figure_pair() -> (Genotype, Genotype) {
    // Two inputs, eight nodes, arity three, all weights 1. The second
    // genotype changes function and connections of active node 3 and of
    // inactive node 8 (1-based).
    let config = Arc::new(CgpConfig::standard(2, 8, 1, 3).unwrap());
    let base: [([usize; 3], usize); 8] = [
        ([0, 1, 1], 0),
        ([0, 2, 1], 1),
        ([2, 3, 0], 3),
        ([0, 1, 0], 2),
        ([4, 3, 1], 0),
        ([6, 4, 2], 4),
        ([5, 0, 1], 1),
        ([1, 7, 6], 2),
    ];
    let build = |spec: &[([usize; 3], usize)]| {
        let nodes = spec
            .iter()
            .map(|(c, f)| Node::new(c.to_vec(), vec![1.0; 3], *f))
            .collect();
        Genotype::from_parts(Arc::clone(&config), nodes, vec![7]).unwrap()
    };
    let x = build(&base);
    let mut changed = base;
    changed[2] = ([1, 3, 1], 1);
    changed[7] = ([0, 3, 2], 4);
    (x, build(&changed))
}

