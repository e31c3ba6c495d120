use crate::cgp::{CgpConfig, Genotype, Node};
use crate::error::{Error, Result};

/// Largest attainable raw GD value for a configuration: per node, every
/// weight pair at opposite ends of the range plus every connection,
/// activity and function gene different, plus every output gene different.
pub fn gd_normalizer(config: &CgpConfig) -> f64 {
    let span = config.weight_span();
    let per_node = config.arity() as f64 * (span * span + 1.0) + 2.0;
    config.num_nodes() as f64 * per_node + config.num_outputs() as f64
}

/// Canonical per-node view of a genotype used by [`gd`].
#[derive(Debug, Clone, PartialEq)]
pub struct GdProfile {
    /// (connection, weight) pairs of every node, each node's block sorted by
    /// connection then weight; `arity` entries per node.
    pairs: Vec<(usize, f64)>,
    active: Vec<bool>,
    functions: Vec<usize>,
    outputs: Vec<usize>,
    normalizer: f64,
}

impl GdProfile {
    pub fn new(genotype: &Genotype) -> Self {
        let mut pairs = Vec::with_capacity(genotype.nodes().len() * genotype.config().arity());
        for node in genotype.nodes() {
            let start = pairs.len();
            pairs.extend(node.connections.iter().copied().zip(node.weights.iter().copied()));
            pairs[start..].sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        }
        Self {
            pairs,
            active: genotype.nodes().iter().map(|n: &Node| n.active).collect(),
            functions: genotype.nodes().iter().map(|n| n.function).collect(),
            outputs: genotype.outputs().to_vec(),
            normalizer: gd_normalizer(genotype.config()),
        }
    }

    /// Caller guarantees both profiles come from the same configuration.
    pub fn distance(&self, other: &GdProfile) -> f64 {
        let mut total = 0.0;
        for ((ca, wa), (cb, wb)) in self.pairs.iter().zip(&other.pairs) {
            total += (wa - wb) * (wa - wb);
            if ca != cb {
                total += 1.0;
            }
        }
        total += differ(&self.active, &other.active);
        total += differ(&self.functions, &other.functions);
        total += differ(&self.outputs, &other.outputs);
        total / self.normalizer
    }
}

fn differ<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as f64
}

/// Row-wise genotypic distance: squared weight differences plus Hamming
/// distances over connection, activity, function and output genes, with each
/// node's connections put in canonical order first. Scaled by
/// [`gd_normalizer`].
pub fn gd(x: &Genotype, y: &Genotype) -> Result<f64> {
    if !x.same_config(y) {
        return Err(Error::ConfigMismatch);
    }
    Ok(GdProfile::new(x).distance(&GdProfile::new(y)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::fixtures::figure_pair;
    use std::sync::Arc;

    #[test]
    fn identical_is_zero() {
        let (x, _) = figure_pair();
        assert_eq!(gd(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn single_function_change() {
        let (x, _) = figure_pair();
        let mut nodes = x.nodes().to_vec();
        nodes[1].function = 4;
        let y = Genotype::from_parts(Arc::clone(x.config()), nodes, x.outputs().to_vec()).unwrap();
        let dmax = gd_normalizer(x.config());
        // 8 * (3 * (4 + 1) + 2) + 1
        assert_eq!(dmax, 137.0);
        assert_eq!(gd(&x, &y).unwrap(), 1.0 / dmax);
    }

    #[test]
    fn figure_pair_stays_small() {
        let (x, y) = figure_pair();
        // Active nodes (0-based) are {0, 1, 2, 4, 5} in both genotypes.
        //   node 2: sorted conns [0,2,3] vs [1,1,3] -> 2 mismatches, function 1
        //   node 7: sorted conns [1,6,7] vs [0,2,3] -> 3 mismatches, function 1
        // Weights are all 1, so the raw distance is 7.
        let active: Vec<usize> = x.active_nodes().collect();
        assert_eq!(active, vec![0, 1, 2, 4, 5]);
        assert_eq!(y.active_nodes().collect::<Vec<_>>(), active);
        let d = gd(&x, &y).unwrap();
        assert_eq!(d, 7.0 / 137.0);
        assert!(d < 0.2);
    }

    #[test]
    fn sorting_aligns_permuted_connections() {
        let (x, _) = figure_pair();
        let mut nodes = x.nodes().to_vec();
        nodes[5].connections = vec![2, 6, 4];
        nodes[5].weights = vec![1.0, 1.0, 1.0];
        let y = Genotype::from_parts(Arc::clone(x.config()), nodes, x.outputs().to_vec()).unwrap();
        assert_eq!(gd(&x, &y).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_configs_rejected() {
        let (x, _) = figure_pair();
        let other = Arc::new(CgpConfig::standard(2, 8, 1, 2).unwrap());
        let y = Genotype::random(&other, &mut rand::thread_rng());
        assert!(matches!(gd(&x, &y), Err(Error::ConfigMismatch)));
    }
}
