use rand::Rng;

use super::genotype::Genotype;

/// Mutation operators over genotypes. Parents are never modified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mutation {
    /// Every gene is resampled independently with probability `rate`.
    Probabilistic { rate: f64 },
    /// Mutate random genes until one gene of an active node (or an output
    /// gene) has changed.
    SingleActive,
}

impl Mutation {
    pub fn apply<R: Rng + ?Sized>(&self, parent: &Genotype, rng: &mut R) -> Genotype {
        match *self {
            Mutation::Probabilistic { rate } => mutate_probabilistic(parent, rate, rng),
            Mutation::SingleActive => mutate_single_active(parent, rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Gene {
    Connection { node: usize, slot: usize },
    Weight { node: usize, slot: usize },
    Function { node: usize },
    Output { index: usize },
}

fn locate(parent: &Genotype, index: usize) -> Gene {
    let config = parent.config();
    let per_node = config.genes_per_node();
    let arity = config.arity();
    let node_genes = config.num_nodes() * per_node;
    if index >= node_genes {
        return Gene::Output {
            index: index - node_genes,
        };
    }
    let node = index / per_node;
    match index % per_node {
        k if k < arity => Gene::Connection { node, slot: k },
        k if k < 2 * arity => Gene::Weight {
            node,
            slot: k - arity,
        },
        _ => Gene::Function { node },
    }
}

fn domain_size(g: &Genotype, gene: Gene) -> Option<usize> {
    let config = g.config();
    match gene {
        Gene::Connection { node, .. } => Some(config.sources_for_node(node)),
        Gene::Weight { .. } => None,
        Gene::Function { .. } => Some(config.function_set().len()),
        Gene::Output { .. } => Some(config.output_sources()),
    }
}

/// Writes a fresh uniform value into `gene`. With `force_change` the new
/// value differs from the old one (callers must skip size-1 domains).
fn resample<R: Rng + ?Sized>(g: &mut Genotype, gene: Gene, force_change: bool, rng: &mut R) {
    let (lo, hi) = g.config().weight_range();
    let draw = |rng: &mut R, n: usize, current: usize| -> usize {
        if force_change {
            let v = rng.gen_range(0..n - 1);
            if v >= current {
                v + 1
            } else {
                v
            }
        } else {
            rng.gen_range(0..n)
        }
    };
    let n = domain_size(g, gene);
    match gene {
        Gene::Connection { node, slot } => {
            let cur = g.nodes()[node].connections[slot];
            g.nodes_mut()[node].connections[slot] = draw(rng, n.unwrap(), cur);
        }
        Gene::Weight { node, slot } => {
            let cur = g.nodes()[node].weights[slot];
            let mut w = rng.gen_range(lo..=hi);
            while force_change && w == cur {
                w = rng.gen_range(lo..=hi);
            }
            g.nodes_mut()[node].weights[slot] = w;
        }
        Gene::Function { node } => {
            let cur = g.nodes()[node].function;
            g.nodes_mut()[node].function = draw(rng, n.unwrap(), cur);
        }
        Gene::Output { index } => {
            let cur = g.outputs()[index];
            g.outputs_mut()[index] = draw(rng, n.unwrap(), cur);
        }
    }
}

/// Probabilistic random mutation: each gene is redrawn uniformly over its
/// legal domain with probability `rate` (the redraw may repeat the old value).
pub fn mutate_probabilistic<R: Rng + ?Sized>(parent: &Genotype, rate: f64, rng: &mut R) -> Genotype {
    let rate = rate.clamp(0.0, 1.0);
    let mut child = parent.clone();
    if rate == 0.0 {
        return child;
    }
    for index in 0..parent.config().gene_count() {
        if rng.gen_bool(rate) {
            resample(&mut child, locate(parent, index), false, rng);
        }
    }
    child.recompute_activity();
    child
}

/// Single active mutation: genes are picked uniformly and changed until one
/// change lands on a gene of a node that is active in the parent, or on an
/// output gene. Earlier changes to inactive genes are kept.
pub fn mutate_single_active<R: Rng + ?Sized>(parent: &Genotype, rng: &mut R) -> Genotype {
    let mut child = parent.clone();
    let total = parent.config().gene_count();
    loop {
        let gene = locate(parent, rng.gen_range(0..total));
        if domain_size(parent, gene) == Some(1) {
            continue;
        }
        resample(&mut child, gene, true, rng);
        let hit_active = match gene {
            Gene::Connection { node, .. } | Gene::Weight { node, .. } | Gene::Function { node } => {
                parent.nodes()[node].active
            }
            Gene::Output { .. } => true,
        };
        if hit_active {
            break;
        }
    }
    child.recompute_activity();
    child
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgp::{evaluate_ann, CgpConfig, Node, PostTransform};
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn table1() -> Arc<CgpConfig> {
        Arc::new(CgpConfig::standard(4, 40, 3, 5).unwrap())
    }

    /// Gene-by-gene comparison: (changed genes on parent-active nodes or
    /// outputs, changed genes on parent-inactive nodes).
    fn diff(parent: &Genotype, child: &Genotype) -> (usize, usize) {
        let mut active = 0;
        let mut inactive = 0;
        for (p, c) in parent.nodes().iter().zip(child.nodes()) {
            let n = p.connections.iter().zip(&c.connections).filter(|(a, b)| a != b).count()
                + p.weights.iter().zip(&c.weights).filter(|(a, b)| a != b).count()
                + usize::from(p.function != c.function);
            if p.active {
                active += n;
            } else {
                inactive += n;
            }
        }
        active += parent.outputs().iter().zip(child.outputs()).filter(|(a, b)| a != b).count();
        (active, inactive)
    }

    #[test]
    fn rate_zero_is_identity() {
        let c = table1();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = Genotype::random(&c, &mut rng);
        assert_eq!(mutate_probabilistic(&p, 0.0, &mut rng), p);
    }

    #[test]
    fn rate_one_keeps_invariants() {
        let c = table1();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = Genotype::random(&c, &mut rng);
        for _ in 0..200 {
            let child = mutate_probabilistic(&p, 1.0, &mut rng);
            child.validate().unwrap();
            // Continuous weights are redrawn, so none survive.
            for (a, b) in p.nodes().iter().zip(child.nodes()) {
                assert!(a.weights.iter().zip(&b.weights).all(|(x, y)| x != y));
            }
        }
    }

    #[test]
    fn changed_fraction_matches_rate() {
        let c = table1();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let parent = Genotype::random(&c, &mut rng);
        let total = c.gene_count() as f64;
        let mut changed = 0usize;
        let trials = 10_000;
        for _ in 0..trials {
            let child = mutate_probabilistic(&parent, 0.05, &mut rng);
            let (a, i) = diff(&parent, &child);
            changed += a + i;
        }
        let mean = changed as f64 / (trials as f64 * total);
        // Redraws can repeat the old categorical value; the exact expectation is
        // rate * (1 - sum over categorical genes of 1/domain / total).
        let mut repeat = 0.0;
        for j in 0..c.num_nodes() {
            repeat += c.arity() as f64 / c.sources_for_node(j) as f64;
            repeat += 1.0 / c.function_set().len() as f64;
        }
        repeat += c.num_outputs() as f64 / c.output_sources() as f64;
        let expected = 0.05 * (1.0 - repeat / total);
        assert!((mean - 0.05).abs() <= 0.005, "mean {mean}");
        assert!((mean - expected).abs() <= 5e-4, "mean {mean} vs {expected}");
    }

    #[test]
    fn single_active_on_fully_active_changes_one_gene() {
        // Chain: every node feeds the next, output reads the last node.
        let c = Arc::new(CgpConfig::standard(2, 6, 1, 2).unwrap());
        let nodes = (0..6)
            .map(|j| Node::new(vec![j + 1, 0], vec![0.5, -0.5], j % 5))
            .collect();
        let p = Genotype::from_parts(c, nodes, vec![7]).unwrap();
        assert_eq!(p.active_count(), 6);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let child = mutate_single_active(&p, &mut rng);
            assert_eq!(diff(&p, &child), (1, 0));
        }
    }

    #[test]
    fn single_active_histogram() {
        let c = table1();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let parent = Genotype::random(&c, &mut rng);
        let per_node = c.genes_per_node() as f64;
        let active_genes = parent.active_count() as f64 * per_node + c.num_outputs() as f64;
        let p_hit = active_genes / c.gene_count() as f64;
        let trials = 10_000;
        let mut inactive_total = 0usize;
        let mut zero_inactive = 0usize;
        for _ in 0..trials {
            let child = mutate_single_active(&parent, &mut rng);
            child.validate().unwrap();
            let (a, i) = diff(&parent, &child);
            assert_eq!(a, 1);
            inactive_total += i;
            zero_inactive += usize::from(i == 0);
        }
        // Geometric tail: P(no inactive change) = p_hit, E[inactive] = (1-p)/p.
        // Repeated draws on the same inactive gene make the observed count a
        // slight undercount of draws, hence the one-sided slack on the mean.
        let frac0 = zero_inactive as f64 / trials as f64;
        assert!((frac0 - p_hit).abs() < 0.02, "{frac0} vs {p_hit}");
        let mean = inactive_total as f64 / trials as f64;
        let want = (1.0 - p_hit) / p_hit;
        assert!(mean <= want + 0.1 && mean >= want * 0.9 - 0.1, "{mean} vs {want}");
    }

    #[test]
    fn single_active_without_active_nodes_moves_output() {
        let c = Arc::new(CgpConfig::standard(2, 3, 1, 1).unwrap());
        let nodes = (0..3).map(|_| Node::new(vec![0], vec![0.1], 0)).collect();
        let p = Genotype::from_parts(c, nodes, vec![1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let child = mutate_single_active(&p, &mut rng);
            assert_ne!(child.outputs(), p.outputs());
        }
    }

    #[test]
    fn inactive_mutations_do_not_change_behavior() {
        let c = table1();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let inputs = DMatrix::from_fn(25, 4, |r, c| ((r * 3 + c) as f64 * 0.37).cos());
        for _ in 0..200 {
            let parent = Genotype::random(&c, &mut rng);
            let mut child = parent.clone();
            for j in 0..c.num_nodes() {
                if !parent.nodes()[j].active {
                    let fresh = Genotype::random(&c, &mut rng);
                    child.nodes_mut()[j] = fresh.nodes()[j].clone();
                }
            }
            child.recompute_activity();
            let a = evaluate_ann(&parent, &inputs, PostTransform::None).unwrap();
            let b = evaluate_ann(&child, &inputs, PostTransform::None).unwrap();
            assert!(a.outputs.iter().zip(b.outputs.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}
