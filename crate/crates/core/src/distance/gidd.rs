use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use crate::cgp::{merge_duplicates, CgpConfig, Genotype, Transfer};
use crate::error::{Error, Result};

/// Distance charged for every active node without a partner.
pub const DEFAULT_UNMATCHED_PENALTY: f64 = 2.0;

/// Structural node identifier. Inputs get a fixed ID from their index; an
/// active node's ID is derived from the IDs of its distinct sources and their
/// count, so equal IDs describe equal upstream graphs.
type NodeId = u128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    Input(usize),
    Node(usize),
}

#[derive(Debug, Clone)]
struct SourceEntry {
    id: NodeId,
    weight: f64,
    multiplicity: usize,
    source: Source,
}

#[derive(Debug, Clone)]
struct Entry {
    id: NodeId,
    transfer: Transfer,
    /// Distinct sources ordered by (ID, merged weight).
    sources: Vec<SourceEntry>,
}

fn hash128<T: Hash>(value: &T) -> NodeId {
    let mut lo = DefaultHasher::new();
    0u8.hash(&mut lo);
    value.hash(&mut lo);
    let mut hi = DefaultHasher::new();
    1u8.hash(&mut hi);
    value.hash(&mut hi);
    (u128::from(hi.finish()) << 64) | u128::from(lo.finish())
}

fn input_id(index: usize) -> NodeId {
    hash128(&("input", index))
}

/// Active-graph summary of one genotype used by [`gidd`].
#[derive(Debug, Clone)]
pub struct GiddProfile {
    config: Arc<CgpConfig>,
    entries: Vec<Entry>,
    /// Node index to position in `entries`.
    slot: HashMap<usize, usize>,
}

impl GiddProfile {
    pub fn new(genotype: &Genotype) -> Result<Self> {
        let config = Arc::clone(genotype.config());
        let n_in = config.num_inputs();
        let mut entries: Vec<Entry> = Vec::new();
        let mut slot: HashMap<usize, usize> = HashMap::new();
        for j in genotype.active_nodes() {
            let node = &genotype.nodes()[j];
            let mut sources = Vec::new();
            for (src, weight) in merge_duplicates(&node.connections, &node.weights) {
                let multiplicity = node.connections.iter().filter(|&&c| c == src).count();
                let (id, source) = if src < n_in {
                    (input_id(src), Source::Input(src))
                } else {
                    let k = src - n_in;
                    // Sources of an active node are active and precede it.
                    let e: usize = slot.get(&k).copied().ok_or(Error::RecursionLimit {
                        limit: config.num_nodes(),
                    })?;
                    (entries[e].id, Source::Node(k))
                };
                sources.push(SourceEntry {
                    id,
                    weight,
                    multiplicity,
                    source,
                });
            }
            sources.sort_by(|a, b| a.id.cmp(&b.id).then(a.weight.total_cmp(&b.weight)));
            let ids: Vec<NodeId> = sources.iter().map(|s| s.id).collect();
            let id = hash128(&("node", &ids, ids.len()));
            slot.insert(j, entries.len());
            entries.push(Entry {
                id,
                transfer: genotype.transfer(j),
                sources,
            });
        }
        Ok(Self {
            config,
            entries,
            slot,
        })
    }

    pub fn active_len(&self) -> usize {
        self.entries.len()
    }

    /// Recursively checks that the subgraphs feeding `a` (in self) and `b`
    /// (in other) carry the same IDs all the way down to the inputs.
    fn same_subgraph(
        &self,
        other: &GiddProfile,
        a: usize,
        b: usize,
        depth: usize,
        memo: &mut HashMap<(usize, usize), bool>,
    ) -> Result<bool> {
        let limit = self.config.num_nodes();
        if depth > limit {
            return Err(Error::RecursionLimit { limit });
        }
        if let Some(&known) = memo.get(&(a, b)) {
            return Ok(known);
        }
        let (ea, eb) = (&self.entries[a], &other.entries[b]);
        let mut same = ea.id == eb.id && ea.sources.len() == eb.sources.len();
        if same {
            for (sa, sb) in ea.sources.iter().zip(&eb.sources) {
                if sa.id != sb.id {
                    same = false;
                    break;
                }
                let ok = match (sa.source, sb.source) {
                    (Source::Input(i), Source::Input(k)) => i == k,
                    (Source::Node(p), Source::Node(q)) => {
                        let (p, q) = (self.slot[&p], other.slot[&q]);
                        self.same_subgraph(other, p, q, depth + 1, memo)?
                    }
                    _ => false,
                };
                if !ok {
                    same = false;
                    break;
                }
            }
        }
        memo.insert((a, b), same);
        Ok(same)
    }

    /// Total order on profiles; only used to orient the greedy matching.
    fn canonical_cmp(&self, other: &GiddProfile) -> Ordering {
        let entry_cmp = |a: &Entry, b: &Entry| {
            a.id.cmp(&b.id)
                .then_with(|| a.transfer.name().cmp(b.transfer.name()))
                .then_with(|| {
                    let sa = a.sources.iter().map(|s| (s.id, s.weight.to_bits(), s.multiplicity));
                    let sb = b.sources.iter().map(|s| (s.id, s.weight.to_bits(), s.multiplicity));
                    sa.cmp(sb)
                })
        };
        self.entries.len().cmp(&other.entries.len()).then_with(|| {
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| entry_cmp(a, b))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
    }

    /// Normalized ID distance to `other`. Exactly symmetric: the matching
    /// always runs from the canonically smaller profile.
    pub fn distance(&self, other: &GiddProfile, unmatched_penalty: f64) -> Result<f64> {
        if !(Arc::ptr_eq(&self.config, &other.config) || *self.config == *other.config) {
            return Err(Error::ConfigMismatch);
        }
        if !(unmatched_penalty.is_finite() && unmatched_penalty > 0.0) {
            return Err(Error::InvalidDistance(format!(
                "unmatched penalty must be positive, got {unmatched_penalty}"
            )));
        }
        if self.canonical_cmp(other) == Ordering::Greater {
            other.directed_distance(self, unmatched_penalty)
        } else {
            self.directed_distance(other, unmatched_penalty)
        }
    }

    fn directed_distance(&self, other: &GiddProfile, unmatched_penalty: f64) -> Result<f64> {
        let span = self.config.weight_span();
        let mut used = vec![false; other.entries.len()];
        let mut memo = HashMap::new();
        let mut matched = 0usize;
        let mut total = 0.0;
        let mut max_total = 0.0;
        for (a, ea) in self.entries.iter().enumerate() {
            let mut partner = None;
            for (b, eb) in other.entries.iter().enumerate() {
                if !used[b] && eb.id == ea.id && self.same_subgraph(other, a, b, 0, &mut memo)? {
                    partner = Some(b);
                    break;
                }
            }
            let Some(b) = partner else { continue };
            used[b] = true;
            matched += 1;
            let eb = &other.entries[b];
            for (sa, sb) in ea.sources.iter().zip(&eb.sources) {
                total += (sa.weight - sb.weight).powi(2);
                let bound = span * sa.multiplicity.max(sb.multiplicity) as f64;
                max_total += bound * bound;
            }
            if ea.transfer != eb.transfer {
                total += 1.0;
            }
            max_total += 1.0;
        }
        let unmatched = (self.entries.len() - matched) + (other.entries.len() - matched);
        total += unmatched as f64 * unmatched_penalty;
        max_total += unmatched as f64 * unmatched_penalty;
        if max_total == 0.0 {
            return Ok(0.0);
        }
        Ok(total / max_total)
    }
}

/// Genotypic ID distance between the active networks of `x` and `y`.
pub fn gidd(x: &Genotype, y: &Genotype, unmatched_penalty: f64) -> Result<f64> {
    if !x.same_config(y) {
        return Err(Error::ConfigMismatch);
    }
    GiddProfile::new(x)?.distance(&GiddProfile::new(y)?, unmatched_penalty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgp::{mutate_single_active, Node};
    use crate::distance::fixtures::figure_pair;
    use crate::distance::gd;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn self_distance_is_zero() {
        let (x, y) = figure_pair();
        assert_eq!(gidd(&x, &x, 2.0).unwrap(), 0.0);
        assert_eq!(gidd(&y, &y, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_topologies_hit_the_maximum() {
        let config = Arc::new(CgpConfig::standard(2, 3, 1, 1).unwrap());
        let chain = |src: usize| {
            let nodes = vec![
                Node::new(vec![src], vec![0.4], 0),
                Node::new(vec![2], vec![0.4], 0),
                Node::new(vec![3], vec![0.4], 0),
            ];
            Genotype::from_parts(Arc::clone(&config), nodes, vec![4]).unwrap()
        };
        // Same shape, but rooted on different inputs: no ID matches anywhere.
        assert_eq!(gidd(&chain(0), &chain(1), 2.0).unwrap(), 1.0);
    }

    #[test]
    fn figure_pair_by_hand() {
        // Active nodes (0-based) {0,1,2,4,5} in both. Node 2 was rewired from
        // {n0, n1, in0} to {in1 (x2), n1}, so its ID changes and so do the IDs
        // of nodes 4 and 5 downstream. Nodes 0 and 1 match with equal weights
        // and functions, contributing 0 and normalizer terms:
        //   node 0: distinct sources {in0, in1 (x2)} -> 2^2 + (2*2)^2 + 1 = 21
        //   node 1: distinct sources {in0, n0, in1}  -> 3 * 4 + 1        = 13
        // Unmatched: 3 nodes on each side at penalty 2 -> 12.
        let (x, y) = figure_pair();
        let d = gidd(&x, &y, 2.0).unwrap();
        assert_eq!(d, 12.0 / (21.0 + 13.0 + 12.0));
        assert!(d > gd(&x, &y).unwrap());
    }

    #[test]
    fn permuted_and_duplicated_connections_match() {
        let config = Arc::new(CgpConfig::standard(2, 2, 1, 3).unwrap());
        let a = Genotype::from_parts(
            Arc::clone(&config),
            vec![
                Node::new(vec![0, 1, 1], vec![0.1, 0.2, 0.3], 1),
                Node::new(vec![2, 0, 0], vec![0.5, 0.5, -0.5], 0),
            ],
            vec![3],
        )
        .unwrap();
        let b = Genotype::from_parts(
            Arc::clone(&config),
            vec![
                Node::new(vec![1, 0, 1], vec![0.5, 0.1, 0.0], 1),
                Node::new(vec![0, 2, 0], vec![0.25, 0.5, -0.25], 2),
            ],
            vec![3],
        )
        .unwrap();
        // Merged weights: a = {in0: 0.1, in1: 0.5}, {n0: 0.5, in0: 0.0}
        //                 b = {in0: 0.1, in1: 0.5}, {n0: 0.5, in0: 0.0}
        // Only the second node's function differs.
        let d = gidd(&a, &b, 2.0).unwrap();
        // Normalizer: node 0 -> 2^2 + (2*2)^2 + 1 = 21; node 1 -> 2^2 + (2*2)^2 + 1 = 21.
        assert_eq!(d, 1.0 / 42.0);
    }

    #[test]
    fn ignores_inactive_nodes() {
        let config = Arc::new(CgpConfig::standard(4, 30, 3, 4).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..200 {
            let x = Genotype::random(&config, &mut rng);
            let third = mutate_single_active(&x, &mut rng);
            let mut nodes = x.nodes().to_vec();
            for (j, node) in nodes.iter_mut().enumerate() {
                if !node.active && rng.gen_bool(0.5) {
                    node.function = rng.gen_range(0..5);
                    node.connections = (0..4).map(|_| rng.gen_range(0..4 + j)).collect();
                }
            }
            let x2 = Genotype::from_parts(Arc::clone(&config), nodes, x.outputs().to_vec()).unwrap();
            assert_eq!(gidd(&x, &third, 2.0).unwrap(), gidd(&x2, &third, 2.0).unwrap());
            assert_eq!(gidd(&x, &x2, 2.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn no_active_nodes_on_either_side() {
        let config = Arc::new(CgpConfig::standard(2, 2, 1, 1).unwrap());
        let nodes = vec![Node::new(vec![0], vec![0.1], 0), Node::new(vec![1], vec![0.1], 0)];
        let g = Genotype::from_parts(config, nodes, vec![0]).unwrap();
        assert_eq!(gidd(&g, &g, 2.0).unwrap(), 0.0);
    }
}
