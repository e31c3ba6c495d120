use std::cell::Cell;

use nalgebra::DMatrix;

use super::config::Transfer;
use super::genotype::Genotype;
use crate::error::{Error, Result};

thread_local! {
    static EVALUATIONS: Cell<u64> = const { Cell::new(0) };
}

/// Number of network evaluations performed on the current thread.
pub fn network_evaluations() -> u64 {
    EVALUATIONS.with(Cell::get)
}

/// Optional per-row transform applied to raw network outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PostTransform {
    #[default]
    None,
    Softmax,
}

/// Network response on an input set: one row per input row, one column per
/// output gene.
#[derive(Debug, Clone, PartialEq)]
pub struct Phenotype {
    pub outputs: DMatrix<f64>,
    pub post_transform: PostTransform,
}

impl Phenotype {
    pub fn rows(&self) -> usize {
        self.outputs.nrows()
    }
}

/// Active feed-forward part of a genotype with duplicate connections merged.
#[derive(Debug, Clone)]
pub struct Network {
    num_inputs: usize,
    /// (transfer, merged (source, weight) pairs) per active node in genotype
    /// order. Sources are remapped: inputs keep their index, node sources
    /// point to num_inputs + their position in this list.
    nodes: Vec<(Transfer, Vec<(usize, f64)>)>,
    outputs: Vec<usize>,
}

/// Sums the weights of repeated sources; order of first appearance is kept.
pub fn merge_duplicates(connections: &[usize], weights: &[f64]) -> Vec<(usize, f64)> {
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(connections.len());
    for (&c, &w) in connections.iter().zip(weights) {
        match merged.iter_mut().find(|(s, _)| *s == c) {
            Some(entry) => entry.1 += w,
            None => merged.push((c, w)),
        }
    }
    merged
}

impl Network {
    pub fn decode(genotype: &Genotype) -> Self {
        let config = genotype.config();
        let num_inputs = config.num_inputs();
        let mut slot = vec![usize::MAX; config.num_nodes()];
        let remap = |src: usize, slot: &[usize]| {
            if src < num_inputs {
                src
            } else {
                num_inputs + slot[src - num_inputs]
            }
        };
        let mut nodes = Vec::with_capacity(genotype.active_count());
        for j in genotype.active_nodes() {
            let node = &genotype.nodes()[j];
            let sources = merge_duplicates(&node.connections, &node.weights)
                .into_iter()
                .map(|(src, w)| (remap(src, &slot), w))
                .collect();
            slot[j] = nodes.len();
            nodes.push((genotype.transfer(j), sources));
        }
        let outputs = genotype.outputs().iter().map(|&src| remap(src, &slot)).collect();
        Self {
            num_inputs,
            nodes,
            outputs,
        }
    }

    /// Evaluates the network on every row of `inputs` (rows x num_inputs).
    pub fn evaluate(&self, inputs: &DMatrix<f64>, post: PostTransform) -> Result<Phenotype> {
        if inputs.ncols() != self.num_inputs {
            return Err(Error::InputShape {
                expected: self.num_inputs,
                got: inputs.ncols(),
            });
        }
        if let Some(pos) = inputs.iter().position(|v| !v.is_finite()) {
            let rows = inputs.nrows();
            return Err(Error::NonFiniteInput {
                row: pos % rows,
                col: pos / rows,
            });
        }
        EVALUATIONS.with(|c| c.set(c.get() + 1));

        let rows = inputs.nrows();
        let input_data = inputs.as_slice();
        // Column-major values of the active nodes only.
        let mut values = vec![0.0; self.nodes.len() * rows];
        for (j, (transfer, sources)) in self.nodes.iter().enumerate() {
            let (done, rest) = values.split_at_mut(j * rows);
            let out = &mut rest[..rows];
            for &(src, w) in sources {
                let column = if src < self.num_inputs {
                    &input_data[src * rows..(src + 1) * rows]
                } else {
                    let k = src - self.num_inputs;
                    &done[k * rows..(k + 1) * rows]
                };
                for (o, x) in out.iter_mut().zip(column) {
                    *o += w * x;
                }
            }
            for o in out.iter_mut() {
                *o = transfer.apply(*o);
            }
        }

        let mut outputs = DMatrix::zeros(rows, self.outputs.len());
        for (k, &src) in self.outputs.iter().enumerate() {
            let column = if src < self.num_inputs {
                &input_data[src * rows..(src + 1) * rows]
            } else {
                let n = src - self.num_inputs;
                &values[n * rows..(n + 1) * rows]
            };
            outputs.column_mut(k).copy_from_slice(column);
        }
        if post == PostTransform::Softmax {
            for mut row in outputs.row_iter_mut() {
                let v: Vec<f64> = row.iter().copied().collect();
                for (dst, p) in row.iter_mut().zip(softmax(&v)) {
                    *dst = p;
                }
            }
        }
        Ok(Phenotype {
            outputs,
            post_transform: post,
        })
    }
}

/// Decodes and evaluates `genotype` on `inputs`.
pub fn evaluate_ann(genotype: &Genotype, inputs: &DMatrix<f64>, post: PostTransform) -> Result<Phenotype> {
    Network::decode(genotype).evaluate(inputs, post)
}

/// Max-shifted exponential normalization.
pub fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgp::{CgpConfig, Node};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    #[test]
    fn transfer_closed_forms() {
        assert_eq!(Transfer::Softsign.apply(0.0), 0.0);
        assert_eq!(Transfer::Sigmoid.apply(0.0), 0.5);
        assert_eq!(Transfer::Gauss.apply(0.0), 1.0);
        assert_eq!(Transfer::Step.apply(-0.1), 0.0);
        assert_eq!(Transfer::Step.apply(0.1), 1.0);
        assert_eq!(Transfer::Step.apply(0.0), 0.0);
        // tanh(0.5) from a 30-digit reference: 0.462117157260009758502318483643
        assert_abs_diff_eq!(Transfer::Tanh.apply(0.5), 0.462_117_157_260_009_76, epsilon = 1e-6);
        assert_abs_diff_eq!(Transfer::Softsign.apply(3.0), 0.75, epsilon = 1e-15);
    }

    #[test]
    fn duplicate_connections_sum_weights() {
        let c = Arc::new(CgpConfig::standard(1, 1, 1, 2).unwrap());
        let g = Genotype::from_parts(c, vec![Node::new(vec![0, 0], vec![0.3, 0.2], 0)], vec![1]).unwrap();
        let p = evaluate_ann(&g, &DMatrix::from_element(1, 1, 1.0), PostTransform::None).unwrap();
        assert_abs_diff_eq!(p.outputs[(0, 0)], 0.5f64.tanh(), epsilon = 1e-15);
    }

    #[test]
    fn zero_weights_give_zero_tanh_outputs() {
        let c = Arc::new(CgpConfig::new(3, 6, 2, 3, (-1.0, 1.0), vec![Transfer::Tanh]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = Genotype::random(&c, &mut rng);
        let nodes = g
            .nodes()
            .iter()
            .map(|n| Node::new(n.connections.clone(), vec![0.0; 3], 0))
            .collect();
        let g = Genotype::from_parts(c, nodes, vec![5, 8]).unwrap();
        let inputs = DMatrix::from_fn(4, 3, |r, c| (r + c) as f64 - 1.5);
        let p = evaluate_ann(&g, &inputs, PostTransform::None).unwrap();
        assert!(p.outputs.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let c = Arc::new(CgpConfig::standard(2, 3, 1, 2).unwrap());
        let g = Genotype::random(&c, &mut ChaCha8Rng::seed_from_u64(0));
        let mut inputs = DMatrix::from_element(3, 2, 0.5);
        inputs[(1, 1)] = f64::NAN;
        assert!(matches!(
            evaluate_ann(&g, &inputs, PostTransform::None),
            Err(Error::NonFiniteInput { row: 1, col: 1 })
        ));
        assert!(matches!(
            evaluate_ann(&g, &DMatrix::zeros(3, 3), PostTransform::None),
            Err(Error::InputShape { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn softmax_values() {
        let p = softmax(&[0.0, 0.0, 0.0]);
        for v in &p {
            assert_abs_diff_eq!(*v, 1.0 / 3.0, epsilon = 1e-15);
        }
        // Reference: e^k / (e + e^2 + e^3) to 20 digits.
        let want = [0.090_030_573_170_380_46, 0.244_728_471_054_797_64, 0.665_240_955_774_821_9];
        for (a, b) in softmax(&[1.0, 2.0, 3.0]).iter().zip(want) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        let shifted = softmax(&[1001.0, 1002.0, 1003.0]);
        for (a, b) in shifted.iter().zip(want) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let c = Arc::new(CgpConfig::standard(4, 40, 3, 5).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let inputs = DMatrix::from_fn(20, 4, |r, c| ((r * 7 + c * 3) % 11) as f64 / 10.0);
        for _ in 0..200 {
            let g = Genotype::random(&c, &mut rng);
            let p = evaluate_ann(&g, &inputs, PostTransform::Softmax).unwrap();
            for row in p.outputs.row_iter() {
                assert!((row.sum() - 1.0).abs() <= 1e-9);
                assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn evaluation_is_pure() {
        let c = Arc::new(CgpConfig::standard(4, 40, 3, 5).unwrap());
        let g = Genotype::random(&c, &mut ChaCha8Rng::seed_from_u64(4));
        let inputs = DMatrix::from_fn(30, 4, |r, c| (r as f64 * 0.1 + c as f64).sin());
        let a = evaluate_ann(&g, &inputs, PostTransform::None).unwrap();
        let b = evaluate_ann(&g, &inputs, PostTransform::None).unwrap();
        assert!(a.outputs.iter().zip(b.outputs.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
