use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;

use super::config::{CgpConfig, Transfer};
use crate::error::{Error, Result};

/// One CGP node. Source indices below `num_inputs` address inputs; larger
/// indices address node `index - num_inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub connections: Vec<usize>,
    pub weights: Vec<f64>,
    /// Index into the configuration's function set.
    pub function: usize,
    pub active: bool,
}

impl Node {
    pub fn new(connections: Vec<usize>, weights: Vec<f64>, function: usize) -> Self {
        Self {
            connections,
            weights,
            function,
            active: false,
        }
    }
}

/// Fixed-length CGPANN chromosome.
#[derive(Debug, Clone)]
pub struct Genotype {
    config: Arc<CgpConfig>,
    nodes: Vec<Node>,
    outputs: Vec<usize>,
}

impl PartialEq for Genotype {
    fn eq(&self, other: &Self) -> bool {
        self.same_config(other) && self.nodes == other.nodes && self.outputs == other.outputs
    }
}

impl Genotype {
    /// Builds a genotype from explicit genes, validating every structural
    /// invariant. Activity flags in `nodes` are ignored and recomputed.
    pub fn from_parts(config: Arc<CgpConfig>, nodes: Vec<Node>, outputs: Vec<usize>) -> Result<Self> {
        let bad = |reason: String| Err(Error::InvalidConfig(reason));
        if nodes.len() != config.num_nodes() {
            return bad(format!(
                "expected {} nodes, got {}",
                config.num_nodes(),
                nodes.len()
            ));
        }
        if outputs.len() != config.num_outputs() {
            return bad(format!(
                "expected {} output genes, got {}",
                config.num_outputs(),
                outputs.len()
            ));
        }
        let (lo, hi) = config.weight_range();
        for (j, node) in nodes.iter().enumerate() {
            if node.connections.len() != config.arity() || node.weights.len() != config.arity() {
                return bad(format!("node {j} does not have arity {}", config.arity()));
            }
            if let Some(&c) = node
                .connections
                .iter()
                .find(|&&c| c >= config.sources_for_node(j))
            {
                return bad(format!("node {j} connects to illegal source {c}"));
            }
            if let Some(&w) = node.weights.iter().find(|w| !(lo..=hi).contains(*w)) {
                return bad(format!("node {j} weight {w} outside [{lo}, {hi}]"));
            }
            if node.function >= config.function_set().len() {
                return bad(format!("node {j} function gene {} out of range", node.function));
            }
        }
        if let Some(&o) = outputs.iter().find(|&&o| o >= config.output_sources()) {
            return bad(format!("output gene {o} out of range"));
        }
        let mut g = Self {
            config,
            nodes,
            outputs,
        };
        g.recompute_activity();
        Ok(g)
    }

    /// Uniform random genotype: connections uniform over legal sources,
    /// weights uniform in the weight range, functions uniform over the set.
    pub fn random<R: Rng + ?Sized>(config: &Arc<CgpConfig>, rng: &mut R) -> Self {
        let (lo, hi) = config.weight_range();
        let nodes = (0..config.num_nodes())
            .map(|j| {
                let sources = config.sources_for_node(j);
                let connections = (0..config.arity()).map(|_| rng.gen_range(0..sources)).collect();
                let weights = (0..config.arity()).map(|_| rng.gen_range(lo..=hi)).collect();
                let function = rng.gen_range(0..config.function_set().len());
                Node::new(connections, weights, function)
            })
            .collect();
        let outputs = (0..config.num_outputs())
            .map(|_| rng.gen_range(0..config.output_sources()))
            .collect();
        let mut g = Self {
            config: Arc::clone(config),
            nodes,
            outputs,
        };
        g.recompute_activity();
        g
    }

    pub fn config(&self) -> &Arc<CgpConfig> {
        &self.config
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    pub(crate) fn nodes_mut(&mut self) -> &mut [Node] {
        &mut self.nodes
    }

    pub(crate) fn outputs_mut(&mut self) -> &mut [usize] {
        &mut self.outputs
    }

    pub fn same_config(&self, other: &Genotype) -> bool {
        Arc::ptr_eq(&self.config, &other.config) || *self.config == *other.config
    }

    pub fn transfer(&self, node: usize) -> Transfer {
        self.config.function_set()[self.nodes[node].function]
    }

    pub fn active_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.active).count()
    }

    /// Indices of active nodes in genotype order.
    pub fn active_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.active)
            .map(|(j, _)| j)
    }

    /// Marks exactly the nodes reachable backwards from an output gene.
    pub fn recompute_activity(&mut self) {
        let n_in = self.config.num_inputs();
        for node in &mut self.nodes {
            node.active = false;
        }
        let mut stack: Vec<usize> = self
            .outputs
            .iter()
            .filter(|&&o| o >= n_in)
            .map(|&o| o - n_in)
            .collect();
        while let Some(j) = stack.pop() {
            if self.nodes[j].active {
                continue;
            }
            self.nodes[j].active = true;
            stack.extend(
                self.nodes[j]
                    .connections
                    .iter()
                    .filter(|&&c| c >= n_in)
                    .map(|&c| c - n_in),
            );
        }
    }

    /// Line-oriented text form: one node per line as
    /// `function src:weight ...`, then a final line of output genes.
    /// Weights use the shortest decimal that round-trips exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for j in 0..self.nodes.len() {
            let node = &self.nodes[j];
            out.push_str(self.transfer(j).name());
            for (c, w) in node.connections.iter().zip(&node.weights) {
                let _ = write!(out, " {c}:{w}");
            }
            out.push('\n');
        }
        let outputs: Vec<String> = self.outputs.iter().map(|o| o.to_string()).collect();
        out.push_str(&outputs.join(" "));
        out.push('\n');
        out
    }

    pub fn from_text(config: &Arc<CgpConfig>, text: &str) -> Result<Self> {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        let parse_err = |line: usize, reason: String| Error::GenotypeParse { line, reason };
        if lines.len() != config.num_nodes() + 1 {
            return Err(parse_err(
                lines.last().map_or(0, |l| l.0),
                format!(
                    "expected {} node lines plus one output line, found {} lines",
                    config.num_nodes(),
                    lines.len()
                ),
            ));
        }
        let mut nodes = Vec::with_capacity(config.num_nodes());
        for &(line, text) in &lines[..config.num_nodes()] {
            let mut parts = text.split_whitespace();
            let fname = parts.next().unwrap_or_default();
            let transfer: Transfer = fname
                .parse()
                .map_err(|_| parse_err(line, format!("unknown function `{fname}`")))?;
            let function = config
                .function_set()
                .iter()
                .position(|&f| f == transfer)
                .ok_or_else(|| parse_err(line, format!("`{fname}` is not in the function set")))?;
            let mut connections = Vec::new();
            let mut weights = Vec::new();
            for tok in parts {
                let (c, w) = tok
                    .split_once(':')
                    .ok_or_else(|| parse_err(line, format!("expected src:weight, got `{tok}`")))?;
                connections.push(
                    c.parse()
                        .map_err(|_| parse_err(line, format!("bad source `{c}`")))?,
                );
                weights.push(
                    w.parse()
                        .map_err(|_| parse_err(line, format!("bad weight `{w}`")))?,
                );
            }
            nodes.push(Node::new(connections, weights, function));
        }
        let (line, out_text) = lines[config.num_nodes()];
        let outputs = out_text
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse_err(line, format!("bad output gene `{t}`"))))
            .collect::<Result<Vec<usize>>>()?;
        Self::from_parts(Arc::clone(config), nodes, outputs).map_err(|e| parse_err(line, e.to_string()))
    }

    /// Checks every structural invariant, including that the stored
    /// activity flags agree with reachability.
    pub fn validate(&self) -> Result<()> {
        let rebuilt = Self::from_parts(Arc::clone(&self.config), self.nodes.clone(), self.outputs.clone())?;
        if rebuilt.nodes.iter().zip(&self.nodes).any(|(a, b)| a.active != b.active) {
            return Err(Error::InvalidConfig("stale activity flags".into()));
        }
        Ok(())
    }
}
