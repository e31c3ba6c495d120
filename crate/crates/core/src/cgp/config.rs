use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Node transfer functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transfer {
    Tanh,
    Softsign,
    /// Heaviside: 1 for x > 0, else 0.
    Step,
    Sigmoid,
    Gauss,
}

impl Transfer {
    pub const ALL: [Transfer; 5] = [
        Transfer::Tanh,
        Transfer::Softsign,
        Transfer::Step,
        Transfer::Sigmoid,
        Transfer::Gauss,
    ];

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Transfer::Tanh => x.tanh(),
            Transfer::Softsign => x / (1.0 + x.abs()),
            Transfer::Step => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Transfer::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Transfer::Gauss => (-x * x).exp(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Transfer::Tanh => "tanh",
            Transfer::Softsign => "softsign",
            Transfer::Step => "step",
            Transfer::Sigmoid => "sigmoid",
            Transfer::Gauss => "gauss",
        }
    }
}

impl fmt::Display for Transfer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Transfer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Transfer::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown transfer function `{s}`")))
    }
}

/// Shape of a CGPANN chromosome. Feed-forward only: a node may read any input
/// or any strictly preceding node.
#[derive(Debug, Clone, PartialEq)]
pub struct CgpConfig {
    num_inputs: usize,
    num_nodes: usize,
    num_outputs: usize,
    arity: usize,
    weight_range: (f64, f64),
    function_set: Vec<Transfer>,
}

impl CgpConfig {
    pub fn new(
        num_inputs: usize,
        num_nodes: usize,
        num_outputs: usize,
        arity: usize,
        weight_range: (f64, f64),
        function_set: Vec<Transfer>,
    ) -> Result<Self> {
        if num_inputs == 0 {
            return Err(Error::InvalidConfig("num_inputs must be >= 1".into()));
        }
        if num_nodes == 0 || num_outputs == 0 || arity == 0 {
            return Err(Error::InvalidConfig(
                "num_nodes, num_outputs and arity must all be >= 1".into(),
            ));
        }
        let (lo, hi) = weight_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidConfig(format!(
                "weight range [{lo}, {hi}] must be finite with lower < upper"
            )));
        }
        if function_set.is_empty() {
            return Err(Error::InvalidConfig("function set is empty".into()));
        }
        for (i, f) in function_set.iter().enumerate() {
            if function_set[..i].contains(f) {
                return Err(Error::InvalidConfig(format!("duplicate function `{f}`")));
            }
        }
        Ok(Self {
            num_inputs,
            num_nodes,
            num_outputs,
            arity,
            weight_range,
            function_set,
        })
    }

    /// Weight range [-1, 1] with all five transfer functions.
    pub fn standard(
        num_inputs: usize,
        num_nodes: usize,
        num_outputs: usize,
        arity: usize,
    ) -> Result<Self> {
        Self::new(
            num_inputs,
            num_nodes,
            num_outputs,
            arity,
            (-1.0, 1.0),
            Transfer::ALL.to_vec(),
        )
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_outputs(&self) -> usize {
        self.num_outputs
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn weight_range(&self) -> (f64, f64) {
        self.weight_range
    }

    pub fn weight_span(&self) -> f64 {
        self.weight_range.1 - self.weight_range.0
    }

    pub fn function_set(&self) -> &[Transfer] {
        &self.function_set
    }

    /// Number of legal sources for a connection gene of node `node`.
    pub fn sources_for_node(&self, node: usize) -> usize {
        self.num_inputs + node
    }

    /// Number of legal sources for an output gene.
    pub fn output_sources(&self) -> usize {
        self.num_inputs + self.num_nodes
    }

    /// Genes per node: `arity` connections, `arity` weights, one function.
    pub fn genes_per_node(&self) -> usize {
        2 * self.arity + 1
    }

    /// Total number of mutable gene positions (node genes plus output genes).
    pub fn gene_count(&self) -> usize {
        self.num_nodes * self.genes_per_node() + self.num_outputs
    }
}
