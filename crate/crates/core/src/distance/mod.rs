//! Distances between CGPANN individuals, each scaled to `[0, 1]`, and the
//! exponential kernel built on top of them.
//!
//! * [`gd`]: row-wise genotype comparison.
//! * [`gidd`]: comparison of active nodes matched by their position in the
//!   network graph.
//! * [`phd`]: mean absolute difference of network outputs on an input set.
//! * [`md`]: weighted sum of the three.

#[cfg(test)]
pub(crate) mod fixtures;
mod gd;
mod gidd;
mod inputs;
mod phd;

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::cgp::{Genotype, Phenotype, PostTransform};
use crate::error::{Error, Result};

pub use gd::{gd, gd_normalizer, GdProfile};
pub use gidd::{gidd, GiddProfile, DEFAULT_UNMATCHED_PENALTY};
pub use inputs::{InputProvenance, PhenotypeInputSet};
pub use phd::{phd, phd_phenotypes};

/// Non-negative mixture weights for the mixed distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureWeights {
    pub beta: [f64; 3],
}

impl MixtureWeights {
    pub fn new(beta: [f64; 3]) -> Result<Self> {
        if beta.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::InvalidDistance(format!(
                "mixture weights must be finite and non-negative, got {beta:?}"
            )));
        }
        if beta.iter().all(|&b| b == 0.0) {
            return Err(Error::InvalidDistance("mixture weights are all zero".into()));
        }
        Ok(Self { beta })
    }
}

/// `beta[0] * gd + beta[1] * gidd + beta[2] * phd`.
pub fn md(
    x: &Genotype,
    y: &Genotype,
    beta: &MixtureWeights,
    inputs: &PhenotypeInputSet,
    post: PostTransform,
    unmatched_penalty: f64,
) -> Result<f64> {
    let parts = [
        gd(x, y)?,
        gidd(x, y, unmatched_penalty)?,
        phd(x, y, inputs, post)?,
    ];
    Ok(parts.iter().zip(&beta.beta).map(|(d, b)| d * b).sum())
}

/// `exp(-theta * d)`.
#[inline]
pub fn exp_kernel(d: f64, theta: f64) -> f64 {
    (-theta * d).exp()
}

/// Which distance a surrogate is built on.
#[derive(Debug, Clone)]
pub enum DistanceKind {
    Gd,
    Gidd {
        unmatched_penalty: f64,
    },
    Phd {
        inputs: Arc<PhenotypeInputSet>,
        post: PostTransform,
    },
    /// All three component distances; their weights are fitted by the model.
    Md {
        inputs: Arc<PhenotypeInputSet>,
        post: PostTransform,
        unmatched_penalty: f64,
    },
}

impl DistanceKind {
    pub fn name(&self) -> &'static str {
        match self {
            DistanceKind::Gd => "gd",
            DistanceKind::Gidd { .. } => "gidd",
            DistanceKind::Phd { .. } => "phd",
            DistanceKind::Md { .. } => "md",
        }
    }

    /// Number of component distances (1, or 3 for the mixed distance).
    pub fn components(&self) -> usize {
        match self {
            DistanceKind::Md { .. } => 3,
            _ => 1,
        }
    }

    /// Precomputes everything a distance needs from one genotype, so that
    /// matrices over `n` samples cost `n` network evaluations rather than `n^2`.
    pub fn prepare(&self, genotype: &Genotype) -> Result<Features> {
        let (needs_gd, needs_gidd, phenotype_of) = match self {
            DistanceKind::Gd => (true, false, None),
            DistanceKind::Gidd { .. } => (false, true, None),
            DistanceKind::Phd { inputs, post } => (false, false, Some((inputs, *post))),
            DistanceKind::Md { inputs, post, .. } => (true, true, Some((inputs, *post))),
        };
        let gd = needs_gd.then(|| GdProfile::new(genotype));
        let gidd = if needs_gidd {
            Some(GiddProfile::new(genotype)?)
        } else {
            None
        };
        let phenotype = phenotype_of
            .map(|(inputs, post)| inputs.evaluate(genotype, post))
            .transpose()?;
        Ok(Features {
            genotype: genotype.clone(),
            gd,
            gidd,
            phenotype,
        })
    }

    /// Component distances between two prepared individuals. Only the first
    /// [`components`](Self::components) entries are meaningful.
    pub fn distances(&self, a: &Features, b: &Features) -> Result<[f64; 3]> {
        if !a.genotype.same_config(&b.genotype) {
            return Err(Error::ConfigMismatch);
        }
        let gd_of = || match (&a.gd, &b.gd) {
            (Some(pa), Some(pb)) => Ok(pa.distance(pb)),
            _ => Err(Error::InvalidDistance("features lack GD profiles".into())),
        };
        let gidd_of = |penalty| match (&a.gidd, &b.gidd) {
            (Some(pa), Some(pb)) => pa.distance(pb, penalty),
            _ => Err(Error::InvalidDistance("features lack GIDD profiles".into())),
        };
        let phd_of = || match (&a.phenotype, &b.phenotype) {
            (Some(pa), Some(pb)) => phd_phenotypes(pa, pb),
            _ => Err(Error::InvalidDistance("features lack phenotypes".into())),
        };
        Ok(match self {
            DistanceKind::Gd => [gd_of()?, 0.0, 0.0],
            DistanceKind::Gidd { unmatched_penalty } => [gidd_of(*unmatched_penalty)?, 0.0, 0.0],
            DistanceKind::Phd { .. } => [phd_of()?, 0.0, 0.0],
            DistanceKind::Md {
                unmatched_penalty, ..
            } => [
                gd_of()?,
                gidd_of(*unmatched_penalty)?,
                phd_of()?,
            ],
        })
    }

    /// Pairwise distance matrices over `samples`, one per component.
    pub fn matrix(&self, samples: &[Genotype]) -> Result<Vec<DMatrix<f64>>> {
        let features = samples
            .iter()
            .map(|g| self.prepare(g))
            .collect::<Result<Vec<_>>>()?;
        self.matrix_from_features(&features)
    }

    pub fn matrix_from_features(&self, features: &[Features]) -> Result<Vec<DMatrix<f64>>> {
        if features.is_empty() {
            return Err(Error::InvalidDistance("distance matrix needs at least one sample".into()));
        }
        let n = features.len();
        let mut out = vec![DMatrix::zeros(n, n); self.components()];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = self.distances(&features[i], &features[j])?;
                for (m, v) in out.iter_mut().zip(d) {
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
        }
        Ok(out)
    }
}

/// Per-genotype data reused across many distance computations.
#[derive(Debug, Clone)]
pub struct Features {
    genotype: Genotype,
    gd: Option<GdProfile>,
    gidd: Option<GiddProfile>,
    phenotype: Option<Phenotype>,
}

impl Features {
    pub fn genotype(&self) -> &Genotype {
        &self.genotype
    }

    pub fn phenotype(&self) -> Option<&Phenotype> {
        self.phenotype.as_ref()
    }
}

/// Batch form: symmetric matrices of pairwise distances.
pub fn distance_matrix(samples: &[Genotype], kind: &DistanceKind) -> Result<Vec<DMatrix<f64>>> {
    kind.matrix(samples)
}
