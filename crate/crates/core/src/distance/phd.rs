use crate::cgp::{Genotype, Phenotype, PostTransform};
use crate::error::{Error, Result};

use super::inputs::PhenotypeInputSet;

/// L1 distance between output matrices divided by (rows x outputs).
pub fn phd_phenotypes(a: &Phenotype, b: &Phenotype) -> Result<f64> {
    if a.outputs.shape() != b.outputs.shape() {
        return Err(Error::InvalidDistance(format!(
            "phenotype shapes differ: {:?} vs {:?}",
            a.outputs.shape(),
            b.outputs.shape()
        )));
    }
    // Flat slices keep this hot loop vectorizable.
    let l1: f64 = a
        .outputs
        .as_slice()
        .iter()
        .zip(b.outputs.as_slice())
        .map(|(x, y)| (x - y).abs())
        .sum();
    Ok(l1 / a.outputs.len() as f64)
}

/// Phenotypic distance: both networks are run on `inputs` and their outputs
/// compared.
pub fn phd(x: &Genotype, y: &Genotype, inputs: &PhenotypeInputSet, post: PostTransform) -> Result<f64> {
    if !x.same_config(y) {
        return Err(Error::ConfigMismatch);
    }
    phd_phenotypes(&inputs.evaluate(x, post)?, &inputs.evaluate(y, post)?)
}
