use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::cgp::{evaluate_ann, Genotype, Phenotype, PostTransform};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputProvenance {
    FullDataset,
    Factorial,
    Lhs,
    Custom,
}

/// Reference inputs on which phenotypes are measured.
#[derive(Debug, Clone, PartialEq)]
pub struct PhenotypeInputSet {
    rows: DMatrix<f64>,
    provenance: InputProvenance,
}

impl PhenotypeInputSet {
    pub fn new(rows: DMatrix<f64>, provenance: InputProvenance) -> Result<Self> {
        if rows.nrows() == 0 || rows.ncols() == 0 {
            return Err(Error::InvalidDistance("input set must have at least one row and column".into()));
        }
        if let Some(pos) = rows.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput {
                row: pos % rows.nrows(),
                col: pos / rows.nrows(),
            });
        }
        Ok(Self { rows, provenance })
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn dims(&self) -> usize {
        self.rows.ncols()
    }

    pub fn provenance(&self) -> InputProvenance {
        self.provenance
    }

    pub fn evaluate(&self, genotype: &Genotype, post: PostTransform) -> Result<Phenotype> {
        evaluate_ann(genotype, &self.rows, post)
    }

    /// Headerless CSV, one row per sample.
    pub fn from_csv_reader<R: Read>(reader: R, provenance: InputProvenance) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut values = Vec::new();
        let mut width = None;
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let row: Vec<f64> = record
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidDistance(format!("input set row {}: {e}", i + 1)))?;
            match width {
                None => width = Some(row.len()),
                Some(w) if w != row.len() => {
                    return Err(Error::InvalidDistance(format!(
                        "input set row {} has {} values, expected {w}",
                        i + 1,
                        row.len()
                    )))
                }
                _ => {}
            }
            values.push(row);
        }
        let width = width.unwrap_or(0);
        let rows = DMatrix::from_fn(values.len(), width, |r, c| values[r][c]);
        Self::new(rows, provenance)
    }

    pub fn from_csv_path(path: &Path, provenance: InputProvenance) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?, provenance)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for row in self.rows.row_iter() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let rows = DMatrix::from_row_slice(2, 3, &[0.0, 0.5, 1.0, 0.1, 0.2, 0.30000000000000004]);
        let set = PhenotypeInputSet::new(rows, InputProvenance::Custom).unwrap();
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap().lines().count(), 2);
        let back = PhenotypeInputSet::from_csv_reader(&buf[..], InputProvenance::Custom).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn csv_rejects_ragged_and_empty() {
        assert!(PhenotypeInputSet::from_csv_reader("1,2\n3\n".as_bytes(), InputProvenance::Custom).is_err());
        assert!(PhenotypeInputSet::from_csv_reader("".as_bytes(), InputProvenance::Custom).is_err());
        assert!(PhenotypeInputSet::from_csv_reader("1,x\n".as_bytes(), InputProvenance::Custom).is_err());
    }
}
