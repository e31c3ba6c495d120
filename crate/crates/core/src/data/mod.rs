//! Classification datasets, preprocessing and the adjusted-accuracy fitness.

mod design;

use std::collections::HashMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;

use crate::cgp::{evaluate_ann, Genotype, PostTransform};
use crate::distance::{InputProvenance, PhenotypeInputSet};
use crate::error::{Error, Result};

pub use design::{gen_factorial, gen_lhs};

/// Column holding the class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
    /// The last column of every row.
    Last,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadOptions {
    pub has_header: bool,
    pub label: LabelColumn,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            has_header: true,
            label: LabelColumn::Last,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    /// One row per sample.
    pub features: DMatrix<f64>,
    /// Dense class indices in `0..class_count()`.
    pub labels: Vec<usize>,
    /// Original label text, indexed by class.
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: DMatrix<f64>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let name = name.into();
        let invalid = |reason: String| Error::Dataset {
            path: PathBuf::from(&name),
            row: 0,
            reason,
        };
        if features.nrows() != labels.len() {
            return Err(invalid(format!("{} feature rows but {} labels", features.nrows(), labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(invalid(format!("label {bad} outside {} classes", class_names.len())));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite feature value".into()));
        }
        let feature_names = (0..features.ncols()).map(|c| format!("x{c}")).collect();
        Ok(Self {
            name,
            features,
            labels,
            class_names,
            feature_names,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    /// All feature rows as a phenotype input set.
    pub fn input_set(&self) -> Result<PhenotypeInputSet> {
        PhenotypeInputSet::new(self.features.clone(), InputProvenance::FullDataset)
    }
}

fn missing(field: &str) -> bool {
    matches!(field.trim(), "" | "NA" | "na" | "NaN" | "nan" | "?" | "null")
}

/// Loads a comma-separated dataset. Labels are re-indexed densely in order
/// of first appearance. Ragged rows, unparseable numbers and missing values
/// are rejected with their 1-based line number.
pub fn load_dataset(path: &Path, options: &LoadOptions) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    load_dataset_from_reader(file, path, &name, options)
}

pub fn load_dataset_from_reader<R: Read>(
    reader: R,
    path: &Path,
    name: &str,
    options: &LoadOptions,
) -> Result<Dataset> {
    let fail = |row: usize, reason: String| Error::Dataset {
        path: path.to_path_buf(),
        row,
        reason,
    };
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Option<Vec<String>> = if options.has_header {
        Some(csv.headers()?.iter().map(str::to_string).collect())
    } else {
        None
    };
    let mut width = header.as_ref().map(Vec::len);
    let mut label_col = None;
    let resolve = |width: usize| -> Result<usize> {
        let col = match &options.label {
            LabelColumn::Last => width.checked_sub(1),
            LabelColumn::Index(i) => Some(*i),
            LabelColumn::Name(n) => header
                .as_ref()
                .and_then(|h| h.iter().position(|c| c == n)),
        };
        match col {
            Some(c) if c < width => Ok(c),
            _ => Err(fail(1, format!("label column {:?} not found", options.label))),
        }
    };
    if let Some(w) = width {
        label_col = Some(resolve(w)?);
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    let mut class_index: HashMap<String, usize> = HashMap::new();
    let first_line = if options.has_header { 2 } else { 1 };
    for (k, record) in csv.records().enumerate() {
        let line = first_line + k;
        let record = record?;
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(fail(line, format!("expected {w} fields, found {}", record.len())));
        }
        let lc = match label_col {
            Some(c) => c,
            None => *label_col.insert(resolve(w)?),
        };
        for (c, field) in record.iter().enumerate() {
            if missing(field) {
                return Err(fail(line, format!("missing value in column {}", c + 1)));
            }
            if c == lc {
                continue;
            }
            let v: f64 = field
                .parse()
                .map_err(|_| fail(line, format!("cannot parse {field:?} in column {} as a number", c + 1)))?;
            if !v.is_finite() {
                return Err(fail(line, format!("non-finite value in column {}", c + 1)));
            }
            values.push(v);
        }
        let label = &record[lc];
        let next = class_names.len();
        let idx = *class_index.entry(label.to_string()).or_insert_with(|| {
            class_names.push(label.to_string());
            next
        });
        labels.push(idx);
    }
    let (Some(w), Some(lc)) = (width, label_col) else {
        return Err(fail(first_line, "no data rows".into()));
    };
    if labels.is_empty() {
        return Err(fail(first_line, "no data rows".into()));
    }
    let p = w - 1;
    let features = DMatrix::from_row_slice(labels.len(), p, &values);
    let feature_names = match header {
        Some(h) => h.into_iter().enumerate().filter(|(c, _)| *c != lc).map(|(_, n)| n).collect(),
        None => (0..p).map(|c| format!("x{c}")).collect(),
    };
    Ok(Dataset {
        name: name.to_string(),
        features,
        labels,
        class_names,
        feature_names,
    })
}

/// Min-max scales every feature column to [0, 1]; constant columns map to 0.
pub fn normalize(dataset: &Dataset) -> Dataset {
    let mut out = dataset.clone();
    for mut col in out.features.column_iter_mut() {
        let (lo, hi) = (col.min(), col.max());
        let span = hi - lo;
        for v in col.iter_mut() {
            *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
        }
    }
    out
}

/// Keeps `ceil(fraction * size)` randomly chosen rows of every class (at
/// least one), preserving row order.
pub fn stratified_subsample<R: Rng + ?Sized>(dataset: &Dataset, fraction: f64, rng: &mut R) -> Result<Dataset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidExperiment(format!("subsample fraction {fraction} outside (0, 1]")));
    }
    let mut keep = Vec::new();
    for class in 0..dataset.class_count() {
        let rows: Vec<usize> = (0..dataset.len()).filter(|&r| dataset.labels[r] == class).collect();
        if rows.is_empty() {
            continue;
        }
        let n = ((fraction * rows.len() as f64).ceil() as usize).clamp(1, rows.len());
        keep.extend(sample(rng, rows.len(), n).into_iter().map(|i| rows[i]));
    }
    keep.sort_unstable();
    let features = DMatrix::from_fn(keep.len(), dataset.num_features(), |r, c| dataset.features[(keep[r], c)]);
    Ok(Dataset {
        name: dataset.name.clone(),
        features,
        labels: keep.iter().map(|&r| dataset.labels[r]).collect(),
        class_names: dataset.class_names.clone(),
        feature_names: dataset.feature_names.clone(),
    })
}

fn check_shapes(genotype: &Genotype, dataset: &Dataset) -> Result<()> {
    let config = genotype.config();
    if config.num_outputs() != dataset.class_count() {
        return Err(Error::InvalidConfig(format!(
            "network has {} outputs but the dataset has {} classes",
            config.num_outputs(),
            dataset.class_count()
        )));
    }
    if config.num_inputs() != dataset.num_features() {
        return Err(Error::InputShape {
            expected: config.num_inputs(),
            got: dataset.num_features(),
        });
    }
    Ok(())
}

/// Index of the largest value; the lowest index wins ties.
fn argmax(row: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in row.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Mean over samples of 1 for a correct prediction, otherwise the softmax
/// probability assigned to the true class.
pub fn adjusted_accuracy(genotype: &Genotype, dataset: &Dataset) -> Result<f64> {
    check_shapes(genotype, dataset)?;
    let probs = evaluate_ann(genotype, &dataset.features, PostTransform::Softmax)?.outputs;
    let total: f64 = dataset
        .labels
        .iter()
        .enumerate()
        .map(|(r, &label)| {
            let row = probs.row(r);
            if argmax(row.iter().copied()) == label {
                1.0
            } else {
                row[label]
            }
        })
        .sum();
    Ok(total / dataset.len() as f64)
}

/// Fraction of samples whose argmax prediction is correct.
pub fn accuracy(genotype: &Genotype, dataset: &Dataset) -> Result<f64> {
    check_shapes(genotype, dataset)?;
    let out = evaluate_ann(genotype, &dataset.features, PostTransform::None)?.outputs;
    let correct = dataset
        .labels
        .iter()
        .enumerate()
        .filter(|(r, &label)| argmax(out.row(*r).iter().copied()) == label)
        .count();
    Ok(correct as f64 / dataset.len() as f64)
}
