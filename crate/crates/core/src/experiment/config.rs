use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::Deserialize;

use crate::cgp::{CgpConfig, Mutation, PostTransform, Transfer};
use crate::data::{gen_factorial, gen_lhs, Dataset, LabelColumn};
use crate::distance::{DistanceKind, InputProvenance, PhenotypeInputSet, DEFAULT_UNMATCHED_PENALTY};
use crate::error::{Error, Result};
use crate::smbne::{PhaseSettings, SmbneConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Random,
    Cgpann,
    Smbne,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Cgpann => "cgpann",
            Method::Smbne => "smbne",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum LabelSpec {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    /// Relative paths resolve against the configuration file's directory.
    pub dataset: PathBuf,
    pub label: Option<LabelSpec>,
    #[serde(default = "yes")]
    pub header: bool,
    #[serde(default = "yes")]
    pub normalize: bool,
    /// Fraction of each class kept; 1 keeps everything.
    #[serde(default = "one")]
    pub subsample: f64,
    pub method: Method,
    #[serde(default = "one_usize")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CgpSection {
    pub nodes: usize,
    pub arity: usize,
    #[serde(default = "unit_range")]
    pub weight_range: (f64, f64),
    #[serde(default = "all_functions")]
    pub functions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSection {
    pub budget: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutationKind {
    Probabilistic,
    SingleActive,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CgpannSection {
    pub budget: usize,
    #[serde(default = "probabilistic")]
    pub mutation: MutationKind,
    #[serde(default = "five_percent")]
    pub rate: f64,
    #[serde(default = "four")]
    pub lambda: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceName {
    Gd,
    Gidd,
    Phd,
    Md,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputSetKind {
    Full,
    Factorial,
    Lhs,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmbneSection {
    pub budget: usize,
    pub init: usize,
    pub model_size: usize,
    pub distance: DistanceName,
    #[serde(default = "default_penalty")]
    pub penalty: f64,
    #[serde(default = "full")]
    pub input_set: InputSetKind,
    pub input_size: Option<usize>,
    pub input_path: Option<PathBuf>,
    #[serde(default = "yes")]
    pub softmax: bool,
    #[serde(default = "five_percent")]
    pub local_rate: f64,
    #[serde(default = "fifteen_percent")]
    pub global_rate: f64,
    #[serde(default = "ten")]
    pub local_screens: usize,
    #[serde(default = "thousand")]
    pub global_screens: usize,
    #[serde(default = "four_hundred")]
    pub es_budget: usize,
    #[serde(default = "probabilistic")]
    pub mutation: MutationKind,
}

/// Declarative experiment description: an `[experiment]` table, a `[cgp]`
/// table, and one table per method (only the selected one is required).
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub experiment: ExperimentSection,
    pub cgp: CgpSection,
    pub random: Option<RandomSection>,
    pub cgpann: Option<CgpannSection>,
    pub smbne: Option<SmbneSection>,
    /// Directory against which relative paths resolve.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn yes() -> bool {
    true
}
fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn four() -> usize {
    4
}
fn ten() -> usize {
    10
}
fn thousand() -> usize {
    1000
}
fn four_hundred() -> usize {
    400
}
fn five_percent() -> f64 {
    0.05
}
fn fifteen_percent() -> f64 {
    0.15
}
fn default_penalty() -> f64 {
    DEFAULT_UNMATCHED_PENALTY
}
fn unit_range() -> (f64, f64) {
    (-1.0, 1.0)
}
fn all_functions() -> Vec<String> {
    Transfer::ALL.iter().map(|t| t.name().to_string()).collect()
}
fn probabilistic() -> MutationKind {
    MutationKind::Probabilistic
}
fn full() -> InputSetKind {
    InputSetKind::Full
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidExperiment(msg.into())
}

fn mutation(kind: MutationKind, rate: f64) -> Mutation {
    match kind {
        MutationKind::Probabilistic => Mutation::Probabilistic { rate },
        MutationKind::SingleActive => Mutation::SingleActive,
    }
}

impl FromStr for ExperimentSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

impl ExperimentSpec {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut spec: ExperimentSpec = text.parse()?;
        spec.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(spec)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.resolve(&self.experiment.dataset)
    }

    pub fn label(&self) -> LabelColumn {
        match &self.experiment.label {
            None => LabelColumn::Last,
            Some(LabelSpec::Index(i)) => LabelColumn::Index(*i),
            Some(LabelSpec::Name(n)) => LabelColumn::Name(n.clone()),
        }
    }

    /// Total true evaluations of the selected method.
    pub fn budget(&self) -> usize {
        match self.experiment.method {
            Method::Random => self.random.as_ref().map_or(0, |s| s.budget),
            Method::Cgpann => self.cgpann.as_ref().map_or(0, |s| s.budget),
            Method::Smbne => self.smbne.as_ref().map_or(0, |s| s.budget),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if e.replications < 1 {
            return Err(invalid("replications must be at least 1"));
        }
        if !(e.subsample > 0.0 && e.subsample <= 1.0) {
            return Err(invalid(format!("subsample {} outside (0, 1]", e.subsample)));
        }
        if e.name.is_empty() || e.name.contains(['/', '\\']) {
            return Err(invalid(format!("experiment name {:?} is not a plain file name", e.name)));
        }
        self.function_set()?;
        match e.method {
            Method::Random => {
                let s = self.random.as_ref().ok_or_else(|| invalid("method random needs a [random] table"))?;
                if s.budget < 1 {
                    return Err(invalid("budget must be at least 1"));
                }
            }
            Method::Cgpann => {
                let s = self.cgpann.as_ref().ok_or_else(|| invalid("method cgpann needs a [cgpann] table"))?;
                crate::evolution::EsConfig::new(s.lambda, mutation(s.mutation, s.rate), s.budget)?;
            }
            Method::Smbne => {
                let s = self.smbne.as_ref().ok_or_else(|| invalid("method smbne needs a [smbne] table"))?;
                if s.init < 1 || s.init > s.budget {
                    return Err(invalid(format!("init {} must be in [1, budget = {}]", s.init, s.budget)));
                }
                if s.model_size < 5 {
                    return Err(invalid("model_size must be at least 5"));
                }
                if !(s.penalty.is_finite() && s.penalty > 0.0) {
                    return Err(invalid("penalty must be positive"));
                }
                let needs_inputs = matches!(s.distance, DistanceName::Phd | DistanceName::Md);
                if needs_inputs {
                    match s.input_set {
                        InputSetKind::Factorial | InputSetKind::Lhs if s.input_size.is_none() => {
                            return Err(invalid("factorial and lhs input sets need input_size"));
                        }
                        InputSetKind::Csv if s.input_path.is_none() => {
                            return Err(invalid("csv input set needs input_path"));
                        }
                        _ => {}
                    }
                }
            }
        }
        Ok(())
    }

    fn function_set(&self) -> Result<Vec<Transfer>> {
        self.cgp
            .functions
            .iter()
            .map(|f| f.parse::<Transfer>().map_err(|_| invalid(format!("unknown transfer function {f:?}"))))
            .collect()
    }

    pub fn cgp_config(&self, dataset: &Dataset) -> Result<Arc<CgpConfig>> {
        Ok(Arc::new(CgpConfig::new(
            dataset.num_features(),
            self.cgp.nodes,
            dataset.class_count(),
            self.cgp.arity,
            self.cgp.weight_range,
            self.function_set()?,
        )?))
    }

    pub fn es_config(&self) -> Result<crate::evolution::EsConfig> {
        let s = self.cgpann.as_ref().ok_or_else(|| invalid("missing [cgpann] table"))?;
        crate::evolution::EsConfig::new(s.lambda, mutation(s.mutation, s.rate), s.budget)
    }

    /// Phenotype input set for PhD-based distances; designs are seeded so that
    /// each replication draws its own LHS.
    pub fn input_set(&self, dataset: &Dataset, seed: u64) -> Result<Arc<PhenotypeInputSet>> {
        let s = self.smbne.as_ref().ok_or_else(|| invalid("missing [smbne] table"))?;
        let p = dataset.num_features();
        let set = match s.input_set {
            InputSetKind::Full => dataset.input_set()?,
            InputSetKind::Factorial => gen_factorial(p, s.input_size.unwrap_or(2 * p + 1))?,
            InputSetKind::Lhs => {
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1a75);
                gen_lhs(p, s.input_size.unwrap_or(p), &mut rng)?
            }
            InputSetKind::Csv => {
                let path = self.resolve(s.input_path.as_deref().ok_or_else(|| invalid("missing input_path"))?);
                PhenotypeInputSet::from_csv_path(&path, InputProvenance::Custom)?
            }
        };
        if set.dims() != p {
            return Err(invalid(format!("input set has {} columns, dataset has {p} features", set.dims())));
        }
        Ok(Arc::new(set))
    }

    pub fn smbne_config(&self, cgp: Arc<CgpConfig>, dataset: &Dataset, seed: u64) -> Result<SmbneConfig> {
        let s = self.smbne.as_ref().ok_or_else(|| invalid("missing [smbne] table"))?;
        let post = if s.softmax { PostTransform::Softmax } else { PostTransform::None };
        let distance = match s.distance {
            DistanceName::Gd => DistanceKind::Gd,
            DistanceName::Gidd => DistanceKind::Gidd {
                unmatched_penalty: s.penalty,
            },
            DistanceName::Phd => DistanceKind::Phd {
                inputs: self.input_set(dataset, seed)?,
                post,
            },
            DistanceName::Md => DistanceKind::Md {
                inputs: self.input_set(dataset, seed)?,
                post,
                unmatched_penalty: s.penalty,
            },
        };
        let mut config = SmbneConfig::new(cgp, distance, s.init, s.budget, s.model_size)?;
        config.local = PhaseSettings {
            mutation: mutation(s.mutation, s.local_rate),
            screens: s.local_screens,
            es_budget: s.es_budget,
        };
        config.global = PhaseSettings {
            mutation: mutation(s.mutation, s.global_rate),
            screens: s.global_screens,
            es_budget: s.es_budget,
        };
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMBNE: &str = r#"
[experiment]
name = "iris-phd"
dataset = "iris.csv"
label = "species"
method = "smbne"
replications = 30
seed = 100

[cgp]
nodes = 40
arity = 5

[smbne]
budget = 250
init = 50
model_size = 250
distance = "phd"
"#;

    #[test]
    fn parses_with_defaults() {
        let spec: ExperimentSpec = SMBNE.parse().unwrap();
        assert_eq!(spec.experiment.method, Method::Smbne);
        assert_eq!(spec.experiment.label, Some(LabelSpec::Name("species".into())));
        assert!(spec.experiment.header && spec.experiment.normalize);
        let s = spec.smbne.as_ref().unwrap();
        assert_eq!((s.local_screens, s.global_screens, s.es_budget), (10, 1000, 400));
        assert_eq!((s.local_rate, s.global_rate), (0.05, 0.15));
        assert_eq!(s.input_set, InputSetKind::Full);
        assert_eq!(spec.cgp.functions.len(), 5);
        assert_eq!(spec.budget(), 250);
    }

    #[test]
    fn label_index() {
        let text = SMBNE.replace("label = \"species\"", "label = 4");
        let spec: ExperimentSpec = text.parse().unwrap();
        assert_eq!(spec.label(), LabelColumn::Index(4));
    }

    #[test]
    fn rejects_invalid_specs() {
        let cases = [
            SMBNE.replace("replications = 30", "replications = 0"),
            SMBNE.replace("init = 50", "init = 300"),
            SMBNE.replace("model_size = 250", "model_size = 4"),
            SMBNE.replace("method = \"smbne\"", "method = \"cgpann\""),
            SMBNE.replace("method = \"smbne\"", "method = \"nope\""),
            SMBNE.replace("arity = 5", "arity = 5\nfunctions = [\"relu\"]"),
            SMBNE.replace("distance = \"phd\"", "distance = \"phd\"\ninput_set = \"lhs\""),
            SMBNE.replace("seed = 100", "seed = 100\ntypo = 1"),
            SMBNE.replace("name = \"iris-phd\"", "name = \"a/b\""),
        ];
        for text in cases {
            assert!(matches!(text.parse::<ExperimentSpec>(), Err(Error::InvalidExperiment(_) | Error::InvalidConfig(_))), "{text}");
        }
    }

    #[test]
    fn baseline_tables() {
        let text = r#"
[experiment]
name = "b"
dataset = "x.csv"
method = "cgpann"
[cgp]
nodes = 100
arity = 25
[cgpann]
budget = 549
mutation = "single-active"
"#;
        let spec: ExperimentSpec = text.parse().unwrap();
        let es = spec.es_config().unwrap();
        assert_eq!(es.mutation, Mutation::SingleActive);
        assert_eq!((es.lambda, es.budget), (4, 549));
    }
}
