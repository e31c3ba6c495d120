//! Seeded replication runner, result files and sample comparison.
//!
//! Replication `r` uses seed `base + r` and its own ChaCha8 stream, so results
//! do not depend on scheduling. Output files under the output directory:
//!
//! * `traces/rep_NNN.csv`: one row per true evaluation.
//! * `results.csv`: `replication,seed,best_fitness,true_evals,surrogate_evals,status`.
//! * `summary.csv`: median, mean, sd, min, max and n of the final fitness.
//! * `timing.csv`: wall time per replication (kept apart so the other files
//!   are reproducible byte for byte).

mod config;
pub mod stats;

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::data::{adjusted_accuracy, load_dataset, normalize, stratified_subsample, Dataset, LoadOptions};
use crate::error::{Error, Result};
use crate::evolution::{es_run, random_search};
use crate::smbne::{smbne_run, write_trace_csv, Phase, TraceRow};

pub use config::{
    CgpSection, CgpannSection, DistanceName, ExperimentSection, ExperimentSpec, InputSetKind, LabelSpec, Method,
    MutationKind, RandomSection, SmbneSection,
};
pub use stats::{rank_sum_test, summarize, RankSum, Summary};

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub replication: usize,
    pub seed: u64,
    pub best_fitness: f64,
    pub true_evals: usize,
    pub surrogate_evals: usize,
    /// `ok`, or the error message of a failed replication.
    pub status: String,
    pub wall_seconds: f64,
    pub trace: Vec<TraceRow>,
}

impl ReplicationResult {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub name: String,
    pub method: Method,
    pub replications: Vec<ReplicationResult>,
    pub summary: Summary,
}

impl ExperimentResult {
    pub fn failures(&self) -> usize {
        self.replications.iter().filter(|r| !r.ok()).count()
    }

    pub fn final_fitness(&self) -> Vec<f64> {
        self.replications.iter().filter(|r| r.ok()).map(|r| r.best_fitness).collect()
    }
}

/// Loads, optionally normalizes the dataset named by the spec.
pub fn prepare_dataset(spec: &ExperimentSpec) -> Result<Dataset> {
    let options = LoadOptions {
        has_header: spec.experiment.header,
        label: spec.label(),
    };
    let dataset = load_dataset(&spec.dataset_path(), &options)?;
    Ok(if spec.experiment.normalize {
        normalize(&dataset)
    } else {
        dataset
    })
}

/// Baseline trace: each evaluation's fitness and the running best.
fn baseline_trace(values: &[f64], phase: Phase) -> Vec<TraceRow> {
    let mut best = f64::NEG_INFINITY;
    values
        .iter()
        .enumerate()
        .map(|(k, &f)| {
            best = best.max(f);
            TraceRow {
                iteration: k + 1,
                true_evals: k + 1,
                phase,
                fitness: f,
                best_fitness: best,
                theta: None,
                beta: None,
                nugget: None,
            }
        })
        .collect()
}

struct RunOutput {
    best_fitness: f64,
    true_evals: usize,
    surrogate_evals: usize,
    trace: Vec<TraceRow>,
}

fn run_method(spec: &ExperimentSpec, dataset: &Dataset, seed: u64) -> Result<RunOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dataset = if spec.experiment.subsample < 1.0 {
        stratified_subsample(dataset, spec.experiment.subsample, &mut rng)?
    } else {
        dataset.clone()
    };
    let cgp = spec.cgp_config(&dataset)?;
    let mut values = Vec::with_capacity(spec.budget());
    let mut objective = |g: &crate::cgp::Genotype| {
        let f = adjusted_accuracy(g, &dataset)?;
        values.push(f);
        Ok(f)
    };
    match spec.experiment.method {
        Method::Random => {
            let budget = spec.budget();
            let out = random_search(&mut objective, budget, &cgp, &mut rng)?;
            Ok(RunOutput {
                best_fitness: out.fitness,
                true_evals: out.evaluations,
                surrogate_evals: 0,
                trace: baseline_trace(&values, Phase::Random),
            })
        }
        Method::Cgpann => {
            let es = spec.es_config()?;
            let out = es_run(&mut objective, &cgp, &es, &mut rng)?;
            Ok(RunOutput {
                best_fitness: out.fitness,
                true_evals: out.evaluations,
                surrogate_evals: 0,
                trace: baseline_trace(&values, Phase::Es),
            })
        }
        Method::Smbne => {
            let config = spec.smbne_config(cgp, &dataset, seed)?;
            let out = smbne_run(&mut objective, &config, &mut rng)?;
            Ok(RunOutput {
                best_fitness: out.fitness,
                true_evals: out.true_evaluations,
                surrogate_evals: out.surrogate_evaluations,
                trace: out.trace,
            })
        }
    }
}

/// Runs one replication; failures are captured in the status field.
pub fn run_replication(spec: &ExperimentSpec, dataset: &Dataset, replication: usize) -> ReplicationResult {
    let seed = spec.experiment.seed.wrapping_add(replication as u64);
    let start = Instant::now();
    let outcome = run_method(spec, dataset, seed);
    let wall_seconds = start.elapsed().as_secs_f64();
    match outcome {
        Ok(out) => ReplicationResult {
            replication,
            seed,
            best_fitness: out.best_fitness,
            true_evals: out.true_evals,
            surrogate_evals: out.surrogate_evals,
            status: "ok".into(),
            wall_seconds,
            trace: out.trace,
        },
        Err(err) => {
            log::error!("replication {replication} (seed {seed}) failed: {err}");
            ReplicationResult {
                replication,
                seed,
                best_fitness: f64::NAN,
                true_evals: 0,
                surrogate_evals: 0,
                status: format!("error: {err}"),
                wall_seconds,
                trace: Vec::new(),
            }
        }
    }
}

/// Runs every replication in parallel (on `threads` workers when given) and
/// returns results ordered by replication index.
pub fn run_experiment(spec: &ExperimentSpec, threads: Option<usize>) -> Result<ExperimentResult> {
    spec.validate()?;
    let dataset = prepare_dataset(spec)?;
    // Surface configuration problems once instead of in every replication.
    spec.cgp_config(&dataset)?;
    let reps: Vec<usize> = (0..spec.experiment.replications).collect();
    let run = || -> Vec<ReplicationResult> {
        reps.par_iter()
            .map(|&r| {
                let result = run_replication(spec, &dataset, r);
                log::info!(
                    "{} replication {r}: fitness {} in {:.1}s",
                    spec.experiment.name,
                    result.best_fitness,
                    result.wall_seconds
                );
                result
            })
            .collect()
    };
    let replications = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidExperiment(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    let finals: Vec<f64> = replications.iter().filter(|r| r.ok()).map(|r| r.best_fitness).collect();
    Ok(ExperimentResult {
        name: spec.experiment.name.clone(),
        method: spec.experiment.method,
        summary: summarize(&finals),
        replications,
    })
}

/// Writes `contents` to `path` through a temporary sibling and a rename.
fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut file = BufWriter::new(fs::File::create(&tmp)?);
        write(&mut file)?;
        file.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes traces, `results.csv`, `summary.csv` and `timing.csv` under `dir`.
pub fn write_results(result: &ExperimentResult, dir: &Path) -> Result<()> {
    let traces = dir.join("traces");
    fs::create_dir_all(&traces)?;
    for rep in &result.replications {
        write_atomic(&traces.join(format!("rep_{:03}.csv", rep.replication)), |w| {
            write_trace_csv(&rep.trace, w)
        })?;
    }
    write_atomic(&dir.join("results.csv"), |w| {
        let mut csv = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        csv.write_record(["replication", "seed", "best_fitness", "true_evals", "surrogate_evals", "status"])?;
        for r in &result.replications {
            csv.write_record([
                r.replication.to_string(),
                r.seed.to_string(),
                r.best_fitness.to_string(),
                r.true_evals.to_string(),
                r.surrogate_evals.to_string(),
                r.status.clone(),
            ])?;
        }
        csv.flush()?;
        Ok(())
    })?;
    write_atomic(&dir.join("summary.csv"), |w| {
        let s = &result.summary;
        writeln!(w, "experiment,method,n,failures,median,mean,sd,min,max")?;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            result.name,
            result.method.name(),
            s.n,
            result.failures(),
            s.median,
            s.mean,
            s.sd,
            s.min,
            s.max
        )?;
        Ok(())
    })?;
    write_atomic(&dir.join("timing.csv"), |w| {
        writeln!(w, "replication,wall_seconds")?;
        for r in &result.replications {
            writeln!(w, "{},{:.3}", r.replication, r.wall_seconds)?;
        }
        Ok(())
    })
}

#[derive(Debug, Deserialize)]
struct ResultRow {
    best_fitness: f64,
    status: String,
}

/// Final fitness values of the successful replications in a `results.csv`.
pub fn read_final_fitness(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut values = Vec::new();
    for (k, row) in reader.deserialize::<ResultRow>().enumerate() {
        let row = row.map_err(|e| Error::Dataset {
            path: path.to_path_buf(),
            row: k + 2,
            reason: e.to_string(),
        })?;
        if row.status == "ok" {
            values.push(row.best_fitness);
        }
    }
    Ok(values)
}

/// Comparison of two result samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub labels: [String; 2],
    pub summaries: [Summary; 2],
    pub test: RankSum,
}

/// Minimum sample size accepted by [`compare`].
pub const MIN_COMPARE_SIZE: usize = 5;

pub fn compare(labels: [String; 2], a: &[f64], b: &[f64]) -> Result<Comparison> {
    for (label, sample) in labels.iter().zip([a, b]) {
        if sample.len() < MIN_COMPARE_SIZE {
            return Err(Error::InvalidExperiment(format!(
                "{label}: {} successful replications, at least {MIN_COMPARE_SIZE} needed",
                sample.len()
            )));
        }
    }
    Ok(Comparison {
        labels,
        summaries: [summarize(a), summarize(b)],
        test: rank_sum_test(a, b),
    })
}

pub fn compare_files(a: &Path, b: &Path) -> Result<Comparison> {
    let label = |p: &Path| p.display().to_string();
    compare([label(a), label(b)], &read_final_fitness(a)?, &read_final_fitness(b)?)
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut order = [0usize, 1];
        order.sort_by(|&i, &j| self.summaries[j].median.total_cmp(&self.summaries[i].median));
        writeln!(f, "rank  median    mean      sd        n   sample")?;
        for (rank, &i) in order.iter().enumerate() {
            let s = &self.summaries[i];
            writeln!(
                f,
                "{:<5} {:<9.4} {:<9.4} {:<9.4} {:<3} {}",
                rank + 1,
                s.median,
                s.mean,
                s.sd,
                s.n,
                self.labels[i]
            )?;
        }
        let t = &self.test;
        writeln!(
            f,
            "Wilcoxon rank-sum ({}): W = {}, U = {}, p two-sided = {:.4e}, p(first > second) = {:.4e}, p(first < second) = {:.4e}",
            if t.exact { "exact" } else { "normal approximation" },
            t.w,
            t.u,
            t.p_two_sided,
            t.p_greater,
            t.p_less
        )
    }
}

/// Default output directory for an experiment.
pub fn default_output_dir(spec: &ExperimentSpec) -> PathBuf {
    PathBuf::from("results").join(&spec.experiment.name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(method: &str, extra: &str, reps: usize) -> ExperimentSpec {
        let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/iris.csv");
        let text = format!(
            r#"
[experiment]
name = "t"
dataset = "{}"
method = "{method}"
replications = {reps}
seed = 7
[cgp]
nodes = 10
arity = 3
{extra}
"#,
            data.display()
        );
        text.parse().unwrap()
    }

    #[test]
    fn single_random_replication() {
        let s = spec("random", "[random]\nbudget = 1", 1);
        let result = run_experiment(&s, Some(1)).unwrap();
        assert_eq!(result.replications.len(), 1);
        assert_eq!(result.replications[0].trace.len(), 1);
        assert_eq!(result.replications[0].seed, 7);
    }

    #[test]
    fn seeds_follow_replication_index() {
        let s = spec("cgpann", "[cgpann]\nbudget = 21", 4);
        let result = run_experiment(&s, Some(2)).unwrap();
        let seeds: Vec<u64> = result.replications.iter().map(|r| r.seed).collect();
        assert_eq!(seeds, vec![7, 8, 9, 10]);
        for r in &result.replications {
            assert_eq!(r.true_evals, 21);
            assert_eq!(r.trace.len(), 21);
            assert_eq!(r.trace.last().unwrap().best_fitness, r.best_fitness);
        }
        let alone = run_replication(&s, &prepare_dataset(&s).unwrap(), 2);
        assert_eq!(alone.trace, result.replications[2].trace);
    }

    #[test]
    fn output_files_are_reproducible() {
        let s = spec(
            "smbne",
            "[smbne]\nbudget = 8\ninit = 6\nmodel_size = 10\ndistance = \"phd\"\nglobal_screens = 50\nes_budget = 21",
            2,
        );
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        for d in &dirs {
            write_results(&run_experiment(&s, None).unwrap(), d.path()).unwrap();
        }
        for file in ["results.csv", "summary.csv", "traces/rep_000.csv", "traces/rep_001.csv"] {
            let a = fs::read(dirs[0].path().join(file)).unwrap();
            let b = fs::read(dirs[1].path().join(file)).unwrap();
            assert_eq!(a, b, "{file}");
            assert!(!a.contains(&b'\r'));
        }
        let finals = read_final_fitness(&dirs[0].path().join("results.csv")).unwrap();
        assert_eq!(finals.len(), 2);
        let summary = fs::read_to_string(dirs[0].path().join("summary.csv")).unwrap();
        let median: f64 = summary.lines().nth(1).unwrap().split(',').nth(4).unwrap().parse().unwrap();
        assert_eq!(median, stats::median(&finals));
    }

    #[test]
    fn failing_replication_is_recorded() {
        // Nodes of arity 3 cannot be built with an empty weight interval; the
        // failure surfaces as a configuration error before any replication.
        let mut s = spec("random", "[random]\nbudget = 3", 2);
        s.cgp.weight_range = (1.0, 1.0);
        assert!(run_experiment(&s, Some(1)).is_err());
        // A bad input-set path fails inside each replication instead.
        let s = spec(
            "smbne",
            "[smbne]\nbudget = 8\ninit = 6\nmodel_size = 10\ndistance = \"phd\"\ninput_set = \"csv\"\ninput_path = \"/nonexistent.csv\"",
            2,
        );
        let result = run_experiment(&s, Some(1)).unwrap();
        assert_eq!(result.failures(), 2);
        assert!(result.replications.iter().all(|r| r.status.starts_with("error")));
    }

    #[test]
    fn comparison_report() {
        let c = compare(["a".into(), "b".into()], &[0.9; 30], &[0.5; 30]).unwrap();
        assert!(c.test.p_two_sided < 1e-3);
        let text = c.to_string();
        assert!(text.lines().nth(1).unwrap().ends_with(" a"));
        let same = compare(["a".into(), "b".into()], &[0.4; 6], &[0.4; 6]).unwrap();
        assert_eq!(same.test.p_two_sided, 1.0);
        assert_eq!(same.summaries[0].median, same.summaries[1].median);
        assert!(compare(["a".into(), "b".into()], &[0.4; 4], &[0.4; 6]).is_err());
    }
}
