//! Surrogate-assisted neuroevolution loop.
//!
//! After `init_size` random networks are evaluated, every iteration fits a
//! Kriging model on a subset of the archive, searches for the genotype with
//! the largest expected improvement using a (1+4)-ES on the model, and
//! evaluates only that genotype on the true objective. Iterations alternate
//! between a local phase around the archive best and a global phase seeded by
//! random screening, starting with the local phase.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;

use crate::cgp::{CgpConfig, Genotype, Mutation};
use crate::distance::{DistanceKind, Features};
use crate::error::{Error, Result};
use crate::evolution::{es_run, EsConfig};
use crate::kriging::{expected_improvement, KrigingModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Init,
    Local,
    Global,
    /// Model fit failed; a random genotype was proposed instead.
    Fallback,
    /// Baseline rows: random search and the plain ES.
    Random,
    Es,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Init => "init",
            Phase::Local => "local",
            Phase::Global => "global",
            Phase::Fallback => "fallback",
            Phase::Random => "random",
            Phase::Es => "es",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Surrogate search settings of one phase. `screens` counts the candidates
/// scored before the ES starts (for the local phase the archive best plus
/// `screens - 1` of its mutants, for the global phase random genotypes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSettings {
    pub mutation: Mutation,
    pub screens: usize,
    pub es_budget: usize,
}

#[derive(Debug, Clone)]
pub struct SmbneConfig {
    pub cgp: Arc<CgpConfig>,
    pub distance: DistanceKind,
    /// Random networks evaluated before the first model.
    pub init_size: usize,
    /// Total true objective evaluations.
    pub budget: usize,
    /// Maximum archive subset used to fit each model.
    pub model_size: usize,
    pub lambda: usize,
    pub local: PhaseSettings,
    pub global: PhaseSettings,
}

impl SmbneConfig {
    pub fn new(cgp: Arc<CgpConfig>, distance: DistanceKind, init_size: usize, budget: usize, model_size: usize) -> Result<Self> {
        let config = Self {
            cgp,
            distance,
            init_size,
            budget,
            model_size,
            lambda: 4,
            local: PhaseSettings {
                mutation: Mutation::Probabilistic { rate: 0.05 },
                screens: 10,
                es_budget: 400,
            },
            global: PhaseSettings {
                mutation: Mutation::Probabilistic { rate: 0.15 },
                screens: 1000,
                es_budget: 400,
            },
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.init_size < 1 || self.init_size > self.budget {
            return bad(format!("init size {} must be in [1, budget = {}]", self.init_size, self.budget));
        }
        if self.model_size < 5 {
            return bad(format!("model size {} is below 5", self.model_size));
        }
        for (name, p) in [("local", &self.local), ("global", &self.global)] {
            if p.screens < 1 {
                return bad(format!("{name} phase needs at least one screen"));
            }
            EsConfig::new(self.lambda, p.mutation, p.es_budget)
                .map_err(|e| Error::InvalidConfig(format!("{name} phase: {e}")))?;
        }
        Ok(())
    }
}

/// Append-only record of truthfully evaluated genotypes, with cached
/// distance features and the pairwise distances among all entries.
#[derive(Debug, Clone)]
pub struct Archive {
    kind: DistanceKind,
    genotypes: Vec<Genotype>,
    fitness: Vec<f64>,
    features: Vec<Features>,
    /// Row `i` holds the component distances from entry `i` to entries `0..i`.
    distances: Vec<Vec<[f64; 3]>>,
}

impl Archive {
    pub fn new(kind: DistanceKind) -> Self {
        Self {
            kind,
            genotypes: Vec::new(),
            fitness: Vec::new(),
            features: Vec::new(),
            distances: Vec::new(),
        }
    }

    pub fn push(&mut self, genotype: Genotype, fitness: f64) -> Result<()> {
        if !fitness.is_finite() {
            return Err(Error::NonFiniteFitness {
                value: fitness,
                evaluation: self.len() + 1,
            });
        }
        let features = self.kind.prepare(&genotype)?;
        let row = self
            .features
            .iter()
            .map(|other| self.kind.distances(&features, other))
            .collect::<Result<Vec<_>>>()?;
        self.genotypes.push(genotype);
        self.fitness.push(fitness);
        self.features.push(features);
        self.distances.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.genotypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genotypes.is_empty()
    }

    pub fn genotypes(&self) -> &[Genotype] {
        &self.genotypes
    }

    pub fn fitness(&self) -> &[f64] {
        &self.fitness
    }

    pub fn features(&self) -> &[Features] {
        &self.features
    }

    pub fn kind(&self) -> &DistanceKind {
        &self.kind
    }

    /// Index of the fittest entry (earliest on ties).
    pub fn best(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &f) in self.fitness.iter().enumerate() {
            if best.is_none_or(|b| f > self.fitness[b]) {
                best = Some(i);
            }
        }
        best
    }

    pub fn distance(&self, i: usize, j: usize) -> [f64; 3] {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => [0.0; 3],
            std::cmp::Ordering::Greater => self.distances[i][j],
            std::cmp::Ordering::Less => self.distances[j][i],
        }
    }

    /// Component distance matrices over the given entries.
    pub fn submatrices(&self, subset: &[usize]) -> Vec<DMatrix<f64>> {
        let n = subset.len();
        (0..self.kind.components())
            .map(|k| DMatrix::from_fn(n, n, |a, b| self.distance(subset[a], subset[b])[k]))
            .collect()
    }
}

/// Indices of the modeling subset: everything when the archive holds at most
/// `m` entries, else the `m / 5` fittest followed by a uniform sample without
/// replacement of the rest.
pub fn select_modeling_set<R: Rng + ?Sized>(fitness: &[f64], m: usize, rng: &mut R) -> Vec<usize> {
    let n = fitness.len();
    if n <= m {
        return (0..n).collect();
    }
    let mut ranked: Vec<usize> = (0..n).collect();
    ranked.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]));
    let elite = m / 5;
    let rest = &ranked[elite..];
    let mut chosen = ranked[..elite].to_vec();
    chosen.extend(sample(rng, rest.len(), m - elite).into_iter().map(|i| rest[i]));
    chosen
}

/// Kriging model over a subset of the archive, scoring genotypes by expected
/// improvement. Fitness is negated internally so that the model minimizes.
pub struct Surrogate<'a> {
    archive: &'a Archive,
    members: Vec<usize>,
    model: KrigingModel,
}

impl<'a> Surrogate<'a> {
    pub fn fit(archive: &'a Archive, members: Vec<usize>) -> Result<Self> {
        let y: Vec<f64> = members.iter().map(|&i| -archive.fitness[i]).collect();
        let model = KrigingModel::fit(archive.submatrices(&members), &y)?;
        Ok(Self { archive, members, model })
    }

    pub fn model(&self) -> &KrigingModel {
        &self.model
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn expected_improvement(&self, genotype: &Genotype) -> Result<f64> {
        let kind = &self.archive.kind;
        let features = kind.prepare(genotype)?;
        let d = self
            .members
            .iter()
            .map(|&i| kind.distances(&features, &self.archive.features[i]))
            .collect::<Result<Vec<_>>>()?;
        let p = self.model.predict_components(&d)?;
        Ok(expected_improvement(p.mean, p.std, self.model.y_best()))
    }
}

#[derive(Debug, Clone)]
pub struct Proposal {
    pub genotype: Genotype,
    pub expected_improvement: f64,
    pub surrogate_evaluations: usize,
}

/// Searches the surrogate for the next genotype to evaluate truthfully.
pub fn propose_candidate<R: Rng + ?Sized>(
    surrogate: &Surrogate<'_>,
    phase: Phase,
    config: &SmbneConfig,
    rng: &mut R,
) -> Result<Proposal> {
    let settings = match phase {
        Phase::Local => &config.local,
        Phase::Global => &config.global,
        other => return Err(Error::InvalidConfig(format!("no surrogate search for phase {other}"))),
    };
    let mut calls = 0usize;
    let mut score = |g: &Genotype| {
        calls += 1;
        surrogate.expected_improvement(g)
    };
    let mut screened: Option<(Genotype, f64)> = None;
    let mut consider = |g: Genotype, v: f64| {
        if screened.as_ref().is_none_or(|s| v > s.1) {
            screened = Some((g, v));
        }
    };
    match phase {
        Phase::Local => {
            let best = surrogate.archive.best().expect("surrogate archive is non-empty");
            let parent = surrogate.archive.genotypes[best].clone();
            for k in 0..settings.screens {
                let g = if k == 0 {
                    parent.clone()
                } else {
                    settings.mutation.apply(&parent, rng)
                };
                let v = score(&g)?;
                consider(g, v);
            }
        }
        _ => {
            for _ in 0..settings.screens {
                let g = Genotype::random(&config.cgp, rng);
                let v = score(&g)?;
                consider(g, v);
            }
        }
    }
    let (seed, _) = screened.expect("at least one screen");
    let es = EsConfig::new(config.lambda, settings.mutation, settings.es_budget)?.with_initial(seed);
    let out = es_run(&mut score, &config.cgp, &es, rng)?;
    Ok(Proposal {
        genotype: out.best,
        expected_improvement: out.fitness,
        surrogate_evaluations: calls,
    })
}

/// One row per true evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    /// 0 during initialization, then the surrogate iteration number from 1.
    pub iteration: usize,
    pub true_evals: usize,
    pub phase: Phase,
    pub fitness: f64,
    pub best_fitness: f64,
    pub theta: Option<f64>,
    pub beta: Option<[f64; 3]>,
    pub nugget: Option<f64>,
}

pub const TRACE_HEADER: &str = "iteration,true_evals,proposal_phase,fitness,best_fitness,theta,beta1,beta2,beta3,nugget";

pub fn write_trace_csv<W: Write>(rows: &[TraceRow], mut out: W) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    writeln!(out, "{TRACE_HEADER}")?;
    for r in rows {
        let beta = r.beta.map(|b| b.map(Some)).unwrap_or([None; 3]);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.iteration,
            r.true_evals,
            r.phase,
            r.fitness,
            r.best_fitness,
            opt(r.theta),
            opt(beta[0]),
            opt(beta[1]),
            opt(beta[2]),
            opt(r.nugget)
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SmbneOutcome {
    pub best: Genotype,
    pub fitness: f64,
    pub archive: Archive,
    pub trace: Vec<TraceRow>,
    pub true_evaluations: usize,
    pub surrogate_evaluations: usize,
}

/// Runs the full loop with exactly `config.budget` calls of `objective`.
pub fn smbne_run<F, R>(mut objective: F, config: &SmbneConfig, rng: &mut R) -> Result<SmbneOutcome>
where
    F: FnMut(&Genotype) -> Result<f64>,
    R: Rng + ?Sized,
{
    config.validate()?;
    let mut archive = Archive::new(config.distance.clone());
    let mut trace = Vec::with_capacity(config.budget);
    let mut best_fitness = f64::NEG_INFINITY;
    let mut surrogate_evaluations = 0;
    let mut evaluate = |g: Genotype, archive: &mut Archive| -> Result<f64> {
        let f = objective(&g)?;
        if !f.is_finite() {
            return Err(Error::NonFiniteFitness {
                value: f,
                evaluation: archive.len() + 1,
            });
        }
        archive.push(g, f)?;
        Ok(f)
    };
    for _ in 0..config.init_size {
        let f = evaluate(Genotype::random(&config.cgp, rng), &mut archive)?;
        best_fitness = best_fitness.max(f);
        trace.push(TraceRow {
            iteration: 0,
            true_evals: archive.len(),
            phase: Phase::Init,
            fitness: f,
            best_fitness,
            theta: None,
            beta: None,
            nugget: None,
        });
    }
    let mut iteration = 0;
    while archive.len() < config.budget {
        iteration += 1;
        let wanted = if iteration % 2 == 1 { Phase::Local } else { Phase::Global };
        let members = select_modeling_set(&archive.fitness, config.model_size, rng);
        let (candidate, phase, model_info) = match Surrogate::fit(&archive, members) {
            Ok(surrogate) => {
                let proposal = propose_candidate(&surrogate, wanted, config, rng)?;
                surrogate_evaluations += proposal.surrogate_evaluations;
                let model = surrogate.model();
                let mut beta = [0.0; 3];
                for (slot, b) in beta.iter_mut().zip(&model.params().beta) {
                    *slot = *b;
                }
                let beta = (model.components() > 1).then_some(beta);
                log::debug!(
                    "iteration {iteration}: {wanted} proposal with EI {:.3e}, theta {:.3e}",
                    proposal.expected_improvement,
                    model.theta()
                );
                (proposal.genotype, wanted, Some((model.theta(), beta, model.nugget())))
            }
            Err(err) => {
                log::warn!("iteration {iteration}: surrogate fit failed ({err}); proposing a random genotype");
                (Genotype::random(&config.cgp, rng), Phase::Fallback, None)
            }
        };
        let f = evaluate(candidate, &mut archive)?;
        best_fitness = best_fitness.max(f);
        trace.push(TraceRow {
            iteration,
            true_evals: archive.len(),
            phase,
            fitness: f,
            best_fitness,
            theta: model_info.map(|m| m.0),
            beta: model_info.and_then(|m| m.1),
            nugget: model_info.map(|m| m.2),
        });
    }
    let best = archive.best().expect("budget >= 1");
    Ok(SmbneOutcome {
        best: archive.genotypes[best].clone(),
        fitness: archive.fitness[best],
        true_evaluations: archive.len(),
        surrogate_evaluations,
        archive,
        trace,
    })
}
