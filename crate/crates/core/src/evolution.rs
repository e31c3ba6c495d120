//! (1+lambda) evolution strategy and a random-search baseline.
//!
//! Both maximize an objective. The objective is fallible so that surrogate
//! criteria can propagate model errors; any non-finite value aborts the run.

use std::sync::Arc;

use rand::Rng;

use crate::cgp::{CgpConfig, Genotype, Mutation};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct EsConfig {
    pub lambda: usize,
    pub mutation: Mutation,
    /// Objective calls, counting the evaluation of the initial parent.
    pub budget: usize,
    /// Starting parent; drawn at random when `None`.
    pub initial: Option<Genotype>,
}

impl EsConfig {
    pub fn new(lambda: usize, mutation: Mutation, budget: usize) -> Result<Self> {
        let config = Self {
            lambda,
            mutation,
            budget,
            initial: None,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_initial(mut self, parent: Genotype) -> Self {
        self.initial = Some(parent);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda < 1 {
            return Err(Error::InvalidConfig("lambda must be at least 1".into()));
        }
        if self.budget < self.lambda + 1 {
            return Err(Error::InvalidConfig(format!(
                "budget {} is below lambda + 1 = {}",
                self.budget,
                self.lambda + 1
            )));
        }
        if let Mutation::Probabilistic { rate } = self.mutation {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::InvalidConfig(format!("mutation rate {rate} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: Genotype,
    pub fitness: f64,
    pub evaluations: usize,
    /// Best-so-far fitness after each objective call.
    pub trace: Vec<f64>,
}

struct Counted<F> {
    objective: F,
    calls: usize,
    trace: Vec<f64>,
    best: f64,
}

impl<F: FnMut(&Genotype) -> Result<f64>> Counted<F> {
    fn new(objective: F, budget: usize) -> Self {
        Self {
            objective,
            calls: 0,
            trace: Vec::with_capacity(budget),
            best: f64::NEG_INFINITY,
        }
    }

    fn eval(&mut self, genotype: &Genotype) -> Result<f64> {
        self.calls += 1;
        let value = (self.objective)(genotype)?;
        if !value.is_finite() {
            return Err(Error::NonFiniteFitness {
                value,
                evaluation: self.calls,
            });
        }
        self.best = self.best.max(value);
        self.trace.push(self.best);
        Ok(value)
    }
}

/// Runs a (1+lambda)-ES. Offspring replace the parent when at least as fit;
/// among equally fit offspring the first generated wins. The last generation
/// is truncated so that exactly `budget` objective calls are made.
pub fn es_run<F, R>(objective: F, cgp: &Arc<CgpConfig>, config: &EsConfig, rng: &mut R) -> Result<SearchOutcome>
where
    F: FnMut(&Genotype) -> Result<f64>,
    R: Rng + ?Sized,
{
    config.validate()?;
    let mut counted = Counted::new(objective, config.budget);
    let mut parent = match &config.initial {
        Some(g) => {
            if !Arc::ptr_eq(g.config(), cgp) && **g.config() != **cgp {
                return Err(Error::ConfigMismatch);
            }
            g.clone()
        }
        None => Genotype::random(cgp, rng),
    };
    let mut parent_fitness = counted.eval(&parent)?;
    while counted.calls < config.budget {
        let brood = config.lambda.min(config.budget - counted.calls);
        let mut champion: Option<(Genotype, f64)> = None;
        for _ in 0..brood {
            let child = config.mutation.apply(&parent, rng);
            let f = counted.eval(&child)?;
            if champion.as_ref().is_none_or(|c| f > c.1) {
                champion = Some((child, f));
            }
        }
        if let Some((child, f)) = champion {
            if f >= parent_fitness {
                parent = child;
                parent_fitness = f;
            }
        }
    }
    Ok(SearchOutcome {
        best: parent,
        fitness: parent_fitness,
        evaluations: counted.calls,
        trace: counted.trace,
    })
}

/// Evaluates `budget` independent random genotypes and returns the first best.
pub fn random_search<F, R>(objective: F, budget: usize, cgp: &Arc<CgpConfig>, rng: &mut R) -> Result<SearchOutcome>
where
    F: FnMut(&Genotype) -> Result<f64>,
    R: Rng + ?Sized,
{
    if budget == 0 {
        return Err(Error::InvalidConfig("random search budget must be at least 1".into()));
    }
    let mut counted = Counted::new(objective, budget);
    let mut best: Option<(Genotype, f64)> = None;
    for _ in 0..budget {
        let g = Genotype::random(cgp, rng);
        let f = counted.eval(&g)?;
        if best.as_ref().is_none_or(|b| f > b.1) {
            best = Some((g, f));
        }
    }
    let (best, fitness) = best.expect("budget >= 1");
    Ok(SearchOutcome {
        best,
        fitness,
        evaluations: counted.calls,
        trace: counted.trace,
    })
}
