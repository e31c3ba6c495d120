use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use smbne_core::data::{gen_factorial, gen_lhs};
use smbne_core::experiment::{compare_files, default_output_dir, run_experiment, write_results, ExperimentSpec};
use smbne_core::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "smbne", version, about = "Surrogate-assisted neuroevolution of CGP neural networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every replication of an experiment configuration.
    Run {
        config: PathBuf,
        /// Base seed; replication r uses seed + r.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        /// Output directory (default: results/<experiment name>).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Compare the final fitness of two results.csv files.
    Compare { csv_a: PathBuf, csv_b: PathBuf },
    /// Write a phenotype input design as headerless CSV.
    GenDesign {
        #[arg(long = "type", value_enum)]
        kind: DesignKind,
        #[arg(long)]
        dims: usize,
        #[arg(long)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
        /// Seed for Latin hypercube designs.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DesignKind {
    Factorial,
    Lhs,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidExperiment(_)
        | Error::InvalidConfig(_)
        | Error::InvalidDesign(_)
        | Error::Dataset { .. }
        | Error::InputShape { .. } => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn run(
    config: PathBuf,
    seed: Option<u64>,
    reps: Option<usize>,
    out: Option<PathBuf>,
    threads: Option<usize>,
) -> Result<u8, (u8, Error)> {
    let config_err = |e: Error| (EXIT_CONFIG, e);
    let mut spec = ExperimentSpec::from_path(&config).map_err(config_err)?;
    if let Some(seed) = seed {
        spec.experiment.seed = seed;
    }
    if let Some(reps) = reps {
        spec.experiment.replications = reps;
    }
    spec.validate().map_err(config_err)?;
    let dataset = spec.dataset_path();
    if !dataset.is_file() {
        return Err(config_err(Error::InvalidExperiment(format!(
            "dataset {} does not exist",
            dataset.display()
        ))));
    }
    let dir = out.unwrap_or_else(|| default_output_dir(&spec));
    let result = run_experiment(&spec, threads).map_err(|e| (exit_code(&e), e))?;
    write_results(&result, &dir).map_err(|e| (EXIT_RUNTIME, e))?;
    let s = &result.summary;
    println!(
        "{}: {} replications, median {:.4}, mean {:.4}, sd {:.4}, min {:.4}, max {:.4}",
        result.name, s.n, s.median, s.mean, s.sd, s.min, s.max
    );
    println!("results written to {}", dir.display());
    if result.failures() > 0 {
        eprintln!("{} replication(s) failed; see results.csv", result.failures());
        return Ok(EXIT_RUNTIME);
    }
    Ok(0)
}

fn gen_design(kind: DesignKind, dims: usize, size: usize, out: PathBuf, seed: u64) -> Result<u8, (u8, Error)> {
    let set = match kind {
        DesignKind::Factorial => gen_factorial(dims, size),
        DesignKind::Lhs => gen_lhs(dims, size, &mut ChaCha8Rng::seed_from_u64(seed)),
    }
    .map_err(|e| (EXIT_CONFIG, e))?;
    let file = std::fs::File::create(&out).map_err(|e| (EXIT_RUNTIME, e.into()))?;
    set.write_csv(std::io::BufWriter::new(file)).map_err(|e| (EXIT_RUNTIME, e))?;
    println!("wrote {} points in {} dimensions to {}", set.len(), dims, out.display());
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            seed,
            reps,
            out,
            threads,
        } => run(config, seed, reps, out, threads),
        Command::Compare { csv_a, csv_b } => match compare_files(&csv_a, &csv_b) {
            Ok(report) => {
                print!("{report}");
                Ok(0)
            }
            Err(e) => Err((exit_code(&e), e)),
        },
        Command::GenDesign {
            kind,
            dims,
            size,
            out,
            seed,
        } => gen_design(kind, dims, size, out, seed),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err((code, err)) => {
            eprintln!("error: {err}");
            ExitCode::from(code)
        }
    }
}
