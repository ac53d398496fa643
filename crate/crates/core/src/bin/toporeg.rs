use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use toporeg::datasets::{self, derive_seed};
use toporeg::harness::{self, ExperimentConfig, Generator, Method};
use toporeg::{Discretization, Error};

#[derive(Parser)]
#[command(name = "toporeg", version, about = "Kernel classifiers with a boundary-topology penalty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset as CSV.
    Synth(SynthArgs),
    /// Train one model on a whole dataset.
    Train(RunArgs),
    /// Nested cross-validation over a hyperparameter grid.
    Cv(RunArgs),
    /// Write a model's decision field on a lattice.
    DumpBoundary(DumpBoundaryArgs),
    /// Write a model's boundary components and persistence pairs.
    DumpPersistence(DumpPersistenceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GeneratorName {
    Moons,
    Blobs,
}

#[derive(Args)]
struct GeneratorArgs {
    /// Synthetic generator.
    #[arg(long, value_enum)]
    generator: Option<GeneratorName>,
    /// Number of points to generate.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Gaussian noise of the moons generator.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    /// Blob centers as `x,y;x,y;...`.
    #[arg(long, default_value = "0,0;3,3")]
    centers: String,
    /// Spread of the blobs generator.
    #[arg(long, default_value_t = 0.5)]
    spread: f64,
}

impl GeneratorArgs {
    fn build(&self) -> Result<Option<Generator>, Error> {
        Ok(match self.generator {
            None => None,
            Some(GeneratorName::Moons) => Some(Generator::Moons { n: self.n, noise_sd: self.noise }),
            Some(GeneratorName::Blobs) => Some(Generator::Blobs {
                n: self.n,
                centers: parse_centers(&self.centers)?,
                spread: self.spread,
            }),
        })
    }
}

fn parse_centers(text: &str) -> Result<Vec<Vec<f64>>, Error> {
    text.split(';')
        .map(|c| {
            c.split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Error::Config(format!("bad center {c:?}: {e}")))
        })
        .collect()
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    generator: GeneratorArgs,
    /// Fraction of labels to flip.
    #[arg(long, default_value_t = 0.0)]
    flip: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DiscretizationArgs {
    /// Lattice with this many vertices per axis.
    #[arg(long, conflicts_with = "knn")]
    grid: Option<usize>,
    /// k-nearest-neighbor graph over the training points.
    #[arg(long)]
    knn: Option<usize>,
}

impl DiscretizationArgs {
    fn build(&self) -> Option<Discretization> {
        match (self.grid, self.knn) {
            (Some(resolution), _) => Some(Discretization::Grid { resolution }),
            (None, Some(k)) => Some(Discretization::Knn { k }),
            (None, None) => None,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Toporeg,
    Klr,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV dataset.
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    generator: GeneratorArgs,
    /// Fraction of labels to flip before training.
    #[arg(long)]
    label_noise: Option<f64>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Penalty weights.
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    /// Kernel widths.
    #[arg(long, value_delimiter = ',')]
    sigma: Option<Vec<f64>>,
    /// Learning rates.
    #[arg(long, value_delimiter = ',')]
    lr: Option<Vec<f64>>,
    /// Iteration budgets.
    #[arg(long, value_delimiter = ',')]
    iters: Option<Vec<usize>>,
    #[command(flatten)]
    discretization: DiscretizationArgs,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(path) = &self.data {
            cfg.data = Some(path.clone());
        }
        if let Some(g) = self.generator.build()? {
            cfg.generator = Some(g);
            if self.data.is_none() {
                cfg.data = None;
            }
        }
        if let Some(f) = self.label_noise {
            cfg.label_noise = f;
        }
        if let Some(m) = self.method {
            cfg.method = match m {
                MethodArg::Toporeg => Method::Toporeg,
                MethodArg::Klr => Method::Klr,
            };
        }
        if let Some(v) = &self.lambda {
            cfg.lambdas = v.clone();
        }
        if let Some(v) = &self.sigma {
            cfg.sigmas = v.clone();
        }
        if let Some(v) = &self.lr {
            cfg.learning_rates = v.clone();
        }
        if let Some(v) = &self.iters {
            cfg.iterations = v.clone();
        }
        if let Some(d) = self.discretization.build() {
            cfg.discretization = Some(d);
        }
        if let Some(l2) = self.l2 {
            cfg.l2 = l2;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct DumpBoundaryArgs {
    /// Model JSON written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Lattice vertices per axis.
    #[arg(long, default_value_t = 300)]
    resolution: usize,
    /// Output CSV path.
    #[arg(long, default_value = "boundary.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct DumpPersistenceArgs {
    /// Model JSON written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    discretization: DiscretizationArgs,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn synth(args: &SynthArgs) -> Result<(), Error> {
    let generator = args
        .generator
        .build()?
        .ok_or_else(|| Error::Config("--generator is required".into()))?;
    let mut ds = generator.generate(derive_seed(args.seed, "generator"))?;
    if args.flip > 0.0 {
        ds = datasets::flip_labels(&ds, args.flip, derive_seed(args.seed, "label-noise"))?;
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let provenance = format!("{} flip={} seed={}", generator.describe(), args.flip, args.seed);
    datasets::save_csv(&ds, &args.out, Some(&provenance))?;
    log::info!("wrote {} rows to {}", ds.len(), args.out.display());
    Ok(())
}

fn train(args: &RunArgs) -> Result<(), Error> {
    let cfg = args.config()?;
    let ds = cfg.load_dataset()?;
    create_dir(&cfg.out)?;
    let (report, model, timings, outcome) = harness::train_full(&ds, &cfg);
    harness::write_json(&report, &cfg.out.join("report.json"))?;
    harness::write_json(&timings, &cfg.out.join("timings.json"))?;
    if let Some(model) = model {
        harness::write_json(&model, &cfg.out.join("model.json"))?;
    }
    outcome
}

fn cv(args: &RunArgs) -> Result<(), Error> {
    let cfg = args.config()?;
    create_dir(&cfg.out)?;
    let (report, timings) = harness::run_cv(&cfg)?;
    harness::write_json(&report, &cfg.out.join("report.json"))?;
    harness::write_json(&timings, &cfg.out.join("timings.json"))?;
    println!("mean error {:.4} (sd {:.4})", report.mean_error, report.sd_error);
    Ok(())
}

fn dump_boundary(args: &DumpBoundaryArgs) -> Result<(), Error> {
    let model = harness::read_model(&args.model)?;
    harness::dump_boundary(&model, args.resolution, &args.out)?;
    Ok(())
}

fn dump_persistence(args: &DumpPersistenceArgs) -> Result<(), Error> {
    let model = harness::read_model(&args.model)?;
    let disc = args
        .discretization
        .build()
        .unwrap_or_else(|| ExperimentConfig::default().discretization_for(model.dim()));
    harness::dump_persistence(&model, disc, &args.out)?;
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Divergence { .. } => 3,
        Error::Io { .. } | Error::Csv(_) | Error::Json(_) | Error::Parse { .. } => 4,
        Error::Config(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Cv(a) => cv(a),
        Command::DumpBoundary(a) => dump_boundary(a),
        Command::DumpPersistence(a) => dump_persistence(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
