use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tnfclust::dataset::Normalization;
use tnfclust::{AffinityMethod, LogBase, PhiMode, SigmaGrid};
use tnfclust_cli::plot::scatter_svg;
use tnfclust_cli::report::emit_table;
use tnfclust_cli::{persist, run, DatasetSource, DatasetSpec, EpsilonSpec, Error, ExperimentConfig, Result, TableFormat};
use tracing::info;

#[derive(Parser)]
#[command(name = "tnfclust", version, about = "Spectral clustering with topological node features")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster one dataset with one method at a fixed σ.
    Cluster(ClusterArgs),
    /// Sweep σ for one dataset and one or more methods.
    Sweep(SweepArgs),
    /// Run a full experiment described by a JSON config.
    Bench(BenchArgs),
    /// Render a 2-D dataset as an SVG scatter plot.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Shape,
    Uci,
    Mnist,
}

#[derive(Args)]
struct DatasetArgs {
    /// Data file (MNIST: the image file).
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value = "shape")]
    family: Family,
    /// Display name (default: file stem).
    #[arg(long)]
    name: Option<String>,
    /// UCI: zero-based column holding the class label.
    #[arg(long, default_value_t = 0)]
    label_column: usize,
    /// UCI: field delimiter.
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// none, zscore or minmax (default depends on the family).
    #[arg(long)]
    preprocess: Option<Normalization>,
    /// MNIST: label file.
    #[arg(long)]
    mnist_labels: Option<PathBuf>,
    /// MNIST: digits to keep.
    #[arg(long, value_delimiter = ',', default_value = "0,8")]
    digits: Vec<u8>,
    /// MNIST: images per digit.
    #[arg(long, default_value_t = 200)]
    per_digit: usize,
    /// MNIST: draw images at random with this seed instead of taking the first ones.
    #[arg(long)]
    sample_seed: Option<u64>,
}

impl DatasetArgs {
    fn spec(&self) -> Result<DatasetSpec> {
        let source = match self.family {
            Family::Shape => DatasetSource::Shape {
                path: self.dataset.clone(),
            },
            Family::Uci => DatasetSource::Uci {
                path: self.dataset.clone(),
                label_column: self.label_column,
                delimiter: self.delimiter,
            },
            Family::Mnist => DatasetSource::Mnist {
                images: self.dataset.clone(),
                labels: self
                    .mnist_labels
                    .clone()
                    .ok_or_else(|| Error::config("mnist_labels", "--mnist-labels is required for MNIST"))?,
                digits: self.digits.clone(),
                per_digit: self.per_digit,
                sample_seed: self.sample_seed,
            },
        };
        Ok(DatasetSpec {
            name: self.name.clone(),
            source,
            preprocessing: self.preprocess,
            epsilon: None,
            k: None,
        })
    }
}

/// Settings shared by every run-type subcommand; each overrides the config.
#[derive(Args)]
struct RunArgs {
    /// Absolute ε for the neighbourhood graph.
    #[arg(long, conflicts_with = "epsilon_quantile")]
    epsilon: Option<f64>,
    /// ε as quantile(s) of the pairwise distances; several are tried.
    #[arg(long, value_delimiter = ',')]
    epsilon_quantile: Vec<f64>,
    /// Number of clusters (default: number of true classes).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// k-means restarts.
    #[arg(long)]
    restarts: Option<usize>,
    /// nodes or edges.
    #[arg(long)]
    phi_mode: Option<PhiMode>,
    /// Use η + 1 instead of η in the TNF kernels.
    #[arg(long)]
    eta_smoothing: bool,
    /// e, 10 or 2.
    #[arg(long)]
    log_base: Option<LogBase>,
    #[arg(long)]
    self_tuning_rank: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<TableFormat>,
}

impl RunArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(e) = self.epsilon {
            cfg.epsilon = EpsilonSpec::Value(e);
            cfg.datasets.iter_mut().for_each(|d| d.epsilon = None);
        }
        match self.epsilon_quantile.as_slice() {
            [] => {}
            [q] => cfg.epsilon = EpsilonSpec::Quantile(*q),
            qs => cfg.epsilon = EpsilonSpec::Quantiles(qs.to_vec()),
        }
        if !self.epsilon_quantile.is_empty() {
            cfg.datasets.iter_mut().for_each(|d| d.epsilon = None);
        }
        if self.k.is_some() {
            cfg.k = self.k;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.restarts {
            cfg.restarts = r;
        }
        if let Some(p) = self.phi_mode {
            cfg.phi_mode = p;
        }
        if self.eta_smoothing {
            cfg.eta_smoothing = true;
        }
        if let Some(b) = self.log_base {
            cfg.log_base = b;
        }
        if let Some(r) = self.self_tuning_rank {
            cfg.self_tuning_rank = r;
        }
        if self.out_dir.is_some() {
            cfg.out_dir.clone_from(&self.out_dir);
        }
        if let Some(f) = self.format {
            cfg.format = f;
        }
    }
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[arg(long, default_value = "tnf2")]
    method: AffinityMethod,
    /// Kernel width (ignored by self-tuning).
    #[arg(long)]
    sigma: Option<f64>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DatasetArgs,
    /// Methods to sweep.
    #[arg(long, value_delimiter = ',', default_value = "tnf1,tnf2")]
    method: Vec<AffinityMethod>,
    /// start:stop:step (default 0.01:10:0.01).
    #[arg(long)]
    sigma_grid: Option<SigmaGrid>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    /// Replace the configured method list.
    #[arg(long, value_delimiter = ',')]
    method: Vec<AffinityMethod>,
    #[arg(long)]
    sigma_grid: Option<SigmaGrid>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct PlotArgs {
    #[command(flatten)]
    data: DatasetArgs,
    /// Label CSV written by a run (`index,predicted,truth`); defaults to the true labels.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, short)]
    output: PathBuf,
}

fn execute(cfg: ExperimentConfig) -> Result<()> {
    let output = run(&cfg)?;
    print!("{}", emit_table(&output.records(), cfg.format)?);
    if let Some(dir) = &cfg.out_dir {
        let written = persist(&output, dir, cfg.format)?;
        info!(files = written.len(), dir = %dir.display(), "results written");
    }
    Ok(())
}

fn read_predicted(path: &PathBuf) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            line.split(',')
                .nth(1)
                .and_then(|f| f.trim().parse().ok())
                .ok_or_else(|| Error::Invalid(format!("{}: bad label row {}", path.display(), i + 2)))
        })
        .collect()
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Cluster(args) => {
            let mut cfg = ExperimentConfig::new(vec![args.data.spec()?], vec![args.method]);
            cfg.sigma_grid = match (args.method.uses_sigma(), args.sigma) {
                (true, None) => return Err(Error::config("sigma", format!("--sigma is required for {}", args.method))),
                (_, Some(s)) => SigmaGrid::single(s),
                (false, None) => SigmaGrid::single(1.0),
            };
            args.run.apply(&mut cfg);
            execute(cfg)
        }
        Command::Sweep(args) => {
            let mut cfg = ExperimentConfig::new(vec![args.data.spec()?], args.method);
            if let Some(g) = args.sigma_grid {
                cfg.sigma_grid = g;
            }
            args.run.apply(&mut cfg);
            execute(cfg)
        }
        Command::Bench(args) => {
            let mut cfg = ExperimentConfig::from_file(&args.config)?;
            if !args.method.is_empty() {
                cfg.methods = args.method;
            }
            if let Some(g) = args.sigma_grid {
                cfg.sigma_grid = g;
            }
            args.run.apply(&mut cfg);
            execute(cfg)
        }
        Command::Plot(args) => {
            let dataset = args.data.spec()?.load()?;
            let labels = match &args.labels {
                Some(path) => read_predicted(path)?,
                None => dataset
                    .labels()
                    .ok_or_else(|| Error::Invalid("dataset has no labels; pass --labels".into()))?
                    .to_vec(),
            };
            let svg = scatter_svg(dataset.points(), &labels, &dataset.name)?;
            fs::write(&args.output, svg).map_err(|e| Error::io(&args.output, e))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| level.into()))
        .with_writer(std::io::stderr)
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
