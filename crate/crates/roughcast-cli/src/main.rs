//! Command-line runner for the roughcast toolkit.
//!
//! Orchestrates the evaluation matrix end to end: synthetic dataset
//! generation, feature extraction, MLP training (fixed architecture or TPE
//! search), Shapley-based feature reduction with tree-ensemble retraining,
//! ablation sweeps, and report emission. Every run writes a manifest that
//! reproduces its outputs byte for byte.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use roughcast::dataset::{generate_synthetic, write_dataset};
use roughcast::features::write_feature_csv;
use roughcast::hpo::SearchSpace;
use roughcast::pipeline::{
    self, DatasetSource, ExperimentKind, MlpSearch, ResultsTable, RunConfig, RunOutputs,
    MANIFEST_NAME,
};
use roughcast::{Error, Result};

#[derive(Parser)]
#[command(
    name = "roughcast",
    version,
    about = "Predict final surface roughness of laser-micromachined workpieces \
             from process parameters and in-situ sensor emissions"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Run configuration or manifest (JSON); defaults apply when omitted
    #[arg(long, global = true, value_name = "JSON")]
    config: Option<PathBuf>,
    /// Master seed override; also reseeds a synthetic dataset source
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory override
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (defaults to one per core)
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured synthetic dataset under <out>/dataset
    Generate,
    /// Extract the feature matrix to <out>/features.csv
    Extract,
    /// Train and evaluate experiments, writing reports to <out>
    Run {
        /// Which experiment(s) to run
        #[arg(value_enum)]
        experiment: RunTarget,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Sweep top-k feature counts, retraining extra trees at each k
    Ablate {
        /// Comma-separated k grid, e.g. 5,10,20,50,100
        #[arg(long, value_delimiter = ',', value_name = "K,..")]
        k: Vec<usize>,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Re-execute the run recorded in <out>/run_manifest.json and re-emit
    /// its reports
    Report {
        /// Additionally render test-set scatter plots as SVG
        #[arg(long)]
        svg: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RunTarget {
    /// Laser parameters + initial roughness only
    ParamsOnly,
    /// Parameters plus all sensor features
    Full,
    /// Shapley top-k sensor features, tree-ensemble retraining
    Reduced,
    /// All three experiments
    All,
}

impl RunTarget {
    fn kinds(self) -> Vec<ExperimentKind> {
        match self {
            RunTarget::ParamsOnly => vec![ExperimentKind::ParamsOnly],
            RunTarget::Full => vec![ExperimentKind::ParamsPlusSensors],
            RunTarget::Reduced => vec![ExperimentKind::Reduced],
            RunTarget::All => ExperimentKind::ALL.to_vec(),
        }
    }
}

#[derive(Args)]
struct SearchArgs {
    /// TPE trial budget; switches a fixed-architecture config to search mode
    #[arg(long, value_name = "N")]
    n_trials: Option<usize>,
    /// Search-space JSON file; switches a fixed-architecture config to
    /// search mode
    #[arg(long, value_name = "FILE")]
    space: Option<PathBuf>,
    /// Tune one architecture per experiment and reuse it across settings
    #[arg(long)]
    shared_arch: bool,
}

fn load_config(global: &GlobalArgs) -> Result<RunConfig> {
    let mut config = match &global.config {
        Some(path) => pipeline::load_run_config(path)?,
        None => RunConfig::default(),
    };
    apply_overrides(&mut config, global);
    Ok(config)
}

fn apply_overrides(config: &mut RunConfig, global: &GlobalArgs) {
    if let Some(seed) = global.seed {
        config.seed = seed;
        if let DatasetSource::Synthetic(sc) = &mut config.dataset {
            sc.seed = seed;
        }
    }
    if let Some(out) = &global.out {
        config.output_dir = out.clone();
    }
}

fn apply_search(config: &mut RunConfig, args: &SearchArgs) -> Result<()> {
    let space = match &args.space {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let space: SearchSpace = serde_json::from_str(&text)
                .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
            space.validate()?;
            Some(space)
        }
        None => None,
    };
    if args.n_trials.is_some() || space.is_some() {
        if let MlpSearch::Fixed { train, .. } = &config.mlp {
            let final_train = train.clone();
            let mut hpo = MlpSearch::hpo_default();
            if let MlpSearch::Hpo { train, .. } = &mut hpo {
                *train = final_train;
            }
            config.mlp = hpo;
        }
    }
    if let MlpSearch::Hpo {
        n_trials,
        space: cfg_space,
        shared_arch,
        ..
    } = &mut config.mlp
    {
        if let Some(n) = args.n_trials {
            *n_trials = n;
        }
        if space.is_some() {
            *cfg_space = space;
        }
        if args.shared_arch {
            *shared_arch = true;
        }
    }
    // --shared-arch under a fixed architecture is already satisfied.
    Ok(())
}

fn print_table(table: &ResultsTable) {
    println!("{}", table.experiment.as_str());
    for row in &table.rows {
        println!(
            "  {} {:<10} train R2 {:>8.4}  test R2 {:>8.4}  train RMSE {:>8.4}  test RMSE {:>8.4}",
            row.label, row.setting, row.train_r2, row.test_r2, row.train_rmse, row.test_rmse
        );
    }
}

fn print_summary(outputs: &RunOutputs) {
    if let Some(p) = &outputs.params_only {
        print_table(&p.table);
    }
    if let Some(f) = &outputs.full {
        print_table(&f.table);
    }
    if let Some(r) = &outputs.reduced {
        print_table(&r.table);
        for red in &r.settings {
            println!(
                "  {} {:<10} best model {}  top features: {}",
                red.setting.label(),
                red.setting.as_str(),
                red.best_model,
                red.selected
                    .iter()
                    .take(3)
                    .cloned()
                    .collect::<Vec<_>>()
                    .join(", ")
            );
        }
    }
    if let Some(curves) = &outputs.ablation {
        println!("ablation");
        for (setting, points) in curves {
            for p in points {
                println!(
                    "  {} {:<10} k {:>4}  test R2 {:>8.4}  test RMSE {:>8.4}",
                    setting.label(),
                    setting.as_str(),
                    p.k,
                    p.test_r2,
                    p.test_rmse
                );
            }
        }
    }
}

fn emit(outputs: &RunOutputs) -> Result<()> {
    let written = pipeline::emit_reports(outputs, &outputs.config.output_dir)?;
    print_summary(outputs);
    println!(
        "wrote {} files under {}",
        written.len(),
        outputs.config.output_dir.display()
    );
    Ok(())
}

fn cmd_generate(config: &RunConfig) -> Result<()> {
    let sc = match &config.dataset {
        DatasetSource::Synthetic(sc) => sc,
        DatasetSource::Path(_) => {
            return Err(Error::validation(
                "generate requires a synthetic dataset source in the configuration",
            ))
        }
    };
    sc.validate()?;
    let experiments = generate_synthetic(sc)?;
    let root = config.output_dir.join("dataset");
    write_dataset(&experiments, &root)?;
    let n_samples: usize = experiments.iter().map(|e| e.samples.len()).sum();
    println!(
        "wrote {} experiments ({n_samples} samples) to {}",
        experiments.len(),
        root.display()
    );
    Ok(())
}

fn cmd_extract(config: &RunConfig) -> Result<()> {
    config.validate()?;
    let table = pipeline::build_feature_table(config)?;
    std::fs::create_dir_all(&config.output_dir)
        .map_err(|e| Error::io(&config.output_dir, e))?;
    let path = config.output_dir.join("features.csv");
    write_feature_csv(&table, &path)?;
    println!(
        "wrote {} rows x {} input columns to {}",
        table.ids.len(),
        table.columns.len(),
        path.display()
    );
    Ok(())
}

fn cmd_run(config: &RunConfig, kinds: &[ExperimentKind]) -> Result<()> {
    emit(&pipeline::run(config, kinds)?)
}

fn cmd_ablate(mut config: RunConfig, k: &[usize]) -> Result<()> {
    if !k.is_empty() {
        config.ablation_ks = k.to_vec();
    }
    emit(&pipeline::ablate(&config)?)
}

fn cmd_report(global: &GlobalArgs, svg: bool) -> Result<()> {
    let out_dir = global.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let manifest_path = match &global.config {
        Some(path) => path.clone(),
        None => out_dir.join(MANIFEST_NAME),
    };
    let mut manifest = pipeline::load_manifest(&manifest_path)?;
    apply_overrides(&mut manifest.config, global);
    let outputs = pipeline::rerun(&manifest)?;
    let written = pipeline::emit_reports(&outputs, &outputs.config.output_dir)?;
    let mut n_written = written.len();
    if svg {
        for run in pipeline::scatter_runs(&outputs) {
            let path = outputs
                .config
                .output_dir
                .join(format!("scatter_{}.svg", run.setting.as_str()));
            pipeline::scatter_svg(&run.scatter, &path)?;
            n_written += 1;
        }
    }
    print_summary(&outputs);
    println!(
        "wrote {n_written} files under {}",
        outputs.config.output_dir.display()
    );
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(Error::validation("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::validation(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Generate => cmd_generate(&load_config(&cli.global)?),
        Command::Extract => cmd_extract(&load_config(&cli.global)?),
        Command::Run { experiment, search } => {
            let mut config = load_config(&cli.global)?;
            apply_search(&mut config, search)?;
            cmd_run(&config, &experiment.kinds())
        }
        Command::Ablate { k, search } => {
            let mut config = load_config(&cli.global)?;
            apply_search(&mut config, search)?;
            cmd_ablate(config, k)
        }
        Command::Report { svg } => cmd_report(&cli.global, *svg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
