use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dynslam::sim::SceneConfig;
use dynslam_cli::commands::GENERATED_DATASET_FILE;
use dynslam_cli::experiment::load_scene_config;
use dynslam_cli::{cmd_compare, cmd_eval, cmd_generate, cmd_solve, CliError, ExperimentSpec, Selection, EXIT_VALIDATION};

/// Dynamic-scene SLAM back-end experiments.
#[derive(Parser)]
#[command(name = "dynslam", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scene and write its dataset file.
    Generate {
        /// Scene configuration (TOML); defaults to the built-in scene.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build and optimize one or all formulations, writing `<out>/<formulation>/`.
    Solve {
        /// Experiment spec (TOML); flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, conflicts_with = "scene")]
        dataset: Option<PathBuf>,
        /// Generate the dataset from this scene configuration instead.
        #[arg(long)]
        scene: Option<PathBuf>,
        /// world, oc-base, oc-okf, oc-only-okf or all.
        #[arg(long)]
        formulation: Option<Selection>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        lambda_init: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        /// Perturb initial poses by twists with this rotational sigma (rad).
        #[arg(long)]
        perturb_rot: Option<f64>,
        /// ... and this translational sigma (m).
        #[arg(long)]
        perturb_trans: Option<f64>,
        /// Perturb initial points by this sigma (m).
        #[arg(long)]
        perturb_point: Option<f64>,
        /// Evaluate every result against the dataset's ground truth afterwards.
        #[arg(long)]
        eval: bool,
    },
    /// Score estimates against ground truth; writes metrics.txt and tables.txt.
    Eval {
        /// Result directory or estimates file.
        #[arg(long)]
        estimates: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Output directory; defaults to the estimates' directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sequence label of the metric rows; defaults to the dataset file stem.
        #[arg(long)]
        seq: Option<String>,
    },
    /// Compare evaluated result directories solved from the same dataset.
    Compare {
        #[arg(required = true, num_args = 2..)]
        dirs: Vec<PathBuf>,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { config, seed, out } => {
            let mut scene = match config {
                Some(path) => load_scene_config(&path)?,
                None => SceneConfig::default(),
            };
            if let Some(seed) = seed {
                scene.seed = seed;
            }
            println!("{}", cmd_generate(&scene, &out)?);
        }
        Command::Solve {
            config,
            dataset,
            scene,
            formulation,
            out,
            seed,
            lambda_init,
            max_iters,
            perturb_rot,
            perturb_trans,
            perturb_point,
            eval,
        } => {
            let mut spec = match config {
                Some(path) => ExperimentSpec::load(&path)?,
                None => ExperimentSpec::default(),
            };
            if dataset.is_some() || scene.is_some() {
                spec.dataset = dataset;
                spec.scene = scene;
            }
            macro_rules! set {
                ($($flag:ident => $($field:ident).+),* $(,)?) => {
                    $(if let Some(v) = $flag { spec.$($field).+ = v; })*
                };
            }
            set!(
                formulation => formulation,
                out => out,
                lambda_init => solver.lambda_init,
                max_iters => solver.max_iterations,
                perturb_rot => perturbation.rot,
                perturb_trans => perturbation.trans,
                perturb_point => perturbation.point,
            );
            if seed.is_some() {
                spec.seed = seed;
            }
            let outcomes = cmd_solve(&spec)?;
            for o in &outcomes {
                println!("{o}");
            }
            if eval {
                let dataset = spec.dataset.clone().unwrap_or_else(|| spec.out.join(GENERATED_DATASET_FILE));
                for o in &outcomes {
                    let summary = cmd_eval(&o.dir, &dataset, None, None)?;
                    println!("\n{} ({})\n{}", o.formulation, summary.dir.display(), summary.tables.trim_end());
                }
            }
        }
        Command::Eval { estimates, dataset, out, seq } => {
            let summary = cmd_eval(&estimates, &dataset, out.as_deref(), seq.as_deref())?;
            print!("{}", summary.tables);
        }
        Command::Compare { dirs, out } => {
            let report = cmd_compare(&dirs)?.render();
            if let Some(path) = out {
                dynslam::io::write_file(&path, &report)?;
            }
            print!("{report}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage errors are validation failures; exit code 2 is reserved for the solver.
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_VALIDATION) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
