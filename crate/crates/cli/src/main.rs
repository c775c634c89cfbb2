//! `mimic`: generate motion datasets, train imitation networks, and compare
//! what they learned against the original and against a simulated plant.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use mimic_core::dataset::{
    ingest_log, read_log_csv, sample_movement, IngestOptions, MotionDataset, DEFAULT_SAMPLE_RATE,
    DEFAULT_TAIL_SAMPLES,
};
use mimic_core::motion::KeyframeMovement;
use mimic_core::network::Architecture;
use mimic_core::optimizer::TrainingSchedule;
use mimic_core::plant::{
    simulate, FnSource, PlantConfig, PlantState, ReferenceSource, Simulation, DEFAULT_KP,
    DEFAULT_MAX_SPEED, DEFAULT_TICK_RATE,
};
use mimic_core::trainer::{
    evaluate, evaluate_predictions, rollout, train, Evaluation, TrainConfig, TrainedModel,
};
use mimic_core::MimicError;

const TRAINING_LOG: &str = "training_log.csv";

#[derive(Parser)]
#[command(
    name = "mimic",
    version,
    about = "Learn keyframe motions with a small neural network"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a keyframe movement file into a training dataset CSV.
    Gen {
        #[arg(long)]
        movement: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE)]
        rate: f64,
        /// Extra samples of the final posture with the end flag set.
        #[arg(long, default_value_t = DEFAULT_TAIL_SAMPLES)]
        tail: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Regularize a raw joint log (`time,<joints...>`) into a dataset CSV.
    Ingest {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE)]
        rate: f64,
        /// Cyclic motion: no end flag, no tail.
        #[arg(long)]
        periodic: bool,
        #[arg(long, default_value_t = DEFAULT_TAIL_SAMPLES)]
        tail: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a network on a dataset; writes a model directory.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Layer sizes, e.g. 1:75:50:23. Defaults to 1:75:50:(joints+1).
        #[arg(long)]
        arch: Option<Architecture>,
        /// `reference`, `desk`, or a schedule file.
        #[arg(long, default_value = "desk")]
        schedule: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a trained model against a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Also write the metrics to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep a model over time until it signals the end of the motion.
    Rollout {
        #[arg(long)]
        model: PathBuf,
        /// Defaults to the model's training rate.
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Play a movement or a model through the speed-controlled joint plant.
    Simulate {
        #[arg(long, conflicts_with = "model", required_unless_present = "model")]
        movement: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        plant: PlantArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate, roll out, and simulate a model against its dataset.
    Compare {
        #[arg(long, required_unless_present = "self_test")]
        model: Option<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        /// Replay the dataset itself in place of a model.
        #[arg(long, conflicts_with = "model")]
        self_test: bool,
        #[command(flatten)]
        plant: PlantArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct PlantArgs {
    /// Proportional gain, 1/s.
    #[arg(long, default_value_t = DEFAULT_KP)]
    kp: f64,
    /// Joint speed limit, rad/s.
    #[arg(long, default_value_t = DEFAULT_MAX_SPEED)]
    max_speed: f64,
    #[arg(long, default_value_t = DEFAULT_TICK_RATE)]
    tick_rate: f64,
}

impl PlantArgs {
    fn config(&self, dof: usize) -> Result<PlantConfig, Failure> {
        Ok(PlantConfig::uniform(
            dof,
            self.kp,
            self.max_speed,
            self.tick_rate,
        )?)
    }
}

/// What went wrong, sorted by exit code.
enum Failure {
    Input(String),
    Numerical(String),
}

impl From<MimicError> for Failure {
    fn from(e: MimicError) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Failure {
    Failure::Input(format!("{}: {e}", path.display()))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_error(path, e))
}

fn check_rate(rate: f64) -> Result<(), Failure> {
    if rate > 0.0 && rate.is_finite() {
        Ok(())
    } else {
        Err(Failure::Input("rate must be positive".into()))
    }
}

fn load_dataset(path: &Path) -> Result<MotionDataset, Failure> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    MotionDataset::read_csv(file).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_model(dir: &Path) -> Result<TrainedModel, Failure> {
    TrainedModel::load(dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))
}

fn load_schedule(spec: &str) -> Result<TrainingSchedule, Failure> {
    if let Some(preset) = TrainingSchedule::preset(spec) {
        return Ok(preset);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(Failure::Input(format!(
            "schedule `{spec}` is neither a preset (reference, desk) nor a file"
        )));
    }
    TrainingSchedule::parse(&read_text(path)?)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn default_names(dof: usize) -> Vec<String> {
    (1..=dof).map(|j| format!("j{j}")).collect()
}

fn metrics_text(ev: &Evaluation) -> String {
    let mut s = format!("mse={}\nmae={}\n", ev.mse, ev.mae);
    for (j, m) in ev.per_joint_mae.iter().enumerate() {
        let _ = writeln!(s, "mae_j{}={m}", j + 1);
    }
    match ev.end_time_error {
        Some(e) => {
            let _ = writeln!(s, "end_time_error={e}");
        }
        None => s.push_str("end_time_error=none\n"),
    }
    s
}

fn end_error_text(ev: &Evaluation) -> String {
    ev.end_time_error
        .map_or_else(|| "none".to_string(), |e| format!("{e} samples"))
}

fn run_plant(source: &dyn ReferenceSource, plant: &PlantArgs) -> Result<Simulation, Failure> {
    let cfg = plant.config(source.dof())?;
    let start = PlantState::at_rest(source.reference(0.0)?);
    Ok(simulate(source, &cfg, &start)?)
}

fn print_tracking(sim: &Simulation) {
    let r = &sim.report;
    println!("tracking RMS: {:.5} rad", r.overall_rms);
    let attenuated: Vec<String> = r
        .attenuated
        .iter()
        .enumerate()
        .filter(|(_, a)| **a)
        .map(|(j, _)| format!("j{}", j + 1))
        .collect();
    if attenuated.is_empty() {
        println!("attenuated: no");
    } else {
        println!("attenuated: yes ({})", attenuated.join(", "));
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Gen {
            movement,
            rate,
            tail,
            out,
        } => {
            check_rate(rate)?;
            let m = KeyframeMovement::parse(&read_text(&movement)?)?;
            let ds = sample_movement(&m, rate, tail)?;
            ds.write_csv(create(&out)?)?;
            println!("{} samples written to {}", ds.len(), out.display());
        }
        Command::Ingest {
            log,
            rate,
            periodic,
            tail,
            out,
        } => {
            check_rate(rate)?;
            let file = File::open(&log).map_err(|e| io_error(&log, e))?;
            let (names, records) = read_log_csv(file)?;
            let ds = ingest_log(&records, rate, IngestOptions { periodic, tail })?
                .with_joint_names(names)?;
            ds.write_csv(create(&out)?)?;
            println!("{} samples written to {}", ds.len(), out.display());
        }
        Command::Train {
            dataset,
            arch,
            schedule,
            seed,
            name,
            out,
        } => {
            let ds = load_dataset(&dataset)?;
            let arch = arch.unwrap_or_else(|| Architecture::for_joints(ds.dof()));
            let mut cfg = TrainConfig::new(arch, load_schedule(&schedule)?, seed);
            cfg.name = name.unwrap_or_else(|| {
                dataset
                    .file_stem()
                    .map_or("motion".into(), |s| s.to_string_lossy().into_owned())
            });
            let (model, log) = train(&ds, &cfg)?;
            model.save(&out)?;
            log.write_csv(create(&out.join(TRAINING_LOG))?)?;
            let ev = evaluate(&model, &ds)?;
            println!(
                "trained {} for {} epochs; final MSE {:.6e}, MAE {:.6} rad",
                cfg.arch,
                log.records.len(),
                ev.mse,
                ev.mae
            );
            println!("model written to {}", out.display());
        }
        Command::Eval {
            model,
            dataset,
            out,
        } => {
            let model = load_model(&model)?;
            let ds = load_dataset(&dataset)?;
            let ev = evaluate(&model, &ds)?;
            println!(
                "MSE {:.6e}, MAE {:.6} rad, end-time error {}",
                ev.mse,
                ev.mae,
                end_error_text(&ev)
            );
            if let Some(out) = out {
                fs::write(&out, metrics_text(&ev)).map_err(|e| io_error(&out, e))?;
            }
        }
        Command::Rollout { model, rate, out } => {
            let model = load_model(&model)?;
            let rate = rate.unwrap_or(model.meta.rate);
            check_rate(rate)?;
            let ro = rollout(&model, rate)?;
            ro.write_csv(create(&out)?, &default_names(model.dof()))?;
            if ro.end_detected {
                println!(
                    "{} samples, end detected at t={}",
                    ro.len(),
                    ro.times[ro.len() - 1]
                );
            } else {
                println!("{} samples, no end detected", ro.len());
            }
        }
        Command::Simulate {
            movement,
            model,
            plant,
            out,
        } => {
            let source: Box<dyn ReferenceSource> = match (movement, model) {
                (Some(m), _) => Box::new(KeyframeMovement::parse(&read_text(&m)?)?),
                (None, Some(dir)) => Box::new(load_model(&dir)?),
                (None, None) => unreachable!("clap requires one source"),
            };
            let sim = run_plant(source.as_ref(), &plant)?;
            sim.write_csv(create(&out)?, &default_names(source.dof()))?;
            print_tracking(&sim);
        }
        Command::Compare {
            model,
            dataset,
            self_test,
            plant,
            out,
        } => {
            let ds = load_dataset(&dataset)?;
            fs::create_dir_all(&out).map_err(|e| io_error(&out, e))?;
            let names = ds.joint_names().to_vec();
            let sim = if self_test {
                info!("self-test: replaying the dataset as model output");
                let ev = evaluate_predictions(ds.targets(), &ds)?;
                report_comparison(&ev, &out)?;
                let replay = dataset_source(&ds);
                run_plant(&replay, &plant)?
            } else {
                let dir = model.expect("clap requires --model without --self-test");
                let model = load_model(&dir)?;
                let ev = evaluate(&model, &ds)?;
                report_comparison(&ev, &out)?;
                let ro = rollout(&model, ds.sample_rate())?;
                ro.write_csv(create(&out.join("rollout.csv"))?, &names)?;
                run_plant(&model, &plant)?
            };
            sim.write_csv(create(&out.join("tracking.csv"))?, &names)?;
            print_tracking(&sim);
        }
    }
    Ok(())
}

fn report_comparison(ev: &Evaluation, out: &Path) -> Result<(), Failure> {
    let path = out.join("metrics.txt");
    fs::write(&path, metrics_text(ev)).map_err(|e| io_error(&path, e))?;
    println!("MAE: {:.6} rad", ev.mae);
    println!("end-time error: {}", end_error_text(ev));
    Ok(())
}

/// The dataset's joint columns as a zero-order-hold reference.
fn dataset_source(ds: &MotionDataset) -> FnSource<impl Fn(f64) -> Vec<f64> + '_> {
    let dof = ds.dof();
    let rate = ds.sample_rate();
    let last = ds.len() - 1;
    let duration = last as f64 / rate;
    FnSource::new(dof, duration, move |t| {
        let k = ((t * rate).round() as usize).min(last);
        ds.targets()[k][..dof].to_vec()
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MIMIC_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}
