//! Phased full-batch training, evaluation, and inference rollout.
//!
//! One epoch is one full-batch Adam step. Losses use the halved MSE of the
//! network module; MAE is reported over joint outputs only, leaving the end
//! flag out.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use log::{debug, info};

use crate::dataset::{MotionDataset, Normalization};
use crate::error::{MimicError, Result};
use crate::network::{mse_loss, Architecture, MimicNetwork};
use crate::optimizer::{AdamState, TrainingSchedule};
use crate::textio::{content_lines, fmt_f64, parse_f64, parse_usize};

pub const WEIGHTS_FILE: &str = "model.weights";
pub const META_FILE: &str = "model.meta";
/// Flag outputs at or above this mean the motion has ended.
pub const END_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub name: String,
    pub arch: Architecture,
    pub schedule: TrainingSchedule,
    pub seed: u64,
    /// Stop as soon as the joint MAE reaches this value. Off by default.
    pub early_stop_mae: Option<f64>,
}

impl TrainConfig {
    pub fn new(arch: Architecture, schedule: TrainingSchedule, seed: u64) -> Self {
        Self {
            name: "motion".into(),
            arch,
            schedule,
            seed,
            early_stop_mae: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub phase: usize,
    pub lr: f64,
    pub mse: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    pub records: Vec<EpochRecord>,
}

impl TrainingLog {
    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mse).collect()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["epoch", "phase", "lr", "mse", "mae"])?;
        for r in &self.records {
            w.write_record([
                r.epoch.to_string(),
                r.phase.to_string(),
                r.lr.to_string(),
                r.mse.to_string(),
                r.mae.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut records = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let line = i + 2;
            let rec = rec?;
            if rec.len() != 5 {
                return Err(MimicError::parse(line, "expected epoch,phase,lr,mse,mae"));
            }
            records.push(EpochRecord {
                epoch: parse_usize(&rec[0], line)?,
                phase: parse_usize(&rec[1], line)?,
                lr: parse_f64(&rec[2], line)?,
                mse: parse_f64(&rec[3], line)?,
                mae: parse_f64(&rec[4], line)?,
            });
        }
        Ok(Self { records })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelMeta {
    pub name: String,
    pub dof: usize,
    /// Motion length in seconds.
    pub duration: f64,
    pub rate: f64,
    pub normalization: Normalization,
    pub periodic: bool,
}

impl ModelMeta {
    pub fn to_text(&self) -> String {
        format!(
            "name={}\nn={}\nduration={}\nrate={}\ntime_offset={}\ntime_scale={}\nperiodic={}\n",
            self.name,
            self.dof,
            fmt_f64(self.duration),
            fmt_f64(self.rate),
            fmt_f64(self.normalization.offset),
            fmt_f64(self.normalization.scale),
            self.periodic
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut name = None;
        let mut dof = None;
        let mut duration = None;
        let mut rate = None;
        let mut offset = None;
        let mut scale = None;
        let mut periodic = None;
        for (n, line) in content_lines(text) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| MimicError::parse(n, "expected key=value"))?;
            match key {
                "name" => name = Some(value.to_string()),
                "n" => dof = Some(parse_usize(value, n)?),
                "duration" => duration = Some(parse_f64(value, n)?),
                "rate" => rate = Some(parse_f64(value, n)?),
                "time_offset" => offset = Some(parse_f64(value, n)?),
                "time_scale" => scale = Some(parse_f64(value, n)?),
                "periodic" => {
                    periodic = Some(match value {
                        "true" => true,
                        "false" => false,
                        _ => return Err(MimicError::parse(n, "periodic must be true|false")),
                    })
                }
                other => return Err(MimicError::parse(n, format!("unknown key `{other}`"))),
            }
        }
        let missing = |k: &str| MimicError::parse(0, format!("metadata is missing `{k}`"));
        let meta = Self {
            name: name.ok_or_else(|| missing("name"))?,
            dof: dof.ok_or_else(|| missing("n"))?,
            duration: duration.ok_or_else(|| missing("duration"))?,
            rate: rate.ok_or_else(|| missing("rate"))?,
            normalization: Normalization::new(
                offset.ok_or_else(|| missing("time_offset"))?,
                scale.ok_or_else(|| missing("time_scale"))?,
            )?,
            periodic: periodic.ok_or_else(|| missing("periodic"))?,
        };
        if !(meta.duration > 0.0 && meta.rate > 0.0) {
            return Err(MimicError::Config(
                "duration and rate must be positive".into(),
            ));
        }
        Ok(meta)
    }
}

/// A frozen network together with the time encoding it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub network: MimicNetwork,
    pub meta: ModelMeta,
}

impl TrainedModel {
    pub fn new(network: MimicNetwork, meta: ModelMeta) -> Result<Self> {
        if network.input_dim() != 1 {
            return Err(MimicError::shape("model input", 1, network.input_dim()));
        }
        if network.output_dim() != meta.dof + 1 {
            return Err(MimicError::shape(
                "model output",
                meta.dof + 1,
                network.output_dim(),
            ));
        }
        Ok(Self { network, meta })
    }

    pub fn dof(&self) -> usize {
        self.meta.dof
    }

    /// Network output (joints then flag) at absolute sample time `t`.
    pub fn predict(&self, t: f64) -> Result<Vec<f64>> {
        self.network.forward(&[self.meta.normalization.apply(t)])
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(WEIGHTS_FILE), self.network.to_text())?;
        fs::write(dir.join(META_FILE), self.meta.to_text())?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let network = MimicNetwork::parse(&fs::read_to_string(dir.join(WEIGHTS_FILE))?)?;
        let meta = ModelMeta::parse(&fs::read_to_string(dir.join(META_FILE))?)?;
        Self::new(network, meta)
    }
}

fn joint_mae(pred: &[Vec<f64>], target: &[Vec<f64>], dof: usize) -> f64 {
    let sum: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            p[..dof]
                .iter()
                .zip(&t[..dof])
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
        })
        .sum();
    sum / (pred.len() * dof) as f64
}

/// Runs the schedule with full-batch Adam, resetting the optimizer at each
/// phase boundary when the schedule asks for it.
pub fn train(dataset: &MotionDataset, config: &TrainConfig) -> Result<(TrainedModel, TrainingLog)> {
    if dataset.is_empty() {
        return Err(MimicError::Config("dataset is empty".into()));
    }
    let dof = dataset.dof();
    if config.arch.input != 1 {
        return Err(MimicError::shape(
            "architecture input",
            1,
            config.arch.input,
        ));
    }
    if config.arch.output() != dof + 1 {
        return Err(MimicError::shape(
            "architecture output",
            dof + 1,
            config.arch.output(),
        ));
    }

    let mut net = MimicNetwork::initialize(&config.arch, config.seed)?;
    let mut adam = AdamState::new(&net);
    let inputs = dataset.inputs();
    let targets = dataset.targets();
    let mut log = TrainingLog::default();
    let mut current_phase = 0;

    info!(
        "training {} on {} samples for {} epochs",
        config.arch,
        dataset.len(),
        config.schedule.total_epochs()
    );
    for (epoch, (phase, lr)) in config.schedule.epochs().enumerate() {
        if phase != current_phase {
            current_phase = phase;
            if config.schedule.reset_on_phase {
                adam.reset();
            }
            debug!("epoch {epoch}: phase {phase}, lr {lr}");
        }
        let pass = net.backward_with_predictions(&inputs, targets)?;
        if !pass.loss.is_finite() {
            return Err(MimicError::Diverged {
                epoch,
                last_finite_epoch: epoch.checked_sub(1),
            });
        }
        let mae = joint_mae(&pass.predictions, targets, dof);
        log.records.push(EpochRecord {
            epoch,
            phase,
            lr,
            mse: pass.loss,
            mae,
        });
        if config.early_stop_mae.is_some_and(|target| mae <= target) {
            info!("early stop at epoch {epoch}, mae {mae}");
            break;
        }
        adam.step(&mut net, &pass.grads, lr)?;
    }
    if let Some(last) = log.last() {
        info!(
            "final epoch {}: mse {:.3e} mae {:.4}",
            last.epoch, last.mse, last.mae
        );
    }

    let meta = ModelMeta {
        name: config.name.clone(),
        dof,
        duration: dataset.duration(),
        rate: dataset.sample_rate(),
        normalization: dataset.normalization(),
        periodic: dataset.periodic(),
    };
    Ok((TrainedModel::new(net, meta)?, log))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Halved MSE over all outputs, flag included.
    pub mse: f64,
    /// Mean absolute joint error, radians.
    pub mae: f64,
    pub per_joint_mae: Vec<f64>,
    /// Samples between the first predicted end and the true end; `None`
    /// when either never ends.
    pub end_time_error: Option<usize>,
}

/// Scores predictions against a dataset.
pub fn evaluate_predictions(
    predictions: &[Vec<f64>],
    dataset: &MotionDataset,
) -> Result<Evaluation> {
    let dof = dataset.dof();
    if predictions.len() != dataset.len() {
        return Err(MimicError::shape(
            "prediction rows",
            dataset.len(),
            predictions.len(),
        ));
    }
    if let Some(p) = predictions.iter().find(|p| p.len() != dof + 1) {
        return Err(MimicError::shape("prediction width", dof + 1, p.len()));
    }
    let targets = dataset.targets();
    let mse = mse_loss(predictions, targets)?;
    let per_joint_mae: Vec<f64> = (0..dof)
        .map(|j| {
            predictions
                .iter()
                .zip(targets)
                .map(|(p, t)| (p[j] - t[j]).abs())
                .sum::<f64>()
                / predictions.len() as f64
        })
        .collect();
    let mae = joint_mae(predictions, targets, dof);
    let predicted_end = predictions.iter().position(|p| p[dof] >= END_THRESHOLD);
    let end_time_error = match (predicted_end, dataset.end_index()) {
        (Some(p), Some(t)) => Some(p.abs_diff(t)),
        _ => None,
    };
    Ok(Evaluation {
        mse,
        mae,
        per_joint_mae,
        end_time_error,
    })
}

pub fn evaluate(model: &TrainedModel, dataset: &MotionDataset) -> Result<Evaluation> {
    if model.dof() != dataset.dof() {
        return Err(MimicError::shape(
            "model joints",
            dataset.dof(),
            model.dof(),
        ));
    }
    let predictions = dataset
        .sample_times()
        .iter()
        .map(|&t| model.predict(t))
        .collect::<Result<Vec<_>>>()?;
    evaluate_predictions(&predictions, dataset)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    /// Seconds from the start of the motion.
    pub times: Vec<f64>,
    pub joints: Vec<Vec<f64>>,
    pub end_flags: Vec<f64>,
    /// False when the flag never reached the threshold before the cap.
    pub end_detected: bool,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn write_csv<W: Write>(&self, writer: W, joint_names: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time".to_string()];
        header.extend(joint_names.iter().cloned());
        header.push("end_flag".into());
        w.write_record(&header)?;
        for ((t, joints), flag) in self.times.iter().zip(&self.joints).zip(&self.end_flags) {
            let mut rec = vec![t.to_string()];
            rec.extend(joints.iter().map(f64::to_string));
            rec.push(flag.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sweeps the network over time at `rate` Hz until the end flag fires, or
/// until twice the training duration.
pub fn rollout(model: &TrainedModel, rate: f64) -> Result<Rollout> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(MimicError::Config("rate must be positive".into()));
    }
    let dof = model.dof();
    let cap = 2.0 * model.meta.duration;
    let offset = model.meta.normalization.offset;
    let mut out = Rollout {
        times: Vec::new(),
        joints: Vec::new(),
        end_flags: Vec::new(),
        end_detected: false,
    };
    for k in 0.. {
        let t = k as f64 / rate;
        if t > cap + 1e-9 {
            break;
        }
        let mut y = model.predict(offset + t)?;
        let flag = y.pop().expect("output has a flag");
        debug_assert_eq!(y.len(), dof);
        out.times.push(t);
        out.joints.push(y);
        out.end_flags.push(flag);
        if flag >= END_THRESHOLD {
            out.end_detected = true;
            break;
        }
    }
    Ok(out)
}
