//! Speed-controlled joints tracking position references open-loop.
//!
//! Each joint receives `clamp(kp · (reference − position), ±max_speed)` as a
//! speed command, integrated with explicit Euler at the tick rate. The gap
//! between desired and attained trajectories is what the tracking report
//! measures.

use std::io::Write;

use crate::error::{MimicError, Result};
use crate::motion::KeyframeMovement;
use crate::trainer::TrainedModel;

pub const DEFAULT_KP: f64 = 25.0;
pub const DEFAULT_MAX_SPEED: f64 = 7.0;
pub const DEFAULT_TICK_RATE: f64 = 50.0;
/// Attained amplitude below this fraction of desired counts as attenuated.
pub const ATTENUATION_RATIO: f64 = 0.99;

/// Anything that yields joint references over a finite playback window.
pub trait ReferenceSource {
    fn dof(&self) -> usize;
    /// Seconds of playback.
    fn duration(&self) -> f64;
    fn reference(&self, t: f64) -> Result<Vec<f64>>;
}

impl ReferenceSource for KeyframeMovement {
    fn dof(&self) -> usize {
        KeyframeMovement::dof(self)
    }

    fn duration(&self) -> f64 {
        self.playback_duration()
    }

    fn reference(&self, t: f64) -> Result<Vec<f64>> {
        Ok(self.reference_pose(t)?.0)
    }
}

impl ReferenceSource for TrainedModel {
    fn dof(&self) -> usize {
        TrainedModel::dof(self)
    }

    fn duration(&self) -> f64 {
        self.meta.duration
    }

    fn reference(&self, t: f64) -> Result<Vec<f64>> {
        let mut y = self.predict(self.meta.normalization.offset + t)?;
        y.truncate(self.meta.dof);
        Ok(y)
    }
}

/// Wraps a closure as a reference source.
pub struct FnSource<F> {
    dof: usize,
    duration: f64,
    f: F,
}

impl<F: Fn(f64) -> Vec<f64>> FnSource<F> {
    pub fn new(dof: usize, duration: f64, f: F) -> Self {
        Self { dof, duration, f }
    }
}

impl<F: Fn(f64) -> Vec<f64>> ReferenceSource for FnSource<F> {
    fn dof(&self) -> usize {
        self.dof
    }

    fn duration(&self) -> f64 {
        self.duration
    }

    fn reference(&self, t: f64) -> Result<Vec<f64>> {
        let r = (self.f)(t);
        if r.len() != self.dof {
            return Err(MimicError::shape("reference", self.dof, r.len()));
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantConfig {
    kp: Vec<f64>,
    max_speed: Vec<f64>,
    tick_rate: f64,
}

impl PlantConfig {
    /// Gains at or above twice the tick rate make the discrete loop unstable
    /// and are rejected.
    pub fn new(kp: Vec<f64>, max_speed: Vec<f64>, tick_rate: f64) -> Result<Self> {
        if kp.len() != max_speed.len() {
            return Err(MimicError::shape(
                "plant max_speed",
                kp.len(),
                max_speed.len(),
            ));
        }
        if !(tick_rate > 0.0 && tick_rate.is_finite()) {
            return Err(MimicError::Config("tick rate must be positive".into()));
        }
        for (j, (&k, &s)) in kp.iter().zip(&max_speed).enumerate() {
            if !(k > 0.0 && k.is_finite()) {
                return Err(MimicError::Config(format!(
                    "joint {j}: kp must be positive"
                )));
            }
            if !(s > 0.0 && s.is_finite()) {
                return Err(MimicError::Config(format!(
                    "joint {j}: max speed must be positive"
                )));
            }
            if k >= 2.0 * tick_rate {
                return Err(MimicError::Config(format!(
                    "joint {j}: kp={k} is unstable at {tick_rate} Hz (needs kp < {})",
                    2.0 * tick_rate
                )));
            }
        }
        Ok(Self {
            kp,
            max_speed,
            tick_rate,
        })
    }

    pub fn uniform(dof: usize, kp: f64, max_speed: f64, tick_rate: f64) -> Result<Self> {
        Self::new(vec![kp; dof], vec![max_speed; dof], tick_rate)
    }

    pub fn default_for(dof: usize) -> Self {
        Self::uniform(dof, DEFAULT_KP, DEFAULT_MAX_SPEED, DEFAULT_TICK_RATE)
            .expect("defaults are stable")
    }

    pub fn dof(&self) -> usize {
        self.kp.len()
    }

    pub fn kp(&self) -> &[f64] {
        &self.kp
    }

    pub fn max_speed(&self) -> &[f64] {
        &self.max_speed
    }

    pub fn tick_rate(&self) -> f64 {
        self.tick_rate
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub positions: Vec<f64>,
    pub time: f64,
}

impl PlantState {
    pub fn at_rest(positions: Vec<f64>) -> Self {
        Self {
            positions,
            time: 0.0,
        }
    }
}

pub fn p_command(reference: f64, position: f64, kp: f64, max_speed: f64) -> f64 {
    (kp * (reference - position)).clamp(-max_speed, max_speed)
}

/// Advances every joint by one control tick.
pub fn step(state: &PlantState, references: &[f64], cfg: &PlantConfig) -> Result<PlantState> {
    if references.len() != cfg.dof() {
        return Err(MimicError::shape(
            "plant references",
            cfg.dof(),
            references.len(),
        ));
    }
    if state.positions.len() != cfg.dof() {
        return Err(MimicError::shape(
            "plant state",
            cfg.dof(),
            state.positions.len(),
        ));
    }
    let dt = 1.0 / cfg.tick_rate;
    let positions = state
        .positions
        .iter()
        .zip(references)
        .enumerate()
        .map(|(j, (&pos, &r))| pos + p_command(r, pos, cfg.kp[j], cfg.max_speed[j]) / cfg.tick_rate)
        .collect();
    Ok(PlantState {
        positions,
        time: state.time + dt,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingReport {
    pub per_joint_max: Vec<f64>,
    pub per_joint_rms: Vec<f64>,
    pub overall_rms: f64,
    /// Half the peak-to-peak range of each trajectory.
    pub desired_amplitude: Vec<f64>,
    pub attained_amplitude: Vec<f64>,
    pub attenuated: Vec<bool>,
}

impl TrackingReport {
    pub fn any_attenuated(&self) -> bool {
        self.attenuated.iter().any(|&a| a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub times: Vec<f64>,
    pub desired: Vec<Vec<f64>>,
    pub attained: Vec<Vec<f64>>,
    pub report: TrackingReport,
}

impl Simulation {
    /// `time,<joint>_desired,<joint>_attained,...`
    pub fn write_csv<W: Write>(&self, writer: W, joint_names: &[String]) -> Result<()> {
        let dof = self.desired.first().map_or(0, Vec::len);
        if joint_names.len() != dof {
            return Err(MimicError::shape("joint names", dof, joint_names.len()));
        }
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time".to_string()];
        for name in joint_names {
            header.push(format!("{name}_desired"));
            header.push(format!("{name}_attained"));
        }
        w.write_record(&header)?;
        for ((t, d), a) in self.times.iter().zip(&self.desired).zip(&self.attained) {
            let mut rec = vec![t.to_string()];
            for (dj, aj) in d.iter().zip(a) {
                rec.push(dj.to_string());
                rec.push(aj.to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn amplitude(series: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = series.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    0.5 * (hi - lo)
}

/// Plays `source` through the plant. At every tick the attained position is
/// recorded before the step toward that tick's reference.
pub fn simulate(
    source: &dyn ReferenceSource,
    cfg: &PlantConfig,
    initial: &PlantState,
) -> Result<Simulation> {
    let dof = source.dof();
    if cfg.dof() != dof {
        return Err(MimicError::shape("plant config", dof, cfg.dof()));
    }
    if initial.positions.len() != dof {
        return Err(MimicError::shape(
            "initial state",
            dof,
            initial.positions.len(),
        ));
    }
    let duration = source.duration();
    let ticks = (duration * cfg.tick_rate + 1e-9).floor() as usize + 1;

    let mut times = Vec::with_capacity(ticks);
    let mut desired = Vec::with_capacity(ticks);
    let mut attained = Vec::with_capacity(ticks);
    let mut state = initial.clone();
    for k in 0..ticks {
        let t = k as f64 / cfg.tick_rate;
        let reference = source.reference(t.min(duration))?;
        times.push(t);
        attained.push(state.positions.clone());
        state = step(&state, &reference, cfg)?;
        desired.push(reference);
    }

    let mut per_joint_max = vec![0.0f64; dof];
    let mut sq = vec![0.0; dof];
    for (d, a) in desired.iter().zip(&attained) {
        for j in 0..dof {
            let e = (d[j] - a[j]).abs();
            per_joint_max[j] = per_joint_max[j].max(e);
            sq[j] += e * e;
        }
    }
    let n = ticks as f64;
    let per_joint_rms: Vec<f64> = sq.iter().map(|s| (s / n).sqrt()).collect();
    let overall_rms = (sq.iter().sum::<f64>() / (n * dof as f64)).sqrt();
    let desired_amplitude: Vec<f64> = (0..dof)
        .map(|j| amplitude(desired.iter().map(|d| d[j])))
        .collect();
    let attained_amplitude: Vec<f64> = (0..dof)
        .map(|j| amplitude(attained.iter().map(|a| a[j])))
        .collect();
    let attenuated = desired_amplitude
        .iter()
        .zip(&attained_amplitude)
        .map(|(&d, &a)| d > 0.0 && a < ATTENUATION_RATIO * d)
        .collect();

    Ok(Simulation {
        times,
        desired,
        attained,
        report: TrackingReport {
            per_joint_max,
            per_joint_rms,
            overall_rms,
            desired_amplitude,
            attained_amplitude,
            attenuated,
        },
    })
}
