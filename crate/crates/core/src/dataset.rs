//! Time-indexed joint datasets sampled at a fixed rate.
//!
//! Each target row holds the joint angles followed by the end-of-motion
//! flag (0 while moving, 1 from the final in-motion sample on). A few tail
//! samples after the end repeat the final posture with flag 1 so the flag
//! transition is learnable. Periodic motions carry flag 0 throughout.

use std::io::{Read, Write};

use crate::error::{MimicError, Result};
use crate::motion::KeyframeMovement;

pub const DEFAULT_SAMPLE_RATE: f64 = 50.0;
pub const DEFAULT_TAIL_SAMPLES: usize = 10;

const TIME_TOLERANCE: f64 = 1e-9;

/// Maps absolute sample time to network input `(t - offset) / scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub offset: f64,
    pub scale: f64,
}

impl Normalization {
    pub fn new(offset: f64, scale: f64) -> Result<Self> {
        if !offset.is_finite() || !(scale > 0.0 && scale.is_finite()) {
            return Err(MimicError::Config(format!(
                "invalid time normalization offset={offset} scale={scale}"
            )));
        }
        Ok(Self { offset, scale })
    }

    pub fn apply(&self, t: f64) -> f64 {
        (t - self.offset) / self.scale
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionDataset {
    joint_names: Vec<String>,
    sample_times: Vec<f64>,
    targets: Vec<Vec<f64>>,
    sample_rate: f64,
    normalization: Normalization,
    duration: f64,
    periodic: bool,
}

impl MotionDataset {
    /// Checks uniform spacing and flag layout, then derives normalization
    /// from the sample span.
    pub fn new(
        joint_names: Vec<String>,
        sample_times: Vec<f64>,
        targets: Vec<Vec<f64>>,
        sample_rate: f64,
    ) -> Result<Self> {
        if sample_times.is_empty() {
            return Err(MimicError::Config("dataset has no samples".into()));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(MimicError::Config("rate must be positive".into()));
        }
        if targets.len() != sample_times.len() {
            return Err(MimicError::shape(
                "dataset rows",
                sample_times.len(),
                targets.len(),
            ));
        }
        let width = joint_names.len() + 1;
        for row in &targets {
            if row.len() != width {
                return Err(MimicError::shape("dataset row", width, row.len()));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(MimicError::Config("dataset values must be finite".into()));
            }
        }
        if sample_times.iter().any(|t| !t.is_finite()) {
            return Err(MimicError::Config("sample times must be finite".into()));
        }
        let period = 1.0 / sample_rate;
        for (i, w) in sample_times.windows(2).enumerate() {
            if ((w[1] - w[0]) - period).abs() > TIME_TOLERANCE {
                return Err(MimicError::Config(format!(
                    "sample {} breaks the {} Hz spacing",
                    i + 1,
                    sample_rate
                )));
            }
        }

        let flag = width - 1;
        let end = targets.iter().position(|r| r[flag] >= 0.5);
        for (i, row) in targets.iter().enumerate() {
            let expected = if end.is_some_and(|e| i >= e) {
                1.0
            } else {
                0.0
            };
            if row[flag] != expected {
                return Err(MimicError::Config(format!(
                    "sample {i}: end flag must be 0 before the motion end and 1 after"
                )));
            }
        }

        let first = sample_times[0];
        let last = sample_times[sample_times.len() - 1];
        let span = last - first;
        let normalization = Normalization::new(first, if span > 0.0 { span } else { 1.0 })?;
        let (duration, periodic) = match end {
            Some(e) => (sample_times[e] - first, false),
            None => (span, true),
        };
        Ok(Self {
            joint_names,
            sample_times,
            targets,
            sample_rate,
            normalization,
            duration,
            periodic,
        })
    }

    pub fn with_joint_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.joint_names.len() {
            return Err(MimicError::shape(
                "joint names",
                self.joint_names.len(),
                names.len(),
            ));
        }
        self.joint_names = names;
        Ok(self)
    }

    pub fn dof(&self) -> usize {
        self.joint_names.len()
    }

    pub fn len(&self) -> usize {
        self.sample_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_times.is_empty()
    }

    pub fn joint_names(&self) -> &[String] {
        &self.joint_names
    }

    pub fn sample_times(&self) -> &[f64] {
        &self.sample_times
    }

    /// Rows of `dof` joint angles plus the end flag.
    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// Seconds from the first sample to the motion end (or the span, if periodic).
    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn periodic(&self) -> bool {
        self.periodic
    }

    /// Index of the first sample flagged as ended.
    pub fn end_index(&self) -> Option<usize> {
        let flag = self.dof();
        self.targets.iter().position(|r| r[flag] >= 0.5)
    }

    /// Normalized time inputs, one single-element vector per sample.
    pub fn inputs(&self) -> Vec<Vec<f64>> {
        self.sample_times
            .iter()
            .map(|&t| vec![self.normalization.apply(t)])
            .collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time".to_string()];
        header.extend(self.joint_names.iter().cloned());
        header.push("end_flag".into());
        w.write_record(&header)?;
        for (t, row) in self.sample_times.iter().zip(&self.targets) {
            let mut rec = vec![t.to_string()];
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a dataset CSV. The rate is recovered from the time column.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let cols: Vec<&str> = header.iter().collect();
        if cols.len() < 3 || cols[0] != "time" || cols[cols.len() - 1] != "end_flag" {
            return Err(MimicError::parse(
                1,
                "expected header `time,<joints...>,end_flag`",
            ));
        }
        let names: Vec<String> = cols[1..cols.len() - 1]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut times = Vec::new();
        let mut targets = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let line = i + 2;
            let rec = rec?;
            if rec.len() != cols.len() {
                return Err(MimicError::parse(
                    line,
                    format!("expected {} fields, got {}", cols.len(), rec.len()),
                ));
            }
            let vals = rec
                .iter()
                .map(|f| crate::textio::parse_f64(f, line))
                .collect::<Result<Vec<_>>>()?;
            times.push(vals[0]);
            targets.push(vals[1..].to_vec());
        }
        let rate = infer_rate(&times)?;
        Self::new(names, times, targets, rate)
    }
}

fn infer_rate(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(MimicError::Config(
            "need at least 2 samples to infer the rate".into(),
        ));
    }
    let span = times[times.len() - 1] - times[0];
    if !(span > 0.0) {
        return Err(MimicError::Config("sample times must increase".into()));
    }
    let rate = (times.len() - 1) as f64 / span;
    let whole = rate.round();
    Ok(if (rate - whole).abs() < 1e-9 * rate {
        whole
    } else {
        rate
    })
}

fn default_names(dof: usize) -> Vec<String> {
    (1..=dof).map(|j| format!("j{j}")).collect()
}

/// Samples the movement's reference trajectory at `rate` Hz, from 0 to the
/// end of playback, then appends `tail` copies of the final posture.
pub fn sample_movement(m: &KeyframeMovement, rate: f64, tail: usize) -> Result<MotionDataset> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(MimicError::Config("rate must be positive".into()));
    }
    let duration = m.playback_duration();
    let in_motion = (duration * rate + TIME_TOLERANCE).floor() as usize + 1;
    let dof = m.dof();
    let final_pose = m.reference_pose(duration)?;

    let mut times = Vec::with_capacity(in_motion + tail);
    let mut targets = Vec::with_capacity(in_motion + tail);
    for k in 0..in_motion + tail {
        let t = k as f64 / rate;
        let mut row = if k < in_motion {
            m.reference_pose(t.min(duration))?.0
        } else {
            final_pose.0.clone()
        };
        row.push(if t >= duration - TIME_TOLERANCE {
            1.0
        } else {
            0.0
        });
        times.push(t);
        targets.push(row);
    }
    MotionDataset::new(default_names(dof), times, targets, rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestOptions {
    /// Flag stays 0 and no tail is added.
    pub periodic: bool,
    pub tail: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            periodic: false,
            tail: DEFAULT_TAIL_SAMPLES,
        }
    }
}

/// One raw log row: time and joint angles.
pub type LogRecord = (f64, Vec<f64>);

/// Regularizes externally captured `(time, joints)` records onto a uniform
/// grid. A single dropped sample is filled by linear interpolation; longer
/// gaps are rejected.
pub fn ingest_log(
    records: &[LogRecord],
    rate: f64,
    options: IngestOptions,
) -> Result<MotionDataset> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(MimicError::Config("rate must be positive".into()));
    }
    let Some(first) = records.first() else {
        return Err(MimicError::Config("log has no records".into()));
    };
    let dof = first.1.len();
    for (i, (t, joints)) in records.iter().enumerate() {
        if joints.len() != dof {
            return Err(MimicError::parse(
                i + 1,
                format!("expected {dof} joint values, got {}", joints.len()),
            ));
        }
        if !t.is_finite() || joints.iter().any(|v| !v.is_finite()) {
            return Err(MimicError::parse(i + 1, "non-finite value"));
        }
    }

    let period = 1.0 / rate;
    let mut poses: Vec<Vec<f64>> = vec![first.1.clone()];
    for (i, pair) in records.windows(2).enumerate() {
        let (t0, a) = (&pair[0].0, &pair[0].1);
        let (t1, b) = (&pair[1].0, &pair[1].1);
        let dt = t1 - t0;
        if !(dt > 0.0) {
            return Err(MimicError::parse(
                i + 2,
                format!("record time {t1} does not increase (previous {t0})"),
            ));
        }
        let ticks = dt / period;
        let whole = ticks.round();
        if (ticks - whole).abs() > 0.25 {
            return Err(MimicError::Ingest {
                at: *t0,
                message: format!("spacing {dt} s is off the {rate} Hz grid"),
            });
        }
        match whole as usize {
            1 => {}
            2 => poses.push(a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()),
            n => {
                return Err(MimicError::Ingest {
                    at: *t0,
                    message: format!("{} consecutive samples missing", n - 1),
                })
            }
        }
        poses.push(b.clone());
    }

    let start = first.0;
    let samples = poses.len();
    let tail = if options.periodic { 0 } else { options.tail };
    let mut times = Vec::with_capacity(samples + tail);
    let mut targets = Vec::with_capacity(samples + tail);
    for k in 0..samples + tail {
        let mut row = poses[k.min(samples - 1)].clone();
        let ended = !options.periodic && k + 1 >= samples;
        row.push(if ended { 1.0 } else { 0.0 });
        times.push(start + k as f64 / rate);
        targets.push(row);
    }
    MotionDataset::new(default_names(dof), times, targets, rate)
}

/// Reads a raw log CSV with header `time,<joint names...>`.
pub fn read_log_csv<R: Read>(reader: R) -> Result<(Vec<String>, Vec<LogRecord>)> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 2 || cols[0] != "time" {
        return Err(MimicError::parse(1, "expected header `time,<joints...>`"));
    }
    let names = cols[1..].iter().map(|s| s.to_string()).collect();
    let mut records = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|f| crate::textio::parse_f64(f, line))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != cols.len() {
            return Err(MimicError::parse(line, "wrong number of fields"));
        }
        records.push((vals[0], vals[1..].to_vec()));
    }
    Ok((names, records))
}
