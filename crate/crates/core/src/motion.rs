//! Keyframes, keyframe steps, and keyframe movements.
//!
//! A movement is a sequence of timed postures plus a speed rate. Playback
//! time relates to keyframe time by `keyframe_time = playback_time * rate`,
//! so a rate above 1 plays the movement faster.
//!
//! Text format:
//!
//! ```text
//! movement n=2 gamma=3 rate=1
//! t=0 0.0 0.1
//! t=0.5 0.4 -0.2
//! t=1 0.0 0.1
//! ```

use std::fmt;

use crate::error::{MimicError, Result};
use crate::spline::CubicSpline;
use crate::textio::{content_lines, expect_key, parse_f64, parse_usize};

/// One joint-space posture, radians.
#[derive(Debug, Clone, PartialEq)]
pub struct Keyframe(pub Vec<f64>);

impl Keyframe {
    pub fn dof(&self) -> usize {
        self.0.len()
    }

    pub fn joints(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyframeStep {
    pub keyframe: Keyframe,
    /// Seconds since movement start.
    pub time: f64,
}

impl KeyframeStep {
    pub fn new(time: f64, joints: Vec<f64>) -> Self {
        Self {
            keyframe: Keyframe(joints),
            time,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    TooFewSteps,
    FirstTimeZero,
    TimeFinite,
    TimesIncreasing,
    Dimension,
    AngleFinite,
    RatePositive,
}

impl Rule {
    pub fn id(self) -> &'static str {
        match self {
            Rule::TooFewSteps => "too-few-steps",
            Rule::FirstTimeZero => "first-time-zero",
            Rule::TimeFinite => "time-finite",
            Rule::TimesIncreasing => "times-increasing",
            Rule::Dimension => "dimension",
            Rule::AngleFinite => "angle-finite",
            Rule::RatePositive => "rate-positive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub rule: Rule,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, rule: Rule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    fn push(&mut self, rule: Rule, message: impl Into<String>) {
        self.violations.push(Violation {
            rule,
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "[{}] {}", v.rule.id(), v.message)?;
        }
        Ok(())
    }
}

/// Checks candidate movement data against every movement invariant.
/// Never fails; everything wrong is listed in the report.
pub fn validate_movement(dof: usize, steps: &[KeyframeStep], speed_rate: f64) -> ValidationReport {
    let mut report = ValidationReport::default();
    if steps.len() < 2 {
        report.push(
            Rule::TooFewSteps,
            format!("movement needs at least 2 steps, got {}", steps.len()),
        );
    }
    if let Some(first) = steps.first() {
        if first.time != 0.0 {
            report.push(Rule::FirstTimeZero, "first step time must be 0");
        }
    }
    for (i, step) in steps.iter().enumerate() {
        if !step.time.is_finite() || step.time < 0.0 {
            report.push(
                Rule::TimeFinite,
                format!("step {i}: time must be finite and non-negative"),
            );
        }
        if step.keyframe.dof() != dof {
            report.push(
                Rule::Dimension,
                format!(
                    "step {i}: expected {dof} joints, got {}",
                    step.keyframe.dof()
                ),
            );
        }
        if step.keyframe.0.iter().any(|a| !a.is_finite()) {
            report.push(
                Rule::AngleFinite,
                format!("step {i}: joint angles must be finite"),
            );
        }
    }
    for (i, pair) in steps.windows(2).enumerate() {
        if !(pair[1].time > pair[0].time) {
            report.push(
                Rule::TimesIncreasing,
                format!("step times must be strictly increasing (step {})", i + 1),
            );
        }
    }
    if !(speed_rate > 0.0 && speed_rate.is_finite()) {
        report.push(Rule::RatePositive, "speed rate must be positive");
    }
    report
}

/// A validated movement with its per-joint splines.
#[derive(Debug, Clone)]
pub struct KeyframeMovement {
    steps: Vec<KeyframeStep>,
    speed_rate: f64,
    splines: Vec<CubicSpline>,
}

impl KeyframeMovement {
    pub fn new(dof: usize, steps: Vec<KeyframeStep>, speed_rate: f64) -> Result<Self> {
        let report = validate_movement(dof, &steps, speed_rate);
        if !report.ok() {
            return Err(MimicError::InvalidMovement(report));
        }
        let splines = (0..dof)
            .map(|j| {
                let knots: Vec<(f64, f64)> =
                    steps.iter().map(|s| (s.time, s.keyframe.0[j])).collect();
                CubicSpline::new(&knots)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            steps,
            speed_rate,
            splines,
        })
    }

    pub fn dof(&self) -> usize {
        self.splines.len()
    }

    pub fn steps(&self) -> &[KeyframeStep] {
        &self.steps
    }

    pub fn speed_rate(&self) -> f64 {
        self.speed_rate
    }

    pub fn splines(&self) -> &[CubicSpline] {
        &self.splines
    }

    pub fn validate(&self) -> ValidationReport {
        validate_movement(self.dof(), &self.steps, self.speed_rate)
    }

    /// Seconds of playback: last keyframe time divided by the rate.
    pub fn playback_duration(&self) -> f64 {
        self.steps[self.steps.len() - 1].time / self.speed_rate
    }

    /// Interpolated posture at playback time `t`. Times outside
    /// `[0, playback_duration]` are rejected, not clamped.
    pub fn reference_pose(&self, t: f64) -> Result<Keyframe> {
        let duration = self.playback_duration();
        if !(t >= 0.0 && t <= duration) {
            return Err(MimicError::OutOfRange {
                value: t,
                lo: 0.0,
                hi: duration,
            });
        }
        let last = self.steps[self.steps.len() - 1].time;
        // t * rate can overshoot the last knot by an ulp when t == duration.
        let key_time = (t * self.speed_rate).min(last);
        let joints = self
            .splines
            .iter()
            .map(|s| s.eval(key_time))
            .collect::<Result<Vec<_>>>()?;
        Ok(Keyframe(joints))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = content_lines(text);
        let (hline, header) = lines
            .next()
            .ok_or_else(|| MimicError::parse(1, "empty movement file"))?;
        let fields: Vec<&str> = header.split(' ').collect();
        if fields.len() != 4 || fields[0] != "movement" {
            return Err(MimicError::parse(
                hline,
                "expected `movement n=<int> gamma=<int> rate=<float>`",
            ));
        }
        let dof = parse_usize(expect_key(fields[1], "n", hline)?, hline)?;
        let gamma = parse_usize(expect_key(fields[2], "gamma", hline)?, hline)?;
        let rate = parse_f64(expect_key(fields[3], "rate", hline)?, hline)?;

        let mut steps = Vec::with_capacity(gamma);
        let mut last_line = hline;
        for (lineno, line) in lines {
            last_line = lineno;
            if steps.len() == gamma {
                return Err(MimicError::parse(
                    lineno,
                    format!("more than gamma={gamma} steps"),
                ));
            }
            let mut tokens = line.split(' ');
            let time_tok = tokens.next().unwrap_or("");
            let time = parse_f64(expect_key(time_tok, "t", lineno)?, lineno)?;
            let joints = tokens
                .map(|tok| parse_f64(tok, lineno))
                .collect::<Result<Vec<_>>>()?;
            if joints.len() != dof {
                return Err(MimicError::parse(
                    lineno,
                    format!("expected {dof} joint values, got {}", joints.len()),
                ));
            }
            steps.push(KeyframeStep::new(time, joints));
        }
        if steps.len() != gamma {
            return Err(MimicError::parse(
                last_line,
                format!("expected gamma={gamma} steps, got {}", steps.len()),
            ));
        }
        Self::new(dof, steps, rate)
    }

    /// Serializes with shortest round-trip decimal values.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "movement n={} gamma={} rate={}\n",
            self.dof(),
            self.steps.len(),
            self.speed_rate
        );
        for step in &self.steps {
            out.push_str(&format!("t={}", step.time));
            for a in step.keyframe.joints() {
                out.push_str(&format!(" {a}"));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_steps(times: [f64; 3], rate: f64) -> (Vec<KeyframeStep>, f64) {
        let steps = times
            .iter()
            .enumerate()
            .map(|(i, &t)| KeyframeStep::new(t, vec![i as f64 * 0.1, -0.2]))
            .collect();
        (steps, rate)
    }

    #[test]
    fn valid_movement_passes() {
        let (steps, r) = three_steps([0.0, 0.5, 1.0], 1.0);
        let report = validate_movement(2, &steps, r);
        assert!(report.ok(), "{report}");
    }

    #[test]
    fn nonzero_start_is_reported() {
        let (steps, r) = three_steps([0.1, 0.5, 1.0], 1.0);
        let report = validate_movement(2, &steps, r);
        assert!(report.has(Rule::FirstTimeZero));
        assert!(report.to_string().contains("first step time must be 0"));
        assert_eq!(report.violations.len(), 1);
    }

    #[test]
    fn duplicate_time_is_reported() {
        let (steps, r) = three_steps([0.0, 0.5, 0.5], 1.0);
        let report = validate_movement(2, &steps, r);
        assert!(report.has(Rule::TimesIncreasing));
    }

    #[test]
    fn every_violation_listed() {
        let steps = vec![KeyframeStep::new(0.2, vec![f64::NAN])];
        let report = validate_movement(2, &steps, 0.0);
        for rule in [
            Rule::TooFewSteps,
            Rule::FirstTimeZero,
            Rule::Dimension,
            Rule::AngleFinite,
            Rule::RatePositive,
        ] {
            assert!(report.has(rule), "missing {rule:?} in {report}");
        }
        assert!(!report.ok());
    }

    #[test]
    fn construction_rejects_invalid() {
        let (steps, _) = three_steps([0.0, 0.5, 1.0], 1.0);
        let err = KeyframeMovement::new(2, steps, -1.0).unwrap_err();
        assert!(matches!(err, MimicError::InvalidMovement(ref r) if r.has(Rule::RatePositive)));
    }

    #[test]
    fn durations() {
        for (rate, expected) in [(1.0, 2.0), (2.0, 1.0), (0.5, 4.0)] {
            let (steps, _) = three_steps([0.0, 1.0, 2.0], rate);
            let m = KeyframeMovement::new(2, steps, rate).unwrap();
            assert_eq!(m.playback_duration(), expected);
        }
    }

    #[test]
    fn pose_range_is_enforced() {
        let (steps, r) = three_steps([0.0, 1.0, 2.0], 2.0);
        let m = KeyframeMovement::new(2, steps, r).unwrap();
        assert!(m.reference_pose(-0.001).is_err());
        assert!(m.reference_pose(1.0001).is_err());
        assert_eq!(m.reference_pose(0.0).unwrap(), m.steps()[0].keyframe);
        let end = m.reference_pose(1.0).unwrap();
        for (a, b) in end.joints().iter().zip(m.steps()[2].keyframe.joints()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn parse_reports_line_numbers() {
        let bad = "movement n=2 gamma=2 rate=1\nt=0 0 0\nt=1 0 zero\n";
        match KeyframeMovement::parse(bad) {
            Err(MimicError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let short = "movement n=2 gamma=2 rate=1\nt=0 0 0\nt=1 0\n";
        assert!(matches!(
            KeyframeMovement::parse(short),
            Err(MimicError::Parse { line: 3, .. })
        ));
        let header = "motion n=2 gamma=2 rate=1\n";
        assert!(matches!(
            KeyframeMovement::parse(header),
            Err(MimicError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn parse_surfaces_validation() {
        let text = "movement n=1 gamma=2 rate=1\nt=0.1 0\nt=1 1\n";
        let err = KeyframeMovement::parse(text).unwrap_err();
        assert!(err.to_string().contains("first step time must be 0"));
    }

    #[test]
    fn text_round_trip() {
        let text = "movement n=2 gamma=3 rate=1.5\nt=0 0.1 -0.3\nt=0.25 0.7 0.2\nt=1 0 1e-5\n";
        let m = KeyframeMovement::parse(text).unwrap();
        let again = KeyframeMovement::parse(&m.to_text()).unwrap();
        assert_eq!(again.steps(), m.steps());
        assert_eq!(again.speed_rate(), 1.5);
        assert_eq!(again.to_text(), m.to_text());
    }
}
