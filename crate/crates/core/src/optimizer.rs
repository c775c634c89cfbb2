//! Adam with bias correction, and phased learning-rate schedules.
//!
//! A schedule is a list of `(epochs, learning rate)` phases. With
//! `reset_on_phase` the Adam moments and step counter are zeroed at every
//! phase boundary, which produces short loss spikes right after a boundary.
//!
//! Schedule file format:
//!
//! ```text
//! phase epochs=30000 lr=0.001
//! phase epochs=5000 lr=0.0008
//! reset_on_phase=true
//! ```

use crate::error::{MimicError, Result};
use crate::network::{GradientSet, MimicNetwork};
use crate::textio::{content_lines, expect_key, parse_f64, parse_usize};

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
struct Moments {
    weights: Vec<f64>,
    biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first: Vec<Moments>,
    second: Vec<Moments>,
    step: u64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl AdamState {
    pub fn new(net: &MimicNetwork) -> Self {
        Self::with_hyperparameters(net, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON)
            .expect("default hyperparameters are valid")
    }

    pub fn with_hyperparameters(
        net: &MimicNetwork,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
            return Err(MimicError::Config(format!(
                "Adam betas must lie in [0, 1), got {beta1} and {beta2}"
            )));
        }
        if !(epsilon > 0.0) {
            return Err(MimicError::Config(format!(
                "Adam epsilon must be > 0, got {epsilon}"
            )));
        }
        let zeros: Vec<Moments> = net
            .layers()
            .iter()
            .map(|l| Moments {
                weights: vec![0.0; l.weights().len()],
                biases: vec![0.0; l.biases().len()],
            })
            .collect();
        Ok(Self {
            first: zeros.clone(),
            second: zeros,
            step: 0,
            beta1,
            beta2,
            epsilon,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn beta1(&self) -> f64 {
        self.beta1
    }

    pub fn beta2(&self) -> f64 {
        self.beta2
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn is_zeroed(&self) -> bool {
        self.step == 0
            && self
                .first
                .iter()
                .chain(&self.second)
                .all(|m| m.weights.iter().chain(&m.biases).all(|&v| v == 0.0))
    }

    /// Zeroes both moments and the step counter; hyperparameters stay.
    pub fn reset(&mut self) {
        for m in self.first.iter_mut().chain(self.second.iter_mut()) {
            m.weights.fill(0.0);
            m.biases.fill(0.0);
        }
        self.step = 0;
    }

    /// One bias-corrected Adam update of every parameter in `net`.
    ///
    /// Non-finite gradients are rejected before anything is modified.
    pub fn step(&mut self, net: &mut MimicNetwork, grads: &GradientSet, lr: f64) -> Result<()> {
        if grads.layers.len() != self.first.len() || net.layers().len() != self.first.len() {
            return Err(MimicError::shape(
                "optimizer layers",
                self.first.len(),
                grads.layers.len(),
            ));
        }
        for (l, (g, m)) in grads.layers.iter().zip(&self.first).enumerate() {
            if g.weights.len() != m.weights.len() || g.biases.len() != m.biases.len() {
                return Err(MimicError::shape(
                    "optimizer layer",
                    m.weights.len() + m.biases.len(),
                    g.weights.len() + g.biases.len(),
                ));
            }
            if g.weights.iter().chain(&g.biases).any(|v| !v.is_finite()) {
                return Err(MimicError::NonFiniteGradient { layer: l });
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let hp = Hyper {
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            correction1: 1.0 - self.beta1.powi(t),
            correction2: 1.0 - self.beta2.powi(t),
            lr,
        };
        for (l, layer) in net.layers_mut().iter_mut().enumerate() {
            let g = &grads.layers[l];
            let (m, v) = (&mut self.first[l], &mut self.second[l]);
            hp.apply(
                layer.weights_mut(),
                &g.weights,
                &mut m.weights,
                &mut v.weights,
            );
            hp.apply(layer.biases_mut(), &g.biases, &mut m.biases, &mut v.biases);
        }
        Ok(())
    }
}

struct Hyper {
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    correction1: f64,
    correction2: f64,
    lr: f64,
}

impl Hyper {
    fn apply(&self, params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64]) {
        for i in 0..params.len() {
            let g = grads[i];
            m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
            v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = m[i] / self.correction1;
            let v_hat = v[i] / self.correction2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase {
    pub epochs: usize,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSchedule {
    pub phases: Vec<Phase>,
    pub reset_on_phase: bool,
}

impl TrainingSchedule {
    pub fn new(phases: Vec<Phase>, reset_on_phase: bool) -> Result<Self> {
        if phases.is_empty() {
            return Err(MimicError::Config(
                "schedule needs at least one phase".into(),
            ));
        }
        for (i, p) in phases.iter().enumerate() {
            if p.epochs == 0 {
                return Err(MimicError::Config(format!("phase {i} has zero epochs")));
            }
            if !(p.learning_rate > 0.0 && p.learning_rate.is_finite()) {
                return Err(MimicError::Config(format!(
                    "phase {i} learning rate must be positive, got {}",
                    p.learning_rate
                )));
            }
        }
        Ok(Self {
            phases,
            reset_on_phase,
        })
    }

    /// 30000 epochs at 0.001, then four phases of 5000 epochs, each
    /// 0.0002 lower than the last.
    pub fn reference() -> Self {
        Self::five_phase(30_000, 5_000)
    }

    /// The reference phase proportions compressed to 5000 epochs.
    pub fn desk() -> Self {
        Self::five_phase(3_000, 500)
    }

    fn five_phase(first: usize, rest: usize) -> Self {
        let rates = [0.001, 0.0008, 0.0006, 0.0004, 0.0002];
        let phases = rates
            .iter()
            .enumerate()
            .map(|(i, &lr)| Phase {
                epochs: if i == 0 { first } else { rest },
                learning_rate: lr,
            })
            .collect();
        Self {
            phases,
            reset_on_phase: true,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "reference" => Some(Self::reference()),
            "desk" => Some(Self::desk()),
            _ => None,
        }
    }

    pub fn total_epochs(&self) -> usize {
        self.phases.iter().map(|p| p.epochs).sum()
    }

    /// Per-epoch `(phase index, learning rate)`.
    pub fn epochs(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.phases
            .iter()
            .enumerate()
            .flat_map(|(i, p)| std::iter::repeat_n((i, p.learning_rate), p.epochs))
    }

    pub fn learning_rates(&self) -> Vec<f64> {
        self.epochs().map(|(_, lr)| lr).collect()
    }

    /// First epoch index of every phase after the first.
    pub fn boundaries(&self) -> Vec<usize> {
        self.phases
            .iter()
            .scan(0, |acc, p| {
                *acc += p.epochs;
                Some(*acc)
            })
            .take(self.phases.len() - 1)
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut phases = Vec::new();
        let mut reset = None;
        let mut last = 0;
        for (n, line) in content_lines(text) {
            last = n;
            if let Some(value) = line.strip_prefix("reset_on_phase=") {
                reset = Some(match value {
                    "true" => true,
                    "false" => false,
                    other => {
                        return Err(MimicError::parse(
                            n,
                            format!("expected true|false, got `{other}`"),
                        ))
                    }
                });
                continue;
            }
            let f: Vec<&str> = line.split(' ').collect();
            if f.len() != 3 || f[0] != "phase" {
                return Err(MimicError::parse(
                    n,
                    "expected `phase epochs=<int> lr=<float>` or `reset_on_phase=<bool>`",
                ));
            }
            let epochs = parse_usize(expect_key(f[1], "epochs", n)?, n)?;
            let learning_rate = parse_f64(expect_key(f[2], "lr", n)?, n)?;
            phases.push(Phase {
                epochs,
                learning_rate,
            });
        }
        if phases.is_empty() {
            return Err(MimicError::parse(last.max(1), "schedule has no phases"));
        }
        Self::new(phases, reset.unwrap_or(true))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.phases {
            out.push_str(&format!(
                "phase epochs={} lr={}\n",
                p.epochs, p.learning_rate
            ));
        }
        out.push_str(&format!("reset_on_phase={}\n", self.reset_on_phase));
        out
    }
}
