mod common;

use mimic_core::dataset::{sample_movement, MotionDataset};
use mimic_core::motion::{KeyframeMovement, KeyframeStep};
use mimic_core::network::{Architecture, MimicNetwork};
use mimic_core::optimizer::{Phase, TrainingSchedule};
use mimic_core::trainer::{EpochRecord, TrainingLog};
use proptest::prelude::*;

fn csv_bytes(ds: &MotionDataset) -> Vec<u8> {
    let mut buf = Vec::new();
    ds.write_csv(&mut buf).unwrap();
    buf
}

fn any_finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -10.0f64..10.0,
        (prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL)
            .prop_filter("moderate", |v| v.abs() < 1e100),
        Just(0.0),
        Just(-0.0),
        Just(f64::MIN_POSITIVE),
    ]
}

proptest! {
    #[test]
    fn weight_files(
        hidden in prop::collection::vec(1usize..6, 0..3),
        seed in any::<u64>(),
        alpha in 0.001f64..0.3,
        perturb in prop::collection::vec(any_finite(), 1..4),
    ) {
        let mut sizes = vec![1];
        sizes.extend(hidden);
        sizes.push(3);
        let mut arch = Architecture::mlp(&sizes).unwrap();
        arch.alpha = alpha;
        let mut net = MimicNetwork::initialize(&arch, seed).unwrap();
        let mut params = net.param_vector();
        for (i, v) in perturb.into_iter().enumerate() {
            let n = params.len();
            params[i % n] = v;
        }
        net.set_param_vector(&params).unwrap();

        let text = net.to_text();
        let back = MimicNetwork::parse(&text).unwrap();
        prop_assert_eq!(back.param_vector(), net.param_vector());
        prop_assert_eq!(back.alpha(), alpha);
        prop_assert_eq!(back.to_text(), text);
    }

    #[test]
    fn dataset_csvs(
        seed in any::<u64>(),
        frames in 2usize..8,
        dof in 1usize..5,
        duration in 0.3f64..3.0,
        tail in 0usize..12,
    ) {
        let m = common::synthetic_movement(seed, frames, dof, duration, 1.2);
        let ds = sample_movement(&m, 50.0, tail).unwrap();
        let bytes = csv_bytes(&ds);
        let back = MotionDataset::read_csv(bytes.as_slice()).unwrap();
        prop_assert_eq!(back.targets(), ds.targets());
        prop_assert_eq!(back.sample_times(), ds.sample_times());
        prop_assert_eq!(back.sample_rate(), ds.sample_rate());
        prop_assert_eq!(csv_bytes(&back), bytes);
    }

    #[test]
    fn movement_files(
        raw in prop::collection::vec((1e-3f64..2.0, prop::collection::vec(any_finite(), 3)), 2..10),
        rate in prop_oneof![0.01f64..10.0, Just(1.0)],
    ) {
        let mut t = 0.0;
        let steps: Vec<KeyframeStep> = raw
            .into_iter()
            .enumerate()
            .map(|(i, (gap, joints))| {
                if i > 0 {
                    t += gap;
                }
                KeyframeStep::new(t, joints)
            })
            .collect();
        let m = KeyframeMovement::new(3, steps, rate).unwrap();
        let text = m.to_text();
        let back = KeyframeMovement::parse(&text).unwrap();
        prop_assert_eq!(back.steps(), m.steps());
        prop_assert_eq!(back.speed_rate(), rate);
        prop_assert_eq!(back.to_text(), text);
    }

    #[test]
    fn schedules(phases in prop::collection::vec((1usize..50_000, 1e-7f64..1.0), 1..6), reset in any::<bool>()) {
        let s = TrainingSchedule::new(
            phases.into_iter().map(|(epochs, learning_rate)| Phase { epochs, learning_rate }).collect(),
            reset,
        ).unwrap();
        let back = TrainingSchedule::parse(&s.to_text()).unwrap();
        prop_assert_eq!(&back, &s);
    }

    #[test]
    fn training_logs(rows in prop::collection::vec((any_finite(), 0.0f64..5.0), 1..30)) {
        let log = TrainingLog {
            records: rows
                .into_iter()
                .enumerate()
                .map(|(epoch, (mse, mae))| EpochRecord { epoch, phase: epoch / 7, lr: 1e-3, mse: mse.abs(), mae })
                .collect(),
        };
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let back = TrainingLog::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, log);
    }
}
