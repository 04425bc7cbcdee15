//! Property tests over random seeds and sizes.

use diot_core::entropy::{min_entropy, smooth_min_entropy, JointDistribution};
use diot_core::harness::{run_experiment, ExperimentKind, ExperimentSpec};
use diot_core::protocols::device::{ClassicalStrategy, DeviceKind};
use diot_core::protocols::transcript::{Body, Party};
use diot_core::protocols::{
    run_protocol1, run_protocol4, Protocol1Options, Protocol4Options, ProtocolConfig, ReceiverPolicy, ReceiverStrategy, RoundTag, RoundType,
};
use diot_core::qsim::{make_bell, trace_distance, Basis, BellLabel, DensityMatrix, StateVector};
use diot_core::rng::SeedTree;
use proptest::prelude::*;

fn basis(bit: bool) -> Basis {
    Basis::from_bit(u8::from(bit))
}

fn device(k: u8) -> DeviceKind {
    match k % 5 {
        0 => DeviceKind::Honest,
        1 => DeviceKind::Leaky,
        2 => DeviceKind::Classical { strategy: ClassicalStrategy::RandomAnswers },
        3 => DeviceKind::Classical { strategy: ClassicalStrategy::ImageHonestBellRandom },
        _ => DeviceKind::Classical { strategy: ClassicalStrategy::BestKnown },
    }
}

fn policy(k: u8) -> ReceiverPolicy {
    [ReceiverPolicy::RandomBases, ReceiverPolicy::Computational, ReceiverPolicy::ChoiceBasis][usize::from(k % 3)]
}

fn mixed(seed: u64, qubits: usize) -> DensityMatrix {
    let mut rng = SeedTree::new(seed).rng();
    let parts: Vec<(f64, StateVector)> = (0..3).map(|k| ((k + 1) as f64 / 6.0, StateVector::haar_random(qubits, &mut rng).unwrap())).collect();
    DensityMatrix::mixture(&parts).unwrap()
}

proptest! {
    #[test]
    fn mismatched_bases_give_uniform_outcomes(va in 0u8..2, vb in 0u8..2, first in any::<bool>()) {
        let p = make_bell(BellLabel::new(va, vb).unwrap()).outcome_distribution(&[basis(first), basis(!first)]).unwrap();
        for q in p {
            prop_assert!((q - 0.25).abs() < 1e-10);
        }
    }

    #[test]
    fn measurement_branches_are_normalized(seed in any::<u64>(), qubits in 1usize..=4, index in 0usize..4, hadamard in any::<bool>()) {
        let state = StateVector::haar_random(qubits, &mut SeedTree::new(seed).rng()).unwrap();
        let index = index % qubits;
        let mut total = 0.0;
        for outcome in 0..2 {
            if let Some((p, post)) = state.branch(index, basis(hadamard), outcome).unwrap() {
                total += p;
                prop_assert!((post.norm_sqr() - 1.0).abs() < 1e-10);
            }
        }
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn trace_distance_is_a_metric(a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
        let (x, y, z) = (mixed(a, 2), mixed(b, 2), mixed(c, 2));
        let xy = trace_distance(&x, &y).unwrap();
        prop_assert!((xy - trace_distance(&y, &x).unwrap()).abs() < 1e-10);
        prop_assert!(xy <= trace_distance(&x, &z).unwrap() + trace_distance(&z, &y).unwrap() + 1e-10);
        prop_assert!(trace_distance(&x, &x).unwrap() < 1e-10);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&xy));
    }

    #[test]
    fn smoothing_starts_at_min_entropy_and_only_grows(w in prop::collection::vec(0.0f64..1.0, 12), e1 in 0.0f64..0.4, e2 in 0.0f64..0.4) {
        prop_assume!(w.iter().any(|&v| v > 1e-6));
        let d = JointDistribution::from_weights(4, 3, w).unwrap();
        prop_assert_eq!(smooth_min_entropy(&d, 0.0).unwrap(), min_entropy(&d).unwrap());
        let (lo, hi) = (e1.min(e2), e1.max(e2));
        prop_assert!(smooth_min_entropy(&d, lo).unwrap() <= smooth_min_entropy(&d, hi).unwrap() + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn honest_bell_pair_protocol_is_complete(seed in any::<u64>(), n in 4usize..80, l in 1usize..5) {
        let cfg = ProtocolConfig { n, l: l.min(n), ..Default::default() };
        let run = run_protocol1(&cfg, &Protocol1Options::default(), SeedTree::new(seed)).unwrap();
        prop_assert!(!run.outcome.aborted);
        prop_assert!(run.outcome.correct());
    }

    #[test]
    fn device_independent_run_invariants(seed in any::<u64>(), n in 8usize..96, k in 0u8..5, threshold in 0.0f64..0.6) {
        let cfg = ProtocolConfig { n, l: 2, threshold, ..Default::default() };
        let dev = device(k);
        let run = run_protocol4(&cfg, &Protocol4Options { device: dev, ..Default::default() }, SeedTree::new(seed)).unwrap();
        let verdicts = run.transcript.messages.iter().find_map(|m| match &m.payload.body {
            Body::Verdicts { tested, failed, .. } => Some((*tested, *failed)),
            _ => None,
        });
        let (tested, failed) = verdicts.expect("verdicts are always published");
        let fraction = if tested == 0 { 0.0 } else { failed as f64 / tested as f64 };
        prop_assert_eq!(run.outcome.aborted, fraction > threshold);
        let sets = &run.outcome.index_sets;
        for &i in &sets.tilde_i {
            let r = &run.records[i];
            prop_assert!(sets.i.contains(&i));
            prop_assert!(r.in_i && r.t == Some(RoundTag::Generate) && r.rt == RoundType::Bell);
        }
        for m in &run.transcript.messages {
            if let Body::TildeI { indices, .. } = &m.payload.body {
                prop_assert_eq!(m.step, 6);
                prop_assert_eq!(m.payload.to, Party::Receiver);
                prop_assert_eq!(indices, &sets.tilde_i);
            }
        }
        if dev != DeviceKind::Leaky {
            prop_assert!(run.leak.is_empty());
        }
        if dev == DeviceKind::Honest {
            prop_assert!(run.outcome.aborted || run.outcome.correct());
            prop_assert_eq!(failed, 0);
        }
    }

    #[test]
    fn bounded_receivers_stay_within_capacity(seed in any::<u64>(), capacity in 0usize..6, k in 0u8..3) {
        let receiver = ReceiverStrategy::Bounded { capacity, policy: policy(k) };
        let cfg = ProtocolConfig { n: 48, l: 2, ..Default::default() };
        let run = run_protocol4(&cfg, &Protocol4Options { receiver, ..Default::default() }, SeedTree::new(seed)).unwrap();
        prop_assert!(run.stored_rounds <= capacity);
        let p1 = run_protocol1(&cfg, &Protocol1Options { receiver, ..Default::default() }, SeedTree::new(seed)).unwrap();
        prop_assert!(p1.guesses.is_some());
    }

    #[test]
    fn reports_depend_only_on_the_spec(seed in any::<u64>()) {
        let spec = ExperimentSpec::new(ExperimentKind::Ot1, ProtocolConfig { n: 16, l: 2, seed, ..Default::default() }, 3);
        let a = run_experiment(&spec).unwrap();
        prop_assert_eq!(a.text(), run_experiment(&spec).unwrap().text());
        prop_assert_eq!(&a.summary["spec"]["config"], &serde_json::to_value(&spec.config).unwrap());
    }
}
