use proptest::prelude::*;
use statematch::engine::ExperimentRecord;
use statematch_cli::config::Settings;
use statematch_cli::io::{records_from_csv, records_to_csv, sig12};

fn record() -> impl Strategy<Value = ExperimentRecord> {
    (
        "[a-z][a-z0-9_]{0,10}",
        prop::collection::vec(0usize..27, 1..5),
        1u32..4,
        0.01..=1.0f64,
        -7.0..7.0f64,
        -7.0..7.0f64,
        0u32..10,
        1u64..1_000_000,
        0.0..=1.0f64,
    )
        .prop_map(|(dev, qubits, n, eps, th, phi, run, shots, frac)| ExperimentRecord {
            device_label: dev,
            qubit_set: qubits,
            n_iterations: n,
            epsilon: eps,
            theta0: th,
            phi0: phi,
            run_index: run,
            shots,
            success_count: (frac * shots as f64).floor() as u64,
        })
}

proptest! {
    #[test]
    fn records_round_trip(rs in prop::collection::vec(record(), 1..20)) {
        let text = records_to_csv(&rs).unwrap();
        let back = records_from_csv(&text[..]).unwrap();
        prop_assert_eq!(back.len(), rs.len());
        for (a, b) in rs.iter().zip(&back) {
            prop_assert_eq!(&a.device_label, &b.device_label);
            prop_assert_eq!(&a.qubit_set, &b.qubit_set);
            prop_assert_eq!(a.success_count, b.success_count);
            prop_assert!((a.phi0 - b.phi0).abs() <= 1e-11 * a.phi0.abs().max(1e-300));
        }
        prop_assert_eq!(records_to_csv(&back).unwrap(), text);
    }

    #[test]
    fn twelve_digits_are_stable(x in -1e6..1e6f64) {
        let s = sig12(x);
        let y: f64 = s.parse().unwrap();
        prop_assert_eq!(sig12(y), s);
        prop_assert!((x - y).abs() <= 1e-11 * x.abs());
    }

    #[test]
    fn config_values_parse_back(eps in 0.01..=1.0f64, n in 1u32..4, seed in any::<u64>()) {
        let text = format!("protocol.epsilon = {eps}\nprotocol.n = {n}\nseed = {seed}\n");
        let s = Settings::parse(&text).unwrap();
        prop_assert_eq!(s.epsilon, eps);
        prop_assert_eq!(s.n_iterations, n);
        prop_assert_eq!(s.seed, seed);
    }
}
