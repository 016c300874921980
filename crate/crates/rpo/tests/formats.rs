use std::fs;

use rand::Rng;

use rpo::formats::{load_empirical, parse_demand_model, parse_empirical, write_demand_model};
use rpo::Environment;
use rpo_core::demand::{fit, DemandKind, DemandObservation, FitConfig, ObservationStore};
use rpo_core::derive_stream;
use rpo_core::market::ValueDistribution;
use rpo_core::stats::ks_against_cdf;

#[test]
fn uniform_draws_load_as_uniform() {
    let mut rng = derive_stream(1, 0);
    let draws: Vec<f64> = (0..10_000).map(|_| rng.gen()).collect();
    let text: String = draws.iter().map(|v| format!("{v}\n")).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bids.txt");
    fs::write(&path, format!("# uniform\n{text}")).unwrap();
    let dist = load_empirical(&path, Some(1.0)).unwrap();
    let mut rng = derive_stream(2, 0);
    let samples: Vec<f64> = (0..10_000).map(|_| dist.sample(&mut rng)).collect();
    assert!(ks_against_cdf(&samples, |v| v.clamp(0.0, 1.0)) <= 0.02);
}

#[test]
fn two_point_file() {
    let dist = parse_empirical("0.2\n0.8\n", "two.txt", None).unwrap();
    let ValueDistribution::Empirical(e) = dist else { panic!("not empirical") };
    assert_eq!(e.support().len(), 2);
}

#[test]
fn bad_files_name_the_line() {
    let err = parse_empirical("", "empty.txt", None).unwrap_err();
    assert!(err.to_string().contains("empty distribution"), "{err}");
    let err = parse_empirical("0.1\nabc\n", "bad.txt", None).unwrap_err();
    assert!(err.to_string().contains("bad.txt:2"), "{err}");
    let err = parse_empirical("0.1\n2.5\n", "range.txt", Some(1.0)).unwrap_err();
    assert!(err.to_string().contains("range.txt:2"), "{err}");
}

#[test]
fn empirical_environment_spec() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bids.txt");
    fs::write(&path, "2\n4\n6\n8\n").unwrap();
    let env = Environment::parse(&format!("empirical:{}/perfect:0.3", path.display())).unwrap();
    assert!(env.empirical);
    assert!(!env.is_no_response());
}

#[test]
fn demand_models_round_trip_through_text() {
    let mut rng = derive_stream(3, 0);
    let mut store = ObservationStore::new();
    for _ in 0..2_000 {
        let r = rng.gen_range(0.1..0.9);
        store.push(DemandObservation { reserve: r, cleared: rng.gen::<f64>() >= r });
    }
    for kind in [DemandKind::Logistic, DemandKind::Mlp] {
        let model = fit(&store, kind, &FitConfig::default_for(kind)).unwrap();
        let back = parse_demand_model(&write_demand_model(&model).unwrap(), "model.txt").unwrap();
        assert_eq!(back, model);
    }
}
