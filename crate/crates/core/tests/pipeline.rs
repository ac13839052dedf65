//! Cross-module integration: estimator tables flowing into metrics, and the
//! file formats round-tripping through their own loaders.

use rbaudit_core::attacks::{attack_distances, AttackConfig, AttackMethod};
use rbaudit_core::data::synth::make_three_class_gaussians;
use rbaudit_core::data::{load_csv, partitions_of, write_csv, CsvSchema, PartitionBy};
use rbaudit_core::geometry::exact_distance_table;
use rbaudit_core::metrics::{curve, BoundKind, DistanceTable};
use rbaudit_core::models::{train, Arch, TrainConfig};
use rbaudit_core::smoothing::{smoothing_distances, SmoothingConfig};

fn trained_three_class() -> (rbaudit_core::models::Model, rbaudit_core::data::Dataset) {
    let ds = make_three_class_gaussians(30, [(0.0, 0.0), (4.0, 0.0), (2.0, 3.4)], 0.6, 13).unwrap();
    let cfg = TrainConfig {
        epochs: 150,
        batch_size: 16,
        learning_rate: 0.5,
        seed: 13,
        ..TrainConfig::default()
    };
    let out = train(&ds, &Arch::Affine, &cfg).unwrap();
    (out.model, ds)
}

/// With zero overshoot, a DeepFool table on an affine model defines the same
/// survival curves as the closed form: equal values between breakpoints and
/// equal areas to within 1e-6.
#[test]
fn deepfool_zero_overshoot_curves_match_exact_curves() {
    let (model, ds) = trained_three_class();
    let affine = model.as_affine().unwrap();
    let exact = exact_distance_table(affine, &ds).unwrap();
    let cfg = AttackConfig {
        overshoot: 0.0,
        ..AttackConfig::default()
    };
    let df = attack_distances(affine, &ds, AttackMethod::DeepFool, &cfg)
        .unwrap()
        .table;

    for p in partitions_of(&ds, &PartitionBy::Class).unwrap() {
        let ce = curve(&exact, &p).unwrap();
        let cd = curve(&df, &p).unwrap();
        // Evaluate strictly between consecutive exact breakpoints.
        for w in ce.grid.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            assert!(
                (ce.value_at(mid) - cd.value_at(mid)).abs() < 1e-12,
                "curve mismatch at {mid}"
            );
        }
        let upper = exact.max_finite_distance();
        assert!((ce.auc(upper) - cd.auc(upper)).abs() < 1e-6 * upper.max(1.0));
    }
}

#[test]
fn estimator_tables_round_trip_through_files() {
    let (model, ds) = trained_three_class();
    let affine = model.as_affine().unwrap();
    let dir = tempfile::tempdir().unwrap();

    let tables = vec![
        exact_distance_table(affine, &ds).unwrap(),
        attack_distances(affine, &ds, AttackMethod::DeepFool, &AttackConfig::default())
            .unwrap()
            .table,
    ];
    for t in tables {
        let path = dir.path().join(format!("{}.csv", t.method()));
        t.write_csv(&path, Some("roundtrip")).unwrap();
        let back = DistanceTable::read_csv(&path, t.bound()).unwrap();
        assert_eq!(t, back);
    }
}

#[test]
fn smoothing_batch_round_trips_and_converts() {
    let (model, ds) = trained_three_class();
    let cfg = SmoothingConfig {
        sigma_noise: 0.3,
        n0: 20,
        n: 100,
        alpha: 0.01,
        seed: 5,
    };
    let batch = smoothing_distances(&model, &ds, &cfg).unwrap();
    assert_eq!(batch.records.len(), ds.len());
    assert!(batch.errors.is_empty());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("certs.csv");
    batch.write_certificates_csv(&path, Some("certs")).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# manifest: certs\n"));
    assert_eq!(text.lines().count(), 2 + ds.len());

    let table = batch.to_distance_table();
    assert_eq!(table.bound(), BoundKind::Lower);
    // Certified radii are a distance table like any other: curves work.
    for p in partitions_of(&ds, &PartitionBy::Class).unwrap() {
        let c = curve(&table, &p).unwrap();
        assert!(c.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}

/// The local-linearization distance equals the closed form everywhere off
/// the boundary when the model actually is affine.
#[test]
fn linearized_distance_equals_exact_on_affine_models() {
    use rbaudit_core::geometry::exact_distance;
    use rbaudit_core::models::{linearized_distance, AffineClassifier};
    use rbaudit_core::sampling::{stream_rng, NormalSource};

    let mut normals = NormalSource::new(stream_rng(77, 0));
    let mut checked = 0;
    while checked < 200 {
        let k = 2 + checked % 4;
        let d = 2 + checked % 6;
        let rows: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..d).map(|_| normals.sample()).collect())
            .collect();
        let biases: Vec<f64> = (0..k).map(|_| normals.sample()).collect();
        let m = AffineClassifier::from_rows(rows, biases).unwrap();
        let x: Vec<f64> = (0..d).map(|_| normals.sample()).collect();
        let exact = match exact_distance(&m, &x) {
            Ok(e) if e.value > 1e-9 => e,
            _ => continue,
        };
        let lin = linearized_distance(&m, &x).unwrap();
        assert!(
            (lin - exact.value).abs() <= 1e-9 * exact.value.max(1.0),
            "linearized {lin} vs exact {}",
            exact.value
        );
        checked += 1;
    }
}

#[test]
fn dataset_csv_survives_reload_for_downstream_use() {
    let (_, ds) = trained_three_class();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("blobs.csv");
    write_csv(&ds, &path, None).unwrap();
    let schema = CsvSchema::new("label");
    let back = load_csv(&path, &schema).unwrap();
    assert_eq!(ds, back);
}
