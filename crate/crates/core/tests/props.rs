//! Property tests for the structural invariants.

use proptest::prelude::*;
use rbaudit_core::data::{parse_partition_spec, partitions_of, Attribute, Dataset, PartitionBy};
use rbaudit_core::data::{write_csv, CsvSchema, Partition};
use rbaudit_core::metrics::{curve, rb, sigma, BoundKind, DistanceRecord, DistanceTable};
use rbaudit_core::smoothing::clopper_pearson_lower;
use std::collections::BTreeMap;

/// Re-code a categorical column densely in first-appearance order, the
/// normal form every loader-produced dataset is in and the domain on which
/// the CSV round-trip is bit-exact structural equality.
fn densify(codes: &[usize], names: &[String]) -> (Vec<usize>, Vec<String>) {
    let mut order: Vec<usize> = Vec::new();
    let recoded = codes
        .iter()
        .map(|&c| match order.iter().position(|&o| o == c) {
            Some(i) => i,
            None => {
                order.push(c);
                order.len() - 1
            }
        })
        .collect();
    (recoded, order.iter().map(|&c| names[c].clone()).collect())
}

fn arb_dataset() -> impl Strategy<Value = Dataset> {
    (2usize..6, 1usize..4, 4usize..24).prop_flat_map(|(k, d, n)| {
        let features = proptest::collection::vec(-1e6f64..1e6, n * d);
        let labels = proptest::collection::vec(0usize..k, n);
        let attr = proptest::collection::vec(0usize..3, n);
        (features, labels, attr).prop_map(move |(features, labels, attr)| {
            let class_names: Vec<String> = (0..k).map(|c| format!("c{c}")).collect();
            let (labels, class_names) = densify(&labels, &class_names);
            let (attr, attr_names) =
                densify(&attr, &["u".to_string(), "v".to_string(), "w".to_string()]);
            let mut attrs = BTreeMap::new();
            attrs.insert(
                "g".to_string(),
                Attribute {
                    values: attr,
                    value_names: attr_names,
                },
            );
            Dataset::new(
                n,
                d,
                features,
                labels,
                class_names,
                attrs,
                (0..d).map(|j| format!("x{j}")).collect(),
            )
            .unwrap()
        })
    })
}

fn arb_table() -> impl Strategy<Value = (DistanceTable, Partition)> {
    (4usize..40).prop_flat_map(|n| {
        let rows = proptest::collection::vec((0.0f64..5.0, any::<bool>(), any::<bool>()), n);
        let split = 1usize..(n - 1);
        (rows, split).prop_map(|(rows, split)| {
            let records = rows
                .into_iter()
                .enumerate()
                .map(|(i, (d, infinite, correct))| DistanceRecord {
                    example_index: i,
                    true_label: 0,
                    predicted_label: usize::from(!correct),
                    distance: if infinite && i % 7 == 0 { f64::INFINITY } else { d },
                    success: true,
                    iterations: 1,
                })
                .collect();
            (
                DistanceTable::new("prop", BoundKind::Upper, records),
                Partition::new("p", (0..split).collect()).unwrap(),
            )
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn partitions_are_disjoint_and_cover(ds in arb_dataset()) {
        for by in [PartitionBy::Class, PartitionBy::Attribute("g".into())] {
            match partitions_of(&ds, &by) {
                Ok(parts) => {
                    let mut seen = vec![false; ds.len()];
                    for p in &parts {
                        for &i in &p.member_indices {
                            prop_assert!(!seen[i], "overlap at {i}");
                            seen[i] = true;
                        }
                    }
                    prop_assert!(seen.iter().all(|&s| s), "union does not cover");
                }
                // A single distinct value is legitimately degenerate.
                Err(rbaudit_core::Error::DegeneratePartition(_)) => {}
                Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
            }
        }
    }

    #[test]
    fn dataset_csv_round_trip_is_exact(ds in arb_dataset()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csv");
        write_csv(&ds, &path, None).unwrap();
        let schema = CsvSchema::new("label").with_attributes(vec!["g".into()]);
        let back = rbaudit_core::data::load_csv(&path, &schema).unwrap();
        prop_assert_eq!(ds, back);
    }

    #[test]
    fn curves_are_monotone_within_unit_interval((table, part) in arb_table()) {
        let c = curve(&table, &part).unwrap();
        prop_assert!(c.grid[0] == 0.0);
        for w in c.values.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-15);
        }
        prop_assert!(c.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn rb_is_bounded_and_symmetric((table, part) in arb_table()) {
        let comp_idx: Vec<usize> = {
            let mask = part.mask(table.len());
            (0..table.len()).filter(|&i| !mask[i]).collect()
        };
        let comp = Partition::new("q", comp_idx).unwrap();
        let ok = |p: &Partition| {
            p.member_indices.iter().any(|&i| table.rows()[i].correct())
        };
        prop_assume!(ok(&part) && ok(&comp));
        for tau in [0.0, 0.7, 2.3] {
            let a = rb(&table, &part, tau).unwrap();
            let b = rb(&table, &comp, tau).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn curve_auc_matches_clamped_distance_sum((table, part) in arb_table()) {
        // Independent closed form: the integral over [0, T] of the survival
        // curve is the mean clamped distance of correct members.
        let c = curve(&table, &part).unwrap();
        for upper in [0.4, 1.9, 6.0] {
            let expect: f64 = part
                .member_indices
                .iter()
                .map(|&i| {
                    let r = &table.rows()[i];
                    if r.correct() { r.distance.min(upper) } else { 0.0 }
                })
                .sum::<f64>()
                / part.len() as f64;
            prop_assert!((c.auc(upper) - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn sigma_is_invariant_under_example_permutation((table, part) in arb_table()) {
        let n = table.len();
        let mask = part.mask(n);
        prop_assume!(part.member_indices.iter().any(|&i| table.rows()[i].correct()));
        prop_assume!((0..n).any(|i| !mask[i] && table.rows()[i].correct()));
        let base = sigma(&table, &part, &[0.5]).unwrap();

        // Reverse the example order, remapping partition indices.
        let rows: Vec<DistanceRecord> = (0..n)
            .map(|i| {
                let mut r = table.rows()[n - 1 - i].clone();
                r.example_index = i;
                r
            })
            .collect();
        let permuted = DistanceTable::new("prop", BoundKind::Upper, rows);
        let remapped = Partition::new(
            "p",
            part.member_indices.iter().map(|&i| n - 1 - i).collect(),
        )
        .unwrap();
        let moved = sigma(&permuted, &remapped, &[0.5]).unwrap();
        prop_assert!((base.sigma - moved.sigma).abs() < 1e-12);
        prop_assert!((base.auc_in - moved.auc_in).abs() < 1e-12);
        prop_assert!((base.rb_at[0].1 - moved.rb_at[0].1).abs() < 1e-12);
    }

    #[test]
    fn clopper_pearson_is_monotone_in_k((n, alpha) in (1usize..200, 1e-4f64..0.5)) {
        let mut prev = -1.0;
        for k in 0..=n {
            let v = clopper_pearson_lower(k, n, alpha).unwrap();
            prop_assert!(v >= prev - 1e-12, "k={k}: {v} < {prev}");
            prop_assert!((0.0..1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn partition_spec_grammar_round_trips(name in "[a-z]{1,8}", value in "[a-z0-9]{1,8}") {
        let class = parse_partition_spec("class").unwrap();
        prop_assert_eq!(class, rbaudit_core::data::PartitionSpec::Class);
        let by_attr = parse_partition_spec(&format!("attribute:{name}")).unwrap();
        prop_assert_eq!(
            by_attr,
            rbaudit_core::data::PartitionSpec::Attribute(name.clone())
        );
        let single = parse_partition_spec(&format!("attribute:{name}={value}")).unwrap();
        prop_assert_eq!(
            single,
            rbaudit_core::data::PartitionSpec::AttributeValue(name.clone(), value.clone())
        );
        // The abbreviated prefix from the CLI surface parses identically.
        let abbrev = parse_partition_spec(&format!("attr:{name}={value}")).unwrap();
        prop_assert_eq!(
            abbrev,
            rbaudit_core::data::PartitionSpec::AttributeValue(name, value)
        );
    }
}
