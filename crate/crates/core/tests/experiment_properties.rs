mod common;

use common::{gaussian, rng};
use optrec_core::dataset::{format_f64, write_table};
use optrec_core::experiments::{wce_sweep, Dims};
use optrec_core::{noniid_split, Dataset, ExperimentConfig};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn split_partitions_rows(seed in any::<u64>(), rows in 2usize..60, frac in 0.05f64..0.95, feature in 1usize..4) {
        let mut r = rng(seed);
        // rounding creates ties; the last column tags the original row
        let mut x = gaussian(&mut r, rows, 3).map(|v| (v * 2.0).round());
        x = x.insert_column(3, 0.0);
        for i in 0..rows {
            x[(i, 3)] = i as f64;
        }
        let ds = Dataset::from_arrays(x, nalgebra::DVector::zeros(rows)).unwrap();
        match noniid_split(&ds, feature, frac) {
            Ok(s) => {
                let mut tags: Vec<usize> = s.train.features.column(3).iter()
                    .chain(s.test.features.column(3).iter()).map(|v| *v as usize).collect();
                let order = tags.clone();
                tags.sort_unstable();
                prop_assert_eq!(tags, (0..rows).collect::<Vec<_>>());
                // descending with ties in original order
                for w in order.windows(2) {
                    let (a, b) = (ds.features[(w[0], feature - 1)], ds.features[(w[1], feature - 1)]);
                    prop_assert!(a > b || (a == b && w[0] < w[1]));
                }
            }
            Err(e) => prop_assert!(matches!(e, optrec_core::Error::DegenerateSplit(_))),
        }
    }

    #[test]
    fn csv_values_round_trip(vals in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..20)) {
        let mut buf = Vec::new();
        write_table(&mut buf, &["v"], &vals.iter().map(|v| vec![*v]).collect::<Vec<_>>()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for (line, v) in text.lines().skip(1).zip(&vals) {
            prop_assert_eq!(line.parse::<f64>().unwrap().to_bits(), v.to_bits());
            prop_assert_eq!(line, format_f64(*v));
        }
    }

    #[test]
    fn sweep_is_deterministic_and_monotone(seed in any::<u64>()) {
        let cfg = ExperimentConfig {
            dims: Dims { n: 3, big_n: 15, m: 6 },
            epsilon_grid: vec![0.1, 0.3, 0.6, 1.2, 2.4],
            seed,
            ..Default::default()
        };
        let a = wce_sweep(&cfg).unwrap();
        prop_assert_eq!(&a, &wce_sweep(&cfg).unwrap());
        for w in a.rows.windows(2) {
            prop_assert!(w[1].wce_or >= w[0].wce_or * (1.0 - 1e-12));
        }
        for r in &a.rows {
            prop_assert!(r.wce_or <= r.wce_erm1 * (1.0 + 1e-9) && r.wce_or <= r.wce_erm2 * (1.0 + 1e-9));
        }
    }
}
