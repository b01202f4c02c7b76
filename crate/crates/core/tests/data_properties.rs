use proptest::prelude::*;

use robustcheck_core::data::{
    fit_encoding, preprocess, synthetic, FeatureKind, PreprocessConfig, RawColumn, SplitSizes, SplitSpec,
};

fn spec(seed: u64) -> SplitSpec {
    SplitSpec { sizes: SplitSizes::Fractions { train: 0.6, valid: 0.2, test: 0.2 }, seed }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn splits_partition_the_rows(rows in 10usize..400, seed in any::<u64>()) {
        let idx = spec(seed).split(rows).unwrap();
        let mut all: Vec<usize> = idx.train.iter().chain(&idx.valid).chain(&idx.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..rows).collect::<Vec<_>>());
    }

    #[test]
    fn one_hot_blocks_decode_to_the_raw_category(name in prop::sample::select(synthetic::NAMES.to_vec()), seed in any::<u64>()) {
        let raw = synthetic::by_name(name, 200, seed).unwrap();
        let splits = preprocess(&raw, &spec(seed), &PreprocessConfig::default()).unwrap();
        let enc = &splits.encoding;
        for ds in [&splits.train, &splits.valid, &splits.test] {
            for (x, &row) in ds.x.iter().zip(&ds.row_ids) {
                for (fi, f) in enc.features.iter().enumerate().filter(|(_, f)| f.kind == FeatureKind::Categorical) {
                    let Some((_, RawColumn::Categorical(codes))) = raw.column(&f.name) else {
                        panic!("{} is not categorical in the raw table", f.name);
                    };
                    prop_assert_eq!(x[f.range()].iter().filter(|v| **v == 1.0).count(), 1);
                    prop_assert_eq!(enc.hot_index(x, fi), codes[row]);
                }
            }
        }
    }

    #[test]
    fn test_rows_never_reach_the_fit(name in prop::sample::select(synthetic::NAMES.to_vec()), seed in any::<u64>()) {
        let raw = synthetic::by_name(name, 200, seed).unwrap();
        let idx = spec(seed).split(raw.rows).unwrap();
        let mut shuffled = raw.clone();
        // rotate the test rows' values within every column
        for col in &mut shuffled.columns {
            match col {
                RawColumn::Numeric(v) => {
                    let vals: Vec<f64> = idx.test.iter().map(|&r| v[r] * 2.0 + 5.0).collect();
                    for (k, &r) in idx.test.iter().enumerate() {
                        v[r] = vals[(k + 1) % vals.len()];
                    }
                }
                RawColumn::Categorical(v) => {
                    let vals: Vec<usize> = idx.test.iter().map(|&r| v[r]).collect();
                    for (k, &r) in idx.test.iter().enumerate() {
                        v[r] = vals[(k + 1) % vals.len()];
                    }
                }
            }
        }
        let a = preprocess(&raw, &spec(seed), &PreprocessConfig::default()).unwrap();
        let b = preprocess(&shuffled, &spec(seed), &PreprocessConfig::default()).unwrap();
        prop_assert_eq!(a.encoding, b.encoding);
        prop_assert_eq!(a.train, b.train);
    }

    #[test]
    fn correlation_filter_is_idempotent(name in prop::sample::select(synthetic::NAMES.to_vec()), seed in any::<u64>()) {
        let raw = synthetic::by_name(name, 300, seed).unwrap();
        let enc = fit_encoding(&raw, &PreprocessConfig::default()).unwrap();
        let kept = raw.select_columns(&enc.feature_names());
        let again = fit_encoding(&kept, &PreprocessConfig::default()).unwrap();
        prop_assert!(again.dropped.is_empty(), "{:?}", again.dropped);
        prop_assert_eq!(again.feature_names(), enc.feature_names());
    }
}
