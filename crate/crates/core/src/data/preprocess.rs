//! Standardisation, one-hot encoding and correlated-feature removal.
//!
//! Everything is fitted on the training rows only; the resulting
//! [`Encoding`] is then applied unchanged to every split.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::schema::ColumnKind;
use super::split::SplitSpec;
use super::table::{RawColumn, RawTable};
use crate::stats;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: f64,
    pub std: f64,
}

/// One original feature and the encoded columns `start..start + width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedFeature {
    pub name: String,
    pub kind: FeatureKind,
    pub start: usize,
    pub width: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub modalities: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaler: Option<Scaler>,
}

impl EncodedFeature {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    ZeroVariance,
    SingleModality,
    /// Spearman |rho| or NMI with an earlier kept feature at or above the threshold.
    Correlated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedFeature {
    pub name: String,
    pub reason: DropReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistic: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlated_with: Option<String>,
}

/// Thresholds of the correlation filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub spearman_threshold: f64,
    pub nmi_threshold: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self { spearman_threshold: 0.9, nmi_threshold: 0.9 }
    }
}

/// The fitted encoding shared by all splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoding {
    pub features: Vec<EncodedFeature>,
    pub dropped: Vec<DroppedFeature>,
    pub label: String,
    pub classes: Vec<String>,
}

impl Encoding {
    /// Number of encoded columns.
    pub fn width(&self) -> usize {
        self.features.last().map(|f| f.start + f.width).unwrap_or(0)
    }

    /// Number of original (kept) features.
    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.width());
        for f in &self.features {
            match f.kind {
                FeatureKind::Numeric => names.push(f.name.clone()),
                FeatureKind::Categorical => {
                    names.extend(f.modalities.iter().map(|m| format!("{}={m}", f.name)));
                }
            }
        }
        names
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.name.as_str()).collect()
    }

    /// Observed modality of a categorical feature: the largest entry of its
    /// block, lowest index on ties.
    pub fn hot_index(&self, x: &[f64], feature: usize) -> usize {
        let f = &self.features[feature];
        crate::nn::argmax(&x[f.range()])
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// Encodes row `row` of a table whose schema contains every kept feature.
    fn encode_row(&self, columns: &[&RawColumn], row: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.width()];
        for (f, col) in self.features.iter().zip(columns) {
            match (*col, f.scaler) {
                (RawColumn::Numeric(v), Some(s)) => out[f.start] = (v[row] - s.mean) / s.std,
                (RawColumn::Categorical(v), None) => out[f.start + v[row]] = 1.0,
                _ => unreachable!("kind checked when resolving columns"),
            }
        }
        out
    }
}

/// Encoded split: rows of standardised numerics and one-hot blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessedDataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
    /// Row index in the source table; used as point id.
    pub row_ids: Vec<usize>,
}

impl PreprocessedDataset {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub encoding: Encoding,
    pub train: PreprocessedDataset,
    pub valid: PreprocessedDataset,
    pub test: PreprocessedDataset,
}

/// Correlation statistic of two columns of the same kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Correlation {
    Value(f64),
    /// A constant column; the statistic is undefined.
    Degenerate,
}

pub enum ColumnRef<'a> {
    Numeric(&'a [f64]),
    Categorical(&'a [usize]),
}

/// Spearman's rho for two numeric columns, normalised mutual information
/// for two categorical ones. Mixed pairs are not supported.
pub fn correlation_stats(a: ColumnRef<'_>, b: ColumnRef<'_>) -> Result<Correlation> {
    match (a, b) {
        (ColumnRef::Numeric(a), ColumnRef::Numeric(b)) => {
            let s = stats::spearman(a, b)?;
            Ok(if s.degenerate { Correlation::Degenerate } else { Correlation::Value(s.rho) })
        }
        (ColumnRef::Categorical(a), ColumnRef::Categorical(b)) => {
            if a.len() != b.len() {
                return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
            }
            Ok(stats::normalized_mutual_information(a, b).map_or(Correlation::Degenerate, Correlation::Value))
        }
        _ => Err(Error::InvalidConfig("numeric-categorical correlation is not computed".into())),
    }
}

fn column_ref(col: &RawColumn) -> ColumnRef<'_> {
    match col {
        RawColumn::Numeric(v) => ColumnRef::Numeric(v),
        RawColumn::Categorical(v) => ColumnRef::Categorical(v),
    }
}

/// Fits the encoding on `train` (a table holding only training rows).
pub fn fit_encoding(train: &RawTable, cfg: &PreprocessConfig) -> Result<Encoding> {
    if train.rows < 2 {
        return Err(Error::InsufficientData("need at least two training rows".into()));
    }
    let mut dropped = Vec::new();
    let mut kept: Vec<usize> = Vec::new();

    for (i, spec) in train.schema.columns.iter().enumerate() {
        if spec.kind == ColumnKind::Label {
            continue;
        }
        let col = &train.columns[i];
        let degenerate = match col {
            RawColumn::Numeric(v) => (stats::std_dev(v) == 0.0).then_some(DropReason::ZeroVariance),
            RawColumn::Categorical(v) => v.windows(2).all(|w| w[0] == w[1]).then_some(DropReason::SingleModality),
        };
        if let Some(reason) = degenerate {
            log::warn!("dropping `{}`: {reason:?}", spec.name);
            dropped.push(DroppedFeature { name: spec.name.clone(), reason, statistic: None, correlated_with: None });
            continue;
        }

        let mut hit = None;
        for &k in &kept {
            let other = &train.columns[k];
            let threshold = match (col, other) {
                (RawColumn::Numeric(_), RawColumn::Numeric(_)) => cfg.spearman_threshold,
                (RawColumn::Categorical(_), RawColumn::Categorical(_)) => cfg.nmi_threshold,
                _ => continue,
            };
            if let Correlation::Value(v) = correlation_stats(column_ref(col), column_ref(other))? {
                if v.abs() >= threshold {
                    hit = Some((k, v));
                    break;
                }
            }
        }
        match hit {
            Some((k, v)) => {
                let other = &train.schema.columns[k].name;
                log::warn!("dropping `{}`: correlation {v:.4} with `{other}`", spec.name);
                dropped.push(DroppedFeature {
                    name: spec.name.clone(),
                    reason: DropReason::Correlated,
                    statistic: Some(v),
                    correlated_with: Some(other.clone()),
                });
            }
            None => kept.push(i),
        }
    }

    let mut features = Vec::with_capacity(kept.len());
    let mut start = 0;
    for &i in &kept {
        let spec = &train.schema.columns[i];
        let feature = match &train.columns[i] {
            RawColumn::Numeric(v) => EncodedFeature {
                name: spec.name.clone(),
                kind: FeatureKind::Numeric,
                start,
                width: 1,
                modalities: Vec::new(),
                scaler: Some(Scaler { mean: stats::mean(v), std: stats::std_dev(v) }),
            },
            RawColumn::Categorical(_) => {
                let modalities = spec.modalities.clone().expect("resolved schema");
                EncodedFeature {
                    name: spec.name.clone(),
                    kind: FeatureKind::Categorical,
                    start,
                    width: modalities.len(),
                    modalities,
                    scaler: None,
                }
            }
        };
        start += feature.width;
        features.push(feature);
    }
    if features.is_empty() {
        return Err(Error::InsufficientData("every feature was dropped".into()));
    }
    Ok(Encoding {
        features,
        dropped,
        label: train.schema.label().name.clone(),
        classes: train.classes().to_vec(),
    })
}

/// Applies a fitted encoding to the given rows of `raw`.
pub fn transform(raw: &RawTable, encoding: &Encoding, rows: &[usize]) -> Result<PreprocessedDataset> {
    let columns = encoding
        .features
        .iter()
        .map(|f| {
            let (spec, col) = raw
                .column(&f.name)
                .ok_or_else(|| Error::Schema(format!("table lacks encoded feature `{}`", f.name)))?;
            let ok = match (spec.kind, f.kind) {
                (ColumnKind::Numeric, FeatureKind::Numeric) => true,
                (ColumnKind::Categorical, FeatureKind::Categorical) => {
                    spec.modalities.as_deref() == Some(f.modalities.as_slice())
                }
                _ => false,
            };
            if !ok {
                return Err(Error::Schema(format!("column `{}` does not match the fitted encoding", f.name)));
            }
            Ok(col)
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = raw.labels();
    Ok(PreprocessedDataset {
        x: rows.iter().map(|&r| encoding.encode_row(&columns, r)).collect(),
        y: rows.iter().map(|&r| labels[r]).collect(),
        row_ids: rows.to_vec(),
    })
}

/// Splits `raw`, fits on the training rows and encodes all three splits.
pub fn preprocess(raw: &RawTable, split: &SplitSpec, cfg: &PreprocessConfig) -> Result<Splits> {
    let idx = split.split(raw.rows)?;
    let encoding = fit_encoding(&raw.select_rows(&idx.train), cfg)?;
    Ok(Splits {
        train: transform(raw, &encoding, &idx.train)?,
        valid: transform(raw, &encoding, &idx.valid)?,
        test: transform(raw, &encoding, &idx.test)?,
        encoding,
    })
}

/// Writes `row_id`, the encoded columns and the label index.
pub fn write_dataset_csv(ds: &PreprocessedDataset, encoding: &Encoding, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["row_id".to_string()];
    header.extend(encoding.column_names());
    header.push(encoding.label.clone());
    w.write_record(&header)?;
    for ((x, y), id) in ds.x.iter().zip(&ds.y).zip(&ds.row_ids) {
        let mut rec = Vec::with_capacity(x.len() + 2);
        rec.push(id.to_string());
        rec.extend(x.iter().map(|v| v.to_string()));
        rec.push(y.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_csv(path: impl AsRef<Path>, encoding: &Encoding) -> Result<PreprocessedDataset> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let width = encoding.width();
    let expected = width + 2;
    let header_len = r.headers()?.len();
    if header_len != expected {
        return Err(Error::DimensionMismatch { expected, got: header_len });
    }
    let mut ds = PreprocessedDataset { x: Vec::new(), y: Vec::new(), row_ids: Vec::new() };
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse_err = |col: usize| Error::ParseCell {
            row: row + 1,
            column: format!("#{col}"),
            value: rec.get(col).unwrap_or("").to_string(),
        };
        ds.row_ids.push(rec[0].parse().map_err(|_| parse_err(0))?);
        let x = (1..=width)
            .map(|c| rec[c].parse::<f64>().map_err(|_| parse_err(c)))
            .collect::<Result<Vec<_>>>()?;
        ds.x.push(x);
        ds.y.push(rec[width + 1].parse().map_err(|_| parse_err(width + 1))?);
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::{ColumnSpec, FeatureSchema};
    use crate::seed;
    use rand::Rng;

    fn table(rows: usize, seed: u64) -> RawTable {
        let mut rng = seed::rng(seed);
        let a: Vec<f64> = (0..rows).map(|_| rng.random_range(-5.0..5.0)).collect();
        let b: Vec<f64> = (0..rows).map(|_| rng.random_range(0.0..100.0)).collect();
        let dup = a.clone();
        let c: Vec<usize> = (0..rows).map(|_| rng.random_range(0..3)).collect();
        let c_dup = c.iter().map(|v| (v + 1) % 3).collect();
        let d: Vec<usize> = (0..rows).map(|_| rng.random_range(0..2)).collect();
        let y: Vec<usize> = (0..rows).map(|i| usize::from(a[i] > 0.0)).collect();
        RawTable {
            schema: FeatureSchema::new(vec![
                ColumnSpec::numeric("a"),
                ColumnSpec::numeric("b"),
                ColumnSpec::numeric("a_copy"),
                ColumnSpec::categorical("c", ["p", "q", "r"]),
                ColumnSpec::categorical("c_copy", ["p", "q", "r"]),
                ColumnSpec::categorical("d", ["u", "v"]),
                ColumnSpec::label("y", ["0", "1"]),
            ])
            .unwrap(),
            columns: vec![
                RawColumn::Numeric(a),
                RawColumn::Numeric(b),
                RawColumn::Numeric(dup),
                RawColumn::Categorical(c),
                RawColumn::Categorical(c_dup),
                RawColumn::Categorical(d),
                RawColumn::Categorical(y),
            ],
            rows,
        }
    }

    #[test]
    fn duplicates_are_removed_first_kept() {
        let t = table(300, 1);
        let splits = preprocess(&t, &SplitSpec::counts(200, 50, 50, 0), &PreprocessConfig::default()).unwrap();
        let enc = &splits.encoding;
        assert_eq!(enc.feature_names(), ["a", "b", "c", "d"]);
        let a_copy = &enc.dropped[0];
        assert_eq!((a_copy.name.as_str(), a_copy.reason), ("a_copy", DropReason::Correlated));
        assert_eq!(a_copy.statistic, Some(1.0));
        let c_copy = &enc.dropped[1];
        assert_eq!(c_copy.correlated_with.as_deref(), Some("c"));
        assert!((c_copy.statistic.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(enc.width(), 1 + 1 + 3 + 2);
    }

    #[test]
    fn encoded_ranges_partition_columns() {
        let t = table(120, 2);
        let splits = preprocess(&t, &SplitSpec::counts(80, 20, 20, 1), &PreprocessConfig::default()).unwrap();
        let enc = &splits.encoding;
        let mut next = 0;
        for f in &enc.features {
            assert_eq!(f.start, next);
            next += f.width;
        }
        assert_eq!(next, enc.width());
        for ds in [&splits.train, &splits.valid, &splits.test] {
            for row in &ds.x {
                for f in enc.features.iter().filter(|f| f.kind == FeatureKind::Categorical) {
                    let block = &row[f.range()];
                    assert_eq!(block.iter().filter(|&&v| v == 1.0).count(), 1);
                    assert_eq!(block.iter().sum::<f64>(), 1.0);
                }
            }
        }
    }

    #[test]
    fn standardised_on_train() {
        let t = table(500, 3);
        let splits = preprocess(&t, &SplitSpec::counts(300, 100, 100, 2), &PreprocessConfig::default()).unwrap();
        for f in splits.encoding.features.iter().filter(|f| f.kind == FeatureKind::Numeric) {
            let col: Vec<f64> = splits.train.x.iter().map(|r| r[f.start]).collect();
            assert!(stats::mean(&col).abs() < 1e-6);
            assert!((stats::std_dev(&col) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn one_hot_decodes_to_original_category() {
        let t = table(100, 4);
        let idx: Vec<usize> = (0..100).collect();
        let enc = fit_encoding(&t, &PreprocessConfig::default()).unwrap();
        let ds = transform(&t, &enc, &idx).unwrap();
        let fi = enc.features.iter().position(|f| f.name == "c").unwrap();
        let RawColumn::Categorical(orig) = t.column("c").unwrap().1 else { unreachable!() };
        for (row, &o) in ds.x.iter().zip(orig) {
            assert_eq!(enc.hot_index(row, fi), o);
        }
    }

    #[test]
    fn test_rows_do_not_influence_fit() {
        let t = table(200, 5);
        let idx = SplitSpec::counts(120, 40, 40, 7).split(200).unwrap();
        let enc = fit_encoding(&t.select_rows(&idx.train), &PreprocessConfig::default()).unwrap();
        // scramble the values stored in the test rows
        let mut scrambled = t.clone();
        let mut perm = idx.test.clone();
        perm.reverse();
        for col in &mut scrambled.columns {
            if let RawColumn::Numeric(v) = col {
                let orig = v.clone();
                for (dst, src) in idx.test.iter().zip(&perm) {
                    v[*dst] = orig[*src] * 3.0 + 1.0;
                }
            }
        }
        let enc2 = fit_encoding(&scrambled.select_rows(&idx.train), &PreprocessConfig::default()).unwrap();
        assert_eq!(enc, enc2);
    }

    #[test]
    fn filter_is_idempotent() {
        let t = table(300, 6);
        let enc = fit_encoding(&t, &PreprocessConfig::default()).unwrap();
        let kept = t.select_columns(&enc.feature_names());
        let again = fit_encoding(&kept, &PreprocessConfig::default()).unwrap();
        assert!(again.dropped.is_empty());
        assert_eq!(again.feature_names(), enc.feature_names());
    }

    #[test]
    fn degenerate_columns_dropped() {
        let mut t = table(50, 7);
        t.columns[1] = RawColumn::Numeric(vec![3.0; 50]);
        t.columns[5] = RawColumn::Categorical(vec![1; 50]);
        let enc = fit_encoding(&t, &PreprocessConfig::default()).unwrap();
        let reasons: Vec<_> = enc.dropped.iter().map(|d| (d.name.as_str(), d.reason)).collect();
        assert!(reasons.contains(&("b", DropReason::ZeroVariance)));
        assert!(reasons.contains(&("d", DropReason::SingleModality)));
    }

    #[test]
    fn correlation_stats_cases() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let perm = [1.0, 3.0, 2.0, 4.0, 5.0];
        let val = |c| match c {
            Correlation::Value(v) => v,
            Correlation::Degenerate => panic!("degenerate"),
        };
        assert_eq!(val(correlation_stats(ColumnRef::Numeric(&x), ColumnRef::Numeric(&x)).unwrap()), 1.0);
        assert!((val(correlation_stats(ColumnRef::Numeric(&x), ColumnRef::Numeric(&neg)).unwrap()) + 1.0).abs() < 1e-15);
        assert!((val(correlation_stats(ColumnRef::Numeric(&x), ColumnRef::Numeric(&perm)).unwrap()) - 0.9).abs() < 1e-12);
        let c = [0usize, 0, 0, 0, 0];
        let d = [0usize, 1, 0, 1, 1];
        assert_eq!(
            correlation_stats(ColumnRef::Categorical(&c), ColumnRef::Categorical(&d)).unwrap(),
            Correlation::Degenerate
        );
        assert!(correlation_stats(ColumnRef::Numeric(&x), ColumnRef::Categorical(&d)).is_err());
    }

    #[test]
    fn independent_categoricals_have_small_nmi() {
        let mut rng = seed::rng(8);
        let a: Vec<usize> = (0..10_000).map(|_| rng.random_range(0..4)).collect();
        let b: Vec<usize> = (0..10_000).map(|_| rng.random_range(0..3)).collect();
        let Correlation::Value(v) = correlation_stats(ColumnRef::Categorical(&a), ColumnRef::Categorical(&b)).unwrap()
        else {
            panic!()
        };
        assert!(v < 0.05, "nmi {v}");
    }

    #[test]
    fn dataset_csv_round_trip() {
        let t = table(40, 9);
        let splits = preprocess(&t, &SplitSpec::counts(20, 10, 10, 0), &PreprocessConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("train.csv");
        write_dataset_csv(&splits.train, &splits.encoding, &p).unwrap();
        let back = read_dataset_csv(&p, &splits.encoding).unwrap();
        assert_eq!(back, splits.train);
        let e = dir.path().join("enc.json");
        splits.encoding.save(&e).unwrap();
        assert_eq!(Encoding::load(&e).unwrap(), splits.encoding);
    }
}
