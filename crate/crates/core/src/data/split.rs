use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitSizes {
    Counts { train: usize, valid: usize, test: usize },
    /// Valid and test sizes are rounded; train takes the remainder.
    Fractions { train: f64, valid: f64, test: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub sizes: SplitSizes,
    pub seed: u64,
}

/// Row indices of the three splits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitSpec {
    pub fn counts(train: usize, valid: usize, test: usize, seed: u64) -> Self {
        Self { sizes: SplitSizes::Counts { train, valid, test }, seed }
    }

    pub fn resolve(&self, rows: usize) -> Result<(usize, usize, usize)> {
        match self.sizes {
            SplitSizes::Counts { train, valid, test } => {
                if train + valid + test != rows {
                    return Err(Error::InvalidConfig(format!(
                        "split counts {train}+{valid}+{test} do not partition {rows} rows"
                    )));
                }
                Ok((train, valid, test))
            }
            SplitSizes::Fractions { train, valid, test } => {
                let all = [train, valid, test];
                if all.iter().any(|f| !(0.0..=1.0).contains(f)) || ((train + valid + test) - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidConfig("split fractions must be in [0,1] and sum to 1".into()));
                }
                let v = (valid * rows as f64).round() as usize;
                let t = (test * rows as f64).round() as usize;
                if v + t > rows {
                    return Err(Error::InvalidConfig("split fractions exceed the row count".into()));
                }
                Ok((rows - v - t, v, t))
            }
        }
    }

    /// Seeded shuffle, then contiguous train / valid / test blocks.
    pub fn split(&self, rows: usize) -> Result<SplitIndices> {
        let (n_train, n_valid, _) = self.resolve(rows)?;
        let mut order: Vec<usize> = (0..rows).collect();
        order.shuffle(&mut seed::rng(self.seed));
        let test = order.split_off(n_train + n_valid);
        let valid = order.split_off(n_train);
        Ok(SplitIndices { train: order, valid, test })
    }
}
