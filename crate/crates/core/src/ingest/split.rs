use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::{stream, STREAM_SPLIT};
use crate::{Error, Result};

/// Train/validation hold only normal items; test holds the normal remainder
/// followed by every abnormal item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

fn fraction_count(total: usize, frac: f64) -> usize {
    // Guard against 0.4 * 100 landing a hair under 40.
    ((total as f64) * frac + 1e-9).floor() as usize
}

pub fn split_dataset<T>(
    normal: Vec<T>,
    abnormal: Vec<T>,
    train_frac: f64,
    val_frac: f64,
    seed: u64,
) -> Result<DatasetSplit<T>> {
    if normal.is_empty() {
        return Err(Error::Data("split_dataset: no normal samples".into()));
    }
    let fracs_ok = (0.0..=1.0).contains(&train_frac)
        && (0.0..=1.0).contains(&val_frac)
        && train_frac + val_frac <= 1.0 + 1e-12;
    if !fracs_ok {
        return Err(Error::Config(format!(
            "split fractions must be non-negative with train + val <= 1 (got {train_frac} + {val_frac})"
        )));
    }
    let total = normal.len();
    let n_train = fraction_count(total, train_frac);
    let n_val = fraction_count(total, val_frac).min(total - n_train);

    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut stream(seed, STREAM_SPLIT));

    let mut slots: Vec<Option<T>> = normal.into_iter().map(Some).collect();
    let mut take = |idx: &[usize]| -> Vec<T> { idx.iter().map(|&i| slots[i].take().unwrap()).collect() };
    let train = take(&order[..n_train]);
    let val = take(&order[n_train..n_train + n_val]);
    let mut test = take(&order[n_train + n_val..]);
    test.extend(abnormal);
    Ok(DatasetSplit { train, val, test })
}
