use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::Scenario;

/// Ratios reported in the training-ratio study.
pub const STUDY_RATIOS: [f64; 4] = [0.2, 0.4, 0.6, 0.8];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRecord {
    pub ratio: f64,
    pub seed: u64,
    /// Sorted ascending.
    pub train: Vec<usize>,
    /// Sorted ascending.
    pub test: Vec<usize>,
}

/// Stratified train/test assignment.
///
/// The train total is `⌊ratio·n⌋`. Each scenario first receives
/// `⌊ratio·n_s⌋` train samples; any remaining train slots go one each to the
/// scenarios with the largest fractional parts (ties by scenario order).
/// Within a scenario, members are chosen by a seeded shuffle. Everything not
/// drawn for training is test.
pub fn split(scenarios: &[Scenario], ratio: f64, seed: u64) -> Result<SplitRecord> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!(
            "split ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let floor = |x: f64| (x + 1e-9).floor() as usize;
    let groups: Vec<Vec<usize>> = Scenario::ALL
        .iter()
        .map(|s| {
            scenarios
                .iter()
                .enumerate()
                .filter(|(_, t)| *t == s)
                .map(|(i, _)| i)
                .collect()
        })
        .collect();

    let total = floor(ratio * scenarios.len() as f64);
    let mut quota: Vec<usize> = groups
        .iter()
        .map(|g| floor(ratio * g.len() as f64))
        .collect();
    let mut spare = total.saturating_sub(quota.iter().sum());
    let mut order: Vec<usize> = (0..groups.len()).collect();
    let frac = |g: usize| ratio * groups[g].len() as f64 - quota[g] as f64;
    order.sort_by(|&a, &b| frac(b).partial_cmp(&frac(a)).unwrap().then(a.cmp(&b)));
    for g in order {
        if spare == 0 {
            break;
        }
        if quota[g] < groups[g].len() {
            quota[g] += 1;
            spare -= 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(total);
    let mut test = Vec::with_capacity(scenarios.len() - total);
    for (g, members) in groups.iter().enumerate() {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        train.extend_from_slice(&shuffled[..quota[g]]);
        test.extend_from_slice(&shuffled[quota[g]..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitRecord {
        ratio,
        seed,
        train,
        test,
    })
}
