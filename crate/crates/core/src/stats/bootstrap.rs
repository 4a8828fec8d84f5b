//! Seeded nonparametric bootstrap over rows or whole blocks of rows.

use std::collections::HashMap;
use std::fmt::Display;
use std::hash::Hash;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::stats::StatsError;

/// Share of replicates allowed to fail before the run is aborted.
pub const MAX_FAILURE_SHARE: f64 = 0.10;

#[derive(Debug, Clone, Copy)]
pub enum Resampling<'a> {
    /// Draw `n` rows with replacement.
    IidRows { n: usize },
    /// Draw whole blocks (e.g. persons) with replacement.
    Blocks(&'a [Vec<usize>]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapSpec {
    pub replicates: usize,
    pub seed: u64,
    /// Confidence level of the percentile interval.
    pub level: f64,
}

impl BootstrapSpec {
    pub fn new(replicates: usize, seed: u64) -> Self {
        Self { replicates, seed, level: 0.95 }
    }
}

/// One resampled data set, expressed as row indices into the original.
#[derive(Debug, Clone)]
pub struct Resample {
    /// Row indices, possibly repeated.
    pub rows: Vec<usize>,
    /// For every entry of `rows`, the draw it came from. Rows of the same
    /// block drawn twice carry different draw numbers, so callers can treat
    /// the copies as distinct units.
    pub draws: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct BootstrapResult {
    /// Successful replicate values, in replicate order.
    pub replicates: Vec<Vec<f64>>,
    /// Per component sample standard deviation across replicates.
    pub se: Vec<f64>,
    /// Per component percentile interval.
    pub ci: Vec<(f64, f64)>,
    pub failed: usize,
    pub level: f64,
}

/// Groups row indices by id, blocks ordered by first appearance.
pub fn blocks_by_id<K: Hash + Eq + Clone>(ids: &[K]) -> Vec<Vec<usize>> {
    let mut index: HashMap<K, usize> = HashMap::new();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for (row, id) in ids.iter().enumerate() {
        let b = *index.entry(id.clone()).or_insert_with(|| {
            blocks.push(Vec::new());
            blocks.len() - 1
        });
        blocks[b].push(row);
    }
    blocks
}

/// Deterministic generator for replicate `index` of a run seeded with `seed`.
pub fn replicate_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn draw_resample(resampling: Resampling<'_>, rng: &mut impl Rng) -> Resample {
    match resampling {
        Resampling::IidRows { n } => {
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let draws = (0..n).collect();
            Resample { rows, draws }
        }
        Resampling::Blocks(blocks) => {
            let m = blocks.len();
            let mut rows = Vec::new();
            let mut draws = Vec::new();
            for d in 0..m {
                let b = &blocks[rng.random_range(0..m)];
                rows.extend_from_slice(b);
                draws.extend(std::iter::repeat_n(d, b.len()));
            }
            Resample { rows, draws }
        }
    }
}

/// Runs `statistic` on `spec.replicates` resamples.
///
/// Replicate `r` draws from a generator determined by `(seed, r)` alone, so
/// results do not depend on scheduling. A replicate whose statistic errors
/// is skipped and counted; more than 10% failures abort the run.
/// Non-finite components of a replicate are ignored for that component.
pub fn bootstrap<F, E>(resampling: Resampling<'_>, spec: &BootstrapSpec, statistic: F) -> Result<BootstrapResult, StatsError>
where
    F: Fn(&Resample) -> Result<Vec<f64>, E> + Sync,
    E: Display,
{
    if spec.replicates < 2 {
        return Err(StatsError::TooFewReplicates(spec.replicates));
    }
    let outcomes: Vec<Result<Vec<f64>, String>> = (0..spec.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(spec.seed, r);
            let resample = draw_resample(resampling, &mut rng);
            statistic(&resample).map_err(|e| e.to_string())
        })
        .collect();

    let mut replicates = Vec::with_capacity(spec.replicates);
    let mut failed = 0usize;
    for (r, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(v) => replicates.push(v),
            Err(msg) => {
                log::debug!("bootstrap replicate {r} failed: {msg}");
                failed += 1;
            }
        }
    }
    if failed as f64 > MAX_FAILURE_SHARE * spec.replicates as f64 || replicates.len() < 2 {
        return Err(StatsError::TooManyFailures { failed, total: spec.replicates });
    }
    let width = replicates[0].len();
    if replicates.iter().any(|r| r.len() != width) {
        return Err(StatsError::DimensionMismatch { expected: width, found: 0 });
    }
    let alpha = 1.0 - spec.level;
    let mut se = Vec::with_capacity(width);
    let mut ci = Vec::with_capacity(width);
    for c in 0..width {
        let mut vals: Vec<f64> = replicates.iter().map(|r| r[c]).filter(|v| v.is_finite()).collect();
        if vals.len() < 2 {
            se.push(f64::NAN);
            ci.push((f64::NAN, f64::NAN));
            continue;
        }
        se.push(sample_sd(&vals));
        vals.sort_by(f64::total_cmp);
        ci.push((quantile_sorted(&vals, alpha / 2.0), quantile_sorted(&vals, 1.0 - alpha / 2.0)));
    }
    Ok(BootstrapResult { replicates, se, ci, failed, level: spec.level })
}

pub fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / (n - 1.0)).sqrt()
}

/// Linear-interpolation quantile (type 7) of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
