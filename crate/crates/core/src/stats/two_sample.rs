use crate::stats::StatsError;
use crate::Scalar;

/// Group means, standard deviations and the Welch t statistic of their
/// difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSampleDiff<T> {
    pub mean1: T,
    pub mean0: T,
    pub sd1: T,
    pub sd0: T,
    pub n1: usize,
    pub n0: usize,
    /// `mean1 - mean0`.
    pub diff: T,
    /// Welch t. When both groups have zero variance this is `0` for equal
    /// means and `+-inf` otherwise, and `zero_variance` is set.
    pub t_stat: T,
    pub zero_variance: bool,
}

fn moments<T: Scalar>(values: impl Iterator<Item = T>) -> (usize, T, T) {
    let v: Vec<T> = values.collect();
    let n = v.len();
    let mean = v.iter().copied().sum::<T>() / T::from_usize_lossy(n);
    let var = if n > 1 {
        v.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / T::from_usize_lossy(n - 1)
    } else {
        T::zero()
    };
    (n, mean, var)
}

pub fn two_sample_diff<T: Scalar>(values: &[T], group: &[bool]) -> Result<TwoSampleDiff<T>, StatsError> {
    if values.len() != group.len() {
        return Err(StatsError::DimensionMismatch { expected: values.len(), found: group.len() });
    }
    let (n1, mean1, var1) = moments(values.iter().zip(group).filter(|(_, &g)| g).map(|(&v, _)| v));
    let (n0, mean0, var0) = moments(values.iter().zip(group).filter(|(_, &g)| !g).map(|(&v, _)| v));
    if n1 == 0 {
        return Err(StatsError::EmptyGroup(1));
    }
    if n0 == 0 {
        return Err(StatsError::EmptyGroup(0));
    }
    let diff = mean1 - mean0;
    let se2 = var1 / T::from_usize_lossy(n1) + var0 / T::from_usize_lossy(n0);
    let zero_variance = se2 == T::zero();
    let t_stat = if !zero_variance {
        diff / se2.sqrt()
    } else if diff == T::zero() {
        T::zero()
    } else {
        diff.signum() * T::infinity()
    };
    Ok(TwoSampleDiff { mean1, mean0, sd1: var1.sqrt(), sd0: var0.sqrt(), n1, n0, diff, t_stat, zero_variance })
}
