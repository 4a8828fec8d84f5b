use crate::design::{listwise_delete, subsample, Dataset, ModelSpec};
use crate::iv::{tsls_fit_with, IvError, TslsOptions, TwoSlsResult};

/// Groups with fewer complete rows than this are not fitted.
pub const MIN_GROUP_SIZE: usize = 30;

/// Result for one level of the grouping column.
#[derive(Debug, Clone)]
pub struct GroupFit {
    pub level: String,
    pub n_obs: usize,
    pub result: Result<TwoSlsResult, IvError>,
}

/// Fits `spec` by 2SLS separately within each level of `by`.
///
/// A failure in one group (too few rows, no instrument variation) is kept
/// in that group's `result` rather than aborting the others.
pub fn late_by_group(
    ds: &Dataset,
    spec: &ModelSpec,
    by: &str,
    levels: Option<&[String]>,
    opts: &TslsOptions,
) -> Result<Vec<GroupFit>, IvError> {
    spec.validate_iv()?;
    let parts = subsample(ds, by, levels)?;
    Ok(parts
        .into_iter()
        .map(|(level, part)| {
            let n_obs = listwise_delete(&part, &spec.columns()).map(|(d, _)| d.nrows()).unwrap_or(0);
            let result = if n_obs < MIN_GROUP_SIZE {
                Err(IvError::SubsampleTooSmall(level.clone()))
            } else {
                tsls_fit_with(&part, spec, opts)
            };
            GroupFit { level, n_obs, result }
        })
        .collect())
}
