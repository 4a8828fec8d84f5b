use std::collections::BTreeSet;

use crate::design::{Column, Dataset, DesignError};

/// Drops rows with a missing value in any of `columns`; returns the kept
/// table and the number of rows removed.
pub fn listwise_delete<S: AsRef<str>>(ds: &Dataset, columns: &[S]) -> Result<(Dataset, usize), DesignError> {
    let cols: Vec<&Column> = columns.iter().map(|c| ds.column(c.as_ref())).collect::<Result<_, _>>()?;
    let keep: Vec<usize> = (0..ds.nrows()).filter(|&r| cols.iter().all(|c| !c.is_missing(r))).collect();
    let removed = ds.nrows() - keep.len();
    if removed == 0 {
        return Ok((ds.clone(), 0));
    }
    Ok((ds.take_rows(&keep), removed))
}

/// Partitions rows by the value of `by`.
///
/// `levels = None` uses every declared level of a categorical column (empty
/// parts included) or every observed value of an integer/boolean column.
/// Rows with a missing `by` value belong to no part.
pub fn subsample(ds: &Dataset, by: &str, levels: Option<&[String]>) -> Result<Vec<(String, Dataset)>, DesignError> {
    let col = ds.column(by)?;
    let known: Vec<String> = match col {
        Column::Categorical { levels, .. } => levels.clone(),
        Column::Integer(v) => {
            let set: BTreeSet<i64> = v.iter().flatten().copied().collect();
            set.into_iter().map(|i| i.to_string()).collect()
        }
        Column::Boolean(_) => vec!["0".into(), "1".into()],
        Column::Real(_) => return Err(DesignError::NotCategorical(by.to_string())),
    };
    let wanted: Vec<String> = match levels {
        Some(ls) => {
            if let Some(bad) = ls.iter().find(|l| !known.contains(l)) {
                return Err(DesignError::UnknownLevel(bad.clone()));
            }
            ls.to_vec()
        }
        None => known,
    };
    let labels: Vec<Option<String>> = (0..ds.nrows()).map(|r| col.label(r)).collect();
    Ok(wanted
        .into_iter()
        .map(|level| {
            let rows: Vec<usize> =
                labels.iter().enumerate().filter(|(_, l)| l.as_deref() == Some(level.as_str())).map(|(r, _)| r).collect();
            let part = ds.take_rows(&rows);
            (level, part)
        })
        .collect())
}

/// Derives a categorical column by mapping each numeric value to a label.
pub fn bin_column(
    ds: &Dataset,
    source: &str,
    target: &str,
    levels: &[&str],
    label_of: impl Fn(f64) -> &'static str,
) -> Result<Dataset, DesignError> {
    let v = ds.numeric(source)?;
    let labels: Vec<Option<&str>> = v.iter().map(|x| x.map(&label_of)).collect();
    let col = Column::categorical(levels.iter().map(|s| s.to_string()).collect(), &labels)?;
    ds.clone().with_column(target, col)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::census::{age_band, AGE_BANDS, EDUCATION_LEVELS};

    #[test]
    fn listwise_deletion_counts() {
        let mut x: Vec<Option<f64>> = (0..10).map(|i| Some(i as f64)).collect();
        let ds = Dataset::new().with_column("x", Column::Real(x.clone())).unwrap();
        let (same, removed) = listwise_delete(&ds, &["x"]).unwrap();
        assert_eq!((same.nrows(), removed), (10, 0));

        x[2] = None;
        x[5] = None;
        x[9] = None;
        let ds = Dataset::new().with_column("x", Column::Real(x)).unwrap();
        let (kept, removed) = listwise_delete(&ds, &["x"]).unwrap();
        assert_eq!((kept.nrows(), removed), (7, 3));

        let ds = Dataset::new().with_column("x", Column::Real(vec![None; 4])).unwrap();
        let (kept, removed) = listwise_delete(&ds, &["x"]).unwrap();
        assert!(kept.is_empty());
        assert_eq!(removed, 4);
    }

    #[test]
    fn education_partition_sums_to_total() {
        let labels: Vec<Option<&str>> = (0..30).map(|i| Some(EDUCATION_LEVELS[i % 3])).collect();
        let col = Column::categorical(EDUCATION_LEVELS.iter().map(|s| s.to_string()).collect(), &labels).unwrap();
        let ds = Dataset::new().with_column("education", col).unwrap();
        let parts = subsample(&ds, "education", None).unwrap();
        assert_eq!(parts.len(), 3);
        assert_eq!(parts.iter().map(|(_, p)| p.nrows()).sum::<usize>(), 30);
        assert!(matches!(subsample(&ds, "education", Some(&["phd".to_string()])), Err(DesignError::UnknownLevel(_))));
    }

    #[test]
    fn age_bands_and_child_age_bins() {
        let ages: Vec<f64> = (20..56).map(f64::from).collect();
        let ds = Dataset::new().with_column("age", Column::from_reals(ages)).unwrap();
        let ds = bin_column(&ds, "age", "age_group", &AGE_BANDS, age_band).unwrap();
        let parts = subsample(&ds, "age_group", None).unwrap();
        assert_eq!(parts.len(), AGE_BANDS.len());
        assert_eq!(parts[1].1.nrows(), 5);

        let child_age: Vec<i64> = (0..180).map(|i| i % 18).collect();
        let ds = Dataset::new().with_column("child3_age", Column::from_ints(child_age)).unwrap();
        let parts = subsample(&ds, "child3_age", None).unwrap();
        assert_eq!(parts.len(), 18);
        assert!(parts.iter().all(|(_, p)| p.nrows() == 10));
    }
}
