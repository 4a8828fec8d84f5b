use crate::design::census::{SEX_CHILD1, SEX_CHILD2, Z_BOYS, Z_GIRLS, Z_SAMESEX};
use crate::design::{Column, Dataset, DesignError};

/// Adds the sibling-sex instruments:
/// `z_samesex = 1[s1 = s2]`, `z_boys = s1 s2`, `z_girls = (1 - s1)(1 - s2)`.
///
/// Rows with a missing child sex get missing instruments.
pub fn build_instruments(ds: &Dataset) -> Result<Dataset, DesignError> {
    let s1 = ds.binary(SEX_CHILD1)?;
    let s2 = ds.binary(SEX_CHILD2)?;
    let n = ds.nrows();
    let mut same = Vec::with_capacity(n);
    let mut boys = Vec::with_capacity(n);
    let mut girls = Vec::with_capacity(n);
    for (a, b) in s1.into_iter().zip(s2) {
        match (a, b) {
            (Some(a), Some(b)) => {
                let (a, b) = (a as u8 as f64, b as u8 as f64);
                boys.push(Some(a * b));
                girls.push(Some((1.0 - a) * (1.0 - b)));
                same.push(Some(if a == b { 1.0 } else { 0.0 }));
            }
            _ => {
                same.push(None);
                boys.push(None);
                girls.push(None);
            }
        }
    }
    ds.clone()
        .with_column(Z_SAMESEX, Column::Real(same))?
        .with_column(Z_BOYS, Column::Real(boys))?
        .with_column(Z_GIRLS, Column::Real(girls))
}
