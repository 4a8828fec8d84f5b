/// Upper bound on reported weekly hours.
pub const MAX_WEEKLY_HOURS: f64 = 112.0;

/// Natural log of income; zero or negative income becomes missing.
pub fn log_income(income: &[Option<f64>]) -> Vec<Option<f64>> {
    income.iter().map(|v| v.filter(|x| *x > 0.0).map(f64::ln)).collect()
}

/// Caps hours at [`MAX_WEEKLY_HOURS`] and sets them to zero for the
/// non-employed.
pub fn cap_hours(hours: &[Option<f64>], employed: &[Option<bool>]) -> Vec<Option<f64>> {
    hours
        .iter()
        .zip(employed)
        .map(|(h, e)| match e {
            Some(false) => Some(0.0),
            _ => h.map(|x| x.clamp(0.0, MAX_WEEKLY_HOURS)),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn income_zero_is_missing() {
        let v = log_income(&[Some(0.0), Some(1.0), None, Some(std::f64::consts::E)]);
        assert_eq!(v, vec![None, Some(0.0), None, Some(1.0)]);
    }

    #[test]
    fn hours_are_capped_and_zeroed() {
        let v = cap_hours(&[Some(150.0), Some(40.0), Some(30.0)], &[Some(true), Some(false), None]);
        assert_eq!(v, vec![Some(112.0), Some(0.0), Some(30.0)]);
    }
}
