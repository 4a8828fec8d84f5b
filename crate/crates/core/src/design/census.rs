//! Column conventions for census-style mother records.

pub const EMPLOYED: &str = "employed";
pub const SECOND_JOB: &str = "second_job";
/// Treatment: more than two children.
pub const MORE_THAN_2: &str = "more_than_2";
/// Sex of the first child, 1 = boy.
pub const SEX_CHILD1: &str = "sex_child1";
/// Sex of the second child, 1 = boy.
pub const SEX_CHILD2: &str = "sex_child2";
pub const MULTIBIRTH: &str = "multibirth";
pub const MOTHER_AGE_GROUP: &str = "mother_age_group";
pub const CHILD1_AGE: &str = "child1_age";
pub const CHILD2_AGE: &str = "child2_age";
pub const MARRIED: &str = "married";
pub const RURAL: &str = "rural";
pub const REGION: &str = "region";
pub const EDUCATION: &str = "education";

pub const Z_SAMESEX: &str = "z_samesex";
pub const Z_BOYS: &str = "z_boys";
pub const Z_GIRLS: &str = "z_girls";

/// Five-year mother age bands, in order.
pub const AGE_BANDS: [&str; 6] = ["<25", "25-29", "30-34", "35-39", "40-44", "45+"];

pub const EDUCATION_LEVELS: [&str; 3] = ["secondary_or_lower", "secondary_professional", "tertiary"];

/// Band label for an age in years.
pub fn age_band(age: f64) -> &'static str {
    match age {
        a if a < 25.0 => AGE_BANDS[0],
        a if a < 30.0 => AGE_BANDS[1],
        a if a < 35.0 => AGE_BANDS[2],
        a if a < 40.0 => AGE_BANDS[3],
        a if a < 45.0 => AGE_BANDS[4],
        _ => AGE_BANDS[5],
    }
}

pub const REGIONS: [&str; 7] = ["central", "far_east", "northwest", "siberia", "south", "ural", "volga"];
