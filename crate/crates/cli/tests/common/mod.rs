#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Output;

pub const CENSUS_SCHEMA: &str = r#"
[schema]
employed = "real"
more_than_2 = "boolean"
sex_child1 = "boolean"
sex_child2 = "boolean"
multibirth = "boolean"
married = "boolean"
rural = "boolean"
mother_age_group = ["<25", "25-29", "30-34", "35-39", "40-44", "45+"]
region = ["central", "far_east", "northwest", "siberia", "south", "ural", "volga"]
education = ["secondary_or_lower", "secondary_professional", "tertiary"]
"#;

pub const PANEL_SCHEMA: &str = r#"
[schema]
person_id = "integer"
age = "integer"
parity = "integer"
graduated = "boolean"
partnered = "boolean"
urban = "boolean"
"#;

pub fn census_config(n: usize, extra: &str) -> String {
    format!(
        r#"
[simulate]
kind = "census"
n = {n}
seed = 21

[input]
path = "out/census.csv"
{CENSUS_SCHEMA}
[model]
outcome = "employed"
treatment = "more_than_2"
instruments = ["samesex", "boys_girls", "multibirth"]
controls = ["married", "rural", "mother_age_group", "education", "child2_age"]
fixed_effects = ["region"]
{extra}
"#
    )
}

pub fn panel_config(n: usize, simulate_extra: &str, estimator_extra: &str) -> String {
    format!(
        r#"
[simulate]
kind = "panel"
n = {n}
seed = 8
{simulate_extra}

[input]
path = "out/panel.csv"
{PANEL_SCHEMA}
[model]
outcome = "employment"
person_id = "person_id"
time = "age"
parity = "parity"
controls = ["graduated", "partnered", "urban"]

[estimator]
kind = "did"
{estimator_extra}
"#
    )
}

pub fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

pub fn ivpanel(args: &[&str], config: &Path) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_ivpanel"))
        .args(args)
        .arg("--config")
        .arg(config)
        .output()
        .expect("run ivpanel")
}

pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

pub fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}
