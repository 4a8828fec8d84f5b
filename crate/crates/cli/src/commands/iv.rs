use ivpanel_core::design::census::{SEX_CHILD1, SEX_CHILD2, Z_BOYS, Z_GIRLS, Z_SAMESEX};
use ivpanel_core::design::{build_instruments, listwise_delete, Column, Dataset, EncodeOptions, InstrumentSet, ModelSpec};
use ivpanel_core::iv::{
    late_by_group, ols_model, tsls_fit_with, wald_estimate, ArConfidenceSet, ArGrid, Sargan, TslsOptions, TwoSlsResult,
};
use ivpanel_core::stats::two_sample_diff;

use crate::commands::{check_columns, load_input};
use crate::config::{EstimatorKind, EstimatorSection};
use crate::error::CliError;
use crate::output::{sig6, Outputs, Table};
use crate::Context;

const ESTIMATES: [&str; 13] = [
    "model_id",
    "estimator",
    "instrument_set",
    "tau_hat",
    "se_hc1",
    "weak_F",
    "ar_lo",
    "ar_hi",
    "wu_hausman",
    "wu_p",
    "sargan",
    "sargan_p",
    "n_obs",
];
const WALD: [&str; 8] = ["iv", "p_d", "p_z", "first_stage", "compliers_d1", "compliers_d0", "tau_wald", "se_wald"];
const BALANCE: [&str; 10] =
    ["instrument", "covariate", "mean_z1", "sd_z1", "mean_z0", "sd_z0", "diff", "t_stat", "n_z1", "n_z0"];

/// One configured instrument entry.
enum Instrument {
    Set(InstrumentSet),
    Column(String),
}

impl Instrument {
    fn parse(s: &str) -> Self {
        InstrumentSet::parse(s).map_or_else(|| Instrument::Column(s.to_string()), Instrument::Set)
    }

    fn name(&self) -> &str {
        match self {
            Instrument::Set(s) => s.name(),
            Instrument::Column(c) => c,
        }
    }

    fn columns(&self) -> Vec<String> {
        match self {
            Instrument::Set(s) => s.instruments().into_iter().map(String::from).collect(),
            Instrument::Column(c) => vec![c.clone()],
        }
    }

    fn spec(&self, base: &ModelSpec) -> ModelSpec {
        match self {
            Instrument::Set(s) => s.apply(base),
            Instrument::Column(c) => base.clone().instruments([c.clone()]),
        }
    }
}

fn wald_label(column: &str) -> &str {
    match column {
        Z_SAMESEX => "samesex",
        Z_BOYS => "boys",
        Z_GIRLS => "girls",
        other => other,
    }
}

fn tsls_options(est: &EstimatorSection) -> TslsOptions {
    let mut encode = EncodeOptions::default();
    if let Some(m) = est.max_fe_groups {
        encode.max_fe_groups = m;
    }
    let ar = est.ar.then(|| {
        let mut g = ArGrid::default();
        if let Some(h) = est.ar_half_width {
            g.half_width_se = h;
        }
        if let Some(s) = est.ar_step_divisor {
            g.step_divisor = s;
        }
        g
    });
    TslsOptions { encode, ar, level: est.level }
}

fn tsls_row(model_id: String, set: &str, r: &TwoSlsResult) -> Vec<String> {
    let (ar_lo, ar_hi) = match r.ar_ci {
        Some(ArConfidenceSet::Interval { lo, hi }) => (sig6(lo), sig6(hi)),
        Some(ArConfidenceSet::Unbounded) => ("-Inf".into(), "Inf".into()),
        Some(ArConfidenceSet::Empty) | None => ("NA".into(), "NA".into()),
    };
    let (wu, wu_p) = r.wu_hausman.map_or(("NA".into(), "NA".into()), |t| (sig6(t.statistic), sig6(t.p_value)));
    let (sargan, sargan_p) = match &r.sargan {
        Sargan::Statistic(t) => (sig6(t.statistic), sig6(t.p_value)),
        Sargan::JustIdentified => ("NA".into(), "NA".into()),
    };
    vec![
        model_id,
        "tsls".into(),
        set.into(),
        sig6(r.tau_hat),
        sig6(r.se_tau()),
        sig6(r.weak_f.statistic),
        ar_lo,
        ar_hi,
        wu,
        wu_p,
        sargan,
        sargan_p,
        r.n_obs.to_string(),
    ]
}

fn na_row(model_id: String, set: &str, n_obs: usize) -> Vec<String> {
    let mut row = vec![model_id, "tsls".into(), set.into()];
    row.extend(std::iter::repeat_n("NA".to_string(), 9));
    row.push(n_obs.to_string());
    row
}

/// Covariates as 0/1 or numeric series; categorical columns become one
/// indicator per level.
fn balance_covariates(ds: &Dataset, columns: &[String]) -> Result<Vec<(String, Vec<Option<f64>>)>, CliError> {
    let mut out = Vec::new();
    for c in columns {
        match ds.column(c)? {
            Column::Categorical { levels, codes } => {
                for (k, level) in levels.iter().enumerate() {
                    out.push((format!("{c}={level}"), codes.iter().map(|v| v.map(|x| (x as usize == k) as u8 as f64)).collect()));
                }
            }
            col => out.push((c.clone(), col.numeric().expect("non-categorical column is numeric"))),
        }
    }
    Ok(out)
}

fn balance_table(ds: &Dataset, instruments: &[String], covariates: &[String]) -> Result<Table, CliError> {
    let mut t = Table::new(&BALANCE);
    for z in instruments {
        let zv = ds.binary(z)?;
        let sibling = [Z_SAMESEX, Z_BOYS, Z_GIRLS].contains(&z.as_str());
        let covs: Vec<String> = covariates
            .iter()
            .filter(|c| !(sibling && (c.as_str() == SEX_CHILD1 || c.as_str() == SEX_CHILD2)))
            .cloned()
            .collect();
        for (name, x) in balance_covariates(ds, &covs)? {
            let (vals, group): (Vec<f64>, Vec<bool>) =
                x.iter().zip(&zv).filter_map(|(x, z)| Some((((*x)?), (*z)?))).unzip();
            let Ok(d) = two_sample_diff(&vals, &group) else {
                log::warn!("balance of `{name}` by `{z}`: an instrument arm is empty");
                continue;
            };
            t.push(vec![
                wald_label(z).to_string(),
                name,
                sig6(d.mean1),
                sig6(d.sd1),
                sig6(d.mean0),
                sig6(d.sd0),
                sig6(d.diff),
                sig6(d.t_stat),
                d.n1.to_string(),
                d.n0.to_string(),
            ]);
        }
    }
    Ok(t)
}

fn wald_table(
    ds: &Dataset,
    outcome: &str,
    treatment: &str,
    instruments: &[String],
    replicates: usize,
    seed: u64,
) -> Result<Table, CliError> {
    let mut t = Table::new(&WALD);
    for z in instruments {
        let (clean, _) = listwise_delete(ds, &[outcome, treatment, z.as_str()])?;
        let y = clean.numeric_complete(outcome)?;
        let d = clean.binary_complete(treatment)?;
        let zv = clean.binary_complete(z)?;
        let w = wald_estimate(&y, &d, &zv, replicates, seed)?;
        for msg in &w.warnings {
            log::warn!("wald `{z}`: {msg}");
        }
        t.push(vec![
            wald_label(z).to_string(),
            sig6(w.p_d),
            sig6(w.p_z),
            sig6(w.first_stage),
            sig6(w.compliers_given_treated),
            sig6(w.compliers_given_untreated),
            sig6(w.tau_hat),
            if replicates > 0 { sig6(w.se_bootstrap) } else { "NA".into() },
        ]);
    }
    Ok(t)
}

pub fn run(ctx: &Context) -> Result<(), CliError> {
    let model = ctx.config.model()?;
    let est = ctx.config.estimator()?;
    if est.kind == EstimatorKind::Did {
        return Err(CliError::Config("estimator `did` belongs to the did subcommand".into()));
    }
    est.check_level()?;
    let treatment = model.treatment.clone().ok_or_else(|| CliError::Config("[model] treatment is required".into()))?;
    if model.instruments.is_empty() {
        return Err(CliError::Config("[model] instruments is empty; an IV model needs at least one".into()));
    }
    let seed = if est.replicates > 0 { Some(ctx.require_seed(est.seed, "the Wald bootstrap")?) } else { ctx.seed(est.seed) };

    let (mut ds, input_hash) = load_input(ctx)?;
    if ds.has_column(SEX_CHILD1) && ds.has_column(SEX_CHILD2) && !ds.has_column(Z_SAMESEX) {
        ds = build_instruments(&ds)?;
    }
    let base = ModelSpec::new(model.outcome.clone(), treatment.clone())
        .exogenous(model.controls.clone())
        .fixed_effects(model.fixed_effects.clone())
        .intercept(model.intercept);
    let instruments: Vec<Instrument> = model.instruments.iter().map(|s| Instrument::parse(s)).collect();
    let specs: Vec<ModelSpec> = instruments.iter().map(|i| i.spec(&base)).collect();
    let mut referenced = base.columns();
    for s in &specs {
        referenced.extend(s.columns());
    }
    if let Some(sub) = &ctx.config.subsample {
        referenced.push(sub.by.clone());
    }
    check_columns(&ds, &referenced)?;
    for s in &specs {
        s.validate_iv()?;
    }

    let mut z_columns: Vec<String> = Vec::new();
    for i in &instruments {
        for c in i.columns() {
            if !z_columns.contains(&c) {
                z_columns.push(c);
            }
        }
    }
    let mut covariates = model.controls.clone();
    covariates.extend(model.fixed_effects.iter().cloned());

    let mut out = Outputs::new(&ctx.out)?;
    if est.kind == EstimatorKind::Tsls {
        let opts = tsls_options(est);
        let mut t = Table::new(&ESTIMATES);
        let ols = ols_model(&ds, &base, &opts.encode)?;
        let mut row = vec!["ols".to_string(), "ols".into(), "NA".into(), sig6(ols.tau_hat), sig6(ols.se_hc1[0])];
        row.extend(std::iter::repeat_n("NA".to_string(), 7));
        row.push(ols.n_obs.to_string());
        t.push(row);
        for (instr, spec) in instruments.iter().zip(&specs) {
            let r = tsls_fit_with(&ds, spec, &opts)?;
            log::info!("2SLS {}: tau {} (se {}), weak F {}", instr.name(), sig6(r.tau_hat), sig6(r.se_tau()), sig6(r.weak_f.statistic));
            t.push(tsls_row(format!("tsls_{}", instr.name()), instr.name(), &r));
        }
        if let Some(sub) = &ctx.config.subsample {
            for (instr, spec) in instruments.iter().zip(&specs) {
                for g in late_by_group(&ds, spec, &sub.by, sub.levels.as_deref(), &opts)? {
                    let id = format!("tsls_{}[{}={}]", instr.name(), sub.by, g.level);
                    match &g.result {
                        Ok(r) => t.push(tsls_row(id, instr.name(), r)),
                        Err(e) => {
                            log::warn!("{id}: {e}");
                            t.push(na_row(id, instr.name(), g.n_obs));
                        }
                    }
                }
            }
        }
        out.write_table("estimates.csv", &t)?;
    } else if ctx.config.subsample.is_some() {
        log::warn!("[subsample] applies to tsls only; ignored for wald");
    }
    let wald = wald_table(&ds, &model.outcome, &treatment, &z_columns, est.replicates, seed.unwrap_or(0))?;
    out.write_table("wald.csv", &wald)?;
    out.write_table("balance.csv", &balance_table(&ds, &z_columns, &covariates)?)?;
    out.finish("iv", seed, &ctx.config_sha256, Some(input_hash))
}
