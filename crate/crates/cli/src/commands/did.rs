use ivpanel_core::panel::{att_with_ci, estimate, CovariateSpec, DidSpec, PanelDataset, PanelError};
use ivpanel_core::stats::BootstrapSpec;

use crate::commands::{check_columns, load_input};
use crate::config::EstimatorKind;
use crate::error::CliError;
use crate::output::{sig6, Outputs, Table};
use crate::Context;

const ATT: [&str; 8] = ["outcome", "parity_transition", "lead", "estimate", "ci_lo", "ci_hi", "n_sets", "kind"];
const DIAGNOSTICS: [&str; 9] = [
    "t_star",
    "n_treated",
    "n_controls",
    "n_covariates",
    "method",
    "max_std_diff_before",
    "max_std_diff_after",
    "ess_control",
    "note",
];

pub fn run(ctx: &Context) -> Result<(), CliError> {
    let model = ctx.config.model()?;
    let est = ctx.config.estimator()?;
    if est.kind != EstimatorKind::Did {
        return Err(CliError::Config("the did subcommand needs estimator kind `did`".into()));
    }
    est.check_level()?;
    let need = |v: &Option<String>, key: &str| {
        v.clone().ok_or_else(|| CliError::Config(format!("[model] {key} is required for did")))
    };
    let person_id = need(&model.person_id, "person_id")?;
    let time = need(&model.time, "time")?;
    let parity = need(&model.parity, "parity")?;
    let seed = if est.replicates > 0 { Some(ctx.require_seed(est.seed, "the block bootstrap")?) } else { ctx.seed(est.seed) };

    let (ds, input_hash) = load_input(ctx)?;
    let mut referenced = vec![model.outcome.clone(), person_id.clone(), time.clone(), parity.clone()];
    referenced.extend(model.controls.iter().cloned());
    check_columns(&ds, &referenced)?;
    let panel = PanelDataset::new(&ds, &person_id, &time, &parity)?;
    log::info!("panel of {} persons", panel.n_persons());

    let spec = DidSpec {
        outcome: model.outcome.clone(),
        transition: est.transition,
        lags: est.lags,
        leads: est.leads,
        covariates: CovariateSpec::new(model.controls.clone(), est.lags).with_outcome_lags(est.outcome_lags),
        refine: est.refine,
    };
    let transition = format!("{}->{}", est.transition, est.transition + 1);
    let mut att = Table::new(&ATT);
    let mut diag = Table::new(&DIAGNOSTICS);
    let mut out = Outputs::new(&ctx.out)?;
    match estimate(&panel, &spec) {
        Err(PanelError::NoMatchedSets) => {
            log::warn!("no matched sets for transition {transition}; att.csv is empty");
        }
        Err(e) => return Err(e.into()),
        Ok((sets, diags, point)) => {
            log::info!("{} matched sets in {} strata, {} transitions dropped", sets.n_sets(), sets.strata.len(), sets.dropped);
            let result = match seed {
                Some(seed) if est.replicates > 0 => {
                    let boot = BootstrapSpec { replicates: est.replicates, seed, level: est.level };
                    let r = att_with_ci(&panel, &spec, &boot)?;
                    if r.failed_replicates > 0 {
                        log::warn!("{} of {} bootstrap replicates failed", r.failed_replicates, est.replicates);
                    }
                    r
                }
                _ => point,
            };
            for e in &result.entries {
                att.push(vec![
                    result.outcome.clone(),
                    transition.clone(),
                    e.offset.to_string(),
                    sig6(e.estimate),
                    sig6(e.ci_lo),
                    sig6(e.ci_hi),
                    e.n_sets.to_string(),
                    e.kind.name().to_string(),
                ]);
            }
            if diags.is_empty() {
                for st in &sets.strata {
                    diag.push(vec![
                        st.t_star.to_string(),
                        st.treated.len().to_string(),
                        st.controls.len().to_string(),
                        "0".into(),
                        "uniform".into(),
                        "NA".into(),
                        "NA".into(),
                        sig6(st.controls.len() as f64),
                        "NA".into(),
                    ]);
                }
            }
            for d in &diags {
                diag.push(vec![
                    d.t_star.to_string(),
                    d.n_treated.to_string(),
                    d.n_controls.to_string(),
                    d.n_covariates.to_string(),
                    d.method.name().to_string(),
                    sig6(d.max_std_diff_before),
                    sig6(d.max_std_diff_after),
                    sig6(d.ess_control),
                    d.note.clone().unwrap_or_else(|| "NA".into()),
                ]);
            }
        }
    }
    out.write_table("att.csv", &att)?;
    out.write_table("set_diagnostics.csv", &diag)?;
    out.finish("did", seed, &ctx.config_sha256, Some(input_hash))
}
