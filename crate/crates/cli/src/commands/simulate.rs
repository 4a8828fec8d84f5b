use ivpanel_core::design::{format_real, write_csv};
use ivpanel_core::sim::{
    oracle, simulate_census, simulate_panel, DGPConfig, Estimand, PanelConfig, SimOutput, TauSpec, CENSUS_INSTRUMENTS,
};

use crate::config::{SimKind, SimulateSection, TauEntry};
use crate::error::CliError;
use crate::output::{sig6, Outputs, Table};
use crate::Context;

fn census_config(s: &SimulateSection, seed: u64) -> DGPConfig {
    let d = DGPConfig::default();
    DGPConfig {
        n: s.n,
        seed,
        p_boy: s.p_boy.unwrap_or(d.p_boy),
        p_multibirth: s.p_multibirth.unwrap_or(d.p_multibirth),
        p_third_child: s.p_third_child.unwrap_or(d.p_third_child),
        confounder_strength: s.confounder_strength.unwrap_or(d.confounder_strength),
        instrument_strength: s.instrument_strength.unwrap_or(d.instrument_strength),
        tau: match &s.tau {
            None => d.tau,
            Some(TauEntry::Constant(t)) => TauSpec::Constant(*t),
            Some(TauEntry::ByGroup { column, effects, default }) => {
                TauSpec::ByGroup { column: column.clone(), effects: effects.clone(), default: *default }
            }
            Some(TauEntry::ComplierSpecific { instrument, complier, other }) => {
                TauSpec::ComplierSpecific { instrument: instrument.clone(), complier: *complier, other: *other }
            }
        },
        reverse_causality: s.reverse_causality.unwrap_or(d.reverse_causality),
        noise_sd: s.noise_sd.unwrap_or(d.noise_sd),
        ..d
    }
}

fn panel_config(s: &SimulateSection, seed: u64) -> PanelConfig {
    let d = PanelConfig::default();
    let cfg = PanelConfig {
        n_persons: s.n,
        seed,
        periods: s.periods.unwrap_or(d.periods),
        lags: s.lags.unwrap_or(d.lags),
        att_profile: s.att_profile.clone().unwrap_or(d.att_profile.clone()),
        noise_sd: s.noise_sd.unwrap_or(d.noise_sd),
        trend_graduated: s.trend_graduated.unwrap_or(d.trend_graduated),
        ..d
    };
    match s.omitted_selection {
        Some(strength) => cfg.with_omitted_selection(strength),
        None => cfg,
    }
}

fn reject_foreign_keys(s: &SimulateSection) -> Result<(), CliError> {
    let census_only = [
        ("p_boy", s.p_boy.is_some()),
        ("p_multibirth", s.p_multibirth.is_some()),
        ("p_third_child", s.p_third_child.is_some()),
        ("confounder_strength", s.confounder_strength.is_some()),
        ("instrument_strength", s.instrument_strength.is_some()),
        ("reverse_causality", s.reverse_causality.is_some()),
        ("tau", s.tau.is_some()),
    ];
    let panel_only = [
        ("periods", s.periods.is_some()),
        ("lags", s.lags.is_some()),
        ("att_profile", s.att_profile.is_some()),
        ("omitted_selection", s.omitted_selection.is_some()),
        ("trend_graduated", s.trend_graduated.is_some()),
    ];
    let foreign: &[(&str, bool)] = match s.kind {
        SimKind::Census => &panel_only,
        SimKind::Panel => &census_only,
    };
    match foreign.iter().find(|(_, set)| *set) {
        Some((key, _)) => Err(CliError::Config(format!("[simulate] `{key}` does not apply to this kind"))),
        None => Ok(()),
    }
}

fn oracle_table(sim: &SimOutput, estimands: &[Estimand]) -> Result<Table, CliError> {
    let mut t = Table::new(&["estimand", "value"]);
    for e in estimands {
        t.push(vec![e.to_string(), sig6(oracle(sim, e)?)]);
    }
    Ok(t)
}

pub fn run(ctx: &Context) -> Result<(), CliError> {
    let s = ctx.config.simulate.as_ref().ok_or_else(|| CliError::Config("missing [simulate] section".into()))?;
    reject_foreign_keys(s)?;
    let seed = ctx.require_seed(s.seed, "simulate")?;
    let mut out = Outputs::new(&ctx.out)?;
    let (sim, data_name, estimands, hidden) = match s.kind {
        SimKind::Census => {
            let cfg = census_config(s, seed);
            let sim = simulate_census(&cfg)?;
            let mut estimands = vec![Estimand::Ate];
            estimands.extend(CENSUS_INSTRUMENTS.iter().map(|z| Estimand::Late(z.to_string())));
            let mut header = vec!["row", "u", "y0", "y1"];
            header.extend(["type_samesex", "type_boys_girls", "type_multibirth"]);
            let mut t = Table::new(&header);
            for i in 0..sim.data.nrows() {
                let mut row = vec![i.to_string(), format_real(Some(sim.hidden.u[i]))];
                row.push(format_real(Some(sim.hidden.y0[i])));
                row.push(format_real(Some(sim.hidden.y1[i])));
                for z in CENSUS_INSTRUMENTS {
                    row.push(sim.hidden.compliance[z][i].name().to_string());
                }
                t.push(row);
            }
            (sim, "census.csv", estimands, t)
        }
        SimKind::Panel => {
            let cfg = panel_config(s, seed);
            let sim = simulate_panel(&cfg)?;
            let estimands: Vec<Estimand> = (0..cfg.att_profile.len() as i64).map(Estimand::Att).collect();
            let pid = sim.data.numeric_complete("person_id")?;
            let age = sim.data.numeric_complete("age")?;
            let mut t = Table::new(&["person_id", "age", "u", "y0", "y1", "event_time"]);
            for i in 0..sim.data.nrows() {
                t.push(vec![
                    format_real(Some(pid[i])),
                    format_real(Some(age[i])),
                    format_real(Some(sim.hidden.u[i])),
                    format_real(Some(sim.hidden.y0[i])),
                    format_real(Some(sim.hidden.y1[i])),
                    sim.hidden.event_time[i].map_or_else(|| "NA".into(), |e| e.to_string()),
                ]);
            }
            (sim, "panel.csv", estimands, t)
        }
    };
    log::info!("simulated {} rows (seed {seed})", sim.data.nrows());
    let mut data = Vec::new();
    write_csv(&sim.data, &mut data)?;
    out.write(data_name, &data)?;
    out.write_table("oracle.csv", &oracle_table(&sim, &estimands)?)?;
    out.write_table("hidden.csv", &hidden)?;
    out.finish("simulate", Some(seed), &ctx.config_sha256, None)
}
