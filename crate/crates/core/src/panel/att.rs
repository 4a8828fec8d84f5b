use crate::panel::matching::{alive_masks, feature_list, Groups};
use crate::panel::{find_matched_sets, refine, CovariateSpec, MatchedSets, PanelDataset, PanelError, StratumDiagnostics};
use crate::stats::{bootstrap, BootstrapSpec, Resampling};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttKind {
    /// Pre-treatment offset; zero in expectation under parallel trends.
    Placebo,
    Effect,
}

impl AttKind {
    pub fn name(self) -> &'static str {
        match self {
            AttKind::Placebo => "placebo",
            AttKind::Effect => "effect",
        }
    }
}

/// Estimate at one offset from the treatment age.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttEntry {
    /// `f` for leads `0..=F`, `-L..=-2` for placebo periods.
    pub offset: i64,
    pub kind: AttKind,
    pub estimate: f64,
    /// Bootstrap standard error (NaN without a bootstrap).
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_sets: usize,
    /// Mean effective number of controls over the contributing sets.
    pub n_effective_controls: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicATT {
    pub outcome: String,
    pub transition: i64,
    /// Placebo offsets first, then leads, each ascending. The reference
    /// period `-1` is never reported.
    pub entries: Vec<AttEntry>,
    pub n_sets: usize,
    /// Treatment transitions dropped for lack of controls.
    pub n_dropped: usize,
    pub replicates: usize,
    pub failed_replicates: usize,
}

impl DynamicATT {
    pub fn entry(&self, offset: i64) -> Option<&AttEntry> {
        self.entries.iter().find(|e| e.offset == offset)
    }

    pub fn effects(&self) -> impl Iterator<Item = &AttEntry> {
        self.entries.iter().filter(|e| e.kind == AttKind::Effect)
    }

    pub fn placebos(&self) -> impl Iterator<Item = &AttEntry> {
        self.entries.iter().filter(|e| e.kind == AttKind::Placebo)
    }
}

/// Full matching pipeline configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct DidSpec {
    pub outcome: String,
    /// Parity before treatment.
    pub transition: i64,
    /// Pre-treatment window `L`.
    pub lags: usize,
    /// Leads `0..=F`.
    pub leads: usize,
    pub covariates: CovariateSpec,
    /// Refine sets by CBPS; uniform control weights otherwise.
    pub refine: bool,
}

impl DidSpec {
    /// `L = 3`, `F = 5`, covariates at lags `1..=3`, first birth.
    pub fn new<S: Into<String>>(outcome: impl Into<String>, covariates: impl IntoIterator<Item = S>) -> Self {
        Self {
            outcome: outcome.into(),
            transition: 0,
            lags: 3,
            leads: 5,
            covariates: CovariateSpec::new(covariates, 3),
            refine: true,
        }
    }

    pub fn offsets(&self) -> Vec<i64> {
        offsets(self.lags, self.leads)
    }
}

fn offsets(lags: usize, leads: usize) -> Vec<i64> {
    (-(lags as i64)..=-2).chain(0..=leads as i64).collect()
}

struct Contrast {
    estimate: Option<f64>,
    n_sets: usize,
    ess: f64,
}

/// `[Y_T(t*+o) - Y_T(t*-1)] - sum_c w_c [Y_c(t*+o) - Y_c(t*-1)]` averaged
/// over sets with equal weight. Controls treated by `t*+o` or lacking
/// data are dropped and the remaining weights renormalised; refit lead
/// weights are used where present.
fn contrasts(sets: &MatchedSets, panel: &PanelDataset, y: usize, offsets: &[i64]) -> Vec<Contrast> {
    offsets
        .iter()
        .map(|&o| {
            let mut sum = 0.0;
            let mut n_sets = 0usize;
            let mut ess_sum = 0.0;
            for st in &sets.strata {
                let t = st.t_star;
                let mut wsum = 0.0;
                let mut w2 = 0.0;
                let mut acc = 0.0;
                let weights = st.lead_weights.get(&o).unwrap_or(&st.weights);
                for (&c, &w) in st.controls.iter().zip(weights) {
                    if w == 0.0 || o > 0 && panel.parity(c, t + o).is_none_or(|k| k > sets.transition) {
                        continue;
                    }
                    if let (Some(a), Some(b)) = (panel.value(y, c, t + o), panel.value(y, c, t - 1)) {
                        wsum += w;
                        w2 += w * w;
                        acc += w * (a - b);
                    }
                }
                if wsum <= 0.0 {
                    continue;
                }
                let control = acc / wsum;
                let ess = wsum * wsum / w2;
                for &p in &st.treated {
                    if let (Some(a), Some(b)) = (panel.value(y, p, t + o), panel.value(y, p, t - 1)) {
                        sum += (a - b) - control;
                        n_sets += 1;
                        ess_sum += ess;
                    }
                }
            }
            Contrast {
                estimate: (n_sets > 0).then(|| sum / n_sets as f64),
                n_sets,
                ess: if n_sets > 0 { ess_sum / n_sets as f64 } else { 0.0 },
            }
        })
        .collect()
}

/// Point estimates at placebo offsets `-L..=-2` and leads `0..=leads`.
pub fn att(sets: &MatchedSets, panel: &PanelDataset, outcome: &str, leads: usize) -> Result<DynamicATT, PanelError> {
    if sets.is_empty() {
        return Err(PanelError::NoMatchedSets);
    }
    let y = panel.column_index(outcome)?;
    let offs = offsets(sets.lags, leads);
    let mut entries = Vec::with_capacity(offs.len());
    for (&o, c) in offs.iter().zip(contrasts(sets, panel, y, &offs)) {
        let estimate = c.estimate.ok_or(PanelError::LeadUnavailable(o))?;
        entries.push(AttEntry {
            offset: o,
            kind: if o < 0 { AttKind::Placebo } else { AttKind::Effect },
            estimate,
            se: f64::NAN,
            ci_lo: f64::NAN,
            ci_hi: f64::NAN,
            n_sets: c.n_sets,
            n_effective_controls: c.ess,
        });
    }
    Ok(DynamicATT {
        outcome: outcome.to_string(),
        transition: sets.transition,
        entries,
        n_sets: sets.n_sets(),
        n_dropped: sets.dropped,
        replicates: 0,
        failed_replicates: 0,
    })
}

/// Matched sets, optional refinement and point estimates.
pub fn estimate(
    panel: &PanelDataset,
    spec: &DidSpec,
) -> Result<(MatchedSets, Vec<StratumDiagnostics>, DynamicATT), PanelError> {
    let sets = find_matched_sets(panel, spec.transition, spec.lags)?;
    if sets.is_empty() {
        return Err(PanelError::NoMatchedSets);
    }
    let (sets, diags) = if spec.refine {
        refine(sets, panel, &spec.covariates, Some(&spec.outcome), spec.leads)?
    } else {
        (sets, Vec::new())
    };
    let est = att(&sets, panel, &spec.outcome, spec.leads)?;
    Ok((sets, diags, est))
}

/// Point estimates with percentile intervals from a bootstrap over
/// persons. Each replicate rebuilds the sets and their weights; a person
/// drawn twice counts as two people.
pub fn att_with_ci(panel: &PanelDataset, spec: &DidSpec, boot: &BootstrapSpec) -> Result<DynamicATT, PanelError> {
    let (_, _, mut point) = estimate(panel, spec)?;
    let prepared = Prepared::new(panel, spec)?;
    let res = bootstrap(Resampling::Blocks(panel.blocks()), boot, |r| {
        let mut counts = vec![0.0; panel.n_persons()];
        for p in panel.drawn_persons(&r.rows, &r.draws) {
            counts[p] += 1.0;
        }
        prepared.evaluate(&counts)
    })?;
    for (e, (se, ci)) in point.entries.iter_mut().zip(res.se.iter().zip(&res.ci)) {
        e.se = *se;
        e.ci_lo = ci.0;
        e.ci_hi = ci.1;
    }
    point.replicates = res.replicates.len();
    point.failed_replicates = res.failed;
    Ok(point)
}

/// Matched strata of the full panel, ready to be reweighted for any
/// person multiplicities. Copies of a person are identical units, so a
/// resample has the same sets, covariate rows and outcome changes with
/// counts attached.
struct Prepared {
    features: Vec<(String, usize, i64)>,
    offsets: Vec<i64>,
    strata: Vec<PreparedStratum>,
}

struct PreparedStratum {
    treated: Vec<usize>,
    controls: Vec<usize>,
    /// Covariate rows when refining.
    groups: Option<Groups>,
    /// Controls still untreated at leads `1..=F`.
    alive: Vec<Vec<bool>>,
    /// `Y(t*+o) - Y(t*-1)` per offset and unit.
    dy_treated: Vec<Vec<Option<f64>>>,
    dy_control: Vec<Vec<Option<f64>>>,
}

impl Prepared {
    fn new(panel: &PanelDataset, spec: &DidSpec) -> Result<Self, PanelError> {
        let sets = find_matched_sets(panel, spec.transition, spec.lags)?;
        let y = panel.column_index(&spec.outcome)?;
        let features =
            if spec.refine { feature_list(&sets, panel, &spec.covariates, Some(&spec.outcome))? } else { Vec::new() };
        let offsets = spec.offsets();
        let strata = sets
            .strata
            .iter()
            .map(|st| {
                let t = st.t_star;
                let groups = spec.refine.then(|| Groups::new(st, panel, &features));
                let controls = groups.as_ref().map_or_else(|| st.controls.clone(), |g| g.controls.clone());
                let dy = |units: &[usize]| -> Vec<Vec<Option<f64>>> {
                    offsets
                        .iter()
                        .map(|&o| units.iter().map(|&p| Some(panel.value(y, p, t + o)? - panel.value(y, p, t - 1)?)).collect())
                        .collect()
                };
                PreparedStratum {
                    alive: alive_masks(panel, &controls, t, sets.transition, spec.leads),
                    dy_treated: dy(&st.treated),
                    dy_control: dy(&controls),
                    treated: st.treated.clone(),
                    controls,
                    groups,
                }
            })
            .collect();
        Ok(Self { features, offsets, strata })
    }

    /// Estimates per offset when person `p` appears `counts[p]` times; NaN
    /// where no set has data.
    fn evaluate(&self, counts: &[f64]) -> Result<Vec<f64>, PanelError> {
        let k = self.offsets.len();
        let mut sum = vec![0.0; k];
        let mut n = vec![0.0; k];
        let mut any = false;
        for st in &self.strata {
            let tc: Vec<f64> = st.treated.iter().map(|&p| counts[p]).collect();
            let cc: Vec<f64> = st.controls.iter().map(|&p| counts[p]).collect();
            if tc.iter().all(|&c| c == 0.0) || cc.iter().all(|&c| c == 0.0) {
                continue;
            }
            any = true;
            let rw = st.groups.as_ref().map(|g| (g, g.weights(&self.features, &tc, &cc, &st.alive)));
            for (j, &o) in self.offsets.iter().enumerate() {
                let lead = (o > 0).then(|| o as usize - 1);
                let (mut wsum, mut acc) = (0.0, 0.0);
                for (u, &c) in cc.iter().enumerate() {
                    if c == 0.0 || lead.is_some_and(|f| !st.alive[f][u]) {
                        continue;
                    }
                    let Some(d) = st.dy_control[j][u] else { continue };
                    let w = match &rw {
                        Some((g, rw)) => {
                            let row = lead.and_then(|f| rw.leads[f].as_ref()).unwrap_or(&rw.base);
                            c * row[g.control_row[u]]
                        }
                        None => c,
                    };
                    wsum += w;
                    acc += w * d;
                }
                if wsum <= 0.0 {
                    continue;
                }
                let control = acc / wsum;
                for (&c, d) in tc.iter().zip(&st.dy_treated[j]) {
                    if let (true, Some(d)) = (c > 0.0, d) {
                        sum[j] += c * (d - control);
                        n[j] += c;
                    }
                }
            }
        }
        if !any {
            return Err(PanelError::NoMatchedSets);
        }
        Ok(sum.iter().zip(&n).map(|(s, &m)| if m > 0.0 { s / m } else { f64::NAN }).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{Column, Dataset};

    /// Staggered first births; outcome `base + trend*age + effect(age - t*)`.
    fn staggered(effect: &[f64], constant_outcome: bool) -> PanelDataset {
        let mut pid = Vec::new();
        let mut age = Vec::new();
        let mut par = Vec::new();
        let mut y = Vec::new();
        for i in 0..40i64 {
            // births at 24..=29 for 30 women, never for 10
            let birth = if i < 30 { Some(24 + i % 6) } else { None };
            for a in 20..36i64 {
                pid.push(i);
                age.push(a);
                let treated_at = birth.filter(|b| a >= *b);
                par.push(treated_at.is_some() as i64);
                let v = if constant_outcome {
                    1.0
                } else {
                    let base = 0.1 * i as f64 + 0.05 * a as f64;
                    base + treated_at.map_or(0.0, |b| effect.get((a - b) as usize).copied().unwrap_or(0.0))
                };
                y.push(v);
            }
        }
        let ds = Dataset::new()
            .with_column("pid", Column::from_ints(pid))
            .unwrap()
            .with_column("age", Column::from_ints(age))
            .unwrap()
            .with_column("parity", Column::from_ints(par))
            .unwrap()
            .with_column("y", Column::from_reals(y))
            .unwrap();
        PanelDataset::new(&ds, "pid", "age", "parity").unwrap()
    }

    fn spec() -> DidSpec {
        let mut s = DidSpec::new("y", Vec::<String>::new());
        s.refine = false;
        s
    }

    #[test]
    fn constant_outcome_gives_zero_everywhere() {
        let p = staggered(&[], true);
        let (_, _, est) = estimate(&p, &spec()).unwrap();
        assert!(est.entries.iter().all(|e| e.estimate == 0.0));
        assert_eq!(est.placebos().map(|e| e.offset).collect::<Vec<_>>(), vec![-3, -2]);
    }

    #[test]
    fn noiseless_additive_effect_is_recovered_exactly() {
        let profile = [-0.35; 6];
        let p = staggered(&profile, false);
        let (_, _, est) = estimate(&p, &spec()).unwrap();
        for e in est.effects() {
            assert!((e.estimate - (-0.35)).abs() < 1e-12, "{e:?}");
        }
        for e in est.placebos() {
            assert!(e.estimate.abs() < 1e-12);
        }
        let boot = att_with_ci(&p, &spec(), &BootstrapSpec::new(50, 3)).unwrap();
        for e in boot.effects() {
            assert!((e.ci_lo - (-0.35)).abs() < 1e-12 && (e.ci_hi - (-0.35)).abs() < 1e-12);
        }
    }

    #[test]
    fn later_treated_controls_drop_out_of_later_leads() {
        let profile = [-1.0, -2.0, -3.0, -4.0, -5.0, -6.0];
        let p = staggered(&profile, false);
        let (sets, _, est) = estimate(&p, &spec()).unwrap();
        // ages 24..29 each have 5 births; later cohorts serve as controls early on
        assert_eq!(sets.n_sets(), 30);
        for (f, e) in est.effects().enumerate() {
            assert!((e.estimate - profile[f]).abs() < 1e-12);
        }
    }

    #[test]
    fn relabelling_and_row_order_do_not_matter() {
        let p = staggered(&[-0.5, -0.4, -0.3, -0.2, -0.1, 0.0], false);
        let (_, _, a) = estimate(&p, &spec()).unwrap();
        let reversed: Vec<usize> = (0..p.n_persons()).rev().collect();
        let q = p.select_persons(&reversed);
        let (_, _, b) = estimate(&q, &spec()).unwrap();
        for (x, y) in a.entries.iter().zip(&b.entries) {
            assert!((x.estimate - y.estimate).abs() < 1e-12);
        }
    }

    fn simulated(n: usize, seed: u64) -> (PanelDataset, DidSpec) {
        use crate::sim::{simulate_panel, PanelConfig, PANEL_COVARIATES};
        let sim = simulate_panel(&PanelConfig { n_persons: n, seed, ..PanelConfig::default() }).unwrap();
        let panel = PanelDataset::new(&sim.data, "person_id", "age", "parity").unwrap();
        (panel, DidSpec::new("employment", PANEL_COVARIATES))
    }

    fn materialised(panel: &PanelDataset, spec: &DidSpec, persons: &[usize]) -> Vec<f64> {
        let sample = panel.select_persons(persons);
        let sets = find_matched_sets(&sample, spec.transition, spec.lags).unwrap();
        let (sets, _) = refine(sets, &sample, &spec.covariates, Some(&spec.outcome), spec.leads).unwrap();
        att(&sets, &sample, &spec.outcome, spec.leads).unwrap().entries.iter().map(|e| e.estimate).collect()
    }

    #[test]
    fn replicate_counts_match_a_rebuilt_panel() {
        use crate::stats::bootstrap::{draw_resample, replicate_rng};
        let (panel, spec) = simulated(800, 3);
        let prepared = Prepared::new(&panel, &spec).unwrap();
        let all: Vec<usize> = (0..panel.n_persons()).collect();
        let direct = prepared.evaluate(&vec![1.0; panel.n_persons()]).unwrap();
        for (a, b) in direct.iter().zip(materialised(&panel, &spec, &all)) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        for r in 0..3 {
            let res = draw_resample(Resampling::Blocks(panel.blocks()), &mut replicate_rng(11, r));
            let persons = panel.drawn_persons(&res.rows, &res.draws);
            let mut counts = vec![0.0; panel.n_persons()];
            persons.iter().for_each(|&p| counts[p] += 1.0);
            let fast = prepared.evaluate(&counts).unwrap();
            for (a, b) in fast.iter().zip(materialised(&panel, &spec, &persons)) {
                assert!((a - b).abs() < 1e-10, "replicate {r}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn lead_refits_rebalance_the_remaining_controls() {
        let (panel, spec) = simulated(1500, 4);
        let sets = find_matched_sets(&panel, 0, 3).unwrap();
        let (sets, _) = refine(sets, &panel, &spec.covariates, None, spec.leads).unwrap();
        let g = panel.column_index("graduated").unwrap();
        let mut checked = 0;
        for st in &sets.strata {
            let treated_mean =
                st.treated.iter().map(|&p| panel.value(g, p, st.t_star - 1).unwrap()).sum::<f64>() / st.treated.len() as f64;
            for w in st.lead_weights.values() {
                let control_mean: f64 =
                    st.controls.iter().zip(w).map(|(&c, &w)| w * panel.value(g, c, st.t_star - 1).unwrap()).sum();
                assert!((control_mean - treated_mean).abs() < 1e-8);
                checked += 1;
            }
        }
        assert!(checked > 0);
    }
}
