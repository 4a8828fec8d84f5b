use std::collections::BTreeMap;

use rustc_hash::FxHashMap;

use crate::cbps::{balance_report, cbps_weights_with, CbpsError, CbpsOptions};
use crate::panel::{PanelDataset, PanelError};
use crate::stats::{ColumnRole, DesignMatrix, Matrix, PivotedQr};

/// Treated persons sharing a treatment age, and their common control pool.
///
/// Within one parity transition every treated unit has the all-untreated
/// history over the lag window (treatment is absorbing), so units treated
/// at the same age have identical eligible controls.
#[derive(Debug, Clone, PartialEq)]
pub struct Stratum {
    pub t_star: i64,
    pub treated: Vec<usize>,
    pub controls: Vec<usize>,
    /// Control weights, summing to one.
    pub weights: Vec<f64>,
    /// Weights refit on the controls still untreated at `t* + f`, aligned
    /// with `controls` (zero for the others). Leads without an entry use
    /// `weights` restricted to the remaining controls.
    pub lead_weights: BTreeMap<i64, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchedSets {
    /// Parity before treatment: transition `k -> k + 1`.
    pub transition: i64,
    /// Pre-treatment periods `L` required to be observed.
    pub lags: usize,
    pub strata: Vec<Stratum>,
    /// Treatment transitions without any eligible control.
    pub dropped: usize,
}

/// One treated transition with its controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedSet<'a> {
    pub treated: usize,
    pub t_star: i64,
    pub controls: &'a [usize],
    pub weights: &'a [f64],
}

impl MatchedSets {
    pub fn n_sets(&self) -> usize {
        self.strata.iter().map(|s| s.treated.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.n_sets() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = MatchedSet<'_>> {
        self.strata.iter().flat_map(|s| {
            s.treated.iter().map(move |&treated| MatchedSet {
                treated,
                t_star: s.t_star,
                controls: &s.controls,
                weights: &s.weights,
            })
        })
    }
}

/// Matched sets for the parity transition `transition -> transition + 1`.
///
/// A treated unit has parity `transition` at `t* - 1` and more at `t*`;
/// controls have parity exactly `transition` at `t*`. Both must have
/// observed parity over `t* - lags ..= t*`.
pub fn find_matched_sets(panel: &PanelDataset, transition: i64, lags: usize) -> Result<MatchedSets, PanelError> {
    if lags == 0 {
        return Err(PanelError::InvalidOption("lag window must be at least 1".into()));
    }
    let mut out = MatchedSets { transition, lags, strata: Vec::new(), dropped: 0 };
    let Some((lo, hi)) = panel.age_range() else {
        return Ok(out);
    };
    let l = lags as i64;
    for t in lo + l..=hi {
        let mut treated = Vec::new();
        let mut controls = Vec::new();
        for p in 0..panel.n_persons() {
            let (a, b) = panel.span(p);
            if a > t - l || b < t {
                continue;
            }
            if (t - l..=t).any(|s| panel.parity(p, s).is_none()) {
                continue;
            }
            let now = panel.parity(p, t).unwrap_or(-1);
            let before = panel.parity(p, t - 1).unwrap_or(-1);
            if before == transition && now > transition {
                treated.push(p);
            } else if now == transition {
                controls.push(p);
            }
        }
        if treated.is_empty() {
            continue;
        }
        if controls.is_empty() {
            out.dropped += treated.len();
            continue;
        }
        let w = 1.0 / controls.len() as f64;
        out.strata.push(Stratum {
            t_star: t,
            treated,
            weights: vec![w; controls.len()],
            controls,
            lead_weights: BTreeMap::new(),
        });
    }
    if out.dropped > 0 {
        log::info!("{} treatment transitions had no eligible control", out.dropped);
    }
    Ok(out)
}

/// Pre-treatment variables balanced by [`refine`].
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateSpec {
    pub columns: Vec<String>,
    /// Periods before treatment at which every column enters; all `>= 1`.
    pub lags: Vec<i64>,
    /// Balance the outcome at the same lags as well. Exact balance on
    /// lagged outcomes forces pre-period placebo contrasts to zero, so it
    /// is off by default.
    pub outcome_lags: bool,
}

impl CovariateSpec {
    /// Every column at lags `1..=max_lag`.
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>, max_lag: usize) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            lags: (1..=max_lag as i64).collect(),
            outcome_lags: false,
        }
    }

    pub fn with_outcome_lags(mut self, yes: bool) -> Self {
        self.outcome_lags = yes;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefineMethod {
    Cbps,
    /// CBPS was not attempted or failed; controls weighted equally.
    Uniform,
}

impl RefineMethod {
    pub fn name(self) -> &'static str {
        match self {
            RefineMethod::Cbps => "cbps",
            RefineMethod::Uniform => "uniform",
        }
    }
}

/// Per-stratum refinement summary.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumDiagnostics {
    pub t_star: i64,
    pub n_treated: usize,
    pub n_controls: usize,
    /// Balanced columns after dropping constant and collinear ones.
    pub n_covariates: usize,
    pub method: RefineMethod,
    pub max_std_diff_before: f64,
    pub max_std_diff_after: f64,
    pub ess_control: f64,
    pub note: Option<String>,
}

/// Reweights each stratum's controls by CBPS on pre-treatment covariate
/// histories. Controls with a missing covariate are removed; a stratum
/// with too few controls or a failed fit keeps uniform weights.
///
/// Controls treated by `t* + f` drop out of lead `f`. For each lead
/// `1..=leads` that loses controls the weights are refit on the remaining
/// ones, so they stay balanced against the treated.
pub fn refine(
    sets: MatchedSets,
    panel: &PanelDataset,
    covariates: &CovariateSpec,
    outcome: Option<&str>,
    leads: usize,
) -> Result<(MatchedSets, Vec<StratumDiagnostics>), PanelError> {
    let features = feature_list(&sets, panel, covariates, outcome)?;
    if sets.is_empty() {
        return Err(PanelError::NoMatchedSets);
    }
    let MatchedSets { transition, lags, strata, dropped } = sets;
    let mut out = MatchedSets { transition, lags, strata: Vec::with_capacity(strata.len()), dropped };
    let mut diags = Vec::with_capacity(strata.len());
    for stratum in strata {
        let (s, d) = refine_stratum(stratum, panel, &features, transition, leads);
        diags.push(d);
        if !s.controls.is_empty() {
            out.strata.push(s);
        }
    }
    Ok((out, diags))
}

/// `(name, column, lag)` of every balanced feature, after checking the lags.
pub(crate) fn feature_list(
    sets: &MatchedSets,
    panel: &PanelDataset,
    covariates: &CovariateSpec,
    outcome: Option<&str>,
) -> Result<Vec<(String, usize, i64)>, PanelError> {
    if let Some(&bad) = covariates.lags.iter().find(|&&l| l <= 0) {
        return Err(PanelError::PostTreatmentLag(bad));
    }
    if let Some(&bad) = covariates.lags.iter().find(|&&l| l > sets.lags as i64) {
        return Err(PanelError::InvalidOption(format!("covariate lag {bad} exceeds the matching window {}", sets.lags)));
    }
    let mut cols: Vec<(String, usize)> =
        covariates.columns.iter().map(|c| Ok((c.clone(), panel.column_index(c)?))).collect::<Result<_, PanelError>>()?;
    if covariates.outcome_lags {
        let y = outcome.ok_or_else(|| PanelError::InvalidOption("outcome lags requested without an outcome".into()))?;
        cols.push((y.to_string(), panel.column_index(y)?));
    }
    Ok(cols
        .iter()
        .flat_map(|(name, j)| covariates.lags.iter().map(move |&l| (format!("{name}_lag{l}"), *j, l)))
        .collect())
}

/// A stratum's units collapsed to distinct covariate rows.
#[derive(Debug, Clone, Default)]
pub(crate) struct Groups {
    index: FxHashMap<Vec<u64>, usize>,
    key: Vec<u64>,
    rows: Vec<Vec<f64>>,
    /// Row of each treated unit; `None` when a covariate is missing.
    pub treated_row: Vec<Option<usize>>,
    /// Row of each kept control.
    pub control_row: Vec<usize>,
    /// Kept controls: those with complete covariates.
    pub controls: Vec<usize>,
}

/// Control weights of a stratum per distinct row, before normalisation.
#[derive(Debug, Clone)]
pub(crate) struct RowWeights {
    pub method: RefineMethod,
    /// Balanced feature columns.
    pub keep: Vec<usize>,
    pub note: Option<String>,
    pub base: Vec<f64>,
    /// Refit weights for leads `1..=leads`; `None` restricts `base`.
    pub leads: Vec<Option<Vec<f64>>>,
}

impl Groups {
    pub fn new(stratum: &Stratum, panel: &PanelDataset, features: &[(String, usize, i64)]) -> Self {
        let t = stratum.t_star;
        let mut g = Groups::default();
        let mut buf = Vec::with_capacity(features.len());
        for &p in &stratum.treated {
            let row = read_features(panel, p, t, features, &mut buf).then(|| g.slot(&buf));
            g.treated_row.push(row);
        }
        for &p in &stratum.controls {
            if read_features(panel, p, t, features, &mut buf) {
                let r = g.slot(&buf);
                g.control_row.push(r);
                g.controls.push(p);
            }
        }
        g
    }

    fn slot(&mut self, x: &[f64]) -> usize {
        self.key.clear();
        self.key.extend(x.iter().map(|v| v.to_bits()));
        if let Some(&r) = self.index.get(self.key.as_slice()) {
            return r;
        }
        self.index.insert(self.key.clone(), self.rows.len());
        self.rows.push(x.to_vec());
        self.rows.len() - 1
    }

    fn control_counts(&self, counts: &[f64], alive: Option<&[bool]>) -> Vec<f64> {
        let mut c = vec![0.0; self.rows.len()];
        for (u, (&r, &n)) in self.control_row.iter().zip(counts).enumerate() {
            if alive.is_none_or(|a| a[u]) {
                c[r] += n;
            }
        }
        c
    }

    /// Independent varying columns over the rows in use.
    fn independent(&self, treated: &[f64], control: &[f64]) -> Vec<usize> {
        let used: Vec<Vec<f64>> = (0..self.rows.len())
            .filter(|&r| treated[r] > 0.0 || control[r] > 0.0)
            .map(|r| self.rows[r].clone())
            .collect();
        independent_columns(&used, self.rows.first().map_or(0, Vec::len))
    }

    /// CBPS odds per row; zero for rows without controls.
    fn fit(
        &self,
        keep: &[usize],
        features: &[(String, usize, i64)],
        treated: &[f64],
        control: &[f64],
    ) -> Result<Vec<f64>, PanelError> {
        let mut stacked: Vec<(usize, bool, f64)> = Vec::new();
        stacked.extend((0..self.rows.len()).filter(|&r| treated[r] > 0.0).map(|r| (r, true, treated[r])));
        stacked.extend((0..self.rows.len()).filter(|&r| control[r] > 0.0).map(|r| (r, false, control[r])));
        let design = design_matrix(stacked.iter().map(|&(r, _, _)| self.rows[r].as_slice()), stacked.len(), keep, features)?;
        let treat: Vec<bool> = stacked.iter().map(|s| s.1).collect();
        let freq: Vec<f64> = stacked.iter().map(|s| s.2).collect();
        let fit = cbps_weights_with(&treat, &design, Some(&freq), &CbpsOptions::default())?;
        let mut odds = vec![0.0; self.rows.len()];
        for (&(r, t, _), &w) in stacked.iter().zip(&fit.weights) {
            if !t {
                odds[r] = w;
            }
        }
        Ok(odds)
    }

    /// Row weights when treated unit `i` counts `treated[i]` times and kept
    /// control `u` counts `control[u]` times; `alive[f - 1]` flags the
    /// controls still untreated at lead `f`.
    pub fn weights(
        &self,
        features: &[(String, usize, i64)],
        treated: &[f64],
        control: &[f64],
        alive: &[Vec<bool>],
    ) -> RowWeights {
        let mut out = RowWeights {
            method: RefineMethod::Uniform,
            keep: Vec::new(),
            note: None,
            base: vec![1.0; self.rows.len()],
            leads: vec![None; alive.len()],
        };
        let mut t_count = vec![0.0; self.rows.len()];
        for (row, &n) in self.treated_row.iter().zip(treated) {
            if let Some(r) = row {
                t_count[*r] += n;
            }
        }
        let c_count = self.control_counts(control, None);
        let n_c: f64 = c_count.iter().sum();
        if n_c == 0.0 {
            out.note = Some("no control with complete covariates".into());
            return out;
        }
        let keep = self.independent(&t_count, &c_count);
        out.keep = keep.clone();
        if keep.is_empty() {
            out.note = Some("no varying covariates".into());
            return out;
        }
        if t_count.iter().sum::<f64>() == 0.0 {
            out.note = Some("no treated unit with complete covariates".into());
            return out;
        }
        if n_c <= (keep.len() + 1) as f64 {
            out.note = Some(format!("{n_c} controls for {} covariates", keep.len() + 1));
            return out;
        }
        match self.fit(&keep, features, &t_count, &c_count) {
            Ok(w) => out.base = w,
            Err(e) => {
                out.note = Some(e.to_string());
                return out;
            }
        }
        out.method = RefineMethod::Cbps;

        let mut previous = c_count.clone();
        let mut current: Option<Vec<f64>> = None;
        for (f, mask) in alive.iter().enumerate() {
            let counts = self.control_counts(control, Some(mask));
            let n_alive: f64 = counts.iter().sum();
            if n_alive == 0.0 {
                break;
            }
            if counts != previous {
                current = if n_alive <= (keep.len() + 1) as f64 {
                    None
                } else {
                    // columns can only become dependent on a smaller pool
                    match self.fit(&keep, features, &t_count, &counts) {
                        Err(PanelError::Cbps(CbpsError::RankDeficient(_))) => {
                            let keep = self.independent(&t_count, &counts);
                            (!keep.is_empty()).then(|| self.fit(&keep, features, &t_count, &counts).ok()).flatten()
                        }
                        r => r.ok(),
                    }
                };
                previous = counts;
            }
            out.leads[f] = current.clone();
        }
        out
    }

    /// One row per unit, treated with complete covariates first, for
    /// balance reporting.
    fn expanded(&self, keep: &[usize], features: &[(String, usize, i64)]) -> Result<(Vec<bool>, DesignMatrix<f64>), PanelError> {
        let mut idx: Vec<usize> = self.treated_row.iter().flatten().copied().collect();
        let mut treat = vec![true; idx.len()];
        idx.extend(&self.control_row);
        treat.resize(idx.len(), false);
        let design = design_matrix(idx.iter().map(|&r| self.rows[r].as_slice()), idx.len(), keep, features)?;
        Ok((treat, design))
    }
}

/// Whether each control is still at parity `transition` at `t* + f`, for
/// `f = 1..=leads`.
pub(crate) fn alive_masks(panel: &PanelDataset, controls: &[usize], t: i64, transition: i64, leads: usize) -> Vec<Vec<bool>> {
    (1..=leads as i64)
        .map(|f| controls.iter().map(|&c| panel.parity(c, t + f) == Some(transition)).collect())
        .collect()
}

fn read_features(panel: &PanelDataset, p: usize, t: i64, features: &[(String, usize, i64)], buf: &mut Vec<f64>) -> bool {
    buf.clear();
    for &(_, j, l) in features {
        match panel.value(j, p, t - l) {
            Some(v) => buf.push(v),
            None => return false,
        }
    }
    true
}

fn design_matrix<'a>(
    rows: impl Iterator<Item = &'a [f64]>,
    n: usize,
    keep: &[usize],
    features: &[(String, usize, i64)],
) -> Result<DesignMatrix<f64>, PanelError> {
    let mut names = vec!["(intercept)".to_string()];
    let mut roles = vec![ColumnRole::Intercept];
    for &j in keep {
        names.push(features[j].0.clone());
        roles.push(ColumnRole::Exogenous);
    }
    let mut m = Matrix::zeros(n, keep.len() + 1);
    for (i, r) in rows.enumerate() {
        m[(i, 0)] = 1.0;
        for (c, &j) in keep.iter().enumerate() {
            m[(i, c + 1)] = r[j];
        }
    }
    Ok(DesignMatrix::new(names, roles, m)?)
}

/// Unit weights from row weights, zero where `alive` is false, summing to one.
fn unit_weights(rows: &[usize], row_weight: &[f64], alive: Option<&[bool]>) -> Vec<f64> {
    let mut w: Vec<f64> =
        rows.iter().enumerate().map(|(u, &r)| if alive.is_none_or(|a| a[u]) { row_weight[r] } else { 0.0 }).collect();
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        w.iter_mut().for_each(|v| *v /= total);
    }
    w
}

fn refine_stratum(
    stratum: Stratum,
    panel: &PanelDataset,
    features: &[(String, usize, i64)],
    transition: i64,
    leads: usize,
) -> (Stratum, StratumDiagnostics) {
    let t = stratum.t_star;
    let groups = Groups::new(&stratum, panel, features);
    let n_c = groups.controls.len();
    let alive = alive_masks(panel, &groups.controls, t, transition, leads);
    let rw = groups.weights(features, &vec![1.0; stratum.treated.len()], &vec![1.0; n_c], &alive);
    if rw.method == RefineMethod::Uniform {
        if let Some(note) = &rw.note {
            log::warn!("stratum at age {t}: {note}; uniform weights");
        }
    }
    let weights = unit_weights(&groups.control_row, &rw.base, None);
    let mut diag = StratumDiagnostics {
        t_star: t,
        n_treated: stratum.treated.len(),
        n_controls: n_c,
        n_covariates: rw.keep.len(),
        method: rw.method,
        max_std_diff_before: f64::NAN,
        max_std_diff_after: f64::NAN,
        ess_control: n_c as f64,
        note: rw.note.clone(),
    };
    if n_c > 0 {
        if let Ok((treat, design)) = groups.expanded(&rw.keep, features) {
            let n_t = treat.iter().filter(|&&x| x).count();
            if let Ok(before) = balance_report(&treat, &design, &vec![1.0; treat.len()]) {
                diag.max_std_diff_before = before.max_abs_std_diff_after();
                diag.max_std_diff_after = diag.max_std_diff_before;
            }
            if rw.method == RefineMethod::Cbps {
                let mut w = vec![1.0; n_t];
                w.extend(&weights);
                if let Ok(after) = balance_report(&treat, &design, &w) {
                    diag.max_std_diff_after = after.max_abs_std_diff_after();
                    diag.ess_control = after.ess_control;
                }
            }
        }
    }
    let lead_weights = rw
        .leads
        .iter()
        .enumerate()
        .filter_map(|(f, w)| {
            let mask = &alive[f];
            let lost = mask.iter().any(|&a| !a);
            let w = w.as_ref().filter(|_| lost)?;
            Some((f as i64 + 1, unit_weights(&groups.control_row, w, Some(mask))))
        })
        .collect();
    (Stratum { t_star: t, treated: stratum.treated, controls: groups.controls, weights, lead_weights }, diag)
}

/// Feature columns that vary and are not linear combinations of the
/// others (intercept included), judged on the distinct rows.
fn independent_columns(rows: &[Vec<f64>], k: usize) -> Vec<usize> {
    let mut seen: FxHashMap<Vec<u64>, ()> = FxHashMap::default();
    let mut distinct: Vec<&Vec<f64>> = Vec::new();
    for r in rows {
        if seen.insert(r.iter().map(|v| v.to_bits()).collect(), ()).is_none() {
            distinct.push(r);
        }
    }
    let m = distinct.len() as f64;
    let mut centered: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut varying = Vec::with_capacity(k);
    for j in 0..k {
        let mean = distinct.iter().map(|r| r[j]).sum::<f64>() / m;
        let col: Vec<f64> = distinct.iter().map(|r| r[j] - mean).collect();
        let scale = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if scale > 1e-12 * mean.abs().max(1.0) {
            centered.push(col.iter().map(|v| v / scale).collect());
            varying.push(j);
        }
    }
    if varying.is_empty() {
        return varying;
    }
    // column dependence of X equals that of X'X, which is square
    let kv = varying.len();
    let mut gram = Matrix::zeros(kv, kv);
    for a in 0..kv {
        for b in a..kv {
            let v: f64 = centered[a].iter().zip(&centered[b]).map(|(x, y)| x * y).sum();
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
    }
    let dependent = PivotedQr::new(&gram).dependent_columns();
    varying.into_iter().enumerate().filter(|(c, _)| !dependent.contains(c)).map(|(_, j)| j).collect()
}
