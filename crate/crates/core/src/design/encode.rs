use std::collections::BTreeMap;

use crate::design::{Column, Dataset, DesignError, ModelSpec};
use crate::stats::{ColumnRole, DesignMatrix, Matrix};

pub const INTERCEPT: &str = "(intercept)";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodeOptions {
    /// Upper bound on groups per fixed-effect factor.
    pub max_fe_groups: usize,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        Self { max_fe_groups: 10_000 }
    }
}

/// Numeric encoding of a [`ModelSpec`] over a complete-case dataset.
#[derive(Debug, Clone)]
pub struct EncodedModel {
    pub y: Vec<f64>,
    /// Treatment as 0/1 (demeaned when fixed effects are absorbed).
    pub d: Vec<f64>,
    /// Excluded instruments `Z`.
    pub instruments: DesignMatrix<f64>,
    /// Included exogenous regressors `X`, intercept first when present.
    pub exogenous: DesignMatrix<f64>,
    /// `[Z, X]`.
    pub first_stage_x: DesignMatrix<f64>,
    /// `[d, X]`.
    pub second_stage_x: DesignMatrix<f64>,
    /// Parameters partialled out by fixed-effect absorption.
    pub absorbed: usize,
}

impl EncodedModel {
    pub fn n_obs(&self) -> usize {
        self.y.len()
    }
}

struct Block {
    names: Vec<String>,
    roles: Vec<ColumnRole>,
    columns: Vec<Vec<f64>>,
}

impl Block {
    fn new() -> Self {
        Self { names: Vec::new(), roles: Vec::new(), columns: Vec::new() }
    }

    fn push(&mut self, name: String, role: ColumnRole, values: Vec<f64>) {
        self.names.push(name);
        self.roles.push(role);
        self.columns.push(values);
    }

    fn into_design(self, rows: usize, absorbed: usize) -> Result<DesignMatrix<f64>, DesignError> {
        let cols: Vec<&[f64]> = self.columns.iter().map(Vec::as_slice).collect();
        let values = if cols.is_empty() { Matrix::zeros(rows, 0) } else { Matrix::from_columns(&cols) };
        Ok(DesignMatrix::new(self.names, self.roles, values)?.with_absorbed(absorbed))
    }
}

/// Encodes `spec` over `ds`.
///
/// Categorical regressors become dummies for every observed level except
/// the alphabetically first. Fixed effects are absorbed by within-group
/// demeaning of every variable (alternating projections for several
/// factors); the intercept is then absorbed too and each factor costs
/// `groups - 1` residual degrees of freedom.
pub fn encode(ds: &Dataset, spec: &ModelSpec, opts: &EncodeOptions) -> Result<EncodedModel, DesignError> {
    spec.validate()?;
    for c in spec.columns() {
        let col = ds.column(&c)?;
        let missing = (0..ds.nrows()).filter(|&r| col.is_missing(r)).count();
        if missing > 0 {
            return Err(DesignError::MissingValues { column: c, count: missing });
        }
    }
    let n = ds.nrows();
    let mut y = ds.numeric_complete(&spec.outcome)?;
    let mut d: Vec<f64> = ds.binary_complete(&spec.treatment)?.into_iter().map(|b| b as u8 as f64).collect();

    let mut z = Block::new();
    for name in &spec.instruments {
        if name == &spec.treatment {
            z.push(name.clone(), ColumnRole::Instrument, d.clone());
        } else {
            z.push(name.clone(), ColumnRole::Instrument, ds.numeric_complete(name)?);
        }
    }

    let mut x = Block::new();
    for name in &spec.exogenous {
        match ds.column(name)? {
            Column::Categorical { levels, codes } => {
                let mut observed: Vec<(String, u32)> = Vec::new();
                for code in codes.iter().flatten() {
                    if !observed.iter().any(|(_, c)| c == code) {
                        observed.push((levels[*code as usize].clone(), *code));
                    }
                }
                observed.sort();
                for (label, code) in observed.into_iter().skip(1) {
                    let dummy = codes.iter().map(|c| if *c == Some(code) { 1.0 } else { 0.0 }).collect();
                    x.push(format!("{name}[{label}]"), ColumnRole::Exogenous, dummy);
                }
            }
            _ => x.push(name.clone(), ColumnRole::Exogenous, ds.numeric_complete(name)?),
        }
    }

    let mut absorbed = 0;
    if spec.fixed_effects.is_empty() {
        if spec.intercept {
            x.names.insert(0, INTERCEPT.to_string());
            x.roles.insert(0, ColumnRole::Intercept);
            x.columns.insert(0, vec![1.0; n]);
        }
    } else {
        let mut factors = Vec::with_capacity(spec.fixed_effects.len());
        for fe in &spec.fixed_effects {
            let groups = group_index(ds.column(fe)?, n);
            if groups.count > opts.max_fe_groups {
                return Err(DesignError::LevelExplosion {
                    column: fe.clone(),
                    groups: groups.count,
                    max: opts.max_fe_groups,
                });
            }
            absorbed += groups.count - 1;
            factors.push(groups);
        }
        absorbed += 1;
        let mut targets: Vec<&mut Vec<f64>> = vec![&mut y, &mut d];
        targets.extend(z.columns.iter_mut());
        targets.extend(x.columns.iter_mut());
        for t in targets {
            demean(t, &factors);
        }
        // self-instrumented treatment must stay identical to the demeaned d
        for (name, col) in z.names.iter().zip(z.columns.iter_mut()) {
            if name == &spec.treatment {
                col.clone_from(&d);
            }
        }
    }

    let instruments = z.into_design(n, 0)?;
    let exogenous = x.into_design(n, absorbed)?;
    let first_stage_x = instruments.hstack(&exogenous)?.with_absorbed(absorbed);
    let second_stage_x = DesignMatrix::single(&spec.treatment, ColumnRole::Treatment, &d)?
        .hstack(&exogenous)?
        .with_absorbed(absorbed);
    Ok(EncodedModel { y, d, instruments, exogenous, first_stage_x, second_stage_x, absorbed })
}

/// Group membership of every row for one factor.
#[derive(Debug, Clone)]
pub struct Groups {
    pub of_row: Vec<usize>,
    pub count: usize,
    sizes: Vec<f64>,
}

fn group_index(col: &Column, n: usize) -> Groups {
    let mut ids: BTreeMap<String, usize> = BTreeMap::new();
    for r in 0..n {
        if let Some(l) = col.label(r) {
            let next = ids.len();
            ids.entry(l).or_insert(next);
        }
    }
    // renumber in label order for determinism
    let order: BTreeMap<usize, usize> = ids.values().enumerate().map(|(rank, &id)| (id, rank)).collect();
    let of_row: Vec<usize> = (0..n).map(|r| order[&ids[&col.label(r).unwrap_or_default()]]).collect();
    let count = ids.len();
    let mut sizes = vec![0.0; count];
    for &g in &of_row {
        sizes[g] += 1.0;
    }
    Groups { of_row, count, sizes }
}

fn demean_once(v: &mut [f64], g: &Groups) -> f64 {
    let mut sums = vec![0.0; g.count];
    for (x, &k) in v.iter().zip(&g.of_row) {
        sums[k] += x;
    }
    let mut largest = 0.0f64;
    for (s, n) in sums.iter_mut().zip(&g.sizes) {
        *s /= n;
        largest = largest.max(s.abs());
    }
    for (x, &k) in v.iter_mut().zip(&g.of_row) {
        *x -= sums[k];
    }
    largest
}

const DEMEAN_TOL: f64 = 1e-12;
const DEMEAN_MAX_SWEEPS: usize = 10_000;

/// Within transformation; alternating projections when several factors.
fn demean(v: &mut [f64], factors: &[Groups]) {
    let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    for _ in 0..DEMEAN_MAX_SWEEPS {
        let mut change = 0.0f64;
        for g in factors {
            change = change.max(demean_once(v, g));
        }
        if factors.len() == 1 || change <= DEMEAN_TOL * scale {
            break;
        }
    }
}
