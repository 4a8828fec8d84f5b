use crate::design::{Column, Dataset, DesignError};
use crate::panel::PanelError;
use crate::stats::blocks_by_id;

/// Person-by-age panel stored densely over each person's observed span.
///
/// Persons are kept in order of first appearance in the source table. Ages
/// inside a person's span without a source row read as missing.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    labels: Vec<String>,
    start: Vec<i64>,
    /// `offset[p]..offset[p + 1]` indexes person `p` in the flat arrays.
    offset: Vec<usize>,
    parity: Vec<Option<i64>>,
    names: Vec<String>,
    values: Vec<Vec<Option<f64>>>,
    /// Source rows of every person.
    blocks: Vec<Vec<usize>>,
    row_person: Vec<usize>,
}

impl PanelDataset {
    /// Builds the panel from a long table keyed by `(person_id, time)`.
    ///
    /// `parity` counts children and must not decrease over time. Every
    /// other non-categorical column is kept as a numeric series.
    pub fn new(ds: &Dataset, person_id: &str, time: &str, parity: &str) -> Result<Self, PanelError> {
        let ds = ds.clone().with_keys(Some(person_id), Some(time))?;
        let pid = ds.column(person_id)?;
        let row_labels: Vec<String> = (0..ds.nrows())
            .map(|r| pid.label(r).ok_or_else(|| DesignError::MissingValues { column: person_id.into(), count: 1 }))
            .collect::<Result<_, _>>()?;
        let times: Vec<i64> = match ds.column(time)? {
            Column::Integer(v) => v
                .iter()
                .map(|t| t.ok_or_else(|| DesignError::MissingValues { column: time.into(), count: 1 }))
                .collect::<Result<_, _>>()?,
            _ => return Err(DesignError::NotInteger(time.into()).into()),
        };
        let par: Vec<Option<i64>> = match ds.column(parity)? {
            Column::Integer(v) => v.clone(),
            Column::Real(v) => v
                .iter()
                .map(|x| match x {
                    Some(f) if f.fract() == 0.0 => Ok(Some(*f as i64)),
                    Some(_) => Err(DesignError::NotInteger(parity.into())),
                    None => Ok(None),
                })
                .collect::<Result<_, _>>()?,
            _ => return Err(DesignError::NotInteger(parity.into()).into()),
        };
        let mut names = Vec::new();
        let mut source = Vec::new();
        for name in ds.names() {
            if name == person_id || name == time || name == parity {
                continue;
            }
            if let Some(v) = ds.column(name)?.numeric() {
                names.push(name.clone());
                source.push(v);
            }
        }

        let blocks = blocks_by_id(&row_labels);
        let mut panel = PanelDataset {
            labels: Vec::with_capacity(blocks.len()),
            start: Vec::with_capacity(blocks.len()),
            offset: vec![0],
            parity: Vec::new(),
            values: vec![Vec::new(); names.len()],
            names,
            blocks: Vec::with_capacity(blocks.len()),
            row_person: vec![0; ds.nrows()],
        };
        for rows in blocks {
            for &r in &rows {
                panel.row_person[r] = panel.labels.len();
            }
            let lo = rows.iter().map(|&r| times[r]).min().unwrap_or(0);
            let hi = rows.iter().map(|&r| times[r]).max().unwrap_or(-1);
            let span = (hi - lo + 1) as usize;
            let base = panel.parity.len();
            panel.parity.resize(base + span, None);
            for v in panel.values.iter_mut() {
                v.resize(base + span, None);
            }
            for &r in &rows {
                let at = base + (times[r] - lo) as usize;
                panel.parity[at] = par[r];
                for (dst, src) in panel.values.iter_mut().zip(&source) {
                    dst[at] = src[r];
                }
            }
            let label = row_labels[rows[0]].clone();
            let observed: Vec<i64> = panel.parity[base..].iter().flatten().copied().collect();
            if observed.windows(2).any(|w| w[1] < w[0]) {
                return Err(PanelError::NonAbsorbing(label));
            }
            panel.labels.push(label);
            panel.start.push(lo);
            panel.offset.push(base + span);
            panel.blocks.push(rows);
        }
        Ok(panel)
    }

    pub fn n_persons(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, person: usize) -> &str {
        &self.labels[person]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column_index(&self, name: &str) -> Result<usize, PanelError> {
        self.names.iter().position(|n| n == name).ok_or_else(|| DesignError::MissingColumn(name.to_string()).into())
    }

    /// Source rows of each person (the bootstrap blocks).
    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Persons behind a block resample, one entry per draw.
    pub fn drawn_persons(&self, rows: &[usize], draws: &[usize]) -> Vec<usize> {
        let mut out = Vec::new();
        let mut last = None;
        for (&r, &d) in rows.iter().zip(draws) {
            if last != Some(d) {
                out.push(self.row_person[r]);
                last = Some(d);
            }
        }
        out
    }

    /// Observed age range `(first, last)` of a person.
    pub fn span(&self, person: usize) -> (i64, i64) {
        let len = self.offset[person + 1] - self.offset[person];
        (self.start[person], self.start[person] + len as i64 - 1)
    }

    /// Global age range over all persons.
    pub fn age_range(&self) -> Option<(i64, i64)> {
        (0..self.n_persons()).map(|p| self.span(p)).reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)))
    }

    #[inline]
    fn at(&self, person: usize, t: i64) -> Option<usize> {
        let rel = t - self.start[person];
        if rel < 0 {
            return None;
        }
        let i = self.offset[person] + rel as usize;
        (i < self.offset[person + 1]).then_some(i)
    }

    pub fn parity(&self, person: usize, t: i64) -> Option<i64> {
        self.at(person, t).and_then(|i| self.parity[i])
    }

    #[inline]
    pub fn value(&self, column: usize, person: usize, t: i64) -> Option<f64> {
        self.at(person, t).and_then(|i| self.values[column][i])
    }

    /// Panel made of the listed persons, in order; repeated persons become
    /// distinct units. Each person of the result is its own single source
    /// row.
    pub fn select_persons(&self, persons: &[usize]) -> PanelDataset {
        let mut out = PanelDataset {
            labels: Vec::with_capacity(persons.len()),
            start: Vec::with_capacity(persons.len()),
            offset: vec![0],
            parity: Vec::new(),
            names: self.names.clone(),
            values: vec![Vec::new(); self.names.len()],
            blocks: Vec::with_capacity(persons.len()),
            row_person: (0..persons.len()).collect(),
        };
        for (k, &p) in persons.iter().enumerate() {
            let (a, b) = (self.offset[p], self.offset[p + 1]);
            out.labels.push(format!("{}#{k}", self.labels[p]));
            out.start.push(self.start[p]);
            out.parity.extend_from_slice(&self.parity[a..b]);
            for (dst, src) in out.values.iter_mut().zip(&self.values) {
                dst.extend_from_slice(&src[a..b]);
            }
            out.offset.push(out.parity.len());
            out.blocks.push(vec![k]);
        }
        out
    }
}
