use std::collections::{BTreeSet, HashSet};

use crate::design::DesignError;

/// Declared type of a column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnType {
    Real,
    Integer,
    Boolean,
    /// Closed level set.
    Categorical(Vec<String>),
}

/// A column of equal-length observations; `None` marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Real(Vec<Option<f64>>),
    Integer(Vec<Option<i64>>),
    Boolean(Vec<Option<bool>>),
    Categorical { levels: Vec<String>, codes: Vec<Option<u32>> },
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Real(v) => v.len(),
            Column::Integer(v) => v.len(),
            Column::Boolean(v) => v.len(),
            Column::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column_type(&self) -> ColumnType {
        match self {
            Column::Real(_) => ColumnType::Real,
            Column::Integer(_) => ColumnType::Integer,
            Column::Boolean(_) => ColumnType::Boolean,
            Column::Categorical { levels, .. } => ColumnType::Categorical(levels.clone()),
        }
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            Column::Real(v) => v[row].is_none_or(f64::is_nan),
            Column::Integer(v) => v[row].is_none(),
            Column::Boolean(v) => v[row].is_none(),
            Column::Categorical { codes, .. } => codes[row].is_none(),
        }
    }

    /// Numeric view; categorical columns have none.
    pub fn numeric(&self) -> Option<Vec<Option<f64>>> {
        match self {
            Column::Real(v) => Some(v.iter().map(|x| x.filter(|f| !f.is_nan())).collect()),
            Column::Integer(v) => Some(v.iter().map(|x| x.map(|i| i as f64)).collect()),
            Column::Boolean(v) => Some(v.iter().map(|x| x.map(|b| if b { 1.0 } else { 0.0 })).collect()),
            Column::Categorical { .. } => None,
        }
    }

    /// String label of a cell, used for grouping (`None` when missing).
    pub fn label(&self, row: usize) -> Option<String> {
        match self {
            Column::Real(v) => v[row].filter(|f| !f.is_nan()).map(|f| f.to_string()),
            Column::Integer(v) => v[row].map(|i| i.to_string()),
            Column::Boolean(v) => v[row].map(|b| if b { "1".to_string() } else { "0".to_string() }),
            Column::Categorical { levels, codes } => codes[row].map(|c| levels[c as usize].clone()),
        }
    }

    pub fn take(&self, rows: &[usize]) -> Column {
        match self {
            Column::Real(v) => Column::Real(rows.iter().map(|&r| v[r]).collect()),
            Column::Integer(v) => Column::Integer(rows.iter().map(|&r| v[r]).collect()),
            Column::Boolean(v) => Column::Boolean(rows.iter().map(|&r| v[r]).collect()),
            Column::Categorical { levels, codes } => {
                Column::Categorical { levels: levels.clone(), codes: rows.iter().map(|&r| codes[r]).collect() }
            }
        }
    }

    pub fn from_reals(values: Vec<f64>) -> Column {
        Column::Real(values.into_iter().map(Some).collect())
    }

    pub fn from_bools(values: Vec<bool>) -> Column {
        Column::Boolean(values.into_iter().map(Some).collect())
    }

    pub fn from_ints(values: Vec<i64>) -> Column {
        Column::Integer(values.into_iter().map(Some).collect())
    }

    /// Categorical column from labels; the level set is the declared one.
    pub fn categorical(levels: Vec<String>, labels: &[Option<&str>]) -> Result<Column, DesignError> {
        let codes = labels
            .iter()
            .map(|l| match l {
                None => Ok(None),
                Some(s) => levels
                    .iter()
                    .position(|lv| lv == s)
                    .map(|p| Some(p as u32))
                    .ok_or_else(|| DesignError::UnknownLevel(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Column::Categorical { levels, codes })
    }
}

/// Column-oriented table with optional person-id and time (age) axes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Column>,
    rows: usize,
    person_id: Option<String>,
    time: Option<String>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    /// Adds or replaces a column.
    pub fn with_column(mut self, name: impl Into<String>, column: Column) -> Result<Self, DesignError> {
        self.set_column(name, column)?;
        Ok(self)
    }

    pub fn set_column(&mut self, name: impl Into<String>, column: Column) -> Result<(), DesignError> {
        let name = name.into();
        if !self.columns.is_empty() && column.len() != self.rows {
            return Err(DesignError::LengthMismatch { column: name, expected: self.rows, found: column.len() });
        }
        if self.columns.is_empty() {
            self.rows = column.len();
        }
        match self.names.iter().position(|n| *n == name) {
            Some(p) => self.columns[p] = column,
            None => {
                self.names.push(name);
                self.columns.push(column);
            }
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Result<&Column, DesignError> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|p| &self.columns[p])
            .ok_or_else(|| DesignError::MissingColumn(name.to_string()))
    }

    pub fn numeric(&self, name: &str) -> Result<Vec<Option<f64>>, DesignError> {
        self.column(name)?.numeric().ok_or_else(|| DesignError::NotNumeric(name.to_string()))
    }

    /// Numeric column with no missing values allowed.
    pub fn numeric_complete(&self, name: &str) -> Result<Vec<f64>, DesignError> {
        let v = self.numeric(name)?;
        let missing = v.iter().filter(|x| x.is_none()).count();
        if missing > 0 {
            return Err(DesignError::MissingValues { column: name.to_string(), count: missing });
        }
        Ok(v.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
    }

    /// 0/1 column as booleans, missing preserved.
    pub fn binary(&self, name: &str) -> Result<Vec<Option<bool>>, DesignError> {
        let v = self.numeric(name)?;
        v.into_iter()
            .map(|x| match x {
                None => Ok(None),
                Some(f) if f == 0.0 => Ok(Some(false)),
                Some(f) if f == 1.0 => Ok(Some(true)),
                Some(_) => Err(DesignError::NonBinary(name.to_string())),
            })
            .collect()
    }

    pub fn binary_complete(&self, name: &str) -> Result<Vec<bool>, DesignError> {
        let v = self.binary(name)?;
        let missing = v.iter().filter(|x| x.is_none()).count();
        if missing > 0 {
            return Err(DesignError::MissingValues { column: name.to_string(), count: missing });
        }
        Ok(v.into_iter().map(|x| x.unwrap_or(false)).collect())
    }

    pub fn take_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c.take(rows)).collect(),
            rows: rows.len(),
            person_id: self.person_id.clone(),
            time: self.time.clone(),
        }
    }

    pub fn person_id(&self) -> Option<&str> {
        self.person_id.as_deref()
    }

    pub fn time(&self) -> Option<&str> {
        self.time.as_deref()
    }

    /// Declares the person-id and time columns; `(person, time)` pairs must
    /// be unique when both are given.
    pub fn with_keys(mut self, person_id: Option<&str>, time: Option<&str>) -> Result<Self, DesignError> {
        if let Some(p) = person_id {
            self.column(p)?;
        }
        if let Some(t) = time {
            match self.column(t)? {
                Column::Integer(_) => {}
                _ => return Err(DesignError::NotInteger(t.to_string())),
            }
        }
        if let (Some(p), Some(t)) = (person_id, time) {
            let pc = self.column(p)?;
            let tc = self.column(t)?;
            let mut seen = HashSet::with_capacity(self.rows);
            for r in 0..self.rows {
                let key = (pc.label(r), tc.label(r));
                if !seen.insert(key.clone()) {
                    return Err(DesignError::DuplicateKey {
                        person: key.0.unwrap_or_default(),
                        time: key.1.unwrap_or_default(),
                    });
                }
            }
        }
        self.person_id = person_id.map(str::to_string);
        self.time = time.map(str::to_string);
        Ok(self)
    }

    /// Distinct non-missing labels of a column, sorted.
    pub fn distinct_labels(&self, name: &str) -> Result<BTreeSet<String>, DesignError> {
        let c = self.column(name)?;
        Ok((0..self.rows).filter_map(|r| c.label(r)).collect())
    }
}
