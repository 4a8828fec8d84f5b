//! CSV ingestion and emission for [`Dataset`].
//!
//! UTF-8, comma separated, header row required. An empty field or `NA`
//! reads as missing; missing values are written as `NA`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::design::{Column, ColumnType, Dataset, DesignError};

pub type Schema = BTreeMap<String, ColumnType>;

fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f == "NA"
}

/// Reads a CSV table. Columns not named in `schema` are read as reals.
pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<Dataset, DesignError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(|h| h.trim().to_string()).collect();
    if headers.is_empty() {
        return Err(DesignError::Csv("missing header row".into()));
    }
    for declared in schema.keys() {
        if !headers.contains(declared) {
            return Err(DesignError::MissingColumn(declared.clone()));
        }
    }
    let mut raw: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err)?;
        if record.len() != headers.len() {
            return Err(DesignError::Csv(format!("row {} has {} fields, expected {}", line + 2, record.len(), headers.len())));
        }
        for (j, field) in record.iter().enumerate() {
            raw[j].push(field.to_string());
        }
    }

    let mut ds = Dataset::new();
    for (name, fields) in headers.iter().zip(raw) {
        let ty = schema.get(name).cloned().unwrap_or(ColumnType::Real);
        ds.set_column(name.clone(), parse_column(name, &ty, &fields)?)?;
    }
    Ok(ds)
}

fn parse_column(name: &str, ty: &ColumnType, fields: &[String]) -> Result<Column, DesignError> {
    let bad = |v: &str| DesignError::Parse { column: name.to_string(), value: v.to_string() };
    Ok(match ty {
        ColumnType::Real => Column::Real(
            fields
                .iter()
                .map(|f| if is_missing(f) { Ok(None) } else { f.trim().parse::<f64>().map(Some).map_err(|_| bad(f)) })
                .collect::<Result<_, _>>()?,
        ),
        ColumnType::Integer => Column::Integer(
            fields
                .iter()
                .map(|f| if is_missing(f) { Ok(None) } else { f.trim().parse::<i64>().map(Some).map_err(|_| bad(f)) })
                .collect::<Result<_, _>>()?,
        ),
        ColumnType::Boolean => Column::Boolean(
            fields
                .iter()
                .map(|f| match f.trim() {
                    _ if is_missing(f) => Ok(None),
                    "1" | "true" | "TRUE" => Ok(Some(true)),
                    "0" | "false" | "FALSE" => Ok(Some(false)),
                    other => Err(bad(other)),
                })
                .collect::<Result<_, _>>()?,
        ),
        ColumnType::Categorical(levels) => {
            let labels: Vec<Option<&str>> =
                fields.iter().map(|f| if is_missing(f) { None } else { Some(f.trim()) }).collect();
            Column::categorical(levels.clone(), &labels).map_err(|e| match e {
                DesignError::UnknownLevel(l) => DesignError::Parse { column: name.to_string(), value: l },
                other => other,
            })?
        }
    })
}

fn csv_err(e: csv::Error) -> DesignError {
    DesignError::Csv(e.to_string())
}

/// Shortest round-trip decimal representation; `NA` for missing or NaN.
pub fn format_real(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => {
            let s = format!("{x}");
            if s == "-0" {
                "0".to_string()
            } else {
                s
            }
        }
        Some(x) if x.is_infinite() => if x > 0.0 { "Inf".into() } else { "-Inf".into() },
        _ => "NA".to_string(),
    }
}

/// Writes the table with a header row and LF line endings.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<(), DesignError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(ds.names()).map_err(csv_err)?;
    let cols: Vec<&Column> = ds.names().iter().map(|n| ds.column(n)).collect::<Result<_, _>>()?;
    let mut record = Vec::with_capacity(cols.len());
    for r in 0..ds.nrows() {
        record.clear();
        for c in &cols {
            record.push(match c {
                Column::Real(v) => format_real(v[r]),
                _ => c.label(r).unwrap_or_else(|| "NA".to_string()),
            });
        }
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush().map_err(|e| DesignError::Csv(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_missing_and_categorical_fields() {
        let text = "y,region,d\n1.5,north,1\n,south,0\nNA,north,\n";
        let mut schema = Schema::new();
        schema.insert("region".into(), ColumnType::Categorical(vec!["north".into(), "south".into()]));
        schema.insert("d".into(), ColumnType::Boolean);
        let ds = read_csv(text.as_bytes(), &schema).unwrap();
        assert_eq!(ds.nrows(), 3);
        assert_eq!(ds.numeric("y").unwrap(), vec![Some(1.5), None, None]);
        assert_eq!(ds.column("region").unwrap().label(1).as_deref(), Some("south"));
        assert!(ds.column("d").unwrap().is_missing(2));
    }

    #[test]
    fn undeclared_level_is_a_parse_error() {
        let mut schema = Schema::new();
        schema.insert("region".into(), ColumnType::Categorical(vec!["north".into()]));
        let err = read_csv("region\neast\n".as_bytes(), &schema).unwrap_err();
        assert!(matches!(err, DesignError::Parse { .. }));
    }

    #[test]
    fn write_then_read_preserves_values() {
        let ds = Dataset::new()
            .with_column("x", Column::Real(vec![Some(0.1), None, Some(-2.5e-7)]))
            .unwrap()
            .with_column("k", Column::Integer(vec![Some(3), Some(-1), None]))
            .unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(!text.contains('\r'));
        let mut schema = Schema::new();
        schema.insert("k".into(), ColumnType::Integer);
        let back = read_csv(buf.as_slice(), &schema).unwrap();
        assert_eq!(back, ds);
    }
}
