//! Versioned CSV tables.
//!
//! Every file starts with `# ymblow-csv <schema> v<version>`, followed by
//! optional `# key = value` metadata lines, a header row and data rows.
//! Floats are written in shortest round-trip exponent notation; missing
//! values are empty cells.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TableError {
    #[error("missing or malformed schema line")]
    NoSchema,
    #[error("schema `{found}` v{found_version}, expected `{expected}` v{expected_version}")]
    SchemaMismatch { expected: String, expected_version: u32, found: String, found_version: u32 },
    #[error("columns {found:?} do not match schema {expected:?}")]
    Columns { expected: Vec<String>, found: Vec<String> },
    #[error("missing header row")]
    NoHeader,
    #[error("row {row} has {found} cells, expected {expected}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("row {row}, column `{column}`: cannot parse `{value}`")]
    Cell { row: usize, column: String, value: String },
}

/// Name, version and fixed columns of a table kind. Tables with a
/// `variable_prefix` may append any number of columns starting with it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schema {
    pub name: &'static str,
    pub version: u32,
    pub columns: &'static [&'static str],
    pub variable_prefix: Option<&'static str>,
}

pub const SERIES: Schema = Schema {
    name: "series",
    version: 1,
    columns: &["t", "tau", "w_rr0", "lambda", "e_total", "flux_out", "e_cone", "e_cone_kinetic", "depth", "synced"],
    variable_prefix: Some("distance_"),
};
pub const LEVELS: Schema = Schema { name: "levels", version: 1, columns: &["depth", "dr", "time", "r", "w", "w_t"], variable_prefix: None };
pub const RESCALED: Schema = Schema { name: "rescaled", version: 1, columns: &["eta", "w"], variable_prefix: None };
pub const PROFILE: Schema = Schema { name: "profile", version: 1, columns: &["eta", "w", "w_prime"], variable_prefix: None };
pub const BRACKET: Schema = Schema {
    name: "bracket",
    version: 1,
    columns: &["probe", "amplitude", "outcome", "a_lo", "a_hi"],
    variable_prefix: None,
};
pub const SWEEP: Schema = Schema { name: "sweep", version: 1, columns: &["epsilon", "amplitude", "outcome", "value"], variable_prefix: None };
pub const DEPARTURE: Schema = Schema {
    name: "departure",
    version: 1,
    columns: &["sign", "epsilon", "amplitude", "outcome", "value"],
    variable_prefix: None,
};
pub const RATE_RATIO: Schema = Schema { name: "rate-ratio", version: 1, columns: &["t", "ratio"], variable_prefix: None };
pub const CONE: Schema = Schema {
    name: "cone",
    version: 1,
    columns: &["t", "radius", "e_cone", "e_cone_kinetic"],
    variable_prefix: None,
};

pub fn float(x: f64) -> String {
    format!("{x:e}")
}

pub fn opt_float(x: Option<f64>) -> String {
    x.map_or(String::new(), float)
}

/// Builds the text of one table.
#[derive(Clone, Debug)]
pub struct TableWriter {
    head: String,
    header: String,
    body: String,
    width: usize,
}

impl TableWriter {
    pub fn new(schema: &Schema, extra: &[String]) -> Self {
        let mut columns: Vec<&str> = schema.columns.to_vec();
        columns.extend(extra.iter().map(String::as_str));
        TableWriter {
            head: format!("# ymblow-csv {} v{}\n", schema.name, schema.version),
            header: columns.join(","),
            body: String::new(),
            width: columns.len(),
        }
    }

    pub fn meta(mut self, key: &str, value: impl std::fmt::Display) -> Self {
        let _ = writeln!(self.head, "# {key} = {value}");
        self
    }

    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.width, "row width");
        let _ = writeln!(self.body, "{}", cells.join(","));
    }

    pub fn finish(self) -> String {
        format!("{}{}\n{}", self.head, self.header, self.body)
    }
}

/// A parsed table; cells are kept as text.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub schema: String,
    pub version: u32,
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self, TableError> {
        let mut lines = text.lines();
        let first = lines.next().ok_or(TableError::NoSchema)?;
        let rest = first.strip_prefix("# ymblow-csv ").ok_or(TableError::NoSchema)?;
        let (schema, version) = rest.rsplit_once(' ').ok_or(TableError::NoSchema)?;
        let version: u32 = version.strip_prefix('v').and_then(|v| v.parse().ok()).ok_or(TableError::NoSchema)?;
        let mut meta = Vec::new();
        let mut columns = None;
        let mut rows = Vec::new();
        for line in lines {
            if columns.is_none() {
                if let Some(m) = line.strip_prefix("# ") {
                    if let Some((k, v)) = m.split_once(" = ") {
                        meta.push((k.to_string(), v.to_string()));
                    }
                    continue;
                }
                columns = Some(line.split(',').map(str::to_string).collect::<Vec<_>>());
                continue;
            }
            let cells: Vec<String> = line.split(',').map(str::to_string).collect();
            let width = columns.as_ref().map_or(0, Vec::len);
            if cells.len() != width {
                return Err(TableError::Ragged { row: rows.len(), expected: width, found: cells.len() });
            }
            rows.push(cells);
        }
        let columns = columns.ok_or(TableError::NoHeader)?;
        Ok(Table { schema: schema.to_string(), version, meta, columns, rows })
    }

    /// Rejects any drift from `schema`.
    pub fn expect(&self, schema: &Schema) -> Result<(), TableError> {
        if self.schema != schema.name || self.version != schema.version {
            return Err(TableError::SchemaMismatch {
                expected: schema.name.to_string(),
                expected_version: schema.version,
                found: self.schema.clone(),
                found_version: self.version,
            });
        }
        let n = schema.columns.len();
        let fixed_ok = self.columns.len() >= n && self.columns[..n].iter().zip(schema.columns).all(|(a, b)| a == b);
        let extra_ok = match schema.variable_prefix {
            Some(p) => self.columns[n.min(self.columns.len())..].iter().all(|c| c.starts_with(p)),
            None => self.columns.len() == n,
        };
        if !(fixed_ok && extra_ok) {
            return Err(TableError::Columns {
                expected: schema.columns.iter().map(|s| s.to_string()).collect(),
                found: self.columns.clone(),
            });
        }
        Ok(())
    }

    pub fn parse_as(text: &str, schema: &Schema) -> Result<Self, TableError> {
        let t = Table::parse(text)?;
        t.expect(schema)?;
        Ok(t)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric column; empty cells become `None`.
    pub fn floats(&self, name: &str) -> Result<Vec<Option<f64>>, TableError> {
        let j = self.column(name).ok_or_else(|| TableError::Columns { expected: vec![name.to_string()], found: self.columns.clone() })?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let s = &r[j];
                if s.is_empty() {
                    return Ok(None);
                }
                s.parse()
                    .map(Some)
                    .map_err(|_| TableError::Cell { row: i, column: name.to_string(), value: s.clone() })
            })
            .collect()
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|m| m.0 == key).map(|m| m.1.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> String {
        let mut w = TableWriter::new(&SWEEP, &[]).meta("fit_exponent", float(-0.8));
        w.row(&["1e-14".into(), float(0.144), "Dispersion".into(), float(5.2e13)]);
        w.row(&["1e-13".into(), float(0.144), "Undetermined".into(), String::new()]);
        w.finish()
    }

    #[test]
    fn round_trip() {
        let text = sample();
        assert!(text.starts_with("# ymblow-csv sweep v1\n# fit_exponent = -8e-1\nepsilon,amplitude,outcome,value\n"));
        let t = Table::parse_as(&text, &SWEEP).unwrap();
        assert_eq!(t.floats("value").unwrap(), vec![Some(5.2e13), None]);
        assert_eq!(t.meta_value("fit_exponent"), Some("-8e-1"));
    }

    #[test]
    fn drift_is_rejected() {
        let text = sample();
        assert!(matches!(Table::parse_as(&text, &BRACKET), Err(TableError::SchemaMismatch { .. })));
        let bumped = text.replace("sweep v1", "sweep v2");
        assert!(matches!(Table::parse_as(&bumped, &SWEEP), Err(TableError::SchemaMismatch { .. })));
        let renamed = text.replace("epsilon,amplitude", "eps,amplitude");
        assert!(matches!(Table::parse_as(&renamed, &SWEEP), Err(TableError::Columns { .. })));
        let unversioned = text.lines().skip(1).collect::<Vec<_>>().join("\n");
        assert_eq!(Table::parse(&unversioned), Err(TableError::NoSchema));
    }

    #[test]
    fn variable_columns_need_the_prefix() {
        let mut w = TableWriter::new(&SERIES, &["distance_W0".to_string()]);
        w.row(&vec![String::new(); 11]);
        let text = w.finish();
        assert!(Table::parse_as(&text, &SERIES).is_ok());
        let bad = text.replace("distance_W0", "W0");
        assert!(matches!(Table::parse_as(&bad, &SERIES), Err(TableError::Columns { .. })));
    }

    #[test]
    fn ragged_rows() {
        let text = "# ymblow-csv rescaled v1\neta,w\n1e0,2e0\n3e0\n";
        assert!(matches!(Table::parse(text), Err(TableError::Ragged { row: 1, .. })));
    }
}
