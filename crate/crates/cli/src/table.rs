//! Numeric CSV tables with a header line and 17 significant digits per value.

use std::fs;
use std::path::Path;

use crate::error::CliError;

/// `{:.16e}`: 17 significant digits, enough to reload the exact `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.index(name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Like [`Table::column`], but a missing column is an input error naming `source`.
    pub fn require(&self, name: &str, source: &str) -> Result<Vec<f64>, CliError> {
        self.column(name)
            .ok_or_else(|| CliError::Invalid(format!("{source}: missing column `{name}`")))
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.iter().map(|v| fmt_f64(*v))).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, self.to_csv()).map_err(|e| CliError::io(path, e))
    }

    /// Parses a header line followed by numeric rows; `#` lines are skipped.
    pub fn parse(text: &str, source: &str) -> Result<Self, CliError> {
        let bad = |msg: String| CliError::Invalid(format!("{source}: {msg}"));
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let columns: Vec<String> = r
            .headers()
            .map_err(|e| bad(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let row = rec
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| bad(format!("row {}: `{f}` is not a number", i + 1))))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_reload_bit_exactly() {
        let mut t = Table::new(&["t", "value"]);
        for k in 0..50 {
            let x = (k as f64 * 0.7311).exp() / 3.0;
            t.push(vec![x, 1.0 / x]);
        }
        t.push(vec![f64::NAN, f64::INFINITY]);
        let back = Table::parse(&t.to_csv(), "mem").unwrap();
        assert_eq!(back.columns, t.columns);
        for (a, b) in t.rows.iter().zip(&back.rows) {
            for (x, y) in a.iter().zip(b) {
                assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()));
            }
        }
    }

    #[test]
    fn rejects_text_cells() {
        let err = Table::parse("t,value\n1,abc\n", "curve.csv").unwrap_err();
        assert!(err.to_string().contains("curve.csv"));
        assert!(Table::parse("t,value\n1\n", "x").is_err());
    }
}
