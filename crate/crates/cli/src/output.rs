//! CSV tables with fixed columns and ten significant digits.

use std::time::{SystemTime, UNIX_EPOCH};

use crate::CliResult;

/// Scientific notation with ten significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.9e}")
}

/// `# generated_unix=<seconds>` line placed above CSV output.
pub fn timestamp_line() -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("# generated_unix={secs}\n")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Table {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, timestamp: bool) -> CliResult<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| e.into_error())?)
            .expect("csv output is built from strings");
        Ok(if timestamp { timestamp_line() + &body } else { body })
    }
}
