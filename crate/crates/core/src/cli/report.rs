//! Check reports and their RFC-4180 CSV form.

use std::io::Write;

use crate::error::Result;

/// How a measured value is compared with its threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Comparison {
    /// Pass iff `value <= threshold`.
    AtMost,
    /// Pass iff `value >= threshold`.
    AtLeast,
    /// Pass iff `value == threshold` exactly.
    Exact,
    /// Informational row; always passes.
    Info,
}

impl Comparison {
    fn symbol(self) -> &'static str {
        match self {
            Comparison::AtMost => "<=",
            Comparison::AtLeast => ">=",
            Comparison::Exact => "==",
            Comparison::Info => "info",
        }
    }

    fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparison::AtMost => value <= threshold,
            Comparison::AtLeast => value >= threshold,
            Comparison::Exact => value == threshold,
            Comparison::Info => true,
        }
    }
}

/// One verified quantity.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub check: String,
    /// The statement this row verifies.
    pub anchor: &'static str,
    pub n: usize,
    pub samples: usize,
    pub p: usize,
    pub rank: usize,
    pub value: f64,
    pub comparison: Comparison,
    pub threshold: f64,
    pub detail: String,
}

impl Row {
    pub fn pass(&self) -> bool {
        !self.value.is_nan() && self.comparison.holds(self.value, self.threshold)
    }
}

/// Shape columns shared by the rows of one pipeline stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape {
    pub n: usize,
    pub samples: usize,
    pub p: usize,
    pub rank: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<Row>,
}

impl Report {
    pub fn push(
        &mut self,
        shape: Shape,
        check: impl Into<String>,
        anchor: &'static str,
        value: f64,
        comparison: Comparison,
        threshold: f64,
        detail: impl Into<String>,
    ) {
        self.rows.push(Row {
            check: check.into(),
            anchor,
            n: shape.n,
            samples: shape.samples,
            p: shape.p,
            rank: shape.rank,
            value,
            comparison,
            threshold,
            detail: detail.into(),
        });
    }

    pub fn pass(&self) -> bool {
        self.rows.iter().all(Row::pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(|r| !r.pass())
    }

    pub const HEADER: [&'static str; 11] =
        ["check", "anchor", "n", "N", "p", "rank", "value", "comparison", "threshold", "pass", "detail"];

    /// RFC-4180 CSV with a header row and CRLF line endings. Floats use a
    /// fixed 10-significant-digit exponent format.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
        w.write_record(Self::HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.check.as_str(),
                r.anchor,
                &r.n.to_string(),
                &r.samples.to_string(),
                &r.p.to_string(),
                &r.rank.to_string(),
                &format_float(r.value),
                r.comparison.symbol(),
                &format_float(r.threshold),
                if r.pass() { "true" } else { "false" },
                r.detail.as_str(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.9e}")
    } else {
        format!("{v}")
    }
}
