//! Run reports and their text and CSV renderings.
//!
//! Every numeric field is rendered with 12 significant digits in scientific
//! notation, so identical reports render to identical bytes.

use std::fmt::Write as _;
use std::time::Duration;

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Float(x) => format_float(*x),
            Cell::Int(k) => k.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<usize> for Cell {
    fn from(k: usize) -> Self {
        Cell::Int(k as i64)
    }
}

impl From<u64> for Cell {
    fn from(k: u64) -> Self {
        Cell::Int(k as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// Twelve significant digits, scientific notation.
pub fn format_float(x: f64) -> String {
    format!("{x:.11e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    /// The checked condition does not hold; a result, not an error.
    Fail,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SeedSource {
    Flag,
    Spec,
    Env(String),
    Default,
}

impl SeedSource {
    fn describe(&self) -> String {
        match self {
            SeedSource::Flag => "flag".into(),
            SeedSource::Spec => "spec".into(),
            SeedSource::Env(var) => format!("env {var}"),
            SeedSource::Default => "default".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub command: String,
    pub seed: u64,
    pub seed_source: SeedSource,
    pub status: Status,
    pub scalars: Vec<(String, Cell)>,
    pub table: Table,
    pub notes: Vec<String>,
    /// Not rendered; reports must not depend on timing.
    pub wall_time: Option<Duration>,
}

impl RunReport {
    pub fn scalar(&self, name: &str) -> Option<&Cell> {
        self.scalars.iter().find(|(k, _)| k == name).map(|(_, v)| v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Text,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(OutputFormat::Text),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(format!("unknown output format {other:?}, expected text or csv")),
        }
    }
}

pub fn emit(report: &RunReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Text => emit_text(report),
        OutputFormat::Csv => emit_csv(&report.table),
    }
}

fn emit_text(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "tool: {TOOL_NAME} {TOOL_VERSION}");
    let _ = writeln!(out, "command: {}", report.command);
    let _ = writeln!(out, "seed: {} ({})", report.seed, report.seed_source.describe());
    let _ = writeln!(out, "status: {}", report.status.name());
    let width = report.scalars.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in &report.scalars {
        let _ = writeln!(out, "{k:<width$}  {}", v.render());
    }
    for note in &report.notes {
        let _ = writeln!(out, "note: {note}");
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "[{}]", report.table.name);
    let rendered: Vec<Vec<String>> = report.table.rows.iter().map(|r| r.iter().map(Cell::render).collect()).collect();
    let widths: Vec<usize> = report
        .table
        .columns
        .iter()
        .enumerate()
        .map(|(j, c)| rendered.iter().map(|r| r[j].len()).chain([c.len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_string()
    };
    let _ = writeln!(out, "{}", line(&report.table.columns));
    for row in &rendered {
        let _ = writeln!(out, "{}", line(row));
    }
    out
}

/// Header plus one line per row, columns in table order.
pub fn emit_csv(table: &Table) -> String {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    writer.write_record(&table.columns).expect("writing to memory");
    for row in &table.rows {
        writer.write_record(row.iter().map(Cell::render)).expect("writing to memory");
    }
    String::from_utf8(writer.into_inner().expect("flush to memory")).expect("CSV output is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunReport {
        let mut table = Table::new("qcc", &["alpha_hat", "alpha_budget", "passes", "brute_force"]);
        table.push(vec![0.056.into(), 0.1.into(), true.into(), Cell::Empty]);
        RunReport {
            command: "qcc --spec rep.json".into(),
            seed: 7,
            seed_source: SeedSource::Env("QCC_SEED".into()),
            status: Status::Pass,
            scalars: vec![("alpha_hat".into(), 0.056.into()), ("passes".into(), true.into())],
            table,
            notes: vec!["brute force skipped".into()],
            wall_time: Some(Duration::from_millis(12)),
        }
    }

    #[test]
    fn text_golden() {
        let expected = "\
tool: qcc-core 0.1.0
command: qcc --spec rep.json
seed: 7 (env QCC_SEED)
status: pass
alpha_hat  5.60000000000e-2
passes     true
note: brute force skipped

[qcc]
alpha_hat         alpha_budget      passes  brute_force
5.60000000000e-2  1.00000000000e-1  true
";
        assert_eq!(emit(&sample(), OutputFormat::Text), expected);
    }

    #[test]
    fn wall_time_is_not_rendered() {
        let mut other = sample();
        other.wall_time = Some(Duration::from_secs(99));
        for format in [OutputFormat::Text, OutputFormat::Csv] {
            assert_eq!(emit(&sample(), format), emit(&other, format));
        }
    }

    #[test]
    fn empty_table_is_header_only() {
        let table = Table::new("sweep", &["z", "alpha_hat"]);
        assert_eq!(emit_csv(&table), "z,alpha_hat\n");
    }

    #[test]
    fn floats_round_trip_at_twelve_digits() {
        for x in [0.056, 1.0 / 3.0, 2.0_f64.sqrt(), 1e-17, 123456.789012345] {
            let mut table = Table::new("t", &["x"]);
            table.push(vec![x.into()]);
            let csv = emit_csv(&table);
            let mut reader = csv::Reader::from_reader(csv.as_bytes());
            let parsed: f64 = reader.records().next().unwrap().unwrap()[0].parse().unwrap();
            assert!(((parsed - x) / x).abs() < 1e-11, "{x} -> {parsed}");
            assert_eq!(format_float(parsed), format_float(x));
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(Status::Pass.exit_code(), 0);
        assert_eq!(Status::Fail.exit_code(), 1);
    }
}
