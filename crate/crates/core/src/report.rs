//! Text renderings of a [`Report`]: an aligned table and CSV.

use std::fmt::Write as _;

use crate::evaluation::EvaluationProfile;
use crate::lab::Report;

pub const COLUMNS: [&str; 12] = [
    "candidate",
    "sessions",
    "feedback",
    "degraded",
    "wins",
    "losses",
    "ties",
    "outcome",
    "ctr_experimental",
    "ctr_baseline",
    "p_value",
    "significant",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(Format::Table),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown format {other:?} (table, csv)")),
        }
    }
}

pub fn render(report: &Report, format: Format) -> String {
    match format {
        Format::Table => render_table(report),
        Format::Csv => render_csv(report),
    }
}

fn fixed(value: Option<f64>, digits: usize) -> String {
    value.map_or_else(|| "-".to_owned(), |v| format!("{v:.digits$}"))
}

fn p_value_text(p: Option<f64>) -> String {
    match p {
        None => "-".to_owned(),
        Some(p) if p != 0.0 && p < 1e-4 => format!("{p:.2e}"),
        Some(p) => format!("{p:.4}"),
    }
}

fn table_row(p: &EvaluationProfile) -> [String; 12] {
    [
        p.candidate_system.clone(),
        p.sessions_total.to_string(),
        p.sessions_with_feedback.to_string(),
        p.degraded_excluded.to_string(),
        p.wins.to_string(),
        p.losses.to_string(),
        p.ties.to_string(),
        fixed(p.outcome, 4),
        fixed(p.ctr_experimental, 4),
        fixed(p.ctr_baseline, 4),
        p_value_text(p.p_value),
        if p.significant_at_05 { "*" } else { "" }.to_owned(),
    ]
}

/// One row per candidate; `-` marks undefined values, `*` significance at 0.05.
pub fn render_table(report: &Report) -> String {
    let rows: Vec<[String; 12]> = report.profiles.iter().map(table_row).collect();
    let mut widths: Vec<usize> = COLUMNS.iter().map(|c| c.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "experiment {} ({:?}, {:?})",
        report.experiment_id, report.method, report.state
    );
    let line = |cells: &mut dyn Iterator<Item = &str>| -> String {
        let mut text = String::new();
        for (i, (cell, w)) in cells.zip(&widths).enumerate() {
            if i == 0 {
                let _ = write!(text, "{cell:<w$}");
            } else {
                let _ = write!(text, "  {cell:>w$}");
            }
        }
        text.trim_end().to_owned()
    };
    out.push_str(&line(&mut COLUMNS.iter().copied()));
    out.push('\n');
    for row in &rows {
        out.push_str(&line(&mut row.iter().map(String::as_str)));
        out.push('\n');
    }
    out
}

fn full(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// CSV with a header row; undefined values are empty fields and reals are
/// written in shortest round-trip form.
pub fn render_csv(report: &Report) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(COLUMNS).expect("in-memory write");
    for p in &report.profiles {
        writer
            .write_record([
                p.candidate_system.clone(),
                p.sessions_total.to_string(),
                p.sessions_with_feedback.to_string(),
                p.degraded_excluded.to_string(),
                p.wins.to_string(),
                p.losses.to_string(),
                p.ties.to_string(),
                full(p.outcome),
                full(p.ctr_experimental),
                full(p.ctr_baseline),
                full(p.p_value),
                p.significant_at_05.to_string(),
            ])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}
