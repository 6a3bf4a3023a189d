//! Text and CSV rendering shared by reports and exports.

use std::collections::BTreeMap;
use std::io::{self, Write};

use crate::criteria::CriterionReport;
use crate::experiment::CriterionEstimate;

/// Fixed 12-significant-digit scientific notation; parsing and re-printing is lossless.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.11e}")
}

/// `k=v;k=v` in key order.
pub fn params_field(params: &BTreeMap<String, f64>) -> String {
    params
        .iter()
        .map(|(k, v)| format!("{k}={}", fmt_num(*v)))
        .collect::<Vec<_>>()
        .join(";")
}

pub const REPORT_HEADER: &str =
    "criterion,lhs,bound,margin,params,method,convergence_delta,violated";

fn report_fields(r: &CriterionReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        r.kind,
        fmt_num(r.lhs),
        fmt_num(r.bound),
        fmt_num(r.margin()),
        params_field(&r.params),
        r.method,
        r.convergence_delta.map(fmt_num).unwrap_or_default(),
        r.violated
    )
}

pub fn write_reports_csv<W: Write>(mut w: W, reports: &[CriterionReport]) -> io::Result<()> {
    writeln!(w, "{REPORT_HEADER}")?;
    for r in reports {
        writeln!(w, "{}", report_fields(r))?;
    }
    Ok(())
}

/// Same columns as [`write_reports_csv`] plus `se`.
pub fn write_estimates_csv<W: Write>(mut w: W, estimates: &[CriterionEstimate]) -> io::Result<()> {
    writeln!(w, "{REPORT_HEADER},se")?;
    for e in estimates {
        writeln!(w, "{},{}", report_fields(&e.report), fmt_num(e.se))?;
    }
    Ok(())
}

fn short(x: f64) -> String {
    if x == 0.0 || (1e-3..1e4).contains(&x.abs()) {
        format!("{x:.6}")
    } else {
        format!("{x:.3e}")
    }
}

fn short_params(params: &BTreeMap<String, f64>) -> String {
    params
        .iter()
        .map(|(k, v)| format!("{k}={}", short(*v)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&line(rule.iter().map(String::as_str).collect()));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

fn report_row(r: &CriterionReport) -> Vec<String> {
    vec![
        r.kind.to_string(),
        r.method.to_string(),
        short(r.lhs),
        short(r.bound),
        short(r.margin()),
        if r.violated { "VIOLATED" } else { "ok" }.to_string(),
        short_params(&r.params),
    ]
}

const TABLE_HEADER: [&str; 7] = [
    "criterion",
    "method",
    "lhs",
    "bound",
    "margin",
    "status",
    "params",
];

/// Aligned table followed by any report notes.
pub fn reports_table(reports: &[CriterionReport]) -> String {
    let rows: Vec<Vec<String>> = reports.iter().map(report_row).collect();
    let mut out = render_table(&TABLE_HEADER, &rows);
    let mut notes: Vec<&String> = reports.iter().flat_map(|r| &r.notes).collect();
    notes.dedup();
    for n in notes {
        out.push_str(&format!("note: {n}\n"));
    }
    out
}

pub fn estimates_table(estimates: &[CriterionEstimate]) -> String {
    let mut header = TABLE_HEADER.to_vec();
    header.insert(5, "se");
    let rows: Vec<Vec<String>> = estimates
        .iter()
        .map(|e| {
            let mut row = report_row(&e.report);
            row.insert(5, short(e.se));
            row
        })
        .collect();
    render_table(&header, &rows)
}
