use std::fmt::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EvalReport;
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableLayout {
    /// AFLW2000-3D, 68 landmarks.
    #[serde(rename = "aflw2000-68")]
    Aflw2000_68,
    /// AFLW, 21 landmarks.
    #[serde(rename = "aflw-21")]
    Aflw21,
    /// Backbone comparison with compute columns.
    BackboneCompare,
}

impl TableLayout {
    pub fn title(self) -> &'static str {
        match self {
            TableLayout::Aflw2000_68 => "AFLW2000-3D (68 landmarks): NME (%) by absolute yaw",
            TableLayout::Aflw21 => "AFLW (21 landmarks): NME (%) by absolute yaw",
            TableLayout::BackboneCompare => "AFLW2000-3D (68 landmarks): NME (%) and compute by backbone",
        }
    }

    pub fn header(self) -> &'static [&'static str] {
        match self {
            TableLayout::Aflw2000_68 | TableLayout::Aflw21 => &["Method", "0 to 30", "30 to 60", "60 to 90", "All"],
            TableLayout::BackboneCompare => {
                &["Backbone", "0 to 30", "30 to 60", "60 to 90", "All", "gMac", "gFlop", "# Params"]
            }
        }
    }

    fn value_columns(self) -> usize {
        self.header().len() - 1
    }
}

impl FromStr for TableLayout {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "aflw2000-68" => Ok(TableLayout::Aflw2000_68),
            "aflw-21" => Ok(TableLayout::Aflw21),
            "backbone-compare" => Ok(TableLayout::BackboneCompare),
            _ => Err(Error::Config(format!("unknown layout {s:?} (aflw2000-68, aflw-21, backbone-compare)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cell {
    /// NME as a fraction; rendered ×100 with two decimals.
    Value(f64),
    /// Rendered verbatim.
    Published(String),
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    pub cells: Vec<Cell>,
}

impl TableRow {
    /// Bin means followed by the balanced-subset mean.
    pub fn from_report(label: impl Into<String>, report: &EvalReport) -> Self {
        let mut cells: Vec<Cell> = report.bins.iter().map(|b| b.mean.map_or(Cell::Empty, Cell::Value)).collect();
        cells.push(report.balanced_mean.map_or(Cell::Empty, Cell::Value));
        Self { label: label.into(), cells }
    }

    pub fn published(label: impl Into<String>, cells: &[&str]) -> Self {
        Self { label: label.into(), cells: cells.iter().map(|c| Cell::Published(c.to_string())).collect() }
    }
}

/// `value × 100` with two decimals, ties to even on the scaled binary value.
pub fn format_cell(cell: &Cell) -> String {
    match cell {
        Cell::Value(v) => format!("{:.2}", v * 100.0),
        Cell::Published(s) => s.clone(),
        Cell::Empty => "—".to_string(),
    }
}

/// Fixed-width table: labels left-aligned, values right-aligned, columns
/// separated by `" | "`. Rows shorter than the layout are padded with empty
/// cells.
pub fn render_table(layout: TableLayout, rows: &[TableRow]) -> String {
    let header = layout.header();
    let ncols = header.len();
    let grid: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut line = vec![r.label.clone()];
            line.extend((0..layout.value_columns()).map(|k| format_cell(r.cells.get(k).unwrap_or(&Cell::Empty))));
            line
        })
        .collect();
    let width: Vec<usize> = (0..ncols)
        .map(|k| {
            grid.iter()
                .map(|l| l[k].chars().count())
                .chain(std::iter::once(header[k].chars().count()))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let pad = |s: &str, k: usize| {
        let fill = " ".repeat(width[k] - s.chars().count());
        if k == 0 {
            format!("{s}{fill}")
        } else {
            format!("{fill}{s}")
        }
    };
    let mut out = String::new();
    writeln!(out, "{}", layout.title()).unwrap();
    let head: Vec<String> = header.iter().enumerate().map(|(k, h)| pad(h, k)).collect();
    writeln!(out, "{}", head.join(" | ")).unwrap();
    let rule: Vec<String> = width.iter().map(|&w| "-".repeat(w)).collect();
    writeln!(out, "{}", rule.join("-+-")).unwrap();
    for line in &grid {
        let cells: Vec<String> = line.iter().enumerate().map(|(k, c)| pad(c, k)).collect();
        writeln!(out, "{}", cells.join(" | ")).unwrap();
    }
    out
}

/// Published rows of the reference comparison tables.
pub fn published_rows(layout: TableLayout) -> Vec<TableRow> {
    let rows: &[(&str, &[&str])] = match layout {
        TableLayout::Aflw2000_68 => &[
            ("3DDFA", &["3.43", "4.24", "7.17", "4.94"]),
            ("3DSTN", &["3.15", "4.33", "5.98", "4.49"]),
            ("3D-FAN", &["3.16", "3.53", "4.60", "3.76"]),
            ("3DDFA TPAMI", &["2.84", "3.57", "4.96", "3.79"]),
            ("PRNet", &["2.75", "3.51", "4.61", "3.62"]),
            ("2DASL", &["2.75", "3.46", "4.45", "3.55"]),
            ("3DDFA V2", &["2.63", "3.420", "4.48", "3.51"]),
            ("Ours", &["2.86", "3.68", "4.76", "3.77"]),
        ],
        TableLayout::Aflw21 => &[
            ("ESR", &["5.66", "7.12", "11.94", "8.24"]),
            ("3DDFA", &["4.75", "4.83", "6.39", "5.32"]),
            ("3D-FAN", &["4.40", "4.52", "5.17", "4.69"]),
            ("3DDFA TPAMI", &["4.11", "4.38", "5.16", "4.55"]),
            ("PRNet", &["4.19", "4.69", "5.45", "4.77"]),
            ("3DDFA V2", &["3.98", "4.31", "4.99", "4.43"]),
            ("Ours", &["4.04", "4.45", "5.2", "4.57"]),
        ],
        TableLayout::BackboneCompare => &[
            ("Resnet-18", &["2.88", "3.72", "4.82", "3.83", "5.13", "2.56", "16.03M"]),
            ("Mobilenet-V2", &["2.86", "3.68", "4.76", "3.77", "0.39", "0.19", "4.18M"]),
        ],
    };
    rows.iter().map(|(l, c)| TableRow::published(*l, c)).collect()
}
