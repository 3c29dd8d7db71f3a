use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::format_percent;

/// A column group: one split crossed with one query source (or "All").
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnGroup {
    pub split: String,
    pub source: String,
}

impl ColumnGroup {
    pub fn new(split: &str, source: &str) -> Self {
        Self {
            split: split.to_string(),
            source: source.to_string(),
        }
    }
}

/// Rows × (column groups × metrics) of percentages. Unset cells hold `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub title: String,
    pub row_header: String,
    pub rows: Vec<String>,
    pub groups: Vec<ColumnGroup>,
    pub metrics: Vec<String>,
    values: Vec<Option<f64>>,
}

impl ResultTable {
    pub fn new(
        title: &str,
        row_header: &str,
        rows: Vec<String>,
        groups: Vec<ColumnGroup>,
        metrics: Vec<String>,
    ) -> Self {
        let n = rows.len() * groups.len() * metrics.len();
        Self {
            title: title.to_string(),
            row_header: row_header.to_string(),
            rows,
            groups,
            metrics,
            values: vec![None; n],
        }
    }

    fn slot(&self, row: usize, group: usize, metric: usize) -> usize {
        (row * self.groups.len() + group) * self.metrics.len() + metric
    }

    pub fn set(&mut self, row: usize, group: usize, metric: usize, value: f64) {
        let i = self.slot(row, group, metric);
        self.values[i] = Some(value);
    }

    pub fn get(&self, row: usize, group: usize, metric: usize) -> Option<f64> {
        self.values[self.slot(row, group, metric)]
    }

    /// Looks a cell up by labels.
    pub fn value(&self, row: &str, split: &str, source: &str, metric: &str) -> Option<f64> {
        let r = self.rows.iter().position(|x| x == row)?;
        let g = self
            .groups
            .iter()
            .position(|g| g.split == split && g.source == source)?;
        let m = self.metrics.iter().position(|x| x == metric)?;
        self.get(r, g, m)
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    pub fn values(&self) -> impl Iterator<Item = Option<f64>> + '_ {
        self.values.iter().copied()
    }

    /// One line per cell: row, split, source, metric, value.
    pub fn to_tsv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            writeln!(out, "# {c}").unwrap();
        }
        writeln!(out, "{}\tsplit\tsource\tmetric\tvalue", self.row_header.to_lowercase()).unwrap();
        for (r, row) in self.rows.iter().enumerate() {
            for (g, group) in self.groups.iter().enumerate() {
                for (m, metric) in self.metrics.iter().enumerate() {
                    let v = self.get(r, g, m).map_or_else(|| "NA".to_string(), format_percent);
                    writeln!(out, "{row}\t{}\t{}\t{metric}\t{v}", group.split, group.source).unwrap();
                }
            }
        }
        out
    }

    /// Aligned plain-text rendering with a two-line column header.
    pub fn to_text(&self, comments: &[String]) -> String {
        let mut header1 = vec![String::new()];
        let mut header2 = vec![self.row_header.clone()];
        for g in &self.groups {
            for (m, metric) in self.metrics.iter().enumerate() {
                header1.push(if m == 0 {
                    format!("{}/{}", g.split, g.source)
                } else {
                    String::new()
                });
                header2.push(metric.clone());
            }
        }
        let mut lines = vec![header1, header2];
        for (r, row) in self.rows.iter().enumerate() {
            let mut line = vec![row.clone()];
            for g in 0..self.groups.len() {
                for m in 0..self.metrics.len() {
                    line.push(self.get(r, g, m).map_or_else(|| "-".to_string(), format_percent));
                }
            }
            lines.push(line);
        }
        let cols = lines[0].len();
        let widths: Vec<usize> = (0..cols)
            .map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0))
            .collect();

        let mut out = String::new();
        for c in comments {
            writeln!(out, "# {c}").unwrap();
        }
        writeln!(out, "{}", self.title).unwrap();
        for (i, line) in lines.iter().enumerate() {
            let cells: Vec<String> = line
                .iter()
                .enumerate()
                .map(|(c, s)| {
                    if c == 0 {
                        format!("{s:<w$}", w = widths[c])
                    } else {
                        format!("{s:>w$}", w = widths[c])
                    }
                })
                .collect();
            writeln!(out, "{}", cells.join("  ").trim_end()).unwrap();
            if i == 1 {
                let total = widths.iter().sum::<usize>() + 2 * (cols - 1);
                writeln!(out, "{}", "-".repeat(total)).unwrap();
            }
        }
        out
    }
}
