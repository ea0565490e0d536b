use serde::{Deserialize, Serialize};

use super::RateMatrix;
use crate::spectral::Pgm;

/// One decimal place, with a trailing `.0` dropped: `93.0 -> "93"`.
pub fn fmt_pct(v: f64) -> String {
    let s = format!("{:.1}", v);
    let s = s.strip_suffix(".0").map(str::to_string).unwrap_or(s);
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

/// `"Acc | F1 | Er"` cell group.
pub fn render_row(acc: f64, f1: f64, err: f64) -> String {
    format!("{} | {} | {}", fmt_pct(acc), fmt_pct(f1), fmt_pct(err))
}

/// A small string table rendered as aligned text, CSV or JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(title: &str, columns: &[&str]) -> Self {
        Self {
            title: title.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_text(&self) -> String {
        let mut width: Vec<usize> = self.columns.iter().map(|c| c.chars().count()).collect();
        for r in &self.rows {
            for (w, cell) in width.iter_mut().zip(r) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&width)
                .enumerate()
                .map(|(i, (c, w))| {
                    if i == 0 {
                        format!("{c:<w$}")
                    } else {
                        format!("{c:>w$}")
                    }
                })
                .collect();
            parts.join(" | ").trim_end().to_string()
        };
        let mut out = format!("{}\n", self.title);
        out.push_str(&line(&self.columns));
        out.push('\n');
        let rule: Vec<String> = width.iter().map(|w| "-".repeat(*w)).collect();
        out.push_str(&rule.join("-+-"));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }
}

/// Heat image of a rate matrix, `cell` pixels per entry; white is 1.
pub fn confusion_pgm(rates: &RateMatrix, cell: usize) -> Pgm {
    let n = rates.len();
    let side = n * cell;
    let mut values = vec![0.0; side * side];
    for (r, row) in values.chunks_mut(side).enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = rates[r / cell][c / cell].clamp(0.0, 1.0);
        }
    }
    Pgm::from_unit(side, side, &values)
}
