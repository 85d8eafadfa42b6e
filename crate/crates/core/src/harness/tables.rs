//! Cell grids of the benchmark tables and their text and CSV renderings.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{run_cell_in, thread_pool, ExperimentConfig, ExperimentResult};
use crate::complete::{RankPolicy, SolveConfig};
use crate::error::{Error, Result};
use crate::simulate::GridType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TableId {
    /// Scenarios A and B on a common grid.
    T2,
    /// Matern and Matern plus Scenario A, rank 2.
    T4,
    /// Type-1 grids with variable lengths.
    T5,
    /// Type-2 grids with variable lengths.
    T6,
    /// Scenario A at `K = 25` and `K = 100`.
    T7,
}

impl FromStr for TableId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "T2" => Ok(TableId::T2),
            "T4" => Ok(TableId::T4),
            "T5" => Ok(TableId::T5),
            "T6" => Ok(TableId::T6),
            "T7" => Ok(TableId::T7),
            _ => Err(Error::invalid(format!("unknown table '{s}' (expected T2, T4, T5, T6 or T7)"))),
        }
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// One cell of a table with its position in the printed layout.
#[derive(Debug, Clone, PartialEq)]
pub struct TableCell {
    pub row: String,
    pub col: String,
    pub config: ExperimentConfig,
}

const DELTAS: [f64; 5] = [0.5, 0.6, 0.7, 0.8, 0.9];
const PAIRS: [(f64, f64); 4] = [(0.4, 0.6), (0.5, 0.7), (0.6, 0.8), (0.7, 0.9)];

fn fixed(delta: f64) -> String {
    format!("{delta} ({})", crate::patch::default_delta_prime(delta, delta))
}

/// All cells of a table, in row-major order of the printed layout.
pub fn cells(table: TableId, seed: u64) -> Vec<TableCell> {
    let base = ExperimentConfig { seed, ..ExperimentConfig::default() };
    let mut out = Vec::new();
    match table {
        TableId::T2 => {
            for sc in ["A", "B"] {
                for d in DELTAS {
                    for q in 1..=3 {
                        out.push(TableCell {
                            row: format!("{sc} {}", fixed(d)),
                            col: format!("rank {q}"),
                            config: ExperimentConfig {
                                kernel: format!("scenario{sc}:{q}"),
                                delta1: d,
                                delta2: d,
                                rank_policy: RankPolicy::Fixed(q),
                                ..base.clone()
                            },
                        });
                    }
                }
            }
        }
        TableId::T4 => {
            for nu in [1.5, 2.5] {
                for d in DELTAS {
                    for (plus, rho) in [(false, 0.5), (false, 0.8), (true, 0.5), (true, 0.8)] {
                        let kernel = format!("matern:{nu},{rho},1{}", if plus { "+A2" } else { "" });
                        out.push(TableCell {
                            row: format!("nu={nu} {}", fixed(d)),
                            col: format!("{} rho={rho}", if plus { "M+A" } else { "M" }),
                            config: ExperimentConfig {
                                kernel,
                                delta1: d,
                                delta2: d,
                                rank_policy: RankPolicy::Fixed(2),
                                ..base.clone()
                            },
                        });
                    }
                }
            }
        }
        TableId::T5 | TableId::T6 => {
            let grid_type = if table == TableId::T5 { GridType::Type1 } else { GridType::Type2 };
            for n in [200, 400] {
                for noise in [0.0, 1.0] {
                    for (d1, d2) in PAIRS {
                        for q in 1..=3 {
                            out.push(TableCell {
                                row: format!("n={n} {} ({d1}, {d2})", if noise > 0.0 { "with" } else { "without" }),
                                col: format!("rank {q}"),
                                config: ExperimentConfig {
                                    kernel: format!("scenarioA:{q}"),
                                    n,
                                    delta1: d1,
                                    delta2: d2,
                                    grid_type,
                                    noise_sd: noise,
                                    rank_policy: RankPolicy::Fixed(q),
                                    ..base.clone()
                                },
                            });
                        }
                    }
                }
            }
        }
        TableId::T7 => {
            for k in [25, 100] {
                for d in DELTAS {
                    for q in 1..=3 {
                        out.push(TableCell {
                            row: format!("K={k} {}", fixed(d)),
                            col: format!("rank {q}"),
                            config: ExperimentConfig {
                                kernel: format!("scenarioA:{q}"),
                                k: Some(k),
                                base_resolution: k,
                                delta1: d,
                                delta2: d,
                                rank_policy: RankPolicy::Fixed(q),
                                ..base.clone()
                            },
                        });
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct TableOverrides {
    pub seed: u64,
    pub replications: Option<usize>,
    /// One-based cell indices to run; all when empty.
    pub cells: Vec<usize>,
    pub solver: Option<SolveConfig>,
}

#[derive(Debug, Clone)]
pub struct TableResult {
    pub table: Option<TableId>,
    pub cells: Vec<(TableCell, ExperimentResult)>,
}

/// Runs the selected cells of a table.
pub fn run_table(table: TableId, overrides: &TableOverrides) -> Result<TableResult> {
    let mut all = cells(table, overrides.seed);
    if !overrides.cells.is_empty() {
        if let Some(&bad) = overrides.cells.iter().find(|&&c| c == 0 || c > all.len()) {
            return Err(Error::invalid(format!("{table} has cells 1..={}, got {bad}", all.len())));
        }
        all = overrides.cells.iter().map(|&c| all[c - 1].clone()).collect();
    }
    let pool = thread_pool()?;
    let mut out = Vec::with_capacity(all.len());
    for mut cell in all {
        if let Some(r) = overrides.replications {
            cell.config.replications = r;
        }
        if let Some(s) = &overrides.solver {
            cell.config.solver = s.clone();
        }
        let res = run_cell_in(&cell.config, &pool)?;
        log::info!(
            "{table} {} / {}: median {:.2} in {:.1}s",
            cell.row,
            cell.col,
            res.summary.map_or(f64::NAN, |s| s.median),
            res.wall_time_secs
        );
        out.push((cell, res));
    }
    Ok(TableResult { table: Some(table), cells: out })
}

pub const CSV_HEADER: &str = "scenario,rank,delta1,delta2,n,K,grid_type,noise,median,q1,q3,failures,seed";

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:.4}"))
}

/// CSV line for one result, without the trailing newline.
pub fn csv_row(res: &ExperimentResult) -> String {
    let c = &res.config;
    let s = res.summary;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        c.kernel,
        c.rank_label(),
        c.delta1,
        c.delta2,
        c.n,
        res.k_label(),
        c.grid_type,
        c.noise_sd,
        num(s.map(|q| q.median)),
        num(s.map(|q| q.q1)),
        num(s.map(|q| q.q3)),
        res.failures.len(),
        c.seed
    )
}

impl TableResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for (_, r) in &self.cells {
            out.push_str(&csv_row(r));
            out.push('\n');
        }
        out
    }

    /// Markdown table of `median (q1, q3)` with the layout's rows and columns.
    pub fn to_markdown(&self) -> String {
        let mut rows: Vec<&str> = Vec::new();
        let mut cols: Vec<&str> = Vec::new();
        for (c, _) in &self.cells {
            if !rows.contains(&c.row.as_str()) {
                rows.push(&c.row);
            }
            if !cols.contains(&c.col.as_str()) {
                cols.push(&c.col);
            }
        }
        let mut out = String::new();
        let _ = writeln!(out, "| | {} |", cols.join(" | "));
        let _ = writeln!(out, "|---|{}", "---|".repeat(cols.len()));
        for row in rows {
            let _ = write!(out, "| {row} |");
            for col in &cols {
                let cell = self.cells.iter().find(|(c, _)| c.row == row && c.col == *col);
                let text = match cell.and_then(|(_, r)| r.summary.map(|s| (s, r.failures.len()))) {
                    Some((s, 0)) => format!("{:.0} ({:.0}, {:.0})", s.median, s.q1, s.q3),
                    Some((s, f)) => format!("{:.0} ({:.0}, {:.0}) [{f} failed]", s.median, s.q1, s.q3),
                    None => "-".into(),
                };
                let _ = write!(out, " {text} |");
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_counts() {
        assert_eq!(cells(TableId::T2, 1).len(), 30);
        assert_eq!(cells(TableId::T4, 1).len(), 40);
        assert_eq!(cells(TableId::T5, 1).len(), 48);
        assert_eq!(cells(TableId::T6, 1).len(), 48);
        assert_eq!(cells(TableId::T7, 1).len(), 30);
        for t in [TableId::T2, TableId::T4, TableId::T5, TableId::T6, TableId::T7] {
            for c in cells(t, 1) {
                c.config.validate().unwrap();
            }
        }
    }

    #[test]
    fn table_layouts() {
        let t2 = cells(TableId::T2, 1);
        assert_eq!(t2[0].row, "A 0.5 (0.4)");
        assert_eq!(t2[14].config.kernel, "scenarioA:3");
        assert_eq!(t2[14].config.delta1, 0.9);
        let t6 = cells(TableId::T6, 1);
        let c = t6.iter().find(|c| c.config.n == 400 && c.config.noise_sd > 0.0 && c.config.delta1 == 0.5 && c.col == "rank 2");
        assert!(c.is_some());
        assert_eq!("t4".parse::<TableId>().unwrap(), TableId::T4);
        assert!("T3".parse::<TableId>().is_err());
    }

    #[test]
    fn renders_selected_cells() {
        let o = TableOverrides { seed: 3, replications: Some(3), cells: vec![13], solver: None };
        let res = run_table(TableId::T2, &o).unwrap();
        assert_eq!(res.cells.len(), 1);
        let csv = res.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert!(lines.next().unwrap().starts_with("scenarioA:1,1,0.9,0.9,200,50,common,0,"));
        assert!(res.to_markdown().contains("| A 0.9 (0.8) |"));
        assert!(run_table(TableId::T2, &TableOverrides { cells: vec![31], ..o }).is_err());
    }
}
