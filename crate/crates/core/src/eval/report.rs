//! Evaluation artifacts: per-attempt CSV, JSON summary and text tables.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::locomotion::LocomotionResult;
use super::stats::MeanStderr;
use super::success::SuccessResult;
use crate::error::{Error, Result};

/// How a grid cell is printed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellUnit {
    Percent,
    Metres,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub value: MeanStderr,
    pub unit: CellUnit,
}

impl Cell {
    pub fn render(&self) -> String {
        match self.unit {
            CellUnit::Percent => self.value.percent_cell(),
            CellUnit::Metres => format!("{:.2} ± {:.2}", self.value.mean, self.value.stderr),
        }
    }
}

/// A rows × columns table; `None` cells are pending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub title: String,
    pub environment: String,
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub cells: Vec<Vec<Option<Cell>>>,
}

impl Grid {
    pub fn empty(title: &str, environment: &str, rows: &[&str], columns: &[&str]) -> Self {
        Self {
            title: title.into(),
            environment: environment.into(),
            rows: rows.iter().map(|s| s.to_string()).collect(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            cells: vec![vec![None; columns.len()]; rows.len()],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), self.columns.len())
    }

    pub fn pending_cells(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.is_none()).count()
    }

    /// Fixed-width text rendering with a header row.
    pub fn render(&self) -> String {
        let body: Vec<Vec<String>> = self
            .cells
            .iter()
            .map(|r| r.iter().map(|c| c.map_or_else(|| "pending".to_string(), |c| c.render())).collect())
            .collect();
        let first = self.rows.iter().map(|r| r.chars().count()).max().unwrap_or(0);
        let widths: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .map(|(j, h)| body.iter().map(|r| r[j].chars().count()).chain([h.chars().count()]).max().unwrap_or(0))
            .collect();
        let pad = |s: &str, w: usize| format!("{s}{}", " ".repeat(w.saturating_sub(s.chars().count())));
        let mut out = format!("{} [{}]\n", self.title, self.environment);
        let _ = write!(out, "| {} |", pad("", first));
        for (h, w) in self.columns.iter().zip(&widths) {
            let _ = write!(out, " {} |", pad(h, *w));
        }
        out.push('\n');
        for (name, row) in self.rows.iter().zip(&body) {
            let _ = write!(out, "| {} |", pad(name, first));
            for (c, w) in row.iter().zip(&widths) {
                let _ = write!(out, " {} |", pad(c, *w));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessEntry {
    pub environment: String,
    pub task: String,
    pub config: String,
    pub checkpoints: Vec<String>,
    pub result: SuccessResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocomotionEntry {
    pub environment: String,
    pub variant: String,
    pub checkpoints: Vec<String>,
    pub result: LocomotionResult,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub proxy_seed: u64,
    pub success: Vec<SuccessEntry>,
    pub locomotion: Vec<LocomotionEntry>,
    pub grids: Vec<Grid>,
    /// Runs that still have to be trained before every cell can be filled.
    pub pending: Vec<String>,
}

/// Aggregated view written to `summary.json`.
#[derive(Serialize)]
struct Summary<'a> {
    seed: u64,
    proxy_seed: u64,
    success: Vec<SummaryRow<'a>>,
    locomotion: Vec<LocomotionSummaryRow<'a>>,
    grids: &'a [Grid],
    pending: &'a [String],
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    environment: &'a str,
    task: &'a str,
    config: &'a str,
    per_model: &'a [f64],
    mean: f64,
    stderr: f64,
    checkpoints: &'a [String],
}

#[derive(Serialize)]
struct LocomotionSummaryRow<'a> {
    environment: &'a str,
    variant: &'a str,
    distance: MeanStderr,
    fall_rate: MeanStderr,
    checkpoints: &'a [String],
}

impl EvalReport {
    pub const SUCCESS_CSV_HEADER: &'static str = "environment,task,config,model,attempt,variant,success,task_return";
    pub const LOCOMOTION_CSV_HEADER: &'static str = "environment,variant,model,trial,distance,fell";

    /// One row per environment × task × config × model × attempt.
    pub fn success_csv(&self) -> String {
        let mut out = format!("{}\n", Self::SUCCESS_CSV_HEADER);
        for e in &self.success {
            for a in &e.result.attempts {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    e.environment,
                    e.task,
                    e.config,
                    a.model,
                    a.attempt,
                    a.variant.name(),
                    u8::from(a.success),
                    a.task_return
                );
            }
        }
        out
    }

    pub fn locomotion_csv(&self) -> String {
        let mut out = format!("{}\n", Self::LOCOMOTION_CSV_HEADER);
        for e in &self.locomotion {
            for (m, trials) in e.result.trials.iter().enumerate() {
                for (j, t) in trials.iter().enumerate() {
                    let _ = writeln!(out, "{},{},{m},{j},{},{}", e.environment, e.variant, t.distance, u8::from(t.fell));
                }
            }
        }
        out
    }

    pub fn summary_json(&self) -> String {
        let summary = Summary {
            seed: self.seed,
            proxy_seed: self.proxy_seed,
            success: self
                .success
                .iter()
                .map(|e| SummaryRow {
                    environment: &e.environment,
                    task: &e.task,
                    config: &e.config,
                    per_model: &e.result.per_model,
                    mean: e.result.rate.mean,
                    stderr: e.result.rate.stderr,
                    checkpoints: &e.checkpoints,
                })
                .collect(),
            locomotion: self
                .locomotion
                .iter()
                .map(|e| LocomotionSummaryRow {
                    environment: &e.environment,
                    variant: &e.variant,
                    distance: e.result.distance,
                    fall_rate: e.result.fall_rate,
                    checkpoints: &e.checkpoints,
                })
                .collect(),
            grids: &self.grids,
            pending: &self.pending,
        };
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"
    }

    /// Every grid, then the pending-run listing.
    pub fn render_tables(&self) -> String {
        let mut out = String::new();
        for g in &self.grids {
            out.push_str(&g.render());
            out.push('\n');
        }
        if !self.pending.is_empty() {
            let _ = writeln!(out, "pending runs ({}):", self.pending.len());
            for p in &self.pending {
                let _ = writeln!(out, "  {p}");
            }
        }
        out
    }

    /// Writes `success.csv`, `locomotion.csv` (when present), `summary.json`
    /// and `tables.txt` into `dir`; returns the written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = vec![("summary.json", self.summary_json()), ("tables.txt", self.render_tables())];
        if !self.success.is_empty() {
            files.push(("success.csv", self.success_csv()));
        }
        if !self.locomotion.is_empty() {
            files.push(("locomotion.csv", self.locomotion_csv()));
        }
        let mut written = Vec::new();
        for (name, body) in files {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        written.sort();
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::success::AttemptOutcome;
    use crate::tasks::EvalVariant;

    fn entry() -> SuccessEntry {
        let attempts: Vec<AttemptOutcome> = (0..3)
            .flat_map(|m| {
                (0..10).map(move |j| AttemptOutcome {
                    model: m,
                    attempt: j,
                    variant: EvalVariant::for_attempt(j),
                    success: j < 7 + usize::from(m == 1),
                    task_return: -1.5,
                })
            })
            .collect();
        SuccessEntry {
            environment: "proxy".into(),
            task: "push".into(),
            config: "hier-sim2real".into(),
            checkpoints: vec![],
            result: SuccessResult {
                attempts,
                per_model: vec![0.7, 0.8, 0.7],
                rate: MeanStderr::of(&[0.7, 0.8, 0.7]),
            },
        }
    }

    #[test]
    fn csv_has_one_row_per_attempt() {
        let report = EvalReport {
            success: vec![entry()],
            ..EvalReport::default()
        };
        let csv = report.success_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], EvalReport::SUCCESS_CSV_HEADER);
        assert_eq!(lines.len(), 31);
        assert_eq!(lines[1], "proxy,push,hier-sim2real,0,0,left,1,-1.5");
        let json: serde_json::Value = serde_json::from_str(&report.summary_json()).unwrap();
        assert!((json["success"][0]["mean"].as_f64().unwrap() - 0.7333333333333334).abs() < 1e-12);
    }

    #[test]
    fn grid_rendering_marks_pending() {
        let mut g = Grid::empty("Success", "proxy", &["Push"], &["A", "B"]);
        g.cells[0][0] = Some(Cell {
            value: MeanStderr::of(&[0.7, 0.8, 0.7]),
            unit: CellUnit::Percent,
        });
        let text = g.render();
        assert!(text.contains("73.3 ± 3.3%"));
        assert!(text.contains("pending"));
        assert_eq!(g.pending_cells(), 1);
        assert_eq!(g.shape(), (1, 2));
    }
}
