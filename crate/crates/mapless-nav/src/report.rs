//! Result tables: one row per evaluated (task, mode, scenario, algorithm,
//! architecture) group, rendered as CSV and as aligned text, plus the raw
//! per-trial JSON lines. All renderings are deterministic for a given input.

use crate::agents::Algo;
use crate::arch::ArchId;
use crate::env::{Mode, Terminal};
use crate::error::{Error, Result};
use crate::eval::{EvalSummary, Task};
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

/// One table line: where the numbers came from plus the numbers.
#[derive(Debug, Clone)]
pub struct TableRow {
    pub task: Task,
    pub mode: Mode,
    pub scenario: String,
    pub algo: Algo,
    pub arch: ArchId,
    pub summary: EvalSummary,
}

impl TableRow {
    fn sort_key(&self) -> (&'static str, &str, &'static str, &'static str, &'static str) {
        (
            self.mode.as_str(),
            &self.scenario,
            self.task.as_str(),
            self.algo.as_str(),
            self.arch.as_str(),
        )
    }

    fn csv_line(&self) -> String {
        let s = &self.summary;
        let distance = match s.mean_distance {
            Some(d) => format!("{:.1}", d * 100.0),
            None => String::new(),
        };
        format!(
            "{},{},{},{},{},{},{:.1},{:.2},{:.2},{}",
            self.task.as_str(),
            self.mode.as_str(),
            self.scenario,
            self.algo.as_str(),
            self.arch.as_str(),
            s.trials,
            s.success_rate * 100.0,
            s.mean_time_s,
            s.std_time_s,
            distance
        )
    }
}

fn sorted(rows: &[TableRow]) -> Result<Vec<&TableRow>> {
    if rows.is_empty() {
        return Err(Error::usage("no evaluation results to tabulate"));
    }
    let mut refs: Vec<&TableRow> = rows.iter().collect();
    refs.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    Ok(refs)
}

pub const CSV_HEADER: &str = "task,mode,scenario,algorithm,arch,trials,success_rate_pct,mean_time_s,std_time_s,mean_distance_pct";

pub fn render_csv(rows: &[TableRow]) -> Result<String> {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in sorted(rows)? {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    Ok(out)
}

fn text_cells(row: &TableRow) -> [String; 8] {
    let s = &row.summary;
    [
        row.task.as_str().to_string(),
        row.mode.as_str().to_string(),
        row.scenario.clone(),
        row.algo.as_str().to_string(),
        row.arch.as_str().to_string(),
        format!("{:.1}%", s.success_rate * 100.0),
        format!("{:.2} ± {:.2} s", s.mean_time_s, s.std_time_s),
        match s.mean_distance {
            Some(d) => format!("{:.1}%", d * 100.0),
            None => "-".to_string(),
        },
    ]
}

const TEXT_HEADER: [&str; 8] =
    ["task", "mode", "scenario", "algorithm", "arch", "rate", "time", "distance"];

fn render_aligned(rows: &[&TableRow]) -> String {
    let mut widths: Vec<usize> = TEXT_HEADER.iter().map(|h| h.len()).collect();
    let grid: Vec<[String; 8]> = rows.iter().map(|r| text_cells(r)).collect();
    for cells in &grid {
        for (w, c) in widths.iter_mut().zip(cells) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let mut put = |cells: &[&str]| {
        let mut line = String::new();
        for (w, c) in widths.iter().zip(cells) {
            if !line.is_empty() {
                line.push_str("  ");
            }
            let _ = write!(line, "{c:<w$}");
        }
        out.push_str(line.trim_end());
        out.push('\n');
    };
    put(&TEXT_HEADER);
    for cells in &grid {
        let refs: Vec<&str> = cells.iter().map(String::as_str).collect();
        put(&refs);
    }
    out
}

pub fn render_text(rows: &[TableRow]) -> Result<String> {
    Ok(render_aligned(&sorted(rows)?))
}

/// Sectioned rendering: one aligned table per (mode, task) present, in the
/// fixed order 2d/goal, 2d/waypoint, 3d/goal, 3d/waypoint.
pub fn render_sections(rows: &[TableRow]) -> Result<String> {
    let all = sorted(rows)?;
    let mut out = String::new();
    for (mode, task) in [
        (Mode::TwoD, Task::Goal),
        (Mode::TwoD, Task::Waypoint),
        (Mode::ThreeD, Task::Goal),
        (Mode::ThreeD, Task::Waypoint),
    ] {
        let section: Vec<&TableRow> = all
            .iter()
            .copied()
            .filter(|r| r.mode == mode && r.task == task)
            .collect();
        if section.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push('\n');
        }
        let _ = writeln!(out, "## {} navigation, {}", task.as_str(), mode.as_str());
        out.push_str(&render_aligned(&section));
    }
    Ok(out)
}

/// Write `table.csv` and `table.txt` under `dir`; the text file uses the
/// sectioned layout when more than one (mode, task) pair is present.
pub fn write_tables(rows: &[TableRow], dir: &Path) -> Result<()> {
    let csv = render_csv(rows)?;
    let mut pairs: Vec<(Mode, Task)> = rows.iter().map(|r| (r.mode, r.task)).collect();
    pairs.sort_by_key(|(m, t)| (m.as_str(), t.as_str()));
    pairs.dedup();
    let text = if pairs.len() > 1 {
        render_sections(rows)?
    } else {
        render_text(rows)?
    };
    for (name, content) in [("table.csv", csv), ("table.txt", text)] {
        let path = dir.join(name);
        fs::write(&path, content)
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TrialLine<'a> {
    task: &'a str,
    mode: &'a str,
    scenario: &'a str,
    algorithm: &'a str,
    arch: &'a str,
    trial: usize,
    success: bool,
    time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    distance_fraction: Option<f64>,
    terminal: Terminal,
}

/// Every trial of every row as one JSON object per line, in table order.
pub fn write_trials_jsonl(rows: &[TableRow], path: &Path) -> Result<()> {
    let rows = sorted(rows)?;
    let mut buf = Vec::new();
    for row in rows {
        for rec in &row.summary.records {
            let line = TrialLine {
                task: row.task.as_str(),
                mode: row.mode.as_str(),
                scenario: &row.scenario,
                algorithm: row.algo.as_str(),
                arch: row.arch.as_str(),
                trial: rec.trial,
                success: rec.success,
                time_s: rec.time_s,
                distance_fraction: rec.distance_fraction,
                terminal: rec.terminal,
            };
            serde_json::to_writer(&mut buf, &line).map_err(|e| Error::Json {
                context: path.display().to_string(),
                source: e,
            })?;
            buf.write_all(b"\n")
                .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::TrialRecord;

    fn summary(task: Task, successes: usize, trials: usize, time: f64) -> EvalSummary {
        let records: Vec<TrialRecord> = (0..trials)
            .map(|trial| TrialRecord {
                trial,
                success: trial < successes,
                time_s: time,
                distance_fraction: match task {
                    Task::Goal => None,
                    Task::Waypoint => Some(if trial < successes { 1.0 } else { 0.5 }),
                },
                terminal: if trial < successes {
                    Terminal::Arrived
                } else {
                    Terminal::Timeout
                },
            })
            .collect();
        let mean_distance = match task {
            Task::Goal => None,
            Task::Waypoint => Some(
                records.iter().filter_map(|r| r.distance_fraction).sum::<f64>()
                    / trials as f64,
            ),
        };
        EvalSummary {
            task,
            trials,
            success_rate: successes as f64 / trials as f64,
            mean_time_s: time,
            std_time_s: 0.0,
            mean_distance,
            records,
        }
    }

    fn row(task: Task, mode: Mode, scenario: &str, algo: Algo, arch: ArchId) -> TableRow {
        TableRow {
            task,
            mode,
            scenario: scenario.into(),
            algo,
            arch,
            summary: summary(task, 10, 10, 10.0),
        }
    }

    #[test]
    fn all_successes_render_as_a_full_rate_row() {
        let rows = [row(Task::Goal, Mode::TwoD, "1", Algo::Ddpg, ArchId::Mlp3)];
        let text = render_text(&rows).unwrap();
        assert!(text.contains("100.0%"), "{text}");
        assert!(text.contains("10.00 ± 0.00 s"), "{text}");
        let csv = render_csv(&rows).unwrap();
        assert_eq!(
            csv,
            format!("{CSV_HEADER}\ngoal,2d,1,ddpg,mlp3,10,100.0,10.00,0.00,\n")
        );
    }

    #[test]
    fn empty_input_is_a_usage_error_not_a_zero_row() {
        assert!(matches!(render_csv(&[]), Err(Error::Usage(_))));
        assert!(matches!(render_text(&[]), Err(Error::Usage(_))));
        assert!(matches!(
            write_trials_jsonl(&[], Path::new("/tmp/unused.jsonl")),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn rows_sort_stably_by_environment_then_algorithm() {
        let rows = [
            row(Task::Goal, Mode::TwoD, "2", Algo::Sac, ArchId::Mlp2),
            row(Task::Goal, Mode::TwoD, "1", Algo::Sac, ArchId::Mlp2),
            row(Task::Goal, Mode::TwoD, "1", Algo::Ddpg, ArchId::Mlp2),
        ];
        let csv = render_csv(&rows).unwrap();
        let order: Vec<&str> = csv
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(3).unwrap())
            .collect();
        assert_eq!(order, ["ddpg", "sac", "sac"]);
        let scenarios: Vec<&str> = csv
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(2).unwrap())
            .collect();
        assert_eq!(scenarios, ["1", "1", "2"]);
    }

    #[test]
    fn waypoint_rows_carry_the_distance_column() {
        let rows = [row(Task::Waypoint, Mode::ThreeD, "1", Algo::Sac, ArchId::Lstm)];
        let csv = render_csv(&rows).unwrap();
        assert!(csv.lines().nth(1).unwrap().ends_with(",100.0"), "{csv}");
        let text = render_text(&rows).unwrap();
        assert!(text.contains("100.0%"));
    }

    #[test]
    fn sections_split_by_mode_and_task_in_fixed_order() {
        let rows = [
            row(Task::Waypoint, Mode::ThreeD, "1", Algo::Sac, ArchId::Mlp2),
            row(Task::Goal, Mode::TwoD, "1", Algo::Ddpg, ArchId::Mlp2),
        ];
        let text = render_sections(&rows).unwrap();
        let goal_at = text.find("## goal navigation, 2d").unwrap();
        let wp_at = text.find("## waypoint navigation, 3d").unwrap();
        assert!(goal_at < wp_at, "{text}");
    }

    #[test]
    fn trial_lines_serialize_one_record_each() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trials.jsonl");
        let rows = [
            row(Task::Goal, Mode::TwoD, "1", Algo::Ddpg, ArchId::Mlp2),
            row(Task::Waypoint, Mode::TwoD, "1", Algo::Ddpg, ArchId::Mlp2),
        ];
        write_trials_jsonl(&rows, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 20);
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v["time_s"].is_number());
            let has_distance = v.get("distance_fraction").is_some();
            assert_eq!(has_distance, v["task"] == "waypoint", "{line}");
        }
    }
}
