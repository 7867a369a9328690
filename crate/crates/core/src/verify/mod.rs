//! Pass/fail reports comparing measured quantities with bounds from [`crate::bounds`].

mod calibrate;
mod convergence;
mod harnack;
mod lyh;
pub mod svg;

use std::fmt::Write as _;

pub use calibrate::{
    epsilon_ladder, grid_refinement, EpsLadderRow, EpsilonLadder, GridRefinement, RefinementRow,
};
pub use convergence::{convergence_report, h2_seminorm_sq, ConvergenceReport, ConvergenceRow};
pub use harnack::{
    harnack_continuous, ContinuousHarnack, DriftField, HarnackOptions, HarnackRow, PathAction,
};
pub use lyh::{
    lipschitz_check, lyh_continuous, lyh_jko, measured_lambda0, Lambda0Mode, LyhJkoReport,
    HESSIAN_TOL,
};

use crate::torus::io::fmt_f64;

/// One inequality check; `margin` is positive when the inequality holds.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckRow {
    pub id: String,
    pub t: f64,
    pub measured: f64,
    pub bound: f64,
    pub margin: f64,
    pub slack: f64,
}

impl CheckRow {
    /// Row for `measured >= bound`.
    pub fn lower(id: impl Into<String>, t: f64, measured: f64, bound: f64, slack: f64) -> Self {
        Self { id: id.into(), t, measured, bound, margin: measured - bound, slack }
    }

    /// Row for `measured <= bound`.
    pub fn upper(id: impl Into<String>, t: f64, measured: f64, bound: f64, slack: f64) -> Self {
        Self { id: id.into(), t, measured, bound, margin: bound - measured, slack }
    }

    pub fn pass(&self) -> bool {
        self.margin + self.slack >= 0.0
    }
}

/// A list of checks with a name and optional sampling seed.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Report {
    pub name: String,
    pub seed: Option<u64>,
    pub rows: Vec<CheckRow>,
}

/// Column header of [`Report::to_csv`].
pub const REPORT_COLUMNS: &str = "id,t,measured,bound,margin,slack,pass";

impl Report {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), seed: None, rows: Vec::new() }
    }

    pub fn pass(&self) -> bool {
        self.rows.iter().all(CheckRow::pass)
    }

    pub fn pass_count(&self) -> usize {
        self.rows.iter().filter(|r| r.pass()).count()
    }

    pub fn pass_rate(&self) -> f64 {
        if self.rows.is_empty() {
            return 1.0;
        }
        self.pass_count() as f64 / self.rows.len() as f64
    }

    /// Smallest margin (`+inf` for an empty report).
    pub fn worst_margin(&self) -> f64 {
        self.rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min)
    }

    pub fn failing(&self) -> impl Iterator<Item = &CheckRow> {
        self.rows.iter().filter(|r| !r.pass())
    }

    /// CSV with a `# report=<name> seed=<seed>` header line.
    pub fn to_csv(&self) -> String {
        let mut s = format!("# report={}", self.name);
        if let Some(seed) = self.seed {
            let _ = write!(s, " seed={seed}");
        }
        s.push('\n');
        s.push_str(REPORT_COLUMNS);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.id,
                fmt_f64(r.t),
                fmt_f64(r.measured),
                fmt_f64(r.bound),
                fmt_f64(r.margin),
                fmt_f64(r.slack),
                r.pass()
            );
        }
        s
    }

    pub fn summary(&self) -> String {
        format!(
            "{}: {} ({}/{} rows pass), worst margin {:.3e}",
            self.name,
            if self.pass() { "PASS" } else { "FAIL" },
            self.pass_count(),
            self.rows.len(),
            self.worst_margin()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slack_rescues_small_violations() {
        let r = CheckRow::upper("a", 0.0, 1.01, 1.0, 0.02);
        assert!(r.pass());
        assert!(!CheckRow::lower("b", 0.0, -1.0, 0.0, 0.5).pass());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut rep = Report::new("demo");
        rep.seed = Some(7);
        rep.rows.push(CheckRow::lower("x", 0.5, 1.0, 0.0, 0.0));
        let csv = rep.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# report=demo seed=7");
        assert_eq!(lines[1], REPORT_COLUMNS);
        assert!(lines[2].ends_with(",true"));
    }
}
