//! CSV and metadata writers.

use std::fmt::Write as _;
use std::time::Duration;

use asyncq_core::eval::SpeedupRow;

pub const RESULT_HEADER: &str =
    "checkpoint_iterations,wall_time_ms,samples_drawn,mean_return,flags,sup_gap,threads,seed,algorithm";

pub const BENCHMARK_HEADER: &str = "threads,wall_time_ms,iterations_per_second,samples_per_second";

/// One evaluation checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub checkpoint_iterations: u64,
    pub wall_time: Duration,
    pub samples_drawn: u64,
    pub mean_return: f64,
    pub flags: usize,
    /// `‖v* − v^π‖∞` when a tabular model is available.
    pub sup_gap: Option<f64>,
    pub threads: usize,
    pub seed: u64,
    pub algorithm: &'static str,
}

fn millis(d: Duration) -> String {
    format!("{:.3}", d.as_secs_f64() * 1e3)
}

impl ResultRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.checkpoint_iterations,
            millis(self.wall_time),
            self.samples_drawn,
            self.mean_return,
            self.flags,
            self.sup_gap.map_or_else(String::new, |g| g.to_string()),
            self.threads,
            self.seed,
            self.algorithm
        )
    }
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(RESULT_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

pub fn benchmark_csv(rows: &[SpeedupRow]) -> String {
    let mut out = String::from(BENCHMARK_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.threads,
            millis(r.wall_time),
            r.iterations_per_second,
            r.samples_per_second
        );
    }
    out
}

pub fn meta_text(lines: &[(String, String)]) -> String {
    lines.iter().fold(String::new(), |mut out, (k, v)| {
        let _ = writeln!(out, "{k} = {v}");
        out
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_follow_the_header() {
        let row = ResultRow {
            checkpoint_iterations: 100,
            wall_time: Duration::from_micros(1500),
            samples_drawn: 500,
            mean_return: 12.5,
            flags: 7,
            sup_gap: None,
            threads: 2,
            seed: 9,
            algorithm: "aqlc",
        };
        assert_eq!(
            results_csv(std::slice::from_ref(&row)),
            format!("{RESULT_HEADER}\n100,1.500,500,12.5,7,,2,9,aqlc\n")
        );
        let row = ResultRow {
            sup_gap: Some(0.25),
            ..row
        };
        assert_eq!(row.to_csv().split(',').nth(5), Some("0.25"));
        assert_eq!(RESULT_HEADER.split(',').count(), row.to_csv().split(',').count());
    }

    #[test]
    fn meta_is_key_value_lines() {
        let m = meta_text(&[("L".into(), "5".into()), ("K".into(), "adaptive".into())]);
        assert_eq!(m, "L = 5\nK = adaptive\n");
    }
}
