//! CSV metrics files and side-by-side comparison tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::run::{aggregate, median, RunMetrics, Summary};

pub const COLUMNS: [&str; 13] = [
    "run_index",
    "planner",
    "map",
    "robots",
    "seed",
    "plan_time_s",
    "run_time_s",
    "avg_path_length",
    "total_nodes",
    "valid_nodes",
    "invalid_nodes",
    "collisions",
    "arrived",
];

/// `run_index` value of the aggregate row.
pub const AGGREGATE_LABEL: &str = "aggregate";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{}: {reason}", path.display())]
    Io { path: PathBuf, reason: String },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

fn cell(s: Option<Summary>) -> String {
    match s {
        Some(s) => format!("{}±{}", s.mean, s.std),
        None => "-".to_string(),
    }
}

/// Renders the header, one row per run and, when there is at least one run,
/// an aggregate row of `mean±std` cells over the successful runs whose
/// `arrived` cell reads `failures=F`.
pub fn csv_string(rows: &[RunMetrics]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.run_index.to_string(),
            r.planner.clone(),
            r.map.clone(),
            r.robots.to_string(),
            r.seed.to_string(),
            r.plan_time.to_string(),
            r.run_time.to_string(),
            r.avg_path_length.to_string(),
            r.total_nodes.to_string(),
            r.valid_nodes.to_string(),
            r.invalid_nodes.to_string(),
            r.collisions.to_string(),
            r.arrived.to_string(),
        ])
        .expect("in-memory write");
    }
    if let Some(first) = rows.first() {
        let agg = aggregate(rows);
        w.write_record([
            AGGREGATE_LABEL.to_string(),
            first.planner.clone(),
            first.map.clone(),
            first.robots.to_string(),
            first.seed.to_string(),
            cell(agg.plan_time),
            cell(agg.run_time),
            cell(agg.avg_path_length),
            cell(agg.total_nodes),
            cell(agg.valid_nodes),
            cell(agg.invalid_nodes),
            cell(agg.collisions),
            format!("failures={}", agg.failures),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

pub fn write_csv(rows: &[RunMetrics], destination: &Path) -> Result<(), ReportError> {
    let io = |e: std::io::Error| ReportError::Io {
        path: destination.to_path_buf(),
        reason: e.to_string(),
    };
    if let Some(dir) = destination.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(destination, csv_string(rows)).map_err(io)
}

/// Parses the per-run rows of a metrics CSV, skipping the aggregate row.
/// The failure reason is not stored in the file; runs that did not arrive
/// come back with a generic one.
pub fn parse_csv(text: &str) -> Result<Vec<RunMetrics>, ReportError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| ReportError::Parse {
        line: 1,
        reason: e.to_string(),
    })?;
    if header.iter().ne(COLUMNS) {
        return Err(ReportError::Parse {
            line: 1,
            reason: format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| ReportError::Parse {
            line,
            reason: e.to_string(),
        })?;
        if &rec[0] == AGGREGATE_LABEL {
            continue;
        }
        fn num<T: std::str::FromStr>(s: &str, col: &str, line: usize) -> Result<T, ReportError> {
            s.parse().map_err(|_| ReportError::Parse {
                line,
                reason: format!("bad {col} value {s:?}"),
            })
        }
        let arrived: bool = num(&rec[12], "arrived", line)?;
        rows.push(RunMetrics {
            run_index: num(&rec[0], "run_index", line)?,
            planner: rec[1].to_string(),
            map: rec[2].to_string(),
            robots: num(&rec[3], "robots", line)?,
            seed: num(&rec[4], "seed", line)?,
            plan_time: num(&rec[5], "plan_time_s", line)?,
            run_time: num(&rec[6], "run_time_s", line)?,
            avg_path_length: num(&rec[7], "avg_path_length", line)?,
            total_nodes: num(&rec[8], "total_nodes", line)?,
            valid_nodes: num(&rec[9], "valid_nodes", line)?,
            invalid_nodes: num(&rec[10], "invalid_nodes", line)?,
            collisions: num(&rec[11], "collisions", line)?,
            arrived,
            failure: (!arrived).then(|| "did not arrive".to_string()),
        });
    }
    Ok(rows)
}

/// Four-metric table comparing two batches: mean ± std and median over the
/// successful runs of each.
pub fn compare_table(label_a: &str, a: &[RunMetrics], label_b: &str, b: &[RunMetrics]) -> String {
    type Metric = (&'static str, fn(&RunMetrics) -> f64);
    let metrics: [Metric; 4] = [
        ("plan_time", |r| r.plan_time),
        ("run_time", |r| r.run_time),
        ("path_length", |r| r.avg_path_length),
        ("nodes", |r| r.total_nodes as f64),
    ];
    let describe = |rows: &[RunMetrics], f: fn(&RunMetrics) -> f64| {
        let vals: Vec<f64> = rows.iter().filter(|r| r.succeeded()).map(f).collect();
        match (Summary::of(&vals), median(&vals)) {
            (Some(s), Some(m)) => format!("{:.4} ± {:.4} (median {:.4})", s.mean, s.std, m),
            _ => "-".to_string(),
        }
    };
    let mut cells = vec![["metric".to_string(), label_a.to_string(), label_b.to_string()]];
    for (name, f) in metrics {
        cells.push([name.to_string(), describe(a, f), describe(b, f)]);
    }
    let fa = a.iter().filter(|r| !r.succeeded()).count();
    let fb = b.iter().filter(|r| !r.succeeded()).count();
    cells.push(["failures".to_string(), fa.to_string(), fb.to_string()]);

    let widths: Vec<usize> = (0..3)
        .map(|c| cells.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in cells.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:<w0$}  {:<w1$}  {:<w2$}",
            row[0],
            row[1],
            row[2],
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2]
        );
        if i == 0 {
            let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 4));
        }
    }
    out
}
