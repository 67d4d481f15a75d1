//! Result files: per-student JSON, line-delimited instance dumps, and the
//! aggregate CSV tables, all carrying a versioned schema header.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::config::ExperimentConfig;
use super::student::{StudentInstance, StudentResult};
use super::suite::{CellResult, SuiteResult};
use super::HarnessError;

pub const CSV_SCHEMA_HEADER: &str = "# prefelicit csv schema v1";

/// Writes the resolved configuration and the generated instances
/// (one JSON document per student, line-delimited).
pub fn write_run_inputs(
    out_dir: &Path,
    cfg: &ExperimentConfig,
    instances: &[StudentInstance],
) -> Result<(), HarnessError> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("config.toml"), cfg.to_toml())?;
    let mut file = fs::File::create(out_dir.join("instances.jsonl"))?;
    for instance in instances {
        serde_json::to_writer(&mut file, instance)?;
        file.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes one student's full result and, when present, its training log.
pub fn write_student_result(out_dir: &Path, result: &StudentResult) -> Result<(), HarnessError> {
    let dir = out_dir.join("students");
    fs::create_dir_all(&dir)?;
    let path = dir.join(format!("student_{:04}.json", result.student));
    let mut file = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut file, result)?;
    file.write_all(b"\n")?;

    if !result.training_log.is_empty() {
        let tdir = out_dir.join("training");
        fs::create_dir_all(&tdir)?;
        let mut tfile =
            fs::File::create(tdir.join(format!("student_{:04}.jsonl", result.student)))?;
        for record in &result.training_log {
            serde_json::to_writer(&mut tfile, record)?;
            tfile.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// True when a completed result for this student already exists, enabling
/// resume after interrupted runs.
pub fn student_result_exists(out_dir: &Path, student: usize) -> bool {
    out_dir
        .join("students")
        .join(format!("student_{student:04}.json"))
        .is_file()
}

pub fn read_student_result(
    out_dir: &Path,
    student: usize,
) -> Result<StudentResult, HarnessError> {
    let path = out_dir
        .join("students")
        .join(format!("student_{student:04}.json"));
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Per-student summary table.
pub fn write_summary_csv(out_dir: &Path, results: &[StudentResult]) -> Result<(), HarnessError> {
    let mut file = fs::File::create(out_dir.join("summary.csv"))?;
    writeln!(file, "{CSV_SCHEMA_HEADER}")?;
    writeln!(
        file,
        "student,final_normalized_value,gui_true_value,optimal_true_value,proxy_accuracy,fallback_queries,mae_c_before,mae_c_after"
    )?;
    for r in results {
        let mae = |ms: &[super::metrics::QuantileMetrics]| {
            ms.iter()
                .find(|m| m.quantile == 1.0)
                .map(|m| m.metrics.mae_c)
        };
        writeln!(
            file,
            "{},{},{},{},{},{},{},{}",
            r.student,
            r.final_normalized_value,
            r.gui_true_value,
            r.optimal_true_value,
            fmt_opt(r.proxy_accuracy),
            r.fallback_queries,
            fmt_opt(mae(&r.metrics_before)),
            fmt_opt(mae(&r.metrics_after)),
        )?;
    }
    Ok(())
}

/// Per-grid-point curve data for value-vs-queries plots.
pub fn write_curves_csv(
    out_dir: &Path,
    cell: &str,
    results: &[StudentResult],
    append: bool,
) -> Result<(), HarnessError> {
    let path = out_dir.join("curves.csv");
    let fresh = !append || !path.exists();
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    if fresh {
        writeln!(file, "{CSV_SCHEMA_HEADER}")?;
        writeln!(file, "cell,student,cqs,normalized_value,mae_c")?;
    }
    for r in results {
        for g in &r.grid {
            writeln!(
                file,
                "{},{},{},{},{}",
                cell, r.student, g.cqs, g.normalized_value, g.mae_c
            )?;
        }
    }
    Ok(())
}

/// The per-cell aggregate table in the shape of the published results:
/// mean value with CI, percent better/worse, p-value, accuracy.
pub fn write_suite_csv(out_dir: &Path, result: &SuiteResult) -> Result<(), HarnessError> {
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("suite_{}.csv", result.suite));
    let mut file = fs::File::create(path)?;
    writeln!(file, "{CSV_SCHEMA_HEADER}")?;
    writeln!(
        file,
        "cell,students,mean_normalized_value,ci95,pct_better,pct_worse,p_value,mean_proxy_accuracy,mean_mae_c_before,mean_mae_c_after"
    )?;
    for cell in &result.cells {
        writeln!(
            file,
            "{},{},{},{},{},{},{},{},{},{}",
            cell.label,
            cell.students,
            cell.mean_normalized_value,
            cell.ci95,
            cell.pct_better,
            cell.pct_worse,
            cell.p_value,
            fmt_opt(cell.mean_proxy_accuracy),
            cell.mean_mae_c_before,
            cell.mean_mae_c_after,
        )?;
    }
    Ok(())
}

/// Reads a suite CSV back (schema-header line tolerated).
pub fn read_suite_csv(path: &Path) -> Result<Vec<CellResult>, HarnessError> {
    let file = fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let mut cells = Vec::new();
    let mut header_seen = false;
    while let Some(line) = lines.next().transpose()? {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 10 {
            continue;
        }
        let parse = |s: &str| s.parse::<f64>().unwrap_or(f64::NAN);
        cells.push(CellResult {
            label: fields[0].to_string(),
            students: fields[1].parse().unwrap_or(0),
            mean_normalized_value: parse(fields[2]),
            ci95: parse(fields[3]),
            pct_better: parse(fields[4]),
            pct_worse: parse(fields[5]),
            p_value: parse(fields[6]),
            mean_proxy_accuracy: fields[7].parse().ok(),
            mean_mae_c_before: parse(fields[8]),
            mean_mae_c_after: parse(fields[9]),
        });
    }
    Ok(cells)
}

/// Writes everything a suite run produces.
pub fn write_suite_outputs(
    out_dir: &Path,
    cfg: &ExperimentConfig,
    instances: &[StudentInstance],
    result: &SuiteResult,
) -> Result<(), HarnessError> {
    write_run_inputs(out_dir, cfg, instances)?;
    write_suite_csv(out_dir, result)?;
    let _ = fs::remove_file(out_dir.join("curves.csv"));
    for (cell, students) in result.cells.iter().zip(&result.per_student) {
        write_curves_csv(out_dir, &cell.label, students, true)?;
    }
    // Per-student detail for the first cell only would hide the rest; dump
    // every cell into its own directory.
    for (cell, students) in result.cells.iter().zip(&result.per_student) {
        let cell_dir = out_dir.join("cells").join(sanitize(&cell.label));
        fs::create_dir_all(&cell_dir)?;
        for student in students {
            write_student_result(&cell_dir, student)?;
        }
        write_summary_csv(&cell_dir, students)?;
    }
    Ok(())
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

/// Renders a suite table to stdout.
pub fn print_suite_table(result: &SuiteResult) {
    println!("suite: {}", result.suite);
    println!(
        "{:<22} {:>4} {:>10} {:>8} {:>8} {:>8} {:>12} {:>9}",
        "cell", "n", "value", "ci95", "%better", "%worse", "p", "accuracy"
    );
    for c in &result.cells {
        println!(
            "{:<22} {:>4} {:>10.2} {:>8.2} {:>8.1} {:>8.1} {:>12.3e} {:>9}",
            c.label,
            c.students,
            c.mean_normalized_value,
            c.ci95,
            c.pct_better,
            c.pct_worse,
            c.p_value,
            c.mean_proxy_accuracy
                .map(|a| format!("{:.3}", a))
                .unwrap_or_else(|| "-".into()),
        );
    }
}

#[cfg(test)]
mod tests {
    use super::super::suite::Suite;
    use super::*;

    #[test]
    fn suite_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let result = SuiteResult {
            suite: Suite::AccuracyGrid,
            cells: vec![CellResult {
                label: "accuracy=0.7".into(),
                students: 50,
                mean_normalized_value: 112.5,
                ci95: 3.25,
                pct_better: 80.0,
                pct_worse: 18.0,
                p_value: 1.2e-8,
                mean_proxy_accuracy: Some(0.699),
                mean_mae_c_before: 44.0,
                mean_mae_c_after: 31.0,
            }],
            per_student: vec![vec![]],
        };
        write_suite_csv(dir.path(), &result).unwrap();
        let path = dir.path().join("suite_accuracy_grid.csv");
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(CSV_SCHEMA_HEADER));
        let cells = read_suite_csv(&path).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].label, "accuracy=0.7");
        assert_eq!(cells[0].students, 50);
        assert!((cells[0].mean_normalized_value - 112.5).abs() < 1e-12);
        assert!((cells[0].p_value - 1.2e-8).abs() < 1e-20);
    }

    #[test]
    fn sanitize_labels() {
        assert_eq!(sanitize("accuracy=0.7"), "accuracy_0.7");
        assert_eq!(sanitize("loss=gce"), "loss_gce");
    }
}
