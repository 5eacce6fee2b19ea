//! Deterministic emission of experiment reports.
//!
//! CSV: one row per (scheme, s, metric, mean, std). JSON: nested by
//! scheme -> s -> metric, plus the run metadata and full-data baseline.
//! Floats are written with 17 significant digits so parsing recovers the
//! exact f64; wall-time diagnostics are deliberately not emitted, keeping
//! repeated runs byte-identical.

use crate::analysis::MetricsRecord;
use crate::experiment::{CellStats, ExperimentReport};
use crate::sketch::SamplingScheme;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("failed to write report: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed report JSON: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    pub fn parse(text: &str) -> Option<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "csv" => Some(ReportFormat::Csv),
            "json" => Some(ReportFormat::Json),
            _ => None,
        }
    }
}

/// 17 significant digits; round-trips any finite f64 exactly.
fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn json_float(v: f64) -> String {
    if v.is_finite() {
        fmt_float(v)
    } else {
        "null".to_string()
    }
}

/// Renders the report to a string in the requested format.
pub fn render_report(report: &ExperimentReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Json => render_json(report),
    }
}

/// Renders and writes the report file.
pub fn emit_report(
    report: &ExperimentReport,
    format: ReportFormat,
    path: &Path,
) -> Result<(), ReportError> {
    std::fs::write(path, render_report(report, format))?;
    Ok(())
}

fn render_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("scheme,s,metric,mean,std\n");
    for cell in &report.cells {
        let means = cell.mean.as_array();
        let stds = cell.std.as_array();
        for (name, (mean, std)) in MetricsRecord::FIELD_NAMES
            .iter()
            .zip(means.into_iter().zip(stds))
        {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                cell.scheme.label(),
                cell.sample_size,
                name,
                fmt_float(mean),
                fmt_float(std)
            );
        }
    }
    out
}

/// Cells grouped by scheme in first-appearance order.
fn grouped(cells: &[CellStats]) -> Vec<(SamplingScheme, Vec<&CellStats>)> {
    let mut groups: Vec<(SamplingScheme, Vec<&CellStats>)> = Vec::new();
    for cell in cells {
        match groups.iter_mut().find(|(s, _)| *s == cell.scheme) {
            Some((_, list)) => list.push(cell),
            None => groups.push((cell.scheme, vec![cell])),
        }
    }
    groups
}

fn render_json(report: &ExperimentReport) -> String {
    let mut out = String::from("{\n");
    let _ = writeln!(out, "  \"meta\": {{");
    let _ = writeln!(out, "    \"n\": {},", report.n);
    let _ = writeln!(out, "    \"d\": {},", report.d);
    let _ = writeln!(out, "    \"repetitions\": {},", report.repetitions);
    let _ = writeln!(out, "    \"seed\": {}", report.seed);
    let _ = writeln!(out, "  }},");
    let _ = writeln!(out, "  \"baseline\": {{");
    let _ = writeln!(
        out,
        "    \"misclass_rate\": {},",
        json_float(report.baseline_misclass_rate)
    );
    let _ = writeln!(
        out,
        "    \"discrepancy\": {},",
        json_float(report.baseline_discrepancy)
    );
    let _ = writeln!(
        out,
        "    \"negative_log_likelihood\": {},",
        json_float(report.baseline_nll)
    );
    let _ = writeln!(out, "    \"iterations\": {}", report.baseline_iterations);
    let _ = writeln!(out, "  }},");
    let _ = writeln!(out, "  \"schemes\": {{");

    let groups = grouped(&report.cells);
    for (g_idx, (scheme, cells)) in groups.iter().enumerate() {
        let _ = writeln!(out, "    \"{}\": {{", scheme.label());
        for (c_idx, cell) in cells.iter().enumerate() {
            let _ = writeln!(out, "      \"{}\": {{", cell.sample_size);
            let _ = writeln!(out, "        \"repetitions\": {},", cell.repetitions);
            let _ = writeln!(
                out,
                "        \"failed_repetitions\": {},",
                cell.failed_repetitions
            );
            let _ = writeln!(out, "        \"metrics\": {{");
            let means = cell.mean.as_array();
            let stds = cell.std.as_array();
            for (m_idx, (name, (mean, std))) in MetricsRecord::FIELD_NAMES
                .iter()
                .zip(means.into_iter().zip(stds))
                .enumerate()
            {
                let comma = if m_idx + 1 < MetricsRecord::FIELD_NAMES.len() {
                    ","
                } else {
                    ""
                };
                let _ = writeln!(
                    out,
                    "          \"{}\": {{ \"mean\": {}, \"std\": {} }}{}",
                    name,
                    json_float(mean),
                    json_float(std),
                    comma
                );
            }
            let _ = writeln!(out, "        }}");
            let comma = if c_idx + 1 < cells.len() { "," } else { "" };
            let _ = writeln!(out, "      }}{comma}");
        }
        let comma = if g_idx + 1 < groups.len() { "," } else { "" };
        let _ = writeln!(out, "    }}{comma}");
    }
    let _ = writeln!(out, "  }}");
    out.push_str("}\n");
    out
}

/// Parses a JSON report back into an [`ExperimentReport`]. Wall-time fields
/// are not serialized and come back as zero.
pub fn parse_json_report(text: &str) -> Result<ExperimentReport, ReportError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ReportError::Malformed(e.to_string()))?;
    let bad = |msg: &str| ReportError::Malformed(msg.to_string());

    let meta = value.get("meta").ok_or_else(|| bad("missing meta"))?;
    let get_u64 = |obj: &serde_json::Value, key: &str| -> Result<u64, ReportError> {
        obj.get(key)
            .and_then(|v| v.as_u64())
            .ok_or_else(|| bad(&format!("missing integer field '{key}'")))
    };
    let get_f64 = |obj: &serde_json::Value, key: &str| -> Result<f64, ReportError> {
        let v = obj
            .get(key)
            .ok_or_else(|| bad(&format!("missing float field '{key}'")))?;
        if v.is_null() {
            Ok(f64::NAN)
        } else {
            v.as_f64()
                .ok_or_else(|| bad(&format!("field '{key}' is not a number")))
        }
    };

    let baseline = value
        .get("baseline")
        .ok_or_else(|| bad("missing baseline"))?;
    let schemes = value
        .get("schemes")
        .and_then(|v| v.as_object())
        .ok_or_else(|| bad("missing schemes object"))?;

    let mut cells = Vec::new();
    for (scheme_label, sizes) in schemes {
        let scheme = SamplingScheme::parse(scheme_label)
            .ok_or_else(|| bad(&format!("unknown scheme '{scheme_label}'")))?;
        let sizes = sizes
            .as_object()
            .ok_or_else(|| bad("scheme entry is not an object"))?;
        for (s_key, cell_val) in sizes {
            let sample_size: usize = s_key
                .parse()
                .map_err(|_| bad(&format!("invalid sample size key '{s_key}'")))?;
            let metrics = cell_val
                .get("metrics")
                .and_then(|v| v.as_object())
                .ok_or_else(|| bad("missing metrics object"))?;
            let mut means = [0.0; 6];
            let mut stds = [0.0; 6];
            for (i, name) in MetricsRecord::FIELD_NAMES.iter().enumerate() {
                let entry = metrics
                    .get(*name)
                    .ok_or_else(|| bad(&format!("missing metric '{name}'")))?;
                means[i] = get_f64(entry, "mean")?;
                stds[i] = get_f64(entry, "std")?;
            }
            cells.push(CellStats {
                scheme,
                sample_size,
                repetitions: get_u64(cell_val, "repetitions")? as usize,
                failed_repetitions: get_u64(cell_val, "failed_repetitions")? as usize,
                mean: MetricsRecord::from_array(means),
                std: MetricsRecord::from_array(stds),
                mean_fit_seconds: 0.0,
            });
        }
    }

    Ok(ExperimentReport {
        n: get_u64(meta, "n")? as usize,
        d: get_u64(meta, "d")? as usize,
        repetitions: get_u64(meta, "repetitions")? as usize,
        seed: get_u64(meta, "seed")?,
        baseline_misclass_rate: get_f64(baseline, "misclass_rate")?,
        baseline_discrepancy: get_f64(baseline, "discrepancy")?,
        baseline_nll: get_f64(baseline, "negative_log_likelihood")?,
        baseline_iterations: get_u64(baseline, "iterations")? as usize,
        cells,
        full_fit_seconds: 0.0,
        leverage_seconds: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{run_experiment, ExperimentConfig};
    use crate::logreg::SolverConfig;
    use crate::synth::gaussian_instance;

    fn small_report() -> ExperimentReport {
        let (x, y) = gaussian_instance(150, 3, false, 0.7, 41);
        let cfg = ExperimentConfig {
            schemes: vec![SamplingScheme::Uniform, SamplingScheme::Leverage],
            sample_sizes: vec![30, 60],
            repetitions: 3,
            seed: 5,
            solver: SolverConfig::default(),
        };
        run_experiment(&x, &y, &cfg).unwrap()
    }

    #[test]
    fn empty_cell_list_gives_header_only_csv() {
        let mut report = small_report();
        report.cells.clear();
        assert_eq!(render_csv(&report), "scheme,s,metric,mean,std\n");
    }

    #[test]
    fn csv_row_count_contract() {
        let mut report = small_report();
        report.cells.truncate(1);
        let csv = render_csv(&report);
        // header + 6 metrics
        assert_eq!(csv.lines().count(), 7);
    }

    #[test]
    fn json_round_trip_preserves_stats() {
        let report = small_report();
        let json = render_json(&report);
        let parsed = parse_json_report(&json).unwrap();
        assert!(report.stats_eq(&parsed));
        // Canonical bytes agree as well.
        assert_eq!(render_json(&parsed), json);
    }

    #[test]
    fn rendering_is_deterministic() {
        let report = small_report();
        assert_eq!(
            render_report(&report, ReportFormat::Csv),
            render_report(&report, ReportFormat::Csv)
        );
        assert_eq!(
            render_report(&report, ReportFormat::Json),
            render_report(&report, ReportFormat::Json)
        );
    }

    #[test]
    fn floats_carry_17_significant_digits() {
        let s = fmt_float(0.1);
        assert_eq!(s, "1.0000000000000001e-1");
        let v: f64 = s.parse().unwrap();
        assert_eq!(v, 0.1);
    }
}
