//! Acceptance criterion for the CLI: repeated `experiment` runs with an
//! identical config must produce byte-identical output files. The library
//! criteria live in the core crate's acceptance suite.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

fn run_experiment(config: &Path) {
    let out = Command::new(env!("CARGO_BIN_EXE_sublogit"))
        .args(["experiment", "--config", config.to_str().unwrap()])
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "experiment failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_dataset(path: &Path, rows: usize) {
    let mut csv = String::from("x1,x2,x3,label\n");
    let mut state = 0x2545F4914F6CDD1Du64;
    let mut next = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    for _ in 0..rows {
        let a = next();
        let b = next();
        let c = next();
        let noise = next();
        let label = if a + 0.5 * b - c + noise > 0.0 {
            "pos"
        } else {
            "neg"
        };
        csv.push_str(&format!("{a:.6},{b:.6},{c:.6},{label}\n"));
    }
    std::fs::write(path, csv).unwrap();
}

#[test]
fn criterion_11_experiment_reports_are_byte_identical() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    write_dataset(&data, 400);

    for format in ["json", "csv"] {
        let report_path = dir.path().join(format!("report.{format}"));
        let config_path = dir.path().join(format!("exp_{format}.conf"));
        std::fs::write(
            &config_path,
            format!(
                "dataset = {}\nlabel_column = label\npositive_label = pos\n\
                 schemes = uniform, leverage, l2s\nsample_sizes = 40, 80, 160\n\
                 repetitions = 5\nseed = 20240\noutput = {}\nformat = {format}\n",
                data.display(),
                report_path.display()
            ),
        )
        .unwrap();

        run_experiment(&config_path);
        let first = std::fs::read(&report_path).unwrap();
        std::fs::remove_file(&report_path).unwrap();
        run_experiment(&config_path);
        let second = std::fs::read(&report_path).unwrap();
        assert_eq!(
            first, second,
            "{format} report bytes differ between identical runs"
        );
        assert!(!first.is_empty());
    }

    let elapsed = start.elapsed().as_secs_f64();
    println!(
        "criterion 11 PASS: repeated experiment runs are byte-identical in both formats ({elapsed:.2}s)"
    );
}
