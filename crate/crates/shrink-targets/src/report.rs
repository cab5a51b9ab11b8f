//! Run artifacts: CSV tables and the JSON run report.
//!
//! Determinism contract: for a fixed config and seed every CSV byte is
//! identical across runs and thread counts. The renderers below are pure
//! functions of the result structs, and floats are printed with Rust's
//! shortest round-trip formatting, a pure function of the bits. The JSON
//! report is exempt only in its wall-clock field.

use std::io;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::stats::{CorrelationSeries, ReturnTimeSeries};
use crate::target::boxdim::LevelCount;
use crate::target::energy::EnergyScan;
use crate::thermo::{InvariantDensity, PressureEstimate};

pub fn energy_csv(scan: &EnergyScan) -> String {
    let mut out = String::from("s,n,I_s,slope,verdict\n");
    for row in &scan.rows {
        // One verdict per s; rows repeat it so the table stands alone.
        let verdict = scan
            .verdicts
            .iter()
            .find(|v| v.s == row.s)
            .expect("every scan row has a verdict for its s");
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.s,
            row.n,
            row.energy,
            verdict.slope,
            verdict.verdict.as_str()
        ));
    }
    out
}

pub fn box_csv(levels: &[LevelCount]) -> String {
    let mut out = String::from("level,delta,count\n");
    for entry in levels {
        let delta = 2f64.powi(-(entry.level as i32));
        out.push_str(&format!(
            "{},{},{}\n",
            entry.level, delta, entry.count
        ));
    }
    out
}

pub fn correlation_csv(series: &CorrelationSeries) -> String {
    let mut out = String::from("lag,value,noise_floor\n");
    for ((lag, value), floor) in series
        .lags
        .iter()
        .zip(&series.values)
        .zip(&series.noise_floors)
    {
        out.push_str(&format!("{lag},{value},{floor}\n"));
    }
    out
}

pub fn returns_csv(series: &ReturnTimeSeries) -> String {
    let mut out = String::from("k,R_k,partial_sum\n");
    for (i, (time, sum)) in
        series.times.iter().zip(&series.partial_sums).enumerate()
    {
        out.push_str(&format!("{},{time},{sum}\n", i + 1));
    }
    out
}

pub fn density_csv(density: &InvariantDensity) -> String {
    let mut out = String::from("bin_left,bin_right,value\n");
    let k = density.values.len() as f64;
    for (i, value) in density.values.iter().enumerate() {
        let left = i as f64 / k;
        let right = (i + 1) as f64 / k;
        out.push_str(&format!("{left},{right},{value}\n"));
    }
    out
}

pub fn pressure_csv(estimate: &PressureEstimate) -> String {
    format!(
        "value,lower,upper,n,bins\n{},{},{},{},{}\n",
        estimate.value,
        estimate.lower,
        estimate.upper,
        estimate.n,
        estimate.bins
    )
}

/// Collects artifact files under one directory. With no directory the
/// writer is a sink: renders are dropped, nothing is recorded, so dry
/// runs stay filesystem-free.
pub struct ArtifactWriter {
    dir: Option<PathBuf>,
    written: Vec<String>,
}

impl ArtifactWriter {
    pub fn new(dir: Option<&Path>) -> ArtifactWriter {
        ArtifactWriter { dir: dir.map(Path::to_path_buf), written: Vec::new() }
    }

    pub fn write(&mut self, name: &str, contents: &str) -> io::Result<()> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(name), contents)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn names(&self) -> &[String] {
        &self.written
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }
}

/// The fixed head of every run report. The runner fills in `results`,
/// `defaults_applied`, `artifacts`, and `wall_ms`. serde_json orders keys
/// alphabetically, so two reports differing only in timing diff on one
/// line.
pub fn skeleton(cfg: &ExperimentConfig) -> Value {
    json!({
        "version": env!("CARGO_PKG_VERSION"),
        "operation": cfg.operation.as_str(),
        "map": cfg.map_label,
        "potential": cfg.potential_label,
        "radius": cfg.radius_label,
        "seed": cfg.seed,
        "precision_bits": cfg.precision_bits,
    })
}

pub fn write_report(dir: &Path, report: &Value) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let text = render_report(report);
    std::fs::write(dir.join("report.json"), text)
}

pub fn render_report(report: &Value) -> String {
    let mut text = serde_json::to_string_pretty(report)
        .expect("reports contain no non-string keys");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Estimator;
    use crate::target::energy::{ScanRow, ScanVerdict, Verdict};

    #[test]
    fn energy_rows_repeat_their_verdict() {
        let scan = EnergyScan {
            rows: vec![
                ScanRow { s: 0.4, n: 64, energy: 1.5 },
                ScanRow { s: 0.4, n: 128, energy: 1.625 },
                ScanRow { s: 0.6, n: 64, energy: 9.0 },
            ],
            verdicts: vec![
                ScanVerdict { s: 0.4, slope: 0.01, verdict: Verdict::Bounded },
                ScanVerdict {
                    s: 0.6,
                    slope: 0.8,
                    verdict: Verdict::Divergent,
                },
            ],
        };
        let csv = energy_csv(&scan);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "s,n,I_s,slope,verdict");
        assert_eq!(lines[1], "0.4,64,1.5,0.01,bounded");
        assert_eq!(lines[2], "0.4,128,1.625,0.01,bounded");
        assert_eq!(lines[3], "0.6,64,9,0.8,divergent");
    }

    #[test]
    fn box_rows_carry_exact_dyadic_widths() {
        let csv = box_csv(&[
            LevelCount { level: 3, count: 8 },
            LevelCount { level: 10, count: 900 },
        ]);
        assert_eq!(
            csv,
            "level,delta,count\n3,0.125,8\n10,0.0009765625,900\n"
        );
    }

    #[test]
    fn correlation_and_return_tables_align_rows() {
        let series = CorrelationSeries {
            lags: vec![0, 1],
            values: vec![0.25, 0.125],
            noise_floors: vec![0.0, 0.0],
            estimator: Estimator::ExactDyadic,
        };
        assert_eq!(
            correlation_csv(&series),
            "lag,value,noise_floor\n0,0.25,0\n1,0.125,0\n"
        );

        let returns = ReturnTimeSeries {
            base_interval: (0.5, 1.0),
            times: vec![3, 1, 4],
            partial_sums: vec![3, 4, 8],
            skipped_starts: 0,
        };
        assert_eq!(
            returns_csv(&returns),
            "k,R_k,partial_sum\n1,3,3\n2,1,4\n3,4,8\n"
        );
    }

    #[test]
    fn density_bins_tile_the_interval() {
        let density = InvariantDensity {
            values: vec![1.0, 1.0, 1.0, 1.0],
            c_h: 1.0,
            iterations: 1,
            residual: 0.0,
        };
        let csv = density_csv(&density);
        let rows: Vec<&str> = csv.lines().skip(1).collect();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0], "0,0.25,1");
        assert_eq!(rows[3], "0.75,1,1");
    }

    #[test]
    fn renders_are_bytewise_reproducible() {
        let series = CorrelationSeries {
            lags: (0..=12).collect(),
            values: (0..=12)
                .map(|n| 0.25 * 0.5f64.powi(n as i32) / 3.0)
                .collect(),
            noise_floors: vec![0.0; 13],
            estimator: Estimator::ExactDyadic,
        };
        assert_eq!(correlation_csv(&series), correlation_csv(&series));
    }

    #[test]
    fn report_json_orders_keys_alphabetically() {
        let value = json!({"zeta": 1, "alpha": 2, "mid": {"b": 1, "a": 2}});
        let text = render_report(&value);
        let alpha = text.find("\"alpha\"").unwrap();
        let zeta = text.find("\"zeta\"").unwrap();
        assert!(alpha < zeta);
        let inner_a = text.find("\"a\"").unwrap();
        let inner_b = text.find("\"b\"").unwrap();
        assert!(inner_a < inner_b);
    }

    #[test]
    fn the_sink_writer_records_nothing() {
        let mut sink = ArtifactWriter::new(None);
        sink.write("energy.csv", "s,n\n").unwrap();
        assert!(sink.names().is_empty());
        assert!(sink.dir().is_none());
    }
}
