//! Evaluation report: classification table, latency table and heatmap.
//!
//! `report.json` schema (version 1):
//!
//! ```text
//! {
//!   "schema_version": 1,
//!   "classification": {
//!     "matrix": {"counts": [[u64; 4]; 4]},        // rows true, cols predicted
//!     "per_class": [{"label", "precision", "recall", "f1", "support",
//!                    "precision_degenerate", "recall_degenerate", "f1_degenerate"}],
//!     "accuracy", "accuracy_degenerate", "correct", "total",
//!     "macro_avg": {"precision", "recall", "f1"},
//!     "weighted_avg": {"precision", "recall", "f1"}
//!   },
//!   "latency": {                                   // each {mean, std, n} or null
//!     "iot_processing", "iot_edge", "edge_processing", "edge_cloud_rtt"
//!   },
//!   "missing_predictions": usize,
//!   "windows_dropped": u64,
//!   "warnings": [string]
//! }
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use usv_core::metrics::{classification_metrics, confusion, latency_stats, ClassificationReport, ConfusionMatrix, SegmentStats};
use usv_core::ImpactLabel;

use super::campaign::{RunLog, TrialRecord};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySection {
    pub iot_processing: Option<SegmentStats>,
    pub iot_edge: Option<SegmentStats>,
    pub edge_processing: Option<SegmentStats>,
    pub edge_cloud_rtt: Option<SegmentStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub classification: ClassificationReport,
    pub latency: LatencySection,
    pub missing_predictions: usize,
    pub windows_dropped: u64,
    pub warnings: Vec<String>,
}

/// Reference confusion matrix for the 50-trial field summary (43 correct).
/// Row totals, diagonal and column totals follow from the summary's supports
/// and precisions; the placement of the seven off-diagonal errors is one
/// consistent choice.
pub fn reference_confusion() -> ConfusionMatrix {
    ConfusionMatrix::from_counts([
        [11, 0, 1, 0], // Bow: 12 trials
        [1, 10, 1, 0], // Port: 12 trials
        [1, 1, 12, 1], // Starboard: 15 trials
        [0, 0, 1, 10], // None: 11 trials
    ])
}

fn segment(name: &str, values: Vec<f64>, warnings: &mut Vec<String>) -> Option<SegmentStats> {
    let s = latency_stats(&values);
    if s.is_none() {
        warnings.push(format!("{name}: {} records, segment omitted", values.len()));
    }
    s
}

/// Pure function of the run log.
pub fn build_report(log: &RunLog) -> Report {
    let pairs: Vec<(ImpactLabel, ImpactLabel)> = log.trials.iter().filter_map(|t| t.predicted.map(|p| (t.truth, p))).collect();
    let missing = log.trials.len() - pairs.len();
    let mut warnings = Vec::new();
    if missing > 0 {
        warnings.push(format!("{missing} trials have no prediction"));
    }
    let col = |f: fn(&TrialRecord) -> Option<f64>| log.trials.iter().filter_map(f).collect::<Vec<f64>>();
    let latency = LatencySection {
        iot_processing: segment("iot_processing", col(|t| t.iot_processing_ms), &mut warnings),
        iot_edge: segment("iot_edge", col(|t| t.iot_edge_ms), &mut warnings),
        edge_processing: segment("edge_processing", col(|t| t.edge_processing_ms), &mut warnings),
        edge_cloud_rtt: segment("edge_cloud_rtt", col(|t| t.edge_cloud_rtt_ms), &mut warnings),
    };
    Report {
        schema_version: REPORT_VERSION,
        classification: classification_metrics(&confusion(pairs)),
        latency,
        missing_predictions: missing,
        windows_dropped: log.windows_dropped,
        warnings,
    }
}

/// Plain-text classification and latency tables.
pub fn report_text(r: &Report) -> String {
    let c = &r.classification;
    let mut s = String::new();
    let _ = writeln!(s, "Classification Performance Summary");
    let _ = writeln!(s, "{:<11} {:>11} {:>8} {:>10} {:>8} {:>9}", "Impact Case", "Total Cases", "Correct", "Precision", "Recall", "F1-Score");
    for k in &c.per_class {
        let correct = c.matrix.get(k.label, k.label);
        let _ = writeln!(
            s,
            "{:<11} {:>11} {:>8} {:>10.3} {:>8.3} {:>9.3}",
            k.label.name(),
            k.support,
            correct,
            k.precision,
            k.recall,
            k.f1
        );
    }
    let w = c.weighted_avg;
    let _ = writeln!(s, "{:<11} {:>11} {:>8} {:>10.3} {:>8.3} {:>9.3}", "Overall", c.total, c.correct, w.precision, w.recall, w.f1);
    let _ = writeln!(s, "Accuracy {:.3}", c.accuracy);
    let _ = writeln!(s);
    let _ = writeln!(s, "Confusion matrix (rows true, columns predicted)");
    let _ = writeln!(s, "{:<10} {:>5} {:>5} {:>9} {:>5}", "", "Bow", "Port", "Starboard", "None");
    for t in ImpactLabel::ALL {
        let row = c.matrix.counts[t.index()];
        let _ = writeln!(s, "{:<10} {:>5} {:>5} {:>9} {:>5}", t.name(), row[0], row[1], row[2], row[3]);
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "Processing Time and System Latency Summary");
    let _ = writeln!(s, "{:<26} {:>10} {:>14} {:>6}", "Segment", "Mean (ms)", "Std Dev. (ms)", "n");
    let rows = [
        ("IoT Processing", r.latency.iot_processing),
        ("IoT-to-Edge (one-way)", r.latency.iot_edge),
        ("Edge Processing", r.latency.edge_processing),
        ("Edge-to-Cloud RTT", r.latency.edge_cloud_rtt),
    ];
    for (name, st) in rows {
        match st {
            Some(st) => {
                let _ = writeln!(s, "{name:<26} {:>10.2} {:>14.2} {:>6}", st.mean, st.std, st.n);
            }
            None => {
                let _ = writeln!(s, "{name:<26} {:>10} {:>14} {:>6}", "-", "-", "-");
            }
        }
    }
    for w in &r.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

/// Row-normalized heatmap, one 80 px cell per matrix entry.
pub fn confusion_heatmap(m: &ConfusionMatrix) -> RgbImage {
    const CELL: u32 = 80;
    let mut img = RgbImage::from_pixel(CELL * 4 + 1, CELL * 4 + 1, Rgb([40, 40, 40]));
    for t in 0..4 {
        let row_total: u64 = m.counts[t].iter().sum();
        for p in 0..4 {
            let frac = if row_total == 0 { 0.0 } else { m.counts[t][p] as f64 / row_total as f64 };
            let shade = |lo: f64, hi: f64| (lo + (hi - lo) * frac).round() as u8;
            let colour = Rgb([shade(247.0, 8.0), shade(251.0, 48.0), shade(255.0, 107.0)]);
            for y in 1..CELL {
                for x in 1..CELL {
                    img.put_pixel(p as u32 * CELL + x, t as u32 * CELL + y, colour);
                }
            }
        }
    }
    img
}

/// Writes `report.json`, `report.txt` and `confusion.png` into `dir`.
pub fn write_report(r: &Report, dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), serde_json::to_vec_pretty(r)?)?;
    fs::write(dir.join("report.txt"), report_text(r))?;
    confusion_heatmap(&r.classification.matrix)
        .save(dir.join("confusion.png"))
        .map_err(|e| std::io::Error::other(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_matrix_matches_summary_rows() {
        let r = classification_metrics(&reference_confusion());
        let expect = [(0.846, 0.917, 0.880), (0.909, 0.833, 0.870), (0.800, 0.800, 0.800), (0.909, 0.909, 0.909)];
        for (k, (p, rc, f)) in r.per_class.iter().zip(expect) {
            assert!((k.precision - p).abs() <= 0.001, "{:?} precision {}", k.label, k.precision);
            assert!((k.recall - rc).abs() <= 0.001, "{:?} recall {}", k.label, k.recall);
            assert!((k.f1 - f).abs() <= 0.001, "{:?} f1 {}", k.label, k.f1);
        }
        assert_eq!((r.correct, r.total), (43, 50));
        assert!((r.accuracy - 0.860).abs() <= 0.001);
        let w = r.weighted_avg;
        assert!((w.precision - 0.861).abs() <= 0.001);
        assert!((w.recall - 0.860).abs() <= 0.001);
        assert!((w.f1 - 0.859).abs() <= 0.001);
        let supports: Vec<u64> = r.per_class.iter().map(|c| c.support).collect();
        assert_eq!(supports, vec![12, 12, 15, 11]);
    }

    #[test]
    fn heatmap_dimensions_and_shading() {
        let img = confusion_heatmap(&reference_confusion());
        assert_eq!(img.dimensions(), (321, 321));
        // Diagonal cell darker than an empty off-diagonal cell.
        assert!(img.get_pixel(40, 40)[0] < img.get_pixel(120, 40)[0]);
    }
}
