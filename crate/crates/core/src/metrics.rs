//! Confusion matrix, per-class classification metrics and latency summaries.

use serde::{Deserialize, Serialize};

use crate::label::ImpactLabel;

/// 4×4 counts, rows = true label, columns = predicted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 4]; 4],
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_counts(counts: [[u64; 4]; 4]) -> Self {
        Self { counts }
    }

    pub fn add(&mut self, truth: ImpactLabel, predicted: ImpactLabel) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn get(&self, truth: ImpactLabel, predicted: ImpactLabel) -> u64 {
        self.counts[truth.index()][predicted.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..4).map(|k| self.counts[k][k]).sum()
    }

    pub fn row_total(&self, truth: ImpactLabel) -> u64 {
        self.counts[truth.index()].iter().sum()
    }

    pub fn column_total(&self, predicted: ImpactLabel) -> u64 {
        self.counts.iter().map(|r| r[predicted.index()]).sum()
    }
}

pub fn confusion(pairs: impl IntoIterator<Item = (ImpactLabel, ImpactLabel)>) -> ConfusionMatrix {
    let mut m = ConfusionMatrix::new();
    for (t, p) in pairs {
        m.add(t, p);
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: ImpactLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of true instances (row total).
    pub support: u64,
    /// No predictions of this class, so precision is reported as 0.
    pub precision_degenerate: bool,
    /// No true instances of this class, so recall is reported as 0.
    pub recall_degenerate: bool,
    /// `precision + recall == 0`, so F1 is reported as 0.
    pub f1_degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub matrix: ConfusionMatrix,
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub accuracy_degenerate: bool,
    pub correct: u64,
    pub total: u64,
    pub macro_avg: Averages,
    /// Averages weighted by class support.
    pub weighted_avg: Averages,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn classification_metrics(m: &ConfusionMatrix) -> ClassificationReport {
    let per_class: Vec<ClassMetrics> = ImpactLabel::ALL
        .iter()
        .map(|&label| {
            let tp = m.get(label, label);
            let (precision, precision_degenerate) = ratio(tp, m.column_total(label));
            let (recall, recall_degenerate) = ratio(tp, m.row_total(label));
            let f1_degenerate = precision + recall == 0.0;
            let f1 = if f1_degenerate { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
            ClassMetrics {
                label,
                precision,
                recall,
                f1,
                support: m.row_total(label),
                precision_degenerate,
                recall_degenerate,
                f1_degenerate,
            }
        })
        .collect();
    let (accuracy, accuracy_degenerate) = ratio(m.trace(), m.total());
    let n = per_class.len() as f64;
    let macro_avg = Averages {
        precision: per_class.iter().map(|c| c.precision).sum::<f64>() / n,
        recall: per_class.iter().map(|c| c.recall).sum::<f64>() / n,
        f1: per_class.iter().map(|c| c.f1).sum::<f64>() / n,
    };
    let total = m.total();
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        if total == 0 {
            0.0
        } else {
            per_class.iter().map(|c| f(c) * c.support as f64).sum::<f64>() / total as f64
        }
    };
    let weighted_avg = Averages { precision: weighted(|c| c.precision), recall: weighted(|c| c.recall), f1: weighted(|c| c.f1) };
    ClassificationReport {
        matrix: *m,
        per_class,
        accuracy,
        accuracy_degenerate,
        correct: m.trace(),
        total,
        macro_avg,
        weighted_avg,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentStats {
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub std: f64,
    pub n: usize,
}

/// Mean and sample standard deviation; `None` for fewer than two values.
pub fn latency_stats(values: &[f64]) -> Option<SegmentStats> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Some(SegmentStats { mean, std: var.sqrt(), n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use ImpactLabel::*;

    #[test]
    fn confusion_basics() {
        let m = confusion(ImpactLabel::ALL.iter().flat_map(|&l| std::iter::repeat_n((l, l), 10)));
        assert_eq!((0..4).map(|k| m.counts[k][k]).collect::<Vec<_>>(), vec![10; 4]);
        let m = confusion([(Bow, Port)]);
        assert_eq!(m.get(Bow, Port), 1);
        assert_eq!(m.total(), 1);
        assert_eq!(confusion([]), ConfusionMatrix::new());
    }

    #[test]
    fn identity_gives_perfect_scores() {
        let mut c = [[0; 4]; 4];
        (0..4).for_each(|k| c[k][k] = 10);
        let r = classification_metrics(&ConfusionMatrix::from_counts(c));
        assert_eq!(r.accuracy, 1.0);
        for k in &r.per_class {
            assert_eq!((k.precision, k.recall, k.f1), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn bow_row_of_twelve() {
        // Bow: 12 true, 11 correct, 13 predicted.
        let m = ConfusionMatrix::from_counts([[11, 0, 1, 0], [1, 10, 1, 0], [1, 1, 12, 1], [0, 0, 1, 10]]);
        let r = classification_metrics(&m);
        let bow = r.per_class[0];
        assert!((bow.recall - 11.0 / 12.0).abs() < 1e-12);
        assert!((bow.precision - 11.0 / 13.0).abs() < 1e-12);
        assert!((bow.f1 - 0.88).abs() < 1e-12);
        assert_eq!((r.correct, r.total), (43, 50));
        assert!((r.accuracy - 0.86).abs() < 1e-12);
    }

    #[test]
    fn degenerate_classes_are_flagged() {
        let r = classification_metrics(&confusion([(Bow, Bow), (Bow, Port)]));
        let star = r.per_class[2];
        assert!(star.precision_degenerate && star.recall_degenerate && star.f1_degenerate);
        assert_eq!((star.precision, star.recall, star.f1), (0.0, 0.0, 0.0));
        let port = r.per_class[1];
        assert!(!port.precision_degenerate && port.recall_degenerate);
        let empty = classification_metrics(&ConfusionMatrix::new());
        assert!(empty.accuracy_degenerate);
        assert_eq!(empty.accuracy, 0.0);
    }

    #[test]
    fn latency_examples() {
        let s = latency_stats(&[100.0, 200.0, 300.0]).unwrap();
        assert_eq!((s.mean, s.std, s.n), (200.0, 100.0, 3));
        assert_eq!(latency_stats(&[5.0; 7]).unwrap().std, 0.0);
        assert!(latency_stats(&[1.0]).is_none());
        assert!(latency_stats(&[]).is_none());
    }

    fn label() -> impl Strategy<Value = ImpactLabel> {
        (0usize..4).prop_map(|k| ImpactLabel::from_index(k).unwrap())
    }

    proptest! {
        #[test]
        fn metric_identities(pairs in proptest::collection::vec((label(), label()), 0..200)) {
            let m = confusion(pairs.iter().copied());
            prop_assert_eq!(m.total(), pairs.len() as u64);
            let r = classification_metrics(&m);
            for c in &r.per_class {
                for v in [c.precision, c.recall, c.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
                if c.precision + c.recall > 0.0 {
                    let f1 = 2.0 * c.precision * c.recall / (c.precision + c.recall);
                    prop_assert!((c.f1 - f1).abs() < 1e-12);
                }
            }
            // Micro-averaged recall over all classes equals accuracy.
            let tp: u64 = (0..4).map(|k| m.counts[k][k]).sum();
            let fn_: u64 = ImpactLabel::ALL.iter().map(|&l| m.row_total(l) - m.get(l, l)).sum();
            if !pairs.is_empty() {
                prop_assert!((tp as f64 / (tp + fn_) as f64 - r.accuracy).abs() < 1e-12);
            }
        }
    }
}
