//! Confusion matrices and per-class sensitivity, positive predictivity and F1.

use std::fmt::Write as _;

use crate::signal::{Severity, NUM_CLASSES};

/// Counts indexed `[ground truth][prediction]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; NUM_CLASSES]; NUM_CLASSES]) -> Self {
        Self { counts }
    }

    pub fn record(&mut self, truth: Severity, predicted: Severity) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|c| self.counts[c][c]).sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|row| row[c]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.trace(), self.total())
    }

    pub fn is_diagonal(&self) -> bool {
        (0..NUM_CLASSES).all(|r| (0..NUM_CLASSES).all(|c| r == c || self.counts[r][c] == 0))
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for r in 0..NUM_CLASSES {
            for c in 0..NUM_CLASSES {
                self.counts[r][c] += other.counts[r][c];
            }
        }
    }
}

/// Builds a confusion matrix from paired predictions and labels.
///
/// # Panics
/// If the slices differ in length.
pub fn confusion(preds: &[Severity], labels: &[Severity]) -> ConfusionMatrix {
    assert_eq!(preds.len(), labels.len(), "prediction/label count mismatch");
    let mut cm = ConfusionMatrix::default();
    for (&p, &l) in preds.iter().zip(labels) {
        cm.record(l, p);
    }
    cm
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(a: f64, b: f64) -> f64 {
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassMetrics {
    pub sen: f64,
    pub ppr: f64,
    pub f1: f64,
}

/// Per-class metrics derived from one confusion matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub classes: [ClassMetrics; NUM_CLASSES],
    pub accuracy: f64,
}

/// Sensitivity `TP/(TP+FN)`, positive predictivity `TP/(TP+FP)` and their
/// harmonic mean for each class. A zero denominator yields 0.
pub fn per_class(cm: &ConfusionMatrix) -> EvalReport {
    let mut classes = [ClassMetrics::default(); NUM_CLASSES];
    for (c, m) in classes.iter_mut().enumerate() {
        let tp = cm.counts[c][c];
        let sen = ratio(tp, cm.row_sum(c));
        let ppr = ratio(tp, cm.col_sum(c));
        *m = ClassMetrics {
            sen,
            ppr,
            f1: harmonic(sen, ppr),
        };
    }
    EvalReport {
        confusion: *cm,
        classes,
        accuracy: cm.accuracy(),
    }
}

impl EvalReport {
    pub fn mean_f1(&self) -> f64 {
        self.classes.iter().map(|m| m.f1).sum::<f64>() / NUM_CLASSES as f64
    }

    pub fn summary(&self) -> MetricSummary {
        MetricSummary {
            classes: self.classes,
            accuracy: self.accuracy,
        }
    }
}

/// Metrics without counts; used for averages over runs, which are not
/// integer confusion matrices.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricSummary {
    pub classes: [ClassMetrics; NUM_CLASSES],
    pub accuracy: f64,
}

impl MetricSummary {
    /// Arithmetic mean of each metric. Empty input gives all zeros.
    pub fn mean<'a>(items: impl IntoIterator<Item = &'a MetricSummary>) -> MetricSummary {
        let mut acc = MetricSummary::default();
        let mut n = 0usize;
        for s in items {
            n += 1;
            acc.accuracy += s.accuracy;
            for (a, b) in acc.classes.iter_mut().zip(&s.classes) {
                a.sen += b.sen;
                a.ppr += b.ppr;
                a.f1 += b.f1;
            }
        }
        if n > 0 {
            let d = n as f64;
            acc.accuracy /= d;
            for a in acc.classes.iter_mut() {
                a.sen /= d;
                a.ppr /= d;
                a.f1 /= d;
            }
        }
        acc
    }

    pub fn mean_f1(&self) -> f64 {
        self.classes.iter().map(|m| m.f1).sum::<f64>() / NUM_CLASSES as f64
    }

    /// One row per class: `Sen Ppr F1`, plus overall accuracy.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:>8} {:>8} {:>8}", "class", "Sen", "Ppr", "F1");
        for (c, m) in Severity::ALL.iter().zip(&self.classes) {
            let _ = writeln!(out, "{:<10} {:>8.4} {:>8.4} {:>8.4}", c.name(), m.sen, m.ppr, m.f1);
        }
        let _ = writeln!(out, "accuracy   {:>8.4}", self.accuracy);
        out
    }

    /// Single CSV line in class order: `H_Sen,H_Ppr,H_F1,ELF_Sen,...,accuracy`.
    pub fn to_csv_row(&self) -> String {
        let mut fields: Vec<String> = self
            .classes
            .iter()
            .flat_map(|m| [m.sen, m.ppr, m.f1])
            .map(|v| format!("{v:.6}"))
            .collect();
        fields.push(format!("{:.6}", self.accuracy));
        fields.join(",")
    }

    pub fn csv_header() -> String {
        let mut fields: Vec<String> = Severity::ALL
            .iter()
            .flat_map(|c| ["Sen", "Ppr", "F1"].map(|m| format!("{}_{m}", c.abbrev())))
            .collect();
        fields.push("accuracy".into());
        fields.join(",")
    }
}

impl EvalReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<10}", "truth\\pred");
        for c in Severity::ALL {
            let _ = write!(out, " {:>6}", c.abbrev());
        }
        out.push('\n');
        for (c, row) in Severity::ALL.iter().zip(&self.confusion.counts) {
            let _ = write!(out, "{:<10}", c.abbrev());
            for v in row {
                let _ = write!(out, " {v:>6}");
            }
            out.push('\n');
        }
        out.push('\n');
        out.push_str(&self.summary().to_table());
        out
    }

    /// Long-form CSV: one row per class with counts and metrics.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,H,ELF,MLF,SLF,Sen,Ppr,F1\n");
        for (c, (row, m)) in Severity::ALL
            .iter()
            .zip(self.confusion.counts.iter().zip(&self.classes))
        {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.6},{:.6},{:.6}",
                c.abbrev(),
                row[0],
                row[1],
                row[2],
                row[3],
                m.sen,
                m.ppr,
                m.f1
            );
        }
        let _ = writeln!(out, "accuracy,,,,,{:.6},,", self.accuracy);
        out
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;
    use Severity::*;

    #[test]
    fn confusion_examples() {
        let labels = [Healthy, EarlyFault, ModerateFault, SevereFault];
        let cm = confusion(&labels, &labels);
        assert!(cm.is_diagonal());
        assert_eq!(cm.accuracy(), 1.0);

        let cm = confusion(&[Healthy; 4], &labels);
        for r in 0..4 {
            assert_eq!(cm.counts[r][0], 1);
            assert_eq!(cm.row_sum(r), 1);
        }
        assert_eq!(cm.col_sum(0), 4);

        let cm = confusion(&[], &[]);
        assert_eq!(cm, ConfusionMatrix::default());
        assert_eq!(cm.accuracy(), 0.0);
    }

    #[test]
    fn identity_matrix_metrics_are_one() {
        let mut counts = [[0; 4]; 4];
        for (c, row) in counts.iter_mut().enumerate() {
            row[c] = 1;
        }
        let r = per_class(&ConfusionMatrix::from_counts(counts));
        for m in r.classes {
            assert_eq!((m.sen, m.ppr, m.f1), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn empty_class_metrics_are_zero() {
        let counts = [[5, 0, 0, 0], [0, 0, 3, 0], [0, 0, 4, 0], [0, 0, 0, 2]];
        let r = per_class(&ConfusionMatrix::from_counts(counts));
        assert_eq!(r.classes[1], ClassMetrics::default());
    }

    #[test]
    fn table_iii_inner_race_early_fault() {
        let cm = ConfusionMatrix::from_counts([
            [400, 0, 0, 0],
            [0, 389, 11, 0],
            [0, 6, 364, 30],
            [0, 0, 23, 377],
        ]);
        let r = per_class(&cm);
        let elf = r.classes[1];
        assert_abs_diff_eq!(elf.sen, 0.97250, epsilon = 5e-6);
        assert_abs_diff_eq!(elf.ppr, 0.98481, epsilon = 5e-6);
        assert_abs_diff_eq!(elf.f1, 0.97862, epsilon = 5e-6);
    }

    #[test]
    fn renderings_have_expected_shape() {
        let cm = ConfusionMatrix::from_counts([[2, 0, 0, 0], [0, 1, 1, 0], [0, 0, 2, 0], [0, 0, 0, 2]]);
        let r = per_class(&cm);
        assert_eq!(r.to_csv().lines().count(), 6);
        assert!(r.to_table().contains("MLF"));
        assert_eq!(
            r.summary().to_csv_row().split(',').count(),
            MetricSummary::csv_header().split(',').count()
        );
    }

    #[test]
    fn mean_summary_is_arithmetic_mean() {
        let a = per_class(&ConfusionMatrix::from_counts([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]));
        let b = per_class(&ConfusionMatrix::from_counts([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]));
        let m = MetricSummary::mean([a.summary(), b.summary()].iter());
        assert_eq!(m.accuracy, 0.75);
        assert_eq!(m.classes[0].sen, 0.5);
        assert_eq!(m.classes[3].f1, 1.0);
    }

    fn arb_matrix() -> impl Strategy<Value = [[u64; 4]; 4]> {
        proptest::array::uniform4(proptest::array::uniform4(0u64..50))
    }

    proptest! {
        #[test]
        fn metric_invariants(counts in arb_matrix()) {
            let cm = ConfusionMatrix::from_counts(counts);
            let r = per_class(&cm);
            prop_assert!((0.0..=1.0).contains(&r.accuracy));
            if cm.total() > 0 {
                prop_assert_eq!(r.accuracy == 1.0, cm.is_diagonal());
            }
            for m in r.classes {
                for v in [m.sen, m.ppr, m.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
                prop_assert!(m.f1 <= (m.sen + m.ppr) / 2.0 + 1e-15);
                prop_assert_eq!(m.f1 == 0.0, m.sen * m.ppr == 0.0);
            }
        }

        #[test]
        fn relabeling_permutes_metrics(counts in arb_matrix(), shift in 1usize..4) {
            let perm = |c: usize| (c + shift) % 4;
            let mut moved = [[0u64; 4]; 4];
            for r in 0..4 {
                for c in 0..4 {
                    moved[perm(r)][perm(c)] = counts[r][c];
                }
            }
            let a = per_class(&ConfusionMatrix::from_counts(counts));
            let b = per_class(&ConfusionMatrix::from_counts(moved));
            for c in 0..4 {
                prop_assert_eq!(a.classes[c], b.classes[perm(c)]);
            }
        }
    }
}
