use std::fmt::Write as _;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::corpus::Polarity;
use crate::error::{Error, Result};

/// 3x3 counts; rows are true labels, columns predictions, both in encoding order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfusionMatrix(pub [[u64; 3]; 3]);

pub fn confusion_matrix(y_true: &[Polarity], y_pred: &[Polarity]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Dimension {
            expected: y_true.len(),
            found: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::Empty("no labels to evaluate"));
    }
    let mut m = [[0u64; 3]; 3];
    for (t, p) in y_true.iter().zip(y_pred) {
        m[t.index()][p.index()] += 1;
    }
    Ok(ConfusionMatrix(m))
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..3).map(|k| self.0[k][k]).sum()
    }

    pub fn row_sum(&self, k: usize) -> u64 {
        self.0[k].iter().sum()
    }

    pub fn col_sum(&self, k: usize) -> u64 {
        self.0.iter().map(|r| r[k]).sum()
    }

    /// Accuracy as an exact fraction.
    pub fn accuracy_exact(&self) -> Result<Ratio<u64>> {
        match self.total() {
            0 => Err(Error::Empty("confusion matrix is empty")),
            n => Ok(Ratio::new(self.trace(), n)),
        }
    }
}

/// `a / b`, with 0/0 defined as 0.
fn div(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: Polarity,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Metrics derived from one confusion matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub total: u64,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
}

pub fn metrics(m: &ConfusionMatrix) -> Result<Metrics> {
    let total = m.total();
    if total == 0 {
        return Err(Error::Empty("confusion matrix is empty"));
    }
    let per_class: Vec<ClassMetrics> = Polarity::ALL
        .iter()
        .map(|&label| {
            let k = label.index();
            let precision = div(m.0[k][k], m.col_sum(k));
            let recall = div(m.0[k][k], m.row_sum(k));
            ClassMetrics {
                label,
                precision,
                recall,
                f1: harmonic(precision, recall),
                support: m.row_sum(k),
            }
        })
        .collect();
    // Macro averages run over classes seen in either gold or predictions.
    let seen: Vec<&ClassMetrics> = per_class
        .iter()
        .filter(|c| c.support > 0 || m.col_sum(c.label.index()) > 0)
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| seen.iter().map(|c| f(c)).sum::<f64>() / seen.len() as f64;
    let weighted_f1 = per_class.iter().map(|c| c.f1 * c.support as f64).sum::<f64>() / total as f64;
    Ok(Metrics {
        total,
        accuracy: div(m.trace(), total),
        macro_precision: mean(|c| c.precision),
        macro_recall: mean(|c| c.recall),
        macro_f1: mean(|c| c.f1),
        weighted_f1,
        per_class,
        confusion: *m,
    })
}

impl Metrics {
    /// Plain-text rendering: summary lines, per-class table and confusion matrix.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let pct = |v: f64| format!("{:.2}", v * 100.0);
        let _ = writeln!(s, "instances      {}", self.total);
        let _ = writeln!(s, "accuracy       {}%", pct(self.accuracy));
        let _ = writeln!(s, "macro P/R/F1   {} / {} / {}", pct(self.macro_precision), pct(self.macro_recall), pct(self.macro_f1));
        let _ = writeln!(s, "weighted F1    {}", pct(self.weighted_f1));
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<10} {:>9} {:>9} {:>9} {:>8}", "class", "precision", "recall", "f1", "support");
        for c in &self.per_class {
            let _ = writeln!(
                s,
                "{:<10} {:>9} {:>9} {:>9} {:>8}",
                c.label.as_str(),
                pct(c.precision),
                pct(c.recall),
                pct(c.f1),
                c.support
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<10} {:>9} {:>9} {:>9}", "true\\pred", "positive", "neutral", "negative");
        for (k, row) in self.confusion.0.iter().enumerate() {
            let _ = writeln!(s, "{:<10} {:>9} {:>9} {:>9}", Polarity::ALL[k].as_str(), row[0], row[1], row[2]);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use Polarity::*;

    #[test]
    fn perfect_and_inverted() {
        let y = [Positive, Neutral, Negative, Negative];
        let m = metrics(&confusion_matrix(&y, &y).unwrap()).unwrap();
        assert_eq!((m.accuracy, m.macro_f1, m.weighted_f1), (1.0, 1.0, 1.0));
        let m = confusion_matrix(&[Positive, Negative], &[Negative, Positive]).unwrap();
        assert_eq!(m.trace(), 0);
        assert_eq!(metrics(&m).unwrap().accuracy, 0.0);
    }

    #[test]
    fn absent_class_is_left_out_of_macro() {
        let m = metrics(&confusion_matrix(&[Positive, Negative], &[Positive, Positive]).unwrap()).unwrap();
        assert_eq!(m.per_class[1].f1, 0.0);
        assert_relative_eq!(m.macro_f1, (2.0 / 3.0) / 2.0, epsilon = 1e-15);
        assert_eq!(m.macro_recall, 0.5);
    }

    #[test]
    fn errors() {
        assert!(confusion_matrix(&[Positive], &[]).is_err());
        assert!(confusion_matrix(&[], &[]).is_err());
        assert!(metrics(&ConfusionMatrix::default()).is_err());
    }

    #[test]
    fn four_instance_hand_case() {
        // true  = [pos, pos, neu, neg]
        // pred  = [pos, neu, neu, pos]
        // pos: P = 1/2, R = 1/2, F1 = 1/2
        // neu: P = 1/2, R = 1,   F1 = 2/3
        // neg: P = 0/0 -> 0, R = 0, F1 = 0
        let m = confusion_matrix(&[Positive, Positive, Neutral, Negative], &[Positive, Neutral, Neutral, Positive]).unwrap();
        assert_eq!(m.0, [[1, 1, 0], [0, 1, 0], [1, 0, 0]]);
        let r = metrics(&m).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.per_class[0].f1, 0.5);
        assert_relative_eq!(r.per_class[1].f1, 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(r.per_class[2].precision, 0.0);
        assert_relative_eq!(r.macro_f1, (0.5 + 2.0 / 3.0) / 3.0, epsilon = 1e-15);
        assert_relative_eq!(r.weighted_f1, (0.5 * 2.0 + 2.0 / 3.0) / 4.0, epsilon = 1e-15);
        assert_relative_eq!(r.macro_precision, 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn render_has_rows() {
        let m = metrics(&confusion_matrix(&[Positive], &[Positive]).unwrap()).unwrap();
        let t = m.render();
        assert!(t.contains("accuracy       100.00%"));
        assert!(t.contains("negative"));
    }

    fn labels() -> impl proptest::strategy::Strategy<Value = (Vec<Polarity>, Vec<Polarity>)> {
        use proptest::prelude::*;
        proptest::collection::vec((0..3usize, 0..3usize), 1..60).prop_map(|v| {
            v.into_iter().map(|(a, b)| (Polarity::ALL[a], Polarity::ALL[b])).unzip()
        })
    }

    proptest::proptest! {
        #[test]
        fn self_prediction_is_perfect((y, _) in labels()) {
            let m = metrics(&confusion_matrix(&y, &y).unwrap()).unwrap();
            proptest::prop_assert_eq!(m.accuracy, 1.0);
            proptest::prop_assert_eq!(m.macro_f1, 1.0);
        }

        #[test]
        fn macro_f1_permutation_invariant((y, p) in labels(), seed in proptest::prelude::any::<u64>()) {
            let mut order: Vec<usize> = (0..y.len()).collect();
            crate::rng::SeededRng::new(seed).shuffle(&mut order);
            let ys: Vec<Polarity> = order.iter().map(|&i| y[i]).collect();
            let ps: Vec<Polarity> = order.iter().map(|&i| p[i]).collect();
            let a = metrics(&confusion_matrix(&y, &p).unwrap()).unwrap();
            let b = metrics(&confusion_matrix(&ys, &ps).unwrap()).unwrap();
            proptest::prop_assert_eq!(a, b);
        }

        #[test]
        fn accuracy_is_support_weighted_recall((y, p) in labels()) {
            let m = metrics(&confusion_matrix(&y, &p).unwrap()).unwrap();
            let weighted: f64 = m.per_class.iter().map(|c| c.recall * c.support as f64).sum::<f64>() / y.len() as f64;
            proptest::prop_assert!((m.accuracy - weighted).abs() < 1e-12);
        }
    }
}
