use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Overall accuracy and one-vs-rest metrics. Macro precision and recall are the
/// unweighted class means; macro F1 is the harmonic mean of those two.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassMetrics>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        Self {
            counts: vec![vec![0; num_classes]; num_classes],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let n = counts.len();
        if n == 0 || counts.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidConfig("confusion matrix must be square and non-empty".into()));
        }
        Ok(Self { counts })
    }

    pub fn from_predictions(num_classes: usize, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::InvalidConfig("truth and prediction lengths differ".into()));
        }
        let mut m = Self::new(num_classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            m.record(t, p)?;
        }
        Ok(m)
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        let n = self.num_classes();
        if truth >= n || predicted >= n {
            return Err(Error::InvalidConfig(format!("class index out of range for {n} classes")));
        }
        self.counts[truth][predicted] += 1;
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn col_sum(&self, class: usize) -> u64 {
        self.counts.iter().map(|r| r[class]).sum()
    }

    pub fn metrics(&self) -> Result<Metrics> {
        let total = self.total();
        if total == 0 {
            return Err(Error::EmptyTestSet);
        }
        let per_class: Vec<ClassMetrics> = (0..self.num_classes())
            .map(|c| {
                let tp = self.counts[c][c];
                let precision = ratio(tp, self.col_sum(c));
                let recall = ratio(tp, self.row_sum(c));
                ClassMetrics {
                    precision,
                    recall,
                    f1: harmonic(precision, recall),
                    support: self.row_sum(c),
                }
            })
            .collect();
        let k = per_class.len() as f64;
        let precision = per_class.iter().map(|m| m.precision).sum::<f64>() / k;
        let recall = per_class.iter().map(|m| m.recall).sum::<f64>() / k;
        Ok(Metrics {
            accuracy: self.trace() as f64 / total as f64,
            precision,
            recall,
            f1: harmonic(precision, recall),
            per_class,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_two_class_example() {
        let m = ConfusionMatrix::from_counts(vec![vec![5, 0], vec![1, 4]]).unwrap().metrics().unwrap();
        assert_eq!(m.accuracy, 0.9);
        assert_eq!(m.per_class[0].precision, 5.0 / 6.0);
        assert_eq!(m.per_class[0].recall, 1.0);
        assert!((m.per_class[0].f1 - 10.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_constant_predictors() {
        let m = ConfusionMatrix::from_predictions(3, &[0, 1, 2, 2], &[0, 1, 2, 2]).unwrap();
        let r = m.metrics().unwrap();
        assert_eq!((r.accuracy, r.precision, r.recall, r.f1), (1.0, 1.0, 1.0, 1.0));
        let c = ConfusionMatrix::from_predictions(2, &[0, 0, 1, 1], &[1, 1, 1, 1]).unwrap();
        let r = c.metrics().unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.per_class[1].precision, 0.5);
        assert_eq!(r.per_class[0].precision, 0.0);
    }

    #[test]
    fn empty_matrix() {
        assert!(matches!(ConfusionMatrix::new(2).metrics(), Err(Error::EmptyTestSet)));
        assert!(ConfusionMatrix::new(2).record(2, 0).is_err());
    }
}
