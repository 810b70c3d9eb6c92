use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(k: usize) -> Self {
        Self {
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn to_csv(&self, labels: &[String]) -> String {
        let name = |i: usize| labels.get(i).cloned().unwrap_or_else(|| i.to_string());
        let mut out = String::from("true\\predicted");
        for j in 0..self.n_classes() {
            out.push(',');
            out.push_str(&name(j));
        }
        out.push('\n');
        for (i, row) in self.counts.iter().enumerate() {
            out.push_str(&name(i));
            for c in row {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Counts `(truth, prediction)` pairs over `n_classes` classes.
pub fn confusion(preds: &[usize], truths: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if preds.len() != truths.len() {
        return Err(Error::Eval(format!(
            "{} predictions for {} labels",
            preds.len(),
            truths.len()
        )));
    }
    let mut cm = ConfusionMatrix::zeros(n_classes);
    for (&p, &t) in preds.iter().zip(truths) {
        if p >= n_classes || t >= n_classes {
            return Err(Error::Eval(format!("label pair ({t}, {p}) outside {n_classes} classes")));
        }
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

/// `100 * trace / total`.
pub fn accuracy_overall(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Eval("empty confusion matrix".into()));
    }
    Ok(100.0 * cm.trace() as f64 / total as f64)
}

/// One-vs-rest `(TP + TN) / (TP + TN + FP + FN) * 100` for class `c`.
/// NaN for an empty matrix.
pub fn accuracy_per_class(cm: &ConfusionMatrix, c: usize) -> f64 {
    let total = cm.total();
    let tp = cm.counts[c][c];
    let fn_: u64 = cm.counts[c].iter().sum::<u64>() - tp;
    let fp: u64 = cm.counts.iter().map(|r| r[c]).sum::<u64>() - tp;
    let tn = total - tp - fn_ - fp;
    100.0 * (tp + tn) as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn hand_counts() {
        let cm = confusion(&[0, 1, 1], &[0, 0, 1], 2).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 1], vec![0, 1]]);
        let diag = confusion(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!(accuracy_overall(&diag).unwrap(), 100.0);
        let col = confusion(&[0, 0, 0], &[0, 1, 2], 3).unwrap();
        assert!(col.counts.iter().all(|r| r[1] == 0 && r[2] == 0));
        assert!(confusion(&[0], &[0, 1], 2).is_err());
    }

    #[test]
    fn overall_examples() {
        let eight = confusion(&[0, 0, 0, 0, 0, 0, 0, 0, 1, 1], &[0, 0, 0, 0, 0, 0, 0, 0, 0, 0], 2).unwrap();
        assert_eq!(accuracy_overall(&eight).unwrap(), 80.0);
        let uniform = ConfusionMatrix {
            counts: vec![vec![1, 1], vec![1, 1]],
        };
        assert_eq!(accuracy_overall(&uniform).unwrap(), 50.0);
        assert!(accuracy_overall(&ConfusionMatrix::zeros(2)).is_err());
    }

    #[test]
    fn one_vs_rest() {
        let cm = ConfusionMatrix {
            counts: vec![vec![3, 1], vec![1, 5]],
        };
        assert_eq!(accuracy_per_class(&cm, 0), 80.0);
        let perfect = confusion(&[0, 1, 2, 2], &[0, 1, 2, 2], 3).unwrap();
        assert!((0..3).all(|c| accuracy_per_class(&perfect, c) == 100.0));
        // absent class: only true negatives and false positives remain
        let absent = confusion(&[0, 1, 2], &[0, 1, 1], 3).unwrap();
        assert!((accuracy_per_class(&absent, 2) - 200.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn overall_is_mean_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let n = rng.gen_range(1..50);
            let p: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
            let t: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
            let direct = 100.0 * p.iter().zip(&t).filter(|(a, b)| a == b).count() as f64 / n as f64;
            let cm = confusion(&p, &t, 4).unwrap();
            assert!((accuracy_overall(&cm).unwrap() - direct).abs() < 1e-9);
            assert_eq!(cm.total(), n as u64);
        }
    }
}
