use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(false positive rate, true positive rate)`, from (0, 0) to (1, 1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC curve by sweeping thresholds over the distinct scores, highest first.
/// Equal scores form a single step, so the trapezoidal area counts ties as
/// half, matching the Mann-Whitney statistic.
pub fn roc_auc(scores: &[f64], malicious: &[bool]) -> Result<RocCurve> {
    if scores.len() != malicious.len() {
        return Err(Error::Internal(format!(
            "{} scores but {} labels",
            scores.len(),
            malicious.len()
        )));
    }
    let positives = malicious.iter().filter(|&&m| m).count();
    let negatives = malicious.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let (p, n) = (positives as f64, negatives as f64);
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]].total_cmp(&s).is_eq() {
            if malicious[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let (x0, y0) = *points.last().expect("starts at origin");
        let (x1, y1) = (fp as f64 / n, tp as f64 / p);
        auc += (x1 - x0) * (y0 + y1) / 2.0;
        points.push((x1, y1));
    }
    Ok(RocCurve { points, auc })
}

/// Two whitespace-separated columns: FPR and TPR.
pub fn write_roc_points<W: Write>(mut w: W, curve: &RocCurve) -> std::io::Result<()> {
    writeln!(w, "# fpr tpr")?;
    for (x, y) in &curve.points {
        writeln!(w, "{x} {y}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_separation() {
        let c = roc_auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap();
        assert_eq!(c.auc, 1.0);
        assert_eq!(c.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(c.points.last(), Some(&(1.0, 1.0)));
    }

    #[test]
    fn all_tied_is_half() {
        let c = roc_auc(&[3.0; 6], &[true, false, true, false, false, false]).unwrap();
        assert_eq!(c.auc, 0.5);
        assert_eq!(c.points.len(), 2);
    }

    #[test]
    fn inverted_is_zero() {
        let c = roc_auc(&[0.9, 0.1], &[false, true]).unwrap();
        assert_eq!(c.auc, 0.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(roc_auc(&[1.0, 2.0], &[true, true]), Err(Error::SingleClass)));
        assert!(roc_auc(&[1.0], &[true, false]).is_err());
    }
}
