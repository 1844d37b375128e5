//! Evaluation metrics over predicted link probabilities and hidden truths.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Predictions strictly above this count as positive.
pub const DEFAULT_THRESHOLD: f64 = 0.5;
/// "Confident" predictions are strictly above this.
pub const HIGH_CONFIDENCE: f64 = 0.95;
pub const ENTROPY_BINS: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("{preds} predictions but {truths} truths")]
    LengthMismatch { preds: usize, truths: usize },
    #[error("no predictions")]
    Empty,
    #[error("only one class present")]
    SingleClass,
    #[error("every cross-class pair is tied")]
    AllTied,
}

fn check(preds: &[f64], truths: &[bool]) -> Result<(), MetricError> {
    if preds.len() != truths.len() {
        return Err(MetricError::LengthMismatch {
            preds: preds.len(),
            truths: truths.len(),
        });
    }
    if preds.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        // 2PR/(P+R) in counts, exact for hand-sized inputs
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn confusion(preds: &[f64], truths: &[bool], threshold: f64) -> Result<Confusion, MetricError> {
    check(preds, truths)?;
    let mut c = Confusion::default();
    for (&p, &t) in preds.iter().zip(truths) {
        match (p > threshold, t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

pub fn f1_score(preds: &[f64], truths: &[bool], threshold: f64) -> Result<f64, MetricError> {
    Ok(confusion(preds, truths, threshold)?.f1())
}

/// Over all (positive, negative) pairs: how many have the positive above,
/// below, or tied with the negative.
fn pair_counts(preds: &[f64], truths: &[bool]) -> Result<(u64, u64, u64), MetricError> {
    check(preds, truths)?;
    let mut neg: Vec<f64> = preds
        .iter()
        .zip(truths)
        .filter(|(_, &t)| !t)
        .map(|(&p, _)| p)
        .collect();
    let pos_count = truths.len() - neg.len();
    if neg.is_empty() || pos_count == 0 {
        return Err(MetricError::SingleClass);
    }
    neg.sort_by(f64::total_cmp);
    let (mut above, mut below, mut tied) = (0u64, 0u64, 0u64);
    for (&p, _) in preds.iter().zip(truths).filter(|(_, &t)| t) {
        let lo = neg.partition_point(|n| n.total_cmp(&p) == Ordering::Less);
        let hi = neg.partition_point(|n| n.total_cmp(&p) != Ordering::Greater);
        above += lo as u64;
        tied += (hi - lo) as u64;
        below += (neg.len() - hi) as u64;
    }
    Ok((above, below, tied))
}

/// Area under the ROC curve as a rank statistic; ties score one half.
pub fn roc_auc(preds: &[f64], truths: &[bool]) -> Result<f64, MetricError> {
    let (above, below, tied) = pair_counts(preds, truths)?;
    let pairs = above + below + tied;
    Ok((2 * above + tied) as f64 / (2 * pairs) as f64)
}

/// Kruskal's gamma `(C - D) / (C + D)` over cross-class pairs, ties excluded.
pub fn kruskal_gamma(preds: &[f64], truths: &[bool]) -> Result<f64, MetricError> {
    let (concordant, discordant, _) = pair_counts(preds, truths)?;
    if concordant + discordant == 0 {
        return Err(MetricError::AllTied);
    }
    Ok((concordant as f64 - discordant as f64) / (concordant + discordant) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreStats {
    pub entropy_bits: f64,
    pub p_true_given_high: f64,
    pub p_high: f64,
    /// Set when no prediction exceeded the confidence bar, in which case
    /// `p_true_given_high` is reported as 1.
    pub high_empty: bool,
}

pub fn entropy_bin(p: f64) -> usize {
    ((p * ENTROPY_BINS as f64).floor().max(0.0) as usize).min(ENTROPY_BINS - 1)
}

pub fn score_distribution_stats(preds: &[f64], truths: &[bool]) -> Result<ScoreStats, MetricError> {
    check(preds, truths)?;
    let n = preds.len() as f64;
    let mut bins = [0usize; ENTROPY_BINS];
    for &p in preds {
        bins[entropy_bin(p)] += 1;
    }
    let entropy_bits = -bins
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let q = c as f64 / n;
            q * q.log2()
        })
        .sum::<f64>();
    let high: Vec<bool> = preds
        .iter()
        .zip(truths)
        .filter(|(&p, _)| p > HIGH_CONFIDENCE)
        .map(|(_, &t)| t)
        .collect();
    let high_empty = high.is_empty();
    let p_true_given_high = if high_empty {
        1.0
    } else {
        ratio(high.iter().filter(|&&t| t).count(), high.len())
    };
    Ok(ScoreStats {
        entropy_bits: entropy_bits.max(0.0),
        p_true_given_high,
        p_high: ratio(high.len(), preds.len()),
        high_empty,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub f1: f64,
    pub auc: f64,
    pub gamma: f64,
    pub entropy_bits: f64,
    pub p_true_given_high: f64,
    pub p_high: f64,
    pub high_empty: bool,
    pub count: usize,
    #[serde(flatten)]
    pub confusion: Confusion,
}

impl Metrics {
    pub fn compute(preds: &[f64], truths: &[bool]) -> Result<Self, MetricError> {
        let confusion = confusion(preds, truths, DEFAULT_THRESHOLD)?;
        let stats = score_distribution_stats(preds, truths)?;
        Ok(Self {
            f1: confusion.f1(),
            auc: roc_auc(preds, truths)?,
            gamma: kruskal_gamma(preds, truths)?,
            entropy_bits: stats.entropy_bits,
            p_true_given_high: stats.p_true_given_high,
            p_high: stats.p_high,
            high_empty: stats.high_empty,
            count: preds.len(),
            confusion,
        })
    }
}

impl Metrics {
    /// One aligned row: name, parameter count, gamma, F1, AUC, entropy,
    /// precision above 0.95 and the fraction above 0.95.
    pub fn table_row(&self, model: &str, params: usize) -> String {
        let high = if self.high_empty {
            "n/a".to_owned()
        } else {
            format!("{:.3}", self.p_true_given_high)
        };
        format!(
            "{model:<13} {params:>8} {:>6.3} {:>6.3} {:>6.3} {:>7.3} {high:>11} {:>9.3}",
            self.gamma, self.f1, self.auc, self.entropy_bits, self.p_high
        )
    }

    pub fn table(&self, model: &str, params: usize) -> String {
        format!("{}\n{}\n", table_header(), self.table_row(model, params))
    }
}

pub fn table_header() -> String {
    format!(
        "{:<13} {:>8} {:>6} {:>6} {:>6} {:>7} {:>11} {:>9}",
        "model", "params", "gamma", "F1", "AUC", "entropy", "P(y=1|>.95)", "P(>.95)"
    )
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "f1={:.4} auc={:.4} gamma={:.4} entropy={:.3} p_high={:.4}",
            self.f1, self.auc, self.gamma, self.entropy_bits, self.p_high
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_examples() {
        assert_eq!(
            f1_score(&[0.9, 0.8, 0.1], &[true, false, false], 0.5),
            Ok(2.0 / 3.0)
        );
        assert_eq!(f1_score(&[0.9, 0.1], &[true, false], 0.5), Ok(1.0));
        assert_eq!(f1_score(&[0.1, 0.1], &[true, false], 0.5), Ok(0.0));
        assert_eq!(
            f1_score(&[0.1], &[true, false], 0.5),
            Err(MetricError::LengthMismatch {
                preds: 1,
                truths: 2
            })
        );
        assert_eq!(f1_score(&[], &[], 0.5), Err(MetricError::Empty));
    }

    #[test]
    fn auc_examples() {
        assert_eq!(
            roc_auc(&[0.9, 0.4, 0.6, 0.1], &[true, false, true, false]),
            Ok(1.0)
        );
        assert_eq!(roc_auc(&[0.1, 0.9], &[true, false]), Ok(0.0));
        assert_eq!(roc_auc(&[0.5, 0.5], &[true, false]), Ok(0.5));
        assert_eq!(
            roc_auc(&[0.5, 0.6], &[true, true]),
            Err(MetricError::SingleClass)
        );
    }

    #[test]
    fn gamma_examples() {
        let t = [true, false, true, false];
        assert_eq!(kruskal_gamma(&[0.9, 0.1, 0.8, 0.2], &t), Ok(1.0));
        assert_eq!(kruskal_gamma(&[0.3, 0.7], &[true, false]), Ok(-1.0));
        assert_eq!(kruskal_gamma(&[0.9, 0.8, 0.7, 0.1], &t), Ok(0.5));
        assert_eq!(
            kruskal_gamma(&[0.4, 0.4], &[true, false]),
            Err(MetricError::AllTied)
        );
    }

    #[test]
    fn distribution_examples() {
        let s = score_distribution_stats(&[0.96, 0.99, 0.2], &[true, false, false]).unwrap();
        assert_eq!(s.p_high, 2.0 / 3.0);
        assert_eq!(s.p_true_given_high, 0.5);
        assert!(!s.high_empty);
        let same = score_distribution_stats(&[0.3; 5], &[true; 5]).unwrap();
        assert_eq!(same.entropy_bits, 0.0);
        assert!(same.high_empty);
        assert_eq!(same.p_true_given_high, 1.0);
        let centers: Vec<f64> = (0..32).map(|k| (k as f64 + 0.5) / 32.0).collect();
        let s = score_distribution_stats(&centers, &[false; 32]).unwrap();
        assert_eq!(s.entropy_bits, 5.0);
        assert_eq!(entropy_bin(1.0), 31);
        assert_eq!(entropy_bin(0.0), 0);
    }

    #[test]
    fn metrics_json_keys() {
        let m = Metrics::compute(&[0.9, 0.2, 0.7, 0.4], &[true, false, false, true]).unwrap();
        let v = serde_json::to_value(&m).unwrap();
        for key in [
            "f1",
            "auc",
            "gamma",
            "entropy_bits",
            "p_true_given_high",
            "p_high",
            "tp",
            "fp",
            "tn",
            "fn",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(m.table("str-cnn", 27409).contains("27409"));
    }
}
