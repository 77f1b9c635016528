//! Precision/recall/F1 and Pass@k / Majority@k aggregation.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores from true-positive, false-positive and false-negative counts.
/// Empty denominators score 0.
pub fn prf(tp: usize, fp: usize, fn_: usize) -> Prf {
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf {
        precision,
        recall,
        f1,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AggregateError {
    #[error("no runs to aggregate")]
    EmptyRuns,
    #[error("scenario {index} has {got} runs, expected {expected}")]
    RaggedRuns {
        index: usize,
        got: usize,
        expected: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessAggregate {
    pub scenarios: usize,
    pub k: usize,
    /// Fraction of scenarios with at least one successful run.
    pub pass_at_k: f64,
    /// Fraction of scenarios where more than half of the runs succeed.
    pub majority_at_k: f64,
    /// `pass_at_k - majority_at_k`.
    pub gap: f64,
}

/// Aggregates per-scenario success vectors, each holding `k` runs.
pub fn aggregate_success(runs: &[Vec<bool>]) -> Result<SuccessAggregate, AggregateError> {
    let k = runs.first().map(Vec::len).ok_or(AggregateError::EmptyRuns)?;
    if k == 0 {
        return Err(AggregateError::EmptyRuns);
    }
    let mut pass = 0;
    let mut majority = 0;
    for (index, r) in runs.iter().enumerate() {
        if r.len() != k {
            return Err(AggregateError::RaggedRuns {
                index,
                got: r.len(),
                expected: k,
            });
        }
        let ok = r.iter().filter(|&&b| b).count();
        if ok > 0 {
            pass += 1;
        }
        if 2 * ok > k {
            majority += 1;
        }
    }
    let pass_at_k = ratio(pass, runs.len());
    let majority_at_k = ratio(majority, runs.len());
    Ok(SuccessAggregate {
        scenarios: runs.len(),
        k,
        pass_at_k,
        majority_at_k,
        gap: pass_at_k - majority_at_k,
    })
}

/// Arithmetic mean; 0 for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn prf_basics() {
        assert_eq!(prf(0, 0, 0), Prf::default());
        let p = prf(1, 1, 0);
        assert_eq!((p.precision, p.recall), (0.5, 1.0));
        assert!((p.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(prf(0, 3, 2).f1, 0.0);
    }

    #[test]
    fn empty_and_ragged() {
        assert_eq!(aggregate_success(&[]), Err(AggregateError::EmptyRuns));
        assert_eq!(aggregate_success(&[vec![]]), Err(AggregateError::EmptyRuns));
        assert!(matches!(
            aggregate_success(&[vec![true], vec![true, false]]),
            Err(AggregateError::RaggedRuns { index: 1, .. })
        ));
    }

    #[test]
    fn even_k_tie_is_not_a_majority() {
        let a = aggregate_success(&[vec![true, false]]).unwrap();
        assert_eq!((a.pass_at_k, a.majority_at_k, a.gap), (1.0, 0.0, 1.0));
    }

    #[test]
    fn random_vectors_match_counting_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let k = rng.random_range(1..8);
            let n = rng.random_range(1..20);
            let runs: Vec<Vec<bool>> = (0..n)
                .map(|_| (0..k).map(|_| rng.random_bool(0.5)).collect())
                .collect();
            let got = aggregate_success(&runs).unwrap();

            let mut any = 0usize;
            let mut most = 0usize;
            for r in &runs {
                let mut c = 0;
                for &b in r {
                    if b {
                        c += 1;
                    }
                }
                if c >= 1 {
                    any += 1;
                }
                if c * 2 > k {
                    most += 1;
                }
            }
            assert_eq!(got.pass_at_k, any as f64 / n as f64);
            assert_eq!(got.majority_at_k, most as f64 / n as f64);
            assert!(got.gap >= 0.0);
            assert_eq!(got.gap, got.pass_at_k - got.majority_at_k);
        }
    }
}
