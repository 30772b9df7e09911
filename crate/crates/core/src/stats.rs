//! Means and standard errors of positive quantities given by their logs.

use serde::Serialize;

/// Sample mean of `exp(l_k)` and its standard error, kept in log form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogMean {
    pub log_mean: f64,
    /// Natural log of the linear-scale standard error of the mean.
    pub log_std_error: f64,
    /// Standard error divided by the mean; the delta-method standard error
    /// of `log_mean`.
    pub rel_error: f64,
    pub count: usize,
}

impl LogMean {
    /// Values are shifted by their maximum before exponentiation. Zero
    /// values (`-inf`) are allowed; an empty or all-zero input has
    /// `log_mean = -inf`.
    pub fn from_logs(logs: &[f64]) -> LogMean {
        let k = logs.len();
        let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if k == 0 || shift == f64::NEG_INFINITY {
            return LogMean {
                log_mean: f64::NEG_INFINITY,
                log_std_error: f64::NEG_INFINITY,
                rel_error: f64::NAN,
                count: k,
            };
        }
        let (mut s1, mut s2) = (0.0, 0.0);
        for &l in logs {
            let v = (l - shift).exp();
            s1 += v;
            s2 += v * v;
        }
        let kf = k as f64;
        let mean = s1 / kf;
        let var = if k > 1 {
            ((s2 / kf - mean * mean) * kf / (kf - 1.0)).max(0.0)
        } else {
            0.0
        };
        let se = (var / kf).sqrt();
        LogMean {
            log_mean: shift + mean.ln(),
            log_std_error: shift + se.ln(),
            rel_error: se / mean,
            count: k,
        }
    }
}

/// Mean of `exp(l)` with a batch-means standard error for a correlated
/// sequence. `runs` holds independent runs, e.g. one per chain, each cut
/// into `per_run` contiguous batches.
pub fn batch_means(runs: &[Vec<f64>], per_run: usize) -> LogMean {
    let all: Vec<f64> = runs.iter().flatten().copied().collect();
    let overall = LogMean::from_logs(&all);
    if overall.log_mean == f64::NEG_INFINITY {
        return overall;
    }
    let mut batch_logs = Vec::new();
    for run in runs {
        let b = per_run.min(run.len());
        if b == 0 {
            continue;
        }
        let size = run.len() / b;
        for k in 0..b {
            let end = if k + 1 == b { run.len() } else { (k + 1) * size };
            batch_logs.push(LogMean::from_logs(&run[k * size..end]).log_mean);
        }
    }
    let batches = LogMean::from_logs(&batch_logs);
    LogMean {
        log_std_error: batches.log_std_error,
        rel_error: (batches.log_std_error - overall.log_mean).exp(),
        ..overall
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_computation() {
        let values = [1.0f64, 2.0, 4.0, 5.0];
        let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        let r = LogMean::from_logs(&logs);
        assert!((r.log_mean.exp() - 3.0).abs() < 1e-12);
        // Sample variance 10/3, standard error sqrt(10/12).
        assert!((r.log_std_error.exp() - (10.0f64 / 12.0).sqrt()).abs() < 1e-12);
        assert!((r.rel_error - (10.0f64 / 12.0).sqrt() / 3.0).abs() < 1e-12);
    }

    #[test]
    fn huge_logs_do_not_overflow() {
        let r = LogMean::from_logs(&[1000.0, 1000.0 + 2f64.ln()]);
        assert!((r.log_mean - (1000.0 + 1.5f64.ln())).abs() < 1e-12);
        assert!(r.rel_error.is_finite());
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(LogMean::from_logs(&[]).log_mean, f64::NEG_INFINITY);
        let one = LogMean::from_logs(&[0.5]);
        assert_eq!(one.log_mean, 0.5);
        assert_eq!(one.rel_error, 0.0);
    }

    #[test]
    fn batch_means_of_iid_runs() {
        let runs = vec![vec![0.0, 1.0, 0.0, 1.0], vec![1.0, 0.0, 1.0, 0.0]];
        let r = batch_means(&runs, 2);
        let direct = LogMean::from_logs(&runs.concat());
        assert!((r.log_mean - direct.log_mean).abs() < 1e-15);
        assert!(r.rel_error.is_finite());
    }
}
