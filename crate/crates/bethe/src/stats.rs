//! Small statistical helpers shared by the estimators: means and standard
//! errors, batch means, log-domain accumulation, least-squares lines, and
//! binomial error bars.

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

/// Standard error of the mean assuming independent samples.
pub fn stderr_mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    std_dev(xs) / (xs.len() as f64).sqrt()
}

/// Batch-means standard error: partition into `n_batches` contiguous batches
/// and use the spread of batch means. More honest than the iid formula when
/// neighboring samples are correlated.
pub fn batch_means_stderr(xs: &[f64], n_batches: usize) -> f64 {
    let n = xs.len();
    if n < 2 * n_batches || n_batches < 2 {
        return stderr_mean(xs);
    }
    let batch_len = n / n_batches;
    let means: Vec<f64> = (0..n_batches)
        .map(|b| mean(&xs[b * batch_len..(b + 1) * batch_len]))
        .collect();
    std_dev(&means) / (n_batches as f64).sqrt()
}

/// log(Σ exp(x_i)) with max-shift; -inf for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|x| (x - m).exp()).sum();
    m + s.ln()
}

/// log of the arithmetic mean of exp(x_i).
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    log_sum_exp(xs) - (xs.len() as f64).ln()
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Ordinary least squares y = a + b x.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return LineFit { slope: 0.0, intercept: ys.first().copied().unwrap_or(0.0), slope_stderr: f64::NAN };
    }
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let dof = (n - 2.0).max(1.0);
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let slope_stderr = (ss_res / dof / sxx).sqrt();
    LineFit { slope, intercept, slope_stderr }
}

/// Binomial standard error of an empirical probability.
pub fn binomial_stderr(p_hat: f64, n: usize) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    (p_hat * (1.0 - p_hat) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit_recovers_exact_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 2.0 * x).collect();
        let fit = fit_line(&xs, &ys);
        assert!((fit.slope - -2.0).abs() < 1e-12);
        assert!((fit.intercept - 3.0).abs() < 1e-12);
        assert!(fit.slope_stderr < 1e-9);
    }

    #[test]
    fn log_mean_exp_matches_direct() {
        let xs = [0.1, -2.0, 3.5, 0.0];
        let direct = (xs.iter().map(|x: &f64| x.exp()).sum::<f64>() / 4.0).ln();
        assert!((log_mean_exp(&xs) - direct).abs() < 1e-12);
    }

    #[test]
    fn batch_means_reduces_to_iid_for_short_input() {
        let xs = [1.0, 2.0, 3.0];
        assert_eq!(batch_means_stderr(&xs, 50), stderr_mean(&xs));
    }
}
