//! Log-domain accumulation helpers shared by the filter updates.

/// `ln(exp(a) + exp(b))` without leaving the log domain.
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln(sum_i exp(x_i))`; empty input yields negative infinity.
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// Table of `ln(n!)` for `n = 0..=n_max`.
pub(crate) fn ln_factorials(n_max: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(n_max + 1);
    t.push(0.0);
    for n in 1..=n_max {
        t.push(t[n - 1] + (n as f64).ln());
    }
    t
}
