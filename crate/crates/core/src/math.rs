//! Small numeric helpers shared across modules.

/// Pairwise summation. Keeps the result independent of how callers chunk
/// their work: sequential and parallel paths agree to ~1e-12 relative.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise sum of `f(x)` over a slice without allocating.
pub fn pairwise_sum_by<F: Fn(f64) -> f64 + Copy>(values: &[f64], f: F) -> f64 {
    const LEAF: usize = 64;
    if values.len() <= LEAF {
        return values.iter().map(|&x| f(x)).sum();
    }
    let mid = values.len() / 2;
    pairwise_sum_by(&values[..mid], f) + pairwise_sum_by(&values[mid..], f)
}

/// Mean via pairwise summation. Panics on empty input.
pub fn mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

/// Unbiased (n-1 divisor) sample variance around the sample mean.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    assert!(n >= 2, "variance needs at least two values");
    let m = mean(values);
    pairwise_sum_by(values, |x| {
        let d = x - m;
        d * d
    }) / (n - 1) as f64
}
