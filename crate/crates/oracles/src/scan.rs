/// Convergence point by checking every suffix of the evaluation curve.
///
/// Values are shifted by the curve minimum; the answer is the earliest step
/// whose entire suffix stays at or above 90% of the shifted maximum, or the
/// final step when no suffix qualifies.
pub fn convergence_point_by_suffix_scan(curve: &[(u64, f64)]) -> Option<u64> {
    let lo = curve.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = curve.iter().map(|p| p.1 - lo).fold(f64::NEG_INFINITY, f64::max);
    for start in 0..curve.len() {
        if curve[start..].iter().all(|p| p.1 - lo >= 0.9 * hi) {
            return Some(curve[start].0);
        }
    }
    curve.last().map(|p| p.0)
}

/// Probability mass function of a buffer of `m` samples in which one sample
/// appears `lambda + 1` times and the remaining `m - lambda - 1` are distinct.
pub fn duplicate_mass_function(m: usize, lambda: usize) -> Vec<f64> {
    let mf = m as f64;
    let mut p = vec![(lambda as f64 + 1.0) / mf];
    p.extend(std::iter::repeat_n(1.0 / mf, m - lambda - 1));
    p
}
