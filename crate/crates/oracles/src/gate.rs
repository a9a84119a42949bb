use crate::quadrature::integrate_piecewise;

/// Epanechnikov kernel with bandwidth `h`, written out directly.
pub fn epanechnikov(u: f64, h: f64) -> f64 {
    let t = u / h;
    if t.abs() <= 1.0 {
        0.75 / h * (1.0 - t * t)
    } else {
        0.0
    }
}

/// Reward density estimate by numerically integrating the count-normalized
/// kernel mixture over `[r - beta, r + beta]`.
pub fn rde_by_quadrature(r: f64, rewards: &[f64], h: f64, beta: f64) -> f64 {
    if rewards.is_empty() {
        return 0.0;
    }
    let n = rewards.len() as f64;
    let density = |y: f64| rewards.iter().map(|&ri| epanechnikov(y - ri, h)).sum::<f64>() / n;
    let breaks: Vec<f64> = rewards.iter().flat_map(|&ri| [ri - h, ri + h]).collect();
    integrate_piecewise(&density, r - beta, r + beta, &breaks, 1e-13)
}

/// Replays the insertion gate for a stream of rewards that all land in one
/// abstract cell. Returns the accept/reject decision for every element.
pub fn replay_single_cell_gate(
    stream: &[f64],
    epsilon: f64,
    eta: f64,
    beta: f64,
    h: f64,
) -> Vec<bool> {
    let mut kept: Vec<f64> = Vec::new();
    stream
        .iter()
        .map(|&r| {
            let threshold = epsilon / (kept.len() as f64 / eta).exp();
            let accept = rde_by_quadrature(r, &kept, h, beta) < threshold;
            if accept {
                kept.push(r);
            }
            accept
        })
        .collect()
}
