/// Index of the nearest cell center on a uniform 1-D grid of `cells` cells
/// spanning `[lower, upper]`, found by scanning every center. Equidistant
/// ties go to the higher index (boundary points belong to the upper cell).
pub fn nearest_center_index(x: f64, lower: f64, upper: f64, cells: usize) -> usize {
    let width = (upper - lower) / cells as f64;
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for k in 0..cells {
        let center = lower + (k as f64 + 0.5) * width;
        let d = (x - center).abs();
        if d <= best_dist {
            best = k;
            best_dist = d;
        }
    }
    best
}
