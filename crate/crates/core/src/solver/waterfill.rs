/// Water-filling power allocation maximizing `Σ log(1 + g_i p_i / σ²)`
/// subject to `p ≥ 0`, `Σ p = budget`. Channels with zero gain get no power.
pub fn water_filling(gains: &[f64], budget: f64, noise: f64) -> Vec<f64> {
    let n = gains.len();
    if n == 0 || !(budget > 0.0) {
        return vec![0.0; n];
    }
    // floor_i = σ² / g_i, sorted ascending over the usable channels
    let mut order: Vec<usize> = (0..n).filter(|&i| gains[i] > 0.0).collect();
    if order.is_empty() {
        return vec![0.0; n];
    }
    order.sort_by(|&a, &b| (noise / gains[a]).total_cmp(&(noise / gains[b])));
    let mut level = 0.0;
    let mut active = 0;
    let mut sum_floor = 0.0;
    for (k, &i) in order.iter().enumerate() {
        sum_floor += noise / gains[i];
        let candidate = (budget + sum_floor) / (k + 1) as f64;
        let next_floor = order.get(k + 1).map(|&j| noise / gains[j]);
        active = k + 1;
        level = candidate;
        if next_floor.is_none_or(|f| f >= candidate) {
            break;
        }
    }
    let mut p = vec![0.0; n];
    if active == 1 {
        p[order[0]] = budget;
        return p;
    }
    for &i in order.iter().take(active) {
        p[i] = (level - noise / gains[i]).max(0.0);
    }
    p
}

/// Capacity in bits of parallel channels under a water-filled allocation.
pub fn water_filling_capacity(gains: &[f64], budget: f64, noise: f64) -> f64 {
    water_filling(gains, budget, noise)
        .iter()
        .zip(gains)
        .map(|(p, g)| (1.0 + g * p / noise).log2())
        .sum()
}
