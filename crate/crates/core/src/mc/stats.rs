//! Weighted sample statistics.

/// Kish effective sample size `(Σw)² / Σw²`.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if s2 == 0.0 {
        0.0
    } else {
        s * s / s2
    }
}

pub fn weighted_mean(values: &[f64], weights: &[f64]) -> Option<f64> {
    let s: f64 = weights.iter().sum();
    if !(s > 0.0) {
        return None;
    }
    Some(values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / s)
}

/// Kolmogorov–Smirnov distance between the weighted empirical law of
/// `values` and the continuous CDF `cdf`.
pub fn weighted_ks(values: &[f64], weights: &[f64], cdf: impl Fn(f64) -> f64) -> Option<f64> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut acc = 0.0;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let x = values[idx[i]];
        let f = cdf(x);
        let below = acc / total;
        // ties share one jump
        while i < idx.len() && values[idx[i]] == x {
            acc += weights[idx[i]];
            i += 1;
        }
        let above = acc / total;
        d = d.max((below - f).abs()).max((above - f).abs());
    }
    Some(d)
}

/// CDF of the exponential law with the given mean.
pub fn exp_cdf(mean: f64) -> impl Fn(f64) -> f64 {
    move |x| if x <= 0.0 { 0.0 } else { -(-x / mean).exp_m1() }
}

/// Weighted Pearson correlation.
pub fn weighted_correlation(x: &[f64], y: &[f64], weights: &[f64]) -> Option<f64> {
    let mx = weighted_mean(x, weights)?;
    let my = weighted_mean(y, weights)?;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for ((a, b), w) in x.iter().zip(y).zip(weights) {
        sxy += w * (a - mx) * (b - my);
        sxx += w * (a - mx) * (a - mx);
        syy += w * (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}
