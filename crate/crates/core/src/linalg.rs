//! Small dense-vector helpers.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `1 - cos(a, b)`, clamped to `[0, 2]`. `None` when either vector has zero
/// norm.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Option<f64> {
    let denom = norm(a) * norm(b);
    if denom == 0.0 || !denom.is_finite() {
        return None;
    }
    Some((1.0 - dot(a, b) / denom).clamp(0.0, 2.0))
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Sum that does not depend on the order of `values`.
pub fn sorted_sum(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    values.iter().sum()
}

/// Convex combination `sum_k weights[k] * vectors[k]`.
pub fn weighted_mean<'a, I>(vectors: I, weights: &[f64], dim: usize) -> Vec<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut out = vec![0.0; dim];
    for (v, &w) in vectors.into_iter().zip(weights) {
        for (o, x) in out.iter_mut().zip(v) {
            *o += w * x;
        }
    }
    out
}
