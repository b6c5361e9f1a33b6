//! Dense slice arithmetic shared by the learner and the map.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four accumulators let the compiler vectorize the reduction.
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let tail: f64 = chunks_a
        .remainder()
        .iter()
        .zip(chunks_b.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        for k in 0..4 {
            acc[k] += ca[k] * cb[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `(dot(w, x), dot(w, w))` in one pass, with the same rounding as two
/// separate calls.
#[inline]
pub fn dot_and_square(w: &[f64], x: &[f64]) -> (f64, f64) {
    debug_assert_eq!(w.len(), x.len());
    let mut acc = [0.0f64; 4];
    let mut sq = [0.0f64; 4];
    let chunks_w = w.chunks_exact(4);
    let chunks_x = x.chunks_exact(4);
    let (mut tail, mut tail_sq) = (0.0, 0.0);
    for (a, b) in chunks_w.remainder().iter().zip(chunks_x.remainder()) {
        tail += a * b;
        tail_sq += a * a;
    }
    for (cw, cx) in chunks_w.zip(chunks_x) {
        for k in 0..4 {
            acc[k] += cw[k] * cx[k];
            sq[k] += cw[k] * cw[k];
        }
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3]) + tail, (sq[0] + sq[1]) + (sq[2] + sq[3]) + tail_sq)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine of the angle between `a` and `b`, clamped to `[-1, 1]`. `None`
/// when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return None;
    }
    Some((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
