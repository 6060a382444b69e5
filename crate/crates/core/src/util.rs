//! Small numeric helpers shared across modules.

/// `ceil(frac * n)` guarded against floating-point noise just above an
/// integer (e.g. `0.3 * 100 = 30.000000000000004` must yield 30, not 31).
pub(crate) fn ceil_frac(frac: f64, n: usize) -> usize {
    let raw = libm::ceil(frac * n as f64 - 1e-9);
    if raw <= 0.0 {
        0
    } else {
        raw as usize
    }
}

/// `floor(a / b)` with the same guard on the other side, so exact ratios
/// that land just below an integer still count it (0.3 / 0.1 -> 3).
pub(crate) fn floor_ratio(a: f64, b: f64) -> usize {
    let raw = libm::floor(a / b + 1e-9);
    if raw <= 0.0 {
        0
    } else {
        raw as usize
    }
}

/// Cosine similarity with the zero-vector convention: if either vector has
/// (near-)zero norm the similarity is defined as 0.
pub(crate) fn cosine(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na < 1e-24 || nb < 1e-24 {
        return 0.0;
    }
    if dot == na && na == nb {
        // identical vectors: avoid sqrt rounding, similarity is exactly 1
        return 1.0;
    }
    dot / (libm::sqrt(na) * libm::sqrt(nb))
}

pub(crate) fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_frac_absorbs_float_noise() {
        assert_eq!(ceil_frac(0.3, 100), 30); // 0.3*100 = 30.000000000000004
        assert_eq!(ceil_frac(0.15, 20), 3); // 0.15*20 = 3.0000000000000004
        assert_eq!(ceil_frac(0.01, 200), 2);
        assert_eq!(ceil_frac(0.5, 101), 51);
        assert_eq!(ceil_frac(1.0, 7), 7);
        assert_eq!(ceil_frac(0.0, 7), 0);
    }

    #[test]
    fn floor_ratio_counts_exact_multiples() {
        assert_eq!(floor_ratio(0.3, 0.1), 3); // naive floor gives 2
        assert_eq!(floor_ratio(0.40, 0.01), 40);
        assert_eq!(floor_ratio(0.35, 0.1), 3);
    }

    #[test]
    fn cosine_conventions() {
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
        assert!((cosine(&[1.0, 0.0], &[1.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!((cosine(&[1.0, 0.0], &[-1.0, 0.0]) + 1.0).abs() < 1e-15);
    }
}
