//! Three-point finite differences on nonuniform nodes.

/// Coefficients `(a, b, c)` of the centered first derivative at the middle
/// node, given left spacing `hm` and right spacing `hp`.
#[inline]
pub(crate) fn d1_centered(hm: f64, hp: f64) -> (f64, f64, f64) {
    (
        -hp / (hm * (hm + hp)),
        (hp - hm) / (hm * hp),
        hm / (hp * (hm + hp)),
    )
}

#[inline]
pub(crate) fn d2_centered(hm: f64, hp: f64) -> (f64, f64, f64) {
    (
        2.0 / (hm * (hm + hp)),
        -2.0 / (hm * hp),
        2.0 / (hp * (hm + hp)),
    )
}

/// Second-order first derivative of `f` sampled at increasing nodes `x`.
/// One-sided three-point formulas at both ends.
pub(crate) fn derivative(x: &[f64], f: &[f64]) -> Vec<f64> {
    let n = x.len();
    debug_assert!(n >= 3 && f.len() == n);
    let mut d = vec![0.0; n];
    let (h1, h2) = (x[1] - x[0], x[2] - x[1]);
    d[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * f[0] + (h1 + h2) / (h1 * h2) * f[1]
        - h1 / (h2 * (h1 + h2)) * f[2];
    for j in 1..n - 1 {
        let (a, b, c) = d1_centered(x[j] - x[j - 1], x[j + 1] - x[j]);
        d[j] = a * f[j - 1] + b * f[j] + c * f[j + 1];
    }
    let (h1, h2) = (x[n - 2] - x[n - 3], x[n - 1] - x[n - 2]);
    d[n - 1] = h2 / (h1 * (h1 + h2)) * f[n - 3] - (h1 + h2) / (h1 * h2) * f[n - 2]
        + (2.0 * h2 + h1) / (h2 * (h1 + h2)) * f[n - 1];
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_quadratics() {
        let x: Vec<f64> = (0..12).map(|i| (i as f64).powf(1.7) * 0.1).collect();
        let f: Vec<f64> = x.iter().map(|x| 3.0 * x * x - 2.0 * x + 1.0).collect();
        let d = derivative(&x, &f);
        for (xi, di) in x.iter().zip(&d) {
            assert!((di - (6.0 * xi - 2.0)).abs() < 1e-9, "{xi} {di}");
        }
        for j in 1..x.len() - 1 {
            let (a, b, c) = d2_centered(x[j] - x[j - 1], x[j + 1] - x[j]);
            let v = a * f[j - 1] + b * f[j] + c * f[j + 1];
            assert!((v - 6.0).abs() < 1e-8);
        }
    }
}
