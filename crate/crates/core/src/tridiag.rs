/// Solve `A x = d` for tridiagonal `A` with sub-diagonal `a`, diagonal `b`
/// and super-diagonal `c` (`a[0]` and `c[n-1]` are ignored). `d` is
/// overwritten with the solution.
///
/// No pivoting: intended for the diagonally dominant M-matrices produced by
/// implicit diffusion.
pub(crate) fn solve_in_place(
    a: &[f64],
    b: &[f64],
    c: &[f64],
    d: &mut [f64],
    scratch: &mut Vec<f64>,
) {
    let n = d.len();
    debug_assert!(a.len() == n && b.len() == n && c.len() == n);
    scratch.clear();
    scratch.resize(n, 0.0);
    let cp = scratch;
    cp[0] = c[0] / b[0];
    d[0] /= b[0];
    for i in 1..n {
        let denom = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / denom;
        d[i] = (d[i] - a[i] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] -= cp[i] * d[i + 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_dominant_system() {
        let n = 9;
        let a: Vec<f64> = (0..n).map(|i| -1.0 - 0.1 * i as f64).collect();
        let c: Vec<f64> = (0..n).map(|i| -0.5 - 0.05 * i as f64).collect();
        let b: Vec<f64> = (0..n).map(|i| 4.0 + i as f64).collect();
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut d: Vec<f64> = (0..n)
            .map(|i| {
                let mut v = b[i] * x[i];
                if i > 0 {
                    v += a[i] * x[i - 1];
                }
                if i + 1 < n {
                    v += c[i] * x[i + 1];
                }
                v
            })
            .collect();
        let mut scratch = Vec::new();
        solve_in_place(&a, &b, &c, &mut d, &mut scratch);
        for (u, v) in d.iter().zip(&x) {
            assert!((u - v).abs() < 1e-13);
        }
    }
}
