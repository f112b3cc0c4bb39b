//! Gauss–Legendre quadrature on interval unions.

/// Nodes and weights of the `n`-point rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// Composite rule over the pieces `[a, b]`, each first split at `cuts` and
/// then into panels no wider than `max_width`.
pub fn composite_rule(pieces: &[(f64, f64)], cuts: &[f64], max_width: f64, order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let mut out = Vec::new();
    for &(a, b) in pieces {
        if !(b > a) {
            continue;
        }
        let mut edges = vec![a];
        edges.extend(cuts.iter().copied().filter(|&c| c > a && c < b));
        edges.push(b);
        edges.sort_by(f64::total_cmp);
        for pair in edges.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            let panels = ((hi - lo) / max_width).ceil().max(1.0) as usize;
            let step = (hi - lo) / panels as f64;
            for k in 0..panels {
                let c = lo + (k as f64 + 0.5) * step;
                for (xi, wi) in x.iter().zip(&w) {
                    out.push((c + 0.5 * step * xi, 0.5 * step * wi));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn integrates_polynomials_exactly() {
        for n in [1, 2, 5, 8, 16] {
            let (x, w) = gauss_legendre(n);
            for k in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-14, "n={n} k={k}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn composite_splits_at_cuts() {
        let rule = composite_rule(&[(0.0, 1.0), (2.0, 3.0)], &[0.5, 2.25], 0.3, 4);
        let total: f64 = rule.iter().map(|p| p.1).sum();
        assert_relative_eq!(total, 2.0, epsilon = 1e-14);
        // A step function with jumps at the cuts is integrated exactly.
        let f = |t: f64| if t < 0.5 || (2.0..2.25).contains(&t) { 1.0 } else { 3.0 };
        let q: f64 = rule.iter().map(|&(t, w)| w * f(t)).sum();
        assert_relative_eq!(q, 0.5 + 1.5 + 0.25 + 2.25, epsilon = 1e-13);
    }
}
