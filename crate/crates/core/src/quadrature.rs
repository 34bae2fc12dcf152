//! Composite Gauss-Legendre quadrature.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::summation::ComplexSum;

/// Points per panel.
pub const GAUSS_ORDER: usize = 8;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // three-term recurrence for P_n and its derivative
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Integrates `f` over `[lo, hi]` with `panels` equal panels.
pub fn integrate_complex<F>(f: F, lo: f64, hi: f64, panels: usize) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    let (nodes, weights) = gauss_legendre(GAUSS_ORDER);
    let panels = panels.max(1);
    let h = (hi - lo) / panels as f64;
    let mut acc = ComplexSum::new();
    for p in 0..panels {
        let a = lo + h * p as f64;
        let mid = a + 0.5 * h;
        for (x, w) in nodes.iter().zip(&weights) {
            acc += f(mid + 0.5 * h * x) * (0.5 * h * w);
        }
    }
    acc.value()
}
