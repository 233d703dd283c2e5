//! Filon-type panel rule for `∫ F(ω) e^{iτω} dω`.
//!
//! `F` is expanded in Legendre polynomials from its values at Gauss–Legendre
//! nodes; the moments `∫_{-1}^{1} P_k(x) e^{iθx} dx = 2 i^k j_k(θ)` are exact,
//! so the panel width is set by the smoothness of `F` alone and not by `τ`.

// Nodes, weights and Legendre values are parallel arrays indexed together.
#![allow(clippy::needless_range_loop)]

use std::sync::OnceLock;

use num_complex::Complex64;

/// Nodes per panel.
pub const NODES: usize = 20;

/// Below this phase the oscillating factor is integrated by plain
/// Gauss–Legendre; the rule is exact to ~1e-18 there.
const DIRECT_THETA: f64 = 1.0;

struct LegendreTable {
    nodes: [f64; NODES],
    weights: [f64; NODES],
    /// `p[k][j] = P_k(nodes[j])`
    p: [[f64; NODES]; NODES],
}

fn table() -> &'static LegendreTable {
    static TABLE: OnceLock<LegendreTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let (nodes, weights) = gauss_legendre(NODES);
        let mut n = [0.0; NODES];
        let mut w = [0.0; NODES];
        n.copy_from_slice(&nodes);
        w.copy_from_slice(&weights);
        let mut p = [[0.0; NODES]; NODES];
        for j in 0..NODES {
            let x = n[j];
            let (mut p0, mut p1) = (1.0, x);
            p[0][j] = 1.0;
            if NODES > 1 {
                p[1][j] = x;
            }
            for k in 2..NODES {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p[k][j] = p2;
                p0 = p1;
                p1 = p2;
            }
        }
        LegendreTable { nodes: n, weights: w, p }
    })
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_n(x), p0 = P_{n-1}(x)
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
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

/// Spherical Bessel functions `j_0 .. j_{n-1}` at `theta >= 0`.
pub fn spherical_bessel(theta: f64, out: &mut [f64]) {
    let n = out.len();
    if n == 0 {
        return;
    }
    if theta == 0.0 {
        out.fill(0.0);
        out[0] = 1.0;
        return;
    }
    let (s, c) = theta.sin_cos();
    let j0 = s / theta;
    let j1 = s / (theta * theta) - c / theta;
    if theta >= n as f64 {
        // upward recurrence is stable once theta exceeds the order
        out[0] = j0;
        if n > 1 {
            out[1] = j1;
        }
        for k in 2..n {
            out[k] = (2.0 * k as f64 - 1.0) / theta * out[k - 1] - out[k - 2];
        }
        return;
    }
    // Miller's backward recurrence, normalised with sum (2k+1) j_k^2 = 1.
    let start = n + 40 + theta.ceil() as usize;
    let mut next = 0.0;
    let mut cur = 1.0;
    let mut sum = 0.0;
    let mut vals = vec![0.0; n];
    for k in (0..=start).rev() {
        if k < n {
            vals[k] = cur;
        }
        sum += (2.0 * k as f64 + 1.0) * cur * cur;
        let prev = (2.0 * k as f64 + 1.0) / theta * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > 1e100 {
            let scale = 1e-100;
            next *= scale;
            cur *= scale;
            sum *= scale * scale;
            for v in vals.iter_mut() {
                *v *= scale;
            }
        }
    }
    let mut norm = 1.0 / sum.sqrt();
    // fix the sign from whichever of j0, j1 is better conditioned
    let reference = if j0.abs() >= j1.abs() { (j0, vals[0]) } else { (j1, vals.get(1).copied().unwrap_or(0.0)) };
    if reference.0 * reference.1 < 0.0 {
        norm = -norm;
    }
    for (o, v) in out.iter_mut().zip(vals) {
        *o = v * norm;
    }
}

/// Panel estimate for the non-oscillatory and oscillatory parts at once.
#[derive(Debug, Clone, Copy)]
pub struct FilonPanel {
    /// `∫ F`
    pub plain: f64,
    /// `∫ F e^{iτω}` for each requested frequency multiplier.
    pub fourier: [Complex64; 2],
    /// Truncation estimate from the trailing Legendre coefficients.
    pub abs_error: f64,
    /// `∫ |F|` (Gauss–Legendre).
    pub abs_integral: f64,
}

/// Applies the rule on `[a, b]` for phases `taus[0]`, `taus[1]`.
pub fn filon_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, taus: [f64; 2]) -> FilonPanel {
    let tab = table();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut vals = [0.0; NODES];
    let mut plain = 0.0;
    let mut abs_integral = 0.0;
    for j in 0..NODES {
        let v = f(mid + half * tab.nodes[j]);
        vals[j] = v;
        plain += tab.weights[j] * v;
        abs_integral += tab.weights[j] * v.abs();
    }
    let mut coeffs = [0.0; NODES];
    for (k, c) in coeffs.iter_mut().enumerate() {
        let mut acc = 0.0;
        for j in 0..NODES {
            acc += tab.weights[j] * vals[j] * tab.p[k][j];
        }
        *c = 0.5 * (2.0 * k as f64 + 1.0) * acc;
    }
    let tail = coeffs[NODES - 1].abs().max(coeffs[NODES - 2].abs());
    let abs_error = 2.0 * half * 4.0 * tail;

    let mut fourier = [Complex64::new(0.0, 0.0); 2];
    let mut bessel = [0.0; NODES];
    for (slot, &tau) in fourier.iter_mut().zip(taus.iter()) {
        if tau == 0.0 {
            *slot = Complex64::new(plain * half, 0.0);
            continue;
        }
        let theta = tau * half;
        let phase = Complex64::from_polar(half, tau * mid);
        let local = if theta.abs() <= DIRECT_THETA {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..NODES {
                acc += Complex64::from_polar(tab.weights[j] * vals[j], theta * tab.nodes[j]);
            }
            acc
        } else {
            spherical_bessel(theta.abs(), &mut bessel);
            let sign = theta.signum();
            let mut acc = Complex64::new(0.0, 0.0);
            // i^k for positive theta; conjugate for negative
            let powers = [
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, sign),
                Complex64::new(-1.0, 0.0),
                Complex64::new(0.0, -sign),
            ];
            for k in 0..NODES {
                acc += powers[k % 4] * (2.0 * coeffs[k] * bessel[k]);
            }
            acc
        };
        *slot = phase * local;
    }
    FilonPanel { plain: plain * half, fourier, abs_error, abs_integral: abs_integral * half }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_weights_sum_to_two() {
        let (x, w) = gauss_legendre(NODES);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // exact for x^38
        let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(38)).sum();
        assert!((m - 2.0 / 39.0).abs() < 1e-14);
    }

    #[test]
    fn bessel_matches_closed_forms() {
        for &theta in &[1e-3, 0.5, 2.0, 7.3, 19.9, 25.0, 300.0] {
            let mut j = [0.0; 4];
            spherical_bessel(theta, &mut j);
            let (s, c) = (theta.sin(), theta.cos());
            let j0 = s / theta;
            let j1 = s / theta.powi(2) - c / theta;
            let j2 = (3.0 / theta.powi(2) - 1.0) * s / theta - 3.0 * c / theta.powi(2);
            let scale = 1e-13 / theta.min(1.0).powi(2);
            assert!((j[0] - j0).abs() < 1e-14, "j0 at {theta}");
            assert!((j[1] - j1).abs() < 1e-13, "j1 at {theta}");
            if theta > 0.1 {
                assert!((j[2] - j2).abs() < scale, "j2 at {theta}: {} vs {}", j[2], j2);
            }
        }
    }

    #[test]
    fn filon_panel_integrates_exponential_times_fourier() {
        // ∫_0^3 e^{-x} e^{iτx} dx = (1 - e^{(iτ-1)3}) / (1 - iτ)
        for &tau in &[0.0, 0.2, 5.0, 100.0, 1e5] {
            let p = filon_panel(&|x: f64| (-x).exp(), 0.0, 3.0, [tau, 2.0 * tau]);
            let z = Complex64::new(-1.0, tau);
            let exact = ((z * 3.0).exp() - 1.0) / z;
            assert!((p.fourier[0] - exact).norm() < 1e-13, "tau={tau}: {}", (p.fourier[0] - exact).norm());
            assert!((p.plain - (1.0 - (-3f64).exp())).abs() < 1e-14);
        }
    }
}
