//! Eigen-decomposition of the bordered ("arrowhead") matrix
//!
//! ```text
//! K = [ d₀  gᵀ ]
//!     [ g   D  ],   D = diag(d₁ < d₂ < … < d_N)
//! ```
//!
//! Eigenvalues are the roots of the secular function
//! `f(λ) = d₀ − λ − Σ g_i² / (d_i − λ)`, one in each gap of the interlaced
//! poles. Each root is stored relative to its nearest pole, so that the
//! differences `λ_k − d_i` entering the eigenvectors are accurate to working
//! precision. The couplings are then recomputed from the computed roots
//! (Löwner's formula), which makes the eigenvectors numerically orthogonal
//! without reorthogonalization. Cost is `O(N²)` time and `O(N)` memory.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Root `λ = d[pole] + offset`; `pole = 0` stands for `d₀`-free roots below
/// the first pole, measured from `d₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub pole: usize,
    pub offset: f64,
}

#[derive(Debug, Clone)]
pub struct ArrowheadEigen {
    /// Poles `d₁..d_N` (0-based here).
    poles: Vec<f64>,
    /// Couplings after recomputation, signs of the input couplings.
    g_hat: Vec<f64>,
    /// One root per coupled pole plus one, ascending.
    roots: Vec<Root>,
    /// First component of each normalised eigenvector.
    head: Vec<f64>,
    /// Indices of poles whose coupling vanished (eigenvalue `d_i`, vector `e_i`).
    deflated: Vec<usize>,
    d0: f64,
}

impl ArrowheadEigen {
    /// `d0` is the corner entry, `poles` must be strictly increasing.
    pub fn new(d0: f64, poles: &[f64], couplings: &[f64]) -> Result<Self> {
        if poles.len() != couplings.len() {
            return Err(Error::EigenFailure("pole and coupling counts differ".into()));
        }
        if poles.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::EigenFailure("poles must be strictly increasing".into()));
        }
        if !d0.is_finite() || poles.iter().chain(couplings).any(|x| !x.is_finite()) {
            return Err(Error::EigenFailure("non-finite matrix entry".into()));
        }
        let scale = poles.iter().fold(d0.abs(), |m, d| m.max(d.abs())).max(f64::MIN_POSITIVE);
        let tiny = f64::EPSILON * scale;
        let mut live_poles = Vec::new();
        let mut live_g = Vec::new();
        let mut live_index = Vec::new();
        let mut deflated = Vec::new();
        for (i, (&d, &g)) in poles.iter().zip(couplings).enumerate() {
            if g.abs() <= tiny * 1e-8 {
                deflated.push(i);
            } else {
                live_poles.push(d);
                live_g.push(g);
                live_index.push(i);
            }
        }
        let n = live_poles.len();
        let g2: Vec<f64> = live_g.iter().map(|g| g * g).collect();
        let roots: Vec<Root> =
            (0..=n).into_par_iter().map(|k| solve_root(d0, &live_poles, &g2, k)).collect::<Result<_>>()?;

        // Löwner: ĝ_i² = −Π_k (λ_k − d_i) / Π_{j≠i} (d_j − d_i), as a product
        // of ratios to stay in range.
        let g_hat: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let di = live_poles[i];
                let mut prod = -diff(&live_poles, roots[n], di) * diff(&live_poles, roots[i], di);
                for j in 0..n {
                    if j != i {
                        prod *= diff(&live_poles, roots[j], di) / (live_poles[j] - di);
                    }
                }
                prod.abs().sqrt().copysign(live_g[i])
            })
            .collect();
        let head: Vec<f64> = roots
            .par_iter()
            .map(|&r| {
                let s: f64 = (0..n)
                    .map(|i| {
                        let x = g_hat[i] / diff(&live_poles, r, live_poles[i]);
                        x * x
                    })
                    .sum();
                1.0 / (1.0 + s).sqrt()
            })
            .collect();

        // map live data back onto full pole indices
        let mut full_g = vec![0.0; poles.len()];
        for (k, &i) in live_index.iter().enumerate() {
            full_g[i] = g_hat[k];
        }
        let roots = roots
            .into_iter()
            .map(|r| Root { pole: live_index.get(r.pole).copied().unwrap_or(usize::MAX), offset: r.offset })
            .collect();
        Ok(Self { poles: poles.to_vec(), g_hat: full_g, roots, head, deflated, d0 })
    }

    pub fn dim(&self) -> usize {
        self.poles.len() + 1
    }

    pub fn corner(&self) -> f64 {
        self.d0
    }

    /// Eigenvalues of the coupled sector (ascending), without deflated poles.
    pub fn coupled_eigenvalues(&self) -> Vec<f64> {
        self.roots.iter().map(|r| self.value(*r)).collect()
    }

    /// All eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut all = self.coupled_eigenvalues();
        all.extend(self.deflated.iter().map(|&i| self.poles[i]));
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        all
    }

    fn value(&self, r: Root) -> f64 {
        if r.pole == usize::MAX {
            self.d0 + r.offset
        } else {
            self.poles[r.pole] + r.offset
        }
    }

    /// `λ_k − d_i` without cancellation.
    fn gap(&self, r: Root, i: usize) -> f64 {
        if r.pole == usize::MAX {
            self.d0 + r.offset - self.poles[i]
        } else {
            (self.poles[r.pole] - self.poles[i]) + r.offset
        }
    }

    /// Eigenvalue and the squared weight `|⟨e₀|φ_k⟩|²` for every coupled
    /// eigenvector; deflated eigenvectors have zero weight on `e₀`.
    pub fn head_weights(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.roots.iter().zip(&self.head).map(|(r, h)| (self.value(*r), h * h))
    }

    /// Applies `F(K)` to a vector concentrated on the first coordinate:
    /// returns `F(K) e₀ · x0` in full, using `F` evaluated per eigenvalue.
    ///
    /// With `φ_k = h_k (1, ĝ_i / (λ_k − d_i))`, the result is
    /// `Σ_k F(λ_k) h_k² (1, ĝ_i/(λ_k − d_i))`.
    pub fn apply_to_head(&self, f: impl Fn(f64) -> f64 + Sync) -> Vec<f64> {
        let n = self.poles.len();
        let coeff: Vec<f64> = self.roots.iter().zip(&self.head).map(|(r, h)| f(self.value(*r)) * h * h).collect();
        let mut out = vec![0.0; n + 1];
        out[0] = coeff.iter().sum();
        out[1..].par_iter_mut().enumerate().for_each(|(i, slot)| {
            let g = self.g_hat[i];
            if g == 0.0 {
                return;
            }
            let mut acc = 0.0;
            for (r, c) in self.roots.iter().zip(&coeff) {
                acc += c / self.gap(*r, i);
            }
            *slot = g * acc;
        });
        out
    }

    /// Dense eigenvector matrix, columns in the order of [`Self::eigenvalues`].
    /// Intended for tests and small systems.
    pub fn eigenvectors_dense(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.poles.len();
        let mut pairs: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n + 1);
        for (r, h) in self.roots.iter().zip(&self.head) {
            let mut v = vec![0.0; n + 1];
            v[0] = *h;
            for i in 0..n {
                if self.g_hat[i] != 0.0 {
                    v[i + 1] = h * self.g_hat[i] / self.gap(*r, i);
                }
            }
            pairs.push((self.value(*r), v));
        }
        for &i in &self.deflated {
            let mut v = vec![0.0; n + 1];
            v[i + 1] = 1.0;
            pairs.push((self.poles[i], v));
        }
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        pairs.into_iter().unzip()
    }
}

fn diff(poles: &[f64], r: Root, di: f64) -> f64 {
    // roots here are still indexed into the live pole list
    if r.pole == usize::MAX {
        unreachable!("live roots always reference a pole")
    }
    (poles[r.pole] - di) + r.offset
}

/// Root `k` of the secular function: `k = 0` below `d₁`, `k = n` above
/// `d_n`, otherwise in `(d_k, d_{k+1})` (1-based poles).
fn solve_root(d0: f64, poles: &[f64], g2: &[f64], k: usize) -> Result<Root> {
    let n = poles.len();
    if n == 0 {
        return Ok(Root { pole: usize::MAX, offset: 0.0 });
    }
    let sum_g2: f64 = g2.iter().sum();
    // secular function at λ = poles[p] + τ, with differences formed exactly
    let f = |p: usize, tau: f64| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            s += g2[i] / ((poles[i] - poles[p]) - tau);
        }
        (d0 - poles[p]) - tau - s
    };
    // bracket in absolute λ then pick the closer pole as origin
    let (lo, hi) = if k == 0 {
        let lo = d0.min(poles[0]) - sum_g2.sqrt() - sum_g2 / (poles[0] - d0.min(poles[0]) + 1.0) - 1.0;
        (lo.min(poles[0] - 1.0), poles[0])
    } else if k == n {
        let top = poles[n - 1];
        (top, d0.max(top) + sum_g2.sqrt() + 1.0)
    } else {
        (poles[k - 1], poles[k])
    };
    let (origin, mut a, mut b) = if k == 0 {
        (0, lo - poles[0], 0.0)
    } else if k == n {
        (n - 1, 0.0, hi - poles[n - 1])
    } else {
        let mid = 0.5 * (lo + hi);
        // f decreases across the gap: positive at the midpoint means the root
        // sits in the upper half
        if f(k - 1, mid - poles[k - 1]) > 0.0 {
            (k, mid - poles[k], 0.0)
        } else {
            (k - 1, 0.0, mid - poles[k - 1])
        }
    };
    // f(origin, a) > 0 > f(origin, b) with poles at the open ends
    let mut fa = f(origin, a);
    let mut fb = f(origin, b);
    if a == 0.0 {
        fa = f64::INFINITY;
    }
    if b == 0.0 {
        fb = f64::NEG_INFINITY;
    }
    if !(fa > 0.0) || !(fb < 0.0) {
        // widen the outer brackets if the bound estimate was short
        let mut tries = 0;
        while k == 0 && !(fa > 0.0) && tries < 200 {
            a = 2.0 * a - 1.0;
            fa = f(origin, a);
            tries += 1;
        }
        while k == n && !(fb < 0.0) && tries < 200 {
            b = 2.0 * b + 1.0;
            fb = f(origin, b);
            tries += 1;
        }
        if !(fa > 0.0 && fb < 0.0) {
            return Err(Error::EigenFailure(format!("could not bracket secular root {k}")));
        }
    }
    // bisection with secant (Illinois) steps in τ
    let mut tau = 0.5 * (a + b);
    for _ in 0..200 {
        let finite = fa.is_finite() && fb.is_finite();
        let trial = if finite { (a * fb - b * fa) / (fb - fa) } else { 0.5 * (a + b) };
        tau = if trial > a.min(b) && trial < a.max(b) { trial } else { 0.5 * (a + b) };
        // keep bisecting if the secant stalls at one end
        let width = (b - a).abs();
        if (tau - a).abs() < 0.01 * width || (b - tau).abs() < 0.01 * width {
            tau = 0.5 * (a + b);
        }
        let ft = f(origin, tau);
        if ft == 0.0 {
            break;
        }
        if ft > 0.0 {
            a = tau;
            fa = ft;
        } else {
            b = tau;
            fb = ft;
        }
        let scale = tau.abs().max(a.abs().min(b.abs()));
        if (b - a).abs() <= 4.0 * f64::EPSILON * scale || (b - a).abs() < f64::MIN_POSITIVE {
            tau = 0.5 * (a + b);
            break;
        }
    }
    Ok(Root { pole: origin, offset: tau })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        // [[2, 1], [1, 1]] → (3 ± √5)/2
        let e = ArrowheadEigen::new(2.0, &[1.0], &[1.0]).unwrap();
        let l = e.eigenvalues();
        assert!((l[0] - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!((l[1] - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-15);
        let w: f64 = e.head_weights().map(|(_, w)| w).sum();
        assert!((w - 1.0).abs() < 1e-15);
    }

    #[test]
    fn deflation_of_zero_coupling() {
        let e = ArrowheadEigen::new(1.0, &[0.5, 2.0, 3.0], &[0.3, 0.0, 0.2]).unwrap();
        let l = e.eigenvalues();
        assert_eq!(l.len(), 4);
        assert!(l.contains(&2.0));
        let trace: f64 = l.iter().sum();
        assert!((trace - 6.5).abs() < 1e-14);
    }

    #[test]
    fn exact_zero_mode_at_criticality() {
        // d0 = Σ g²/d makes the matrix singular
        let poles = [0.25, 1.0, 4.0];
        let g = [0.1, 0.2, 0.3];
        let d0: f64 = poles.iter().zip(&g).map(|(d, g)| g * g / d).sum();
        let e = ArrowheadEigen::new(d0, &poles, &g).unwrap();
        assert!(e.eigenvalues()[0].abs() < 1e-16);
    }
}
