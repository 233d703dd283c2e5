//! Quadrature on `[0, ∞)` for integrands `F(ω)·k(ωt)`.
//!
//! The half line is split at `ω* = π/|t|`. Below `ω*` the kernel has not yet
//! completed half a period and the integrand is handled by adaptive
//! Gauss–Kronrod on panels that halve towards the origin, with the remainder
//! near `ω = 0` summed as a geometric series once the panels follow a power
//! law. Above `ω*` panels march outwards with a Filon-type rule that treats the
//! oscillating factor exactly, until the accumulated tail is negligible.

pub mod filon;
pub mod gk;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use self::filon::filon_panel;
use self::gk::{adaptive, Estimate};

/// Oscillating factor `k(ωt)` multiplying the spectral amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kernel {
    Unit,
    Cos,
    Sin,
    OneMinusCos,
    CosSq,
    SinSq,
    /// `(1 - cos ωt)²`
    OneMinusCosSq,
}

impl Kernel {
    /// Leading power of `k(ωt)` as `ω → 0` at fixed `t ≠ 0`.
    pub fn small_order(self) -> f64 {
        match self {
            Kernel::Unit | Kernel::Cos | Kernel::CosSq => 0.0,
            Kernel::Sin => 1.0,
            Kernel::OneMinusCos | Kernel::SinSq => 2.0,
            Kernel::OneMinusCosSq => 4.0,
        }
    }

    /// True when `k ≡ 0` at `t = 0`.
    pub fn vanishes_at_zero_time(self) -> bool {
        matches!(self, Kernel::Sin | Kernel::OneMinusCos | Kernel::SinSq | Kernel::OneMinusCosSq)
    }

    /// Cancellation-free evaluation of `k(x)`.
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Kernel::Unit => 1.0,
            Kernel::Cos => x.cos(),
            Kernel::Sin => x.sin(),
            Kernel::OneMinusCos => {
                let s = (0.5 * x).sin();
                2.0 * s * s
            }
            Kernel::CosSq => x.cos().powi(2),
            Kernel::SinSq => x.sin().powi(2),
            Kernel::OneMinusCosSq => {
                let s = (0.5 * x).sin();
                4.0 * s.powi(4)
            }
        }
    }

    /// Decomposition `k(x) = c₀ + Σ c_m Re/Im e^{i m x}` used on oscillating panels.
    fn fourier(self) -> (f64, [(f64, Part); 2]) {
        use Part::{Im, Re};
        match self {
            Kernel::Unit => (1.0, [(0.0, Re), (0.0, Re)]),
            Kernel::Cos => (0.0, [(1.0, Re), (0.0, Re)]),
            Kernel::Sin => (0.0, [(1.0, Im), (0.0, Re)]),
            Kernel::OneMinusCos => (1.0, [(-1.0, Re), (0.0, Re)]),
            Kernel::CosSq => (0.5, [(0.0, Re), (0.5, Re)]),
            Kernel::SinSq => (0.5, [(0.0, Re), (-0.5, Re)]),
            Kernel::OneMinusCosSq => (1.5, [(-2.0, Re), (0.5, Re)]),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Part {
    Re,
    Im,
}

impl Part {
    fn take(self, z: Complex64) -> f64 {
        match self {
            Part::Re => z.re,
            Part::Im => z.im,
        }
    }
}

/// Non-oscillating amplitude `F` together with what the engine needs to know
/// about its shape.
pub struct Amplitude<'a> {
    pub f: &'a (dyn Fn(f64) -> f64 + Sync),
    /// `F(ω) ~ ω^small_power` as `ω → 0`.
    pub small_power: f64,
    /// Characteristic frequency of the decay.
    pub scale: f64,
    /// `F ≡ 0` beyond this frequency, if finite.
    pub support_end: Option<f64>,
    /// Points where `F` is not smooth.
    pub breakpoints: &'a [f64],
}

/// Relative tolerance per panel.
pub const PANEL_REL_TOL: f64 = 1e-14;

/// A panel contributes nothing further once its mass falls below this
/// fraction of the accumulated mass.
const TAIL_FRACTION: f64 = 1e-17;

const MAX_PANELS: usize = 200_000;

/// Integrates `F(ω) k(ωt)` over `[0, ∞)`. The caller is responsible for the
/// small-ω convergence pre-screen.
pub fn integrate_half_line(amp: &Amplitude<'_>, kernel: Kernel, t: f64) -> Result<Estimate<f64>, String> {
    let t_abs = t.abs();
    let sign = if t < 0.0 && kernel == Kernel::Sin { -1.0 } else { 1.0 };
    let split = if t_abs > 0.0 && kernel != Kernel::Unit { PI / t_abs } else { f64::INFINITY };
    let x0 = split.min(amp.scale).min(amp.support_end.unwrap_or(f64::INFINITY));

    let direct = |w: f64| (amp.f)(w) * kernel.eval(w * t_abs);
    // the kernel's own small-argument power shapes the integrand near zero
    let kernel_order = if t_abs > 0.0 { kernel.small_order() } else { 0.0 };
    let near_zero = Amplitude { small_power: amp.small_power + kernel_order, ..*amp };
    let mut total = descend_to_origin(&direct, x0, &near_zero)?;

    // non-oscillating stretch between x0 and the split point
    let end = amp.support_end.unwrap_or(f64::INFINITY);
    if split > x0 {
        let upper = split.min(end);
        let part = march(x0, upper, amp, total.abs_integral, |a, b| {
            let e = adaptive(&direct, a, b, PANEL_REL_TOL, 0.0);
            (e.value, e.abs_error, e.abs_integral)
        })?;
        total = total.merge(part);
    }
    if split < end {
        let (unit, terms) = kernel.fourier();
        let taus = [t_abs, 2.0 * t_abs];
        let floor = TAIL_FRACTION * total.abs_integral;
        let part = march(split.max(x0), end, amp, total.abs_integral, |a, b| {
            filon_adaptive(amp.f, a, b, taus, unit, &terms, floor, 0)
        })?;
        total = total.merge(part);
    }
    total.value *= sign;
    Ok(total)
}

/// `∫_start^∞ f` for a smooth, non-oscillating `f` that decays on the
/// frequency scale `scale`.
pub fn integrate_tail(f: &(dyn Fn(f64) -> f64 + Sync), start: f64, scale: f64) -> Result<Estimate<f64>, String> {
    let amp = Amplitude { f, small_power: 0.0, scale, support_end: None, breakpoints: &[] };
    let shifted_scale = scale.max(start * 1e-3);
    march(start, f64::INFINITY, &Amplitude { scale: shifted_scale, ..amp }, 0.0, |a, b| {
        let e = adaptive(&f, a, b, PANEL_REL_TOL, 0.0);
        (e.value, e.abs_error, e.abs_integral)
    })
}

#[allow(clippy::too_many_arguments)]
fn filon_adaptive(
    f: &(dyn Fn(f64) -> f64 + Sync),
    a: f64,
    b: f64,
    taus: [f64; 2],
    unit: f64,
    terms: &[(f64, Part); 2],
    abs_tol: f64,
    depth: u32,
) -> (f64, f64, f64) {
    let p = filon_panel(&f, a, b, taus);
    let tol = (PANEL_REL_TOL.max(100.0 * f64::EPSILON) * p.abs_integral).max(abs_tol);
    if p.abs_error > tol && depth < 16 && b - a > 1e-300 {
        let mid = 0.5 * (a + b);
        let l = filon_adaptive(f, a, mid, taus, unit, terms, abs_tol, depth + 1);
        let r = filon_adaptive(f, mid, b, taus, unit, terms, abs_tol, depth + 1);
        return (l.0 + r.0, l.1 + r.1, l.2 + r.2);
    }
    let mut value = unit * p.plain;
    for (m, (c, part)) in terms.iter().enumerate() {
        if *c != 0.0 {
            value += c * part.take(p.fourier[m]);
        }
    }
    let weight = unit.abs() + terms.iter().map(|(c, _)| c.abs()).sum::<f64>();
    (value, p.abs_error * weight, p.abs_integral * weight)
}

/// Panels `[x/2, x]` towards zero, plus the geometric-series remainder.
fn descend_to_origin<F: Fn(f64) -> f64>(f: &F, x0: f64, amp: &Amplitude<'_>) -> Result<Estimate<f64>, String> {
    let mut total = Estimate::<f64>::zero();
    let mut hi = x0;
    let mut prev: Option<f64> = None;
    let mut prev2: Option<f64> = None;
    let mut prev_ratio: Option<f64> = None;
    // breakpoints below x0 become panel edges
    let mut cuts: Vec<f64> = amp.breakpoints.iter().copied().filter(|&b| b > 0.0 && b < x0).collect();
    cuts.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cut_iter = cuts.into_iter().peekable();
    for _ in 0..MAX_PANELS {
        let mut lo = 0.5 * hi;
        let mut at_cut = false;
        while let Some(&c) = cut_iter.peek() {
            if c >= hi {
                cut_iter.next();
            } else {
                if c > lo {
                    lo = c;
                    at_cut = true;
                }
                break;
            }
        }
        let e = adaptive(f, lo, hi, PANEL_REL_TOL, 0.0);
        total = total.merge(e);
        if lo <= f64::MIN_POSITIVE * 1e10 {
            return Ok(total);
        }
        let width_ratio = lo / hi;
        hi = lo;
        if at_cut || width_ratio != 0.5 {
            prev = None;
            prev2 = None;
            prev_ratio = None;
            continue;
        }
        if e.value == 0.0 && e.abs_integral == 0.0 {
            if prev == Some(0.0) {
                return Ok(total);
            }
            prev2 = prev;
            prev = Some(0.0);
            continue;
        }
        if let Some(p) = prev {
            if p != 0.0 {
                let r = e.value / p;
                // Known power law: panels scale by r0, and the first
                // correction (one extra power of ω) by r0/2. Removing both
                // leaves an error of second order in the panel size.
                let r0 = 0.5f64.powf(amp.small_power + 1.0);
                if r0 < 1.0 && cut_iter.peek().is_none() && (r / r0 - 1.0).abs() <= 1e-6 {
                    let remainder = match prev2 {
                        Some(p2) => power_series_remainder([p2, p, e.value], r0),
                        None => {
                            let b = 2.0 * (p * r0 - e.value) / r0;
                            let b_now = 0.5 * r0 * b;
                            let a_now = e.value - b_now;
                            a_now * r0 / (1.0 - r0) + b_now * 0.5 * r0 / (1.0 - 0.5 * r0)
                        }
                    };
                    total.value += remainder;
                    total.abs_integral += remainder.abs();
                    total.abs_error += (r / r0 - 1.0).abs().powi(3) * remainder.abs() + 1e-16 * remainder.abs();
                    return Ok(total);
                }
                if r > 0.0 && r < 1.0 {
                    let remainder = e.value * r / (1.0 - r);
                    let stable = prev_ratio.map(|q| (q - r).abs() <= 1e-9 * r.max(1e-3)).unwrap_or(false);
                    let small = remainder.abs() <= 1e-16 * total.value.abs();
                    if (stable && cut_iter.peek().is_none()) || small {
                        let drift = prev_ratio.map(|q| (q - r).abs()).unwrap_or(0.0);
                        total.value += remainder;
                        total.abs_integral += remainder.abs();
                        total.abs_error += remainder.abs() * (drift / (1.0 - r)).min(1.0) + 1e-16 * remainder.abs();
                        return Ok(total);
                    }
                }
                prev_ratio = Some(r);
            }
        }
        prev2 = prev;
        prev = Some(e.value);
    }
    Err("small-frequency descent did not settle into a power law".into())
}

/// Sum of all panels beyond the newest of `panels` (oldest first), which
/// follow `v_k = A r0^k + B (r0/2)^k + C (r0/4)^k`: the leading power law
/// and its first two corrections (one and two extra powers of ω).
fn power_series_remainder(panels: [f64; 3], r0: f64) -> f64 {
    let q = [r0, 0.5 * r0, 0.25 * r0];
    // v_{-j} = Σ_m A_m q_m^{-j}, j = 0, 1, 2, with A_m at the newest panel
    let z: Vec<f64> = q.iter().map(|x| x.recip()).collect();
    let v = [panels[2], panels[1], panels[0]];
    // Vandermonde solve in z: A = V⁻¹ v via Lagrange basis polynomials
    let mut remainder = 0.0;
    for m in 0..3 {
        let (i, k) = ((m + 1) % 3, (m + 2) % 3);
        let denom = (z[m] - z[i]) * (z[m] - z[k]);
        // coefficients of (x − z_i)(x − z_k) = x² − (z_i + z_k) x + z_i z_k
        let a_m = (v[2] - (z[i] + z[k]) * v[1] + z[i] * z[k] * v[0]) / denom;
        remainder += a_m * q[m] / (1.0 - q[m]);
    }
    remainder
}

/// Panels from `start` outwards: widths double until they reach the decay
/// scale, then stay there. Stops at `end` or once the tail is negligible
/// against `reference` plus the mass marched so far.
fn march<R>(start: f64, end: f64, amp: &Amplitude<'_>, reference: f64, mut rule: R) -> Result<Estimate<f64>, String>
where
    R: FnMut(f64, f64) -> (f64, f64, f64),
{
    let mut total = Estimate::<f64>::zero();
    let mut lo = start;
    let mut quiet = 0;
    let mut cuts: Vec<f64> = amp.breakpoints.iter().copied().filter(|&b| b > start && b < end).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut cut_iter = cuts.into_iter().peekable();
    for _ in 0..MAX_PANELS {
        if lo >= end {
            return Ok(total);
        }
        let width = lo.max(f64::MIN_POSITIVE).min(amp.scale);
        let mut hi = (lo + width).min(end);
        while let Some(&c) = cut_iter.peek() {
            if c <= lo {
                cut_iter.next();
            } else {
                if c < hi {
                    hi = c;
                }
                break;
            }
        }
        let (value, err, mass) = rule(lo, hi);
        total.value += value;
        total.abs_error += err;
        total.abs_integral += mass;
        lo = hi;
        if lo > 2.0 * amp.scale && mass <= TAIL_FRACTION * (reference + total.abs_integral) {
            quiet += 1;
            if quiet >= 3 && amp.support_end.is_none() {
                return Ok(total);
            }
        } else {
            quiet = 0;
        }
        if !end.is_finite() && lo > 1e6 * amp.scale {
            return Err(format!("amplitude has not decayed by ω = {lo:e}"));
        }
    }
    Err("panel budget exhausted".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn amp<'a>(f: &'a (dyn Fn(f64) -> f64 + Sync), s: f64) -> Amplitude<'a> {
        Amplitude { f, small_power: s, scale: 1.0, support_end: None, breakpoints: &[] }
    }

    #[test]
    fn frullani_type_integral() {
        // ∫ e^{-ω}(1 - cos ωt)/ω dω = ½ ln(1+t²)
        let f = |w: f64| (-w).exp() / w;
        for &t in &[0.1, 1.0, 3.0, 100.0, 1e4, 1e6] {
            let e = integrate_half_line(&amp(&f, -1.0), Kernel::OneMinusCos, t).unwrap();
            let exact = 0.5 * (1.0f64 + t * t).ln();
            assert!((e.value - exact).abs() <= 1e-11 * exact, "t={t}: {} vs {exact}", e.value);
        }
    }

    #[test]
    fn singular_power_law_norm() {
        // ∫ ω^{-0.8} e^{-ω} = Γ(0.2)
        let f = |w: f64| w.powf(-0.8) * (-w).exp();
        let e = integrate_half_line(&amp(&f, -0.8), Kernel::Unit, 0.0).unwrap();
        let gamma_02 = 4.590_843_711_998_803;
        assert!((e.value - gamma_02).abs() < 1e-11 * gamma_02, "{}", e.value);
    }

    #[test]
    fn sine_transform() {
        // ∫ e^{-ω} sin ωt dω = t / (1 + t²)
        let f = |w: f64| (-w).exp();
        for &t in &[0.5, 20.0, 1e5] {
            let e = integrate_half_line(&amp(&f, 0.0), Kernel::Sin, t).unwrap();
            let exact = t / (1.0 + t * t);
            assert!((e.value - exact).abs() <= 1e-10 * exact, "t={t}");
            let neg = integrate_half_line(&amp(&f, 0.0), Kernel::Sin, -t).unwrap();
            assert_eq!(neg.value, -e.value);
        }
    }
}
