//! Resolvent of the bordered operator restricted to the oscillator level.
//!
//! With `T_p(z) = ∫ J(ω) ω^p / (ω² − z) dω`, the self-energy is
//! `Σ(z) = T₀(z)` and `⟨e₀|(M̂² − z)⁻¹ e₀⟩ = 1 / D(z)`, where
//!
//! ```text
//! D(z) = ω₀² − z − Σ(z) = (ω₀² − ‖M⁻¹h‖²) − z (1 + T₋₂(z)).
//! ```
//!
//! The second form keeps `D` accurate near `z = 0` at criticality. On the
//! cut the boundary value is taken exactly: with `r = √λ`,
//! `T₊(λ) = (1/2r)[PV∫ f/(ω − r) + iπ f(r) − ∫ f/(ω + r)]`, and the
//! principal value is regularised by subtracting `f(r)`.

use std::sync::Mutex;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gk::adaptive;
use crate::quadrature::{integrate_half_line, integrate_tail, Amplitude, Kernel, PANEL_REL_TOL};
use crate::spectral::FormFactor;

/// `f(ω) = J(ω) ω^p` together with its analytic continuation, if any.
pub(crate) struct Weighted<'a> {
    pub j: &'a FormFactor,
    pub p: i32,
}

impl Weighted<'_> {
    fn at(&self, w: f64) -> f64 {
        if w <= 0.0 {
            0.0
        } else {
            self.j.density(w) * w.powi(self.p)
        }
    }

    fn at_complex(&self, z: Complex64) -> Option<Complex64> {
        self.j.density_complex(z).map(|v| v * z.powi(self.p))
    }

    fn small_power(&self) -> f64 {
        self.j.small_power() + self.p as f64
    }

    fn half_line(&self, g: &(dyn Fn(f64) -> f64 + Sync), small_power: f64, extra_break: &[f64]) -> Result<f64> {
        let mut breaks: Vec<f64> = match &self.j.profile {
            crate::spectral::Profile::Tabulated(t) => t.omegas().to_vec(),
            crate::spectral::Profile::PowerExp => Vec::new(),
        };
        breaks.extend_from_slice(extra_break);
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let amp = Amplitude {
            f: g,
            small_power,
            scale: self.j.scale(),
            support_end: self.j.support_end(),
            breakpoints: &breaks,
        };
        integrate_half_line(&amp, Kernel::Unit, 0.0).map(|e| e.value).map_err(Error::Quadrature)
    }

    /// `∫₀^∞ f(ω)/(ω² − z) dω` for `z` off the cut.
    pub fn transform(&self, z: Complex64) -> Result<Complex64> {
        if z.im == 0.0 && z.re >= 0.0 {
            return Err(Error::OnCut { re: z.re, im: z.im });
        }
        if self.j.amplitude == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        // branch with Im r > 0 off the positive axis
        let r = Complex64::new(0.0, 1.0) * (-z).sqrt();
        let analytic = self.at_complex(r);
        if r.re <= 0.0 || r.im >= 0.1 * r.norm() || analytic.is_none() {
            let brk = if r.re > 0.0 { vec![r.re] } else { Vec::new() };
            let re = self.half_line(&|w| self.at(w) * (1.0 / (w * w - z)).re, self.small_power(), &brk)?;
            let im = self.half_line(&|w| self.at(w) * (1.0 / (w * w - z)).im, self.small_power(), &brk)?;
            return Ok(Complex64::new(re, im));
        }
        let fr = analytic.unwrap();
        let rho = r.re;
        let upper = 2.0 * rho;
        // ∫₀^W (f(ω) − f(r))/(ω − r), split at Re r, real and imaginary parts
        let q = |w: f64| (Complex64::new(self.at(w), 0.0) - fr) / (w - r);
        let lower_re = self.finite_near_zero(&|w| q(w).re, rho)?;
        let lower_im = self.finite_near_zero(&|w| q(w).im, rho)?;
        let mid_re = adaptive(&|w| q(w).re, rho, upper, PANEL_REL_TOL, 0.0).value;
        let mid_im = adaptive(&|w| q(w).im, rho, upper, PANEL_REL_TOL, 0.0).value;
        let log = (Complex64::new(upper, 0.0) - r).ln() - (-r).ln();
        let tail_re =
            integrate_tail(&|w| (self.at(w) / (w - r)).re, upper, self.j.scale()).map_err(Error::Quadrature)?;
        let tail_im =
            integrate_tail(&|w| (self.at(w) / (w - r)).im, upper, self.j.scale()).map_err(Error::Quadrature)?;
        let plus = Complex64::new(lower_re + mid_re + tail_re.value, lower_im + mid_im + tail_im.value) + fr * log;
        let minus_re = self.half_line(&|w| (self.at(w) / (w + r)).re, self.small_power(), &[])?;
        let minus_im = self.half_line(&|w| (self.at(w) / (w + r)).im, self.small_power(), &[])?;
        Ok((plus - Complex64::new(minus_re, minus_im)) / (2.0 * r))
    }

    /// Boundary value `T(λ + i0)` for `λ > 0`.
    pub fn boundary(&self, lambda: f64) -> Result<Complex64> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("boundary value needs lambda > 0, got {lambda}")));
        }
        if self.j.amplitude == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let r = lambda.sqrt();
        let fr = self.at(r);
        let upper = 2.0 * r;
        let q = |w: f64| {
            let d = w - r;
            if d == 0.0 {
                0.0
            } else {
                (self.at(w) - fr) / d
            }
        };
        let lower = self.finite_near_zero(&q, r)?;
        let mid = adaptive(&q, r, upper, PANEL_REL_TOL, 0.0).value;
        let tail = integrate_tail(&|w| self.at(w) / (w - r), upper, self.j.scale()).map_err(Error::Quadrature)?;
        // ∫₀^W dω/(ω − r) = ln((W − r)/r) = 0 for W = 2r
        let pv = lower + mid + tail.value;
        let minus = self.half_line(&|w| self.at(w) / (w + r), self.small_power(), &[])?;
        Ok(Complex64::new(pv - minus, std::f64::consts::PI * fr) / (2.0 * r))
    }

    /// `∫₀^r g` where `g` may carry the small-ω singularity of `f`.
    fn finite_near_zero(&self, g: &(dyn Fn(f64) -> f64 + Sync), r: f64) -> Result<f64> {
        let amp = Amplitude {
            f: g,
            small_power: self.small_power().min(0.0),
            scale: r,
            support_end: Some(r),
            breakpoints: &[],
        };
        integrate_half_line(&amp, Kernel::Unit, 0.0).map(|e| e.value).map_err(Error::Quadrature)
    }
}

/// Isolated eigenvalue of the bordered operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMass {
    pub lambda: f64,
    pub weight: f64,
}

/// Spectral measure of the oscillator level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensity {
    /// Sample points `λ ≥ 0`.
    pub lambdas: Vec<f64>,
    /// `ρ₀₀(λ)` at the sample points.
    pub rho00: Vec<f64>,
    pub point_mass: Option<PointMass>,
    /// Density integral plus point mass; 1 by completeness.
    pub total_mass: f64,
    /// `∫ λ ρ₀₀`; equals `ω₀²`.
    pub first_moment: f64,
    /// `∫ λ² ρ₀₀`; equals `ω₀⁴ + ∫ J`.
    pub second_moment: f64,
    pub expected_second_moment: f64,
    /// Largest deviation between the exact boundary value and the
    /// `ε → 0` extrapolation from finite offsets, relative to the peak density.
    pub extrapolation_error: Option<f64>,
    /// Exponent `κ` in `ρ₀₀(λ) ~ λ^κ` as `λ → 0`, reported at criticality.
    pub edge_exponent: Option<f64>,
}

/// Offsets, in units of `ω₀²`, used to cross-check the boundary value.
pub const EPSILONS: [f64; 3] = [1e-4, 1e-5, 1e-6];

/// Collects the first error raised inside an integrand.
pub(crate) struct ErrorSlot(Mutex<Option<Error>>);

impl ErrorSlot {
    pub fn new() -> Self {
        Self(Mutex::new(None))
    }

    pub fn wrap(&self, r: Result<f64>) -> f64 {
        match r {
            Ok(v) => v,
            Err(e) => {
                let mut slot = self.0.lock().unwrap();
                if slot.is_none() {
                    *slot = Some(e);
                }
                f64::NAN
            }
        }
    }

    pub fn check(self) -> Result<()> {
        match self.0.into_inner().unwrap() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}
