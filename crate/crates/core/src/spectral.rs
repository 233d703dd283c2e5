//! Coupling form factor and the weighted spectral integrals built from it.
//!
//! The field enters every formula only through the radial coupling density
//! `J(ω)`, the shell integral of `|h|²`. Norms such as `‖M^{p/2} h‖²` become
//! `∫ J(ω) ω^p dω`, and time dependence enters through kernels `k(ωt)`.

use std::io::Read;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_half_line, Amplitude};

pub use crate::quadrature::Kernel;

/// Largest `|t|` accepted by [`oscillatory_integral`].
pub const MAX_TIME: f64 = 1e6;

/// Relative tolerance of the criticality comparison in [`boundedness_check`].
pub const CRITICAL_TOLERANCE: f64 = 1e-12;

/// Shape of `J(ω)` up to the `c²` prefactor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `ω^{2σ} e^{-2ω/Λ}`
    PowerExp,
    Tabulated(TabulatedProfile),
}

/// Radial coupling density `J(ω) = c²·shape(ω)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormFactor {
    /// Infrared exponent (`J ~ ω^{2σ}` near zero). Estimated for tables.
    pub sigma: f64,
    /// Cutoff frequency.
    pub lambda: f64,
    /// Coupling strength `c ≥ 0`.
    pub amplitude: f64,
    pub profile: Profile,
}

/// Tabulated `(ω, J)` pairs with strictly increasing `ω > 0`.
///
/// Interpolated linearly in log–log coordinates, extended below the first
/// node by the fitted small-ω power law and set to zero past the last node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedProfile {
    omegas: Vec<f64>,
    values: Vec<f64>,
    slope: SlopeFit,
}

/// Least-squares power law through the first few table nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub std_error: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedIntegral {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub converged: bool,
}

impl WeightedIntegral {
    fn exact_zero() -> Self {
        Self { value: 0.0, abs_error_estimate: 0.0, converged: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IrClass {
    Regular,
    IrDivergent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundedness {
    Subcritical,
    Critical,
    Supercritical,
}

/// Which particle observable couples to the field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CouplingModel {
    /// `P ⊗ Φ(h)`, free particle.
    Velocity,
    /// `Q ⊗ Φ(h)` with harmonic frequency `omega0`.
    Position { omega0: f64 },
}

impl CouplingModel {
    /// Upper bound on `‖M⁻¹h‖²` for a Hamiltonian bounded from below.
    pub fn norm_bound(self) -> f64 {
        match self {
            CouplingModel::Velocity => 1.0,
            CouplingModel::Position { omega0 } => omega0 * omega0,
        }
    }
}

impl FormFactor {
    /// The default family `J(ω) = c² ω^{2σ} e^{-2ω/Λ}`.
    pub fn power_exp(sigma: f64, lambda: f64, amplitude: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma <= 0.5 {
            return Err(Error::InvalidParameter(format!(
                "sigma = {sigma}: need sigma > 1/2 for a finite coupling norm"
            )));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::CutoffMissing(format!("cutoff lambda = {lambda}")));
        }
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(Error::InvalidParameter(format!("amplitude = {amplitude}")));
        }
        Ok(Self { sigma, lambda, amplitude, profile: Profile::PowerExp })
    }

    /// Default family with the amplitude chosen so that `∫ J ω⁻² dω = norm`.
    pub fn with_coupling_norm(sigma: f64, lambda: f64, norm: f64) -> Result<Self> {
        if !(norm.is_finite() && norm >= 0.0) {
            return Err(Error::InvalidParameter(format!("coupling norm = {norm}")));
        }
        let unit = Self::power_exp(sigma, lambda, 1.0)?;
        let shape_norm = unit.shape_integral(-2.0, Kernel::Unit, 0.0, None)?.value;
        unit.with_amplitude((norm / shape_norm).sqrt())
    }

    /// Tabulated profile from `(ω, J)` samples.
    pub fn tabulated(omegas: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let table = TabulatedProfile::new(omegas, values)?;
        let sigma = 0.5 * table.slope.slope;
        let lambda = *table.omegas.last().unwrap();
        Ok(Self { sigma, lambda, amplitude: 1.0, profile: Profile::Tabulated(table) })
    }

    /// Reads a two-column `ω,J` CSV (header optional).
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr =
            csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
        let mut omegas = Vec::new();
        let mut values = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::InvalidParameter(format!("row {i}: expected 2 columns, got {}", rec.len())));
            }
            let parse = |s: &str| s.parse::<f64>();
            match (parse(&rec[0]), parse(&rec[1])) {
                (Ok(w), Ok(j)) => {
                    omegas.push(w);
                    values.push(j);
                }
                // tolerate a header line
                _ if i == 0 => continue,
                _ => return Err(Error::InvalidParameter(format!("row {i}: not numeric"))),
            }
        }
        Self::tabulated(omegas, values)
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(Error::InvalidParameter(format!("amplitude = {amplitude}")));
        }
        Ok(Self { amplitude, ..self.clone() })
    }

    pub fn is_tabulated(&self) -> bool {
        matches!(self.profile, Profile::Tabulated(_))
    }

    /// `J(ω)`.
    pub fn density(&self, omega: f64) -> f64 {
        self.amplitude * self.amplitude * self.shape(omega)
    }

    /// `J(ω) / c²`.
    pub fn shape(&self, omega: f64) -> f64 {
        if omega <= 0.0 {
            return 0.0;
        }
        match &self.profile {
            Profile::PowerExp => (2.0 * self.sigma * omega.ln() - 2.0 * omega / self.lambda).exp(),
            Profile::Tabulated(t) => t.eval(omega),
        }
    }

    /// Analytic continuation of `J` off the real axis (principal branch).
    /// Only the default family is analytic.
    pub fn density_complex(&self, z: Complex64) -> Option<Complex64> {
        match self.profile {
            Profile::PowerExp => {
                let c2 = self.amplitude * self.amplitude;
                Some((z.ln() * (2.0 * self.sigma) - z * (2.0 / self.lambda)).exp() * c2)
            }
            Profile::Tabulated(_) => None,
        }
    }

    /// Exponent of `J ~ ω^s` as `ω → 0`.
    pub fn small_power(&self) -> f64 {
        match &self.profile {
            Profile::PowerExp => 2.0 * self.sigma,
            Profile::Tabulated(t) => t.slope.slope,
        }
    }

    /// Frequency scale of the decay of `J`.
    pub fn scale(&self) -> f64 {
        match &self.profile {
            Profile::PowerExp => 0.5 * self.lambda,
            Profile::Tabulated(t) => t.omegas.last().unwrap() / 8.0,
        }
    }

    /// Last frequency where `J` is nonzero, if finite.
    pub fn support_end(&self) -> Option<f64> {
        match &self.profile {
            Profile::PowerExp => None,
            Profile::Tabulated(t) => t.omegas.last().copied(),
        }
    }

    /// Smallest frequency where the mass of `J` beyond it is below
    /// `fraction` of the total.
    pub fn tail_frequency(&self, fraction: f64) -> f64 {
        if let Some(end) = self.support_end() {
            return end;
        }
        // J e^{2ω/Λ} grows only polynomially, so step outwards with a
        // running trapezoid estimate of the remaining mass.
        let step = self.lambda / 64.0;
        let mut w = step;
        let mut mass = 0.0;
        let mut cache = Vec::new();
        while w < 4000.0 * self.lambda {
            let j = self.shape(w);
            mass += j * step;
            cache.push((w, mass));
            w += step;
            if w > self.sigma * self.lambda && j * self.lambda < 1e-300 {
                break;
            }
        }
        let total = mass;
        for &(w, m) in &cache {
            if total - m <= fraction * total {
                return w;
            }
        }
        w
    }

    fn breakpoints(&self) -> &[f64] {
        match &self.profile {
            Profile::PowerExp => &[],
            Profile::Tabulated(t) => &t.omegas,
        }
    }

    /// `∫ shape(ω) ω^p k(ωt) [coth(βω/2)] dω` without the `c²` prefactor.
    fn shape_integral(&self, p: f64, kernel: Kernel, t: f64, beta: Option<f64>) -> Result<WeightedIntegral> {
        let mut power = self.small_power() + p;
        if beta.is_some() {
            power -= 1.0;
        }
        if t != 0.0 {
            power += kernel.small_order();
        }
        if power <= -1.0 {
            return Err(Error::IrDivergent { power });
        }
        let f = |w: f64| {
            let base = self.shape(w) * w.powf(p);
            match beta {
                Some(b) => base / (0.5 * b * w).tanh(),
                None => base,
            }
        };
        let amp = Amplitude {
            f: &f,
            small_power: power,
            scale: self.scale(),
            support_end: self.support_end(),
            breakpoints: self.breakpoints(),
        };
        let est = integrate_half_line(&amp, kernel, t).map_err(Error::Quadrature)?;
        let converged = est.value.is_finite() && est.abs_error <= 1e-9 * est.abs_integral.max(f64::MIN_POSITIVE);
        Ok(WeightedIntegral { value: est.value, abs_error_estimate: est.abs_error, converged })
    }
}

impl TabulatedProfile {
    fn new(omegas: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if omegas.len() != values.len() {
            return Err(Error::InvalidParameter("ω and J columns differ in length".into()));
        }
        if omegas.len() < 2 {
            return Err(Error::InvalidParameter("a tabulated profile needs at least two rows".into()));
        }
        if omegas[0] <= 0.0 || omegas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("ω must be positive and strictly increasing".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter("J must be finite and non-negative".into()));
        }
        let peak = values.iter().cloned().fold(0.0, f64::max);
        if peak > 0.0 && *values.last().unwrap() > 1e-3 * peak {
            return Err(Error::CutoffMissing(format!(
                "table ends at ω = {} with J still at {:.3e} of its peak",
                omegas.last().unwrap(),
                values.last().unwrap() / peak
            )));
        }
        let slope = fit_small_slope(&omegas, &values);
        Ok(Self { omegas, values, slope })
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slope_fit(&self) -> SlopeFit {
        self.slope
    }

    fn eval(&self, w: f64) -> f64 {
        let n = self.omegas.len();
        if w > self.omegas[n - 1] {
            return 0.0;
        }
        if w <= self.omegas[0] {
            let s = if self.slope.slope.is_finite() { self.slope.slope } else { 0.0 };
            return self.values[0] * (w / self.omegas[0]).powf(s);
        }
        let i = self.omegas.partition_point(|&x| x < w).max(1);
        let (w0, w1) = (self.omegas[i - 1], self.omegas[i]);
        let (j0, j1) = (self.values[i - 1], self.values[i]);
        if j0 > 0.0 && j1 > 0.0 {
            let s = (w / w0).ln() / (w1 / w0).ln();
            (j0.ln() + s * (j1.ln() - j0.ln())).exp()
        } else {
            j0 + (j1 - j0) * (w - w0) / (w1 - w0)
        }
    }
}

/// Fits `ln J = a + s ln ω + b ω` through the first nodes; the linear term
/// absorbs an exponential cutoff so that `s` is the true small-ω exponent.
fn fit_small_slope(omegas: &[f64], values: &[f64]) -> SlopeFit {
    let k = (omegas.len() / 4).clamp(4, 12).min(omegas.len());
    let pts: Vec<(f64, f64, f64)> =
        omegas.iter().zip(values).take(k).filter(|(_, &j)| j > 0.0).map(|(&w, &j)| (w.ln(), w, j.ln())).collect();
    let n = pts.len();
    if n < 3 {
        return SlopeFit { slope: f64::NAN, std_error: f64::NAN, points: n };
    }
    let nf = n as f64;
    let m1 = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let m2 = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.2).sum::<f64>() / nf;
    let (mut s11, mut s12, mut s22, mut s1y, mut s2y) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x1, x2, y) in &pts {
        let (x1, x2, y) = (x1 - m1, x2 - m2, y - my);
        s11 += x1 * x1;
        s12 += x1 * x2;
        s22 += x2 * x2;
        s1y += x1 * y;
        s2y += x2 * y;
    }
    let det = s11 * s22 - s12 * s12;
    let slope = (s22 * s1y - s12 * s2y) / det;
    let lin = (s11 * s2y - s12 * s1y) / det;
    let std_error = if n > 3 {
        let rss: f64 = pts.iter().map(|p| (p.2 - my - slope * (p.0 - m1) - lin * (p.1 - m2)).powi(2)).sum();
        (rss / (nf - 3.0) * s22 / det).sqrt()
    } else {
        f64::NAN
    };
    SlopeFit { slope, std_error, points: n }
}

/// `∫ J(ω) ω^p dω`, i.e. `‖M^{p/2} h‖²`.
pub fn weighted_norm_sq(j: &FormFactor, p: i32) -> Result<WeightedIntegral> {
    if j.amplitude == 0.0 {
        return Ok(WeightedIntegral::exact_zero());
    }
    let c2 = j.amplitude * j.amplitude;
    let mut w = j.shape_integral(p as f64, Kernel::Unit, 0.0, None)?;
    w.value *= c2;
    w.abs_error_estimate *= c2;
    Ok(w)
}

/// Regular iff `∫₀ J(ω) ω⁻³ dω < ∞`, i.e. `h ∈ D(M^{-3/2})`.
pub fn ir_classify(j: &FormFactor) -> Result<IrClass> {
    match &j.profile {
        Profile::PowerExp => Ok(if 2.0 * j.sigma - 3.0 > -1.0 { IrClass::Regular } else { IrClass::IrDivergent }),
        Profile::Tabulated(t) => {
            let fit = t.slope;
            if fit.points < 4 || !fit.std_error.is_finite() {
                return Err(Error::Indeterminate(format!("only {} positive samples near ω = 0", fit.points)));
            }
            let margin = 2.0 * fit.std_error + 1e-3;
            let excess = fit.slope - 2.0;
            if excess > margin {
                Ok(IrClass::Regular)
            } else if excess < -margin {
                Ok(IrClass::IrDivergent)
            } else {
                Err(Error::Indeterminate(format!(
                    "small-ω slope {:.4} ± {:.4} is too close to the threshold 2",
                    fit.slope, fit.std_error
                )))
            }
        }
    }
}

/// `∫ J(ω) ω^p k(ωt) [coth(βω/2)] dω`.
pub fn oscillatory_integral(
    j: &FormFactor,
    p: i32,
    t: f64,
    kernel: Kernel,
    thermal: Option<f64>,
) -> Result<WeightedIntegral> {
    if !t.is_finite() || t.abs() > MAX_TIME {
        return Err(Error::OscillationOverflow { t, max: MAX_TIME });
    }
    if let Some(beta) = thermal {
        if !(beta > 0.0) {
            return Err(Error::BetaNonPositive(beta));
        }
    }
    if (t == 0.0 && kernel.vanishes_at_zero_time()) || j.amplitude == 0.0 {
        return Ok(WeightedIntegral::exact_zero());
    }
    let c2 = j.amplitude * j.amplitude;
    let mut w = j.shape_integral(p as f64, kernel, t, thermal)?;
    w.value *= c2;
    w.abs_error_estimate *= c2;
    Ok(w)
}

/// Compares `‖M⁻¹h‖²` with the bound of the coupling model.
pub fn boundedness_check(j: &FormFactor, model: CouplingModel) -> Result<Boundedness> {
    let norm = weighted_norm_sq(j, -2)?.value;
    Ok(classify_norm(norm, model.norm_bound()))
}

pub(crate) fn classify_norm(norm: f64, bound: f64) -> Boundedness {
    let rel = (norm - bound) / bound;
    if rel.abs() <= CRITICAL_TOLERANCE {
        Boundedness::Critical
    } else if rel < 0.0 {
        Boundedness::Subcritical
    } else {
        Boundedness::Supercritical
    }
}
