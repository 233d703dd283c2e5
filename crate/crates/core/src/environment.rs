//! Field-trace factor `χ` of the reduced dynamics.
//!
//! For a Gaussian reference state of the field, `tr W_F(u, v) ρ_F` is the
//! exponential of a negative quadratic form in `(u, v)`:
//! `¼‖u‖₋₁² + ¼‖v‖₁²` for the vacuum (and, in modulus, every coherent state),
//! with each mode additionally weighted by `coth(βω/2)` at inverse
//! temperature `β`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase_space::{ensure_same_grid, FieldVector, WeightRole};
use crate::scalar::Real;

/// Reference state of the field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvironmentState {
    /// Vacuum, or the modulus under any coherent state.
    Vacuum,
    /// Equilibrium at inverse temperature `beta > 0`.
    Thermal { beta: f64 },
}

impl EnvironmentState {
    pub fn thermal(beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::BetaNonPositive(beta));
        }
        Ok(Self::Thermal { beta })
    }

    pub fn validate(self) -> Result<Self> {
        match self {
            Self::Thermal { beta } if !(beta > 0.0) => Err(Error::BetaNonPositive(beta)),
            other => Ok(other),
        }
    }

    pub fn beta(self) -> Option<f64> {
        match self {
            Self::Vacuum => None,
            Self::Thermal { beta } => Some(beta),
        }
    }
}

/// `coth(x) − 1 = 2 / (e^{2x} − 1)`, without cancellation for large `x`.
#[inline]
pub fn coth_excess<T: Real>(x: T) -> T {
    T::lit(2.0) / (x + x).exp_m1()
}

fn check_pair<T: Real>(u: &FieldVector<T>, v: &FieldVector<T>) -> Result<()> {
    ensure_same_grid(u.grid(), v.grid())?;
    if u.role() != WeightRole::MinusOne || v.role() != WeightRole::PlusOne {
        return Err(Error::InvalidParameter("u must carry weight ω, v weight 1/ω".into()));
    }
    Ok(())
}

/// `¼‖u‖₋₁² + ¼‖v‖₁²`.
pub fn exponent_coherent<T: Real>(u: &FieldVector<T>, v: &FieldVector<T>) -> Result<T> {
    check_pair(u, v)?;
    Ok(T::lit(0.25) * (u.weighted_norm_sq() + v.weighted_norm_sq()))
}

/// `|χ| = exp(−¼‖u‖₋₁² − ¼‖v‖₁²)` for a coherent reference state.
pub fn abs_chi_coherent<T: Real>(u: &FieldVector<T>, v: &FieldVector<T>) -> Result<T> {
    Ok((-exponent_coherent(u, v)?).exp())
}

/// `¼⟨u|(coth(βM/2) − 1)u⟩₋₁ + ¼⟨v|(coth(βM/2) − 1)v⟩₁`, the strictly
/// positive thermal correction to the vacuum exponent for `(u, v) ≠ 0`.
/// At low temperature it can fall below the resolution of the total.
pub fn thermal_excess<T: Real>(u: &FieldVector<T>, v: &FieldVector<T>, beta: T) -> Result<T> {
    if !(beta > T::zero()) {
        return Err(Error::BetaNonPositive(beta.to_f64_lossy()));
    }
    check_pair(u, v)?;
    let half = T::lit(0.5);
    let excess: T = u
        .weighted_terms()
        .zip(v.weighted_terms())
        .zip(u.grid().nodes())
        .map(|((a, b), &w)| (a + b) * coth_excess(half * beta * w))
        .sum();
    Ok(T::lit(0.25) * excess)
}

/// Thermal exponent, assembled as the vacuum value plus [`thermal_excess`]
/// so that the ordering survives rounding at low temperature.
pub fn exponent_thermal<T: Real>(u: &FieldVector<T>, v: &FieldVector<T>, beta: T) -> Result<T> {
    let excess = thermal_excess(u, v, beta)?;
    Ok(exponent_coherent(u, v)? + excess)
}

/// `exp(−¼⟨u|coth(βM/2)u⟩₋₁ − ¼⟨v|coth(βM/2)v⟩₁)`.
pub fn chi_thermal<T: Real>(u: &FieldVector<T>, v: &FieldVector<T>, beta: T) -> Result<T> {
    Ok((-exponent_thermal(u, v, beta)?).exp())
}

/// Exponent for either reference state.
pub fn exponent<T: Real>(u: &FieldVector<T>, v: &FieldVector<T>, env: EnvironmentState) -> Result<T> {
    match env {
        EnvironmentState::Vacuum => exponent_coherent(u, v),
        EnvironmentState::Thermal { beta } => exponent_thermal(u, v, T::lit(beta)),
    }
}

/// Full `⟨f| W_F(u, v) |f⟩` for the coherent state with parameter `g`
/// (sampled on the grid, `‖f‖² = Σ w_i |g_i|²`).
///
/// The phase is `√2 · Im Σ w_i (√ω_i u_i + i v_i/√ω_i) g_i`, which follows
/// from `Φ(v) = Σ v_i (a_i + a_i⁺)/√(2ω_i)` and
/// `Π(u) = i Σ u_i √(ω_i/2) (a_i⁺ − a_i)`; the modulus is
/// [`abs_chi_coherent`] exactly.
pub fn coherent_phase<T: Real>(u: &FieldVector<T>, v: &FieldVector<T>, g: &[Complex<T>]) -> Result<Complex<T>> {
    check_pair(u, v)?;
    if g.len() != u.values().len() {
        return Err(Error::GridMismatch);
    }
    let modulus = abs_chi_coherent(u, v)?;
    let grid = u.grid();
    let mut pairing = Complex::new(T::zero(), T::zero());
    for (i, &gi) in g.iter().enumerate() {
        let root = grid.nodes()[i].sqrt();
        let f = Complex::new(root * u.values()[i], v.values()[i] / root);
        pairing = pairing + f * gi * grid.weights()[i];
    }
    let phase = T::SQRT_2() * pairing.im;
    Ok(Complex::from_polar(modulus, phase))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::FrequencyGrid;

    fn pair(u: f64, v: f64) -> (FieldVector<f64>, FieldVector<f64>) {
        let g = FrequencyGrid::new(vec![1.0], vec![1.0]).unwrap();
        (
            FieldVector::new(g.clone(), vec![u], WeightRole::MinusOne).unwrap(),
            FieldVector::new(g, vec![v], WeightRole::PlusOne).unwrap(),
        )
    }

    #[test]
    fn single_mode_values() {
        let (u, v) = pair(0.0, 0.0);
        assert_eq!(abs_chi_coherent(&u, &v).unwrap(), 1.0);
        assert_eq!(chi_thermal(&u, &v, 1.0).unwrap(), 1.0);
        let (u, v) = pair(2.0, 0.0);
        assert!((abs_chi_coherent(&u, &v).unwrap() - (-1.0f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn thermal_ratio_is_coth() {
        let (u, v) = pair(0.7, -1.1);
        let ratio = exponent_thermal(&u, &v, 2.0).unwrap() / exponent_coherent(&u, &v).unwrap();
        assert!((ratio - 1.0 / 1.0f64.tanh()).abs() < 1e-14);
        assert!(matches!(chi_thermal(&u, &v, 0.0), Err(Error::BetaNonPositive(_))));
        let cold = exponent_thermal(&u, &v, 200.0).unwrap();
        assert!((cold - exponent_coherent(&u, &v).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn phase_of_real_parameters() {
        let (u, v) = pair(0.8, 0.0);
        let chi = coherent_phase(&u, &v, &[Complex::new(1.3, 0.0)]).unwrap();
        assert!(chi.im.abs() < 1e-16);
        assert!((chi.norm() - abs_chi_coherent(&u, &v).unwrap()).abs() < 1e-16);
        let (u, v) = pair(0.0, 0.0);
        assert_eq!(coherent_phase(&u, &v, &[Complex::new(0.2, 5.0)]).unwrap(), Complex::new(1.0, 0.0));
    }
}
