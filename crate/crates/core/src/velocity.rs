//! Velocity coupling `H = ½P² ⊗ I + I ⊗ H_F + P ⊗ Φ(h)`.
//!
//! The momentum `b` is conserved and every field component is proportional
//! to it, so the flow of `(a, 0, b, 0)` has a closed form:
//!
//! ```text
//! a(t) = a + b ∫ J(ω) sin(ωt) ω⁻³ dω + α² b t,   α² = 1 − ∫ J ω⁻²
//! u(t, ω) = b √J(ω) (1 − cos ωt) / ω²
//! v(t, ω) = b √J(ω) sin(ωt) / ω
//! ```
//!
//! and the vacuum exponent `¼‖u‖₋₁² + ¼‖v‖₁²` collapses, through
//! `(1 − cos)² + sin² = 2(1 − cos)`, to `(b²/2) ∫ J ω⁻³ (1 − cos ωt) dω`.

use rayon::prelude::*;

use crate::curve::{CurveMetadata, DecoherenceCurve, Envelope, Growth};
use crate::environment::EnvironmentState;
use crate::error::{Error, Result};
use crate::phase_space::{FieldVector, FrequencyGrid, PhasePoint, WeightRole, WeylLabel};
use crate::spectral::{
    boundedness_check, ir_classify, oscillatory_integral, weighted_norm_sq, Boundedness, CouplingModel, FormFactor,
    IrClass, Kernel,
};

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityModel {
    form_factor: FormFactor,
    coupling_norm: f64,
    alpha_sq: f64,
    boundedness: Boundedness,
}

impl VelocityModel {
    /// Rejects couplings with `∫ J ω⁻² > 1` (Hamiltonian unbounded below).
    pub fn new(form_factor: FormFactor) -> Result<Self> {
        let coupling_norm = weighted_norm_sq(&form_factor, -2)?.value;
        let boundedness = boundedness_check(&form_factor, CouplingModel::Velocity)?;
        if boundedness == Boundedness::Supercritical {
            return Err(Error::Unbounded { norm: coupling_norm, bound: 1.0 });
        }
        let alpha_sq = match boundedness {
            Boundedness::Critical => 0.0,
            _ => (1.0 - coupling_norm).clamp(0.0, 1.0),
        };
        Ok(Self { form_factor, coupling_norm, alpha_sq, boundedness })
    }

    /// Replaces the drift coefficient, e.g. with a fitted value.
    pub fn with_alpha_sq(mut self, alpha_sq: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha_sq) {
            return Err(Error::InvalidParameter(format!("alpha_sq = {alpha_sq} outside [0, 1]")));
        }
        self.alpha_sq = alpha_sq;
        Ok(self)
    }

    pub fn form_factor(&self) -> &FormFactor {
        &self.form_factor
    }

    pub fn alpha_sq(&self) -> f64 {
        self.alpha_sq
    }

    pub fn coupling_norm(&self) -> f64 {
        self.coupling_norm
    }

    pub fn boundedness(&self) -> Boundedness {
        self.boundedness
    }

    /// `∫ J(ω) sin(ωt) ω⁻³ dω`.
    pub fn drift_integral(&self, t: f64) -> Result<f64> {
        Ok(oscillatory_integral(&self.form_factor, -3, t, Kernel::Sin, None)?.value)
    }

    /// `(a(t), b)`.
    pub fn label_at(&self, label: WeylLabel<f64>, t: f64) -> Result<WeylLabel<f64>> {
        if label.b == 0.0 || t == 0.0 {
            return Ok(label);
        }
        let drift = self.drift_integral(t)?;
        Ok(WeylLabel { a: label.a + label.b * (drift + self.alpha_sq * t), b: label.b })
    }

    /// Phase point at time `t` from `(a, 0, b, 0)`, field sampled on `grid`.
    pub fn flow(&self, label: WeylLabel<f64>, t: f64, grid: &FrequencyGrid<f64>) -> Result<PhasePoint<f64>> {
        let moved = self.label_at(label, t)?;
        let b = label.b;
        let j = &self.form_factor;
        let u = FieldVector::from_fn(grid.clone(), WeightRole::MinusOne, |w| {
            let s = (0.5 * w * t).sin();
            b * j.density(w).sqrt() * 2.0 * s * s / (w * w)
        })?;
        let v =
            FieldVector::from_fn(grid.clone(), WeightRole::PlusOne, |w| b * j.density(w).sqrt() * (w * t).sin() / w)?;
        PhasePoint::new(moved.a, u, moved.b, v)
    }

    /// `(b²/2) ∫ J ω⁻³ (1 − cos ωt) [coth(βω/2)] dω`.
    pub fn exponent(&self, b: f64, t: f64, env: EnvironmentState) -> Result<f64> {
        if b == 0.0 || t == 0.0 {
            return Ok(0.0);
        }
        let env = env.validate()?;
        let integral = oscillatory_integral(&self.form_factor, -3, t, Kernel::OneMinusCos, env.beta())?;
        Ok(0.5 * b * b * integral.value.max(0.0))
    }

    /// `φ(t)`: the exponent per unit `b²`.
    pub fn phi(&self, t: f64, env: EnvironmentState) -> Result<f64> {
        self.exponent(1.0, t, env)
    }

    /// `φ` and its non-decreasing envelope on a time grid.
    pub fn phi_envelope(&self, times: &[f64], env: EnvironmentState) -> Result<Envelope> {
        let phi = times.par_iter().map(|&t| self.phi(t, env)).collect::<Result<Vec<_>>>()?;
        Ok(Envelope::from_samples(times.to_vec(), phi))
    }

    /// `(a(t), b(t))` and `|χ|`. For `b = 0` the label is returned unchanged
    /// with `χ = 1` exactly.
    pub fn reduced_weyl(&self, label: WeylLabel<f64>, t: f64, env: EnvironmentState) -> Result<(WeylLabel<f64>, f64)> {
        if label.b == 0.0 {
            env.validate()?;
            return Ok((label, 1.0));
        }
        let moved = self.label_at(label, t)?;
        let chi = (-self.exponent(label.b, t, env)?).exp();
        Ok((moved, chi))
    }

    /// Curve over a time grid, evaluated in parallel.
    pub fn curve(&self, label: WeylLabel<f64>, times: &[f64], env: EnvironmentState) -> Result<DecoherenceCurve> {
        let rows = times
            .par_iter()
            .map(|&t| {
                let moved = self.label_at(label, t)?;
                let exponent = self.exponent(label.b, t, env)?;
                Ok((moved, exponent))
            })
            .collect::<Result<Vec<_>>>()?;
        let envelope = self.phi_envelope(times, env)?;
        let mut notes = Vec::new();
        if self.boundedness == Boundedness::Critical {
            notes.push("critical coupling: drift coefficient alpha_sq = 0, the mean position freezes".into());
        }
        let ir_class = ir_classify(&self.form_factor).ok();
        if ir_class == Some(IrClass::IrDivergent) && envelope.growth == Growth::Saturating {
            notes.push("envelope looks saturated although the form factor is infrared divergent; extend t_max".into());
        }
        Ok(DecoherenceCurve {
            times: times.to_vec(),
            a_t: rows.iter().map(|r| r.0.a).collect(),
            b_t: rows.iter().map(|r| r.0.b).collect(),
            abs_chi: rows.iter().map(|r| (-r.1).exp()).collect(),
            exponent: rows.iter().map(|r| r.1).collect(),
            envelope_phi: envelope.phi_tilde,
            metadata: CurveMetadata {
                model: CouplingModel::Velocity,
                environment: env,
                form_factor: self.form_factor.clone(),
                label,
                coupling_norm: self.coupling_norm,
                boundedness: self.boundedness,
                ir_class,
                alpha_sq: Some(self.alpha_sq),
                envelope_growth: envelope.growth,
                notes,
            },
        })
    }
}
