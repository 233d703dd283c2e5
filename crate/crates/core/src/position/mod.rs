//! Position coupling `H = ½P² + ½ω₀²Q² + H_F + Q ⊗ Φ(h)`.
//!
//! In the coordinates `A = (a, u)`, `B = (b, v)` the flow is `Ä = −K A`,
//! `B = Ȧ`, with the bordered operator
//!
//! ```text
//! K = M̂² = [ ω₀²  ⟨h| ]
//!          [ h     M² ]
//! ```
//!
//! so `A(t) = cos(√K t) A + K^{-1/2} sin(√K t) B` and
//! `B(t) = −K^{1/2} sin(√K t) A + cos(√K t) B`. `K` is bounded below by zero
//! iff `‖M⁻¹h‖² ≤ ω₀²`. The discretised `K` is diagonalised by the arrowhead
//! solver; the resolvent of the continuum operator provides an independent
//! route to the diagonal entries.

pub mod arrowhead;
pub mod density;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::curve::{CurveMetadata, DecoherenceCurve, Envelope};
use crate::environment::{self, EnvironmentState};
use crate::error::{Error, Result};
use crate::oracle::{mode_grid, GridScheme};
use crate::phase_space::{FieldVector, FrequencyGrid, PhasePoint, WeightRole, WeylLabel};
use crate::quadrature::{integrate_half_line, Amplitude, Kernel};
use crate::spectral::{
    boundedness_check, classify_norm, ir_classify, weighted_norm_sq, Boundedness, CouplingModel, FormFactor,
};

use self::arrowhead::ArrowheadEigen;
use self::density::{ErrorSlot, PointMass, SpectralDensity, Weighted, EPSILONS};

/// Discretised bordered operator together with its continuum data.
#[derive(Debug, Clone)]
pub struct FriedrichsOperator {
    omega0: f64,
    form_factor: FormFactor,
    grid: FrequencyGrid<f64>,
    couplings: Vec<f64>,
    boundedness: Boundedness,
    coupling_norm: f64,
    rescaled: bool,
    eigen: ArrowheadEigen,
}

impl FriedrichsOperator {
    /// Couplings `g_i = √(J(ω_i) Δω_i)`. At criticality the discrete
    /// couplings are rescaled so that `Σ g_i²/ω_i² = ω₀²` holds exactly and
    /// the discrete operator keeps its zero mode.
    pub fn new(omega0: f64, form_factor: FormFactor, grid: FrequencyGrid<f64>) -> Result<Self> {
        if !(omega0.is_finite() && omega0 > 0.0) {
            return Err(Error::InvalidParameter(format!("omega0 = {omega0}: need omega0 > 0")));
        }
        let bound = omega0 * omega0;
        let coupling_norm = weighted_norm_sq(&form_factor, -2)?.value;
        let boundedness = boundedness_check(&form_factor, CouplingModel::Position { omega0 })?;
        if boundedness == Boundedness::Supercritical {
            return Err(Error::Unbounded { norm: coupling_norm, bound });
        }
        let mut couplings: Vec<f64> =
            grid.nodes().iter().zip(grid.weights()).map(|(&w, &q)| (form_factor.density(w) * q).sqrt()).collect();
        let discrete: f64 = couplings.iter().zip(grid.nodes()).map(|(g, w)| g * g / (w * w)).sum();
        let mut rescaled = false;
        if boundedness == Boundedness::Critical && discrete > 0.0 {
            let s = (bound / discrete).sqrt();
            couplings.iter_mut().for_each(|g| *g *= s);
            rescaled = true;
        } else if classify_norm(discrete, bound) == Boundedness::Supercritical {
            return Err(Error::Unbounded { norm: discrete, bound });
        }
        let poles: Vec<f64> = grid.nodes().iter().map(|w| w * w).collect();
        let eigen = ArrowheadEigen::new(bound, &poles, &couplings)?;
        Ok(Self { omega0, form_factor, grid, couplings, boundedness, coupling_norm, rescaled, eigen })
    }

    /// Operator on the default mode grid with `n` modes.
    pub fn with_modes(omega0: f64, form_factor: FormFactor, n: usize, scheme: GridScheme) -> Result<Self> {
        let grid = mode_grid(&form_factor, n, scheme)?;
        Self::new(omega0, form_factor, grid)
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn form_factor(&self) -> &FormFactor {
        &self.form_factor
    }

    pub fn grid(&self) -> &FrequencyGrid<f64> {
        &self.grid
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn boundedness(&self) -> Boundedness {
        self.boundedness
    }

    pub fn coupling_norm(&self) -> f64 {
        self.coupling_norm
    }

    /// Whether the discrete couplings were rescaled to exact criticality.
    pub fn rescaled(&self) -> bool {
        self.rescaled
    }

    pub fn eigen(&self) -> &ArrowheadEigen {
        &self.eigen
    }

    /// `Σ(z) = ∫ J(ω)/(ω² − z) dω` for `z` off `[0, ∞)`.
    pub fn self_energy(&self, z: Complex64) -> Result<Complex64> {
        Weighted { j: &self.form_factor, p: 0 }.transform(z)
    }

    fn gap_at_zero(&self) -> f64 {
        match self.boundedness {
            Boundedness::Critical => 0.0,
            _ => self.omega0 * self.omega0 - self.coupling_norm,
        }
    }

    /// `D(λ + i0) = ω₀² − λ − Σ(λ + i0)` for `λ > 0`.
    pub fn denominator(&self, lambda: f64) -> Result<Complex64> {
        let t = Weighted { j: &self.form_factor, p: -2 }.boundary(lambda)?;
        Ok(Complex64::new(self.gap_at_zero(), 0.0) - (t + 1.0) * lambda)
    }

    /// Density per unit energy `E = √λ`: `J(E) / |D(E²)|²`.
    pub fn density_energy(&self, e: f64) -> Result<f64> {
        if e <= 0.0 {
            return Ok(0.0);
        }
        let j = self.form_factor.density(e);
        if j == 0.0 {
            return Ok(0.0);
        }
        Ok(j / self.denominator(e * e)?.norm_sqr())
    }

    /// `ρ₀₀(λ) = (1/π) Im ⟨e₀|(K − λ − i0)⁻¹ e₀⟩`.
    pub fn rho00(&self, lambda: f64) -> Result<f64> {
        if lambda <= 0.0 {
            return Ok(0.0);
        }
        let e = lambda.sqrt();
        Ok(self.density_energy(e)? / (2.0 * e))
    }

    /// `ρ₀₀` from finite offsets `ε`, extrapolated linearly to `ε = 0`.
    pub fn rho00_extrapolated(&self, lambda: f64) -> Result<f64> {
        let w2 = self.omega0 * self.omega0;
        let at = |eps: f64| -> Result<f64> {
            let z = Complex64::new(lambda, eps * w2);
            let g = 1.0 / (Complex64::new(w2, 0.0) - z - self.self_energy(z)?);
            Ok(g.im / std::f64::consts::PI)
        };
        let r2 = at(EPSILONS[1])?;
        let r3 = at(EPSILONS[2])?;
        Ok(r3 + (r3 - r2) / 9.0)
    }

    fn point_mass(&self) -> Result<Option<PointMass>> {
        if self.form_factor.amplitude == 0.0 {
            return Ok(Some(PointMass { lambda: self.omega0 * self.omega0, weight: 1.0 }));
        }
        if self.boundedness != Boundedness::Critical {
            return Ok(None);
        }
        match weighted_norm_sq(&self.form_factor, -4) {
            Ok(m) => Ok(Some(PointMass { lambda: 0.0, weight: 1.0 / (1.0 + m.value) })),
            Err(Error::IrDivergent { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Small-`E` exponent of the energy density.
    fn density_small_power(&self) -> f64 {
        let s = self.form_factor.small_power();
        if self.boundedness != Boundedness::Critical {
            s
        } else if s > 3.0 {
            s - 4.0
        } else {
            2.0 - s
        }
    }

    /// `∫ ρ_E(E) E^{2k} k_t(E) dE` over the continuum.
    fn density_integral(&self, power: i32, kernel: Kernel, t: f64) -> Result<f64> {
        let slot = ErrorSlot::new();
        let f = |e: f64| slot.wrap(self.density_energy(e)) * e.powi(power);
        let mut brk = vec![self.omega0];
        if let crate::spectral::Profile::Tabulated(tab) = &self.form_factor.profile {
            brk.extend_from_slice(tab.omegas());
        }
        brk.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let amp = Amplitude {
            f: &f,
            small_power: self.density_small_power() + power as f64,
            scale: self.form_factor.scale().min(self.omega0),
            support_end: self.form_factor.support_end(),
            breakpoints: &brk,
        };
        let est = integrate_half_line(&amp, kernel, t).map_err(Error::Quadrature)?;
        slot.check()?;
        Ok(est.value)
    }

    /// Spectral measure of `e₀`, sampled at `samples` energies and
    /// integrated adaptively for the sum rules.
    pub fn spectral_density(&self, samples: usize) -> Result<SpectralDensity> {
        let w2 = self.omega0 * self.omega0;
        let expected_second_moment = w2 * w2 + weighted_norm_sq(&self.form_factor, 0)?.value;
        let point_mass = self.point_mass()?;
        if self.form_factor.amplitude == 0.0 {
            return Ok(SpectralDensity {
                lambdas: Vec::new(),
                rho00: Vec::new(),
                point_mass,
                total_mass: 1.0,
                first_moment: w2,
                second_moment: w2 * w2,
                expected_second_moment,
                extrapolation_error: Some(0.0),
                edge_exponent: None,
            });
        }
        let (m0, m1, m2) = (
            self.density_integral(0, Kernel::Unit, 0.0)?,
            self.density_integral(2, Kernel::Unit, 0.0)?,
            self.density_integral(4, Kernel::Unit, 0.0)?,
        );
        let pm = point_mass.map(|p| p.weight).unwrap_or(0.0);
        let pl = point_mass.map(|p| p.lambda).unwrap_or(0.0);

        let e_max = self.form_factor.tail_frequency(1e-12).max(2.0 * self.omega0);
        let e_min = e_max * 1e-6;
        let energies: Vec<f64> =
            (0..samples.max(2)).map(|i| e_min * (e_max / e_min).powf(i as f64 / (samples.max(2) - 1) as f64)).collect();
        let lambdas: Vec<f64> = energies.iter().map(|e| e * e).collect();
        let rho00 = lambdas.par_iter().map(|&l| self.rho00(l)).collect::<Result<Vec<_>>>()?;

        let extrapolation_error = if self.form_factor.density_complex(Complex64::new(1.0, 0.0)).is_some() {
            let peak = rho00.iter().cloned().fold(0.0, f64::max);
            let probes: Vec<f64> = [0.25, 0.5, 0.8, 0.95, 1.05, 1.25, 2.0, 4.0].iter().map(|s| s * w2).collect();
            let worst = probes
                .par_iter()
                .map(|&l| Ok((self.rho00_extrapolated(l)? - self.rho00(l)?).abs()))
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            Some(worst / peak.max(f64::MIN_POSITIVE))
        } else {
            None
        };

        let edge_exponent = if self.boundedness == Boundedness::Critical {
            let e0 = self.form_factor.scale().min(self.omega0);
            let probe = [1e-4 * e0, 1e-3 * e0];
            let r0 = self.rho00(probe[0] * probe[0])?;
            let r1 = self.rho00(probe[1] * probe[1])?;
            Some((r1 / r0).ln() / (probe[1] * probe[1] / (probe[0] * probe[0])).ln())
        } else {
            None
        };

        Ok(SpectralDensity {
            lambdas,
            rho00,
            point_mass,
            total_mass: m0 + pm,
            first_moment: m1 + pm * pl,
            second_moment: m2 + pm * pl * pl,
            expected_second_moment,
            extrapolation_error,
            edge_exponent,
        })
    }

    /// `⟨e₀|cos(√K t) e₀⟩` from the continuum spectral measure.
    pub fn c00_resolvent(&self, t: f64) -> Result<f64> {
        let pm = self.point_mass()?;
        let cont = if self.form_factor.amplitude == 0.0 { 0.0 } else { self.density_integral(0, Kernel::Cos, t)? };
        Ok(cont + pm.map(|p| p.weight * cos_root(p.lambda, t)).unwrap_or(0.0))
    }

    /// `⟨e₀|K^{-1/2} sin(√K t) e₀⟩` from the continuum spectral measure.
    pub fn s00_resolvent(&self, t: f64) -> Result<f64> {
        let pm = self.point_mass()?;
        let cont = if self.form_factor.amplitude == 0.0 { 0.0 } else { self.density_integral(-1, Kernel::Sin, t)? };
        Ok(cont + pm.map(|p| p.weight * sinc_root(p.lambda, t)).unwrap_or(0.0))
    }

    /// `⟨e₀|cos(√K t) e₀⟩` from the discrete eigen-decomposition.
    pub fn c00(&self, t: f64) -> f64 {
        self.eigen.head_weights().map(|(l, w)| w * cos_root(l, t)).sum()
    }

    /// `⟨e₀|K^{-1/2} sin(√K t) e₀⟩` from the discrete eigen-decomposition.
    pub fn s00(&self, t: f64) -> f64 {
        self.eigen.head_weights().map(|(l, w)| w * sinc_root(l, t)).sum()
    }

    /// Flow of `(a, 0, b, 0)` in mode coordinates: `(A(t), B(t))`.
    fn flow_modes(&self, label: WeylLabel<f64>, t: f64) -> (Vec<f64>, Vec<f64>) {
        let (a, b) = (label.a, label.b);
        let big_a = self.eigen.apply_to_head(|l| a * cos_root(l, t) + b * sinc_root(l, t));
        let big_b = self.eigen.apply_to_head(|l| -a * l * sinc_root(l, t) + b * cos_root(l, t));
        (big_a, big_b)
    }

    /// Phase point at time `t` from `(a, 0, b, 0)`.
    pub fn flow(&self, label: WeylLabel<f64>, t: f64) -> Result<PhasePoint<f64>> {
        if t == 0.0 {
            return Ok(PhasePoint::at_rest(label, self.grid.clone()));
        }
        let (big_a, big_b) = self.flow_modes(label, t);
        let to_field = |modes: &[f64], role| {
            let vals = modes.iter().zip(self.grid.weights()).map(|(x, q)| x / q.sqrt()).collect();
            FieldVector::new(self.grid.clone(), vals, role)
        };
        PhasePoint::new(
            big_a[0],
            to_field(&big_a[1..], WeightRole::MinusOne)?,
            big_b[0],
            to_field(&big_b[1..], WeightRole::PlusOne)?,
        )
    }

    /// `⟨A|K A⟩ + ⟨B|B⟩`, conserved by the flow.
    pub fn energy_form(&self, point: &PhasePoint<f64>) -> Result<f64> {
        crate::phase_space::ensure_same_grid(point.grid(), &self.grid)?;
        let w2 = self.omega0 * self.omega0;
        let mut e = w2 * point.a * point.a + point.b * point.b;
        for i in 0..self.grid.len() {
            let q = self.grid.weights()[i].sqrt();
            let (u, v) = (point.u.values()[i] * q, point.v.values()[i] * q);
            let w = self.grid.nodes()[i];
            e += 2.0 * point.a * self.couplings[i] * u + w * w * u * u + v * v;
        }
        Ok(e)
    }

    /// Decoherence exponent from the grid field components.
    pub fn exponent(&self, label: WeylLabel<f64>, t: f64, env: EnvironmentState) -> Result<f64> {
        let env = env.validate()?;
        if t == 0.0 || (label.a == 0.0 && label.b == 0.0) || self.form_factor.amplitude == 0.0 {
            return Ok(0.0);
        }
        let p = self.flow(label, t)?;
        environment::exponent(&p.u, &p.v, env)
    }

    /// `(a(t), b(t))` and `|χ|`.
    pub fn reduced_weyl(&self, label: WeylLabel<f64>, t: f64, env: EnvironmentState) -> Result<(WeylLabel<f64>, f64)> {
        let p = self.flow(label, t)?;
        let e =
            if self.form_factor.amplitude == 0.0 { 0.0 } else { environment::exponent(&p.u, &p.v, env.validate()?)? };
        Ok((p.label(), (-e).exp()))
    }

    /// Curve over a time grid. The envelope column is the running minimum
    /// of the exponent of the unit-momentum label `(0, 1)`.
    pub fn curve(&self, label: WeylLabel<f64>, times: &[f64], env: EnvironmentState) -> Result<DecoherenceCurve> {
        let rows = times
            .par_iter()
            .map(|&t| {
                let (moved, chi) = self.reduced_weyl(label, t, env)?;
                let unit = self.exponent(WeylLabel::new(0.0, 1.0), t, env)?;
                Ok((moved, chi, unit))
            })
            .collect::<Result<Vec<_>>>()?;
        let envelope = Envelope::from_samples(times.to_vec(), rows.iter().map(|r| r.2).collect());
        let mut notes = vec!["position coupling: superselection in momentum is non-uniform".to_string()];
        if self.rescaled {
            notes.push("critical coupling: discrete couplings rescaled to exact criticality".into());
        }
        Ok(DecoherenceCurve {
            times: times.to_vec(),
            a_t: rows.iter().map(|r| r.0.a).collect(),
            b_t: rows.iter().map(|r| r.0.b).collect(),
            abs_chi: rows.iter().map(|r| r.1).collect(),
            exponent: rows.iter().map(|r| -r.1.ln()).collect(),
            envelope_phi: envelope.phi_tilde,
            metadata: CurveMetadata {
                model: CouplingModel::Position { omega0: self.omega0 },
                environment: env,
                form_factor: self.form_factor.clone(),
                label,
                coupling_norm: self.coupling_norm,
                boundedness: self.boundedness,
                ir_class: ir_classify(&self.form_factor).ok(),
                alpha_sq: None,
                envelope_growth: envelope.growth,
                notes,
            },
        })
    }
}

/// `cos(√λ t)`, continued to `cosh` for (round-off) negative `λ`.
pub(crate) fn cos_root(l: f64, t: f64) -> f64 {
    if l >= 0.0 {
        (l.sqrt() * t).cos()
    } else {
        ((-l).sqrt() * t).cosh()
    }
}

/// `sin(√λ t)/√λ`, equal to `t` at `λ = 0`.
pub(crate) fn sinc_root(l: f64, t: f64) -> f64 {
    let x2 = l * t * t;
    if x2.abs() < 1e-8 {
        return t * (1.0 - x2 / 6.0 + x2 * x2 / 120.0);
    }
    if l > 0.0 {
        let r = l.sqrt();
        (r * t).sin() / r
    } else {
        let r = (-l).sqrt();
        (r * t).sinh() / r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::product_flow;

    #[test]
    fn uncoupled_operator_rotates_like_an_oscillator() {
        let j = FormFactor::power_exp(2.0, 1.0, 0.0).unwrap();
        let op = FriedrichsOperator::with_modes(1.3, j, 64, GridScheme::Midpoint).unwrap();
        let label = WeylLabel::new(0.4, -0.7);
        let p = op.flow(label, 2.2).unwrap();
        let q = product_flow(&PhasePoint::at_rest(label, op.grid().clone()), 1.3, 2.2).unwrap();
        assert!((p.a - q.a).abs() < 1e-14 && (p.b - q.b).abs() < 1e-14);
        assert!(p.u.is_zero() && p.v.is_zero());
        assert_eq!(op.exponent(label, 5.0, EnvironmentState::Vacuum).unwrap(), 0.0);
        let d = op.spectral_density(16).unwrap();
        assert_eq!(d.point_mass, Some(PointMass { lambda: 1.3 * 1.3, weight: 1.0 }));
    }

    #[test]
    fn self_energy_at_negative_axis() {
        let j = FormFactor::power_exp(1.0, 1.0, 1.0).unwrap();
        let op = FriedrichsOperator::with_modes(1.0, j.clone(), 8, GridScheme::Midpoint).unwrap();
        let s = op.self_energy(Complex64::new(-1.0, 0.0)).unwrap();
        let direct =
            crate::quadrature::gk::adaptive(&|w: f64| w * w * (-2.0 * w).exp() / (w * w + 1.0), 0.0, 40.0, 1e-14, 0.0);
        assert!((s.re - direct.value).abs() < 1e-12 && s.im == 0.0);
        let si = op.self_energy(Complex64::new(0.0, 1.0)).unwrap();
        assert!(si.im > 0.0);
        assert!(matches!(op.self_energy(Complex64::new(2.0, 0.0)), Err(Error::OnCut { .. })));
    }

    #[test]
    fn near_cut_transform_matches_boundary_limit() {
        let j = FormFactor::with_coupling_norm(2.0, 1.0, 0.25).unwrap();
        let op = FriedrichsOperator::with_modes(1.0, j, 8, GridScheme::Midpoint).unwrap();
        for &l in &[0.3, 1.0, 2.5] {
            let near = op.self_energy(Complex64::new(l, 1e-9)).unwrap();
            let edge = Weighted { j: op.form_factor(), p: 0 }.boundary(l).unwrap();
            assert!((near - edge).norm() < 1e-7 * edge.norm(), "{l}: {near} vs {edge}");
        }
    }

    #[test]
    fn energy_form_is_conserved() {
        let j = FormFactor::with_coupling_norm(2.0, 1.0, 0.5).unwrap();
        let op = FriedrichsOperator::with_modes(1.0, j, 200, GridScheme::Midpoint).unwrap();
        let label = WeylLabel::new(0.3, 1.1);
        let e0 = op.energy_form(&PhasePoint::at_rest(label, op.grid().clone())).unwrap();
        for &t in &[0.7, 13.0, 90.0] {
            let e = op.energy_form(&op.flow(label, t).unwrap()).unwrap();
            assert!((e - e0).abs() < 1e-10 * e0, "t={t}: {e} vs {e0}");
        }
    }
}
