//! Brute-force validator: the field truncated to `N` discrete modes and the
//! exact finite-dimensional linear Hamiltonian flow of the Weyl labels.
//!
//! Modes sit at `ω_i` with couplings `g_i = √(J(ω_i) Δω_i)`. In mode
//! coordinates (field amplitude times `√Δω_i`) the two models read
//!
//! ```text
//! velocity:  ȧ = b − Σ g u,   u̇ = v,   ḃ = 0,                 v̇ = g b − ω² u
//! position:  ȧ = b,           u̇ = v,   ḃ = −ω₀² a − Σ g u,    v̇ = −g a − ω² u
//! ```
//!
//! The generator is stored in the balanced canonical pair `q = √ω u`,
//! `p = v/√ω`, where every free-mode block is a rotation with frequency `ω`,
//! and applied through a truncated Taylor series on short sub-steps.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::environment::{self, EnvironmentState};
use crate::error::{Error, Result};
use crate::phase_space::{FieldVector, FrequencyGrid, PhasePoint, WeightRole, WeylLabel};
use crate::position::FriedrichsOperator;
use crate::spectral::{boundedness_check, classify_norm, Boundedness, CouplingModel, FormFactor};
use crate::velocity::VelocityModel;

/// Placement of the discrete modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridScheme {
    /// Equal cells on `[ω_min, ω_max]`.
    Midpoint,
    /// Equal cells in `ln ω`; resolves the soft-mode region of IR-divergent
    /// form factors.
    Geometric,
}

/// Lower mode edge in units of the cutoff `Λ`.
pub const OMEGA_MIN_FRACTION: f64 = 1e-6;
/// Mass of `J` neglected beyond the upper mode edge.
pub const TAIL_FRACTION: f64 = 1e-12;

/// `n` modes on `[Λ·1e-6, ω_max]`, with the mass of `J` beyond `ω_max`
/// below `1e-12` of the total.
pub fn mode_grid(j: &FormFactor, n: usize, scheme: GridScheme) -> Result<FrequencyGrid<f64>> {
    let lo = 2.0 * j.scale() * OMEGA_MIN_FRACTION;
    let hi = j.tail_frequency(TAIL_FRACTION);
    match scheme {
        GridScheme::Midpoint => FrequencyGrid::midpoint(lo, hi, n),
        GridScheme::Geometric => FrequencyGrid::geometric(lo, hi, n),
    }
}

/// Truncated field with the exact linear flow of the labels.
#[derive(Debug, Clone)]
pub struct ModeSystem {
    form_factor: FormFactor,
    kind: CouplingModel,
    scheme: GridScheme,
    grid: FrequencyGrid<f64>,
    couplings: Vec<f64>,
    rescaled: bool,
    /// Row-sum bound of the generator, fixes the Taylor sub-step.
    norm: f64,
}

impl ModeSystem {
    /// Discretises `J` with `n ≥ 2` modes. A continuum-critical coupling is
    /// rescaled so that the discrete system is exactly critical as well.
    pub fn build(j: &FormFactor, kind: CouplingModel, n: usize, scheme: GridScheme) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("mode oracle needs at least 2 modes, got {n}")));
        }
        if let CouplingModel::Position { omega0 } = kind {
            if !(omega0.is_finite() && omega0 > 0.0) {
                return Err(Error::InvalidParameter(format!("omega0 = {omega0}: need omega0 > 0")));
            }
        }
        let grid = mode_grid(j, n, scheme)?;
        let mut couplings: Vec<f64> =
            grid.nodes().iter().zip(grid.weights()).map(|(&w, &q)| (j.density(w) * q).sqrt()).collect();
        let bound = kind.norm_bound();
        let discrete = discrete_norm(&grid, &couplings);
        let mut rescaled = false;
        match boundedness_check(j, kind)? {
            Boundedness::Supercritical => return Err(Error::Unbounded { norm: discrete, bound }),
            Boundedness::Critical if discrete > 0.0 => {
                let s = (bound / discrete).sqrt();
                couplings.iter_mut().for_each(|g| *g *= s);
                rescaled = true;
            }
            _ => {
                if classify_norm(discrete, bound) == Boundedness::Supercritical {
                    return Err(Error::Unbounded { norm: discrete, bound });
                }
            }
        }
        let mut sys = Self { form_factor: j.clone(), kind, scheme, grid, couplings, rescaled, norm: 0.0 };
        sys.norm = sys.row_sum_norm();
        Ok(sys)
    }

    pub fn form_factor(&self) -> &FormFactor {
        &self.form_factor
    }

    pub fn kind(&self) -> CouplingModel {
        self.kind
    }

    pub fn scheme(&self) -> GridScheme {
        self.scheme
    }

    pub fn grid(&self) -> &FrequencyGrid<f64> {
        &self.grid
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn modes(&self) -> usize {
        self.grid.len()
    }

    /// Whether the couplings were rescaled to exact criticality.
    pub fn rescaled(&self) -> bool {
        self.rescaled
    }

    /// `Σ g_i² / ω_i²`, the discrete `‖M⁻¹h‖²`.
    pub fn discrete_norm(&self) -> f64 {
        discrete_norm(&self.grid, &self.couplings)
    }

    /// Dimension `2(N + 1)` of the phase space.
    pub fn dim(&self) -> usize {
        2 * (self.modes() + 1)
    }

    /// Non-zero generator entries `(row, col, value)` in the ordering
    /// `(a, q₁..q_N, b, p₁..p_N)`.
    pub fn generator_triplets(&self) -> Vec<(usize, usize, f64)> {
        let n = self.modes();
        let (ia, ib) = (0, n + 1);
        let mut out = Vec::with_capacity(6 * n + 2);
        for i in 0..n {
            let w = self.grid.nodes()[i];
            let c = self.couplings[i] / w.sqrt();
            let (iq, ip) = (1 + i, n + 2 + i);
            out.push((iq, ip, w));
            out.push((ip, iq, -w));
            match self.kind {
                CouplingModel::Velocity => {
                    out.push((ia, iq, -c));
                    out.push((ip, ib, c));
                }
                CouplingModel::Position { .. } => {
                    out.push((ib, iq, -c));
                    out.push((ip, ia, -c));
                }
            }
        }
        out.push((ia, ib, 1.0));
        if let CouplingModel::Position { omega0 } = self.kind {
            out.push((ib, ia, -omega0 * omega0));
        }
        out
    }

    /// Dense generator, for small systems.
    pub fn generator_dense(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut m = vec![vec![0.0; d]; d];
        for (r, c, x) in self.generator_triplets() {
            m[r][c] += x;
        }
        m
    }

    /// Largest entry of `L Ω + Ω Lᵀ`; zero for a Hamiltonian generator.
    pub fn symplectic_defect(&self) -> f64 {
        let half = self.modes() + 1;
        let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (r, c, x) in self.generator_triplets() {
            // (L Ω)_{r, c±half} and (Ω Lᵀ)_{c∓half, r}
            let (col, sign) = if c < half { (c + half, 1.0) } else { (c - half, -1.0) };
            *acc.entry((r, col)).or_default() += sign * x;
            let (row, sign) = if c < half { (c + half, -1.0) } else { (c - half, 1.0) };
            *acc.entry((row, r)).or_default() += sign * x;
        }
        acc.values().fold(0.0, |m, x| m.max(x.abs()))
    }

    fn row_sum_norm(&self) -> f64 {
        let mut rows = vec![0.0; self.dim()];
        for (r, _, x) in self.generator_triplets() {
            rows[r] += x.abs();
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    fn apply(&self, z: &[f64], out: &mut [f64]) {
        let n = self.modes();
        let (ia, ib) = (0, n + 1);
        let mut head = [0.0; 2];
        head[0] = z[ib];
        if let CouplingModel::Position { omega0 } = self.kind {
            head[1] = -omega0 * omega0 * z[ia];
        }
        for i in 0..n {
            let w = self.grid.nodes()[i];
            let c = self.couplings[i] / w.sqrt();
            let (q, p) = (z[1 + i], z[n + 2 + i]);
            out[1 + i] = w * p;
            out[n + 2 + i] = -w * q;
            match self.kind {
                CouplingModel::Velocity => {
                    head[0] -= c * q;
                    out[n + 2 + i] += c * z[ib];
                }
                CouplingModel::Position { .. } => {
                    head[1] -= c * q;
                    out[n + 2 + i] -= c * z[ia];
                }
            }
        }
        out[ia] = head[0];
        out[ib] = head[1];
    }

    /// `exp(L t) z` by a Taylor series on sub-steps with `|h|·‖L‖ ≤ 1/2`.
    pub fn propagate(&self, z: &[f64], t: f64) -> Result<Vec<f64>> {
        if z.len() != self.dim() {
            return Err(Error::InvalidParameter(format!("state has length {}, expected {}", z.len(), self.dim())));
        }
        if !t.is_finite() || z.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("propagation needs finite time and state".into()));
        }
        let mut state = z.to_vec();
        if t == 0.0 {
            return Ok(state);
        }
        let steps = (t.abs() * self.norm / 0.5).ceil().max(1.0) as usize;
        let h = t / steps as f64;
        let mut term = vec![0.0; state.len()];
        let mut next = vec![0.0; state.len()];
        for _ in 0..steps {
            term.copy_from_slice(&state);
            for k in 1..64 {
                self.apply(&term, &mut next);
                let f = h / k as f64;
                let mut size = 0.0f64;
                for (x, y) in term.iter_mut().zip(&next) {
                    *x = y * f;
                    size = size.max(x.abs());
                }
                let total = state.iter().zip(&term).fold(0.0f64, |m, (s, x)| {
                    let v = s + x;
                    m.max(v.abs())
                });
                state.iter_mut().zip(&term).for_each(|(s, x)| *s += x);
                if size <= 1e-17 * total || size == 0.0 {
                    break;
                }
            }
        }
        Ok(state)
    }

    /// Propagator as a dense matrix (columns are images of unit vectors).
    pub fn propagator_dense(&self, t: f64) -> Result<Vec<Vec<f64>>> {
        let d = self.dim();
        let cols = (0..d)
            .into_par_iter()
            .map(|k| {
                let mut e = vec![0.0; d];
                e[k] = 1.0;
                self.propagate(&e, t)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((0..d).map(|r| (0..d).map(|c| cols[c][r]).collect()).collect())
    }

    /// Largest entry of `Rᵀ Ω R − Ω` for `R = exp(L t)`.
    pub fn canonical_form_drift(&self, t: f64) -> Result<f64> {
        let r = self.propagator_dense(t)?;
        let d = self.dim();
        let half = d / 2;
        let omega = |i: usize, j: usize| -> f64 {
            if j == i + half {
                1.0
            } else if i == j + half {
                -1.0
            } else {
                0.0
            }
        };
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                // (Rᵀ Ω R)_{ij} = Σ_k R_{k i} (Ω R)_{k j}
                let mut s = 0.0;
                for k in 0..half {
                    s += r[k][i] * r[k + half][j] - r[k + half][i] * r[k][j];
                }
                worst = worst.max((s - omega(i, j)).abs());
            }
        }
        Ok(worst)
    }

    /// Balanced state vector of a phase point on this system's grid.
    pub fn to_vector(&self, point: &PhasePoint<f64>) -> Result<Vec<f64>> {
        crate::phase_space::ensure_same_grid(point.grid(), &self.grid)?;
        let n = self.modes();
        let mut z = vec![0.0; self.dim()];
        z[0] = point.a;
        z[n + 1] = point.b;
        for i in 0..n {
            let (w, q) = (self.grid.nodes()[i], self.grid.weights()[i].sqrt());
            z[1 + i] = point.u.values()[i] * q * w.sqrt();
            z[n + 2 + i] = point.v.values()[i] * q / w.sqrt();
        }
        Ok(z)
    }

    /// Phase point (field amplitudes) from a balanced state vector.
    pub fn from_vector(&self, z: &[f64]) -> Result<PhasePoint<f64>> {
        if z.len() != self.dim() {
            return Err(Error::InvalidParameter(format!("state has length {}, expected {}", z.len(), self.dim())));
        }
        let n = self.modes();
        let mut u = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for i in 0..n {
            let (w, q) = (self.grid.nodes()[i], self.grid.weights()[i].sqrt());
            u.push(z[1 + i] / (q * w.sqrt()));
            v.push(z[n + 2 + i] * w.sqrt() / q);
        }
        PhasePoint::new(
            z[0],
            FieldVector::new(self.grid.clone(), u, WeightRole::MinusOne)?,
            z[n + 1],
            FieldVector::new(self.grid.clone(), v, WeightRole::PlusOne)?,
        )
    }

    /// Flow of `(a, 0, b, 0)`.
    pub fn flow(&self, label: WeylLabel<f64>, t: f64) -> Result<PhasePoint<f64>> {
        let z = self.to_vector(&PhasePoint::at_rest(label, self.grid.clone()))?;
        self.from_vector(&self.propagate(&z, t)?)
    }

    /// Discrete exponent `Σ ¼(u_i² ω_i + v_i² ω_i⁻¹)[coth(βω_i/2)]`.
    pub fn exponent(&self, label: WeylLabel<f64>, t: f64, env: EnvironmentState) -> Result<f64> {
        let p = self.flow(label, t)?;
        environment::exponent(&p.u, &p.v, env.validate()?)
    }

    /// The same quantity from the analytic module of this system's model.
    fn analytic_chi(&self, label: WeylLabel<f64>, t: f64, env: EnvironmentState) -> Result<(WeylLabel<f64>, f64)> {
        match self.kind {
            CouplingModel::Velocity => VelocityModel::new(self.form_factor.clone())?.reduced_weyl(label, t, env),
            CouplingModel::Position { omega0 } => {
                FriedrichsOperator::new(omega0, self.form_factor.clone(), self.grid.clone())?
                    .reduced_weyl(label, t, env)
            }
        }
    }
}

fn discrete_norm(grid: &FrequencyGrid<f64>, g: &[f64]) -> f64 {
    g.iter().zip(grid.nodes()).map(|(g, w)| g * g / (w * w)).sum()
}

/// One analytic-versus-oracle comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub quantity: String,
    pub analytic: f64,
    pub oracle: f64,
    pub abs_diff: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub convergence_order_estimate: Option<f64>,
}

impl ComparisonReport {
    pub fn new(quantity: impl Into<String>, analytic: f64, oracle: f64, n: usize) -> Self {
        Self {
            quantity: quantity.into(),
            analytic,
            oracle,
            abs_diff: (analytic - oracle).abs(),
            n,
            convergence_order_estimate: None,
        }
    }
}

/// `|χ|` from the oracle against the analytic module; for the position
/// model the analytic side is the eigen-decomposition on the same grid.
pub fn oracle_chi(sys: &ModeSystem, label: WeylLabel<f64>, t: f64, env: EnvironmentState) -> Result<ComparisonReport> {
    let env = env.validate()?;
    let oracle = (-sys.exponent(label, t, env)?).exp();
    let (_, analytic) = sys.analytic_chi(label, t, env)?;
    Ok(ComparisonReport::new("abs_chi", analytic, oracle, sys.modes()))
}

/// `a(t)` from the oracle against the analytic module.
pub fn oracle_position(sys: &ModeSystem, label: WeylLabel<f64>, t: f64) -> Result<ComparisonReport> {
    let oracle = sys.flow(label, t)?.a;
    let (moved, _) = sys.analytic_chi(label, t, EnvironmentState::Vacuum)?;
    Ok(ComparisonReport::new("a_t", moved.a, oracle, sys.modes()))
}

/// Largest `|Δ|` over `times` for each mode count, with the observed order
/// `p` in `|Δ| ~ N^{-p}` from a least-squares fit of `ln|Δ|` on `ln N`.
pub fn convergence_study(
    reports: impl Fn(usize) -> Result<Vec<ComparisonReport>> + Sync,
    modes: &[usize],
) -> Result<Vec<ComparisonReport>> {
    let mut worst = modes
        .par_iter()
        .map(|&n| {
            let rs = reports(n)?;
            rs.into_iter()
                .max_by(|a, b| a.abs_diff.total_cmp(&b.abs_diff))
                .ok_or_else(|| Error::InvalidParameter("empty comparison set".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> =
        worst.iter().filter(|r| r.abs_diff > 0.0).map(|r| ((r.n as f64).ln(), r.abs_diff.ln())).collect();
    if pts.len() >= 2 {
        let order = -least_squares(&pts).0;
        worst.iter_mut().for_each(|r| r.convergence_order_estimate = Some(order));
    }
    Ok(worst)
}

/// Slope, intercept and slope standard error of a straight-line fit.
fn least_squares(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let se = if pts.len() > 2 {
        let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    (slope, intercept, se)
}

/// Fitted drift coefficient with its 95% confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftFit {
    pub alpha_sq: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Standard error of the regression slope.
    pub slope_std_error: f64,
    /// `|α²(N) − α²(N/2)|`, an estimate of the truncation error.
    pub discretization: f64,
    pub samples: usize,
    pub modes: usize,
}

impl DriftFit {
    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }
}

/// Least-squares slope of `(a(t) − a − b ∫J sin(ωt) ω⁻³ dω)/b` against `t`
/// over `samples` equally spaced times in `window`. The interval combines
/// the Student-t interval of the slope with the change of the fitted slope
/// from `N/2` to `N` modes, in quadrature.
pub fn fit_drift(sys: &ModeSystem, b: f64, window: (f64, f64), samples: usize) -> Result<DriftFit> {
    if sys.kind != CouplingModel::Velocity {
        return Err(Error::InvalidParameter("drift fit applies to the velocity coupling".into()));
    }
    if !(b.is_finite() && b != 0.0) {
        return Err(Error::InvalidParameter(format!("drift fit needs b != 0, got {b}")));
    }
    let (t0, t1) = window;
    let transient = 1.0 / sys.form_factor.scale();
    if !(t0 >= transient && t1 - t0 >= 10.0 * transient && samples >= 8) {
        return Err(Error::WindowTooShort(format!(
            "window [{t0}, {t1}] with {samples} samples; need t0 >= {transient}, length >= {} and >= 8 samples",
            10.0 * transient
        )));
    }
    let model = VelocityModel::new(sys.form_factor.clone())?;
    let times: Vec<f64> = (0..samples).map(|k| t0 + (t1 - t0) * k as f64 / (samples - 1) as f64).collect();
    let drift = times.par_iter().map(|&t| model.drift_integral(t)).collect::<Result<Vec<_>>>()?;
    let fit = |s: &ModeSystem| -> Result<(f64, f64)> {
        let mut z = s.to_vector(&PhasePoint::at_rest(WeylLabel::new(0.0, b), s.grid.clone()))?;
        let mut now = 0.0;
        let mut pts = Vec::with_capacity(samples);
        for (&t, d) in times.iter().zip(&drift) {
            z = s.propagate(&z, t - now)?;
            now = t;
            pts.push((t, z[0] / b - d));
        }
        let (slope, _, se) = least_squares(&pts);
        Ok((slope, se))
    };
    let half = ModeSystem::build(&sys.form_factor, sys.kind, (sys.modes() / 2).max(2), sys.scheme)?;
    let (fine, coarse) = rayon::join(|| fit(sys), || fit(&half));
    let ((alpha_sq, se), (coarse, _)) = (fine?, coarse?);
    let quantile = StudentsT::new(0.0, 1.0, (samples - 2) as f64)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?
        .inverse_cdf(0.975);
    let discretization = (alpha_sq - coarse).abs();
    let half_width = ((quantile * se).powi(2) + discretization.powi(2)).sqrt();
    Ok(DriftFit {
        alpha_sq,
        ci_low: alpha_sq - half_width,
        ci_high: alpha_sq + half_width,
        slope_std_error: se,
        discretization,
        samples,
        modes: sys.modes(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncoupled_generator_is_block_diagonal() {
        let j = FormFactor::power_exp(2.0, 1.0, 0.0).unwrap();
        let sys = ModeSystem::build(&j, CouplingModel::Velocity, 4, GridScheme::Midpoint).unwrap();
        let n = sys.modes();
        for (r, c, x) in sys.generator_triplets() {
            let particle = |k: usize| k == 0 || k == n + 1;
            assert!(particle(r) == particle(c) || x == 0.0);
        }
        assert_eq!(sys.symplectic_defect(), 0.0);
    }

    #[test]
    fn velocity_momentum_row_is_zero() {
        let j = FormFactor::with_coupling_norm(2.0, 1.0, 0.25).unwrap();
        let sys = ModeSystem::build(&j, CouplingModel::Velocity, 16, GridScheme::Midpoint).unwrap();
        assert!(sys.generator_triplets().iter().all(|&(r, _, _)| r != sys.modes() + 1));
        let p = sys.flow(WeylLabel::new(0.2, 1.3), 7.0).unwrap();
        assert_eq!(p.b, 1.3);
    }

    #[test]
    fn single_free_mode_rotates() {
        let j = FormFactor::power_exp(2.0, 1.0, 0.0).unwrap();
        let sys = ModeSystem::build(&j, CouplingModel::Position { omega0: 0.7 }, 2, GridScheme::Midpoint).unwrap();
        let mut z = vec![0.0; sys.dim()];
        z[0] = 1.0;
        let out = sys.propagate(&z, 2.0).unwrap();
        assert!((out[0] - (1.4f64).cos()).abs() < 1e-14);
        assert!((out[3] + 0.7 * (1.4f64).sin()).abs() < 1e-14);
        let mut z = vec![0.0; sys.dim()];
        z[1] = 1.0;
        let w = sys.grid().nodes()[0];
        let out = sys.propagate(&z, 2.0).unwrap();
        assert!((out[1] - (w * 2.0).cos()).abs() < 1e-14 && (out[4] + (w * 2.0).sin()).abs() < 1e-14);
    }

    #[test]
    fn drift_fit_of_free_particle() {
        let j = FormFactor::power_exp(2.0, 1.0, 0.0).unwrap();
        let sys = ModeSystem::build(&j, CouplingModel::Velocity, 8, GridScheme::Midpoint).unwrap();
        let fit = fit_drift(&sys, 1.0, (5.0, 60.0), 16).unwrap();
        assert!((fit.alpha_sq - 1.0).abs() < 1e-12 && fit.contains(1.0));
        assert!(matches!(fit_drift(&sys, 1.0, (0.1, 1.0), 16), Err(Error::WindowTooShort(_))));
    }
}
