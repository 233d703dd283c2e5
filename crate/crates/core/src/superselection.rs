//! Momentum-interval projections and the decay of off-diagonal blocks.
//!
//! `W_S(a, b)` shifts the momentum by `b`, so `P(I₂) W_S(a, b) P(I₁)`
//! vanishes identically unless `b` lies in the Minkowski difference
//! `I₂ − I₁`. Under the reduced dynamics each surviving term is damped by
//! `|χ| = exp(−b² φ(t))` (velocity coupling), which yields the bound
//! `‖P(I₂) Φ_t[A] P(I₁)‖ ≤ Σ |c_j| exp(−b_j² φ̃(t)) ≤ C_A exp(−δ² φ̃(t))`.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{fmt_f64, Envelope, Growth};
use crate::environment::EnvironmentState;
use crate::error::{Error, Result};
use crate::phase_space::WeylLabel;
use crate::position::FriedrichsOperator;
use crate::scalar::Real;
use crate::velocity::VelocityModel;

/// Closed momentum interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumInterval<T> {
    lo: T,
    hi: T,
}

impl<T: Real> MomentumInterval<T> {
    pub fn new(lo: T, hi: T) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!("momentum interval needs finite lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> T {
        self.lo
    }

    pub fn hi(&self) -> T {
        self.hi
    }

    /// `dist(I₁, I₂)`; zero when the intervals overlap or touch.
    pub fn distance(&self, other: &Self) -> T {
        (other.lo - self.hi).max(self.lo - other.hi).max(T::zero())
    }

    /// `I₂ − I₁ = [I₂.lo − I₁.hi, I₂.hi − I₁.lo]` with `self = I₂`.
    pub fn minus(&self, other: &Self) -> (T, T) {
        (self.lo - other.hi, self.hi - other.lo)
    }
}

/// `P(I₂) W_S(a, b) P(I₁) = 0`, i.e. `b ∉ I₂ − I₁`. The difference is taken
/// closed: a shift onto the boundary counts as contributing.
pub fn offdiag_is_zero<T: Real>(label: WeylLabel<T>, i1: &MomentumInterval<T>, i2: &MomentumInterval<T>) -> bool {
    let (lo, hi) = i2.minus(i1);
    label.b < lo || label.b > hi
}

/// Finite linear combination `A = Σ c_j W_S(a_j, b_j)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WeylCombination {
    pub terms: Vec<(Complex64, WeylLabel<f64>)>,
}

impl WeylCombination {
    pub fn new(terms: Vec<(Complex64, WeylLabel<f64>)>) -> Result<Self> {
        if terms.iter().any(|(c, l)| !(c.re.is_finite() && c.im.is_finite() && l.a.is_finite() && l.b.is_finite())) {
            return Err(Error::InvalidParameter("Weyl combination entries must be finite".into()));
        }
        Ok(Self { terms })
    }

    pub fn single(label: WeylLabel<f64>) -> Self {
        Self { terms: vec![(Complex64::new(1.0, 0.0), label)] }
    }

    /// `C_A = Σ |c_j|`.
    pub fn c_a(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c.norm()).sum()
    }
}

/// Source of the per-term damping.
#[derive(Debug, Clone, Copy)]
pub enum DecayModel<'a> {
    /// Damping `exp(−b² φ(t))`, uniform in `a`.
    Velocity(&'a VelocityModel),
    /// Damping `exp(−exponent(a, b, t))`; not of the form `b² φ(t)`, so the
    /// interval bound is only indicative.
    Position(&'a FriedrichsOperator),
}

impl DecayModel<'_> {
    fn exponent(&self, label: WeylLabel<f64>, t: f64, env: EnvironmentState) -> Result<f64> {
        match self {
            DecayModel::Velocity(m) => m.exponent(label.b, t, env),
            DecayModel::Position(op) => op.exponent(label, t, env),
        }
    }

    fn phi(&self, t: f64, env: EnvironmentState) -> Result<f64> {
        self.exponent(WeylLabel::new(0.0, 1.0), t, env)
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, DecayModel::Velocity(_))
    }
}

/// Both bounds at a single time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffdiagBound {
    /// `Σ |c_j| exp(−exponent_j(t))` over contributing terms.
    pub per_term: f64,
    /// `C_A exp(−δ² φ(t))`.
    pub interval: f64,
}

fn check_disjoint(i1: &MomentumInterval<f64>, i2: &MomentumInterval<f64>) -> Result<f64> {
    let delta = i1.distance(i2);
    if delta <= 0.0 {
        return Err(Error::IntervalsOverlap(delta));
    }
    Ok(delta)
}

/// Bounds on `‖P(I₂) Φ_t[A] P(I₁)‖` at one time. A single time has no
/// future to take the envelope over, so `φ(t)` itself is used; this is the
/// pointwise bound and dominates `φ̃(t)`.
pub fn offdiag_bound(
    a: &WeylCombination,
    i1: &MomentumInterval<f64>,
    i2: &MomentumInterval<f64>,
    model: DecayModel<'_>,
    t: f64,
    env: EnvironmentState,
) -> Result<OffdiagBound> {
    let delta = check_disjoint(i1, i2)?;
    let env = env.validate()?;
    let mut per_term = 0.0;
    for (c, label) in &a.terms {
        if offdiag_is_zero(*label, i1, i2) {
            continue;
        }
        per_term += c.norm() * (-model.exponent(*label, t, env)?).exp();
    }
    let interval = a.c_a() * (-delta * delta * model.phi(t, env)?).exp();
    Ok(OffdiagBound { per_term, interval })
}

/// Whether the sweep shows decay to zero or a positive floor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayVerdict {
    DecaysToZero,
    Saturates,
    Undetermined,
}

/// Straight-line fit of `ln(C_A exp(−δ² φ̃))` against `ln t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub t_from: f64,
    pub t_to: f64,
    pub slope: f64,
    pub points: usize,
}

/// Bounds over a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayTable {
    pub times: Vec<f64>,
    pub per_term_bound: Vec<f64>,
    pub paper_bound: Vec<f64>,
    pub slope_fit: Option<TailFit>,
    pub verdict: DecayVerdict,
    pub c_a: f64,
    pub delta: f64,
    /// Set for the position coupling, where the decay is not uniform in `a`.
    pub non_uniform: bool,
}

impl DecayTable {
    pub const CSV_HEADER: [&'static str; 4] = ["t", "per_term_bound", "paper_bound", "slope_fit"];

    /// One row per time; the fitted tail slope repeats in its column.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER)?;
        let slope = self.slope_fit.map(|f| fmt_f64(f.slope)).unwrap_or_default();
        for k in 0..self.times.len() {
            w.write_record([
                fmt_f64(self.times[k]),
                fmt_f64(self.per_term_bound[k]),
                fmt_f64(self.paper_bound[k]),
                slope.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }
}

/// Bounds over `times` using the non-decreasing envelopes `φ̃`, so both
/// columns are non-increasing. The tail fit runs over `fit_window`, by
/// default the last two decades of the grid.
pub fn superselection_sweep(
    a: &WeylCombination,
    i1: &MomentumInterval<f64>,
    i2: &MomentumInterval<f64>,
    model: DecayModel<'_>,
    times: &[f64],
    env: EnvironmentState,
    fit_window: Option<(f64, f64)>,
) -> Result<DecayTable> {
    let delta = check_disjoint(i1, i2)?;
    let env = env.validate()?;
    let c_a = a.c_a();
    let phi = times.par_iter().map(|&t| model.phi(t, env)).collect::<Result<Vec<_>>>()?;
    let envelope = Envelope::from_samples(times.to_vec(), phi);
    let contributing: Vec<_> = a.terms.iter().filter(|(_, l)| !offdiag_is_zero(*l, i1, i2)).collect();

    let mut per_term_bound = vec![0.0; times.len()];
    for (c, label) in contributing {
        let tilde = if model.is_uniform() {
            envelope.phi_tilde.iter().map(|p| label.b * label.b * p).collect()
        } else {
            let e = times.par_iter().map(|&t| model.exponent(*label, t, env)).collect::<Result<Vec<_>>>()?;
            Envelope::from_samples(times.to_vec(), e).phi_tilde
        };
        per_term_bound.iter_mut().zip(tilde).for_each(|(acc, e)| *acc += c.norm() * (-e).exp());
    }
    let paper_bound: Vec<f64> = envelope.phi_tilde.iter().map(|p| c_a * (-delta * delta * p).exp()).collect();
    let slope_fit = tail_fit(times, &paper_bound, fit_window);
    let verdict = if c_a == 0.0 {
        DecayVerdict::DecaysToZero
    } else {
        match envelope.growth {
            Growth::Diverging => DecayVerdict::DecaysToZero,
            Growth::Saturating => DecayVerdict::Saturates,
            Growth::Undetermined => DecayVerdict::Undetermined,
        }
    };
    Ok(DecayTable {
        times: times.to_vec(),
        per_term_bound,
        paper_bound,
        slope_fit,
        verdict,
        c_a,
        delta,
        non_uniform: !model.is_uniform(),
    })
}

fn tail_fit(times: &[f64], bound: &[f64], window: Option<(f64, f64)>) -> Option<TailFit> {
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let (from, to) = window.unwrap_or((t_max / 100.0, t_max));
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(bound)
        .filter(|(&t, &b)| t >= from && t <= to && t > 0.0 && b > 0.0)
        .map(|(&t, &b)| (t.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(TailFit { t_from: from, t_to: to, slope: sxy / sxx, points: pts.len() })
}
