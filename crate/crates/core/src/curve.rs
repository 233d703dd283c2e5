//! Time grids and the sampled decoherence curve shared by both models.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::environment::EnvironmentState;
use crate::error::{Error, Result};
use crate::phase_space::WeylLabel;
use crate::spectral::{Boundedness, CouplingModel, FormFactor, IrClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

/// Sampling of `[t_min, t_max]`. A log grid needs `t_min > 0`; with
/// `include_zero` the point `t = 0` is prepended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub spacing: Spacing,
    pub t_min: f64,
    pub t_max: f64,
    pub samples: usize,
    #[serde(default)]
    pub include_zero: bool,
}

impl TimeGrid {
    pub fn linear(t_min: f64, t_max: f64, samples: usize) -> Self {
        Self { spacing: Spacing::Linear, t_min, t_max, samples, include_zero: false }
    }

    pub fn log(t_min: f64, t_max: f64, samples: usize) -> Self {
        Self { spacing: Spacing::Log, t_min, t_max, samples, include_zero: false }
    }

    pub fn with_zero(mut self) -> Self {
        self.include_zero = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("time grid: {m}")));
        if !(self.t_min.is_finite() && self.t_max.is_finite()) {
            return bad("bounds must be finite");
        }
        if self.samples == 0 {
            return bad("samples must be positive");
        }
        if self.t_min < 0.0 || self.t_max < self.t_min || (self.samples > 1 && self.t_max == self.t_min) {
            return bad("need 0 <= t_min < t_max");
        }
        if self.spacing == Spacing::Log && self.t_min <= 0.0 {
            return bad("log spacing needs t_min > 0 (set include_zero for t = 0)");
        }
        Ok(())
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let n = self.samples;
        let mut out = Vec::with_capacity(n + 1);
        if self.include_zero && self.t_min > 0.0 {
            out.push(0.0);
        }
        if n == 1 {
            out.push(self.t_min);
            return Ok(out);
        }
        let last = (n - 1) as f64;
        for i in 0..n {
            let s = i as f64 / last;
            let t = match self.spacing {
                Spacing::Linear => self.t_min + (self.t_max - self.t_min) * s,
                Spacing::Log => (self.t_min.ln() + (self.t_max / self.t_min).ln() * s).exp(),
            };
            out.push(t);
        }
        // pin the end points against rounding in exp/ln
        out[if self.include_zero && self.t_min > 0.0 { 1 } else { 0 }] = self.t_min;
        *out.last_mut().unwrap() = self.t_max;
        Ok(out)
    }
}

/// How `φ̃` behaves towards the end of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    Diverging,
    Saturating,
    /// Grid too short (less than three decades) to decide.
    Undetermined,
}

/// Non-decreasing lower envelope of `φ` on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub times: Vec<f64>,
    pub phi: Vec<f64>,
    pub phi_tilde: Vec<f64>,
    pub growth: Growth,
}

/// Ratio of late to early log-derivative above which `φ̃` counts as
/// still growing.
pub const GROWTH_RATIO: f64 = 0.85;

impl Envelope {
    /// `φ̃(t_k) = min_{s ≥ t_k} φ(s)` over the grid.
    pub fn from_samples(times: Vec<f64>, phi: Vec<f64>) -> Self {
        let mut phi_tilde = phi.clone();
        for k in (0..phi_tilde.len().saturating_sub(1)).rev() {
            phi_tilde[k] = phi_tilde[k].min(phi_tilde[k + 1]);
        }
        let growth = classify_growth(&times, &phi_tilde);
        Self { times, phi, phi_tilde, growth }
    }

    /// `φ̃` at the largest grid time not after `t`; a lower bound for the
    /// envelope at `t` since `φ̃` is non-decreasing.
    pub fn at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            0.0
        } else {
            self.phi_tilde[k - 1]
        }
    }
}

fn value_at(times: &[f64], vals: &[f64], t: f64) -> f64 {
    let k = times.partition_point(|&s| s <= t).max(1);
    vals[k - 1]
}

/// Compares the growth of `φ̃` per unit `ln t` over the last decade with the
/// growth over the decade ending two decades earlier. A logarithmic or
/// power-law divergence keeps the ratio near or above one; saturation
/// (a remainder decaying like `t^{-κ}`) drives it to `10^{-2κ}`.
fn classify_growth(times: &[f64], phi: &[f64]) -> Growth {
    let Some(&t_end) = times.last() else {
        return Growth::Undetermined;
    };
    let first = times.iter().copied().find(|&t| t > 0.0).unwrap_or(t_end);
    if t_end / first < 999.0 {
        return Growth::Undetermined;
    }
    let late = value_at(times, phi, t_end) - value_at(times, phi, t_end / 10.0);
    let early = value_at(times, phi, t_end / 100.0) - value_at(times, phi, t_end / 1000.0);
    if late <= 0.0 {
        return Growth::Saturating;
    }
    if early <= 0.0 || late >= GROWTH_RATIO * early {
        Growth::Diverging
    } else {
        Growth::Saturating
    }
}

/// Description of the run that produced a curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMetadata {
    pub model: CouplingModel,
    pub environment: EnvironmentState,
    pub form_factor: FormFactor,
    pub label: WeylLabel<f64>,
    pub coupling_norm: f64,
    pub boundedness: Boundedness,
    pub ir_class: Option<IrClass>,
    /// Drift renormalization (velocity coupling only).
    pub alpha_sq: Option<f64>,
    pub envelope_growth: Growth,
    pub notes: Vec<String>,
}

/// Sampled `t ↦ (a(t), b(t), |χ|, exponent, φ̃)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceCurve {
    pub times: Vec<f64>,
    pub a_t: Vec<f64>,
    pub b_t: Vec<f64>,
    pub abs_chi: Vec<f64>,
    pub exponent: Vec<f64>,
    pub envelope_phi: Vec<f64>,
    pub metadata: CurveMetadata,
}

/// Full round-trip formatting for CSV cells.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // keep the sign of negative zero out of the tables
        "0.0000000000000000e0".to_string()
    } else {
        format!("{x:.16e}")
    }
}

impl DecoherenceCurve {
    pub const CSV_HEADER: [&'static str; 6] = ["t", "a_t", "b_t", "abs_chi", "exponent", "envelope_phi"];

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER)?;
        for k in 0..self.len() {
            w.write_record([
                fmt_f64(self.times[k]),
                fmt_f64(self.a_t[k]),
                fmt_f64(self.b_t[k]),
                fmt_f64(self.abs_chi[k]),
                fmt_f64(self.exponent[k]),
                fmt_f64(self.envelope_phi[k]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_grid_end_points() {
        let g = TimeGrid::log(1e-3, 100.0, 199).with_zero().points().unwrap();
        assert_eq!(g.len(), 200);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[1], 1e-3);
        assert_eq!(*g.last().unwrap(), 100.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(TimeGrid::log(0.0, 1.0, 3).points().is_err());
    }

    #[test]
    fn envelope_is_running_minimum() {
        let e = Envelope::from_samples(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 2.0, 1.0, 3.0]);
        assert_eq!(e.phi_tilde, vec![0.0, 1.0, 1.0, 3.0]);
        assert_eq!(e.growth, Growth::Undetermined);
    }

    #[test]
    fn growth_classification() {
        let times = TimeGrid::log(1e-2, 1e6, 400).points().unwrap();
        let log: Vec<f64> = times.iter().map(|t| 0.25 * (1.0 + t * t).ln()).collect();
        assert_eq!(Envelope::from_samples(times.clone(), log).growth, Growth::Diverging);
        let sat: Vec<f64> = times.iter().map(|t| 1.0 - 1.0 / (1.0 + t)).collect();
        assert_eq!(Envelope::from_samples(times, sat).growth, Growth::Saturating);
    }
}
