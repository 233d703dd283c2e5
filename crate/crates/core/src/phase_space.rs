//! Classical phase space of particle and field, and the uncoupled flows.
//!
//! A field vector is a sampling of a real function of `ω` on a quadrature
//! grid. Values are radial amplitudes: the integral of `f(ω)` is approximated
//! by `Σ w_i f_i`, so `‖u‖₋₁² = Σ w_i u_i² ω_i` and `‖v‖₁² = Σ w_i v_i² / ω_i`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Classical label `(a, b)` of the particle Weyl operator.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WeylLabel<T> {
    pub a: T,
    pub b: T,
}

impl<T: Real> WeylLabel<T> {
    pub fn new(a: T, b: T) -> Self {
        Self { a, b }
    }
}

/// Which weighted space a field vector lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WeightRole {
    /// Position-type component `u`, norm weight `ω`.
    MinusOne,
    /// Momentum-type component `v`, norm weight `1/ω`.
    PlusOne,
}

impl WeightRole {
    fn weight<T: Real>(self, omega: T) -> T {
        match self {
            WeightRole::MinusOne => omega,
            WeightRole::PlusOne => omega.recip(),
        }
    }
}

/// Strictly increasing positive frequencies with quadrature weights.
/// Cheap to clone; vectors built on one grid share its storage.
#[derive(Debug, Clone)]
pub struct FrequencyGrid<T> {
    nodes: Arc<[T]>,
    weights: Arc<[T]>,
}

impl<T: Real> FrequencyGrid<T> {
    pub fn new(nodes: Vec<T>, weights: Vec<T>) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(Error::InvalidParameter(format!("{} nodes but {} weights", nodes.len(), weights.len())));
        }
        if nodes.is_empty() {
            return Err(Error::InvalidParameter("empty frequency grid".into()));
        }
        if !(nodes[0] > T::zero()) || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("grid must be positive and strictly increasing".into()));
        }
        if nodes.iter().any(|x| !x.is_finite()) || weights.iter().any(|w| !(w.is_finite() && *w >= T::zero())) {
            return Err(Error::InvalidParameter("grid nodes and weights must be finite, weights non-negative".into()));
        }
        Ok(Self { nodes: nodes.into(), weights: weights.into() })
    }

    /// `n` midpoint cells of equal width on `[lo, hi]`.
    pub fn midpoint(lo: T, hi: T, n: usize) -> Result<Self> {
        if n == 0 || !(hi > lo) || lo < T::zero() {
            return Err(Error::InvalidParameter("midpoint grid needs n > 0 and 0 <= lo < hi".into()));
        }
        let h = (hi - lo) / T::lit(n as f64);
        let nodes = (0..n).map(|i| lo + h * (T::lit(i as f64) + T::lit(0.5))).collect();
        Self::new(nodes, vec![h; n])
    }

    /// `n` cells of equal width in `ln ω` on `[lo, hi]`, node at the
    /// geometric centre of each cell.
    pub fn geometric(lo: T, hi: T, n: usize) -> Result<Self> {
        if n == 0 || !(hi > lo) || !(lo > T::zero()) {
            return Err(Error::InvalidParameter("geometric grid needs n > 0 and 0 < lo < hi".into()));
        }
        let step = (hi / lo).ln() / T::lit(n as f64);
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let left = lo * (step * T::lit(i as f64)).exp();
            let right = lo * (step * T::lit(i as f64 + 1.0)).exp();
            nodes.push((left * right).sqrt());
            weights.push(right - left);
        }
        Self::new(nodes, weights)
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Same storage, or equal node and weight values.
    pub fn same_as(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.nodes, &other.nodes) && Arc::ptr_eq(&self.weights, &other.weights))
            || (self.nodes == other.nodes && self.weights == other.weights)
    }
}

/// Real field amplitude sampled on a grid.
#[derive(Debug, Clone)]
pub struct FieldVector<T> {
    grid: FrequencyGrid<T>,
    values: Vec<T>,
    role: WeightRole,
}

impl<T: Real> FieldVector<T> {
    pub fn new(grid: FrequencyGrid<T>, values: Vec<T>, role: WeightRole) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!("{} values on a grid of {} nodes", values.len(), grid.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("field values must be finite".into()));
        }
        Ok(Self { grid, values, role })
    }

    pub fn zeros(grid: FrequencyGrid<T>, role: WeightRole) -> Self {
        let values = vec![T::zero(); grid.len()];
        Self { grid, values, role }
    }

    /// Samples `f(ω)` at the grid nodes.
    pub fn from_fn(grid: FrequencyGrid<T>, role: WeightRole, f: impl Fn(T) -> T) -> Result<Self> {
        let values = grid.nodes().iter().map(|&w| f(w)).collect();
        Self::new(grid, values, role)
    }

    pub fn grid(&self) -> &FrequencyGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn role(&self) -> WeightRole {
        self.role
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == T::zero())
    }

    /// `‖·‖₋₁²` or `‖·‖₁²` according to the role.
    pub fn weighted_norm_sq(&self) -> T {
        self.weighted_terms().sum()
    }

    /// Per-node contributions `w_i f_i² ω_i^{±1}` to the weighted norm.
    pub fn weighted_terms(&self) -> impl Iterator<Item = T> + '_ {
        let role = self.role;
        self.grid
            .nodes()
            .iter()
            .zip(self.grid.weights().iter())
            .zip(self.values.iter())
            .map(move |((&w, &q), &f)| q * f * f * role.weight(w))
    }

    /// Unweighted `L²` pairing `Σ w_i f_i g_i`.
    pub fn dot(&self, other: &Self) -> Result<T> {
        ensure_same_grid(&self.grid, &other.grid)?;
        Ok(self
            .grid
            .weights()
            .iter()
            .zip(self.values.iter().zip(other.values.iter()))
            .map(|(&q, (&f, &g))| q * f * g)
            .sum())
    }
}

/// Point `(a, u, b, v)` of the combined phase space.
#[derive(Debug, Clone)]
pub struct PhasePoint<T> {
    pub a: T,
    pub u: FieldVector<T>,
    pub b: T,
    pub v: FieldVector<T>,
}

impl<T: Real> PhasePoint<T> {
    pub fn new(a: T, u: FieldVector<T>, b: T, v: FieldVector<T>) -> Result<Self> {
        ensure_same_grid(u.grid(), v.grid())?;
        if u.role != WeightRole::MinusOne || v.role != WeightRole::PlusOne {
            return Err(Error::InvalidParameter("u must carry weight ω, v weight 1/ω".into()));
        }
        Ok(Self { a, u, b, v })
    }

    /// `(a, 0, b, 0)`: particle label with the field at rest.
    pub fn at_rest(label: WeylLabel<T>, grid: FrequencyGrid<T>) -> Self {
        Self {
            a: label.a,
            u: FieldVector::zeros(grid.clone(), WeightRole::MinusOne),
            b: label.b,
            v: FieldVector::zeros(grid, WeightRole::PlusOne),
        }
    }

    pub fn label(&self) -> WeylLabel<T> {
        WeylLabel { a: self.a, b: self.b }
    }

    pub fn grid(&self) -> &FrequencyGrid<T> {
        self.u.grid()
    }
}

pub(crate) fn ensure_same_grid<T: Real>(a: &FrequencyGrid<T>, b: &FrequencyGrid<T>) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Rotation of one oscillator of frequency `omega` by time `t`:
/// `(x, y) ↦ (x cos ωt + y ω⁻¹ sin ωt, −x ω sin ωt + y cos ωt)`.
/// At `ω = 0` the free-motion limit `(x + yt, y)` is taken exactly.
#[inline]
pub(crate) fn rotate<T: Real>(x: T, y: T, omega: T, t: T) -> (T, T) {
    if omega == T::zero() {
        return (x + y * t, y);
    }
    let (s, c) = (omega * t).sin_cos();
    (x * c + y * s / omega, -x * omega * s + y * c)
}

/// Free particle (`ω₀ = 0`) or harmonic rotation of a Weyl label.
pub fn particle_flow<T: Real>(label: WeylLabel<T>, omega0: T, t: T) -> WeylLabel<T> {
    let (a, b) = rotate(label.a, label.b, omega0, t);
    WeylLabel { a, b }
}

/// Pointwise-in-`ω` rotation of the field components.
pub fn field_flow<T: Real>(u: &FieldVector<T>, v: &FieldVector<T>, t: T) -> Result<(FieldVector<T>, FieldVector<T>)> {
    ensure_same_grid(u.grid(), v.grid())?;
    let mut uu = Vec::with_capacity(u.values.len());
    let mut vv = Vec::with_capacity(v.values.len());
    for ((&w, &x), &y) in u.grid.nodes().iter().zip(&u.values).zip(&v.values) {
        let (x1, y1) = rotate(x, y, w, t);
        uu.push(x1);
        vv.push(y1);
    }
    Ok((
        FieldVector { grid: u.grid.clone(), values: uu, role: u.role },
        FieldVector { grid: v.grid.clone(), values: vv, role: v.role },
    ))
}

/// Uncoupled dynamics: particle and field rotate independently.
pub fn product_flow<T: Real>(point: &PhasePoint<T>, omega0: T, t: T) -> Result<PhasePoint<T>> {
    let label = particle_flow(point.label(), omega0, t);
    let (u, v) = field_flow(&point.u, &point.v, t)?;
    Ok(PhasePoint { a: label.a, u, b: label.b, v })
}

/// Canonical pairing `a b′ − b a′ + ⟨u, v′⟩ − ⟨v, u′⟩`, invariant under
/// every flow in this crate.
pub fn symplectic_pairing<T: Real>(p: &PhasePoint<T>, q: &PhasePoint<T>) -> Result<T> {
    Ok(p.a * q.b - p.b * q.a + p.u.dot(&q.v)? - p.v.dot(&q.u)?)
}
