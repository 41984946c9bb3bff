//! Linear transport with a pointwise source, `w_t + λw_x = γw² + δw`.
//!
//! With the co-moving ansatz `w = Σ α_j φ_j(x − λt)` the transport is exact and
//! Galerkin projection onto `φ_j(x − λt)` leaves `M(0) α' = G(α)` with
//! `G_j = ∫ φ_j(y) g(W(y)) dy`, `W = Σ α_j φ_j`, `g(w) = γw² + δw`.

use crate::basis::{BasisFamily, QuadratureRule, PERIOD};
use crate::circulant::{Circulant, DEFAULT_SINGULAR_TOL};
use crate::massop::MassOperator;
use crate::par::{self, Execution};
use crate::profiles::InitialCondition;
use crate::reference::GridFunction;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TransportState {
    pub t: f64,
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SourceTransport {
    family: BasisFamily,
    lambda: f64,
    gamma: f64,
    delta: f64,
    quad: QuadratureRule,
    m0: Circulant,
    pub execution: Execution,
}

impl SourceTransport {
    pub fn new(family: BasisFamily, lambda: f64, gamma: f64, delta: f64) -> Result<Self> {
        if !family.is_hat() {
            return Err(Error::Unsupported("source transport is implemented for the hat basis"));
        }
        let m0 = MassOperator::new(family, lambda)?.mass_matrix(0.0);
        Ok(Self { family, lambda, gamma, delta, quad: QuadratureRule::default(), m0, execution: Execution::default() })
    }

    pub fn family(&self) -> &BasisFamily {
        &self.family
    }

    pub fn mass_matrix(&self) -> &Circulant {
        &self.m0
    }

    fn source(&self, w: f64) -> f64 {
        self.gamma * w * w + self.delta * w
    }

    fn partition(&self, j: usize, extra: &[f64]) -> Vec<f64> {
        let (lo, hi) = self.family.support(j);
        let mut pts = vec![lo, lo + self.family.dx(), hi];
        for &b in extra {
            let y = lo + (b - lo).rem_euclid(PERIOD);
            if y > lo && y < hi {
                pts.push(y);
            }
        }
        pts.sort_by(f64::total_cmp);
        pts
    }

    /// `M(0) α(0) = (∫ φ_j w₀)_j`.
    pub fn project_initial(&self, w0: &InitialCondition) -> Result<TransportState> {
        let kinks = w0.breakpoints();
        let load = par::map_indices(self.execution, self.family.n(), |q| {
            let j = q + 1;
            let c = self.family.center(j);
            self.quad.integrate_partition(
                |x| self.family.periodic_profile(x - c) * w0.eval(x),
                &self.partition(j, &kinks),
            )
        });
        Ok(TransportState { t: 0.0, alpha: self.m0.solve(&load, DEFAULT_SINGULAR_TOL)? })
    }

    /// `M(0)⁻¹ G(α)`.
    pub fn rhs(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        if alpha.len() != self.family.n() {
            return Err(Error::DimensionMismatch { expected: self.family.n(), found: alpha.len() });
        }
        let g = par::map_indices(self.execution, self.family.n(), |q| {
            let j = q + 1;
            let c = self.family.center(j);
            self.quad.integrate_partition(
                |y| self.family.periodic_profile(y - c) * self.source(self.family.expand_at(alpha, y)),
                &self.partition(j, &[]),
            )
        });
        self.m0.solve(&g, DEFAULT_SINGULAR_TOL)
    }

    pub fn step(&self, state: &TransportState, dt: f64) -> Result<TransportState> {
        let alpha = rk4(&state.alpha, dt, |a| self.rhs(a))?;
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("transport coefficients"));
        }
        Ok(TransportState { t: state.t + dt, alpha })
    }

    /// Final state after `round(T/Δt)` steps.
    pub fn integrate(&self, w0: &InitialCondition, t_end: f64, dt: f64) -> Result<TransportState> {
        let mut s = self.project_initial(w0)?;
        for _ in 0..super::step_count(t_end, dt)? {
            s = self.step(&s, dt)?;
        }
        Ok(s)
    }

    /// `w(t, x) = Σ α_j φ_j(x − λt)`.
    pub fn reconstruct(&self, state: &TransportState, x: f64) -> f64 {
        self.family.expand_at(&state.alpha, x - self.lambda * state.t)
    }

    pub fn sample(&self, state: &TransportState, cells: usize) -> GridFunction {
        GridFunction::from_fn(cells, |x| self.reconstruct(state, x))
    }
}

/// One classical Runge–Kutta step for `y' = f(y)`.
pub fn rk4<F>(y: &[f64], dt: f64, f: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let axpy = |a: f64, k: &[f64]| -> Vec<f64> { y.iter().zip(k).map(|(yi, ki)| yi + a * ki).collect() };
    let k1 = f(y)?;
    let k2 = f(&axpy(0.5 * dt, &k1))?;
    let k3 = f(&axpy(0.5 * dt, &k2))?;
    let k4 = f(&axpy(dt, &k3))?;
    Ok((0..y.len()).map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
}
