//! Full-order model: relaxation system in the shifted basis.
//!
//! The diagonal variables `w± = v ± λu` are expanded as
//! `w⁺ = Σ α⁺_j φ_j(x − λt)` and `w⁻ = Σ α⁻_j φ_j(x + λt)`, so transport at
//! speed `±λ` is exact and only the relaxation source couples the two
//! families. Testing both equations against `φ_j(x − λt)` gives
//!
//! ```text
//! d/dt (M₀α⁺ − M(t)α⁻) = −Ṁ(t)α⁻
//! d/dt (M₀α⁺ + N(t)α⁻) =  Ṁ(t)α⁻ − (2/ε)(½(M₀α⁺ + M(t)α⁻) − F̃)
//! ```
//!
//! with `N = M + ρ f eᵀ` regularizing the singular times of `M(t)`.

mod transport;

pub use transport::{rk4, SourceTransport, TransportState};

use log::warn;

use crate::basis::{BasisFamily, QuadratureRule, Shape};
use crate::circulant::{self, Circulant, DEFAULT_SINGULAR_TOL};
use crate::massop::{MassOperator, NullPair, RegularizedMatrix};
use crate::par::{self, Execution};
use crate::profiles::{Flux, InitialCondition};
use crate::reference::GridFunction;
use crate::{Error, Result};

/// Number of uniform samples used for the subcharacteristic check.
pub const SUBCHARACTERISTIC_SAMPLES: usize = 10_000;

/// Time discretization of the relaxation source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Source implicit in the relaxation variable, `F̃` frozen at `tⁿ`.
    #[default]
    SemiImplicit,
    /// Fully explicit source.
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub n: usize,
    pub lambda: f64,
    pub epsilon: f64,
    /// Weight of the rank-1 regularization.
    pub rho: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub shape: Shape,
    pub quad: QuadratureRule,
    /// Relative threshold for singular circulant solves.
    pub sigma_tol: f64,
    pub snapshot_stride: usize,
    pub execution: Execution,
    /// Run even if `λ` violates the subcharacteristic condition.
    pub allow_subcharacteristic_violation: bool,
}

impl SolverConfig {
    /// Defaults `ρ = ε` and `Δt = ε/2` on the slope-1 hat basis.
    pub fn new(n: usize, lambda: f64, epsilon: f64) -> Self {
        Self {
            n,
            lambda,
            epsilon,
            rho: epsilon,
            dt: 0.5 * epsilon,
            scheme: Scheme::SemiImplicit,
            shape: Shape::Hat { scale: 1.0 },
            quad: QuadratureRule::default(),
            sigma_tol: DEFAULT_SINGULAR_TOL,
            snapshot_stride: 1,
            execution: Execution::default(),
            allow_subcharacteristic_violation: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} = {v} must be positive")))
            }
        };
        positive(self.lambda, "lambda")?;
        positive(self.epsilon, "epsilon")?;
        positive(self.dt, "dt")?;
        if !(self.rho.is_finite() && self.rho >= 0.0) {
            return Err(Error::InvalidParameter(format!("rho = {} must be non-negative", self.rho)));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("basis size must be positive".into()));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::InvalidParameter("snapshot stride must be positive".into()));
        }
        if !matches!(self.shape, Shape::Hat { .. }) {
            return Err(Error::Unsupported("time stepping requires the hat basis"));
        }
        Ok(())
    }
}

/// Outcome of the subcharacteristic check `λ >= max |f'(u₀)|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubcharacteristicReport {
    pub pass: bool,
    pub max_speed: f64,
    /// `λ − max |f'(u₀)|`.
    pub margin: f64,
}

pub fn check_subcharacteristic(u0: &InitialCondition, flux: &Flux, lambda: f64) -> SubcharacteristicReport {
    let max_speed = u0.max_characteristic_speed(flux, SUBCHARACTERISTIC_SAMPLES);
    SubcharacteristicReport { pass: lambda >= max_speed, max_speed, margin: lambda - max_speed }
}

/// Coefficients of the `w⁺` and `w⁻` expansions at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientState {
    pub t: f64,
    pub alpha_plus: Vec<f64>,
    pub alpha_minus: Vec<f64>,
}

impl CoefficientState {
    pub fn zeros(n: usize, t: f64) -> Self {
        Self { t, alpha_plus: vec![0.0; n], alpha_minus: vec![0.0; n] }
    }

    pub fn is_finite(&self) -> bool {
        self.alpha_plus.iter().chain(&self.alpha_minus).all(|x| x.is_finite())
    }

    /// `max(‖α⁺‖∞, ‖α⁻‖∞)`.
    pub fn max_abs(&self) -> f64 {
        self.alpha_plus.iter().chain(&self.alpha_minus).fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// States recorded every `stride` steps, starting with the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub stride: usize,
    pub states: Vec<CoefficientState>,
    /// State after the last step (also recorded when it is off-stride).
    pub final_state: CoefficientState,
    pub steps: usize,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }
}

/// Step count `round(T / Δt)`.
pub fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::InvalidParameter(format!("final time {t_end} must be non-negative")));
    }
    Ok((t_end / dt).round() as usize)
}

/// Semi-discrete relaxation solver for one flux and configuration.
#[derive(Debug, Clone)]
pub struct FullOrderModel {
    cfg: SolverConfig,
    flux: Flux,
    family: BasisFamily,
    op: MassOperator,
    pair: NullPair,
    m0: Circulant,
}

impl FullOrderModel {
    pub fn new(cfg: SolverConfig, flux: Flux) -> Result<Self> {
        cfg.validate()?;
        let family = BasisFamily::new(cfg.n, cfg.shape)?;
        let op = MassOperator::new(family, cfg.lambda)?;
        let pair = NullPair::from_operator(&op);
        let m0 = op.mass_matrix(0.0);
        if m0.is_singular(cfg.sigma_tol).singular {
            return Err(Error::SingularMatrix { min_abs: m0.eigenvalues().min_abs, mode: m0.eigenvalues().argmin });
        }
        if cfg.dt > 0.5 * cfg.epsilon {
            warn!("time step {} exceeds ε/2 = {}; the source treatment may be unstable", cfg.dt, 0.5 * cfg.epsilon);
        }
        // For even N the correction lives on the alternating mode, where the
        // block matrix has eigenvalue 2Λ_{N/2}(t) + ρ·eᵀf and Λ_{N/2} swings
        // through ±scale²Δx³/3.
        if let Shape::Hat { scale } = cfg.shape {
            let swing = 2.0 * scale * scale * family.dx().powi(3) / 3.0;
            if cfg.n % 2 == 0 && cfg.rho * circulant::dot(&pair.e, &pair.f) <= swing {
                warn!(
                    "ρ = {} does not exceed {swing:.3e}; the corrected block matrix becomes singular near the singular times",
                    cfg.rho
                );
            }
        }
        Ok(Self { cfg, flux, family, op, pair, m0 })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn flux(&self) -> &Flux {
        &self.flux
    }

    pub fn family(&self) -> &BasisFamily {
        &self.family
    }

    pub fn mass_operator(&self) -> &MassOperator {
        &self.op
    }

    pub fn null_pair(&self) -> &NullPair {
        &self.pair
    }

    pub fn check_subcharacteristic(&self, u0: &InitialCondition) -> SubcharacteristicReport {
        check_subcharacteristic(u0, &self.flux, self.cfg.lambda)
    }

    fn check_dims(&self, state: &CoefficientState) -> Result<()> {
        for len in [state.alpha_plus.len(), state.alpha_minus.len()] {
            if len != self.cfg.n {
                return Err(Error::DimensionMismatch { expected: self.cfg.n, found: len });
            }
        }
        Ok(())
    }

    /// Sorted break points of `φ_j` together with the kinks of `extra` inside its support.
    fn support_partition(&self, j: usize, extra: &[f64]) -> Vec<f64> {
        let (lo, hi) = self.family.support(j);
        let dx = self.family.dx();
        let mut pts = vec![lo, lo + dx, hi];
        if !self.family.is_hat() {
            pts = vec![lo, hi];
        }
        for &b in extra {
            let y = lo + (b - lo).rem_euclid(crate::basis::PERIOD);
            if y > lo && y < hi {
                pts.push(y);
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        pts
    }

    /// `α±(0) = M(0)⁻¹ b±` with `b±_k = ∫ φ_k (f(u₀) ± λu₀)`.
    pub fn project_initial(&self, u0: &InitialCondition) -> Result<CoefficientState> {
        let report = self.check_subcharacteristic(u0);
        if !report.pass {
            if self.cfg.allow_subcharacteristic_violation {
                warn!("subcharacteristic condition violated: max |f'(u₀)| = {} > λ = {}", report.max_speed, self.cfg.lambda);
            } else {
                return Err(Error::Subcharacteristic { lambda: self.cfg.lambda, max_speed: report.max_speed });
            }
        }
        let lambda = self.cfg.lambda;
        let kinks = u0.breakpoints();
        let loads: Vec<(f64, f64)> = par::map_indices(self.cfg.execution, self.cfg.n, |q| {
            let j = q + 1;
            let center = self.family.center(j);
            let pts = self.support_partition(j, &kinks);
            let plus = self.cfg.quad.integrate_partition(
                |x| self.family.periodic_profile(x - center) * (self.flux.eval(u0.eval(x)) + lambda * u0.eval(x)),
                &pts,
            );
            let minus = self.cfg.quad.integrate_partition(
                |x| self.family.periodic_profile(x - center) * (self.flux.eval(u0.eval(x)) - lambda * u0.eval(x)),
                &pts,
            );
            (plus, minus)
        });
        let (b_plus, b_minus): (Vec<f64>, Vec<f64>) = loads.into_iter().unzip();
        if b_plus.iter().chain(&b_minus).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("projected initial data"));
        }
        Ok(CoefficientState {
            t: 0.0,
            alpha_plus: self.m0.solve(&b_plus, self.cfg.sigma_tol)?,
            alpha_minus: self.m0.solve(&b_minus, self.cfg.sigma_tol)?,
        })
    }

    /// `ũ(t, x) = (1/2λ)(Σ α⁺_j φ_j(x − λt) − Σ α⁻_j φ_j(x + λt))`.
    pub fn u_tilde(&self, state: &CoefficientState, x: f64) -> f64 {
        let lt = self.cfg.lambda * state.t;
        (self.family.expand_at(&state.alpha_plus, x - lt) - self.family.expand_at(&state.alpha_minus, x + lt))
            / (2.0 * self.cfg.lambda)
    }

    /// `F̃_j = ∫ φ_j(y) f(ũ(t, y + λt)) dy`, exact up to the quadrature rule on
    /// each piece between the knots of both shifted families.
    pub fn assemble_ftilde(&self, state: &CoefficientState) -> Result<Vec<f64>> {
        self.check_dims(state)?;
        let dx = self.family.dx();
        let s = 2.0 * self.cfg.lambda * state.t;
        let inv = 1.0 / (2.0 * self.cfg.lambda);
        // W⁻(y + s) has its knots where y + s is a knot of the family.
        let kink = (-s).rem_euclid(dx);
        Ok(par::map_indices(self.cfg.execution, self.cfg.n, |q| {
            let j = q + 1;
            let center = self.family.center(j);
            let (lo, hi) = self.family.support(j);
            let mut pts = vec![lo, center, hi];
            let mut y = lo + kink;
            while y < hi {
                if y > lo {
                    pts.push(y);
                }
                y += dx;
            }
            pts.sort_by(f64::total_cmp);
            pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14 * dx);
            self.cfg.quad.integrate_partition(
                |y| {
                    let u = inv
                        * (self.family.expand_at(&state.alpha_plus, y)
                            - self.family.expand_at(&state.alpha_minus, y + s));
                    self.family.periodic_profile(y - center) * self.flux.eval(u)
                },
                &pts,
            )
        }))
    }

    pub fn step(&self, state: &CoefficientState) -> Result<CoefficientState> {
        match self.cfg.scheme {
            Scheme::SemiImplicit => self.step_semi_implicit(state),
            Scheme::Explicit => self.step_explicit(state),
        }
    }

    pub fn step_semi_implicit(&self, state: &CoefficientState) -> Result<CoefficientState> {
        self.step_with(state, Scheme::SemiImplicit)
    }

    pub fn step_explicit(&self, state: &CoefficientState) -> Result<CoefficientState> {
        self.step_with(state, Scheme::Explicit)
    }

    fn step_with(&self, state: &CoefficientState, scheme: Scheme) -> Result<CoefficientState> {
        self.check_dims(state)?;
        let (eps, dt, rho) = (self.cfg.epsilon, self.cfg.dt, self.cfg.rho);
        let t_next = state.t + dt;
        let f_tilde = self.assemble_ftilde(state)?;
        let m_n = self.op.mass_matrix(state.t);
        let mdot_n = self.op.mass_matrix_dot(state.t)?;
        let m_next = self.op.mass_matrix(t_next);
        let reg_n = RegularizedMatrix::new(m_n.clone(), rho, self.pair.clone());

        let m0_ap = self.m0.matvec(&state.alpha_plus)?;
        let mn_am = m_n.matvec(&state.alpha_minus)?;
        let nn_am = reg_n.matvec(&state.alpha_minus)?;
        let mdot_am = mdot_n.matvec(&state.alpha_minus)?;

        let r1: Vec<f64> = (0..self.cfg.n).map(|i| m0_ap[i] - mn_am[i] - dt * mdot_am[i]).collect();
        let r2: Vec<f64> = match scheme {
            Scheme::SemiImplicit => {
                let a = eps / (eps + dt);
                let b = dt / (eps + dt);
                (0..self.cfg.n)
                    .map(|i| a * (m0_ap[i] + nn_am[i] + dt * mdot_am[i]) + b * 2.0 * f_tilde[i])
                    .collect()
            }
            Scheme::Explicit => (0..self.cfg.n)
                .map(|i| {
                    m0_ap[i] + nn_am[i] + dt * mdot_am[i]
                        - 2.0 * dt / eps * (0.5 * (m0_ap[i] + mn_am[i]) - f_tilde[i])
                })
                .collect(),
        };

        // Subtracting the rows isolates α⁻: (2M_{n+1} + ρ f eᵀ) α⁻ = r2 − r1.
        let block = RegularizedMatrix::new(m_next.scaled(2.0), rho, self.pair.clone());
        let diff: Vec<f64> = r2.iter().zip(&r1).map(|(a, b)| a - b).collect();
        let alpha_minus = block.solve(&diff, self.cfg.sigma_tol).map_err(|_| Error::SingularBlock {
            t: t_next,
            t_singular: self.nearest_singular_time(t_next),
        })?;
        let m_next_am = m_next.matvec(&alpha_minus)?;
        let rhs: Vec<f64> = r1.iter().zip(&m_next_am).map(|(a, b)| a + b).collect();
        let alpha_plus = self.m0.solve(&rhs, self.cfg.sigma_tol)?;
        Ok(CoefficientState { t: t_next, alpha_plus, alpha_minus })
    }

    /// Predicted singular time `(2ℓ + 1) / (2λN)` closest to `t`.
    pub fn nearest_singular_time(&self, t: f64) -> f64 {
        let t_star = self.op.first_singular_time();
        let l = ((t - t_star) / (2.0 * t_star)).round().max(0.0);
        t_star * (2.0 * l + 1.0)
    }

    /// Integrates `n_steps` steps from `start`, handing every state (including
    /// `start`) to `observe`; returning `false` stops early.
    pub fn march<F>(&self, start: CoefficientState, n_steps: usize, mut observe: F) -> Result<CoefficientState>
    where
        F: FnMut(usize, &CoefficientState) -> bool,
    {
        let mut state = start;
        if !observe(0, &state) {
            return Ok(state);
        }
        for k in 1..=n_steps {
            let next = self.step(&state)?;
            if !next.is_finite() {
                let min_sigma = self.op.mass_matrix(next.t).eigenvalues().normalized_min();
                return Err(Error::Blowup { step: k, t: next.t, min_sigma });
            }
            state = next;
            if !observe(k, &state) {
                break;
            }
        }
        Ok(state)
    }

    /// Runs `round(T/Δt)` steps from the projected initial data.
    pub fn integrate(&self, u0: &InitialCondition, t_end: f64) -> Result<Trajectory> {
        let start = self.project_initial(u0)?;
        self.integrate_from(start, t_end)
    }

    pub fn integrate_from(&self, start: CoefficientState, t_end: f64) -> Result<Trajectory> {
        let steps = step_count(t_end, self.cfg.dt)?;
        let stride = self.cfg.snapshot_stride;
        let mut states = Vec::with_capacity(steps / stride + 2);
        let final_state = self.march(start, steps, |k, s| {
            if k % stride == 0 {
                states.push(s.clone());
            }
            true
        })?;
        Ok(Trajectory { dt: self.cfg.dt, stride, states, final_state, steps })
    }

    pub fn reconstruct_u(&self, state: &CoefficientState, x: f64) -> f64 {
        self.u_tilde(state, x)
    }

    /// `(w⁺, w⁻)` at `x`.
    pub fn reconstruct_w_pm(&self, state: &CoefficientState, x: f64) -> (f64, f64) {
        let lt = self.cfg.lambda * state.t;
        (self.family.expand_at(&state.alpha_plus, x - lt), self.family.expand_at(&state.alpha_minus, x + lt))
    }

    /// `v = (w⁺ + w⁻) / 2`.
    pub fn reconstruct_v(&self, state: &CoefficientState, x: f64) -> f64 {
        let (wp, wm) = self.reconstruct_w_pm(state, x);
        0.5 * (wp + wm)
    }

    /// `u` sampled at the cell centers of a uniform grid.
    pub fn sample_u(&self, state: &CoefficientState, cells: usize) -> GridFunction {
        GridFunction::from_fn(cells, |x| self.reconstruct_u(state, x))
    }

    /// `∫_𝕋 u dx`, exact since every shifted `φ_j` has the same integral.
    pub fn total_mass(&self, state: &CoefficientState) -> f64 {
        let sp: f64 = state.alpha_plus.iter().sum();
        let sm: f64 = state.alpha_minus.iter().sum();
        (sp - sm) / (2.0 * self.cfg.lambda) * self.family.integral()
    }
}

/// `(u, v) ↦ (w⁺, w⁻) = (v + λu, v − λu)`.
pub fn to_diagonal(u: f64, v: f64, lambda: f64) -> (f64, f64) {
    (v + lambda * u, v - lambda * u)
}

/// `(w⁺, w⁻) ↦ (u, v)`.
pub fn from_diagonal(w_plus: f64, w_minus: f64, lambda: f64) -> (f64, f64) {
    ((w_plus - w_minus) / (2.0 * lambda), 0.5 * (w_plus + w_minus))
}
