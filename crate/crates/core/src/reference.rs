//! Reference solutions: closed forms, a finite-volume relaxation solver, error
//! norms and shock tracking.

use std::io::{self, Write};

use crate::basis::{wrap_unchecked, QuadratureRule, PERIOD};
use crate::profiles::{Flux, InitialCondition};
use crate::{Error, Result};

/// Cell-centered samples `u_i = u(x_i)`, `x_i = -1 + (i + 1/2)h`, `h = 2/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("grid function needs at least one cell".into()));
        }
        Ok(Self { values })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(cells: usize, f: F) -> Self {
        let cells = cells.max(1);
        let h = PERIOD / cells as f64;
        Self { values: (0..cells).map(|i| f(-1.0 + (i as f64 + 0.5) * h)).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn h(&self) -> f64 {
        PERIOD / self.len() as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        -1.0 + (i as f64 + 0.5) * self.h()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `Σ u_i h`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.h()
    }

    /// Periodic piecewise linear interpolation between cell centers.
    pub fn interpolate(&self, x: f64) -> f64 {
        let n = self.len();
        let p = ((wrap_unchecked(x) + 1.0) / self.h() - 0.5).rem_euclid(n as f64);
        let i = (p.floor() as usize).min(n - 1);
        let frac = p - i as f64;
        (1.0 - frac) * self.values[i] + frac * self.values[(i + 1) % n]
    }

    pub fn resample(&self, cells: usize) -> Self {
        if cells == self.len() {
            return self.clone();
        }
        Self::from_fn(cells, |x| self.interpolate(x))
    }

    /// CSV with header `x,u` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,u")?;
        for (i, u) in self.values.iter().enumerate() {
            writeln!(out, "{:.16e},{:.16e}", self.x(i), u)?;
        }
        Ok(())
    }
}

/// `u(t, x) = u₀(x − λt)` sampled on `cells` cell centers.
pub fn exact_linear_advection(u0: &InitialCondition, lambda: f64, t: f64, cells: usize) -> GridFunction {
    GridFunction::from_fn(cells, |x| u0.eval(wrap_unchecked(x - lambda * t)))
}

/// `w_t + λ w_x = γ w² + δ w` with compactly supported `w₀`.
#[derive(Debug, Clone)]
pub struct RiccatiParams {
    pub gamma: f64,
    pub delta: f64,
    pub lambda: f64,
    pub w0: InitialCondition,
}

impl RiccatiParams {
    /// `γ = 2`, `δ = 1`, `w₀ = e^{-4x²} − e^{-1}` on `(-1/2, 1/2)`.
    pub fn bump(lambda: f64) -> Self {
        Self { gamma: 2.0, delta: 1.0, lambda, w0: InitialCondition::GaussBump }
    }
}

/// Denominator magnitude below which the closed form is treated as blown up.
pub const RICCATI_BLOWUP_GUARD: f64 = 1e-12;

/// `w = w₀(ξ) / (e^{-δt} − (γ/δ)(1 − e^{-δt}) w₀(ξ))`, `ξ = x − λt`; the
/// `δ → 0` limit is `w₀ / (1 − γ t w₀)`. Zero wherever `w₀(ξ)` vanishes.
pub fn exact_riccati(p: &RiccatiParams, t: f64, x: f64) -> Result<f64> {
    let w0 = p.w0.eval(wrap_unchecked(x - p.lambda * t));
    if w0 == 0.0 {
        return Ok(0.0);
    }
    let denom = if p.delta == 0.0 {
        1.0 - p.gamma * t * w0
    } else {
        let e = (-p.delta * t).exp();
        // (1 − e^{-δt})/δ, accurate for small δt.
        let g = -(-p.delta * t).exp_m1() / p.delta;
        e - p.gamma * g * w0
    };
    if denom.abs() < RICCATI_BLOWUP_GUARD {
        return Err(Error::ExactBlowup { x });
    }
    Ok(w0 / denom)
}

pub fn exact_riccati_grid(p: &RiccatiParams, t: f64, cells: usize) -> Result<GridFunction> {
    let h = PERIOD / cells as f64;
    let values = (0..cells).map(|i| exact_riccati(p, t, -1.0 + (i as f64 + 0.5) * h)).collect::<Result<_>>()?;
    GridFunction::new(values)
}

/// Entropy solution of Burgers' equation for `u₀ = a(χ_{[0,1/2)} − 1)`.
///
/// The up-jump at `x = 0` opens a rarefaction fan `u = x/t` on `[-at, 0]`; the
/// down-jump at `x = 1/2` is a shock between `0` and `-a` travelling at the
/// Rankine–Hugoniot speed `-a/2`. The waves meet at `t = 1/a`, which ends the
/// validity of this formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurgersStep {
    pub a: f64,
}

impl BurgersStep {
    pub fn new(a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidParameter(format!("step height a = {a} must be positive")));
        }
        Ok(Self { a })
    }

    pub fn horizon(&self) -> f64 {
        1.0 / self.a
    }

    pub fn shock_speed(&self) -> f64 {
        -0.5 * self.a
    }

    pub fn shock_position(&self, t: f64) -> f64 {
        0.5 + self.shock_speed() * t
    }

    fn check(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t < self.horizon()) {
            return Err(Error::OutsideValidity { t, horizon: self.horizon() });
        }
        Ok(())
    }

    pub fn eval(&self, t: f64, x: f64) -> Result<f64> {
        self.check(t)?;
        let y = wrap_unchecked(x);
        let a = self.a;
        if t == 0.0 {
            return Ok(if (0.0..0.5).contains(&y) { 0.0 } else { -a });
        }
        Ok(if y >= -a * t && y <= 0.0 {
            y / t
        } else if y > 0.0 && y < self.shock_position(t) {
            0.0
        } else {
            -a
        })
    }

    pub fn sample(&self, t: f64, cells: usize) -> Result<GridFunction> {
        self.check(t)?;
        let h = PERIOD / cells as f64;
        let values = (0..cells).map(|i| self.eval(t, -1.0 + (i as f64 + 0.5) * h)).collect::<Result<_>>()?;
        GridFunction::new(values)
    }
}

pub fn exact_burgers_riemann(a: f64, t: f64, cells: usize) -> Result<GridFunction> {
    BurgersStep::new(a)?.sample(t, cells)
}

/// Spatial order of the finite-volume reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FvOrder {
    /// Upwind fluxes, forward Euler.
    First,
    /// MUSCL with minmod slopes and SSP-RK2.
    #[default]
    Second,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FvConfig {
    pub lambda: f64,
    pub epsilon: f64,
    pub cells: usize,
    pub order: FvOrder,
    /// Time step; `None` selects the limit `Δx / (2λ)`.
    pub dt: Option<f64>,
    /// Record a frame every this many steps (the final state is always recorded).
    pub frame_stride: usize,
}

impl FvConfig {
    pub fn new(lambda: f64, epsilon: f64, cells: usize) -> Self {
        Self { lambda, epsilon, cells, order: FvOrder::Second, dt: None, frame_stride: usize::MAX }
    }

    pub fn dt_limit(&self) -> f64 {
        PERIOD / self.cells as f64 / (2.0 * self.lambda)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FvRun {
    pub dt: f64,
    pub steps: usize,
    /// Recorded `(t, u)` frames, starting with the initial data.
    pub frames: Vec<(f64, GridFunction)>,
}

impl FvRun {
    pub fn final_frame(&self) -> &GridFunction {
        &self.frames.last().expect("at least the initial frame").1
    }
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Cell averages of `u₀` (Gauss–Legendre per cell, split at the kinks of `u₀`).
pub fn cell_averages(u0: &InitialCondition, cells: usize) -> Vec<f64> {
    let h = PERIOD / cells as f64;
    let rule = QuadratureRule::default();
    let kinks: Vec<f64> = u0.breakpoints().into_iter().map(wrap_unchecked).collect();
    (0..cells)
        .map(|i| {
            let (lo, hi) = (-1.0 + i as f64 * h, -1.0 + (i + 1) as f64 * h);
            let mut pts = vec![lo, hi];
            pts.extend(kinks.iter().copied().filter(|&k| k > lo && k < hi));
            pts.sort_by(f64::total_cmp);
            rule.integrate_partition(|x| u0.eval(x), &pts) / h
        })
        .collect()
}

/// Relaxation system on a uniform grid: transport of `w±` at `±λ`, then the
/// exact implicit relaxation `v ← (εv + Δt f(u)) / (ε + Δt)` with `u` fixed.
pub fn fv_relaxation_solve(u0: &InitialCondition, flux: &Flux, cfg: &FvConfig, t_end: f64) -> Result<FvRun> {
    if cfg.cells < 3 {
        return Err(Error::InvalidParameter("finite-volume grid needs at least 3 cells".into()));
    }
    if !(cfg.lambda > 0.0 && cfg.epsilon > 0.0 && t_end >= 0.0) {
        return Err(Error::InvalidParameter("λ, ε must be positive and T non-negative".into()));
    }
    let limit = cfg.dt_limit();
    let dt_max = cfg.dt.unwrap_or(limit);
    if dt_max > limit * (1.0 + 1e-12) || dt_max <= 0.0 {
        return Err(Error::Cfl { dt: dt_max, limit });
    }
    let steps = if t_end == 0.0 { 0 } else { (t_end / dt_max - 1e-9).ceil().max(1.0) as usize };
    let dt = if steps == 0 { dt_max } else { t_end / steps as f64 };
    let (lambda, eps) = (cfg.lambda, cfg.epsilon);
    let n = cfg.cells;
    let h = PERIOD / n as f64;

    let u: Vec<f64> = cell_averages(u0, n);
    let mut wp: Vec<f64> = u.iter().map(|&u| flux.eval(u) + lambda * u).collect();
    let mut wm: Vec<f64> = u.iter().map(|&u| flux.eval(u) - lambda * u).collect();

    let frame = |wp: &[f64], wm: &[f64]| {
        GridFunction { values: wp.iter().zip(wm).map(|(p, m)| (p - m) / (2.0 * lambda)).collect() }
    };
    let mut frames = vec![(0.0, frame(&wp, &wm))];

    // Upwind update of a field moving right at λ (left-to-right interface values).
    let advect_right = |w: &[f64]| -> Vec<f64> {
        let face: Vec<f64> = match cfg.order {
            FvOrder::First => w.to_vec(),
            FvOrder::Second => (0..n)
                .map(|i| {
                    let s = minmod(w[i] - w[(i + n - 1) % n], w[(i + 1) % n] - w[i]);
                    w[i] + 0.5 * s
                })
                .collect(),
        };
        (0..n).map(|i| -lambda / h * (face[i] - face[(i + n - 1) % n])).collect()
    };
    // Field moving left at −λ: mirror of the above.
    let advect_left = |w: &[f64]| -> Vec<f64> {
        let face: Vec<f64> = match cfg.order {
            FvOrder::First => w.to_vec(),
            FvOrder::Second => (0..n)
                .map(|i| {
                    let s = minmod(w[i] - w[(i + n - 1) % n], w[(i + 1) % n] - w[i]);
                    w[i] - 0.5 * s
                })
                .collect(),
        };
        (0..n).map(|i| lambda / h * (face[(i + 1) % n] - face[i])).collect()
    };
    let euler = |w: &[f64], r: &[f64], dt: f64| -> Vec<f64> { w.iter().zip(r).map(|(a, b)| a + dt * b).collect() };

    for k in 1..=steps {
        match cfg.order {
            FvOrder::First => {
                let (rp, rm) = (advect_right(&wp), advect_left(&wm));
                wp = euler(&wp, &rp, dt);
                wm = euler(&wm, &rm, dt);
            }
            FvOrder::Second => {
                let p1 = euler(&wp, &advect_right(&wp), dt);
                let m1 = euler(&wm, &advect_left(&wm), dt);
                let p2 = euler(&p1, &advect_right(&p1), dt);
                let m2 = euler(&m1, &advect_left(&m1), dt);
                wp = wp.iter().zip(&p2).map(|(a, b)| 0.5 * (a + b)).collect();
                wm = wm.iter().zip(&m2).map(|(a, b)| 0.5 * (a + b)).collect();
            }
        }
        for i in 0..n {
            let u = (wp[i] - wm[i]) / (2.0 * lambda);
            let v = 0.5 * (wp[i] + wm[i]);
            let v = (eps * v + dt * flux.eval(u)) / (eps + dt);
            wp[i] = v + lambda * u;
            wm[i] = v - lambda * u;
        }
        if wp.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("finite-volume state"));
        }
        if k % cfg.frame_stride.max(1) == 0 || k == steps {
            frames.push((k as f64 * dt, frame(&wp, &wm)));
        }
    }
    Ok(FvRun { dt, steps, frames })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

/// Discrete norms of `f − g` weighted by the cell width; the coarser grid is
/// resampled onto the finer one by linear interpolation.
pub fn error_norms(f: &GridFunction, g: &GridFunction) -> ErrorNorms {
    let n = f.len().max(g.len());
    let (f, g) = (f.resample(n), g.resample(n));
    let h = f.h();
    let d = f.values.iter().zip(&g.values).map(|(a, b)| a - b);
    let (l1, l2, linf) = d.fold((0.0, 0.0, 0.0f64), |(s1, s2, m), e| (s1 + e.abs(), s2 + e * e, m.max(e.abs())));
    ErrorNorms { l1: l1 * h, l2: (l2 * h).sqrt(), linf }
}

/// Location of the steepest cell-to-cell drop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShockLocation {
    /// Midpoint between the two cells, in `[-1, 1)`.
    pub x: f64,
    /// Index of the cell on the left of the drop.
    pub index: usize,
    pub drop: f64,
}

pub fn locate_shock(u: &GridFunction, threshold: f64) -> Result<ShockLocation> {
    let n = u.len();
    let (index, drop) = (0..n)
        .map(|i| (i, u.values[i] - u.values[(i + 1) % n]))
        .fold((0, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc });
    if !(drop > threshold) {
        return Err(Error::NoShock(threshold));
    }
    Ok(ShockLocation { x: wrap_unchecked(u.x(index) + 0.5 * u.h()), index, drop })
}

/// Least-squares speed of the shock over time-stamped frames, unwrapping
/// periodic jumps of the position.
pub fn shock_speed_estimate(frames: &[(f64, GridFunction)], threshold: f64) -> Result<f64> {
    if frames.len() < 2 {
        return Err(Error::InvalidParameter("shock speed needs at least two frames".into()));
    }
    let mut xs = Vec::with_capacity(frames.len());
    for (_, u) in frames {
        let x = locate_shock(u, threshold)?.x;
        let x = match xs.last() {
            Some(&prev) => prev + wrap_unchecked(x - prev),
            None => x,
        };
        xs.push(x);
    }
    let ts: Vec<f64> = frames.iter().map(|f| f.0).collect();
    let m = ts.len() as f64;
    let tbar = ts.iter().sum::<f64>() / m;
    let xbar = xs.iter().sum::<f64>() / m;
    let sxx: f64 = ts.iter().map(|t| (t - tbar).powi(2)).sum();
    let sxy: f64 = ts.iter().zip(&xs).map(|(t, x)| (t - tbar) * (x - xbar)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("frames share one time".into()));
    }
    Ok(sxy / sxx)
}

/// `u(x_s − d) − u(x_s + d)`: jump across a shock measured at offset `d`.
pub fn jump_magnitude(u: &GridFunction, x_shock: f64, offset: f64) -> f64 {
    u.interpolate(x_shock - offset) - u.interpolate(x_shock + offset)
}

/// Largest sample within `window` on the left of `x_shock` and smallest one
/// within `window` on its right.
pub fn extremes_near(u: &GridFunction, x_shock: f64, window: f64) -> (f64, f64) {
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for (i, &v) in u.values.iter().enumerate() {
        let d = wrap_unchecked(u.x(i) - x_shock);
        if d <= 0.0 && d >= -window {
            hi = hi.max(v);
        }
        if d >= 0.0 && d <= window {
            lo = lo.min(v);
        }
    }
    (hi, lo)
}
