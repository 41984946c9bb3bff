//! Time-dependent overlap operators of the translated basis.
//!
//! `M_{jk}(t) = ∫ φ_j(x) φ_k(x + 2λt) dx` is circulant for every `t`, and after
//! one reduction period `τ = Δx / (2λ)` the first row has moved one slot to the
//! right: `M(t + kτ) = P^k M(t)`. Rows are evaluated in closed form from the
//! autocorrelation of the generating profile (a piecewise cubic for hats), so
//! the singular structure is free of quadrature noise.

use crate::basis::{integrate_periodic, BasisFamily, QuadratureRule, Shape};
use crate::circulant::{self, Circulant, DEFAULT_SINGULAR_TOL};
use crate::{Error, Result};

/// Cubic B-spline: autocorrelation of the unit hat `max(0, 1 - |z|)`.
#[inline]
fn hat_autocorr(z: f64) -> f64 {
    let a = z.abs();
    if a <= 1.0 {
        2.0 / 3.0 - a * a + 0.5 * a * a * a
    } else if a < 2.0 {
        let b = 2.0 - a;
        b * b * b / 6.0
    } else {
        0.0
    }
}

#[inline]
fn hat_autocorr_derivative(z: f64) -> f64 {
    let a = z.abs();
    let s = z.signum();
    if a <= 1.0 {
        -2.0 * z + 1.5 * z * a
    } else if a < 2.0 {
        let b = 2.0 - a;
        -0.5 * s * b * b
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassOperator {
    family: BasisFamily,
    lambda: f64,
}

/// One predicted singular time with the singular pair of `M(t)` belonging to
/// its smallest singular value: `M e = σ f`, `Mᵀ f = σ e`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularTime {
    pub index: usize,
    pub t: f64,
    pub e: Vec<f64>,
    pub f: Vec<f64>,
    /// `σ_min / σ_max` of `M(t)`.
    pub sigma_ratio: f64,
    pub nullity: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularTimeTable {
    pub entries: Vec<SingularTime>,
}

impl MassOperator {
    pub fn new(family: BasisFamily, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("wave speed λ = {lambda} must be positive")));
        }
        Ok(Self { family, lambda })
    }

    pub fn family(&self) -> &BasisFamily {
        &self.family
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Reduction period `τ = Δx / (2λ)`.
    pub fn tau(&self) -> f64 {
        self.family.dx() / (2.0 * self.lambda)
    }

    /// First singular time `t* = 1 / (2λN)` (half a period).
    pub fn first_singular_time(&self) -> f64 {
        1.0 / (2.0 * self.lambda * self.family.n() as f64)
    }

    /// Overlap at offset `z·Δx`, with `z` in cell units.
    fn overlap(&self, z: f64) -> f64 {
        let dx = self.family.dx();
        match self.family.shape() {
            Shape::Hat { scale } => scale * scale * dx.powi(3) * hat_autocorr(z),
            Shape::Indicator => dx * (1.0 - z.abs()).max(0.0),
        }
    }

    /// `d/dd` of the overlap at offset `z·Δx`.
    fn overlap_slope(&self, z: f64) -> f64 {
        let dx = self.family.dx();
        match self.family.shape() {
            Shape::Hat { scale } => scale * scale * dx * dx * hat_autocorr_derivative(z),
            Shape::Indicator => unreachable!("checked by caller"),
        }
    }

    /// Sum over the periodic images of an offset given in cell units. Working
    /// in cell units keeps integer offsets exact, so entries outside the band
    /// are exactly zero.
    fn periodized<F: Fn(f64) -> f64>(&self, z: f64, g: F) -> f64 {
        let n = self.family.n() as f64;
        let mut z0 = z.rem_euclid(n);
        if z0 >= 0.5 * n {
            z0 -= n;
        }
        let reach = 2.0 * self.family.half_width() / self.family.dx();
        let mut acc = g(z0);
        let mut m = 1;
        while m as f64 * n - 0.5 * n < reach {
            acc += g(z0 + m as f64 * n) + g(z0 - m as f64 * n);
            m += 1;
        }
        acc
    }

    /// Splits `t` into whole periods and a reduced time in `[0, τ)`.
    fn reduce_time(&self, t: f64) -> (i64, f64) {
        let tau = self.tau();
        let k = (t / tau).floor();
        let r = (t - k * tau).clamp(0.0, tau);
        (k as i64, r)
    }

    fn row_at<F: Fn(f64) -> f64>(&self, t: f64, g: F) -> Vec<f64> {
        let (k, r) = self.reduce_time(t);
        let dx = self.family.dx();
        let s = 2.0 * self.lambda * r;
        let row: Vec<f64> = (0..self.family.n()).map(|q| self.periodized(q as f64 - s / dx, &g)).collect();
        Circulant::new(row).expect("finite overlap row").rotate(k).into_row()
    }

    /// `c_j(t) = ∫ φ_1(x) φ_j(x + 2λt) dx`.
    pub fn first_row(&self, t: f64) -> Vec<f64> {
        self.row_at(t, |d| self.overlap(d))
    }

    /// `d/dt c_j(t)`; the hat autocorrelation is `C²`, so no one-sided limits are needed.
    pub fn first_row_dot(&self, t: f64) -> Result<Vec<f64>> {
        if !self.family.is_hat() {
            return Err(Error::Unsupported("time derivative of the indicator overlap is distributional"));
        }
        let two_lambda = 2.0 * self.lambda;
        Ok(self.row_at(t, |d| -two_lambda * self.overlap_slope(d)))
    }

    pub fn mass_matrix(&self, t: f64) -> Circulant {
        Circulant::new(self.first_row(t)).expect("finite overlap row")
    }

    pub fn mass_matrix_dot(&self, t: f64) -> Result<Circulant> {
        Circulant::new(self.first_row_dot(t)?)
    }

    /// Smallest singular pair of `M(t)` built from its Fourier modes.
    ///
    /// `M` is normal, so its singular values are `|Λ_m|`. The right vector is
    /// the real part of the minimizing mode; the left vector is `M e / σ`, or `e`
    /// itself when `σ` vanishes (the real and imaginary parts of a null mode are
    /// null vectors of `Mᵀ` as well).
    pub fn singular_pair(&self, t: f64) -> (Vec<f64>, Vec<f64>, f64) {
        let m = self.mass_matrix(t);
        let spec = m.eigenvalues();
        let n = m.n();
        let mode = spec.argmin;
        let mut e: Vec<f64> = (0..n)
            .map(|k| (2.0 * std::f64::consts::PI * (mode * k % n) as f64 / n as f64).cos())
            .collect();
        let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        e.iter_mut().for_each(|x| *x /= norm);
        let me = m.matvec(&e).expect("matching dimensions");
        let sigma = me.iter().map(|x| x * x).sum::<f64>().sqrt();
        let f = if sigma <= DEFAULT_SINGULAR_TOL * spec.max_abs { e.clone() } else { me.iter().map(|x| x / sigma).collect() };
        (e, f, spec.normalized_min())
    }

    /// Predicted singular times `t_ℓ = (2ℓ + 1) / (2λN) <= t_max`.
    pub fn singular_times(&self, t_max: f64) -> Result<SingularTimeTable> {
        if !self.family.is_hat() {
            return Err(Error::Unsupported("singular time prediction is derived for the hat basis"));
        }
        if !(t_max > 0.0) {
            return Err(Error::InvalidParameter(format!("t_max = {t_max} must be positive")));
        }
        let n = self.family.n() as f64;
        let mut entries = Vec::new();
        for index in 0.. {
            let t = (2.0 * index as f64 + 1.0) / (2.0 * self.lambda * n);
            if t > t_max {
                break;
            }
            let (e, f, sigma_ratio) = self.singular_pair(t);
            let nullity = self.mass_matrix(t).is_singular(DEFAULT_SINGULAR_TOL).nullity;
            entries.push(SingularTime { index, t, e, f, sigma_ratio, nullity });
        }
        Ok(SingularTimeTable { entries })
    }

    /// Null pair used by the rank-1 regularization: the smallest singular pair
    /// at the first singular time, with the sign fixed so that `eᵀf >= 0`.
    pub fn null_pair(&self) -> (Vec<f64>, Vec<f64>) {
        let (e, mut f, _) = self.singular_pair(self.first_singular_time());
        if circulant::dot(&e, &f) < 0.0 {
            f.iter_mut().for_each(|x| *x = -*x);
        }
        (e, f)
    }

    /// `N(t) = M(t) + ρ f eᵀ`.
    pub fn regularized_matrix(&self, t: f64, rho: f64, pair: &NullPair) -> RegularizedMatrix {
        RegularizedMatrix { base: self.mass_matrix(t), rho, pair: pair.clone() }
    }
}

/// Right (`e`) and left (`f`) directions of the rank-1 correction, with the
/// circulant form of `f eᵀ` when it exists (always for even `N`).
#[derive(Debug, Clone, PartialEq)]
pub struct NullPair {
    pub e: Vec<f64>,
    pub f: Vec<f64>,
    folded: Option<Circulant>,
}

impl NullPair {
    pub fn new(e: Vec<f64>, f: Vec<f64>) -> Self {
        let folded = circulant::rank1_as_circulant(&f, &e).map(|r| Circulant::new(r).expect("finite"));
        Self { e, f, folded }
    }

    pub fn from_operator(op: &MassOperator) -> Self {
        let (e, f) = op.null_pair();
        Self::new(e, f)
    }

    pub fn is_circulant(&self) -> bool {
        self.folded.is_some()
    }
}

/// Descriptor of `C + ρ f eᵀ` supporting products and solves.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedMatrix {
    pub base: Circulant,
    pub rho: f64,
    pub pair: NullPair,
}

impl RegularizedMatrix {
    pub fn new(base: Circulant, rho: f64, pair: NullPair) -> Self {
        Self { base, rho, pair }
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.base.matvec(v)?;
        if self.rho != 0.0 {
            let ev = circulant::dot(&self.pair.e, v);
            out.iter_mut().zip(&self.pair.f).for_each(|(o, f)| *o += self.rho * f * ev);
        }
        Ok(out)
    }

    pub fn solve(&self, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
        if self.rho == 0.0 {
            return self.base.solve(rhs, tol);
        }
        match &self.pair.folded {
            Some(fe) => self.base.add_scaled(fe, self.rho)?.solve(rhs, tol),
            None => circulant::solve_rank1(&self.base, &self.pair.f, &self.pair.e, self.rho, rhs, tol),
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut a = self.base.to_dense();
        let n = a.nrows();
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] += self.rho * self.pair.f[i] * self.pair.e[j];
            }
        }
        a
    }
}

/// `∫_𝕋 a(x) b(x + shift) dx` for arbitrary profiles.
pub fn overlap_integral<A, B>(a: A, b: B, shift: f64, breakpoints: &[f64], rule: &QuadratureRule) -> f64
where
    A: Fn(f64) -> f64,
    B: Fn(f64) -> f64,
{
    integrate_periodic(|x| a(x) * b(x + shift), breakpoints, rule)
}
