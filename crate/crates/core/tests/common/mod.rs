//! Dense linear-algebra oracle for one time step of the coefficient system.
//!
//! Every matrix is assembled entry by entry with quadrature, the null pair is
//! taken from a dense SVD, and the 2N×2N block system is solved by LU. Nothing
//! here uses circulant structure.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use shiftmor::basis::{integrate_periodic, BasisFamily, QuadratureRule};
use shiftmor::fom::{CoefficientState, Scheme, SolverConfig};
use shiftmor::profiles::Flux;

pub struct DenseOracle {
    pub family: BasisFamily,
    pub cfg: SolverConfig,
    pub flux: Flux,
    pub e: DVector<f64>,
    pub f: DVector<f64>,
    rule: QuadratureRule,
}

/// Slope of the slope-1 hat `φ_j` at `x` (right-continuous).
fn hat_slope(family: &BasisFamily, j: usize, x: f64) -> f64 {
    let dx = family.dx();
    let (lo, _) = family.support(j);
    let d = (x - lo).rem_euclid(2.0);
    if d < dx {
        1.0
    } else if d < 2.0 * dx {
        -1.0
    } else {
        0.0
    }
}

impl DenseOracle {
    pub fn new(cfg: SolverConfig, flux: Flux) -> Self {
        let family = BasisFamily::hat(cfg.n).unwrap();
        let rule = QuadratureRule::gauss_legendre(6);
        let mut o = Self { family, cfg, flux, e: DVector::zeros(0), f: DVector::zeros(0), rule };
        let t_star = 1.0 / (2.0 * o.cfg.lambda * o.cfg.n as f64);
        let svd = o.mass(t_star).svd(true, true);
        let k = svd.singular_values.imin();
        let u = svd.u.unwrap();
        let vt = svd.v_t.unwrap();
        let e = vt.row(k).transpose();
        let mut f = u.column(k).into_owned();
        if e.dot(&f) < 0.0 {
            f = -f;
        }
        o.e = e;
        o.f = f;
        o
    }

    fn knots(&self, shift: f64) -> Vec<f64> {
        let dx = self.family.dx();
        (0..self.cfg.n).flat_map(|i| [i as f64 * dx, i as f64 * dx - shift]).collect()
    }

    /// `M_jk(t) = ∫ φ_j(x) φ_k(x + 2λt) dx`.
    pub fn mass(&self, t: f64) -> DMatrix<f64> {
        let s = 2.0 * self.cfg.lambda * t;
        let n = self.cfg.n;
        let pts = self.knots(s);
        DMatrix::from_fn(n, n, |j, k| {
            integrate_periodic(
                |x| self.family.eval(j + 1, x).unwrap() * self.family.eval(k + 1, x + s).unwrap(),
                &pts,
                &self.rule,
            )
        })
    }

    /// `Ṁ_jk(t) = 2λ ∫ φ_j(x) φ_k'(x + 2λt) dx`.
    pub fn mass_dot(&self, t: f64) -> DMatrix<f64> {
        let s = 2.0 * self.cfg.lambda * t;
        let n = self.cfg.n;
        let pts = self.knots(s);
        DMatrix::from_fn(n, n, |j, k| {
            2.0 * self.cfg.lambda
                * integrate_periodic(
                    |x| self.family.eval(j + 1, x).unwrap() * hat_slope(&self.family, k + 1, x + s),
                    &pts,
                    &self.rule,
                )
        })
    }

    fn expansion(&self, coeffs: &[f64], y: f64) -> f64 {
        (0..self.cfg.n).map(|k| coeffs[k] * self.family.eval(k + 1, y).unwrap()).sum()
    }

    /// `F̃_j = ∫ φ_j(y) f(ũ(t, y + λt)) dy`.
    pub fn ftilde(&self, state: &CoefficientState) -> DVector<f64> {
        let s = 2.0 * self.cfg.lambda * state.t;
        let pts = self.knots(s);
        let inv = 1.0 / (2.0 * self.cfg.lambda);
        DVector::from_fn(self.cfg.n, |j, _| {
            integrate_periodic(
                |y| {
                    let u = inv * (self.expansion(&state.alpha_plus, y) - self.expansion(&state.alpha_minus, y + s));
                    self.family.eval(j + 1, y).unwrap() * self.flux.eval(u)
                },
                &pts,
                &self.rule,
            )
        })
    }

    pub fn step(&self, state: &CoefficientState, scheme: Scheme) -> CoefficientState {
        let n = self.cfg.n;
        let (eps, dt, rho) = (self.cfg.epsilon, self.cfg.dt, self.cfg.rho);
        let m0 = self.mass(0.0);
        let mn = self.mass(state.t);
        let md = self.mass_dot(state.t);
        let m1 = self.mass(state.t + dt);
        let fe = &self.f * self.e.transpose() * rho;
        let nn = &mn + &fe;
        let n1 = &m1 + &fe;
        let ap = DVector::from_column_slice(&state.alpha_plus);
        let am = DVector::from_column_slice(&state.alpha_minus);
        let ft = self.ftilde(state);

        let r1 = &m0 * &ap - &mn * &am - &md * &am * dt;
        let base = &m0 * &ap + &nn * &am + &md * &am * dt;
        let r2 = match scheme {
            Scheme::SemiImplicit => base * (eps / (eps + dt)) + &ft * (2.0 * dt / (eps + dt)),
            Scheme::Explicit => base - ((&m0 * &ap + &mn * &am) * 0.5 - &ft) * (2.0 * dt / eps),
        };
        let mut r = DMatrix::zeros(2 * n, 2 * n);
        r.view_mut((0, 0), (n, n)).copy_from(&m0);
        r.view_mut((0, n), (n, n)).copy_from(&(-&m1));
        r.view_mut((n, 0), (n, n)).copy_from(&m0);
        r.view_mut((n, n), (n, n)).copy_from(&n1);
        let mut rhs = DVector::zeros(2 * n);
        rhs.rows_mut(0, n).copy_from(&r1);
        rhs.rows_mut(n, n).copy_from(&r2);
        let x = r.lu().solve(&rhs).expect("invertible block matrix");
        CoefficientState {
            t: state.t + dt,
            alpha_plus: x.rows(0, n).iter().copied().collect(),
            alpha_minus: x.rows(n, n).iter().copied().collect(),
        }
    }
}

pub fn max_diff(a: &CoefficientState, b: &CoefficientState) -> f64 {
    a.alpha_plus
        .iter()
        .zip(&b.alpha_plus)
        .chain(a.alpha_minus.iter().zip(&b.alpha_minus))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
