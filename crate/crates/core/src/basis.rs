//! Periodic geometry on the torus `[-1, 1)`, the family of translated basis
//! functions, and composite Gauss–Legendre quadrature.
//!
//! Basis functions are indexed `1..=N` in the public API, matching the usual
//! mathematical notation; coefficient vectors are stored 0-based, so entry `q`
//! multiplies `φ_{q+1}`.

use crate::{Error, Result};

/// Length of the periodic domain.
pub const PERIOD: f64 = 2.0;

/// Canonical representative of a point on the torus, `-1 <= x < 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TorusPoint(f64);

impl TorusPoint {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Maps `x` to its canonical representative in `[-1, 1)`.
pub fn wrap(x: f64) -> Result<TorusPoint> {
    if !x.is_finite() {
        return Err(Error::NonFinite("torus coordinate"));
    }
    Ok(TorusPoint(wrap_unchecked(x)))
}

#[inline]
pub(crate) fn wrap_unchecked(x: f64) -> f64 {
    let mut r = x - PERIOD * ((x + 1.0) / PERIOD).floor();
    if r >= 1.0 {
        r -= PERIOD;
    }
    if r < -1.0 {
        r += PERIOD;
    }
    r
}

/// Signed periodic offset `a - b` reduced to `[-1, 1)`.
#[inline]
pub fn periodic_offset(a: f64, b: f64) -> f64 {
    wrap_unchecked(a - b)
}

/// Shape of the generating function `φ_0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Piecewise linear hat with slopes `±scale`, supported on two cells and
    /// peaking at `scale·Δx`. `scale = 1` is the default profile.
    Hat { scale: f64 },
    /// Characteristic function of a single cell.
    Indicator,
}

/// `N` translates `φ_j(x) = φ_1(x - (j-1)Δx)` of one generating profile, `Δx = 2/N`.
///
/// The hat `φ_j` rises on `[(j-1)Δx, jΔx]` and falls on `[jΔx, (j+1)Δx]`; the
/// indicator `φ_j` is the cell `[(j-1)Δx - Δx/2, (j-1)Δx + Δx/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisFamily {
    n: usize,
    dx: f64,
    shape: Shape,
}

impl BasisFamily {
    pub fn new(n: usize, shape: Shape) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("basis size must be positive".into()));
        }
        if let Shape::Hat { scale } = shape {
            if !(scale.is_finite() && scale > 0.0) {
                return Err(Error::InvalidParameter(format!("hat scale {scale} must be positive")));
            }
        }
        Ok(Self { n, dx: PERIOD / n as f64, shape })
    }

    /// Slope-1 hat family.
    pub fn hat(n: usize) -> Result<Self> {
        Self::new(n, Shape::Hat { scale: 1.0 })
    }

    pub fn indicator(n: usize) -> Result<Self> {
        Self::new(n, Shape::Indicator)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn is_hat(&self) -> bool {
        matches!(self.shape, Shape::Hat { .. })
    }

    /// Center of `φ_j` (1-based).
    pub fn center(&self, j: usize) -> f64 {
        match self.shape {
            Shape::Hat { .. } => j as f64 * self.dx,
            Shape::Indicator => (j as f64 - 1.0) * self.dx,
        }
    }

    /// Half the support length.
    pub fn half_width(&self) -> f64 {
        match self.shape {
            Shape::Hat { .. } => self.dx,
            Shape::Indicator => 0.5 * self.dx,
        }
    }

    /// `∫_𝕋 φ_j dx`, independent of `j` and of any shift.
    pub fn integral(&self) -> f64 {
        match self.shape {
            Shape::Hat { scale } => scale * self.dx * self.dx,
            Shape::Indicator => self.dx,
        }
    }

    /// Generating profile centered at zero, evaluated at a real offset (no wrap).
    #[inline]
    fn profile(&self, d: f64) -> f64 {
        match self.shape {
            Shape::Hat { scale } => scale * (self.dx - d.abs()).max(0.0),
            Shape::Indicator => {
                if d >= -0.5 * self.dx && d < 0.5 * self.dx {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Periodized profile: sums every image within reach (only matters for `N <= 2`).
    #[inline]
    pub(crate) fn periodic_profile(&self, d: f64) -> f64 {
        let d0 = wrap_unchecked(d);
        let mut acc = self.profile(d0);
        if self.half_width() >= 1.0 {
            for m in 1..=2 {
                let shift = PERIOD * m as f64;
                acc += self.profile(d0 + shift) + self.profile(d0 - shift);
            }
        }
        acc
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j == 0 || j > self.n {
            return Err(Error::IndexOutOfRange { index: j, len: self.n });
        }
        Ok(())
    }

    /// `φ_j(x)` with periodic wrap-around.
    pub fn eval(&self, j: usize, x: f64) -> Result<f64> {
        self.check_index(j)?;
        if !x.is_finite() {
            return Err(Error::NonFinite("basis evaluation point"));
        }
        Ok(self.periodic_profile(x - self.center(j)))
    }

    /// `φ_j(x - shift)`.
    pub fn eval_shifted(&self, j: usize, x: f64, shift: f64) -> Result<f64> {
        self.eval(j, x - shift)
    }

    /// `Σ_j coeffs_j φ_j(x - shift)`.
    pub fn expand(&self, coeffs: &[f64], shift: f64, x: f64) -> Result<f64> {
        if coeffs.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: coeffs.len() });
        }
        if !(x.is_finite() && shift.is_finite()) {
            return Err(Error::NonFinite("expansion point"));
        }
        Ok(self.expand_at(coeffs, x - shift))
    }

    /// Expansion at `y` without validation. Only the (at most two) basis
    /// functions that are nonzero on the cell containing `y` are touched.
    #[inline]
    pub(crate) fn expand_at(&self, coeffs: &[f64], y: f64) -> f64 {
        let n = self.n;
        match self.shape {
            Shape::Hat { scale } => {
                let p = (y / self.dx).rem_euclid(n as f64);
                let cell = (p.floor() as usize).min(n - 1);
                let frac = p - cell as f64;
                let left = coeffs[(cell + n - 1) % n];
                let right = coeffs[cell];
                scale * self.dx * ((1.0 - frac) * left + frac * right)
            }
            Shape::Indicator => {
                let p = (y / self.dx + 0.5).rem_euclid(n as f64);
                coeffs[(p.floor() as usize).min(n - 1)]
            }
        }
    }

    /// Unwrapped support `[a, b]` of `φ_j` (1-based).
    pub fn support(&self, j: usize) -> (f64, f64) {
        let c = self.center(j);
        (c - self.half_width(), c + self.half_width())
    }

    /// Break points of `x ↦ φ_j(x - shift)` for all `j`, wrapped and sorted.
    pub fn knots(&self, shift: f64) -> Vec<f64> {
        let offset = match self.shape {
            Shape::Hat { .. } => 0.0,
            Shape::Indicator => 0.5 * self.dx,
        };
        let mut k: Vec<f64> =
            (0..self.n).map(|i| wrap_unchecked(i as f64 * self.dx + offset + shift)).collect();
        k.sort_by(f64::total_cmp);
        k
    }
}

/// Gauss–Legendre rule applied on every sub-interval between break points.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Uniform partition used when no break points are supplied.
    pub fallback_cells: usize,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::gauss_legendre(5)
    }
}

impl QuadratureRule {
    /// `n`-point Gauss–Legendre rule on `[-1, 1]`, exact up to degree `2n - 1`.
    pub fn gauss_legendre(n: usize) -> Self {
        assert!(n > 0, "at least one quadrature node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, refined by Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let step = p / d;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights, fallback_cells: 64 }
    }

    pub fn nodes_per_interval(&self) -> usize {
        self.nodes.len()
    }

    /// `∫_a^b g`.
    #[inline]
    pub fn integrate<G: Fn(f64) -> f64>(&self, g: G, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * g(mid + half * x)).sum::<f64>() * half
    }

    /// Sum of the rule over consecutive sorted points.
    pub fn integrate_partition<G: Fn(f64) -> f64>(&self, g: G, points: &[f64]) -> f64 {
        points.windows(2).map(|w| if w[1] > w[0] { self.integrate(&g, w[0], w[1]) } else { 0.0 }).sum()
    }
}

/// Value and derivative of the Legendre polynomial `P_n` at `x`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite approximation of `∫_𝕋 g` split at the given break points.
///
/// Break points are wrapped into `[-1, 1)`; the domain ends are always added.
/// An empty set falls back to `rule.fallback_cells` uniform cells.
pub fn integrate_periodic<G: Fn(f64) -> f64>(g: G, breakpoints: &[f64], rule: &QuadratureRule) -> f64 {
    let mut pts: Vec<f64> = if breakpoints.is_empty() {
        let m = rule.fallback_cells.max(1);
        (0..=m).map(|i| -1.0 + PERIOD * i as f64 / m as f64).collect()
    } else {
        let mut p: Vec<f64> = breakpoints.iter().map(|&b| wrap_unchecked(b)).collect();
        p.push(-1.0);
        p.push(1.0);
        p
    };
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    rule.integrate_partition(g, &pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap(0.5).unwrap().value(), 0.5);
        assert_eq!(wrap(1.0).unwrap().value(), -1.0);
        assert_eq!(wrap(-3.25).unwrap().value(), 0.75);
        assert_eq!(wrap(-1.0).unwrap().value(), -1.0);
        assert!(wrap(f64::NAN).is_err());
        assert!(wrap(f64::INFINITY).is_err());
    }

    #[test]
    fn hat_peak_and_support() {
        let b = BasisFamily::hat(4).unwrap();
        assert_eq!(b.dx(), 0.5);
        assert_abs_diff_eq!(b.eval(1, 0.5).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b.eval(1, 0.25).unwrap(), 0.25, epsilon = 1e-15);
        assert_eq!(b.eval(1, -0.5).unwrap(), 0.0);
        assert_eq!(b.eval(1, 1.5).unwrap(), 0.0);
        assert_eq!(b.eval(3, 0.25).unwrap(), 0.0);
        // φ_4 peaks at 4Δx = 2 ≡ 0 and wraps around the domain end.
        assert_abs_diff_eq!(b.eval(4, 0.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b.eval(4, -0.25).unwrap(), 0.25, epsilon = 1e-15);
        assert!(matches!(b.eval(0, 0.0), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(b.eval(5, 0.0), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn indicator_cells() {
        let b = BasisFamily::indicator(4).unwrap();
        assert_eq!(b.eval(2, 0.5).unwrap(), 1.0);
        assert_eq!(b.eval(2, 0.0).unwrap(), 0.0);
        assert_eq!(b.eval(1, 0.0).unwrap(), 1.0);
        // Cells tile the torus: exactly one indicator is active everywhere.
        for i in 0..400 {
            let x = -1.0 + i as f64 * 0.005;
            let s: f64 = (1..=4).map(|j| b.eval(j, x).unwrap()).sum();
            assert_eq!(s, 1.0, "x = {x}");
        }
    }

    #[test]
    fn shifted_evaluation() {
        let b = BasisFamily::hat(8).unwrap();
        for i in 0..100 {
            let x = -1.0 + 0.0213 * i as f64;
            for j in 1..=8 {
                let v = b.eval(j, x).unwrap();
                assert_eq!(b.eval_shifted(j, x, 0.0).unwrap(), v);
                assert_abs_diff_eq!(b.eval_shifted(j, x, 2.0).unwrap(), v, epsilon = 1e-14);
                let next = j % 8 + 1;
                assert_abs_diff_eq!(b.eval_shifted(j, x, b.dx()).unwrap(), b.eval(next, x).unwrap(), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn expansion_examples() {
        let b = BasisFamily::hat(6).unwrap();
        let zero = vec![0.0; 6];
        let mut e1 = vec![0.0; 6];
        e1[0] = 1.0;
        let ones = vec![1.0; 6];
        for i in 0..1000 {
            let x = -1.0 + 0.002 * i as f64;
            assert_eq!(b.expand(&zero, 0.3, x).unwrap(), 0.0);
            assert_abs_diff_eq!(b.expand(&e1, 0.0, x).unwrap(), b.eval(1, x).unwrap(), epsilon = 1e-15);
            // Direct summation oracle.
            let direct: f64 = (1..=6).map(|j| b.eval(j, x - 0.17).unwrap()).sum();
            assert_abs_diff_eq!(b.expand(&ones, 0.17, x).unwrap(), direct, epsilon = 1e-14);
            assert_abs_diff_eq!(direct, b.dx(), epsilon = 1e-14);
        }
        assert!(matches!(b.expand(&[1.0], 0.0, 0.0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn small_families_are_periodized() {
        for n in 1..=3 {
            let b = BasisFamily::hat(n).unwrap();
            let ones = vec![1.0; n];
            for i in 0..50 {
                let x = -1.0 + 0.04 * i as f64;
                let direct: f64 = (1..=n).map(|j| b.eval(j, x).unwrap()).sum();
                assert_abs_diff_eq!(direct, b.dx(), epsilon = 1e-13);
                assert_abs_diff_eq!(b.expand(&ones, 0.0, x).unwrap(), direct, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn gauss_legendre_exactness() {
        for n in 1..=8 {
            let rule = QuadratureRule::gauss_legendre(n);
            let wsum: f64 = rule.weights.iter().sum();
            assert_abs_diff_eq!(wsum, 2.0, epsilon = 1e-14);
            for deg in 0..2 * n {
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                let got = rule.integrate(|x| x.powi(deg as i32), -1.0, 1.0);
                assert_abs_diff_eq!(got, exact, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn periodic_integrals() {
        let rule = QuadratureRule::default();
        assert_abs_diff_eq!(integrate_periodic(|_| 1.0, &[], &rule), 2.0, epsilon = 1e-14);
        let s = integrate_periodic(|x| (std::f64::consts::PI * x).sin(), &[], &rule);
        assert_abs_diff_eq!(s, 0.0, epsilon = 1e-14);
        let b = BasisFamily::hat(10).unwrap();
        let dx = b.dx();
        let sq = integrate_periodic(|x| b.eval(1, x).unwrap().powi(2), &b.knots(0.0), &rule);
        // Antiderivative of the squared hat: 2 ∫_0^Δx x² dx.
        assert_abs_diff_eq!(sq, 2.0 * dx.powi(3) / 3.0, epsilon = 1e-16);
    }

    #[test]
    fn doubling_nodes_is_stable_for_basis_products() {
        let b = BasisFamily::hat(12).unwrap();
        let shift = 0.0371;
        let mut knots = b.knots(0.0);
        knots.extend(b.knots(-shift));
        for (ja, jb) in [(1, 1), (1, 2), (3, 12), (5, 6)] {
            let g = |x: f64| b.eval(ja, x).unwrap() * b.eval(jb, x + shift).unwrap();
            let r2 = integrate_periodic(g, &knots, &QuadratureRule::gauss_legendre(2));
            let r4 = integrate_periodic(g, &knots, &QuadratureRule::gauss_legendre(4));
            let r8 = integrate_periodic(g, &knots, &QuadratureRule::gauss_legendre(8));
            let scale = r8.abs().max(1e-300);
            assert!((r2 - r4).abs() <= 1e-12 * scale.max(b.dx().powi(3)));
            assert!((r4 - r8).abs() <= 1e-12 * scale.max(b.dx().powi(3)));
        }
    }

    proptest! {
        #[test]
        fn wrap_is_canonical_and_periodic(x in -50.0f64..50.0, k in -10i32..10) {
            let w = wrap(x).unwrap().value();
            prop_assert!((-1.0..1.0).contains(&w));
            let w2 = wrap(x + 2.0 * k as f64).unwrap().value();
            prop_assert!(periodic_offset(w, w2).abs() < 1e-12);
        }

        #[test]
        fn translation_property(x in -1.0f64..1.0, j in 1usize..=9, k in 1usize..=9) {
            let b = BasisFamily::hat(9).unwrap();
            let lhs = b.eval(j, x).unwrap();
            let rhs = b.eval(k, x - (j as f64 - k as f64) * b.dx()).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-13);
        }

        #[test]
        fn compact_support(x in -1.0f64..1.0, j in 1usize..=16) {
            let b = BasisFamily::hat(16).unwrap();
            let d = periodic_offset(x, b.center(j)).abs();
            if d >= b.dx() {
                prop_assert_eq!(b.eval(j, x).unwrap(), 0.0);
            }
            let ind = BasisFamily::indicator(16).unwrap();
            let d = periodic_offset(x, ind.center(j)).abs();
            if d > 0.5 * ind.dx() {
                prop_assert_eq!(ind.eval(j, x).unwrap(), 0.0);
            }
        }
    }
}
