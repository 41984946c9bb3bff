//! Flux functions and initial profiles on the torus.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::basis::{wrap_unchecked, BasisFamily};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Flux `f` of the conservation law together with its derivative.
#[derive(Clone)]
pub struct Flux {
    label: String,
    f: ScalarFn,
    df: ScalarFn,
}

impl fmt::Debug for Flux {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("Flux").field("label", &self.label).finish()
    }
}

impl Flux {
    pub fn new<F, D>(label: impl Into<String>, f: F, df: D) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self { label: label.into(), f: Arc::new(f), df: Arc::new(df) }
    }

    /// `f(u) = a u`.
    pub fn linear(a: f64) -> Self {
        Self::new(format!("linear({a})"), move |u| a * u, move |_| a)
    }

    /// `f(u) = u² / 2`.
    pub fn burgers() -> Self {
        Self::new("burgers", |u| 0.5 * u * u, |u| u)
    }

    pub fn zero() -> Self {
        Self::new("zero", |_| 0.0, |_| 0.0)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        (self.f)(u)
    }

    #[inline]
    pub fn derivative(&self, u: f64) -> f64 {
        (self.df)(u)
    }
}

/// Initial data `u₀` on the torus.
#[derive(Clone)]
pub enum InitialCondition {
    /// `sin(πx)`.
    Sine,
    /// `1/2 + sin(πx)`.
    ShiftedSine,
    /// `e^{-4x²} - e^{-1}` on `(-1/2, 1/2)`, zero elsewhere.
    GaussBump,
    /// `a (χ_{[0,1/2)} - 1)`.
    Step { a: f64 },
    /// `sin(πx) + a (χ_{[0,1/2)} - 1)`.
    Combined { a: f64 },
    Constant(f64),
    /// `Σ_j c_j φ_j(x)` in a basis family.
    Expansion { family: BasisFamily, coeffs: Vec<f64> },
    Custom { label: String, f: ScalarFn, breakpoints: Vec<f64> },
}

impl fmt::Debug for InitialCondition {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(fm, "InitialCondition({})", self.label())
    }
}

fn step_indicator(x: f64) -> f64 {
    let y = wrap_unchecked(x);
    if (0.0..0.5).contains(&y) {
        1.0
    } else {
        0.0
    }
}

impl InitialCondition {
    pub fn custom<F>(label: impl Into<String>, f: F, breakpoints: Vec<f64>) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::Custom { label: label.into(), f: Arc::new(f), breakpoints }
    }

    /// Hat interpolant of `g` at the knots of `family` (peak value is `Δx`).
    pub fn hat_interpolant<G: Fn(f64) -> f64>(family: BasisFamily, g: G) -> Self {
        let dx = family.dx();
        let coeffs = (1..=family.n()).map(|j| g(family.center(j)) / dx).collect();
        Self::Expansion { family, coeffs }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Sine => "sine".into(),
            Self::ShiftedSine => "shifted_sine".into(),
            Self::GaussBump => "gauss_bump".into(),
            Self::Step { a } => format!("step(a={a})"),
            Self::Combined { a } => format!("combined(a={a})"),
            Self::Constant(c) => format!("constant({c})"),
            Self::Expansion { family, .. } => format!("expansion(N={})", family.n()),
            Self::Custom { label, .. } => label.clone(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Sine => (PI * x).sin(),
            Self::ShiftedSine => 0.5 + (PI * x).sin(),
            Self::GaussBump => {
                let y = wrap_unchecked(x);
                if y > -0.5 && y < 0.5 {
                    (-4.0 * y * y).exp() - (-1.0f64).exp()
                } else {
                    0.0
                }
            }
            Self::Step { a } => a * (step_indicator(x) - 1.0),
            Self::Combined { a } => (PI * x).sin() + a * (step_indicator(x) - 1.0),
            Self::Constant(c) => *c,
            Self::Expansion { family, coeffs } => family.expand_at(coeffs, x),
            Self::Custom { f, .. } => f(x),
        }
    }

    /// Points where `u₀` or its derivative jumps; used as quadrature break points.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::GaussBump => vec![-0.5, 0.5],
            Self::Step { .. } | Self::Combined { .. } => vec![0.0, 0.5],
            Self::Expansion { family, .. } => family.knots(0.0),
            Self::Custom { breakpoints, .. } => breakpoints.clone(),
            _ => Vec::new(),
        }
    }

    /// Maximum of `|f'(u₀)|` over a uniform sample of the torus.
    pub fn max_characteristic_speed(&self, flux: &Flux, samples: usize) -> f64 {
        (0..samples)
            .map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / samples as f64)
            .chain(self.breakpoints())
            .map(|x| flux.derivative(self.eval(x)).abs())
            .fold(0.0, f64::max)
    }
}
