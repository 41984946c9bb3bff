//! Circulant matrices stored by their first row.
//!
//! Row `i` of the matrix is the first row cyclically shifted right by `i`, so
//! `C[i][j] = c[(j - i) mod N]`. The eigenvalues are the DFT of the first row,
//! `Λ_m = Σ_k c_k exp(-2πi mk/N)`, which gives `O(N log N)` solves.

use std::cell::RefCell;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::{Error, Result};

/// Default relative singularity threshold on `min|Λ| / max|Λ|`.
pub const DEFAULT_SINGULAR_TOL: f64 = 1e-10;

/// Below this spectral ratio the Sherman–Morrison path loses too many digits
/// and rank-1 corrected solves switch to a dense factorization.
const SHERMAN_MORRISON_MIN_RATIO: f64 = 1e-8;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    })
}

fn dft(v: &[f64]) -> Vec<Complex64> {
    let (fwd, _) = plans(v.len());
    let mut buf: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fwd.process(&mut buf);
    buf
}

/// Inverse DFT including the `1/N` normalization, returning the real part.
fn idft_real(mut buf: Vec<Complex64>) -> Vec<f64> {
    let n = buf.len();
    let (_, inv) = plans(n);
    inv.process(&mut buf);
    let scale = 1.0 / n as f64;
    debug_assert!({
        let re = buf.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
        let im = buf.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        im <= 1e-12 * re.max(f64::MIN_POSITIVE) || im * scale <= 1e-300
    });
    buf.into_iter().map(|z| z.re * scale).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circulant {
    row: Vec<f64>,
}

/// All eigenvalues in DFT order together with the smallest magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Complex64>,
    pub min_abs: f64,
    pub argmin: usize,
    pub max_abs: f64,
}

impl SpectrumReport {
    /// `min|Λ| / max|Λ|`, zero for the zero matrix.
    pub fn normalized_min(&self) -> f64 {
        if self.max_abs > 0.0 {
            self.min_abs / self.max_abs
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularityCheck {
    pub singular: bool,
    /// Number of eigenvalues below the relative threshold.
    pub nullity: usize,
    pub min_abs: f64,
    pub argmin: usize,
}

impl Circulant {
    pub fn new(row: Vec<f64>) -> Result<Self> {
        if row.is_empty() {
            return Err(Error::InvalidParameter("circulant needs a non-empty first row".into()));
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("circulant first row"));
        }
        Ok(Self { row })
    }

    pub fn identity(n: usize) -> Self {
        let mut row = vec![0.0; n.max(1)];
        row[0] = 1.0;
        Self { row }
    }

    pub fn n(&self) -> usize {
        self.row.len()
    }

    pub fn row(&self) -> &[f64] {
        &self.row
    }

    pub fn into_row(self) -> Vec<f64> {
        self.row
    }

    /// Entry `(i, j)`, 0-based.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let n = self.n();
        self.row[(j + n - i % n) % n]
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| self.entry(i, j))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { row: self.row.iter().map(|c| s * c).collect() }
    }

    /// Entrywise sum `self + other · s`.
    pub fn add_scaled(&self, other: &Circulant, s: f64) -> Result<Self> {
        if other.n() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: other.n() });
        }
        Ok(Self { row: self.row.iter().zip(&other.row).map(|(a, b)| a + s * b).collect() })
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: v.len() });
        }
        let band: Vec<(usize, f64)> =
            self.row.iter().copied().enumerate().filter(|&(_, c)| c != 0.0).collect();
        if band.len() <= 32 {
            return Ok((0..n).map(|i| band.iter().map(|&(d, c)| c * v[(i + d) % n]).sum()).collect());
        }
        // (Cv)_i = Σ_d c_d v_{i+d}  ⇒  DFT(Cv) = conj(DFT c) · DFT v for real c.
        let cf = dft(&self.row);
        let vf = dft(v);
        Ok(idft_real(cf.iter().zip(vf).map(|(c, x)| c.conj() * x).collect()))
    }

    pub fn eigenvalues(&self) -> SpectrumReport {
        let eigenvalues = dft(&self.row);
        let (argmin, min_abs) = eigenvalues
            .iter()
            .map(|z| z.norm())
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, a)| if a < acc.1 { (i, a) } else { acc });
        let max_abs = eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
        SpectrumReport { eigenvalues, min_abs, argmin, max_abs }
    }

    /// Singular iff `min|Λ| <= tol · max|Λ|`.
    pub fn is_singular(&self, tol: f64) -> SingularityCheck {
        let spec = self.eigenvalues();
        let threshold = tol * spec.max_abs;
        let nullity = spec.eigenvalues.iter().filter(|z| z.norm() <= threshold).count();
        SingularityCheck {
            singular: spec.max_abs == 0.0 || spec.min_abs <= threshold,
            nullity: if spec.max_abs == 0.0 { self.n() } else { nullity },
            min_abs: spec.min_abs,
            argmin: spec.argmin,
        }
    }

    /// Solves `C x = rhs` by division in Fourier space.
    pub fn solve(&self, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
        let n = self.n();
        if rhs.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: rhs.len() });
        }
        let cf = dft(&self.row);
        let max_abs = cf.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if let Some((mode, z)) =
            cf.iter().enumerate().find(|(_, z)| max_abs == 0.0 || z.norm() <= tol * max_abs)
        {
            return Err(Error::SingularMatrix { min_abs: z.norm(), mode });
        }
        let bf = dft(rhs);
        Ok(idft_real(bf.iter().zip(&cf).map(|(b, c)| b / c.conj()).collect()))
    }

    /// `P^k C`: first row cyclically shifted right by `k`.
    pub fn rotate(&self, k: i64) -> Self {
        let n = self.n() as i64;
        let k = k.rem_euclid(n) as usize;
        let n = n as usize;
        Self { row: (0..n).map(|j| self.row[(j + n - k) % n]).collect() }
    }
}

/// If `u wᵀ` is itself circulant, returns its first row.
pub fn rank1_as_circulant(u: &[f64], w: &[f64]) -> Option<Vec<f64>> {
    let n = u.len();
    if w.len() != n || n == 0 {
        return None;
    }
    let row: Vec<f64> = w.iter().map(|wj| u[0] * wj).collect();
    let scale = row.iter().map(|x| x.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for i in 1..n {
        for j in 0..n {
            if (u[i] * w[j] - row[(j + n - i) % n]).abs() > 1e-13 * scale {
                return None;
            }
        }
    }
    Some(row)
}

/// Solves `(C + ρ u wᵀ) x = rhs`.
///
/// Uses Sherman–Morrison on two circulant solves when `C` is well conditioned
/// and a dense LU factorization of the corrected matrix otherwise.
pub fn solve_rank1(c: &Circulant, u: &[f64], w: &[f64], rho: f64, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = c.n();
    for len in [u.len(), w.len(), rhs.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, found: len });
        }
    }
    if rho == 0.0 {
        return c.solve(rhs, tol);
    }
    let spec = c.eigenvalues();
    if spec.max_abs > 0.0 && spec.normalized_min() >= SHERMAN_MORRISON_MIN_RATIO.max(tol) {
        let y = c.solve(rhs, tol)?;
        let z = c.solve(u, tol)?;
        let wz: f64 = dot(w, &z);
        let wy: f64 = dot(w, &y);
        let denom = 1.0 + rho * wz;
        if denom.abs() <= 1e-12 * (1.0 + (rho * wz).abs()) {
            return Err(Error::SingularCorrection);
        }
        let k = rho * wy / denom;
        return Ok(y.iter().zip(&z).map(|(yi, zi)| yi - k * zi).collect());
    }
    let mut a = c.to_dense();
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] += rho * u[i] * w[j];
        }
    }
    dense_solve(a, rhs, tol)
}

/// LU solve with a relative pivot check.
pub(crate) fn dense_solve(a: DMatrix<f64>, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = a.nrows();
    let scale = a.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let lu = a.lu();
    let u = lu.u();
    let min_pivot = (0..n).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if scale == 0.0 || min_pivot <= tol * scale {
        return Err(Error::SingularCorrection);
    }
    let b = nalgebra::DVector::from_column_slice(rhs);
    lu.solve(&b).map(|x| x.as_slice().to_vec()).ok_or(Error::SingularCorrection)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn dense_matvec(c: &Circulant, v: &[f64]) -> Vec<f64> {
        (c.to_dense() * DVector::from_column_slice(v)).as_slice().to_vec()
    }

    #[test]
    fn matvec_examples() {
        let v = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(Circulant::identity(5).matvec(&v).unwrap(), v);
        let p = Circulant::new(vec![0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(p.matvec(&v).unwrap(), vec![2.0, 3.0, 4.0, 5.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c = Circulant::new(random_row(&mut rng, 5)).unwrap();
        let got = c.matvec(&v).unwrap();
        for (a, b) in got.iter().zip(dense_matvec(&c, &v)) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
        // Dense rows take the FFT path.
        let c = Circulant::new(random_row(&mut rng, 40)).unwrap();
        let v: Vec<f64> = random_row(&mut rng, 40);
        for (a, b) in c.matvec(&v).unwrap().iter().zip(dense_matvec(&c, &v)) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        assert!(c.matvec(&[1.0]).is_err());
    }

    #[test]
    fn eigenvalue_examples() {
        let spec = Circulant::identity(6).eigenvalues();
        for z in &spec.eigenvalues {
            assert_abs_diff_eq!(z.re, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);
        }
        // Indicator basis at a quarter shift: c = (Δx/2)(1, 1, 0, ..., 0).
        let n = 8;
        let dx = 2.0 / n as f64;
        let mut row = vec![0.0; n];
        row[0] = dx / 2.0;
        row[1] = dx / 2.0;
        let spec = Circulant::new(row).unwrap().eigenvalues();
        assert!(spec.eigenvalues[n / 2].norm() < 1e-16);
        assert_eq!(spec.argmin, n / 2);
    }

    #[test]
    fn singularity_examples() {
        let id = Circulant::identity(4).is_singular(DEFAULT_SINGULAR_TOL);
        assert!(!id.singular);
        assert_eq!(id.nullity, 0);
        let c = Circulant::new(vec![1.0, 1.0, 0.0, 0.0]).unwrap().is_singular(DEFAULT_SINGULAR_TOL);
        assert!(c.singular);
        assert_eq!(c.nullity, 1);
        assert_eq!(c.argmin, 2);
        let z = Circulant::new(vec![0.0; 3]).unwrap().is_singular(DEFAULT_SINGULAR_TOL);
        assert!(z.singular);
        assert_eq!(z.nullity, 3);
    }

    #[test]
    fn solve_examples() {
        let rhs = vec![1.0, -2.0, 0.5, 3.0];
        let x = Circulant::identity(4).solve(&rhs, DEFAULT_SINGULAR_TOL).unwrap();
        for (a, b) in x.iter().zip(&rhs) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        let p = Circulant::new(vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let x = p.solve(&rhs, DEFAULT_SINGULAR_TOL).unwrap();
        let expect = [3.0, 1.0, -2.0, 0.5];
        for (a, b) in x.iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut row = random_row(&mut rng, 8);
        row[0] += 10.0;
        let c = Circulant::new(row).unwrap();
        let b = random_row(&mut rng, 8);
        let x = c.solve(&b, DEFAULT_SINGULAR_TOL).unwrap();
        let oracle = c.to_dense().lu().solve(&DVector::from_column_slice(&b)).unwrap();
        for (a, o) in x.iter().zip(oracle.iter()) {
            assert_abs_diff_eq!(*a, *o, epsilon = 1e-12);
        }
        let sing = Circulant::new(vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        match sing.solve(&b[..4], DEFAULT_SINGULAR_TOL) {
            Err(Error::SingularMatrix { mode, .. }) => assert_eq!(mode, 2),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn rank1_examples() {
        let rhs = vec![0.3, -1.0, 2.0, 0.7];
        let c = Circulant::new(vec![4.0, 1.0, 0.0, 1.0]).unwrap();
        let u = vec![1.0, 2.0, 3.0, 4.0];
        let x0 = solve_rank1(&c, &u, &u, 0.0, &rhs, DEFAULT_SINGULAR_TOL).unwrap();
        assert_eq!(x0, c.solve(&rhs, DEFAULT_SINGULAR_TOL).unwrap());

        let e1 = vec![1.0, 0.0, 0.0, 0.0];
        let x = solve_rank1(&Circulant::identity(4), &e1, &e1, 1.0, &e1, DEFAULT_SINGULAR_TOL).unwrap();
        assert_abs_diff_eq!(x[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 0.0, epsilon = 1e-15);

        // Singular C with null pair e (right) and f (left): corrected matrix is
        // invertible and handled by the dense path.
        let sing = Circulant::new(vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let e: Vec<f64> = (0..4).map(|k| if k % 2 == 0 { 0.5 } else { -0.5 }).collect();
        let f = e.clone();
        let x = solve_rank1(&sing, &f, &e, 0.3, &f, DEFAULT_SINGULAR_TOL).unwrap();
        let mut a = sing.to_dense();
        a += DVector::from_column_slice(&f) * DVector::from_column_slice(&e).transpose() * 0.3;
        let res = &a * DVector::from_column_slice(&x) - DVector::from_column_slice(&f);
        assert!(res.amax() <= 1e-10);
        assert!(matches!(
            solve_rank1(&sing, &[1.0, 0.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0], 0.0, &f, DEFAULT_SINGULAR_TOL),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn rotate_examples() {
        let c = Circulant::new(vec![2.0, 3.0, 0.0, 0.0]).unwrap();
        assert_eq!(c.rotate(0), c);
        assert_eq!(c.rotate(4), c);
        // First row of P·C with P_{i, i+1} = 1 is the second row of C.
        let mut p = DMatrix::zeros(4, 4);
        for i in 0..4 {
            p[(i, (i + 1) % 4)] = 1.0;
        }
        let pc = p * c.to_dense();
        let r = c.rotate(1);
        for j in 0..4 {
            assert_eq!(r.row()[j], pc[(0, j)]);
        }
        assert_eq!(r.to_dense(), pc);
    }

    #[test]
    fn alternating_outer_product_is_circulant() {
        let n = 6;
        let a: Vec<f64> = (0..n).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let row = rank1_as_circulant(&a, &a).unwrap();
        assert_eq!(row, a);
        let b: Vec<f64> = (0..n).map(|k| k as f64).collect();
        assert!(rank1_as_circulant(&a, &b).is_none());
    }

    #[test]
    fn spectral_consistency_against_dense_eigensolve() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..100 {
            let n = rng.gen_range(3..=16);
            let c = Circulant::new(random_row(&mut rng, n)).unwrap();
            let mut fast: Vec<Complex64> = c.eigenvalues().eigenvalues;
            let dense = c.to_dense().complex_eigenvalues();
            let mut dense: Vec<Complex64> = dense.iter().map(|z| Complex64::new(z.re, z.im)).collect();
            // Greedy multiset matching.
            for z in fast.drain(..) {
                let (k, d) = dense
                    .iter()
                    .enumerate()
                    .map(|(k, w)| (k, (w - z).norm()))
                    .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
                assert!(d <= 1e-10, "eigenvalue mismatch {d:e}");
                dense.swap_remove(k);
            }
        }
    }

    proptest! {
        #[test]
        fn solve_inverts_matvec(seed in 0u64..1000, n in 2usize..20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut row = random_row(&mut rng, n);
            row[0] += 2.0 * n as f64;
            let c = Circulant::new(row).unwrap();
            let x = random_row(&mut rng, n);
            let b = c.matvec(&x).unwrap();
            let y = c.solve(&b, DEFAULT_SINGULAR_TOL).unwrap();
            for (a, b) in x.iter().zip(&y) {
                prop_assert!((a - b).abs() <= 1e-10);
            }
        }

        #[test]
        fn rotations_compose(a in -20i64..20, b in -20i64..20, n in 1usize..12) {
            let c = Circulant::new((0..n).map(|k| k as f64 + 0.5).collect()).unwrap();
            prop_assert_eq!(c.rotate(a).rotate(b), c.rotate(a + b));
        }

        #[test]
        fn sherman_morrison_matches_dense(seed in 0u64..500, n in 2usize..14, rho in 0.01f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut row = random_row(&mut rng, n);
            row[0] += 3.0;
            let c = Circulant::new(row).unwrap();
            let u = random_row(&mut rng, n);
            let w = random_row(&mut rng, n);
            let rhs = random_row(&mut rng, n);
            let mut a = c.to_dense();
            for i in 0..n { for j in 0..n { a[(i, j)] += rho * u[i] * w[j]; } }
            if a.clone().svd(false, false).singular_values.min() > 1e-3 {
                let oracle = a.lu().solve(&DVector::from_column_slice(&rhs)).unwrap();
                let x = solve_rank1(&c, &u, &w, rho, &rhs, DEFAULT_SINGULAR_TOL).unwrap();
                for (xi, oi) in x.iter().zip(oracle.iter()) {
                    prop_assert!((xi - oi).abs() <= 1e-9 * (1.0 + oi.abs()));
                }
            }
        }
    }
}
