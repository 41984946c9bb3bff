//! Proper orthogonal decomposition of coefficient snapshots and the reduced
//! model obtained by projecting the full-order time step.
//!
//! The reduced update is `â_{n+1} = Vᵀ S(V â_n)` where `S` is the full step:
//! lift, march one step with the same regularized solves, project back. The
//! nonlinear term is evaluated at the lifted state; no hyper-reduction is
//! attempted.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};

use crate::fom::{rk4, step_count, CoefficientState, FullOrderModel, SourceTransport, Trajectory, TransportState};
use crate::profiles::InitialCondition;
use crate::{Error, Result};

/// Columns of `α⁺` and `α⁻` gathered from one or more trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    pub plus: DMatrix<f64>,
    pub minus: DMatrix<f64>,
    /// Number of columns contributed by each source trajectory, in order.
    pub sources: Vec<usize>,
}

impl SnapshotSet {
    pub fn n(&self) -> usize {
        self.plus.nrows()
    }

    pub fn len(&self) -> usize {
        self.plus.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn from_states<'a, I>(states: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a CoefficientState>,
    {
        let states: Vec<&CoefficientState> = states.into_iter().collect();
        let Some(first) = states.first() else {
            return Err(Error::InvalidParameter("no snapshots".into()));
        };
        let n = first.alpha_plus.len();
        for s in &states {
            for len in [s.alpha_plus.len(), s.alpha_minus.len()] {
                if len != n {
                    return Err(Error::DimensionMismatch { expected: n, found: len });
                }
            }
            if !s.is_finite() {
                return Err(Error::NonFinite("snapshot"));
            }
        }
        let plus = DMatrix::from_fn(n, states.len(), |i, k| states[k].alpha_plus[i]);
        let minus = DMatrix::from_fn(n, states.len(), |i, k| states[k].alpha_minus[i]);
        Ok(Self { plus, minus, sources: vec![states.len()] })
    }
}

/// Every `stride`-th recorded state of each trajectory, concatenated in order.
pub fn collect_snapshots(trajectories: &[&Trajectory], stride: usize) -> Result<SnapshotSet> {
    if stride == 0 {
        return Err(Error::InvalidParameter("snapshot stride must be positive".into()));
    }
    let mut states = Vec::new();
    let mut sources = Vec::new();
    for traj in trajectories {
        let before = states.len();
        states.extend(traj.states.iter().step_by(stride));
        sources.push(states.len() - before);
    }
    let mut set = SnapshotSet::from_states(states)?;
    set.sources = sources;
    Ok(set)
}

/// How many POD modes to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankSelection {
    Rank(usize),
    /// Smallest rank capturing this fraction of `Σ σ_k²`.
    Energy(f64),
}

/// Leading left singular vectors of a snapshot matrix, with all singular values in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct PodModes {
    pub basis: DMatrix<f64>,
    pub singular_values: Vec<f64>,
}

/// Thin SVD of `snapshots`, truncated per `selection`.
pub fn pod_matrix(snapshots: &DMatrix<f64>, selection: RankSelection) -> Result<PodModes> {
    let max = snapshots.nrows().min(snapshots.ncols());
    let svd = snapshots.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let r = match selection {
        RankSelection::Rank(r) => r,
        RankSelection::Energy(frac) => {
            if !(frac > 0.0 && frac <= 1.0) {
                return Err(Error::InvalidParameter(format!("energy fraction {frac} must lie in (0, 1]")));
            }
            let total: f64 = singular_values.iter().map(|s| s * s).sum();
            let mut acc = 0.0;
            let mut r = singular_values.len();
            for (k, s) in singular_values.iter().enumerate() {
                acc += s * s;
                if acc >= frac * total {
                    r = k + 1;
                    break;
                }
            }
            r.max(1)
        }
    };
    if r == 0 || r > max {
        return Err(Error::RankTooLarge { requested: r, max });
    }
    let basis = DMatrix::from_fn(snapshots.nrows(), r, |i, k| u[(i, order[k])]);
    Ok(PodModes { basis, singular_values })
}

/// `σ_k / σ_1`, all zeros for a zero matrix.
pub fn normalized(singular_values: &[f64]) -> Vec<f64> {
    let s1 = singular_values.first().copied().unwrap_or(0.0);
    singular_values.iter().map(|s| if s1 > 0.0 { s / s1 } else { 0.0 }).collect()
}

/// Orthonormal projection bases for the two coefficient families.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedBasisPair {
    v_plus: DMatrix<f64>,
    v_minus: DMatrix<f64>,
    pub sigma_plus: Vec<f64>,
    pub sigma_minus: Vec<f64>,
}

impl ReducedBasisPair {
    pub fn new(v_plus: DMatrix<f64>, v_minus: DMatrix<f64>) -> Result<Self> {
        if v_plus.shape() != v_minus.shape() {
            return Err(Error::DimensionMismatch { expected: v_plus.ncols(), found: v_minus.ncols() });
        }
        Ok(Self { v_plus, v_minus, sigma_plus: Vec::new(), sigma_minus: Vec::new() })
    }

    /// `r` zero columns: every lifted state is zero.
    pub fn zero(n: usize, r: usize) -> Self {
        Self { v_plus: DMatrix::zeros(n, r), v_minus: DMatrix::zeros(n, r), sigma_plus: vec![], sigma_minus: vec![] }
    }

    pub fn n(&self) -> usize {
        self.v_plus.nrows()
    }

    pub fn rank(&self) -> usize {
        self.v_plus.ncols()
    }

    pub fn v_plus(&self) -> &DMatrix<f64> {
        &self.v_plus
    }

    pub fn v_minus(&self) -> &DMatrix<f64> {
        &self.v_minus
    }

    /// `max(‖V⁺ᵀV⁺ − I‖_max, ‖V⁻ᵀV⁻ − I‖_max)`.
    pub fn orthonormality_defect(&self) -> f64 {
        let id = DMatrix::<f64>::identity(self.rank(), self.rank());
        let a = (self.v_plus.transpose() * &self.v_plus - &id).amax();
        let b = (self.v_minus.transpose() * &self.v_minus - &id).amax();
        a.max(b)
    }

    /// CSV `index,sigma_plus,sigma_plus_normalized,sigma_minus,sigma_minus_normalized` (1-based index).
    pub fn write_singular_values_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "index,sigma_plus,sigma_plus_normalized,sigma_minus,sigma_minus_normalized")?;
        let (np, nm) = (normalized(&self.sigma_plus), normalized(&self.sigma_minus));
        for k in 0..self.sigma_plus.len().max(self.sigma_minus.len()) {
            let get = |v: &[f64], k: usize| v.get(k).copied().unwrap_or(0.0);
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e}",
                k + 1,
                get(&self.sigma_plus, k),
                get(&np, k),
                get(&self.sigma_minus, k),
                get(&nm, k)
            )?;
        }
        Ok(())
    }
}

/// Separate POD of the `α⁺` and `α⁻` snapshots with equal target rank.
pub fn pod(snapshots: &SnapshotSet, selection: RankSelection) -> Result<ReducedBasisPair> {
    let plus = pod_matrix(&snapshots.plus, selection)?;
    let selection = match selection {
        // Energy selection picks the rank from α⁺ and reuses it for α⁻.
        RankSelection::Energy(_) => RankSelection::Rank(plus.basis.ncols()),
        s => s,
    };
    let minus = pod_matrix(&snapshots.minus, selection)?;
    Ok(ReducedBasisPair {
        v_plus: plus.basis,
        v_minus: minus.basis,
        sigma_plus: plus.singular_values,
        sigma_minus: minus.singular_values,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub t: f64,
    pub a_plus: Vec<f64>,
    pub a_minus: Vec<f64>,
}

fn project(v: &DMatrix<f64>, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != v.nrows() {
        return Err(Error::DimensionMismatch { expected: v.nrows(), found: x.len() });
    }
    Ok((v.transpose() * DVector::from_column_slice(x)).as_slice().to_vec())
}

fn expand(v: &DMatrix<f64>, a: &[f64]) -> Result<Vec<f64>> {
    if a.len() != v.ncols() {
        return Err(Error::DimensionMismatch { expected: v.ncols(), found: a.len() });
    }
    Ok((v * DVector::from_column_slice(a)).as_slice().to_vec())
}

/// `â± = V±ᵀ α±`.
pub fn reduce_state(basis: &ReducedBasisPair, state: &CoefficientState) -> Result<ReducedState> {
    Ok(ReducedState {
        t: state.t,
        a_plus: project(&basis.v_plus, &state.alpha_plus)?,
        a_minus: project(&basis.v_minus, &state.alpha_minus)?,
    })
}

/// `α± = V± â±`.
pub fn lift_state(basis: &ReducedBasisPair, state: &ReducedState) -> Result<CoefficientState> {
    Ok(CoefficientState {
        t: state.t,
        alpha_plus: expand(&basis.v_plus, &state.a_plus)?,
        alpha_minus: expand(&basis.v_minus, &state.a_minus)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTrajectory {
    pub dt: f64,
    pub stride: usize,
    pub states: Vec<ReducedState>,
    pub final_state: ReducedState,
    pub steps: usize,
}

/// Full-order model restricted to the span of a basis pair.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    fom: FullOrderModel,
    basis: ReducedBasisPair,
}

impl ReducedModel {
    pub fn new(fom: FullOrderModel, basis: ReducedBasisPair) -> Result<Self> {
        if basis.n() != fom.config().n {
            return Err(Error::DimensionMismatch { expected: fom.config().n, found: basis.n() });
        }
        Ok(Self { fom, basis })
    }

    pub fn fom(&self) -> &FullOrderModel {
        &self.fom
    }

    pub fn basis(&self) -> &ReducedBasisPair {
        &self.basis
    }

    pub fn initial_state(&self, u0: &InitialCondition) -> Result<ReducedState> {
        reduce_state(&self.basis, &self.fom.project_initial(u0)?)
    }

    pub fn lift(&self, state: &ReducedState) -> Result<CoefficientState> {
        lift_state(&self.basis, state)
    }

    pub fn step_reduced(&self, state: &ReducedState) -> Result<ReducedState> {
        let full = self.fom.step(&self.lift(state)?)?;
        reduce_state(&self.basis, &full)
    }

    pub fn integrate_reduced(&self, u0: &InitialCondition, t_end: f64) -> Result<ReducedTrajectory> {
        let start = self.initial_state(u0)?;
        self.integrate_from(start, t_end)
    }

    pub fn integrate_from(&self, start: ReducedState, t_end: f64) -> Result<ReducedTrajectory> {
        let cfg = self.fom.config();
        let steps = step_count(t_end, cfg.dt)?;
        let stride = cfg.snapshot_stride;
        let mut states = vec![start.clone()];
        let mut state = start;
        for k in 1..=steps {
            state = self.step_reduced(&state)?;
            if state.a_plus.iter().chain(&state.a_minus).any(|x| !x.is_finite()) {
                return Err(Error::Blowup { step: k, t: state.t, min_sigma: f64::NAN });
            }
            if k % stride == 0 {
                states.push(state.clone());
            }
        }
        Ok(ReducedTrajectory { dt: cfg.dt, stride, states, final_state: state, steps })
    }
}

/// Galerkin reduction of the source-transport model, `â' = Vᵀ M(0)⁻¹ G(V â)`.
pub fn integrate_transport_reduced(
    model: &SourceTransport,
    basis: &DMatrix<f64>,
    w0: &InitialCondition,
    t_end: f64,
    dt: f64,
) -> Result<TransportState> {
    let full0 = model.project_initial(w0)?;
    let mut a = project(basis, &full0.alpha)?;
    let steps = step_count(t_end, dt)?;
    for _ in 0..steps {
        a = rk4(&a, dt, |a| project(basis, &model.rhs(&expand(basis, a)?)?))?;
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("reduced transport coefficients"));
        }
    }
    Ok(TransportState { t: steps as f64 * dt, alpha: expand(basis, &a)? })
}

/// Snapshots of the source-transport model, one column every `stride` steps (initial state included).
pub fn transport_snapshots(
    model: &SourceTransport,
    w0: &InitialCondition,
    t_end: f64,
    dt: f64,
    stride: usize,
) -> Result<DMatrix<f64>> {
    let mut s = model.project_initial(w0)?;
    let mut cols = vec![s.alpha.clone()];
    for k in 1..=step_count(t_end, dt)? {
        s = model.step(&s, dt)?;
        if k % stride.max(1) == 0 {
            cols.push(s.alpha.clone());
        }
    }
    let n = cols[0].len();
    Ok(DMatrix::from_fn(n, cols.len(), |i, k| cols[k][i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fom::SolverConfig;
    use crate::profiles::Flux;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn rank_one_snapshots() {
        let v = DVector::from_vec(vec![1.0, 2.0, -1.0, 0.5]);
        let m = DMatrix::from_fn(4, 6, |i, k| v[i] * (k as f64 + 1.0));
        let modes = pod_matrix(&m, RankSelection::Rank(1)).unwrap();
        assert!(modes.singular_values[1] <= 1e-12 * modes.singular_values[0]);
        let col = modes.basis.column(0);
        let cos = (col.dot(&v) / v.norm()).abs();
        assert_abs_diff_eq!(cos, 1.0, epsilon = 1e-12);
        assert!(matches!(pod_matrix(&m, RankSelection::Rank(5)), Err(Error::RankTooLarge { .. })));
        assert_eq!(pod_matrix(&m, RankSelection::Energy(0.999)).unwrap().basis.ncols(), 1);
    }

    #[test]
    fn pod_matches_gram_eigenvectors() {
        // Independent oracle: eigenvectors of the Gram matrix A Aᵀ.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = random_matrix(&mut rng, 6, 10);
        let modes = pod_matrix(&a, RankSelection::Rank(3)).unwrap();
        let eig = (&a * a.transpose()).symmetric_eigen();
        let mut idx: Vec<usize> = (0..6).collect();
        idx.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let oracle = DMatrix::from_fn(6, 3, |i, k| eig.eigenvectors[(i, idx[k])]);
        for k in 0..6 {
            assert_abs_diff_eq!(modes.singular_values[k].powi(2), eig.eigenvalues[idx[k]], epsilon = 1e-10);
        }
        // Subspace angle via the singular values of V_podᵀ V_oracle.
        let cosines = (modes.basis.transpose() * &oracle).singular_values();
        assert!(cosines.iter().all(|c| (1.0 - c).abs() <= 1e-10));
    }

    #[test]
    fn eckart_young_tail_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in [4usize, 8, 12] {
            let a = random_matrix(&mut rng, n, n + 3);
            for r in 1..n {
                let modes = pod_matrix(&a, RankSelection::Rank(r)).unwrap();
                let v = &modes.basis;
                let err = (&a - v * (v.transpose() * &a)).norm_squared();
                let tail: f64 = modes.singular_values[r..].iter().map(|s| s * s).sum();
                assert_abs_diff_eq!(err, tail, epsilon = 1e-10 * (1.0 + tail));
            }
        }
    }

    #[test]
    fn reduce_and_lift() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_matrix(&mut rng, 8, 12);
        let set = SnapshotSet { plus: a.clone(), minus: a, sources: vec![12] };
        let basis = pod(&set, RankSelection::Rank(3)).unwrap();
        assert!(basis.orthonormality_defect() <= 1e-10);
        let z = ReducedState { t: 0.0, a_plus: vec![0.0; 3], a_minus: vec![0.0; 3] };
        assert_eq!(lift_state(&basis, &z).unwrap().max_abs(), 0.0);
        let r = ReducedState { t: 0.1, a_plus: vec![1.0, -2.0, 0.5], a_minus: vec![0.3, 0.0, 1.0] };
        let back = reduce_state(&basis, &lift_state(&basis, &r).unwrap()).unwrap();
        for (x, y) in back.a_plus.iter().zip(&r.a_plus).chain(back.a_minus.iter().zip(&r.a_minus)) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
        // A vector orthogonal to the span reduces to zero.
        let v = basis.v_plus();
        let x = DVector::from_fn(8, |i, _| (i as f64).sin());
        let perp = &x - v * (v.transpose() * &x);
        let s = CoefficientState { t: 0.0, alpha_plus: perp.as_slice().to_vec(), alpha_minus: vec![0.0; 8] };
        assert!(reduce_state(&basis, &s).unwrap().a_plus.iter().all(|c| c.abs() < 1e-12));
        assert!(reduce_state(&basis, &CoefficientState::zeros(5, 0.0)).is_err());
    }

    #[test]
    fn snapshot_collection() {
        let mut cfg = SolverConfig::new(12, 1.0, 1e-2);
        cfg.snapshot_stride = 1;
        let fom = FullOrderModel::new(cfg, Flux::linear(1.0)).unwrap();
        let traj = fom.integrate(&InitialCondition::Sine, 0.05).unwrap();
        let set = collect_snapshots(&[&traj], 1).unwrap();
        assert_eq!(set.len(), traj.steps + 1);
        let set2 = collect_snapshots(&[&traj, &traj], 1).unwrap();
        assert_eq!(set2.len(), 2 * set.len());
        assert_eq!(set2.sources, vec![set.len(), set.len()]);
        // Stationary linear run: all α⁺ columns agree.
        let modes = pod_matrix(&set.plus, RankSelection::Rank(1)).unwrap();
        assert!(modes.singular_values[1] <= 1e-9 * modes.singular_values[0]);
        let other = FullOrderModel::new(SolverConfig::new(8, 1.0, 1e-2), Flux::linear(1.0)).unwrap();
        let t8 = other.integrate(&InitialCondition::Sine, 0.01).unwrap();
        assert!(collect_snapshots(&[&traj, &t8], 1).is_err());
    }

    #[test]
    fn full_rank_reduction_reproduces_full_model() {
        let n = 16;
        let mut cfg = SolverConfig::new(n, 2.0, 1e-2);
        cfg.snapshot_stride = 5;
        let fom = FullOrderModel::new(cfg, Flux::burgers()).unwrap();
        let traj = fom.integrate(&InitialCondition::ShiftedSine, 0.1).unwrap();
        let id = ReducedBasisPair::new(DMatrix::identity(n, n), DMatrix::identity(n, n)).unwrap();
        let rom = ReducedModel::new(fom.clone(), id).unwrap();
        let red = rom.integrate_reduced(&InitialCondition::ShiftedSine, 0.1).unwrap();
        for (r, f) in red.states.iter().zip(&traj.states) {
            let l = rom.lift(r).unwrap();
            for (a, b) in l.alpha_plus.iter().zip(&f.alpha_plus).chain(l.alpha_minus.iter().zip(&f.alpha_minus)) {
                assert!((a - b).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn training_trajectory_lies_in_span() {
        let n = 24;
        let mut cfg = SolverConfig::new(n, 2.0, 1e-2);
        cfg.snapshot_stride = 1;
        let fom = FullOrderModel::new(cfg, Flux::burgers()).unwrap();
        let traj = fom.integrate(&InitialCondition::ShiftedSine, 0.05).unwrap();
        let set = collect_snapshots(&[&traj], 1).unwrap();
        let tol = 1e-10 * pod_matrix(&set.plus, RankSelection::Rank(1)).unwrap().singular_values[0];
        let rank = pod_matrix(&set.plus, RankSelection::Rank(1))
            .unwrap()
            .singular_values
            .iter()
            .chain(&pod_matrix(&set.minus, RankSelection::Rank(1)).unwrap().singular_values)
            .filter(|&&s| s > tol)
            .count()
            .min(n);
        let r = rank.min(set.len()).min(n);
        let basis = pod(&set, RankSelection::Rank(r)).unwrap();
        let rom = ReducedModel::new(fom, basis).unwrap();
        let red = rom.integrate_reduced(&InitialCondition::ShiftedSine, 0.05).unwrap();
        for (rs, fs) in red.states.iter().zip(&traj.states) {
            let l = rom.lift(rs).unwrap();
            let err: f64 = l
                .alpha_plus
                .iter()
                .zip(&fs.alpha_plus)
                .chain(l.alpha_minus.iter().zip(&fs.alpha_minus))
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(err <= 1e-6, "coefficient error {err:e}");
        }
    }

    #[test]
    fn linear_flux_survives_projection() {
        let mut cfg = SolverConfig::new(20, 1.0, 1e-2);
        cfg.snapshot_stride = 4;
        let fom = FullOrderModel::new(cfg, Flux::linear(1.0)).unwrap();
        let traj = fom.integrate(&InitialCondition::Sine, 0.1).unwrap();
        let basis = pod(&collect_snapshots(&[&traj], 1).unwrap(), RankSelection::Rank(2)).unwrap();
        let rom = ReducedModel::new(fom, basis).unwrap();
        let red = rom.integrate_reduced(&InitialCondition::Sine, 0.1).unwrap();
        let a0 = &red.states[0];
        for s in &red.states {
            for (a, b) in s.a_plus.iter().zip(&a0.a_plus) {
                assert!((a - b).abs() <= 1e-10);
            }
        }
        let zero = ReducedModel::new(rom.fom().clone(), ReducedBasisPair::zero(20, 1)).unwrap();
        let red = zero.integrate_reduced(&InitialCondition::Sine, 0.05).unwrap();
        assert_eq!(zero.lift(&red.final_state).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn singular_value_csv() {
        let mut b = ReducedBasisPair::zero(3, 1);
        b.sigma_plus = vec![2.0, 1.0];
        b.sigma_minus = vec![0.0, 0.0];
        let mut buf = Vec::new();
        b.write_singular_values_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "index,sigma_plus,sigma_plus_normalized,sigma_minus,sigma_minus_normalized");
        assert!(lines[2].starts_with("2,1.0000000000000000e0,5.0000000000000000e-1,0"));
    }
}
