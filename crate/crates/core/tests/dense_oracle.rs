mod common;

use common::{max_diff, DenseOracle};
use shiftmor::fom::{FullOrderModel, Scheme, SolverConfig};
use shiftmor::profiles::{Flux, InitialCondition};

fn config(n: usize, scheme: Scheme) -> SolverConfig {
    let mut cfg = SolverConfig::new(n, 2.0, 1e-2);
    let dx = 2.0 / n as f64;
    // Keep the corrected block invertible at every time (see the FOM setup warning).
    cfg.rho = 4.0 * dx.powi(3);
    cfg.scheme = scheme;
    cfg
}

#[test]
fn burgers_single_step_matches_dense_block_solve() {
    for scheme in [Scheme::SemiImplicit, Scheme::Explicit] {
        let cfg = config(4, scheme);
        let fom = FullOrderModel::new(cfg.clone(), Flux::burgers()).unwrap();
        let oracle = DenseOracle::new(cfg, Flux::burgers());
        let s0 = fom.project_initial(&InitialCondition::ShiftedSine).unwrap();
        let d = max_diff(&fom.step(&s0).unwrap(), &oracle.step(&s0, scheme));
        assert!(d <= 1e-10, "{scheme:?}: {d:e}");
    }
}

#[test]
fn null_pair_matches_dense_svd() {
    for n in [4usize, 8] {
        let cfg = config(n, Scheme::SemiImplicit);
        let fom = FullOrderModel::new(cfg.clone(), Flux::burgers()).unwrap();
        let oracle = DenseOracle::new(cfg, Flux::burgers());
        let pair = fom.null_pair();
        for k in 0..n {
            assert!((pair.e[k] * pair.f[k] - oracle.e[k] * oracle.f[k]).abs() <= 1e-12);
        }
    }
}

#[test]
fn steps_across_singular_times_match_oracle() {
    let cfg = config(8, Scheme::SemiImplicit);
    let fom = FullOrderModel::new(cfg.clone(), Flux::burgers()).unwrap();
    let oracle = DenseOracle::new(cfg, Flux::burgers());
    let mut s = fom.project_initial(&InitialCondition::ShiftedSine).unwrap();
    // t* = 1/32; 20 steps of 5e-3 cross the first three singular times.
    for _ in 0..20 {
        let next = fom.step(&s).unwrap();
        let d = max_diff(&next, &oracle.step(&s, Scheme::SemiImplicit));
        assert!(d <= 1e-10, "t = {}: {d:e}", s.t);
        s = next;
    }
}
