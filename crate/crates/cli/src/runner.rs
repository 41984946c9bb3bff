//! The experiment subcommands.

use std::io;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use shiftmor::basis::BasisFamily;
use shiftmor::fom::{step_count, CoefficientState, FullOrderModel, SourceTransport, Trajectory, TransportState};
use shiftmor::reference::{
    error_norms, exact_linear_advection, exact_riccati_grid, fv_relaxation_solve, jump_magnitude, locate_shock,
    BurgersStep, ErrorNorms, GridFunction,
};
use shiftmor::rom::{
    collect_snapshots, integrate_transport_reduced, normalized, pod, pod_matrix, transport_snapshots, RankSelection,
    ReducedBasisPair, ReducedModel, ReducedState, SnapshotSet,
};

use crate::config::{self, BasisKind, ConfigError, ExperimentConfig, FluxKind, InitialSpec, Model};
use crate::output::{read_matrix, time_tag, write_matrix, OutputDir, Report};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("solver failure: {0}")]
    Solver(#[from] shiftmor::Error),
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
}

impl RunError {
    /// 2 for configuration problems, 3 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Solver(_) | Self::Io(_) => 3,
        }
    }
}

type Result<T> = std::result::Result<T, RunError>;

/// Minimum drop between neighbouring samples that counts as a shock.
const SHOCK_THRESHOLD: f64 = 0.05;
/// Distance from the shock at which jump sizes are read off.
const JUMP_OFFSET: f64 = 0.05;

fn mismatch(field: &'static str, message: String) -> RunError {
    RunError::Config(ConfigError::Invalid { field, message })
}

fn require_relaxation(cfg: &ExperimentConfig, what: &str) -> Result<()> {
    if cfg.model == Model::Riccati {
        return Err(mismatch("model", format!("{what} needs the relaxation model")));
    }
    Ok(())
}

/// Step index of each requested output time.
fn output_steps(cfg: &ExperimentConfig) -> Result<Vec<(f64, usize)>> {
    let total = step_count(cfg.t_end, cfg.dt)?;
    Ok(cfg.times.iter().map(|&t| (t, ((t / cfg.dt).round() as usize).min(total))).collect())
}

struct FullRun {
    fom: FullOrderModel,
    traj: Trajectory,
    outputs: Vec<(f64, CoefficientState)>,
}

fn run_relaxation(cfg: &ExperimentConfig) -> Result<FullRun> {
    let fom = FullOrderModel::new(cfg.solver_config(), cfg.flux())?;
    let start = fom.project_initial(&cfg.initial())?;
    let wanted = output_steps(cfg)?;
    let steps = step_count(cfg.t_end, cfg.dt)?;
    let stride = cfg.snapshot_stride;
    let mut states = Vec::new();
    let mut outputs = Vec::new();
    let final_state = fom.march(start, steps, |k, s| {
        if k % stride == 0 {
            states.push(s.clone());
        }
        for &(t, _) in wanted.iter().filter(|w| w.1 == k) {
            outputs.push((t, s.clone()));
        }
        true
    })?;
    let traj = Trajectory { dt: cfg.dt, stride, states, final_state, steps };
    Ok(FullRun { fom, traj, outputs })
}

fn riccati_model(cfg: &ExperimentConfig) -> Result<SourceTransport> {
    let p = cfg.riccati().expect("riccati config carries gamma and delta");
    Ok(SourceTransport::new(BasisFamily::hat(cfg.n)?, cfg.lambda, p.gamma, p.delta)?)
}

fn run_riccati(cfg: &ExperimentConfig, model: &SourceTransport) -> Result<Vec<(f64, TransportState)>> {
    let wanted = output_steps(cfg)?;
    let mut s = model.project_initial(&cfg.initial())?;
    let mut out: Vec<(f64, TransportState)> = wanted.iter().filter(|w| w.1 == 0).map(|w| (w.0, s.clone())).collect();
    for k in 1..=step_count(cfg.t_end, cfg.dt)? {
        s = model.step(&s, cfg.dt)?;
        out.extend(wanted.iter().filter(|w| w.1 == k).map(|w| (w.0, s.clone())));
    }
    Ok(out)
}

fn exact_solution(cfg: &ExperimentConfig, t: f64, cells: usize) -> Option<GridFunction> {
    match (cfg.model, cfg.flux, cfg.initial_condition) {
        (Model::Riccati, _, _) => exact_riccati_grid(&cfg.riccati()?, t, cells).ok(),
        (_, Some(FluxKind::Linear), _) => Some(exact_linear_advection(&cfg.initial(), cfg.speed, t, cells)),
        (_, Some(FluxKind::Burgers), InitialSpec::Step { a }) => BurgersStep::new(a).ok()?.sample(t, cells).ok(),
        _ => None,
    }
}

fn add_norms(report: &mut Report, label: &str, e: ErrorNorms) {
    report.num(format!("{label}_l1"), e.l1);
    report.num(format!("{label}_l2"), e.l2);
    report.num(format!("{label}_linf"), e.linf);
}

fn finish(out: &OutputDir, report: &Report, cfg: &ExperimentConfig) -> Result<()> {
    out.text("report.txt", &report.render(&cfg.to_toml()))?;
    Ok(())
}

pub fn run_full(cfg: &ExperimentConfig) -> Result<Report> {
    let out = OutputDir::create(&cfg.output_dir)?;
    let mut report = Report::new(format!("run-full {}", cfg.name));
    let clock = Instant::now();

    if cfg.model == Model::Riccati {
        let model = riccati_model(cfg)?;
        let outputs = run_riccati(cfg, &model)?;
        report.time("full", clock.elapsed().as_secs_f64());
        for (t, s) in &outputs {
            let u = model.sample(s, cfg.samples);
            out.grid(&format!("solution_full{}.csv", time_tag(*t)), &u)?;
            if let Some(exact) = exact_solution(cfg, s.t, cfg.samples) {
                add_norms(&mut report, &format!("full_vs_exact{}", time_tag(*t)), error_norms(&u, &exact));
            }
        }
        finish(&out, &report, cfg)?;
        return Ok(report);
    }

    let run = run_relaxation(cfg)?;
    report.time("full", clock.elapsed().as_secs_f64());
    report.add("steps", run.traj.steps);
    for (t, s) in &run.outputs {
        let u = run.fom.sample_u(s, cfg.samples);
        out.grid(&format!("solution_full{}.csv", time_tag(*t)), &u)?;
        if let Some(exact) = exact_solution(cfg, s.t, cfg.samples) {
            add_norms(&mut report, &format!("full_vs_exact{}", time_tag(*t)), error_norms(&u, &exact));
        }
    }

    let mut mass_states: Vec<&CoefficientState> = run.traj.states.iter().collect();
    if mass_states.last().map(|s| s.t) != Some(run.traj.final_state.t) {
        mass_states.push(&run.traj.final_state);
    }
    let rows: Vec<Vec<f64>> = mass_states.iter().map(|s| vec![s.t, run.fom.total_mass(s)]).collect();
    out.table("mass.csv", "t,mass", &rows)?;
    let m0 = rows[0][1];
    let drift = rows.iter().map(|r| (r[1] - m0).abs()).fold(0.0, f64::max);
    report.num("mass_drift", drift);

    if let (Some(FluxKind::Burgers), InitialSpec::Step { a }) = (cfg.flux, cfg.initial_condition) {
        shock_track(cfg, &run, a, &out, &mut report)?;
    }
    finish(&out, &report, cfg)?;
    Ok(report)
}

/// Shock position per recorded state and its least-squares speed.
fn shock_track(cfg: &ExperimentConfig, run: &FullRun, a: f64, out: &OutputDir, report: &mut Report) -> Result<()> {
    let threshold = 0.1 * a.abs();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for s in run.traj.states.iter().filter(|s| s.t >= cfg.t_end / 6.0) {
        if let Ok(loc) = locate_shock(&run.fom.sample_u(s, cfg.samples), threshold) {
            // Unwrap across the periodic boundary.
            let x = match rows.last() {
                Some(r) => r[1] + (loc.x - r[1] + 1.0).rem_euclid(2.0) - 1.0,
                None => loc.x,
            };
            rows.push(vec![s.t, x]);
        }
    }
    out.table("shock_track.csv", "t,x_shock", &rows)?;
    if rows.len() >= 2 {
        let n = rows.len() as f64;
        let tb = rows.iter().map(|r| r[0]).sum::<f64>() / n;
        let xb = rows.iter().map(|r| r[1]).sum::<f64>() / n;
        let sxx: f64 = rows.iter().map(|r| (r[0] - tb).powi(2)).sum();
        let sxy: f64 = rows.iter().map(|r| (r[0] - tb) * (r[1] - xb)).sum();
        report.num("shock_speed", sxy / sxx);
        report.num("shock_speed_rankine_hugoniot", BurgersStep::new(a)?.shock_speed());
    }
    Ok(())
}

/// Basis produced by training.
pub enum TrainedBasis {
    Pair(ReducedBasisPair),
    Single(DMatrix<f64>),
}

fn decay_at(sv: &[f64], k: usize) -> Option<f64> {
    normalized(sv).get(k - 1).copied()
}

/// POD of the configured training runs; writes bases and singular values.
pub fn train(cfg: &ExperimentConfig, out: &OutputDir, report: &mut Report) -> Result<TrainedBasis> {
    let rank = cfg.require_rank()?;
    if cfg.model == Model::Riccati {
        let model = riccati_model(cfg)?;
        let snaps = transport_snapshots(&model, &cfg.initial(), cfg.t_end, cfg.dt, cfg.snapshot_stride)?;
        let modes = pod_matrix(&snaps, RankSelection::Rank(rank))?;
        let norm = normalized(&modes.singular_values);
        let rows: Vec<Vec<f64>> =
            modes.singular_values.iter().zip(&norm).enumerate().map(|(k, (s, n))| vec![(k + 1) as f64, *s, *n]).collect();
        out.table("singular_values.csv", "index,sigma,sigma_normalized", &rows)?;
        out.with_writer("basis.txt", |w| write_matrix(w, &modes.basis))?;
        report.add("snapshots", snaps.ncols());
        return Ok(TrainedBasis::Single(modes.basis));
    }

    let names = if cfg.training.is_empty() { vec![cfg.name.clone()] } else { cfg.training.clone() };
    let mut runs = Vec::new();
    for name in &names {
        let tcfg = if *name == cfg.name { cfg.clone() } else { config::load_preset(name)? };
        if tcfg.n != cfg.n {
            return Err(mismatch("training", format!("run {name} has n = {} but this experiment has n = {}", tcfg.n, cfg.n)));
        }
        let clock = Instant::now();
        let run = run_relaxation(&tcfg)?;
        report.time(format!("training {name}"), clock.elapsed().as_secs_f64());
        runs.push((name.clone(), run.traj));
    }

    if runs.len() > 1 {
        for (name, traj) in &runs {
            let per = pod(&collect_snapshots(&[traj], 1)?, RankSelection::Rank(1))?;
            out.with_writer(&format!("singular_values_{name}.csv"), |w| per.write_singular_values_csv(w))?;
            if let (Some(p), Some(m)) = (decay_at(&per.sigma_plus, 40), decay_at(&per.sigma_minus, 40)) {
                report.add(format!("sigma40_over_sigma1_{name}"), format!("{p:.6e} / {m:.6e}"));
            }
        }
    }
    let trajs: Vec<&Trajectory> = runs.iter().map(|r| &r.1).collect();
    let snaps: SnapshotSet = collect_snapshots(&trajs, 1)?;
    let clock = Instant::now();
    let basis = pod(&snaps, RankSelection::Rank(rank))?;
    report.time("pod", clock.elapsed().as_secs_f64());
    out.with_writer("singular_values.csv", |w| basis.write_singular_values_csv(w))?;
    out.with_writer("basis_plus.txt", |w| write_matrix(w, basis.v_plus()))?;
    out.with_writer("basis_minus.txt", |w| write_matrix(w, basis.v_minus()))?;
    report.add("training", names.join(", "));
    report.add("snapshots", snaps.len());
    report.add("rank", rank);
    if let (Some(p), Some(m)) = (decay_at(&basis.sigma_plus, rank), decay_at(&basis.sigma_minus, rank)) {
        report.add("sigma_r_over_sigma1", format!("{p:.6e} / {m:.6e}"));
    }
    report.num("orthonormality_defect", basis.orthonormality_defect());
    Ok(TrainedBasis::Pair(basis))
}

pub fn run_pod(cfg: &ExperimentConfig) -> Result<Report> {
    let out = OutputDir::create(&cfg.output_dir)?;
    let mut report = Report::new(format!("run-pod {}", cfg.name));
    train(cfg, &out, &mut report)?;
    finish(&out, &report, cfg)?;
    Ok(report)
}

fn read_basis(path: &Path) -> Result<DMatrix<f64>> {
    read_matrix(path).map_err(|e| mismatch("basis", format!("{}: {e}", path.display())))
}

fn load_pair(dir: &Path, n: usize, rank: Option<usize>) -> Result<ReducedBasisPair> {
    let read = |file: &str| -> Result<DMatrix<f64>> {
        let m = read_basis(&dir.join(file))?;
        if m.nrows() != n {
            return Err(mismatch("basis", format!("{file} has {} rows but n = {n}", m.nrows())));
        }
        Ok(match rank {
            Some(r) if r > m.ncols() => {
                return Err(mismatch("rank", format!("{r} exceeds the {} columns of {file}", m.ncols())))
            }
            Some(r) => m.columns(0, r).into_owned(),
            None => m,
        })
    };
    Ok(ReducedBasisPair::new(read("basis_plus.txt")?, read("basis_minus.txt")?)?)
}

fn load_single(dir: &Path, n: usize, rank: Option<usize>) -> Result<DMatrix<f64>> {
    let m = read_basis(&dir.join("basis.txt"))?;
    if m.nrows() != n {
        return Err(mismatch("basis", format!("basis.txt has {} rows but n = {n}", m.nrows())));
    }
    match rank {
        Some(r) if r > m.ncols() => Err(mismatch("rank", format!("{r} exceeds the {} basis columns", m.ncols()))),
        Some(r) => Ok(m.columns(0, r).into_owned()),
        None => Ok(m),
    }
}

fn obtain_basis(cfg: &ExperimentConfig, basis_dir: Option<&Path>, out: &OutputDir, report: &mut Report) -> Result<TrainedBasis> {
    if cfg.basis == BasisKind::Zero {
        if cfg.model == Model::Riccati {
            return Ok(TrainedBasis::Single(DMatrix::zeros(cfg.n, cfg.require_rank()?)));
        }
        return Ok(TrainedBasis::Pair(ReducedBasisPair::zero(cfg.n, cfg.require_rank()?)));
    }
    match (basis_dir, cfg.model) {
        (Some(dir), Model::Riccati) => Ok(TrainedBasis::Single(load_single(dir, cfg.n, cfg.rank)?)),
        (Some(dir), Model::Relaxation) => Ok(TrainedBasis::Pair(load_pair(dir, cfg.n, cfg.rank)?)),
        (None, _) => train(cfg, out, report),
    }
}

/// Reduced states at the requested output times.
fn run_reduced_relaxation(cfg: &ExperimentConfig, rom: &ReducedModel) -> Result<Vec<(f64, ReducedState)>> {
    let wanted = output_steps(cfg)?;
    let mut s = rom.initial_state(&cfg.initial())?;
    let mut out: Vec<(f64, ReducedState)> = wanted.iter().filter(|w| w.1 == 0).map(|w| (w.0, s.clone())).collect();
    for k in 1..=step_count(cfg.t_end, cfg.dt)? {
        s = rom.step_reduced(&s)?;
        if s.a_plus.iter().chain(&s.a_minus).any(|x| !x.is_finite()) {
            return Err(shiftmor::Error::Blowup { step: k, t: s.t, min_sigma: f64::NAN }.into());
        }
        out.extend(wanted.iter().filter(|w| w.1 == k).map(|w| (w.0, s.clone())));
    }
    Ok(out)
}

fn flag_zero(report: &mut Report, u: &GridFunction) {
    let peak = u.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak < 1e-12 {
        log::warn!("reduced solution is identically zero");
        report.add("zero_solution", true);
    }
}

fn shock_gap(report: &mut Report, label: &str, u: &GridFunction, reference: &GridFunction, dx: f64) {
    if let (Ok(a), Ok(b)) = (locate_shock(u, SHOCK_THRESHOLD), locate_shock(reference, SHOCK_THRESHOLD)) {
        let gap = (a.x - b.x + 1.0).rem_euclid(2.0) - 1.0;
        report.num(format!("shock_{label}"), a.x);
        report.num(format!("shock_gap_{label}_in_dx"), gap.abs() / dx);
    }
}

pub fn run_reduced(cfg: &ExperimentConfig, basis_dir: Option<&Path>) -> Result<Report> {
    let out = OutputDir::create(&cfg.output_dir)?;
    let mut report = Report::new(format!("run-reduced {}", cfg.name));
    let basis = obtain_basis(cfg, basis_dir, &out, &mut report)?;
    match basis {
        TrainedBasis::Single(v) => reduced_riccati(cfg, &v, &out, &mut report)?,
        TrainedBasis::Pair(pair) => {
            require_relaxation(cfg, "a basis pair")?;
            report.add("rank", pair.rank());
            let fom = FullOrderModel::new(cfg.solver_config(), cfg.flux())?;
            let rom = ReducedModel::new(fom.clone(), pair)?;
            let clock = Instant::now();
            let states = run_reduced_relaxation(cfg, &rom)?;
            report.time("reduced", clock.elapsed().as_secs_f64());
            for (t, s) in &states {
                let u = fom.sample_u(&rom.lift(s)?, cfg.samples);
                out.grid(&format!("solution_reduced{}.csv", time_tag(*t)), &u)?;
            }
            let final_red = rom.lift(&rom_final(cfg, &rom, &states)?)?;
            compare(cfg, &fom, Some(&final_red), &out, &mut report)?;
        }
    }
    finish(&out, &report, cfg)?;
    Ok(report)
}

fn rom_final(cfg: &ExperimentConfig, rom: &ReducedModel, states: &[(f64, ReducedState)]) -> Result<ReducedState> {
    match states.iter().find(|(t, _)| *t == cfg.t_end) {
        Some((_, s)) => Ok(s.clone()),
        None => Ok(rom.integrate_reduced(&cfg.initial(), cfg.t_end)?.final_state),
    }
}

fn reduced_riccati(cfg: &ExperimentConfig, v: &DMatrix<f64>, out: &OutputDir, report: &mut Report) -> Result<()> {
    let model = riccati_model(cfg)?;
    report.add("rank", v.ncols());
    let w0 = cfg.initial();
    let mut final_red = None;
    for &t in &cfg.times {
        let s = integrate_transport_reduced(&model, v, &w0, t, cfg.dt)?;
        let u = model.sample(&s, cfg.samples);
        out.grid(&format!("solution_reduced{}.csv", time_tag(t)), &u)?;
        if t == cfg.t_end {
            final_red = Some(u);
        }
    }
    let red = match final_red {
        Some(u) => u,
        None => model.sample(&integrate_transport_reduced(&model, v, &w0, cfg.t_end, cfg.dt)?, cfg.samples),
    };
    flag_zero(report, &red);
    let full = model.sample(&model.integrate(&w0, cfg.t_end, cfg.dt)?, cfg.samples);
    add_norms(report, "reduced_vs_full", error_norms(&red, &full));
    let mut cols = vec![("u_full", &full), ("u_reduced", &red)];
    let exact = exact_solution(cfg, cfg.t_end, cfg.samples);
    if let Some(e) = &exact {
        add_norms(report, "full_vs_exact", error_norms(&full, e));
        add_norms(report, "reduced_vs_exact", error_norms(&red, e));
        cols.push(("u_exact", e));
    }
    out.columns("compare.csv", &full, &cols)?;
    Ok(())
}

/// Full run, finite-volume reference and optional reduced state joined on the FV grid.
fn compare(
    cfg: &ExperimentConfig,
    fom: &FullOrderModel,
    reduced: Option<&CoefficientState>,
    out: &OutputDir,
    report: &mut Report,
) -> Result<()> {
    let cells = cfg.fv_cells;
    let clock = Instant::now();
    let full_traj = fom.integrate(&cfg.initial(), cfg.t_end)?;
    report.time("full", clock.elapsed().as_secs_f64());
    let clock = Instant::now();
    let fv = fv_relaxation_solve(&cfg.initial(), &cfg.flux(), &cfg.fv_config(), cfg.t_end)?;
    report.time("finite volume", clock.elapsed().as_secs_f64());
    let fv_u = fv.final_frame();
    let full = fom.sample_u(&full_traj.final_state, cells);
    let dx = fom.family().dx();

    let mut cols: Vec<(&str, &GridFunction)> = vec![("u_full", &full)];
    add_norms(report, "full_vs_fv", error_norms(&full, fv_u));
    let red = reduced.map(|s| fom.sample_u(s, cells));
    if let Some(r) = &red {
        cols.push(("u_reduced", r));
        flag_zero(report, r);
        add_norms(report, "reduced_vs_fv", error_norms(r, fv_u));
        add_norms(report, "reduced_vs_full", error_norms(r, &full));
        shock_gap(report, "reduced", r, fv_u, dx);
    }
    cols.push(("u_fv", fv_u));
    let exact = exact_solution(cfg, full_traj.final_state.t, cells);
    if let Some(e) = &exact {
        add_norms(report, "full_vs_exact", error_norms(&full, e));
        add_norms(report, "fv_vs_exact", error_norms(fv_u, e));
        cols.push(("u_exact", e));
    }
    if let Ok(loc) = locate_shock(fv_u, SHOCK_THRESHOLD) {
        report.num("shock_fv", loc.x);
    }
    shock_gap(report, "full", &full, fv_u, dx);
    if let (Ok(a), Ok(b)) = (locate_shock(&full, SHOCK_THRESHOLD), locate_shock(fv_u, SHOCK_THRESHOLD)) {
        report.num("jump_full", jump_magnitude(&full, a.x, JUMP_OFFSET));
        report.num("jump_fv", jump_magnitude(fv_u, b.x, JUMP_OFFSET));
    }
    out.columns("compare.csv", &full, &cols)?;
    Ok(())
}

pub fn compare_fv(cfg: &ExperimentConfig, basis_dir: Option<&Path>) -> Result<Report> {
    require_relaxation(cfg, "compare-fv")?;
    let out = OutputDir::create(&cfg.output_dir)?;
    let mut report = Report::new(format!("compare-fv {}", cfg.name));
    let fom = FullOrderModel::new(cfg.solver_config(), cfg.flux())?;
    let reduced = match cfg.rank {
        Some(_) => match obtain_basis(cfg, basis_dir, &out, &mut report)? {
            TrainedBasis::Pair(pair) => {
                let rom = ReducedModel::new(fom.clone(), pair)?;
                let clock = Instant::now();
                let red = rom.integrate_reduced(&cfg.initial(), cfg.t_end)?;
                report.time("reduced", clock.elapsed().as_secs_f64());
                Some(rom.lift(&red.final_state)?)
            }
            TrainedBasis::Single(_) => unreachable!("relaxation training yields a basis pair"),
        },
        None => None,
    };
    compare(cfg, &fom, reduced.as_ref(), &out, &mut report)?;
    finish(&out, &report, cfg)?;
    Ok(report)
}
