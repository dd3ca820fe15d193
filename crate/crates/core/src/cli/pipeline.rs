//! Run pipelines shared by the command line, the C interface and the acceptance tests.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{RunConfig, Source};
use crate::discretization::norms::velocity_norm;
use crate::discretization::NormKind;
use crate::eigenbasis::{solve_stokes_eigen, EigenBasis};
use crate::error::{Error, Result};
use crate::fullspace::{space_time_l2_error, trapezoid, FullSpaceSolver};
use crate::galerkin::{GalerkinState, GalerkinSystem, IntegrationError, Problem, Trajectory};
use crate::monitors::{contraction, ledger, ContractionReport, EnergyLedger};

/// Worker count for independent runs, from `RECIRC_THREADS` (default 1).
pub fn thread_cap() -> usize {
    std::env::var("RECIRC_THREADS").ok().and_then(|v| v.parse().ok()).filter(|n| *n >= 1).unwrap_or(1)
}

/// Maps `f` over `items` with at most [`thread_cap`] scoped workers, keeping order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = thread_cap().min(items.len()).max(1);
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut out: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let slots = std::sync::Mutex::new(&mut out);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("result slots")[i] = Some(r);
            });
        }
    });
    out.into_iter().map(|r| r.expect("every item processed")).collect()
}

/// A configured problem with its basis and initial velocity.
pub struct Simulation {
    pub config: RunConfig,
    pub problem: Problem,
    pub basis: EigenBasis,
    pub v0: Vec<f64>,
}

impl Simulation {
    pub fn prepare(config: &RunConfig) -> Result<Self> {
        Self::prepare_at(config, config.mesh.nx, config.mesh.ny, config.galerkin.modes)
    }

    /// Same config on another mesh and mode count.
    pub fn prepare_at(config: &RunConfig, nx: usize, ny: usize, modes: usize) -> Result<Self> {
        let problem = config.build_problem_at(nx, ny)?;
        let basis = solve_stokes_eigen(&problem.space, modes, config.seed)?;
        let v0 = config.initial_velocity(&problem.space)?;
        Ok(Self { config: config.clone(), problem, basis, v0 })
    }

    pub fn system(&self) -> GalerkinSystem<'_> {
        GalerkinSystem::new(&self.problem, &self.basis)
    }

    pub fn initial_state(&self) -> Result<GalerkinState> {
        self.system().initial_state(&self.v0)
    }

    pub fn integrate_from(&self, state: GalerkinState) -> std::result::Result<Trajectory, IntegrationError> {
        let t = &self.config.time;
        self.system().integrate(state, t.end, t.dt, t.scheme)
    }

    pub fn integrate_with_dt(&self, dt: f64) -> std::result::Result<Trajectory, IntegrationError> {
        let t = &self.config.time;
        let state = self.initial_state().map_err(|error| IntegrationError { error, partial: Trajectory::default() })?;
        self.system().integrate(state, t.end, dt, t.scheme)
    }

    pub fn integrate(&self) -> std::result::Result<Trajectory, IntegrationError> {
        self.integrate_with_dt(self.config.time.dt)
    }

    /// Reconstructed velocity at saved index `i`.
    pub fn velocity(&self, traj: &Trajectory, i: usize) -> Result<Vec<f64>> {
        self.system().velocity(&GalerkinState { t: traj.times[i], z: traj.states[i].clone() })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub version: &'static str,
    pub config_hash: String,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub modes: usize,
    pub steps: usize,
    pub final_time: f64,
    pub final_velocity_l2: f64,
    pub max_velocity_l2: f64,
    pub max_divergence: f64,
    pub lambda_1: f64,
    pub max_newton_iterations: usize,
    pub c1: Option<f64>,
    pub ledger_lhs: Option<f64>,
    pub ledger_rhs: Option<f64>,
    pub wall_time_s: f64,
}

pub struct SimulationOutcome {
    pub trajectory: Trajectory,
    pub ledger: Option<EnergyLedger>,
    pub velocity_l2: Vec<f64>,
    pub summary: RunSummary,
}

/// Integrates, reconstructs and builds the ledger. A failed step still yields the partial
/// trajectory with `status = "failed"`.
pub fn simulate(sim: &Simulation) -> Result<SimulationOutcome> {
    let start = Instant::now();
    let (trajectory, failure) = match sim.integrate() {
        Ok(t) => (t, None),
        Err(e) => (e.partial, Some(e.error)),
    };
    let space = &sim.problem.space;
    let mut velocity_l2 = Vec::with_capacity(trajectory.len());
    let mut max_div: f64 = 0.0;
    for i in 0..trajectory.len() {
        let v = sim.velocity(&trajectory, i)?;
        velocity_l2.push(velocity_norm(space, &v, NormKind::L2));
        max_div = max_div.max(crate::linalg::norm2(&space.ops().div.mul_vec(&v)));
    }
    let ledger = if failure.is_none() && trajectory.len() >= 2 {
        Some(ledger(&sim.system(), &trajectory, &sim.v0)?)
    } else {
        None
    };
    let summary = RunSummary {
        version: crate::VERSION,
        config_hash: sim.config.hash(),
        status: if failure.is_some() { "failed" } else { "ok" },
        error: failure.as_ref().map(|e| e.to_string()),
        modes: sim.basis.len(),
        steps: trajectory.diagnostics.len(),
        final_time: trajectory.times.last().copied().unwrap_or(0.0),
        final_velocity_l2: velocity_l2.last().copied().unwrap_or(0.0),
        max_velocity_l2: velocity_l2.iter().copied().fold(0.0, f64::max),
        max_divergence: max_div,
        lambda_1: sim.basis.values()[0],
        max_newton_iterations: trajectory.diagnostics.iter().map(|d| d.iterations).max().unwrap_or(0),
        c1: ledger.as_ref().and_then(|l| l.c1),
        ledger_lhs: ledger.as_ref().map(|l| l.lhs),
        ledger_rhs: ledger.as_ref().map(|l| l.rhs),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok(SimulationOutcome { trajectory, ledger, velocity_l2, summary })
}

fn integration(e: IntegrationError) -> Error {
    e.error
}

/// `‖v_a − v_b‖_{L²(0,T;L²)}` for two runs of one problem whose bases are nested (one is a
/// truncation of the other), sampling `b` at the times of `a`.
pub fn coefficient_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    let stride = (b.len() - 1) / (a.len() - 1).max(1);
    if stride == 0 || (a.len() - 1) * stride != b.len() - 1 {
        return Err(Error::InvalidArgument("time grids are not nested".into()));
    }
    let mut sq = Vec::with_capacity(a.len());
    for (i, za) in a.states.iter().enumerate() {
        let zb = &b.states[i * stride];
        let n = za.len().max(zb.len());
        let d: f64 =
            (0..n).map(|k| za.get(k).copied().unwrap_or(0.0) - zb.get(k).copied().unwrap_or(0.0)).map(|x| x * x).sum();
        sq.push(d);
    }
    Ok(trapezoid(&a.times, &sq).sqrt())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ModesRow {
    pub modes: usize,
    pub error: f64,
}

/// Error of truncated runs against a run with `reference` modes. The truncated bases are
/// the leading modes of the reference basis.
pub fn study_modes(config: &RunConfig, modes: &[usize], reference: usize) -> Result<Vec<ModesRow>> {
    let sim = Simulation::prepare_at(config, config.mesh.nx, config.mesh.ny, reference)?;
    let reference_run = sim.integrate().map_err(integration)?;
    let bases: Vec<EigenBasis> = modes.iter().map(|&n| sim.basis.truncated(n)).collect::<Result<_>>()?;
    let runs = parallel_map(&bases, |basis| -> Result<Trajectory> {
        let sys = GalerkinSystem::new(&sim.problem, basis);
        let t = &config.time;
        let state = sys.initial_state(&sim.v0)?;
        sys.integrate(state, t.end, t.dt, t.scheme).map_err(integration)
    });
    modes
        .iter()
        .zip(runs)
        .map(|(&n, run)| Ok(ModesRow { modes: n, error: coefficient_distance(&run?, &reference_run)? }))
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DtRow {
    pub dt: f64,
    /// `‖v_dt − v_{dt/2}‖_{L²(0,T;L²)}`
    pub difference: f64,
    /// Ratio to the next finer difference.
    pub ratio: Option<f64>,
}

/// Self-convergence under step halving: runs `dt, dt/2, …, dt/2^levels`.
pub fn study_dt(config: &RunConfig, levels: usize) -> Result<Vec<DtRow>> {
    let sim = Simulation::prepare(config)?;
    let dts: Vec<f64> = (0..=levels).map(|k| config.time.dt / (1u64 << k) as f64).collect();
    let runs = parallel_map(&dts, |&dt| sim.integrate_with_dt(dt).map_err(integration));
    let runs: Vec<Trajectory> = runs.into_iter().collect::<Result<_>>()?;
    let diffs: Vec<f64> = runs.windows(2).map(|w| coefficient_distance(&w[0], &w[1])).collect::<Result<_>>()?;
    Ok(diffs
        .iter()
        .enumerate()
        .map(|(k, &d)| DtRow { dt: dts[k], difference: d, ratio: diffs.get(k + 1).map(|n| d / n) })
        .collect())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeshRow {
    pub n: usize,
    pub h: f64,
    pub lambda_1: f64,
    /// Space-time L² error against the manufactured solution, when there is one.
    pub error: Option<f64>,
    pub order: Option<f64>,
    /// Final reconstructed velocity norm of the reduced run.
    pub final_velocity_l2: Option<f64>,
    pub c1: Option<f64>,
}

/// Mesh sweep. With a manufactured source the full-space solver is compared against the
/// exact solution; otherwise the reduced run is repeated per mesh.
pub fn study_mesh(config: &RunConfig, sizes: &[usize]) -> Result<Vec<MeshRow>> {
    let manufactured = config.manufactured()?;
    let ratio = config.mesh.ny as f64 / config.mesh.nx as f64;
    let rows = parallel_map(sizes, |&n| -> Result<MeshRow> {
        let ny = ((n as f64 * ratio).round() as usize).max(1);
        let h = config.domain.lx / n as f64;
        if let Some(m) = manufactured {
            let problem = config.build_problem_at(n, ny)?;
            let lambda_1 = solve_stokes_eigen(&problem.space, 1, config.seed)?.values()[0];
            let z0 = vec![0.0; problem.space.n_velocity()];
            let tr = FullSpaceSolver::new(&problem).integrate(&z0, config.time.end, config.time.dt)?;
            let error = space_time_l2_error(&problem, &tr, |x, t| m.velocity(x, t))?;
            return Ok(MeshRow { n, h, lambda_1, error: Some(error), order: None, final_velocity_l2: None, c1: None });
        }
        let sim = Simulation::prepare_at(config, n, ny, config.galerkin.modes)?;
        let out = simulate(&sim)?;
        if let Some(e) = out.summary.error {
            return Err(Error::Solver(e));
        }
        Ok(MeshRow {
            n,
            h,
            lambda_1: sim.basis.values()[0],
            error: None,
            order: None,
            final_velocity_l2: Some(out.summary.final_velocity_l2),
            c1: out.summary.c1,
        })
    });
    let mut rows: Vec<MeshRow> = rows.into_iter().collect::<Result<_>>()?;
    for i in 1..rows.len() {
        if let (Some(a), Some(b)) = (rows[i - 1].error, rows[i].error) {
            rows[i].order = Some((a / b).ln() / (rows[i - 1].h / rows[i].h).ln());
        }
    }
    Ok(rows)
}

/// Random coefficient direction of unit length.
pub fn perturbation(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = crate::linalg::norm2(&d);
    d.into_iter().map(|x| x / n).collect()
}

/// Runs the base state and a copy perturbed by `amplitude` along a seeded direction.
pub fn perturbed_pair(sim: &Simulation, amplitude: f64, seed: u64) -> Result<(Trajectory, Trajectory)> {
    let base = sim.initial_state()?;
    let mut other = base.clone();
    for (z, d) in other.z.iter_mut().zip(perturbation(base.z.len(), seed)) {
        *z += amplitude * d;
    }
    let pair = parallel_map(&[base, other], |s| sim.integrate_from(s.clone()).map_err(integration));
    let mut it = pair.into_iter();
    Ok((it.next().expect("two runs")?, it.next().expect("two runs")?))
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionSummary {
    pub fitted: ContractionReport,
    pub check: ContractionReport,
    pub c2: f64,
    /// Gronwall bound of the check pair with the fitted constant and 5% slack.
    pub bound_holds: bool,
}

pub const CONTRACTION_SLACK: f64 = 0.05;

/// Fits `C₂` on a pair perturbed by `fit_amplitude` and checks it on an independent pair
/// perturbed by `check_amplitude`.
pub fn contract(sim: &Simulation, fit_amplitude: f64, check_amplitude: f64) -> Result<ContractionSummary> {
    let seed = sim.config.seed;
    let (a1, a2) = perturbed_pair(sim, fit_amplitude, seed.wrapping_add(1))?;
    let (b1, b2) = perturbed_pair(sim, check_amplitude, seed.wrapping_add(2))?;
    let sys = sim.system();
    let fitted = contraction(&sys, &a1, &a2)?;
    let check = contraction(&sys, &b1, &b2)?;
    let c2 = fitted.c2;
    let bound_holds = check.bound_holds(c2, CONTRACTION_SLACK);
    Ok(ContractionSummary { fitted, check, c2, bound_holds })
}

/// Whether the config has no boundary or body forcing.
pub fn is_unforced(config: &RunConfig) -> bool {
    config.pumps.is_empty() && config.source == Source::Zero
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_map_keeps_order() {
        let v: Vec<usize> = (0..17).collect();
        assert_eq!(parallel_map(&v, |x| x * 2), v.iter().map(|x| x * 2).collect::<Vec<_>>());
    }

    #[test]
    fn perturbation_is_unit_and_seeded() {
        let a = perturbation(7, 3);
        assert!((crate::linalg::norm2(&a) - 1.0).abs() < 1e-14);
        assert_eq!(a, perturbation(7, 3));
        assert_ne!(a, perturbation(7, 4));
    }

    #[test]
    fn coefficient_distance_pads_and_samples() {
        let a = Trajectory { times: vec![0.0, 1.0], states: vec![vec![0.0], vec![1.0]], diagnostics: vec![] };
        let b = Trajectory {
            times: vec![0.0, 0.5, 1.0],
            states: vec![vec![0.0, 0.0], vec![9.0, 9.0], vec![1.0, 2.0]],
            diagnostics: vec![],
        };
        // squared distances 0 and 4 at t = 0, 1
        assert!((coefficient_distance(&a, &b).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_data_simulation_is_null() {
        let mut cfg = crate::config::preset("zero-data").unwrap();
        cfg.mesh.nx = 4;
        cfg.mesh.ny = 4;
        cfg.galerkin.modes = 5;
        cfg.time.end = 0.1;
        let sim = Simulation::prepare(&cfg).unwrap();
        let out = simulate(&sim).unwrap();
        assert_eq!(out.summary.status, "ok");
        assert_eq!(out.summary.max_velocity_l2, 0.0);
        assert_eq!(out.summary.steps, 10);
    }
}
