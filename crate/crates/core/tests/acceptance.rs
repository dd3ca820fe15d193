//! End-to-end acceptance checks. Each test prints one PASS/FAIL line and asserts its
//! wall-time budget; a shared lock keeps the timings free of interference.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use recirc_core::cli::pipeline::{contract, simulate, study_mesh, study_modes, Simulation};
use recirc_core::config::preset;
use recirc_core::discretization::norms::velocity_norm;
use recirc_core::discretization::{MixedSpace, NormKind};
use recirc_core::eigenbasis::solve_stokes_eigen;
use recirc_core::linalg::dot;
use recirc_core::pumps::PumpSet;
use recirc_core::saddle::LerayProjector;
use recirc_core::turbulence::{potential, stress, stress_load, ClosureParams, Strain};

static SERIAL: Mutex<()> = Mutex::new(());

fn lock() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(id: u32, name: &str, pass: bool, detail: String, elapsed: Duration, budget: Duration) {
    let verdict = if pass && elapsed < budget { "PASS" } else { "FAIL" };
    println!("[{verdict}] {id:>2} {name}: {detail} ({:.2}s / {}s)", elapsed.as_secs_f64(), budget.as_secs());
}

fn sci(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn random_coeffs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let scale = 10f64.powf(rng.random_range(-2.0..1.0));
    (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn c01_boundary_flux_compatibility() {
    let _g = lock();
    let cfg = preset("four-pump").unwrap();
    let start = Instant::now();
    let space = MixedSpace::new(cfg.build_mesh().unwrap()).unwrap();
    let pumps = PumpSet::build(&space, &cfg.pump_specs().unwrap()).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let t = cfg.time.end * i as f64 / 19.0;
        let phi = pumps.phi_g(&space, t).unwrap();
        let total: f64 = pumps.rates(t).unwrap().iter().map(|r| r.0.abs()).sum();
        worst = worst.max(space.net_flux(&phi).abs() / total.max(1.0));
    }
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(1);
    let pass = worst <= 1e-10;
    report(1, "net boundary flux", pass, format!("worst scaled flux {worst:e}"), elapsed, budget);
    assert!(pass, "scaled flux {worst:e}");
    assert!(elapsed < budget);
}

#[test]
fn c02_strong_monotonicity() {
    let _g = lock();
    let cfg = preset("four-pump").unwrap();
    let start = Instant::now();
    let problem = cfg.build_problem().unwrap();
    let space = &problem.space;
    let basis = solve_stokes_eigen(space, 20, cfg.seed).unwrap();
    let params = problem.params;
    let (zeta, _) = problem.lift_at(0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = f64::INFINITY;
    for _ in 0..200 {
        let z1 = basis.expand(&random_coeffs(&mut rng, 20));
        let z2 = basis.expand(&random_coeffs(&mut rng, 20));
        let v1: Vec<f64> = z1.iter().zip(&zeta).map(|(a, b)| a + b).collect();
        let v2: Vec<f64> = z2.iter().zip(&zeta).map(|(a, b)| a + b).collect();
        let a1 = stress_load(space, &space.eval_qp(&v1), &params);
        let a2 = stress_load(space, &space.eval_qp(&v2), &params);
        let d: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| a - b).collect();
        let da: Vec<f64> = a1.iter().zip(&a2).map(|(a, b)| a - b).collect();
        let lhs = dot(&da, &d);
        let margin = lhs - params.nu * space.ops().k_eps.bilinear(&d, &d);
        worst = worst.min(margin / (1.0 + lhs.abs()));
    }
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(60);
    let pass = worst >= -1e-12;
    report(2, "strong monotonicity", pass, format!("worst scaled margin {worst:e}"), elapsed, budget);
    assert!(pass, "margin {worst:e}");
    assert!(elapsed < budget);
}

#[test]
fn c03_potential_derivative_consistency() {
    let _g = lock();
    let start = Instant::now();
    let params = ClosureParams::new(0.01, 0.005).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ratios = Vec::new();
    while ratios.len() < 100 {
        let a: [f64; 3] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        let eps = Strain([[a[0], a[1]], [a[1], a[2]]]);
        if eps.magnitude() < 0.1 {
            continue;
        }
        let b: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let dir = Strain([[b[0], b[1]], [b[1], b[2]]]);
        let dir = dir.scaled(eps.magnitude() / dir.magnitude());
        let exact = stress(&eps, &params).contract(&dir);
        let err = |h: f64| {
            let fd = (potential(&eps.add(&dir.scaled(h)), &params) - potential(&eps.add(&dir.scaled(-h)), &params))
                / (2.0 * h);
            (fd - exact).abs()
        };
        let errs: Vec<f64> = [0.08, 0.04, 0.02].iter().map(|&h| err(h)).collect();
        ratios.push(errs[0] / errs[1]);
        ratios.push(errs[1] / errs[2]);
    }
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(10);
    let pass = lo >= 3.4 && hi <= 4.6;
    report(3, "potential derivative", pass, format!("halving ratios in [{lo:.3}, {hi:.3}]"), elapsed, budget);
    assert!(pass, "ratios in [{lo}, {hi}]");
    assert!(elapsed < budget);
}

#[test]
fn c04_zero_input_stays_zero() {
    let _g = lock();
    let cfg = preset("zero-data").unwrap();
    let start = Instant::now();
    let sim = Simulation::prepare(&cfg).unwrap();
    let out = simulate(&sim).unwrap();
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(10);
    let max_v = out.summary.max_velocity_l2;
    let pass = out.summary.status == "ok" && max_v <= 1e-12;
    report(4, "null solution", pass, format!("max |v| = {max_v:e}"), elapsed, budget);
    assert!(pass);
    assert!(elapsed < budget);
}

#[test]
fn c05_lifting_strain_orthogonality() {
    let _g = lock();
    let cfg = preset("four-pump").unwrap();
    let start = Instant::now();
    let problem = cfg.build_problem().unwrap();
    let space = &problem.space;
    let leray = LerayProjector::new(space).unwrap();
    let nu = problem.params.nu;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let mut raw: Vec<f64> = (0..space.n_velocity()).map(|_| rng.random_range(-1.0..1.0)).collect();
        for (dof, x) in raw.iter_mut().enumerate() {
            if space.is_boundary_dof(dof) {
                *x = 0.0;
            }
        }
        let eta = leray.project(space, &raw).unwrap();
        let h1 = (velocity_norm(space, &eta, NormKind::L2).powi(2)
            + velocity_norm(space, &eta, NormKind::H1Semi).powi(2))
        .sqrt();
        for zeta in problem.lifting.fields() {
            // k_eps carries the factor 2 of ∫ 2ε:ε
            let pairing = nu * space.ops().k_eps.bilinear(zeta, &eta);
            worst = worst.max(pairing.abs() / h1);
        }
    }
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(30);
    let pass = worst <= 1e-8;
    report(5, "lifting orthogonality", pass, format!("worst |pairing|/|eta|_H1 = {worst:e}"), elapsed, budget);
    assert!(pass, "pairing {worst:e}");
    assert!(elapsed < budget);
}

#[test]
fn c06_eigenbasis_quality() {
    let _g = lock();
    let cfg = preset("four-pump").unwrap();
    let start = Instant::now();
    let mut lambda = Vec::new();
    let mut worst_res: f64 = 0.0;
    let mut worst_gram: f64 = 0.0;
    for n in [32, 64] {
        let space = MixedSpace::new(cfg.build_mesh_at(n, n).unwrap()).unwrap();
        let basis = solve_stokes_eigen(&space, 10, cfg.seed).unwrap();
        worst_res = basis.residuals().iter().copied().fold(worst_res, f64::max);
        worst_gram = worst_gram.max(basis.gram_residual(&space));
        lambda.push(basis.values()[0]);
    }
    let change = (lambda[0] - lambda[1]).abs() / lambda[1];
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(120);
    let pass = worst_res <= 1e-8 && change <= 0.02 && worst_gram <= 1e-10;
    report(
        6,
        "eigenbasis",
        pass,
        format!(
            "residual {worst_res:e}, gram {worst_gram:e}, lambda_1 {:.6} -> {:.6} ({change:e})",
            lambda[0], lambda[1]
        ),
        elapsed,
        budget,
    );
    assert!(pass);
    assert!(elapsed < budget);
}

#[test]
fn c07_galerkin_mode_convergence() {
    let _g = lock();
    let cfg = preset("four-pump").unwrap();
    assert_eq!((cfg.mesh.nx, cfg.time.dt), (16, 1e-2));
    let start = Instant::now();
    let rows = study_modes(&cfg, &[5, 10, 20, 40], 80).unwrap();
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(600);
    let errors: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let pass = errors.windows(2).all(|w| w[1] <= w[0]);
    report(7, "mode convergence", pass, format!("errors vs N=80 {}", sci(&errors)), elapsed, budget);
    assert!(pass, "{errors:?}");
    assert!(elapsed < budget);
}

#[test]
fn c08_manufactured_solution_order() {
    let _g = lock();
    let cfg = preset("manufactured").unwrap();
    assert!(cfg.fluid.nu_tur > 0.0 && cfg.time.dt == 1e-3);
    let start = Instant::now();
    let rows = study_mesh(&cfg, &[8, 16, 32]).unwrap();
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(600);
    let orders: Vec<f64> = rows.iter().filter_map(|r| r.order).collect();
    let errors: Vec<f64> = rows.iter().filter_map(|r| r.error).collect();
    let pass = orders.len() == 2 && orders.iter().all(|&p| p >= 2.0);
    report(8, "manufactured order", pass, format!("errors {}, orders {orders:.3?}", sci(&errors)), elapsed, budget);
    assert!(pass, "{orders:?}");
    assert!(elapsed < budget);
}

#[test]
fn c09_energy_dissipation() {
    let _g = lock();
    let cfg = preset("vortex-decay").unwrap();
    let start = Instant::now();
    let sim = Simulation::prepare(&cfg).unwrap();
    let traj = sim.integrate().unwrap();
    let sys = sim.system();
    let mut monotone = true;
    let mut worst: f64 = 0.0;
    for i in 1..traj.len() {
        let prev = recirc_core::galerkin::GalerkinState { t: traj.times[i - 1], z: traj.states[i - 1].clone() };
        let next = recirc_core::galerkin::GalerkinState { t: traj.times[i], z: traj.states[i].clone() };
        monotone &= dot(&next.z, &next.z) <= dot(&prev.z, &prev.z);
        worst = worst.max(sys.energy_identity_residual(&prev, &next).unwrap().abs());
    }
    let e0 = 0.5 * dot(&traj.states[0], &traj.states[0]);
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(60);
    let pass = monotone && worst <= 1e-10 && e0 > 0.0;
    report(9, "energy dissipation", pass, format!("monotone {monotone}, identity residual {worst:e}"), elapsed, budget);
    assert!(pass);
    assert!(elapsed < budget);
}

#[test]
fn c10_uniqueness_contraction() {
    let _g = lock();
    let start = Instant::now();
    let forced = contract(&Simulation::prepare(&preset("four-pump").unwrap()).unwrap(), 1e-3, 1e-4).unwrap();
    let unforced = contract(&Simulation::prepare(&preset("vortex-decay").unwrap()).unwrap(), 1e-3, 1e-4).unwrap();
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(300);
    let raw = unforced.fitted.raw_nonincreasing && unforced.check.raw_nonincreasing;
    let pass = forced.bound_holds && unforced.bound_holds && raw;
    report(
        10,
        "contraction",
        pass,
        format!(
            "C2 = {:e}, bound {}, unforced C2 = {:e}, unforced raw non-increasing {raw}",
            forced.c2, forced.bound_holds, unforced.c2
        ),
        elapsed,
        budget,
    );
    assert!(pass);
    assert!(elapsed < budget);
}

#[test]
fn c11_ledger_constant_stability() {
    let _g = lock();
    let cfg = preset("four-pump").unwrap();
    let start = Instant::now();
    let mut c1 = Vec::new();
    let mut finite = true;
    for n in [16, 32] {
        for modes in [20, 40] {
            let sim = Simulation::prepare_at(&cfg, n, n, modes).unwrap();
            let out = simulate(&sim).unwrap();
            let ledger = out.ledger.expect("ledger");
            finite &= ledger.rows.iter().all(|r| r.values().iter().all(|x| x.is_finite()));
            finite &= ledger.lhs.is_finite() && ledger.rhs.is_finite() && ledger.lhs > 0.0;
            c1.push(ledger.c1.unwrap_or(f64::NAN));
        }
    }
    let lo = c1.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = c1.iter().copied().fold(0.0, f64::max);
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(900);
    let pass = finite && lo > 0.0 && hi / lo < 2.0;
    report(11, "ledger constant", pass, format!("C1 {c1:.4?}, spread {:.4}", hi / lo), elapsed, budget);
    assert!(pass, "{c1:?}");
    assert!(elapsed < budget);
}
