//! `recirc` command line: config validation, runs, sweeps and their artifacts.
//!
//! Exit codes: 0 on success, 1 on numerical failure, 2 on a config error.

pub mod pipeline;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{preset, RunConfig};
use crate::discretization::norms::velocity_norm;
use crate::discretization::NormKind;
use crate::eigenbasis::solve_stokes_eigen;
use crate::error::{ConfigIssue, Error, Result};
use crate::monitors::{ContractionRow, LedgerRow};
use crate::output::{write_csv, write_vtk};
use pipeline::{Simulation, CONTRACTION_SLACK};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "recirc", version, about = "Pump-driven recirculation simulator")]
pub struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true, conflicts_with = "preset")]
    pub config: Option<PathBuf>,

    /// Use a built-in configuration instead of a file.
    #[arg(long, global = true)]
    pub preset: Option<String>,

    /// Overrides `output.dir` from the config.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,

    /// Suppress progress messages on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the config and print every problem as JSON.
    Validate,
    /// Integrate the reduced system and write trajectory, ledger, snapshots and summary.
    Simulate,
    /// Sample the boundary lifting over the schedule.
    Lift(LiftArgs),
    /// Compute the Stokes eigenbasis.
    Eigen(EigenArgs),
    /// Convergence sweeps.
    #[command(subcommand)]
    Study(Study),
    /// Fit and check the contraction constant on perturbed pairs.
    Contract(ContractArgs),
}

#[derive(Debug, Args)]
pub struct LiftArgs {
    /// Number of sample intervals over [0, T].
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct EigenArgs {
    /// Number of modes (defaults to `galerkin.modes`).
    #[arg(long)]
    pub modes: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Study {
    /// Step halving: dt, dt/2, ...
    Dt {
        #[arg(long, default_value_t = 2)]
        levels: usize,
    },
    /// Mode sweep against a reference run.
    Modes {
        #[arg(long, value_delimiter = ',', default_values_t = [5usize, 10, 20, 40])]
        modes: Vec<usize>,
        #[arg(long, default_value_t = 80)]
        reference: usize,
    },
    /// Mesh sweep.
    Mesh {
        #[arg(long, value_delimiter = ',', default_values_t = [8usize, 16, 32])]
        sizes: Vec<usize>,
    },
}

#[derive(Debug, Args)]
pub struct ContractArgs {
    #[arg(long, default_value_t = 1e-3)]
    pub fit_amplitude: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub check_amplitude: f64,
}

/// Parses `args` (including the program name) and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    run(&cli)
}

pub fn run(cli: &Cli) -> i32 {
    let config = match load_config(cli) {
        Ok(c) => c,
        Err(Error::Config(issues)) => {
            print_issues(&issues);
            return EXIT_CONFIG;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Command::Validate = cli.command {
        print_issues(&[]);
        return EXIT_OK;
    }
    let out = cli.output_dir.clone().unwrap_or_else(|| PathBuf::from(&config.output.dir));
    let ctx = Context { config, out, quiet: cli.quiet };
    let result = match &cli.command {
        Command::Validate => unreachable!(),
        Command::Simulate => ctx.simulate(),
        Command::Lift(a) => ctx.lift(a.samples).map(|_| EXIT_OK),
        Command::Eigen(a) => ctx.eigen(a.modes).map(|_| EXIT_OK),
        Command::Study(s) => ctx.study(s).map(|_| EXIT_OK),
        Command::Contract(a) => ctx.contract(a).map(|_| EXIT_OK),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    match (&cli.config, &cli.preset) {
        (Some(path), _) => RunConfig::from_path(path),
        (None, Some(name)) => preset(name),
        (None, None) => Err(Error::Config(vec![ConfigIssue {
            path: String::new(),
            message: "no config given (use --config <path> or --preset <name>)".into(),
        }])),
    }
}

#[derive(Serialize)]
struct IssueReport<'a> {
    valid: bool,
    errors: &'a [ConfigIssue],
}

fn print_issues(issues: &[ConfigIssue]) {
    let report = IssueReport { valid: issues.is_empty(), errors: issues };
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable report"));
}

struct Context {
    config: RunConfig,
    out: PathBuf,
    quiet: bool,
}

impl Context {
    fn log(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        std::fs::create_dir_all(&self.out)?;
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(self.path(name), text + "\n")?;
        Ok(())
    }

    fn simulate(&self) -> Result<i32> {
        let hash = self.config.hash();
        self.log("building lifting and eigenbasis");
        let sim = Simulation::prepare(&self.config)?;
        self.log(&format!("integrating {} modes to T = {}", sim.basis.len(), self.config.time.end));
        let outcome = pipeline::simulate(&sim)?;
        let traj = &outcome.trajectory;

        let n = sim.basis.len();
        let mut columns: Vec<String> = vec!["t".into(), "velocity_l2".into(), "newton_iterations".into()];
        columns.extend((0..n).map(|k| format!("z{k}")));
        let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
        let rows: Vec<Vec<f64>> = (0..traj.len())
            .map(|i| {
                let iters = if i == 0 { 0.0 } else { traj.diagnostics[i - 1].iterations as f64 };
                let mut r = vec![traj.times[i], outcome.velocity_l2[i], iters];
                r.extend_from_slice(&traj.states[i]);
                r
            })
            .collect();
        write_csv(&self.path("trajectory.csv"), &hash, &cols, &rows)?;

        if let Some(ledger) = &outcome.ledger {
            let rows: Vec<Vec<f64>> = ledger.rows.iter().map(|r| r.values().to_vec()).collect();
            write_csv(&self.path("ledger.csv"), &hash, &LedgerRow::COLUMNS, &rows)?;
        }

        let every = self.config.output.every.max(1);
        let space = &sim.problem.space;
        for i in (0..traj.len()).filter(|i| i % every == 0 || *i + 1 == traj.len()) {
            let v = sim.velocity(traj, i)?;
            let (zeta, _) = sim.problem.lift_at(traj.times[i])?;
            let z: Vec<f64> = v.iter().zip(&zeta).map(|(a, b)| a - b).collect();
            let name = format!("snapshots/step_{i:06}.vtk");
            write_vtk(&self.path(&name), space, &hash, &[("velocity", &v), ("lifting", &zeta), ("homogeneous", &z)])?;
        }

        self.write_json("summary.json", &outcome.summary)?;
        self.log(&format!(
            "status {} final |v| = {:e}, C1 = {:?}",
            outcome.summary.status, outcome.summary.final_velocity_l2, outcome.summary.c1
        ));
        Ok(if outcome.summary.error.is_some() { EXIT_NUMERICAL } else { EXIT_OK })
    }

    fn lift(&self, samples: usize) -> Result<()> {
        let hash = self.config.hash();
        let problem = self.config.build_problem()?;
        let space = &problem.space;
        let samples = samples.max(1);
        let n_pumps = problem.pumps.len();
        let mut columns: Vec<String> =
            ["t", "net_flux", "lifting_l2", "lifting_strain_l2"].iter().map(|s| s.to_string()).collect();
        columns.extend((0..n_pumps).map(|k| format!("rate{k}")));
        let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
        let mut rows = Vec::with_capacity(samples + 1);
        for i in 0..=samples {
            let t = self.config.time.end * i as f64 / samples as f64;
            let (zeta, _) = problem.lift_at(t)?;
            let mut row =
                vec![t, space.net_flux(&zeta), velocity_norm(space, &zeta, NormKind::L2), strain_l2(space, &zeta)];
            row.extend(problem.pumps.rates(t)?.iter().map(|r| r.0));
            rows.push(row);
        }
        write_csv(&self.path("lifting.csv"), &hash, &cols, &rows)?;
        let names: Vec<String> = (0..n_pumps).map(|k| format!("pump{k}")).collect();
        let fields: Vec<(&str, &[f64])> =
            names.iter().map(String::as_str).zip(problem.lifting.fields().iter().map(Vec::as_slice)).collect();
        write_vtk(&self.path("lifting.vtk"), space, &hash, &fields)?;
        self.log(&format!("wrote {} lifting samples for {n_pumps} pumps", rows.len()));
        Ok(())
    }

    fn eigen(&self, modes: Option<usize>) -> Result<()> {
        let hash = self.config.hash();
        let modes = modes.unwrap_or(self.config.galerkin.modes);
        let mesh = self.config.build_mesh()?;
        let space = crate::discretization::MixedSpace::new(mesh)?;
        self.log(&format!("solving for {modes} Stokes modes"));
        let basis = solve_stokes_eigen(&space, modes, self.config.seed)?;
        let rq = basis.rayleigh_quotients(&space);
        let rows: Vec<Vec<f64>> =
            (0..basis.len()).map(|k| vec![k as f64, basis.values()[k], basis.residuals()[k], rq[k]]).collect();
        write_csv(
            &self.path("eigenvalues.csv"),
            &hash,
            &["index", "eigenvalue", "rayleigh_residual", "rayleigh_quotient"],
            &rows,
        )?;
        basis.save(&self.path("basis.csv"))?;
        self.log(&format!("lambda_1 = {:e}, gram residual {:e}", basis.values()[0], basis.gram_residual(&space)));
        Ok(())
    }

    fn study(&self, study: &Study) -> Result<()> {
        let hash = self.config.hash();
        match study {
            Study::Dt { levels } => {
                let rows = pipeline::study_dt(&self.config, *levels)?;
                let table: Vec<Vec<f64>> =
                    rows.iter().map(|r| vec![r.dt, r.difference, r.ratio.unwrap_or(f64::NAN)]).collect();
                write_csv(&self.path("study_dt.csv"), &hash, &["dt", "difference", "ratio"], &table)?;
            }
            Study::Modes { modes, reference } => {
                let rows = pipeline::study_modes(&self.config, modes, *reference)?;
                let table: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.modes as f64, r.error]).collect();
                write_csv(&self.path("study_modes.csv"), &hash, &["modes", "error"], &table)?;
            }
            Study::Mesh { sizes } => {
                let rows = pipeline::study_mesh(&self.config, sizes)?;
                let opt = |x: Option<f64>| x.unwrap_or(f64::NAN);
                let table: Vec<Vec<f64>> = rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.n as f64,
                            r.h,
                            r.lambda_1,
                            opt(r.error),
                            opt(r.order),
                            opt(r.final_velocity_l2),
                            opt(r.c1),
                        ]
                    })
                    .collect();
                write_csv(
                    &self.path("study_mesh.csv"),
                    &hash,
                    &["n", "h", "lambda_1", "error", "order", "final_velocity_l2", "c1"],
                    &table,
                )?;
            }
        }
        self.log("study complete");
        Ok(())
    }

    fn contract(&self, args: &ContractArgs) -> Result<()> {
        let hash = self.config.hash();
        let sim = Simulation::prepare(&self.config)?;
        let summary = pipeline::contract(&sim, args.fit_amplitude, args.check_amplitude)?;
        for (name, report) in [("contraction_fit.csv", &summary.fitted), ("contraction_check.csv", &summary.check)] {
            let rows: Vec<Vec<f64>> = report.rows.iter().map(|r| r.values().to_vec()).collect();
            write_csv(&self.path(name), &hash, &ContractionRow::COLUMNS, &rows)?;
        }
        self.write_json("contraction.json", &summary)?;
        self.log(&format!(
            "C2 = {:e}, bound with {}% slack holds: {}",
            summary.c2,
            CONTRACTION_SLACK * 100.0,
            summary.bound_holds
        ));
        Ok(())
    }
}

fn strain_l2(space: &crate::discretization::MixedSpace, u: &[f64]) -> f64 {
    (0.5 * space.ops().k_eps.bilinear(u, u)).max(0.0).sqrt()
}
