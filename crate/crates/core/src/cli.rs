//! Command-line front end: `simulate`, `sweep`, `validate-kernels`, `info`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{parse_config, EpsSpec, InitialData, RunConfig, Solver};
use crate::diagnostics::{eps_sweep, kinetic_bound_checks, macro_bound_checks, BoundReport, SweepScenario};
use crate::error::{Error, Result};
use crate::io::{write_snapshot, Snapshot};
use crate::kernels::{default_norm_matrix, verify_norm_table, NormCheck};
use crate::kinetic::{KineticSample, KineticSystem};
use crate::macroscopic::{MacroSample, MacroSystem};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const THREADS_ENV: &str = "CHEMOKIN_THREADS";

#[derive(Debug, Parser)]
#[command(name = "chemokin", version, about = "Kinetic chemotaxis and its diffusive limit")]
struct Cli {
    /// Worker threads; overrides CHEMOKIN_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the solver selected in the configuration.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run an ε-sweep against the macroscopic reference.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check kernel norm identities over the default (dim, p, t) matrix.
    ValidateKernels {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print derived quantities for a configuration.
    Info {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Outcome of a command that ran to completion.
enum Outcome {
    Pass,
    Fail,
}

fn load(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config {
        pointer: String::new(),
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_config(&text)
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::InvalidParameter { .. } | Error::Cfl { .. } | Error::GridMismatch(_) => {
            EXIT_CONFIG
        }
        _ => EXIT_VALIDATION,
    }
}

fn thread_count(flag: Option<usize>) -> std::result::Result<Option<usize>, String> {
    if let Some(n) = flag {
        return if n == 0 { Err("--threads must be at least 1".into()) } else { Ok(Some(n)) };
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!("{THREADS_ENV} must be a positive integer, got {v:?}")),
        },
        Err(_) => Ok(None),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let threads = match thread_count(cli.threads) {
        Ok(t) => t,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_CONFIG;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_VALIDATION;
        }
    };
    match pool.install(|| dispatch(&cli.command)) {
        Ok(Outcome::Pass) => EXIT_OK,
        Ok(Outcome::Fail) => EXIT_VALIDATION,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: &Command) -> Result<Outcome> {
    match command {
        Command::Simulate { config } => {
            let cfg = load(config)?;
            match cfg.solver {
                Solver::Kinetic => simulate_kinetic(&cfg),
                Solver::Macro => simulate_macro(&cfg),
                Solver::Sweep => sweep(&cfg),
                Solver::Kernels => kernels(Some(&cfg.output.directory)),
            }
        }
        Command::Sweep { config } => sweep(&load(config)?),
        Command::ValidateKernels { config } => match config {
            Some(path) => kernels(Some(&load(path)?.output.directory)),
            None => kernels(None),
        },
        Command::Info { config } => info(&load(config)?),
    }
}

fn single_eps(cfg: &RunConfig) -> Result<f64> {
    match &cfg.eps {
        Some(EpsSpec::Single(e)) => Ok(*e),
        _ => Err(Error::Config {
            pointer: "/eps".into(),
            message: "a single value is required".into(),
        }),
    }
}

fn report_bounds(dir: &Path, report: &BoundReport) -> Result<Outcome> {
    fs::write(dir.join("bounds.csv"), report.to_csv())?;
    for c in &report.checks {
        println!("{} {} value={:.6e} limit={:.6e}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.limit);
    }
    Ok(if report.all_pass() { Outcome::Pass } else { Outcome::Fail })
}

fn simulate_kinetic(cfg: &RunConfig) -> Result<Outcome> {
    let eps = single_eps(cfg)?;
    let sys = KineticSystem::new(cfg.grid.clone(), cfg.velocities.clone(), cfg.species, cfg.delta, eps)?;
    let (f1, f2) = match cfg.initial_data()? {
        InitialData::Densities { rho, profile } => {
            let g = profile.values(&cfg.velocities);
            (sys.tensor_distribution(&rho[0], &g), sys.tensor_distribution(&rho[1], &g))
        }
        InitialData::Distributions { f: [f1, f2] } => (f1, f2),
    };
    let init = sys.initial_state(f1, f2)?;
    let dir = &cfg.output.directory;
    fs::create_dir_all(dir)?;
    let mut csv = String::from(KineticSample::CSV_HEADER);
    csv.push('\n');
    let mut index = 0usize;
    let traj = sys.run_with(&init, cfg.dt, cfg.t_end, cfg.output.snapshot_stride, |state, sample| {
        writeln!(csv, "{}", sample.csv_row()).expect("write to string");
        write_snapshot(&Snapshot::kinetic(&sys, state), &dir.join(format!("snapshot_{index:05}.ckin")))?;
        index += 1;
        Ok(())
    })?;
    fs::write(dir.join("timeseries.csv"), csv)?;
    report_bounds(dir, &kinetic_bound_checks(&sys, &traj))
}

fn simulate_macro(cfg: &RunConfig) -> Result<Outcome> {
    let sys = MacroSystem::new(cfg.grid.clone(), cfg.velocities.clone(), cfg.species, cfg.delta)?;
    let rho = match cfg.initial_data()? {
        InitialData::Densities { rho, .. } => rho,
        InitialData::Distributions { f } => {
            let k = KineticSystem::new(cfg.grid.clone(), cfg.velocities.clone(), cfg.species, cfg.delta, 1.0)?;
            k.moments(&k.initial_state(f[0].clone(), f[1].clone())?).rho
        }
    };
    let [r1, r2] = rho;
    let init = sys.initial_state(r1, r2)?;
    let dir = &cfg.output.directory;
    fs::create_dir_all(dir)?;
    let mut csv = String::from(MacroSample::CSV_HEADER);
    csv.push('\n');
    let mut index = 0usize;
    let traj = sys.run_with(&init, cfg.dt, cfg.t_end, cfg.output.snapshot_stride, |state, sample| {
        writeln!(csv, "{}", sample.csv_row()).expect("write to string");
        write_snapshot(&Snapshot::densities(sys.grid(), state), &dir.join(format!("snapshot_{index:05}.ckin")))?;
        index += 1;
        Ok(())
    })?;
    fs::write(dir.join("timeseries.csv"), csv)?;
    report_bounds(dir, &macro_bound_checks(&sys, &traj))
}

/// Sweep scenario described by a configuration.
pub fn sweep_scenario(cfg: &RunConfig) -> Result<(SweepScenario, Vec<f64>)> {
    let eps = match &cfg.eps {
        Some(EpsSpec::List(l)) => l.clone(),
        _ => {
            return Err(Error::Config {
                pointer: "/eps".into(),
                message: "a sweep needs a list of values".into(),
            })
        }
    };
    let (rho_init, profile) = match cfg.initial_data()? {
        InitialData::Densities { rho, profile } => (rho, profile),
        InitialData::Distributions { .. } => {
            return Err(Error::Config {
                pointer: "/init".into(),
                message: "a sweep starts from densities, not a kinetic snapshot".into(),
            })
        }
    };
    Ok((
        SweepScenario {
            grid: cfg.grid.clone(),
            velocities: cfg.velocities.clone(),
            species: cfg.species,
            delta: cfg.delta,
            dt: cfg.dt,
            t_end: cfg.t_end,
            rho_init,
            profile,
        },
        eps,
    ))
}

fn sweep(cfg: &RunConfig) -> Result<Outcome> {
    let (scenario, eps) = sweep_scenario(cfg)?;
    let report = eps_sweep(&scenario, &eps)?;
    let dir = &cfg.output.directory;
    fs::create_dir_all(dir)?;
    let csv = report.to_csv();
    let summary = report.summary_json();
    fs::write(dir.join("sweep.csv"), &csv)?;
    fs::write(dir.join("sweep_summary.json"), format!("{summary}\n"))?;
    print!("{csv}");
    println!("{summary}");
    Ok(Outcome::Pass)
}

fn kernels(dir: Option<&PathBuf>) -> Result<Outcome> {
    let mut csv = String::from(NormCheck::CSV_HEADER);
    csv.push('\n');
    let mut ok = true;
    for (dim, p, t) in default_norm_matrix() {
        for row in verify_norm_table(dim, p, t)? {
            ok &= row.pass;
            csv.push_str(&row.csv_row());
            csv.push('\n');
        }
    }
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("kernels.csv"), &csv)?;
    }
    print!("{csv}");
    Ok(if ok { Outcome::Pass } else { Outcome::Fail })
}

fn info(cfg: &RunConfig) -> Result<Outcome> {
    let vs = &cfg.velocities;
    println!("dim = {}", cfg.grid.dim());
    println!("cells = {:?}, spacing = {:?}", cfg.grid.cells(), (0..cfg.grid.dim()).map(|a| cfg.grid.spacing(a)).collect::<Vec<_>>());
    println!("velocity nodes = {}, |V| = {}, F = {}", vs.len(), vs.measure(), vs.equilibrium());
    let msys = MacroSystem::new(cfg.grid.clone(), vs.clone(), cfg.species, cfg.delta)?;
    for i in 0..2 {
        let d = msys.diffusion(i);
        let diag: Vec<f64> = (0..d.nrows()).map(|a| d[(a, a)]).collect();
        println!("species {}: psi = {}, D = diag{:?}, |chi| <= {}", i + 1, cfg.species[i].psi(), diag, cfg.species[i].theta().amp() * vs.vmax());
    }
    if let InitialData::Densities { rho, .. } = cfg.initial_data()? {
        let [r1, r2] = rho;
        let st = msys.initial_state(r1, r2)?;
        let faces = [msys.face_velocities(0, &st.chem), msys.face_velocities(1, &st.chem)];
        let adm = msys.admissible_dt(&faces[0]).min(msys.admissible_dt(&faces[1]));
        println!("macro admissible dt at t = 0: {adm:.6e} (configured dt = {})", cfg.dt);
    }
    let eps_list: Vec<f64> = match &cfg.eps {
        Some(EpsSpec::Single(e)) => vec![*e],
        Some(EpsSpec::List(l)) => l.clone(),
        None => Vec::new(),
    };
    let h = (0..cfg.grid.dim()).map(|a| cfg.grid.spacing(a)).fold(f64::INFINITY, f64::min);
    for eps in eps_list {
        println!(
            "eps = {eps}: dt/eps^2 = {:.4e}, max cells crossed per step = {:.4}, max rates = [{:.4}, {:.4}]",
            cfg.dt / (eps * eps),
            vs.vmax() * cfg.dt / (eps * h),
            cfg.species[0].max_rate(eps),
            cfg.species[1].max_rate(eps)
        );
    }
    Ok(Outcome::Pass)
}
