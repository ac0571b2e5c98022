//! Command-line front end: argument parsing, subcommand dispatch and exit codes.

use clap::{Args, Parser, Subcommand, ValueEnum};
use morse_actions::actions::ActionSystem;
use morse_actions::constants::ConstantTable;
use morse_actions::cosine::CosineRef;
use morse_actions::inversion::{ActionModel, EnergyMap, PotentialModel, StandardFormModel};
use morse_actions::io::{self, Report};
use morse_actions::morse::morse_check;
use morse_actions::potential::{FourierPotential, ParamPoint};
use morse_actions::singular::{bottom_analyticity_check, singularity_survey, FitOptions};
use morse_actions::standard_form::normalize;
use morse_actions::verify::{run_suite, Suite};
use morse_actions::Error;
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_BOUND: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

pub const THREADS_ENV: &str = "MORSE_ACTIONS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "morse-actions", version, about = "Actions, twists and log singularities of p² + F(θ)")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Write the result here instead of standard output.
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
    /// Seed for sampled checks; recorded in every report.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (overrides MORSE_ACTIONS_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PotentialArgs {
    /// Potential file (JSON).
    #[arg(long)]
    pub potential: PathBuf,
    /// Parameter point, comma separated (default: centre of the parameter box).
    #[arg(long, default_value = "", allow_hyphen_values = true)]
    pub params: String,
    /// Radius of the complex parameter neighbourhood.
    #[arg(long, default_value_t = 1.0)]
    pub r0: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Critical points, Morse constants and the constants table.
    Analyze(PotentialArgs),
    /// Reduce a momentum-dependent perturbation to standard form.
    Normalize {
        /// Perturbed Hamiltonian file (JSON).
        #[arg(long)]
        hamiltonian: PathBuf,
        #[arg(long, default_value = "", allow_hyphen_values = true)]
        params: String,
        /// Grid size of the composition check.
        #[arg(long, default_value_t = 16)]
        grid: usize,
        /// Random samples of the composition check.
        #[arg(long, default_value_t = 256)]
        samples: usize,
    },
    /// CSV of I, dI/dE and d²I/dE² over an energy grid.
    Actions {
        #[command(flatten)]
        potential: PotentialArgs,
        #[arg(long)]
        region: usize,
        /// lo:hi:count, optionally followed by :log.
        #[arg(long, allow_hyphen_values = true)]
        energies: String,
    },
    /// CSV of the energy map and its action derivatives over an action grid.
    Invert {
        /// Potential file (JSON).
        #[arg(long, conflicts_with = "hamiltonian", required_unless_present = "hamiltonian")]
        potential: Option<PathBuf>,
        /// Perturbed Hamiltonian file (JSON), used through its standard form.
        #[arg(long)]
        hamiltonian: Option<PathBuf>,
        #[arg(long, default_value = "", allow_hyphen_values = true)]
        params: String,
        #[arg(long, default_value_t = 1.0)]
        r0: f64,
        #[arg(long)]
        region: usize,
        /// lo:hi:count, optionally followed by :log.
        #[arg(long, allow_hyphen_values = true)]
        actions: String,
    },
    /// Log-singularity fits at every window end and well-bottom analyticity.
    Singular {
        #[command(flatten)]
        potential: PotentialArgs,
        /// Largest point of the fit grid.
        #[arg(long, default_value_t = 5e-3)]
        z0: f64,
    },
    /// Golden tables of the pendulum -η cos θ from independent quadrature.
    Oracle {
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        /// 1 for the well, 2 for rotation.
        #[arg(long, default_value_t = 1)]
        region: usize,
        /// lo:hi:count, optionally followed by :log.
        #[arg(long, allow_hyphen_values = true)]
        energies: String,
    },
    /// Run the acceptance suite.
    Verify {
        #[arg(long, value_enum, default_value_t = SuiteArg::Cosine)]
        suite: SuiteArg,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Cosine,
    Quick,
}

/// Outcome of a subcommand: the text to emit and whether every check passed.
struct Output {
    text: String,
    passed: bool,
}

/// The parameter point given on the command line, or the centre of the
/// parameter box when none is given.
fn point(text: &str, pot: &FourierPotential) -> Result<ParamPoint, Error> {
    let p = if text.trim().is_empty() { pot.center() } else { ParamPoint(io::parse_point(text)?) };
    pot.check_point(&p)?;
    Ok(p)
}

fn table(m: f64, beta: f64, s0: f64, r0: f64) -> ConstantTable {
    ConstantTable::new(m, beta, s0, r0)
}

fn report<T: Serialize>(command: &str, seed: u64, constants: ConstantTable, passed: bool, body: T) -> Output {
    Output { text: Report::new(command, seed, constants, passed, body).to_json(), passed }
}

fn load(args: &PotentialArgs) -> Result<(FourierPotential, ParamPoint), Error> {
    let pot = io::load_potential(&args.potential)?;
    let p = point(&args.params, &pot)?;
    Ok((pot, p))
}

fn system(args: &PotentialArgs) -> Result<ActionSystem, Error> {
    let (pot, p) = load(args)?;
    Ok(ActionSystem::pure(morse_check(&pot.at(&p)?, pot.s0())?))
}

fn analyze(args: &PotentialArgs, seed: u64) -> Result<Output, Error> {
    let (pot, p) = load(args)?;
    let md = morse_check(&pot.at(&p)?, pot.s0())?;
    let c = md.constants(args.r0);
    #[derive(Serialize)]
    struct Body<'a> {
        params: &'a ParamPoint,
        morse: &'a morse_actions::morse::MorseData,
    }
    Ok(report("analyze", seed, c, true, Body { params: &p, morse: &md }))
}

fn normalize_cmd(path: &Path, params: &str, grid: usize, samples: usize, seed: u64) -> Result<Output, Error> {
    let h = io::load_perturbed(path)?;
    let p = point(params, &h.base)?;
    let sys = normalize(&h, &p)?;
    let md = morse_check(&h.base.at(&p)?, h.s0())?;
    let composition = sys.composition_residual(grid, samples, seed);
    let passed = sys.checks.iter().all(|c| c.holds) && composition <= 1e-10;
    #[derive(Serialize)]
    struct Body<'a> {
        pstar: f64,
        eta0: f64,
        contraction_steps: usize,
        contraction_residual: f64,
        composition_residual: f64,
        b_vanishes: bool,
        bounds: &'a [morse_actions::report::BoundCheck],
    }
    let body = Body {
        pstar: sys.pstar,
        eta0: sys.eta0,
        contraction_steps: sys.contraction_steps,
        contraction_residual: sys.contraction_residual,
        composition_residual: composition,
        b_vanishes: sys.b_vanishes(),
        bounds: &sys.checks,
    };
    Ok(report("normalize", seed, table(md.m, md.beta, h.s0(), h.r0), passed, body))
}

fn actions_cmd(args: &PotentialArgs, region: usize, energies: &str) -> Result<Output, Error> {
    let sys = system(args)?;
    let grid = io::parse_range(energies)?;
    let br = sys.branch(region)?;
    let rows = grid
        .par_iter()
        .map(|&e| -> Result<Vec<f64>, Error> {
            let i = br.action(e)?;
            let d = br.action_deriv(e)?;
            let d2 = br.action_second_deriv(e)?;
            let direct = br.action_direct(e)?;
            Ok(vec![e, i, d, d2, (i - direct).abs()])
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let text = io::csv_string(&["E", "I", "dI_dE", "d2I_dE2", "route_residual"], &rows)?;
    Ok(Output { text, passed: true })
}

fn invert_cmd(model: &dyn ActionModel, p: &ParamPoint, region: usize, actions: &str) -> Result<Output, Error> {
    let grid = io::parse_range(actions)?;
    let map = EnergyMap::new(model, region);
    map.domain(p)?;
    let rows = grid
        .par_iter()
        .map(|&a| -> Result<Vec<f64>, Error> {
            let d = map.energy_derivs(a, p)?;
            Ok(vec![a, d.energy, d.d_action, d.d2_action])
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(Output { text: io::csv_string(&["I", "E", "dE_dI", "d2E_dI2"], &rows)?, passed: true })
}

fn singular_cmd(args: &PotentialArgs, z0: f64, seed: u64) -> Result<Output, Error> {
    let sys = system(args)?;
    let opts = FitOptions { z0, r0: args.r0, ..FitOptions::default() };
    let fits = singularity_survey(&sys, &opts).into_iter().collect::<Result<Vec<_>, Error>>()?;
    let bottoms = (1..=sys.n_wells())
        .map(|j| bottom_analyticity_check(&sys, j, &opts))
        .collect::<Result<Vec<_>, Error>>()?;
    let passed = fits.iter().all(|f| f.passed) && bottoms.iter().all(|b| b.passed);
    #[derive(Serialize)]
    struct Body<T, U> {
        fits: T,
        bottoms: U,
    }
    let md = &sys.morse;
    Ok(report("singular", seed, md.constants(args.r0), passed, Body { fits, bottoms }))
}

fn oracle_cmd(eta: f64, region: usize, energies: &str) -> Result<Output, Error> {
    let reference = CosineRef::new(eta)?;
    let grid = io::parse_range(energies)?;
    let rows = grid
        .par_iter()
        .map(|&e| -> Result<Vec<f64>, Error> {
            let r = reference.golden_row(region, e)?;
            Ok(vec![r.energy, r.action, r.d_action, r.d2_action, r.twist])
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(Output { text: io::csv_string(&["E", "I", "dI_dE", "d2I_dE2", "twist"], &rows)?, passed: true })
}

fn verify_cmd(suite: SuiteArg, seed: u64, to_file: bool) -> Result<Output, Error> {
    let suite = match suite {
        SuiteArg::Cosine => Suite::Cosine,
        SuiteArg::Quick => Suite::Quick,
    };
    let results = run_suite(suite);
    let passed = results.iter().all(|r| r.passed);
    for r in &results {
        if to_file {
            println!("{}", r.line());
        } else {
            eprintln!("{}", r.line());
        }
    }
    let c = table(1f64.cosh(), 1.0, 1.0, 1.0).with_cosine(1.0);
    Ok(report("verify", seed, c, passed, results))
}

fn dispatch(cli: &Cli) -> Result<Output, Error> {
    let seed = cli.global.seed;
    match &cli.command {
        Command::Analyze(args) => analyze(args, seed),
        Command::Normalize { hamiltonian, params, grid, samples } => {
            normalize_cmd(hamiltonian, params, *grid, *samples, seed)
        }
        Command::Actions { potential, region, energies } => actions_cmd(potential, *region, energies),
        Command::Invert { potential, hamiltonian, params, r0, region, actions } => {
            if let Some(path) = potential {
                let pot = io::load_potential(path)?;
                let p = point(params, &pot)?;
                invert_cmd(&PotentialModel::new(pot, *r0), &p, *region, actions)
            } else {
                let path = hamiltonian.as_ref().expect("clap enforces one input");
                let hamiltonian = io::load_perturbed(path)?;
                let p = point(params, &hamiltonian.base)?;
                invert_cmd(&StandardFormModel { hamiltonian }, &p, *region, actions)
            }
        }
        Command::Singular { potential, z0 } => singular_cmd(potential, *z0, seed),
        Command::Oracle { eta, region, energies } => oracle_cmd(*eta, *region, energies),
        Command::Verify { suite } => verify_cmd(*suite, seed, cli.global.output.is_some()),
    }
}

/// Thread count from the flag, then the environment, then the hardware.
pub fn thread_count(flag: Option<usize>, env: Option<&str>) -> Result<Option<usize>, String> {
    if let Some(n) = flag {
        return if n > 0 { Ok(Some(n)) } else { Err("--threads must be positive".into()) };
    }
    match env.map(str::trim) {
        None | Some("") => Ok(None),
        Some(s) => match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!("{THREADS_ENV} must be a positive integer, got `{s}`")),
        },
    }
}

/// Parse `args`, run the subcommand and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let env = std::env::var(THREADS_ENV).ok();
    match thread_count(cli.global.threads, env.as_deref()) {
        Ok(Some(n)) => {
            // a second build in the same process keeps the first pool
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        Ok(None) => {}
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_USAGE;
        }
    }
    let out = match dispatch(&cli) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: {e}");
            return match e {
                Error::InvalidInput(_) => EXIT_USAGE,
                e if e.is_bound_failure() => EXIT_BOUND,
                _ => EXIT_DOMAIN,
            };
        }
    };
    let written = match &cli.global.output {
        Some(path) => std::fs::write(path, &out.text),
        None => std::io::stdout().lock().write_all(out.text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_DOMAIN;
    }
    if out.passed {
        EXIT_OK
    } else {
        EXIT_BOUND
    }
}
