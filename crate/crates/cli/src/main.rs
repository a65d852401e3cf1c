use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kinetic_core::config::RunConfig;
use kinetic_core::driver::{describe_plan, Simulation};
use kinetic_core::scenario::{parse_frequency, IntegratorKind, Preset};
use kinetic_core::spectrum::{bgk_model_operator, spectrum, Cluster};
use kinetic_core::{Error, VelocityGrid};

#[derive(Parser)]
#[command(name = "kinetic", version, about = "Projective integration of stiff kinetic equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write snapshots plus a manifest.
    Run(RunArgs),
    /// Print the resolved integrator plan without running.
    Plan(RunArgs),
    /// Eigenvalues of a linearized BGK operator.
    Spectrum(SpectrumArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file with key = value lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    /// desk or paper.
    #[arg(long)]
    preset: Option<Preset>,
    /// fe, rk4, pfe, prk4, tpfe or tprk4.
    #[arg(long)]
    integrator: Option<IntegratorKind>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Inner steps per projective level.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Any other setting, e.g. --set nu=rho --set m=14.24,11.83.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Only bgk is supported.
    #[arg(long, default_value = "bgk")]
    model: String,
    /// 1 (or any positive constant) or rho.
    #[arg(long, default_value = "1")]
    nu: String,
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    /// Velocity nodes per axis.
    #[arg(long, default_value_t = 16)]
    velocities: usize,
    #[arg(long, default_value_t = 8.0)]
    extent: f64,
    /// Velocity dimensions.
    #[arg(long, default_value_t = 2)]
    dims: usize,
    /// Spatial cells used for density-dependent or transport linearizations.
    #[arg(long, default_value_t = 6)]
    cells: usize,
    /// Include free transport in the linearization.
    #[arg(long)]
    transport: bool,
    /// CSV file for the eigenvalues; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn build_config(a: &RunArgs) -> Result<RunConfig, Error> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::new(""),
    };
    if let Some(s) = &a.scenario {
        cfg.scenario = s.clone();
    }
    if cfg.scenario.is_empty() {
        return Err(Error::Config("no scenario given (use --scenario or a config file)".into()));
    }
    if let Some(p) = a.preset {
        cfg.preset = p;
    }
    if let Some(i) = a.integrator {
        cfg.integrator = Some(i);
    }
    if let Some(e) = a.epsilon {
        cfg.set("epsilon", &e.to_string())?;
    }
    if let Some(k) = a.k {
        cfg.k = Some(k);
    }
    if let Some(l) = a.levels {
        cfg.levels = Some(l);
    }
    if let Some(o) = &a.out {
        cfg.out = o.clone();
    }
    for s in &a.set {
        cfg.apply_override(s)?;
    }
    Ok(cfg)
}

fn cmd_run(a: &RunArgs) -> Result<(), Error> {
    let cfg = build_config(a)?;
    let sim = Simulation::from_config(&cfg)?;
    eprintln!("{}", describe_plan(&sim));
    let nv = sim.field.n_velocities();
    let outcome = kinetic_core::driver::run_simulation(sim, &cfg.out)?;
    let m = &outcome.manifest;
    if let Some(e) = outcome.error {
        if let Some(r) = &m.rejection {
            eprintln!(
                "step rejected at t={:.6e}: cell {} velocity {} (of {nv}); last valid state t={:.6e} in {}",
                r.time,
                r.cell,
                r.velocity,
                r.last_valid_time,
                r.last_valid_file.display()
            );
        }
        return Err(e);
    }
    println!(
        "completed {} outer steps ({} RHS evaluations) in {:.2} s; output in {}",
        m.outer_steps,
        m.stats.rhs_evals,
        m.wall_time_s,
        cfg.out.display()
    );
    Ok(())
}

fn cmd_plan(a: &RunArgs) -> Result<(), Error> {
    let cfg = build_config(a)?;
    println!("{}", describe_plan(&Simulation::from_config(&cfg)?));
    Ok(())
}

fn cmd_spectrum(a: &SpectrumArgs) -> Result<(), Error> {
    if a.model != "bgk" {
        return Err(Error::Config(format!("unsupported model '{}' (only bgk)", a.model)));
    }
    if !(a.epsilon > 0.0) {
        return Err(Error::Config("epsilon must be positive".into()));
    }
    let nu = parse_frequency(&a.nu)?;
    let vgrid = match a.dims {
        1 => VelocityGrid::line(a.extent, a.velocities)?,
        2 => VelocityGrid::square(a.extent, a.velocities)?,
        d => return Err(Error::Config(format!("velocity dimension {d} is not 1 or 2"))),
    };
    let op = bgk_model_operator(&vgrid, nu, a.epsilon, a.cells, a.transport)?;
    let rep = spectrum(&op, 0)?;
    let fast: Vec<f64> = rep.of_cluster(Cluster::Fast).map(|z| z.norm()).collect();
    eprintln!("operator     {}", op.description());
    eprintln!("dimension    {}", op.dim());
    eprintln!("kernel       {}", rep.kernel_dim);
    eprintln!("slow / fast  {} / {}", rep.slow_count(), rep.fast_count());
    if !fast.is_empty() {
        let lo = fast.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = fast.iter().copied().fold(0.0, f64::max);
        eprintln!("|fast|       [{lo:.6e}, {hi:.6e}]");
    }
    eprintln!("gap ratio    {:.6e}", rep.gap_ratio);
    match &a.out {
        Some(p) => rep.write_csv(p)?,
        None => {
            println!("re,im");
            for z in &rep.eigenvalues {
                println!("{:.16e},{:.16e}", z.re, z.im);
            }
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Infeasible(_) => 2,
        Error::StepRejected { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Plan(a) => cmd_plan(a),
        Command::Spectrum(a) => cmd_spectrum(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
