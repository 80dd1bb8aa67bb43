//! `kslab`: hypothesis checks, single runs, mass sweeps and certificates
//! for the radial Keller-Segel laboratory.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kslab_core::harness::experiment::{certify, prepare, run_experiment};
use kslab_core::harness::{sweep_mass, ExperimentConfig, SolverChoice};
use kslab_core::model::HypothesisReport;

#[derive(Parser)]
#[command(name = "kslab", version, about = "Radial Keller-Segel experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the blow-up and global-existence hypotheses of the model.
    Check(Common),
    /// Run one experiment.
    Run(Common),
    /// Run the configured mass list in parallel (KSLAB_THREADS caps workers).
    Sweep(Common),
    /// Search for a blow-up certificate for the configured mass.
    Certify(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment file; defaults to the dichotomy model at m0 = 0.9 * 8 pi.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for series, results and certificates.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    solver: Option<SolverChoice>,
    /// Number of grid cells.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
}

impl Common {
    fn load(&self) -> kslab_core::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_path(path)?,
            None => ExperimentConfig::dichotomy(0.9),
        };
        if let Some(dir) = &self.out {
            cfg.run.out_dir = Some(dir.clone());
        }
        if let Some(s) = self.solver {
            cfg.run.solver = s;
        }
        if let Some(n) = self.grid {
            cfg.grid = cfg.grid.with_cells(n);
        }
        if let Some(t) = self.t_end {
            cfg.run.t_end = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_hypotheses(label: &str, rep: &HypothesisReport) {
    println!("{label}: {}", if rep.pass { "hold" } else { "fail" });
    for v in &rep.violations {
        println!("  {v}");
    }
}

fn check(args: &Common) -> kslab_core::Result<()> {
    let cfg = args.load()?;
    let prep = prepare(&cfg)?;
    print_hypotheses("blow-up hypotheses", &prep.blowup_hypotheses);
    print_hypotheses("global-existence hypotheses", &prep.global_hypotheses);
    for note in &prep.notes {
        println!("note: {note}");
    }
    Ok(())
}

fn run(args: &Common) -> kslab_core::Result<()> {
    let cfg = args.load()?;
    let report = run_experiment(&cfg)?;
    for note in &report.notes {
        println!("note: {note}");
    }
    for r in &report.runs {
        println!(
            "{}: {} at t = {:.6e} (t_end {:.6e}), peak {:.6e}, {} steps",
            r.solver,
            r.outcome.label(),
            r.t_final,
            r.t_end,
            r.peak_linf,
            r.accepted_steps
        );
        for t in &r.monitors.tallies {
            println!(
                "  {:<24} {:>6} checks {:>4} failures  worst margin {:.3e}",
                t.name, t.checks, t.failures, t.worst_margin
            );
        }
        if let Some(odi) = &r.odi {
            println!(
                "  odi: {} samples, {} violations",
                odi.checked,
                odi.violations.len()
            );
        }
        if !r.estimates.is_empty() {
            println!(
                "  integral estimates: {} snapshots, {} failing",
                r.estimates.len(),
                r.estimate_failures
            );
        }
    }
    if let Some(worst) = report.discrepancy.iter().map(|d| d.1).reduce(f64::max) {
        println!("max cross-solver discrepancy: {worst:.3e}");
    }
    Ok(())
}

fn sweep(args: &Common) -> kslab_core::Result<()> {
    let cfg = args.load()?;
    let rows = sweep_mass(&cfg, &cfg.sweep.m0_over_8pi)?;
    println!("m0_over_8pi,solver,outcome,t_final,peak_linf");
    for r in &rows {
        println!(
            "{:.6},{},{},{:.6e},{:.6e}",
            r.m0_over_8pi, r.solver, r.outcome, r.t_final, r.peak_linf
        );
        if r.outcome == "error" {
            eprintln!("m0/8pi = {}: {}", r.m0_over_8pi, r.message);
        }
    }
    Ok(())
}

fn certify_cmd(args: &Common) -> kslab_core::Result<()> {
    let cfg = args.load()?;
    let params = cfg.model.build()?;
    let text = certify(cfg.init.m0(), &params, &cfg.certificate)?;
    print!("{text}");
    if let Some(dir) = &cfg.run.out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("certificate.txt"), &text)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Check(a) => check(a),
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Certify(a) => certify_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kslab: {e}");
            ExitCode::from(2)
        }
    }
}
