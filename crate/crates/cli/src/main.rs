use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stefan_cli::commands::{self, law_name};
use stefan_cli::{output_root, CliError, Overrides, ScenarioConfig};

/// Two-phase Stefan problem experiment runner.
///
/// Exit codes: 0 success, 1 i/o error, 2 config error, 3 admissibility
/// failure, 4 numerical failure.
#[derive(Parser)]
#[command(name = "stefan", version)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (TOML). Defaults to the built-in zinc preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output root. Falls back to `outputs.dir`, then $STEFAN_OUT_DIR, then ./runs.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Nodes per phase.
    #[arg(long)]
    grid: Option<usize>,
    /// Time step (s); the sampling period in seconds is kept.
    #[arg(long)]
    dt: Option<f64>,
    /// Simulated horizon (s).
    #[arg(long)]
    horizon: Option<f64>,
    /// Worker threads (sweep and crosscheck ladders).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Verb {
    /// Check, simulate and write one run directory.
    Run(Common),
    /// Both designs on the reference scenario: s(t), q_c(t), T_l(0, t).
    PresetFig3(Common),
    /// Settling times of both designs at 10/5/2/1 % bands.
    PresetFig5(Common),
    /// Primary solver against the enthalpy oracle.
    Crosscheck {
        #[command(flatten)]
        common: Common,
        /// Refinement levels (grid x2, oracle cells x2, dt /2 per level).
        #[arg(long, default_value_t = 1)]
        levels: u32,
    },
    /// Robust law over the config's [sweep] perturbation grid.
    Sweep(Common),
    /// Admissibility report only.
    Check(Common),
}

fn load(c: &Common) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match &c.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::zinc(),
    };
    cfg.apply(&Overrides {
        grid: c.grid,
        dt: c.dt,
        horizon: c.horizon,
    });
    cfg.validate()?;
    Ok(cfg)
}

fn set_workers(n: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        // only fails if the global pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn report(out: &commands::RunOutcome) {
    println!("{}", out.dir.display());
    if let Some(e) = &out.manifest.error {
        eprintln!("run stopped early: {e}");
    }
    for w in &out.manifest.warnings {
        eprintln!("warning: {w}");
    }
}

fn print_file(path: PathBuf) {
    if let Ok(text) = std::fs::read_to_string(path) {
        print!("{text}");
    }
}

fn execute(verb: Verb) -> Result<i32, CliError> {
    match verb {
        Verb::Run(c) => {
            let cfg = load(&c)?;
            let root = output_root(c.out.as_deref(), Some(&cfg));
            let out = commands::run_scenario(&cfg, &root, "run")?;
            report(&out);
            Ok(out.exit_code())
        }
        Verb::PresetFig3(c) => {
            let cfg = load(&c)?;
            set_workers(c.workers)?;
            let root = output_root(c.out.as_deref(), Some(&cfg));
            let out = commands::preset_fig3(&cfg, &root)?;
            report(&out);
            print_file(out.dir.join("fig3.txt"));
            Ok(0)
        }
        Verb::PresetFig5(c) => {
            let cfg = load(&c)?;
            set_workers(c.workers)?;
            let root = output_root(c.out.as_deref(), Some(&cfg));
            let out = commands::preset_fig5(&cfg, &root)?;
            report(&out);
            print_file(out.dir.join("settling.csv"));
            Ok(0)
        }
        Verb::Crosscheck { common: c, levels } => {
            let cfg = load(&c)?;
            set_workers(c.workers)?;
            let root = output_root(c.out.as_deref(), Some(&cfg));
            let out = commands::crosscheck(&cfg, levels, &root)?;
            report(&out);
            print_file(out.dir.join("report.txt"));
            Ok(0)
        }
        Verb::Sweep(c) => {
            let cfg = load(&c)?;
            let root = output_root(c.out.as_deref(), Some(&cfg));
            let (out, cells) = commands::sweep(&cfg, c.workers, &root)?;
            report(&out);
            let converged = cells.iter().filter(|c| c.converged).count();
            println!(
                "{} cells ({}), {converged} reached the 1% band",
                cells.len(),
                law_name(&stefan_core::Law::Robust {
                    eps_l: 0.0,
                    eps_s: 0.0,
                    eps_f: 0.0
                })
            );
            Ok(0)
        }
        Verb::Check(c) => {
            let cfg = load(&c)?;
            let stdout = std::io::stdout();
            let ok = commands::check(&cfg, &mut stdout.lock())?;
            Ok(if ok { 0 } else { 3 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.verb) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
