use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use triwalk_core::footstep::{obstacle_course, plan_route, MapFile, PlannerConfig};
use triwalk_core::harness::{export_traces, max_withstand, run, RunSummary, Scenario};

#[derive(Parser)]
#[command(
    name = "triwalk",
    version,
    about = "Three-mass biped walking simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario in closed loop.
    Run {
        scenario: PathBuf,
        /// Directory for the CSV trace and JSON summary.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the noise seed of the scenario.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Bisect the largest push the controller survives.
    Withstand {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        direction: Direction,
        /// Stop once the bracket is narrower than this (N).
        #[arg(long, default_value_t = 5.0)]
        tol: f64,
        /// Force magnitude expected to survive (N).
        #[arg(long, default_value_t = 0.0)]
        low: f64,
        /// Force magnitude expected to fall (N).
        #[arg(long, default_value_t = 2000.0)]
        high: f64,
    },
    /// Plan footsteps on a map.
    Plan {
        map: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Planner settings as JSON; defaults otherwise.
        #[arg(long)]
        planner: Option<PathBuf>,
    },
    /// Write one of the built-in scenarios, or the obstacle course map, as JSON.
    Example {
        #[arg(value_enum)]
        which: Example,
        #[arg(long)]
        out: PathBuf,
        /// Push amplitude for the push example (N).
        #[arg(long, default_value_t = 300.0)]
        force: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    Fwd,
    Bwd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Example {
    Tracking,
    Noisy,
    Pushed,
    Omnidirectional,
    Course,
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
        } => run_scenario(&scenario, out.as_deref(), seed),
        Command::Withstand {
            scenario,
            direction,
            tol,
            low,
            high,
        } => {
            let template = load(&scenario)?;
            let sign = match direction {
                Direction::Fwd => 1.0,
                Direction::Bwd => -1.0,
            };
            let result = max_withstand(&template, sign, (low, high), tol)?;
            println!("{}", serde_json::to_string_pretty(&result)?);
            Ok(true)
        }
        Command::Plan { map, out, planner } => {
            let file = MapFile::load(&map).with_context(|| format!("reading {}", map.display()))?;
            let config = match planner {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(&p)?)
                    .with_context(|| format!("parsing {}", p.display()))?,
                None => PlannerConfig::default(),
            };
            let route = plan_route(&file, &config)?;
            std::fs::write(&out, serde_json::to_string_pretty(&route.plan)?)
                .with_context(|| format!("writing {}", out.display()))?;
            println!(
                "{} footsteps, path of {} cells",
                route.plan.steps.len(),
                route.path.len()
            );
            Ok(true)
        }
        Command::Example { which, out, force } => {
            let s = match which {
                Example::Tracking => Scenario::tracking(),
                Example::Noisy => Scenario::noisy(0),
                Example::Pushed => Scenario::pushed(force, 0),
                Example::Omnidirectional => Scenario::omnidirectional(),
                Example::Course => {
                    obstacle_course().save(&out)?;
                    return Ok(true);
                }
            };
            s.save(&out)?;
            Ok(true)
        }
    }
}

fn load(path: &Path) -> Result<Scenario> {
    Scenario::load(path).with_context(|| format!("loading scenario {}", path.display()))
}

fn run_scenario(path: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<bool> {
    let mut scenario = load(path)?;
    if let Some(seed) = seed {
        scenario.noise.seed = seed;
    }
    let metrics = run(&scenario)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let file = dir.join(format!("{}.csv", file_stem(&scenario.name)));
        export_traces(&metrics, &file)?;
    }
    report(&metrics.summary);
    if let Some(fault) = &metrics.summary.fault {
        bail!("controller fault: {fault}");
    }
    Ok(metrics.summary.survived())
}

fn file_stem(name: &str) -> String {
    let stem: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if stem.is_empty() {
        "run".into()
    } else {
        stem
    }
}

fn report(s: &RunSummary) {
    println!("scenario        {}", s.name);
    println!("cycles          {}", s.cycles);
    println!("completed       {}", s.completed);
    match s.fall_time {
        Some(t) => println!("fall            at {t:.2} s"),
        None => println!("fall            none"),
    }
    println!(
        "zmp inside      {:.2}% (scaled {:.2}%)",
        100.0 * s.zmp_inside_fraction(),
        100.0 * s.zmp_inside_scaled_fraction()
    );
    println!("max excursion   {:.4} m", s.max_excursion);
    println!(
        "rms stance/swing/zmp  {:.4} / {:.4} / {:.4} m",
        s.stance_rms, s.swing_rms, s.zmp_rms
    );
    println!("softened cycles {}", s.softened_cycles);
}
