use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use microgrid_dp::calibration::{calibrate, CalibrationInputs};
use microgrid_dp::constraints::feasible_actions;
use microgrid_dp::cost::expected_stage_cost;
use microgrid_dp::dynamics::{moments, TransitionMoments};
use microgrid_dp::grid::{build_grid, StateGrid};
use microgrid_dp::io;
use microgrid_dp::kernel::Kernel;
use microgrid_dp::simulator::{simulate_path, Scenario, SimulationMode, SimulationOptions};
use microgrid_dp::solver::{solve, MicrogridMdp, PolicyTable, Solution};
use microgrid_dp::{Action, Error, ModelConfig, State};

const THREADS_ENV: &str = "MICROGRID_DP_THREADS";

#[derive(Parser)]
#[command(name = "microgrid-dp", version, about = "Optimal dispatch of a solar, battery and generator microgrid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration file.
    Validate { config: PathBuf },
    /// Calibrate self-discharge, battery capacity and degradation cost; prints JSON.
    Calibrate {
        config: PathBuf,
        #[arg(long, default_value_t = 0.98)]
        q_star: f64,
        #[arg(long, default_value_t = 96.0)]
        idle_hours: f64,
        /// Charge window start and end [h].
        #[arg(long, num_args = 2, value_names = ["START", "END"])]
        day_window: Option<Vec<f64>>,
        /// Discharge window start and end [h]; may extend past 24.
        #[arg(long, num_args = 2, value_names = ["START", "END"])]
        night_window: Option<Vec<f64>>,
        #[arg(long)]
        confidence: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        z1: f64,
        /// Replacement price of the battery [EUR]; defaults to the price giving 0.05 EUR/kWh.
        #[arg(long)]
        replacement_price: Option<f64>,
        #[arg(long)]
        lifetime_h: Option<f64>,
        /// Discount rate used for the lifetime [1/h].
        #[arg(long)]
        degradation_rho: Option<f64>,
        #[arg(long)]
        max_abs_demand: Option<f64>,
    },
    /// One-step conditional moments, feasible actions and expected cost; prints JSON.
    Moments {
        config: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, allow_hyphen_values = true)]
        z: f64,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        g: f64,
        #[arg(long)]
        action: String,
    },
    /// Solve the dynamic program and export tables.
    Solve {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Steps to export as value/policy slices (default: 0, N-12, N-1, N).
        #[arg(long, value_delimiter = ',')]
        steps: Option<Vec<usize>>,
    },
    /// Simulate paths under an exported policy.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        scenario: String,
        /// Number of paths.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
        /// Base seed of the scenario.
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Snap states to grid points after every transition.
        #[arg(long)]
        discrete: bool,
    },
    /// Solve and simulate the four weekly weather scenarios.
    PaperRun {
        config: PathBuf,
        #[arg(long, default_value = "paper-run")]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match configure_threads().and_then(|_| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(err) if err.is_numerical() => 3,
        Some(Error::Io { .. }) => 2,
        Some(_) => 1,
        None => {
            if e.chain().any(|c| c.is::<std::io::Error>()) {
                2
            } else {
                1
            }
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .with_context(|| format!("{THREADS_ENV} must be a positive integer, got '{v}'"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Validate { config } => {
            let cfg = io::load_config(&config)?;
            println!("{}: valid (hash {})", config.display(), io::config_hash(&cfg));
            Ok(())
        }
        Command::Calibrate {
            config,
            q_star,
            idle_hours,
            day_window,
            night_window,
            confidence,
            z1,
            replacement_price,
            lifetime_h,
            degradation_rho,
            max_abs_demand,
        } => {
            let cfg = io::load_config(&config)?;
            let mut inputs = CalibrationInputs {
                q_star,
                idle_hours,
                z1,
                ..Default::default()
            };
            if let Some(w) = day_window {
                inputs.window_charge = (w[0], w[1]);
            }
            if let Some(w) = night_window {
                inputs.window_discharge = (w[0], w[1]);
            }
            if let Some(p) = confidence {
                inputs.confidence = p;
            }
            if let Some(v) = lifetime_h {
                inputs.lifetime_h = v;
            }
            if let Some(v) = degradation_rho {
                inputs.degradation_rho = v;
            }
            if let Some(v) = max_abs_demand {
                inputs.max_abs_demand = v;
            }
            inputs.replacement_price = replacement_price.unwrap_or_else(|| {
                microgrid_dp::calibration::replacement_price_for(
                    0.05,
                    inputs.lifetime_h,
                    inputs.degradation_rho,
                    inputs.max_abs_demand,
                )
            });
            let report = calibrate(&cfg, &inputs)?;
            for w in &report.generator.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Moments { config, n, z, q, g, action } => {
            let cfg = io::load_config(&config)?;
            if n >= cfg.steps() {
                bail!(Error::InvalidArgument(format!("step {n} must be below {}", cfg.steps())));
            }
            let a: Action = action.parse()?;
            let x = State::new(z, q, g);
            #[derive(Serialize)]
            struct Out {
                step: usize,
                state: State,
                action: Action,
                residual_demand: f64,
                moments: TransitionMoments,
                expected_stage_cost_eur: f64,
                feasible: Vec<Action>,
            }
            let out = Out {
                step: n,
                state: x,
                action: a,
                residual_demand: cfg.residual_demand(n, z),
                moments: moments(n, &x, a, &cfg),
                expected_stage_cost_eur: expected_stage_cost(n, &x, a, &cfg).value,
                feasible: feasible_actions(n, &x, &cfg).iter().collect(),
            };
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(())
        }
        Command::Solve { config, out, steps } => {
            let started = io::now();
            let cfg = io::load_config(&config)?;
            let grid = build_grid(&cfg);
            let sol = solve_config(&cfg, &grid)?;
            let steps = steps.unwrap_or_else(|| default_slices(cfg.steps()));
            let files = export_solution(&sol, &cfg, &grid, &steps, &out)?;
            io::RunManifest::new(&cfg, None, started, io::relative_names(&out, &files)).write(&out.join("manifest.json"))?;
            eprintln!("value at the standard start: {:.4} EUR", standard_start_value(&sol, &grid)?);
            Ok(())
        }
        Command::Simulate {
            config,
            policy,
            scenario,
            seeds,
            out,
            seed,
            discrete,
        } => {
            let started = io::now();
            let cfg = io::load_config(&config)?;
            let grid = build_grid(&cfg);
            check_policy_origin(&policy, &cfg)?;
            let table = io::read_policy_table(&policy.join(io::POLICY_FILE), &grid, cfg.steps())?;
            let sc = Scenario::builtin(&scenario, seed)?;
            let mut opts = SimulationOptions::standard(&grid);
            if discrete {
                opts.mode = SimulationMode::DiscreteChain;
            }
            let files = simulate_scenario(&table, &sc, seeds, &cfg, &grid, &opts, &out)?;
            io::RunManifest::new(&cfg, Some(seed), started, io::relative_names(&out, &files)).write(&out.join("manifest.json"))?;
            Ok(())
        }
        Command::PaperRun { config, out, seeds, seed } => {
            let started = io::now();
            let cfg = io::load_config(&config)?;
            let grid = build_grid(&cfg);
            let sol = solve_config(&cfg, &grid)?;
            let mut files = export_solution(&sol, &cfg, &grid, &default_slices(cfg.steps()), &out)?;
            let opts = SimulationOptions::standard(&grid);
            let mut summary = Vec::new();
            for name in Scenario::WEEKS {
                let sc = Scenario::builtin(name, seed)?;
                let dir = out.join("paths").join(name);
                let written = simulate_scenario(&sol.policy, &sc, seeds, &cfg, &grid, &opts, &dir)?;
                summary.push((name, mean_cost(&written)?));
                files.extend(written);
            }
            for (name, cost) in &summary {
                eprintln!("{name}: mean discounted cost {cost:.4} EUR over {seeds} paths");
            }
            io::RunManifest::new(&cfg, Some(seed), started, io::relative_names(&out, &files)).write(&out.join("manifest.json"))?;
            Ok(())
        }
    }
}

fn default_slices(n: usize) -> Vec<usize> {
    let mut s = vec![0, n.saturating_sub(12), n.saturating_sub(1), n];
    s.sort_unstable();
    s.dedup();
    s
}

fn solve_config(cfg: &ModelConfig, grid: &StateGrid) -> anyhow::Result<Solution> {
    let kernel = Kernel::new(cfg, grid);
    let t = std::time::Instant::now();
    let sol = solve(&MicrogridMdp::new(&kernel))?;
    eprintln!(
        "solved {} steps x {} states in {:.1} s",
        cfg.steps(),
        grid.num_states(),
        t.elapsed().as_secs_f64()
    );
    Ok(sol)
}

fn export_solution(
    sol: &Solution,
    cfg: &ModelConfig,
    grid: &StateGrid,
    steps: &[usize],
    out: &Path,
) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = io::export_value_policy(sol, cfg, grid, steps, out)?;
    let policy = out.join(io::POLICY_FILE);
    io::write_policy_table(&sol.policy, grid, &policy)?;
    let values = out.join(io::VALUES_FILE);
    io::write_value_table(&sol.values, grid, &values)?;
    let grid_path = out.join("grid.json");
    io::write_json_file(&grid_path, &grid.summary())?;
    files.extend([policy, values, grid_path]);
    Ok(files)
}

fn standard_start_value(sol: &Solution, grid: &StateGrid) -> anyhow::Result<f64> {
    let start = SimulationOptions::standard(grid).initial;
    Ok(sol.values.get(0, grid.locate(&start)?))
}

fn check_policy_origin(dir: &Path, cfg: &ModelConfig) -> anyhow::Result<()> {
    let meta = dir.join("metadata.json");
    if let Ok(text) = std::fs::read_to_string(&meta) {
        let v: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", meta.display()))?;
        if v["config_hash"].as_str() != Some(io::config_hash(cfg).as_str()) {
            bail!(Error::InvalidArgument(format!(
                "policy in {} was solved for a different configuration",
                dir.display()
            )));
        }
    }
    Ok(())
}

fn simulate_scenario(
    policy: &PolicyTable,
    sc: &Scenario,
    paths: u64,
    cfg: &ModelConfig,
    grid: &StateGrid,
    opts: &SimulationOptions,
    dir: &Path,
) -> anyhow::Result<Vec<PathBuf>> {
    io::ensure_dir(dir)?;
    (0..paths)
        .into_par_iter()
        .map(|i| {
            let records = simulate_path(policy, sc, i, cfg, grid, opts)?;
            let path = dir.join(format!("path_{i:03}.csv"));
            io::write_path(&records, &path)?;
            Ok(path)
        })
        .collect()
}

fn mean_cost(files: &[PathBuf]) -> anyhow::Result<f64> {
    let mut total = 0.0;
    for f in files {
        let records = io::read_path(f)?;
        total += records.last().map(|r| r.cum_cost_eur).unwrap_or(0.0);
    }
    Ok(total / files.len().max(1) as f64)
}
