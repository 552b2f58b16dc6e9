//! `sparsedom` — deterministic experiment runner for sparse domination on
//! dyadic grids. See README for the config schema and output formats.

use clap::{Parser, Subcommand};
use sparsedom::dyadic::RootGeometry;
use sparsedom::runner::{
    self, ExperimentConfig, ExperimentKind, FamilyConfig, GeometryConfig, InputConfig,
    ParamsConfig,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "sparsedom", version, about = "sparse domination experiments on dyadic grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<String>,
    },
    /// Generate a seeded input file (grid / measure / weight / halfspace).
    Generate {
        /// uniform | spiky | smooth | measure | weight | halfspace
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 6)]
        depth: u32,
        #[arg(long)]
        atoms: Option<usize>,
        #[arg(long)]
        power: Option<f64>,
        #[arg(long)]
        floor: Option<f64>,
        #[arg(long)]
        density: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Polynomial sparse domination and self-improvement.
    Poincare {
        #[arg(long, default_value_t = 0)]
        m: u32,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        #[arg(long, default_value = "1/2")]
        eta: String,
        #[arg(long)]
        weight: Option<String>,
        /// oscillation | power
        #[arg(long, default_value = "oscillation")]
        functional: String,
        /// pointwise | mq | ratio
        #[arg(long, default_value = "pointwise")]
        mode: String,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 6)]
        depth: u32,
        #[arg(long)]
        out: Option<String>,
    },
    /// Tent-space sparse domination.
    Tent {
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value = "1/2")]
        eta: String,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        depth: u32,
        #[arg(long)]
        out: Option<String>,
    },
    /// Vertical square function sparse domination.
    Square {
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long, default_value = "1/2")]
        eta: String,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        depth: u32,
        #[arg(long)]
        out: Option<String>,
    },
    /// Nonlinear dyadic potential and its good-λ curve.
    Potential {
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        #[arg(long)]
        measure: Option<String>,
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.75,0.9")]
        lambda_quantiles: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1.0")]
        eps_grid: Vec<f64>,
        /// also emit the good-λ curve
        #[arg(long, default_value_t = true)]
        curve: bool,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 8)]
        depth: u32,
        #[arg(long)]
        out: Option<String>,
    },
}

fn geometry(n: usize, depth: u32) -> GeometryConfig {
    GeometryConfig { n, depth, side: "1".into(), origin: None }
}

fn execute(cfg: &ExperimentConfig, out_flag: Option<&str>) -> ExitCode {
    let out_dir = runner::resolve_out_dir(cfg, out_flag);
    let started = std::time::Instant::now();
    let result = runner::run_and_write(cfg, &out_dir);
    // wall time goes to the console only; the report files stay byte-identical
    // across runs of the same config
    let elapsed = started.elapsed().as_secs_f64();
    match result {
        Ok(true) => {
            println!("PASS in {elapsed:.2}s: report written to {}", out_dir.display());
            ExitCode::SUCCESS
        }
        Ok(false) => {
            eprintln!("FAIL in {elapsed:.2}s: assertions failed; report written to {}", out_dir.display());
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error reading {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            match ExperimentConfig::from_json(&text) {
                Ok(cfg) => execute(&cfg, out.as_deref()),
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Generate { kind, seed, n, depth, atoms, power, floor, density, out } => {
            let geom = match RootGeometry::new(
                n,
                depth,
                sparsedom::dyadic::parse_rational("1").unwrap(),
                vec![sparsedom::dyadic::parse_rational("0").unwrap(); n],
            ) {
                Ok(g) => Arc::new(g),
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let spec = InputConfig {
                kind: kind.clone(),
                atoms,
                power,
                floor,
                density,
                lo: None,
                hi: None,
                path: None,
            };
            let res = match kind.as_str() {
                "measure" => runner::generate_measure(&geom, &spec, seed)
                    .and_then(|m| runner::save_measure(&m, Path::new(&out))),
                "weight" => runner::generate_weight(&geom, &spec, seed)
                    .and_then(|w| runner::save_grid(&w.0, Path::new(&out))),
                "halfspace" => runner::generate_halfspace(&geom, &spec, seed)
                    .and_then(|h| runner::save_halfspace(&h, Path::new(&out))),
                _ => runner::generate_grid(&geom, &spec, seed)
                    .and_then(|f| runner::save_grid(&f, Path::new(&out))),
            };
            match res {
                Ok(()) => {
                    println!("wrote {}", out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Poincare {
            m,
            p,
            s,
            eta,
            weight,
            functional,
            mode,
            seeds,
            n,
            depth,
            out,
        } => {
            let cfg = ExperimentConfig {
                experiment: ExperimentKind::Poincare,
                geometry: geometry(n, depth),
                family: FamilyConfig { kind: "poincare".into(), m: Some(m), ..Default::default() },
                params: ParamsConfig {
                    etas: vec![eta],
                    m,
                    p,
                    s,
                    mode: Some(mode),
                    functional: Some(functional),
                    weight,
                    ..Default::default()
                },
                input: InputConfig::default(),
                seeds,
                out: None,
            };
            execute(&cfg, out.as_deref())
        }
        Command::Tent { alpha, eta, seeds, n, depth, out } => {
            let cfg = ExperimentConfig {
                experiment: ExperimentKind::Tent,
                geometry: geometry(n, depth),
                family: FamilyConfig { kind: "tent".into(), ..Default::default() },
                params: ParamsConfig { etas: vec![eta], alpha, ..Default::default() },
                input: InputConfig {
                    kind: "uniform".into(),
                    density: Some(0.3),
                    ..Default::default()
                },
                seeds,
                out: None,
            };
            execute(&cfg, out.as_deref())
        }
        Command::Square { q, eta, seeds, n, depth, out } => {
            let cfg = ExperimentConfig {
                experiment: ExperimentKind::Square,
                geometry: geometry(n, depth),
                family: FamilyConfig { kind: "square".into(), ..Default::default() },
                params: ParamsConfig { etas: vec![eta], q: Some(q), ..Default::default() },
                input: InputConfig { kind: "spiky".into(), atoms: Some(2), ..Default::default() },
                seeds,
                out: None,
            };
            execute(&cfg, out.as_deref())
        }
        Command::Potential {
            gamma,
            q,
            delta,
            measure,
            lambda_quantiles,
            eps_grid,
            curve,
            seeds,
            n,
            depth,
            out,
        } => {
            let input = match measure {
                Some(path) => InputConfig { kind: "file".into(), path: Some(path), ..Default::default() },
                None => InputConfig { kind: "measure".into(), atoms: Some(1), ..Default::default() },
            };
            let cfg = ExperimentConfig {
                experiment: if curve {
                    ExperimentKind::GoodlambdaSums
                } else {
                    ExperimentKind::Potential
                },
                geometry: geometry(n, depth),
                family: FamilyConfig { kind: "dyadic-sums".into(), ..Default::default() },
                params: ParamsConfig {
                    gamma,
                    q: Some(q),
                    delta,
                    lambda_quantiles,
                    eps_grid,
                    ..Default::default()
                },
                input,
                seeds,
                out: None,
            };
            execute(&cfg, out.as_deref())
        }
    }
}
