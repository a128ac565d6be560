//! Command-line surface: eta curves, region frontiers, scheme simulation,
//! rational elimination, and the acceptance gate.
//!
//! Every invocation is resolved into a [`RunConfig`] before executing;
//! `--config-out` records it and `exporegion run --config <path>` replays
//! it, byte-identically for identical seeds.
//!
//! Exit codes: 0 success (fme: feasible), 1 infeasible / failed checks,
//! 2 invalid input (spec or system parse), 3 region mode/K mismatch,
//! 4 simulate type-I budget violation.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use exporegion::acceptance;
use exporegion::eta_solver::{eta_curve, SolverConfig, USize};
use exporegion::exponent_regions::{
    expected_rate_frontier_k2, general_region_frontier, max_rate_region_k2, max_rate_region_khop,
    nested_frontier, FrontierPoint, GeneralScanConfig, Instance, RegionContext, RegionFrontier,
};
use exporegion::export;
use exporegion::linear_feasibility::{Feasibility, InequalitySystem};
use exporegion::multiplex_calculus::{simulate, MultiplexPlan};
use exporegion::source_model::{dsbs, source_from_json, source_from_value, MarkovChainSource};

#[derive(Parser)]
#[command(
    name = "exporegion",
    version,
    about = "error-exponent regions for multi-hop hypothesis testing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a single-link exponent curve eta_l on a rate grid
    Eta(EtaArgs),
    /// Evaluate an exponents-region frontier
    Region(RegionArgs),
    /// Monte-Carlo validation of a multiplexing plan
    Simulate(SimArgs),
    /// Fourier-Motzkin elimination and feasibility over rational systems
    Fme(FmeArgs),
    /// Replay a recorded run configuration
    Run(RunArgs),
    /// Run the full acceptance suite
    Check,
}

// ---------------------------------------------------------------------------
// run configurations (the serializable, replayable form of a command)
// ---------------------------------------------------------------------------

/// Source reference: a spec path, or the spec inlined.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum SourceRef {
    Path { path: String },
    Inline(serde_json::Value),
}

impl SourceRef {
    fn load(&self) -> Result<MarkovChainSource, String> {
        match self {
            SourceRef::Path { path } => {
                let text =
                    fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}"))?;
                source_from_json(&text).map_err(|e| e.to_string())
            }
            SourceRef::Inline(value) => source_from_value(value).map_err(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
enum Mode {
    /// max-rate rectangle corner
    #[serde(rename = "max")]
    Max,
    /// two-hop expected-rate frontier
    #[value(name = "expected-k2")]
    #[serde(rename = "expected-k2")]
    ExpectedK2,
    /// general sigma-allocation grid evaluator
    #[value(name = "theorem3")]
    #[serde(rename = "theorem3")]
    General,
    /// nested (K+1)-subscheme parametrization
    #[value(name = "conjecture")]
    #[serde(rename = "conjecture")]
    Nested,
}

/// A fully-resolved, replayable command.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
enum RunConfig {
    Eta {
        source: SourceRef,
        link: usize,
        grid: Vec<f64>,
        solver: SolverConfig,
        format: Format,
        #[serde(skip_serializing_if = "Option::is_none")]
        out: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        svg: Option<String>,
    },
    Region {
        source: SourceRef,
        rates: Vec<f64>,
        epsilons: Vec<f64>,
        mode: Mode,
        samples: usize,
        solver: SolverConfig,
        format: Format,
        #[serde(skip_serializing_if = "Option::is_none")]
        out: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        witness: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        svg: Option<String>,
    },
    Simulate {
        plan: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        source: Option<SourceRef>,
        n: u64,
        trials: u64,
        seed: u64,
        #[serde(skip_serializing_if = "Option::is_none")]
        out: Option<String>,
    },
    Fme {
        system: String,
        #[serde(default)]
        eliminate: Vec<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        out: Option<String>,
    },
}

// ---------------------------------------------------------------------------
// argument structs
// ---------------------------------------------------------------------------

#[derive(Args)]
struct SourceArgs {
    /// JSON source spec path
    #[arg(long, conflicts_with = "dsbs")]
    source: Option<PathBuf>,
    /// binary chain shorthand: p0,flip1,flip2[,flip3...]
    #[arg(long)]
    dsbs: Option<String>,
}

impl SourceArgs {
    fn resolve(&self) -> Result<SourceRef, String> {
        match (&self.source, &self.dsbs) {
            (Some(path), None) => Ok(SourceRef::Path {
                path: path.to_string_lossy().into_owned(),
            }),
            (None, Some(spec)) => {
                let vals: Vec<f64> = spec
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<f64>()
                            .map_err(|_| format!("bad number `{s}`"))
                    })
                    .collect::<Result<_, _>>()?;
                if vals.len() < 2 {
                    return Err("dsbs shorthand needs p0 and at least one flip".into());
                }
                Ok(SourceRef::Inline(serde_json::json!({
                    "dsbs": {"p0": vals[0], "flips": vals[1..]}
                })))
            }
            _ => Err("provide exactly one of --source or --dsbs".into()),
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 32)]
    restarts: usize,
    #[arg(long, default_value_t = 65)]
    lambda_samples: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// auxiliary alphabet size: "auto" (= input + 1) or an integer
    #[arg(long, default_value = "auto")]
    u_size: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig, String> {
        let u_size = if self.u_size == "auto" {
            USize::Auto
        } else {
            USize::Fixed(
                self.u_size
                    .parse()
                    .map_err(|_| format!("bad --u-size `{}`", self.u_size))?,
            )
        };
        Ok(SolverConfig {
            restarts: self.restarts,
            lambda_samples: self.lambda_samples,
            tol: self.tol,
            u_size,
            seed: self.seed,
        })
    }
}

#[derive(Args)]
struct EtaArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// link index, 1-based
    #[arg(long)]
    link: usize,
    /// rate grid: "start:end:step", a single rate, or a comma list
    #[arg(long)]
    grid: String,
    #[command(flatten)]
    solver: SolverArgs,
    /// output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// also write an SVG rendering
    #[arg(long)]
    svg: Option<PathBuf>,
    /// record the resolved run configuration here
    #[arg(long)]
    config_out: Option<PathBuf>,
}

#[derive(Args)]
struct RegionArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// per-link expected-rate budgets, comma separated
    #[arg(long)]
    rates: String,
    /// per-center type-I budgets, comma separated
    #[arg(long)]
    epsilons: String,
    #[arg(long, value_enum)]
    mode: Mode,
    /// scan samples for frontier modes
    #[arg(long, default_value_t = 64)]
    samples: usize,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// sidecar JSON with per-point parametrization
    #[arg(long)]
    witness: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long)]
    config_out: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    /// plan JSON path
    #[arg(long)]
    plan: PathBuf,
    /// source spec for the observation model (defaults to the binary
    /// chain with flip 0.8 per link when omitted)
    #[arg(long)]
    source: Option<PathBuf>,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config_out: Option<PathBuf>,
}

#[derive(Args)]
struct FmeArgs {
    /// text system path, one inequality per line
    #[arg(long)]
    system: PathBuf,
    /// variables to eliminate, comma separated (greedy order)
    #[arg(long)]
    eliminate: Option<String>,
    /// eliminate every variable whose name starts with this prefix
    #[arg(long)]
    eliminate_prefix: Option<String>,
    /// write the reduced system here (stdout otherwise)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config_out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// recorded run configuration
    #[arg(long)]
    config: PathBuf,
}

// ---------------------------------------------------------------------------
// execution
// ---------------------------------------------------------------------------

fn emit(out: &Option<String>, content: &str) -> Result<(), String> {
    match out {
        Some(path) => fs::write(path, content).map_err(|e| format!("write {path}: {e}")),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    if let Some((a, rest)) = spec.split_once(':') {
        let (b, step) = rest
            .split_once(':')
            .ok_or_else(|| format!("grid `{spec}` is not start:end:step"))?;
        let (a, b, step): (f64, f64, f64) = (
            a.parse().map_err(|_| format!("bad grid start `{a}`"))?,
            b.parse().map_err(|_| format!("bad grid end `{b}`"))?,
            step.parse()
                .map_err(|_| format!("bad grid step `{step}`"))?,
        );
        if step <= 0.0 || b < a {
            return Err(format!(
                "grid `{spec}` must have positive step and end >= start"
            ));
        }
        let mut out = Vec::new();
        let mut i = 0usize;
        loop {
            let r = a + step * i as f64;
            if r > b + 1e-12 {
                break;
            }
            out.push(r.min(b));
            i += 1;
        }
        return Ok(out);
    }
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad rate `{s}`"))
        })
        .collect()
}

fn parse_list(spec: &str, what: &str) -> Result<Vec<f64>, String> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad {what} `{s}`"))
        })
        .collect()
}

fn path_string(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.to_string_lossy().into_owned())
}

fn record(config_out: &Option<PathBuf>, config: &RunConfig) -> Result<(), String> {
    if let Some(path) = config_out {
        let json = serde_json::to_string_pretty(config).expect("config serializes");
        fs::write(path, json + "\n").map_err(|e| format!("write {}: {e}", path.display()))?;
    }
    Ok(())
}

fn execute(config: &RunConfig) -> Result<u8, String> {
    match config {
        RunConfig::Eta {
            source,
            link,
            grid,
            solver,
            format,
            out,
            svg,
        } => {
            let source = source.load().map_err(|e| format!("[exit 2] {e}"))?;
            let curve =
                eta_curve(&source, *link, grid, solver).map_err(|e| format!("[exit 2] {e}"))?;
            let content = match format {
                Format::Csv => export::curve_to_csv(&curve),
                Format::Json => serde_json::to_string_pretty(&curve).unwrap() + "\n",
            };
            emit(out, &content)?;
            if let Some(svg) = svg {
                fs::write(svg, export::curve_to_svg(&curve)).map_err(|e| e.to_string())?;
            }
            Ok(0)
        }
        RunConfig::Region {
            source,
            rates,
            epsilons,
            mode,
            samples,
            solver,
            format,
            out,
            witness,
            svg,
        } => {
            let source = source.load().map_err(|e| format!("[exit 2] {e}"))?;
            let instance = Instance::new(source, rates.clone(), epsilons.clone())
                .map_err(|e| format!("[exit 2] {e}"))?;
            let k = instance.k();
            let ctx = RegionContext::new(&instance.source, solver).map_err(|e| e.to_string())?;
            let frontier = match mode {
                Mode::Max => {
                    if instance.epsilons.iter().all(|&e| e == 0.0) {
                        let corner = max_rate_region_khop(&instance, &ctx)
                            .map_err(|e| format!("[exit 3] {e}"))?;
                        RegionFrontier::new(k, vec![FrontierPoint::new(corner)])
                    } else if k == 2 {
                        let (t1, t2) = max_rate_region_k2(&instance, &ctx)
                            .map_err(|e| format!("[exit 3] {e}"))?;
                        RegionFrontier::new(2, vec![FrontierPoint::new(vec![t1, t2])])
                    } else {
                        return Err(format!(
                            "[exit 3] max-rate mode needs K = 2 or all-zero epsilons, got K = {k}"
                        ));
                    }
                }
                Mode::ExpectedK2 => expected_rate_frontier_k2(&instance, &ctx, *samples)
                    .map_err(|e| format!("[exit 3] {e}"))?,
                Mode::General => {
                    general_region_frontier(&instance, &ctx, &GeneralScanConfig::for_k(k))
                        .map_err(|e| format!("[exit 3] {e}"))?
                }
                Mode::Nested => nested_frontier(&instance, &ctx, *samples)
                    .map_err(|e| format!("[exit 3] {e}"))?,
            };
            let content = match format {
                Format::Csv => export::frontier_to_csv(&frontier),
                Format::Json => export::frontier_sidecar_json(&frontier) + "\n",
            };
            emit(out, &content)?;
            if let Some(path) = witness {
                fs::write(path, export::frontier_sidecar_json(&frontier))
                    .map_err(|e| e.to_string())?;
            }
            if let Some(svg) = svg {
                fs::write(svg, export::frontier_to_svg(&frontier)).map_err(|e| e.to_string())?;
            }
            Ok(0)
        }
        RunConfig::Simulate {
            plan,
            source,
            n,
            trials,
            seed,
            out,
        } => {
            let text = fs::read_to_string(plan)
                .map_err(|e| format!("[exit 2] cannot read {plan}: {e}"))?;
            let plan = MultiplexPlan::from_json(&text).map_err(|e| format!("[exit 2] {e}"))?;
            let source = match source {
                Some(s) => s.load().map_err(|e| format!("[exit 2] {e}"))?,
                None => dsbs(0.4, &vec![0.8; plan.k]).expect("default chain"),
            };
            let report = simulate(&plan, &source, *n, *trials, *seed)
                .map_err(|e| format!("[exit 2] {e}"))?;
            let json = serde_json::to_string_pretty(&report).unwrap() + "\n";
            emit(out, &json)?;
            if let Some(flags) = &report.budget_ok {
                if flags.iter().any(|ok| !ok) {
                    eprintln!("type-I budget violated beyond the confidence interval");
                    return Ok(4);
                }
            }
            Ok(0)
        }
        RunConfig::Fme {
            system,
            eliminate,
            out,
        } => {
            let text = fs::read_to_string(system)
                .map_err(|e| format!("[exit 2] cannot read {system}: {e}"))?;
            let sys = InequalitySystem::parse(&text).map_err(|e| format!("[exit 2] {e}"))?;
            let names: Vec<&str> = eliminate.iter().map(|s| s.as_str()).collect();
            let reduced = sys
                .eliminate_all_greedy(&names)
                .map_err(|e| format!("[exit 2] {e}"))?;
            let mut content = String::new();
            content.push_str(&reduced.to_text());
            let verdict = sys.is_feasible().map_err(|e| e.to_string())?;
            match &verdict {
                Feasibility::Feasible { witness } => {
                    let pairs: Vec<String> = witness
                        .iter()
                        .map(|(n, v)| format!("\"{n}\": \"{v}\""))
                        .collect();
                    content.push_str(&format!(
                        "# feasible\n{{\"feasible\": true, \"witness\": {{{}}}}}\n",
                        pairs.join(", ")
                    ));
                }
                Feasibility::Infeasible => {
                    content.push_str("# infeasible\n{\"feasible\": false}\n");
                }
            }
            emit(out, &content)?;
            Ok(if verdict.is_feasible() { 0 } else { 1 })
        }
    }
}

fn cmd_check() -> u8 {
    let outcomes = acceptance::run_all();
    for o in &outcomes {
        println!("{}", o.line());
    }
    if acceptance::all_passed(&outcomes) {
        0
    } else {
        1
    }
}

fn build_config(command: &Command) -> Result<Option<(RunConfig, Option<PathBuf>)>, String> {
    match command {
        Command::Eta(args) => Ok(Some((
            RunConfig::Eta {
                source: args.source.resolve()?,
                link: args.link,
                grid: parse_grid(&args.grid)?,
                solver: args.solver.config()?,
                format: args.format,
                out: path_string(&args.out),
                svg: path_string(&args.svg),
            },
            args.config_out.clone(),
        ))),
        Command::Region(args) => Ok(Some((
            RunConfig::Region {
                source: args.source.resolve()?,
                rates: parse_list(&args.rates, "rate")?,
                epsilons: parse_list(&args.epsilons, "epsilon")?,
                mode: args.mode,
                samples: args.samples,
                solver: args.solver.config()?,
                format: args.format,
                out: path_string(&args.out),
                witness: path_string(&args.witness),
                svg: path_string(&args.svg),
            },
            args.config_out.clone(),
        ))),
        Command::Simulate(args) => Ok(Some((
            RunConfig::Simulate {
                plan: args.plan.to_string_lossy().into_owned(),
                source: args.source.as_ref().map(|p| SourceRef::Path {
                    path: p.to_string_lossy().into_owned(),
                }),
                n: args.n,
                trials: args.trials,
                seed: args.seed,
                out: path_string(&args.out),
            },
            args.config_out.clone(),
        ))),
        Command::Fme(args) => {
            let text = fs::read_to_string(&args.system)
                .map_err(|e| format!("[exit 2] cannot read {}: {e}", args.system.display()))?;
            let sys = InequalitySystem::parse(&text).map_err(|e| format!("[exit 2] {e}"))?;
            let mut victims: Vec<String> = Vec::new();
            if let Some(list) = &args.eliminate {
                victims.extend(list.split(',').map(|s| s.trim().to_string()));
            }
            if let Some(prefix) = &args.eliminate_prefix {
                victims.extend(
                    sys.variables()
                        .iter()
                        .filter(|v| v.starts_with(prefix.as_str()))
                        .cloned(),
                );
            }
            Ok(Some((
                RunConfig::Fme {
                    system: args.system.to_string_lossy().into_owned(),
                    eliminate: victims,
                    out: path_string(&args.out),
                },
                args.config_out.clone(),
            )))
        }
        Command::Run(_) | Command::Check => Ok(None),
    }
}

fn dispatch(cli: &Cli) -> Result<u8, String> {
    if let Some((config, config_out)) = build_config(&cli.command)? {
        record(&config_out, &config)?;
        return execute(&config);
    }
    match &cli.command {
        Command::Run(args) => {
            let text = fs::read_to_string(&args.config)
                .map_err(|e| format!("[exit 2] cannot read {}: {e}", args.config.display()))?;
            let config: RunConfig =
                serde_json::from_str(&text).map_err(|e| format!("[exit 2] bad config: {e}"))?;
            execute(&config)
        }
        Command::Check => Ok(cmd_check()),
        _ => unreachable!("resolved commands are handled above"),
    }
}

fn exit_code_for(message: &str) -> u8 {
    for code in [2u8, 3, 4] {
        if message.starts_with(&format!("[exit {code}]")) {
            return code;
        }
    }
    2
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("EXPOREGION_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            let code = exit_code_for(&message);
            let clean = message
                .trim_start_matches(&format!("[exit {code}]"))
                .trim_start();
            eprintln!("error: {clean}");
            ExitCode::from(code)
        }
    }
}
