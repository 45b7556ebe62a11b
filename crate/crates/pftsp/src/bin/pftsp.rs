//! Command-line surface: solve an instance with the variational or ML model,
//! query the exact oracle, run matched-budget benchmarks, execute experiment
//! sweeps, and project hardware runtimes.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pftsp::bench::{monte_carlo, rows_to_csv, run_plan, ExperimentPlan};
use pftsp::codec::{CodecKind, CodecSpec, GrayScope};
use pftsp::defaults;
use pftsp::ml::{run_ml, InputMode, MlConfig, OptimConfig, OptimKind};
use pftsp::optimizer::{
    estimate_runtime, run_vqa, GradientMethod, ParamShiftConfig, RunRecord, SpsaConfig, VqaConfig,
};
use pftsp::qsim::build_circuit;
use pftsp::tsp::{
    brute_force_optimum, greedy_nearest_neighbour, load_instance, load_reference_optima, quality,
    TspInstance, BRUTE_FORCE_LIMIT,
};
use pftsp::Error;

#[derive(Parser)]
#[command(name = "pftsp", about = "Penalty-free variational TSP solver", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the variational or classical ML solver on an instance.
    Solve(SolveArgs),
    /// Exact optimum by brute-force enumeration (small instances).
    Oracle {
        /// Coordinate CSV, one "x,y" per line.
        instance: PathBuf,
    },
    /// Monte Carlo and greedy baselines on an instance.
    Benchmark(BenchmarkArgs),
    /// Execute an experiment plan and write the results CSV.
    Sweep(SweepArgs),
    /// Project the hardware completion time for a run.
    Estimate(EstimateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Vqa,
    Ml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CodecArg {
    NonFactorial,
    Factorial,
}

impl From<CodecArg> for CodecKind {
    fn from(c: CodecArg) -> CodecKind {
        match c {
            CodecArg::NonFactorial => CodecKind::NonFactorial,
            CodecArg::Factorial => CodecKind::Factorial,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GrayScopeArg {
    PerChunk,
    WholeWord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OptimizerArg {
    Spsa,
    ParamShift,
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputModeArg {
    Zeros,
    Halves,
    Warm,
}

#[derive(Args)]
struct SolveArgs {
    /// Coordinate CSV, one "x,y" per line.
    instance: PathBuf,

    #[arg(long, value_enum, default_value_t = ModelArg::Vqa)]
    model: ModelArg,

    /// Circuit layout id (VQA).
    #[arg(long, default_value_t = defaults::CIRCUIT)]
    circuit: u8,

    #[arg(long, value_enum, default_value_t = CodecArg::NonFactorial)]
    codec: CodecArg,

    /// Interpret sampled words as Gray codes.
    #[arg(long, default_value_t = defaults::GRAY)]
    gray: bool,

    #[arg(long, value_enum, default_value_t = GrayScopeArg::PerChunk)]
    gray_scope: GrayScopeArg,

    /// Iterations (VQA) or epochs (ML).
    #[arg(long, default_value_t = defaults::ITERATIONS)]
    iterations: u64,

    /// Shots per iteration (VQA).
    #[arg(long, default_value_t = defaults::VQA_SHOTS)]
    shots: u64,

    /// Input vectors per epoch (ML).
    #[arg(long, default_value_t = defaults::ML_INPUT_VECTORS)]
    input_vectors: usize,

    /// Slice fraction; defaults to 0.8 for the VQA model and 1.0 for ML.
    #[arg(long)]
    slice: Option<f64>,

    /// Defaults to spsa for the VQA model and sgd for ML.
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerArg>,

    #[arg(long, default_value_t = defaults::WARM_START)]
    warm_start: bool,

    /// Fully connected layers (ML).
    #[arg(long, default_value_t = defaults::ML_LAYERS)]
    layers: usize,

    #[arg(long, value_enum, default_value_t = InputModeArg::Zeros)]
    input_mode: InputModeArg,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Disable the bit-string distance cache.
    #[arg(long)]
    no_cache: bool,

    #[arg(long, default_value_t = defaults::SPSA_STABILITY)]
    spsa_stability: f64,

    #[arg(long, default_value_t = defaults::SPSA_C)]
    spsa_c: f64,

    #[arg(long, default_value_t = defaults::SPSA_ALPHA)]
    spsa_alpha: f64,

    #[arg(long, default_value_t = defaults::SPSA_GAMMA)]
    spsa_gamma: f64,

    #[arg(long, default_value_t = defaults::SPSA_ETA)]
    spsa_eta: f64,

    #[arg(long, default_value_t = defaults::SPSA_G0_FLOOR)]
    g0_floor: f64,

    #[arg(long, default_value_t = defaults::PARAM_SHIFT_S)]
    shift_s: f64,

    #[arg(long, default_value_t = defaults::PARAM_SHIFT_ETA)]
    shift_eta: f64,

    #[arg(long, default_value_t = defaults::ML_SIGMA)]
    sigma: f64,

    #[arg(long, default_value_t = defaults::SGD_ETA)]
    sgd_eta: f64,

    #[arg(long, default_value_t = defaults::SGD_MOMENTUM)]
    sgd_momentum: f64,

    #[arg(long, default_value_t = defaults::SGD_WEIGHT_DECAY)]
    sgd_weight_decay: f64,

    #[arg(long, default_value_t = defaults::ADAM_ETA)]
    adam_eta: f64,

    #[arg(long, default_value_t = defaults::ADAM_BETA1)]
    adam_beta1: f64,

    #[arg(long, default_value_t = defaults::ADAM_WEIGHT_DECAY)]
    adam_weight_decay: f64,

    /// Full run-config JSON (VqaConfig or MlConfig); overrides the flags.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Optional "name,optimum" sidecar with reference optima.
    #[arg(long)]
    reference: Option<PathBuf>,

    /// Write the full run record JSON here.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Write the per-iteration trace CSV here.
    #[arg(long)]
    trace_csv: Option<PathBuf>,

    /// Print the circuit netlist before running.
    #[arg(long)]
    dump_circuit: bool,
}

#[derive(Args)]
struct BenchmarkArgs {
    instance: PathBuf,

    /// Uniform random words to draw.
    #[arg(long)]
    budget: u64,

    #[arg(long, value_enum, default_value_t = CodecArg::NonFactorial)]
    codec: CodecArg,

    #[arg(long, default_value_t = defaults::GRAY)]
    gray: bool,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long)]
    reference: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment plan JSON.
    #[arg(long)]
    plan: PathBuf,

    /// Results CSV path.
    #[arg(long)]
    out: PathBuf,

    /// Bounded parallel cells; 0 uses the default pool.
    #[arg(long, default_value_t = 0)]
    jobs: usize,

    #[arg(long)]
    reference: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long, default_value_t = defaults::ITERATIONS)]
    iterations: u64,

    #[arg(long, default_value_t = defaults::VQA_SHOTS)]
    shots: u64,

    /// Seconds per shot on the projected hardware.
    #[arg(long, default_value_t = defaults::T_SHOT_SECONDS)]
    t_shot: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> pftsp::Result<()> {
    match cli.cmd {
        Cmd::Solve(args) => solve(args),
        Cmd::Oracle { instance } => oracle(&instance),
        Cmd::Benchmark(args) => benchmark(args),
        Cmd::Sweep(args) => sweep(args),
        Cmd::Estimate(args) => estimate(args),
    }
}

fn reference_optimum(
    inst: &TspInstance,
    instance_path: &std::path::Path,
    reference: Option<&PathBuf>,
) -> pftsp::Result<Option<f64>> {
    if let Some(path) = reference {
        let table = load_reference_optima(path)?;
        let stem = instance_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        if let Some((_, d)) = table.into_iter().find(|(name, _)| *name == stem) {
            return Ok(Some(d));
        }
    }
    if inst.n() <= BRUTE_FORCE_LIMIT {
        return Ok(Some(brute_force_optimum(inst)?.1));
    }
    Ok(None)
}

fn print_record(rec: &RunRecord, optimum: Option<f64>) -> pftsp::Result<()> {
    println!(
        "model: {} ({}, {}, {})",
        rec.model,
        rec.circuit.map_or("-".into(), |c| format!("circuit {c}")),
        rec.codec.digest(),
        rec.optimizer
    );
    println!("locations: {}  binary variables: {}", rec.n, rec.q);
    println!("best distance: {:.6}", rec.best_distance);
    println!("best cycle: {}", rec.best_cycle);
    if let Some(opt) = optimum {
        let q = quality(rec.best_distance, opt, &[])?;
        println!("quality: {:.4} (reference optimum {:.6})", q.q_sol, opt);
    }
    println!("bit strings sampled: {}", rec.bitstrings_sampled);
    println!(
        "cache: {} hits, {} misses, coverage {:.4e}",
        rec.cache.hits, rec.cache.misses, rec.coverage
    );
    println!("elapsed: {:.3} s", rec.wall_time_secs);
    for note in &rec.notes {
        println!("note: {note}");
    }
    Ok(())
}

fn solve(args: SolveArgs) -> pftsp::Result<()> {
    let inst = load_instance(&args.instance)?;
    let codec = CodecSpec {
        kind: args.codec.into(),
        gray: args.gray,
        gray_scope: match args.gray_scope {
            GrayScopeArg::PerChunk => GrayScope::PerChunk,
            GrayScopeArg::WholeWord => GrayScope::WholeWord,
        },
        n: inst.n(),
    };
    let optimum = reference_optimum(&inst, &args.instance, args.reference.as_ref())?;

    let rec = match args.model {
        ModelArg::Vqa => {
            let method = match args.optimizer.unwrap_or(OptimizerArg::Spsa) {
                OptimizerArg::Spsa => GradientMethod::Spsa(SpsaConfig {
                    stability: args.spsa_stability,
                    c: args.spsa_c,
                    alpha: args.spsa_alpha,
                    gamma: args.spsa_gamma,
                    eta: args.spsa_eta,
                    iterations: args.iterations,
                    shots: args.shots,
                    g0_floor: args.g0_floor,
                }),
                OptimizerArg::ParamShift => GradientMethod::ParamShift(ParamShiftConfig {
                    s: args.shift_s,
                    eta: args.shift_eta,
                    iterations: args.iterations,
                    shots: args.shots,
                }),
                other => {
                    return Err(Error::Config(format!(
                        "optimizer {other:?} is not a vqa gradient method"
                    )))
                }
            };
            let cfg = match &args.config {
                Some(path) => read_config::<VqaConfig>(path)?,
                None => VqaConfig {
                    method,
                    slice: args.slice.unwrap_or(defaults::VQA_SLICE),
                    warm_start: args.warm_start,
                    init_constant: 0.0,
                    cache: !args.no_cache,
                },
            };
            let q = codec.bit_length()?;
            let circuit = build_circuit(args.circuit, q)?;
            if args.dump_circuit {
                print!("{}", circuit.netlist());
            }
            run_vqa(&inst, &circuit, &codec, &cfg, args.seed)?
        }
        ModelArg::Ml => {
            let optim = match args.optimizer.unwrap_or(OptimizerArg::Sgd) {
                OptimizerArg::Sgd => OptimConfig {
                    kind: OptimKind::Sgd,
                    eta: args.sgd_eta,
                    momentum: args.sgd_momentum,
                    weight_decay: args.sgd_weight_decay,
                },
                OptimizerArg::Adam => OptimConfig {
                    kind: OptimKind::Adam,
                    eta: args.adam_eta,
                    momentum: args.adam_beta1,
                    weight_decay: args.adam_weight_decay,
                },
                other => {
                    return Err(Error::Config(format!(
                        "optimizer {other:?} is not an ml gradient method"
                    )))
                }
            };
            let cfg = match &args.config {
                Some(path) => read_config::<MlConfig>(path)?,
                None => MlConfig {
                    layers: args.layers,
                    input_vectors: args.input_vectors,
                    input_mode: if args.warm_start {
                        InputMode::Warm
                    } else {
                        match args.input_mode {
                            InputModeArg::Zeros => InputMode::Zeros,
                            InputModeArg::Halves => InputMode::Halves,
                            InputModeArg::Warm => InputMode::Warm,
                        }
                    },
                    sigma: args.sigma,
                    optim,
                    slice: args.slice.unwrap_or(defaults::ML_SLICE),
                    epochs: args.iterations,
                    cache: !args.no_cache,
                },
            };
            run_ml(&inst, &codec, &cfg, args.seed)?
        }
    };

    print_record(&rec, optimum)?;
    if let Some(path) = &args.out {
        let json = serde_json::to_string_pretty(&rec)
            .map_err(|e| Error::Config(format!("serializing run record: {e}")))?;
        write_file(path, &json)?;
    }
    if let Some(path) = &args.trace_csv {
        write_file(path, &rec.trace_csv())?;
    }
    Ok(())
}

fn read_config<T: serde::de::DeserializeOwned>(path: &PathBuf) -> pftsp::Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("bad config JSON: {e}")))
}

fn write_file(path: &PathBuf, content: &str) -> pftsp::Result<()> {
    std::fs::write(path, content).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn oracle(instance: &PathBuf) -> pftsp::Result<()> {
    let inst = load_instance(instance)?;
    let (cycle, dist) = brute_force_optimum(&inst)?;
    println!("locations: {}", inst.n());
    println!("optimum distance: {dist:.6}");
    println!("optimum cycle: {cycle}");
    Ok(())
}

fn benchmark(args: BenchmarkArgs) -> pftsp::Result<()> {
    let inst = load_instance(&args.instance)?;
    let codec = CodecSpec::new(args.codec.into(), args.gray, inst.n());
    let optimum = reference_optimum(&inst, &args.instance, args.reference.as_ref())?;
    let (mc_cycle, mc_dist) = monte_carlo(&inst, &codec, args.budget, args.seed)?;
    let (greedy_cycle, greedy_dist) = greedy_nearest_neighbour(&inst);
    println!("locations: {}", inst.n());
    println!(
        "monte carlo ({} draws): {:.6}  {}",
        args.budget, mc_dist, mc_cycle
    );
    println!("greedy nearest neighbour: {greedy_dist:.6}  {greedy_cycle}");
    if let Some(opt) = optimum {
        println!("reference optimum: {opt:.6}");
        println!("monte carlo quality: {:.4}", opt / mc_dist);
        println!("greedy quality: {:.4}", opt / greedy_dist);
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> pftsp::Result<()> {
    let plan = ExperimentPlan::load(&args.plan)?;
    let reference = match &args.reference {
        Some(path) => load_reference_optima(path)?,
        None => Vec::new(),
    };
    let rows = run_plan(&plan, &reference, args.jobs)?;
    for row in &rows {
        for err in &row.errors {
            eprintln!("warning: cell {} n={} failed: {err}", row.model, row.n);
        }
    }
    write_file(&args.out, &rows_to_csv(&rows))?;
    println!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}

fn estimate(args: EstimateArgs) -> pftsp::Result<()> {
    let t = estimate_runtime(args.iterations, args.shots, args.t_shot);
    println!("iterations: {}", args.iterations);
    println!("shots per iteration: {}", args.shots);
    println!("seconds per shot: {:e}", args.t_shot);
    println!("projected completion time: {t:.4} s");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_solve(extra: &[&str]) -> SolveArgs {
        let mut argv = vec!["pftsp", "solve", "inst.csv"];
        argv.extend_from_slice(extra);
        match Cli::parse_from(argv).cmd {
            Cmd::Solve(args) => args,
            _ => unreachable!(),
        }
    }

    #[test]
    fn solve_flag_defaults_match_tuned_values() {
        let args = parse_solve(&[]);
        assert_eq!(args.model, ModelArg::Vqa);
        assert_eq!(args.circuit, defaults::CIRCUIT);
        assert_eq!(args.codec, CodecArg::NonFactorial);
        assert_eq!(args.gray, defaults::GRAY);
        assert_eq!(args.iterations, defaults::ITERATIONS);
        assert_eq!(args.shots, defaults::VQA_SHOTS);
        assert_eq!(args.input_vectors, defaults::ML_INPUT_VECTORS);
        assert_eq!(args.slice, None);
        assert_eq!(args.optimizer, None);
        assert_eq!(args.warm_start, defaults::WARM_START);
        assert_eq!(args.layers, defaults::ML_LAYERS);
        assert_eq!(args.spsa_stability, defaults::SPSA_STABILITY);
        assert_eq!(args.spsa_c, defaults::SPSA_C);
        assert_eq!(args.spsa_alpha, defaults::SPSA_ALPHA);
        assert_eq!(args.spsa_gamma, defaults::SPSA_GAMMA);
        assert_eq!(args.spsa_eta, defaults::SPSA_ETA);
        assert_eq!(args.shift_s, defaults::PARAM_SHIFT_S);
        assert_eq!(args.shift_eta, defaults::PARAM_SHIFT_ETA);
        assert_eq!(args.sigma, defaults::ML_SIGMA);
        assert_eq!(args.sgd_eta, defaults::SGD_ETA);
        assert_eq!(args.sgd_momentum, defaults::SGD_MOMENTUM);
        assert_eq!(args.sgd_weight_decay, defaults::SGD_WEIGHT_DECAY);
        assert_eq!(args.adam_eta, defaults::ADAM_ETA);
        assert_eq!(args.adam_beta1, defaults::ADAM_BETA1);
        assert_eq!(args.adam_weight_decay, defaults::ADAM_WEIGHT_DECAY);
    }

    #[test]
    fn estimate_defaults_match_tuned_values() {
        let cli = Cli::parse_from(["pftsp", "estimate"]);
        match cli.cmd {
            Cmd::Estimate(args) => {
                assert_eq!(args.iterations, defaults::ITERATIONS);
                assert_eq!(args.shots, defaults::VQA_SHOTS);
                assert_eq!(args.t_shot, defaults::T_SHOT_SECONDS);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn optimizer_defaults_resolve_per_model() {
        let vqa = parse_solve(&[]);
        assert_eq!(vqa.optimizer.unwrap_or(OptimizerArg::Spsa), OptimizerArg::Spsa);
        let ml = parse_solve(&["--model", "ml"]);
        assert_eq!(ml.optimizer.unwrap_or(OptimizerArg::Sgd), OptimizerArg::Sgd);
    }
}
