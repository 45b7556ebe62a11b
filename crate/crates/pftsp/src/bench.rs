//! Monte Carlo baseline and the experiment harness: plans of configuration
//! cells, repeated seeded runs, matched-budget Monte Carlo comparisons, and
//! CSV emission.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{BitString, CodecKind, CodecSpec, GrayScope};
use crate::cost::{distinct_cycles, CostCache};
use crate::defaults;
use crate::error::{Error, Result};
use crate::ml::{run_ml, InputMode, MlConfig, OptimConfig};
use crate::optimizer::{
    run_vqa, GradientMethod, ParamShiftConfig, RunRecord, SpsaConfig, VqaConfig,
};
use crate::qsim::build_circuit;
use crate::tsp::{
    brute_force_optimum, greedy_nearest_neighbour, load_instance, Cycle, TspInstance,
    BRUTE_FORCE_LIMIT,
};
use crate::util::mix_seed;
use num_traits::ToPrimitive;

/// Draw `budget` uniform random words of the codec's length and keep the
/// shortest decoded tour. Draws come from one sequential stream, so a larger
/// budget extends a smaller one.
pub fn monte_carlo(
    inst: &TspInstance,
    spec: &CodecSpec,
    budget: u64,
    seed: u64,
) -> Result<(Cycle, f64)> {
    if budget == 0 {
        return Err(Error::Domain("monte carlo budget must be at least 1".into()));
    }
    let len = spec.bit_length()?;
    let cache = CostCache::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, BitString)> = None;
    for _ in 0..budget {
        let word = BitString::random(len, &mut rng);
        let d = cache.evaluate(&word, inst, spec)?;
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, word));
        }
    }
    let (d, word) = best.unwrap();
    Ok((spec.decode(&word)?, d))
}

/// Which solver a plan cell runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Vqa,
    Ml,
    MonteCarlo,
    Greedy,
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Model::Vqa => "vqa",
            Model::Ml => "ml",
            Model::MonteCarlo => "monte_carlo",
            Model::Greedy => "greedy",
        };
        write!(f, "{s}")
    }
}

/// One fully specified configuration cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cell {
    pub model: Model,
    #[serde(default = "default_codec_kind")]
    pub codec: CodecKind,
    #[serde(default)]
    pub gray: bool,
    #[serde(default)]
    pub gray_scope: GrayScope,
    /// Slice fraction; defaults to the model's tuned value.
    #[serde(default)]
    pub slice: Option<f64>,
    /// Circuit id for VQA cells, layer count for ML cells.
    #[serde(default)]
    pub circuit: Option<u8>,
    #[serde(default)]
    pub layers: Option<usize>,
    #[serde(default = "default_optimizer")]
    pub optimizer: String,
    #[serde(default)]
    pub warm_start: bool,
    #[serde(default)]
    pub input_mode: Option<InputMode>,
    #[serde(default)]
    pub shots: Option<u64>,
    #[serde(default)]
    pub iterations: Option<u64>,
    /// Monte Carlo cells: take the budget from this cell index's measured
    /// cache queries (max over its runs).
    #[serde(default)]
    pub budget_from_cell: Option<usize>,
    /// Monte Carlo cells: explicit budget when no matched cell is named.
    #[serde(default)]
    pub budget: Option<u64>,
}

fn default_codec_kind() -> CodecKind {
    CodecKind::NonFactorial
}

fn default_optimizer() -> String {
    "spsa".into()
}

/// Where a plan's instances come from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    /// Coordinate CSV files.
    Files(Vec<PathBuf>),
    /// Self-generated uniform instances, one per (size, index) pair.
    Generate {
        sizes: Vec<usize>,
        per_size: usize,
        seed: u64,
    },
}

/// A full experiment: instances, cells, runs per cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub name: String,
    pub instances: InstanceSource,
    pub runs_per_cell: usize,
    pub seed_base: u64,
    pub cells: Vec<Cell>,
}

impl ExperimentPlan {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("bad plan JSON: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Aggregated outcome of one (cell, size) combination.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRow {
    pub n: usize,
    pub model: String,
    pub codec: String,
    pub gray: bool,
    pub slice: f64,
    pub circuit_or_layers: String,
    pub optimizer: String,
    pub runs: usize,
    pub mean_quality: f64,
    pub sem: Option<f64>,
    pub bitstrings: f64,
    pub coverage: f64,
    pub seconds: f64,
    /// Per-run failure messages, when any run of the cell failed.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub errors: Vec<String>,
}

/// Fixed-order CSV header shared with the CLI contract.
pub const RESULT_CSV_HEADER: &str =
    "n,model,codec,gray,slice,circuit_or_layers,optimizer,r,mean_quality,sem,bitstrings,coverage,seconds";

pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(RESULT_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{:.6},{},{:.1},{:.6e},{:.3}\n",
            r.n,
            r.model,
            r.codec,
            r.gray,
            r.slice,
            r.circuit_or_layers,
            r.optimizer,
            r.runs,
            r.mean_quality,
            r.sem.map_or(String::new(), |s| format!("{s:.6}")),
            r.bitstrings,
            r.coverage,
            r.seconds,
        ));
    }
    out
}

struct PreparedInstance {
    name: String,
    inst: TspInstance,
    optimum: f64,
}

fn prepare_instances(
    source: &InstanceSource,
    reference: &[(String, f64)],
) -> Result<Vec<PreparedInstance>> {
    let mut out = Vec::new();
    match source {
        InstanceSource::Files(paths) => {
            for path in paths {
                let inst = load_instance(path)?;
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| path.display().to_string());
                let optimum = match reference.iter().find(|(n, _)| *n == name) {
                    Some((_, d)) => *d,
                    None if inst.n() <= BRUTE_FORCE_LIMIT => brute_force_optimum(&inst)?.1,
                    None => {
                        return Err(Error::Config(format!(
                            "instance {name} has n={} > {BRUTE_FORCE_LIMIT} and no reference optimum",
                            inst.n()
                        )))
                    }
                };
                out.push(PreparedInstance { name, inst, optimum });
            }
        }
        InstanceSource::Generate {
            sizes,
            per_size,
            seed,
        } => {
            for &n in sizes {
                for k in 0..*per_size {
                    let inst = TspInstance::random(n, mix_seed(*seed, (n * 1000 + k) as u64))?;
                    let optimum = brute_force_optimum(&inst)?.1;
                    out.push(PreparedInstance {
                        name: format!("uniform-n{n}-{k}"),
                        inst,
                        optimum,
                    });
                }
            }
        }
    }
    Ok(out)
}

struct RunOutcome {
    quality: f64,
    bitstrings: u64,
    queries: u64,
    coverage: f64,
}

fn cell_codec(cell: &Cell, n: usize) -> CodecSpec {
    CodecSpec {
        kind: cell.codec,
        gray: cell.gray,
        gray_scope: cell.gray_scope,
        n,
    }
}

fn run_cell_once(
    cell: &Cell,
    prepared: &PreparedInstance,
    seed: u64,
    mc_budget: Option<u64>,
) -> Result<RunOutcome> {
    let inst = &prepared.inst;
    let codec = cell_codec(cell, inst.n());
    match cell.model {
        Model::Vqa => {
            let q = codec.bit_length()?;
            let circuit = build_circuit(cell.circuit.unwrap_or(defaults::CIRCUIT), q)?;
            let method = match cell.optimizer.as_str() {
                "spsa" => GradientMethod::Spsa(SpsaConfig {
                    iterations: cell.iterations.unwrap_or(defaults::ITERATIONS),
                    shots: cell.shots.unwrap_or(defaults::VQA_SHOTS),
                    ..SpsaConfig::default()
                }),
                "param_shift" => GradientMethod::ParamShift(ParamShiftConfig {
                    iterations: cell.iterations.unwrap_or(defaults::ITERATIONS),
                    shots: cell.shots.unwrap_or(defaults::VQA_SHOTS),
                    ..ParamShiftConfig::default()
                }),
                other => return Err(Error::Config(format!("unknown optimizer {other:?}"))),
            };
            let cfg = VqaConfig {
                method,
                slice: cell.slice.unwrap_or(defaults::VQA_SLICE),
                warm_start: cell.warm_start,
                init_constant: 0.0,
                cache: true,
            };
            let rec = run_vqa(inst, &circuit, &codec, &cfg, seed)?;
            Ok(outcome_from_record(&rec, prepared.optimum))
        }
        Model::Ml => {
            let optim = match cell.optimizer.as_str() {
                "sgd" => OptimConfig::sgd(),
                "adam" => OptimConfig::adam(),
                other => return Err(Error::Config(format!("unknown optimizer {other:?}"))),
            };
            let cfg = MlConfig {
                layers: cell.layers.unwrap_or(defaults::ML_LAYERS),
                input_vectors: cell.shots.unwrap_or(defaults::ML_INPUT_VECTORS as u64) as usize,
                input_mode: cell.input_mode.unwrap_or(if cell.warm_start {
                    InputMode::Warm
                } else {
                    InputMode::Zeros
                }),
                sigma: defaults::ML_SIGMA,
                optim,
                slice: cell.slice.unwrap_or(defaults::ML_SLICE),
                epochs: cell.iterations.unwrap_or(defaults::ITERATIONS),
                cache: true,
            };
            let rec = run_ml(inst, &codec, &cfg, seed)?;
            Ok(outcome_from_record(&rec, prepared.optimum))
        }
        Model::MonteCarlo => {
            let budget = mc_budget
                .or(cell.budget)
                .ok_or_else(|| Error::Config("monte carlo cell has no budget".into()))?;
            let (_, d) = monte_carlo(inst, &codec, budget, seed)?;
            let p_n = distinct_cycles(inst.n())?
                .to_f64()
                .unwrap_or(f64::INFINITY);
            Ok(RunOutcome {
                quality: prepared.optimum / d,
                bitstrings: budget,
                queries: budget,
                coverage: budget as f64 / p_n,
            })
        }
        Model::Greedy => {
            let (_, d) = greedy_nearest_neighbour(inst);
            Ok(RunOutcome {
                quality: prepared.optimum / d,
                bitstrings: 0,
                queries: 0,
                coverage: 0.0,
            })
        }
    }
}

fn outcome_from_record(rec: &RunRecord, optimum: f64) -> RunOutcome {
    RunOutcome {
        quality: optimum / rec.best_distance,
        bitstrings: rec.bitstrings_sampled,
        queries: rec.cache.hits + rec.cache.misses,
        coverage: rec.coverage,
    }
}

/// Execute every cell of the plan `runs_per_cell` times per instance with
/// derived seeds and aggregate one [`ResultRow`] per (cell, size).
///
/// Cells run as independent parallel jobs in two phases: everything except
/// Monte Carlo first, then Monte Carlo cells whose budgets match the measured
/// cache queries (max over the matched cell's runs). Per-run failures are
/// recorded in the row, not fatal. Use `jobs` to bound parallelism (0 keeps
/// the global default).
pub fn run_plan(plan: &ExperimentPlan, reference: &[(String, f64)], jobs: usize) -> Result<Vec<ResultRow>> {
    for (idx, cell) in plan.cells.iter().enumerate() {
        if let Some(from) = cell.budget_from_cell {
            if cell.model != Model::MonteCarlo {
                return Err(Error::Config(format!(
                    "cell {idx} names budget_from_cell but is not a monte_carlo cell"
                )));
            }
            if from >= plan.cells.len() {
                return Err(Error::Config(format!(
                    "cell {idx} references cell {from}, out of range"
                )));
            }
            if plan.cells[from].model == Model::MonteCarlo {
                return Err(Error::Config(format!(
                    "cell {idx} must match a non-monte-carlo cell, got {from}"
                )));
            }
        }
    }
    let instances = prepare_instances(&plan.instances, reference)?;

    let execute = |phase: Vec<usize>, budgets: &[Option<u64>]| -> Vec<(usize, Vec<RawRow>)> {
        let run_all = || {
            phase
                .par_iter()
                .map(|&idx| {
                    (
                        idx,
                        run_cell(plan, &plan.cells[idx], idx, &instances, budgets[idx]),
                    )
                })
                .collect::<Vec<_>>()
        };
        if jobs > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .expect("thread pool")
                .install(run_all)
        } else {
            run_all()
        }
    };

    let (mc_cells, direct_cells): (Vec<usize>, Vec<usize>) =
        (0..plan.cells.len()).partition(|&i| plan.cells[i].model == Model::MonteCarlo);

    let mut budgets: Vec<Option<u64>> = plan.cells.iter().map(|c| c.budget).collect();
    let mut results: Vec<Option<Vec<RawRow>>> = (0..plan.cells.len()).map(|_| None).collect();
    let mut max_queries: Vec<u64> = vec![0; plan.cells.len()];

    for (idx, rows) in execute(direct_cells, &budgets) {
        max_queries[idx] = rows.iter().map(|r| r.max_queries).max().unwrap_or(0);
        results[idx] = Some(rows);
    }
    for &idx in &mc_cells {
        if let Some(from) = plan.cells[idx].budget_from_cell {
            budgets[idx] = Some(max_queries[from].max(1));
        }
    }
    for (idx, rows) in execute(mc_cells, &budgets) {
        results[idx] = Some(rows);
    }

    // Deterministic fold ordered by cell index.
    Ok(results
        .into_iter()
        .flatten()
        .flatten()
        .map(|raw| raw.row)
        .collect())
}

/// Internal row carrying the per-cell max query count for budget matching.
struct RawRow {
    row: ResultRow,
    max_queries: u64,
}

impl std::ops::Deref for RawRow {
    type Target = ResultRow;
    fn deref(&self) -> &ResultRow {
        &self.row
    }
}

fn run_cell(
    plan: &ExperimentPlan,
    cell: &Cell,
    cell_idx: usize,
    instances: &[PreparedInstance],
    budget: Option<u64>,
) -> Vec<RawRow> {
    let mut sizes: Vec<usize> = instances.iter().map(|p| p.inst.n()).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let mut rows = Vec::new();
    for n in sizes {
        let started = Instant::now();
        let mut qualities = Vec::new();
        let mut bitstrings = 0.0;
        let mut coverage = 0.0;
        let mut max_queries = 0u64;
        let mut errors = Vec::new();
        let mut runs = 0usize;
        for (inst_idx, prepared) in instances.iter().enumerate() {
            if prepared.inst.n() != n {
                continue;
            }
            for run in 0..plan.runs_per_cell {
                let seed = mix_seed(
                    plan.seed_base,
                    (cell_idx as u64) << 32 | (inst_idx as u64) << 16 | run as u64,
                );
                match run_cell_once(cell, prepared, seed, budget) {
                    Ok(out) => {
                        qualities.push(out.quality);
                        bitstrings += out.bitstrings as f64;
                        coverage += out.coverage;
                        max_queries = max_queries.max(out.queries);
                        runs += 1;
                    }
                    Err(e) => errors.push(format!("{}/run{run}: {e}", prepared.name)),
                }
            }
        }
        let mean_quality = if qualities.is_empty() {
            f64::NAN
        } else {
            qualities.iter().sum::<f64>() / qualities.len() as f64
        };
        let sem = if qualities.len() >= 2 {
            let m = mean_quality;
            let var = qualities.iter().map(|q| (q - m).powi(2)).sum::<f64>()
                / qualities.len() as f64;
            Some(var.sqrt() / ((qualities.len() - 1) as f64).sqrt())
        } else {
            None
        };
        let denom = qualities.len().max(1) as f64;
        rows.push(RawRow {
            row: ResultRow {
                n,
                model: cell.model.to_string(),
                codec: cell.codec.to_string(),
                gray: cell.gray,
                slice: cell.slice.unwrap_or(match cell.model {
                    Model::Ml => defaults::ML_SLICE,
                    _ => defaults::VQA_SLICE,
                }),
                circuit_or_layers: match cell.model {
                    Model::Vqa => format!("c{}", cell.circuit.unwrap_or(defaults::CIRCUIT)),
                    Model::Ml => format!("l{}", cell.layers.unwrap_or(defaults::ML_LAYERS)),
                    _ => "-".into(),
                },
                optimizer: match cell.model {
                    Model::MonteCarlo | Model::Greedy => "-".into(),
                    _ => cell.optimizer.clone(),
                },
                runs,
                mean_quality,
                sem,
                bitstrings: bitstrings / denom,
                coverage: coverage / denom,
                seconds: started.elapsed().as_secs_f64(),
                errors,
            },
            max_queries,
        });
    }
    rows
}
