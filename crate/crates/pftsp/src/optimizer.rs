//! The variational feedback loop: sample, decode, average, estimate a
//! gradient (SPSA or parameter shift), step, repeat. The lowest distance
//! found to date across every evaluation is recorded per iteration.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{BitString, CodecSpec};
use crate::cost::{batch_average_tracked, coverage, CacheStats, CostCache, SliceConfig};
use crate::defaults;
use crate::error::{Error, Result};
use crate::qsim::{load_warm_start, sample, CircuitSpec};
use crate::tsp::{greedy_nearest_neighbour, Cycle, TspInstance};
use crate::util::mix_seed;

/// SPSA hyper-parameters. Both decay sequences stay strictly positive and
/// decreasing; the base learning rate is normalized by the measured initial
/// gradient scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpsaConfig {
    /// Stability constant `A`.
    pub stability: f64,
    /// Perturbation scale (radians).
    pub c: f64,
    pub alpha: f64,
    pub gamma: f64,
    /// Learning rate `eta`.
    pub eta: f64,
    pub iterations: u64,
    pub shots: u64,
    /// Replaces a measured initial gradient scale of exactly zero.
    pub g0_floor: f64,
}

impl Default for SpsaConfig {
    fn default() -> Self {
        Self {
            stability: defaults::SPSA_STABILITY,
            c: defaults::SPSA_C,
            alpha: defaults::SPSA_ALPHA,
            gamma: defaults::SPSA_GAMMA,
            eta: defaults::SPSA_ETA,
            iterations: defaults::ITERATIONS,
            shots: defaults::VQA_SHOTS,
            g0_floor: defaults::SPSA_G0_FLOOR,
        }
    }
}

/// Parameter-shift hyper-parameters; the shift magnitude is `pi / (4 s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamShiftConfig {
    pub s: f64,
    pub eta: f64,
    pub iterations: u64,
    pub shots: u64,
}

impl Default for ParamShiftConfig {
    fn default() -> Self {
        Self {
            s: defaults::PARAM_SHIFT_S,
            eta: defaults::PARAM_SHIFT_ETA,
            iterations: defaults::ITERATIONS,
            shots: defaults::VQA_SHOTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GradientMethod {
    Spsa(SpsaConfig),
    ParamShift(ParamShiftConfig),
}

impl GradientMethod {
    pub fn iterations(&self) -> u64 {
        match self {
            GradientMethod::Spsa(c) => c.iterations,
            GradientMethod::ParamShift(c) => c.iterations,
        }
    }

    pub fn shots(&self) -> u64 {
        match self {
            GradientMethod::Spsa(c) => c.shots,
            GradientMethod::ParamShift(c) => c.shots,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GradientMethod::Spsa(_) => "spsa",
            GradientMethod::ParamShift(_) => "param_shift",
        }
    }
}

/// Full configuration of one variational run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqaConfig {
    pub method: GradientMethod,
    /// Slice fraction for the tracked batch average.
    pub slice: f64,
    /// Initialize parameters from the greedy tour's bit string (circuit 2).
    pub warm_start: bool,
    /// Cold-start constant for every angle.
    pub init_constant: f64,
    pub cache: bool,
}

impl Default for VqaConfig {
    fn default() -> Self {
        Self {
            method: GradientMethod::Spsa(SpsaConfig::default()),
            slice: defaults::VQA_SLICE,
            warm_start: defaults::WARM_START,
            init_constant: 0.0,
            cache: true,
        }
    }
}

/// Decay schedules: `c_t = c / (t+1)^gamma` and `a_t = a / (t+1+A)^alpha`
/// with `a = eta (A+1)^alpha / G0`.
pub fn spsa_schedules(cfg: &SpsaConfig, t: u64, g0: f64) -> (f64, f64) {
    let g0 = if g0 == 0.0 { cfg.g0_floor } else { g0 };
    let a = cfg.eta * (cfg.stability + 1.0).powf(cfg.alpha) / g0;
    let a_t = a / (t as f64 + 1.0 + cfg.stability).powf(cfg.alpha);
    let c_t = cfg.c / (t as f64 + 1.0).powf(cfg.gamma);
    (a_t, c_t)
}

/// Two-evaluation SPSA gradient estimate along a random +-1 perturbation.
pub fn spsa_gradient<F>(
    costfn: &mut F,
    theta: &[f64],
    c_t: f64,
    rng: &mut impl Rng,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let delta: Vec<f64> = (0..theta.len())
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let plus: Vec<f64> = theta.iter().zip(&delta).map(|(t, d)| t + c_t * d).collect();
    let minus: Vec<f64> = theta.iter().zip(&delta).map(|(t, d)| t - c_t * d).collect();
    let h_plus = costfn(&plus)?;
    let h_minus = costfn(&minus)?;
    Ok(delta
        .iter()
        .map(|d| (h_plus - h_minus) / (2.0 * c_t * d))
        .collect())
}

/// Exact-rule gradient: `s * (H(theta + e_i pi/(4s)) - H(theta - e_i pi/(4s)))`
/// per component; `2 * dim` evaluations.
pub fn param_shift_gradient<F>(costfn: &mut F, theta: &[f64], s: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if s <= 0.0 {
        return Err(Error::Config(format!("shift scale must be positive, got {s}")));
    }
    let shift = std::f64::consts::PI / (4.0 * s);
    let mut grad = Vec::with_capacity(theta.len());
    let mut work = theta.to_vec();
    for i in 0..theta.len() {
        work[i] = theta[i] + shift;
        let plus = costfn(&work)?;
        work[i] = theta[i] - shift;
        let minus = costfn(&work)?;
        work[i] = theta[i];
        grad.push(s * (plus - minus));
    }
    Ok(grad)
}

/// Projected hardware completion time: `4 * I * n_shot * t_shot` seconds.
pub fn estimate_runtime(iterations: u64, n_shot: u64, t_shot: f64) -> f64 {
    4.0 * iterations as f64 * n_shot as f64 * t_shot
}

/// One point of the per-iteration trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: u64,
    pub sliced_avg: f64,
    pub best: f64,
}

/// Everything a run produced: the trace, the best tour, sampling and cache
/// accounting, and the wall time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: String,
    pub n: usize,
    pub q: usize,
    pub codec: CodecSpec,
    pub circuit: Option<u8>,
    pub optimizer: String,
    pub seed: u64,
    pub trace: Vec<TracePoint>,
    pub best_distance: f64,
    pub best_cycle: Cycle,
    pub best_bitstring: String,
    /// Total bit strings drawn from the device.
    pub bitstrings_sampled: u64,
    /// Batch evaluations of the cost function.
    pub cost_evaluations: u64,
    pub cache: CacheStats,
    pub coverage: f64,
    pub wall_time_secs: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

impl RunRecord {
    /// Per-iteration trace as CSV: `t,sliced_avg,best`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("t,sliced_avg,best\n");
        for p in &self.trace {
            out.push_str(&format!("{},{},{}\n", p.t, p.sliced_avg, p.best));
        }
        out
    }
}

/// Samples batches for the run loop, tracking totals and the best string.
struct Evaluator<'a> {
    inst: &'a TspInstance,
    codec: &'a CodecSpec,
    circuit: &'a CircuitSpec,
    cache: &'a CostCache,
    slice: SliceConfig,
    shots: u64,
    seed: u64,
    evals: u64,
    sampled: u64,
    best: Option<(f64, BitString)>,
}

impl Evaluator<'_> {
    fn eval(&mut self, theta: &[f64]) -> Result<f64> {
        self.eval_sliced(theta, self.slice)
    }

    /// One cost evaluation: fresh shots, sliced average, best-so-far update.
    /// Batch iteration order makes tie-breaks deterministic.
    fn eval_sliced(&mut self, theta: &[f64], slice: SliceConfig) -> Result<f64> {
        let shot_seed = mix_seed(self.seed, self.evals);
        self.evals += 1;
        self.sampled += self.shots;
        let batch = sample(self.circuit, theta, self.shots, shot_seed)?;
        let (avg, _, (word, d)) =
            batch_average_tracked(&batch, slice, self.inst, self.codec, self.cache)?;
        if self.best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            self.best = Some((d, word));
        }
        Ok(avg)
    }
}

/// Run the variational loop and return the full record.
pub fn run_vqa(
    inst: &TspInstance,
    circuit: &CircuitSpec,
    codec: &CodecSpec,
    cfg: &VqaConfig,
    seed: u64,
) -> Result<RunRecord> {
    let started = Instant::now();
    let q = codec.bit_length()?;
    if q != circuit.q {
        return Err(Error::Config(format!(
            "codec needs {q} qubits but circuit {} has {}",
            circuit.id, circuit.q
        )));
    }
    if codec.n != inst.n() {
        return Err(Error::Config(format!(
            "codec is for n={} but instance has n={}",
            codec.n,
            inst.n()
        )));
    }
    let slice = SliceConfig::new(cfg.slice)?;
    let cache = CostCache::with_enabled(cfg.cache);
    let mut notes = Vec::new();

    let mut theta = if cfg.warm_start {
        let (greedy_cycle, _) = greedy_nearest_neighbour(inst);
        let word = codec.encode(&greedy_cycle)?;
        load_warm_start(circuit, &word)?
    } else {
        vec![cfg.init_constant; circuit.param_count]
    };

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x5eed));
    let mut ev = Evaluator {
        inst,
        codec,
        circuit,
        cache: &cache,
        slice,
        shots: cfg.method.shots(),
        seed,
        evals: 0,
        sampled: 0,
        best: None,
    };

    let mut trace = Vec::with_capacity(cfg.method.iterations() as usize + 1);
    if cfg.method.iterations() == 0 {
        let avg = ev.eval(&theta)?;
        trace.push(TracePoint {
            t: 0,
            sliced_avg: avg,
            best: ev.best.as_ref().unwrap().0,
        });
    }

    match &cfg.method {
        GradientMethod::Spsa(spsa) => {
            // Exactly four evaluations per iteration: the gradient pair plus
            // the sliced-average and simple-average cost trackers, for a
            // total of 4 * I * n_shot sampled strings. The gradient scale G0
            // is the mean absolute component of iteration zero's estimate.
            let simple = SliceConfig::new(1.0)?;
            let mut g0 = 0.0;
            for t in 0..spsa.iterations {
                let (_, c_t) = spsa_schedules(spsa, t, 1.0);
                let grad = spsa_gradient(&mut |th: &[f64]| ev.eval(th), &theta, c_t, &mut rng)?;
                if t == 0 {
                    g0 = grad.iter().map(|g| g.abs()).sum::<f64>() / grad.len() as f64;
                    if g0 == 0.0 {
                        notes.push(format!(
                            "initial gradient scale measured 0, floored to {}",
                            spsa.g0_floor
                        ));
                        g0 = spsa.g0_floor;
                    }
                }
                let (a_t, _) = spsa_schedules(spsa, t, g0);
                for (p, g) in theta.iter_mut().zip(&grad) {
                    *p -= a_t * g;
                }
                let avg = ev.eval(&theta)?;
                ev.eval_sliced(&theta, simple)?;
                trace.push(TracePoint {
                    t: t + 1,
                    sliced_avg: avg,
                    best: ev.best.as_ref().unwrap().0,
                });
            }
        }
        GradientMethod::ParamShift(ps) => {
            for t in 0..ps.iterations {
                let grad = param_shift_gradient(&mut |th: &[f64]| ev.eval(th), &theta, ps.s)?;
                for (p, g) in theta.iter_mut().zip(&grad) {
                    *p -= ps.eta * g;
                }
                let avg = ev.eval(&theta)?;
                trace.push(TracePoint {
                    t: t + 1,
                    sliced_avg: avg,
                    best: ev.best.as_ref().unwrap().0,
                });
            }
        }
    }

    let (best_distance, best_word) = ev.best.take().unwrap();
    let best_cycle = codec.decode(&best_word)?;
    let cov = coverage(&cache, inst.n())?;
    Ok(RunRecord {
        model: "vqa".into(),
        n: inst.n(),
        q,
        codec: *codec,
        circuit: Some(circuit.id),
        optimizer: cfg.method.name().into(),
        seed,
        trace,
        best_distance,
        best_cycle,
        best_bitstring: best_word.to_string(),
        bitstrings_sampled: ev.sampled,
        cost_evaluations: ev.evals,
        cache: cache.stats(),
        coverage: cov.coverage,
        wall_time_secs: started.elapsed().as_secs_f64(),
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::CodecKind;
    use crate::qsim::build_circuit;
    use approx::assert_relative_eq;

    #[test]
    fn schedule_values() {
        let cfg = SpsaConfig::default();
        let (_, c0) = spsa_schedules(&cfg, 0, 1.0);
        assert_relative_eq!(c0, std::f64::consts::PI / 10.0, max_relative = 1e-12);
        let (_, c1) = spsa_schedules(&cfg, 1, 1.0);
        assert_relative_eq!(c1, cfg.c / 2f64.powf(0.101), max_relative = 1e-12);
        assert!((c1 - 0.2934).abs() < 2e-3);
        // a_0 with G0 = 1 collapses to eta.
        let (a0, _) = spsa_schedules(&cfg, 0, 1.0);
        assert_relative_eq!(a0, cfg.eta, max_relative = 1e-12);
    }

    #[test]
    fn schedules_decrease_and_stay_positive() {
        let cfg = SpsaConfig::default();
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for t in 0..10_000 {
            let (a_t, c_t) = spsa_schedules(&cfg, t, 2.5);
            assert!(a_t > 0.0 && c_t > 0.0);
            assert!(a_t < prev.0 && c_t < prev.1, "t={t}");
            prev = (a_t, c_t);
        }
    }

    #[test]
    fn g0_floor_substitution() {
        let cfg = SpsaConfig::default();
        let (a0_floored, _) = spsa_schedules(&cfg, 0, 0.0);
        assert_relative_eq!(a0_floored, cfg.eta / cfg.g0_floor, max_relative = 1e-12);
    }

    #[test]
    fn spsa_gradient_contract() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut calls = 0u64;
        let mut constant = |_: &[f64]| {
            calls += 1;
            Ok(7.0)
        };
        let g = spsa_gradient(&mut constant, &[0.0; 5], 0.1, &mut rng).unwrap();
        assert_eq!(calls, 2);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn spsa_gradient_linear_expectation() {
        // On a linear cost v . theta the estimate of component i is
        // v_i + sum_{j != i} v_j D_j / D_i, so each component's expectation
        // over the perturbation signs is v_i.
        let v = [2.0, -1.0, 0.5, 3.0];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut sums = [0.0; 4];
        let draws = 4000;
        for _ in 0..draws {
            let mut cost = |theta: &[f64]| Ok(theta.iter().zip(&v).map(|(t, c)| t * c).sum());
            let g = spsa_gradient(&mut cost, &[0.1, 0.2, -0.3, 0.4], 0.05, &mut rng).unwrap();
            for (s, gi) in sums.iter_mut().zip(&g) {
                *s += gi;
            }
        }
        for (mean, want) in sums.iter().map(|s| s / draws as f64).zip(&v) {
            assert!((mean - want).abs() < 0.05 * 6.5, "mean={mean} want={want}");
        }
    }

    #[test]
    fn param_shift_contract_and_magnitude() {
        let mut calls = 0u64;
        let mut cost = |theta: &[f64]| {
            calls += 1;
            Ok(theta[0])
        };
        let g = param_shift_gradient(&mut cost, &[0.0, 0.0, 0.0], 0.5).unwrap();
        assert_eq!(calls, 6);
        // Linear cost: component 0 sees s * (shift - (-shift)) = s * 2 * pi/(4s) = pi/2.
        assert_relative_eq!(g[0], std::f64::consts::FRAC_PI_2, max_relative = 1e-12);
        assert_eq!(g[1], 0.0);
        assert!(param_shift_gradient(&mut |_| Ok(0.0), &[0.0], 0.0).is_err());
    }

    #[test]
    fn param_shift_matches_closed_form_on_circuit() {
        // Cost = P(measure 1) on a one-qubit RX circuit is sin^2(theta/2);
        // its derivative is sin(theta)/2. Exact probabilities, no sampling.
        let spec = build_circuit(4, 1).unwrap();
        for &theta in &[0.3, 1.1, 2.4] {
            let mut cost =
                |th: &[f64]| Ok(crate::qsim::probabilities(&spec, th).unwrap()[1]);
            let g = param_shift_gradient(&mut cost, &[theta], 0.5).unwrap();
            assert_relative_eq!(g[0], theta.sin() / 2.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn spsa_converges_on_exact_quadratic() {
        // Deterministic quadratic with exact evaluation; defaults must reach
        // <= 1% of the initial cost within 500 iterations in most seeds.
        // Geometric start weights keep the single-shot G0 probe informative:
        // the perturbation inner product can neither cancel (which would
        // trip the zero floor) nor dwarf the true gradient scale.
        let cfg = SpsaConfig {
            iterations: 500,
            ..SpsaConfig::default()
        };
        let theta0 = [3.0, 1.5, 0.75, 0.375];
        let mut ok = 0;
        for seed in 0..20 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut theta = theta0.to_vec();
            let cost = |t: &[f64]| -> f64 { t.iter().map(|x| x * x).sum() };
            let initial = cost(&theta);
            let mut wrapped = |t: &[f64]| Ok(cost(t));
            let probe = spsa_gradient(&mut wrapped, &theta, cfg.c, &mut rng).unwrap();
            let g0 = probe.iter().map(|g| g.abs()).sum::<f64>() / theta.len() as f64;
            for t in 0..cfg.iterations {
                let (a_t, c_t) = spsa_schedules(&cfg, t, g0);
                let mut wrapped = |t: &[f64]| Ok(cost(t));
                let grad = spsa_gradient(&mut wrapped, &theta, c_t, &mut rng).unwrap();
                for (p, g) in theta.iter_mut().zip(&grad) {
                    *p -= a_t * g;
                }
            }
            if cost(&theta) <= 0.01 * initial {
                ok += 1;
            }
        }
        assert!(ok >= 18, "only {ok}/20 seeds converged");
    }

    #[test]
    fn runtime_estimate() {
        let t = estimate_runtime(250, 1024, 2e-6);
        assert_relative_eq!(t, 2.048, max_relative = 1e-12);
        assert_eq!(estimate_runtime(250, 1024, 0.0), 0.0);
        assert_relative_eq!(
            estimate_runtime(500, 1024, 2e-6),
            2.0 * t,
            max_relative = 1e-12
        );
    }

    #[test]
    fn zero_iteration_run_records_initial_sample() {
        let inst = TspInstance::random(5, 3).unwrap();
        let codec = CodecSpec::new(CodecKind::NonFactorial, false, 5);
        let circuit = build_circuit(2, codec.bit_length().unwrap()).unwrap();
        let cfg = VqaConfig {
            method: GradientMethod::Spsa(SpsaConfig {
                iterations: 0,
                shots: 256,
                ..SpsaConfig::default()
            }),
            ..VqaConfig::default()
        };
        let rec = run_vqa(&inst, &circuit, &codec, &cfg, 5).unwrap();
        assert_eq!(rec.trace.len(), 1);
        assert_eq!(rec.cost_evaluations, 1);
        assert_eq!(rec.bitstrings_sampled, 256);
        assert!(rec.best_distance > 0.0);
    }

    #[test]
    fn run_is_bit_reproducible_and_within_budget() {
        let inst = TspInstance::random(5, 8).unwrap();
        let codec = CodecSpec::new(CodecKind::NonFactorial, false, 5);
        let circuit = build_circuit(2, codec.bit_length().unwrap()).unwrap();
        let cfg = VqaConfig {
            method: GradientMethod::Spsa(SpsaConfig {
                iterations: 20,
                shots: 128,
                ..SpsaConfig::default()
            }),
            ..VqaConfig::default()
        };
        let a = run_vqa(&inst, &circuit, &codec, &cfg, 99).unwrap();
        let b = run_vqa(&inst, &circuit, &codec, &cfg, 99).unwrap();
        assert_eq!(a.best_distance.to_bits(), b.best_distance.to_bits());
        assert_eq!(a.trace.len(), b.trace.len());
        for (x, y) in a.trace.iter().zip(&b.trace) {
            assert_eq!(x.sliced_avg.to_bits(), y.sliced_avg.to_bits());
            assert_eq!(x.best.to_bits(), y.best.to_bits());
        }
        // SPSA budget: exactly four evaluations per iteration.
        assert_eq!(a.cost_evaluations, 4 * 20);
        assert_eq!(a.bitstrings_sampled, 4 * 20 * 128);
        // Best-so-far is non-increasing along the trace.
        for w in a.trace.windows(2) {
            assert!(w[1].best <= w[0].best);
        }
    }

    #[test]
    fn warm_start_runs_and_matches_greedy_initially() {
        let inst = TspInstance::random(6, 21).unwrap();
        let codec = CodecSpec::new(CodecKind::NonFactorial, false, 6);
        let circuit = build_circuit(2, codec.bit_length().unwrap()).unwrap();
        let cfg = VqaConfig {
            warm_start: true,
            method: GradientMethod::Spsa(SpsaConfig {
                iterations: 0,
                shots: 64,
                ..SpsaConfig::default()
            }),
            ..VqaConfig::default()
        };
        let rec = run_vqa(&inst, &circuit, &codec, &cfg, 1).unwrap();
        let (_, greedy_len) = greedy_nearest_neighbour(&inst);
        // Iteration zero samples the greedy string with probability 1.
        assert_relative_eq!(rec.best_distance, greedy_len, max_relative = 1e-12);
        assert_relative_eq!(rec.trace[0].sliced_avg, greedy_len, max_relative = 1e-12);
    }

    #[test]
    fn mismatched_circuit_width_is_config_error() {
        let inst = TspInstance::random(5, 3).unwrap();
        let codec = CodecSpec::new(CodecKind::NonFactorial, false, 5);
        let circuit = build_circuit(2, 4).unwrap();
        let err = run_vqa(&inst, &circuit, &codec, &VqaConfig::default(), 0).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
