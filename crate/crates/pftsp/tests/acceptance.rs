//! Acceptance suite: each test is one go/no-go criterion with its tolerance
//! pinned in code. Run with `cargo test --test acceptance -- --test-threads=1`
//! for stable timing on the wall-clock criterion.

use pftsp::bench::monte_carlo;
use pftsp::codec::{bit_length, BitString, CodecKind, CodecSpec};
use pftsp::cost::{batch_average, distinct_cycles, CostCache, SliceConfig};
use pftsp::ml::{backward, cost_gradient, forward, InputMode, MlConfig, MlModel};
use pftsp::optimizer::{
    estimate_runtime, param_shift_gradient, run_vqa, spsa_gradient, spsa_schedules,
    GradientMethod, ParamShiftConfig, SpsaConfig, VqaConfig,
};
use pftsp::qsim::{build_circuit, sample, SampleBatch};
use pftsp::tsp::{brute_force_optimum, greedy_nearest_neighbour, TspInstance};

use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

const ACCEPT_SEED: u64 = 0xACCE_5EED;

/// splitmix64-style seed derivation, fixed for the whole suite.
fn mix_seed(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9e3779b97f4a7c15);
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn accept_instance(n: usize, k: usize) -> TspInstance {
    TspInstance::random(n, mix_seed(ACCEPT_SEED, (n * 100 + k) as u64)).unwrap()
}

fn run_seed(tag: u64, n: usize, k: usize) -> u64 {
    mix_seed(ACCEPT_SEED ^ tag, (n * 1000 + k) as u64)
}

fn default_vqa(inst: &TspInstance, codec: &CodecSpec, circuit_id: u8, seed: u64) -> (f64, u64) {
    let q = codec.bit_length().unwrap();
    let circuit = build_circuit(circuit_id, q).unwrap();
    let rec = run_vqa(inst, &circuit, codec, &VqaConfig::default(), seed).unwrap();
    (rec.best_distance, rec.cache.hits + rec.cache.misses)
}

#[test]
fn criterion_01_encoding_tables() {
    let binary_vars = [3usize, 5, 8, 11, 14, 17, 21, 25, 29];
    for (n, want) in (4..=12).zip(binary_vars) {
        assert_eq!(
            bit_length(CodecKind::NonFactorial, n).unwrap(),
            want,
            "non-factorial length at n={n}"
        );
    }
    let qubit_rows = [
        (5usize, 5usize, 7usize),
        (10, 21, 22),
        (15, 41, 41),
        (20, 64, 62),
        (25, 89, 84),
        (30, 114, 108),
        (35, 141, 133),
        (40, 171, 160),
        (45, 201, 187),
        (50, 231, 215),
        (55, 261, 243),
        (60, 291, 273),
    ];
    for (n, non_fact, fact) in qubit_rows {
        assert_eq!(bit_length(CodecKind::NonFactorial, n).unwrap(), non_fact, "n={n}");
        assert_eq!(bit_length(CodecKind::Factorial, n).unwrap(), fact, "n={n}");
    }
    // Crossover: the two formulations need the same width at n=15.
    assert_eq!(
        bit_length(CodecKind::NonFactorial, 15).unwrap(),
        bit_length(CodecKind::Factorial, 15).unwrap()
    );
}

#[test]
fn criterion_02_distinct_cycle_counts() {
    let exact: [u64; 9] = [
        3, 12, 60, 360, 2_520, 20_160, 181_440, 1_814_400, 19_958_400,
    ];
    for (n, want) in (4..=12).zip(exact) {
        assert_eq!(
            distinct_cycles(n).unwrap(),
            num_bigint::BigUint::from(want),
            "n={n}"
        );
    }
    // Four significant figures for the large sizes.
    let large = [
        (15usize, 4.359e10),
        (17, 1.046e13),
        (26, 7.756e24),
        (42, 1.673e49),
        (48, 1.293e59),
    ];
    for (n, approx) in large {
        let exact = distinct_cycles(n).unwrap().to_f64().unwrap();
        let rel = (exact - approx).abs() / exact;
        assert!(rel <= 5e-4, "n={n}: {exact:e} vs {approx:e} (rel {rel:.2e})");
    }
}

#[test]
fn criterion_03_codec_exhaustive_small_n() {
    for n in 3..=7usize {
        let perms = factorial(n - 1);
        for kind in [CodecKind::NonFactorial, CodecKind::Factorial] {
            for gray in [false, true] {
                let spec = CodecSpec::new(kind, gray, n);
                let len = spec.bit_length().unwrap();
                let mut reached = BTreeSet::new();
                for v in 0..(1u128 << len) {
                    let word = BitString::from_value(v, len);
                    let cycle = spec.decode(&word).unwrap();
                    assert_eq!(cycle.order()[0], 0, "fixed start (n={n} {kind} gray={gray})");
                    assert_eq!(cycle.len(), n);
                    reached.insert(cycle.order().to_vec());
                }
                // Every fixed-start permutation is reachable.
                assert_eq!(
                    reached.len() as u64,
                    perms,
                    "surjectivity (n={n} {kind} gray={gray})"
                );
                // Exact inverse on every reachable cycle.
                for order in &reached {
                    let cycle = pftsp::tsp::Cycle::new(order.clone()).unwrap();
                    let word = spec.encode(&cycle).unwrap();
                    assert_eq!(spec.decode(&word).unwrap(), cycle);
                }
            }
        }
    }
}

fn factorial(n: usize) -> u64 {
    (2..=n as u64).product::<u64>().max(1)
}

#[test]
fn criterion_04_solver_quality_at_desk_scale() {
    // Circuit 2 + SPSA + tuned defaults on five uniform instances per size.
    for n in 4..=9usize {
        let codec = CodecSpec::new(CodecKind::NonFactorial, false, n);
        let mut qualities = Vec::new();
        for k in 0..5 {
            let inst = accept_instance(n, k);
            let (_, optimum) = brute_force_optimum(&inst).unwrap();
            let (best, _) = default_vqa(&inst, &codec, 2, run_seed(4, n, k));
            qualities.push(optimum / best);
        }
        let mean = qualities.iter().sum::<f64>() / qualities.len() as f64;
        let perfect = qualities.iter().filter(|&&q| q >= 1.0 - 1e-9).count();
        assert!(mean >= 0.995, "n={n} mean quality {mean:.4} ({qualities:?})");
        assert!(perfect >= 4, "n={n}: only {perfect}/5 perfect ({qualities:?})");
    }
    // q = 21 and q = 25 stay above 0.97 mean quality; three runs per
    // instance, following the repeated-runs protocol of the reference
    // results.
    for n in [10usize, 11] {
        let codec = CodecSpec::new(CodecKind::NonFactorial, false, n);
        let mut qualities = Vec::new();
        for k in 0..5 {
            let inst = accept_instance(n, k);
            let (_, optimum) = brute_force_optimum(&inst).unwrap();
            for r in 0..3u64 {
                let seed = mix_seed(ACCEPT_SEED ^ 4, (n * 1000 + k) as u64 ^ (r << 40));
                let (best, _) = default_vqa(&inst, &codec, 2, seed);
                qualities.push(optimum / best);
            }
        }
        let mean = qualities.iter().sum::<f64>() / qualities.len() as f64;
        assert!(mean >= 0.97, "n={n} mean quality {mean:.4} ({qualities:?})");
    }
    // Twelve locations (q=29) run on the product path with circuits 4 and 5
    // and beat the greedy baseline on most instances; the dense path refuses
    // the width for entangling circuits (checked in criterion 6's guard and
    // the qsim tests).
    let n = 12;
    let codec = CodecSpec::new(CodecKind::NonFactorial, false, n);
    for circuit_id in [4u8, 5] {
        let mut beats = 0;
        let mut report = Vec::new();
        for k in 0..5 {
            let inst = accept_instance(n, k);
            let (_, optimum) = brute_force_optimum(&inst).unwrap();
            let (_, greedy) = greedy_nearest_neighbour(&inst);
            let (best, _) = default_vqa(&inst, &codec, circuit_id, run_seed(12, n, k));
            let vqa_q = optimum / best;
            let greedy_q = optimum / greedy;
            report.push((vqa_q, greedy_q));
            if vqa_q > greedy_q {
                beats += 1;
            }
        }
        assert!(
            beats >= 3,
            "circuit {circuit_id} beat greedy on {beats}/5 instances: {report:?}"
        );
    }
}

#[test]
fn criterion_05a_parameter_shift_matches_closed_form() {
    // One-qubit RX circuit, cost = P(1) from a million shots per evaluation;
    // the estimate must sit within three sampling standard deviations of
    // d/dtheta sin^2(theta/2) = sin(theta)/2.
    let spec = build_circuit(4, 1).unwrap();
    let shots = 1_000_000u64;
    let s = 0.5;
    let shift = std::f64::consts::PI / (4.0 * s);
    let mut rng = ChaCha8Rng::seed_from_u64(ACCEPT_SEED ^ 0xa);
    let mut eval_seed = ACCEPT_SEED ^ 0x50;
    for case in 0..10 {
        let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let mut cost = |t: &[f64]| -> pftsp::Result<f64> {
            eval_seed = eval_seed.wrapping_add(1);
            let batch = sample(&spec, t, shots, eval_seed)?;
            let ones = batch
                .counts
                .get(&BitString::parse("1").unwrap())
                .copied()
                .unwrap_or(0);
            Ok(ones as f64 / shots as f64)
        };
        let grad = param_shift_gradient(&mut cost, &[theta], s).unwrap();
        let expected = theta.sin() / 2.0;
        let p = |t: f64| (t / 2.0).sin().powi(2);
        let var =
            p(theta + shift) * (1.0 - p(theta + shift)) + p(theta - shift) * (1.0 - p(theta - shift));
        let sigma = s * (var / shots as f64).sqrt();
        assert!(
            (grad[0] - expected).abs() <= 3.0 * sigma,
            "case {case}: grad {} vs {expected} (3 sigma = {})",
            grad[0],
            3.0 * sigma
        );
    }
}

#[test]
fn criterion_05b_spsa_converges_on_exact_quadratic() {
    let cfg = SpsaConfig {
        iterations: 500,
        ..SpsaConfig::default()
    };
    let theta0 = [3.0, 1.5, 0.75, 0.375];
    let mut converged = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(ACCEPT_SEED ^ 0xb, seed));
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
            converged += 1;
        }
    }
    assert!(converged >= 18, "{converged}/20 seeds converged");
}

#[test]
fn criterion_05c_ml_gradient_matches_finite_differences() {
    // q=3 toy with frozen binarization noise: the straight-through surrogate
    // S(W) = sum(G . A(W)) must match central differences to 1e-4 relative.
    let cfg = MlConfig {
        layers: 2,
        input_vectors: 6,
        input_mode: InputMode::Halves,
        ..MlConfig::default()
    };
    let model = MlModel::new(3, &cfg, None, ACCEPT_SEED ^ 0xc).unwrap();
    let inst = accept_instance(4, 0);
    let spec = CodecSpec::new(CodecKind::NonFactorial, false, 4);
    let cache = CostCache::new();

    // Forward once with fixed noise to freeze the binarized rows, then build
    // the bit-flip cost gradient matrix G at those rows.
    let mut rng = ChaCha8Rng::seed_from_u64(ACCEPT_SEED ^ 0xd);
    let pass = forward(&model, &mut rng);
    let mut g = ndarray::Array2::zeros((6, 3));
    for (i, row) in pass.rows().enumerate() {
        let word = BitString::new(row).unwrap();
        let grad = cost_gradient(&word, &inst, &spec, &cache).unwrap();
        for (j, v) in grad.into_iter().enumerate() {
            g[(i, j)] = v / 6.0;
        }
    }
    let grads = backward(&model, &pass, &g);

    let input = ndarray::Array2::from_shape_fn((6, 3), |_| 0.5);
    let surrogate = |m: &MlModel| -> f64 { (&m.output_for(&input) * &g).sum() };
    // Relative check scaled against the gradient magnitude: structurally-zero
    // entries (aliased bit flips zero out G columns) sit at the finite-
    // difference noise floor and compare against the overall scale instead.
    let scale = (0..2)
        .flat_map(|l| grads.weight(l).iter().chain(grads.bias(l)))
        .fold(0f64, |m, g| m.max(g.abs()));
    let check = |fd: f64, bp: f64, what: &str| {
        let denom = fd.abs().max(bp.abs()).max(scale);
        assert!(
            (fd - bp).abs() <= 1e-4 * denom,
            "{what}: fd {fd} vs bp {bp} (scale {scale})"
        );
    };
    let eps = 1e-5;
    for l in 0..2 {
        for i in 0..3 {
            for j in 0..3 {
                let mut plus = model.clone();
                plus.layer_weight_mut(l)[(i, j)] += eps;
                let mut minus = model.clone();
                minus.layer_weight_mut(l)[(i, j)] -= eps;
                let fd = (surrogate(&plus) - surrogate(&minus)) / (2.0 * eps);
                check(fd, grads.weight(l)[(i, j)], &format!("l={l} w[{i}][{j}]"));
            }
            let mut plus = model.clone();
            plus.layer_bias_mut(l)[i] += eps;
            let mut minus = model.clone();
            minus.layer_bias_mut(l)[i] -= eps;
            let fd = (surrogate(&plus) - surrogate(&minus)) / (2.0 * eps);
            check(fd, grads.bias(l)[i], &format!("l={l} b[{i}]"));
        }
    }
}

#[test]
fn criterion_06_budget_accounting() {
    // SPSA with tuned defaults stays within 4 * I * n_shot sampled strings.
    let n = 6;
    let inst = accept_instance(n, 0);
    let codec = CodecSpec::new(CodecKind::NonFactorial, false, n);
    let circuit = build_circuit(2, codec.bit_length().unwrap()).unwrap();
    let cfg = VqaConfig::default();
    let rec = run_vqa(&inst, &circuit, &codec, &cfg, run_seed(6, n, 0)).unwrap();
    let (iterations, shots) = match &cfg.method {
        GradientMethod::Spsa(s) => (s.iterations, s.shots),
        _ => unreachable!(),
    };
    assert!(
        rec.bitstrings_sampled <= 4 * iterations * shots,
        "{} > {}",
        rec.bitstrings_sampled,
        4 * iterations * shots
    );

    // Parameter shift: gradient evaluations per iteration are exactly
    // 2 * param_count (plus the one tracking evaluation).
    let iters = 4u64;
    let ps = VqaConfig {
        method: GradientMethod::ParamShift(ParamShiftConfig {
            iterations: iters,
            shots: 64,
            ..ParamShiftConfig::default()
        }),
        ..VqaConfig::default()
    };
    let rec = run_vqa(&inst, &circuit, &codec, &ps, run_seed(6, n, 1)).unwrap();
    let per_iter_gradient_evals = (rec.cost_evaluations - iters) / iters;
    assert_eq!(per_iter_gradient_evals, 2 * circuit.param_count as u64);

    // Hardware projection.
    let t = estimate_runtime(250, 1024, 2e-6);
    assert!((t - 2.048).abs() < 1e-12);
    assert!((t - 2.05).abs() < 0.01);
}

#[test]
fn criterion_07_cache_speedup_under_parameter_shift() {
    // Full tuned defaults at n=8 with the parameter-shift optimizer, cache
    // enabled versus disabled. Results must be bit-identical and the wall
    // time must drop by at least 2x.
    let n = 8;
    let inst = accept_instance(n, 0);
    let codec = CodecSpec::new(CodecKind::NonFactorial, false, n);
    let circuit = build_circuit(2, codec.bit_length().unwrap()).unwrap();
    let mut records = Vec::new();
    for cache in [true, false] {
        let cfg = VqaConfig {
            method: GradientMethod::ParamShift(ParamShiftConfig::default()),
            cache,
            ..VqaConfig::default()
        };
        records.push(run_vqa(&inst, &circuit, &codec, &cfg, run_seed(7, n, 0)).unwrap());
    }
    let (cached, uncached) = (&records[0], &records[1]);

    // Bit-identical outcomes regardless of caching.
    assert_eq!(cached.best_distance.to_bits(), uncached.best_distance.to_bits());
    assert_eq!(cached.best_bitstring, uncached.best_bitstring);
    assert_eq!(cached.trace.len(), uncached.trace.len());
    for (a, b) in cached.trace.iter().zip(&uncached.trace) {
        assert_eq!(a.sliced_avg.to_bits(), b.sliced_avg.to_bits());
        assert_eq!(a.best.to_bits(), b.best.to_bits());
    }

    let speedup = uncached.wall_time_secs / cached.wall_time_secs;
    assert!(
        speedup >= 2.0,
        "cache speedup {speedup:.2}x (cached {:.2}s, uncached {:.2}s): the decode-and-walk \
         cost evaluation this cache skips is a few hundred nanoseconds per shot here, \
         comparable to drawing the shot itself, so caching cannot halve the wall time \
         in this implementation; see the decisions ledger",
        cached.wall_time_secs,
        uncached.wall_time_secs
    );
}

#[test]
fn criterion_08_monte_carlo_parity() {
    // Matched budgets: the paper matches Monte Carlo to the largest number
    // of strings the model sampled for a given size.
    for n in 4..=9usize {
        let codec = CodecSpec::new(CodecKind::NonFactorial, false, n);
        let inst0 = accept_instance(n, 0);
        let (_, budget) = default_vqa(&inst0, &codec, 2, run_seed(8, n, 0));
        for k in 0..5 {
            let inst = accept_instance(n, k);
            let (_, optimum) = brute_force_optimum(&inst).unwrap();
            let (_, d) = monte_carlo(&inst, &codec, budget, run_seed(80, n, k)).unwrap();
            let quality = optimum / d;
            assert!(
                quality >= 1.0 - 1e-9,
                "n={n} k={k}: monte carlo quality {quality:.4} at budget {budget}"
            );
        }
    }
    // At twelve locations a ~1e6 budget covers a twentieth of the cycle
    // space; most instances stay below quality 1.
    let n = 12;
    let codec = CodecSpec::new(CodecKind::NonFactorial, false, n);
    let budget = 1_024_000u64;
    let mut below = 0;
    let mut qualities = Vec::new();
    for k in 0..5 {
        let inst = accept_instance(n, k);
        let (_, optimum) = brute_force_optimum(&inst).unwrap();
        let (_, d) = monte_carlo(&inst, &codec, budget, run_seed(81, n, k)).unwrap();
        let q = optimum / d;
        qualities.push(q);
        if q < 1.0 - 1e-9 {
            below += 1;
        }
    }
    assert!(below >= 3, "only {below}/5 below 1.0: {qualities:?}");
}

#[test]
fn criterion_09_ablation_neutrality() {
    // Gray on/off and factorial/non-factorial means differ by at most three
    // quality points at desk scale (five seeds at n=8).
    let n = 8;
    let mut means = std::collections::HashMap::new();
    for kind in [CodecKind::NonFactorial, CodecKind::Factorial] {
        for gray in [false, true] {
            let codec = CodecSpec::new(kind, gray, n);
            let mut total = 0.0;
            for k in 0..5 {
                let inst = accept_instance(n, k);
                let (_, optimum) = brute_force_optimum(&inst).unwrap();
                let (best, _) = default_vqa(&inst, &codec, 2, run_seed(9, n, k));
                total += optimum / best;
            }
            means.insert((kind, gray), total / 5.0);
        }
    }
    for kind in [CodecKind::NonFactorial, CodecKind::Factorial] {
        let diff = (means[&(kind, false)] - means[&(kind, true)]).abs();
        assert!(diff <= 0.03, "{kind}: gray ablation moved quality by {diff:.4}");
    }
    for gray in [false, true] {
        let diff =
            (means[&(CodecKind::NonFactorial, gray)] - means[&(CodecKind::Factorial, gray)]).abs();
        assert!(diff <= 0.03, "gray={gray}: codec ablation moved quality by {diff:.4}");
    }
}

#[test]
fn criterion_10_slicing_identity_and_monotonicity() {
    let inst = accept_instance(6, 0);
    let spec = CodecSpec::new(CodecKind::NonFactorial, false, 6);
    let cache = CostCache::new();
    let len = spec.bit_length().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(ACCEPT_SEED ^ 0x10);
    for batch_idx in 0..1000 {
        let shots = rng.random_range(1..40u64);
        let mut counts = std::collections::BTreeMap::new();
        for _ in 0..shots {
            let word = BitString::random(len, &mut rng);
            *counts.entry(word).or_insert(0u64) += 1;
        }
        let batch = SampleBatch { counts, shots };
        // S = 1 equals the simple average.
        let (sliced, distances) =
            batch_average(&batch, SliceConfig::new(1.0).unwrap(), &inst, &spec, &cache).unwrap();
        let simple = distances.iter().sum::<f64>() / distances.len() as f64;
        assert!(
            (sliced - simple).abs() <= 1e-12 * simple.max(1.0),
            "batch {batch_idx}: {sliced} vs {simple}"
        );
        // Monotone non-decreasing in S.
        let mut prev = f64::NEG_INFINITY;
        for s in [0.2, 0.4, 0.6, 0.8, 1.0] {
            let (avg, _) =
                batch_average(&batch, SliceConfig::new(s).unwrap(), &inst, &spec, &cache).unwrap();
            assert!(avg >= prev - 1e-12, "batch {batch_idx} s={s}");
            prev = avg;
        }
    }
}
