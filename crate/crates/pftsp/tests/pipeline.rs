//! Cross-module behaviour of the full solver pipeline.

use pftsp::codec::{CodecKind, CodecSpec};
use pftsp::ml::{run_ml, MlConfig};
use pftsp::optimizer::{run_vqa, GradientMethod, RunRecord, SpsaConfig, VqaConfig};
use pftsp::qsim::build_circuit;
use pftsp::tsp::{brute_force_optimum, TspInstance};

/// The sliced average decreases over a default run on most seeds (the
/// optimizer is actually descending, not just sampling).
#[test]
fn sliced_average_descends_on_n8_defaults() {
    let inst = TspInstance::random(8, 1881).unwrap();
    let codec = CodecSpec::new(CodecKind::NonFactorial, false, 8);
    let circuit = build_circuit(2, codec.bit_length().unwrap()).unwrap();
    let mut descended = 0;
    for seed in 0..10 {
        let rec = run_vqa(&inst, &circuit, &codec, &VqaConfig::default(), seed).unwrap();
        let first = rec.trace.first().unwrap().sliced_avg;
        let last = rec.trace.last().unwrap().sliced_avg;
        if last < first {
            descended += 1;
        }
    }
    assert!(descended >= 9, "sliced average descended in {descended}/10 seeds");
}

#[test]
fn run_record_round_trips_through_json() {
    let inst = TspInstance::random(5, 77).unwrap();
    let codec = CodecSpec::new(CodecKind::NonFactorial, false, 5);
    let circuit = build_circuit(2, codec.bit_length().unwrap()).unwrap();
    let cfg = VqaConfig {
        method: GradientMethod::Spsa(SpsaConfig {
            iterations: 5,
            shots: 64,
            ..SpsaConfig::default()
        }),
        ..VqaConfig::default()
    };
    let rec = run_vqa(&inst, &circuit, &codec, &cfg, 3).unwrap();
    let json = serde_json::to_string(&rec).unwrap();
    let back: RunRecord = serde_json::from_str(&json).unwrap();
    assert_eq!(back.best_distance.to_bits(), rec.best_distance.to_bits());
    assert_eq!(back.best_bitstring, rec.best_bitstring);
    assert_eq!(back.trace.len(), rec.trace.len());
    assert_eq!(back.codec, rec.codec);

    let csv = rec.trace_csv();
    assert!(csv.starts_with("t,sliced_avg,best\n"));
    assert_eq!(csv.lines().count(), rec.trace.len() + 1);
}

/// Both solver families find the optimum of an easy instance and report
/// consistent accounting.
#[test]
fn both_models_solve_an_easy_instance() {
    let inst = TspInstance::random(5, 4).unwrap();
    let (_, optimum) = brute_force_optimum(&inst).unwrap();
    let codec = CodecSpec::new(CodecKind::NonFactorial, false, 5);

    let circuit = build_circuit(2, codec.bit_length().unwrap()).unwrap();
    let vqa_cfg = VqaConfig {
        method: GradientMethod::Spsa(SpsaConfig {
            iterations: 30,
            shots: 256,
            ..SpsaConfig::default()
        }),
        ..VqaConfig::default()
    };
    let vqa = run_vqa(&inst, &circuit, &codec, &vqa_cfg, 9).unwrap();
    assert!((optimum / vqa.best_distance) >= 1.0 - 1e-9);
    assert_eq!(vqa.cache.hits + vqa.cache.misses >= vqa.bitstrings_sampled, true);

    let ml_cfg = MlConfig {
        epochs: 60,
        input_vectors: 32,
        ..MlConfig::default()
    };
    let ml = run_ml(&inst, &codec, &ml_cfg, 9).unwrap();
    assert!((optimum / ml.best_distance) >= 1.0 - 1e-9);
    assert_eq!(ml.bitstrings_sampled, 60 * 32);
}
