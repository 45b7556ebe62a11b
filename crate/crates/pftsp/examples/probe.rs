use pftsp::codec::{CodecKind, CodecSpec};
use pftsp::optimizer::{run_vqa, VqaConfig};
use pftsp::qsim::build_circuit;
use pftsp::tsp::TspInstance;

fn main() {
    let inst = TspInstance::random(8, 1881).unwrap();
    let codec = CodecSpec::new(CodecKind::NonFactorial, false, 8);
    let circuit = build_circuit(2, codec.bit_length().unwrap()).unwrap();
    for seed in 0..10 {
        let rec = run_vqa(&inst, &circuit, &codec, &VqaConfig::default(), seed).unwrap();
        let t = &rec.trace;
        println!(
            "seed={seed} t1={:.1} t5={:.1} t50={:.1} t125={:.1} t250={:.1} best={:.1}",
            t[0].sliced_avg, t[4].sliced_avg, t[49].sliced_avg, t[124].sliced_avg,
            t[249].sliced_avg, rec.best_distance
        );
    }
}
