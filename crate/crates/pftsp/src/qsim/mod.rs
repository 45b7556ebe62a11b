//! Statevector simulation of the five shallow parametrized circuits.
//!
//! Three exact execution paths back the same sampling contract:
//! - `dense`: full 2^q statevector, guarded at [`DENSE_QUBIT_LIMIT`] qubits;
//! - `product`: per-qubit two-amplitude states for the entanglement-free
//!   circuits (4 and 5), unlimited width;
//! - `chain`: a matrix-product contraction for the entangling circuits.
//!   Every built-in circuit applies its nearest-neighbour two-qubit gates in
//!   a single staircase, so each bond is crossed exactly once and the state
//!   has Schmidt rank <= 2 across every cut; the contraction is exact.
//!
//! The dense-path budget is the sampling contract for entangling circuits:
//! requests above the limit are refused with a resource error even where the
//! chain path could serve them.

mod chain;
mod dense;
mod product;

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::BitString;
use crate::error::{Error, Result};

pub use chain::ChainState;
pub use product::ProductState;

/// Dense statevector budget: 2^25 double-complex amplitudes (512 MiB).
pub const DENSE_QUBIT_LIMIT: usize = 25;

/// Below this width the sampler materializes the full probability vector and
/// draws by inverse CDF; above it, shots are drawn one at a time from the
/// chain/product conditionals.
pub const MATERIALIZE_QUBIT_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateKind {
    H,
    RX,
    RY,
    RZ,
    CX,
    RXX,
    RZZ,
}

impl GateKind {
    pub fn is_two_qubit(self) -> bool {
        matches!(self, GateKind::CX | GateKind::RXX | GateKind::RZZ)
    }

    pub fn is_parametrized(self) -> bool {
        !matches!(self, GateKind::H | GateKind::CX)
    }
}

/// One gate application; `param_slot` indexes the parameter vector for
/// rotation gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateOp {
    pub kind: GateKind,
    pub targets: (usize, Option<usize>),
    pub param_slot: Option<usize>,
}

impl GateOp {
    fn one(kind: GateKind, q: usize, param_slot: Option<usize>) -> Self {
        debug_assert!(!kind.is_two_qubit());
        Self {
            kind,
            targets: (q, None),
            param_slot,
        }
    }

    fn two(kind: GateKind, a: usize, b: usize, param_slot: Option<usize>) -> Self {
        debug_assert!(kind.is_two_qubit() && a != b);
        Self {
            kind,
            targets: (a, Some(b)),
            param_slot,
        }
    }

    /// Rotation angle for this gate under `theta`; 0 for fixed gates.
    fn angle(&self, theta: &[f64]) -> f64 {
        self.param_slot.map_or(0.0, |s| theta[s])
    }
}

/// Parameter count convention for Circuit 3, whose published description is
/// ambiguous between one and two parametrized layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Circuit3Params {
    /// Both the per-qubit RZ and the pairwise RZZ angles are tunable (2q-1).
    #[default]
    Full,
    /// One parameter per qubit: only the RZ layer is tunable and the RZZ
    /// couplers are dropped (angle 0 is the identity).
    PerQubit,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CircuitOptions {
    pub circuit3: Circuit3Params,
}

/// An ordered gate list with its parameter budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub id: u8,
    pub q: usize,
    pub gates: Vec<GateOp>,
    pub param_count: usize,
}

impl CircuitSpec {
    pub fn has_two_qubit_gates(&self) -> bool {
        self.gates.iter().any(|g| g.kind.is_two_qubit())
    }

    /// Textual netlist, one gate per line: `KIND targets [slot]`.
    pub fn netlist(&self) -> String {
        let mut out = String::new();
        for g in &self.gates {
            out.push_str(&format!("{:?} {}", g.kind, g.targets.0));
            if let Some(t) = g.targets.1 {
                out.push_str(&format!(" {t}"));
            }
            if let Some(s) = g.param_slot {
                out.push_str(&format!(" [{s}]"));
            }
            out.push('\n');
        }
        out
    }
}

/// Build one of the five circuit layouts. Parameter slots are assigned in
/// gate order.
pub fn build_circuit(id: u8, q: usize) -> Result<CircuitSpec> {
    build_circuit_with(id, q, CircuitOptions::default())
}

pub fn build_circuit_with(id: u8, q: usize, opts: CircuitOptions) -> Result<CircuitSpec> {
    if q == 0 {
        return Err(Error::Config("circuits need at least one qubit".into()));
    }
    let mut gates = Vec::new();
    let mut slots = 0usize;
    let mut slot = |gates: &mut Vec<GateOp>, op: GateOp| {
        let op = if op.kind.is_parametrized() {
            let s = slots;
            slots += 1;
            GateOp {
                param_slot: Some(s),
                ..op
            }
        } else {
            op
        };
        gates.push(op);
    };
    match id {
        1 => {
            for i in 0..q {
                slot(&mut gates, GateOp::one(GateKind::H, i, None));
                slot(&mut gates, GateOp::one(GateKind::RY, i, None));
                slot(&mut gates, GateOp::one(GateKind::RX, i, None));
            }
            for i in 0..q.saturating_sub(1) {
                slot(&mut gates, GateOp::two(GateKind::CX, i, i + 1, None));
            }
        }
        2 => {
            for i in 0..q {
                slot(&mut gates, GateOp::one(GateKind::RX, i, None));
            }
            for i in 0..q.saturating_sub(1) {
                slot(&mut gates, GateOp::two(GateKind::RXX, i, i + 1, None));
            }
        }
        3 => {
            for i in 0..q {
                slot(&mut gates, GateOp::one(GateKind::H, i, None));
            }
            for i in 0..q {
                slot(&mut gates, GateOp::one(GateKind::RZ, i, None));
            }
            if opts.circuit3 == Circuit3Params::Full {
                for i in 0..q.saturating_sub(1) {
                    slot(&mut gates, GateOp::two(GateKind::RZZ, i, i + 1, None));
                }
            }
            for i in 0..q {
                slot(&mut gates, GateOp::one(GateKind::H, i, None));
            }
        }
        4 => {
            for i in 0..q {
                slot(&mut gates, GateOp::one(GateKind::RX, i, None));
            }
        }
        5 => {
            for i in 0..q {
                slot(&mut gates, GateOp::one(GateKind::H, i, None));
                slot(&mut gates, GateOp::one(GateKind::RY, i, None));
                slot(&mut gates, GateOp::one(GateKind::RX, i, None));
            }
        }
        other => return Err(Error::UnknownCircuit(other)),
    }
    Ok(CircuitSpec {
        id,
        q,
        gates,
        param_count: slots,
    })
}

/// Warm-start parameters for Circuit 2: coupler angles 0, per-qubit RX angle
/// 0 or pi following the target bit string, so the circuit initially emits
/// exactly that string.
pub fn load_warm_start(spec: &CircuitSpec, b: &BitString) -> Result<Vec<f64>> {
    if spec.id != 2 {
        return Err(Error::WarmStartUnsupported(spec.id));
    }
    if b.len() != spec.q {
        return Err(Error::LengthMismatch {
            expected: spec.q,
            got: b.len(),
        });
    }
    let mut theta = vec![0.0; spec.param_count];
    for (i, &bit) in b.bits().iter().enumerate() {
        if bit == 1 {
            theta[i] = std::f64::consts::PI;
        }
    }
    Ok(theta)
}

fn check_theta(spec: &CircuitSpec, theta: &[f64]) -> Result<()> {
    if theta.len() != spec.param_count {
        return Err(Error::LengthMismatch {
            expected: spec.param_count,
            got: theta.len(),
        });
    }
    Ok(())
}

/// Full statevector on the dense path, `|0..0>` input, qubit 0 as the most
/// significant index bit.
pub fn simulate(spec: &CircuitSpec, theta: &[f64]) -> Result<Vec<Complex64>> {
    check_theta(spec, theta)?;
    if spec.q > DENSE_QUBIT_LIMIT {
        return Err(Error::ResourceLimit {
            q: spec.q,
            limit: DENSE_QUBIT_LIMIT,
        });
    }
    dense::statevector(spec, theta)
}

/// Measurement probabilities from the dense path.
pub fn probabilities(spec: &CircuitSpec, theta: &[f64]) -> Result<Vec<f64>> {
    Ok(simulate(spec, theta)?.iter().map(|a| a.norm_sqr()).collect())
}

/// Which execution path serves a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    #[default]
    Auto,
    Dense,
    Chain,
    Product,
}

/// Shot counts drawn from the circuit's output distribution. Deterministic
/// per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub counts: BTreeMap<BitString, u64>,
    pub shots: u64,
}

impl SampleBatch {
    pub fn distinct(&self) -> usize {
        self.counts.len()
    }
}

/// Sample `shots` bit strings, picking the cheapest exact path.
pub fn sample(spec: &CircuitSpec, theta: &[f64], shots: u64, seed: u64) -> Result<SampleBatch> {
    sample_with(spec, theta, shots, seed, Backend::Auto)
}

pub fn sample_with(
    spec: &CircuitSpec,
    theta: &[f64],
    shots: u64,
    seed: u64,
    backend: Backend,
) -> Result<SampleBatch> {
    check_theta(spec, theta)?;
    let backend = match backend {
        Backend::Auto => {
            if !spec.has_two_qubit_gates() {
                Backend::Product
            } else {
                // Entangling circuits stay within the dense-path budget even
                // when the chain contraction executes them.
                if spec.q > DENSE_QUBIT_LIMIT {
                    return Err(Error::ResourceLimit {
                        q: spec.q,
                        limit: DENSE_QUBIT_LIMIT,
                    });
                }
                if chain::supports(spec) {
                    Backend::Chain
                } else {
                    Backend::Dense
                }
            }
        }
        other => other,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match backend {
        Backend::Auto => unreachable!(),
        Backend::Dense => {
            let probs = probabilities(spec, theta)?;
            Ok(batch_from_distribution(&probs, spec.q, shots, &mut rng))
        }
        Backend::Chain => {
            let chain = ChainState::build(spec, theta)?;
            if spec.q <= MATERIALIZE_QUBIT_LIMIT {
                let probs = chain.probabilities();
                Ok(batch_from_distribution(&probs, spec.q, shots, &mut rng))
            } else {
                let mut words = Vec::with_capacity(shots as usize);
                for _ in 0..shots {
                    words.push(chain.sample_shot(&mut rng));
                }
                Ok(batch_from_words(words, shots))
            }
        }
        Backend::Product => {
            let state = ProductState::build(spec, theta)?;
            if spec.q <= MATERIALIZE_QUBIT_LIMIT {
                let probs = state.probabilities_dense();
                Ok(batch_from_distribution(&probs, spec.q, shots, &mut rng))
            } else {
                let mut words = Vec::with_capacity(shots as usize);
                for _ in 0..shots {
                    words.push(state.sample_shot(&mut rng));
                }
                Ok(batch_from_words(words, shots))
            }
        }
    }
}

fn batch_from_distribution(
    probs: &[f64],
    q: usize,
    shots: u64,
    rng: &mut ChaCha8Rng,
) -> SampleBatch {
    use rand::Rng;
    let mut cum = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for &p in probs {
        acc += p;
        cum.push(acc);
    }
    let mut indices = Vec::with_capacity(shots as usize);
    for _ in 0..shots {
        let u: f64 = rng.random::<f64>() * acc;
        let idx = cum.partition_point(|&c| c <= u).min(probs.len() - 1);
        indices.push(idx as u128);
    }
    indices.sort_unstable();
    let mut counts = BTreeMap::new();
    let mut i = 0;
    while i < indices.len() {
        let mut j = i + 1;
        while j < indices.len() && indices[j] == indices[i] {
            j += 1;
        }
        counts.insert(BitString::from_value(indices[i], q), (j - i) as u64);
        i = j;
    }
    SampleBatch { counts, shots }
}

fn batch_from_words(words: Vec<Vec<u8>>, shots: u64) -> SampleBatch {
    let mut counts: BTreeMap<BitString, u64> = BTreeMap::new();
    for bits in words {
        *counts
            .entry(BitString::new(bits).expect("sampler emits 0/1 bits"))
            .or_insert(0) += 1;
    }
    SampleBatch { counts, shots }
}

pub(crate) mod matrices {
    //! Gate matrix conventions: RX = exp(-i theta X / 2) and analogues,
    //! RXX = exp(-i theta XX / 2), RZZ = exp(-i theta ZZ / 2), CX controlled
    //! on the lower qubit index.

    use num_complex::Complex64;

    pub const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    pub fn one_qubit(kind: super::GateKind, angle: f64) -> [[Complex64; 2]; 2] {
        let half = angle / 2.0;
        let (cos, sin) = (half.cos(), half.sin());
        match kind {
            super::GateKind::H => [
                [c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)],
                [c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0)],
            ],
            super::GateKind::RX => [[c(cos, 0.0), c(0.0, -sin)], [c(0.0, -sin), c(cos, 0.0)]],
            super::GateKind::RY => [[c(cos, 0.0), c(-sin, 0.0)], [c(sin, 0.0), c(cos, 0.0)]],
            super::GateKind::RZ => [
                [Complex64::from_polar(1.0, -half), c(0.0, 0.0)],
                [c(0.0, 0.0), Complex64::from_polar(1.0, half)],
            ],
            two => panic!("{two:?} is not a one-qubit gate"),
        }
    }

    /// 4x4 matrix over the (a, b) pair basis |a b>, a the lower qubit index.
    pub fn two_qubit(kind: super::GateKind, angle: f64) -> [[Complex64; 4]; 4] {
        let half = angle / 2.0;
        let (cos, sin) = (half.cos(), half.sin());
        let zero = c(0.0, 0.0);
        let mut m = [[zero; 4]; 4];
        match kind {
            super::GateKind::CX => {
                m[0][0] = c(1.0, 0.0);
                m[1][1] = c(1.0, 0.0);
                m[2][3] = c(1.0, 0.0);
                m[3][2] = c(1.0, 0.0);
            }
            super::GateKind::RXX => {
                for i in 0..4 {
                    m[i][i] = c(cos, 0.0);
                    m[i][3 - i] = c(0.0, -sin);
                }
            }
            super::GateKind::RZZ => {
                m[0][0] = Complex64::from_polar(1.0, -half);
                m[1][1] = Complex64::from_polar(1.0, half);
                m[2][2] = Complex64::from_polar(1.0, half);
                m[3][3] = Complex64::from_polar(1.0, -half);
            }
            one => panic!("{one:?} is not a two-qubit gate"),
        }
        m
    }
}
