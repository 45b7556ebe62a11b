//! Quantum-inspired classical model: square fully connected layers with sine
//! activation, stochastic binarization of the final activations, bit-flip
//! cost gradients fed back through a straight-through estimator, and SGD or
//! Adam updates.

use std::time::Instant;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::codec::{BitString, CodecSpec};
use crate::cost::{coverage, CostCache, SliceConfig};
use crate::defaults;
use crate::error::{Error, Result};
use crate::optimizer::{RunRecord, TracePoint};
use crate::tsp::{greedy_nearest_neighbour, TspInstance};
use crate::util::mix_seed;

/// How the constant input rows (and matching weights) are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    /// All-zero rows, fan-in uniform weights.
    #[default]
    Zeros,
    /// Constant 0.5 rows, fan-in uniform weights.
    Halves,
    /// Rows carry the greedy tour's bit string; every layer starts at the
    /// identity (plus spread-sigma noise) so the string propagates through.
    Warm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimKind {
    Sgd,
    Adam,
}

/// Gradient-descent settings; `momentum` is the SGD momentum or the Adam
/// beta-1 depending on `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub kind: OptimKind,
    pub eta: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self::sgd()
    }
}

impl OptimConfig {
    pub fn sgd() -> Self {
        Self {
            kind: OptimKind::Sgd,
            eta: defaults::SGD_ETA,
            momentum: defaults::SGD_MOMENTUM,
            weight_decay: defaults::SGD_WEIGHT_DECAY,
        }
    }

    pub fn adam() -> Self {
        Self {
            kind: OptimKind::Adam,
            eta: defaults::ADAM_ETA,
            momentum: defaults::ADAM_BETA1,
            weight_decay: defaults::ADAM_WEIGHT_DECAY,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            OptimKind::Sgd => "sgd",
            OptimKind::Adam => "adam",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlConfig {
    pub layers: usize,
    /// Input vectors per epoch (the shot count of this model).
    pub input_vectors: usize,
    pub input_mode: InputMode,
    /// Spread of the warm-start weight noise.
    pub sigma: f64,
    pub optim: OptimConfig,
    pub slice: f64,
    pub epochs: u64,
    pub cache: bool,
}

impl Default for MlConfig {
    fn default() -> Self {
        Self {
            layers: defaults::ML_LAYERS,
            input_vectors: defaults::ML_INPUT_VECTORS,
            input_mode: InputMode::default(),
            sigma: defaults::ML_SIGMA,
            optim: OptimConfig::default(),
            slice: defaults::ML_SLICE,
            epochs: defaults::ITERATIONS,
            cache: true,
        }
    }
}

#[derive(Debug, Clone)]
struct Layer {
    /// `w[out][in]`, square.
    w: Array2<f64>,
    b: Array1<f64>,
}

/// The model: `layers` square affine maps each followed by sine, then one
/// stochastic binarization of the final activations.
#[derive(Debug, Clone)]
pub struct MlModel {
    q: usize,
    n_s: usize,
    input_row: Vec<f64>,
    layers: Vec<Layer>,
}

impl MlModel {
    /// Initialize for `q` binary variables. `warm_word` must be given in
    /// [`InputMode::Warm`] and carries the bit string the model should emit
    /// before training.
    pub fn new(
        q: usize,
        cfg: &MlConfig,
        warm_word: Option<&BitString>,
        seed: u64,
    ) -> Result<Self> {
        if cfg.layers == 0 {
            return Err(Error::Config("the model needs at least one layer".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (input_row, layers) = match cfg.input_mode {
            InputMode::Zeros | InputMode::Halves => {
                let fill = if cfg.input_mode == InputMode::Zeros { 0.0 } else { 0.5 };
                let bound = 1.0 / (q as f64).sqrt();
                let layers = (0..cfg.layers)
                    .map(|_| Layer {
                        w: Array2::from_shape_fn((q, q), |_| rng.random_range(-bound..bound)),
                        b: Array1::from_shape_fn(q, |_| rng.random_range(-bound..bound)),
                    })
                    .collect();
                (vec![fill; q], layers)
            }
            InputMode::Warm => {
                let word = warm_word.ok_or_else(|| {
                    Error::Config("warm input mode needs the warm-start bit string".into())
                })?;
                if word.len() != q {
                    return Err(Error::LengthMismatch {
                        expected: q,
                        got: word.len(),
                    });
                }
                let noise = Normal::new(0.0, cfg.sigma)
                    .map_err(|e| Error::Config(format!("bad sigma: {e}")))?;
                let layers = (0..cfg.layers)
                    .map(|_| Layer {
                        w: Array2::from_shape_fn((q, q), |(i, j)| {
                            let unit = if i == j { 1.0 } else { 0.0 };
                            unit + if cfg.sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 }
                        }),
                        b: Array1::zeros(q),
                    })
                    .collect();
                let row = word.bits().iter().map(|&b| f64::from(b)).collect();
                (row, layers)
            }
        };
        Ok(Self {
            q,
            n_s: cfg.input_vectors,
            input_row,
            layers,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn input_vectors(&self) -> usize {
        self.n_s
    }

    /// Final pre-binarization activations for an explicit input matrix; the
    /// deterministic part of the model, used by gradient checks.
    pub fn output_for(&self, input: &Array2<f64>) -> Array2<f64> {
        let (acts, _) = forward_activations(self, input);
        acts.into_iter().last().unwrap()
    }

    pub fn layer_weight(&self, layer: usize) -> &Array2<f64> {
        &self.layers[layer].w
    }

    pub fn layer_weight_mut(&mut self, layer: usize) -> &mut Array2<f64> {
        &mut self.layers[layer].w
    }

    pub fn layer_bias(&self, layer: usize) -> &Array1<f64> {
        &self.layers[layer].b
    }

    pub fn layer_bias_mut(&mut self, layer: usize) -> &mut Array1<f64> {
        &mut self.layers[layer].b
    }
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Layer inputs: `acts[0]` is the input matrix, `acts[l]` is sin(z_l).
    acts: Vec<Array2<f64>>,
    /// Pre-activations per layer.
    pre: Vec<Array2<f64>>,
    /// Binarized output rows, exactly 0/1 valued.
    pub bits: Array2<f64>,
}

impl ForwardPass {
    pub fn rows(&self) -> impl Iterator<Item = Vec<u8>> + '_ {
        self.bits
            .axis_iter(Axis(0))
            .map(|row| row.iter().map(|&v| v as u8).collect())
    }

    /// Final pre-binarization activations.
    pub fn output_activations(&self) -> &Array2<f64> {
        self.acts.last().unwrap()
    }
}

/// Deterministic part of the forward pass: affine and sine layers.
fn forward_activations(model: &MlModel, input: &Array2<f64>) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
    let mut acts = vec![input.clone()];
    let mut pre = Vec::with_capacity(model.layers.len());
    for layer in &model.layers {
        let z = acts.last().unwrap().dot(&layer.w.t()) + &layer.b;
        acts.push(z.mapv(f64::sin));
        pre.push(z);
    }
    (acts, pre)
}

/// Run the layers on the constant input rows, then binarize every entry
/// against a fresh uniform draw: 1 when the activation exceeds it.
pub fn forward(model: &MlModel, rng: &mut impl Rng) -> ForwardPass {
    let input = Array2::from_shape_fn((model.n_s, model.q), |(_, j)| model.input_row[j]);
    let (acts, pre) = forward_activations(model, &input);
    let bits = acts
        .last()
        .unwrap()
        .mapv(|x| f64::from(binarize(x, rng.random::<f64>())));
    ForwardPass { acts, pre, bits }
}

/// `g(x)`: 1 when `x` beats the uniform draw `u`, else 0.
pub fn binarize(x: f64, u: f64) -> u8 {
    u8::from(x > u)
}

/// Bit-flip gradient of the decoded cost: component `j` compares the cost
/// before and after flipping bit `j`, signed by the bit's direction.
pub fn cost_gradient(
    row: &BitString,
    inst: &TspInstance,
    spec: &CodecSpec,
    cache: &CostCache,
) -> Result<Vec<f64>> {
    let base = cache.evaluate(row, inst, spec)?;
    let mut grad = Vec::with_capacity(row.len());
    let mut flipped = row.bits().to_vec();
    for j in 0..row.len() {
        flipped[j] ^= 1;
        let h_flip = cache.evaluate(&BitString::new(flipped.clone())?, inst, spec)?;
        flipped[j] ^= 1;
        let denom = 2.0 * f64::from(row.bits()[j]) - 1.0;
        grad.push((base - h_flip) / denom);
    }
    Ok(grad)
}

/// Per-layer gradients from one backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    dw: Vec<Array2<f64>>,
    db: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn weight(&self, layer: usize) -> &Array2<f64> {
        &self.dw[layer]
    }

    pub fn bias(&self, layer: usize) -> &Array1<f64> {
        &self.db[layer]
    }
}

/// Backpropagate `grad_out` (gradient at the binarized output) through the
/// straight-through estimator (identity), the sine layers (cosine factor) and
/// the affine maps.
pub fn backward(model: &MlModel, pass: &ForwardPass, grad_out: &Array2<f64>) -> Gradients {
    let layers = model.layers.len();
    let mut dw = Vec::with_capacity(layers);
    let mut db = Vec::with_capacity(layers);
    // Straight-through: the binarization backward is exactly the identity.
    let mut d = grad_out.clone();
    for l in (0..layers).rev() {
        let dz = &d * &pass.pre[l].mapv(f64::cos);
        dw.push(dz.t().dot(&pass.acts[l]));
        db.push(dz.sum_axis(Axis(0)));
        d = dz.dot(&model.layers[l].w);
    }
    dw.reverse();
    db.reverse();
    Gradients { dw, db }
}

/// Optimizer state: momentum buffers, or Adam moments with the step count.
#[derive(Debug, Clone, Default)]
pub struct OptimState {
    momentum: Vec<(Array2<f64>, Array1<f64>)>,
    adam_m: Vec<(Array2<f64>, Array1<f64>)>,
    adam_v: Vec<(Array2<f64>, Array1<f64>)>,
    t: u64,
}

/// Apply one SGD-with-momentum or Adam step, with the weight decay added to
/// the raw gradients.
pub fn apply_step(model: &mut MlModel, grads: &Gradients, cfg: &OptimConfig, state: &mut OptimState) {
    let layers = model.layers.len();
    if state.momentum.is_empty() {
        for layer in &model.layers {
            let zw = Array2::zeros(layer.w.raw_dim());
            let zb = Array1::zeros(layer.b.raw_dim());
            state.momentum.push((zw.clone(), zb.clone()));
            state.adam_m.push((zw.clone(), zb.clone()));
            state.adam_v.push((zw, zb));
        }
    }
    state.t += 1;
    for l in 0..layers {
        let gw = &grads.dw[l] + &(cfg.weight_decay * &model.layers[l].w);
        let gb = &grads.db[l] + &(cfg.weight_decay * &model.layers[l].b);
        match cfg.kind {
            OptimKind::Sgd => {
                let (bw, bb) = &mut state.momentum[l];
                *bw = cfg.momentum * &*bw + &gw;
                *bb = cfg.momentum * &*bb + &gb;
                model.layers[l].w -= &(cfg.eta * &*bw);
                model.layers[l].b -= &(cfg.eta * &*bb);
            }
            OptimKind::Adam => {
                let beta1 = cfg.momentum;
                let beta2 = defaults::ADAM_BETA2;
                let eps = defaults::ADAM_EPSILON;
                let (mw, mb) = &mut state.adam_m[l];
                *mw = beta1 * &*mw + &((1.0 - beta1) * &gw);
                *mb = beta1 * &*mb + &((1.0 - beta1) * &gb);
                let (vw, vb) = &mut state.adam_v[l];
                *vw = beta2 * &*vw + &((1.0 - beta2) * &gw.mapv(|g| g * g));
                *vb = beta2 * &*vb + &((1.0 - beta2) * &gb.mapv(|g| g * g));
                let bc1 = 1.0 - beta1.powi(state.t as i32);
                let bc2 = 1.0 - beta2.powi(state.t as i32);
                let step_w = mw.mapv(|m| m / bc1) / &vw.mapv(|v| (v / bc2).sqrt() + eps);
                let step_b = mb.mapv(|m| m / bc1) / &vb.mapv(|v| (v / bc2).sqrt() + eps);
                model.layers[l].w -= &(cfg.eta * &step_w);
                model.layers[l].b -= &(cfg.eta * &step_b);
            }
        }
    }
}

/// Convenience wrapper: backward pass then update.
pub fn backward_and_step(
    model: &mut MlModel,
    pass: &ForwardPass,
    grad_out: &Array2<f64>,
    cfg: &OptimConfig,
    state: &mut OptimState,
) {
    let grads = backward(model, pass, grad_out);
    apply_step(model, &grads, cfg, state);
}

/// Train the model on an instance: per epoch, forward, per-row decoded cost,
/// sliced average tracking, bit-flip gradients, backward and step.
pub fn run_ml(
    inst: &TspInstance,
    codec: &CodecSpec,
    cfg: &MlConfig,
    seed: u64,
) -> Result<RunRecord> {
    let started = Instant::now();
    let q = codec.bit_length()?;
    if codec.n != inst.n() {
        return Err(Error::Config(format!(
            "codec is for n={} but instance has n={}",
            codec.n,
            inst.n()
        )));
    }
    let slice = SliceConfig::new(cfg.slice)?;
    let cache = CostCache::with_enabled(cfg.cache);
    let warm_word = if cfg.input_mode == InputMode::Warm {
        let (greedy_cycle, _) = greedy_nearest_neighbour(inst);
        Some(codec.encode(&greedy_cycle)?)
    } else {
        None
    };
    let mut model = MlModel::new(q, cfg, warm_word.as_ref(), mix_seed(seed, 0x11))?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x22));
    let mut state = OptimState::default();

    let mut trace = Vec::new();
    let mut best: Option<(f64, BitString)> = None;
    let mut sampled = 0u64;
    let mut evals = 0u64;

    let epochs = cfg.epochs.max(0);
    let passes = if epochs == 0 { 1 } else { epochs };
    for epoch in 0..passes {
        let pass = forward(&model, &mut rng);
        sampled += model.n_s as u64;
        evals += 1;

        let words: Vec<BitString> = pass
            .rows()
            .map(|bits| BitString::new(bits).expect("binarized rows are 0/1"))
            .collect();
        let mut distances = Vec::with_capacity(words.len());
        for word in &words {
            let d = cache.evaluate(word, inst, codec)?;
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, word.clone()));
            }
            distances.push(d);
        }
        let mut sorted = distances.clone();
        sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        let kept = slice.kept(sorted.len());
        let avg = sorted[..kept].iter().sum::<f64>() / kept as f64;
        trace.push(TracePoint {
            t: epoch,
            sliced_avg: avg,
            best: best.as_ref().unwrap().0,
        });

        if cfg.epochs == 0 {
            break;
        }
        // Mean-cost loss: each row contributes its bit-flip gradient / N_s.
        let mut grad_out = Array2::zeros((model.n_s, q));
        for (i, word) in words.iter().enumerate() {
            let g = cost_gradient(word, inst, codec, &cache)?;
            for (j, v) in g.into_iter().enumerate() {
                grad_out[(i, j)] = v / model.n_s as f64;
            }
        }
        backward_and_step(&mut model, &pass, &grad_out, &cfg.optim, &mut state);
    }

    let (best_distance, best_word) = best.unwrap();
    let best_cycle = codec.decode(&best_word)?;
    let cov = coverage(&cache, inst.n())?;
    Ok(RunRecord {
        model: "ml".into(),
        n: inst.n(),
        q,
        codec: *codec,
        circuit: None,
        optimizer: cfg.optim.name().into(),
        seed,
        trace,
        best_distance,
        best_cycle,
        best_bitstring: best_word.to_string(),
        bitstrings_sampled: sampled,
        cost_evaluations: evals,
        cache: cache.stats(),
        coverage: cov.coverage,
        wall_time_secs: started.elapsed().as_secs_f64(),
        notes: Vec::new(),
    })
}
