//! Tuned default hyper-parameters shared by the library, the CLI flags and
//! the experiment plans.

use std::f64::consts::PI;

pub const ITERATIONS: u64 = 250;
pub const VQA_SHOTS: u64 = 1024;
pub const VQA_SLICE: f64 = 0.8;
pub const CIRCUIT: u8 = 2;
pub const GRAY: bool = false;
pub const WARM_START: bool = false;

pub const SPSA_STABILITY: f64 = 25.0;
pub const SPSA_C: f64 = PI / 10.0;
pub const SPSA_ALPHA: f64 = 0.602;
pub const SPSA_GAMMA: f64 = 0.101;
pub const SPSA_ETA: f64 = 0.1;
/// Stands in for the initial-gradient scale when it measures exactly zero.
pub const SPSA_G0_FLOOR: f64 = 1e6;

pub const PARAM_SHIFT_S: f64 = 0.5;
pub const PARAM_SHIFT_ETA: f64 = 0.1;

pub const ML_LAYERS: usize = 4;
pub const ML_INPUT_VECTORS: usize = 64;
pub const ML_SLICE: f64 = 1.0;
pub const ML_SIGMA: f64 = 0.05;
pub const SGD_ETA: f64 = 2e-5;
pub const SGD_MOMENTUM: f64 = 0.8;
pub const SGD_WEIGHT_DECAY: f64 = 0.0006;
pub const ADAM_ETA: f64 = 0.001;
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;
pub const ADAM_WEIGHT_DECAY: f64 = 0.0032;

/// Per-shot time assumed for hardware runtime projections, seconds.
pub const T_SHOT_SECONDS: f64 = 2e-6;
