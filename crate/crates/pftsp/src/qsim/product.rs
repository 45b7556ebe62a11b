//! Product-state path for the entanglement-free circuits: one two-amplitude
//! state per qubit, any width.

use num_complex::Complex64;
use rand::Rng;

use super::{matrices, CircuitSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ProductState {
    qubits: Vec<[Complex64; 2]>,
}

impl ProductState {
    pub fn build(spec: &CircuitSpec, theta: &[f64]) -> Result<Self> {
        let mut qubits = vec![[Complex64::ONE, Complex64::ZERO]; spec.q];
        for gate in &spec.gates {
            let (target, second) = gate.targets;
            if second.is_some() {
                return Err(Error::Config(format!(
                    "circuit {} entangles qubits; the product path only serves \
                     entanglement-free circuits",
                    spec.id
                )));
            }
            let m = matrices::one_qubit(gate.kind, gate.angle(theta));
            let [lo, hi] = qubits[target];
            qubits[target] = [m[0][0] * lo + m[0][1] * hi, m[1][0] * lo + m[1][1] * hi];
        }
        Ok(Self { qubits })
    }

    pub fn q(&self) -> usize {
        self.qubits.len()
    }

    /// Probability that qubit `i` measures 1.
    pub fn p_one(&self, i: usize) -> f64 {
        self.qubits[i][1].norm_sqr()
    }

    /// Full probability vector (small widths only).
    pub fn probabilities_dense(&self) -> Vec<f64> {
        let mut probs = vec![1.0];
        for qubit in &self.qubits {
            let p0 = qubit[0].norm_sqr();
            let p1 = qubit[1].norm_sqr();
            let mut next = Vec::with_capacity(probs.len() * 2);
            for p in probs {
                next.push(p * p0);
                next.push(p * p1);
            }
            probs = next;
        }
        probs
    }

    /// Full amplitude vector (small widths only).
    pub fn amplitudes_dense(&self) -> Vec<Complex64> {
        let mut amps = vec![Complex64::ONE];
        for qubit in &self.qubits {
            let mut next = Vec::with_capacity(amps.len() * 2);
            for a in amps {
                next.push(a * qubit[0]);
                next.push(a * qubit[1]);
            }
            amps = next;
        }
        amps
    }

    /// One measurement shot, qubit by qubit.
    pub fn sample_shot(&self, rng: &mut impl Rng) -> Vec<u8> {
        self.qubits
            .iter()
            .map(|qubit| {
                let p1 = qubit[1].norm_sqr();
                u8::from(rng.random::<f64>() < p1)
            })
            .collect()
    }
}
