//! Dense statevector execution. Qubit `i` occupies index bit `q - 1 - i`, so
//! the binary rendering of a basis index reads as the bit string.

use num_complex::Complex64;

use super::{matrices, CircuitSpec, GateKind};
use crate::error::Result;

pub(super) fn statevector(spec: &CircuitSpec, theta: &[f64]) -> Result<Vec<Complex64>> {
    let dim = 1usize << spec.q;
    let mut state = vec![Complex64::ZERO; dim];
    state[0] = Complex64::ONE;
    for gate in &spec.gates {
        let angle = gate.angle(theta);
        match gate.targets {
            (a, None) => apply_one(&mut state, spec.q, a, matrices::one_qubit(gate.kind, angle)),
            (a, Some(b)) => apply_two(&mut state, spec.q, a, b, gate.kind, angle),
        }
    }
    Ok(state)
}

fn apply_one(state: &mut [Complex64], q: usize, target: usize, m: [[Complex64; 2]; 2]) {
    let stride = 1usize << (q - 1 - target);
    let mut base = 0;
    while base < state.len() {
        for off in base..base + stride {
            let lo = state[off];
            let hi = state[off + stride];
            state[off] = m[0][0] * lo + m[0][1] * hi;
            state[off + stride] = m[1][0] * lo + m[1][1] * hi;
        }
        base += stride * 2;
    }
}

fn apply_two(state: &mut [Complex64], q: usize, a: usize, b: usize, kind: GateKind, angle: f64) {
    let m = matrices::two_qubit(kind, angle);
    let bit_a = 1usize << (q - 1 - a);
    let bit_b = 1usize << (q - 1 - b);
    for z in 0..state.len() {
        // Visit each 4-group once, from its |a=0,b=0> member.
        if z & (bit_a | bit_b) != 0 {
            continue;
        }
        let idx = [z, z | bit_b, z | bit_a, z | bit_a | bit_b];
        let amps = idx.map(|i| state[i]);
        for (row, &i) in idx.iter().enumerate() {
            state[i] = m[row][0] * amps[0]
                + m[row][1] * amps[1]
                + m[row][2] * amps[2]
                + m[row][3] * amps[3];
        }
    }
}
