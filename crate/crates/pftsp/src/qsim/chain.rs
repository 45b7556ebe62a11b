//! Matrix-product execution of staircase circuits.
//!
//! All built-in entangling circuits apply each nearest-neighbour two-qubit
//! gate exactly once per bond, and CX/RXX/RZZ each split into two product
//! terms, so every bond dimension is at most 2 and the representation is
//! exact. Sampling walks the chain left to right against precomputed right
//! environments.

use num_complex::Complex64;
use rand::Rng;

use super::{matrices, CircuitSpec, GateKind};
use crate::error::{Error, Result};

/// Site tensor `t[left][spin][right]` with bond dims `l, r <= 2`.
#[derive(Debug, Clone)]
struct Site {
    l: usize,
    r: usize,
    t: [[[Complex64; 2]; 2]; 2],
}

impl Site {
    fn new() -> Self {
        let mut t = [[[Complex64::ZERO; 2]; 2]; 2];
        t[0][0][0] = Complex64::ONE;
        Self { l: 1, r: 1, t }
    }
}

/// 2x2 environment matrix with its live dimension.
#[derive(Debug, Clone, Copy)]
struct Env {
    dim: usize,
    m: [[Complex64; 2]; 2],
}

#[derive(Debug, Clone)]
pub struct ChainState {
    sites: Vec<Site>,
    /// `envs[i]` summarizes sites `i..q`; `envs[q]` is the scalar 1.
    envs: Vec<Env>,
}

/// Whether the chain path can execute this circuit exactly: every two-qubit
/// gate must be a splittable kind acting on an ascending nearest-neighbour
/// pair, at most once per bond.
pub(super) fn supports(spec: &CircuitSpec) -> bool {
    if spec.q < 1 {
        return false;
    }
    let mut bond_used = vec![false; spec.q.saturating_sub(1)];
    for gate in &spec.gates {
        if let (a, Some(b)) = gate.targets {
            if b != a + 1 || bond_used[a] {
                return false;
            }
            if !matches!(gate.kind, GateKind::CX | GateKind::RXX | GateKind::RZZ) {
                return false;
            }
            bond_used[a] = true;
        }
    }
    true
}

/// Product terms `sum_m P_m (x) Q_m` of a splittable two-qubit gate.
fn schmidt_terms(kind: GateKind, angle: f64) -> [([[Complex64; 2]; 2], [[Complex64; 2]; 2]); 2] {
    let one = Complex64::ONE;
    let zero = Complex64::ZERO;
    let identity = [[one, zero], [zero, one]];
    let pauli_x = [[zero, one], [one, zero]];
    let pauli_z = [[one, zero], [zero, -one]];
    let half = angle / 2.0;
    let scale = |m: [[Complex64; 2]; 2], f: Complex64| {
        [[m[0][0] * f, m[0][1] * f], [m[1][0] * f, m[1][1] * f]]
    };
    match kind {
        GateKind::CX => [
            ([[one, zero], [zero, zero]], identity),
            ([[zero, zero], [zero, one]], pauli_x),
        ],
        GateKind::RXX => {
            let c = Complex64::new(half.cos(), 0.0);
            let s = Complex64::new(0.0, -half.sin());
            [(scale(identity, c), identity), (scale(pauli_x, s), pauli_x)]
        }
        GateKind::RZZ => {
            let c = Complex64::new(half.cos(), 0.0);
            let s = Complex64::new(0.0, -half.sin());
            [(scale(identity, c), identity), (scale(pauli_z, s), pauli_z)]
        }
        other => panic!("{other:?} has no two-term product split"),
    }
}

impl ChainState {
    pub fn build(spec: &CircuitSpec, theta: &[f64]) -> Result<Self> {
        if !supports(spec) {
            return Err(Error::Config(format!(
                "circuit {} is not a single-staircase chain circuit",
                spec.id
            )));
        }
        let mut sites: Vec<Site> = (0..spec.q).map(|_| Site::new()).collect();
        for gate in &spec.gates {
            let angle = gate.angle(theta);
            match gate.targets {
                (a, None) => {
                    let m = matrices::one_qubit(gate.kind, angle);
                    let site = &mut sites[a];
                    for alpha in 0..site.l {
                        for beta in 0..site.r {
                            let lo = site.t[alpha][0][beta];
                            let hi = site.t[alpha][1][beta];
                            site.t[alpha][0][beta] = m[0][0] * lo + m[0][1] * hi;
                            site.t[alpha][1][beta] = m[1][0] * lo + m[1][1] * hi;
                        }
                    }
                }
                (a, Some(b)) => {
                    debug_assert_eq!(b, a + 1);
                    debug_assert!(sites[a].r == 1 && sites[b].l == 1);
                    let terms = schmidt_terms(gate.kind, angle);
                    let left = sites[a].clone();
                    let right = sites[b].clone();
                    let mut new_left = Site {
                        l: left.l,
                        r: 2,
                        t: [[[Complex64::ZERO; 2]; 2]; 2],
                    };
                    let mut new_right = Site {
                        l: 2,
                        r: right.r,
                        t: [[[Complex64::ZERO; 2]; 2]; 2],
                    };
                    for (m_idx, (p, q_mat)) in terms.iter().enumerate() {
                        for alpha in 0..left.l {
                            for s in 0..2 {
                                let mut acc = Complex64::ZERO;
                                for (sp, row) in p[s].iter().enumerate() {
                                    acc += row * left.t[alpha][sp][0];
                                }
                                new_left.t[alpha][s][m_idx] = acc;
                            }
                        }
                        for beta in 0..right.r {
                            for s in 0..2 {
                                let mut acc = Complex64::ZERO;
                                for (sp, row) in q_mat[s].iter().enumerate() {
                                    acc += row * right.t[0][sp][beta];
                                }
                                new_right.t[m_idx][s][beta] = acc;
                            }
                        }
                    }
                    sites[a] = new_left;
                    sites[b] = new_right;
                }
            }
        }
        let envs = right_environments(&sites);
        Ok(Self { sites, envs })
    }

    pub fn q(&self) -> usize {
        self.sites.len()
    }

    /// Exact amplitudes in index order (small widths only).
    pub fn amplitudes(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(1usize << self.q());
        let v = [Complex64::ONE, Complex64::ZERO];
        self.walk(0, v, 1, &mut out);
        out
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes().iter().map(|a| a.norm_sqr()).collect()
    }

    fn walk(&self, i: usize, v: [Complex64; 2], dim: usize, out: &mut Vec<Complex64>) {
        if i == self.sites.len() {
            out.push(v[0]);
            return;
        }
        for s in 0..2 {
            let (w, wdim) = contract(&v, dim, &self.sites[i], s);
            self.walk(i + 1, w, wdim, out);
        }
    }

    /// One measurement shot by left-to-right conditional sampling.
    pub fn sample_shot(&self, rng: &mut impl Rng) -> Vec<u8> {
        let mut bits = Vec::with_capacity(self.q());
        let mut v = [Complex64::ONE, Complex64::ZERO];
        let mut dim = 1usize;
        for (i, site) in self.sites.iter().enumerate() {
            let env = &self.envs[i + 1];
            let (w0, wdim) = contract(&v, dim, site, 0);
            let (w1, _) = contract(&v, dim, site, 1);
            let p0 = weight(&w0, wdim, env);
            let p1 = weight(&w1, wdim, env);
            let total = p0 + p1;
            let u: f64 = rng.random::<f64>() * total;
            let (bit, w, p) = if u < p0 { (0u8, w0, p0) } else { (1u8, w1, p1) };
            bits.push(bit);
            let norm = p.sqrt().max(f64::MIN_POSITIVE);
            v = [w[0] / norm, w[1] / norm];
            dim = wdim;
        }
        bits
    }
}

fn right_environments(sites: &[Site]) -> Vec<Env> {
    let q = sites.len();
    let mut envs = vec![
        Env {
            dim: 1,
            m: [[Complex64::ZERO; 2]; 2],
        };
        q + 1
    ];
    envs[q].m[0][0] = Complex64::ONE;
    for i in (0..q).rev() {
        let site = &sites[i];
        let next = envs[i + 1];
        let mut m = [[Complex64::ZERO; 2]; 2];
        for alpha in 0..site.l {
            for alpha2 in 0..site.l {
                let mut acc = Complex64::ZERO;
                for s in 0..2 {
                    for beta in 0..site.r {
                        for beta2 in 0..site.r {
                            acc += site.t[alpha][s][beta]
                                * site.t[alpha2][s][beta2].conj()
                                * next.m[beta][beta2];
                        }
                    }
                }
                m[alpha][alpha2] = acc;
            }
        }
        envs[i] = Env { dim: site.l, m };
    }
    envs
}

/// `w[beta] = sum_alpha v[alpha] * t[alpha][s][beta]`.
fn contract(v: &[Complex64; 2], dim: usize, site: &Site, s: usize) -> ([Complex64; 2], usize) {
    let mut w = [Complex64::ZERO; 2];
    for (beta, slot) in w.iter_mut().enumerate().take(site.r) {
        let mut acc = Complex64::ZERO;
        for (alpha, &va) in v.iter().enumerate().take(dim.min(site.l)) {
            acc += va * site.t[alpha][s][beta];
        }
        *slot = acc;
    }
    (w, site.r)
}

/// `<w| env |w>`, clamped against tiny negative rounding.
fn weight(w: &[Complex64; 2], dim: usize, env: &Env) -> f64 {
    let mut acc = Complex64::ZERO;
    for beta in 0..dim.min(env.dim) {
        for beta2 in 0..dim.min(env.dim) {
            acc += w[beta] * w[beta2].conj() * env.m[beta][beta2];
        }
    }
    acc.re.max(0.0)
}
