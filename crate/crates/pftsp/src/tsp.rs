//! Problem instances, tours, exact and greedy references, and quality metrics.

use std::fmt;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest location count accepted by [`brute_force_optimum`].
pub const BRUTE_FORCE_LIMIT: usize = 13;

/// A symmetric Euclidean TSP instance built from 2-D coordinates.
#[derive(Debug, Clone)]
pub struct TspInstance {
    coords: Vec<(f64, f64)>,
    dist: Vec<Vec<f64>>,
}

impl TspInstance {
    /// Build an instance from coordinates, computing pairwise Euclidean distances.
    pub fn from_coords(coords: Vec<(f64, f64)>) -> Result<Self> {
        let n = coords.len();
        if n < 3 {
            return Err(Error::InstanceTooSmall { n });
        }
        let mut dist = vec![vec![0.0; n]; n];
        for u in 0..n {
            for v in (u + 1)..n {
                let dx = coords[u].0 - coords[v].0;
                let dy = coords[u].1 - coords[v].1;
                let d = (dx * dx + dy * dy).sqrt();
                dist[u][v] = d;
                dist[v][u] = d;
            }
        }
        Ok(Self { coords, dist })
    }

    /// Draw `n` locations uniformly from the `[0, 100] x [0, 100]` square.
    pub fn random(n: usize, seed: u64) -> Result<Self> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let coords = (0..n)
            .map(|_| (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)))
            .collect();
        Self::from_coords(coords)
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[(f64, f64)] {
        &self.coords
    }

    /// Distance between locations `u` and `v`.
    pub fn dist(&self, u: usize, v: usize) -> f64 {
        self.dist[u][v]
    }

    pub fn dist_matrix(&self) -> &[Vec<f64>] {
        &self.dist
    }
}

/// A candidate tour: a permutation of `{0, .., n-1}` that starts at location 0.
/// Closure back to the start is implicit in the cost.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cycle {
    order: Vec<usize>,
}

impl Cycle {
    /// Validate and wrap a visiting order.
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        if n == 0 {
            return Err(Error::InvalidCycle("empty order".into()));
        }
        if order[0] != 0 {
            return Err(Error::InvalidCycle(format!(
                "cycle must start at location 0, starts at {}",
                order[0]
            )));
        }
        let mut seen = vec![false; n];
        for &loc in &order {
            if loc >= n {
                return Err(Error::InvalidCycle(format!(
                    "location {loc} out of range for {n} locations"
                )));
            }
            if seen[loc] {
                return Err(Error::InvalidCycle(format!("location {loc} repeated")));
            }
            seen[loc] = true;
        }
        Ok(Self { order })
    }

    /// Wrap an order known to be a valid fixed-start permutation.
    pub(crate) fn from_order_unchecked(order: Vec<usize>) -> Self {
        debug_assert!(Cycle::new(order.clone()).is_ok());
        Self { order }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// The same tour walked backwards, re-anchored at location 0.
    pub fn reversed(&self) -> Self {
        let mut order = vec![0];
        order.extend(self.order[1..].iter().rev().copied());
        Self { order }
    }
}

impl fmt::Display for Cycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.order.iter().map(|l| l.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Closed-tour length including the return edge to the start.
pub fn tour_length(inst: &TspInstance, cycle: &Cycle) -> Result<f64> {
    let n = inst.n();
    if cycle.len() != n {
        return Err(Error::InvalidCycle(format!(
            "cycle visits {} locations, instance has {n}",
            cycle.len()
        )));
    }
    for &loc in cycle.order() {
        if loc >= n {
            return Err(Error::InvalidCycle(format!("location {loc} out of range")));
        }
    }
    Ok(tour_length_unchecked(inst, cycle.order()))
}

pub(crate) fn tour_length_unchecked(inst: &TspInstance, order: &[usize]) -> f64 {
    let n = order.len();
    let mut total = 0.0;
    for i in 0..n - 1 {
        total += inst.dist[order[i]][order[i + 1]];
    }
    total + inst.dist[order[n - 1]][order[0]]
}

/// Load an instance from a coordinate CSV: one `x,y` pair per line, UTF-8.
/// An optional header line starting with a non-numeric token is skipped.
pub fn load_instance(path: impl AsRef<Path>) -> Result<TspInstance> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_instance(&text, &path.display().to_string())
}

pub fn parse_instance(text: &str, path: &str) -> Result<TspInstance> {
    let mut coords = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let x_field = fields.next().unwrap_or("");
        // Header lines start with a non-numeric token.
        if coords.is_empty() && x_field.parse::<f64>().is_err() {
            continue;
        }
        let parse = |field: Option<&str>, name: &str| -> Result<f64> {
            field
                .ok_or(())
                .and_then(|f| f.parse::<f64>().map_err(|_| ()))
                .map_err(|_| Error::Parse {
                    path: path.to_string(),
                    line: idx + 1,
                    msg: format!("expected numeric {name} in \"x,y\" pair, got {raw:?}"),
                })
        };
        let x = parse(Some(x_field), "x")?;
        let y = parse(fields.next(), "y")?;
        if fields.next().is_some() {
            return Err(Error::Parse {
                path: path.to_string(),
                line: idx + 1,
                msg: format!("trailing fields after \"x,y\" pair in {raw:?}"),
            });
        }
        coords.push((x, y));
    }
    TspInstance::from_coords(coords)
}

/// Load an optional `name,optimum` sidecar with reference optima.
pub fn load_reference_optima(path: impl AsRef<Path>) -> Result<Vec<(String, f64)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let (name, value) = line.split_once(',').ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            msg: format!("expected \"name,optimum\", got {raw:?}"),
        })?;
        match value.trim().parse::<f64>() {
            Ok(v) => out.push((name.trim().to_string(), v)),
            // Header line.
            Err(_) if idx == 0 => continue,
            Err(_) => {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: idx + 1,
                    msg: format!("optimum is not numeric in {raw:?}"),
                })
            }
        }
    }
    Ok(out)
}

/// Exact optimum by enumerating permutations of `{1, .., n-1}` after the fixed
/// start, skipping mirror-image duplicates (`order[1] < order[n-1]`).
pub fn brute_force_optimum(inst: &TspInstance) -> Result<(Cycle, f64)> {
    let n = inst.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::BruteForceLimit {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    // Shared upper bound for pruning; prunes strictly-worse partial tours only,
    // so the returned optimum is schedule-independent.
    let bound = AtomicU64::new(f64::INFINITY.to_bits());
    let best = (1..n)
        .into_par_iter()
        .map(|first| {
            let mut order = Vec::with_capacity(n);
            order.push(0);
            order.push(first);
            let mut free: Vec<usize> = (1..n).filter(|&l| l != first).collect();
            let mut local: Option<(f64, Vec<usize>)> = None;
            search(inst, &mut order, &mut free, inst.dist(0, first), &bound, &mut local);
            local
        })
        .reduce(
            || None,
            |a, b| match (a, b) {
                (None, x) | (x, None) => x,
                (Some(x), Some(y)) => Some(min_candidate(x, y)),
            },
        );
    let (len, order) = best.expect("n >= 3 always yields at least one cycle");
    Ok((Cycle::from_order_unchecked(order), len))
}

fn min_candidate(a: (f64, Vec<usize>), b: (f64, Vec<usize>)) -> (f64, Vec<usize>) {
    if a.0 < b.0 || (a.0 == b.0 && a.1 <= b.1) {
        a
    } else {
        b
    }
}

fn search(
    inst: &TspInstance,
    order: &mut Vec<usize>,
    free: &mut Vec<usize>,
    partial: f64,
    bound: &AtomicU64,
    local: &mut Option<(f64, Vec<usize>)>,
) {
    if partial > f64::from_bits(bound.load(Ordering::Relaxed)) {
        return;
    }
    if free.is_empty() {
        // Mirror-image duplicate: keep only order[1] < order[n-1].
        if order[1] > order[order.len() - 1] {
            return;
        }
        let total = partial + inst.dist(order[order.len() - 1], 0);
        let candidate = (total, order.clone());
        let merged = match local.take() {
            Some(prev) => min_candidate(prev, candidate),
            None => candidate,
        };
        bound.fetch_min(merged.0.to_bits(), Ordering::Relaxed);
        *local = Some(merged);
        return;
    }
    let last = *order.last().unwrap();
    for i in 0..free.len() {
        let next = free.remove(i);
        order.push(next);
        search(inst, order, free, partial + inst.dist(last, next), bound, local);
        order.pop();
        free.insert(i, next);
    }
}

/// Nearest-neighbour construction: start at 0, repeatedly append the nearest
/// unvisited location, ties broken by lowest index.
pub fn greedy_nearest_neighbour(inst: &TspInstance) -> (Cycle, f64) {
    let n = inst.n();
    let mut order = Vec::with_capacity(n);
    order.push(0);
    let mut visited = vec![false; n];
    visited[0] = true;
    for _ in 1..n {
        let here = *order.last().unwrap();
        let mut pick = None;
        for cand in 0..n {
            if visited[cand] {
                continue;
            }
            let d = inst.dist(here, cand);
            match pick {
                None => pick = Some((cand, d)),
                Some((_, best_d)) if d < best_d => pick = Some((cand, d)),
                _ => {}
            }
        }
        let (next, _) = pick.unwrap();
        visited[next] = true;
        order.push(next);
    }
    let len = tour_length_unchecked(inst, &order);
    (Cycle::from_order_unchecked(order), len)
}

/// Solution quality against a reference optimum, with the sample error of the
/// mean over repeated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub d_sim: f64,
    pub d_best: f64,
    /// `d_best / d_sim`; 1.0 is optimal.
    pub q_sol: f64,
    /// `1 - q_sol`.
    pub e_sol: f64,
    /// Absent for single runs.
    pub sem: Option<f64>,
}

/// Compute the quality report. `per_run_values` are the per-run observations
/// (one entry per run) used for the SEM estimate.
pub fn quality(d_sim: f64, d_best: f64, per_run_values: &[f64]) -> Result<QualityReport> {
    if !(d_sim > 0.0) || !(d_best > 0.0) {
        return Err(Error::Domain(format!(
            "distances must be positive, got d_sim={d_sim}, d_best={d_best}"
        )));
    }
    let q_sol = d_best / d_sim;
    let r = per_run_values.len();
    let sem = if r >= 2 {
        let mean = per_run_values.iter().sum::<f64>() / r as f64;
        let var = per_run_values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / r as f64;
        Some(var.sqrt() / ((r - 1) as f64).sqrt())
    } else {
        None
    };
    Ok(QualityReport {
        d_sim,
        d_best,
        q_sol,
        e_sol: 1.0 - q_sol,
        sem,
    })
}
