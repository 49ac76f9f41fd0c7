//! Spreading of a single depolarized qubit through a brick-wall random
//! circuit, reduced to its classical Markov chain on error bit strings.
//!
//! A '1' marks a depolarized qubit. Each layer applies one rule per gate
//! pair: (0,0) and (1,1) are fixed, a one-hot pair becomes (0,0) with
//! probability 1/5 and (1,1) otherwise. The all-zeros and all-ones strings
//! are absorbing. Trajectories use independent ChaCha streams split from a
//! master seed, so results are reproducible and order-independent.

use crate::error::{CoreError, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Probability that a one-hot gate pair collapses to (0,0).
pub const HEAL_PROBABILITY: f64 = 0.2;

/// Which sites the first layer pairs: Even pairs (0,1),(2,3),…, Odd pairs
/// (1,2),(3,4),…. Interior sites sit in exactly one gate per layer either
/// way, so only boundary sites and the microscopic trajectory depend on
/// this; the choice is surfaced because small-t values shift with it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum FirstLayer {
    Even,
    Odd,
}

impl FirstLayer {
    fn offset(self) -> usize {
        match self {
            FirstLayer::Even => 0,
            FirstLayer::Odd => 1,
        }
    }
}

/// Error string state: bit i is set iff qubit i is depolarized.
#[derive(Debug, Clone)]
pub struct NoiseString {
    bits: Vec<bool>,
    first: FirstLayer,
    layers_done: usize,
}

impl NoiseString {
    /// Single seed error at `site`.
    pub fn one_hot(n: usize, site: usize, first: FirstLayer) -> Result<Self> {
        if n < 2 {
            return Err(CoreError::Invalid(format!("chain of {n} sites is too short")));
        }
        if site >= n {
            return Err(CoreError::Invalid(format!("seed site {site} outside 0..{n}")));
        }
        let mut bits = vec![false; n];
        bits[site] = true;
        Ok(NoiseString { bits, first, layers_done: 0 })
    }

    pub fn n(&self) -> usize {
        self.bits.len()
    }

    pub fn layers_done(&self) -> usize {
        self.layers_done
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Number of depolarized qubits (the chain state X).
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// True once the string can no longer change.
    pub fn absorbed(&self) -> bool {
        let q = self.count();
        q == 0 || q == self.n()
    }

    /// Apply the next brick-wall layer. The RNG is consulted only for
    /// one-hot pairs, so untouched strings consume no randomness.
    pub fn step(&mut self, rng: &mut impl Rng) {
        let n = self.n();
        let mut a = (self.first.offset() + self.layers_done) % 2;
        while a + 1 < n {
            let (la, lb) = (self.bits[a], self.bits[a + 1]);
            if la != lb {
                let both = rng.gen::<f64>() >= HEAL_PROBABILITY;
                self.bits[a] = both;
                self.bits[a + 1] = both;
            }
            a += 2;
        }
        self.layers_done += 1;
    }
}

/// Trajectory of a one-hot start through `t_layers` layers; entry k is the
/// string after k layers.
pub fn run_layers(
    n: usize,
    t_layers: usize,
    start_site: usize,
    first: FirstLayer,
    rng: &mut impl Rng,
) -> Result<Vec<NoiseString>> {
    let mut s = NoiseString::one_hot(n, start_site, first)?;
    let mut out = Vec::with_capacity(t_layers + 1);
    out.push(s.clone());
    for _ in 0..t_layers {
        s.step(rng);
        out.push(s.clone());
    }
    Ok(out)
}

fn stream_rng(seed: u64, traj: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(traj);
    rng
}

/// Per-layer Monte Carlo aggregates over one-hot starts.
#[derive(Debug, Clone)]
pub struct SpreadStudy {
    /// ⟨X⟩ after each layer, index = layer, length t_layers+1.
    pub mean: Vec<f64>,
    /// Standard error of the mean per layer.
    pub sem: Vec<f64>,
    /// Fraction of trajectories with X = 0 per layer.
    pub dead: Vec<f64>,
    /// Fraction of trajectories with X = n per layer.
    pub full: Vec<f64>,
    /// Fraction neither dead nor full after the last layer.
    pub unresolved: f64,
    pub samples: usize,
}

/// Monte Carlo over `samples` one-hot trajectories, recording the
/// chain-level aggregates after every layer. Absorbed strings stop
/// consuming layers. Trajectory k runs on stream k of the master seed.
pub fn spread_study(
    n: usize,
    t_layers: usize,
    start_site: usize,
    first: FirstLayer,
    samples: usize,
    seed: u64,
) -> Result<SpreadStudy> {
    if samples == 0 {
        return Err(CoreError::Invalid("need at least one trajectory".into()));
    }
    NoiseString::one_hot(n, start_site, first)?;
    let width = t_layers + 1;
    let zero = || (vec![0.0f64; width], vec![0.0f64; width], vec![0u64; width], vec![0u64; width]);
    let (sum, sumsq, dead, full) = (0..samples as u64)
        .into_par_iter()
        .fold(zero, |(mut sum, mut sumsq, mut dead, mut full), traj| {
            let mut rng = stream_rng(seed, traj);
            let mut s = NoiseString::one_hot(n, start_site, first).expect("checked above");
            for t in 0..width {
                if t > 0 && !s.absorbed() {
                    s.step(&mut rng);
                } else if t > 0 {
                    s.layers_done += 1;
                }
                let q = s.count();
                sum[t] += q as f64;
                sumsq[t] += (q * q) as f64;
                if q == 0 {
                    dead[t] += 1;
                }
                if q == n {
                    full[t] += 1;
                }
            }
            (sum, sumsq, dead, full)
        })
        .reduce(zero, |(mut s1, mut q1, mut d1, mut f1), (s2, q2, d2, f2)| {
            for i in 0..width {
                s1[i] += s2[i];
                q1[i] += q2[i];
                d1[i] += d2[i];
                f1[i] += f2[i];
            }
            (s1, q1, d1, f1)
        });
    let m = samples as f64;
    let mut mean = vec![0.0; width];
    let mut sem = vec![0.0; width];
    for t in 0..width {
        mean[t] = sum[t] / m;
        let var = ((sumsq[t] - sum[t] * sum[t] / m) / (m - 1.0).max(1.0)).max(0.0);
        sem[t] = (var / m).sqrt();
    }
    let dead: Vec<f64> = dead.iter().map(|&c| c as f64 / m).collect();
    let full: Vec<f64> = full.iter().map(|&c| c as f64 / m).collect();
    let unresolved = 1.0 - dead[width - 1] - full[width - 1];
    Ok(SpreadStudy { mean, sem, dead, full, unresolved, samples })
}

/// ⟨q(t)⟩ with standard error for every t up to `t_layers`.
pub fn mean_damage(
    n: usize,
    t_layers: usize,
    start_site: usize,
    first: FirstLayer,
    samples: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let study = spread_study(n, t_layers, start_site, first, samples, seed)?;
    Ok((study.mean, study.sem))
}

/// Wilson score interval for `hits` successes out of `m` at z sigmas.
pub fn wilson_interval(hits: usize, m: usize, z: f64) -> (f64, f64) {
    if m == 0 {
        return (0.0, 1.0);
    }
    let (h, m) = (hits as f64, m as f64);
    let p = h / m;
    let z2 = z * z;
    let denom = 1.0 + z2 / m;
    let mid = (p + z2 / (2.0 * m)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / m + z2 / (4.0 * m * m)).sqrt();
    ((mid - half).max(0.0), (mid + half).min(1.0))
}

/// Empirical Pr(X_t = 0 | X_0 = 1) per layer with a z=3 Wilson band.
/// Death is absorbing, so the curve is nondecreasing in t.
pub fn return_probability(
    n: usize,
    t_layers: usize,
    start_site: usize,
    first: FirstLayer,
    samples: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<(f64, f64)>)> {
    let study = spread_study(n, t_layers, start_site, first, samples, seed)?;
    let bands = study
        .dead
        .iter()
        .map(|&p| wilson_interval((p * samples as f64).round() as usize, samples, 3.0))
        .collect();
    Ok((study.dead, bands))
}

/// Probability vector over X ∈ {0, …, n}.
#[derive(Debug, Clone)]
pub struct ChainDistribution {
    probs: Vec<f64>,
}

impl ChainDistribution {
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(CoreError::Invalid("empty histogram".into()));
        }
        let probs = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Ok(ChainDistribution { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Largest violation of (nonnegative, sums to one).
    pub fn defect(&self) -> f64 {
        let neg = self.probs.iter().cloned().fold(0.0f64, |a, p| a.max(-p));
        let sum: f64 = self.probs.iter().sum();
        neg.max((sum - 1.0).abs())
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(q, p)| q as f64 * p).sum()
    }
}

/// Empirical distribution of X after exactly `t_layers` layers.
pub fn chain_distribution(
    n: usize,
    t_layers: usize,
    start_site: usize,
    first: FirstLayer,
    samples: usize,
    seed: u64,
) -> Result<ChainDistribution> {
    if samples == 0 {
        return Err(CoreError::Invalid("need at least one trajectory".into()));
    }
    NoiseString::one_hot(n, start_site, first)?;
    let counts = (0..samples as u64)
        .into_par_iter()
        .fold(
            || vec![0u64; n + 1],
            |mut counts, traj| {
                let mut rng = stream_rng(seed, traj);
                let mut s = NoiseString::one_hot(n, start_site, first).expect("checked above");
                for _ in 0..t_layers {
                    if s.absorbed() {
                        break;
                    }
                    s.step(&mut rng);
                }
                counts[s.count()] += 1;
                counts
            },
        )
        .reduce(
            || vec![0u64; n + 1],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
                a
            },
        );
    ChainDistribution::from_counts(&counts)
}

/// Excess energy if the error spreads through the whole chain: the fully
/// depolarized state has zero energy for a traceless Hamiltonian, so
/// δ_E = Pr(spread) · (0 − n · groundEnergyPerSite).
pub fn extensive_delta_e(n: usize, ground_energy_per_site: f64, p_spread: f64) -> f64 {
    p_spread * (0.0 - n as f64 * ground_energy_per_site)
}
