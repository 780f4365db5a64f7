//! Probit perception model: seeded sampling of perceived link times and
//! the closed-form two-route choice probability.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

/// Generator identifier recorded in run manifests.
pub const RNG_ALGORITHM: &str =
    "chacha8 (rand_chacha 0.9, seed_from_u64); normals by inverse CDF, one uniform per variate";

/// Perceived times are floored at this fraction of the free-flow time.
pub const TRUNCATION_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProbitError {
    #[error("gamma must be positive and finite, got {0}")]
    InvalidGamma(f64),
    #[error("cost vectors misaligned: {mean} mean costs, {free_flow} free-flow costs")]
    Misaligned { mean: usize, free_flow: usize },
}

/// Variance scale of the perception error: `Var[T_a] = gamma * t_a^0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Gamma(f64);

impl Gamma {
    pub fn new(gamma: f64) -> Result<Self, ProbitError> {
        if gamma > 0.0 && gamma.is_finite() {
            Ok(Gamma(gamma))
        } else {
            Err(ProbitError::InvalidGamma(gamma))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Deterministic random stream. Equal seeds give equal sequences.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream for worker `index`, derived from this stream's seed.
    pub fn derive(&self, index: u64) -> RngStream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index.wrapping_add(1));
        RngStream {
            seed: self.seed,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform on the open interval (0, 1), 53 bits.
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        standard_normal().inverse_cdf(self.uniform())
    }
}

fn standard_normal() -> Normal {
    Normal::standard()
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    standard_normal().cdf(x)
}

/// One realization of perceived link times, aligned with the network's links.
#[derive(Debug, Clone, PartialEq)]
pub struct PerceivedCostDraw {
    pub costs: Vec<f64>,
    /// Entries raised to the truncation floor.
    pub truncated: usize,
}

/// Draws `T_a ~ N(mean_a, gamma * free_flow_a)` for every link, in link
/// order, flooring each draw at `0.01 * free_flow_a`.
pub fn sample_perceived_costs(
    mean_costs: &[f64],
    free_flow_costs: &[f64],
    gamma: Gamma,
    rng: &mut RngStream,
) -> Result<PerceivedCostDraw, ProbitError> {
    if mean_costs.len() != free_flow_costs.len() {
        return Err(ProbitError::Misaligned {
            mean: mean_costs.len(),
            free_flow: free_flow_costs.len(),
        });
    }
    let mut costs = vec![0.0; mean_costs.len()];
    let truncated = sample_into(mean_costs, free_flow_costs, gamma, rng, &mut costs);
    Ok(PerceivedCostDraw { costs, truncated })
}

/// Allocation-free form of [`sample_perceived_costs`] for the solver loops.
/// Slices must have equal length. Returns the truncation count.
pub(crate) fn sample_into(
    mean_costs: &[f64],
    free_flow_costs: &[f64],
    gamma: Gamma,
    rng: &mut RngStream,
    out: &mut [f64],
) -> usize {
    debug_assert_eq!(mean_costs.len(), free_flow_costs.len());
    debug_assert_eq!(mean_costs.len(), out.len());
    let normal = standard_normal();
    let mut truncated = 0;
    for ((slot, &mean), &t0) in out.iter_mut().zip(mean_costs).zip(free_flow_costs) {
        let z = normal.inverse_cdf(rng.uniform());
        let draw = mean + (gamma.get() * t0).sqrt() * z;
        let floor = TRUNCATION_FRACTION * t0;
        if draw < floor {
            truncated += 1;
            *slot = floor;
        } else {
            *slot = draw;
        }
    }
    truncated
}

/// Probability that route 1 is perceived cheaper than route 2 when the two
/// routes share no link: `Phi((t2 - t1) / sqrt(gamma * (t01 + t02)))`.
pub fn two_link_choice_probability(t1: f64, t2: f64, t01: f64, t02: f64, gamma: Gamma) -> f64 {
    let sd = (gamma.get() * (t01 + t02)).sqrt();
    standard_normal_cdf((t2 - t1) / sd)
}
