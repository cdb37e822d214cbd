//! Poisson point process Monte Carlo for the buyer's coverage.
//!
//! A typical buyer UE sits at the origin. Each trial draws the buyer's own
//! stations plus every seller layer independently thinned by the purchased
//! fraction, attaches the UE to the nearest station of the union and computes
//! the SINR with interference from buyer-owned stations only.
//!
//! Trial `i` draws from ChaCha stream `i` of the run seed, so results do not
//! depend on how trials are scheduled across threads.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::stogeo::{IntensitySplit, RadioEnv};

pub const BUYER: usize = 0;

/// Smallest window radius, metres.
pub const DEFAULT_WINDOW_FLOOR: f64 = 500.0;

/// Expected number of stations of the union process inside the window.
const WINDOW_MEAN_POINTS: f64 = 100.0;

/// Cap on how far the buyer-driven window may enlarge the union-driven area.
const MAX_WINDOW_GROWTH: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub owner: usize,
}

impl Point {
    pub fn distance(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Station positions inside a disc centred on the origin.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointField {
    pub points: Vec<Point>,
    pub window_radius: f64,
}

/// Homogeneous PPP of the given intensity on the disc of radius `window_radius`.
pub fn sample_ppp<R: Rng + ?Sized>(
    intensity: f64,
    window_radius: f64,
    owner: usize,
    rng: &mut R,
) -> Result<PointField> {
    if !(intensity >= 0.0 && intensity.is_finite()) {
        return Err(invalid(format!("intensity must be >= 0, got {intensity}")));
    }
    if !(window_radius > 0.0 && window_radius.is_finite()) {
        return Err(invalid(format!("window radius must be > 0, got {window_radius}")));
    }
    let mean = intensity * PI * window_radius * window_radius;
    let count = if mean > 0.0 {
        let poisson = Poisson::new(mean).map_err(|e| invalid(e.to_string()))?;
        poisson.sample(rng) as usize
    } else {
        0
    };
    let points = (0..count)
        .map(|_| {
            let r = window_radius * rng.random::<f64>().sqrt();
            let theta = 2.0 * PI * rng.random::<f64>();
            Point {
                x: r * theta.cos(),
                y: r * theta.sin(),
                owner,
            }
        })
        .collect();
    Ok(PointField {
        points,
        window_radius,
    })
}

/// Per-realisation link quantities at the typical UE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinrSample {
    pub serving_owner: usize,
    pub serving_distance: f64,
    pub direct_gain: f64,
    /// Watts.
    pub interference: f64,
    pub sinr: f64,
}

/// SINR at the origin for a realised field with per-station fading gains.
///
/// The UE attaches to the nearest station regardless of owner; only
/// buyer-owned stations other than the serving one interfere. `None` when the
/// field is empty.
pub fn evaluate_sinr(field: &PointField, gains: &[f64], power: f64, env: &RadioEnv) -> Option<SinrSample> {
    assert_eq!(field.points.len(), gains.len(), "one fading gain per station");
    let (serving, nearest) = field
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, p.distance()))
        .min_by(|a, b| a.1.total_cmp(&b.1))?;

    let interference: f64 = field
        .points
        .iter()
        .zip(gains)
        .enumerate()
        .filter(|(i, (p, _))| *i != serving && p.owner == BUYER)
        .map(|(_, (p, g))| g * p.distance().powf(-env.alpha) * power)
        .sum();

    let direct_gain = gains[serving];
    let signal = direct_gain * nearest.powf(-env.alpha) * power;
    Some(SinrSample {
        serving_owner: field.points[serving].owner,
        serving_distance: nearest,
        direct_gain,
        interference,
        sinr: signal / (interference + env.noise_power),
    })
}

/// A seller's deployment and the fraction of it made available to the buyer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SellerLayer {
    pub intensity: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharingSetup {
    pub lambda0: f64,
    /// Seller `k` (1-based owner id) is `sellers[k - 1]`.
    pub sellers: Vec<SellerLayer>,
}

impl SharingSetup {
    pub fn new(lambda0: f64, sellers: Vec<SellerLayer>) -> Result<Self> {
        let setup = Self { lambda0, sellers };
        setup.validate()?;
        Ok(setup)
    }

    /// A single seller layer fully shared, carrying the split's extra intensity.
    pub fn from_split(split: &IntensitySplit) -> Self {
        let sellers = if split.lambda_extra > 0.0 {
            vec![SellerLayer {
                intensity: split.lambda_extra,
                fraction: 1.0,
            }]
        } else {
            Vec::new()
        };
        Self {
            lambda0: split.lambda0,
            sellers,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda0 >= 0.0 && self.lambda0.is_finite()) {
            return Err(invalid(format!("lambda0 must be >= 0, got {}", self.lambda0)));
        }
        for (k, s) in self.sellers.iter().enumerate() {
            if !(s.intensity >= 0.0 && s.intensity.is_finite()) {
                return Err(invalid(format!("seller {} intensity must be >= 0", k + 1)));
            }
            if !(0.0..=1.0).contains(&s.fraction) {
                return Err(invalid(format!(
                    "seller {} fraction must lie in [0, 1], got {}",
                    k + 1,
                    s.fraction
                )));
            }
        }
        Ok(())
    }

    /// Net intensity `lambda0 + sum_k x_k lambda_k` of the union process.
    pub fn total_intensity(&self) -> f64 {
        self.lambda0 + self.sellers.iter().map(|s| s.fraction * s.intensity).sum::<f64>()
    }

    pub fn split(&self) -> Result<IntensitySplit> {
        IntensitySplit::new(self.lambda0, self.total_intensity() - self.lambda0)
    }

    /// Window radius: at least `floor`, large enough to hold about 100
    /// stations of the union process and, since only buyer stations interfere,
    /// about 100 buyer stations as well, unless that would exceed
    /// `MAX_WINDOW_GROWTH` times the union-sized area.
    pub fn window_radius(&self, floor: f64) -> f64 {
        let union = (WINDOW_MEAN_POINTS / (PI * self.total_intensity())).sqrt();
        let mut radius = floor.max(union);
        if self.lambda0 > 0.0 {
            let buyer = (WINDOW_MEAN_POINTS / (PI * self.lambda0)).sqrt();
            radius = radius.max(buyer.min(MAX_WINDOW_GROWTH.sqrt() * union));
        }
        radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub trials: u64,
    pub seed: u64,
    /// Lower bound on the simulation window radius, metres.
    pub window_floor: f64,
}

impl SimOptions {
    pub fn new(trials: u64, seed: u64) -> Self {
        Self {
            trials,
            seed,
            window_floor: DEFAULT_WINDOW_FLOOR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCoverage {
    pub estimate: f64,
    pub trials: u64,
    pub successes: u64,
    pub ci95_halfwidth: f64,
    pub seed: u64,
}

impl EmpiricalCoverage {
    pub fn from_counts(successes: u64, trials: u64, seed: u64) -> Self {
        let estimate = successes as f64 / trials as f64;
        Self {
            estimate,
            trials,
            successes,
            ci95_halfwidth: 1.96 * (estimate * (1.0 - estimate) / trials as f64).sqrt(),
            seed,
        }
    }
}

/// Random stream of trial `trial` under `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// One realisation: buyer layer first, then each seller layer thinned by its
/// fraction. Every station carries its own unit-mean exponential gain.
pub fn realize<R: Rng + ?Sized>(
    setup: &SharingSetup,
    window_radius: f64,
    rng: &mut R,
) -> Result<(PointField, Vec<f64>)> {
    let mut field = sample_ppp(setup.lambda0, window_radius, BUYER, rng)?;
    let mut gains: Vec<f64> = field.points.iter().map(|_| Exp1.sample(rng)).collect();
    for (k, layer) in setup.sellers.iter().enumerate() {
        let full = sample_ppp(layer.intensity, window_radius, k + 1, rng)?;
        for p in full.points {
            let keep = rng.random::<f64>() < layer.fraction;
            let gain: f64 = Exp1.sample(rng);
            if keep {
                field.points.push(p);
                gains.push(gain);
            }
        }
    }
    Ok((field, gains))
}

/// Empirical coverage `Pr(SINR > T)` over `opts.trials` independent trials.
///
/// Trials whose window holds no station count as outage.
pub fn simulate_coverage(
    setup: &SharingSetup,
    power: f64,
    env: &RadioEnv,
    opts: &SimOptions,
) -> Result<EmpiricalCoverage> {
    env.validate()?;
    setup.validate()?;
    if opts.trials == 0 {
        return Err(invalid("at least one trial is required"));
    }
    if !(power > 0.0 && power.is_finite()) {
        return Err(invalid(format!("transmit power must be > 0, got {power}")));
    }
    if setup.total_intensity() <= 0.0 {
        return Err(Error::EmptyField);
    }
    let radius = setup.window_radius(opts.window_floor);

    let successes = (0..opts.trials)
        .into_par_iter()
        .map(|trial| -> Result<u64> {
            let mut rng = trial_rng(opts.seed, trial);
            let (field, gains) = realize(setup, radius, &mut rng)?;
            Ok(match evaluate_sinr(&field, &gains, power, env) {
                Some(s) if s.sinr > env.threshold => 1,
                _ => 0,
            })
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;

    Ok(EmpiricalCoverage::from_counts(successes, opts.trials, opts.seed))
}
