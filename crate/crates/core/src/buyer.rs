//! Buyer-side purchase planning.
//!
//! The buyer must add enough shared intensity to lift its approximate
//! coverage to `1 - epsilon` at minimum cost. With fractional purchases this is
//! a fractional knapsack: sellers are items, their intensities are weights and
//! the missing intensity is the capacity to fill.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::stogeo::{qos_intensity_threshold, RadioEnv};

/// Largest instance [`lp_oracle`] will enumerate.
pub const LP_ORACLE_MAX_OFFERS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SellerOffer {
    pub seller_id: usize,
    /// BS per square metre.
    pub intensity: f64,
    /// Price of the seller's whole infrastructure; fractions are prorated.
    pub ask_price: f64,
}

impl SellerOffer {
    pub fn validate(&self) -> Result<()> {
        if !(self.intensity > 0.0 && self.intensity.is_finite()) {
            return Err(invalid(format!(
                "seller {} intensity must be > 0, got {}",
                self.seller_id, self.intensity
            )));
        }
        if !(self.ask_price >= 0.0 && self.ask_price.is_finite()) {
            return Err(invalid(format!(
                "seller {} ask price must be >= 0, got {}",
                self.seller_id, self.ask_price
            )));
        }
        Ok(())
    }

    /// Price per unit of intensity.
    pub fn unit_price(&self) -> f64 {
        self.ask_price / self.intensity
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnapsackInstance {
    pub offers: Vec<SellerOffer>,
    /// Intensity the buyer has to acquire, BS per square metre.
    pub capacity: f64,
}

impl KnapsackInstance {
    pub fn new(offers: Vec<SellerOffer>, capacity: f64) -> Result<Self> {
        let inst = Self { offers, capacity };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.capacity >= 0.0 && self.capacity.is_finite()) {
            return Err(invalid(format!("capacity must be >= 0, got {}", self.capacity)));
        }
        self.offers.iter().try_for_each(SellerOffer::validate)
    }

    pub fn supply(&self) -> f64 {
        self.offers.iter().map(|o| o.intensity).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnapsackSolution {
    /// Purchased fraction per offer, in the instance's offer order.
    pub fractions: Vec<f64>,
    pub total_cost: f64,
    pub filled_weight: f64,
    /// False when even buying everything falls short of the capacity.
    pub feasible: bool,
}

impl KnapsackSolution {
    pub fn total_fraction(&self) -> f64 {
        self.fractions.iter().sum()
    }

    fn buy_everything(inst: &KnapsackInstance) -> Self {
        Self {
            fractions: vec![1.0; inst.offers.len()],
            total_cost: inst.offers.iter().map(|o| o.ask_price).sum(),
            filled_weight: inst.supply(),
            feasible: false,
        }
    }
}

/// Knapsack for a buyer with own intensity `lambda0` transmitting at `power`.
///
/// Capacity is `max(0, (1-eps)/eps (gamma - lambda0 (1 - beta)) - lambda0)`.
pub fn build_instance(
    lambda0: f64,
    env: &RadioEnv,
    power: f64,
    epsilon: f64,
    offers: Vec<SellerOffer>,
) -> Result<KnapsackInstance> {
    let needed = qos_intensity_threshold(lambda0, env, power, epsilon)?;
    KnapsackInstance::new(offers, (needed - lambda0).max(0.0))
}

/// Greedy fractional knapsack: buy sellers in ascending price per unit
/// intensity until the capacity is filled, the last one possibly in part.
///
/// Ties in unit price are broken by ascending seller id.
pub fn greedy_solve(inst: &KnapsackInstance) -> KnapsackSolution {
    if inst.supply() < inst.capacity {
        return KnapsackSolution::buy_everything(inst);
    }

    let mut order: Vec<usize> = (0..inst.offers.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&inst.offers[i], &inst.offers[j]);
        a.unit_price()
            .partial_cmp(&b.unit_price())
            .unwrap_or(Ordering::Equal)
            .then(a.seller_id.cmp(&b.seller_id))
    });

    let mut fractions = vec![0.0; inst.offers.len()];
    let mut weight = 0.0;
    let mut cost = 0.0;
    for i in order {
        let offer = &inst.offers[i];
        let residual = inst.capacity - weight;
        if offer.intensity <= residual {
            fractions[i] = 1.0;
            cost += offer.ask_price;
            weight += offer.intensity;
        } else {
            let x = residual / offer.intensity;
            fractions[i] = x;
            cost += offer.ask_price * x;
            weight += offer.intensity * x;
            break;
        }
    }

    KnapsackSolution {
        fractions,
        total_cost: cost,
        filled_weight: weight,
        feasible: true,
    }
}

/// Exact optimum of the purchase LP by vertex enumeration.
///
/// With a single covering constraint and box bounds, every vertex has at most
/// one fractional variable, so enumerating each set of fully bought sellers
/// together with at most one partially bought one visits them all.
pub fn lp_oracle(inst: &KnapsackInstance) -> Result<KnapsackSolution> {
    inst.validate()?;
    let n = inst.offers.len();
    if n > LP_ORACLE_MAX_OFFERS {
        return Err(Error::InstanceTooLarge {
            max: LP_ORACLE_MAX_OFFERS,
            got: n,
        });
    }
    if inst.supply() < inst.capacity {
        return Ok(KnapsackSolution::buy_everything(inst));
    }

    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let mut consider = |cost: f64, fractions: Vec<f64>, weight: f64| {
        if best.as_ref().is_none_or(|(c, _, _)| cost < *c) {
            best = Some((cost, fractions, weight));
        }
    };

    for mask in 0u32..(1 << n) {
        let full = |k: usize| mask & (1 << k) != 0;
        let weight: f64 = (0..n)
            .filter(|&k| full(k))
            .map(|k| inst.offers[k].intensity)
            .sum();
        let cost: f64 = (0..n)
            .filter(|&k| full(k))
            .map(|k| inst.offers[k].ask_price)
            .sum();
        let base: Vec<f64> = (0..n).map(|k| if full(k) { 1.0 } else { 0.0 }).collect();
        if weight >= inst.capacity {
            consider(cost, base, weight);
            continue;
        }
        let residual = inst.capacity - weight;
        for j in (0..n).filter(|&j| !full(j)) {
            let offer = &inst.offers[j];
            if offer.intensity >= residual {
                let x = residual / offer.intensity;
                let mut fractions = base.clone();
                fractions[j] = x;
                consider(
                    cost + offer.ask_price * x,
                    fractions,
                    weight + offer.intensity * x,
                );
            }
        }
    }

    let (total_cost, fractions, filled_weight) = best.expect("supply covers capacity, so a vertex exists");
    Ok(KnapsackSolution {
        fractions,
        total_cost,
        filled_weight,
        feasible: true,
    })
}
