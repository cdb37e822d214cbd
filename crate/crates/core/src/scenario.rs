//! Scenario files: user-unit JSON in, validated SI parameters out.
//!
//! Powers are given in dBm, thresholds in dB and intensities in base stations
//! per km². This module is the only place those units appear; everything it
//! hands to the analysis is in Watts, linear SINR and base stations per m².

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::buyer::SellerOffer;
use crate::error::{Error, Result};
use crate::ppp::SimOptions;
use crate::seller::{MarketParams, SellerEconomics};
use crate::stogeo::{seller_qos_constant, RadioEnv};

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub const PER_KM2_TO_PER_M2: f64 = 1e-6;

pub fn per_km2_to_per_m2(x: f64) -> f64 {
    x * PER_KM2_TO_PER_M2
}

pub fn per_m2_to_per_km2(x: f64) -> f64 {
    x / PER_KM2_TO_PER_M2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub alpha: f64,
    pub noise_dbm: f64,
    pub threshold_db: f64,
    pub p_max_dbm: f64,
    pub p_circuit_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuyerConfig {
    pub lambda0_per_km2: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SellerConfig {
    pub id: usize,
    pub lambda_per_km2: f64,
    /// Price the buyer pays for the seller's whole infrastructure.
    pub ask_price: f64,
    /// Currency per W/m² of areal power.
    pub power_price: f64,
    pub fixed_cost: f64,
    pub threshold_db: f64,
    /// Outage target behind the seller's power law; the buyer's when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketConfig {
    pub theta: f64,
    /// Price increase per BS/km² of total supply.
    pub eta_per_km2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    pub window_radius_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub env: EnvConfig,
    pub buyer: BuyerConfig,
    pub sellers: Vec<SellerConfig>,
    pub market: MarketConfig,
    pub sim: SimConfig,
}

mod raw {
    //! Every field optional so that missing ones are reported together with
    //! the other violations instead of one at a time.
    use serde::Deserialize;

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Env {
        pub alpha: Option<f64>,
        pub noise_dbm: Option<f64>,
        pub threshold_db: Option<f64>,
        pub p_max_dbm: Option<f64>,
        pub p_circuit_w: Option<f64>,
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Buyer {
        pub lambda0_per_km2: Option<f64>,
        pub epsilon: Option<f64>,
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Seller {
        pub id: Option<usize>,
        pub lambda_per_km2: Option<f64>,
        pub ask_price: Option<f64>,
        pub power_price: Option<f64>,
        pub fixed_cost: Option<f64>,
        pub threshold_db: Option<f64>,
        pub epsilon: Option<f64>,
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Market {
        pub theta: Option<f64>,
        pub eta_per_km2: Option<f64>,
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Sim {
        pub trials: Option<u64>,
        pub seed: Option<u64>,
        pub window_radius_m: Option<f64>,
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Scenario {
        pub description: Option<String>,
        pub env: Option<Env>,
        pub buyer: Option<Buyer>,
        pub sellers: Option<Vec<Seller>>,
        pub market: Option<Market>,
        pub sim: Option<Sim>,
    }
}

/// Collects every problem found while assembling a config.
#[derive(Default)]
struct Problems(Vec<String>);

impl Problems {
    fn field<T: Copy + Default>(&mut self, path: &str, v: Option<T>) -> T {
        if v.is_none() {
            self.0.push(format!("{path}: missing field"));
        }
        v.unwrap_or_default()
    }

    fn check(&mut self, ok: bool, path: &str, what: &str, value: impl std::fmt::Display) {
        if !ok {
            self.0.push(format!("{path}: {what}, got {value}"));
        }
    }
}

fn parse_error(path: &str, e: &serde_json::Error) -> Error {
    Error::Parse {
        path: path.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Parses and validates scenario JSON. `origin` names the source in errors.
pub fn parse_scenario(text: &str, origin: &str) -> Result<ScenarioConfig> {
    let r: raw::Scenario = serde_json::from_str(text).map_err(|e| parse_error(origin, &e))?;
    let mut p = Problems::default();

    let env = match r.env {
        Some(e) => EnvConfig {
            alpha: p.field("env.alpha", e.alpha),
            noise_dbm: p.field("env.noise_dbm", e.noise_dbm),
            threshold_db: p.field("env.threshold_db", e.threshold_db),
            p_max_dbm: p.field("env.p_max_dbm", e.p_max_dbm),
            p_circuit_w: p.field("env.p_circuit_w", e.p_circuit_w),
        },
        None => {
            p.0.push("env: missing field".into());
            EnvConfig {
                alpha: 0.0,
                noise_dbm: 0.0,
                threshold_db: 0.0,
                p_max_dbm: 0.0,
                p_circuit_w: 0.0,
            }
        }
    };
    let buyer = match r.buyer {
        Some(b) => BuyerConfig {
            lambda0_per_km2: p.field("buyer.lambda0_per_km2", b.lambda0_per_km2),
            epsilon: p.field("buyer.epsilon", b.epsilon),
        },
        None => {
            p.0.push("buyer: missing field".into());
            BuyerConfig {
                lambda0_per_km2: 0.0,
                epsilon: 0.0,
            }
        }
    };
    let sellers = match r.sellers {
        Some(list) => list
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                let at = |f: &str| format!("sellers[{i}].{f}");
                SellerConfig {
                    id: p.field(&at("id"), s.id),
                    lambda_per_km2: p.field(&at("lambda_per_km2"), s.lambda_per_km2),
                    ask_price: p.field(&at("ask_price"), s.ask_price),
                    power_price: p.field(&at("power_price"), s.power_price),
                    fixed_cost: p.field(&at("fixed_cost"), s.fixed_cost),
                    threshold_db: p.field(&at("threshold_db"), s.threshold_db),
                    epsilon: s.epsilon,
                }
            })
            .collect(),
        None => {
            p.0.push("sellers: missing field".into());
            Vec::new()
        }
    };
    let market = match r.market {
        Some(m) => MarketConfig {
            theta: p.field("market.theta", m.theta),
            eta_per_km2: p.field("market.eta_per_km2", m.eta_per_km2),
        },
        None => {
            p.0.push("market: missing field".into());
            MarketConfig {
                theta: 0.0,
                eta_per_km2: 0.0,
            }
        }
    };
    let sim = match r.sim {
        Some(s) => SimConfig {
            trials: p.field("sim.trials", s.trials),
            seed: p.field("sim.seed", s.seed),
            window_radius_m: p.field("sim.window_radius_m", s.window_radius_m),
        },
        None => {
            p.0.push("sim: missing field".into());
            SimConfig {
                trials: 0,
                seed: 0,
                window_radius_m: 0.0,
            }
        }
    };

    let cfg = ScenarioConfig {
        description: r.description,
        env,
        buyer,
        sellers,
        market,
        sim,
    };
    if !p.0.is_empty() {
        return Err(Error::Validation(p.0));
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: shown.clone(),
        message: e.to_string(),
    })?;
    parse_scenario(&text, &shown)
}

impl ScenarioConfig {
    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut p = Problems::default();
        let e = &self.env;
        p.check(
            e.alpha > 2.0 && e.alpha.is_finite(),
            "env.alpha",
            "must be > 2",
            e.alpha,
        );
        p.check(
            e.noise_dbm.is_finite(),
            "env.noise_dbm",
            "must be finite",
            e.noise_dbm,
        );
        p.check(
            e.threshold_db.is_finite(),
            "env.threshold_db",
            "must be finite",
            e.threshold_db,
        );
        p.check(
            e.p_max_dbm.is_finite(),
            "env.p_max_dbm",
            "must be finite",
            e.p_max_dbm,
        );
        p.check(
            e.p_circuit_w >= 0.0 && e.p_circuit_w.is_finite(),
            "env.p_circuit_w",
            "must be >= 0",
            e.p_circuit_w,
        );

        let b = &self.buyer;
        p.check(
            b.lambda0_per_km2 > 0.0 && b.lambda0_per_km2.is_finite(),
            "buyer.lambda0_per_km2",
            "must be > 0",
            b.lambda0_per_km2,
        );
        p.check(
            b.epsilon > 0.0 && b.epsilon < 1.0,
            "buyer.epsilon",
            "must lie in (0, 1)",
            b.epsilon,
        );

        let mut seen = std::collections::BTreeSet::new();
        for (i, s) in self.sellers.iter().enumerate() {
            let at = |f: &str| format!("sellers[{i}].{f}");
            p.check(seen.insert(s.id), &at("id"), "duplicate seller id", s.id);
            p.check(
                s.lambda_per_km2 > 0.0 && s.lambda_per_km2.is_finite(),
                &at("lambda_per_km2"),
                "must be > 0",
                s.lambda_per_km2,
            );
            p.check(
                s.ask_price >= 0.0 && s.ask_price.is_finite(),
                &at("ask_price"),
                "must be >= 0",
                s.ask_price,
            );
            p.check(
                s.power_price > 0.0 && s.power_price.is_finite(),
                &at("power_price"),
                "must be > 0",
                s.power_price,
            );
            p.check(
                s.fixed_cost.is_finite(),
                &at("fixed_cost"),
                "must be finite",
                s.fixed_cost,
            );
            p.check(
                s.threshold_db.is_finite(),
                &at("threshold_db"),
                "must be finite",
                s.threshold_db,
            );
            if let Some(eps) = s.epsilon {
                p.check(eps > 0.0 && eps < 1.0, &at("epsilon"), "must lie in (0, 1)", eps);
            }
        }

        let m = &self.market;
        p.check(m.theta.is_finite(), "market.theta", "must be finite", m.theta);
        p.check(
            m.eta_per_km2 > 0.0 && m.eta_per_km2.is_finite(),
            "market.eta_per_km2",
            "must be > 0",
            m.eta_per_km2,
        );

        let s = &self.sim;
        p.check(s.trials >= 1, "sim.trials", "must be >= 1", s.trials);
        p.check(
            s.window_radius_m > 0.0 && s.window_radius_m.is_finite(),
            "sim.window_radius_m",
            "must be > 0",
            s.window_radius_m,
        );

        if p.0.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(p.0))
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    /// Short SHA-256 fingerprint of the compact serialisation.
    pub fn hash(&self) -> String {
        let compact = serde_json::to_string(self).expect("scenario serialises");
        Sha256::digest(compact.as_bytes())
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// The scenario in SI units.
    pub fn to_si(&self) -> Result<Scenario> {
        self.validate()?;
        let e = &self.env;
        let env = RadioEnv::new(
            e.alpha,
            dbm_to_watts(e.noise_dbm),
            db_to_linear(e.threshold_db),
            dbm_to_watts(e.p_max_dbm),
            e.p_circuit_w,
        )?;
        let sellers = self
            .sellers
            .iter()
            .map(|s| SellerSpec {
                id: s.id,
                intensity: per_km2_to_per_m2(s.lambda_per_km2),
                ask_price: s.ask_price,
                power_price: s.power_price,
                fixed_cost: s.fixed_cost,
                threshold: db_to_linear(s.threshold_db),
                epsilon: s.epsilon.unwrap_or(self.buyer.epsilon),
            })
            .collect();
        Ok(Scenario {
            env,
            lambda0: per_km2_to_per_m2(self.buyer.lambda0_per_km2),
            epsilon: self.buyer.epsilon,
            sellers,
            market: MarketParams {
                base_price: self.market.theta,
                marginal_price: self.market.eta_per_km2 / PER_KM2_TO_PER_M2,
            },
            sim: SimOptions {
                trials: self.sim.trials,
                seed: self.sim.seed,
                window_floor: self.sim.window_radius_m,
            },
        })
    }
}

/// One seller in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SellerSpec {
    pub id: usize,
    /// BS per m².
    pub intensity: f64,
    pub ask_price: f64,
    pub power_price: f64,
    pub fixed_cost: f64,
    /// Linear SINR threshold of the seller's own users.
    pub threshold: f64,
    pub epsilon: f64,
}

impl SellerSpec {
    pub fn offer(&self) -> SellerOffer {
        SellerOffer {
            seller_id: self.id,
            intensity: self.intensity,
            ask_price: self.ask_price,
        }
    }

    /// Cost parameters, with the power-law constant of the seller's own network.
    pub fn economics(&self, env: &RadioEnv) -> Result<SellerEconomics> {
        let econ = SellerEconomics {
            seller_id: self.id,
            intensity_cap: self.intensity,
            power_price: self.power_price,
            fixed_cost: self.fixed_cost,
            qos_constant: seller_qos_constant(self.threshold, env, self.epsilon)?,
        };
        econ.validate()?;
        Ok(econ)
    }
}

/// Validated scenario in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub env: RadioEnv,
    /// Buyer intensity, BS per m².
    pub lambda0: f64,
    pub epsilon: f64,
    pub sellers: Vec<SellerSpec>,
    pub market: MarketParams,
    pub sim: SimOptions,
}

impl Scenario {
    pub fn seller_intensity(&self) -> f64 {
        self.sellers.iter().map(|s| s.intensity).sum()
    }

    pub fn offers(&self) -> Vec<SellerOffer> {
        self.sellers.iter().map(SellerSpec::offer).collect()
    }

    pub fn economics(&self) -> Result<Vec<SellerEconomics>> {
        self.sellers.iter().map(|s| s.economics(&self.env)).collect()
    }
}
