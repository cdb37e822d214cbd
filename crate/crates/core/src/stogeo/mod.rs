//! Stochastic-geometry analysis of the buyer's downlink.
//!
//! Everything here works in SI units: Watts, metres, base stations per square
//! metre and linear SINR. Conversions from dBm, dB and per-km² happen in
//! [`crate::scenario`].

mod coverage;
mod power;

pub use coverage::{
    coverage_approx, coverage_baseline, coverage_exact, saturation_bound, CoverageMethod, CoverageResult,
};
pub use power::{
    areal_power, areal_power_minimizer, branch_threshold, cell_radius, min_power, power_law_constant,
    qos_gamma, qos_intensity_threshold, seller_qos_constant, ArealPowerCurvePoint, PowerBranch,
};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quad::{integrate, QuadConfig};

/// Physical parameters shared by every operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioEnv {
    /// Path-loss exponent, must exceed 2.
    pub alpha: f64,
    /// Noise power in Watts.
    pub noise_power: f64,
    /// Linear SINR threshold.
    pub threshold: f64,
    /// Maximum transmit power per base station, Watts.
    pub p_max: f64,
    /// Circuit power per base station, Watts.
    pub p_circuit: f64,
}

impl RadioEnv {
    pub fn new(alpha: f64, noise_power: f64, threshold: f64, p_max: f64, p_circuit: f64) -> Result<Self> {
        let env = Self {
            alpha,
            noise_power,
            threshold,
            p_max,
            p_circuit,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if !(self.noise_power >= 0.0 && self.noise_power.is_finite()) {
            return Err(invalid(format!(
                "noise_power must be >= 0, got {}",
                self.noise_power
            )));
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(invalid(format!("threshold must be > 0, got {}", self.threshold)));
        }
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return Err(invalid(format!("p_max must be > 0, got {}", self.p_max)));
        }
        if !(self.p_circuit >= 0.0 && self.p_circuit.is_finite()) {
            return Err(invalid(format!("p_circuit must be >= 0, got {}", self.p_circuit)));
        }
        Ok(())
    }

    /// Same environment seen through a different SINR threshold.
    pub fn with_threshold(&self, threshold: f64) -> Self {
        Self { threshold, ..*self }
    }

    pub fn with_noise(&self, noise_power: f64) -> Self {
        Self { noise_power, ..*self }
    }

    /// `beta = 1 + rho(T, alpha)` for this environment.
    pub fn beta(&self) -> Result<f64> {
        beta_rayleigh(self.threshold, self.alpha)
    }
}

/// Buyer-owned intensity plus the aggregate intensity it can associate with
/// through sharing agreements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensitySplit {
    pub lambda0: f64,
    pub lambda_extra: f64,
}

impl IntensitySplit {
    pub fn new(lambda0: f64, lambda_extra: f64) -> Result<Self> {
        let split = Self {
            lambda0,
            lambda_extra,
        };
        split.validate()?;
        Ok(split)
    }

    pub fn no_sharing(lambda0: f64) -> Result<Self> {
        Self::new(lambda0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda0 >= 0.0 && self.lambda0.is_finite()) {
            return Err(invalid(format!("lambda0 must be >= 0, got {}", self.lambda0)));
        }
        if !(self.lambda_extra >= 0.0 && self.lambda_extra.is_finite()) {
            return Err(invalid(format!(
                "lambda_extra must be >= 0, got {}",
                self.lambda_extra
            )));
        }
        if self.total() <= 0.0 {
            return Err(invalid("total intensity lambda0 + lambda_extra must be > 0"));
        }
        Ok(())
    }

    /// Net intensity `lambda` seen by a buyer UE.
    pub fn total(&self) -> f64 {
        self.lambda0 + self.lambda_extra
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 2.0 && alpha.is_finite()) {
        return Err(invalid(format!(
            "path-loss exponent must be > 2 for the interference integral to converge, got {alpha}"
        )));
    }
    Ok(())
}

/// `Gamma(2/alpha)`.
pub(crate) fn gamma_two_over(alpha: f64) -> f64 {
    statrs::function::gamma::gamma(2.0 / alpha)
}

/// Interference factor `rho(T, alpha) = T^{2/a} * int_{T^{-2/a}}^inf du / (1 + u^{a/2})`.
///
/// Under `u = 1/v` the tail becomes `int_0^{T^{2/a}} v^{a/2-2} / (1 + v^{a/2}) dv`,
/// and `t = v^m` with `m = a/2 - 1` absorbs the endpoint singularity, leaving
/// the smooth finite integral `(1/m) int_0^{T^{m 2/a}} dt / (1 + t^{(m+1)/m})`.
pub fn rho(threshold: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(invalid(format!("threshold must be > 0, got {threshold}")));
    }
    let m = 0.5 * alpha - 1.0;
    let power = (m + 1.0) / m;
    let upper = threshold.powf(2.0 * m / alpha);
    let cfg = QuadConfig {
        abs_tol: 1e-13,
        rel_tol: 1e-15,
        max_intervals: 2000,
    };
    let r = integrate(|t| 1.0 / (1.0 + t.powf(power)), 0.0, upper, &cfg);
    Ok(threshold.powf(2.0 / alpha) * r.value / m)
}

/// `beta = 1 + rho(T, alpha)` for Rayleigh-faded interfering links.
pub fn beta_rayleigh(threshold: f64, alpha: f64) -> Result<f64> {
    Ok(1.0 + rho(threshold, alpha)?)
}

/// `beta' = 1 - lambda0 (1 - beta) / lambda`; lies between 1 (all shared) and
/// `beta` (no sharing).
pub fn beta_prime(split: &IntensitySplit, beta: f64) -> Result<f64> {
    split.validate()?;
    if !(beta >= 1.0) {
        return Err(invalid(format!("beta must be >= 1, got {beta}")));
    }
    Ok(1.0 + split.lambda0 * (beta - 1.0) / split.total())
}
