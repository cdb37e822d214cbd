use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{beta_prime, gamma_two_over, IntensitySplit, RadioEnv};
use crate::error::{invalid, Error, Result};
use crate::quad::{integrate_with_breaks, QuadConfig};

/// Tail mass below which the coverage integrand is dropped.
const TAIL_MASS: f64 = 1e-13;
const TARGET_ABS_ERR: f64 = 1e-10;
const MAX_ABS_ERR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverageMethod {
    ExactQuadrature,
    Approximation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub value: f64,
    pub method: CoverageMethod,
    /// Error estimate of the quadrature; only set for [`CoverageMethod::ExactQuadrature`].
    pub quadrature_abs_err: Option<f64>,
    /// Set when the closed-form approximation exceeded 1 and was clipped.
    pub clipped: bool,
}

fn check_power(power: f64) -> Result<()> {
    if !(power > 0.0 && power.is_finite()) {
        return Err(invalid(format!("transmit power must be > 0, got {power}")));
    }
    Ok(())
}

/// `prefactor * int_0^inf exp(-(a z + b z^{alpha/2})) dz`, truncated where the
/// remaining tail is below [`TAIL_MASS`].
fn laplace_coverage(prefactor: f64, a: f64, b: f64, alpha: f64, abs_tol: f64) -> Result<CoverageResult> {
    let tail = -TAIL_MASS.ln();
    let mut upper = tail / a;
    if b > 0.0 {
        upper = upper.max((tail / b).powf(2.0 / alpha));
    }
    let half_alpha = 0.5 * alpha;
    // geometric panels from the shorter of the two decay scales up to the cutoff
    let mut scale = 1.0 / a;
    if b > 0.0 {
        scale = scale.min(b.powf(-2.0 / alpha));
    }
    let mut breaks = vec![0.0];
    let mut edge = 0.25 * scale;
    while edge < upper {
        breaks.push(edge);
        edge *= 4.0;
    }
    breaks.push(upper);
    let cfg = QuadConfig {
        abs_tol,
        rel_tol: 0.0,
        max_intervals: 4000,
    };
    let r = integrate_with_breaks(
        |z| prefactor * (-(a * z + b * z.powf(half_alpha))).exp(),
        &breaks,
        &cfg,
    );
    if r.abs_err > MAX_ABS_ERR {
        return Err(Error::QuadratureNonconvergence { abs_err: r.abs_err });
    }
    Ok(CoverageResult {
        value: r.value.clamp(0.0, 1.0),
        method: CoverageMethod::ExactQuadrature,
        quadrature_abs_err: Some(r.abs_err),
        clipped: false,
    })
}

/// Coverage of a typical buyer UE when association spans the shared
/// infrastructure but interference comes only from buyer-owned stations:
/// `P_c = pi lambda int_0^inf exp(-(A' z + B z^{alpha/2})) dz` with
/// `A' = pi (lambda - lambda0 (1 - beta))` and `B = T sigma^2 / p`.
pub fn coverage_exact(split: &IntensitySplit, power: f64, env: &RadioEnv) -> Result<CoverageResult> {
    coverage_exact_with_tol(split, power, env, TARGET_ABS_ERR)
}

/// [`coverage_exact`] with an explicit quadrature tolerance.
pub fn coverage_exact_with_tol(
    split: &IntensitySplit,
    power: f64,
    env: &RadioEnv,
    abs_tol: f64,
) -> Result<CoverageResult> {
    env.validate()?;
    split.validate()?;
    check_power(power)?;
    let beta = env.beta()?;
    let lambda = split.total();
    let a_prime = PI * (lambda - split.lambda0 * (1.0 - beta));
    let b = env.threshold * env.noise_power / power;
    laplace_coverage(PI * lambda, a_prime, b, env.alpha, abs_tol)
}

/// Single-operator coverage with interference from the whole serving network,
/// `A = pi lambda beta`. Sharing-free evaluation of [`coverage_exact`].
pub fn coverage_baseline(lambda: f64, power: f64, env: &RadioEnv) -> Result<CoverageResult> {
    env.validate()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("intensity must be > 0, got {lambda}")));
    }
    check_power(power)?;
    let beta = env.beta()?;
    let b = env.threshold * env.noise_power / power;
    laplace_coverage(PI * lambda, PI * lambda * beta, b, env.alpha, TARGET_ABS_ERR)
}

/// Closed-form approximation `pi lambda [A' + (alpha/2) B^{2/alpha} / Gamma(2/alpha)]^{-1}`.
pub fn coverage_approx(split: &IntensitySplit, power: f64, env: &RadioEnv) -> Result<CoverageResult> {
    env.validate()?;
    split.validate()?;
    check_power(power)?;
    let beta = env.beta()?;
    let lambda = split.total();
    let a_prime = PI * (lambda - split.lambda0 * (1.0 - beta));
    let b = env.threshold * env.noise_power / power;
    let noise_term = 0.5 * env.alpha * b.powf(2.0 / env.alpha) / gamma_two_over(env.alpha);
    let raw = PI * lambda / (a_prime + noise_term);
    Ok(CoverageResult {
        value: raw.min(1.0),
        method: CoverageMethod::Approximation,
        quadrature_abs_err: None,
        clipped: raw > 1.0,
    })
}

/// Interference-limited ceiling `1/beta'` on the coverage of this split.
pub fn saturation_bound(split: &IntensitySplit, env: &RadioEnv) -> Result<f64> {
    env.validate()?;
    Ok(1.0 / beta_prime(split, env.beta()?)?)
}
