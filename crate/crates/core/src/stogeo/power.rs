use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{beta_prime, check_alpha, gamma_two_over, IntensitySplit, RadioEnv};
use crate::error::{invalid, Error, Result};

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid(format!(
            "outage tolerance must lie in (0, 1), got {epsilon}"
        )));
    }
    Ok(())
}

/// Noise-driven intensity `gamma = (alpha / 2 pi) B^{2/alpha} / Gamma(2/alpha)`
/// with `B = T sigma^2 / p`.
pub fn qos_gamma(power: f64, env: &RadioEnv) -> Result<f64> {
    env.validate()?;
    if !(power > 0.0 && power.is_finite()) {
        return Err(invalid(format!("transmit power must be > 0, got {power}")));
    }
    let b = env.threshold * env.noise_power / power;
    Ok(env.alpha / (2.0 * PI) * b.powf(2.0 / env.alpha) / gamma_two_over(env.alpha))
}

/// Constant `c` of the power law `p = c lambda^{-alpha/2}` for a network with
/// interference factor `beta_prime` and outage tolerance `epsilon`.
///
/// Fails with [`Error::InfeasibleQos`] when `1 - epsilon >= 1/beta_prime`.
/// Returns 0 in a noiseless environment, where any positive power works.
pub fn power_law_constant(beta_prime: f64, epsilon: f64, env: &RadioEnv) -> Result<f64> {
    env.validate()?;
    check_epsilon(epsilon)?;
    let target = 1.0 - epsilon;
    let slack = 1.0 - target * beta_prime;
    if !(slack > 0.0) {
        return Err(Error::InfeasibleQos {
            target,
            ceiling: 1.0 / beta_prime,
        });
    }
    let a = env.alpha;
    let inner =
        2.0 * PI * slack * gamma_two_over(a) / (a * target * (env.threshold * env.noise_power).powf(2.0 / a));
    Ok(inner.powf(-0.5 * a))
}

/// Minimum transmit power per buyer station for which the approximate
/// coverage reaches `1 - epsilon`.
///
/// `c` depends on `beta'`, so with sharing it varies with the split; the pure
/// `lambda^{-alpha/2}` law only holds without sharing.
pub fn min_power(split: &IntensitySplit, env: &RadioEnv, epsilon: f64) -> Result<f64> {
    env.validate()?;
    let bp = beta_prime(split, env.beta()?)?;
    let c = power_law_constant(bp, epsilon, env)?;
    Ok(c * split.total().powf(-0.5 * env.alpha))
}

/// Cell radius without sharing: the distance at which the minimum-power
/// station is received at -3 dB SNR, `p R^{-alpha} / sigma^2 = 1/2`.
pub fn cell_radius(lambda0: f64, env: &RadioEnv, epsilon: f64) -> Result<f64> {
    env.validate()?;
    if env.noise_power <= 0.0 {
        return Err(invalid("cell radius is undefined without noise"));
    }
    let p = min_power(&IntensitySplit::no_sharing(lambda0)?, env, epsilon)?;
    Ok((2.0 * p / env.noise_power).powf(1.0 / env.alpha))
}

/// Power-law constant of a seller that serves only its own subscribers at
/// SINR threshold `threshold` with outage tolerance `epsilon`.
pub fn seller_qos_constant(threshold: f64, env: &RadioEnv, epsilon: f64) -> Result<f64> {
    let own = env.with_threshold(threshold);
    own.validate()?;
    power_law_constant(own.beta()?, epsilon, &own)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerBranch {
    /// Transmit power pinned at `p_max`.
    Linear,
    /// Transmit power follows `c lambda^{-alpha/2}`.
    Convex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArealPowerCurvePoint {
    pub lambda_k: f64,
    /// Watts per square metre.
    pub s_k: f64,
    pub branch: PowerBranch,
}

/// Intensity `(c_k / p_max)^{2/alpha}` at which the required power reaches `p_max`.
pub fn branch_threshold(env: &RadioEnv, c_k: f64) -> Result<f64> {
    check_alpha(env.alpha)?;
    if !(c_k > 0.0 && c_k.is_finite()) {
        return Err(invalid(format!("power-law constant must be > 0, got {c_k}")));
    }
    Ok((c_k / env.p_max).powf(2.0 / env.alpha))
}

/// Areal power consumption of a seller network, linear in `lambda_k` up to the
/// branch threshold and convex beyond it.
pub fn areal_power(lambda_k: f64, env: &RadioEnv, c_k: f64) -> Result<ArealPowerCurvePoint> {
    env.validate()?;
    if !(lambda_k >= 0.0 && lambda_k.is_finite()) {
        return Err(invalid(format!("intensity must be >= 0, got {lambda_k}")));
    }
    let lambda_th = branch_threshold(env, c_k)?;
    // the boundary itself belongs to the convex branch
    let (s_k, branch) = if lambda_k < lambda_th {
        (lambda_k * (env.p_max + env.p_circuit), PowerBranch::Linear)
    } else {
        (
            lambda_k * (c_k * lambda_k.powf(-0.5 * env.alpha) + env.p_circuit),
            PowerBranch::Convex,
        )
    };
    Ok(ArealPowerCurvePoint {
        lambda_k,
        s_k,
        branch,
    })
}

/// Intensity minimising the areal power on the convex branch:
/// `max(lambda_th, [c_k / p_c (alpha/2 - 1)]^{2/alpha})`.
pub fn areal_power_minimizer(env: &RadioEnv, c_k: f64) -> Result<f64> {
    env.validate()?;
    if env.p_circuit <= 0.0 {
        return Err(invalid(
            "circuit power must be > 0: without it the areal power has no interior minimum",
        ));
    }
    let lambda_th = branch_threshold(env, c_k)?;
    let stationary = (c_k / env.p_circuit * (0.5 * env.alpha - 1.0)).powf(2.0 / env.alpha);
    Ok(lambda_th.max(stationary))
}

/// Net intensity needed so that the approximate coverage reaches `1 - epsilon`:
/// `(1 - eps)/eps * (gamma - lambda0 (1 - beta))`.
///
/// A non-positive value means the buyer already meets the target on its own.
pub fn qos_intensity_threshold(lambda0: f64, env: &RadioEnv, power: f64, epsilon: f64) -> Result<f64> {
    env.validate()?;
    check_epsilon(epsilon)?;
    if !(lambda0 >= 0.0 && lambda0.is_finite()) {
        return Err(invalid(format!("lambda0 must be >= 0, got {lambda0}")));
    }
    let gamma = qos_gamma(power, env)?;
    let beta = env.beta()?;
    Ok((1.0 - epsilon) / epsilon * (gamma - lambda0 * (1.0 - beta)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stogeo::coverage_approx;

    fn sec6() -> RadioEnv {
        RadioEnv::new(4.0, 1e-15, 10f64.powf(1.5), 0.01, 1.0).unwrap()
    }

    /// Bisection in log-space for the increasing map `f` hitting `target`.
    fn bisect_log(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..300 {
            let mid = (lo.ln() + 0.5 * (hi.ln() - lo.ln())).exp();
            if f(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn min_power_sec6_matches_bisection() {
        let env = sec6();
        let s = IntensitySplit::no_sharing(2e-5).unwrap();
        let p = min_power(&s, &env, 0.95).unwrap();
        let oracle = bisect_log(|p| coverage_approx(&s, p, &env).unwrap().value, 0.05, 1e-20, 1e3);
        assert!((p - oracle).abs() < 1e-9 * oracle, "{p} vs {oracle}");
        // 40-digit reference
        assert!((p - 8.194_092_141_601_258e-8).abs() < 1e-12 * p);
    }

    #[test]
    fn min_power_scaling_without_sharing() {
        let env = sec6();
        let p1 = min_power(&IntensitySplit::no_sharing(2e-5).unwrap(), &env, 0.95).unwrap();
        let p2 = min_power(&IntensitySplit::no_sharing(4e-5).unwrap(), &env, 0.95).unwrap();
        assert!((p2 / p1 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn min_power_infeasible_above_ceiling() {
        let env = sec6();
        let s = IntensitySplit::new(2e-5, 3e-5).unwrap();
        let ceiling = 1.0 / beta_prime(&s, env.beta().unwrap()).unwrap();
        let eps = 1.0 - (ceiling + 0.01);
        assert!(matches!(
            min_power(&s, &env, eps),
            Err(Error::InfeasibleQos { .. })
        ));
        assert!(matches!(
            min_power(&s, &env, 1.0 - ceiling - 1e-12),
            Err(Error::InfeasibleQos { .. })
        ));
        assert!(min_power(&s, &env, 1.0 - ceiling + 1e-6).is_ok());
    }

    #[test]
    fn min_power_round_trips_with_sharing() {
        let env = sec6();
        let s = IntensitySplit::new(2e-5, 6e-5).unwrap();
        let p = min_power(&s, &env, 0.7).unwrap();
        let c = coverage_approx(&s, p, &env).unwrap().value;
        assert!((c - 0.3).abs() < 1e-9 * 0.3);
    }

    #[test]
    fn cell_radius_edge_snr() {
        let env = sec6();
        let r = cell_radius(2e-5, &env, 0.95).unwrap();
        let p = min_power(&IntensitySplit::no_sharing(2e-5).unwrap(), &env, 0.95).unwrap();
        let snr = p * r.powf(-env.alpha) / env.noise_power;
        assert!((snr - 0.5).abs() < 1e-12);
        assert!((r - 113.144_307_772_340_66).abs() < 1e-9);
        let r4 = cell_radius(8e-5, &env, 0.95).unwrap();
        assert!((r4 / r - 0.5).abs() < 1e-12);
        assert!(cell_radius(2e-5, &env.with_noise(0.0), 0.95).is_err());
    }

    #[test]
    fn areal_power_branches() {
        let env = sec6();
        let c = 3e-12;
        let th = branch_threshold(&env, c).unwrap();
        assert_eq!(areal_power(0.0, &env, c).unwrap().s_k, 0.0);
        let at = areal_power(th, &env, c).unwrap();
        assert_eq!(at.branch, PowerBranch::Convex);
        let linear = th * (env.p_max + env.p_circuit);
        assert!((at.s_k - linear).abs() < 1e-12 * linear);
        assert_eq!(
            areal_power(0.5 * th, &env, c).unwrap().branch,
            PowerBranch::Linear
        );

        // second differences against the analytic second derivative
        let h = 1e-2 * th;
        for k in [1.05, 1.5, 3.0, 10.0] {
            let x = k * th;
            let s = |l: f64| areal_power(l, &env, c).unwrap().s_k;
            let d2 = (s(x + h) - 2.0 * s(x) + s(x - h)) / (h * h);
            let want = c * env.alpha * (env.alpha - 2.0) / 4.0 * x.powf(-env.alpha / 2.0 - 1.0);
            assert!(d2 > 0.0);
            assert!((d2 - want).abs() < 1e-4 * want, "{d2} vs {want}");
        }
    }

    #[test]
    fn minimizer_alpha4_and_clamp() {
        // at alpha = 4 the interior point beats lambda_th exactly when p_c < p_max
        let env = RadioEnv {
            p_circuit: 1e-3,
            ..sec6()
        };
        let c = 1e-9;
        let m = areal_power_minimizer(&env, c).unwrap();
        assert!((m - (c / env.p_circuit).sqrt()).abs() < 1e-15 * m);
        assert!(m > branch_threshold(&env, c).unwrap());

        let env2 = sec6();
        let th = branch_threshold(&env2, c).unwrap();
        assert_eq!(areal_power_minimizer(&env2, c).unwrap(), th);
        assert!(areal_power_minimizer(
            &RadioEnv {
                p_circuit: 0.0,
                ..env
            },
            c
        )
        .is_err());
    }

    #[test]
    fn qos_threshold_sec6() {
        let env = sec6();
        let thr = qos_intensity_threshold(2e-5, &env, 0.01, 0.5).unwrap();
        assert!((thr - 1.575_103_564_612_061e-4).abs() < 1e-12 * thr);
        // independent bisection in the shared intensity
        let oracle = bisect_log(
            |extra| {
                coverage_approx(&IntensitySplit::new(2e-5, extra).unwrap(), 0.01, &env)
                    .unwrap()
                    .value
            },
            0.5,
            1e-12,
            1.0,
        );
        assert!((2e-5 + oracle - thr).abs() < 1e-9 * thr);
        assert!((qos_gamma(0.01, &env).unwrap() - 6.387_121_631_666_583e-7).abs() < 1e-18);
    }

    #[test]
    fn qos_threshold_vanishes_as_epsilon_to_one() {
        let env = sec6();
        let t = qos_intensity_threshold(2e-5, &env, 0.01, 1.0 - 1e-12).unwrap();
        assert!(t.abs() < 1e-15);
        assert!(qos_intensity_threshold(2e-5, &env, 0.01, 1.0).is_err());
    }
}
