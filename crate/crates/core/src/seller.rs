//! Cournot competition among sellers of shared infrastructure.
//!
//! Seller `k` offers `y_k = lambda_k z_k` of its intensity, pays
//! `C_k(y) = a_k S_k(y) + d_k` to run it and is paid the supply-driven price
//! `Q(y) = theta + eta y` per unit. The equilibrium is a fixed point of the
//! best responses, found by damped Gauss-Seidel iteration.
//!
//! Because the price rises with supply, profit is convex wherever marginal
//! cost is flat, and every stationary point of the profit earns strictly less
//! than selling nothing:
//! `F(y*) = -eta y*^2 - a_k (S_k - y S_k') - d_k < -d_k = F(0)`.
//! [`ResponseRule::ProfitMax`] therefore always lands on `0`, `lambda_th` or
//! the capacity, while [`ResponseRule::Stationary`] follows the first-order
//! conditions and reproduces the closed-form equilibrium quantities.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::stogeo::{areal_power, branch_threshold, RadioEnv};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SellerEconomics {
    pub seller_id: usize,
    /// Seller's own intensity `lambda_k`; the most it can sell.
    pub intensity_cap: f64,
    /// `a_k`, price per Watt of areal power.
    pub power_price: f64,
    /// `d_k`.
    pub fixed_cost: f64,
    /// `c_k` of the seller's power law `p = c_k lambda^{-alpha/2}`.
    pub qos_constant: f64,
}

impl SellerEconomics {
    pub fn validate(&self) -> Result<()> {
        let id = self.seller_id;
        if !(self.intensity_cap > 0.0 && self.intensity_cap.is_finite()) {
            return Err(invalid(format!("seller {id}: intensity cap must be > 0")));
        }
        if !(self.power_price > 0.0 && self.power_price.is_finite()) {
            return Err(invalid(format!("seller {id}: power price must be > 0")));
        }
        if !self.fixed_cost.is_finite() {
            return Err(invalid(format!("seller {id}: fixed cost must be finite")));
        }
        if !(self.qos_constant > 0.0 && self.qos_constant.is_finite()) {
            return Err(invalid(format!("seller {id}: QoS constant must be > 0")));
        }
        Ok(())
    }

    /// Intensity where the seller's transmit power saturates at `p_max`.
    pub fn lambda_th(&self, env: &RadioEnv) -> f64 {
        (self.qos_constant / env.p_max).powf(2.0 / env.alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    /// `theta`, price at zero supply.
    pub base_price: f64,
    /// `eta`, price increase per unit of total supply.
    pub marginal_price: f64,
}

impl MarketParams {
    pub fn validate(&self) -> Result<()> {
        if !self.base_price.is_finite() {
            return Err(invalid("base price must be finite"));
        }
        if !(self.marginal_price > 0.0 && self.marginal_price.is_finite()) {
            return Err(invalid("marginal price must be > 0"));
        }
        Ok(())
    }
}

/// `C_k(y) = a_k S_k(y) + d_k`.
pub fn seller_cost(y: f64, seller: &SellerEconomics, env: &RadioEnv) -> Result<f64> {
    seller.validate()?;
    if y > seller.intensity_cap {
        return Err(Error::OutOfCap {
            quantity: y,
            cap: seller.intensity_cap,
        });
    }
    let s = areal_power(y, env, seller.qos_constant)?;
    Ok(seller.power_price * s.s_k + seller.fixed_cost)
}

fn marginal_cost_linear(seller: &SellerEconomics, env: &RadioEnv) -> f64 {
    seller.power_price * (env.p_max + env.p_circuit)
}

fn marginal_cost_convex(y: f64, seller: &SellerEconomics, env: &RadioEnv) -> f64 {
    let a = seller.power_price;
    a * (1.0 - 0.5 * env.alpha) * seller.qos_constant * y.powf(-0.5 * env.alpha) + a * env.p_circuit
}

/// `C_k''`; zero on the linear branch.
fn cost_curvature(y: f64, seller: &SellerEconomics, env: &RadioEnv) -> f64 {
    if y < seller.lambda_th(env) {
        return 0.0;
    }
    let h = 0.5 * env.alpha;
    seller.power_price * h * (h - 1.0) * seller.qos_constant * y.powf(-h - 1.0)
}

/// `dC_k/dy`: flat at `a_k (p_max + p_c)` below `lambda_th`, then
/// `a_k (1 - alpha/2) c_k y^{-alpha/2} + a_k p_c`.
pub fn marginal_cost(y: f64, seller: &SellerEconomics, env: &RadioEnv) -> Result<f64> {
    seller.validate()?;
    env.validate()?;
    if !(y > 0.0) {
        return Err(invalid(format!("marginal cost needs y > 0, got {y}")));
    }
    Ok(if y < seller.lambda_th(env) {
        marginal_cost_linear(seller, env)
    } else {
        marginal_cost_convex(y, seller, env)
    })
}

/// `Q(y) = theta + eta y`.
pub fn market_price(total_quantity: f64, market: &MarketParams) -> Result<f64> {
    if !(total_quantity >= 0.0) {
        return Err(invalid(format!(
            "total quantity must be >= 0, got {total_quantity}"
        )));
    }
    Ok(market.base_price + market.marginal_price * total_quantity)
}

/// `F_k = y_k Q(y_k + y_-k) - C_k(y_k)`.
pub fn seller_profit(
    y: f64,
    y_others: f64,
    seller: &SellerEconomics,
    market: &MarketParams,
    env: &RadioEnv,
) -> Result<f64> {
    if !(y >= 0.0 && y_others >= 0.0) {
        return Err(invalid("quantities must be >= 0"));
    }
    Ok(y * market_price(y + y_others, market)? - seller_cost(y, seller, env)?)
}

/// Coefficients of the best-response equations:
/// `U = (a(p_max + p_c) - theta)/eta`, `V = a(1 - alpha/2)c/eta`,
/// `W = (a p_c - theta)/eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseCoefficients {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

pub fn response_coefficients(
    seller: &SellerEconomics,
    market: &MarketParams,
    env: &RadioEnv,
) -> ResponseCoefficients {
    let a = seller.power_price;
    let (theta, eta) = (market.base_price, market.marginal_price);
    ResponseCoefficients {
        u: (a * (env.p_max + env.p_circuit) - theta) / eta,
        v: a * (1.0 - 0.5 * env.alpha) * seller.qos_constant / eta,
        w: (a * env.p_circuit - theta) / eta,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResponseRule {
    /// Global profit maximiser over `[0, cap]`.
    #[default]
    ProfitMax,
    /// Solution of the first-order condition on its branch. Without a valid
    /// one, the flat-branch solution projected onto `[0, cap]` is used, and
    /// failing that the most profitable boundary.
    Stationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResponseKind {
    LinearStationary,
    ConvexStationary,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestResponse {
    pub quantity: f64,
    pub kind: ResponseKind,
    pub profit: f64,
    /// Second-order condition `2 eta - C'' < 0` for stationary responses; the
    /// one-sided first-order (KKT) signs for boundary responses.
    pub soc_satisfied: bool,
    /// False when the convex branch is reachable but its first-order condition
    /// has no sign change, so only boundaries could be compared there.
    pub bracket_found: bool,
}

struct Profit<'a> {
    y_others: f64,
    seller: &'a SellerEconomics,
    market: &'a MarketParams,
    env: &'a RadioEnv,
    lambda_th: f64,
}

impl Profit<'_> {
    fn value(&self, y: f64) -> f64 {
        let price = self.market.base_price + self.market.marginal_price * (y + self.y_others);
        let s = if y < self.lambda_th {
            y * (self.env.p_max + self.env.p_circuit)
        } else {
            y * (self.seller.qos_constant * y.powf(-0.5 * self.env.alpha) + self.env.p_circuit)
        };
        y * price - self.seller.power_price * s - self.seller.fixed_cost
    }

    fn slope_with(&self, y: f64, marginal_cost: f64) -> f64 {
        let m = self.market;
        m.base_price + m.marginal_price * self.y_others + 2.0 * m.marginal_price * y - marginal_cost
    }

    fn slope_linear(&self, y: f64) -> f64 {
        self.slope_with(y, marginal_cost_linear(self.seller, self.env))
    }

    fn slope_convex(&self, y: f64) -> f64 {
        self.slope_with(y, marginal_cost_convex(y, self.seller, self.env))
    }

    fn slope_left(&self, y: f64) -> f64 {
        if y <= self.lambda_th {
            self.slope_linear(y)
        } else {
            self.slope_convex(y)
        }
    }

    fn slope_right(&self, y: f64) -> f64 {
        if y < self.lambda_th {
            self.slope_linear(y)
        } else {
            self.slope_convex(y)
        }
    }

    fn curvature(&self, y: f64) -> f64 {
        2.0 * self.market.marginal_price - cost_curvature(y, self.seller, self.env)
    }

    /// Whether a boundary point is a local maximum of the capped problem.
    fn boundary_kkt(&self, y: f64) -> bool {
        let cap = self.seller.intensity_cap;
        let left_ok = y <= 0.0 || self.slope_left(y) >= 0.0;
        let right_ok = y >= cap || self.slope_right(y) <= 0.0;
        left_ok && right_ok
    }
}

/// Root of a function that changes sign on `[lo, hi]`, to floating-point resolution.
fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut g_lo = g(lo);
    if g_lo == 0.0 {
        return lo;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = g(mid);
        if g_mid == 0.0 {
            return mid;
        }
        if (g_mid > 0.0) == (g_lo > 0.0) {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Best response of `seller` to the others' total supply `y_others`.
///
/// Stationary candidates come from the linear-branch closed form
/// `(U - y_-k)/2` and from bracketed roots of the convex-branch condition
/// `y = V y^{-alpha/2}/2 + W/2 - y_-k/2`; the bracket is split at the
/// inflection of the profit so each piece holds at most one root. Candidates
/// outside their branch or outside `[0, cap]` are dropped.
pub fn best_response(
    y_others: f64,
    seller: &SellerEconomics,
    market: &MarketParams,
    env: &RadioEnv,
    rule: ResponseRule,
) -> Result<BestResponse> {
    seller.validate()?;
    market.validate()?;
    env.validate()?;
    if !(y_others >= 0.0) {
        return Err(invalid(format!("others' supply must be >= 0, got {y_others}")));
    }

    let cap = seller.intensity_cap;
    let lambda_th = branch_threshold(env, seller.qos_constant)?;
    let profit = Profit {
        y_others,
        seller,
        market,
        env,
        lambda_th,
    };
    let coef = response_coefficients(seller, market, env);

    let mut stationary: Vec<(f64, ResponseKind)> = Vec::new();
    let linear = 0.5 * (coef.u - y_others);
    if linear >= 0.0 && linear <= cap && linear < lambda_th {
        stationary.push((linear, ResponseKind::LinearStationary));
    }

    let mut bracket_found = true;
    if lambda_th <= cap {
        let h = 0.5 * env.alpha;
        let inflection = (seller.power_price * h * (h - 1.0) * seller.qos_constant
            / (2.0 * market.marginal_price))
            .powf(1.0 / (h + 1.0));
        let mut pieces = vec![(lambda_th, inflection.clamp(lambda_th, cap))];
        if inflection < cap {
            pieces.push((inflection.max(lambda_th), cap));
        }
        bracket_found = false;
        for (lo, hi) in pieces {
            if hi <= lo {
                continue;
            }
            let (g_lo, g_hi) = (profit.slope_convex(lo), profit.slope_convex(hi));
            if g_lo.signum() != g_hi.signum() || g_lo == 0.0 || g_hi == 0.0 {
                bracket_found = true;
                let root = bisect(|y| profit.slope_convex(y), lo, hi);
                stationary.push((root, ResponseKind::ConvexStationary));
            }
        }
    }

    let mut boundaries = vec![0.0];
    if lambda_th < cap {
        boundaries.push(lambda_th);
    }
    boundaries.push(cap);

    let pick = |cands: &[(f64, ResponseKind)]| -> Option<(f64, ResponseKind, f64)> {
        let mut best: Option<(f64, ResponseKind, f64)> = None;
        for &(y, kind) in cands {
            let f = profit.value(y);
            if best.is_none_or(|(_, _, fb)| f > fb) {
                best = Some((y, kind, f));
            }
        }
        best
    };
    let boundary_cands: Vec<(f64, ResponseKind)> =
        boundaries.iter().map(|&y| (y, ResponseKind::Boundary)).collect();

    let chosen = match rule {
        ResponseRule::ProfitMax => {
            let all: Vec<_> = stationary.iter().chain(&boundary_cands).copied().collect();
            pick(&all)
        }
        ResponseRule::Stationary => pick(&stationary).or_else(|| {
            // project the flat-branch stationary point onto [0, cap]
            let projected = linear.clamp(0.0, cap);
            if projected < lambda_th {
                Some((projected, ResponseKind::Boundary, profit.value(projected)))
            } else {
                pick(&boundary_cands)
            }
        }),
    };
    let (quantity, kind, value) = chosen.expect("boundary candidates are never empty");

    let soc_satisfied = match kind {
        ResponseKind::Boundary => profit.boundary_kkt(quantity),
        _ => profit.curvature(quantity) < 0.0,
    };

    Ok(BestResponse {
        quantity,
        kind,
        profit: value,
        soc_satisfied,
        bracket_found,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CournotOptions {
    /// Weight on the new best response in each update.
    pub damping: f64,
    /// Bound on `max_k |y_k - BR_k| / min(1, cap_k)`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub rule: ResponseRule,
}

impl Default for CournotOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tolerance: 1e-10,
            max_iterations: 10_000,
            rule: ResponseRule::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CournotEquilibrium {
    pub quantities: Vec<f64>,
    pub total: f64,
    pub price: f64,
    /// `max_k |y_k - BR_k(y_-k)|` at the reported point.
    pub residual: f64,
    pub iterations: usize,
    pub soc_satisfied: Vec<bool>,
    pub kinds: Vec<ResponseKind>,
}

impl CournotEquilibrium {
    /// Fractions `z_k = y_k / lambda_k` actually put on the market.
    pub fn fractions(&self, sellers: &[SellerEconomics]) -> Vec<f64> {
        self.quantities
            .iter()
            .zip(sellers)
            .map(|(y, s)| y / s.intensity_cap)
            .collect()
    }
}

fn responses(
    y: &[f64],
    sellers: &[SellerEconomics],
    market: &MarketParams,
    env: &RadioEnv,
    rule: ResponseRule,
) -> Result<Vec<BestResponse>> {
    let total: f64 = y.iter().sum();
    sellers
        .iter()
        .zip(y)
        .map(|(s, yk)| best_response((total - yk).max(0.0), s, market, env, rule))
        .collect()
}

/// Damped sequential best-response iteration from `y_k = cap_k / 2`.
pub fn cournot_equilibrium(
    sellers: &[SellerEconomics],
    market: &MarketParams,
    env: &RadioEnv,
    opts: &CournotOptions,
) -> Result<CournotEquilibrium> {
    if sellers.is_empty() {
        return Err(invalid("at least one seller is required"));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(invalid(format!(
            "damping must lie in (0, 1], got {}",
            opts.damping
        )));
    }
    if !(opts.tolerance > 0.0) {
        return Err(invalid("tolerance must be > 0"));
    }
    market.validate()?;

    let mut y: Vec<f64> = sellers.iter().map(|s| 0.5 * s.intensity_cap).collect();
    let mut history: Vec<f64> = Vec::new();
    let mut last_residual = f64::INFINITY;

    for iteration in 1..=opts.max_iterations {
        for k in 0..sellers.len() {
            let others: f64 = y
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .map(|(_, v)| v)
                .sum();
            let br = best_response(others, &sellers[k], market, env, opts.rule)?;
            y[k] = ((1.0 - opts.damping) * y[k] + opts.damping * br.quantity)
                .clamp(0.0, sellers[k].intensity_cap);
        }

        let brs = responses(&y, sellers, market, env, opts.rule)?;
        let gaps = y.iter().zip(&brs).map(|(yk, br)| (yk - br.quantity).abs());
        let residual = gaps.clone().fold(0.0, f64::max);
        let scaled = gaps
            .zip(sellers)
            .map(|(g, s)| g / s.intensity_cap.min(1.0))
            .fold(0.0, f64::max);
        last_residual = residual;
        history.push(scaled);

        if scaled < opts.tolerance {
            // one undamped step lands exactly on boundary responses
            let mut brs = brs;
            let mut residual = residual;
            let polished: Vec<f64> = brs.iter().map(|b| b.quantity).collect();
            let again = responses(&polished, sellers, market, env, opts.rule)?;
            let polished_residual = polished
                .iter()
                .zip(&again)
                .map(|(yk, br)| (yk - br.quantity).abs())
                .fold(0.0, f64::max);
            if polished_residual <= residual {
                y = polished;
                brs = again;
                residual = polished_residual;
            }
            let total: f64 = y.iter().sum();
            return Ok(CournotEquilibrium {
                total,
                price: market_price(total, market)?,
                residual,
                iterations: iteration,
                soc_satisfied: brs.iter().map(|b| b.soc_satisfied).collect(),
                kinds: brs.iter().map(|b| b.kind).collect(),
                quantities: y,
            });
        }
    }

    // no progress over the last window of sweeps means the iteration cycles
    let window = 100.min(history.len() / 2);
    let oscillating = window > 0 && {
        let split = history.len() - window;
        let recent = history[split..].iter().copied().fold(f64::INFINITY, f64::min);
        let before = history[..split].iter().copied().fold(f64::INFINITY, f64::min);
        recent >= before
    };
    Err(Error::Nonconvergence {
        iterations: opts.max_iterations,
        residual: last_residual,
        oscillating,
    })
}

/// Equilibrium total `sum_k U_k / (K + 1)` when every seller sits on its flat
/// marginal-cost branch.
pub fn linear_equilibrium_total(sellers: &[SellerEconomics], market: &MarketParams, env: &RadioEnv) -> f64 {
    let sum_u: f64 = sellers
        .iter()
        .map(|s| response_coefficients(s, market, env).u)
        .sum();
    sum_u / (sellers.len() as f64 + 1.0)
}

/// Right-hand side of the summed best-response identity,
/// `sum_k (U_k or V_k y_k^{-alpha/2} + W_k) / (K + 1)`, evaluated at an
/// equilibrium. `None` unless every seller sits at a stationary point.
pub fn equilibrium_identity_total(
    eq: &CournotEquilibrium,
    sellers: &[SellerEconomics],
    market: &MarketParams,
    env: &RadioEnv,
) -> Option<f64> {
    let mut sum = 0.0;
    for ((kind, y), s) in eq.kinds.iter().zip(&eq.quantities).zip(sellers) {
        let c = response_coefficients(s, market, env);
        sum += match kind {
            ResponseKind::LinearStationary => c.u,
            ResponseKind::ConvexStationary => c.v * y.powf(-0.5 * env.alpha) + c.w,
            ResponseKind::Boundary => return None,
        };
    }
    Some(sum / (sellers.len() as f64 + 1.0))
}
