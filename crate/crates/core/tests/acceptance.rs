//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs without the libtest harness so the summary is always printed:
//! `cargo test --test acceptance`.

use std::f64::consts::PI;
use std::process::Command as Process;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cellmarket::buyer::{greedy_solve, lp_oracle, KnapsackInstance, SellerOffer};
use cellmarket::ppp::{simulate_coverage, SharingSetup, SimOptions};
use cellmarket::scenario::{parse_scenario, per_km2_to_per_m2, ScenarioConfig};
use cellmarket::seller::{
    cournot_equilibrium, linear_equilibrium_total, response_coefficients, seller_profit, CournotEquilibrium,
    CournotOptions, MarketParams, ResponseKind, ResponseRule, SellerEconomics,
};
use cellmarket::stogeo::{
    areal_power, areal_power_minimizer, beta_prime, branch_threshold, coverage_approx, coverage_exact,
    min_power, qos_gamma, rho, IntensitySplit, PowerBranch, RadioEnv,
};
use cellmarket::sweep::{run_sweep, AxisSpec, Command, SweepOptions};
use cellmarket::Error;

type Outcome = Result<String, String>;
type Criterion = (&'static str, f64, fn() -> Outcome);

const SHIPPED: &str = include_str!("../scenarios/reference.json");

fn shipped() -> ScenarioConfig {
    parse_scenario(SHIPPED, "reference.json").expect("shipped scenario is valid")
}

/// p_max 10 dBm, T 15 dB, alpha 4, noise -120 dBm, circuit power 1 W.
fn reference_env() -> RadioEnv {
    shipped().to_si().unwrap().env
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let lambda0 = 10f64.powf(rng.random_range(-6.0..-3.0));
        let extra = if rng.random_bool(0.25) {
            0.0
        } else {
            10f64.powf(rng.random_range(-6.0..-3.0))
        };
        let threshold = 10f64.powf(rng.random_range(-1.0..2.0));
        let alpha = rng.random_range(2.5..6.0);
        let env = RadioEnv::new(alpha, 0.0, threshold, 0.01, 1.0).unwrap();
        let split = IntensitySplit::new(lambda0, extra).unwrap();
        let exact = coverage_exact(&split, 0.01, &env)
            .map_err(|e| e.to_string())?
            .value;
        let bound = 1.0 / beta_prime(&split, env.beta().unwrap()).unwrap();
        worst = worst.max((exact - bound).abs());
    }
    ensure(worst <= 1e-9, || format!("max |P_c - 1/beta'| = {worst:e}"))?;
    Ok(format!("max |P_c - 1/beta'| = {worst:.1e} over 20 points"))
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0f64;
    for t in [0.1f64, 1.0, 10.0, 31.6228] {
        let want = t.sqrt() * (PI / 2.0 - (1.0 / t.sqrt()).atan());
        let got = rho(t, 4.0).map_err(|e| e.to_string())?;
        worst = worst.max((got - want).abs());
    }
    let quarter = (rho(1.0, 4.0).unwrap() - PI / 4.0).abs();
    ensure(worst <= 1e-9 && quarter <= 1e-9, || {
        format!("max error {worst:e}, rho(1,4) error {quarter:e}")
    })?;
    Ok(format!(
        "max |rho - closed form| = {worst:.1e}, rho(1,4) - pi/4 = {quarter:.1e}"
    ))
}

fn criterion_3() -> Outcome {
    let env = reference_env();
    let lambda0 = per_km2_to_per_m2(20.0);
    let mut parts = Vec::new();
    for extra_km2 in [0.0, 20.0, 80.0] {
        let split = IntensitySplit::new(lambda0, per_km2_to_per_m2(extra_km2)).unwrap();
        let exact = coverage_exact(&split, env.p_max, &env).unwrap().value;
        let mc = simulate_coverage(
            &SharingSetup::from_split(&split),
            env.p_max,
            &env,
            &SimOptions::new(100_000, 7),
        )
        .map_err(|e| e.to_string())?;
        let gap = (mc.estimate - exact).abs();
        ensure(gap <= 0.015, || {
            format!("extra {extra_km2}: empirical {} vs exact {exact}", mc.estimate)
        })?;
        parts.push(format!("{extra_km2}/km2 {:.4} vs {exact:.4}", mc.estimate));
    }
    Ok(parts.join(", "))
}

fn criterion_4() -> Outcome {
    let si = shipped().to_si().unwrap();
    let env = si.env;
    let inv_beta = 1.0 / env.beta().unwrap();
    ensure((inv_beta - 0.1131).abs() < 5e-5, || {
        format!("1/beta = {inv_beta}")
    })?;
    let lambda0 = per_km2_to_per_m2(1e4);
    let alone = coverage_exact(&IntensitySplit::no_sharing(lambda0).unwrap(), env.p_max, &env)
        .unwrap()
        .value;
    let shared = coverage_exact(
        &IntensitySplit::new(lambda0, si.seller_intensity()).unwrap(),
        env.p_max,
        &env,
    )
    .unwrap()
    .value;
    ensure((alone - inv_beta).abs() <= 0.01, || {
        format!("no sharing {alone} vs 1/beta {inv_beta}")
    })?;
    ensure(shared > inv_beta, || {
        format!("sharing {shared} does not exceed 1/beta {inv_beta}")
    })?;
    Ok(format!(
        "no sharing {alone:.5}, sharing {shared:.5}, 1/beta {inv_beta:.5}"
    ))
}

fn criterion_5() -> Outcome {
    let env = reference_env();
    let beta = env.beta().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let split = IntensitySplit::new(
            10f64.powf(rng.random_range(-6.0..-3.0)),
            rng.random_range(0.0..1e-3),
        )
        .unwrap();
        let bp = beta_prime(&split, beta).unwrap();
        let target = rng.random_range(0.02..0.98) / bp;
        let eps = 1.0 - target;
        let p = min_power(&split, &env, eps).map_err(|e| e.to_string())?;
        let back = coverage_approx(&split, p, &env).unwrap().value;
        worst = worst.max((back - target).abs() / target);

        let over = (1.0 / bp) * rng.random_range(1.0 + 1e-9..1.5);
        if over < 1.0 {
            let got = min_power(&split, &env, 1.0 - over);
            ensure(matches!(got, Err(Error::InfeasibleQos { .. })), || {
                format!("target {over} above ceiling {} was accepted", 1.0 / bp)
            })?;
        }
        let at_ceiling = min_power(&split, &env, 1.0 - 1.0 / bp * (1.0 + 1e-12));
        ensure(matches!(at_ceiling, Err(Error::InfeasibleQos { .. })), || {
            "ceiling accepted".into()
        })?;
    }
    ensure(worst <= 1e-9, || format!("max relative error {worst:e}"))?;
    Ok(format!(
        "max relative error {worst:.1e} over 50 points, infeasible targets rejected"
    ))
}

fn criterion_6() -> Outcome {
    let si = shipped().to_si().unwrap();
    let c = si.sellers[0].economics(&si.env).unwrap().qos_constant;
    let mut checked = Vec::new();
    // circuit power of the shipped scenario, then one small enough for an interior minimum
    for env in [
        si.env,
        RadioEnv {
            p_circuit: 1e-3,
            ..si.env
        },
    ] {
        let th = branch_threshold(&env, c).unwrap();
        let at = areal_power(th, &env, c).unwrap();
        let linear = th * (env.p_max + env.p_circuit);
        let jump = (at.s_k - linear).abs() / linear;
        ensure(at.branch == PowerBranch::Convex, || {
            "threshold not on convex branch".into()
        })?;
        ensure(jump <= 1e-12, || format!("discontinuity {jump:e} at lambda_th"))?;
        let below = areal_power(th * (1.0 - 1e-15), &env, c).unwrap();
        ensure(below.branch == PowerBranch::Linear, || {
            "point below threshold not linear".into()
        })?;

        let grid: Vec<f64> = (0..1000).map(|i| th * (1.0 + 1e-3) * 1.005f64.powi(i)).collect();
        let s: Vec<f64> = grid
            .iter()
            .map(|&l| areal_power(l, &env, c).unwrap().s_k)
            .collect();
        // geometric grid: compare slopes of neighbouring chords
        for i in 1..grid.len() - 1 {
            let left = (s[i] - s[i - 1]) / (grid[i] - grid[i - 1]);
            let right = (s[i + 1] - s[i]) / (grid[i + 1] - grid[i]);
            ensure(right > left, || {
                format!("second difference not positive at {}", grid[i])
            })?;
        }
        let m = areal_power_minimizer(&env, c).unwrap();
        let s_min = areal_power(m, &env, c).unwrap().s_k;
        let beaten = s.iter().filter(|&&v| v < s_min).count();
        ensure(beaten == 0, || {
            format!("{beaten} grid points below the minimiser")
        })?;
        checked.push(format!("min at {:.3} lambda_th", m / th));
    }
    Ok(format!(
        "continuous at lambda_th, convex on 1000 points, {}",
        checked.join("; ")
    ))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=6);
        let offers: Vec<SellerOffer> = (0..n)
            .map(|k| SellerOffer {
                seller_id: k + 1,
                intensity: rng.random_range(0.1..5.0) * 1e-6,
                // coarse prices make ties common
                ask_price: rng.random_range(0..8) as f64 * 0.5,
            })
            .collect();
        let supply: f64 = offers.iter().map(|o| o.intensity).sum();
        let capacity = supply * rng.random_range(0.0..1.2);
        let inst = KnapsackInstance::new(offers, capacity).unwrap();
        let greedy = greedy_solve(&inst);
        let lp = lp_oracle(&inst).map_err(|e| e.to_string())?;
        worst = worst.max((greedy.total_cost - lp.total_cost).abs());
    }
    ensure(worst <= 1e-9, || format!("greedy vs LP gap {worst:e}"))?;

    let hand = KnapsackInstance::new(
        [(2.0, 4.0), (1.0, 1.0), (3.0, 9.0)]
            .iter()
            .enumerate()
            .map(|(k, &(l, q))| SellerOffer {
                seller_id: k + 1,
                intensity: per_km2_to_per_m2(l),
                ask_price: q,
            })
            .collect(),
        per_km2_to_per_m2(4.0),
    )
    .unwrap();
    let g = greedy_solve(&hand);
    let lp = lp_oracle(&hand).unwrap();
    let want = [1.0, 1.0, 1.0 / 3.0];
    ensure(
        (g.total_cost - 8.0).abs() < 1e-9 && (lp.total_cost - 8.0).abs() < 1e-9,
        || format!("hand instance cost {} (LP {})", g.total_cost, lp.total_cost),
    )?;
    ensure(
        g.fractions.iter().zip(want).all(|(x, w)| (x - w).abs() < 1e-9),
        || format!("hand instance fractions {:?}", g.fractions),
    )?;
    Ok(format!(
        "max gap {worst:.1e} over 1000 instances; hand instance cost 8, x = (1, 1, 1/3)"
    ))
}

fn criterion_8() -> Outcome {
    let cfg = shipped();
    let si = cfg.to_si().unwrap();
    let env = si.env;
    // intensity needed per unit of (1 - eps)/eps
    let k0 = qos_gamma(env.p_max, &env).unwrap() - si.lambda0 * (1.0 - env.beta().unwrap());
    let eps_star = k0 / (k0 + si.lambda0 + si.seller_intensity());
    let eps_zero = k0 / (k0 + si.lambda0);

    let axis = AxisSpec {
        name: "epsilon".into(),
        start: eps_star,
        stop: 0.99,
        steps: 200,
        log: false,
    };
    let r = run_sweep(&cfg, Command::Knapsack, Some(&axis), &SweepOptions::default())
        .map_err(|e| e.to_string())?;
    let total: Vec<f64> = r
        .series("total_fraction")
        .unwrap()
        .values
        .iter()
        .map(|v| v.unwrap())
        .collect();
    let capacity: Vec<f64> = r
        .series("capacity_per_km2")
        .unwrap()
        .values
        .iter()
        .map(|v| v.unwrap())
        .collect();
    ensure(total.windows(2).all(|w| w[1] <= w[0] + 1e-12), || {
        "sum of x increases with epsilon".into()
    })?;
    let ids: Vec<String> = cfg.sellers.iter().map(|s| format!("x_seller{}", s.id)).collect();
    for id in &ids {
        let x0 = r.series(id).unwrap().values[0].unwrap();
        ensure((x0 - 1.0).abs() < 1e-9, || {
            format!("{id} = {x0} at the smallest feasible epsilon")
        })?;
    }
    for (i, &cap) in capacity.iter().enumerate() {
        if cap <= 0.0 {
            ensure(total[i] == 0.0, || {
                format!("sum of x = {} with zero capacity", total[i])
            })?;
        }
    }
    ensure(capacity.iter().any(|&c| c <= 0.0), || {
        "sweep never reaches zero capacity".into()
    })?;
    Ok(format!(
        "non-increasing over {} points, all ones at eps = {eps_star:.4}, zero from eps = {eps_zero:.4}",
        total.len()
    ))
}

/// Toy units with a wide flat branch: p_max 10 W, p_c 5 W, alpha 4.
fn toy_env() -> RadioEnv {
    RadioEnv::new(4.0, 1e-3, 1.0, 10.0, 5.0).unwrap()
}

fn check_equilibrium(
    eq: &CournotEquilibrium,
    market: &MarketParams,
    sellers: &[SellerEconomics],
) -> Result<(), String> {
    ensure(eq.residual < 1e-10, || format!("residual {:e}", eq.residual))?;
    ensure(
        eq.price == market.base_price + market.marginal_price * eq.total,
        || "price identity".into(),
    )?;
    ensure(
        eq.quantities
            .iter()
            .zip(sellers)
            .all(|(y, s)| *y >= 0.0 && *y <= s.intensity_cap),
        || "quantity outside [0, cap]".into(),
    )
}

fn criterion_9() -> Outcome {
    let env = toy_env();
    let stationary = CournotOptions {
        rule: ResponseRule::Stationary,
        ..Default::default()
    };
    let mut reported = 0;

    // (a) symmetric sellers on the flat branch
    let market = MarketParams {
        base_price: 25.0,
        marginal_price: 0.25,
    };
    for k in 1..=6 {
        let sellers: Vec<SellerEconomics> = (0..k)
            .map(|i| SellerEconomics {
                seller_id: i + 1,
                intensity_cap: 12.0,
                power_price: 2.0,
                fixed_cost: 1.0,
                qos_constant: 1e4,
            })
            .collect();
        let eq = cournot_equilibrium(&sellers, &market, &env, &stationary).map_err(|e| e.to_string())?;
        let u = response_coefficients(&sellers[0], &market, &env).u;
        let want = k as f64 * u / (k as f64 + 1.0);
        ensure((eq.total - want).abs() <= 1e-9 * want, || {
            format!("K = {k}: total {} vs {want}", eq.total)
        })?;
        ensure(
            (linear_equilibrium_total(&sellers, &market, &env) - want).abs() <= 1e-12 * want,
            || "closed form".into(),
        )?;
        ensure(
            eq.kinds.iter().all(|k| *k == ResponseKind::LinearStationary),
            || "branch".into(),
        )?;
        check_equilibrium(&eq, &market, &sellers)?;
        reported += 1;
    }

    // (c) seller 1 capped on the flat branch, seller 2 on the convex branch
    let market = MarketParams {
        base_price: 0.5,
        marginal_price: 0.25,
    };
    let sellers = [
        SellerEconomics {
            seller_id: 1,
            intensity_cap: 2.0,
            power_price: 0.02,
            fixed_cost: 1.0,
            qos_constant: 1e4,
        },
        SellerEconomics {
            seller_id: 2,
            intensity_cap: 6.0,
            power_price: 0.05,
            fixed_cost: 1.0,
            qos_constant: 20.0,
        },
    ];
    ensure(sellers[0].intensity_cap < sellers[0].lambda_th(&env), || {
        "seller 1 not flat".into()
    })?;
    ensure(sellers[1].intensity_cap > sellers[1].lambda_th(&env), || {
        "seller 2 not convex".into()
    })?;
    let eq = cournot_equilibrium(&sellers, &market, &env, &CournotOptions::default())
        .map_err(|e| e.to_string())?;
    check_equilibrium(&eq, &market, &sellers)?;
    reported += 1;
    ensure(eq.quantities[1] >= sellers[1].lambda_th(&env), || {
        "seller 2 left the convex branch".into()
    })?;

    let n = 500;
    let grid = |cap: f64| -> Vec<f64> { (0..n).map(|i| cap * i as f64 / (n - 1) as f64).collect() };
    let (g1, g2) = (grid(sellers[0].intensity_cap), grid(sellers[1].intensity_cap));
    let profit = |k: usize, y: f64, other: f64| seller_profit(y, other, &sellers[k], &market, &env).unwrap();
    // unilateral deviations from the reported equilibrium
    let mut max_gain = f64::NEG_INFINITY;
    for (k, g) in [(0, &g1), (1, &g2)] {
        let other = eq.quantities[1 - k];
        let base = profit(k, eq.quantities[k], other);
        for &y in g.iter() {
            max_gain = max_gain.max(profit(k, y, other) - base);
        }
    }
    // grid pairs where both sellers play a best grid response
    let best_on_grid = |k: usize, other: f64, g: &[f64]| -> Vec<usize> {
        let v: Vec<f64> = g.iter().map(|&y| profit(k, y, other)).collect();
        let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (0..g.len()).filter(|&i| v[i] >= top - 1e-12).collect()
    };
    let br1: Vec<Vec<usize>> = g2.iter().map(|&y2| best_on_grid(0, y2, &g1)).collect();
    let mut grid_equilibria = Vec::new();
    for (j, &y2) in g2.iter().enumerate() {
        for &i in &br1[j] {
            if best_on_grid(1, g1[i], &g2).contains(&j) {
                grid_equilibria.push((g1[i], y2));
            }
        }
    }
    let (h1, h2) = (g1[1], g2[1]);
    ensure(max_gain <= 1e-12, || {
        format!("profitable deviation of {max_gain:e}")
    })?;
    ensure(
        grid_equilibria
            .iter()
            .any(|&(a, b)| (a - eq.quantities[0]).abs() <= h1 && (b - eq.quantities[1]).abs() <= h2),
        || {
            format!(
                "no grid equilibrium near {:?}: {grid_equilibria:?}",
                eq.quantities
            )
        },
    )?;

    // (b) and (d) on the shipped scenario under both rules
    let si = shipped().to_si().unwrap();
    let econ = si.economics().unwrap();
    for rule in [ResponseRule::ProfitMax, ResponseRule::Stationary] {
        let opts = CournotOptions {
            rule,
            ..Default::default()
        };
        let eq = cournot_equilibrium(&econ, &si.market, &si.env, &opts).map_err(|e| e.to_string())?;
        check_equilibrium(&eq, &si.market, &econ)?;
        reported += 1;
    }

    Ok(format!(
        "K U/(K+1) for K = 1..6; mixed equilibrium {:?} has no grid deviation (best gain {max_gain:.1e}); \
         residual and price identity hold at all {reported} equilibria",
        eq.quantities
    ))
}

fn criterion_10() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_cellmarket");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scenario = dir.path().join("scenario.json");
    std::fs::write(&scenario, SHIPPED).unwrap();
    let commands = [
        "coverage",
        "tradeoff",
        "areal-power",
        "knapsack",
        "cournot",
        "simulate",
    ];
    let run = |tag: &str, threads: &str| -> Result<(), String> {
        for c in commands {
            let status = Process::new(bin)
                .arg(c)
                .arg("--scenario")
                .arg(&scenario)
                .arg("--out")
                .arg(dir.path().join(tag))
                .args(["--trials", "20000", "--threads", threads])
                .stderr(std::process::Stdio::null())
                .status()
                .map_err(|e| e.to_string())?;
            ensure(status.code() == Some(0), || format!("{c} exited with {status}"))?;
        }
        Ok(())
    };
    run("serial", "1")?;
    run("parallel", "4")?;
    for c in commands {
        let a = std::fs::read(dir.path().join("serial").join(format!("{c}.csv"))).unwrap();
        let b = std::fs::read(dir.path().join("parallel").join(format!("{c}.csv"))).unwrap();
        ensure(a == b, || format!("{c}.csv differs between 1 and 4 threads"))?;
        ensure(!a.is_empty(), || format!("{c}.csv is empty"))?;
    }
    Ok(format!(
        "{} sweeps byte-identical under 1 and 4 threads",
        commands.len()
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("interference-limited closed form", 1.0, criterion_1),
        ("rho closed form at alpha = 4", 1.0, criterion_2),
        ("Monte Carlo agrees with exact coverage", 120.0, criterion_3),
        ("saturation at 1/beta", 10.0, criterion_4),
        ("QoS round trip through min_power", 1.0, criterion_5),
        ("areal power shape", 1.0, criterion_6),
        ("knapsack optimality", 10.0, criterion_7),
        ("purchased fraction versus epsilon", 5.0, criterion_8),
        ("Cournot equilibrium", 30.0, criterion_9),
        ("deterministic CLI output", 60.0, criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        let timing = if secs <= budget {
            format!("{secs:.2} s")
        } else {
            format!("{secs:.2} s, over the {budget} s budget")
        };
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} ({timing})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} ({timing})", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
