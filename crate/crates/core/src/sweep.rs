//! Parameter sweeps behind the command-line tool.
//!
//! A sweep varies one scenario parameter along an axis, evaluates a command
//! at every point and returns one series per output quantity. Points are
//! evaluated in parallel but always reported in axis order, and failures are
//! recorded against their point instead of aborting the sweep.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::buyer::{build_instance, greedy_solve};
use crate::error::{invalid, Error, Result};
use crate::ppp::{simulate_coverage, SharingSetup};
use crate::scenario::{per_km2_to_per_m2, per_m2_to_per_km2, watts_to_dbm, Scenario, ScenarioConfig};
use crate::seller::{cournot_equilibrium, CournotOptions, ResponseRule};
use crate::stogeo::{
    areal_power, areal_power_minimizer, branch_threshold, cell_radius, coverage_approx, coverage_exact,
    min_power, power_law_constant, saturation_bound, IntensitySplit, PowerBranch,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Coverage,
    Tradeoff,
    ArealPower,
    Knapsack,
    Cournot,
    Simulate,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Coverage,
        Command::Tradeoff,
        Command::ArealPower,
        Command::Knapsack,
        Command::Cournot,
        Command::Simulate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Coverage => "coverage",
            Command::Tradeoff => "tradeoff",
            Command::ArealPower => "areal-power",
            Command::Knapsack => "knapsack",
            Command::Cournot => "cournot",
            Command::Simulate => "simulate",
        }
    }

    /// Axis names this command accepts; the first one is the default.
    pub fn axes(self) -> &'static [&'static str] {
        match self {
            Command::Coverage => &[
                "lambda0",
                "lambda_extra",
                "threshold_db",
                "p_max_dbm",
                "noise_dbm",
                "alpha",
            ],
            Command::Tradeoff => &[
                "lambda_extra",
                "lambda0",
                "epsilon",
                "threshold_db",
                "noise_dbm",
                "alpha",
            ],
            Command::ArealPower => &["lambda"],
            Command::Knapsack => &["epsilon", "lambda0", "threshold_db", "p_max_dbm", "noise_dbm"],
            Command::Cournot => &["theta", "eta", "p_circuit_w"],
            Command::Simulate => &["lambda_extra", "lambda0", "threshold_db", "noise_dbm"],
        }
    }

    pub fn default_axis(self) -> AxisSpec {
        let spec = match self {
            Command::Coverage => "lambda0=1:10000:41:log",
            Command::Tradeoff => "lambda_extra=0:200:41",
            Command::ArealPower => "lambda=0.01:2:200",
            Command::Knapsack => "epsilon=0.5:0.95:46",
            Command::Cournot => "theta=0.5:2:16",
            Command::Simulate => "lambda_extra=0:80:5",
        };
        spec.parse().expect("built-in axis specs parse")
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| invalid(format!("unknown command `{s}`")))
    }
}

/// `name=start:stop:steps`, optionally suffixed `:log` for geometric spacing.
///
/// Intensity axes are in BS/km², powers in dBm and thresholds in dB, as in
/// scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub name: String,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
    pub log: bool,
}

impl AxisSpec {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.stop
                } else if self.log {
                    let (a, b) = (self.start.ln(), self.stop.ln());
                    (a + (b - a) * i as f64 / last).exp()
                } else {
                    self.start + (self.stop - self.start) * i as f64 / last
                }
            })
            .collect()
    }
}

impl fmt::Display for AxisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}:{}:{}", self.name, self.start, self.stop, self.steps)?;
        if self.log {
            f.write_str(":log")?;
        }
        Ok(())
    }
}

impl FromStr for AxisSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            invalid(format!(
                "axis `{s}` is not of the form name=start:stop:steps[:log]"
            ))
        };
        let (name, range) = s.split_once('=').ok_or_else(bad)?;
        let parts: Vec<&str> = range.split(':').collect();
        let log = match parts.len() {
            3 => false,
            4 if parts[3] == "log" => true,
            _ => return Err(bad()),
        };
        let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
        let name = name.trim();
        if name.is_empty() || steps == 0 || !start.is_finite() || !stop.is_finite() {
            return Err(bad());
        }
        if log && !(start > 0.0 && stop > 0.0) {
            return Err(invalid(format!("log axis `{s}` needs positive bounds")));
        }
        Ok(Self {
            name: name.to_string(),
            start,
            stop,
            steps,
            log,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// Overrides the scenario's seed.
    pub seed: Option<u64>,
    /// Overrides the scenario's trial count.
    pub trials: Option<u64>,
    pub tolerance: f64,
    pub damping: f64,
    pub max_iterations: usize,
    pub rule: ResponseRule,
}

impl Default for SweepOptions {
    fn default() -> Self {
        let c = CournotOptions::default();
        Self {
            seed: None,
            trials: None,
            tolerance: c.tolerance,
            damping: c.damping,
            max_iterations: c.max_iterations,
            rule: c.rule,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointError {
    pub message: String,
    pub nonconvergence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub command: Command,
    pub axis: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub trials: u64,
    pub tolerance: f64,
    pub damping: f64,
    pub max_iterations: usize,
    pub rule: ResponseRule,
    pub tool_version: String,
    /// Point-independent quantities such as branch thresholds.
    pub extras: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis_name: String,
    pub axis_values: Vec<f64>,
    pub series: Vec<Series>,
    pub errors: Vec<Option<PointError>>,
    pub metadata: SweepMetadata,
}

fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

impl SweepResult {
    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn has_nonconvergence(&self) -> bool {
        self.errors.iter().flatten().any(|e| e.nonconvergence)
    }

    /// Header row, then one row per axis point: axis value, series values,
    /// error message and scenario hash.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let mut header = vec![self.axis_name.clone()];
        header.extend(self.series.iter().map(|s| s.name.clone()));
        header.push("error".into());
        header.push("scenario_hash".into());
        w.write_record(&header).expect("in-memory write");
        for (i, x) in self.axis_values.iter().enumerate() {
            let mut row = vec![fmt_num(*x)];
            row.extend(
                self.series
                    .iter()
                    .map(|s| s.values[i].map(fmt_num).unwrap_or_default()),
            );
            row.push(
                self.errors[i]
                    .as_ref()
                    .map(|e| e.message.clone())
                    .unwrap_or_default(),
            );
            row.push(self.metadata.scenario_hash.clone());
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep result serialises")
    }
}

/// Per-point values of quantities that are not scenario fields.
#[derive(Default, Clone, Copy)]
struct PointVars {
    /// BS per m² bought on top of the buyer's own network.
    lambda_extra: Option<f64>,
    /// BS per m² of a seller network on the areal-power axis.
    lambda: Option<f64>,
}

fn apply_axis(cfg: &mut ScenarioConfig, vars: &mut PointVars, name: &str, v: f64) {
    match name {
        "lambda0" => cfg.buyer.lambda0_per_km2 = v,
        "epsilon" => cfg.buyer.epsilon = v,
        "threshold_db" => {
            cfg.env.threshold_db = v;
            for s in &mut cfg.sellers {
                s.threshold_db = v;
            }
        }
        "p_max_dbm" => cfg.env.p_max_dbm = v,
        "noise_dbm" => cfg.env.noise_dbm = v,
        "alpha" => cfg.env.alpha = v,
        "p_circuit_w" => cfg.env.p_circuit_w = v,
        "theta" => cfg.market.theta = v,
        "eta" => cfg.market.eta_per_km2 = v,
        "lambda_extra" => vars.lambda_extra = Some(per_km2_to_per_m2(v)),
        "lambda" => vars.lambda = Some(per_km2_to_per_m2(v)),
        _ => unreachable!("axis names are checked before evaluation"),
    }
}

/// Values of one point; failed cells stay empty and their errors are collected.
struct Row {
    values: Vec<Option<f64>>,
    errors: Vec<(String, Error)>,
}

impl Row {
    fn new() -> Self {
        Self {
            values: Vec::new(),
            errors: Vec::new(),
        }
    }

    fn push(&mut self, name: &str, r: Result<f64>) {
        match r {
            Ok(v) => self.values.push(Some(v)),
            Err(e) => {
                self.values.push(None);
                self.errors.push((name.to_string(), e));
            }
        }
    }

    /// Fails every one of `names` with the same error.
    fn fail_all(&mut self, names: &[String], e: &Error) {
        for n in names {
            self.push(n, Err(e.clone()));
        }
    }

    fn into_point(self) -> (Vec<Option<f64>>, Option<PointError>) {
        if self.errors.is_empty() {
            return (self.values, None);
        }
        let nonconvergence = self.errors.iter().any(|(_, e)| e.is_nonconvergence());
        // cells failing for the same reason are reported once
        let mut grouped: Vec<(Vec<String>, String)> = Vec::new();
        for (name, e) in self.errors {
            let msg = e.to_string();
            match grouped.iter_mut().find(|(_, m)| *m == msg) {
                Some((names, _)) => names.push(name),
                None => grouped.push((vec![name], msg)),
            }
        }
        let message = grouped
            .into_iter()
            .map(|(names, msg)| format!("{}: {msg}", names.join("/")))
            .collect::<Vec<_>>()
            .join("; ");
        (
            self.values,
            Some(PointError {
                message,
                nonconvergence,
            }),
        )
    }
}

fn bool_num(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn series_names(command: Command, cfg: &ScenarioConfig) -> Vec<String> {
    let per_seller = |prefixes: &[&str]| -> Vec<String> {
        prefixes
            .iter()
            .flat_map(|p| cfg.sellers.iter().map(move |s| format!("{p}_seller{}", s.id)))
            .collect()
    };
    let fixed = |names: &[&str]| names.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    match command {
        Command::Coverage => fixed(&[
            "exact_no_sharing",
            "approx_no_sharing",
            "exact_sharing",
            "approx_sharing",
            "inv_beta",
            "saturation_sharing",
        ]),
        Command::Tradeoff => fixed(&[
            "lambda_extra_per_km2",
            "beta_prime",
            "power_law_constant",
            "min_power_w",
            "min_power_dbm",
            "min_power_w_no_sharing",
            "cell_radius_m_no_sharing",
        ]),
        Command::ArealPower => per_seller(&["s_w_per_m2", "convex_branch"]),
        Command::Knapsack => {
            let mut v = fixed(&["capacity_per_km2", "total_fraction", "total_cost", "feasible"]);
            v.extend(per_seller(&["x"]));
            v
        }
        Command::Cournot => {
            let mut v = per_seller(&["y_per_km2", "z", "soc"]);
            v.extend(fixed(&["total_per_km2", "price", "residual", "iterations"]));
            v
        }
        Command::Simulate => fixed(&[
            "lambda_extra_per_km2",
            "empirical",
            "ci95_halfwidth",
            "successes",
            "exact",
            "approx",
        ]),
    }
}

fn eval_point(
    command: Command,
    si: &Scenario,
    vars: PointVars,
    names: &[String],
    opts: &SweepOptions,
) -> Row {
    let mut row = Row::new();
    let env = si.env;
    let lambda_extra = vars.lambda_extra.unwrap_or_else(|| si.seller_intensity());
    let shared = IntensitySplit::new(si.lambda0, lambda_extra);
    let alone = IntensitySplit::no_sharing(si.lambda0);
    let mut cells = names.iter();
    let mut next = |row: &mut Row, r: Result<f64>| {
        let name = cells.next().expect("one value per series");
        row.push(name, r);
    };

    match command {
        Command::Coverage => {
            let p = env.p_max;
            next(
                &mut row,
                alone
                    .clone()
                    .and_then(|s| coverage_exact(&s, p, &env))
                    .map(|c| c.value),
            );
            next(
                &mut row,
                alone
                    .clone()
                    .and_then(|s| coverage_approx(&s, p, &env))
                    .map(|c| c.value),
            );
            next(
                &mut row,
                shared
                    .clone()
                    .and_then(|s| coverage_exact(&s, p, &env))
                    .map(|c| c.value),
            );
            next(
                &mut row,
                shared
                    .clone()
                    .and_then(|s| coverage_approx(&s, p, &env))
                    .map(|c| c.value),
            );
            next(&mut row, env.beta().map(|b| 1.0 / b));
            next(&mut row, shared.clone().and_then(|s| saturation_bound(&s, &env)));
        }
        Command::Tradeoff => {
            let eps = si.epsilon;
            let bp = shared
                .clone()
                .and_then(|s| env.beta().and_then(|b| crate::stogeo::beta_prime(&s, b)));
            next(&mut row, Ok(per_m2_to_per_km2(lambda_extra)));
            next(&mut row, bp.clone());
            next(&mut row, bp.and_then(|b| power_law_constant(b, eps, &env)));
            let p = shared.clone().and_then(|s| min_power(&s, &env, eps));
            next(&mut row, p.clone());
            next(&mut row, p.map(watts_to_dbm));
            next(&mut row, alone.clone().and_then(|s| min_power(&s, &env, eps)));
            next(&mut row, cell_radius(si.lambda0, &env, eps));
        }
        Command::ArealPower => {
            let lambda = vars.lambda.unwrap_or(0.0);
            let curve: Vec<Result<_>> = si
                .sellers
                .iter()
                .map(|s| {
                    s.economics(&env)
                        .and_then(|e| areal_power(lambda, &env, e.qos_constant))
                })
                .collect();
            for c in &curve {
                next(&mut row, c.clone().map(|c| c.s_k));
            }
            for c in &curve {
                next(
                    &mut row,
                    c.clone().map(|c| bool_num(c.branch == PowerBranch::Convex)),
                );
            }
        }
        Command::Knapsack => match build_instance(si.lambda0, &env, env.p_max, si.epsilon, si.offers()) {
            Ok(inst) => {
                let sol = greedy_solve(&inst);
                next(&mut row, Ok(per_m2_to_per_km2(inst.capacity)));
                next(&mut row, Ok(sol.total_fraction()));
                next(&mut row, Ok(sol.total_cost));
                next(&mut row, Ok(bool_num(sol.feasible)));
                for x in sol.fractions {
                    next(&mut row, Ok(x));
                }
            }
            Err(e) => row.fail_all(names, &e),
        },
        Command::Cournot => {
            let copts = CournotOptions {
                damping: opts.damping,
                tolerance: opts.tolerance,
                max_iterations: opts.max_iterations,
                rule: opts.rule,
            };
            let solved = si
                .economics()
                .and_then(|econ| cournot_equilibrium(&econ, &si.market, &env, &copts).map(|eq| (econ, eq)));
            match solved {
                Ok((econ, eq)) => {
                    for y in &eq.quantities {
                        next(&mut row, Ok(per_m2_to_per_km2(*y)));
                    }
                    for z in eq.fractions(&econ) {
                        next(&mut row, Ok(z));
                    }
                    for soc in &eq.soc_satisfied {
                        next(&mut row, Ok(bool_num(*soc)));
                    }
                    next(&mut row, Ok(per_m2_to_per_km2(eq.total)));
                    next(&mut row, Ok(eq.price));
                    next(&mut row, Ok(eq.residual));
                    next(&mut row, Ok(eq.iterations as f64));
                }
                Err(e) => row.fail_all(names, &e),
            }
        }
        Command::Simulate => {
            let p = env.p_max;
            let trials = opts.trials.unwrap_or(si.sim.trials);
            let seed = opts.seed.unwrap_or(si.sim.seed);
            next(&mut row, Ok(per_m2_to_per_km2(lambda_extra)));
            let sim = shared.clone().and_then(|s| {
                let setup = SharingSetup::from_split(&s);
                let mut sim_opts = si.sim;
                sim_opts.trials = trials;
                sim_opts.seed = seed;
                simulate_coverage(&setup, p, &env, &sim_opts)
            });
            next(&mut row, sim.clone().map(|e| e.estimate));
            next(&mut row, sim.clone().map(|e| e.ci95_halfwidth));
            next(&mut row, sim.map(|e| e.successes as f64));
            next(
                &mut row,
                shared
                    .clone()
                    .and_then(|s| coverage_exact(&s, p, &env))
                    .map(|c| c.value),
            );
            next(
                &mut row,
                shared
                    .clone()
                    .and_then(|s| coverage_approx(&s, p, &env))
                    .map(|c| c.value),
            );
        }
    }
    row
}

/// Per-seller quantities that do not depend on the axis point.
fn extras(command: Command, si: &Scenario) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    if matches!(command, Command::ArealPower | Command::Cournot) {
        for s in &si.sellers {
            if let Ok(e) = s.economics(&si.env) {
                out.insert(format!("qos_constant_seller{}", s.id), e.qos_constant);
                if let Ok(th) = branch_threshold(&si.env, e.qos_constant) {
                    out.insert(format!("lambda_th_per_km2_seller{}", s.id), per_m2_to_per_km2(th));
                }
                if let Ok(m) = areal_power_minimizer(&si.env, e.qos_constant) {
                    out.insert(format!("lambda_min_per_km2_seller{}", s.id), per_m2_to_per_km2(m));
                }
            }
        }
    }
    out
}

/// Evaluates `command` at every point of `axis` (the command's default axis
/// when `None`).
pub fn run_sweep(
    cfg: &ScenarioConfig,
    command: Command,
    axis: Option<&AxisSpec>,
    opts: &SweepOptions,
) -> Result<SweepResult> {
    cfg.validate()?;
    let axis = axis.cloned().unwrap_or_else(|| command.default_axis());
    if !command.axes().contains(&axis.name.as_str()) {
        return Err(invalid(format!(
            "command `{command}` does not sweep `{}`; choose one of {}",
            axis.name,
            command.axes().join(", ")
        )));
    }
    if !(opts.tolerance > 0.0) {
        return Err(invalid("tolerance must be > 0"));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(invalid("damping must lie in (0, 1]"));
    }
    if opts.trials == Some(0) {
        return Err(invalid("trials must be >= 1"));
    }
    if matches!(
        command,
        Command::Knapsack | Command::Cournot | Command::ArealPower
    ) && cfg.sellers.is_empty()
    {
        return Err(invalid(format!("command `{command}` needs at least one seller")));
    }

    let base_si = cfg.to_si()?;
    let names = series_names(command, cfg);
    let values = axis.values();
    let points: Vec<(Vec<Option<f64>>, Option<PointError>)> = values
        .par_iter()
        .map(|&v| {
            let mut point_cfg = cfg.clone();
            let mut vars = PointVars::default();
            apply_axis(&mut point_cfg, &mut vars, &axis.name, v);
            match point_cfg.to_si() {
                Ok(si) => eval_point(command, &si, vars, &names, opts).into_point(),
                Err(e) => {
                    let mut row = Row::new();
                    row.fail_all(&names, &e);
                    row.into_point()
                }
            }
        })
        .collect();

    let mut series: Vec<Series> = names
        .iter()
        .map(|n| Series {
            name: n.clone(),
            values: Vec::with_capacity(values.len()),
        })
        .collect();
    let mut errors = Vec::with_capacity(values.len());
    for (vals, err) in points {
        for (s, v) in series.iter_mut().zip(vals) {
            s.values.push(v);
        }
        errors.push(err);
    }

    Ok(SweepResult {
        axis_name: axis.name.clone(),
        axis_values: values,
        series,
        errors,
        metadata: SweepMetadata {
            command,
            axis: axis.to_string(),
            scenario_hash: cfg.hash(),
            seed: opts.seed.unwrap_or(cfg.sim.seed),
            trials: opts.trials.unwrap_or(cfg.sim.trials),
            tolerance: opts.tolerance,
            damping: opts.damping,
            max_iterations: opts.max_iterations,
            rule: opts.rule,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            extras: extras(command, &base_si),
        },
    })
}
