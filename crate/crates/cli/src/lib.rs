//! Command implementations behind the `lossnet` binary.
//!
//! Every command is described by a [`RunManifest`]; executing a manifest is
//! deterministic, so re-running one reproduces its outputs byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use lossnet::bounds::{
    bound_csv, bound_curve, default_eps_grid, power_law_fit, table_scales, tune_epsilon,
    tuning_ladder, TuneObjective,
};
use lossnet::lp::solve_steady;
use lossnet::policy::{
    beta_max, build_network_penalty_config, build_penalty_config, build_target_penalty_config,
    restrict, retained_classes, BetaChoice, Policy,
};
use lossnet::polytope::{build_tracking_config, inflated_membership, MembershipForm, Polytope};
use lossnet::sim::{simulate_coupled, simulate_ensemble, trace_csv, Ensemble, RunConfig};
use lossnet::{scale_scenario, scenarios, Scenario, ServiceModel};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] lossnet::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for configuration errors, 3 for infeasibility or a violated
    /// assumption, 4 for a feasibility fault inside the simulator.
    pub fn exit_code(&self) -> i32 {
        use lossnet::Error as E;
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Core(e) => match e {
                E::Infeasible
                | E::Unbounded
                | E::InfeasibleTarget { .. }
                | E::RateMismatch { .. }
                | E::ZeroPerturbedFraction { .. }
                | E::PenaltyBudget { .. } => 3,
                E::FeasibilityFault { .. } => 4,
                _ => 2,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Bounds,
    Simulate,
    Compare,
    Table1,
    Polytope,
    Scenarios,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Penalty,
    Thinning,
    Greedy,
    Polytope,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Penalty => "penalty",
            PolicyKind::Thinning => "thinning",
            PolicyKind::Greedy => "greedy",
            PolicyKind::Polytope => "polytope",
        }
    }
}

/// Bound minimized when `eps` is tuned.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Steady limit of the lower bound curve.
    #[default]
    SteadyLimit,
    /// The looser closed-form steady ratio.
    Corollary,
}

impl From<Objective> for TuneObjective {
    fn from(o: Objective) -> Self {
        match o {
            Objective::SteadyLimit => TuneObjective::SteadyLimit,
            Objective::Corollary => TuneObjective::Corollary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub eps: Option<f64>,
    pub beta: Option<f64>,
}

/// Everything needed to reproduce one command invocation. The scenario and
/// polytope are embedded so that a rerun does not depend on the files they
/// were read from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: Command,
    /// Built-in name or path the scenario was loaded from.
    pub scenario: String,
    pub scenario_data: Option<Scenario>,
    pub polytope: Option<String>,
    pub polytope_data: Option<Polytope>,
    pub policy: PolicySpec,
    pub seed: u64,
    pub runs: usize,
    /// Defaults to `10 / mu_min` of the scaled scenario.
    pub t_max: Option<f64>,
    pub grid: usize,
    pub scale: f64,
    pub objective: Objective,
    /// Per-class acceptance fractions to track in place of the LP solution;
    /// filled in for the load-balancing built-ins.
    pub targets: Option<Vec<f64>>,
    pub out: Option<String>,
    pub coupled: bool,
    pub exact_upper: bool,
    pub json: bool,
}

impl RunManifest {
    pub fn new(command: Command) -> Self {
        RunManifest {
            command,
            scenario: "eq52".into(),
            scenario_data: None,
            polytope: None,
            polytope_data: None,
            policy: PolicySpec {
                kind: PolicyKind::Penalty,
                eps: None,
                beta: None,
            },
            seed: 1,
            runs: 100,
            t_max: None,
            grid: 200,
            scale: 1.0,
            objective: Objective::SteadyLimit,
            targets: None,
            out: None,
            coupled: false,
            exact_upper: false,
            json: false,
        }
    }

    /// Loads the scenario and polytope sources into the manifest.
    pub fn resolve(mut self) -> CliResult<Self> {
        if self.scenario_data.is_none() {
            self.scenario_data = Some(load_scenario(&self.scenario)?);
            if self.targets.is_none() && matches!(self.scenario.as_str(), "s4" | "s5") {
                self.targets = Some(scenarios::LOAD_BALANCING_ALPHA.to_vec());
            }
        }
        if self.polytope_data.is_none() {
            if let Some(src) = &self.polytope {
                let text = std::fs::read_to_string(src)
                    .map_err(|e| CliError::Config(format!("cannot read polytope {src}: {e}")))?;
                self.polytope_data = Some(Polytope::from_json(&text)?);
            }
        }
        Ok(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("bad manifest: {e}")))
    }

    /// Reads a manifest file, or the manifest line embedded in an output CSV.
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        if let Some(line) = text.lines().find_map(|l| l.strip_prefix("# manifest: ")) {
            return Self::from_json(line);
        }
        Self::from_json(&text)
    }

    fn scenario(&self) -> CliResult<Scenario> {
        let sc = self
            .scenario_data
            .clone()
            .ok_or_else(|| CliError::Config("manifest has no scenario data".into()))?;
        Ok(scale_scenario(&sc, self.scale, true)?)
    }

    fn metadata(&self) -> Vec<(String, String)> {
        vec![("manifest".into(), self.to_json())]
    }

    fn run_config(&self, sc: &Scenario) -> CliResult<RunConfig> {
        let t_max = self.t_max.unwrap_or(10.0 / sc.mu_min());
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(CliError::Config(format!(
                "tmax must be positive, got {t_max}"
            )));
        }
        if self.grid == 0 {
            return Err(CliError::Config("grid needs at least one point".into()));
        }
        Ok(RunConfig::linspace(self.seed, t_max, self.grid))
    }
}

/// One output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub name: String,
    pub content: String,
}

pub fn load_scenario(src: &str) -> CliResult<Scenario> {
    if let Some(sc) = scenarios::by_name(src) {
        return Ok(sc);
    }
    let text = std::fs::read_to_string(src).map_err(|e| {
        CliError::Config(format!(
            "{src} is neither a built-in scenario ({}) nor a readable file: {e}",
            scenarios::NAMES.join(", ")
        ))
    })?;
    Ok(Scenario::from_json(&text)?)
}

fn check_eps(eps: f64) -> CliResult<()> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(CliError::Config("eps must be > 0".into()));
    }
    if eps >= 0.25 {
        return Err(CliError::Config("eps must be < 0.25".into()));
    }
    Ok(())
}

fn fmt_num(v: f64) -> String {
    format!("{v:.9e}")
}

/// Runs a resolved manifest and returns its outputs; the manifest itself is
/// added as `manifest.json`.
pub fn execute(manifest: &RunManifest) -> CliResult<Vec<Output>> {
    if !(manifest.scale.is_finite() && manifest.scale > 0.0) {
        return Err(CliError::Config(format!(
            "scale must be positive, got {}",
            manifest.scale
        )));
    }
    if let Some(e) = manifest.policy.eps {
        check_eps(e)?;
    }
    let mut out = match manifest.command {
        Command::Bounds => cmd_bounds(manifest)?,
        Command::Simulate => cmd_simulate(manifest)?,
        Command::Compare => cmd_compare(manifest)?,
        Command::Table1 => cmd_table1(manifest)?,
        Command::Polytope => cmd_polytope(manifest)?,
        Command::Scenarios => cmd_scenarios(manifest)?,
    };
    if manifest.json {
        let mirrors: Vec<Output> = out
            .iter()
            .filter(|o| o.name.ends_with(".csv"))
            .map(|o| Output {
                name: o.name.replace(".csv", ".json"),
                content: csv_to_json(&o.content),
            })
            .collect();
        out.extend(mirrors);
    }
    out.push(Output {
        name: "manifest.json".into(),
        content: serde_json::to_string_pretty(manifest).expect("manifest serializes") + "\n",
    });
    Ok(out)
}

/// `(eps, beta, tuned)` for the bound and penalty commands: user values
/// where given, otherwise the tuned pair for a knapsack.
fn penalty_parameters(m: &RunManifest, sc: &Scenario) -> CliResult<(f64, Option<f64>, bool)> {
    match m.policy.eps {
        Some(e) => Ok((e, m.policy.beta, false)),
        None if sc.is_single_resource() => {
            let t = tune_epsilon(sc, &default_eps_grid(), m.objective.into())?;
            let beta = match &m.targets {
                Some(_) => m.policy.beta,
                None => Some(m.policy.beta.unwrap_or(t.beta)),
            };
            Ok((t.eps, beta, true))
        }
        None => Err(CliError::Config(
            "multi-resource scenarios need an explicit --eps".into(),
        )),
    }
}

fn cmd_bounds(m: &RunManifest) -> CliResult<Vec<Output>> {
    let sc = m.scenario()?;
    let (eps, beta, tuned) = penalty_parameters(m, &sc)?;
    let beta = match beta {
        Some(b) => b,
        None => {
            let keep = retained_classes(&sc)?;
            let lp_eps = solve_steady(&sc, 1.0 + 4.0 * eps)?;
            beta_max(&restrict(&sc, &keep), eps, &lp_eps.restrict(&keep))?
        }
    };
    let t_max = m.t_max.unwrap_or(10.0 / sc.mu_min());
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(CliError::Config(format!(
            "tmax must be nonnegative, got {t_max}"
        )));
    }
    if m.grid == 0 {
        return Err(CliError::Config("grid needs at least one point".into()));
    }
    let times: Vec<f64> = RunConfig::linspace(m.seed, t_max, m.grid).grid;
    let curve = bound_curve(&sc, eps, beta, &times, m.exact_upper)?;
    let mut meta = m.metadata();
    meta.push(("eps".into(), fmt_num(eps)));
    meta.push(("beta".into(), fmt_num(beta)));
    meta.push((
        "eps_source".into(),
        if tuned { "tuned" } else { "given" }.into(),
    ));
    meta.push((
        "upper".into(),
        if m.exact_upper {
            "per-time LP optimum"
        } else {
            "closed form"
        }
        .into(),
    ));
    Ok(vec![Output {
        name: "bounds.csv".into(),
        content: bound_csv(&curve, &meta),
    }])
}

fn build_policy(m: &RunManifest, sc: &Scenario, kind: PolicyKind) -> CliResult<Policy> {
    Ok(match kind {
        PolicyKind::Greedy => Policy::Greedy,
        PolicyKind::Thinning => thinning(m, sc)?,
        PolicyKind::Penalty => {
            let (eps, beta, _) = penalty_parameters(m, sc)?;
            let choice = beta.map_or(BetaChoice::Max, BetaChoice::Value);
            if let Some(alpha) = &m.targets {
                Policy::Penalty(build_target_penalty_config(sc, eps, alpha, choice)?)
            } else if sc.is_single_resource() {
                Policy::Penalty(build_penalty_config(sc, eps, choice)?)
            } else {
                Policy::Penalty(build_network_penalty_config(sc, eps, choice)?)
            }
        }
        PolicyKind::Polytope => {
            let p = m
                .polytope_data
                .as_ref()
                .ok_or_else(|| CliError::Config("polytope policy needs --polytope FILE".into()))?
                .scaled(m.scale);
            let eps = m.policy.eps.unwrap_or(0.1);
            let choice = m.policy.beta.map_or(BetaChoice::Max, BetaChoice::Value);
            Policy::Tracking(build_tracking_config(&p, sc, eps, choice)?)
        }
    })
}

fn thinning(m: &RunManifest, sc: &Scenario) -> CliResult<Policy> {
    match &m.targets {
        Some(alpha) => {
            if alpha.len() != sc.num_classes() || !sc.is_single_resource() {
                return Err(CliError::Config(
                    "targets need one fraction per class of a single-resource scenario".into(),
                ));
            }
            if let Some(i) = alpha.iter().position(|a| !(0.0..=1.0).contains(a)) {
                return Err(lossnet::Error::InfeasibleTarget {
                    class: i,
                    alpha: alpha[i],
                }
                .into());
            }
            Ok(Policy::Thinning {
                alpha: alpha.iter().map(|a| vec![*a]).collect(),
            })
        }
        None => Ok(Policy::thinning_for(sc)?),
    }
}

fn policy_metadata(meta: &mut Vec<(String, String)>, policy: &Policy) {
    meta.push(("policy".into(), policy.name().into()));
    match policy {
        Policy::Penalty(c) => {
            meta.push(("eps".into(), fmt_num(c.eps)));
            meta.push(("beta".into(), fmt_num(c.beta)));
            meta.push(("beta_bound".into(), fmt_num(c.beta_bound)));
        }
        Policy::Tracking(c) => {
            meta.push(("eps".into(), fmt_num(c.eps)));
            meta.push(("beta".into(), fmt_num(c.beta)));
            meta.push(("gamma_star".into(), fmt_num(c.gamma_star)));
            meta.push(("initial_load_constraint".into(), INITIAL_LOAD_NOTE.into()));
            meta.push(("initial_load_reduced".into(), c.y0_adjusted.to_string()));
        }
        _ => {}
    }
}

const INITIAL_LOAD_NOTE: &str =
    "d-_j y0 <= (h_j + d-_j rho) log(Psi*/s) / beta, which is sufficient for Psi(0, y0) <= Psi*";

fn check_runs(m: &RunManifest) -> CliResult<()> {
    if m.runs == 0 {
        return Err(CliError::Config("runs must be at least 1".into()));
    }
    Ok(())
}

fn trace_output(m: &RunManifest, sc: &Scenario, policy: &Policy, ens: &Ensemble) -> Output {
    let mut meta = m.metadata();
    policy_metadata(&mut meta, policy);
    Output {
        name: format!("trace_{}.csv", policy.name()),
        content: trace_csv(ens, sc, &meta),
    }
}

fn cmd_simulate(m: &RunManifest) -> CliResult<Vec<Output>> {
    check_runs(m)?;
    let mut sc = m.scenario()?;
    if m.policy.kind == PolicyKind::Polytope {
        sc = sc.with_infinite_capacity();
    }
    let cfg = m.run_config(&sc)?;
    let policy = build_policy(m, &sc, m.policy.kind)?;
    if m.coupled && m.policy.kind != PolicyKind::Thinning {
        let thin = thinning(m, &sc)?;
        let ens = simulate_coupled(&sc, &[policy.clone(), thin.clone()], m.runs, &cfg)?;
        return Ok(vec![
            trace_output(m, &sc, &policy, &ens[0]),
            trace_output(m, &sc, &thin, &ens[1]),
        ]);
    }
    let ens = simulate_ensemble(&sc, &policy, m.runs, &cfg)?;
    Ok(vec![trace_output(m, &sc, &policy, &ens)])
}

fn cmd_compare(m: &RunManifest) -> CliResult<Vec<Output>> {
    check_runs(m)?;
    let sc = m.scenario()?;
    let cfg = m.run_config(&sc)?;
    let penalty = build_policy(m, &sc, PolicyKind::Penalty)?;
    let thin = thinning(m, &sc)?;
    let ens = simulate_coupled(&sc, &[penalty.clone(), thin.clone()], m.runs, &cfg)?;
    Ok(vec![
        trace_output(m, &sc, &penalty, &ens[0]),
        trace_output(m, &sc, &thin, &ens[1]),
    ])
}

fn cmd_table1(m: &RunManifest) -> CliResult<Vec<Output>> {
    let sc = m
        .scenario_data
        .clone()
        .ok_or_else(|| CliError::Config("manifest has no scenario data".into()))?;
    let ladder = tuning_ladder(
        &sc,
        &table_scales(),
        &default_eps_grid(),
        m.objective.into(),
    )?;
    let mut out = String::new();
    for (k, v) in m.metadata() {
        let _ = writeln!(out, "# {k}: {v}");
    }
    let _ = writeln!(
        out,
        "# transient_error: sup over t >= 0.1/mu_min of 1 - L(t)/R*(t) on 200 points of [0, 10/mu_min]"
    );
    let pairs: Vec<(f64, f64)> = ladder
        .iter()
        .filter(|(_, r)| r.steady_error > 0.0)
        .map(|(n, r)| (*n, r.steady_error))
        .collect();
    let (s, e): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    match power_law_fit(&s, &e) {
        Ok((a, p)) => {
            let _ = writeln!(
                out,
                "# power_law: scale = {} * steady_error^{}",
                fmt_num(a),
                fmt_num(p)
            );
        }
        Err(err) => {
            let _ = writeln!(out, "# power_law: {err}");
        }
    }
    let _ = writeln!(out, "scale,eps,beta,steady_error_pct,transient_error_pct");
    for (n, r) in &ladder {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            *n as u64,
            fmt_num(r.eps),
            fmt_num(r.beta),
            fmt_num(100.0 * r.steady_error),
            fmt_num(100.0 * r.transient_error)
        );
    }
    Ok(vec![Output {
        name: "table1.csv".into(),
        content: out,
    }])
}

fn cmd_polytope(m: &RunManifest) -> CliResult<Vec<Output>> {
    check_runs(m)?;
    let sc = m.scenario()?.with_infinite_capacity();
    let cfg = m.run_config(&sc)?;
    let policy = build_policy(m, &sc, PolicyKind::Polytope)?;
    let Policy::Tracking(tc) = &policy else {
        unreachable!("polytope kind builds a tracking policy")
    };
    let p = m
        .polytope_data
        .as_ref()
        .expect("checked when building the policy")
        .scaled(m.scale);
    let ens = simulate_ensemble(&sc, &policy, m.runs, &cfg)?;
    let ser = ens.series(&sc);
    let y0: Vec<f64> = tc.y0.iter().map(|v| *v as f64).collect();
    let mut report = String::new();
    for (k, v) in m.metadata() {
        let _ = writeln!(report, "# {k}: {v}");
    }
    let _ = writeln!(report, "# gamma_star: {}", fmt_num(tc.gamma_star));
    let _ = writeln!(report, "# eps: {}", fmt_num(tc.eps));
    let _ = writeln!(report, "# beta: {}", fmt_num(tc.beta));
    let _ = writeln!(report, "# initial_load_constraint: {INITIAL_LOAD_NOTE}");
    let _ = writeln!(report, "# initial_load_reduced: {}", tc.y0_adjusted);
    let _ = writeln!(
        report,
        "t,max_slack_finite,max_slack_limit,inside_finite,inside_limit"
    );
    let mut all_inside = true;
    for (t, row) in ser.times.iter().zip(&ser.x) {
        let xbar: Vec<f64> = row.iter().map(|e| e.mean).collect();
        let worst = |form| -> CliResult<f64> {
            Ok(
                inflated_membership(&p, &sc, tc.eps, tc.beta, &y0, &xbar, *t, form)?
                    .into_iter()
                    .fold(f64::NEG_INFINITY, f64::max),
            )
        };
        let fin = worst(MembershipForm::Finite)?;
        let lim = worst(MembershipForm::Limit)?;
        all_inside &= fin <= 0.0;
        let _ = writeln!(
            report,
            "{},{},{},{},{}",
            fmt_num(*t),
            fmt_num(fin),
            fmt_num(lim),
            u8::from(fin <= 0.0),
            u8::from(lim <= 0.0)
        );
    }
    let _ = writeln!(report, "# inside_at_every_point: {all_inside}");
    Ok(vec![
        trace_output(m, &sc, &policy, &ens),
        Output {
            name: "membership.csv".into(),
            content: report,
        },
    ])
}

fn service_text(s: &ServiceModel) -> String {
    match s {
        ServiceModel::Exponential { rate } => format!("exp(mu={rate})"),
        ServiceModel::HyperExponential { probs, rates } => {
            format!("hyperexp(p={probs:?}, mu={rates:?})")
        }
        ServiceModel::Deterministic { d } => format!("det(d={d})"),
        ServiceModel::HeavyTail => "heavytail".into(),
    }
}

fn cmd_scenarios(m: &RunManifest) -> CliResult<Vec<Output>> {
    let mut text = String::new();
    let mut all = Vec::new();
    for name in scenarios::NAMES {
        let sc = scenarios::by_name(name).expect("built-in");
        let _ = writeln!(
            text,
            "{name}: s = {}, m = {}, capacity = {:?}",
            sc.num_resources(),
            sc.num_classes(),
            sc.capacity
        );
        for (i, c) in sc.classes.iter().enumerate() {
            let _ = writeln!(
                text,
                "  class {}: lambda = {}, service = {}, reward = {}, allocations = {:?}",
                i + 1,
                c.arrival_rate,
                service_text(&c.service),
                c.reward,
                c.allocations
            );
        }
        if name == "s4" || name == "s5" {
            let _ = writeln!(
                text,
                "  load-balancing alpha = {:?}",
                scenarios::LOAD_BALANCING_ALPHA
            );
        }
        all.push(serde_json::json!({ "name": name, "scenario": sc }));
    }
    let mut out = vec![Output {
        name: "scenarios.txt".into(),
        content: text,
    }];
    if m.json {
        out.push(Output {
            name: "scenarios.json".into(),
            content: serde_json::to_string_pretty(&all).expect("serializes") + "\n",
        });
    }
    Ok(out)
}

/// JSON mirror of an output CSV: `#` lines become metadata entries and the
/// table becomes column names plus rows of numbers.
pub fn csv_to_json(csv: &str) -> String {
    let mut meta = serde_json::Map::new();
    let mut columns: Vec<String> = Vec::new();
    let mut rows: Vec<serde_json::Value> = Vec::new();
    for line in csv.lines() {
        if let Some(rest) = line.strip_prefix("# ") {
            let (k, v) = rest.split_once(": ").unwrap_or((rest, ""));
            let value = serde_json::from_str(v).unwrap_or_else(|_| serde_json::Value::from(v));
            meta.insert(k.to_string(), value);
        } else if columns.is_empty() {
            columns = line.split(',').map(str::to_string).collect();
        } else {
            rows.push(
                line.split(',')
                    .map(|cell| {
                        cell.parse::<f64>()
                            .ok()
                            .and_then(serde_json::Number::from_f64)
                            .map_or_else(
                                || serde_json::Value::from(cell),
                                serde_json::Value::Number,
                            )
                    })
                    .collect(),
            );
        }
    }
    let doc = serde_json::json!({ "metadata": meta, "columns": columns, "rows": rows });
    serde_json::to_string_pretty(&doc).expect("serializes") + "\n"
}

/// Writes outputs into `dir`, creating it if needed; returns the paths.
pub fn write_outputs(dir: &Path, outputs: &[Output]) -> CliResult<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    outputs
        .iter()
        .map(|o| {
            let path = dir.join(&o.name);
            std::fs::write(&path, &o.content)?;
            Ok(path)
        })
        .collect()
}
