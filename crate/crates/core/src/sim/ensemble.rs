use std::collections::hash_map::DefaultHasher;
use std::fmt::Write as _;
use std::hash::Hasher;

use rayon::prelude::*;

use super::engine::{simulate_run, RunConfig, RunTrace};
use crate::error::{Error, Result};
use crate::model::{scale_scenario, Scenario};
use crate::policy::Policy;

/// Pairwise (cascade) summation.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        v.iter().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Pointwise mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    /// Zero for a single replication.
    pub se: f64,
}

impl Estimate {
    pub fn of(samples: &[f64]) -> Estimate {
        let p = samples.len();
        if p == 0 {
            return Estimate {
                mean: f64::NAN,
                se: f64::NAN,
            };
        }
        let mean = pairwise_sum(samples) / p as f64;
        if p == 1 {
            return Estimate { mean, se: 0.0 };
        }
        let sq: Vec<f64> = samples.iter().map(|s| (s - mean) * (s - mean)).collect();
        let var = pairwise_sum(&sq) / (p - 1) as f64;
        Estimate {
            mean,
            se: (var / p as f64).sqrt(),
        }
    }
}

/// All replications of one policy, kept raw so that any linear functional
/// can be estimated afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub runs: Vec<RunTrace>,
    pub times: Vec<f64>,
    pub policy: String,
}

/// Summary curves of an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSeries {
    pub times: Vec<f64>,
    pub reward: Vec<Estimate>,
    /// `util[t][k]`: occupied capacity over capacity (raw occupancy when capacity is infinite).
    pub util: Vec<Vec<Estimate>>,
    pub x: Vec<Vec<Estimate>>,
    pub y: Vec<Vec<Estimate>>,
    pub xi: Vec<Vec<Estimate>>,
    pub eta: Vec<Vec<Estimate>>,
}

impl Ensemble {
    /// Per-grid-point estimate of `f(run, t_index)`.
    pub fn estimate(&self, f: impl Fn(&RunTrace, usize) -> f64) -> Vec<Estimate> {
        (0..self.times.len())
            .map(|t| {
                let v: Vec<f64> = self.runs.iter().map(|r| f(r, t)).collect();
                Estimate::of(&v)
            })
            .collect()
    }

    /// Estimate of a per-run scalar.
    pub fn estimate_scalar(&self, f: impl Fn(&RunTrace) -> f64) -> Estimate {
        let v: Vec<f64> = self.runs.iter().map(f).collect();
        Estimate::of(&v)
    }

    pub fn mean_reward(&self) -> Vec<Estimate> {
        self.estimate(|r, t| r.reward[t])
    }

    /// Hash over the arrival hashes of every replication.
    pub fn arrival_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for r in &self.runs {
            h.write_u64(r.arrival_hash);
        }
        h.finish()
    }

    pub fn series(&self, sc: &Scenario) -> TraceSeries {
        let m = sc.num_classes();
        let s = sc.num_resources();
        let per_class = |f: &dyn Fn(&RunTrace, usize, usize) -> f64| -> Vec<Vec<Estimate>> {
            let cols: Vec<Vec<Estimate>> =
                (0..m).map(|i| self.estimate(|r, t| f(r, t, i))).collect();
            (0..self.times.len())
                .map(|t| cols.iter().map(|c| c[t]).collect())
                .collect()
        };
        let util_cols: Vec<Vec<Estimate>> = (0..s)
            .map(|k| {
                let cap = sc.capacity[k];
                self.estimate(|r, t| {
                    if cap.is_finite() && cap > 0.0 {
                        r.occupied[t][k] / cap
                    } else {
                        r.occupied[t][k]
                    }
                })
            })
            .collect();
        TraceSeries {
            times: self.times.clone(),
            reward: self.mean_reward(),
            util: (0..self.times.len())
                .map(|t| util_cols.iter().map(|c| c[t]).collect())
                .collect(),
            x: per_class(&|r, t, i| r.x[t][i] as f64),
            y: per_class(&|r, t, i| r.y[t][i] as f64),
            xi: per_class(&|r, t, i| r.xi[t][i] as f64),
            eta: per_class(&|r, t, i| r.eta[t][i] as f64),
        }
    }
}

/// `p` independent replications; replication `k` uses streams derived from
/// `(cfg.seed, k)`, so the result does not depend on thread scheduling.
pub fn simulate_ensemble(
    sc: &Scenario,
    policy: &Policy,
    p: usize,
    cfg: &RunConfig,
) -> Result<Ensemble> {
    if p == 0 {
        return Err(Error::InvalidParameter(
            "need at least one replication".into(),
        ));
    }
    sc.ensure_valid()?;
    let runs = (0..p as u64)
        .into_par_iter()
        .map(|k| simulate_run(sc, policy, cfg, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble {
        runs,
        times: cfg.grid.clone(),
        policy: policy.name().to_string(),
    })
}

/// Runs each policy on the same arrival and service streams.
pub fn simulate_coupled(
    sc: &Scenario,
    policies: &[Policy],
    p: usize,
    cfg: &RunConfig,
) -> Result<Vec<Ensemble>> {
    if policies.len() < 2 {
        return Err(Error::InvalidParameter(
            "coupling needs at least two policies".into(),
        ));
    }
    policies
        .iter()
        .map(|pol| simulate_ensemble(sc, pol, p, cfg))
        .collect()
}

/// Simulates the `n`-th scaled system for each `n` with the policy built by
/// `build`, on the default horizon `10 / mu_min` sampled at `points` times.
pub fn scale_sweep(
    sc: &Scenario,
    build: impl Fn(&Scenario) -> Result<Policy>,
    scales: &[f64],
    p: usize,
    seed: u64,
    points: usize,
) -> Result<Vec<(f64, Scenario, Ensemble)>> {
    scales
        .iter()
        .map(|&n| {
            let scaled = scale_scenario(sc, n, true)?;
            let policy = build(&scaled)?;
            let cfg = RunConfig::linspace(seed, 10.0 / scaled.mu_min(), points);
            let ens = simulate_ensemble(&scaled, &policy, p, &cfg)?;
            Ok((n, scaled, ens))
        })
        .collect()
}

/// Trace CSV: one row per grid point, `#`-prefixed metadata lines first.
pub fn trace_csv(ens: &Ensemble, sc: &Scenario, metadata: &[(String, String)]) -> String {
    let ser = ens.series(sc);
    let m = sc.num_classes();
    let s = sc.num_resources();
    let mut out = String::new();
    for (k, v) in metadata {
        let _ = writeln!(out, "# {k}: {v}");
    }
    let _ = writeln!(out, "# runs: {}", ens.runs.len());
    let _ = writeln!(out, "# arrival_hash: {:016x}", ens.arrival_hash());
    let mut header = vec!["t".to_string(), "mean_reward".into(), "se_reward".into()];
    header.extend((1..=s).map(|k| format!("mean_util_{k}")));
    for name in ["x", "y", "xi", "eta"] {
        header.extend((1..=m).map(|i| format!("mean_{name}_{i}")));
    }
    let _ = writeln!(out, "{}", header.join(","));
    for t in 0..ser.times.len() {
        let mut row = vec![
            fmt_num(ser.times[t]),
            fmt_num(ser.reward[t].mean),
            fmt_num(ser.reward[t].se),
        ];
        row.extend(ser.util[t].iter().map(|e| fmt_num(e.mean)));
        for block in [&ser.x, &ser.y, &ser.xi, &ser.eta] {
            row.extend(block[t].iter().map(|e| fmt_num(e.mean)));
        }
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Ten significant digits.
pub(crate) fn fmt_num(v: f64) -> String {
    format!("{v:.9e}")
}
