//! Monte-Carlo experiment harness.
//!
//! Every episode starts from the all-inactive state. Episode `(seed, run)`
//! draws environment coins from `stream(seed, ENV, run)` and policy
//! randomness from `stream(seed, POLICY, run)`, so all policies face the
//! same coins and results do not depend on scheduling.

mod scaling;

pub use scaling::{
    fit_growth, fit_loglog_slope, hill_climb_scaling, tabular_sweep_scaling, ScalingRow,
};

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{build_policy, Policy, PolicyOptions};
use crate::dynamics::{reward, sample_step, ActionSet, State};
use crate::error::{NrmabError, Result};
use crate::graph_model::Instance;
use crate::rng::{stream, TAG_ENV, TAG_POLICY};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub policies: Vec<String>,
    pub seeds: Vec<u64>,
    pub runs_per_seed: usize,
    pub horizon: usize,
    /// Record wall-clock decision times. Off by default so that output
    /// files are reproducible byte for byte.
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub options: PolicyOptions,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(NrmabError::InvalidArgument(
                "horizon must be at least 1".into(),
            ));
        }
        if self.runs_per_seed < 1 {
            return Err(NrmabError::InvalidArgument(
                "runs_per_seed must be at least 1".into(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(NrmabError::InvalidArgument(
                "at least one seed is required".into(),
            ));
        }
        if self.policies.is_empty() {
            return Err(NrmabError::InvalidArgument(
                "at least one policy is required".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub timestep: usize,
    /// Active nodes after the step.
    pub active_count: usize,
    /// `R(s_t)` of the post-step state.
    pub reward: f64,
    pub action: ActionSet,
    pub decision_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeLog {
    pub policy: String,
    pub seed: u64,
    pub run: usize,
    pub steps: Vec<StepRecord>,
    /// `Σ_{t=1}^{T} γ^{t−1} R(s_t)`.
    pub discounted_return: f64,
}

/// Plays one episode of `policy`.
pub fn run_episode(
    inst: &Instance,
    policy: &dyn Policy,
    seed: u64,
    run: usize,
    horizon: usize,
    timing: bool,
) -> EpisodeLog {
    let mut env = stream(seed, TAG_ENV, run as u64);
    let mut prng = stream(seed, TAG_POLICY, run as u64);
    let mut s = State::zeros(inst.n());
    let mut steps = Vec::with_capacity(horizon);
    let mut discounted_return = 0.0;
    let mut discount = 1.0;
    for t in 1..=horizon {
        let start = timing.then(Instant::now);
        let action = policy.select(&s, &mut prng);
        let decision_ms = start.map_or(0.0, |t0| t0.elapsed().as_secs_f64() * 1e3);
        debug_assert!(action.len() <= inst.budget());
        let next = sample_step(inst, &s, &action, &mut env).1;
        let r = reward(inst, &next);
        discounted_return += discount * r;
        discount *= inst.gamma();
        steps.push(StepRecord {
            timestep: t,
            active_count: next.count_active(),
            reward: r,
            action,
            decision_ms,
        });
        s = next;
    }
    EpisodeLog {
        policy: policy.name().to_string(),
        seed,
        run,
        steps,
        discounted_return,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub episodes: usize,
    /// Per timestep `t = 1..T`.
    pub mean_activation: Vec<f64>,
    pub sd_activation: Vec<f64>,
    pub mean_cumulative_reward: f64,
    pub mean_reward_per_step: f64,
    pub mean_discounted_return: f64,
    pub mean_decision_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub n: usize,
    pub horizon: usize,
    pub policies: BTreeMap<String, PolicySummary>,
    /// Policies that could not be built, with the reason.
    pub failures: BTreeMap<String, String>,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Aggregates the episodes of one policy. SDs are sample SDs across all
/// episodes of all seeds.
pub fn summarize_policy(logs: &[EpisodeLog], n: usize, horizon: usize) -> PolicySummary {
    let mut mean_activation = Vec::with_capacity(horizon);
    let mut sd_activation = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let fracs: Vec<f64> = logs
            .iter()
            .map(|l| l.steps[t].active_count as f64 / n as f64)
            .collect();
        let (m, sd) = mean_sd(&fracs);
        mean_activation.push(m);
        sd_activation.push(sd);
    }
    let cumulative: Vec<f64> = logs
        .iter()
        .map(|l| l.steps.iter().map(|s| s.reward).sum())
        .collect();
    let discounted: Vec<f64> = logs.iter().map(|l| l.discounted_return).collect();
    let ms: Vec<f64> = logs
        .iter()
        .flat_map(|l| l.steps.iter().map(|s| s.decision_ms))
        .collect();
    let mean_cumulative_reward = mean_sd(&cumulative).0;
    PolicySummary {
        episodes: logs.len(),
        mean_activation,
        sd_activation,
        mean_cumulative_reward,
        mean_reward_per_step: mean_cumulative_reward / horizon as f64,
        mean_discounted_return: mean_sd(&discounted).0,
        mean_decision_ms: mean_sd(&ms).0,
    }
}

pub struct Experiment {
    pub summary: MetricSummary,
    pub logs: Vec<EpisodeLog>,
}

/// Runs every policy over every `(seed, run)` pair. Policies are built once
/// per seed (learners train with that seed); a policy that fails to build
/// is reported in `failures` and the others still run.
pub fn run_experiment(inst: Arc<Instance>, cfg: &ExperimentConfig) -> Result<Experiment> {
    cfg.validate()?;
    let mut logs = Vec::new();
    let mut summary = MetricSummary {
        n: inst.n(),
        horizon: cfg.horizon,
        policies: BTreeMap::new(),
        failures: BTreeMap::new(),
    };
    for name in &cfg.policies {
        let built: Result<Vec<Box<dyn Policy>>> = cfg
            .seeds
            .iter()
            .map(|&seed| build_policy(name, inst.clone(), &cfg.options, seed))
            .collect();
        let policies = match built {
            Ok(p) => p,
            Err(e) => {
                summary.failures.insert(name.clone(), e.to_string());
                continue;
            }
        };
        let jobs: Vec<(usize, u64, usize)> = cfg
            .seeds
            .iter()
            .enumerate()
            .flat_map(|(i, &seed)| (0..cfg.runs_per_seed).map(move |run| (i, seed, run)))
            .collect();
        let episodes: Vec<EpisodeLog> = jobs
            .par_iter()
            .map(|&(i, seed, run)| {
                run_episode(
                    &inst,
                    policies[i].as_ref(),
                    seed,
                    run,
                    cfg.horizon,
                    cfg.timing,
                )
            })
            .collect();
        summary.policies.insert(
            name.clone(),
            summarize_policy(&episodes, inst.n(), cfg.horizon),
        );
        logs.extend(episodes);
    }
    if summary.policies.is_empty() {
        let reasons: Vec<String> = summary
            .failures
            .iter()
            .map(|(k, v)| format!("{k}: {v}"))
            .collect();
        return Err(NrmabError::InvalidArgument(format!(
            "no policy could be built ({})",
            reasons.join("; ")
        )));
    }
    Ok(Experiment { summary, logs })
}

pub const CSV_HEADER: &str = "policy,seed,run,timestep,active_count,reward,decision_ms";

#[derive(Serialize, Deserialize)]
struct CsvRow {
    policy: String,
    seed: u64,
    run: usize,
    timestep: usize,
    active_count: usize,
    reward: f64,
    decision_ms: f64,
}

/// Raw per-step rows. Floats use the shortest representation that parses
/// back to the same value.
pub fn logs_to_csv(logs: &[EpisodeLog]) -> String {
    let mut w = csv::Writer::from_writer(Vec::with_capacity(64 * logs.len()));
    for l in logs {
        for s in &l.steps {
            w.serialize(CsvRow {
                policy: l.policy.clone(),
                seed: l.seed,
                run: l.run,
                timestep: s.timestep,
                active_count: s.active_count,
                reward: s.reward,
                decision_ms: s.decision_ms,
            })
            .expect("writing to memory");
        }
    }
    if logs.iter().all(|l| l.steps.is_empty()) {
        return format!("{CSV_HEADER}\n");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("csv output is utf-8")
}

/// Reads episodes back from [`logs_to_csv`] output. Action sets are not
/// part of the CSV and come back empty; discounted returns are recomputed
/// with `gamma`.
pub fn logs_from_csv(text: &str, gamma: f64) -> Result<Vec<EpisodeLog>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header_ok = reader
        .headers()
        .map(|h| h.iter().collect::<Vec<_>>().join(",") == CSV_HEADER)
        .unwrap_or(false);
    if !header_ok {
        return Err(NrmabError::Parse {
            line: 1,
            message: format!("expected header {CSV_HEADER:?}"),
        });
    }
    let mut logs: Vec<EpisodeLog> = Vec::new();
    for (i, row) in reader.deserialize::<CsvRow>().enumerate() {
        let line = i + 2;
        let bad = |message: String| NrmabError::Parse { line, message };
        let row = row.map_err(|e| bad(e.to_string()))?;
        let step = StepRecord {
            timestep: row.timestep,
            active_count: row.active_count,
            reward: row.reward,
            action: ActionSet::empty(),
            decision_ms: row.decision_ms,
        };
        let continues = logs.last().is_some_and(|l| {
            l.policy == row.policy
                && l.seed == row.seed
                && l.run == row.run
                && l.steps.len() + 1 == row.timestep
        });
        if continues {
            logs.last_mut().unwrap().steps.push(step);
        } else if row.timestep == 1 {
            logs.push(EpisodeLog {
                policy: row.policy,
                seed: row.seed,
                run: row.run,
                steps: vec![step],
                discounted_return: 0.0,
            });
        } else {
            return Err(bad(format!(
                "timestep {} does not continue an episode",
                row.timestep
            )));
        }
    }
    for l in &mut logs {
        let mut discount = 1.0;
        l.discounted_return = 0.0;
        for s in &l.steps {
            l.discounted_return += discount * s.reward;
            discount *= gamma;
        }
    }
    Ok(logs)
}

/// Rebuilds the summary from raw logs, grouping by policy in log order.
pub fn summarize(logs: &[EpisodeLog], n: usize, horizon: usize) -> MetricSummary {
    let mut groups: BTreeMap<String, Vec<EpisodeLog>> = BTreeMap::new();
    for l in logs {
        groups.entry(l.policy.clone()).or_default().push(l.clone());
    }
    MetricSummary {
        n,
        horizon,
        policies: groups
            .into_iter()
            .map(|(name, ls)| {
                let s = summarize_policy(&ls, n, horizon);
                (name, s)
            })
            .collect(),
        failures: BTreeMap::new(),
    }
}

/// Human-readable table of the final-step activation per policy.
pub fn summary_text(summary: &MetricSummary) -> String {
    let mut out = format!(
        "{:<16} {:>9} {:>9} {:>12} {:>12}\n",
        "policy", "act@T", "sd@T", "cum_reward", "disc_return"
    );
    for (name, p) in &summary.policies {
        let t = summary.horizon - 1;
        writeln!(
            out,
            "{name:<16} {:>9.4} {:>9.4} {:>12.3} {:>12.3}",
            p.mean_activation[t],
            p.sd_activation[t],
            p.mean_cumulative_reward,
            p.mean_discounted_return
        )
        .unwrap();
    }
    for (name, why) in &summary.failures {
        writeln!(out, "{name:<16} failed: {why}").unwrap();
    }
    out
}
