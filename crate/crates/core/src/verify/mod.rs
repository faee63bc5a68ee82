//! Executable theory suite.
//!
//! Checks separate implementation bugs (`fail`: a kernel that does not sum
//! to one, a decomposition that disagrees with the kernel) from claims
//! that simply were not observed on an instance (`finding`: a contraction
//! ratio above γ, a submodularity violation). A finding is data, not a
//! crash.

mod checks;

pub use checks::{
    check_contraction, check_equivalence, check_greedy_ratio, check_normalization,
    check_profile_decomposition, check_sampling, check_submodularity, check_submodularity_sampled,
    check_value_iteration_rate, modular_values, random_values, MAX_SUITE_NODES,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph_model::Instance;
use crate::planning::Operator;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Finding,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub witness: serde_json::Value,
    pub magnitude: f64,
}

/// Witnesses kept per report; the full count is in `violation_count`.
pub const MAX_WITNESSES: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub instance: String,
    pub trials: usize,
    pub violation_count: usize,
    pub violations: Vec<Violation>,
    pub verdict: Verdict,
    /// Check-specific measurements (maximum ratio, deviation, ...).
    pub stats: serde_json::Value,
}

impl CheckReport {
    pub(crate) fn new(check: &str, instance: &str) -> Self {
        CheckReport {
            check: check.into(),
            instance: instance.into(),
            trials: 0,
            violation_count: 0,
            violations: Vec::new(),
            verdict: Verdict::Pass,
            stats: serde_json::Value::Null,
        }
    }

    pub(crate) fn skipped(check: &str, instance: &str, reason: String) -> Self {
        CheckReport {
            verdict: Verdict::Skipped,
            stats: serde_json::json!({ "reason": reason }),
            ..CheckReport::new(check, instance)
        }
    }

    pub(crate) fn violate(&mut self, witness: serde_json::Value, magnitude: f64) {
        self.violation_count += 1;
        if self.violations.len() < MAX_WITNESSES {
            self.violations.push(Violation { witness, magnitude });
        }
    }

    /// Sets the verdict from the violation count: `on_violation` if any,
    /// pass otherwise.
    pub(crate) fn conclude(mut self, on_violation: Verdict) -> Self {
        self.verdict = if self.violation_count == 0 {
            Verdict::Pass
        } else {
            on_violation
        };
        self
    }

    pub fn summary_line(&self) -> String {
        let verdict = match self.verdict {
            Verdict::Pass => "pass",
            Verdict::Fail => "FAIL",
            Verdict::Finding => "finding",
            Verdict::Skipped => "skipped",
        };
        format!(
            "{:<8} {:<28} {:<10} trials={} violations={} {}",
            verdict, self.check, self.instance, self.trials, self.violation_count, self.stats
        )
    }
}

/// Instances shipped with the crate.
pub fn bundled_instances() -> Vec<(&'static str, Instance)> {
    [
        ("tiny3", include_str!("../../data/tiny3.json")),
        ("tiny4", include_str!("../../data/tiny4.json")),
        ("tiny5", include_str!("../../data/tiny5.json")),
        ("tiny6", include_str!("../../data/tiny6.json")),
    ]
    .into_iter()
    .map(|(name, text)| {
        (
            name,
            Instance::from_json(text).expect("bundled instance is valid"),
        )
    })
    .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteConfig {
    pub seed: u64,
    pub sampling_draws: usize,
    pub contraction_pairs: usize,
    pub equivalence_tables: usize,
    pub sampled_triples: usize,
    pub sampled_profiles: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 0xC0FFEE,
            sampling_draws: 200_000,
            contraction_pairs: 100,
            equivalence_tables: 20,
            sampled_triples: 200,
            sampled_profiles: 400,
        }
    }
}

fn or_skip(check: &str, name: &str, result: Result<CheckReport>) -> CheckReport {
    result.unwrap_or_else(|e| CheckReport::skipped(check, name, e.to_string()))
}

/// Every check on one instance. Exhaustive checks report `skipped` above
/// their enumeration caps; the sampled submodularity check runs at any size.
pub fn run_checks(name: &str, inst: &Instance, cfg: &SuiteConfig) -> Vec<CheckReport> {
    let modular = modular_values(inst);
    let mut out = vec![
        or_skip(
            "submodularity_sampled",
            name,
            check_submodularity_sampled(
                inst,
                name,
                cfg.sampled_triples,
                cfg.sampled_profiles,
                cfg.seed,
            ),
        ),
        or_skip("normalization", name, check_normalization(inst, name)),
        or_skip(
            "sampling",
            name,
            check_sampling(inst, name, cfg.sampling_draws, cfg.seed),
        ),
        or_skip(
            "profile_decomposition",
            name,
            check_profile_decomposition(inst, name, &modular),
        ),
        or_skip(
            "submodularity",
            name,
            check_submodularity(inst, name, &modular, 1e-9),
        ),
        or_skip(
            "greedy_ratio",
            name,
            check_greedy_ratio(inst, name, &modular),
        ),
        or_skip(
            "equivalence",
            name,
            check_equivalence(inst, name, cfg.equivalence_tables, cfg.seed),
        ),
    ];
    for op in [Operator::Optimal, Operator::HillClimb] {
        out.push(or_skip(
            &format!("contraction_{}", op.name()),
            name,
            check_contraction(inst, name, op, cfg.contraction_pairs, cfg.seed),
        ));
    }
    for op in [Operator::Optimal, Operator::HillClimb] {
        out.push(or_skip(
            &format!("vi_rate_{}", op.name()),
            name,
            check_value_iteration_rate(inst, name, op),
        ));
    }
    out
}

/// The bundled suite.
pub fn run_small_suite(cfg: &SuiteConfig) -> Vec<CheckReport> {
    bundled_instances()
        .iter()
        .flat_map(|(name, inst)| run_checks(name, inst, cfg))
        .collect()
}

pub fn any_fail(reports: &[CheckReport]) -> bool {
    reports.iter().any(|r| r.verdict == Verdict::Fail)
}
