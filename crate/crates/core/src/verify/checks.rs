use rand::Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::dynamics::{
    apply_profile, for_each_profile, full_kernel, reward, reward_code, sample_coin_profile,
    sample_step, ActionSet, ExactKernel, State,
};
use crate::error::{NrmabError, Result};
use crate::graph_model::Instance;
use crate::planning::{
    bellman_hc_with_actions, feasible_action_sets, hill_climb, multi_bellman_composite, ExactQ,
    Operator, QMarginal, ValueTable,
};
use crate::rng::{stream, StreamRng, TAG_VERIFY};

use super::{CheckReport, Verdict};

/// Largest instance the exhaustive theory checks accept. They scan every
/// state against every subset, so cost grows as `4^n`.
pub const MAX_SUITE_NODES: usize = 8;

/// Budget for the coupled-profile oracle: profiles × states × subsets.
const MAX_DECOMPOSITION_WORK: u128 = 1 << 26;

fn suite_kernel(inst: &Instance) -> Result<ExactKernel<'_>> {
    if inst.n() > MAX_SUITE_NODES {
        return Err(NrmabError::EnumerationCap {
            nodes: inst.n(),
            edges: inst.edges().len(),
            max_nodes: MAX_SUITE_NODES,
            max_edges: crate::dynamics::MAX_EXACT_EDGES,
        });
    }
    ExactKernel::new(inst)
}

/// `V(s) = Σ_v r_v s_v`.
pub fn modular_values(inst: &Instance) -> ValueTable {
    ValueTable::from_fn(inst.n(), |s| reward_code(inst, s))
}

/// Uniform draws on `[0, R_max / (1 − γ)]`.
pub fn random_values(inst: &Instance, rng: &mut StreamRng) -> ValueTable {
    let hi = inst.max_reward() / (1.0 - inst.gamma());
    ValueTable::from_fn(inst.n(), |_| rng.gen_range(0.0..=hi))
}

fn random_state(n: usize, rng: &mut StreamRng) -> State {
    State::from_bits(&(0..n).map(|_| rng.gen_bool(0.5)).collect::<Vec<_>>())
}

/// Every row of the kernel over every feasible action set sums to one and
/// holds only probabilities.
pub fn check_normalization(inst: &Instance, name: &str) -> Result<CheckReport> {
    let kernel = suite_kernel(inst)?;
    let sets = feasible_action_sets(inst.n(), inst.budget())?;
    let mut report = CheckReport::new("normalization", name);
    let mut worst = 0.0f64;
    for s in 0..1u64 << inst.n() {
        for a in &sets {
            let row = kernel.kernel_dense(s, a.mask());
            let total: f64 = row.iter().sum();
            let bad_entry = row.iter().any(|p| !(0.0..=1.0 + 1e-12).contains(p));
            worst = worst.max((total - 1.0).abs());
            report.trials += 1;
            if (total - 1.0).abs() > 1e-9 || bad_entry {
                report.violate(
                    json!({ "state": s, "action": a.members(), "total": total }),
                    (total - 1.0).abs(),
                );
            }
        }
    }
    report.stats = json!({ "max_abs_deviation": worst });
    Ok(report.conclude(Verdict::Fail))
}

/// Empirical next-state frequencies for one `(s, A)` drawn from `seed`
/// against the exact kernel, outcome by outcome, within three standard
/// errors.
pub fn check_sampling(inst: &Instance, name: &str, draws: usize, seed: u64) -> Result<CheckReport> {
    suite_kernel(inst)?;
    let n = inst.n();
    let mut pick = stream(seed, TAG_VERIFY, 0);
    let s = random_state(n, &mut pick);
    let members = rand::seq::index::sample(&mut pick, n, inst.budget()).into_vec();
    let a = ActionSet::new(members, n)?;
    let exact = full_kernel(inst, &s, &a)?;
    let mut counts = vec![0usize; 1 << n];
    let mut rng = stream(seed, TAG_VERIFY, 1);
    for _ in 0..draws {
        counts[sample_step(inst, &s, &a, &mut rng).1.code().unwrap() as usize] += 1;
    }
    let mut report = CheckReport::new("sampling", name);
    let mut worst_z = 0.0f64;
    let support = (0..1u64 << n).filter(|&c| exact.prob(c) > 0.0).count();
    for (code, &c) in counts.iter().enumerate() {
        let p = exact.prob(code as u64);
        let freq = c as f64 / draws as f64;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        report.trials += 1;
        let z = if se > 0.0 {
            (freq - p).abs() / se
        } else if freq == p {
            0.0
        } else {
            f64::INFINITY
        };
        worst_z = worst_z.max(z);
        if z > 3.0 {
            report.violate(json!({ "outcome": code, "exact": p, "frequency": freq }), z);
        }
    }
    report.stats = json!({
        "state": s.code(),
        "action": a.members(),
        "draws": draws,
        "max_z": worst_z,
        // Each outcome is tested on its own, so even an exact sampler
        // trips about 0.27% of them.
        "expected_false_alarms": support as f64 * 0.0027,
    });
    Ok(report.conclude(Verdict::Fail))
}

/// The future term `E[V(s') | s, A]` recomputed by enumerating coupled coin
/// profiles, `Σ_profiles P(profile) V(apply_profile(A))`, against the
/// kernel-based value for every state and every subset.
pub fn check_profile_decomposition(
    inst: &Instance,
    name: &str,
    values: &ValueTable,
) -> Result<CheckReport> {
    let kernel = suite_kernel(inst)?;
    let n = inst.n();
    let profiles = 3u128.pow(n as u32) << inst.edges().len();
    let work = profiles << (2 * n);
    if work > MAX_DECOMPOSITION_WORK {
        return Err(NrmabError::CombinatorialCap {
            what: "profile-decomposition work",
            count: work,
            cap: MAX_DECOMPOSITION_WORK,
        });
    }
    let q = ExactQ::new(&kernel, values);
    let per_state: Vec<Result<Vec<(u64, f64, f64)>>> = (0..1u64 << n)
        .into_par_iter()
        .map(|s| {
            let state = State::from_code(n, s);
            let mut sigma = vec![0.0; 1 << n];
            for_each_profile(inst, &state, |profile, p| {
                for (mask, acc) in sigma.iter_mut().enumerate() {
                    let next =
                        apply_profile(inst, &state, &ActionSet::from_mask(mask as u64), profile);
                    *acc += p * values.at(&next);
                }
            })?;
            Ok(sigma
                .into_iter()
                .enumerate()
                .map(|(mask, sg)| (mask as u64, sg, q.future(s, mask as u64)))
                .collect())
        })
        .collect();
    let mut report = CheckReport::new("profile_decomposition", name);
    let mut worst = 0.0f64;
    for (s, rows) in per_state.into_iter().enumerate() {
        for (mask, sigma, future) in rows? {
            let dev = (sigma - future).abs();
            worst = worst.max(dev);
            report.trials += 1;
            if dev > 1e-9 {
                report.violate(
                    json!({ "state": s, "action_mask": mask, "profiles": sigma, "kernel": future }),
                    dev,
                );
            }
        }
    }
    report.stats = json!({ "max_abs_deviation": worst });
    Ok(report.conclude(Verdict::Fail))
}

/// `Q(s, ·)` for every subset of nodes.
fn subset_table(q: &ExactQ, n: usize, s: u64) -> Vec<f64> {
    (0..1u64 << n).map(|m| q.q_code(s, m)).collect()
}

struct SetFunctionFacts {
    submodular_violations: Vec<(u64, u64, usize, f64, f64)>,
    monotone_violations: usize,
    nonnegative: bool,
}

fn set_function_facts(f: &[f64], n: usize, tol: f64) -> SetFunctionFacts {
    let mut submodular_violations = Vec::new();
    let mut monotone_violations = 0;
    for b in 0..1u64 << n {
        for t in (0..n).filter(|&t| b >> t & 1 == 0) {
            let bt = b | 1 << t;
            let rhs = f[bt as usize] - f[b as usize];
            if rhs < -tol {
                monotone_violations += 1;
            }
            // Every submask A of B, including B itself.
            let mut a = b;
            loop {
                let lhs = f[(a | 1 << t) as usize] - f[a as usize];
                if lhs < rhs - tol {
                    submodular_violations.push((a, b, t, lhs, rhs));
                }
                if a == 0 {
                    break;
                }
                a = (a - 1) & b;
            }
        }
    }
    SetFunctionFacts {
        submodular_violations,
        monotone_violations,
        nonnegative: f.iter().all(|&x| x >= 0.0),
    }
}

/// Diminishing returns of `Q(s, ·)` over all states and all
/// `A ⊆ B, t ∉ B`. Monotonicity violations are counted alongside.
pub fn check_submodularity(
    inst: &Instance,
    name: &str,
    values: &ValueTable,
    tol: f64,
) -> Result<CheckReport> {
    let kernel = suite_kernel(inst)?;
    let n = inst.n();
    let q = ExactQ::new(&kernel, values);
    let facts: Vec<SetFunctionFacts> = (0..1u64 << n)
        .into_par_iter()
        .map(|s| set_function_facts(&subset_table(&q, n, s), n, tol))
        .collect();
    let mut report = CheckReport::new("submodularity", name);
    let mut monotone = 0;
    for (s, f) in facts.iter().enumerate() {
        monotone += f.monotone_violations;
        for &(a, b, t, lhs, rhs) in &f.submodular_violations {
            report.violate(
                json!({ "state": s, "a_mask": a, "b_mask": b, "t": t, "gain_a": lhs, "gain_b": rhs }),
                rhs - lhs,
            );
        }
    }
    // Triples (A ⊆ B, t ∉ B) per state: n · 3^(n−1).
    report.trials = (1usize << n) * n * 3usize.pow(n as u32 - 1);
    report.stats = json!({ "tolerance": tol, "monotonicity_violations": monotone });
    Ok(report.conclude(Verdict::Finding))
}

// B membership, the added node t, and the sampled gains for A and B.
type SampledTriple = (Vec<bool>, u64, f64, f64);

/// Submodularity on sampled triples at any graph size, with `V` modular and
/// `Q` estimated on one shared batch of coin profiles per triple.
pub fn check_submodularity_sampled(
    inst: &Instance,
    name: &str,
    triples: usize,
    profiles: usize,
    seed: u64,
) -> Result<CheckReport> {
    let n = inst.n();
    let mut report = CheckReport::new("submodularity_sampled", name);
    let outcomes: Vec<Option<SampledTriple>> = (0..triples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, TAG_VERIFY, 10_000 + i as u64);
            let s = State::from_bits(&(0..n).map(|_| rng.gen_bool(0.3)).collect::<Vec<_>>());
            let in_b: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
            let outside: Vec<usize> = (0..n).filter(|&v| !in_b[v]).collect();
            if outside.is_empty() {
                return None;
            }
            let t = outside[rng.gen_range(0..outside.len())];
            let b: Vec<usize> = (0..n).filter(|&v| in_b[v]).collect();
            let a: Vec<usize> = b.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
            let sets = [
                ActionSet::new(a.clone(), n).unwrap(),
                ActionSet::new(a.iter().copied().chain([t]), n).unwrap(),
                ActionSet::new(b.clone(), n).unwrap(),
                ActionSet::new(b.iter().copied().chain([t]), n).unwrap(),
            ];
            let mut sums = [0.0; 4];
            for _ in 0..profiles {
                let profile = sample_coin_profile(inst, &s, &mut rng);
                for (acc, set) in sums.iter_mut().zip(&sets) {
                    *acc += reward(inst, &apply_profile(inst, &s, set, &profile));
                }
            }
            let scale = inst.gamma() / profiles as f64;
            let gain_a = scale * (sums[1] - sums[0]);
            let gain_b = scale * (sums[3] - sums[2]);
            Some((in_b, t as u64, gain_a, gain_b))
        })
        .collect();
    for (i, o) in outcomes.into_iter().enumerate() {
        if let Some((_, t, gain_a, gain_b)) = o {
            report.trials += 1;
            if gain_a < gain_b - 1e-9 {
                report.violate(
                    json!({ "trial": i, "t": t, "gain_a": gain_a, "gain_b": gain_b }),
                    gain_b - gain_a,
                );
            }
        }
    }
    report.stats = json!({ "profiles_per_triple": profiles });
    Ok(report.conclude(Verdict::Finding))
}

/// Per-state ratio of the greedy set's Q-value to the best feasible set's.
/// The bound is only asserted on states where `Q(s, ·)` is non-negative,
/// monotone and submodular; the other states are listed separately.
pub fn check_greedy_ratio(inst: &Instance, name: &str, values: &ValueTable) -> Result<CheckReport> {
    let kernel = suite_kernel(inst)?;
    let n = inst.n();
    let k = inst.budget();
    let q = ExactQ::new(&kernel, values);
    let feasible: Vec<u64> = feasible_action_sets(n, k)?
        .iter()
        .map(ActionSet::mask)
        .collect();
    let rows: Vec<(f64, bool, Vec<usize>, f64)> = (0..1u64 << n)
        .into_par_iter()
        .map(|s| {
            let table = subset_table(&q, n, s);
            let facts = set_function_facts(&table, n, 1e-9);
            let preconditions = facts.nonnegative
                && facts.monotone_violations == 0
                && facts.submodular_violations.is_empty();
            let best = feasible
                .iter()
                .map(|&m| table[m as usize])
                .fold(f64::NEG_INFINITY, f64::max);
            let state = State::from_code(n, s);
            let mut oracle = QMarginal::new(&q, &state);
            let greedy = hill_climb(&mut oracle, k).selected;
            let value = table[greedy.mask() as usize];
            let ratio = if best == 0.0 { 1.0 } else { value / best };
            (ratio, preconditions, greedy.members().to_vec(), best)
        })
        .collect();
    let bound = 1.0 - (-1.0f64).exp();
    let mut report = CheckReport::new("greedy_ratio", name);
    let mut min_ratio = f64::INFINITY;
    let mut min_checked = f64::INFINITY;
    let mut unchecked = Vec::new();
    for (s, (ratio, pre, greedy, best)) in rows.into_iter().enumerate() {
        report.trials += 1;
        min_ratio = min_ratio.min(ratio);
        if !pre {
            unchecked.push(s);
            continue;
        }
        min_checked = min_checked.min(ratio);
        if ratio < bound - 1e-9 {
            report.violate(
                json!({ "state": s, "greedy": greedy, "ratio": ratio, "best": best }),
                bound - ratio,
            );
        }
    }
    report.stats = json!({
        "bound": bound,
        "min_ratio": min_ratio,
        "min_ratio_where_preconditions_hold": if min_checked.is_finite() { json!(min_checked) } else { json!(null) },
        "states_failing_preconditions": unchecked,
    });
    Ok(report.conclude(Verdict::Finding))
}

/// Composite meta-state walk against the hill-climbing operator for
/// `tables` random value tables, including the chosen sets and the
/// telescoping identity.
pub fn check_equivalence(
    inst: &Instance,
    name: &str,
    tables: usize,
    seed: u64,
) -> Result<CheckReport> {
    let kernel = suite_kernel(inst)?;
    let n = inst.n();
    let mut report = CheckReport::new("equivalence", name);
    let mut worst = 0.0f64;
    for j in 0..tables {
        let v = random_values(inst, &mut stream(seed, TAG_VERIFY, 100 + j as u64));
        let (b, acts) = bellman_hc_with_actions(&kernel, &v);
        for s in 0..1u64 << n {
            let walk = multi_bellman_composite(&kernel, &v, &State::from_code(n, s))?;
            let dev = (walk.value - b.get(s)).abs();
            worst = worst.max(dev);
            report.trials += 1;
            let telescoped = walk.base_reward + walk.telescoped;
            let final_reward = reward_code(inst, s);
            if dev > 1e-9 || walk.actions != acts[s as usize] || telescoped != final_reward {
                report.violate(
                    json!({
                        "table": j,
                        "state": s,
                        "composite": walk.value,
                        "bellman_hc": b.get(s),
                        "composite_actions": walk.actions.members(),
                        "greedy_actions": acts[s as usize].members(),
                        "telescoped_reward": telescoped,
                        "final_reward": final_reward,
                    }),
                    dev,
                );
            }
        }
    }
    report.stats = json!({ "max_abs_deviation": worst });
    Ok(report.conclude(Verdict::Fail))
}

/// `‖BV₁ − BV₂‖∞ / ‖V₁ − V₂‖∞` over random pairs. An excess over `γ` is a
/// failure for the exhaustive operator and a finding for hill-climbing.
pub fn check_contraction(
    inst: &Instance,
    name: &str,
    op: Operator,
    pairs: usize,
    seed: u64,
) -> Result<CheckReport> {
    let kernel = suite_kernel(inst)?;
    let gamma = inst.gamma();
    let mut report = CheckReport::new(&format!("contraction_{}", op.name()), name);
    let mut max_ratio = 0.0f64;
    let mut degenerate = 0;
    for i in 0..pairs {
        let mut rng = stream(seed, TAG_VERIFY, 1000 + i as u64);
        let v1 = random_values(inst, &mut rng);
        let v2 = random_values(inst, &mut rng);
        let gap = v1.sup_distance(&v2);
        if gap == 0.0 {
            degenerate += 1;
            continue;
        }
        let out = op
            .apply(&kernel, &v1)?
            .sup_distance(&op.apply(&kernel, &v2)?);
        let ratio = out / gap;
        max_ratio = max_ratio.max(ratio);
        report.trials += 1;
        if out > gamma * gap + 1e-9 {
            report.violate(
                json!({ "pair": i, "ratio": ratio, "v1": v1.values(), "v2": v2.values() }),
                ratio - gamma,
            );
        }
    }
    report.stats =
        json!({ "gamma": gamma, "max_ratio": max_ratio, "degenerate_pairs": degenerate });
    Ok(report.conclude(match op {
        Operator::Optimal => Verdict::Fail,
        Operator::HillClimb => Verdict::Finding,
    }))
}

const VI_TOL: f64 = 1e-12;
const VI_MAX_SWEEPS: usize = 5000;

/// Value iteration from `V₀ = 0`: successive deltas must shrink by `γ`, and
/// `‖V_t − V*‖∞ ≤ γ^t δ₁ / (1 − γ)` with `V*` the last iterate.
pub fn check_value_iteration_rate(
    inst: &Instance,
    name: &str,
    op: Operator,
) -> Result<CheckReport> {
    let kernel = suite_kernel(inst)?;
    let gamma = inst.gamma();
    let on_violation = match op {
        Operator::Optimal => Verdict::Fail,
        Operator::HillClimb => Verdict::Finding,
    };
    let mut report = CheckReport::new(&format!("vi_rate_{}", op.name()), name);
    let mut iterates = vec![ValueTable::zeros(inst.n())];
    let mut deltas = Vec::new();
    while deltas.len() < VI_MAX_SWEEPS {
        let next = op.apply(&kernel, iterates.last().unwrap())?;
        let delta = next.sup_distance(iterates.last().unwrap());
        iterates.push(next);
        deltas.push(delta);
        if delta <= VI_TOL {
            break;
        }
    }
    let converged = deltas.last().is_some_and(|&d| d <= VI_TOL);
    if !converged {
        report.violate(
            json!({ "non_convergence": { "sweeps": deltas.len(), "last_delta": deltas.last() } }),
            f64::INFINITY,
        );
    }
    for (t, w) in deltas.windows(2).enumerate() {
        report.trials += 1;
        if w[1] > gamma * w[0] + 1e-9 {
            report.violate(
                json!({ "kind": "delta", "t": t + 1, "delta": w[0], "next_delta": w[1] }),
                w[1] - gamma * w[0],
            );
        }
    }
    let star = iterates.last().unwrap();
    let d1 = deltas[0];
    for (t, v) in iterates.iter().enumerate() {
        report.trials += 1;
        let dist = v.sup_distance(star);
        let envelope = gamma.powi(t as i32) * d1 / (1.0 - gamma);
        if dist > envelope + 1e-9 {
            report.violate(
                json!({ "kind": "envelope", "t": t, "distance": dist, "envelope": envelope }),
                dist - envelope,
            );
        }
    }
    let max_rate = deltas
        .windows(2)
        .filter(|w| w[0] > 1e-9)
        .map(|w| w[1] / w[0])
        .fold(0.0f64, f64::max);
    report.stats = json!({
        "gamma": gamma,
        "sweeps": deltas.len(),
        "converged": converged,
        "max_delta_ratio": max_rate,
        "deltas_head": &deltas[..deltas.len().min(10)],
    });
    Ok(report.conclude(on_violation))
}
