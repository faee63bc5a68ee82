//! Cost of one decision or one sweep as the graph grows.
//!
//! Counts (pairs touched, Q evaluations) are deterministic; wall-clock
//! rows are only produced when timing is requested.

use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;

use crate::baselines::ProfileEstimator;
use crate::dynamics::{reward, sample_step, State};
use crate::error::Result;
use crate::graph_model::{generate_synthetic, EdgeModel, Instance, SyntheticSpec};
use crate::learning::QTable;
use crate::planning::hill_climb;
use crate::rng::{stream, TAG_GENERATE, TAG_VERIFY};

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingRow {
    pub method: String,
    pub n: usize,
    pub k: usize,
    pub measure: String,
    pub value: f64,
}

impl ScalingRow {
    fn new(method: &str, n: usize, k: usize, measure: &str, value: f64) -> Self {
        ScalingRow {
            method: method.into(),
            n,
            k,
            measure: measure.into(),
            value,
        }
    }

    pub fn csv(rows: &[ScalingRow]) -> String {
        let mut out = String::from("method,n,k,measure,value\n");
        for r in rows {
            writeln!(
                out,
                "{},{},{},{},{:?}",
                r.method, r.n, r.k, r.measure, r.value
            )
            .unwrap();
        }
        out
    }
}

/// Contact-network style instance with about 3.4 edges per node.
fn scaling_instance(n: usize, k: usize, seed: u64) -> Result<Instance> {
    let edges = (n * 692).div_ceil(202).min(n * (n - 1) / 2);
    let spec = SyntheticSpec::contact_network(n, EdgeModel::Count(edges), k, 0.95);
    generate_synthetic(&spec, stream(seed, TAG_GENERATE, n as u64).gen())
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// One sampled Q-learning update for every `(state, feasible set)` pair.
/// Returns the number of pairs touched.
fn tabular_sweep(inst: &Instance, table: &mut QTable, seed: u64) -> usize {
    let mut rng = stream(seed, TAG_VERIFY, inst.n() as u64);
    let sets = table.action_sets().to_vec();
    let n = inst.n();
    let mut touched = 0;
    for code in 0..1u64 << n {
        let s = State::from_code(n, code);
        for a in &sets {
            let next = sample_step(inst, &s, a, &mut rng).1;
            let target = reward(inst, &s) + inst.gamma() * table.argmax(next.code().unwrap()).1;
            table.update(code, a, 0.1, target);
            touched += 1;
        }
    }
    touched
}

/// Per-sweep cost of exhaustive tabular learning. Emits `pairs` for every
/// `n` and, with `trials > 0`, the median `sweep_ms` over that many sweeps.
/// Sizes above the tabular cap are skipped with a `skipped` row.
pub fn tabular_sweep_scaling(
    ns: &[usize],
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<ScalingRow>> {
    let mut rows = Vec::new();
    for &n in ns {
        let inst = scaling_instance(n, k, seed)?;
        let mut table = match QTable::new(&inst, 0.0) {
            Ok(t) => t,
            Err(_) => {
                rows.push(ScalingRow::new("tabular-sweep", n, k, "skipped", 1.0));
                continue;
            }
        };
        let pairs = (1usize << n) * table.action_sets().len();
        rows.push(ScalingRow::new(
            "tabular-sweep",
            n,
            k,
            "pairs",
            pairs as f64,
        ));
        if trials > 0 {
            let times = (0..trials)
                .map(|_| {
                    let t0 = Instant::now();
                    let touched = tabular_sweep(&inst, &mut table, seed);
                    debug_assert_eq!(touched, pairs);
                    t0.elapsed().as_secs_f64() * 1e3
                })
                .collect();
            rows.push(ScalingRow::new(
                "tabular-sweep",
                n,
                k,
                "sweep_ms",
                median(times),
            ));
        }
    }
    Ok(rows)
}

/// Per-decision cost of hill-climbing on a sampled one-step estimator with
/// `samples` coin profiles. Emits the Q-evaluation count of the first
/// decision and, with `trials > 0`, the median `decision_ms`.
pub fn hill_climb_scaling(
    ns: &[usize],
    k: usize,
    samples: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<ScalingRow>> {
    let mut rows = Vec::new();
    for &n in ns {
        let inst = scaling_instance(n, k, seed)?;
        let mut rng = stream(seed, TAG_VERIFY, (1 << 32) | n as u64);
        let states: Vec<State> = (0..trials.max(1))
            .map(|_| State::from_bits(&(0..n).map(|_| rng.gen_bool(0.3)).collect::<Vec<_>>()))
            .collect();
        let decide = |s: &State, rng: &mut crate::rng::StreamRng| {
            let mut est = ProfileEstimator::new(&inst, s, samples, rng);
            hill_climb(&mut est, k).evaluations
        };
        let evaluations = decide(&states[0], &mut rng);
        rows.push(ScalingRow::new(
            "hill-climb",
            n,
            k,
            "q_evaluations",
            evaluations as f64,
        ));
        if trials > 0 {
            let times = states
                .iter()
                .map(|s| {
                    let t0 = Instant::now();
                    decide(s, &mut rng);
                    t0.elapsed().as_secs_f64() * 1e3
                })
                .collect();
            rows.push(ScalingRow::new(
                "hill-climb",
                n,
                k,
                "decision_ms",
                median(times),
            ));
        }
    }
    Ok(rows)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    slope(&pts)
}

/// Per-unit growth factor `exp(b)` of a least-squares fit `ln y = a + b x`.
pub fn fit_growth(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x, y.ln())).collect();
    slope(&pts).exp()
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_counts_are_exact() {
        let rows = tabular_sweep_scaling(&[4, 5], 2, 0, 1).unwrap();
        assert_eq!(rows[0].value, (16 * 11) as f64);
        assert_eq!(rows[1].value, (32 * 16) as f64);
    }

    #[test]
    fn hill_climb_counts_are_exact() {
        let k = 4;
        let rows = hill_climb_scaling(&[25, 50], k, 16, 0, 3).unwrap();
        for r in rows {
            let expect: usize = (1..=k).map(|j| r.n - j + 1).sum();
            assert_eq!(r.value, expect as f64);
        }
    }

    #[test]
    fn oversized_tabular_is_skipped() {
        let rows = tabular_sweep_scaling(&[30], 2, 1, 1).unwrap();
        assert_eq!(rows[0].measure, "skipped");
    }

    #[test]
    fn fits() {
        let pts: Vec<(f64, f64)> = [25.0, 50.0, 100.0]
            .iter()
            .map(|&x| (x, 3.0 * x * x))
            .collect();
        assert!((fit_loglog_slope(&pts) - 2.0).abs() < 1e-12);
        let pts: Vec<(f64, f64)> = (8..12).map(|n| (n as f64, 5.0 * 2.5f64.powi(n))).collect();
        assert!((fit_growth(&pts) - 2.5).abs() < 1e-9);
    }

    #[test]
    fn deterministic_rows() {
        assert_eq!(
            hill_climb_scaling(&[25], 3, 8, 0, 9).unwrap(),
            hill_climb_scaling(&[25], 3, 8, 0, 9).unwrap()
        );
    }
}
