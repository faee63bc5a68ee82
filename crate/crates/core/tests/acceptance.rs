//! Acceptance run: one PASS/FAIL line per criterion, with its runtime
//! against the budget. Runs sequentially so the timings mean something.
//! Exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nrmab::baselines::PolicyOptions;
use nrmab::evaluation::{
    fit_growth, fit_loglog_slope, hill_climb_scaling, run_experiment, tabular_sweep_scaling,
    ExperimentConfig, PolicySummary,
};
use nrmab::graph_model::{
    attach_attributes, generate_synthetic, parse_attributes, EdgeList, EdgeModel, SyntheticSpec,
};
use nrmab::planning::Operator;
use nrmab::verify::{
    bundled_instances, check_contraction, check_equivalence, check_greedy_ratio,
    check_normalization, check_profile_decomposition, check_sampling, check_submodularity,
    check_value_iteration_rate, modular_values, CheckReport, Verdict,
};
use nrmab::Instance;

const TOL: f64 = 1e-9;
// The suite default seed.
const SEED: u64 = 0xC0FFEE;

struct Outcome {
    pass: bool,
    detail: String,
}

fn bundled(name: &str) -> Instance {
    bundled_instances()
        .into_iter()
        .find(|(n, _)| *n == name)
        .unwrap()
        .1
}

fn stat(r: &CheckReport, key: &str) -> f64 {
    r.stats[key].as_f64().unwrap_or(f64::NAN)
}

fn kernel_correctness() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, inst) in bundled_instances() {
        let norm = check_normalization(&inst, name).unwrap();
        let samp = check_sampling(&inst, name, 200_000, SEED).unwrap();
        pass &= norm.verdict == Verdict::Pass && samp.verdict == Verdict::Pass;
        parts.push(format!(
            "{name}: max|sum-1|={:.1e} max_z={:.2} ({} outcomes beyond 3 SE)",
            stat(&norm, "max_abs_deviation"),
            stat(&samp, "max_z"),
            samp.violation_count
        ));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn submodularity() -> Outcome {
    let six = bundled("tiny6");
    let mut pass = true;
    let mut parts = Vec::new();
    for k in 1..=3 {
        let inst = six.with_budget(k).unwrap();
        let r = check_submodularity(&inst, "tiny6", &modular_values(&inst), TOL).unwrap();
        pass &= r.violation_count == 0;
        parts.push(format!(
            "n=6 k={k}: {} triples, {} violations",
            r.trials, r.violation_count
        ));
    }
    let four = bundled("tiny4");
    let d = check_profile_decomposition(&four, "tiny4", &modular_values(&four)).unwrap();
    pass &= d.verdict == Verdict::Pass && stat(&d, "max_abs_deviation") <= TOL;
    parts.push(format!(
        "decomposition n=4 max dev {:.1e}",
        stat(&d, "max_abs_deviation")
    ));
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn greedy_guarantee() -> Outcome {
    let inst = bundled("tiny6");
    assert_eq!((inst.n(), inst.budget()), (6, 3));
    let r = check_greedy_ratio(&inst, "tiny6", &modular_values(&inst)).unwrap();
    let bound = 1.0 - (-1.0f64).exp() - TOL;
    let min = stat(&r, "min_ratio");
    Outcome {
        pass: min >= bound,
        detail: format!(
            "min Q(hc)/max Q = {min:.6} (bound {bound:.6}) over {} states",
            r.trials
        ),
    }
}

fn equivalence() -> Outcome {
    let inst = bundled("tiny5").with_budget(3).unwrap();
    let r = check_equivalence(&inst, "tiny5", 20, SEED).unwrap();
    let dev = stat(&r, "max_abs_deviation");
    Outcome {
        pass: dev <= TOL && r.verdict == Verdict::Pass,
        detail: format!("n=5 k=3, 20 tables: max |composite - B| = {dev:.1e}"),
    }
}

fn contraction() -> Outcome {
    let inst = bundled("tiny5");
    let opt = check_contraction(&inst, "tiny5", Operator::Optimal, 100, SEED).unwrap();
    let hc = check_contraction(&inst, "tiny5", Operator::HillClimb, 100, SEED).unwrap();
    let hc_note = match hc.verdict {
        Verdict::Finding => format!("FINDING {} pairs above gamma", hc.violation_count),
        _ => "no excess".into(),
    };
    Outcome {
        pass: opt.verdict == Verdict::Pass,
        detail: format!(
            "n=5 k={} gamma={}: bellman_opt max ratio {:.4} ({} violations); bellman_hc max ratio {:.4} ({hc_note})",
            inst.budget(),
            inst.gamma(),
            stat(&opt, "max_ratio"),
            opt.violation_count,
            stat(&hc, "max_ratio"),
        ),
    }
}

fn vi_rate() -> Outcome {
    let inst = bundled("tiny4");
    assert_eq!(inst.gamma(), 0.9);
    let opt = check_value_iteration_rate(&inst, "tiny4", Operator::Optimal).unwrap();
    let hc = check_value_iteration_rate(&inst, "tiny4", Operator::HillClimb).unwrap();
    Outcome {
        pass: opt.verdict == Verdict::Pass,
        detail: format!(
            "bellman_opt max delta ratio {:.6} over {} sweeps; bellman_hc max delta ratio {:.6} ({})",
            stat(&opt, "max_delta_ratio"),
            opt.stats["sweeps"],
            stat(&hc, "max_delta_ratio"),
            if hc.verdict == Verdict::Pass { "within envelope" } else { "FINDING above envelope" },
        ),
    }
}

/// 202 nodes, 692 random edges, attributes from the bundled contact
/// defaults (unit rewards, w = 0.03, k = 20).
fn village() -> Instance {
    let topology = generate_synthetic(
        &SyntheticSpec::contact_network(202, EdgeModel::Count(692), 20, 0.95),
        SEED,
    )
    .unwrap();
    let graph = EdgeList {
        labels: topology.labels().to_vec(),
        edges: topology.edges().iter().map(|e| (e.u, e.v)).collect(),
        self_loops_dropped: 0,
        duplicates_collapsed: 0,
    };
    let attrs = parse_attributes(include_str!("../data/contact_defaults.toml")).unwrap();
    attach_attributes(&graph, &attrs).unwrap()
}

fn final_activation(p: &PolicySummary) -> (f64, f64) {
    (
        *p.mean_activation.last().unwrap(),
        *p.sd_activation.last().unwrap(),
    )
}

fn policy_ordering() -> Outcome {
    let inst = Arc::new(village());
    assert_eq!(
        (inst.n(), inst.edges().len(), inst.budget()),
        (202, 692, 20)
    );
    let policies = [
        "none",
        "random",
        "whittle",
        "lookahead1",
        "topk",
        "hc-rollout",
        "hc-qlearn",
        "tabular-qlearn",
    ];
    let cfg = ExperimentConfig {
        policies: policies.iter().map(|s| s.to_string()).collect(),
        seeds: (0..10).collect(),
        runs_per_seed: 50,
        horizon: 30,
        timing: false,
        options: PolicyOptions::default(),
    };
    let exp = run_experiment(inst, &cfg).unwrap();
    let s = &exp.summary;
    let (none, _) = final_activation(&s.policies["none"]);
    let mut pass = true;
    let mut parts = vec![format!("none {:.3}", none)];
    for (name, p) in &s.policies {
        if name == "none" {
            continue;
        }
        let (m, _) = final_activation(p);
        let ok = m - none >= 0.03;
        pass &= ok;
        parts.push(format!(
            "{name} {m:.3} ({:+.1}pp{})",
            100.0 * (m - none),
            if ok { "" } else { " <3pp" }
        ));
    }
    for (name, why) in &s.failures {
        let short = why.split(';').next().unwrap_or(why);
        parts.push(format!("{name} not constructible at n=202 ({short})"));
    }
    let (hc, hc_sd) = final_activation(&s.policies["hc-rollout"]);
    let (la, la_sd) = final_activation(&s.policies["lookahead1"]);
    let sd = ((hc_sd * hc_sd + la_sd * la_sd) / 2.0).sqrt();
    let ordered = hc >= la - sd;
    pass &= ordered;
    parts.push(format!(
        "hc-rollout - lookahead1 = {:+.4} (pooled SD {sd:.4})",
        hc - la
    ));
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn near_optimality() -> Outcome {
    let inst = Arc::new(
        generate_synthetic(
            &SyntheticSpec::contact_network(10, EdgeModel::Count(15), 3, 0.95),
            SEED,
        )
        .unwrap(),
    );
    let cfg = ExperimentConfig {
        policies: vec!["hc-qlearn".into(), "tabular-qlearn".into(), "none".into()],
        seeds: (0..10).collect(),
        runs_per_seed: 50,
        horizon: 30,
        timing: false,
        options: PolicyOptions::default(),
    };
    let exp = run_experiment(inst, &cfg).unwrap();
    let mean = |p: &str| {
        let a = &exp.summary.policies[p].mean_activation;
        a.iter().sum::<f64>() / a.len() as f64
    };
    let (hc, tab, none) = (mean("hc-qlearn"), mean("tabular-qlearn"), mean("none"));
    Outcome {
        pass: (hc - tab).abs() <= 0.03,
        detail: format!(
            "n=10 k=3: mean activation over T=30 hc-qlearn {hc:.4}, tabular-qlearn {tab:.4}, gap {:.2}pp (none {none:.4})",
            100.0 * (hc - tab).abs()
        ),
    }
}

fn scaling() -> Outcome {
    let tab = tabular_sweep_scaling(&[8, 9, 10, 11, 12], 2, 5, SEED).unwrap();
    let pts = |rows: &[nrmab::evaluation::ScalingRow], m: &str| -> Vec<(f64, f64)> {
        rows.iter()
            .filter(|r| r.measure == m)
            .map(|r| (r.n as f64, r.value))
            .collect()
    };
    let pairs_growth = fit_growth(&pts(&tab, "pairs"));
    let ms_growth = fit_growth(&pts(&tab, "sweep_ms"));
    let hc = hill_climb_scaling(&[25, 50, 100, 200], 5, 64, 30, SEED).unwrap();
    let slope = fit_loglog_slope(&pts(&hc, "decision_ms"));
    let eval_slope = fit_loglog_slope(&pts(&hc, "q_evaluations"));
    Outcome {
        pass: ms_growth >= 2.0 && slope < 2.0,
        detail: format!(
            "tabular sweep wall-clock growth {ms_growth:.2}x/node (pair count {pairs_growth:.2}x/node); \
             hill-climb decision wall-clock log-log slope {slope:.2} (evaluation count slope {eval_slope:.2}), k=5"
        ),
    }
}

fn nrmab_cli(dir: &Path, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_nrmab"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Output digests keyed by file name, so runs into different directories
/// compare.
fn digests_by_name(manifest: &Path) -> BTreeMap<String, String> {
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(manifest).unwrap()).unwrap();
    m["outputs"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(k, v)| {
            let name = Path::new(k)
                .file_name()
                .unwrap()
                .to_string_lossy()
                .into_owned();
            (name, v.as_str().unwrap().to_string())
        })
        .collect()
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let edges: String = village()
        .edges()
        .iter()
        .map(|e| format!("{} {}\n", e.u, e.v))
        .collect();
    fs::write(d.join("village.txt"), edges).unwrap();
    fs::write(
        d.join("attrs.toml"),
        include_str!("../data/contact_defaults.toml"),
    )
    .unwrap();
    fs::write(
        d.join("suite.toml"),
        "contraction_pairs = 20\nequivalence_tables = 4\n",
    )
    .unwrap();
    let runs: Vec<(&str, Vec<&str>, &str)> = vec![
        (
            "ingest",
            vec![
                "ingest",
                "--edgelist",
                "village.txt",
                "--attrs",
                "attrs.toml",
                "--out",
                "{}/village.json",
            ],
            "{}/village.json.manifest.json",
        ),
        (
            "generate",
            vec![
                "generate",
                "--n",
                "8",
                "--edges",
                "10",
                "--budget-k",
                "2",
                "--seed",
                "9",
                "--out",
                "{}/g.json",
            ],
            "{}/g.json.manifest.json",
        ),
        (
            "evaluate",
            vec![
                "evaluate",
                "--instance",
                "a/g.json",
                "--policies",
                "none,random,whittle,lookahead1,topk,hc-rollout,hc-qlearn,tabular-qlearn",
                "--seeds",
                "0,1",
                "--runs",
                "5",
                "--horizon",
                "30",
                "--out",
                "{}/eval",
            ],
            "{}/eval/manifest.json",
        ),
        (
            "evaluate-village",
            vec![
                "evaluate",
                "--instance",
                "a/village.json",
                "--policies",
                "none,whittle,lookahead1",
                "--seeds",
                "0",
                "--runs",
                "3",
                "--horizon",
                "30",
                "--out",
                "{}/village-eval",
            ],
            "{}/village-eval/manifest.json",
        ),
        (
            "verify",
            vec![
                "verify",
                "--suite",
                "small-suite",
                "--config",
                "suite.toml",
                "--out",
                "{}/verify",
            ],
            "{}/verify/manifest.json",
        ),
        (
            "train",
            vec![
                "train",
                "--instance",
                "a/g.json",
                "--episodes",
                "300",
                "--seed",
                "3",
                "--out",
                "{}/train",
            ],
            "{}/train/manifest.json",
        ),
        (
            "scaling",
            vec![
                "scaling",
                "--family",
                "tabular",
                "--ns",
                "8,9,10",
                "--out",
                "{}/tab.csv",
            ],
            "{}/tab.csv.manifest.json",
        ),
        (
            "scaling-hc",
            vec![
                "scaling",
                "--family",
                "hill-climb",
                "--ns",
                "25,50,100",
                "--out",
                "{}/hc.csv",
            ],
            "{}/hc.csv.manifest.json",
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, args, manifest) in &runs {
        let mut seen = Vec::new();
        for side in ["a", "b"] {
            let args: Vec<String> = args.iter().map(|a| a.replace("{}", side)).collect();
            let args: Vec<&str> = args.iter().map(String::as_str).collect();
            nrmab_cli(d, &args);
            seen.push(digests_by_name(&d.join(manifest.replace("{}", side))));
        }
        let same = seen[0] == seen[1] && !seen[0].is_empty();
        pass &= same;
        parts.push(format!(
            "{label} {}",
            if same { "identical" } else { "DIFFERS" }
        ));
    }
    Outcome {
        pass,
        detail: parts.join(", "),
    }
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome, u64);
    let criteria: [Criterion; 10] = [
        ("kernel correctness", kernel_correctness, 60),
        ("submodularity", submodularity, 600),
        ("greedy guarantee", greedy_guarantee, 300),
        ("multi-step equivalence", equivalence, 300),
        ("contraction", contraction, 300),
        ("value iteration rate", vi_rate, 60),
        ("policy ordering", policy_ordering, 7200),
        (
            "near-optimality of hill-climbing learner",
            near_optimality,
            1800,
        ),
        ("runtime scaling", scaling, 1800),
        ("CLI determinism", determinism, 3600),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let id = format!("{}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| *f == id || name.contains(f.as_str())) {
            continue;
        }
        let t0 = Instant::now();
        let out = run();
        let took = t0.elapsed();
        let in_time = took <= Duration::from_secs(*limit);
        let pass = out.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {id:>2} {name}: {} [{:.1}s of {limit}s{}]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64(),
            if in_time { "" } else { ", over budget" }
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
