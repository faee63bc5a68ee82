//! The `nrmab` command line.
//!
//! Every command writes its outputs first and a manifest last. The manifest
//! records the resolved configuration (defaults included), the crate
//! version, the master seeds, a sha256 digest per output file and the
//! wall-clock duration. Exit status is 0 on success, 1 on validation or
//! configuration errors and 2 when a theory check fails.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::baselines::{PolicyOptions, POLICY_NAMES};
use crate::error::NrmabError;
use crate::evaluation::{
    fit_growth, fit_loglog_slope, hill_climb_scaling, logs_to_csv, run_experiment, summary_text,
    tabular_sweep_scaling, ExperimentConfig, ScalingRow,
};
use crate::graph_model::{
    attach_attributes, generate_synthetic, ingest_edgelist, parse_attributes, EdgeModel, Instance,
    SyntheticSpec,
};
use crate::learning::{q_learn, LearningConfig, Selection};
use crate::verify::{any_fail, bundled_instances, run_checks, CheckReport, SuiteConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "nrmab",
    version,
    about = "Networked restless multi-armed bandits"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an instance from an edgelist and an attribute document.
    Ingest {
        #[arg(long)]
        edgelist: PathBuf,
        #[arg(long)]
        attrs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw a random instance.
    Generate {
        /// Generator spec (TOML or JSON). Overrides the flags below.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Exact number of edges.
        #[arg(long, conflicts_with = "edge_prob")]
        edges: Option<usize>,
        /// Erdos-Renyi edge probability.
        #[arg(long)]
        edge_prob: Option<f64>,
        #[arg(long, default_value_t = 2)]
        budget_k: usize,
        #[arg(long, default_value_t = 0.95)]
        gamma: f64,
        #[arg(long, default_value_t = 0.03)]
        cascade_weight: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo evaluation of named policies.
    Evaluate {
        #[arg(long)]
        instance: PathBuf,
        /// Comma-separated policy names.
        #[arg(long, value_delimiter = ',', required = true)]
        policies: Vec<String>,
        /// Comma-separated master seeds.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,6,7,8,9")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 50)]
        runs: usize,
        #[arg(long, default_value_t = 30)]
        horizon: usize,
        /// Policy tunables (TOML or JSON).
        #[arg(long)]
        options: Option<PathBuf>,
        /// Record decision times. Makes the raw CSV machine dependent.
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the theory checks.
    Verify {
        /// Built-in suite; only `small-suite` exists.
        #[arg(long, conflicts_with = "instance")]
        suite: Option<String>,
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Suite tunables (TOML or JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabular Q-learning.
    Train {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = Learner::Hc)]
        learner: Learner,
        /// Learner config (TOML or JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cost growth of tabular sweeps and hill-climbing decisions.
    Scaling {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long, value_delimiter = ',', required = true)]
        ns: Vec<usize>,
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Coin profiles per hill-climbing decision.
        #[arg(long, default_value_t = 64)]
        samples: usize,
        /// Timed repetitions per size; 0 reports operation counts only.
        #[arg(long, default_value_t = 0)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Learner {
    Tabular,
    Hc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Tabular,
    HillClimb,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    argv: Vec<String>,
    config: Value,
    version: &'static str,
    seeds: Vec<u64>,
    outputs: BTreeMap<String, String>,
    duration_ms: f64,
}

/// Collects outputs, then writes the manifest after all of them.
struct Run {
    command: &'static str,
    argv: Vec<String>,
    started: Instant,
    outputs: BTreeMap<String, String>,
}

impl Run {
    fn new(command: &'static str, argv: Vec<String>) -> Self {
        Run {
            command,
            argv,
            started: Instant::now(),
            outputs: BTreeMap::new(),
        }
    }

    fn write(&mut self, path: &Path, content: &str) -> anyhow::Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        fs::write(path, content).with_context(|| format!("writing {}", path.display()))?;
        self.outputs
            .insert(path.display().to_string(), sha256_hex(content.as_bytes()));
        Ok(())
    }

    fn finish(self, manifest_path: &Path, config: Value, seeds: Vec<u64>) -> anyhow::Result<()> {
        let manifest = Manifest {
            command: self.command,
            argv: self.argv,
            config,
            version: env!("CARGO_PKG_VERSION"),
            seeds,
            outputs: self.outputs,
            duration_ms: self.started.elapsed().as_secs_f64() * 1e3,
        };
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        fs::write(manifest_path, text)
            .with_context(|| format!("writing {}", manifest_path.display()))?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Manifest next to a single-file output: `<out>.manifest.json`.
fn sidecar(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn read(path: &Path, what: &str) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {what} file {}", path.display()))
}

fn load_instance(path: &Path) -> anyhow::Result<Instance> {
    let text = read(path, "instance")?;
    Instance::from_json(&text).with_context(|| format!("invalid instance {}", path.display()))
}

fn parse_doc<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> anyhow::Result<T> {
    let text = read(path, what)?;
    let parsed = if text.trim_start().starts_with('{') {
        serde_json::from_str(&text).map_err(anyhow::Error::from)
    } else {
        toml::from_str(&text).map_err(anyhow::Error::from)
    };
    parsed.with_context(|| format!("invalid {what} file {}", path.display()))
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit status; diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
        }
    };
    let argv: Vec<String> = argv
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match execute(cli.command, argv) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_INVALID
        }
    }
}

fn execute(command: Command, argv: Vec<String>) -> anyhow::Result<i32> {
    match command {
        Command::Ingest {
            edgelist,
            attrs,
            out,
        } => ingest(&edgelist, &attrs, &out, argv),
        Command::Generate {
            spec,
            n,
            edges,
            edge_prob,
            budget_k,
            gamma,
            cascade_weight,
            seed,
            out,
        } => {
            let spec = match spec {
                Some(path) => parse_doc::<SyntheticSpec>(&path, "generator spec")?,
                None => {
                    let model = match (edges, edge_prob) {
                        (Some(m), _) => EdgeModel::Count(m),
                        (None, Some(p)) => EdgeModel::ErdosRenyi(p),
                        (None, None) => bail!("one of --edges, --edge-prob or --spec is required"),
                    };
                    let mut s = SyntheticSpec::contact_network(n, model, budget_k, gamma);
                    s.cascade_weight = cascade_weight;
                    s
                }
            };
            generate(&spec, seed, &out, argv)
        }
        Command::Evaluate {
            instance,
            policies,
            seeds,
            runs,
            horizon,
            options,
            timing,
            out,
        } => {
            let options = match options {
                Some(path) => parse_doc::<PolicyOptions>(&path, "policy options")?,
                None => PolicyOptions::default(),
            };
            let cfg = ExperimentConfig {
                policies,
                seeds,
                runs_per_seed: runs,
                horizon,
                timing,
                options,
            };
            evaluate(&instance, &cfg, &out, argv)
        }
        Command::Verify {
            suite,
            instance,
            seed,
            config,
            out,
        } => {
            let mut cfg = match config {
                Some(path) => parse_doc::<SuiteConfig>(&path, "suite config")?,
                None => SuiteConfig::default(),
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            verify(suite.as_deref(), instance.as_deref(), &cfg, &out, argv)
        }
        Command::Train {
            instance,
            learner,
            config,
            seed,
            episodes,
            out,
        } => {
            let mut cfg = match config {
                Some(path) => parse_doc::<LearningConfig>(&path, "learner config")?,
                None => LearningConfig::default(),
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(e) = episodes {
                cfg.episodes = e;
            }
            train(&instance, learner, &cfg, &out, argv)
        }
        Command::Scaling {
            family,
            ns,
            k,
            samples,
            trials,
            seed,
            out,
        } => scaling(family, &ns, k, samples, trials, seed, &out, argv),
    }
}

fn ingest(edgelist: &Path, attrs: &Path, out: &Path, argv: Vec<String>) -> anyhow::Result<i32> {
    let mut run = Run::new("ingest", argv);
    let edge_text = read(edgelist, "edgelist")?;
    let attr_text = read(attrs, "attributes")?;
    let graph = ingest_edgelist(&edge_text)
        .with_context(|| format!("in edgelist {}", edgelist.display()))?;
    let doc = parse_attributes(&attr_text)
        .with_context(|| format!("in attributes {}", attrs.display()))?;
    let inst = attach_attributes(&graph, &doc)
        .with_context(|| format!("in attributes {}", attrs.display()))?;
    println!(
        "n={} edges={} duplicates_collapsed={} self_loops_dropped={}",
        inst.n(),
        inst.edges().len(),
        graph.duplicates_collapsed,
        graph.self_loops_dropped
    );
    if graph.self_loops_dropped > 0 {
        eprintln!("warning: dropped {} self-loop(s)", graph.self_loops_dropped);
    }
    run.write(out, &inst.to_json())?;
    let config = json!({
        "edgelist": edgelist.display().to_string(),
        "edgelist_sha256": sha256_hex(edge_text.as_bytes()),
        "attrs": attrs.display().to_string(),
        "attrs_sha256": sha256_hex(attr_text.as_bytes()),
        "attributes": doc,
        "n": inst.n(),
        "edges": inst.edges().len(),
        "duplicates_collapsed": graph.duplicates_collapsed,
        "self_loops_dropped": graph.self_loops_dropped,
    });
    run.finish(&sidecar(out), config, vec![])?;
    Ok(EXIT_OK)
}

fn generate(spec: &SyntheticSpec, seed: u64, out: &Path, argv: Vec<String>) -> anyhow::Result<i32> {
    let mut run = Run::new("generate", argv);
    let inst = generate_synthetic(spec, seed)?;
    println!("n={} edges={}", inst.n(), inst.edges().len());
    run.write(out, &inst.to_json())?;
    run.finish(
        &sidecar(out),
        json!({ "spec": spec, "seed": seed }),
        vec![seed],
    )?;
    Ok(EXIT_OK)
}

fn evaluate(
    instance: &Path,
    cfg: &ExperimentConfig,
    out: &Path,
    argv: Vec<String>,
) -> anyhow::Result<i32> {
    let mut run = Run::new("evaluate", argv);
    let unknown: Vec<&String> = cfg
        .policies
        .iter()
        .filter(|p| !POLICY_NAMES.contains(&p.as_str()))
        .collect();
    if !unknown.is_empty() {
        bail!(
            "unknown policy {}; valid names: {}",
            unknown
                .iter()
                .map(|p| format!("{p:?}"))
                .collect::<Vec<_>>()
                .join(", "),
            POLICY_NAMES.join(", ")
        );
    }
    let inst = Arc::new(load_instance(instance)?);
    let experiment = run_experiment(inst.clone(), cfg)?;
    for (name, why) in &experiment.summary.failures {
        eprintln!("warning: policy {name} failed to build: {why}");
    }
    let text = summary_text(&experiment.summary);
    print!("{text}");
    run.write(&out.join("episodes.csv"), &logs_to_csv(&experiment.logs))?;
    run.write(
        &out.join("summary.json"),
        &(serde_json::to_string_pretty(&experiment.summary)? + "\n"),
    )?;
    run.write(&out.join("summary.txt"), &text)?;
    let config = json!({
        "instance": instance.display().to_string(),
        "instance_sha256": sha256_hex(inst.to_json().as_bytes()),
        "experiment": cfg,
    });
    run.finish(&out.join("manifest.json"), config, cfg.seeds.clone())?;
    Ok(EXIT_OK)
}

fn verify(
    suite: Option<&str>,
    instance: Option<&Path>,
    cfg: &SuiteConfig,
    out: &Path,
    argv: Vec<String>,
) -> anyhow::Result<i32> {
    let mut run = Run::new("verify", argv);
    let targets: Vec<(String, Instance)> = match (suite, instance) {
        (Some("small-suite"), None) => bundled_instances()
            .into_iter()
            .map(|(n, i)| (n.to_string(), i))
            .collect(),
        (Some(other), None) => bail!("unknown suite {other:?}; the built-in suite is small-suite"),
        (None, Some(path)) => {
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            vec![(name, load_instance(path)?)]
        }
        _ => bail!("give exactly one of --suite or --instance"),
    };
    let reports: Vec<CheckReport> = targets
        .iter()
        .flat_map(|(name, inst)| run_checks(name, inst, cfg))
        .collect();
    let text: String = reports.iter().map(|r| r.summary_line() + "\n").collect();
    print!("{text}");
    run.write(
        &out.join("reports.json"),
        &(serde_json::to_string_pretty(&reports)? + "\n"),
    )?;
    run.write(&out.join("reports.txt"), &text)?;
    let config = json!({
        "suite": suite,
        "instance": instance.map(|p| p.display().to_string()),
        "suite_config": cfg,
    });
    run.finish(&out.join("manifest.json"), config, vec![cfg.seed])?;
    Ok(if any_fail(&reports) {
        EXIT_CHECK_FAILED
    } else {
        EXIT_OK
    })
}

fn train(
    instance: &Path,
    learner: Learner,
    cfg: &LearningConfig,
    out: &Path,
    argv: Vec<String>,
) -> anyhow::Result<i32> {
    let mut run = Run::new("train", argv);
    let inst = load_instance(instance)?;
    let selection = match learner {
        Learner::Tabular => Selection::Exhaustive,
        Learner::Hc => Selection::HillClimb,
    };
    let training = match q_learn(&inst, cfg, selection) {
        Ok(t) => t,
        Err(e @ (NrmabError::CombinatorialCap { .. } | NrmabError::EnumerationCap { .. })) => {
            bail!("{e}; the instance is too large for a tabular learner, evaluate the hc-rollout policy instead")
        }
        Err(e) => return Err(e.into()),
    };
    let last = training.returns.iter().rev().take(100).collect::<Vec<_>>();
    println!(
        "trained {} episodes; mean return over the last {}: {:.4}",
        training.returns.len(),
        last.len(),
        last.iter().copied().sum::<f64>() / last.len() as f64
    );
    run.write(&out.join("qtable.csv"), &training.table.to_text())?;
    run.write(&out.join("curve.csv"), &training.curve_csv())?;
    let config = json!({
        "instance": instance.display().to_string(),
        "instance_sha256": sha256_hex(inst.to_json().as_bytes()),
        "learner": learner,
        "learning": cfg,
    });
    run.finish(&out.join("manifest.json"), config, vec![cfg.seed])?;
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
fn scaling(
    family: Family,
    ns: &[usize],
    k: usize,
    samples: usize,
    trials: usize,
    seed: u64,
    out: &Path,
    argv: Vec<String>,
) -> anyhow::Result<i32> {
    let mut run = Run::new("scaling", argv);
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        bail!("--ns must be strictly increasing");
    }
    let rows = match family {
        Family::Tabular => tabular_sweep_scaling(ns, k, trials, seed)?,
        Family::HillClimb => hill_climb_scaling(ns, k, samples, trials, seed)?,
    };
    let points = |measure: &str| -> Vec<(f64, f64)> {
        rows.iter()
            .filter(|r| r.measure == measure)
            .map(|r| (r.n as f64, r.value))
            .collect()
    };
    let mut fits = BTreeMap::new();
    match family {
        Family::Tabular => {
            for m in ["pairs", "sweep_ms"] {
                let p = points(m);
                if p.len() >= 2 {
                    fits.insert(format!("{m}_growth_per_node"), fit_growth(&p));
                }
            }
        }
        Family::HillClimb => {
            for m in ["q_evaluations", "decision_ms"] {
                let p = points(m);
                if p.len() >= 2 {
                    fits.insert(format!("{m}_loglog_slope"), fit_loglog_slope(&p));
                }
            }
        }
    }
    for (name, v) in &fits {
        println!("{name} = {v:.4}");
    }
    run.write(out, &ScalingRow::csv(&rows))?;
    let config = json!({
        "family": family,
        "ns": ns,
        "k": k,
        "samples": samples,
        "trials": trials,
        "seed": seed,
    });
    run.finish(&sidecar(out), config, vec![seed])?;
    Ok(EXIT_OK)
}
