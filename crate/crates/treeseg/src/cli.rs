//! Command-line surface: `detect`, `simulate`, `compare`, `evaluate`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 ingestion error,
//! 4 numerical error.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use treeseg_core::dp::Segmentation;
use treeseg_core::dynamics::{edge_status_comparison, structure_comparison};
use treeseg_core::marginals::CumulativeStats;
use treeseg_core::segment::SegmentEngine;

use crate::config::{BackendChoice, KPriorChoice, MeanChoice, PriorChoice, RunConfig};
use crate::io::{self, fmt_f64};
use crate::pipeline::{prepare, run_detect, DetectResult};
use crate::simulate::{
    default_fractions, generate_dataset, Scenario, StructureKind,
};
use crate::{eval, AppError, AppResult};

#[derive(Parser)]
#[command(
    name = "treeseg",
    version,
    about = "Exact Bayesian change-point detection in the dependence structure of multivariate time-series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full change-point analysis on one or more CSV series
    Detect(DetectArgs),
    /// Generate synthetic datasets with known segment structures
    Simulate(SimulateArgs),
    /// Edge-status and whole-structure comparison on a fixed segmentation
    Compare(CompareArgs),
    /// Score detection output against simulation ground truth
    Evaluate(EvaluateArgs),
}

/// Flags mirroring `RunConfig`; any flag set here overrides the config file.
#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// TOML configuration file (flags override its fields)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Segment likelihood backend
    #[arg(long)]
    backend: Option<BackendChoice>,
    /// Prior construction
    #[arg(long)]
    prior: Option<PriorChoice>,
    /// Wishart degrees of freedom (default p + 10)
    #[arg(long)]
    alpha: Option<f64>,
    /// Mean treatment of the Gaussian model
    #[arg(long)]
    mean_mode: Option<MeanChoice>,
    /// Prior mean precision (unknown-mean mode)
    #[arg(long)]
    kappa0: Option<f64>,
    /// Tempering exponent (default: number of replicates in replicate mode)
    #[arg(long)]
    temper_alpha: Option<f64>,
    /// Largest number of segments considered
    #[arg(long)]
    k_max: Option<usize>,
    /// Prior on the number of segments
    #[arg(long)]
    k_prior: Option<KPriorChoice>,
    /// Rate of the truncated-Poisson K prior
    #[arg(long)]
    k_gamma: Option<f64>,
    /// Minimum admissible segment length
    #[arg(long)]
    l_min: Option<usize>,
    /// Edge-status prior triple: absent,changed,present
    #[arg(long, value_delimiter = ',', num_args = 3)]
    lambda: Option<Vec<f64>>,
    /// Prior probability that all segments share one tree
    #[arg(long)]
    pi: Option<f64>,
    /// Posterior-mass floor for the edge-time sweep
    #[arg(long)]
    mass_floor: Option<f64>,
    /// Skip the instant edge-probability tensor
    #[arg(long)]
    no_edge_time: bool,
    /// Center and scale every column before analysis
    #[arg(long)]
    standardize: bool,
    /// Seed for any randomized utility (analysis itself is deterministic)
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for building the segment-likelihood matrix (0 = auto)
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> AppResult<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.backend {
            config.backend = v;
        }
        if let Some(v) = self.prior {
            config.prior = v;
        }
        if let Some(v) = self.alpha {
            config.alpha = Some(v);
        }
        if let Some(v) = self.mean_mode {
            config.mean_mode = v;
        }
        if let Some(v) = self.kappa0 {
            config.kappa0 = v;
        }
        if let Some(v) = self.temper_alpha {
            config.temper_alpha = Some(v);
        }
        if let Some(v) = self.k_max {
            config.k_max = v;
        }
        if let Some(v) = self.k_prior {
            config.k_prior = v;
        }
        if let Some(v) = self.k_gamma {
            config.k_gamma = v;
        }
        if let Some(v) = self.l_min {
            config.l_min = v;
        }
        if let Some(v) = &self.lambda {
            config.lambda = [v[0], v[1], v[2]];
        }
        if let Some(v) = self.pi {
            config.pi = v;
        }
        if let Some(v) = self.mass_floor {
            config.mass_floor = v;
        }
        if self.no_edge_time {
            config.edge_time = false;
        }
        if self.standardize {
            config.standardize = true;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.threads {
            config.threads = v;
        }
        if let Some(v) = &self.out {
            config.output_dir = v.clone();
        }
        config.apply_env();
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct DetectArgs {
    /// Input CSV file(s) or directory; several inputs run in replicate mode
    #[arg(required = true)]
    data: Vec<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Structure law per segment
    #[arg(long, default_value = "uniform-tree")]
    kind: SimKind,
    /// Connection probability (erdos-renyi only; default 2/p)
    #[arg(long)]
    pc: Option<f64>,
    #[arg(long, default_value_t = 210)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    p: usize,
    /// Segment length fractions summing to 1
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of datasets to emit (independent per-index streams)
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long, default_value = "treeseg-sim")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum SimKind {
    UniformTree,
    ErdosRenyi,
}

#[derive(Args)]
struct CompareArgs {
    /// Input CSV file(s), as in detect
    #[arg(required = true)]
    data: Vec<PathBuf>,
    /// Sorted interior change-points of the fixed segmentation, e.g. 31,41,61
    #[arg(long, value_delimiter = ',')]
    change_points: Vec<usize>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Output directory of a detect run
    #[arg(long)]
    results: PathBuf,
    /// Ground-truth JSON emitted by simulate
    #[arg(long)]
    truth: PathBuf,
    /// Where to write the metrics (default: the results directory)
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Entry point returning the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Detect(args) => cmd_detect(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Compare(args) => cmd_compare(&args),
        Command::Evaluate(args) => cmd_evaluate(&args),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn cmd_detect(args: &DetectArgs) -> AppResult<()> {
    let config = args.config.resolve()?;
    let datasets = io::read_replicates(&args.data)?;
    let replicate_ids: Vec<String> = datasets
        .iter()
        .map(|d| d.replicate_id.clone().unwrap_or_default())
        .collect();
    let (n, p, replicates) = (datasets[0].len(), datasets[0].dim(), datasets.len());
    let start = Instant::now();
    let prepared = prepare(datasets, &config)?;
    let result = run_detect(&prepared, &config)?;
    let wall = start.elapsed().as_secs_f64();
    write_detect_outputs(&config, &result, n, p, &replicate_ids, wall)?;

    let summary = &result.summary;
    println!(
        "N = {n}, p = {p}, replicates = {replicates}: K-hat (posterior mode) = {}, K-hat (joint MAP) = {}",
        summary.k_hat_1, summary.k_hat_2
    );
    println!(
        "MAP change-points (K = {}): {:?}",
        summary.k_hat_2,
        summary.global_map().change_points()
    );
    println!("outputs in {}", config.output_dir.display());
    Ok(())
}

fn write_detect_outputs(
    config: &RunConfig,
    result: &DetectResult,
    n: usize,
    p: usize,
    replicate_ids: &[String],
    wall_seconds: f64,
) -> AppResult<()> {
    let out = &config.output_dir;
    let summary = &result.summary;
    io::write_string(&out.join("resolved_config.toml"), &config.to_toml())?;

    let mut doc = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_seconds": wall_seconds,
        "n": n,
        "p": p,
        "replicates": replicate_ids,
        "k_max": summary.k_max,
        "log_evidence_by_k": summary.log_evidence_by_k,
        "posterior_k": summary.posterior_k,
        "k_hat_posterior_mode": summary.k_hat_1,
        "k_hat_joint_map": summary.k_hat_2,
        "map_change_points_by_k": summary
            .map_by_k
            .iter()
            .map(|m| m.change_points().to_vec())
            .collect::<Vec<_>>(),
        "map_log_joint_by_k": summary.map_log_joint_by_k,
        "global_map_change_points": summary.global_map().change_points().to_vec(),
        "config": serde_json::to_value(config)?,
    });
    if let Some(tensor) = &result.edge_time {
        doc["edge_time"] = serde_json::json!({
            "k": tensor.k,
            "mass_warning": tensor.mass_warning,
            "max_skipped_mass": tensor
                .skipped_mass
                .iter()
                .cloned()
                .fold(0.0f64, f64::max),
        });
    }
    io::write_json(&out.join("summary.json"), &doc)?;

    // B(t)
    let rows: Vec<Vec<String>> =
        (2..=n).map(|t| vec![t.to_string(), fmt_f64(summary.b[t])]).collect();
    io::write_table(&out.join("b.csv"), "t,prob", &rows)?;

    // B_K(t)
    let mut rows = Vec::new();
    for k in 2..=summary.k_max {
        for t in 2..=n {
            rows.push(vec![k.to_string(), t.to_string(), fmt_f64(summary.b_k[k - 1][t])]);
        }
    }
    io::write_table(&out.join("b_k.csv"), "k_total,t,prob", &rows)?;

    // B_{K,k}(t)
    let mut rows = Vec::new();
    for k_total in 2..=summary.k_max {
        for (ki, row) in summary.b_kk[k_total - 1].iter().enumerate() {
            for t in 2..=n {
                rows.push(vec![
                    k_total.to_string(),
                    (ki + 1).to_string(),
                    t.to_string(),
                    fmt_f64(row[t]),
                ]);
            }
        }
    }
    io::write_table(&out.join("b_kk.csv"), "k_total,k,t,prob", &rows)?;

    // S_K sparse
    let mut rows = Vec::new();
    for k_total in 1..=summary.k_max {
        for &(s, t, prob) in &summary.s_k[k_total - 1] {
            rows.push(vec![
                k_total.to_string(),
                s.to_string(),
                t.to_string(),
                fmt_f64(prob),
            ]);
        }
    }
    io::write_table(&out.join("s_k.csv"), "k_total,s,t,prob", &rows)?;

    // instant edge probabilities, long format, 1-based variable indices
    if let Some(tensor) = &result.edge_time {
        let mut rows = Vec::new();
        for (idx, m) in tensor.probs.iter().enumerate() {
            for i in 0..p {
                for j in (i + 1)..p {
                    rows.push(vec![
                        (idx + 1).to_string(),
                        (i + 1).to_string(),
                        (j + 1).to_string(),
                        fmt_f64(m.get(i, j)),
                    ]);
                }
            }
        }
        io::write_table(&out.join("edge_time.csv"), "t,i,j,prob", &rows)?;
    }

    // per-segment edge posteriors on the global MAP segmentation
    if !result.map_segment_edges.is_empty() {
        let mut rows = Vec::new();
        for (s, t, m) in &result.map_segment_edges {
            for i in 0..p {
                for j in (i + 1)..p {
                    rows.push(vec![
                        s.to_string(),
                        t.to_string(),
                        (i + 1).to_string(),
                        (j + 1).to_string(),
                        fmt_f64(m.get(i, j)),
                    ]);
                }
            }
        }
        io::write_table(&out.join("map_segment_edges.csv"), "s,t,i,j,prob", &rows)?;
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> AppResult<()> {
    let kind = match args.kind {
        SimKind::UniformTree => StructureKind::UniformTree,
        SimKind::ErdosRenyi => StructureKind::ErdosRenyi {
            p_c: args.pc.unwrap_or(2.0 / args.p as f64),
        },
    };
    let scenario = Scenario {
        kind,
        n: args.n,
        p: args.p,
        fractions: args.fractions.clone().unwrap_or_else(default_fractions),
        seed: args.seed,
    };
    scenario.validate()?;
    let echo = toml::to_string_pretty(&scenario)
        .map_err(|e| AppError::Config(format!("scenario serialization: {e}")))?;
    io::write_string(&args.out.join("scenario.toml"), &echo)?;
    for index in 0..args.count {
        let (data, truth) = generate_dataset(&scenario, index)?;
        let (data_name, truth_name) = if args.count == 1 {
            ("data.csv".to_string(), "truth.json".to_string())
        } else {
            (format!("data_{index:03}.csv"), format!("truth_{index:03}.json"))
        };
        io::write_dataset_csv(&args.out.join(data_name), &data)?;
        io::write_truth_json(&args.out.join(truth_name), &truth)?;
    }
    println!(
        "wrote {} dataset(s) with change-points {:?} to {}",
        args.count,
        scenario.change_points(),
        args.out.display()
    );
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> AppResult<()> {
    let config = args.config.resolve()?;
    if config.backend != BackendChoice::Tree {
        return Err(AppError::Config("compare requires the tree backend".into()));
    }
    let datasets = io::read_replicates(&args.data)?;
    let n = datasets[0].len();
    let p = datasets[0].dim();
    let prepared = prepare(datasets, &config)?;
    let segmentation = Segmentation::new(n, args.change_points.clone())
        .map_err(|e| AppError::Config(e.to_string()))?;
    let cums: Vec<CumulativeStats> =
        prepared.datasets.iter().map(CumulativeStats::new).collect();
    let b = config.edge_prior(p);
    let engine = SegmentEngine::new(&cums, &prepared.prior, &b).map_err(AppError::from_core)?;

    let (statuses, status_trivial) =
        edge_status_comparison(&engine, &segmentation, config.lambda)
            .map_err(AppError::from_core)?;
    let structure = structure_comparison(&engine, &segmentation, config.pi)
        .map_err(AppError::from_core)?;

    let out = &config.output_dir;
    io::write_string(&out.join("resolved_config.toml"), &config.to_toml())?;
    let rows: Vec<Vec<String>> = statuses
        .iter()
        .map(|s| {
            vec![
                (s.i + 1).to_string(),
                (s.j + 1).to_string(),
                fmt_f64(s.posterior[0]),
                fmt_f64(s.posterior[1]),
                fmt_f64(s.posterior[2]),
            ]
        })
        .collect();
    io::write_table(
        &out.join("edge_status.csv"),
        "i,j,always_absent,changed,always_present",
        &rows,
    )?;
    let doc = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "n": n,
        "p": p,
        "change_points": segmentation.change_points(),
        "lambda": config.lambda,
        "pi": config.pi,
        "pi_star": structure.pi_star,
        "log_q0": structure.log_q0,
        "log_q": structure.log_q,
        "trivial_comparison": status_trivial || structure.trivial,
        "config": serde_json::to_value(&config)?,
    });
    io::write_json(&out.join("comparison.json"), &doc)?;

    if status_trivial || structure.trivial {
        println!("warning: single-segment (or single-tree) comparison is trivial");
    }
    println!(
        "pi* = {:.6} (prior {}), {} edges written to {}",
        structure.pi_star,
        config.pi,
        statuses.len(),
        out.display()
    );
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> AppResult<()> {
    let truth = io::read_truth_json(&args.truth)?;
    let summary_text = std::fs::read_to_string(args.results.join("summary.json"))
        .map_err(|e| AppError::Ingestion(format!("{}: {e}", args.results.display())))?;
    let summary: serde_json::Value = serde_json::from_str(&summary_text)
        .map_err(|e| AppError::Ingestion(format!("summary.json: {e}")))?;
    let n = summary["n"]
        .as_u64()
        .ok_or_else(|| AppError::Ingestion("summary.json: missing n".into()))? as usize;
    let k_hat_1 = summary["k_hat_posterior_mode"].as_u64().unwrap_or(0) as usize;
    let k_true = truth.change_points.len() + 1;

    let b = eval::read_b_csv(&args.results.join("b.csv"))?;
    let maxima = eval::local_maxima(&b, n);
    let localization = eval::localization(&truth.change_points, &maxima);

    let edge_time_path = args.results.join("edge_time.csv");
    let (auc_by_time, midpoint_auc) = if edge_time_path.exists() {
        let probs = eval::read_edge_time_csv(&edge_time_path)?;
        if probs.len() != n {
            return Err(AppError::Ingestion(format!(
                "edge_time.csv covers {} time points, expected {n}",
                probs.len()
            )));
        }
        let by_time = eval::auc_by_time(&probs, &truth);
        let midpoints = eval::segment_midpoints(&truth.change_points, n);
        let vals: Vec<f64> =
            midpoints.iter().filter_map(|&t| by_time[t - 1]).collect();
        let mean = if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        };
        (Some(by_time), mean)
    } else {
        (None, None)
    };

    let out_dir = args.out.clone().unwrap_or_else(|| args.results.clone());
    let doc = serde_json::json!({
        "k_true": k_true,
        "k_hat_posterior_mode": k_hat_1,
        "k_correct": k_hat_1 == k_true,
        "posterior_local_maxima": maxima,
        "true_change_points": truth.change_points,
        "localization": localization
            .iter()
            .map(|&(cp, d)| serde_json::json!({"change_point": cp, "distance": d}))
            .collect::<Vec<_>>(),
        "mean_midpoint_auc": midpoint_auc,
    });
    io::write_json(&out_dir.join("metrics.json"), &doc)?;
    if let Some(by_time) = &auc_by_time {
        let rows: Vec<Vec<String>> = by_time
            .iter()
            .enumerate()
            .map(|(idx, auc)| {
                vec![
                    (idx + 1).to_string(),
                    auc.map(fmt_f64).unwrap_or_else(|| "".to_string()),
                ]
            })
            .collect();
        io::write_table(&out_dir.join("auc_by_time.csv"), "t,auc", &rows)?;
    }

    println!("K true {k_true}, K-hat {k_hat_1}");
    for (cp, d) in &localization {
        match d {
            Some(d) => println!("change-point {cp}: nearest posterior maximum at distance {d}"),
            None => println!("change-point {cp}: no posterior local maxima found"),
        }
    }
    if let Some(auc) = midpoint_auc {
        println!("mean mid-segment AUC = {auc:.4}");
    }
    Ok(())
}
