//! Command-line front end: `generate`, `infer`, `benchmark` and `curve`.

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{EstimationConfig, Profile};
use crate::datagen::{generate_dataset, DatasetName};
use crate::error::{Error, Result};
use crate::evaluation::{accuracy, audrc, decision_rate_curve, ScoredPrediction};
use crate::inference::{infer_pair, Direction, PairInference, Rule};
use crate::io::{list_pair_csvs, meta_path, read_meta, read_pair_csv, write_dataset};
use crate::seed::derive_seed;

#[derive(Debug, Parser)]
#[command(name = "skewd", version, about = "Cause-effect inference under skew-normal location-scale noise")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic benchmark dataset.
    Generate(GenerateArgs),
    /// Infer the causal direction of one pair.
    Infer(InferArgs),
    /// Run inference over a directory of pairs with known directions.
    Benchmark(BenchmarkArgs),
    /// Decision-rate-curve points from benchmark results.
    Curve(CurveArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Dataset family, e.g. ANs_985 or LSs_1750.
    #[arg(long, value_parser = parse_dataset)]
    pub dataset: DatasetName,
    #[arg(long, default_value_t = 100)]
    pub pairs: usize,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_dataset(s: &str) -> std::result::Result<DatasetName, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Likelihood,
    Independence,
    Both,
}

impl RuleArg {
    fn rules(self) -> Vec<Rule> {
        match self {
            RuleArg::Likelihood => vec![Rule::Likelihood],
            RuleArg::Independence => vec![Rule::Independence],
            RuleArg::Both => vec![Rule::Likelihood, Rule::Independence],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Paper,
    Fast,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, value_enum, default_value_t = ProfileArg::Fast)]
    pub profile: ProfileArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = RuleArg::Likelihood)]
    pub rule: RuleArg,
    /// Worker threads; falls back to SKEWD_THREADS, then all cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Location spline dimension.
    #[arg(long)]
    pub q: Option<usize>,
    /// Scale spline dimension.
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub lhs_candidates: Option<usize>,
    #[arg(long)]
    pub ei_candidates: Option<usize>,
    #[arg(long)]
    pub ecm_max_iters: Option<usize>,
}

impl RunArgs {
    pub fn config(&self) -> Result<EstimationConfig> {
        let mut c = EstimationConfig::for_profile(match self.profile {
            ProfileArg::Paper => Profile::Paper,
            ProfileArg::Fast => Profile::Fast,
        });
        if let Some(q) = self.q {
            c.fit.q = q;
        }
        if let Some(p) = self.p {
            c.fit.p = p;
        }
        if let Some(k) = self.folds {
            c.bo.folds = k;
        }
        if let Some(v) = self.lhs_candidates {
            c.bo.lhs_candidates = v;
        }
        if let Some(v) = self.ei_candidates {
            c.bo.ei_candidates = v;
        }
        if let Some(v) = self.ecm_max_iters {
            c.ecm.max_iters = v;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct InferArgs {
    pub csv: PathBuf,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    pub data_dir: PathBuf,
    #[command(flatten)]
    pub run: RunArgs,
    /// Output directory for `results.jsonl`, `summary.json` and `timings.log`.
    #[arg(long)]
    pub out: PathBuf,
    /// Only use the first N pairs.
    #[arg(long)]
    pub pairs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    pub results: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Rule to plot when results hold both.
    #[arg(long, value_enum)]
    pub rule: Option<RuleArg>,
}

/// One decision as printed by `infer` and stored by `benchmark`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub pair: String,
    pub rule: Rule,
    pub inferred: Direction,
    pub confidence: f64,
    pub tie: bool,
    pub ll_xy: Option<f64>,
    pub ll_yx: Option<f64>,
    pub p_xy: Option<f64>,
    pub p_yx: Option<f64>,
    pub lambda_xy: f64,
    pub lambda_yx: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
    pub seed: u64,
    pub profile: Profile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Direction>,
}

fn records(pair: &str, res: &PairInference, seed: u64, profile: Profile) -> Vec<DecisionRecord> {
    let lik = res.likelihood.is_some();
    let ind = res.independence.is_some();
    [res.likelihood, res.independence]
        .into_iter()
        .flatten()
        .map(|d| DecisionRecord {
            pair: pair.to_string(),
            rule: d.rule,
            inferred: d.inferred,
            confidence: d.confidence,
            tie: d.tie,
            ll_xy: lik.then_some(res.xy.conditional_loglik),
            ll_yx: lik.then_some(res.yx.conditional_loglik),
            p_xy: if ind { res.xy.residual_pvalue } else { None },
            p_yx: if ind { res.yx.residual_pvalue } else { None },
            lambda_xy: res.xy.fit.theta.lambda,
            lambda_yx: res.yx.fit.theta.lambda,
            runtime_seconds: None,
            seed,
            profile,
            truth: None,
        })
        .collect()
}

fn thread_count(jobs: Option<usize>) -> usize {
    jobs.or_else(|| std::env::var("SKEWD_THREADS").ok().and_then(|v| v.parse().ok()))
        .filter(|&j| j > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(jobs))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let pairs = generate_dataset(a.dataset, a.pairs, a.n, a.seed)?;
    write_dataset(&a.out, a.dataset, a.seed, &pairs)?;
    Ok(())
}

fn infer_one(x: &[f64], y: &[f64], config: &EstimationConfig, rules: &[Rule], seed: u64, parallel: bool) -> Result<PairInference> {
    infer_pair(x, y, config, seed, rules.contains(&Rule::Likelihood), rules.contains(&Rule::Independence), parallel)
}

fn cmd_infer(a: &InferArgs, out: &mut dyn Write) -> Result<()> {
    let config = a.run.config()?;
    let (x, y) = read_pair_csv(&a.csv)?;
    let pair = a.csv.file_stem().and_then(|s| s.to_str()).unwrap_or("pair").to_string();
    let start = Instant::now();
    let res = with_pool(a.run.jobs, || infer_one(&x, &y, &config, &a.run.rule.rules(), a.run.seed, true))??;
    let elapsed = start.elapsed().as_secs_f64();
    for mut r in records(&pair, &res, a.run.seed, config.profile) {
        r.runtime_seconds = Some(elapsed);
        writeln!(out, "{}", serde_json::to_string(&r)?)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSummary {
    pub pairs: usize,
    pub accuracy: f64,
    pub audrc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub profile: Profile,
    pub seed: u64,
    pub pairs: usize,
    pub skipped: usize,
    pub failed: usize,
    /// Scores of the first requested rule.
    pub accuracy: Option<f64>,
    pub audrc: Option<f64>,
    pub per_rule: BTreeMap<String, RuleSummary>,
}

fn summarize(recs: &[DecisionRecord], rule: Rule) -> Result<Option<RuleSummary>> {
    let preds = predictions(recs, rule)?;
    if preds.is_empty() {
        return Ok(None);
    }
    Ok(Some(RuleSummary { pairs: preds.len(), accuracy: accuracy(&preds)?, audrc: audrc(&preds)? }))
}

fn predictions(recs: &[DecisionRecord], rule: Rule) -> Result<Vec<ScoredPrediction>> {
    recs.iter()
        .filter(|r| r.rule == rule)
        .map(|r| {
            Ok(ScoredPrediction {
                pair_id: r.pair.clone(),
                predicted: r.inferred,
                truth: r.truth.ok_or_else(|| Error::Input(format!("record for pair {} has no truth", r.pair)))?,
                certainty: r.confidence,
            })
        })
        .collect()
}

fn cmd_benchmark(a: &BenchmarkArgs, log: &mut dyn Write) -> Result<BenchmarkSummary> {
    let config = a.run.config()?;
    let rules = a.run.rule.rules();
    let mut pairs = list_pair_csvs(&a.data_dir)?;
    if let Some(limit) = a.pairs {
        pairs.truncate(limit);
    }
    let mut jobs = Vec::new();
    let mut skipped = 0;
    for (idx, (id, path)) in pairs.iter().enumerate() {
        match read_meta(&meta_path(&a.data_dir, id)) {
            Ok(meta) => jobs.push((idx, id.clone(), path.clone(), meta.true_direction)),
            Err(e) => {
                writeln!(log, "warning: skipping pair {id}: no usable metadata ({e})")?;
                skipped += 1;
            }
        }
    }
    let results: Vec<(String, Result<(Vec<DecisionRecord>, f64)>)> = with_pool(a.run.jobs, || {
        jobs.par_iter()
            .map(|(idx, id, path, truth)| {
                let run = || -> Result<(Vec<DecisionRecord>, f64)> {
                    let (x, y) = read_pair_csv(path)?;
                    let seed = derive_seed(a.run.seed, *idx as u64);
                    let start = Instant::now();
                    let res = infer_one(&x, &y, &config, &rules, seed, false)?;
                    let mut recs = records(id, &res, seed, config.profile);
                    recs.iter_mut().for_each(|r| r.truth = Some(*truth));
                    Ok((recs, start.elapsed().as_secs_f64()))
                };
                (id.clone(), run())
            })
            .collect()
    })?;

    fs::create_dir_all(&a.out)?;
    let mut jsonl = String::new();
    let mut timings = String::new();
    let mut all = Vec::new();
    let mut failed = 0;
    for (id, r) in results {
        match r {
            Ok((recs, secs)) => {
                timings.push_str(&format!("{id}\t{secs:.3}\n"));
                for rec in recs {
                    jsonl.push_str(&serde_json::to_string(&rec)?);
                    jsonl.push('\n');
                    all.push(rec);
                }
            }
            Err(e) => {
                writeln!(log, "warning: pair {id} failed: {e}")?;
                failed += 1;
            }
        }
    }
    fs::write(a.out.join("results.jsonl"), jsonl)?;
    fs::write(a.out.join("timings.log"), timings)?;
    let mut per_rule = BTreeMap::new();
    for &rule in &rules {
        if let Some(s) = summarize(&all, rule)? {
            per_rule.insert(rule.to_string(), s);
        }
    }
    let primary = per_rule.get(&rules[0].to_string());
    let summary = BenchmarkSummary {
        profile: config.profile,
        seed: a.run.seed,
        pairs: all.iter().filter(|r| r.rule == rules[0]).count(),
        skipped,
        failed,
        accuracy: primary.map(|s| s.accuracy),
        audrc: primary.map(|s| s.audrc),
        per_rule,
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    fs::write(a.out.join("summary.json"), text)?;
    Ok(summary)
}

pub fn read_results(path: &Path) -> Result<Vec<DecisionRecord>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(line).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}

fn cmd_curve(a: &CurveArgs) -> Result<()> {
    let recs = read_results(&a.results)?;
    if recs.is_empty() {
        return Err(Error::Parse { line: 1, message: "results file is empty".into() });
    }
    let rule = match a.rule {
        Some(RuleArg::Independence) => Rule::Independence,
        Some(RuleArg::Likelihood) => Rule::Likelihood,
        Some(RuleArg::Both) => return Err(Error::Config("curve needs a single rule".into())),
        None if recs.iter().any(|r| r.rule == Rule::Likelihood) => Rule::Likelihood,
        None => Rule::Independence,
    };
    let preds = predictions(&recs, rule).map_err(|e| Error::Parse { line: 0, message: e.to_string() })?;
    if preds.is_empty() {
        return Err(Error::Parse { line: 0, message: format!("no {rule} records") });
    }
    let mut text = String::from("rate,accuracy\n");
    for (r, acc) in decision_rate_curve(&preds)? {
        text.push_str(&format!("{r:?},{acc:?}\n"));
    }
    fs::write(&a.out, text)?;
    Ok(())
}

/// Exit code for an error: 2 for usage and parse problems, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::Config(_) => 2,
        _ => 1,
    }
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 { write!(stdout, "{e}") } else { write!(stderr, "{e}") };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Infer(a) => cmd_infer(a, stdout),
        Command::Benchmark(a) => cmd_benchmark(a, stderr).and_then(|s| {
            writeln!(stdout, "{}", serde_json::to_string(&s)?)?;
            Ok(())
        }),
        Command::Curve(a) => cmd_curve(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}
