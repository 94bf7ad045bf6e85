use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use atomo_core::atoms::{decompose_entrywise, decompose_svd, reshape_conv, Tensor};
use atomo_core::codec::{dense_cost, encode, message_cost};
use atomo_core::quantizer::{lq_norm, lq_quantize, lq_sparsity_budget, QNorm};
use atomo_core::sim::{train, tune_step_size, write_metrics_csv, Task, TaskKind, TrainSummary, TuneOutcome};
use atomo_core::sparsifier::{
    atomo_probabilities_select, atomo_probabilities_sorted, expected_second_moment, is_s_balanced,
    optimal_second_moment_lower_bound, sample_sparsification, RngStream, SparsifiedGradient, SparsityBudget,
};
use atomo_core::spectral::{compare_costs, matrix_norms, MatrixNorms, SparsificationComparison};
use clap::ValueEnum;
use serde::Serialize;

use crate::config::{FileConfig, Overrides};
use crate::input::{as_matrix, parse_values, read_tensor};
use crate::output::{print, to_json, to_kv_csv, to_table_csv, write_atomic, Format};

/// Default ratio of the loss threshold to the least-squares optimum.
const THRESHOLD_FACTOR: f64 = 1.05;

pub struct Ctx {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl Ctx {
    fn emit<T: Serialize>(&self, report: &T, csv: impl FnOnce() -> String) -> Result<String> {
        let text = match self.format {
            Format::Json => to_json(report),
            Format::Csv => csv(),
        };
        print(&text)?;
        Ok(text)
    }

    /// Writes the formatted report to `--out` with the resolved arguments
    /// beside it.
    fn save<A: Serialize>(&self, text: &str, args: &A) -> Result<()> {
        if let Some(out) = &self.out {
            write_atomic(out, text.as_bytes())?;
            write_atomic(&sidecar(out), to_json(args).as_bytes())?;
        }
        Ok(())
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".config.json");
    path.with_file_name(name)
}

fn budget(s: f64) -> Result<SparsityBudget> {
    Ok(SparsityBudget::new(s)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Sort,
    Select,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Decomposition {
    Entrywise,
    Svd,
}

#[derive(Serialize)]
struct ProbabilitiesArgs<'a> {
    command: &'static str,
    lambda: &'a [f64],
    budget: f64,
    variant: Variant,
}

#[derive(Serialize)]
struct ProbabilitiesReport {
    p: Vec<f64>,
    f: f64,
    bound: f64,
    balanced: bool,
    budget: f64,
}

#[derive(Serialize)]
struct ProbabilityRow {
    index: usize,
    lambda: f64,
    p: f64,
}

pub fn probabilities(
    ctx: &Ctx,
    input: Option<&Path>,
    values: Option<&str>,
    s: f64,
    variant: Variant,
) -> Result<()> {
    let lambda = match (input, values) {
        (Some(path), None) => read_tensor(path)?.into_data(),
        (None, Some(v)) => parse_values(v)?,
        _ => bail!("give exactly one of --input or --values"),
    };
    let s = budget(s)?;
    let p = match variant {
        Variant::Sort => atomo_probabilities_sorted(&lambda, s)?,
        Variant::Select => atomo_probabilities_select(&lambda, s)?,
    };
    let report = ProbabilitiesReport {
        f: expected_second_moment(&lambda, &p)?,
        bound: optimal_second_moment_lower_bound(&lambda, s),
        balanced: is_s_balanced(&lambda, s)?,
        budget: s.get(),
        p: p.into_vec(),
    };
    let text = ctx.emit(&report, || {
        let rows: Vec<ProbabilityRow> = lambda
            .iter()
            .zip(&report.p)
            .enumerate()
            .map(|(index, (&lambda, &p))| ProbabilityRow { index, lambda, p })
            .collect();
        to_table_csv(&rows)
    })?;
    ctx.save(&text, &ProbabilitiesArgs { command: "probabilities", lambda: &lambda, budget: s.get(), variant })
}

#[derive(Serialize)]
struct MessageArgs<'a> {
    command: &'static str,
    input: &'a Path,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    decomposition: Option<Decomposition>,
    #[serde(skip_serializing_if = "Option::is_none")]
    budget: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    q: Option<String>,
}

#[derive(Serialize)]
struct MessageReport {
    decomposition: &'static str,
    shape: Vec<usize>,
    budget: f64,
    kept_atoms: usize,
    expected_second_moment: f64,
    squared_norm: f64,
    reals_transmitted: u64,
    bytes_on_wire: u64,
    index_overhead_bytes: u64,
    dense_bytes: u64,
    seed: u64,
}

fn message_report(sg: &SparsifiedGradient, g: &Tensor, budget: f64, second_moment: f64, seed: u64) -> MessageReport {
    let cost = message_cost(sg);
    MessageReport {
        decomposition: match sg.decomposition_kind {
            atomo_core::atoms::DecompositionKind::Entrywise => "entrywise",
            atomo_core::atoms::DecompositionKind::Svd => "svd",
        },
        shape: sg.original_shape.clone(),
        budget,
        kept_atoms: sg.len(),
        expected_second_moment: second_moment,
        squared_norm: sg.squared_norm(),
        reals_transmitted: cost.reals_transmitted,
        bytes_on_wire: cost.bytes_on_wire,
        index_overhead_bytes: cost.index_overhead_bytes,
        dense_bytes: dense_cost(g).bytes_on_wire,
        seed,
    }
}

/// Writes the encoded message to `--out` and prints the report.
fn finish_message<A: Serialize>(ctx: &Ctx, sg: &SparsifiedGradient, report: &MessageReport, args: &A) -> Result<()> {
    ctx.emit(report, || to_kv_csv(report))?;
    if let Some(out) = &ctx.out {
        write_atomic(out, &encode(sg)?)?;
        write_atomic(&sidecar(out), to_json(args).as_bytes())?;
    }
    Ok(())
}

pub fn sparsify(ctx: &Ctx, input: &Path, s: f64, decomposition: Decomposition) -> Result<()> {
    let g = read_tensor(input)?;
    let d = match decomposition {
        Decomposition::Entrywise => decompose_entrywise(&g),
        Decomposition::Svd => match g.rank() {
            4 => decompose_svd(&reshape_conv(&g)?)?,
            _ => decompose_svd(&as_matrix(g.clone())?)?,
        },
    };
    let s = budget(s)?;
    let p = atomo_probabilities_sorted(&d.coefficients, s)?;
    let mut rng = RngStream::new(ctx.seed, 0, 0, 0);
    let sg = sample_sparsification(&d, &p, &mut rng)?;
    let report = message_report(&sg, &g, s.get(), expected_second_moment(&d.coefficients, &p)?, ctx.seed);
    let args = MessageArgs {
        command: "sparsify",
        input,
        seed: ctx.seed,
        decomposition: Some(decomposition),
        budget: Some(s.get()),
        q: None,
    };
    finish_message(ctx, &sg, &report, &args)
}

pub fn quantize(ctx: &Ctx, input: &Path, q: QNorm) -> Result<()> {
    let g = read_tensor(input)?;
    let mut rng = RngStream::new(ctx.seed, 0, 0, 0);
    let sg = lq_quantize(&g, q, &mut rng)?;
    let s = lq_sparsity_budget(g.data(), q)?.get();
    let l1: f64 = g.data().iter().map(|x| x.abs()).sum();
    let report = message_report(&sg, &g, s, l1 * lq_norm(g.data(), q), ctx.seed);
    let args = MessageArgs {
        command: "quantize",
        input,
        seed: ctx.seed,
        decomposition: None,
        budget: None,
        q: Some(q.to_string()),
    };
    finish_message(ctx, &sg, &report, &args)
}

#[derive(Serialize)]
struct CompareReport {
    shape: [usize; 2],
    #[serde(flatten)]
    comparison: SparsificationComparison,
    norms: MatrixNorms,
}

#[derive(Serialize)]
struct CompareArgs<'a> {
    command: &'static str,
    input: &'a Path,
    budget: f64,
}

pub fn compare(ctx: &Ctx, input: &Path, s: f64) -> Result<()> {
    let x = as_matrix(read_tensor(input)?)?;
    let (n, m) = x.matrix_dims()?;
    let report = CompareReport {
        shape: [n, m],
        comparison: compare_costs(&x, budget(s)?)?,
        norms: matrix_norms(&x)?,
    };
    let text = ctx.emit(&report, || to_kv_csv(&report))?;
    ctx.save(&text, &CompareArgs { command: "compare", input, budget: s })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    #[serde(flatten)]
    pub summary: TrainSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tuning: Option<TuneOutcome>,
}

/// Runs one configured experiment and writes `metrics.csv`,
/// `summary.json` and the resolved `config.toml` into `dir`.
fn run_experiment(config: &FileConfig, task: &Task, optimum: Option<f64>, dir: &Path) -> Result<TrainReport> {
    let mut train_config = config.train_config()?;
    let tuning = match config.train.tune {
        Some(t) => {
            let outcome = tune_step_size(task, &train_config, t.min_exponent..=t.max_exponent)?;
            train_config.step_size = outcome.best_step_size;
            Some(outcome)
        }
        None => None,
    };
    let result = train(task, &train_config)?;
    let threshold = config.train.loss_threshold.or(optimum.map(|o| THRESHOLD_FACTOR * o));
    let report = TrainReport {
        summary: TrainSummary::new(&train_config, &result.metrics, threshold, optimum),
        tuning,
    };

    let mut resolved = config.clone();
    resolved.train.step_size = Some(train_config.step_size);
    resolved.train.tune = None;
    resolved.sweep = None;
    let mut csv = Vec::new();
    write_metrics_csv(&result.metrics, &mut csv)?;
    write_atomic(&dir.join("metrics.csv"), &csv)?;
    write_atomic(&dir.join("summary.json"), to_json(&report).as_bytes())?;
    write_atomic(&dir.join("config.toml"), resolved.to_toml().as_bytes())?;
    Ok(report)
}

fn load(config: &Path, overrides: &Overrides) -> Result<(FileConfig, Task, Option<f64>)> {
    let mut cfg = FileConfig::load(config)?;
    cfg.apply(overrides);
    let task = Task::synthetic(&cfg.task, cfg.seed).context("building the task")?;
    let optimum = match task.kind {
        TaskKind::LinearRegression => Some(task.least_squares_optimum()?.1),
        TaskKind::LogisticRegression => None,
    };
    Ok((cfg, task, optimum))
}

fn out_dir(ctx: &Ctx, default: &str) -> PathBuf {
    ctx.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

pub fn train_cmd(ctx: &Ctx, config: &Path, overrides: &Overrides) -> Result<()> {
    let (cfg, task, optimum) = load(config, overrides)?;
    let report = run_experiment(&cfg, &task, optimum, &out_dir(ctx, "atomo-train"))?;
    ctx.emit(&report, || to_kv_csv(&report))?;
    Ok(())
}

#[derive(Serialize)]
struct ParetoRow<'a> {
    method: &'a str,
    bytes_per_round: f64,
    total_bytes: u64,
    final_loss: f64,
    step_size: f64,
    rounds: u64,
}

pub fn sweep(ctx: &Ctx, config: &Path, overrides: &Overrides) -> Result<()> {
    let (cfg, task, optimum) = load(config, overrides)?;
    let methods = match &cfg.sweep {
        Some(s) if !s.methods.is_empty() => s.methods.clone(),
        _ => bail!("the [sweep] section needs a nonempty methods list"),
    };
    let dir = out_dir(ctx, "atomo-sweep");
    let mut reports = Vec::with_capacity(methods.len());
    for method in methods {
        let mut entry = cfg.clone();
        entry.train.method = method;
        let slug = method.to_string().replace([':', '.'], "_");
        let report = run_experiment(&entry, &task, optimum, &dir.join(slug))
            .with_context(|| format!("method {method}"))?;
        reports.push(report);
    }
    let rows: Vec<ParetoRow> = reports
        .iter()
        .map(|r| ParetoRow {
            method: &r.summary.method,
            bytes_per_round: r.summary.bytes_per_round,
            total_bytes: r.summary.total_bytes,
            final_loss: r.summary.final_loss,
            step_size: r.summary.step_size,
            rounds: r.summary.rounds,
        })
        .collect();
    let pareto = to_table_csv(&rows);
    write_atomic(&dir.join("pareto.csv"), pareto.as_bytes())?;
    write_atomic(&dir.join("sweep.json"), to_json(&reports).as_bytes())?;
    write_atomic(&dir.join("config.toml"), cfg.to_toml().as_bytes())?;
    match ctx.format {
        Format::Json => print(&to_json(&reports)),
        Format::Csv => print(&pareto),
    }
}
