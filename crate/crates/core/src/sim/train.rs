use std::io::Write;
use std::ops::RangeInclusive;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Method, TrainConfig};
use super::task::Task;
use crate::atoms::{decompose_entrywise, DecompositionKind, Tensor};
use crate::codec;
use crate::error::{Error, Result};
use crate::quantizer::{lq_quantize, qsgd_1bit, terngrad};
use crate::sparsifier::{sparsify, RngStream, SparsifiedGradient};
use crate::spectral::spectral_atomo;

/// Stream layer index reserved for mini-batch sampling.
const BATCH_LAYER: u64 = u64::MAX;
/// Stream round index reserved for initialization.
const INIT_ROUND: u64 = u64::MAX - 1;
const INIT_SCALE: f64 = 0.01;
/// A run whose loss grows past this multiple of the initial loss is
/// declared diverged.
const DIVERGENCE_FACTOR: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    /// 1-based.
    pub round: u64,
    /// Full training loss after this round's update.
    pub loss: f64,
    /// Norm of the uncompressed mini-batch gradient averaged over workers.
    pub grad_norm: f64,
    /// `‖ĝ‖²` of the gradient the server applied.
    pub second_moment: f64,
    pub round_bytes: u64,
    /// Bytes sent by all workers through this round.
    pub bytes: u64,
    /// Wall time of the round, or 0 when not recorded.
    pub millis: f64,
}

/// What one worker sends in one round.
#[derive(Debug, Clone)]
pub struct WorkerOutput {
    /// One encoded message per layer.
    pub messages: Vec<Vec<u8>>,
    /// The uncompressed mini-batch gradient, `features x outputs`.
    pub gradient: Tensor,
}

/// Deterministic initial model: `0.01 · N(0, 1)` from the seed's init stream.
pub fn initial_params(task: &Task, master_seed: u64) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = RngStream::new(master_seed, INIT_ROUND, 0, 0);
    (0..task.dim())
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            INIT_SCALE * z
        })
        .collect()
}

/// Uniform-with-replacement indices for one worker's shard of the batch.
pub fn worker_batch(task: &Task, config: &TrainConfig, round: u64, worker: usize) -> Vec<usize> {
    let mut rng = RngStream::new(config.master_seed, round, worker as u64, BATCH_LAYER);
    (0..config.per_worker_batch()).map(|_| rng.index(task.samples)).collect()
}

/// Compresses one layer gradient with its own stream and encodes it.
pub fn compress_layer(method: Method, layer: &Tensor, rng: &mut RngStream) -> Result<Vec<u8>> {
    if let Method::Dense = method {
        return Ok(codec::encode_dense(layer)?);
    }
    let sg = if layer.data().iter().all(|&v| v == 0.0) {
        // nothing to send; the zero message is trivially unbiased
        SparsifiedGradient {
            decomposition_kind: DecompositionKind::Entrywise,
            kept_atoms: Vec::new(),
            original_shape: layer.shape().to_vec(),
            budget_used: 0.0,
        }
    } else {
        match method {
            Method::Dense => unreachable!(),
            Method::AtomoEntrywise(s) => sparsify(&decompose_entrywise(layer), s, rng)?,
            Method::SpectralAtomo(s) => spectral_atomo(layer, s, rng)?,
            Method::Qsgd1Bit => qsgd_1bit(layer, rng)?,
            Method::TernGrad => terngrad(layer, rng)?,
            Method::Lq(q) => lq_quantize(layer, q, rng)?,
        }
    };
    Ok(codec::encode(&sg)?)
}

/// Worker side of a round: sample a shard, take the gradient at `params`,
/// compress every layer.
pub fn worker_step(
    task: &Task,
    config: &TrainConfig,
    params: &[f64],
    round: u64,
    worker: usize,
) -> Result<WorkerOutput> {
    let batch = worker_batch(task, config, round, worker);
    let gradient = task.gradient(params, &batch)?;
    let messages = task
        .layers()
        .iter()
        .enumerate()
        .map(|(l, layer)| {
            let block = Tensor::matrix(layer.rows, layer.cols, gradient.data()[layer.range()].to_vec())?;
            let mut rng = RngStream::new(config.master_seed, round, worker as u64, l as u64);
            compress_layer(config.method, &block, &mut rng).map_err(|e| Error::Round {
                round,
                worker,
                layer: l,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WorkerOutput { messages, gradient })
}

/// Server side: decode, materialize and average worker messages in worker
/// order. Returns the averaged gradient and the bytes received.
pub fn aggregate(task: &Task, outputs: &[WorkerOutput], round: u64) -> Result<(Vec<f64>, u64)> {
    let mut avg = vec![0.0; task.dim()];
    let mut bytes = 0u64;
    for (worker, out) in outputs.iter().enumerate() {
        for (l, (layer, msg)) in task.layers().iter().zip(&out.messages).enumerate() {
            bytes += msg.len() as u64;
            let decoded = codec::decode(msg).map_err(|e| Error::Round {
                round,
                worker,
                layer: l,
                source: Box::new(e.into()),
            })?;
            for (a, v) in avg[layer.range()].iter_mut().zip(decoded.materialize().data()) {
                *a += v;
            }
        }
    }
    let inv = 1.0 / outputs.len() as f64;
    avg.iter_mut().for_each(|a| *a *= inv);
    Ok((avg, bytes))
}

/// Synchronous parameter server holding the model between rounds.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    task: &'a Task,
    config: TrainConfig,
    params: Vec<f64>,
    round: u64,
    bytes: u64,
    initial_loss: f64,
}

impl<'a> Simulator<'a> {
    pub fn new(task: &'a Task, config: TrainConfig) -> Result<Self> {
        let params = initial_params(task, config.master_seed);
        Self::with_params(task, config, params)
    }

    pub fn with_params(task: &'a Task, config: TrainConfig, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let initial_loss = task.loss(&params)?;
        Ok(Self {
            task,
            config,
            params,
            round: 0,
            bytes: 0,
            initial_loss,
        })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn into_params(self) -> Vec<f64> {
        self.params
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn run_round(&mut self) -> Result<RoundMetrics> {
        let start = self.config.record_wall_time.then(Instant::now);
        let round = self.round + 1;
        let (task, config, params) = (self.task, &self.config, &self.params);

        let outputs = (0..config.workers)
            .into_par_iter()
            .map(|w| worker_step(task, config, params, round, w))
            .collect::<Result<Vec<_>>>()?;

        let (update, round_bytes) = aggregate(task, &outputs, round)?;

        let mut dense_avg = vec![0.0; task.dim()];
        for out in &outputs {
            for (a, g) in dense_avg.iter_mut().zip(out.gradient.data()) {
                *a += g;
            }
        }
        let inv = 1.0 / outputs.len() as f64;
        let grad_norm = dense_avg.iter().map(|g| (g * inv) * (g * inv)).sum::<f64>().sqrt();

        let step = config.step_size;
        for (w, g) in self.params.iter_mut().zip(&update) {
            *w -= step * g;
        }
        let loss = self.task.loss(&self.params)?;
        if !loss.is_finite() || loss > DIVERGENCE_FACTOR * self.initial_loss.max(1.0) {
            return Err(Error::Diverged { round });
        }

        self.round = round;
        self.bytes += round_bytes;
        Ok(RoundMetrics {
            round,
            loss,
            grad_norm,
            second_moment: update.iter().map(|g| g * g).sum(),
            round_bytes,
            bytes: self.bytes,
            millis: start.map_or(0.0, |t| t.elapsed().as_secs_f64() * 1e3),
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub metrics: Vec<RoundMetrics>,
    pub params: Vec<f64>,
}

pub fn train(task: &Task, config: &TrainConfig) -> Result<TrainResult> {
    let mut sim = Simulator::new(task, config.clone())?;
    let metrics = (0..config.rounds)
        .map(|_| sim.run_round())
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainResult {
        metrics,
        params: sim.into_params(),
    })
}

pub const CSV_HEADER: &str = "round,loss,grad_norm,second_moment,bytes,millis";

/// One row per round; `bytes` is cumulative.
pub fn write_metrics_csv<W: Write>(metrics: &[RoundMetrics], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for m in metrics {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            m.round, m.loss, m.grad_norm, m.second_moment, m.bytes, m.millis
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub method: String,
    pub step_size: f64,
    pub rounds: u64,
    pub workers: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub final_loss: f64,
    pub total_bytes: u64,
    pub bytes_per_round: f64,
    pub loss_threshold: Option<f64>,
    /// First round whose loss is at or below `loss_threshold`.
    pub rounds_to_threshold: Option<u64>,
    pub optimum_loss: Option<f64>,
}

impl TrainSummary {
    pub fn new(
        config: &TrainConfig,
        metrics: &[RoundMetrics],
        loss_threshold: Option<f64>,
        optimum_loss: Option<f64>,
    ) -> Self {
        let last = metrics.last();
        let total_bytes = last.map_or(0, |m| m.bytes);
        Self {
            method: config.method.to_string(),
            step_size: config.step_size,
            rounds: metrics.len() as u64,
            workers: config.workers,
            batch_size: config.batch_size,
            seed: config.master_seed,
            final_loss: last.map_or(f64::NAN, |m| m.loss),
            total_bytes,
            bytes_per_round: total_bytes as f64 / metrics.len().max(1) as f64,
            loss_threshold,
            rounds_to_threshold: loss_threshold
                .and_then(|t| metrics.iter().find(|m| m.loss <= t).map(|m| m.round)),
            optimum_loss,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneTrial {
    pub step_size: f64,
    /// Mean loss over the last tenth of the rounds; `None` if the run diverged.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub best_step_size: f64,
    pub trials: Vec<TuneTrial>,
}

/// Powers of two from the grid.
pub fn step_size_grid(exponents: RangeInclusive<i32>) -> Vec<f64> {
    exponents.map(|e| 2f64.powi(e)).collect()
}

/// Trains once per `γ = 2^e` and keeps the step with the lowest tail loss.
/// The configured `step_size` is ignored.
pub fn tune_step_size(task: &Task, config: &TrainConfig, exponents: RangeInclusive<i32>) -> Result<TuneOutcome> {
    let grid = step_size_grid(exponents);
    if grid.is_empty() {
        return Err(Error::Config("empty step-size grid".into()));
    }
    let tail = (config.rounds / 10).max(1) as usize;
    let trials = grid
        .par_iter()
        .map(|&step_size| {
            let cfg = TrainConfig { step_size, ..config.clone() };
            match train(task, &cfg) {
                Ok(r) => {
                    let last = &r.metrics[r.metrics.len() - tail..];
                    let score = last.iter().map(|m| m.loss).sum::<f64>() / tail as f64;
                    Ok(TuneTrial { step_size, score: Some(score) })
                }
                Err(e) if e.is_numerical() => Ok(TuneTrial { step_size, score: None }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let best = trials
        .iter()
        .filter_map(|t| t.score.map(|s| (t.step_size, s)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(Error::Diverged { round: config.rounds })?;
    Ok(TuneOutcome {
        best_step_size: best.0,
        trials,
    })
}
