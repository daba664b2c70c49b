//! Threshold classification of 2-D points with a trained circuit, confusion
//! metrics, and the shot-count sweep.

use std::fmt;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, DataPoint, ParameterVector};
use crate::shots::{keyed_rng, OracleKind};
use crate::smo::{derive_seed, exact_cost, random_start, SmoError, TraceEntry, Trainer, TrainingConfig};

/// Stream tags under the master seed.
mod tags {
    pub const DATASET: u64 = 1;
    pub const INIT: u64 = 2;
    pub const TRAIN: u64 = 3;
    pub const TEST: u64 = 4;
}

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Smo(#[from] SmoError),
    #[error("{predictions} predictions but {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("no samples to score")]
    Empty,
    #[error("threshold {0} must lie strictly between 0 and 1")]
    BadThreshold(f64),
    #[error("sweep needs at least one seed and one shot setting")]
    EmptySweep,
}

/// Ground-truth labelling of the plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LabelRule {
    /// Label 1 inside (or on) the circle.
    Circle { center: [f64; 2], radius: f64 },
    /// Label 1 where `normal . x + offset >= 0`.
    HalfPlane { normal: [f64; 2], offset: f64 },
}

impl Default for LabelRule {
    fn default() -> Self {
        LabelRule::Circle {
            center: [0.0, 0.0],
            radius: 0.7,
        }
    }
}

impl LabelRule {
    pub fn label(&self, x: &[f64]) -> u8 {
        let inside = match self {
            LabelRule::Circle { center, radius } => {
                let dx = x[0] - center[0];
                let dy = x[1] - center[1];
                dx * dx + dy * dy <= radius * radius
            }
            LabelRule::HalfPlane { normal, offset } => normal[0] * x[0] + normal[1] * x[1] + offset >= 0.0,
        };
        u8::from(inside)
    }
}

impl fmt::Display for LabelRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelRule::Circle { center, radius } => {
                write!(f, "circle(center=({}, {}), radius={})", center[0], center[1], radius)
            }
            LabelRule::HalfPlane { normal, offset } => {
                write!(f, "half_plane(normal=({}, {}), offset={})", normal[0], normal[1], offset)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Vec<DataPoint>,
    pub rule: LabelRule,
    pub seed: u64,
}

/// `count` points uniform on `[-1, 1]^2`, labelled by `rule`.
pub fn generate_dataset(rule: &LabelRule, count: usize, seed: u64) -> Dataset {
    let mut rng = keyed_rng(seed, &[tags::DATASET]);
    let points = (0..count)
        .map(|_| {
            let x = vec![rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)];
            let label = rule.label(&x);
            DataPoint::new(x, label)
        })
        .collect();
    Dataset {
        points,
        rule: rule.clone(),
        seed,
    }
}

/// Class 1 iff the exact outcome probability reaches `threshold`.
pub fn classify_point(
    circuit: &Circuit,
    params: &ParameterVector,
    x: &DataPoint,
    threshold: f64,
) -> Result<u8, ClassifierError> {
    check_threshold(threshold)?;
    let p = circuit.evaluate(params, x)?;
    Ok(u8::from(p >= threshold))
}

fn check_threshold(threshold: f64) -> Result<(), ClassifierError> {
    if threshold > 0.0 && threshold < 1.0 {
        Ok(())
    } else {
        Err(ClassifierError::BadThreshold(threshold))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// `None` when there are no positive labels.
    pub tpr: Option<f64>,
    /// `None` when there are no negative labels.
    pub tnr: Option<f64>,
    /// Mean of the defined ratios.
    pub p: f64,
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Result<Self, ClassifierError> {
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        let tpr = ratio(tp, tp + fn_);
        let tnr = ratio(tn, tn + fp);
        let p = match (tpr, tnr) {
            (Some(a), Some(b)) => 0.5 * a + 0.5 * b,
            (Some(a), None) => {
                log::warn!("no negative samples: TNR undefined, P is TPR alone");
                a
            }
            (None, Some(b)) => {
                log::warn!("no positive samples: TPR undefined, P is TNR alone");
                b
            }
            (None, None) => return Err(ClassifierError::Empty),
        };
        Ok(Metrics {
            tp,
            fp,
            tn,
            fn_,
            tpr,
            tnr,
            p,
        })
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn compute_metrics(predictions: &[u8], labels: &[u8]) -> Result<Metrics, ClassifierError> {
    if predictions.len() != labels.len() {
        return Err(ClassifierError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&pred, &label) in predictions.iter().zip(labels) {
        match (pred != 0, label != 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Metrics::from_counts(tp, fp, tn, fn_)
}

/// Threshold among `(k + 0.5) / 101`, `k = 0..101`, maximizing P on `data`.
/// Ties go to the lowest threshold.
pub fn calibrate_threshold(
    circuit: &Circuit,
    params: &ParameterVector,
    data: &[DataPoint],
) -> Result<f64, ClassifierError> {
    let probs: Vec<f64> = data
        .iter()
        .map(|x| circuit.evaluate(params, x))
        .collect::<Result<_, _>>()?;
    let labels: Vec<u8> = data.iter().map(|x| x.label).collect();
    let mut best = (f64::NEG_INFINITY, 0.5);
    for k in 0..101 {
        let t = (k as f64 + 0.5) / 101.0;
        let preds: Vec<u8> = probs.iter().map(|&p| u8::from(p >= t)).collect();
        let score = compute_metrics(&preds, &labels)?.p;
        if score > best.0 {
            best = (score, t);
        }
    }
    Ok(best.1)
}

/// Test point with its exact probability and predicted class.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub features: Vec<f64>,
    pub label: u8,
    pub probability: f64,
    pub predicted: u8,
}

/// Classifies `data` and scores the result.
pub fn evaluate_classifier(
    circuit: &Circuit,
    params: &ParameterVector,
    data: &[DataPoint],
    threshold: f64,
) -> Result<(Metrics, Vec<Prediction>), ClassifierError> {
    check_threshold(threshold)?;
    let predictions: Vec<Prediction> = data
        .iter()
        .map(|x| -> Result<_, ClassifierError> {
            let probability = circuit.evaluate(params, x)?;
            Ok(Prediction {
                features: x.features.clone(),
                label: x.label,
                probability,
                predicted: u8::from(probability >= threshold),
            })
        })
        .collect::<Result<_, _>>()?;
    let preds: Vec<u8> = predictions.iter().map(|p| p.predicted).collect();
    let labels: Vec<u8> = predictions.iter().map(|p| p.label).collect();
    Ok((compute_metrics(&preds, &labels)?, predictions))
}

/// Settings shared by every cell of a sweep.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub circuit: Circuit,
    pub rule: LabelRule,
    pub train_size: usize,
    pub test_size: usize,
    pub seeds: Vec<u64>,
    pub n_all: Vec<OracleKind>,
    /// Template for every run; `oracle` and `seed` are set per cell.
    pub training: TrainingConfig,
    pub threshold: f64,
    pub calibrate_threshold: bool,
    pub master_seed: u64,
}

/// One `(N_all, seed)` cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub n_all: OracleKind,
    pub seed: u64,
    pub initial_params: ParameterVector,
    pub params: ParameterVector,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub threshold: f64,
    pub metrics: Metrics,
    pub shots: u64,
    pub trace: Vec<TraceEntry>,
    pub predictions: Vec<Prediction>,
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Ordered by position in `n_all`, then by position in `seeds`.
    pub cells: Vec<CellResult>,
}

impl SweepResult {
    pub fn cells_for(&self, n_all: OracleKind) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(move |c| c.n_all == n_all)
    }

    pub fn mean_p(&self, n_all: OracleKind) -> Option<f64> {
        let ps: Vec<f64> = self.cells_for(n_all).map(|c| c.metrics.p).collect();
        (!ps.is_empty()).then(|| ps.iter().sum::<f64>() / ps.len() as f64)
    }
}

/// Per-seed inputs shared by every shot setting.
#[derive(Debug, Clone)]
pub struct SeedSetup {
    pub seed: u64,
    pub train: Dataset,
    pub test: Dataset,
    pub start: ParameterVector,
}

/// Training set, test set and start point for `seed`.
pub fn prepare_seed(config: &SweepConfig, seed: u64) -> SeedSetup {
    let master = config.master_seed;
    SeedSetup {
        seed,
        train: generate_dataset(&config.rule, config.train_size, derive_seed(master, &[tags::DATASET, seed])),
        test: generate_dataset(&config.rule, config.test_size, derive_seed(master, &[tags::TEST, seed])),
        start: random_start(config.circuit.param_count(), &mut keyed_rng(master, &[tags::INIT, seed])),
    }
}

/// Training settings of the `(kind, seed)` cell.
pub fn cell_training_config(config: &SweepConfig, kind: OracleKind, seed: u64) -> TrainingConfig {
    TrainingConfig {
        oracle: kind,
        seed: derive_seed(config.master_seed, &[tags::TRAIN, seed, kind_key(kind)]),
        ..config.training.clone()
    }
}

/// Oracle kind as a stream key.
fn kind_key(kind: OracleKind) -> u64 {
    match kind {
        OracleKind::Exact => u64::MAX,
        OracleKind::Binomial { shots } => u64::from(shots),
    }
}

/// Trains every `(N_all, seed)` cell. For a given seed all shot settings see
/// the same training set, start point and test set; only the measurement
/// streams differ.
pub fn run_nall_sweep(config: &SweepConfig) -> Result<SweepResult, ClassifierError> {
    if config.seeds.is_empty() || config.n_all.is_empty() {
        return Err(ClassifierError::EmptySweep);
    }
    check_threshold(config.threshold)?;
    let setups: Vec<SeedSetup> = config.seeds.iter().map(|&seed| prepare_seed(config, seed)).collect();

    let jobs: Vec<(OracleKind, &SeedSetup)> = config
        .n_all
        .iter()
        .flat_map(|&kind| setups.iter().map(move |s| (kind, s)))
        .collect();

    let cells = jobs
        .into_par_iter()
        .map(|(kind, setup)| run_cell(config, kind, setup))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepResult { cells })
}

fn run_cell(config: &SweepConfig, kind: OracleKind, setup: &SeedSetup) -> Result<CellResult, ClassifierError> {
    let started = Instant::now();
    let training = cell_training_config(config, kind, setup.seed);
    let circuit = &config.circuit;
    let data = &setup.train.points;
    let initial_cost = exact_cost(circuit, &setup.start, data)?;
    let state = Trainer::new(circuit, data, &training)?.train(setup.start.clone())?;
    let final_cost = exact_cost(circuit, &state.params, data)?;
    let threshold = if config.calibrate_threshold {
        calibrate_threshold(circuit, &state.params, data)?
    } else {
        config.threshold
    };
    let (metrics, predictions) = evaluate_classifier(circuit, &state.params, &setup.test.points, threshold)?;
    log::info!(
        "n_all={kind} seed={} cost {initial_cost:.4} -> {final_cost:.4}, P = {:.4}",
        setup.seed,
        metrics.p
    );
    Ok(CellResult {
        n_all: kind,
        seed: setup.seed,
        initial_params: setup.start.clone(),
        params: state.params,
        initial_cost,
        final_cost,
        threshold,
        metrics,
        shots: state.shots_consumed,
        trace: state.trace,
        predictions,
        wall_time: started.elapsed(),
    })
}
