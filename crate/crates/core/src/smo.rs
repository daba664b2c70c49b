//! Sequential minimum optimization with small-sample estimators.
//!
//! Each update picks one trainable parameter, probes the phase shifter that
//! carries it at the `2n + 1` probe phases for every training point, and
//! rebuilds the cost along that coordinate as
//!
//! ```text
//! C~(theta) = 1/N sum_i [ p~_i(phi_i(theta)) p~'_i(phi_i(theta)) - 2 y_i p~_i(phi_i(theta)) + y_i^2 ]
//! ```
//!
//! where `p~_i` and `p~'_i` come from two disjoint measurement batches and
//! `phi_i(theta)` is the shifter's phase with the parameter replaced by
//! `theta`. The product of independent unbiased estimates is an unbiased
//! estimate of `p_i^2`, so `C~` is an unbiased estimate of the exact cost.
//! The parameter is then set to the global minimizer of `C~`.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, DataPoint, ParamRole, ParameterVector};
use crate::shots::{independent_pair, MeasurementOracle, OracleKind, ShotsError, StreamSeed};
use crate::trigfit::{minimize_1d, FourierInverse, MinimizeOptions, TrigFitError, TrigPoly};

#[derive(Debug, Error)]
pub enum SmoError {
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Shots(#[from] ShotsError),
    #[error(transparent)]
    TrigFit(#[from] TrigFitError),
    #[error("the training set is empty")]
    EmptyDataset,
    #[error("point {point}: estimated polynomials have degrees {first} and {second}")]
    DegreeMismatch {
        point: usize,
        first: usize,
        second: usize,
    },
    #[error("got {points} point costs but {maps} phase maps")]
    PhaseMapCount { points: usize, maps: usize },
    #[error("parameter order must be a permutation of 0..{0}")]
    InvalidOrder(usize),
    #[error("scale search interval [{0}, {1}] is empty")]
    BadInterval(f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub rounds: usize,
    pub oracle: OracleKind,
    /// Update order within a round; `None` is natural order.
    pub order: Option<Vec<usize>>,
    /// Search interval for scale parameters. Offset parameters always use
    /// one period `[-pi, pi)`.
    pub scale_interval: (f64, f64),
    pub minimize: MinimizeOptions,
    /// Root of the measurement random streams.
    pub seed: u64,
    /// Exact mode only: stop once a full round improves the cost by less
    /// than this relative amount.
    pub improvement_cutoff: Option<f64>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            rounds: 10,
            oracle: OracleKind::Exact,
            order: None,
            scale_interval: (-2.0 * PI, 2.0 * PI),
            minimize: MinimizeOptions::default(),
            seed: 0,
            improvement_cutoff: None,
        }
    }
}

/// One coordinate update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub round: usize,
    pub param_index: usize,
    pub theta: f64,
    pub est_min: f64,
    pub exact_cost: f64,
    pub cum_shots: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: ParameterVector,
    pub rounds_completed: usize,
    pub trace: Vec<TraceEntry>,
    pub shots_consumed: u64,
}

impl TrainState {
    pub fn new(params: ParameterVector) -> Self {
        TrainState {
            params,
            rounds_completed: 0,
            trace: Vec::new(),
            shots_consumed: 0,
        }
    }
}

/// Estimated polynomial pair for one training point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCost {
    pub index: usize,
    pub target: f64,
    pub first: TrigPoly,
    pub second: TrigPoly,
}

/// `theta -> 1/N sum_i R_i(a_i + b_i theta)` with
/// `R_i = p~_i p~'_i - 2 y_i p~_i + y_i^2`.
#[derive(Debug, Clone)]
pub struct EstimatedCost {
    terms: Vec<(TrigPoly, f64, f64)>,
    /// Set when every slope is 1; the whole sum is then one polynomial.
    collapsed: Option<TrigPoly>,
}

impl EstimatedCost {
    pub fn eval(&self, theta: f64) -> f64 {
        if let Some(poly) = &self.collapsed {
            return poly.eval(theta);
        }
        let sum: f64 = self
            .terms
            .iter()
            .map(|(r, a, b)| r.eval(a + b * theta))
            .sum();
        sum / self.terms.len() as f64
    }

    /// Per-point evaluation, skipping the collapsed form.
    pub fn eval_pointwise(&self, theta: f64) -> f64 {
        let sum: f64 = self
            .terms
            .iter()
            .map(|(r, a, b)| r.eval(a + b * theta))
            .sum();
        sum / self.terms.len() as f64
    }
}

/// Builds the estimated cost along one coordinate from per-point polynomial
/// pairs and affine phase maps `theta -> a_i + b_i theta`.
pub fn estimated_cost_fn(
    point_costs: &[PointCost],
    phase_maps: &[(f64, f64)],
) -> Result<EstimatedCost, SmoError> {
    if point_costs.is_empty() {
        return Err(SmoError::EmptyDataset);
    }
    if point_costs.len() != phase_maps.len() {
        return Err(SmoError::PhaseMapCount {
            points: point_costs.len(),
            maps: phase_maps.len(),
        });
    }
    let mut terms = Vec::with_capacity(point_costs.len());
    for (pc, &(a, b)) in point_costs.iter().zip(phase_maps) {
        if pc.first.degree() != pc.second.degree() {
            return Err(SmoError::DegreeMismatch {
                point: pc.index,
                first: pc.first.degree(),
                second: pc.second.degree(),
            });
        }
        let y = pc.target;
        let r = pc
            .first
            .mul(&pc.second)
            .add(&pc.first.scale(-2.0 * y))
            .add(&TrigPoly::constant(y * y, 0));
        terms.push((r, a, b));
    }
    let collapsed = if terms.iter().all(|&(_, _, b)| b == 1.0) {
        let n = terms.len() as f64;
        let total = terms
            .iter()
            .map(|(r, a, _)| r.shift(*a))
            .reduce(|acc, p| acc.add(&p))
            .expect("at least one point");
        Some(total.scale(1.0 / n))
    } else {
        None
    };
    Ok(EstimatedCost { terms, collapsed })
}

/// `1/N sum_i (p_i - y_i)^2` with exact probabilities.
pub fn exact_cost(
    circuit: &Circuit,
    params: &ParameterVector,
    data: &[DataPoint],
) -> Result<f64, SmoError> {
    if data.is_empty() {
        return Err(SmoError::EmptyDataset);
    }
    let mut sum = 0.0;
    for x in data {
        let d = circuit.evaluate(params, x)? - x.target();
        sum += d * d;
    }
    Ok(sum / data.len() as f64)
}

/// Uniform start in `[-pi, pi)` for every parameter.
pub fn random_start<R: Rng>(param_count: usize, rng: &mut R) -> ParameterVector {
    ParameterVector(
        (0..param_count)
            .map(|_| rng.random_range(-PI..PI))
            .collect(),
    )
}

/// Drives coordinate updates for one circuit, dataset and configuration.
#[derive(Debug)]
pub struct Trainer<'a> {
    circuit: &'a Circuit,
    data: &'a [DataPoint],
    config: &'a TrainingConfig,
    inverse: FourierInverse,
    oracle: MeasurementOracle,
    order: Vec<usize>,
}

impl<'a> Trainer<'a> {
    pub fn new(
        circuit: &'a Circuit,
        data: &'a [DataPoint],
        config: &'a TrainingConfig,
    ) -> Result<Self, SmoError> {
        if data.is_empty() {
            return Err(SmoError::EmptyDataset);
        }
        let (lo, hi) = config.scale_interval;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(SmoError::BadInterval(lo, hi));
        }
        let count = circuit.param_count();
        let order = match &config.order {
            None => (0..count).collect(),
            Some(order) => {
                let mut sorted = order.clone();
                sorted.sort_unstable();
                if sorted != (0..count).collect::<Vec<_>>() {
                    return Err(SmoError::InvalidOrder(count));
                }
                order.clone()
            }
        };
        Ok(Trainer {
            circuit,
            data,
            config,
            inverse: FourierInverse::new(circuit.photons()),
            oracle: MeasurementOracle::new(config.oracle, config.seed)?,
            order,
        })
    }

    /// Probes every training point along parameter `param` and returns the
    /// estimated cost, plus the shots spent.
    pub fn coordinate_cost(
        &self,
        params: &ParameterVector,
        param: usize,
        round: usize,
    ) -> Result<(EstimatedCost, u64), SmoError> {
        let probed: Vec<(PointCost, (f64, f64), u64)> = self
            .data
            .par_iter()
            .enumerate()
            .map(|(i, x)| -> Result<_, SmoError> {
                let (element, a, b) = self.circuit.phase_map(params, x, param)?;
                let oracle = self.oracle.fork(&[round as u64, param as u64, i as u64]);
                let probe = |phi: f64| -> Result<f64, SmoError> {
                    Ok(self.circuit.evaluate_with_probe(params, x, element, phi)?)
                };
                let (first, second) = independent_pair(probe, &self.inverse, &oracle)?;
                let shots = if self.config.oracle.is_exact() {
                    0
                } else {
                    first.shots_used + second.shots_used
                };
                let pc = PointCost {
                    index: i,
                    target: x.target(),
                    first: first.poly,
                    second: second.poly,
                };
                Ok((pc, (a, b), shots))
            })
            .collect::<Result<_, _>>()?;

        let shots = probed.iter().map(|(_, _, s)| s).sum();
        let (costs, maps): (Vec<PointCost>, Vec<(f64, f64)>) =
            probed.into_iter().map(|(pc, m, _)| (pc, m)).unzip();
        Ok((estimated_cost_fn(&costs, &maps)?, shots))
    }

    /// Sets parameter `param` to the minimizer of its estimated cost.
    pub fn update_parameter(&self, state: &mut TrainState, param: usize) -> Result<(), SmoError> {
        let slot = self.circuit.param_slot(param)?;
        let round = state.rounds_completed;
        let (cost, shots) = self.coordinate_cost(&state.params, param, round)?;
        let (lo, hi) = match slot.role {
            ParamRole::Offset => (-PI, PI),
            ParamRole::Scale => self.config.scale_interval,
        };
        let (mut theta, est_min) = minimize_1d(|t| cost.eval(t), lo, hi, self.config.minimize)?;
        if slot.role == ParamRole::Offset && theta >= PI {
            theta -= 2.0 * PI;
        }
        state.params.0[param] = theta;
        state.shots_consumed += shots;
        let exact = exact_cost(self.circuit, &state.params, self.data)?;
        state.trace.push(TraceEntry {
            round,
            param_index: param,
            theta,
            est_min,
            exact_cost: exact,
            cum_shots: state.shots_consumed,
        });
        Ok(())
    }

    /// Runs `rounds` sweeps over the parameters starting from `start`.
    pub fn train(&self, start: ParameterVector) -> Result<TrainState, SmoError> {
        let mut state = TrainState::new(start);
        let mut previous = exact_cost(self.circuit, &state.params, self.data)?;
        for _ in 0..self.config.rounds {
            for &j in &self.order {
                self.update_parameter(&mut state, j)?;
            }
            state.rounds_completed += 1;
            let current = state.trace.last().map_or(previous, |t| t.exact_cost);
            if let (Some(cutoff), OracleKind::Exact) = (self.config.improvement_cutoff, self.config.oracle) {
                let gain = (previous - current) / previous.abs().max(f64::MIN_POSITIVE);
                if gain < cutoff {
                    log::debug!("stopping after round {}: relative gain {gain:e}", state.rounds_completed);
                    break;
                }
            }
            previous = current;
        }
        Ok(state)
    }
}

/// One coordinate update; the measurement streams are keyed by
/// `state.rounds_completed`.
pub fn update_parameter(
    circuit: &Circuit,
    state: &mut TrainState,
    data: &[DataPoint],
    param: usize,
    config: &TrainingConfig,
) -> Result<(), SmoError> {
    Trainer::new(circuit, data, config)?.update_parameter(state, param)
}

pub fn train(
    circuit: &Circuit,
    data: &[DataPoint],
    config: &TrainingConfig,
    start: ParameterVector,
) -> Result<TrainState, SmoError> {
    Trainer::new(circuit, data, config)?.train(start)
}

/// Total measurement count of a training run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotBudget {
    pub shots: u64,
    pub note: Option<&'static str>,
}

/// `rounds * params * N * (2n + 1) * 2 * N_all`; the factor 2 is the
/// independent batch pair.
pub fn shot_budget(config: &TrainingConfig, circuit: &Circuit, dataset_size: usize) -> ShotBudget {
    match config.oracle {
        OracleKind::Exact => ShotBudget {
            shots: 0,
            note: Some("exact probabilities consume no shots"),
        },
        OracleKind::Binomial { shots } => ShotBudget {
            shots: single_batch_budget(config.rounds, circuit, dataset_size, shots) * 2,
            note: None,
        },
    }
}

/// Budget of a run that measures each probe once with `shots` shots (no
/// independent pair).
pub fn single_batch_budget(rounds: usize, circuit: &Circuit, dataset_size: usize, shots: u32) -> u64 {
    rounds as u64
        * circuit.param_count() as u64
        * dataset_size as u64
        * (2 * circuit.photons() as u64 + 1)
        * u64::from(shots)
}

/// Stream seed derived from a master seed and a key path, as a `u64`.
pub fn derive_seed(master: u64, keys: &[u64]) -> u64 {
    use rand::RngCore;
    StreamSeed::root(master).child(keys).rng().next_u64()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::default_reuploading_circuit;
    use crate::shots::keyed_rng;

    fn tiny_dataset() -> Vec<DataPoint> {
        vec![
            DataPoint::new(vec![0.1, -0.2], 1),
            DataPoint::new(vec![0.9, 0.8], 0),
            DataPoint::new(vec![-0.4, 0.3], 1),
            DataPoint::new(vec![-0.7, -0.95], 0),
        ]
    }

    #[test]
    fn exact_cost_basics() {
        let c = default_reuploading_circuit();
        let params = ParameterVector(vec![0.2, 0.4, -1.0, 0.3, 0.0, 2.0]);
        let x = DataPoint::new(vec![0.3, 0.6], 1);
        let p = c.evaluate(&params, &x).unwrap();
        let cost = exact_cost(&c, &params, &[x.clone()]).unwrap();
        assert!((cost - (p - 1.0).powi(2)).abs() < 1e-15);
        assert!(matches!(exact_cost(&c, &params, &[]), Err(SmoError::EmptyDataset)));
    }

    #[test]
    fn single_point_cost_quarter() {
        let pc = PointCost {
            index: 0,
            target: 1.0,
            first: TrigPoly::constant(0.5, 2),
            second: TrigPoly::constant(0.5, 2),
        };
        let f = estimated_cost_fn(&[pc], &[(0.0, 1.0)]).unwrap();
        assert!((f.eval(0.3) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn all_ones_gives_zero_cost() {
        let pc = PointCost {
            index: 0,
            target: 1.0,
            first: TrigPoly::constant(1.0, 2),
            second: TrigPoly::constant(1.0, 2),
        };
        let f = estimated_cost_fn(&[pc], &[(0.4, 0.7)]).unwrap();
        for t in [-3.0, 0.0, 1.5] {
            assert_eq!(f.eval(t), 0.0);
        }
    }

    #[test]
    fn degree_mismatch() {
        let pc = PointCost {
            index: 3,
            target: 0.0,
            first: TrigPoly::constant(1.0, 2),
            second: TrigPoly::constant(1.0, 1),
        };
        assert!(matches!(
            estimated_cost_fn(&[pc], &[(0.0, 1.0)]),
            Err(SmoError::DegreeMismatch { point: 3, first: 2, second: 1 })
        ));
    }

    #[test]
    fn exact_update_does_not_increase_cost() {
        let c = default_reuploading_circuit();
        let data = tiny_dataset();
        let config = TrainingConfig::default();
        let mut state = TrainState::new(random_start(6, &mut keyed_rng(1, &[])));
        let mut before = exact_cost(&c, &state.params, &data).unwrap();
        for j in 0..6 {
            update_parameter(&c, &mut state, &data, j, &config).unwrap();
            let after = state.trace.last().unwrap().exact_cost;
            assert!(after <= before + 1e-9, "param {j}: {before} -> {after}");
            before = after;
        }
        assert_eq!(state.shots_consumed, 0);
    }

    #[test]
    fn binomial_update_stays_in_interval() {
        let c = default_reuploading_circuit();
        let data = tiny_dataset();
        let config = TrainingConfig {
            oracle: OracleKind::Binomial { shots: 1 },
            ..Default::default()
        };
        let mut state = TrainState::new(ParameterVector::zeros(6));
        for j in 0..6 {
            update_parameter(&c, &mut state, &data, j, &config).unwrap();
            let theta = state.params.0[j];
            if j % 2 == 0 {
                assert!((-PI..PI).contains(&theta));
            } else {
                assert!((-2.0 * PI..=2.0 * PI).contains(&theta));
            }
        }
        assert_eq!(state.shots_consumed, 6 * 2 * 5 * data.len() as u64);
    }

    #[test]
    fn zero_rounds_keeps_params() {
        let c = default_reuploading_circuit();
        let data = tiny_dataset();
        let config = TrainingConfig {
            rounds: 0,
            ..Default::default()
        };
        let start = ParameterVector(vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let state = train(&c, &data, &config, start.clone()).unwrap();
        assert_eq!(state.params, start);
        assert!(state.trace.is_empty());
    }

    #[test]
    fn order_must_be_permutation() {
        let c = default_reuploading_circuit();
        let data = tiny_dataset();
        let config = TrainingConfig {
            order: Some(vec![0, 1, 2, 3, 4, 4]),
            ..Default::default()
        };
        assert!(matches!(Trainer::new(&c, &data, &config), Err(SmoError::InvalidOrder(6))));
    }

    #[test]
    fn budget_formula() {
        let c = default_reuploading_circuit();
        let config = TrainingConfig {
            oracle: OracleKind::Binomial { shots: 1 },
            ..Default::default()
        };
        assert_eq!(shot_budget(&config, &c, 300).shots, 180_000);
        assert_eq!(shot_budget(&config, &c, 0).shots, 0);
        let exact = shot_budget(&TrainingConfig::default(), &c, 300);
        assert_eq!(exact.shots, 0);
        assert!(exact.note.is_some());
        let baseline = single_batch_budget(10, &c, 300, 200);
        let paired_two = TrainingConfig {
            oracle: OracleKind::Binomial { shots: 2 },
            ..Default::default()
        };
        assert_eq!(baseline / shot_budget(&paired_two, &c, 300).shots, 50);
        assert_eq!(baseline / shot_budget(&config, &c, 300).shots, 100);
    }
}
