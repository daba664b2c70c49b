//! Parameterized passive circuits.
//!
//! A circuit is an ordered list of phase shifters and fixed two-mode
//! beamsplitters acting on a fixed-photon-number input state. Every phase is
//! an affine expression in the trainable parameters and the data features:
//!
//! ```text
//! phase = constant + params[offset] + params[scale] * x[feature]
//! ```
//!
//! The probability of the configured outcome occupation is the model output.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{
    lift_mode_unitary, FockError, FockSector, ModeUnitary, Occupation, StateVector,
};

/// Tolerance on `| |input|^2 - 1 |` at validation.
pub const INPUT_NORM_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("element {element}: parameter index {param} is out of range (param_count = {count})")]
    ParamOutOfRange {
        element: usize,
        param: usize,
        count: usize,
    },
    #[error("parameter {0} is not used by any phase shifter")]
    ParamUnused(usize),
    #[error("parameter {param} appears in more than one phase expression (elements {first} and {second})")]
    ParamReused {
        param: usize,
        first: usize,
        second: usize,
    },
    #[error("element {0}: a scale parameter needs a feature index")]
    ScaleWithoutFeature(usize),
    #[error("feature index {feature} out of range for a data point with {len} features")]
    FeatureOutOfRange { feature: usize, len: usize },
    #[error("expected {expected} parameters, got {got}")]
    ParamCountMismatch { expected: usize, got: usize },
    #[error("element {0} is not a phase shifter")]
    NotAPhaseShifter(usize),
    #[error("parameter {0} does not appear in any phase shifter")]
    ParamNotFound(usize),
    #[error("input state has squared norm {0}, expected 1")]
    InputNotNormalized(f64),
    #[error("input occupation {0} listed twice")]
    DuplicateInputTerm(Occupation),
    #[error("input state and outcome must have {modes} modes and {photons} photons")]
    WrongSector { modes: usize, photons: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("could not parse circuit: {0}")]
    Parse(String),
}

/// `constant + params[offset] + params[scale] * x[feature]`.
///
/// A feature without a scale parameter enters with unit weight.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseExpr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<usize>,
    #[serde(default)]
    pub constant: f64,
}

impl PhaseExpr {
    pub fn trainable(offset: usize, scale: usize, feature: usize) -> Self {
        PhaseExpr {
            offset: Some(offset),
            scale: Some(scale),
            feature: Some(feature),
            constant: 0.0,
        }
    }

    fn feature_value(&self, x: &[f64]) -> Result<f64, CircuitError> {
        match self.feature {
            None => Ok(0.0),
            Some(f) => x
                .get(f)
                .copied()
                .ok_or(CircuitError::FeatureOutOfRange {
                    feature: f,
                    len: x.len(),
                }),
        }
    }

    pub fn evaluate(&self, params: &[f64], x: &[f64]) -> Result<f64, CircuitError> {
        let feature = self.feature_value(x)?;
        let offset = self.offset.map_or(0.0, |p| params[p]);
        let weight = self.scale.map_or(1.0, |p| params[p]);
        let data = if self.feature.is_some() {
            weight * feature
        } else {
            0.0
        };
        Ok(self.constant + offset + data)
    }

    /// Writes the phase as `a + b * theta` where `theta` replaces `param`.
    fn affine_in(&self, params: &[f64], x: &[f64], param: usize) -> Result<(f64, f64), CircuitError> {
        let feature = self.feature_value(x)?;
        let mut a = self.constant;
        let mut b = 0.0;
        match self.offset {
            Some(p) if p == param => b += 1.0,
            Some(p) => a += params[p],
            None => {}
        }
        if self.feature.is_some() {
            match self.scale {
                Some(p) if p == param => b += feature,
                Some(p) => a += params[p] * feature,
                None => a += feature,
            }
        }
        Ok((a, b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Element {
    PhaseShifter {
        mode: usize,
        #[serde(default)]
        phase: PhaseExpr,
    },
    /// Fixed two-mode element; `matrix` defaults to the 50-50 beamsplitter.
    Beamsplitter {
        modes: [usize; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matrix: Option<[[Complex64; 2]; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputTerm {
    pub occupation: Occupation,
    pub amplitude: Complex64,
}

/// Serializable circuit description; validate with [`Circuit::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSpec {
    pub modes: usize,
    pub photons: usize,
    pub param_count: usize,
    pub input: Vec<InputTerm>,
    pub outcome: Occupation,
    pub elements: Vec<Element>,
}

impl CircuitSpec {
    pub fn from_toml_str(s: &str) -> Result<Self, CircuitError> {
        toml::from_str(s).map_err(|e| CircuitError::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("circuit specs always serialize")
    }
}

/// Trainable parameter vector (radians).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(pub Vec<f64>);

impl ParameterVector {
    pub fn zeros(len: usize) -> Self {
        ParameterVector(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// A labelled data point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub features: Vec<f64>,
    pub label: u8,
}

impl DataPoint {
    pub fn new(features: Vec<f64>, label: u8) -> Self {
        DataPoint { features, label }
    }

    pub fn target(&self) -> f64 {
        f64::from(self.label)
    }
}

/// Which slot of a phase expression a parameter occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    Offset,
    Scale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamSlot {
    pub element: usize,
    pub role: ParamRole,
}

#[derive(Debug, Clone)]
enum Compiled {
    Phase { mode: usize },
    Passive(DMatrix<Complex64>),
}

/// A validated circuit with its passive elements lifted to the sector.
#[derive(Debug, Clone)]
pub struct Circuit {
    spec: CircuitSpec,
    sector: Arc<FockSector>,
    input: StateVector,
    outcome: Occupation,
    compiled: Vec<Compiled>,
    slots: Vec<ParamSlot>,
    shifters: Vec<usize>,
}

impl Circuit {
    pub fn new(spec: CircuitSpec) -> Result<Self, CircuitError> {
        let sector = Arc::new(FockSector::new(spec.modes, spec.photons)?);
        let wrong_sector = || CircuitError::WrongSector {
            modes: spec.modes,
            photons: spec.photons,
        };

        let mut amplitudes = vec![Complex64::new(0.0, 0.0); sector.dim()];
        let mut seen = vec![false; sector.dim()];
        for term in &spec.input {
            if term.occupation.modes() != spec.modes || term.occupation.photons() != spec.photons {
                return Err(wrong_sector());
            }
            if !(term.amplitude.re.is_finite() && term.amplitude.im.is_finite()) {
                return Err(CircuitError::NonFinite("input amplitude"));
            }
            let idx = sector.index_of(&term.occupation)?;
            if seen[idx] {
                return Err(CircuitError::DuplicateInputTerm(term.occupation.clone()));
            }
            seen[idx] = true;
            amplitudes[idx] = term.amplitude;
        }
        let input = StateVector::from_amplitudes(Arc::clone(&sector), amplitudes)?;
        let norm = input.norm_sqr();
        if !((norm - 1.0).abs() <= INPUT_NORM_TOL) {
            return Err(CircuitError::InputNotNormalized(norm));
        }
        if spec.outcome.modes() != spec.modes || spec.outcome.photons() != spec.photons {
            return Err(wrong_sector());
        }

        let mut owner: Vec<Option<ParamSlot>> = vec![None; spec.param_count];
        let mut compiled = Vec::with_capacity(spec.elements.len());
        let mut shifters = Vec::new();
        for (e, element) in spec.elements.iter().enumerate() {
            match element {
                Element::PhaseShifter { mode, phase } => {
                    if *mode >= spec.modes {
                        return Err(FockError::ModeOutOfRange {
                            mode: *mode,
                            modes: spec.modes,
                        }
                        .into());
                    }
                    if !phase.constant.is_finite() {
                        return Err(CircuitError::NonFinite("phase constant"));
                    }
                    if phase.scale.is_some() && phase.feature.is_none() {
                        return Err(CircuitError::ScaleWithoutFeature(e));
                    }
                    let slots = [
                        (phase.offset, ParamRole::Offset),
                        (phase.scale, ParamRole::Scale),
                    ];
                    for (param, role) in slots {
                        let Some(p) = param else { continue };
                        if p >= spec.param_count {
                            return Err(CircuitError::ParamOutOfRange {
                                element: e,
                                param: p,
                                count: spec.param_count,
                            });
                        }
                        if let Some(prev) = owner[p] {
                            return Err(CircuitError::ParamReused {
                                param: p,
                                first: prev.element,
                                second: e,
                            });
                        }
                        owner[p] = Some(ParamSlot { element: e, role });
                    }
                    shifters.push(e);
                    compiled.push(Compiled::Phase { mode: *mode });
                }
                Element::Beamsplitter { modes, matrix } => {
                    let two_mode = match matrix {
                        None => ModeUnitary::beamsplitter_50_50(),
                        Some(m) => ModeUnitary::new(DMatrix::from_row_slice(
                            2,
                            2,
                            &[m[0][0], m[0][1], m[1][0], m[1][1]],
                        ))?,
                    };
                    let full = ModeUnitary::embed_two_mode(spec.modes, modes[0], modes[1], &two_mode)?;
                    compiled.push(Compiled::Passive(lift_mode_unitary(&full, &sector)?));
                }
            }
        }
        let slots = owner
            .into_iter()
            .enumerate()
            .map(|(p, slot)| slot.ok_or(CircuitError::ParamUnused(p)))
            .collect::<Result<Vec<_>, _>>()?;

        Ok(Circuit {
            outcome: spec.outcome.clone(),
            spec,
            sector,
            input,
            compiled,
            slots,
            shifters,
        })
    }

    pub fn spec(&self) -> &CircuitSpec {
        &self.spec
    }

    pub fn sector(&self) -> &Arc<FockSector> {
        &self.sector
    }

    pub fn input(&self) -> &StateVector {
        &self.input
    }

    pub fn outcome(&self) -> &Occupation {
        &self.outcome
    }

    pub fn param_count(&self) -> usize {
        self.spec.param_count
    }

    /// Photon number, which is also the degree of every single-phase
    /// restriction of the outcome probability.
    pub fn photons(&self) -> usize {
        self.spec.photons
    }

    /// Element indices of the phase shifters, in circuit order.
    pub fn phase_shifters(&self) -> &[usize] {
        &self.shifters
    }

    /// Where parameter `param` lives.
    pub fn param_slot(&self, param: usize) -> Result<ParamSlot, CircuitError> {
        self.slots
            .get(param)
            .copied()
            .ok_or(CircuitError::ParamNotFound(param))
    }

    fn check_params(&self, params: &ParameterVector) -> Result<(), CircuitError> {
        if params.len() != self.spec.param_count {
            return Err(CircuitError::ParamCountMismatch {
                expected: self.spec.param_count,
                got: params.len(),
            });
        }
        Ok(())
    }

    fn expr(&self, element: usize) -> Result<&PhaseExpr, CircuitError> {
        match self.spec.elements.get(element) {
            Some(Element::PhaseShifter { phase, .. }) => Ok(phase),
            _ => Err(CircuitError::NotAPhaseShifter(element)),
        }
    }

    /// Concrete phases, one per phase shifter in circuit order.
    pub fn bind(&self, params: &ParameterVector, x: &DataPoint) -> Result<Vec<f64>, CircuitError> {
        self.check_params(params)?;
        self.shifters
            .iter()
            .map(|&e| self.expr(e)?.evaluate(params.as_slice(), &x.features))
            .collect()
    }

    /// The phase of the shifter holding `param`, as `a + b * theta` when the
    /// parameter is replaced by `theta`. Returns `(element, a, b)`.
    pub fn phase_map(
        &self,
        params: &ParameterVector,
        x: &DataPoint,
        param: usize,
    ) -> Result<(usize, f64, f64), CircuitError> {
        self.check_params(params)?;
        let slot = self.param_slot(param)?;
        let (a, b) = self
            .expr(slot.element)?
            .affine_in(params.as_slice(), &x.features, param)?;
        Ok((slot.element, a, b))
    }

    fn run(
        &self,
        params: &ParameterVector,
        x: &DataPoint,
        probe: Option<(usize, f64)>,
    ) -> Result<f64, CircuitError> {
        self.check_params(params)?;
        if let Some((element, _)) = probe {
            self.expr(element)?;
        }
        let mut state = self.input.clone();
        for (e, (element, compiled)) in self.spec.elements.iter().zip(&self.compiled).enumerate() {
            match (element, compiled) {
                (Element::PhaseShifter { phase, .. }, Compiled::Phase { mode }) => {
                    let value = match probe {
                        Some((target, probe_phase)) if target == e => probe_phase,
                        _ => phase.evaluate(params.as_slice(), &x.features)?,
                    };
                    if !value.is_finite() {
                        return Err(CircuitError::NonFinite("bound phase"));
                    }
                    state.phase_shift_in_place(*mode, value)?;
                }
                (_, Compiled::Passive(op)) => {
                    state = state.apply_sector_matrix(op)?;
                }
                _ => unreachable!("compiled elements mirror the spec"),
            }
        }
        Ok(state.outcome_probability(&self.outcome)?)
    }

    /// Probability of the outcome occupation.
    pub fn evaluate(&self, params: &ParameterVector, x: &DataPoint) -> Result<f64, CircuitError> {
        self.run(params, x, None)
    }

    /// As [`Circuit::evaluate`], with the total phase of phase-shifter
    /// element `element` replaced by `probe_phase`.
    pub fn evaluate_with_probe(
        &self,
        params: &ParameterVector,
        x: &DataPoint,
        element: usize,
        probe_phase: f64,
    ) -> Result<f64, CircuitError> {
        self.run(params, x, Some((element, probe_phase)))
    }
}

/// Free-function form of [`Circuit::bind`].
pub fn bind(circuit: &Circuit, params: &ParameterVector, x: &DataPoint) -> Result<Vec<f64>, CircuitError> {
    circuit.bind(params, x)
}

/// Free-function form of [`Circuit::evaluate`].
pub fn evaluate(circuit: &Circuit, params: &ParameterVector, x: &DataPoint) -> Result<f64, CircuitError> {
    circuit.evaluate(params, x)
}

/// Free-function form of [`Circuit::evaluate_with_probe`].
pub fn evaluate_with_probe(
    circuit: &Circuit,
    params: &ParameterVector,
    x: &DataPoint,
    element: usize,
    probe_phase: f64,
) -> Result<f64, CircuitError> {
    circuit.evaluate_with_probe(params, x, element, probe_phase)
}

/// Two-mode, two-photon data-reuploading classifier.
///
/// NOON input `(|2,0⟩ + |0,2⟩)/sqrt 2`, outcome `|1,1⟩`, and the layout
/// `PS - BS - PS - BS - PS` with every phase shifter on mode 0. Shifter `j`
/// carries `params[2j] + params[2j+1] * x[f_j]` with features `[x1, x2, x1]`.
pub fn default_reuploading_spec() -> CircuitSpec {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let shifter = |j: usize, feature: usize| Element::PhaseShifter {
        mode: 0,
        phase: PhaseExpr::trainable(2 * j, 2 * j + 1, feature),
    };
    let bs = || Element::Beamsplitter {
        modes: [0, 1],
        matrix: None,
    };
    CircuitSpec {
        modes: 2,
        photons: 2,
        param_count: 6,
        input: vec![
            InputTerm {
                occupation: Occupation::new(vec![2, 0]),
                amplitude: Complex64::new(h, 0.0),
            },
            InputTerm {
                occupation: Occupation::new(vec![0, 2]),
                amplitude: Complex64::new(h, 0.0),
            },
        ],
        outcome: Occupation::new(vec![1, 1]),
        elements: vec![shifter(0, 0), bs(), shifter(1, 1), bs(), shifter(2, 0)],
    }
}

/// Validated form of [`default_reuploading_spec`].
pub fn default_reuploading_circuit() -> Circuit {
    Circuit::new(default_reuploading_spec()).expect("default circuit is valid")
}
