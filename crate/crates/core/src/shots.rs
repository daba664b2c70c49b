//! Measurement oracles and estimated trigonometric polynomials.
//!
//! A finite-shot oracle replaces every probability `r` by `N_success / N_all`
//! with `N_success ~ Binomial(N_all, r)`. The estimate is unbiased, and so is
//! any linear map of estimates, in particular the reconstructed polynomial
//! coefficients. Nothing on this path is clamped to `[0, 1]`.
//!
//! Randomness is organised as a tree of keyed streams: every stream is
//! identified by a 32-byte seed and children are derived by hashing the
//! parent seed together with a key path. Draws therefore depend only on the
//! key, never on the order in which work is scheduled.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::trigfit::{FourierInverse, TrigPoly};

/// Slack allowed on `p_true` outside `[0, 1]` (rounding in the simulator).
pub const PROBABILITY_SLACK: f64 = 1e-9;

/// Up to this many shots, binomial counts are drawn as Bernoulli sums.
const BERNOULLI_SUM_MAX: u32 = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShotsError {
    #[error("a finite-shot oracle needs at least one shot")]
    ZeroShots,
    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
}

/// Seed of one node in the keyed stream tree.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamSeed([u8; 32]);

impl StreamSeed {
    pub fn root(master: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"photonic-smo/root");
        h.update(master.to_le_bytes());
        StreamSeed(h.finalize().into())
    }

    pub fn child(&self, keys: &[u64]) -> Self {
        let mut h = Sha256::new();
        h.update(self.0);
        h.update((keys.len() as u64).to_le_bytes());
        for k in keys {
            h.update(k.to_le_bytes());
        }
        StreamSeed(h.finalize().into())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.0)
    }
}

impl fmt::Debug for StreamSeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StreamSeed(")?;
        for b in &self.0[..6] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..)")
    }
}

/// Random stream for `keys` under `master`.
pub fn keyed_rng(master: u64, keys: &[u64]) -> ChaCha8Rng {
    StreamSeed::root(master).child(keys).rng()
}

/// How probabilities are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OracleKind {
    Exact,
    Binomial { shots: u32 },
}

impl OracleKind {
    pub fn shots(&self) -> u32 {
        match self {
            OracleKind::Exact => 0,
            OracleKind::Binomial { shots } => *shots,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, OracleKind::Exact)
    }
}

impl fmt::Display for OracleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleKind::Exact => write!(f, "exact"),
            OracleKind::Binomial { shots } => write!(f, "{shots}"),
        }
    }
}

// Serialized as "exact" or a plain shot count.
impl Serialize for OracleKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            OracleKind::Exact => s.serialize_str("exact"),
            OracleKind::Binomial { shots } => s.serialize_u32(*shots),
        }
    }
}

impl<'de> Deserialize<'de> for OracleKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(i64),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Name(s) if s.eq_ignore_ascii_case("exact") || s == "inf" => Ok(OracleKind::Exact),
            Raw::Name(s) => s
                .parse::<u32>()
                .map_err(|_| serde::de::Error::custom(format!("expected \"exact\" or a shot count, got {s:?}")))
                .and_then(|n| shots_kind(n).map_err(serde::de::Error::custom)),
            Raw::Count(n) => u32::try_from(n)
                .map_err(|_| serde::de::Error::custom(format!("shot count {n} out of range")))
                .and_then(|n| shots_kind(n).map_err(serde::de::Error::custom)),
        }
    }
}

fn shots_kind(n: u32) -> Result<OracleKind, ShotsError> {
    if n == 0 {
        Err(ShotsError::ZeroShots)
    } else {
        Ok(OracleKind::Binomial { shots: n })
    }
}

/// Exact or finite-shot measurement with its own random stream.
#[derive(Debug, Clone)]
pub struct MeasurementOracle {
    kind: OracleKind,
    seed: StreamSeed,
    rng: ChaCha8Rng,
}

impl MeasurementOracle {
    pub fn new(kind: OracleKind, master_seed: u64) -> Result<Self, ShotsError> {
        Self::from_seed(kind, StreamSeed::root(master_seed))
    }

    pub fn exact() -> Self {
        Self::from_seed(OracleKind::Exact, StreamSeed::root(0)).expect("exact oracle")
    }

    pub fn from_seed(kind: OracleKind, seed: StreamSeed) -> Result<Self, ShotsError> {
        if kind == (OracleKind::Binomial { shots: 0 }) {
            return Err(ShotsError::ZeroShots);
        }
        Ok(MeasurementOracle {
            kind,
            seed,
            rng: seed.rng(),
        })
    }

    pub fn kind(&self) -> OracleKind {
        self.kind
    }

    /// Independent oracle of the same kind for the sub-key `keys`.
    pub fn fork(&self, keys: &[u64]) -> Self {
        let seed = self.seed.child(keys);
        MeasurementOracle {
            kind: self.kind,
            seed,
            rng: seed.rng(),
        }
    }

    /// One estimate of `p_true`: itself when exact, `N_success / N_all`
    /// otherwise.
    pub fn estimate_probability(&mut self, p_true: f64) -> Result<f64, ShotsError> {
        if !(p_true >= -PROBABILITY_SLACK && p_true <= 1.0 + PROBABILITY_SLACK) {
            return Err(ShotsError::InvalidProbability(p_true));
        }
        match self.kind {
            OracleKind::Exact => Ok(p_true),
            OracleKind::Binomial { shots } => {
                let p = p_true.clamp(0.0, 1.0);
                let successes = if shots <= BERNOULLI_SUM_MAX {
                    (0..shots).filter(|_| self.rng.random::<f64>() < p).count() as u64
                } else {
                    Binomial::new(u64::from(shots), p)
                        .expect("p lies in [0, 1]")
                        .sample(&mut self.rng)
                };
                Ok(successes as f64 / f64::from(shots))
            }
        }
    }
}

/// Free-function form of [`MeasurementOracle::estimate_probability`].
pub fn estimate_probability(p_true: f64, oracle: &mut MeasurementOracle) -> Result<f64, ShotsError> {
    oracle.estimate_probability(p_true)
}

/// A reconstructed polynomial and the number of shots spent on it.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedPoly {
    pub poly: TrigPoly,
    pub shots_used: u64,
}

/// Measures `probe_fn` once at each probe phase (probe `k` drawing from
/// `oracle.fork(&[k])`) and reconstructs the polynomial.
pub fn estimate_trigpoly<F, E>(
    probe_fn: F,
    inverse: &FourierInverse,
    oracle: &MeasurementOracle,
) -> Result<EstimatedPoly, E>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: From<ShotsError>,
{
    let truth = probe_all(probe_fn, inverse)?;
    Ok(sample_batch(&truth, inverse, oracle)?)
}

/// Two estimates from disjoint batches (`oracle.fork(&[0])` and
/// `oracle.fork(&[1])`). With an exact oracle both are the true polynomial.
/// The circuit itself is probed once; only the measurement is repeated.
pub fn independent_pair<F, E>(
    probe_fn: F,
    inverse: &FourierInverse,
    oracle: &MeasurementOracle,
) -> Result<(EstimatedPoly, EstimatedPoly), E>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: From<ShotsError>,
{
    let truth = probe_all(probe_fn, inverse)?;
    if oracle.kind().is_exact() {
        let single = sample_batch(&truth, inverse, oracle)?;
        return Ok((single.clone(), single));
    }
    let first = sample_batch(&truth, inverse, &oracle.fork(&[0]))?;
    let second = sample_batch(&truth, inverse, &oracle.fork(&[1]))?;
    Ok((first, second))
}

fn probe_all<F, E>(mut probe_fn: F, inverse: &FourierInverse) -> Result<Vec<f64>, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    inverse
        .schedule()
        .phases()
        .iter()
        .map(|&phi| probe_fn(phi))
        .collect()
}

fn sample_batch(
    truth: &[f64],
    inverse: &FourierInverse,
    oracle: &MeasurementOracle,
) -> Result<EstimatedPoly, ShotsError> {
    let samples = truth
        .iter()
        .enumerate()
        .map(|(k, &p)| oracle.fork(&[k as u64]).estimate_probability(p))
        .collect::<Result<Vec<_>, _>>()?;
    let poly = inverse
        .reconstruct(&samples)
        .expect("one sample per probe phase");
    let shots_used = u64::from(oracle.kind().shots()) * truth.len() as u64;
    Ok(EstimatedPoly { poly, shots_used })
}
