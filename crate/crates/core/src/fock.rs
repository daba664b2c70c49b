//! Fixed-photon-number Fock sectors and passive (photon-number preserving)
//! evolution.
//!
//! A sector holds every occupation of `M` modes with `n` photons in total.
//! Basis vectors are enumerated in descending lexicographic order, so for two
//! modes and two photons the basis is `[(2,0), (1,1), (0,2)]`. All matrix and
//! vector indexing in the crate follows this order.
//!
//! Passive elements act on the mode creation operators through an `M x M`
//! unitary `U`, with `a_c^† -> sum_r U[r][c] a_r^†`. The induced operator on
//! the sector has matrix elements
//!
//! ```text
//! <out|U|in> = per(U[out, in]) / sqrt(prod out_k! * prod in_k!)
//! ```
//!
//! where `U[out, in]` repeats row `r` `out_r` times and column `c` `in_c`
//! times.
//!
//! The 50-50 beamsplitter uses the symmetric convention
//! `(1/sqrt 2) [[1, i], [i, 1]]`. Any other fixed convention differs by phases
//! that trainable phase shifters absorb.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default upper bound on the number of basis states in a sector.
pub const DEFAULT_BASIS_CAP: usize = 1_000_000;

/// Tolerance on `max |U^† U - I|` for mode unitaries.
pub const UNITARY_TOL: f64 = 1e-12;

/// Naive permutation expansion is used up to this size, Ryser above.
const NAIVE_PERMANENT_MAX: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("a Fock sector needs at least one mode")]
    NoModes,
    #[error("sector with {modes} modes and {photons} photons has {size} basis states, above the cap of {cap}")]
    BasisTooLarge {
        modes: usize,
        photons: usize,
        size: u128,
        cap: usize,
    },
    #[error("mode index {mode} out of range for {modes} modes")]
    ModeOutOfRange { mode: usize, modes: usize },
    #[error("occupation {0} is not in the sector")]
    NotInSector(Occupation),
    #[error("matrix is {rows}x{cols}, expected a square matrix")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not unitary (max deviation {deviation:e})")]
    NotUnitary { deviation: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("beamsplitter modes must be distinct, got ({0}, {0})")]
    RepeatedMode(usize),
}

/// Photon counts per mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Occupation(pub Vec<usize>);

impl Occupation {
    pub fn new(counts: impl Into<Vec<usize>>) -> Self {
        Occupation(counts.into())
    }

    pub fn counts(&self) -> &[usize] {
        &self.0
    }

    pub fn modes(&self) -> usize {
        self.0.len()
    }

    pub fn photons(&self) -> usize {
        self.0.iter().sum()
    }

    fn factorial_product(&self) -> f64 {
        self.0.iter().map(|&k| factorial(k)).product()
    }

    /// Mode labels repeated by occupation, e.g. `(2,0,1)` -> `[0, 0, 2]`.
    fn mode_list(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(m, &k)| std::iter::repeat_n(m, k))
            .collect()
    }
}

impl fmt::Display for Occupation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, "⟩")
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

fn binomial(n: u128, k: u128) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// All occupations of `modes` modes holding `photons` photons.
#[derive(Debug, Clone, PartialEq)]
pub struct FockSector {
    modes: usize,
    photons: usize,
    basis: Vec<Occupation>,
    index: HashMap<Occupation, usize>,
}

impl FockSector {
    pub fn new(modes: usize, photons: usize) -> Result<Self, FockError> {
        Self::with_cap(modes, photons, DEFAULT_BASIS_CAP)
    }

    pub fn with_cap(modes: usize, photons: usize, cap: usize) -> Result<Self, FockError> {
        if modes == 0 {
            return Err(FockError::NoModes);
        }
        let size = binomial((photons + modes - 1) as u128, photons as u128).unwrap_or(u128::MAX);
        if size > cap as u128 {
            return Err(FockError::BasisTooLarge {
                modes,
                photons,
                size,
                cap,
            });
        }

        let mut basis = Vec::with_capacity(size as usize);
        let mut current = vec![0; modes];
        enumerate_descending(0, photons, &mut current, &mut basis);
        let index = basis
            .iter()
            .enumerate()
            .map(|(i, occ)| (occ.clone(), i))
            .collect();
        Ok(FockSector {
            modes,
            photons,
            basis,
            index,
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn photons(&self) -> usize {
        self.photons
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Occupation] {
        &self.basis
    }

    pub fn index_of(&self, occ: &Occupation) -> Result<usize, FockError> {
        self.index
            .get(occ)
            .copied()
            .ok_or_else(|| FockError::NotInSector(occ.clone()))
    }

    pub fn contains(&self, occ: &Occupation) -> bool {
        self.index.contains_key(occ)
    }
}

fn enumerate_descending(
    mode: usize,
    remaining: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<Occupation>,
) {
    if mode + 1 == current.len() {
        current[mode] = remaining;
        out.push(Occupation(current.clone()));
        return;
    }
    for k in (0..=remaining).rev() {
        current[mode] = k;
        enumerate_descending(mode + 1, remaining - k, current, out);
    }
}

/// Canonical basis of the sector with `modes` modes and `photons` photons.
pub fn sector_basis(modes: usize, photons: usize) -> Result<FockSector, FockError> {
    FockSector::new(modes, photons)
}

/// A pure state in a fixed-photon-number sector.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    sector: Arc<FockSector>,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn from_amplitudes(
        sector: Arc<FockSector>,
        amplitudes: Vec<Complex64>,
    ) -> Result<Self, FockError> {
        if amplitudes.len() != sector.dim() {
            return Err(FockError::DimensionMismatch {
                expected: sector.dim(),
                got: amplitudes.len(),
            });
        }
        Ok(StateVector { sector, amplitudes })
    }

    pub fn basis_state(sector: Arc<FockSector>, occ: &Occupation) -> Result<Self, FockError> {
        let idx = sector.index_of(occ)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); sector.dim()];
        amplitudes[idx] = Complex64::new(1.0, 0.0);
        Ok(StateVector { sector, amplitudes })
    }

    /// `(|n,0,..⟩ + |0,..,n⟩)/sqrt 2` between modes `a` and `b`.
    pub fn noon(sector: Arc<FockSector>, a: usize, b: usize) -> Result<Self, FockError> {
        let modes = sector.modes();
        for m in [a, b] {
            if m >= modes {
                return Err(FockError::ModeOutOfRange { mode: m, modes });
            }
        }
        if a == b {
            return Err(FockError::RepeatedMode(a));
        }
        let n = sector.photons();
        let mut left = vec![0; modes];
        left[a] = n;
        let mut right = vec![0; modes];
        right[b] = n;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); sector.dim()];
        let w = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        amplitudes[sector.index_of(&Occupation(left))?] += w;
        amplitudes[sector.index_of(&Occupation(right))?] += w;
        Ok(StateVector { sector, amplitudes })
    }

    pub fn sector(&self) -> &Arc<FockSector> {
        &self.sector
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn amplitude(&self, occ: &Occupation) -> Result<Complex64, FockError> {
        Ok(self.amplitudes[self.sector.index_of(occ)?])
    }

    /// Multiplies the amplitude of every occupation with `k` photons in
    /// `mode` by `exp(i k phase)`.
    pub fn apply_phase_shifter(&self, mode: usize, phase: f64) -> Result<Self, FockError> {
        let mut out = self.clone();
        out.phase_shift_in_place(mode, phase)?;
        Ok(out)
    }

    pub fn phase_shift_in_place(&mut self, mode: usize, phase: f64) -> Result<(), FockError> {
        let modes = self.sector.modes();
        if mode >= modes {
            return Err(FockError::ModeOutOfRange { mode, modes });
        }
        let powers: Vec<Complex64> = (0..=self.sector.photons())
            .map(|k| Complex64::from_polar(1.0, k as f64 * phase))
            .collect();
        for (amp, occ) in self.amplitudes.iter_mut().zip(self.sector.basis()) {
            let k = occ.0[mode];
            if k > 0 {
                *amp *= powers[k];
            }
        }
        Ok(())
    }

    /// Applies a sector-dimension operator (for instance one produced by
    /// [`lift_mode_unitary`]).
    pub fn apply_sector_matrix(&self, op: &DMatrix<Complex64>) -> Result<Self, FockError> {
        let dim = self.sector.dim();
        if op.nrows() != dim || op.ncols() != dim {
            return Err(FockError::DimensionMismatch {
                expected: dim,
                got: op.nrows(),
            });
        }
        let amplitudes = (0..dim)
            .map(|r| {
                (0..dim)
                    .map(|c| op[(r, c)] * self.amplitudes[c])
                    .sum::<Complex64>()
            })
            .collect();
        Ok(StateVector {
            sector: Arc::clone(&self.sector),
            amplitudes,
        })
    }

    pub fn outcome_probability(&self, outcome: &Occupation) -> Result<f64, FockError> {
        Ok(self.amplitude(outcome)?.norm_sqr())
    }

    /// Outcome probabilities over the whole basis, in basis order.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Squared magnitude of the amplitude at `outcome`.
pub fn outcome_probability(state: &StateVector, outcome: &Occupation) -> Result<f64, FockError> {
    state.outcome_probability(outcome)
}

/// Free-function form of [`StateVector::apply_phase_shifter`].
pub fn apply_phase_shifter(
    state: &StateVector,
    mode: usize,
    phase: f64,
) -> Result<StateVector, FockError> {
    state.apply_phase_shifter(mode, phase)
}

/// An `M x M` unitary acting on mode operators.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeUnitary {
    matrix: DMatrix<Complex64>,
}

impl ModeUnitary {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self, FockError> {
        if matrix.nrows() != matrix.ncols() {
            return Err(FockError::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        let deviation = unitarity_deviation(&matrix);
        if !(deviation <= UNITARY_TOL) {
            return Err(FockError::NotUnitary { deviation });
        }
        Ok(ModeUnitary { matrix })
    }

    pub fn identity(modes: usize) -> Self {
        ModeUnitary {
            matrix: DMatrix::identity(modes, modes),
        }
    }

    /// `(1/sqrt 2) [[1, i], [i, 1]]`.
    pub fn beamsplitter_50_50() -> Self {
        ModeUnitary {
            matrix: beamsplitter_matrix(),
        }
    }

    /// Diagonal unitary with `exp(i phase)` on `mode` and 1 elsewhere.
    pub fn phase(modes: usize, mode: usize, phase: f64) -> Result<Self, FockError> {
        if mode >= modes {
            return Err(FockError::ModeOutOfRange { mode, modes });
        }
        let mut matrix = DMatrix::identity(modes, modes);
        matrix[(mode, mode)] = Complex64::from_polar(1.0, phase);
        Ok(ModeUnitary { matrix })
    }

    /// Embeds a two-mode unitary acting on modes `(a, b)` into `modes` modes.
    pub fn embed_two_mode(
        modes: usize,
        a: usize,
        b: usize,
        two_mode: &ModeUnitary,
    ) -> Result<Self, FockError> {
        if two_mode.dim() != 2 {
            return Err(FockError::DimensionMismatch {
                expected: 2,
                got: two_mode.dim(),
            });
        }
        for m in [a, b] {
            if m >= modes {
                return Err(FockError::ModeOutOfRange { mode: m, modes });
            }
        }
        if a == b {
            return Err(FockError::RepeatedMode(a));
        }
        let mut matrix = DMatrix::identity(modes, modes);
        let u = &two_mode.matrix;
        matrix[(a, a)] = u[(0, 0)];
        matrix[(a, b)] = u[(0, 1)];
        matrix[(b, a)] = u[(1, 0)];
        matrix[(b, b)] = u[(1, 1)];
        Ok(ModeUnitary { matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Matrix product `self * other` (apply `other` first).
    pub fn compose(&self, other: &ModeUnitary) -> Result<Self, FockError> {
        if self.dim() != other.dim() {
            return Err(FockError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        ModeUnitary::new(&self.matrix * &other.matrix)
    }
}

pub(crate) fn beamsplitter_matrix() -> DMatrix<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(s, 0.0),
            Complex64::new(0.0, s),
            Complex64::new(0.0, s),
            Complex64::new(s, 0.0),
        ],
    )
}

/// `max |M^† M - I|` over all entries.
pub fn unitarity_deviation(m: &DMatrix<Complex64>) -> f64 {
    let prod = m.adjoint() * m;
    let n = prod.nrows();
    let mut worst: f64 = 0.0;
    for r in 0..n {
        for c in 0..n {
            let target = if r == c { 1.0 } else { 0.0 };
            let d = (prod[(r, c)] - Complex64::new(target, 0.0)).norm();
            // NaN must not compare as small.
            if d.is_nan() {
                return f64::NAN;
            }
            worst = worst.max(d);
        }
    }
    worst
}

/// Matrix permanent.
pub fn permanent(matrix: &DMatrix<Complex64>) -> Result<Complex64, FockError> {
    if matrix.nrows() != matrix.ncols() {
        return Err(FockError::NotSquare {
            rows: matrix.nrows(),
            cols: matrix.ncols(),
        });
    }
    if matrix.nrows() <= NAIVE_PERMANENT_MAX {
        Ok(permanent_expansion(matrix))
    } else {
        Ok(permanent_ryser(matrix))
    }
}

/// Row-by-row expansion over permutations.
fn permanent_expansion(m: &DMatrix<Complex64>) -> Complex64 {
    fn go(m: &DMatrix<Complex64>, row: usize, used: u64) -> Complex64 {
        let n = m.nrows();
        if row == n {
            return Complex64::new(1.0, 0.0);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for col in 0..n {
            if used & (1 << col) == 0 {
                acc += m[(row, col)] * go(m, row + 1, used | (1 << col));
            }
        }
        acc
    }
    go(m, 0, 0)
}

/// Ryser's inclusion-exclusion formula.
fn permanent_ryser(m: &DMatrix<Complex64>) -> Complex64 {
    let n = m.nrows();
    let mut total = Complex64::new(0.0, 0.0);
    for subset in 1u64..(1 << n) {
        let mut prod = Complex64::new(1.0, 0.0);
        for r in 0..n {
            let mut row_sum = Complex64::new(0.0, 0.0);
            for c in 0..n {
                if subset & (1 << c) != 0 {
                    row_sum += m[(r, c)];
                }
            }
            prod *= row_sum;
        }
        if (n - subset.count_ones() as usize) % 2 == 0 {
            total += prod;
        } else {
            total -= prod;
        }
    }
    total
}

/// Induced action of a mode unitary on a Fock sector.
pub fn lift_mode_unitary(
    u: &ModeUnitary,
    sector: &FockSector,
) -> Result<DMatrix<Complex64>, FockError> {
    if u.dim() != sector.modes() {
        return Err(FockError::DimensionMismatch {
            expected: sector.modes(),
            got: u.dim(),
        });
    }
    let dim = sector.dim();
    let n = sector.photons();
    let lists: Vec<Vec<usize>> = sector.basis().iter().map(Occupation::mode_list).collect();
    let norms: Vec<f64> = sector
        .basis()
        .iter()
        .map(Occupation::factorial_product)
        .collect();

    let mut lifted = DMatrix::zeros(dim, dim);
    let mut sub = DMatrix::zeros(n, n);
    for (o, rows) in lists.iter().enumerate() {
        for (i, cols) in lists.iter().enumerate() {
            for (a, &r) in rows.iter().enumerate() {
                for (b, &c) in cols.iter().enumerate() {
                    sub[(a, b)] = u.matrix[(r, c)];
                }
            }
            let per = permanent(&sub)?;
            lifted[(o, i)] = per / (norms[o] * norms[i]).sqrt();
        }
    }
    Ok(lifted)
}
