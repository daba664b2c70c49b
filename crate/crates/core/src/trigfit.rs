//! Trigonometric polynomials of the probe phase and their reconstruction from
//! `2n + 1` equidistant samples.
//!
//! A degree-`n` polynomial is stored as `[A_0, A_1, A_2, ..., A_{2n}]` with
//!
//! ```text
//! p(phi) = A_0 + sum_{k=1..n} A_{2k-1} cos(k phi) + A_{2k} sin(k phi)
//! ```
//!
//! Samples are taken at `0, +2pi/(2n+1), -2pi/(2n+1), +4pi/(2n+1), ...`. At
//! these phases the sampling matrix is a discrete Fourier transform, so the
//! inverse is explicit:
//!
//! ```text
//! A_0      = 1/(2n+1) sum_j r_j
//! A_{2k-1} = 2/(2n+1) sum_j r_j cos(k phi_j)
//! A_{2k}   = 2/(2n+1) sum_j r_j sin(k phi_j)
//! ```

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrigFitError {
    #[error("expected {expected} samples for degree {degree}, got {got}")]
    WrongSampleCount {
        degree: usize,
        expected: usize,
        got: usize,
    },
    #[error("a trigonometric polynomial needs an odd number of coefficients, got {0}")]
    EvenCoefficientCount(usize),
    #[error("cost is not finite at {at} (value {value})")]
    NonFinite { at: f64, value: f64 },
    #[error("search interval [{lo}, {hi}] is empty")]
    EmptyInterval { lo: f64, hi: f64 },
    #[error("grid scan needs at least 2 points, got {0}")]
    TooFewGridPoints(usize),
    #[error("sampling matrix is singular")]
    Singular,
}

/// `A_0 + sum_k A_{2k-1} cos(k phi) + A_{2k} sin(k phi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TrigPoly {
    coeffs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for TrigPoly {
    type Error = TrigFitError;

    fn try_from(coeffs: Vec<f64>) -> Result<Self, Self::Error> {
        TrigPoly::new(coeffs)
    }
}

impl From<TrigPoly> for Vec<f64> {
    fn from(p: TrigPoly) -> Self {
        p.coeffs
    }
}

impl TrigPoly {
    pub fn new(coeffs: Vec<f64>) -> Result<Self, TrigFitError> {
        if coeffs.len() % 2 == 0 {
            return Err(TrigFitError::EvenCoefficientCount(coeffs.len()));
        }
        Ok(TrigPoly { coeffs })
    }

    pub fn constant(value: f64, degree: usize) -> Self {
        let mut coeffs = vec![0.0; 2 * degree + 1];
        coeffs[0] = value;
        TrigPoly { coeffs }
    }

    pub fn degree(&self) -> usize {
        (self.coeffs.len() - 1) / 2
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, phase: f64) -> f64 {
        let n = self.degree();
        if n == 0 {
            return self.coeffs[0];
        }
        let (s1, c1) = phase.sin_cos();
        let (mut s, mut c) = (s1, c1);
        let mut acc = self.coeffs[0];
        for k in 1..=n {
            acc += self.coeffs[2 * k - 1] * c + self.coeffs[2 * k] * s;
            // Angle addition: (k+1) phi from k phi.
            let next_c = c * c1 - s * s1;
            s = s * c1 + c * s1;
            c = next_c;
        }
        acc
    }

    /// Complex Fourier coefficients `c_{-n}, ..., c_n` with `p = sum c_k e^{ik phi}`.
    fn to_exponential(&self) -> Vec<Complex64> {
        let n = self.degree();
        let mut out = vec![Complex64::new(0.0, 0.0); 2 * n + 1];
        out[n] = Complex64::new(self.coeffs[0], 0.0);
        for k in 1..=n {
            let ck = Complex64::new(self.coeffs[2 * k - 1], -self.coeffs[2 * k]) * 0.5;
            out[n + k] = ck;
            out[n - k] = ck.conj();
        }
        out
    }

    fn from_exponential(exp: &[Complex64]) -> Self {
        let n = (exp.len() - 1) / 2;
        let mut coeffs = vec![0.0; 2 * n + 1];
        coeffs[0] = exp[n].re;
        for k in 1..=n {
            // Average the conjugate pair so the result is exactly real.
            let ck = (exp[n + k] + exp[n - k].conj()) * 0.5;
            coeffs[2 * k - 1] = 2.0 * ck.re;
            coeffs[2 * k] = -2.0 * ck.im;
        }
        TrigPoly { coeffs }
    }

    /// Pointwise product; the degree is the sum of the degrees.
    pub fn mul(&self, other: &TrigPoly) -> TrigPoly {
        let a = self.to_exponential();
        let b = other.to_exponential();
        let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        TrigPoly::from_exponential(&out)
    }

    /// `self + other`, padding the lower-degree operand with zeros.
    pub fn add(&self, other: &TrigPoly) -> TrigPoly {
        let (long, short) = if self.coeffs.len() >= other.coeffs.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut coeffs = long.coeffs.clone();
        for (c, s) in coeffs.iter_mut().zip(&short.coeffs) {
            *c += s;
        }
        TrigPoly { coeffs }
    }

    pub fn scale(&self, factor: f64) -> TrigPoly {
        TrigPoly {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// The polynomial `theta -> self(theta + offset)`.
    pub fn shift(&self, offset: f64) -> TrigPoly {
        let mut coeffs = self.coeffs.clone();
        for k in 1..=self.degree() {
            let (s, c) = (k as f64 * offset).sin_cos();
            let (a, b) = (self.coeffs[2 * k - 1], self.coeffs[2 * k]);
            // a cos(k(t+o)) + b sin(k(t+o))
            coeffs[2 * k - 1] = a * c + b * s;
            coeffs[2 * k] = b * c - a * s;
        }
        TrigPoly { coeffs }
    }
}

/// The `2n + 1` probe phases for degree `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSchedule {
    degree: usize,
    phases: Vec<f64>,
}

impl ProbeSchedule {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }
}

/// `[0, +2pi/(2n+1), -2pi/(2n+1), +4pi/(2n+1), -4pi/(2n+1), ...]`.
pub fn probe_phases(n: usize) -> ProbeSchedule {
    let m = (2 * n + 1) as f64;
    let mut phases = Vec::with_capacity(2 * n + 1);
    phases.push(0.0);
    for k in 1..=n {
        let phi = 2.0 * PI * k as f64 / m;
        phases.push(phi);
        phases.push(-phi);
    }
    ProbeSchedule { degree: n, phases }
}

/// Sampling matrix: row `j` is `[1, cos phi_j, sin phi_j, cos 2phi_j, ...]`.
pub fn forward_matrix(schedule: &ProbeSchedule) -> DMatrix<f64> {
    let n = schedule.degree();
    let rows = schedule.len();
    DMatrix::from_fn(rows, 2 * n + 1, |j, col| {
        let phi = schedule.phases()[j];
        if col == 0 {
            1.0
        } else {
            let k = ((col + 1) / 2) as f64;
            if col % 2 == 1 {
                (k * phi).cos()
            } else {
                (k * phi).sin()
            }
        }
    })
}

/// Explicit inverse of the sampling matrix at the equidistant probe phases.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierInverse {
    schedule: ProbeSchedule,
    matrix: DMatrix<f64>,
}

impl FourierInverse {
    pub fn new(n: usize) -> Self {
        let schedule = probe_phases(n);
        let m = (2 * n + 1) as f64;
        let matrix = DMatrix::from_fn(2 * n + 1, 2 * n + 1, |row, j| {
            let phi = schedule.phases()[j];
            if row == 0 {
                1.0 / m
            } else {
                let k = ((row + 1) / 2) as f64;
                let t = if row % 2 == 1 {
                    (k * phi).cos()
                } else {
                    (k * phi).sin()
                };
                2.0 / m * t
            }
        });
        FourierInverse { schedule, matrix }
    }

    pub fn degree(&self) -> usize {
        self.schedule.degree()
    }

    pub fn schedule(&self) -> &ProbeSchedule {
        &self.schedule
    }

    /// Coefficients-from-samples matrix (rows follow coefficient order,
    /// columns follow probe order).
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn reconstruct(&self, samples: &[f64]) -> Result<TrigPoly, TrigFitError> {
        let dim = self.schedule.len();
        if samples.len() != dim {
            return Err(TrigFitError::WrongSampleCount {
                degree: self.degree(),
                expected: dim,
                got: samples.len(),
            });
        }
        let coeffs = (0..dim)
            .map(|row| {
                samples
                    .iter()
                    .enumerate()
                    .map(|(j, r)| self.matrix[(row, j)] * r)
                    .sum()
            })
            .collect();
        Ok(TrigPoly { coeffs })
    }
}

/// Reconstructs the degree-`n` polynomial from samples at [`probe_phases`].
pub fn reconstruct(samples: &[f64], n: usize) -> Result<TrigPoly, TrigFitError> {
    FourierInverse::new(n).reconstruct(samples)
}

/// Same result as [`reconstruct`], by LU-solving the sampling system directly.
pub fn reconstruct_by_solve(samples: &[f64], n: usize) -> Result<TrigPoly, TrigFitError> {
    let schedule = probe_phases(n);
    if samples.len() != schedule.len() {
        return Err(TrigFitError::WrongSampleCount {
            degree: n,
            expected: schedule.len(),
            got: samples.len(),
        });
    }
    let a = forward_matrix(&schedule);
    let b = DVector::from_column_slice(samples);
    let x = a.lu().solve(&b).ok_or(TrigFitError::Singular)?;
    Ok(TrigPoly {
        coeffs: x.iter().copied().collect(),
    })
}

/// Evaluates `poly` at `phase`.
pub fn eval(poly: &TrigPoly, phase: f64) -> f64 {
    poly.eval(phase)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub grid_points: usize,
    pub tol: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            grid_points: 2048,
            tol: 1e-10,
        }
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Global minimum of `f` on `[lo, hi]`: a uniform grid scan over
/// `grid_points` abscissae (both ends included) followed by golden-section
/// refinement inside the bracket around the best grid point. Ties go to the
/// smallest abscissa. Returns `(argmin, min_value)`.
pub fn minimize_1d<F>(
    f: F,
    lo: f64,
    hi: f64,
    opts: MinimizeOptions,
) -> Result<(f64, f64), TrigFitError>
where
    F: Fn(f64) -> f64,
{
    if !(lo < hi) {
        return Err(TrigFitError::EmptyInterval { lo, hi });
    }
    if opts.grid_points < 2 {
        return Err(TrigFitError::TooFewGridPoints(opts.grid_points));
    }
    let checked = |x: f64| -> Result<f64, TrigFitError> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(TrigFitError::NonFinite { at: x, value: v })
        }
    };

    let last = opts.grid_points - 1;
    let step = (hi - lo) / last as f64;
    let abscissa = |i: usize| if i == last { hi } else { lo + step * i as f64 };

    let mut best_i = 0;
    let mut best_v = checked(lo)?;
    for i in 1..opts.grid_points {
        let v = checked(abscissa(i))?;
        if v < best_v {
            best_i = i;
            best_v = v;
        }
    }
    let best_x = abscissa(best_i);

    let mut a = abscissa(best_i.saturating_sub(1));
    let mut b = abscissa((best_i + 1).min(last));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = checked(c)?;
    let mut fd = checked(d)?;
    while b - a > opts.tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = checked(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = checked(d)?;
        }
        // Stop once the bracket cannot shrink in floating point.
        if c >= d {
            break;
        }
    }
    let x = 0.5 * (a + b);
    let v = checked(x)?;
    if v <= best_v {
        Ok((x, v))
    } else {
        Ok((best_x, best_v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probe_phases_match_known_lists() {
        let p = probe_phases(2);
        let expected = [0.0, 2.0 * PI / 5.0, -2.0 * PI / 5.0, 4.0 * PI / 5.0, -4.0 * PI / 5.0];
        assert_eq!(p.phases(), &expected);
        let p = probe_phases(1);
        assert_eq!(p.phases(), &[0.0, 2.0 * PI / 3.0, -2.0 * PI / 3.0]);
        for n in 1..6 {
            let p = probe_phases(n);
            assert_eq!(p.len(), 2 * n + 1);
            for w in p.phases()[1..].chunks(2) {
                assert_eq!(w[0], -w[1]);
                assert!(w[0] > 0.0 && w[0] < PI);
            }
        }
    }

    #[test]
    fn constant_samples_give_constant_poly() {
        let poly = reconstruct(&[0.4; 5], 2).unwrap();
        assert!((poly.coeffs()[0] - 0.4).abs() < 1e-15);
        for c in &poly.coeffs()[1..] {
            assert!(c.abs() < 1e-15);
        }
    }

    #[test]
    fn unit_sample_at_zero_phase() {
        // Only r_0 = 1: the column multiplying r_0.
        let poly = reconstruct(&[1.0, 0.0, 0.0, 0.0, 0.0], 2).unwrap();
        let expected = [0.2, 0.4, 0.0, 0.4, 0.0];
        for (a, b) in poly.coeffs().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn wrong_sample_count() {
        assert_eq!(
            reconstruct(&[1.0; 4], 2),
            Err(TrigFitError::WrongSampleCount {
                degree: 2,
                expected: 5,
                got: 4
            })
        );
        assert_eq!(
            TrigPoly::new(vec![1.0, 2.0]),
            Err(TrigFitError::EvenCoefficientCount(2))
        );
    }

    #[test]
    fn eval_basics() {
        let half = TrigPoly::new(vec![0.5, 0.0, 0.0]).unwrap();
        assert_eq!(eval(&half, 1.234), 0.5);
        let cos = TrigPoly::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(cos.eval(0.0), 1.0);
        assert!(cos.eval(PI / 2.0).abs() < 1e-16);
    }

    #[test]
    fn shift_and_mul_agree_pointwise() {
        let p = TrigPoly::new(vec![0.3, -0.2, 0.5, 0.1, 0.05]).unwrap();
        let q = TrigPoly::new(vec![0.1, 0.7, -0.3]).unwrap();
        let pq = p.mul(&q);
        assert_eq!(pq.degree(), 3);
        let s = p.shift(0.9);
        for i in 0..50 {
            let t = -3.0 + 0.12 * i as f64;
            assert!((pq.eval(t) - p.eval(t) * q.eval(t)).abs() < 1e-14);
            assert!((s.eval(t) - p.eval(t + 0.9)).abs() < 1e-14);
            assert!((p.add(&q).eval(t) - p.eval(t) - q.eval(t)).abs() < 1e-14);
        }
    }

    #[test]
    fn minimize_cos_picks_smallest_tie() {
        let (x, v) = minimize_1d(f64::cos, -PI, PI, MinimizeOptions::default()).unwrap();
        assert!((x + PI).abs() < 1e-6, "argmin {x}");
        assert!((v + 1.0).abs() < 1e-12);
    }

    #[test]
    fn minimize_shifted_sine() {
        let f = |x: f64| (x.sin() - 1.0).powi(2);
        let (x, v) = minimize_1d(f, -PI, PI, MinimizeOptions::default()).unwrap();
        assert!((x - PI / 2.0).abs() < 1e-6);
        assert!(v < 1e-20);
    }

    #[test]
    fn minimize_errors() {
        let opts = MinimizeOptions::default();
        assert!(matches!(
            minimize_1d(|x| x, 1.0, 1.0, opts),
            Err(TrigFitError::EmptyInterval { .. })
        ));
        let err = minimize_1d(|x| if x > 0.5 { f64::NAN } else { x }, 0.0, 1.0, opts).unwrap_err();
        match err {
            TrigFitError::NonFinite { at, .. } => assert!(at > 0.5),
            other => panic!("unexpected {other:?}"),
        }
    }
}
