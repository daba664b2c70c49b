//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls the library's permanent, lift or circuit simulator.
#![allow(dead_code)]

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use photonic_smo::circuit::{Element, InputTerm, PhaseExpr};
use photonic_smo::fock::Occupation;
use photonic_smo::{CircuitSpec, DataPoint, ParameterVector};
use rand::Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Permanent as a sum over all permutations.
pub fn brute_permanent(m: &DMatrix<Complex64>) -> Complex64 {
    fn go(m: &DMatrix<Complex64>, row: usize, used: &mut Vec<bool>, acc: Complex64, total: &mut Complex64) {
        let n = m.nrows();
        if row == n {
            *total += acc;
            return;
        }
        for col in 0..n {
            if !used[col] {
                used[col] = true;
                go(m, row + 1, used, acc * m[(row, col)], total);
                used[col] = false;
            }
        }
    }
    let mut total = c(0.0, 0.0);
    go(m, 0, &mut vec![false; m.nrows()], c(1.0, 0.0), &mut total);
    total
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `<out| U |in>` by expanding `prod_c (sum_r U[r][c] a_r^dag)^{in_c} |0>`.
pub fn creation_amplitude(u: &DMatrix<Complex64>, out: &[usize], inp: &[usize]) -> Complex64 {
    let modes = u.nrows();
    let mut poly: HashMap<Vec<usize>, Complex64> = HashMap::new();
    poly.insert(vec![0; modes], c(1.0, 0.0));
    for (col, &count) in inp.iter().enumerate() {
        for _ in 0..count {
            let mut next: HashMap<Vec<usize>, Complex64> = HashMap::new();
            for (mono, coef) in &poly {
                for row in 0..modes {
                    let mut m = mono.clone();
                    m[row] += 1;
                    *next.entry(m).or_insert(c(0.0, 0.0)) += coef * u[(row, col)];
                }
            }
            poly = next;
        }
    }
    let coef = poly.get(out).copied().unwrap_or(c(0.0, 0.0));
    let out_norm: f64 = out.iter().map(|&k| factorial(k)).product::<f64>().sqrt();
    let in_norm: f64 = inp.iter().map(|&k| factorial(k)).product::<f64>().sqrt();
    coef * out_norm / in_norm
}

/// All occupations of `photons` over `modes`, in any order.
pub fn occupations(modes: usize, photons: usize) -> Vec<Vec<usize>> {
    if modes == 1 {
        return vec![vec![photons]];
    }
    (0..=photons)
        .flat_map(|k| {
            occupations(modes - 1, photons - k).into_iter().map(move |mut rest| {
                rest.insert(0, k);
                rest
            })
        })
        .collect()
}

/// Haar-ish random unitary: QR of a complex Gaussian matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> DMatrix<Complex64> {
    let mut gauss = || {
        // Box-Muller.
        let u1: f64 = rng.random_range(f64::EPSILON..1.0);
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    };
    let m = DMatrix::from_fn(n, n, |_, _| c(gauss(), gauss()));
    m.qr().q()
}

pub fn random_two_by_two<R: Rng>(rng: &mut R) -> [[Complex64; 2]; 2] {
    let u = random_unitary(rng, 2);
    [[u[(0, 0)], u[(0, 1)]], [u[(1, 0)], u[(1, 1)]]]
}

/// Mode unitary of the whole circuit at bound phases `phases` (one per
/// phase shifter, in element order): the product of every element's matrix.
pub fn circuit_mode_unitary(spec: &CircuitSpec, phases: &[f64]) -> DMatrix<Complex64> {
    let m = spec.modes;
    let mut total = DMatrix::<Complex64>::identity(m, m);
    let mut k = 0;
    for el in &spec.elements {
        let mut step = DMatrix::<Complex64>::identity(m, m);
        match el {
            Element::PhaseShifter { mode, .. } => {
                step[(*mode, *mode)] = Complex64::from_polar(1.0, phases[k]);
                k += 1;
            }
            Element::Beamsplitter { modes: [a, b], matrix } => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let u = matrix.unwrap_or([[c(s, 0.0), c(0.0, s)], [c(0.0, s), c(s, 0.0)]]);
                step[(*a, *a)] = u[0][0];
                step[(*a, *b)] = u[0][1];
                step[(*b, *a)] = u[1][0];
                step[(*b, *b)] = u[1][1];
            }
        }
        total = step * total;
    }
    total
}

/// Phase of each shifter for `params` and `x`, in element order.
pub fn bound_phases(spec: &CircuitSpec, params: &[f64], x: &[f64]) -> Vec<f64> {
    spec.elements
        .iter()
        .filter_map(|el| match el {
            Element::PhaseShifter { phase, .. } => {
                let offset = phase.offset.map_or(0.0, |p| params[p]);
                let data = match phase.feature {
                    Some(f) => phase.scale.map_or(1.0, |p| params[p]) * x[f],
                    None => 0.0,
                };
                Some(phase.constant + offset + data)
            }
            Element::Beamsplitter { .. } => None,
        })
        .collect()
}

/// Outcome probability by lifting the whole-circuit mode unitary with the
/// creation-operator expansion.
pub fn dense_probability(spec: &CircuitSpec, phases: &[f64]) -> f64 {
    let u = circuit_mode_unitary(spec, phases);
    let out = spec.outcome.counts();
    let amp: Complex64 = spec
        .input
        .iter()
        .map(|t| t.amplitude * creation_amplitude(&u, out, t.occupation.counts()))
        .sum();
    amp.norm_sqr()
}

/// Random circuit on 2 modes with 2 photons: 2 to 6 elements, at least one
/// phase shifter, each shifter owning one offset parameter and some also a
/// scale parameter on feature 0.
pub fn random_two_mode_circuit<R: Rng>(rng: &mut R) -> CircuitSpec {
    let count = rng.random_range(2..=6);
    let shifter_at = rng.random_range(0..count);
    let mut elements = Vec::new();
    let mut params = 0;
    for i in 0..count {
        if i == shifter_at || rng.random_bool(0.5) {
            let scaled = rng.random_bool(0.5);
            let phase = PhaseExpr {
                offset: Some(params),
                scale: scaled.then_some(params + 1),
                feature: scaled.then_some(0),
                constant: rng.random_range(-1.0..1.0),
            };
            params += if scaled { 2 } else { 1 };
            elements.push(Element::PhaseShifter {
                mode: rng.random_range(0..2),
                phase,
            });
        } else {
            elements.push(Element::Beamsplitter {
                modes: [0, 1],
                matrix: rng.random_bool(0.7).then(|| random_two_by_two(rng)),
            });
        }
    }
    let basis = occupations(2, 2);
    let raw: Vec<Complex64> = basis
        .iter()
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let input = basis
        .iter()
        .zip(&raw)
        .map(|(occ, a)| InputTerm {
            occupation: Occupation::new(occ.clone()),
            amplitude: a / norm,
        })
        .collect();
    let outcome = Occupation::new(basis[rng.random_range(0..basis.len())].clone());
    CircuitSpec {
        modes: 2,
        photons: 2,
        param_count: params,
        input,
        outcome,
        elements,
    }
}

pub fn random_params<R: Rng>(rng: &mut R, count: usize) -> ParameterVector {
    ParameterVector((0..count).map(|_| rng.random_range(-PI..PI)).collect())
}

pub fn random_point<R: Rng>(rng: &mut R) -> DataPoint {
    DataPoint::new(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)], rng.random_range(0..2))
}

/// Smallest angle between two phases.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Max entry-wise modulus of `a - b`.
pub fn max_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Every global minimizer of a periodic `f` on `[-pi, pi)`: local minima of
/// a `grid`-point cyclic scan, each refined by golden section, kept when
/// within `1e-12` of the best value. Symmetric costs have several.
pub fn global_minimizers<F: Fn(f64) -> f64>(f: F, grid: usize) -> Vec<f64> {
    let h = 2.0 * PI / grid as f64;
    let xs: Vec<f64> = (0..grid).map(|i| -PI + h * i as f64).collect();
    let vs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut refined = Vec::new();
    for i in 0..grid {
        let (prev, next) = (vs[(i + grid - 1) % grid], vs[(i + 1) % grid]);
        if vs[i] <= prev && vs[i] < next {
            let (mut a, mut b) = (xs[i] - h, xs[i] + h);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            while b - a > 1e-11 {
                let (c, d) = (b - g * (b - a), a + g * (b - a));
                if f(c) <= f(d) {
                    b = d;
                } else {
                    a = c;
                }
            }
            let x = 0.5 * (a + b);
            refined.push((x, f(x)));
        }
    }
    let best = refined.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    refined
        .into_iter()
        .filter(|r| r.1 <= best + 1e-12 * best.abs().max(1.0))
        .map(|r| r.0)
        .collect()
}

/// Circular distance from `x` to the nearest point of `set`.
pub fn distance_to_set(x: f64, set: &[f64]) -> f64 {
    set.iter().map(|&s| circular_distance(x, s)).fold(f64::INFINITY, f64::min)
}
