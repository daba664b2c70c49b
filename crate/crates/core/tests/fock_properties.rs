mod common;

use std::sync::Arc;

use common::{brute_permanent, c, creation_amplitude, max_diff, random_unitary};
use nalgebra::DMatrix;
use num_complex::Complex64;
use photonic_smo::fock::{
    lift_mode_unitary, permanent, unitarity_deviation, FockSector, ModeUnitary, Occupation, StateVector,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn unitary(seed: u64, modes: usize) -> ModeUnitary {
    ModeUnitary::new(random_unitary(&mut ChaCha8Rng::seed_from_u64(seed), modes)).unwrap()
}

fn sector(modes: usize, photons: usize) -> FockSector {
    FockSector::new(modes, photons).unwrap()
}

fn random_state(seed: u64, sector: Arc<FockSector>) -> StateVector {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<Complex64> = (0..sector.dim())
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    StateVector::from_amplitudes(sector, raw.into_iter().map(|a| a / norm).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lift_is_unitary(seed in any::<u64>(), modes in 1usize..=4, photons in 0usize..=4) {
        let s = sector(modes, photons);
        let lifted = lift_mode_unitary(&unitary(seed, modes), &s).unwrap();
        prop_assert!(unitarity_deviation(&lifted) < 1e-11);
    }

    #[test]
    fn lift_is_a_homomorphism(a in any::<u64>(), b in any::<u64>(), modes in 1usize..=3, photons in 0usize..=4) {
        let s = sector(modes, photons);
        let (u, v) = (unitary(a, modes), unitary(b, modes));
        let uv = u.compose(&v).unwrap();
        let lhs = lift_mode_unitary(&uv, &s).unwrap();
        let rhs = lift_mode_unitary(&u, &s).unwrap() * lift_mode_unitary(&v, &s).unwrap();
        prop_assert!(max_diff(&lhs, &rhs) < 1e-11);
    }

    #[test]
    fn lift_matches_creation_operator_expansion(seed in any::<u64>(), modes in 1usize..=3, photons in 0usize..=3) {
        let s = sector(modes, photons);
        let u = unitary(seed, modes);
        let lifted = lift_mode_unitary(&u, &s).unwrap();
        for (i, out) in s.basis().iter().enumerate() {
            for (j, inp) in s.basis().iter().enumerate() {
                let want = creation_amplitude(u.matrix(), out.counts(), inp.counts());
                prop_assert!((lifted[(i, j)] - want).norm() < 1e-12,
                    "<{}|U|{}>: {} vs {}", out, inp, lifted[(i, j)], want);
            }
        }
    }

    #[test]
    fn evolution_preserves_norm(seed in any::<u64>(), modes in 1usize..=4, photons in 0usize..=3) {
        let s = Arc::new(sector(modes, photons));
        let psi = random_state(seed ^ 1, s.clone());
        let lifted = lift_mode_unitary(&unitary(seed, modes), &s).unwrap();
        let out = psi.apply_sector_matrix(&lifted).unwrap();
        prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
        let total: f64 = out.probabilities().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(out.probabilities().iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn phase_shifter_is_diagonal(seed in any::<u64>(), modes in 1usize..=3, photons in 0usize..=4, phi in -10.0f64..10.0) {
        let s = Arc::new(sector(modes, photons));
        let mode = (seed % modes as u64) as usize;
        let lifted = lift_mode_unitary(&ModeUnitary::phase(modes, mode, phi).unwrap(), &s).unwrap();
        let diag = DMatrix::from_fn(s.dim(), s.dim(), |i, j| {
            if i == j { Complex64::from_polar(1.0, phi * s.basis()[i].counts()[mode] as f64) } else { c(0.0, 0.0) }
        });
        prop_assert!(max_diff(&lifted, &diag) < 1e-12);

        let psi = random_state(seed, s.clone());
        let direct = psi.apply_phase_shifter(mode, phi).unwrap();
        let via_matrix = psi.apply_sector_matrix(&lifted).unwrap();
        for (a, b) in direct.amplitudes().iter().zip(via_matrix.amplitudes()) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn permanent_matches_brute_force(seed in any::<u64>(), k in 0usize..=6) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(k, k, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let got = permanent(&m).unwrap();
        let want = brute_permanent(&m);
        prop_assert!((got - want).norm() < 1e-10 * (1.0 + want.norm()));
    }
}

#[test]
fn sector_dimensions_and_order() {
    for (m, n, dim) in [(2, 2, 3), (3, 2, 6), (4, 3, 20), (5, 4, 70)] {
        assert_eq!(sector(m, n).dim(), dim);
    }
    let s = sector(3, 2);
    let listed: Vec<Vec<usize>> = s.basis().iter().map(|o| o.counts().to_vec()).collect();
    let mut sorted = listed.clone();
    sorted.sort_by(|a, b| b.cmp(a));
    assert_eq!(listed, sorted);
    assert_eq!(listed[0], vec![2, 0, 0]);
    for (i, occ) in s.basis().iter().enumerate() {
        assert_eq!(s.index_of(occ).unwrap(), i);
    }
    assert!(s.index_of(&Occupation::new(vec![1, 1, 1])).is_err());
}

#[test]
fn hong_ou_mandel_against_permanents() {
    let s = Arc::new(sector(2, 2));
    let bs = ModeUnitary::beamsplitter_50_50();
    let lifted = lift_mode_unitary(&bs, &s).unwrap();
    let out = StateVector::basis_state(s.clone(), &Occupation::new(vec![1, 1]))
        .unwrap()
        .apply_sector_matrix(&lifted)
        .unwrap();
    // Oracle: |per(U[out, in])|^2 / (out! in!) with in = (1, 1).
    let u = bs.matrix();
    let sub = |rows: [usize; 2]| DMatrix::from_fn(2, 2, |i, j| u[(rows[i], j)]);
    let p11 = brute_permanent(&sub([0, 1])).norm_sqr();
    let p20 = brute_permanent(&sub([0, 0])).norm_sqr() / 2.0;
    let p02 = brute_permanent(&sub([1, 1])).norm_sqr() / 2.0;
    assert!(p11 < 1e-15 && (p20 - 0.5).abs() < 1e-15 && (p02 - 0.5).abs() < 1e-15);
    assert!(out.outcome_probability(&Occupation::new(vec![1, 1])).unwrap() < 1e-12);
    assert!((out.outcome_probability(&Occupation::new(vec![2, 0])).unwrap() - p20).abs() < 1e-12);
    assert!((out.outcome_probability(&Occupation::new(vec![0, 2])).unwrap() - p02).abs() < 1e-12);
}

#[test]
fn noon_state_picks_up_n_times_the_phase() {
    let s = Arc::new(sector(2, 3));
    let noon = StateVector::noon(s, 0, 1).unwrap();
    let shifted = noon.apply_phase_shifter(0, 0.3).unwrap();
    let a = shifted.amplitude(&Occupation::new(vec![3, 0])).unwrap();
    let b = shifted.amplitude(&Occupation::new(vec![0, 3])).unwrap();
    assert!((a / b - Complex64::from_polar(1.0, 0.9)).norm() < 1e-14);
}
