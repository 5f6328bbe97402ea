use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use superrad::angular::Axis;
use superrad::generator::GeneratorSpec;
use superrad::level::LevelStructure;
use superrad::lindblad::{ed_basis, evolve, Coherences, EvolveOptions, PSDensityMatrix};
use superrad::ode::{uniform_grid, Tolerances};
use superrad::operators::{multi_two_level, operator_in_basis, Channel};
use superrad::potential::potential_from_state;
use superrad::semiclassical::{pulse_single_atom, Decoupling, MeanField, OneBodyState};
use superrad::spectra::six_level;
use superrad::symspace::{coherent_state, coherent_support, Limits, PSBasis};

fn channel() -> impl Strategy<Value = Channel> {
    prop_oneof![Just(Channel::Pi), Just(Channel::Sigma), Just(Channel::L), Just(Channel::R)]
}

fn level() -> impl Strategy<Value = LevelStructure> {
    prop_oneof![Just((1, 1)), Just((1, 3)), Just((3, 3)), Just((2, 2)), Just((0, 2))]
        .prop_map(|(g, e)| LevelStructure::from_twice(g, e).unwrap())
}

/// Normalized ground-manifold state from raw amplitude pairs.
fn ground_state(l: &LevelStructure, raw: &[(f64, f64)]) -> Option<Vec<Complex64>> {
    let mut v = vec![Complex64::new(0.0, 0.0); l.ell()];
    for (i, (re, im)) in l.ground_indices().zip(raw) {
        v[i] = Complex64::new(*re, *im);
    }
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    (norm > 1e-3).then(|| v.iter().map(|z| z / norm).collect())
}

fn raw_amplitudes() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 10)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pulses_are_unitary(l in level(), ch in channel(), raw in raw_amplitudes(), theta in 0.0..8.0 * PI, phase in -PI..PI) {
        let psi = ground_state(&l, &raw).unwrap_or_else(|| { let mut v = vec![Complex64::new(0.0, 0.0); l.ell()]; v[0] = Complex64::new(1.0, 0.0); v });
        let out = pulse_single_atom(&psi, &ch.raising(&l, Axis::V), theta, phase);
        let norm: f64 = out.iter().map(|z| z.norm_sqr()).sum();
        prop_assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn multi_two_level_form_reassembles(l in level(), ch in channel(), axis in prop_oneof![Just(Axis::V), Just(Axis::H), Just(Axis::Par)]) {
        let op = ch.raising(&l, axis);
        let m = multi_two_level(&op).unwrap();
        prop_assert!((m.reassemble() - op.single_atom_matrix()).norm() < 1e-12);
        let moved = operator_in_basis(&op, Axis::Par).single_atom_matrix();
        prop_assert!((m.in_basis(Axis::Par).reassemble() - moved).norm() < 1e-12);
    }

    #[test]
    fn coherent_states_are_normalized(raw in raw_amplitudes(), n in 1u32..6) {
        let l = six_level();
        let mut psi: Vec<Complex64> = raw.iter().take(l.ell()).map(|(a, b)| Complex64::new(*a, *b)).collect();
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        psi.iter_mut().for_each(|z| *z /= norm);
        let basis = PSBasis::enumerate(l, Axis::Par, n, None, &Limits::default()).unwrap();
        let v = coherent_state(&basis, &psi).unwrap();
        prop_assert!((v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn potential_is_bounded_and_its_slope_matches(l in level(), ch in channel(), raw in raw_amplitudes(), theta in 0.0..20.0f64) {
        let psi = match ground_state(&l, &raw) { Some(p) => p, None => return Ok(()) };
        let pot = potential_from_state(&l, Axis::V, &psi, &ch.raising(&l, Axis::V), vec![1.0]).unwrap();
        let v = pot.value(theta);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
        let h = 1e-5;
        let fd = (pot.value(theta + h) - pot.value(theta - h)) / (2.0 * h);
        prop_assert!((fd - pot.slope(theta)).abs() < 1e-7);
    }

    #[test]
    fn mean_field_keeps_trace_and_hermiticity(l in level(), raw in raw_amplitudes(), theta in 0.0..4.0 * PI) {
        let psi0 = match ground_state(&l, &raw) { Some(p) => p, None => return Ok(()) };
        let psi = pulse_single_atom(&psi0, &Channel::Sigma.raising(&l, Axis::V), theta, 0.0);
        let n = 500.0;
        let st = OneBodyState::homogeneous(l, Axis::V, &psi, n).unwrap();
        let gen = GeneratorSpec::new(l, Axis::V, &[Channel::Pi, Channel::Sigma]);
        let mf = MeanField::new(&gen, st.groups.clone(), Decoupling::Factorized).unwrap();
        let ev = mf.evolve(&st, &uniform_grid(10.0 / n, 5), &Tolerances::new(1e-9, 1e-11)).unwrap();
        for s in &ev.samples {
            prop_assert!((s.populations.iter().sum::<f64>() - 1.0).abs() < 1e-8);
            prop_assert!(s.n_e <= ev.samples[0].n_e + 1e-8);
        }
        prop_assert!(ev.final_state.hermiticity_error() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn exact_decay_keeps_trace_and_positivity(raw in raw_amplitudes(), theta in 0.0..4.0 * PI, n in 1u32..4) {
        let l = six_level();
        let psi0 = match ground_state(&l, &raw) { Some(p) => p, None => return Ok(()) };
        let psi = pulse_single_atom(&psi0, &Channel::R.raising(&l, Axis::Par), theta, 0.0);
        let gen = GeneratorSpec::new(l, Axis::Par, &[Channel::L, Channel::R]);
        let basis = ed_basis(&gen, coherent_support(&l, n, &psi), n, &Limits::default()).unwrap();
        let v = coherent_state(&basis, &psi).unwrap();
        let rho = PSDensityMatrix::from_pure(basis, &v, Some(&gen), Coherences::Full).unwrap();
        let ev = evolve(&rho, &gen, &uniform_grid(3.0, 6), &EvolveOptions::default()).unwrap();
        for s in &ev.samples {
            prop_assert!((s.trace - 1.0).abs() < 1e-8);
            prop_assert!(s.min_eig > -1e-8);
            prop_assert!(s.n_e <= ev.samples[0].n_e + 1e-8);
        }
    }
}
