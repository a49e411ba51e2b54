use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use optoweak::fockspace::{self, FockVector, GridSpec, JointPureState, Port};
use optoweak::lindblad::hamiltonian_propagator;
use optoweak::{model, ModelParams, Tau};
use proptest::prelude::*;

fn tau(x: f64) -> Tau {
    Tau::new(x).unwrap()
}

fn fidelity(a: &DVector<C64>, b: &DVector<C64>) -> f64 {
    (a.dotc(b)).norm_sqr() / (a.norm_squared() * b.norm_squared())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn factored_propagator_matches_matrix_exponential(
        k in 1e-3..=0.01f64,
        theta in -0.01..=0.01f64,
        t in 0.0..=8.0 * PI,
        dim in 8usize..=16,
    ) {
        let params = ModelParams::coupling(k).unwrap();
        let input = JointPureState::input(theta, dim);
        let factored = fockspace::evolve_pure(&params, tau(t), &input).unwrap();
        let brute = hamiltonian_propagator(&params, tau(t), dim) * input.to_vector();
        let f = fidelity(&factored.to_vector(), &brute);
        prop_assert!(f > 1.0 - 1e-9, "fidelity {f}");
        prop_assert!((factored.norm_sqr() - 1.0).abs() < 1e-10);
    }

}

proptest! {
    // each case samples a full 201×201 grid
    #![proptest_config(ProptestConfig::with_cases(6))]

    // states on span{|0⟩, |1⟩}: |2⟩ already spills about 2% of its
    // quasi-probability past the [−4, 4] grid
    #[test]
    fn wigner_integrates_to_trace(
        re in proptest::collection::vec(-1.0..1.0f64, 2),
        im in proptest::collection::vec(-1.0..1.0f64, 2),
        scale in 0.1..=1.0f64,
    ) {
        let amps: Vec<C64> = re.iter().zip(&im).map(|(&a, &b)| C64::new(a, b)).collect();
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        let mut padded = vec![C64::from(0.0); 16];
        for (slot, z) in padded.iter_mut().zip(&amps) {
            *slot = z * (scale.sqrt() / norm);
        }
        let rho = FockVector::from_slice(&padded).unwrap().to_density();
        let grid = fockspace::wigner(&rho, &GridSpec::square(4.0, 201)).unwrap();
        prop_assert!((grid.integral() - rho.trace()).abs() < 1e-2, "integral {} trace {}", grid.integral(), rho.trace());
    }

    #[test]
    fn conditioned_wigner_integrates_to_trace(
        gamma in 0.0..=0.01f64,
        theta in -0.01..=0.01f64,
        t in 0.05..=8.0 * PI,
    ) {
        let params = ModelParams::new(0.005, gamma, theta).unwrap();
        let state = model::conditioned_state(&params, tau(t)).unwrap();
        let rho = fockspace::conditioned_density(&state, 16).unwrap();
        let grid = fockspace::wigner(&rho, &GridSpec::square(4.0, 201)).unwrap();
        prop_assert!((grid.integral() - rho.trace()).abs() < 1e-2 * rho.trace().max(1e-300));
    }
}

#[test]
fn postselected_pure_path_reproduces_closed_form() {
    let params_for = |theta| ModelParams::new(0.005, 0.0, theta).unwrap();
    for theta in [0.0, 0.001, -0.001] {
        let params = params_for(theta);
        // the shifter is already in the input state, so post-select without a second one
        let input = JointPureState::input(theta, 16);
        for i in 1..=200 {
            let t = tau(4.0 * PI * i as f64 / 200.0);
            let joint = fockspace::evolve_pure(&ModelParams::coupling(0.005).unwrap(), t, &input).unwrap();
            let (mirror, prob) = fockspace::postselect_pure(&joint, Port::Dark, 0.0);
            let state = model::conditioned_state(&params, t).unwrap();
            assert!((prob - state.success_prob).abs() < 1e-9 * state.success_prob.max(1e-12));
            let q = fockspace::expectation_q(&mirror).unwrap();
            let want = model::mean_q(&params, t).unwrap();
            assert!((q - want).abs() < 1e-9, "theta {theta} tau {}: {q} vs {want}", t.value());
            let p = fockspace::expectation_p(&mirror).unwrap();
            assert!((p - model::mean_p(&params, t).unwrap()).abs() < 1e-9);
        }
    }
}

#[test]
fn parity_of_fock_levels() {
    let parity = fockspace::parity_matrix(12);
    for n in 0..12 {
        let v = FockVector::basis(n, 12);
        let pv = &parity * v.amps();
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        assert_eq!(pv, v.amps() * C64::from(sign));
    }
}
