use decoherence_core::phase_space::{FrequencyGrid, PhasePoint};
use decoherence_core::{Boundedness, EnvironmentState, FormFactor, VelocityModel, WeylLabel};
use proptest::prelude::*;

/// `J = ω² e^{−ω}`: unit coupling norm, so the drift coefficient vanishes.
fn critical() -> VelocityModel {
    VelocityModel::new(FormFactor::power_exp(1.0, 2.0, 1.0).unwrap()).unwrap()
}

#[test]
fn critical_example_has_closed_forms() {
    let model = critical();
    assert_eq!(model.boundedness(), Boundedness::Critical);
    assert_eq!(model.alpha_sq(), 0.0);
    for t in [0.1, 1.0, 10.0, 1e3] {
        let (moved, chi) = model.reduced_weyl(WeylLabel::new(0.3, 1.5), t, EnvironmentState::Vacuum).unwrap();
        assert!((moved.a - (0.3 + 1.5 * t.atan())).abs() <= 1e-12, "t = {t}");
        assert_eq!(moved.b, 1.5);
        let exact = (1.0 + t * t).powf(-2.25 / 4.0);
        assert!((chi - exact).abs() <= 1e-12 * exact, "t = {t}: {chi} vs {exact}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exponent_is_non_negative_and_thermal_dominates(sigma in 0.8..3.0f64, norm in 0.05..1.0f64,
                                                      b in -3.0..3.0f64, t in 0.0..100.0f64, beta in 0.1..10.0f64) {
        let model = VelocityModel::new(FormFactor::with_coupling_norm(sigma, 1.0, norm).unwrap()).unwrap();
        let vacuum = model.exponent(b, t, EnvironmentState::Vacuum).unwrap();
        let thermal = model.exponent(b, t, EnvironmentState::Thermal { beta }).unwrap();
        prop_assert!(vacuum >= 0.0);
        prop_assert!(thermal >= vacuum * (1.0 - 1e-12));
        let unit = model.phi(t, EnvironmentState::Vacuum).unwrap();
        prop_assert!((vacuum - b * b * unit).abs() <= 1e-13 * (1.0 + vacuum));
    }

    #[test]
    fn momentum_is_conserved(a in -3.0..3.0f64, b in -3.0..3.0f64, t in 0.0..50.0f64) {
        let model = VelocityModel::new(FormFactor::with_coupling_norm(2.0, 1.0, 0.3).unwrap()).unwrap();
        prop_assert_eq!(model.label_at(WeylLabel::new(a, b), t).unwrap().b, b);
    }
}

#[test]
fn zero_shift_never_decoheres() {
    let model = VelocityModel::new(FormFactor::with_coupling_norm(1.5, 1.0, 0.6).unwrap()).unwrap();
    for t in [0.0, 1.0, 1e4] {
        let label = WeylLabel::new(0.7, 0.0);
        let (moved, chi) = model.reduced_weyl(label, t, EnvironmentState::Thermal { beta: 0.5 }).unwrap();
        assert_eq!((moved, chi), (label, 1.0));
    }
}

#[test]
fn field_part_matches_exponent() {
    use decoherence_core::environment::exponent_coherent;
    let model = VelocityModel::new(FormFactor::with_coupling_norm(2.0, 1.0, 0.4).unwrap()).unwrap();
    let grid = FrequencyGrid::geometric(1e-4, 60.0, 6000).unwrap();
    for t in [0.5, 3.0, 8.0] {
        let p: PhasePoint<f64> = model.flow(WeylLabel::new(0.0, 1.2), t, &grid).unwrap();
        let sampled = exponent_coherent(&p.u, &p.v).unwrap();
        let exact = model.exponent(1.2, t, EnvironmentState::Vacuum).unwrap();
        assert!((sampled - exact).abs() <= 1e-3 * exact, "t = {t}: {sampled} vs {exact}");
    }
}
