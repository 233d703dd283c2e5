use decoherence_core::oracle::{GridScheme, ModeSystem};
use decoherence_core::phase_space::{
    field_flow, particle_flow, product_flow, symplectic_pairing, FieldVector, FrequencyGrid, PhasePoint, WeightRole,
    WeylLabel,
};
use decoherence_core::spectral::{CouplingModel, FormFactor};
use proptest::prelude::*;

fn grid() -> FrequencyGrid<f64> {
    FrequencyGrid::geometric(0.05, 6.0, 9).unwrap()
}

fn point(a: f64, b: f64, u: &[f64], v: &[f64]) -> PhasePoint<f64> {
    let g = grid();
    PhasePoint::new(
        a,
        FieldVector::new(g.clone(), u.to_vec(), WeightRole::MinusOne).unwrap(),
        b,
        FieldVector::new(g, v.to_vec(), WeightRole::PlusOne).unwrap(),
    )
    .unwrap()
}

fn close(x: f64, y: f64, scale: f64) -> bool {
    (x - y).abs() <= 1e-10 * scale.max(1.0)
}

fn field() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, 9)
}

proptest! {
    #[test]
    fn particle_flow_is_a_group(a in -3.0..3.0f64, b in -3.0..3.0f64, w in 0.0..3.0f64,
                                t in -10.0..10.0f64, s in -10.0..10.0f64) {
        let l = WeylLabel::new(a, b);
        let direct = particle_flow(l, w, t + s);
        let composed = particle_flow(particle_flow(l, w, s), w, t);
        let scale = a.abs() + b.abs() * (1.0 + (t + s).abs());
        prop_assert!(close(direct.a, composed.a, scale) && close(direct.b, composed.b, scale));
        prop_assert_eq!(particle_flow(l, w, 0.0), l);
    }

    #[test]
    fn field_flow_is_a_group(u in field(), v in field(), t in -10.0..10.0f64, s in -10.0..10.0f64) {
        let p = point(0.0, 0.0, &u, &v);
        let (u1, v1) = field_flow(&p.u, &p.v, t + s).unwrap();
        let (us, vs) = field_flow(&p.u, &p.v, s).unwrap();
        let (u2, v2) = field_flow(&us, &vs, t).unwrap();
        for k in 0..9 {
            prop_assert!(close(u1.values()[k], u2.values()[k], 100.0));
            prop_assert!(close(v1.values()[k], v2.values()[k], 100.0));
        }
    }

    #[test]
    fn product_flow_preserves_pairing(a in -2.0..2.0f64, b in -2.0..2.0f64, u in field(), v in field(),
                                      c in -2.0..2.0f64, d in -2.0..2.0f64, x in field(), y in field(),
                                      w in 0.0..3.0f64, t in -10.0..10.0f64) {
        let p = point(a, b, &u, &v);
        let q = point(c, d, &x, &y);
        let before = symplectic_pairing(&p, &q).unwrap();
        let after = symplectic_pairing(&product_flow(&p, w, t).unwrap(), &product_flow(&q, w, t).unwrap()).unwrap();
        prop_assert!((before - after).abs() <= 1e-9 * (1.0 + before.abs()), "{} vs {}", before, after);
    }

    #[test]
    fn pairing_is_antisymmetric(a in -2.0..2.0f64, b in -2.0..2.0f64, u in field(), v in field(),
                                c in -2.0..2.0f64, d in -2.0..2.0f64, x in field(), y in field()) {
        let p = point(a, b, &u, &v);
        let q = point(c, d, &x, &y);
        let pq = symplectic_pairing(&p, &q).unwrap();
        let qp = symplectic_pairing(&q, &p).unwrap();
        prop_assert!((pq + qp).abs() <= 1e-12 * (1.0 + pq.abs()));
        prop_assert!(symplectic_pairing(&p, &p).unwrap().abs() <= 1e-14);
    }
}

#[test]
fn single_precision_flows_agree_with_double() {
    let l32 = particle_flow(WeylLabel::new(0.7f32, -1.1), 1.3, 2.2);
    let l64 = particle_flow(WeylLabel::new(0.7f64, -1.1), 1.3, 2.2);
    assert!((l32.a as f64 - l64.a).abs() < 1e-5 && (l32.b as f64 - l64.b).abs() < 1e-5);
}

fn systems() -> Vec<ModeSystem> {
    let j = FormFactor::with_coupling_norm(2.0, 1.0, 0.4).unwrap();
    vec![
        ModeSystem::build(&j, CouplingModel::Velocity, 24, GridScheme::Midpoint).unwrap(),
        ModeSystem::build(&j, CouplingModel::Position { omega0: 0.9 }, 24, GridScheme::Geometric).unwrap(),
    ]
}

#[test]
fn oracle_generator_is_hamiltonian() {
    for sys in systems() {
        assert!(sys.symplectic_defect() <= 1e-14, "{:?}: {}", sys.kind(), sys.symplectic_defect());
    }
}

#[test]
fn oracle_propagator_is_symplectic() {
    for sys in systems() {
        for t in [0.5, 3.0, 17.0] {
            let drift = sys.canonical_form_drift(t).unwrap();
            assert!(drift <= 1e-11, "{:?} t = {t}: {drift:e}", sys.kind());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oracle_propagation_is_a_group(seed in prop::collection::vec(-1.0..1.0f64, 50),
                                     t in -8.0..8.0f64, s in -8.0..8.0f64) {
        for sys in systems() {
            let z = &seed[..sys.dim()];
            let direct = sys.propagate(z, t + s).unwrap();
            let composed = sys.propagate(&sys.propagate(z, s).unwrap(), t).unwrap();
            for (x, y) in direct.iter().zip(&composed) {
                prop_assert!((x - y).abs() <= 1e-9, "{:?}: {} vs {}", sys.kind(), x, y);
            }
        }
    }
}
