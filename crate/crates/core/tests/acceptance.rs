//! Acceptance suite: one PASS/FAIL line per criterion, with its tolerance
//! and runtime budget. Exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use decoherence_core::curve::{Growth, TimeGrid};
use decoherence_core::environment::{exponent_coherent, exponent_thermal, thermal_excess};
use decoherence_core::oracle::{convergence_study, fit_drift, oracle_chi, oracle_position, GridScheme, ModeSystem};
use decoherence_core::phase_space::{
    field_flow, particle_flow, product_flow, FieldVector, FrequencyGrid, PhasePoint, WeightRole,
};
use decoherence_core::spectral::{ir_classify, CouplingModel, FormFactor, IrClass};
use decoherence_core::superselection::{
    offdiag_bound, offdiag_is_zero, superselection_sweep, DecayModel, DecayVerdict, MomentumInterval, WeylCombination,
};
use decoherence_core::{EnvironmentState, FriedrichsOperator, VelocityModel, WeylLabel};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// `J = ω² e^{-ω}`: exactly critical for the velocity coupling, with
/// `φ(t) = ¼ ln(1 + t²)`.
fn sigma_one() -> FormFactor {
    FormFactor::power_exp(1.0, 2.0, 1.0).unwrap()
}

fn closed_form_law() -> Outcome {
    let model = VelocityModel::new(sigma_one()).map_err(e2s)?;
    let times = TimeGrid::log(1e-2, 100.0, 199).with_zero().points().map_err(e2s)?;
    ensure(times.len() == 200, || format!("grid has {} points", times.len()))?;
    let mut worst = 0.0f64;
    for &b in &[0.5, 1.0, 2.0] {
        for &t in &times {
            let (_, chi) = model.reduced_weyl(WeylLabel::new(0.0, b), t, EnvironmentState::Vacuum).map_err(e2s)?;
            let exact = (1.0 + t * t).powf(-b * b / 4.0);
            worst = worst.max((chi - exact).abs() / exact);
        }
    }
    ensure(worst <= 1e-8, || format!("max relative error {worst:.3e} > 1e-8"))?;
    Ok(format!("max relative error {worst:.3e} over 600 (b, t) pairs"))
}

fn oracle_equivalence() -> Outcome {
    let j = FormFactor::with_coupling_norm(2.0, 1.0, 0.25).map_err(e2s)?;
    let labels = [WeylLabel::new(0.3, 1.0), WeylLabel::new(-1.0, 2.0)];
    let times: Vec<f64> = (1..=40).map(|k| 0.5 * k as f64).collect();
    let modes = [256, 512, 1024, 2048];
    let mut lines = Vec::new();
    for quantity in ["a_t", "abs_chi"] {
        let study = convergence_study(
            |n| {
                let sys = ModeSystem::build(&j, CouplingModel::Velocity, n, GridScheme::Midpoint)?;
                let mut out = Vec::new();
                for &label in &labels {
                    for &t in &times {
                        out.push(match quantity {
                            "a_t" => oracle_position(&sys, label, t)?,
                            _ => oracle_chi(&sys, label, t, EnvironmentState::Vacuum)?,
                        });
                    }
                }
                Ok(out)
            },
            &modes,
        )
        .map_err(e2s)?;
        let finest = study.last().unwrap();
        let order = finest.convergence_order_estimate.unwrap_or(f64::NAN);
        ensure(finest.abs_diff <= 1e-4, || format!("{quantity}: |Δ| = {:.3e} > 1e-4 at N = 2048", finest.abs_diff))?;
        ensure(order >= 0.9, || format!("{quantity}: convergence order {order:.3} < 0.9"))?;
        lines.push(format!("{quantity}: |Δ| {:.2e} at N=2048, order {order:.2}", finest.abs_diff));
    }
    Ok(lines.join("; "))
}

fn drift_validation() -> Outcome {
    let mut lines = Vec::new();
    for &norm in &[0.1, 0.25, 0.5] {
        let j = FormFactor::with_coupling_norm(2.0, 1.0, norm).map_err(e2s)?;
        let sys = ModeSystem::build(&j, CouplingModel::Velocity, 2048, GridScheme::Midpoint).map_err(e2s)?;
        let fit = fit_drift(&sys, 1.0, (20.0, 200.0), 64).map_err(e2s)?;
        let hypothesis = 1.0 - norm;
        ensure(fit.contains(hypothesis), || {
            format!("norm {norm}: 1 - norm = {hypothesis} outside [{:.12}, {:.12}]", fit.ci_low, fit.ci_high)
        })?;
        lines.push(format!("{norm}: α² = {:.10} ± {:.1e}", fit.alpha_sq, 0.5 * (fit.ci_high - fit.ci_low)));
    }
    Ok(lines.join("; "))
}

fn momentum_rigidity() -> Outcome {
    let times = [0.0, 0.3, 1.0, 7.5, 40.0, 1e3, 1e5];
    let envs = [EnvironmentState::Vacuum, EnvironmentState::Thermal { beta: 0.7 }];
    let forms = [sigma_one(), FormFactor::with_coupling_norm(2.0, 1.0, 0.25).unwrap()];
    for j in &forms {
        let model = VelocityModel::new(j.clone()).map_err(e2s)?;
        for &t in &times {
            for &env in &envs {
                let moved = model.label_at(WeylLabel::new(0.4, -1.3), t).map_err(e2s)?;
                ensure(moved.b == -1.3, || format!("b(t) = {} at t = {t}", moved.b))?;
                let (still, chi) = model.reduced_weyl(WeylLabel::new(2.5, 0.0), t, env).map_err(e2s)?;
                ensure(still == WeylLabel::new(2.5, 0.0) && chi == 1.0, || {
                    format!("b = 0 label moved to {still:?} with χ = {chi} at t = {t}")
                })?;
            }
        }
        let sys = ModeSystem::build(j, CouplingModel::Velocity, 64, GridScheme::Midpoint).map_err(e2s)?;
        for &t in &times[..5] {
            let p = sys.flow(WeylLabel::new(0.4, -1.3), t).map_err(e2s)?;
            ensure(p.b == -1.3, || format!("oracle b(t) = {} at t = {t}", p.b))?;
            let q = sys.flow(WeylLabel::new(2.5, 0.0), t).map_err(e2s)?;
            let chi = (-sys.exponent(WeylLabel::new(2.5, 0.0), t, EnvironmentState::Vacuum).map_err(e2s)?).exp();
            ensure(q.a == 2.5 && q.b == 0.0 && chi == 1.0, || format!("oracle moved b = 0 label at t = {t}"))?;
        }
    }
    Ok("b(t) = b and (a, 0) fixed with χ = 1, bit-exact".into())
}

fn superselection_decay() -> Outcome {
    let i1 = MomentumInterval::new(0.0, 1.0).map_err(e2s)?;
    let i2 = MomentumInterval::new(3.0, 4.0).map_err(e2s)?;
    let a = WeylCombination::new(vec![
        (Complex64::new(1.0, 0.0), WeylLabel::new(0.0, 3.0)),
        (Complex64::new(0.0, 0.5), WeylLabel::new(1.0, 1.0)),
    ])
    .map_err(e2s)?;
    let times = TimeGrid::log(1e-2, 1e4, 241).with_zero().points().map_err(e2s)?;
    let critical = VelocityModel::new(sigma_one()).map_err(e2s)?;
    let table = superselection_sweep(
        &a,
        &i1,
        &i2,
        DecayModel::Velocity(&critical),
        &times,
        EnvironmentState::Vacuum,
        Some((1e2, 1e4)),
    )
    .map_err(e2s)?;
    let slope = table.slope_fit.ok_or("no tail fit")?.slope;
    ensure((slope + 2.0).abs() <= 0.05, || format!("tail slope {slope:.4} not within -2 ± 0.05"))?;
    ensure(table.verdict == DecayVerdict::DecaysToZero, || format!("σ = 1 verdict {:?}", table.verdict))?;

    let regular = VelocityModel::new(FormFactor::with_coupling_norm(2.0, 1.0, 0.25).unwrap()).map_err(e2s)?;
    let control =
        superselection_sweep(&a, &i1, &i2, DecayModel::Velocity(&regular), &times, EnvironmentState::Vacuum, None)
            .map_err(e2s)?;
    let floor = *control.paper_bound.last().unwrap();
    let earlier = control.paper_bound[control.times.partition_point(|&t| t < 1e2)];
    ensure(control.verdict == DecayVerdict::Saturates && floor > 0.0 && floor / earlier > 0.999, || {
        format!("σ = 2 control: verdict {:?}, floor {floor:.4e}, ratio {:.4}", control.verdict, floor / earlier)
    })?;
    Ok(format!("σ=1 slope {slope:.4}; σ=2 floor {floor:.4e}"))
}

fn exact_offdiag_zeros() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    let model = VelocityModel::new(sigma_one()).map_err(e2s)?;
    let (mut zeros, mut contributing) = (0usize, 0usize);
    for case in 0..10_000 {
        let lo1: f64 = rng.gen_range(-5.0..5.0);
        let hi1 = lo1 + rng.gen_range(0.01..3.0);
        let gap: f64 = rng.gen_range(0.01..4.0);
        let (lo2, hi2) = if rng.gen_bool(0.5) {
            (hi1 + gap, hi1 + gap + rng.gen_range(0.01..3.0))
        } else {
            let hi2 = lo1 - gap;
            (hi2 - rng.gen_range(0.01..3.0), hi2)
        };
        let b: f64 = rng.gen_range(-15.0..15.0);
        let i1 = MomentumInterval::new(lo1, hi1).map_err(e2s)?;
        let i2 = MomentumInterval::new(lo2, hi2).map_err(e2s)?;
        let label = WeylLabel::new(rng.gen_range(-3.0..3.0), b);
        // independent check: does the shifted interval I₁ + b meet I₂?
        let meets = lo1 + b <= hi2 && hi1 + b >= lo2;
        let zero = offdiag_is_zero(label, &i1, &i2);
        ensure(zero == !meets, || format!("case {case}: b = {b}, I1 = [{lo1}, {hi1}], I2 = [{lo2}, {hi2}]"))?;
        if zero {
            zeros += 1;
            let t = rng.gen_range(0.0..100.0);
            let bound = offdiag_bound(
                &WeylCombination::single(label),
                &i1,
                &i2,
                DecayModel::Velocity(&model),
                t,
                EnvironmentState::Vacuum,
            )
            .map_err(e2s)?;
            ensure(bound.per_term == 0.0, || format!("case {case}: per-term bound {:e} != 0", bound.per_term))?;
        } else {
            contributing += 1;
        }
    }
    Ok(format!("{zeros} exact zeros, {contributing} contributing, 10000 cases"))
}

fn friedrichs_sum_rules() -> Outcome {
    let j = FormFactor::with_coupling_norm(2.0, 1.0, 0.25).map_err(e2s)?;
    let op = FriedrichsOperator::with_modes(1.0, j, 2000, GridScheme::Midpoint).map_err(e2s)?;
    let d = op.spectral_density(64).map_err(e2s)?;
    ensure((d.total_mass - 1.0).abs() <= 1e-6, || format!("mass {}", d.total_mass))?;
    ensure((d.first_moment - 1.0).abs() <= 1e-6, || format!("first moment {}", d.first_moment))?;
    let mut worst = 0.0f64;
    for k in 0..=50 {
        let t = k as f64;
        worst = worst.max((op.c00(t) - op.c00_resolvent(t).map_err(e2s)?).abs());
    }
    ensure(worst <= 1e-4, || format!("C00 mismatch {worst:.3e}"))?;
    Ok(format!(
        "mass {:.3e}, first moment {:.3e} off; C00 max |Δ| {worst:.2e} (N=2000)",
        d.total_mass - 1.0,
        d.first_moment - 1.0
    ))
}

fn random_field(rng: &mut ChaCha8Rng, grid: &FrequencyGrid<f64>) -> (FieldVector<f64>, FieldVector<f64>) {
    let n = grid.len();
    let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (
        FieldVector::new(grid.clone(), u, WeightRole::MinusOne).unwrap(),
        FieldVector::new(grid.clone(), v, WeightRole::PlusOne).unwrap(),
    )
}

fn thermal_dominance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    let mut worst_limit = 0.0f64;
    let mut rounded = 0;
    for _ in 0..500 {
        let lo = rng.gen_range(0.05..1.0);
        let grid = FrequencyGrid::midpoint(lo, lo + rng.gen_range(0.5..10.0), rng.gen_range(1..40)).unwrap();
        let (u, v) = random_field(&mut rng, &grid);
        let vacuum = exponent_coherent(&u, &v).map_err(e2s)?;
        for &beta in &[0.1, 1.0, 10.0] {
            // the total can round onto the vacuum value when the excess is
            // below its resolution, so strictness is read off the excess
            let thermal = exponent_thermal(&u, &v, beta).map_err(e2s)?;
            let excess = thermal_excess(&u, &v, beta).map_err(e2s)?;
            ensure(excess > 0.0 && thermal >= vacuum, || {
                format!("β = {beta}: thermal {thermal}, vacuum {vacuum}, excess {excess:e}")
            })?;
            if thermal == vacuum {
                rounded += 1;
            }
        }
        let cold = exponent_thermal(&u, &v, 1e4).map_err(e2s)?;
        worst_limit = worst_limit.max((cold - vacuum).abs() / vacuum);
    }
    ensure(worst_limit <= 1e-10, || format!("β→∞ deviation {worst_limit:e}"))?;
    Ok(format!(
        "excess > 0 on 1500 cases ({rounded} below the total's resolution); β = 1e4 deviation {worst_limit:.1e}"
    ))
}

fn close(x: f64, y: f64, scale: f64) -> bool {
    (x - y).abs() <= 1e-10 * scale.max(1.0)
}

fn group_laws() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0009);
    let j = FormFactor::with_coupling_norm(2.0, 1.0, 0.25).unwrap();
    let systems = [
        ModeSystem::build(&j, CouplingModel::Velocity, 8, GridScheme::Midpoint).map_err(e2s)?,
        ModeSystem::build(&j, CouplingModel::Position { omega0: 1.1 }, 8, GridScheme::Geometric).map_err(e2s)?,
    ];
    let grid = FrequencyGrid::midpoint(0.1, 5.0, 12).unwrap();
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let t: f64 = rng.gen_range(-10.0..10.0);
        let s: f64 = rng.gen_range(-10.0..10.0);
        let omega0 = if case % 3 == 0 { 0.0 } else { rng.gen_range(0.1..3.0) };
        let label = WeylLabel::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));

        let direct = particle_flow(label, omega0, t + s);
        let composed = particle_flow(particle_flow(label, omega0, s), omega0, t);
        let scale = label.a.abs() + label.b.abs() + (t + s).abs() * label.b.abs();
        ensure(close(direct.a, composed.a, scale) && close(direct.b, composed.b, scale), || {
            format!("particle flow case {case}")
        })?;

        let (u, v) = random_field(&mut rng, &grid);
        let point = PhasePoint::new(label.a, u.clone(), label.b, v.clone()).unwrap();
        let (u1, v1) = field_flow(&u, &v, s).map_err(e2s)?;
        let (u2, v2) = field_flow(&u1, &v1, t).map_err(e2s)?;
        let (u3, v3) = field_flow(&u, &v, t + s).map_err(e2s)?;
        for (x, y) in u2.values().iter().chain(v2.values()).zip(u3.values().iter().chain(v3.values())) {
            worst = worst.max((x - y).abs());
        }
        let p2 = product_flow(&product_flow(&point, omega0, s).map_err(e2s)?, omega0, t).map_err(e2s)?;
        let p3 = product_flow(&point, omega0, t + s).map_err(e2s)?;
        ensure(close(p2.a, p3.a, scale) && close(p2.b, p3.b, scale), || format!("product flow case {case}"))?;

        let sys = &systems[case % 2];
        let z: Vec<f64> = (0..sys.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let one = sys.propagate(&sys.propagate(&z, s).map_err(e2s)?, t).map_err(e2s)?;
        let two = sys.propagate(&z, t + s).map_err(e2s)?;
        let norm = z.iter().fold(0.0f64, |m, x| m.max(x.abs())) * (1.0 + (t + s).abs());
        for (x, y) in one.iter().zip(&two) {
            ensure(close(*x, *y, norm), || format!("oracle propagator case {case}: {x} vs {y}"))?;
        }
    }
    ensure(worst <= 1e-10, || format!("field flow deviation {worst:e}"))?;
    Ok(format!("1000 triples; field flow max |Δ| {worst:.1e}"))
}

fn ir_dichotomy() -> Outcome {
    let times = TimeGrid::log(1e-2, 1e6, 321).points().map_err(e2s)?;
    let mut lines = Vec::new();
    for &sigma in &[0.6, 0.8, 1.0, 1.2, 2.0] {
        let j = FormFactor::with_coupling_norm(sigma, 1.0, 0.5).map_err(e2s)?;
        let class = ir_classify(&j).map_err(e2s)?;
        let env = VelocityModel::new(j).map_err(e2s)?.phi_envelope(&times, EnvironmentState::Vacuum).map_err(e2s)?;
        let diverging = env.growth == Growth::Diverging;
        ensure(diverging == (sigma <= 1.0), || format!("σ = {sigma}: envelope {:?}", env.growth))?;
        ensure(diverging == (class == IrClass::IrDivergent), || format!("σ = {sigma}: classifier says {class:?}"))?;
        lines.push(format!("σ={sigma}: {:?} φ̃(t_max)={:.3}", env.growth, env.phi_tilde.last().unwrap()));
    }
    Ok(lines.join("; "))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            id: 1,
            name: "closed-form decoherence law",
            budget: Some(Duration::from_secs(5)),
            run: closed_form_law,
        },
        Criterion { id: 2, name: "oracle equivalence", budget: Some(Duration::from_secs(60)), run: oracle_equivalence },
        Criterion {
            id: 3,
            name: "drift coefficient validation",
            budget: Some(Duration::from_secs(120)),
            run: drift_validation,
        },
        Criterion { id: 4, name: "momentum conservation and b = 0 rigidity", budget: None, run: momentum_rigidity },
        Criterion { id: 5, name: "superselection decay", budget: None, run: superselection_decay },
        Criterion { id: 6, name: "exact off-diagonal zeros", budget: None, run: exact_offdiag_zeros },
        Criterion {
            id: 7,
            name: "spectral sum rules",
            budget: Some(Duration::from_secs(120)),
            run: friedrichs_sum_rules,
        },
        Criterion { id: 8, name: "thermal dominance", budget: None, run: thermal_dominance },
        Criterion { id: 9, name: "flow group laws", budget: None, run: group_laws },
        Criterion { id: 10, name: "infrared dichotomy", budget: None, run: ir_dichotomy },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.budget) {
            (Ok(msg), Some(budget)) if elapsed > budget => {
                Err(format!("{msg}; runtime {:.1}s exceeds {}s", elapsed.as_secs_f64(), budget.as_secs()))
            }
            (o, _) => o,
        };
        match outcome {
            Ok(msg) => println!("PASS {:>2} {} ({:.2}s): {msg}", c.id, c.name, elapsed.as_secs_f64()),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {} ({:.2}s): {msg}", c.id, c.name, elapsed.as_secs_f64());
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
