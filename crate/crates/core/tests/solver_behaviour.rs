use stefan_core::controllers::open_loop_oracle;
use stefan_core::oracle::{oracle_run, OracleConfig};
use stefan_core::physics::{internal_energy, s_infinity};
use stefan_core::solver::{
    interface_velocity, refine_study, run_with, step, step_detailed, Schedule,
};
use stefan_core::*;

fn zinc() -> (PhysicalParams, DerivedParams) {
    let p = PhysicalParams::zinc();
    let dp = derive(&p).unwrap();
    (p, dp)
}

fn reference_profile() -> InitialProfile {
    InitialProfile::Linear {
        liquid_amplitude: 10.0,
        solid_amplitude: -200.0,
        s0: 0.4,
    }
}

fn quiet(dt: f64, t_end: f64, stride: usize) -> StepperConfig {
    let mut cfg = StepperConfig::new(1.0, dt, t_end, stride);
    cfg.profile_stride = 0;
    cfg
}

#[test]
fn velocity_vanishes_at_melting_temperature() {
    let (_, dp) = zinc();
    let st = PlantState::equilibrium(0.3, 1.0, 11, 11);
    assert_eq!(interface_velocity(&st, &dp).unwrap(), 0.0);
}

#[test]
fn velocity_of_linear_liquid_profile() {
    let (_, dp) = zinc();
    let m = 25.0;
    let st = PlantState::from_fns(0.4, 1.0, 21, 21, |x| m * (0.4 - x), |_| 0.0);
    let v = interface_velocity(&st, &dp).unwrap();
    assert!((v - dp.beta_l * m).abs() <= 1e-12 * dp.beta_l * m);
    assert!(v > 0.0);
}

#[test]
fn velocity_needs_three_nodes() {
    let (_, dp) = zinc();
    let st = PlantState::equilibrium(0.3, 1.0, 2, 5);
    assert!(matches!(
        interface_velocity(&st, &dp),
        Err(StefanError::Stencil { liquid: 2, solid: 5 })
    ));
}

#[test]
fn reference_initial_state_freezes_first() {
    let (_, dp) = zinc();
    let st = reference_profile().build(1.0, 101, 101);
    assert!(interface_velocity(&st, &dp).unwrap() < 0.0);
}

#[test]
fn equilibrium_step_only_advances_time() {
    let (p, _) = zinc();
    let st = PlantState::equilibrium(0.5, 1.0, 21, 21);
    let cfg = quiet(2.0, 2.0, 1);
    let next = step(&st, 0.0, &cfg, ActuationSide::HeatLiquid, &p).unwrap();
    assert_eq!(next.s, st.s);
    assert_eq!(next.liquid, st.liquid);
    assert_eq!(next.solid, st.solid);
    assert_eq!(next.t, 2.0);
}

#[test]
fn interface_nodes_stay_at_melting_temperature() {
    let (p, _) = zinc();
    let st = reference_profile().build(1.0, 41, 41);
    let cfg = quiet(1.0, 1.0, 1);
    let (next, info) = step_detailed(&st, 2e6, &cfg, ActuationSide::HeatLiquid, &p).unwrap();
    assert_eq!(*next.liquid.last().unwrap(), 0.0);
    assert_eq!(next.solid[0], 0.0);
    assert!(info.iterations >= 1);
    assert!(info.residual.abs() < 1e-12);
}

#[test]
fn guard_margin_stops_the_run() {
    let (p, _) = zinc();
    let st = PlantState::equilibrium(0.01, 1.0, 21, 21);
    let mut cfg = quiet(1.0, 1e5, 10);
    cfg.s_floor = 5e-3;
    // strong cooling at the solid side drives the interface to the wall
    let tr = run_with(
        &st,
        &mut Schedule(|_| -5e7),
        &cfg,
        ActuationSide::CoolSolid,
        &p,
    )
    .unwrap();
    assert!(matches!(
        tr.status,
        RunStatus::Failed(StefanError::PhaseDisappearance { .. })
    ));
    assert!(!tr.samples.is_empty());
}

#[test]
fn zero_horizon_gives_single_sample() {
    let (p, _) = zinc();
    let st = reference_profile().build(1.0, 21, 21);
    let c = ControllerSpec::new(Law::TwoPhase, 0.01, 0.5);
    let tr = solver::run(&st, &c, &quiet(1.0, 0.0, 1), ActuationSide::HeatLiquid, &p).unwrap();
    assert_eq!(tr.samples.len(), 1);
    assert_eq!(tr.samples[0].t, 0.0);
    assert!(tr.completed());
}

#[test]
fn uncontrolled_run_settles_at_s_infinity() {
    let (p, dp) = zinc();
    let st = reference_profile().build(1.0, 61, 61);
    let s_inf = s_infinity(&st, &dp);
    let tr = solver::run(
        &st,
        &ControllerSpec::zero(),
        &quiet(20.0, 4e5, 50),
        ActuationSide::HeatLiquid,
        &p,
    )
    .unwrap();
    assert!(tr.completed());
    let last = tr.last().unwrap();
    assert!((last.s - s_inf).abs() < 1e-4, "{} vs {s_inf}", last.s);
    assert!((last.s - 0.2020).abs() < 1e-3);
    // eventually monotone: the final stretch only moves toward s_inf
    let tail = &tr.samples[tr.samples.len() / 2..];
    assert!(tail.windows(2).all(|w| (w[1].s - s_inf).abs() <= (w[0].s - s_inf).abs() + 1e-12));
}

#[test]
fn energy_balance_holds_for_open_loop_input() {
    let (p, _) = zinc();
    let st = reference_profile().build(1.0, 81, 81);
    let tr = run_with(
        &st,
        &mut Schedule(|t| 1e6 * (1.0 + (t / 700.0).sin())),
        &quiet(2.0, 10_000.0, 5),
        ActuationSide::HeatLiquid,
        &p,
    )
    .unwrap();
    let e0 = tr.samples[0].energy;
    for s in &tr.samples {
        assert!((s.energy - e0 - s.injected).abs() <= 1e-9 * e0);
    }
}

#[test]
fn swap_symmetry_maps_heating_onto_cooling() {
    let (p, _) = zinc();
    let st = reference_profile().build(1.0, 41, 61);
    let cfg = quiet(1.0, 3000.0, 10);
    let heat = solver::run(
        &st,
        &ControllerSpec::new(Law::TwoPhase, 0.01, 0.5),
        &cfg,
        ActuationSide::HeatLiquid,
        &p,
    )
    .unwrap();
    let cool = solver::run(
        &st.mirrored(),
        &ControllerSpec::new(Law::Cooling, 0.01, 0.5),
        &cfg,
        ActuationSide::CoolSolid,
        &p.mirrored(),
    )
    .unwrap();
    assert_eq!(heat.samples.len(), cool.samples.len());
    for (a, b) in heat.samples.iter().zip(&cool.samples) {
        assert!((a.s - (1.0 - b.s)).abs() < 1e-10, "t={} {} {}", a.t, a.s, b.s);
        assert!((a.q_c + b.q_c).abs() <= 1e-8 * a.q_c.abs().max(1.0));
        assert!((a.liquid_boundary + b.solid_boundary).abs() < 1e-8);
    }
}

#[test]
fn constant_heating_agrees_with_enthalpy_oracle() {
    let (p, _) = zinc();
    let st = PlantState::equilibrium(0.3, 1.0, 101, 101);
    let q = 5e5;
    let t_end = 4000.0;
    let tr = run_with(
        &st,
        &mut Schedule(|_| q),
        &quiet(0.5, t_end, 20),
        ActuationSide::HeatLiquid,
        &p,
    )
    .unwrap();
    let oc = OracleConfig::new(200, t_end, 10.0);
    let ot = oracle_run(&st, &mut Schedule(|_| q), &p, ActuationSide::HeatLiquid, &oc).unwrap();
    for s in &ot.samples {
        if let Some(sp) = tr.position_at(s.t) {
            assert!((sp - s.s).abs() < 2e-3, "t={} primary {sp} oracle {}", s.t, s.s);
        }
    }
    let first = tr.samples[0];
    let last = tr.last().unwrap();
    assert!(last.liquid_boundary > first.liquid_boundary);
    assert!(last.s_dot > 0.0);
}

#[test]
fn open_loop_schedule_crosscheck_tightens_with_resolution() {
    let (p, dp) = zinc();
    let t_end = 6000.0;
    let mut errors = Vec::new();
    for (n, cells, dt) in [(51, 100, 1.0), (101, 200, 0.5), (201, 400, 0.25)] {
        let st = reference_profile().build(1.0, n, n);
        let s_inf = s_infinity(&st, &dp);
        let g = dp.gamma;
        let f = move |t: f64| open_loop_oracle(t, 0.01, g, 0.5, s_inf);
        let tr = run_with(&st, &mut Schedule(f), &quiet(dt, t_end, (10.0 / dt) as usize), ActuationSide::HeatLiquid, &p).unwrap();
        let ot = oracle_run(&st, &mut Schedule(f), &p, ActuationSide::HeatLiquid, &OracleConfig::new(cells, t_end, 10.0)).unwrap();
        let err = ot
            .samples
            .iter()
            .filter_map(|s| tr.position_at(s.t).map(|sp| (sp - s.s).abs()))
            .fold(0.0, f64::max);
        errors.push(err);
    }
    assert!(errors[0] < 5e-3);
    assert!(errors[1] < errors[0] && errors[2] < errors[1], "{errors:?}");
}

fn scenario(n: usize) -> Scenario {
    let mut stepper = StepperConfig::new(1.0, 1.0, 2000.0, 100);
    stepper.profile_stride = 0;
    Scenario {
        params: PhysicalParams::zinc(),
        initial: reference_profile(),
        grid: GridSpec::uniform(n),
        controller: ControllerSpec::new(Law::TwoPhase, 0.01, 0.5),
        stepper,
        side: ActuationSide::HeatLiquid,
    }
}

#[test]
fn pinned_diffusion_converges_at_second_order() {
    let mut sc = scenario(21);
    sc.initial = InitialProfile::Linear {
        liquid_amplitude: 0.0,
        solid_amplitude: -200.0,
        s0: 0.4,
    };
    sc.controller = ControllerSpec::zero();
    sc.stepper.pin_interface = true;
    sc.stepper.t_end = 500.0;
    sc.stepper.dt = 0.05;
    sc.stepper.output_stride = 1000;
    let ladder = [11, 21, 41, 81].map(GridSpec::uniform);
    let rep = refine_study(&sc, &ladder).unwrap();
    let order = rep.order_energy.expect("energy order");
    assert!((order - 2.0).abs() < 0.3, "order {order} {rep:?}");
}

#[test]
fn reference_ladder_order_at_least_one() {
    let ladder = [51, 101, 201].map(GridSpec::uniform);
    let rep = refine_study(&scenario(51), &ladder).unwrap();
    assert!(!rep.inconclusive, "{rep:?}");
    assert!(rep.order_s.unwrap() >= 1.0, "{rep:?}");
}

#[test]
fn identical_levels_are_inconclusive() {
    let ladder = [GridSpec::uniform(31); 3];
    let rep = refine_study(&scenario(31), &ladder).unwrap();
    assert!(rep.inconclusive);
    assert!(rep.error_ratios_s.iter().all(|&r| r == 1.0));
}

#[test]
fn short_ladder_is_rejected() {
    let ladder = [GridSpec::uniform(31), GridSpec::uniform(61)];
    assert!(refine_study(&scenario(31), &ladder).is_err());
}

#[test]
fn trace_csv_is_deterministic() {
    let (p, _) = zinc();
    let st = reference_profile().build(1.0, 21, 21);
    let mut cfg = StepperConfig::new(1.0, 5.0, 500.0, 10);
    cfg.profile_stride = 5;
    let c = ControllerSpec::new(Law::TwoPhase, 0.01, 0.5);
    let render = || {
        let tr = solver::run(&st, &c, &cfg, ActuationSide::HeatLiquid, &p).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        tr.write_samples(&mut a).unwrap();
        tr.write_profiles(&mut b).unwrap();
        (a, b)
    };
    let first = render();
    assert_eq!(first, render());
    let text = String::from_utf8(first.0).unwrap();
    assert!(text.starts_with("t,s,q_c,T_l0,T_sL,E,injected,s_dot,"));
    assert_eq!(text.lines().count(), 1 + 11);
}

#[test]
fn internal_energy_matches_initial_s_infinity() {
    let (_, dp) = zinc();
    let st = reference_profile().build(1.0, 101, 101);
    let e = internal_energy(&st, &dp);
    assert!((e - dp.gamma * s_infinity(&st, &dp)).abs() <= 1e-9 * e);
}
