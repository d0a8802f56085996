//! Acceptance checks on the zinc reference scenario.
//!
//! Prints one `PASS`/`FAIL` line per criterion. Tolerances are the
//! constants below. The process fails if any criterion outside
//! [`KNOWN_FAILURES`] fails; a known failure is still reported as `FAIL`.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stefan_cli::commands::{compare, guaranteed};
use stefan_core::analysis::{
    forward_transform, inverse_transform, kernel_psi, settling_time, Diagnostics, KernelParams,
    SETTLING_LEVELS,
};
use stefan_core::controllers::open_loop_oracle;
use stefan_core::oracle::{oracle_run, OracleConfig};
use stefan_core::physics::s_infinity;
use stefan_core::solver::{self, run_with, Schedule};
use stefan_core::*;

const GAIN: f64 = 0.01;
const SETPOINT: f64 = 0.5;
const S0: f64 = 0.4;
const HORIZON: f64 = 40_000.0;
const GRID: usize = 101;
const DT: f64 = 1.0;

const ENERGY_TOL: f64 = 1e-4;
const Q_ORACLE_TOL: f64 = 1e-2;
const SETPOINT_BAND: f64 = 1e-3;
/// `q_c ≥ -Q_SIGN_TOL · q_c(0)`; see the decisions notes.
const Q_SIGN_TOL: f64 = 1e-9;
const RATIO_BANDS: [(f64, f64, f64); 4] = [(10.0, 3.0, 5.0), (5.0, 1.5, 2.5), (2.0, 1.2, 2.0), (1.0, 1.2, 2.0)];
const V2_RATE_FACTOR: f64 = 0.9;
const PSI_R2_MIN: f64 = 0.95;
const ROUND_TRIP_TOL: f64 = 1e-6;
const ROUND_TRIP_PROFILES: usize = 100;
const ROUND_TRIP_NODES: usize = 400;
const SLOPE_BAND: (f64, f64) = (1.7, 2.3);
const ROBUST_RATIO_BOUND: f64 = 0.1;
const CROSSCHECK_TOL: f64 = 5e-3;

/// Criteria that fail on this implementation; each is recorded in the notes.
const KNOWN_FAILURES: &[(u32, &str)] = &[(
    5,
    "10% settling ratio is ~5.2 on two independent solvers",
)];

struct Outcome {
    id: u32,
    pass: bool,
    line: String,
}

fn params() -> PhysicalParams {
    PhysicalParams::zinc()
}

fn dp() -> DerivedParams {
    derive(&params()).unwrap()
}

fn initial(n: usize) -> PlantState {
    InitialProfile::Linear {
        liquid_amplitude: 10.0,
        solid_amplitude: -200.0,
        s0: S0,
    }
    .build(1.0, n, n)
}

fn stepper(dt: f64, t_end: f64, profiles: bool) -> StepperConfig {
    let mut cfg = StepperConfig::new(1.0, dt, t_end, ((10.0 / dt).round() as usize).max(1));
    cfg.profile_stride = if profiles { 10 } else { 0 };
    cfg
}

fn closed_loop(law: Law, n: usize, dt: f64, t_end: f64, profiles: bool) -> Trace {
    solver::run(
        &initial(n),
        &ControllerSpec::new(law, GAIN, SETPOINT),
        &stepper(dt, t_end, profiles),
        ActuationSide::HeatLiquid,
        &params(),
    )
    .unwrap()
}

fn energy_residual(tr: &Trace) -> f64 {
    let e0 = tr.samples[0].energy;
    tr.samples
        .iter()
        .map(|s| (s.energy - e0 - s.injected).abs() / e0)
        .fold(0.0, f64::max)
}

fn c1(two: &Trace, one: &Trace) -> Outcome {
    let r = energy_residual(two).max(energy_residual(one));
    Outcome {
        id: 1,
        pass: two.completed() && one.completed() && r <= ENERGY_TOL,
        line: format!("energy audit: max |E - E0 - sum q dt| / E0 = {r:.3e} (tol {ENERGY_TOL:e}), both laws"),
    }
}

/// `max |q - q_ref| / max |q_ref|` against `c γ (s_r - s_inf) e^{-ct}`.
fn q_deviation(tr: &Trace) -> f64 {
    let d = dp();
    let s_inf = s_infinity(&initial(GRID), &d);
    let peak = open_loop_oracle(0.0, GAIN, d.gamma, SETPOINT, s_inf);
    tr.samples
        .iter()
        .map(|s| (s.q_c - open_loop_oracle(s.t, GAIN, d.gamma, SETPOINT, s_inf)).abs() / peak)
        .fold(0.0, f64::max)
}

fn c2(two: &Trace) -> Outcome {
    let base = q_deviation(two);
    // the maximum sits near t = 1/c, so a short horizon resolves the ladder
    let ladder: Vec<f64> = [(GRID, DT), (2 * GRID - 1, DT / 2.0), (4 * GRID - 3, DT / 4.0)]
        .iter()
        .map(|&(n, dt)| q_deviation(&closed_loop(Law::TwoPhase, n, dt, 1000.0, false)))
        .collect();
    let decreasing = ladder.windows(2).all(|w| w[1] < w[0]);
    Outcome {
        id: 2,
        pass: base <= Q_ORACLE_TOL && decreasing,
        line: format!(
            "closed-form q_c: max deviation / q_ref(0) = {base:.3e} (tol {Q_ORACLE_TOL:e}); grid+dt ladder {:.3e} > {:.3e} > {:.3e}: {decreasing}",
            ladder[0], ladder[1], ladder[2]
        ),
    }
}

/// First time after which `|s - s_r| ≤ band` holds to the end of the trace.
fn entry_time(tr: &Trace, band: f64) -> Option<f64> {
    let last_out = tr.samples.iter().rposition(|s| (s.s - SETPOINT).abs() > band);
    match last_out {
        None => Some(tr.samples[0].t),
        Some(i) if i + 1 < tr.samples.len() => Some(tr.samples[i + 1].t),
        Some(_) => None,
    }
}

fn c3(two: &Trace, one: &Trace) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, tr) in [("two-phase", two), ("one-phase", one)] {
        let (imin, smin) = tr
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| (i, s.s))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        let entry = entry_time(tr, SETPOINT_BAND);
        let dip_first = entry.is_some_and(|t| tr.samples[imin].t < t);
        let ok = smin < S0 && dip_first && entry.is_some_and(|t| t <= HORIZON);
        pass &= ok;
        parts.push(format!(
            "{name}: min s = {smin:.5} at t = {:.0} s, within {SETPOINT_BAND:e} m from t = {}",
            tr.samples[imin].t,
            entry.map_or("never".into(), |t| format!("{t:.0} s"))
        ));
    }
    Outcome {
        id: 3,
        pass,
        line: format!("setpoint convergence and dip: {}", parts.join("; ")),
    }
}

fn c4(two: &Trace, one: &Trace) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, tr) in [("two-phase", two), ("one-phase", one)] {
        let q0 = tr.samples[0].q_c;
        let valid = tr.samples.iter().all(|s| s.validity.model_valid());
        let qmin = tr.samples.iter().map(|s| s.q_c).fold(f64::INFINITY, f64::min);
        let q_ok = qmin >= -Q_SIGN_TOL * q0;
        pass &= valid && q_ok && tr.completed();
        parts.push(format!("{name}: model valid {valid}, min q_c = {qmin:.3e} (floor {:.3e})", -Q_SIGN_TOL * q0));
    }
    Outcome {
        id: 4,
        pass,
        line: format!("validity at every sample: {}", parts.join("; ")),
    }
}

fn c5(two: &Trace, one: &Trace) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (eps, lo, hi) in RATIO_BANDS {
        let a = settling_time(two, SETPOINT, eps).tau();
        let b = settling_time(one, SETPOINT, eps).tau();
        match (a, b) {
            (Some(a), Some(b)) => {
                let r = b / a;
                let ok = (lo..=hi).contains(&r);
                pass &= ok;
                parts.push(format!(
                    "{eps}%: {b:.0}/{a:.0} = {r:.2} {} [{lo}, {hi}]",
                    if ok { "in" } else { "NOT in" }
                ));
            }
            _ => {
                pass = false;
                parts.push(format!("{eps}%: unsettled"));
            }
        }
    }
    Outcome {
        id: 5,
        pass,
        line: format!("settling ratios one-phase/two-phase: {}", parts.join(", ")),
    }
}

fn c6(two: &Trace) -> Outcome {
    let d = dp();
    let kp = KernelParams::select(GAIN, &d, 1.0).unwrap();
    let diag = Diagnostics::compute(two, &d, SETPOINT, &kp).unwrap();
    let need = V2_RATE_FACTOR * d.alpha_s / 2.0;
    let (v2, psi) = (diag.v2_decay, diag.psi_decay);
    let pass = v2.is_some_and(|f| f.rate >= need)
        && psi.is_some_and(|f| f.rate > 0.0 && f.r_squared >= PSI_R2_MIN);
    let show = |f: Option<stefan_core::analysis::DecayFit>| {
        f.map_or("no fit".into(), |f| format!("rate {:.3e} (R² {:.5}, {} pts)", f.rate, f.r_squared, f.points))
    };
    Outcome {
        id: 6,
        pass,
        line: format!(
            "exponential decay: V2 {} vs min {need:.3e}; Psi {} vs R² ≥ {PSI_R2_MIN}",
            show(v2),
            show(psi)
        ),
    }
}

fn psi_residual(kp: &KernelParams, h: f64) -> f64 {
    let n = (1.0 / h).round() as usize;
    (1..n)
        .map(|k| {
            let x = k as f64 * h;
            let (a, b, c) = (kernel_psi(x - h, kp), kernel_psi(x, kp), kernel_psi(x + h, kp));
            (kp.alpha_l * (a - 2.0 * b + c) / (h * h) - kp.eps * (c - a) / (2.0 * h) + kp.c * b).abs()
        })
        .fold(0.0, f64::max)
}

fn c7() -> Outcome {
    let d = dp();
    let kp = KernelParams::select(GAIN, &d, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_7a11);
    let mut worst: f64 = 0.0;
    for _ in 0..ROUND_TRIP_PROFILES {
        let s: f64 = rng.gen_range(0.05..0.95);
        let x: f64 = rng.gen_range(-0.5..0.0);
        let a: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-20.0..20.0));
        let k: f64 = rng.gen_range(1.0..6.0);
        let n = ROUND_TRIP_NODES;
        let mut u: Vec<f64> = (0..n)
            .map(|j| {
                let y = s * j as f64 / (n - 1) as f64;
                (a[0] + a[1] * (k * y).sin() + a[2] * (k * y / s).cos() + a[3] * y * y) * (1.0 - y / s)
            })
            .collect();
        u[n - 1] = 0.0;
        let back = inverse_transform(&forward_transform(&u, x, s, &kp), x, s, &kp);
        let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = u.iter().zip(&back).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        worst = worst.max(err / scale);
    }
    let r: Vec<f64> = [0.02, 0.01, 0.005].iter().map(|&h| psi_residual(&kp, h)).collect();
    let slopes = [(r[0] / r[1]).log2(), (r[1] / r[2]).log2()];
    let slopes_ok = slopes.iter().all(|s| (SLOPE_BAND.0..=SLOPE_BAND.1).contains(s));
    let bound = 4.0 * d.alpha_l * GAIN / (d.beta_l * d.beta_l);
    let psi_ok = (0..=2000).all(|k| {
        let x = -1.0 + k as f64 * 1e-3;
        let v = kernel_psi(x, &kp);
        v * v <= bound * (2.0 * kp.r * x).exp() * (1.0 + 1e-12)
    });
    Outcome {
        id: 7,
        pass: worst <= ROUND_TRIP_TOL && slopes_ok && psi_ok,
        line: format!(
            "transforms: round trip {worst:.3e} over {ROUND_TRIP_PROFILES} profiles at n={ROUND_TRIP_NODES} (tol {ROUND_TRIP_TOL:e}); psi residual slopes {:.3}, {:.3}; psi bound on [-L, L]: {psi_ok}",
            slopes[0], slopes[1]
        ),
    }
}

fn c8() -> Outcome {
    let mut covered = Vec::new();
    for l in [0.0, 0.1, 0.2] {
        for f in [-0.1, 0.0, 0.1, 0.2] {
            for s in [-0.3, -0.1, 0.0, 0.1] {
                if guaranteed(l, f, s, ROBUST_RATIO_BOUND) {
                    covered.push((l, f, s));
                }
            }
        }
    }
    let settle = |(l, f, s): (f64, f64, f64)| {
        let tr = closed_loop(Law::Robust { eps_l: l, eps_s: s, eps_f: f }, GRID, DT, HORIZON, false);
        let valid = tr.completed() && tr.samples.iter().all(|x| x.validity.model_valid());
        (valid, settling_time(&tr, SETPOINT, 1.0).tau())
    };
    let mut failures = Vec::new();
    for &t in &covered {
        let (valid, tau) = settle(t);
        if !valid || tau.is_none() {
            failures.push(format!("{t:?}"));
        }
    }
    let violating = (0.0, 0.5, 0.0);
    let (v_valid, v_tau) = settle(violating);
    Outcome {
        id: 8,
        pass: failures.is_empty() && !covered.is_empty(),
        line: format!(
            "robust law: {}/{} covered triples valid and in the 1% band{}; recorded ordering-violating {violating:?}: valid {v_valid}, tau_1% {}",
            covered.len() - failures.len(),
            covered.len(),
            if failures.is_empty() { String::new() } else { format!(" (failed: {})", failures.join(" ")) },
            v_tau.map_or("unsettled".into(), |t| format!("{t:.0} s"))
        ),
    }
}

fn c9() -> Outcome {
    let d = dp();
    let p = params();
    let mut errors = Vec::new();
    for (n, cells, dt) in [(GRID, 200, DT), (2 * GRID - 1, 400, DT / 2.0), (4 * GRID - 3, 800, DT / 4.0)] {
        let st = initial(n);
        let s_inf = s_infinity(&st, &d);
        let g = d.gamma;
        let q = move |t: f64| open_loop_oracle(t, GAIN, g, SETPOINT, s_inf);
        let primary = run_with(&st, &mut Schedule(q), &stepper(dt, HORIZON, false), ActuationSide::HeatLiquid, &p).unwrap();
        let oracle = oracle_run(&st, &mut Schedule(q), &p, ActuationSide::HeatLiquid, &OracleConfig::new(cells, HORIZON, 10.0)).unwrap();
        errors.push(compare(&primary, &oracle).0);
    }
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    Outcome {
        id: 9,
        pass: errors[0] <= CROSSCHECK_TOL && monotone,
        line: format!(
            "primary vs enthalpy oracle, open-loop schedule: max |ds| {:.3e} m (tol {CROSSCHECK_TOL:e}) -> {:.3e} -> {:.3e}; monotone {monotone}",
            errors[0], errors[1], errors[2]
        ),
    }
}

fn c10() -> Outcome {
    let p = params().mirrored();
    let st = initial(GRID).mirrored();
    let tr = solver::run(
        &st,
        &ControllerSpec::new(Law::Cooling, GAIN, SETPOINT),
        &stepper(DT, HORIZON, false),
        ActuationSide::CoolSolid,
        &p,
    )
    .unwrap();
    let q0 = tr.samples[0].q_c.abs();
    let qmax = tr.samples.iter().map(|s| s.q_c).fold(f64::NEG_INFINITY, f64::max);
    let entry = entry_time(&tr, SETPOINT_BAND);
    let valid = tr.samples.iter().all(|s| s.validity.model_valid());
    Outcome {
        id: 10,
        pass: tr.completed() && entry.is_some() && qmax <= Q_SIGN_TOL * q0 && valid,
        line: format!(
            "cooling the mirrored scenario: s0 = {:.2}, within {SETPOINT_BAND:e} m of {SETPOINT} from t = {}, max q_c = {qmax:.3e} (ceiling {:.3e}), valid {valid}",
            st.s,
            entry.map_or("never".into(), |t| format!("{t:.0} s")),
            Q_SIGN_TOL * q0
        ),
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let two = closed_loop(Law::TwoPhase, GRID, DT, HORIZON, true);
    let one = closed_loop(Law::OnePhase, GRID, DT, HORIZON, false);
    let outcomes = vec![
        c1(&two, &one),
        c2(&two),
        c3(&two, &one),
        c4(&two, &one),
        c5(&two, &one),
        c6(&two),
        c7(),
        c8(),
        c9(),
        c10(),
    ];
    println!("acceptance: zinc reference scenario, grid {GRID}, dt {DT} s, horizon {HORIZON} s, settling levels {SETTLING_LEVELS:?}");
    let mut unexpected = 0;
    for o in &outcomes {
        let known = KNOWN_FAILURES.iter().find(|(id, _)| *id == o.id);
        let tag = if o.pass { "PASS" } else { "FAIL" };
        let note = match (o.pass, known) {
            (false, Some((_, why))) => format!("  [known: {why}]"),
            (false, None) => {
                unexpected += 1;
                String::new()
            }
            (true, Some(_)) => "  [listed as known failure but passes]".into(),
            (true, None) => String::new(),
        };
        println!("{tag} [{:>2}] {}{note}", o.id, o.line);
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!(
        "acceptance: {passed}/{} pass, {unexpected} unexpected failure(s), {:.1} s",
        outcomes.len(),
        start.elapsed().as_secs_f64()
    );
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
