//! Backstepping transforms and stability diagnostics evaluated on traces.
//!
//! Everything here runs offline on recorded [`Trace`]s; nothing feeds back
//! into the control loop.
//!
//! The integral transforms use the separable structure of both kernels:
//! `φ(x - y)` is affine in `y` and `ψ(x - y)` expands through the angle
//! difference formulas. Each transform therefore needs a handful of tail
//! integrals `∫_x^s g(y) dy`, computed with a sixth-order cumulative
//! rule. The `X` terms dominate `w` by orders of magnitude, so lower-order
//! rules lose the round trip to cancellation.

use std::io::Write;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Result, StefanError};
use crate::physics::{trapezoid, DerivedParams, PlantState};
use crate::trace::{fmt, Trace};

/// Fraction of the horizon discarded before fitting decay rates.
pub const TRANSIENT_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub c: f64,
    pub eps: f64,
    pub alpha_l: f64,
    pub beta_l: f64,
    pub r: f64,
    pub omega: f64,
    pub p1: f64,
    pub p2: f64,
}

impl KernelParams {
    pub fn new(c: f64, eps: f64, dp: &DerivedParams) -> Result<Self> {
        let alpha = dp.alpha_l;
        let bound = (2.0 * alpha * c).sqrt();
        if !(c > 0.0 && c.is_finite()) {
            return Err(StefanError::ParameterDomain { name: "c", value: c });
        }
        if !(eps > 0.0 && eps < bound) {
            return Err(StefanError::KernelDomain { eps, bound });
        }
        let beta = dp.beta_l;
        let omega = ((4.0 * alpha * c - eps * eps) / (4.0 * alpha * alpha)).sqrt();
        Ok(Self {
            c,
            eps,
            alpha_l: alpha,
            beta_l: beta,
            r: eps / (2.0 * alpha),
            omega,
            p1: -(2.0 * alpha * c - eps * eps) / (2.0 * alpha * beta * omega),
            p2: eps / beta,
        })
    }

    /// Kernel with `ε = min{ε₁, ε*, 0.99 √(2 α_l c)}`.
    pub fn select(c: f64, dp: &DerivedParams, length: f64) -> Result<Self> {
        Self::new(c, select_eps(c, dp.alpha_l, length), dp)
    }
}

/// ε allowed by the Lyapunov argument: `ε₁ = α/(4L(3 + 32cL²/α))`, `ε*` the
/// positive root of `g(ε) = c/4 - ε/(4L) - (ε²/α)(3 + 32cL²/α)`.
pub fn select_eps(c: f64, alpha_l: f64, length: f64) -> f64 {
    let k = 3.0 + 32.0 * c * length * length / alpha_l;
    let eps1 = alpha_l / (4.0 * length * k);
    let g = |e: f64| c / 4.0 - e / (4.0 * length) - e * e / alpha_l * k;
    let (mut lo, mut hi) = (0.0, (c * alpha_l / 3.0).sqrt());
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let eps_star = 0.5 * (lo + hi);
    eps1.min(eps_star).min(0.99 * (2.0 * alpha_l * c).sqrt())
}

/// `X = s - s_r + (β_s/α_s) ∫_s^L v dx`.
pub fn x_state(state: &PlantState, dp: &DerivedParams, s_r: f64) -> f64 {
    state.s - s_r + dp.beta_s / dp.alpha_s * state.solid_integral()
}

pub fn kernel_phi(x: f64, c: f64, eps: f64, beta_l: f64) -> f64 {
    (c * x - eps) / beta_l
}

pub fn kernel_psi(x: f64, kp: &KernelParams) -> f64 {
    (kp.r * x).exp() * (kp.p1 * (kp.omega * x).sin() + kp.p2 * (kp.omega * x).cos())
}

/// `w(x) = u(x) - (β_l/α_l)∫_x^s φ(x-y) u(y) dy - φ(x-s) X` on the uniform
/// grid `x_j = s j/(n-1)`.
pub fn forward_transform(u: &[f64], x_state: f64, s: f64, kp: &KernelParams) -> Vec<f64> {
    let n = u.len();
    let h = spacing(n, s);
    let yu: Vec<f64> = (0..n).map(|j| node(j, n, s) * u[j]).collect();
    let tail_u = tail_integrals(u, h);
    let tail_yu = tail_integrals(&yu, h);
    let ratio = kp.beta_l / kp.alpha_l;
    (0..n)
        .map(|j| {
            let x = node(j, n, s);
            // β_l ∫ φ(x-y) u = (cx - ε) ∫u - c ∫y u
            let integral = ((kp.c * x - kp.eps) * tail_u[j] - kp.c * tail_yu[j]) / kp.beta_l;
            u[j] - ratio * integral - kernel_phi(x - s, kp.c, kp.eps, kp.beta_l) * x_state
        })
        .collect()
}

/// `u(x) = w(x) - (β_l/α_l)∫_x^s ψ(x-y) w(y) dy - ψ(x-s) X`.
pub fn inverse_transform(w: &[f64], x_state: f64, s: f64, kp: &KernelParams) -> Vec<f64> {
    let n = w.len();
    let h = spacing(n, s);
    let y = |j: usize| node(j, n, s);
    let cw: Vec<f64> = (0..n)
        .map(|j| (-kp.r * y(j)).exp() * (kp.omega * y(j)).cos() * w[j])
        .collect();
    let sw: Vec<f64> = (0..n)
        .map(|j| (-kp.r * y(j)).exp() * (kp.omega * y(j)).sin() * w[j])
        .collect();
    let tail_c = tail_integrals(&cw, h);
    let tail_s = tail_integrals(&sw, h);
    let ratio = kp.beta_l / kp.alpha_l;
    (0..n)
        .map(|j| {
            let x = y(j);
            let (sn, cs) = (kp.omega * x).sin_cos();
            let integral = (kp.r * x).exp()
                * ((kp.p1 * sn + kp.p2 * cs) * tail_c[j] + (kp.p2 * sn - kp.p1 * cs) * tail_s[j]);
            w[j] - ratio * integral - kernel_psi(x - s, kp) * x_state
        })
        .collect()
}

/// Node `j` of the uniform grid on `[0, s]`, with the last node exactly at `s`.
fn node(j: usize, n: usize, s: f64) -> f64 {
    if j + 1 == n {
        s
    } else {
        s * j as f64 / (n - 1) as f64
    }
}

fn spacing(n: usize, s: f64) -> f64 {
    if n > 1 {
        s / (n - 1) as f64
    } else {
        0.0
    }
}

/// Points per local interpolant in [`tail_integrals`].
const STENCIL: usize = 6;

/// `w[m][p] = ∫_m^{m+1} L_p(t) dt` for the Lagrange basis on nodes `0..STENCIL`.
fn cell_weights() -> &'static [[f64; STENCIL]; STENCIL - 1] {
    static W: OnceLock<[[f64; STENCIL]; STENCIL - 1]> = OnceLock::new();
    W.get_or_init(|| {
        let mut w = [[0.0; STENCIL]; STENCIL - 1];
        for p in 0..STENCIL {
            // coefficients of L_p in ascending powers
            let mut coef = vec![1.0];
            for q in (0..STENCIL).filter(|&q| q != p) {
                let scale = 1.0 / (p as f64 - q as f64);
                let mut next = vec![0.0; coef.len() + 1];
                for (k, &a) in coef.iter().enumerate() {
                    next[k + 1] += a * scale;
                    next[k] -= a * q as f64 * scale;
                }
                coef = next;
            }
            let antideriv = |t: f64| {
                coef.iter()
                    .enumerate()
                    .map(|(k, a)| a * t.powi(k as i32 + 1) / (k + 1) as f64)
                    .sum::<f64>()
            };
            for (m, row) in w.iter_mut().enumerate() {
                row[p] = antideriv(m as f64 + 1.0) - antideriv(m as f64);
            }
        }
        w
    })
}

/// `T_j = ∫_{x_j}^{x_{n-1}} f` on a uniform grid. Each cell is integrated
/// with the quintic through the six nearest nodes (sixth order); grids with
/// fewer than six nodes fall back to the trapezoid rule.
pub fn tail_integrals(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    let weights = cell_weights();
    let cell = |i: usize| -> f64 {
        if n < STENCIL {
            return 0.5 * h * (f[i] + f[i + 1]);
        }
        let k = i.saturating_sub(STENCIL / 2 - 1).min(n - STENCIL);
        let row = &weights[i - k];
        h * row.iter().zip(&f[k..k + STENCIL]).map(|(w, v)| w * v).sum::<f64>()
    };
    for i in (0..n - 1).rev() {
        out[i] = out[i + 1] + cell(i);
    }
    out
}

/// Functionals at one profile snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSample {
    pub t: f64,
    pub s: f64,
    /// `||u||² + ||v||² + (s - s_r)²`.
    pub psi: f64,
    /// `||w||²/(2α_l) + ε X²/(2β_l²)`.
    pub v: f64,
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
    pub x: f64,
    pub z: f64,
}

pub fn functionals_at(
    state: &PlantState,
    dp: &DerivedParams,
    s_r: f64,
    kp: &KernelParams,
) -> FunctionalSample {
    let solid_term = dp.beta_s / dp.alpha_s * state.solid_integral();
    let x = state.s - s_r + solid_term;
    let sq = |v: &[f64]| v.iter().map(|a| a * a).collect::<Vec<_>>();
    let v1 = trapezoid(&sq(&state.liquid), state.dx_liquid());
    let v2 = trapezoid(&sq(&state.solid), state.dx_solid());
    let v3 = (state.s - s_r).powi(2);
    let w = forward_transform(&state.liquid, x, state.s, kp);
    let w_norm = trapezoid(&sq(&w), state.dx_liquid());
    FunctionalSample {
        t: state.t,
        s: state.s,
        psi: v1 + v2 + v3,
        v: w_norm / (2.0 * dp.alpha_l) + kp.eps / (2.0 * dp.beta_l * dp.beta_l) * x * x,
        v1,
        v2,
        v3,
        x,
        z: x + solid_term,
    }
}

/// Functionals at every profile snapshot of `trace`.
pub fn functionals(
    trace: &Trace,
    dp: &DerivedParams,
    s_r: f64,
    kp: &KernelParams,
) -> Result<Vec<FunctionalSample>> {
    if trace.snapshots.is_empty() {
        return Err(StefanError::DiagnosticsUnavailable);
    }
    Ok(trace
        .snapshots
        .iter()
        .map(|st| functionals_at(st, dp, s_r, kp))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Settling {
    Settled { tau: f64 },
    /// Still outside the band at the end of the record.
    NotSettled { horizon: f64 },
}

impl Settling {
    pub fn tau(&self) -> Option<f64> {
        match *self {
            Settling::Settled { tau } => Some(tau),
            Settling::NotSettled { .. } => None,
        }
    }
}

/// `τ_ε = inf{τ : |s(t) - s_r| ≤ |s₀ - s_r| ε/100 ∀ t ≥ τ}` over the record,
/// with the exit crossing located by linear interpolation between samples.
pub fn settling_time(trace: &Trace, s_r: f64, eps_percent: f64) -> Settling {
    let smp = &trace.samples;
    let Some(first) = smp.first() else {
        return Settling::NotSettled { horizon: 0.0 };
    };
    let band = (first.s - s_r).abs() * eps_percent / 100.0;
    let outside = |s: f64| (s - s_r).abs() > band;
    let last = smp.last().unwrap();
    if outside(last.s) {
        return Settling::NotSettled { horizon: last.t };
    }
    let Some(k) = smp.iter().rposition(|p| outside(p.s)) else {
        return Settling::Settled { tau: first.t };
    };
    let (a, b) = (&smp[k], &smp[k + 1]);
    // the crossing lies on the side of the band that `a` violates
    let edge = if a.s > s_r { s_r + band } else { s_r - band };
    let w = if b.s != a.s {
        ((edge - a.s) / (b.s - a.s)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Settling::Settled {
        tau: a.t + w * (b.t - a.t),
    }
}

/// Least-squares fit `value ≈ M e^{-d t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub prefactor: f64,
    pub rate: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Fit over the strictly positive prefix after discarding the first
/// [`TRANSIENT_FRACTION`] of the time span.
pub fn decay_fit(series: &[(f64, f64)]) -> Option<DecayFit> {
    decay_fit_window(series, TRANSIENT_FRACTION)
}

pub fn decay_fit_window(series: &[(f64, f64)], discard: f64) -> Option<DecayFit> {
    let positive = series
        .iter()
        .position(|p| !(p.1 > 0.0 && p.1.is_finite()))
        .unwrap_or(series.len());
    let prefix = &series[..positive];
    let (t0, t1) = (series.first()?.0, series.last()?.0);
    let start = t0 + discard * (t1 - t0);
    let pts: Vec<(f64, f64)> = prefix
        .iter()
        .filter(|p| p.0 >= start)
        .map(|&(t, v)| (t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mt;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(DecayFit {
        prefactor: intercept.exp(),
        rate: -slope,
        r_squared,
        points: pts.len(),
    })
}

/// Functional series plus the settling and decay summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub series: Vec<FunctionalSample>,
    pub settling: Vec<(f64, Settling)>,
    pub psi_decay: Option<DecayFit>,
    pub v2_decay: Option<DecayFit>,
    pub kernel: KernelParams,
}

pub const SETTLING_LEVELS: [f64; 4] = [10.0, 5.0, 2.0, 1.0];

impl Diagnostics {
    pub fn compute(
        trace: &Trace,
        dp: &DerivedParams,
        s_r: f64,
        kp: &KernelParams,
    ) -> Result<Self> {
        let series = functionals(trace, dp, s_r, kp)?;
        let settling = SETTLING_LEVELS
            .iter()
            .map(|&e| (e, settling_time(trace, s_r, e)))
            .collect();
        let psi: Vec<_> = series.iter().map(|f| (f.t, f.psi)).collect();
        let v2: Vec<_> = series.iter().map(|f| (f.t, f.v2)).collect();
        Ok(Self {
            settling,
            psi_decay: decay_fit(&psi),
            v2_decay: decay_fit(&v2),
            series,
            kernel: *kp,
        })
    }

    /// Columns: `t, s, Psi, V, V1, V2, V3, X, z`.
    pub fn write_series<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "s", "Psi", "V", "V1", "V2", "V3", "X", "z"])?;
        for f in &self.series {
            w.write_record(
                [f.t, f.s, f.psi, f.v, f.v1, f.v2, f.v3, f.x, f.z].map(fmt),
            )?;
        }
        w.flush()?;
        Ok(())
    }

    /// One `key = value` line per summary entry.
    pub fn write_summary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "kernel.eps = {}", fmt(self.kernel.eps))?;
        writeln!(out, "kernel.c = {}", fmt(self.kernel.c))?;
        for (e, st) in &self.settling {
            match st {
                Settling::Settled { tau } => writeln!(out, "settling.{e}pct = {}", fmt(*tau))?,
                Settling::NotSettled { horizon } => {
                    writeln!(out, "settling.{e}pct = unsettled (horizon {})", fmt(*horizon))?
                }
            }
        }
        for (name, fit) in [("psi", &self.psi_decay), ("v2", &self.v2_decay)] {
            match fit {
                Some(f) => {
                    writeln!(out, "decay.{name}.rate = {}", fmt(f.rate))?;
                    writeln!(out, "decay.{name}.prefactor = {}", fmt(f.prefactor))?;
                    writeln!(out, "decay.{name}.r_squared = {}", fmt(f.r_squared))?;
                    writeln!(out, "decay.{name}.points = {}", f.points)?;
                }
                None => writeln!(out, "decay.{name} = unavailable")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{derive, PhysicalParams};

    fn kp() -> KernelParams {
        let dp = derive(&PhysicalParams::zinc()).unwrap();
        KernelParams::new(0.01, 1e-4, &dp).unwrap()
    }

    #[test]
    fn eps_selection_picks_eps1_for_zinc() {
        let dp = derive(&PhysicalParams::zinc()).unwrap();
        let a = dp.alpha_l;
        let eps = select_eps(0.01, a, 1.0);
        let eps1 = a / (4.0 * (3.0 + 0.32 / a));
        assert!((eps - eps1).abs() <= 1e-15 * eps1);
        assert!(eps > 0.0);
    }

    #[test]
    fn eps_star_is_a_root() {
        // large alpha makes eps1 exceed eps*, so the root is selected
        let (c, a, l) = (1.0, 100.0, 1.0);
        let k = 3.0 + 32.0 * c * l * l / a;
        let eps = select_eps(c, a, l);
        let g = c / 4.0 - eps / (4.0 * l) - eps * eps / a * k;
        assert!(eps < a / (4.0 * l * k));
        assert!(g.abs() < 1e-10);
    }

    #[test]
    fn kernel_domain_is_enforced() {
        let dp = derive(&PhysicalParams::zinc()).unwrap();
        let bound = (2.0 * dp.alpha_l * 0.01).sqrt();
        assert!(matches!(
            KernelParams::new(0.01, bound, &dp),
            Err(StefanError::KernelDomain { .. })
        ));
        assert!(KernelParams::new(0.01, 0.0, &dp).is_err());
    }

    #[test]
    fn psi_boundary_values() {
        let k = kp();
        assert!((kernel_psi(0.0, &k) - k.eps / k.beta_l).abs() <= 1e-12 * k.p2);
        let h = 1e-5;
        let d = (kernel_psi(h, &k) - kernel_psi(-h, &k)) / (2.0 * h);
        let expect = (k.eps * k.eps / k.alpha_l - k.c) / k.beta_l;
        assert!((d - expect).abs() <= 1e-6 * expect.abs(), "{d} vs {expect}");
    }

    #[test]
    fn phi_values() {
        assert_eq!(kernel_phi(0.0, 0.01, 1e-4, 2.0), -5e-5);
        assert!(kernel_phi(1e-4 / 0.01, 0.01, 1e-4, 2.0).abs() < 1e-18);
    }

    #[test]
    fn tail_integrals_are_sixth_order() {
        let err = |n: usize| {
            let h = 1.0 / (n - 1) as f64;
            let f: Vec<f64> = (0..n).map(|j| (3.0 * j as f64 * h).sin()).collect();
            let t = tail_integrals(&f, h);
            (0..n)
                .map(|j| {
                    let x = j as f64 * h;
                    let exact = ((3.0 * x).cos() - 3.0f64.cos()) / 3.0;
                    (t[j] - exact).abs()
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(21) / err(41);
        assert!(ratio > 50.0, "ratio {ratio}");
    }

    #[test]
    fn zero_profile_maps_to_zero() {
        let k = kp();
        let w = forward_transform(&[0.0; 11], 0.0, 0.4, &k);
        assert!(w.iter().all(|&v| v == 0.0));
        let u = inverse_transform(&[0.0; 11], 0.0, 0.4, &k);
        assert!(u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn boundary_identity() {
        let k = kp();
        let u: Vec<f64> = (0..51).map(|j| (j as f64 * 0.1).cos() - 0.3).collect();
        let w = forward_transform(&u, -0.2, 0.45, &k);
        let expect = u[50] + k.eps / k.beta_l * -0.2;
        assert!((w[50] - expect).abs() <= 1e-13 * expect.abs());
    }

    #[test]
    fn decay_fit_recovers_exponential() {
        let series: Vec<_> = (0..200)
            .map(|k| {
                let t = k as f64 * 10.0;
                (t, 3.5 * (-2e-3 * t).exp())
            })
            .collect();
        let f = decay_fit(&series).unwrap();
        assert!((f.prefactor - 3.5).abs() <= 1e-10 * 3.5);
        assert!((f.rate - 2e-3).abs() <= 1e-10 * 2e-3);
        assert!(f.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn decay_fit_stops_at_first_nonpositive_value() {
        let mut series: Vec<_> = (0..100).map(|k| (k as f64, (-0.1 * k as f64).exp())).collect();
        series[60].1 = 0.0;
        series[70].1 = 1e9;
        let f = decay_fit(&series).unwrap();
        assert!((f.rate - 0.1).abs() < 1e-10);
        assert_eq!(f.points, 60 - 20);
    }
}
