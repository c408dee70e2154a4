//! Method-of-lines Ricci flow for warped-product metrics.
//!
//! With the coordinate `x` held fixed, `∂_t g = −2 Ric` reduces to
//!
//! ```text
//! ∂_t ψ = ψ_ss − (1 − ψ_s²)/ψ
//! ∂_t φ = (2 ψ_ss/ψ) φ
//! ```
//!
//! which is what [`rhs`] evaluates. That system is only weakly parabolic and
//! its discretisation grows spurious modes at the poles, so the integrator
//! advances the Ricci–DeTurck system of [`deturck_rates`] with explicit
//! midpoint RK2 under a parabolic step limit.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::min_scalar;
use crate::grid::{even_derivatives, psi_derivatives, Jet, ProfileGrid, PSI_FLOOR_REL};

/// Parabolic step factor: `dt ≤ CFL · (min φ Δx)²`. The polar terms at the
/// pole cells push the stiffest rate to about `−30/(φΔx)²`, and midpoint RK2
/// needs `dt·|λ| ≤ 2`.
pub const CFL: f64 = 0.05;

/// Advective step factor: `dt ≤ ADVECTIVE_CFL · Δx / |w|`.
pub const ADVECTIVE_CFL: f64 = 0.5;

/// Largest relative change of `ψ` or `φ` in one cell per step.
pub const MAX_RELATIVE_CHANGE: f64 = 0.05;

/// The DeTurck background is reset to the current metric once
/// [`Background::drift`] exceeds this.
pub const BACKGROUND_DRIFT: f64 = 0.1;

/// Extinction when `max ψ < EXTINCT_REL · initial max ψ`.
pub const EXTINCT_REL: f64 = 1e-3;

/// Neckpinch when `interior min ψ / max ψ < PINCH_RATIO`.
pub const PINCH_RATIO: f64 = 1e-3;

/// Step underflow below `DT_UNDERFLOW_REL · S²`.
pub const DT_UNDERFLOW_REL: f64 = 1e-14;

/// Monotone min-R tolerance, `10⁻⁶ |min R(0)| + 10⁻¹⁰`.
pub fn tol_monotone(min_r0: f64) -> f64 {
    1e-6 * min_r0.abs() + 1e-10
}

/// Time derivatives `(∂_t ψ, ∂_t φ)` at one point.
#[inline]
pub fn rhs_point(jet: Jet, phi: f64) -> (f64, f64) {
    let dpsi = jet.psi_ss - (1.0 - jet.psi_s * jet.psi_s) / jet.psi;
    let dphi = 2.0 * jet.psi_ss / jet.psi * phi;
    (dpsi, dphi)
}

#[derive(Debug, Clone)]
pub struct Rates {
    pub dpsi_dt: Vec<f64>,
    pub dphi_dt: Vec<f64>,
}

/// Per-cell time derivatives of `ψ` and `φ`.
pub fn rhs(profile: &ProfileGrid) -> Result<Rates> {
    let floor = profile.psi_floor();
    if let Some(cell) = profile.psi().iter().position(|&p| p < floor) {
        return Err(LabError::DegenerateProfile {
            cell,
            psi: profile.psi()[cell],
            floor,
        });
    }
    let jets = profile.jets();
    let (dpsi_dt, dphi_dt) = (0..profile.n_cells())
        .map(|i| rhs_point(jets.at(i), profile.phi()[i]))
        .unzip();
    Ok(Rates { dpsi_dt, dphi_dt })
}

/// Rotationally symmetric background metric `φ̃² dx² + ψ̃² g_{S²}` for the
/// DeTurck field, stored through the coefficients the rates need:
/// `B = ψ̃ ψ̃_x / φ̃²`, `A = φ̃_x / φ̃` and their `x` derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Background {
    psi: Vec<f64>,
    phi: Vec<f64>,
    b: Vec<f64>,
    b_x: Vec<f64>,
    a: Vec<f64>,
    a_x: Vec<f64>,
}

impl Background {
    /// The metric of `profile` itself, so that the DeTurck field starts at zero.
    pub fn of(profile: &ProfileGrid) -> Self {
        let dx = profile.dx();
        let psi = profile.psi().to_vec();
        let phi = profile.phi().to_vec();
        let (px, pxx) = psi_derivatives(&psi, dx);
        let (fx, fxx) = even_derivatives(&phi, dx);
        let n = psi.len();
        let mut b = vec![0.0; n];
        let mut b_x = vec![0.0; n];
        let mut a = vec![0.0; n];
        let mut a_x = vec![0.0; n];
        for i in 0..n {
            let (p, f) = (psi[i], phi[i]);
            b[i] = p * px[i] / (f * f);
            b_x[i] = (px[i] * px[i] + p * pxx[i]) / (f * f) - 2.0 * p * px[i] * fx[i] / (f * f * f);
            a[i] = fx[i] / f;
            a_x[i] = fxx[i] / f - fx[i] * fx[i] / (f * f);
        }
        Self { psi, phi, b, b_x, a, a_x }
    }

    /// Spread of `ln(ψ/ψ̃)` and `ln(φ/φ̃)` over all cells. A constant rescaling
    /// leaves the Christoffel symbols, and hence the DeTurck field, unchanged,
    /// so only the spread matters.
    pub fn drift(&self, profile: &ProfileGrid) -> f64 {
        let ratios = profile
            .psi()
            .iter()
            .zip(&self.psi)
            .chain(profile.phi().iter().zip(&self.phi))
            .map(|(v, w)| v / w);
        let (lo, hi) = ratios.fold((f64::MAX, f64::MIN), |(lo, hi), r| (lo.min(r), hi.max(r)));
        (hi / lo).ln()
    }
}

/// Per-cell rates of the Ricci–DeTurck system.
///
/// With `W = g^{ij}(Γ^k_ij − Γ̃^k_ij)` taken against `background` and the
/// Lie derivative expanded so that only compact second differences remain,
///
/// ```text
/// ∂_t ψ = ψ_xx/φ² − 1/ψ − ψ_x²/(φ²ψ) + 2Bψ_x/ψ² − Aψ_x/φ²
/// ∂_t φ = φ_xx/φ² − 2φ_x²/φ³ − A_x/φ + Aφ_x/φ² + 2ψ_x²/(ψ²φ)
///         + 2B_x φ/ψ² + 2Bφ_x/ψ² − 4Bφψ_x/ψ³
/// ```
///
/// It differs from [`rhs`] by a Lie derivative, so every geometric quantity
/// evolves identically.
pub fn deturck_rates(profile: &ProfileGrid, background: &Background) -> Rates {
    deturck_with_slopes(profile, background).0
}

/// [`deturck_rates`] together with `ψ_x` and `φ_x`.
fn deturck_with_slopes(profile: &ProfileGrid, background: &Background) -> (Rates, Vec<f64>, Vec<f64>) {
    let n = profile.n_cells();
    let dx = profile.dx();
    let psi = profile.psi();
    let phi = profile.phi();
    let (px, pxx) = psi_derivatives(psi, dx);
    let (fx, fxx) = even_derivatives(phi, dx);
    let bg = background;
    let cell = |i: usize| {
        let (p, f) = (psi[i], phi[i]);
        let (px, fx) = (px[i], fx[i]);
        let (b, a) = (bg.b[i], bg.a[i]);
        let dpsi = pxx[i] / (f * f) - 1.0 / p - px * px / (f * f * p) + 2.0 * b * px / (p * p)
            - a * px / (f * f);
        let dphi = fxx[i] / (f * f) - 2.0 * fx * fx / (f * f * f) - bg.a_x[i] / f
            + a * fx / (f * f)
            + 2.0 * px * px / (p * p * f)
            + 2.0 * bg.b_x[i] * f / (p * p)
            + 2.0 * b * fx / (p * p)
            - 4.0 * b * f * px / (p * p * p);
        (dpsi, dphi)
    };
    let (dpsi_dt, dphi_dt) = (0..n).map(cell).unzip();
    (Rates { dpsi_dt, dphi_dt }, px, fx)
}

fn axpy(base: &ProfileGrid, rates: &Rates, dt: f64) -> Option<ProfileGrid> {
    let psi: Vec<f64> = base
        .psi()
        .iter()
        .zip(&rates.dpsi_dt)
        .map(|(p, d)| p + dt * d)
        .collect();
    let phi: Vec<f64> = base
        .phi()
        .iter()
        .zip(&rates.dphi_dt)
        .map(|(f, d)| f + dt * d)
        .collect();
    let max = psi.iter().copied().fold(f64::MIN, f64::max);
    let floor = PSI_FLOOR_REL * max;
    if psi.iter().any(|&p| !(p >= floor)) || phi.iter().any(|&f| !(f > 0.0 && f.is_finite())) {
        return None;
    }
    ProfileGrid::from_parts(psi, phi, base.time() + dt).ok()
}

fn midpoint(profile: &ProfileGrid, k1: &Rates, background: &Background, dt: f64) -> Option<ProfileGrid> {
    let mid = axpy(profile, k1, 0.5 * dt)?;
    let k2 = deturck_rates(&mid, background);
    axpy(profile, &k2, dt)
}

/// Step bound from the advective part of the DeTurck field and from the
/// relative rates `|ψ̇/ψ|`, `|φ̇/φ|`.
fn transport_limit(profile: &ProfileGrid, rates: &Rates, px: &[f64], fx: &[f64], background: &Background) -> f64 {
    let dx = profile.dx();
    let mut dt = f64::INFINITY;
    for i in 0..profile.n_cells() {
        let (p, f) = (profile.psi()[i], profile.phi()[i]);
        let speed = (2.0 * background.b[i] / (p * p)).abs()
            + background.a[i].abs() / (f * f)
            + 2.0 * px[i].abs() / (f * f * p)
            + 2.0 * fx[i].abs() / (f * f * f);
        dt = dt.min(ADVECTIVE_CFL * dx / speed);
        let rel = (rates.dpsi_dt[i] / p).abs().max((rates.dphi_dt[i] / f).abs());
        dt = dt.min(MAX_RELATIVE_CHANGE / rel);
    }
    dt
}

/// A profile along the flow with its step bookkeeping.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub profile: ProfileGrid,
    pub step_count: u64,
    pub dt_last: f64,
    /// `min R` of this state.
    pub min_r: f64,
    /// Running maximum of `min R` over past accepted states.
    pub min_r_history_floor: f64,
    pub tol_monotone: f64,
    /// Background metric of the DeTurck field.
    pub background: Arc<Background>,
}

impl FlowState {
    pub fn new(profile: ProfileGrid) -> Result<Self> {
        let min_r = min_scalar(&profile)?;
        Ok(Self {
            background: Arc::new(Background::of(&profile)),
            profile,
            step_count: 0,
            dt_last: 0.0,
            min_r,
            min_r_history_floor: min_r,
            tol_monotone: tol_monotone(min_r),
        })
    }

    pub fn time(&self) -> f64 {
        self.profile.time()
    }

    /// Largest step the parabolic limit allows.
    pub fn dt_limit(&self) -> f64 {
        let h = self.profile.min_spacing();
        CFL * h * h
    }

}
/// One accepted RK2 step of at most `dt_request`.
///
/// The step is halved until `ψ` stays above its floor and `min R` does not
/// drop below the running floor by more than `tol_monotone`.
pub fn step(state: &FlowState, dt_request: f64) -> Result<FlowState> {
    if !(dt_request > 0.0) {
        return Ok(state.clone());
    }
    let s = state.profile.total_arclength();
    let limit = DT_UNDERFLOW_REL * s * s;
    let background = if state.background.drift(&state.profile) > BACKGROUND_DRIFT {
        Arc::new(Background::of(&state.profile))
    } else {
        state.background.clone()
    };
    let (k1, px, fx) = deturck_with_slopes(&state.profile, &background);
    let mut dt = dt_request
        .min(state.dt_limit())
        .min(transport_limit(&state.profile, &k1, &px, &fx, &background));
    loop {
        if dt < limit {
            return Err(LabError::StepUnderflow {
                dt,
                limit,
                time: state.time(),
            });
        }
        if let Some(next) = midpoint(&state.profile, &k1, &background, dt) {
            if let Ok(min_r) = min_scalar(&next) {
                if min_r >= state.min_r_history_floor - state.tol_monotone {
                    return Ok(FlowState {
                        profile: next,
                        step_count: state.step_count + 1,
                        dt_last: dt,
                        min_r,
                        min_r_history_floor: state.min_r_history_floor.max(min_r),
                        tol_monotone: state.tol_monotone,
                        background,
                    });
                }
            }
        }
        dt *= 0.5;
    }
}

/// How a trajectory ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Extinct { t: f64 },
    Pinched { t: f64, x: f64 },
    ReachedTMax { t: f64 },
    Degenerate { t: f64, reason: String },
}

impl Termination {
    pub fn time(&self) -> f64 {
        match self {
            Termination::Extinct { t }
            | Termination::Pinched { t, .. }
            | Termination::ReachedTMax { t }
            | Termination::Degenerate { t, .. } => *t,
        }
    }

    pub fn flag(&self) -> &'static str {
        match self {
            Termination::Extinct { .. } => "extinct",
            Termination::Pinched { .. } => "pinched",
            Termination::ReachedTMax { .. } => "reached_t_max",
            Termination::Degenerate { .. } => "degenerate",
        }
    }
}

/// When snapshots are recorded, in addition to the initial and final states.
#[derive(Debug, Clone, PartialEq)]
pub enum OutputSchedule {
    /// Snapshots at these times, linearly interpolated between sub-steps.
    Times(Vec<f64>),
    /// A snapshot every `k` accepted steps.
    Stride(u64),
}

#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub states: Vec<FlowState>,
    pub termination: Termination,
}

impl FlowTrajectory {
    pub fn initial(&self) -> &FlowState {
        &self.states[0]
    }

    pub fn last(&self) -> &FlowState {
        self.states.last().expect("trajectory has at least one state")
    }

    /// Extinction or pinch time, if the run ended in a singularity.
    pub fn singular_time(&self) -> Option<f64> {
        match self.termination {
            Termination::Extinct { t } | Termination::Pinched { t, .. } => Some(t),
            _ => None,
        }
    }

    /// Trajectory CSV: `t,psi_max,psi_min_interior,min_R,total_arclength,termination_flag`.
    pub fn csv_string(&self) -> String {
        let mut s = String::from("t,psi_max,psi_min_interior,min_R,total_arclength,termination_flag\n");
        let last = self.states.len() - 1;
        for (k, st) in self.states.iter().enumerate() {
            let p = &st.profile;
            let neck = p.psi_min_interior().map_or(f64::NAN, |(_, v)| v);
            let flag = if k == last {
                self.termination.flag()
            } else {
                "running"
            };
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                p.time(),
                p.max_psi(),
                neck,
                st.min_r,
                p.total_arclength(),
                flag
            );
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.csv_string())?;
        Ok(())
    }
}

fn blend(a: &FlowState, b: &FlowState, t: f64) -> FlowState {
    let ta = a.time();
    let tb = b.time();
    let w = if tb > ta { (t - ta) / (tb - ta) } else { 1.0 };
    let lerp = |x: &[f64], y: &[f64]| -> Vec<f64> {
        x.iter().zip(y).map(|(u, v)| (1.0 - w) * u + w * v).collect()
    };
    let psi = lerp(a.profile.psi(), b.profile.psi());
    let phi = lerp(a.profile.phi(), b.profile.phi());
    let profile = ProfileGrid::from_parts(psi, phi, t).expect("convex blend of valid profiles");
    let min_r = min_scalar(&profile).unwrap_or((1.0 - w) * a.min_r + w * b.min_r);
    FlowState {
        profile,
        step_count: b.step_count,
        dt_last: b.dt_last,
        min_r,
        min_r_history_floor: a.min_r_history_floor.max(min_r.min(b.min_r_history_floor)),
        tol_monotone: b.tol_monotone,
        background: b.background.clone(),
    }
}

/// Integrates from `state` until extinction, neckpinch, `t_max` or step
/// underflow.
pub fn evolve(state: FlowState, t_max: f64, schedule: &OutputSchedule) -> Result<FlowTrajectory> {
    if !(t_max > state.time()) {
        return Err(LabError::InvalidParameter(format!(
            "t_max = {t_max} must exceed the start time {}",
            state.time()
        )));
    }
    let extinct_below = EXTINCT_REL * state.profile.max_psi();
    let mut times: Vec<f64> = match schedule {
        OutputSchedule::Times(ts) => {
            let mut v: Vec<f64> = ts
                .iter()
                .copied()
                .filter(|&t| t > state.time() && t <= t_max)
                .collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        }
        OutputSchedule::Stride(_) => Vec::new(),
    };
    times.reverse();
    let stride = match schedule {
        OutputSchedule::Stride(k) => Some((*k).max(1)),
        OutputSchedule::Times(_) => None,
    };

    let mut states = vec![state.clone()];
    let mut current = state;
    let termination = loop {
        let next = match step(&current, t_max - current.time()) {
            Ok(next) => next,
            Err(e) => {
                if states.last().map(|s| s.step_count) != Some(current.step_count) {
                    states.push(current.clone());
                }
                break Termination::Degenerate {
                    t: current.time(),
                    reason: e.to_string(),
                }
            }
        };
        while let Some(&t_out) = times.last() {
            if t_out > next.time() {
                break;
            }
            times.pop();
            if t_out < next.time() {
                states.push(blend(&current, &next, t_out));
            }
        }
        let t = next.time();
        let max_psi = next.profile.max_psi();
        let pinch = next
            .profile
            .psi_min_interior()
            .filter(|&(_, v)| v < PINCH_RATIO * max_psi)
            .map(|(i, _)| next.profile.x_centers()[i]);
        let done = if max_psi < extinct_below {
            Some(Termination::Extinct { t })
        } else if let Some(x) = pinch {
            Some(Termination::Pinched { t, x })
        } else if t >= t_max {
            Some(Termination::ReachedTMax { t })
        } else {
            None
        };
        let on_stride = stride.is_some_and(|k| next.step_count % k == 0);
        current = next;
        if let Some(term) = done {
            states.push(current);
            break term;
        }
        if on_stride {
            states.push(current.clone());
        }
    };
    Ok(FlowTrajectory {
        states,
        termination,
    })
}

/// Margin of `min R(t) ≥ −3/(2(t+C))` at one snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarBoundSample {
    pub t: f64,
    pub min_r: f64,
    pub bound: f64,
    /// `min R − bound`; negative means violated.
    pub margin: f64,
    /// Decrease of `min R` below the running floor, if any.
    pub monotone_drop: f64,
    pub ok: bool,
}

/// Checks the lower scalar bound and the monotonicity of `min R` at every
/// snapshot. `c` is `None` under the nonnegative policy, where the bound is
/// `−3/(2t)` (and `−∞` at `t = 0`).
pub fn scalar_bound_monitor(trajectory: &FlowTrajectory, c: Option<f64>) -> Vec<ScalarBoundSample> {
    let t0 = trajectory.initial().time();
    let tol = trajectory.initial().tol_monotone;
    let mut floor = f64::NEG_INFINITY;
    trajectory
        .states
        .iter()
        .map(|st| {
            let t = st.time() - t0;
            let bound = match c {
                Some(c) => -1.5 / (t + c),
                None if t > 0.0 => -1.5 / t,
                None => f64::NEG_INFINITY,
            };
            let margin = st.min_r - bound;
            let monotone_drop = (floor - st.min_r).max(0.0);
            floor = floor.max(st.min_r);
            ScalarBoundSample {
                t: st.time(),
                min_r: st.min_r,
                bound,
                margin,
                monotone_drop,
                ok: margin >= -tol && monotone_drop <= tol,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_profile, ProfileKind};

    fn round(r: f64, n: usize) -> FlowState {
        FlowState::new(build_profile(&ProfileKind::Round { radius: r }, n).unwrap()).unwrap()
    }

    #[test]
    fn round_rhs_at_equator() {
        let st = round(1.0, 256);
        let rates = rhs(&st.profile).unwrap();
        assert!((rates.dpsi_dt[128] + 2.0).abs() < 1e-3);
        for r in [0.5, 1.0, 2.0] {
            let st = round(r, 256);
            let rates = rhs(&st.profile).unwrap();
            for (dphi, phi) in rates.dphi_dt.iter().zip(st.profile.phi()) {
                assert!((dphi / phi + 2.0 / (r * r)).abs() < 1e-6 / (r * r));
            }
        }
    }

    #[test]
    fn cylinder_rhs() {
        let rho = 0.3;
        let (dpsi, dphi) = rhs_point(
            Jet {
                psi: rho,
                psi_s: 0.0,
                psi_ss: 0.0,
            },
            1.0,
        );
        assert!((dpsi + 1.0 / rho).abs() < 1e-14);
        assert_eq!(dphi, 0.0);
    }

    #[test]
    fn short_round_flow_matches_exact_radius() {
        let mut st = round(1.0, 128);
        while st.time() < 1e-3 {
            st = step(&st, 1e-3 - st.time()).unwrap();
        }
        assert!((st.time() - 1e-3).abs() < 1e-15);
        let eq = crate::grid::interpolate(st.profile.psi(), 0.5);
        let exact = (1.0f64 - 4e-3).sqrt();
        assert!((eq - exact).abs() < 1e-9, "{eq} vs {exact}");
    }

    #[test]
    fn step_respects_parabolic_limit() {
        let st = round(1.0, 64);
        let next = step(&st, 1.0).unwrap();
        assert_eq!(next.dt_last, st.dt_limit());
        assert_eq!(next.step_count, 1);
    }

    #[test]
    fn deturck_rates_match_ricci_rates_at_own_background() {
        let st = round(1.0, 128);
        let ricci = rhs(&st.profile).unwrap();
        let dt = deturck_rates(&st.profile, &st.background);
        for i in 0..128 {
            assert!((ricci.dpsi_dt[i] - dt.dpsi_dt[i]).abs() < 1e-5);
            assert!((ricci.dphi_dt[i] - dt.dphi_dt[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_step_is_identity() {
        let st = round(1.0, 64);
        let same = step(&st, 0.0).unwrap();
        assert_eq!(same.profile, st.profile);
        assert_eq!(same.step_count, 0);
    }

    #[test]
    fn round_sphere_goes_extinct_at_quarter() {
        let st = round(1.0, 64);
        let traj = evolve(st, 0.3, &OutputSchedule::Times(vec![0.1, 0.2])).unwrap();
        match traj.termination {
            Termination::Extinct { t } => assert!((t - 0.25).abs() < 1e-6, "{t}"),
            ref other => panic!("unexpected termination {other:?}"),
        }
        assert_eq!(traj.states.len(), 4);
        let r2 = traj.states[1].profile.max_psi().powi(2);
        assert!((r2 - 0.6).abs() < 1e-3);
    }

    #[test]
    fn evolve_rejects_past_t_max() {
        assert!(evolve(round(1.0, 64), 0.0, &OutputSchedule::Stride(10)).is_err());
    }
}
