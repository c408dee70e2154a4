//! Width proxy, min-max minimal spheres and area-variation checks.
//!
//! Rotationally symmetric sweep-outs by distance spheres run from one pole
//! to the other, so the min-max over that class is the largest slice area
//! `W = max 4πψ²`. The attaining slice is a critical point of `ψ`, hence a
//! minimal sphere, and the width monitors compare its area rate with the
//! bounds derived from it.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::certificate::{Comparison, Policy};
use crate::error::{LabError, Result};
use crate::flow::{rhs, rhs_point, FlowTrajectory};
use crate::geometry::{curvature, minimal_tolerance, SphereData, StabilitySpectrum};
use crate::grid::{interpolate, Jet, Jets, ProfileGrid};

/// Critical slices are bracketed to this fraction of the total arclength.
pub const CRITICAL_REL: f64 = 1e-8;

/// Default relative part of `tol_rate`.
pub const RATE_REL: f64 = 1e-2;

/// Modes kept in the spectra of critical spheres.
pub const SPECTRUM_MODES: u32 = 4;

/// Slack on `ψψ_ss ≥ −1` when counting index > 1 argmax slices.
pub const INDEX_TOL: f64 = 1e-6;

/// Relative tolerance under which two local maxima count as a tie.
const TIE_REL: f64 = 1e-12;

/// Areas of the pole-to-pole family of distance spheres.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOut {
    pub slices: Vec<f64>,
    pub areas: Vec<f64>,
}

pub fn sweep_out(profile: &ProfileGrid) -> SweepOut {
    SweepOut {
        slices: profile.x_centers().to_vec(),
        areas: profile.psi().iter().map(|p| 4.0 * PI * p * p).collect(),
    }
}

/// Cell jets plus the interpolation needed to evaluate slices between cells.
struct Slices<'a> {
    profile: &'a ProfileGrid,
    jets: Jets,
}

impl<'a> Slices<'a> {
    fn new(profile: &'a ProfileGrid) -> Self {
        Self {
            profile,
            jets: profile.jets(),
        }
    }

    fn psi_s(&self, x: f64) -> f64 {
        interpolate(&self.jets.psi_s, x)
    }

    fn jet(&self, x: f64) -> Jet {
        Jet {
            psi: interpolate(&self.jets.psi, x),
            psi_s: interpolate(&self.jets.psi_s, x),
            psi_ss: interpolate(&self.jets.psi_ss, x),
        }
    }

    fn phi(&self, x: f64) -> f64 {
        interpolate(self.profile.phi(), x)
    }

    /// Root of `ψ_s` in the cell bracket `[x_i, x_{i+1}]`.
    fn root(&self, i: usize) -> f64 {
        let xs = self.profile.x_centers();
        let (mut a, mut b) = (xs[i], xs[i + 1]);
        let (mut fa, fb) = (self.jets.psi_s[i], self.jets.psi_s[i + 1]);
        if fa == 0.0 {
            return a;
        }
        if fb == 0.0 {
            return b;
        }
        let tol = CRITICAL_REL * self.profile.total_arclength();
        let mut fb = fb;
        while (b - a) * self.phi(0.5 * (a + b)) > tol {
            let m = 0.5 * (a + b);
            let fm = self.psi_s(m);
            if fm == 0.0 {
                return m;
            }
            if (fm < 0.0) == (fa < 0.0) {
                a = m;
                fa = fm;
            } else {
                b = m;
                fb = fm;
            }
        }
        // final secant step inside the bracket
        a - fa * (b - a) / (fb - fa)
    }

    /// All sign changes of `ψ_s` between consecutive cells.
    fn critical_points(&self) -> Vec<f64> {
        let d = &self.jets.psi_s;
        let mut out = Vec::new();
        for i in 0..d.len() - 1 {
            if d[i] == 0.0 {
                out.push(self.profile.x_centers()[i]);
            } else if d[i + 1] != 0.0 && (d[i] < 0.0) != (d[i + 1] < 0.0) {
                out.push(self.root(i));
            }
        }
        out
    }
}

/// Width proxy `W = max 4πψ²` and the attaining slice.
///
/// Every local maximum of the cell samples is refined to the root of `ψ_s`;
/// among the refined maxima the largest wins, ties going to the smallest `x`.
pub fn symmetric_width(profile: &ProfileGrid) -> (f64, f64) {
    width_with(&Slices::new(profile))
}

fn width_with(sl: &Slices) -> (f64, f64) {
    let psi = sl.profile.psi();
    let xs = sl.profile.x_centers();
    let n = psi.len();
    let d = &sl.jets.psi_s;
    let mut best: Option<(f64, f64)> = None;
    let mut consider = |x: f64, p: f64| match best {
        Some((bp, _)) if p <= bp * (1.0 + TIE_REL) => {}
        _ => best = Some((p, x)),
    };
    for i in 0..n {
        let l = if i == 0 { f64::MIN } else { psi[i - 1] };
        let r = if i + 1 == n { f64::MIN } else { psi[i + 1] };
        if !(psi[i] > l && psi[i] >= r) {
            continue;
        }
        let bracket = if i + 1 < n && d[i] > 0.0 && d[i + 1] <= 0.0 {
            Some(i)
        } else if i > 0 && d[i - 1] >= 0.0 && d[i] < 0.0 {
            Some(i - 1)
        } else {
            None
        };
        match bracket {
            Some(k) => {
                let x = sl.root(k);
                consider(x, interpolate(psi, x).max(psi[i]));
            }
            None => consider(xs[i], psi[i]),
        }
    }
    let (p, x) = best.expect("a positive profile has a maximum");
    (4.0 * PI * p * p, x)
}

/// A minimal distance sphere with its spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalSphere {
    pub slice: SphereData,
    pub spectrum: StabilitySpectrum,
}

impl CriticalSphere {
    pub fn index(&self) -> u32 {
        self.spectrum.index
    }

    pub fn is_stable(&self) -> bool {
        self.spectrum.index == 0
    }
}

/// Interior critical slices of `ψ`, each located to `10⁻⁸·S` in arclength.
pub fn critical_spheres(profile: &ProfileGrid) -> Vec<CriticalSphere> {
    critical_with(&Slices::new(profile))
}

fn critical_with(sl: &Slices) -> Vec<CriticalSphere> {
    let tol = minimal_tolerance(sl.profile);
    sl.critical_points()
        .into_iter()
        .map(|x| {
            let slice = SphereData::from_jet(x, sl.jet(x), tol);
            let spectrum = StabilitySpectrum::of_slice_unchecked(&slice, SPECTRUM_MODES);
            CriticalSphere { slice, spectrum }
        })
        .collect()
}

/// Stable critical sphere of least area, if any.
pub fn stable_neck(profile: &ProfileGrid) -> Option<CriticalSphere> {
    critical_spheres(profile)
        .into_iter()
        .filter(CriticalSphere::is_stable)
        .min_by(|a, b| a.slice.area.total_cmp(&b.slice.area))
}

/// Two evaluations of the area rate of one slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationCheck {
    pub x: f64,
    pub area: f64,
    /// `8πψ ∂_tψ` from the flow right-hand side.
    pub rate_flow: f64,
    /// `−area·(R − Ric(n,n))`.
    pub rate_curvature: f64,
    pub residual: f64,
    /// `−8π − ∫1·L1` on minimal slices.
    pub rate_gauss_bonnet: Option<f64>,
    pub gauss_bonnet_residual: Option<f64>,
}

impl VariationCheck {
    fn build(x: f64, slice: &SphereData, dpsi_dt: f64) -> Self {
        let rate_flow = 8.0 * PI * slice.psi * dpsi_dt;
        let rate_curvature = -slice.area * (slice.scalar - slice.ric_nn);
        let gb = slice.is_minimal.then(|| -8.0 * PI - slice.integral_l1());
        Self {
            x,
            area: slice.area,
            rate_flow,
            rate_curvature,
            residual: rate_flow - rate_curvature,
            rate_gauss_bonnet: gb,
            gauss_bonnet_residual: gb.map(|g| rate_curvature - g),
        }
    }

    /// Residuals within `tol·(1 + area)`.
    pub fn passes(&self, tol: f64) -> bool {
        let scale = tol * (1.0 + self.area);
        self.residual.abs() <= scale && self.gauss_bonnet_residual.is_none_or(|r| r.abs() <= scale)
    }
}

/// First variation of area at slice `x`, with the Gauss-Bonnet form added
/// when the slice is minimal.
pub fn first_variation_check(profile: &ProfileGrid, x: f64) -> Result<VariationCheck> {
    profile.check_slice(x)?;
    let sl = Slices::new(profile);
    let slice = SphereData::from_jet(x, sl.jet(x), minimal_tolerance(profile));
    let (dpsi, _) = rhs_point(slice.jet(), sl.phi(x));
    Ok(VariationCheck::build(x, &slice, dpsi))
}

/// [`first_variation_check`] at every cell and every critical slice. Cell
/// rates come from the grid right-hand side and the curvature field.
pub fn first_variation_profile(profile: &ProfileGrid) -> Result<Vec<VariationCheck>> {
    let rates = rhs(profile)?;
    let field = curvature(profile)?;
    let jets = profile.jets();
    let tol = minimal_tolerance(profile);
    let mut out: Vec<VariationCheck> = (0..profile.n_cells())
        .map(|i| {
            let x = profile.x_centers()[i];
            let mut slice = SphereData::from_jet(x, jets.at(i), tol);
            slice.scalar = field.scalar[i];
            slice.ric_nn = field.ric_nn[i];
            VariationCheck::build(x, &slice, rates.dpsi_dt[i])
        })
        .collect();
    for cs in critical_spheres(profile) {
        out.push(first_variation_check(profile, cs.slice.x)?);
    }
    Ok(out)
}

/// One snapshot of the width monitor. Pairwise fields describe the pair
/// starting at this snapshot and are `None` on the last one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthSample {
    pub t: f64,
    #[serde(rename = "W")]
    pub w: f64,
    pub x_argmax: f64,
    pub min_r: f64,
    /// `ψψ_ss` at the argmax slice; below `−1` means index above one.
    pub argmax_psi_psi_ss: f64,
    pub neck_area: Option<f64>,
    pub bound_rhs: f64,
    pub dq: Option<f64>,
    /// `bound_rhs − dq`.
    pub margin: Option<f64>,
    pub tol_rate: Option<f64>,
    /// First-order estimate `h/2·|W''|` of the forward-quotient bias.
    pub step_error: f64,
}

impl WidthSample {
    pub fn ok(&self) -> bool {
        match (self.margin, self.tol_rate) {
            (Some(m), Some(tol)) => m >= -tol,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthSeries {
    pub t0: f64,
    pub policy: Policy,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub samples: Vec<WidthSample>,
}

impl WidthSeries {
    pub fn violations(&self) -> usize {
        self.samples.iter().filter(|s| !s.ok()).count()
    }

    /// Smallest `margin + tol_rate` over pairs.
    pub fn worst_slack(&self) -> Option<f64> {
        self.samples
            .iter()
            .filter_map(|s| Some(s.margin? + s.tol_rate?))
            .reduce(f64::min)
    }

    /// Snapshots whose argmax slice has index above one.
    pub fn index_above_one(&self) -> usize {
        self.samples
            .iter()
            .filter(|s| s.argmax_psi_psi_ss < -1.0 - INDEX_TOL)
            .count()
    }

    /// Width CSV: `t,W,x_argmax,dq,bound_rhs,margin,neck_area`.
    pub fn csv_string(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "NaN".to_string(), |v| format!("{v:.16e}"));
        let mut s = String::from("t,W,x_argmax,dq,bound_rhs,margin,neck_area\n");
        for w in &self.samples {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e},{},{:.16e},{},{}",
                w.t,
                w.w,
                w.x_argmax,
                opt(w.dq),
                w.bound_rhs,
                opt(w.margin),
                opt(w.neck_area)
            );
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.csv_string())?;
        Ok(())
    }
}

/// Width rate bound at one snapshot.
///
/// `−4π + 3W/(4(t+C))` under the negative policy, otherwise
/// `−4π − (W/2)·max(min R(t), 0)`.
pub fn rate_bound(w: f64, t: f64, min_r: f64, comparison: &Comparison) -> f64 {
    match comparison.c {
        Some(c) => -4.0 * PI + 0.75 * w / (t + c),
        None => -4.0 * PI - 0.5 * w * min_r.max(0.0),
    }
}

/// Forward-quotient estimates `h/2·|W''|` for each pair of `(t, value)`.
pub(crate) fn step_errors(t: &[f64], v: &[f64]) -> Vec<f64> {
    let m = t.len().saturating_sub(1);
    let dq: Vec<f64> = (0..m).map(|k| (v[k + 1] - v[k]) / (t[k + 1] - t[k])).collect();
    let mut out = vec![0.0; t.len()];
    if m < 2 {
        return out;
    }
    for k in 0..m {
        let j = if k + 1 < m { k } else { k - 1 };
        let span = 0.5 * (t[j + 2] - t[j]);
        let second = (dq[j + 1] - dq[j]) / span;
        out[k] = 0.5 * (t[k + 1] - t[k]) * second.abs();
    }
    out
}

/// Width series of a trajectory with the rate verdict per snapshot pair.
pub fn width_rate_monitor(
    trajectory: &FlowTrajectory,
    comparison: &Comparison,
    rate_rel: f64,
) -> WidthSeries {
    let t0 = trajectory.initial().time();
    let mut samples: Vec<WidthSample> = trajectory
        .states
        .iter()
        .map(|st| {
            let sl = Slices::new(&st.profile);
            let (w, x_argmax) = width_with(&sl);
            let jet = sl.jet(x_argmax);
            let neck_area = critical_with(&sl)
                .into_iter()
                .filter(CriticalSphere::is_stable)
                .map(|c| c.slice.area)
                .reduce(f64::min);
            WidthSample {
                t: st.time(),
                w,
                x_argmax,
                min_r: st.min_r,
                argmax_psi_psi_ss: jet.psi * jet.psi_ss,
                neck_area,
                bound_rhs: rate_bound(w, st.time() - t0, st.min_r, comparison),
                dq: None,
                margin: None,
                tol_rate: None,
                step_error: 0.0,
            }
        })
        .collect();
    let ts: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let ws: Vec<f64> = samples.iter().map(|s| s.w).collect();
    let errs = step_errors(&ts, &ws);
    for k in 0..samples.len().saturating_sub(1) {
        let h = ts[k + 1] - ts[k];
        let dq = if h > 0.0 { (ws[k + 1] - ws[k]) / h } else { 0.0 };
        let s = &mut samples[k];
        s.step_error = errs[k];
        s.dq = Some(dq);
        s.margin = Some(s.bound_rhs - dq);
        s.tol_rate = Some(rate_rel * s.bound_rhs.abs() + errs[k]);
    }
    WidthSeries {
        t0,
        policy: comparison.policy,
        c: comparison.c,
        samples,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeckSample {
    pub t: f64,
    pub x: f64,
    pub area: f64,
    pub min_r: f64,
    /// Forward quotient of the area, `None` on the last sample.
    pub rate: Option<f64>,
    /// `−4π − (A/2)·min R`
    pub bound: f64,
    pub tol_rate: Option<f64>,
}

impl NeckSample {
    pub fn ok(&self) -> bool {
        match (self.rate, self.tol_rate) {
            (Some(r), Some(tol)) => r <= self.bound + tol,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeckSeries {
    pub samples: Vec<NeckSample>,
    /// First snapshot time at which the neck radius fell below the cell
    /// arclength; later snapshots are not tracked.
    pub unresolved_from: Option<f64>,
    pub strictly_decreasing: bool,
    /// Pinch time when the trajectory ended in a neckpinch.
    pub pinch_time: Option<f64>,
}

impl NeckSeries {
    pub fn violations(&self) -> usize {
        self.samples.iter().filter(|s| !s.ok()).count()
    }

    /// Smallest `bound + tol_rate − rate` over pairs.
    pub fn worst_slack(&self) -> Option<f64> {
        self.samples
            .iter()
            .filter_map(|s| Some(s.bound + s.tol_rate? - s.rate?))
            .reduce(f64::min)
    }
}

/// Area of the stable neck sphere along a trajectory.
///
/// Snapshots after the neck is no longer resolved as a critical sphere fall
/// back to the deepest interior cell minimum. Tracking stops once the neck
/// radius drops below the local cell arclength `φΔx`: past that point the
/// difference stencils no longer see the neck, and the recorded area and
/// its rate are discretisation artefacts.
pub fn neck_area_tracker(trajectory: &FlowTrajectory, rate_rel: f64) -> Result<NeckSeries> {
    if stable_neck(&trajectory.initial().profile).is_none() {
        return Err(LabError::NotApplicable(
            "initial profile has no stable neck".into(),
        ));
    }
    let mut samples = Vec::new();
    let mut unresolved_from = None;
    for st in &trajectory.states {
        let p = &st.profile;
        let (x, area) = match stable_neck(p) {
            Some(c) => (c.slice.x, c.slice.area),
            None => match p.psi_min_interior() {
                Some((i, v)) => (p.x_centers()[i], 4.0 * PI * v * v),
                None => break,
            },
        };
        let cell = ((x / p.dx()) as usize).min(p.n_cells() - 1);
        let spacing = p.phi()[cell] * p.dx();
        if (area / (4.0 * PI)).sqrt() < spacing {
            unresolved_from = Some(st.time());
            break;
        }
        samples.push(NeckSample {
            t: st.time(),
            x,
            area,
            min_r: st.min_r,
            rate: None,
            bound: -4.0 * PI - 0.5 * area * st.min_r,
            tol_rate: None,
        });
    }
    let ts: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let areas: Vec<f64> = samples.iter().map(|s| s.area).collect();
    let errs = step_errors(&ts, &areas);
    for k in 0..samples.len().saturating_sub(1) {
        let h = ts[k + 1] - ts[k];
        let s = &mut samples[k];
        s.rate = Some((areas[k + 1] - areas[k]) / h);
        s.tol_rate = Some(rate_rel * s.bound.abs() + errs[k]);
    }
    let strictly_decreasing = areas.windows(2).all(|w| w[1] < w[0]);
    Ok(NeckSeries {
        samples,
        unresolved_from,
        strictly_decreasing,
        pinch_time: match trajectory.termination {
            crate::flow::Termination::Pinched { t, .. } => Some(t),
            _ => None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_profile, DumbbellShape, ProfileKind};

    fn round(r: f64, n: usize) -> ProfileGrid {
        build_profile(&ProfileKind::Round { radius: r }, n).unwrap()
    }

    fn dumbbell(neck: f64, n: usize) -> ProfileGrid {
        build_profile(
            &ProfileKind::Dumbbell {
                neck,
                lobe: 1.0,
                shape: DumbbellShape::default(),
            },
            n,
        )
        .unwrap()
    }

    #[test]
    fn round_width_sits_on_the_equator() {
        for r in [0.5, 1.0, 2.0] {
            let (w, x) = symmetric_width(&round(r, 256));
            assert!((w - 4.0 * PI * r * r).abs() < 1e-10 * r * r, "{w}");
            assert!((x - 0.5).abs() < 1e-8);
        }
    }

    #[test]
    fn dumbbell_width_and_extrema() {
        let g = dumbbell(0.2, 512);
        let (w, x) = symmetric_width(&g);
        assert!((w - 4.0 * PI).abs() < 1e-4);
        assert!(x < 0.5, "tie goes to the smaller slice");
        let crit = critical_spheres(&g);
        assert_eq!(crit.len(), 3);
        let neck = &crit[1];
        assert!((neck.slice.psi - 0.2).abs() < 1e-6);
        assert_eq!(neck.index(), 0);
        for lobe in [&crit[0], &crit[2]] {
            assert!((lobe.slice.psi - 1.0).abs() < 1e-6);
            assert!(lobe.index() >= 1);
            assert!(lobe.slice.is_minimal);
        }
    }

    #[test]
    fn round_has_one_critical_sphere() {
        let crit = critical_spheres(&round(1.0, 128));
        assert_eq!(crit.len(), 1);
        assert!((crit[0].slice.x - 0.5).abs() < 1e-8);
        assert_eq!(crit[0].index(), 1);
        assert!(stable_neck(&round(1.0, 128)).is_none());
    }

    #[test]
    fn variation_closed_forms() {
        let g = round(1.0, 256);
        let eq = first_variation_check(&g, 0.5).unwrap();
        assert!((eq.rate_flow + 16.0 * PI).abs() < 1e-6);
        assert!(eq.residual.abs() < 1e-6);
        assert!(eq.gauss_bonnet_residual.unwrap().abs() < 1e-6);
        let lat = first_variation_check(&g, 0.25).unwrap();
        assert!((lat.rate_flow + 8.0 * PI).abs() < 1e-6, "{}", lat.rate_flow);
        assert!(lat.residual.abs() < 1e-6);
        assert!(lat.rate_gauss_bonnet.is_none());
        assert!(first_variation_check(&g, 1.0).is_err());
    }

    #[test]
    fn cylinder_slice_rate() {
        let rho = 0.3;
        let slice = SphereData::from_jet(
            0.5,
            Jet {
                psi: rho,
                psi_s: 0.0,
                psi_ss: 0.0,
            },
            1e-9,
        );
        let (dpsi, _) = rhs_point(slice.jet(), 1.0);
        let v = VariationCheck::build(0.5, &slice, dpsi);
        assert!((v.rate_flow + 8.0 * PI).abs() < 1e-12);
        assert!((v.rate_curvature + 8.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn step_error_vanishes_on_linear_data() {
        let t = [0.0, 0.1, 0.3, 0.35];
        let v: Vec<f64> = t.iter().map(|x| 2.0 - 5.0 * x).collect();
        assert!(step_errors(&t, &v).iter().all(|e| e.abs() < 1e-12));
        let q: Vec<f64> = t.iter().map(|x| x * x).collect();
        let e = step_errors(&t, &q);
        assert!((e[0] - 0.1).abs() < 1e-12, "{e:?}");
    }
}
