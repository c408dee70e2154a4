use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{sphere_data, SphereData, StabilitySpectrum};
use crate::grid::ProfileGrid;

/// Relative tolerance on `∫1·L1 ≤ 8π` and on the rate bound.
///
/// On a minimal slice `∫1·L1 = −8πψψ_ss`, so slack `8π·tol` on the integral
/// is the same as slack `tol` on `ψψ_ss ≥ −1`, which is where the index
/// flips.
pub const HERSCH_TOL: f64 = 1e-6;

/// Modes computed for the index; `l ≥ 2` never contributes on a slice with
/// `ψψ_ss ≥ −3`.
const MODES: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HerschVerdict {
    pub x: f64,
    pub index: u32,
    /// `I = area · (|A|² + Ric(n, n))`
    pub integral_l1: f64,
    pub psi_psi_ss: f64,
    /// `dA/dt = −8π − I` on a minimal sphere.
    pub area_rate: f64,
    /// `index ≤ 1 ⇒ I ≤ 8π(1 + tol)`
    pub bound_holds: bool,
    /// `index ≤ 1 ⇒ dA/dt ≥ −16π − 8π·tol`
    pub rate_holds: bool,
    /// `index ≤ 1`, `I ≤ 8π` and `ψψ_ss ≥ −1` agree, each with relative
    /// slack `tol` in its own scale.
    pub equivalent: bool,
    pub tol: f64,
}

impl HerschVerdict {
    pub fn ok(&self) -> bool {
        self.bound_holds && self.rate_holds && self.equivalent
    }

    /// Bound and rate are only claimed for spheres of index at most one.
    pub fn bound_applies(&self) -> bool {
        self.index <= 1
    }

    /// `8π(1 + tol) − I`; negative only when the bound is violated.
    pub fn margin(&self) -> f64 {
        8.0 * PI * (1.0 + self.tol) - self.integral_l1
    }

    /// `dA/dt + 16π + 8π·tol`.
    pub fn rate_margin(&self) -> f64 {
        self.area_rate + 16.0 * PI + 8.0 * PI * self.tol
    }
}

/// Checks the area bound on an explicit minimal slice.
pub fn hersch_slice_check(slice: &SphereData) -> Result<HerschVerdict> {
    hersch_slice_check_tol(slice, HERSCH_TOL)
}

pub fn hersch_slice_check_tol(slice: &SphereData, tol: f64) -> Result<HerschVerdict> {
    let spectrum = StabilitySpectrum::of_slice(slice, MODES)?;
    let i = slice.integral_l1();
    let rate = -8.0 * PI - i;
    let low_index = spectrum.index <= 1;
    let by_integral = i <= 8.0 * PI * (1.0 + tol);
    let by_profile = slice.psi_psi_ss() >= -1.0 - tol;
    Ok(HerschVerdict {
        x: slice.x,
        index: spectrum.index,
        integral_l1: i,
        psi_psi_ss: slice.psi_psi_ss(),
        area_rate: rate,
        bound_holds: !low_index || by_integral,
        rate_holds: !low_index || rate >= -16.0 * PI - 8.0 * PI * tol,
        equivalent: low_index == by_integral && by_integral == by_profile,
        tol,
    })
}

/// [`hersch_slice_check`] at the slice `x` of `profile`; refuses
/// non-minimal slices.
pub fn hersch_inequality_check(profile: &ProfileGrid, x: f64) -> Result<HerschVerdict> {
    hersch_slice_check(&sphere_data(profile, x)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_profile, Jet, ProfileKind};

    #[test]
    fn round_equator_saturates() {
        let g = build_profile(&ProfileKind::Round { radius: 1.0 }, 256).unwrap();
        let v = hersch_inequality_check(&g, 0.5).unwrap();
        assert_eq!(v.index, 1);
        assert!((v.integral_l1 - 8.0 * PI).abs() < 1e-6);
        assert!((v.area_rate + 16.0 * PI).abs() < 1e-6);
        assert!(v.ok());
        assert!(hersch_inequality_check(&g, 0.25).is_err());
    }

    #[test]
    fn stable_neck_and_high_index_slices() {
        let neck = SphereData::from_jet(0.5, Jet { psi: 0.2, psi_s: 0.0, psi_ss: 3.0 }, 1e-9);
        let v = hersch_slice_check(&neck).unwrap();
        assert_eq!(v.index, 0);
        assert!((v.integral_l1 + 8.0 * PI * 0.6).abs() < 1e-12);
        assert!((v.area_rate - (-8.0 * PI + 8.0 * PI * 0.6)).abs() < 1e-12);
        assert!(v.ok());

        let bad = SphereData::from_jet(0.5, Jet { psi: 1.0, psi_s: 0.0, psi_ss: -1.5 }, 1e-9);
        let v = hersch_slice_check(&bad).unwrap();
        assert!(v.index >= 2);
        assert!((v.integral_l1 - 12.0 * PI).abs() < 1e-12);
        assert!(v.bound_holds && v.equivalent);
    }
}
