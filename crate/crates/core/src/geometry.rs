//! Curvature and distance-sphere geometry of warped-product metrics.
//!
//! For `g = ds² + ψ(s)² g_{S²}` the sectional curvatures are
//! `K_mix = −ψ_ss/ψ` (planes containing `∂_s`) and `K_sph = (1 − ψ_s²)/ψ²`
//! (planes tangent to the slice). Then `Ric(∂_s, ∂_s) = 2 K_mix`, each
//! tangential Ricci eigenvalue is `K_mix + K_sph`, and `R = 4 K_mix + 2 K_sph`.
//! The unit round S³ has `Ric = 2`, `R = 6`.

use std::f64::consts::PI;

use crate::error::{LabError, Result};
use crate::grid::{interpolate, Jet, ProfileGrid};

/// Relative threshold on `|ψ_s|` for the minimal-slice flag:
/// `tol_minimal = MINIMAL_REL · max ψ / S`.
pub const MINIMAL_REL: f64 = 1e-6;

/// An eigenvalue of `−L_Σ` is counted as negative when it lies below
/// `−SPECTRUM_ZERO_TOL · 2/ψ²` (2/ψ² is the first nonzero Laplace eigenvalue).
pub const SPECTRUM_ZERO_TOL: f64 = 1e-6;

/// Pointwise curvatures on the grid.
#[derive(Debug, Clone)]
pub struct CurvatureField {
    pub k_mix: Vec<f64>,
    pub k_sph: Vec<f64>,
    pub scalar: Vec<f64>,
    pub ric_nn: Vec<f64>,
}

/// Curvatures at a single point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointCurvature {
    pub k_mix: f64,
    pub k_sph: f64,
    pub scalar: f64,
    pub ric_nn: f64,
}

impl PointCurvature {
    /// Ricci curvature in any direction tangent to the slice.
    pub fn ric_tangential(&self) -> f64 {
        self.k_mix + self.k_sph
    }
}

/// Curvature from a jet, with the mixed curvature multiplied by `kmix_sign`
/// (always `1.0` outside mutation tests).
pub(crate) fn curvature_point_signed(jet: Jet, kmix_sign: f64) -> PointCurvature {
    let k_mix = -kmix_sign * jet.psi_ss / jet.psi;
    let k_sph = (1.0 - jet.psi_s * jet.psi_s) / (jet.psi * jet.psi);
    PointCurvature {
        k_mix,
        k_sph,
        scalar: 4.0 * k_mix + 2.0 * k_sph,
        ric_nn: 2.0 * k_mix,
    }
}

pub fn curvature_point(jet: Jet) -> PointCurvature {
    curvature_point_signed(jet, 1.0)
}

fn check_floor(profile: &ProfileGrid) -> Result<()> {
    let floor = profile.psi_floor();
    match profile.psi().iter().position(|&p| p < floor) {
        Some(cell) => Err(LabError::DegenerateProfile {
            cell,
            psi: profile.psi()[cell],
            floor,
        }),
        None => Ok(()),
    }
}

pub fn curvature(profile: &ProfileGrid) -> Result<CurvatureField> {
    curvature_signed(profile, 1.0)
}

pub(crate) fn curvature_signed(profile: &ProfileGrid, kmix_sign: f64) -> Result<CurvatureField> {
    check_floor(profile)?;
    let jets = profile.jets();
    let n = jets.len();
    let mut field = CurvatureField {
        k_mix: Vec::with_capacity(n),
        k_sph: Vec::with_capacity(n),
        scalar: Vec::with_capacity(n),
        ric_nn: Vec::with_capacity(n),
    };
    for i in 0..n {
        let c = curvature_point_signed(jets.at(i), kmix_sign);
        field.k_mix.push(c.k_mix);
        field.k_sph.push(c.k_sph);
        field.scalar.push(c.scalar);
        field.ric_nn.push(c.ric_nn);
    }
    Ok(field)
}

/// `min R` over cells.
pub fn min_scalar(profile: &ProfileGrid) -> Result<f64> {
    Ok(curvature(profile)?
        .scalar
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}

/// Jet at an arbitrary interior slice, by quintic interpolation of cell jets.
/// Exactly the cell jet when `x` is a cell centre.
pub fn jet_at(profile: &ProfileGrid, x: f64) -> Result<Jet> {
    profile.check_slice(x)?;
    let jets = profile.jets();
    let n = profile.n_cells();
    let u = x * n as f64 - 0.5;
    if (u - u.round()).abs() < 1e-12 {
        return Ok(jets.at(u.round() as usize));
    }
    Ok(Jet {
        psi: interpolate(&jets.psi, x),
        psi_s: interpolate(&jets.psi_s, x),
        psi_ss: interpolate(&jets.psi_ss, x),
    })
}

/// The `tol_minimal` threshold of a profile.
pub fn minimal_tolerance(profile: &ProfileGrid) -> f64 {
    MINIMAL_REL * profile.max_psi() / profile.total_arclength()
}

/// Geometry of one distance sphere `{x} × S²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereData {
    pub x: f64,
    pub psi: f64,
    pub psi_s: f64,
    pub psi_ss: f64,
    /// `4πψ²`
    pub area: f64,
    /// `2ψ_s/ψ`
    pub mean_curvature: f64,
    /// `|A|² = 2(ψ_s/ψ)²`
    pub second_fund_sq: f64,
    pub ric_nn: f64,
    pub scalar: f64,
    pub is_minimal: bool,
    /// Threshold on `|ψ_s|` used for `is_minimal`.
    pub tol_minimal: f64,
}

impl SphereData {
    /// Slice data from a jet, with an explicit minimality tolerance on `|ψ_s|`.
    pub fn from_jet(x: f64, jet: Jet, tol_minimal: f64) -> Self {
        let c = curvature_point(jet);
        let ratio = jet.psi_s / jet.psi;
        Self {
            x,
            psi: jet.psi,
            psi_s: jet.psi_s,
            psi_ss: jet.psi_ss,
            area: 4.0 * PI * jet.psi * jet.psi,
            mean_curvature: 2.0 * ratio,
            second_fund_sq: 2.0 * ratio * ratio,
            ric_nn: c.ric_nn,
            scalar: c.scalar,
            is_minimal: jet.psi_s.abs() <= tol_minimal,
            tol_minimal,
        }
    }

    pub fn jet(&self) -> Jet {
        Jet {
            psi: self.psi,
            psi_s: self.psi_s,
            psi_ss: self.psi_ss,
        }
    }

    /// Stability potential `|A|² + Ric(n, n)`.
    pub fn potential(&self) -> f64 {
        self.second_fund_sq + self.ric_nn
    }

    /// `∫_Σ 1·L_Σ 1 = area · (|A|² + Ric(n, n))`.
    pub fn integral_l1(&self) -> f64 {
        self.area * self.potential()
    }

    /// `ψ ψ_ss`, the scale-free quantity governing the index.
    pub fn psi_psi_ss(&self) -> f64 {
        self.psi * self.psi_ss
    }
}

pub fn sphere_data(profile: &ProfileGrid, x: f64) -> Result<SphereData> {
    let jet = jet_at(profile, x)?;
    Ok(SphereData::from_jet(x, jet, minimal_tolerance(profile)))
}

/// One eigenvalue of `−L_Σ` on a round slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub l: u32,
    pub mu: f64,
    pub multiplicity: u32,
}

/// Spectrum of the stability operator `L_Σ = Δ_Σ + |A|² + Ric(n, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilitySpectrum {
    pub modes: Vec<Mode>,
    /// Negative eigenvalues counted with multiplicity.
    pub index: u32,
    /// `∫_Σ 1·L_Σ 1` in closed form.
    pub integral_l1: f64,
}

impl StabilitySpectrum {
    /// Spectrum on a minimal slice, `mu_l = l(l+1)/ψ² − (|A|² + Ric(n,n))`.
    pub fn of_slice(slice: &SphereData, l_max: u32) -> Result<Self> {
        if !slice.is_minimal {
            return Err(LabError::NotMinimal {
                x: slice.x,
                slope: slice.psi_s.abs(),
                tol: slice.tol_minimal,
            });
        }
        Ok(Self::of_slice_unchecked(slice, l_max))
    }

    pub(crate) fn of_slice_unchecked(slice: &SphereData, l_max: u32) -> Self {
        let v = slice.potential();
        let inv_r2 = 1.0 / (slice.psi * slice.psi);
        let zero = SPECTRUM_ZERO_TOL * 2.0 * inv_r2;
        let modes: Vec<Mode> = (0..=l_max)
            .map(|l| Mode {
                l,
                mu: (l * (l + 1)) as f64 * inv_r2 - v,
                multiplicity: 2 * l + 1,
            })
            .collect();
        let index = modes
            .iter()
            .filter(|m| m.mu < -zero)
            .map(|m| m.multiplicity)
            .sum();
        Self {
            modes,
            index,
            integral_l1: slice.integral_l1(),
        }
    }

    /// `∫ 1·L 1` recovered from the constant mode: `−mu_0 · area`.
    pub fn integral_l1_spectral(&self, area: f64) -> f64 {
        -self.modes[0].mu * area
    }
}

/// Spectrum of `−L_Σ` at a minimal slice of `profile`.
pub fn stability_spectrum(profile: &ProfileGrid, x: f64, l_max: u32) -> Result<StabilitySpectrum> {
    StabilitySpectrum::of_slice(&sphere_data(profile, x)?, l_max)
}
