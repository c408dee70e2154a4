//! Cell-centred grids for rotationally symmetric metrics on S³.
//!
//! A metric `g = φ(x)² dx² + ψ(x)² g_{S²}` on `x ∈ [0, 1]` is sampled at the
//! cell centres `x_i = (i + ½)/n`. The poles `x = 0, 1` are faces, never
//! samples, so `ψ = 0` is never evaluated. Derivatives use two ghost cells on
//! each side with `ψ` odd and `φ` even across each pole.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Smallest grid accepted by [`build_profile`].
pub const MIN_CELLS: usize = 32;

/// Pole slope check: `|∂_sψ − 1| ≤ POLE_SLOPE_FACTOR · Δx` at both poles.
pub const POLE_SLOPE_FACTOR: f64 = 25.0;

/// Degenerate-profile floor relative to `max ψ`.
pub const PSI_FLOOR_REL: f64 = 1e-8;

/// Discretized warped-product metric at one flow time.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileGrid {
    x_centers: Vec<f64>,
    psi: Vec<f64>,
    phi: Vec<f64>,
    time: f64,
}

/// Point values of `ψ` and its first two arclength derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub psi: f64,
    pub psi_s: f64,
    pub psi_ss: f64,
}

/// Per-cell jets of a profile.
#[derive(Debug, Clone)]
pub struct Jets {
    pub psi: Vec<f64>,
    pub psi_s: Vec<f64>,
    pub psi_ss: Vec<f64>,
}

impl Jets {
    pub fn at(&self, i: usize) -> Jet {
        Jet {
            psi: self.psi[i],
            psi_s: self.psi_s[i],
            psi_ss: self.psi_ss[i],
        }
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }
}

impl ProfileGrid {
    /// Validated constructor: positivity, finiteness and pole regularity.
    pub fn new(psi: Vec<f64>, phi: Vec<f64>, time: f64) -> Result<Self> {
        let grid = Self::from_parts(psi, phi, time)?;
        grid.check_poles()?;
        Ok(grid)
    }

    /// Constructor used for evolved states: checks positivity only.
    pub(crate) fn from_parts(psi: Vec<f64>, phi: Vec<f64>, time: f64) -> Result<Self> {
        let n = psi.len();
        if n < MIN_CELLS {
            return Err(LabError::InvalidProfile(format!(
                "need at least {MIN_CELLS} cells, got {n}"
            )));
        }
        if phi.len() != n {
            return Err(LabError::InvalidProfile(format!(
                "psi has {n} samples but phi has {}",
                phi.len()
            )));
        }
        if !time.is_finite() {
            return Err(LabError::InvalidProfile("non-finite time".into()));
        }
        for (i, (&p, &f)) in psi.iter().zip(&phi).enumerate() {
            if !(p.is_finite() && p > 0.0) {
                return Err(LabError::InvalidProfile(format!("psi[{i}] = {p} is not positive")));
            }
            if !(f.is_finite() && f > 0.0) {
                return Err(LabError::InvalidProfile(format!("phi[{i}] = {f} is not positive")));
            }
        }
        let dx = 1.0 / n as f64;
        let x_centers = (0..n).map(|i| (i as f64 + 0.5) * dx).collect();
        Ok(Self {
            x_centers,
            psi,
            phi,
            time,
        })
    }

    fn check_poles(&self) -> Result<()> {
        let tol = POLE_SLOPE_FACTOR * self.dx();
        let (left, right) = self.pole_slopes();
        if (left - 1.0).abs() > tol || (right - 1.0).abs() > tol {
            return Err(LabError::InvalidProfile(format!(
                "pole slopes {left:.4} / {right:.4} differ from 1 by more than {tol:.3e}"
            )));
        }
        Ok(())
    }

    /// One-sided arclength slopes `ψ/s` of the first and last cells, measured
    /// from the nearest pole. Both tend to 1 on regular profiles.
    pub fn pole_slopes(&self) -> (f64, f64) {
        let n = self.n_cells();
        let half = 0.5 * self.dx();
        (
            self.psi[0] / (self.phi[0] * half),
            self.psi[n - 1] / (self.phi[n - 1] * half),
        )
    }

    pub fn n_cells(&self) -> usize {
        self.psi.len()
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.n_cells() as f64
    }

    pub fn x_centers(&self) -> &[f64] {
        &self.x_centers
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Total pole-to-pole arclength `Σ φ_i Δx`.
    pub fn total_arclength(&self) -> f64 {
        self.phi.iter().sum::<f64>() * self.dx()
    }

    pub fn max_psi(&self) -> f64 {
        self.psi.iter().copied().fold(f64::MIN, f64::max)
    }

    /// `ψ_floor = 10⁻⁸ · max ψ`.
    pub fn psi_floor(&self) -> f64 {
        PSI_FLOOR_REL * self.max_psi()
    }

    /// Smallest cell spacing in arclength, `min φ_i Δx`.
    pub fn min_spacing(&self) -> f64 {
        self.phi.iter().copied().fold(f64::MAX, f64::min) * self.dx()
    }

    /// Deepest interior local minimum of `ψ`: the minimum over cells lying
    /// between the first and last local maxima. `None` when `ψ` has a single
    /// maximum (no neck).
    pub fn psi_min_interior(&self) -> Option<(usize, f64)> {
        let n = self.n_cells();
        let is_max = |i: usize| {
            let l = if i == 0 { f64::MIN } else { self.psi[i - 1] };
            let r = if i + 1 == n { f64::MIN } else { self.psi[i + 1] };
            self.psi[i] > l && self.psi[i] >= r
        };
        let first = (0..n).find(|&i| is_max(i))?;
        let last = (0..n).rev().find(|&i| is_max(i))?;
        if last <= first + 1 {
            return None;
        }
        (first + 1..last)
            .map(|i| (i, self.psi[i]))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .filter(|&(_, v)| v < self.psi[first].min(self.psi[last]))
    }

    /// Returns a copy scaled by `c`: `ψ ↦ cψ`, `φ ↦ cφ`, `t ↦ c²t`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(LabError::InvalidParameter(format!("scale {c} must be positive")));
        }
        Self::from_parts(
            self.psi.iter().map(|p| c * p).collect(),
            self.phi.iter().map(|f| c * f).collect(),
            c * c * self.time,
        )
    }

    /// Fourth-order jets at every cell, see [`psi_derivatives`].
    pub fn jets(&self) -> Jets {
        let dx = self.dx();
        let (px, pxx) = psi_derivatives(&self.psi, dx);
        let (fx, _) = even_derivatives(&self.phi, dx);
        let mut out = Jets {
            psi: self.psi.clone(),
            psi_s: Vec::with_capacity(self.n_cells()),
            psi_ss: Vec::with_capacity(self.n_cells()),
        };
        for i in 0..self.n_cells() {
            let phi = self.phi[i];
            out.psi_s.push(px[i] / phi);
            out.psi_ss.push((pxx[i] - px[i] * fx[i] / phi) / (phi * phi));
        }
        out
    }

    /// Slices must lie between the first and last cell centres.
    pub(crate) fn check_slice(&self, x: f64) -> Result<()> {
        let lo = self.x_centers[0];
        let hi = self.x_centers[self.n_cells() - 1];
        if !(x >= lo && x <= hi) {
            return Err(LabError::SliceOutOfRange { x, lo, hi });
        }
        Ok(())
    }

    /// Writes the profile snapshot file.
    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.snapshot_string())?;
        Ok(())
    }

    /// Snapshot text: `# n_cells = …`, `# time = …`, then `x,psi,phi` rows
    /// with 17 significant digits.
    pub fn snapshot_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# n_cells = {}", self.n_cells());
        let _ = writeln!(s, "# time = {:.16e}", self.time);
        s.push_str("x,psi,phi\n");
        for i in 0..self.n_cells() {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e}",
                self.x_centers[i], self.psi[i], self.phi[i]
            );
        }
        s
    }

    pub fn read_snapshot(path: &Path) -> Result<Self> {
        Self::parse_snapshot(&std::fs::read_to_string(path)?)
    }

    pub fn parse_snapshot(text: &str) -> Result<Self> {
        let mut n_cells = None;
        let mut time = None;
        let mut psi = Vec::new();
        let mut phi = Vec::new();
        let mut seen_columns = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let err = |message: String| LabError::Parse {
                line: lineno + 1,
                message,
            };
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let (key, value) = rest
                    .split_once('=')
                    .ok_or_else(|| err(format!("malformed header `{line}`")))?;
                match key.trim() {
                    "n_cells" => {
                        n_cells = Some(
                            value
                                .trim()
                                .parse::<usize>()
                                .map_err(|e| err(e.to_string()))?,
                        )
                    }
                    "time" => {
                        time = Some(value.trim().parse::<f64>().map_err(|e| err(e.to_string()))?)
                    }
                    other => return Err(err(format!("unknown header key `{other}`"))),
                }
                continue;
            }
            if !seen_columns {
                if line != "x,psi,phi" {
                    return Err(err(format!("expected `x,psi,phi`, found `{line}`")));
                }
                seen_columns = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(err(format!("expected 3 fields, found {}", fields.len())));
            }
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| err(e.to_string()));
            let _x = parse(fields[0])?;
            psi.push(parse(fields[1])?);
            phi.push(parse(fields[2])?);
        }
        let n = n_cells.ok_or_else(|| LabError::Parse {
            line: 1,
            message: "missing n_cells header".into(),
        })?;
        if n != psi.len() {
            return Err(LabError::Parse {
                line: text.lines().count(),
                message: format!("header says {n} cells, found {} rows", psi.len()),
            });
        }
        Self::from_parts(psi, phi, time.unwrap_or(0.0))
    }
}

pub(crate) fn ghosted(v: &[f64], parity: f64) -> Vec<f64> {
    let n = v.len();
    let mut g = Vec::with_capacity(n + 4);
    g.push(parity * v[1]);
    g.push(parity * v[0]);
    g.extend_from_slice(v);
    g.push(parity * v[n - 1]);
    g.push(parity * v[n - 2]);
    g
}

#[inline]
pub(crate) fn d1(f: &[f64], k: usize, h: f64) -> f64 {
    (f[k - 2] - 8.0 * f[k - 1] + 8.0 * f[k + 1] - f[k + 2]) / (12.0 * h)
}

#[inline]
pub(crate) fn d2(f: &[f64], k: usize, h: f64) -> f64 {
    (-f[k - 2] + 16.0 * f[k - 1] - 30.0 * f[k] + 16.0 * f[k + 1] - f[k + 2]) / (12.0 * h * h)
}

/// First and second `x` derivatives of an even-parity field.
pub(crate) fn even_derivatives(v: &[f64], dx: f64) -> (Vec<f64>, Vec<f64>) {
    let g = ghosted(v, 1.0);
    (0..v.len()).map(|i| (d1(&g, i + 2, dx), d2(&g, i + 2, dx))).unzip()
}

/// First and second `x` derivatives of `ψ`.
///
/// `ψ` is split as `v·σ` with `σ = sin(πx)/π`, which is odd about both
/// poles, and the even factor `v` is differenced. Near a pole the stencil
/// error of `v_x` is then `O(h⁵)` instead of the `O(h⁴)` of `ψ_x`, which
/// keeps `(1 − ψ_s²)/ψ²` fourth-order accurate in the cells next to the
/// poles. Round profiles have constant `v`.
pub(crate) fn psi_derivatives(psi: &[f64], dx: f64) -> (Vec<f64>, Vec<f64>) {
    let n = psi.len();
    let sig = sigma_table(n, dx);
    let v: Vec<f64> = psi.iter().zip(sig.iter()).map(|(p, s)| p / s.0).collect();
    let (vx, vxx) = even_derivatives(&v, dx);
    (0..n)
        .map(|i| {
            let (s, s1, s2) = sig[i];
            (
                vx[i] * s + v[i] * s1,
                vxx[i] * s + 2.0 * vx[i] * s1 + v[i] * s2,
            )
        })
        .unzip()
}

type SigmaTable = Rc<Vec<(f64, f64, f64)>>;

thread_local! {
    static SIGMA: RefCell<Option<(usize, u64, SigmaTable)>> = const { RefCell::new(None) };
}

/// `(σ, σ', σ'')` at the cell centres, cached per thread for the last grid.
fn sigma_table(n: usize, dx: f64) -> SigmaTable {
    SIGMA.with(|cell| {
        let mut slot = cell.borrow_mut();
        if let Some((m, bits, t)) = slot.as_ref() {
            if *m == n && *bits == dx.to_bits() {
                return t.clone();
            }
        }
        let table: SigmaTable = Rc::new(
            (0..n)
                .map(|i| {
                    let (s, c) = (PI * (i as f64 + 0.5) * dx).sin_cos();
                    (s / PI, c, -PI * s)
                })
                .collect(),
        );
        *slot = Some((n, dx.to_bits(), table.clone()));
        table
    })
}

/// Quintic Lagrange interpolation of cell-centred `values` at `x`.
///
/// The six-point stencil is clamped to the grid, so `x` must lie within
/// `[x_0, x_{n−1}]`.
pub(crate) fn interpolate(values: &[f64], x: f64) -> f64 {
    let n = values.len();
    let u = x * n as f64 - 0.5;
    let i = (u.floor() as isize).clamp(0, n as isize - 2) as usize;
    let start = i.saturating_sub(2).min(n - 6);
    let mut acc = 0.0;
    for a in 0..6 {
        let xa = (start + a) as f64;
        let mut w = 1.0;
        for b in 0..6 {
            if a != b {
                let xb = (start + b) as f64;
                w *= (u - xb) / (xa - xb);
            }
        }
        acc += w * values[start + a];
    }
    acc
}

/// Lobe family for [`ProfileKind::Dumbbell`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DumbbellShape {
    /// `ψ = sin u · (ρ_N + c cos² u)`, see [`Dumbbell`].
    #[default]
    Peanut,
}

/// Initial-profile families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    /// Round sphere of radius `radius`.
    Round { radius: f64 },
    /// Two round lobes joined by a neck.
    Dumbbell {
        neck: f64,
        lobe: f64,
        #[serde(default)]
        shape: DumbbellShape,
    },
    /// Explicit cell samples.
    Samples { psi: Vec<f64>, phi: Vec<f64> },
}

/// Builds a validated profile of the given family on `n_cells` cells.
pub fn build_profile(kind: &ProfileKind, n_cells: usize) -> Result<ProfileGrid> {
    if n_cells < MIN_CELLS {
        return Err(LabError::InvalidParameter(format!(
            "n_cells = {n_cells} is below the minimum {MIN_CELLS}"
        )));
    }
    match kind {
        ProfileKind::Round { radius } => {
            positive("radius", *radius)?;
            let r = *radius;
            sample_arclength(n_cells, PI * r, |s| r * (s / r).sin())
        }
        ProfileKind::Dumbbell { neck, lobe, shape } => {
            let d = Dumbbell::new(*neck, *lobe, *shape)?;
            sample_arclength(n_cells, d.total_length(), |s| d.psi(s))
        }
        ProfileKind::Samples { psi, phi } => {
            if psi.len() != n_cells || phi.len() != n_cells {
                return Err(LabError::InvalidProfile(format!(
                    "sample vectors have {} / {} entries, expected {n_cells}",
                    psi.len(),
                    phi.len()
                )));
            }
            ProfileGrid::new(psi.clone(), phi.clone(), 0.0)
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(LabError::InvalidParameter(format!("{name} = {v} must be positive")))
    }
}

/// Samples `ψ(s)` on an arclength-uniform grid (`φ ≡ S`).
pub fn sample_arclength(
    n_cells: usize,
    total_length: f64,
    psi: impl Fn(f64) -> f64,
) -> Result<ProfileGrid> {
    let dx = 1.0 / n_cells as f64;
    let samples = (0..n_cells)
        .map(|i| psi((i as f64 + 0.5) * dx * total_length))
        .collect();
    ProfileGrid::new(samples, vec![total_length; n_cells], 0.0)
}

/// Peanut-shaped dumbbell
///
/// ```text
/// ψ(s) = sin u · (ρ_N + c cos² u),   u = π s / S,   S = π (ρ_N + c)
/// ```
///
/// `S` makes `ψ_s = 1` at both poles. The neck sits at `u = π/2` with
/// `ψ = ρ_N` and `ψ_ss > 0`; the two lobe maxima sit at
/// `cos² u = (2c − ρ_N)/(3c)` with value `(2/3)(c + ρ_N)^{3/2}/√(3c)`, and
/// `c` is chosen so that this equals `ρ_L`.
#[derive(Debug, Clone, Copy)]
pub struct Dumbbell {
    neck: f64,
    c: f64,
}

impl Dumbbell {
    pub fn new(neck: f64, lobe: f64, shape: DumbbellShape) -> Result<Self> {
        let DumbbellShape::Peanut = shape;
        positive("neck radius", neck)?;
        positive("lobe radius", lobe)?;
        if neck >= lobe {
            return Err(LabError::InvalidParameter(format!(
                "neck radius {neck} must be below lobe radius {lobe}"
            )));
        }
        // lobe_max increases from ρ_N at c = ρ_N/2 without bound.
        let (mut lo, mut hi) = (0.5 * neck, neck.max(1.0));
        while lobe_max(neck, hi) < lobe {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if lobe_max(neck, mid) < lobe {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-16 * hi {
                break;
            }
        }
        Ok(Self {
            neck,
            c: 0.5 * (lo + hi),
        })
    }

    pub fn total_length(&self) -> f64 {
        PI * (self.neck + self.c)
    }

    pub fn neck_center(&self) -> f64 {
        0.5 * self.total_length()
    }

    /// Arclength positions of the two lobe maxima.
    pub fn lobe_centers(&self) -> (f64, f64) {
        let u = ((2.0 * self.c - self.neck) / (3.0 * self.c)).sqrt().acos();
        let scale = self.total_length() / PI;
        (u * scale, (PI - u) * scale)
    }

    pub fn psi(&self, s: f64) -> f64 {
        let u = PI * s / self.total_length();
        let (sn, cs) = u.sin_cos();
        sn * (self.neck + self.c * cs * cs)
    }
}

fn lobe_max(neck: f64, c: f64) -> f64 {
    2.0 / 3.0 * (c + neck).powf(1.5) / (3.0 * c).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_profile_values() {
        let g = build_profile(&ProfileKind::Round { radius: 1.0 }, 256).unwrap();
        assert!((interpolate(g.psi(), 0.5) - 1.0).abs() < 1e-12);
        let g2 = build_profile(&ProfileKind::Round { radius: 2.0 }, 256).unwrap();
        assert!((g2.total_arclength() - 2.0 * PI).abs() < 1e-10);
        assert!(g2.phi().iter().all(|&f| (f - 2.0 * PI).abs() < 1e-14));
    }

    #[test]
    fn pole_slopes_tend_to_one() {
        let g = build_profile(&ProfileKind::Round { radius: 1.0 }, 128).unwrap();
        let (l, r) = g.pole_slopes();
        assert!((l - 1.0).abs() < g.dx());
        assert!((r - 1.0).abs() < g.dx());
    }

    #[test]
    fn dumbbell_extrema_match_closed_form() {
        let d = Dumbbell::new(0.2, 1.0, DumbbellShape::default()).unwrap();
        assert!((d.psi(d.neck_center()) - 0.2).abs() < 1e-15);
        let (l, r) = d.lobe_centers();
        assert!((d.psi(l) - 1.0).abs() < 1e-14);
        assert!((d.psi(r) - 1.0).abs() < 1e-14);
        let fine: Vec<f64> = (0..=200_000)
            .map(|k| d.psi(d.total_length() * k as f64 / 200_000.0))
            .collect();
        let max = fine.iter().copied().fold(f64::MIN, f64::max);
        assert!((max - 1.0).abs() < 1e-9);
        let g = build_profile(
            &ProfileKind::Dumbbell {
                neck: 0.2,
                lobe: 1.0,
                shape: DumbbellShape::default(),
            },
            512,
        )
        .unwrap();
        assert!(g.max_psi() <= 1.0 + 1e-12);
        let (_, neck) = g.psi_min_interior().unwrap();
        // grid samples straddle the neck centre
        assert!((0.2..0.2 + 1e-4).contains(&neck));
    }

    #[test]
    fn dumbbell_has_three_critical_points() {
        let d = Dumbbell::new(0.15, 1.0, DumbbellShape::default()).unwrap();
        let n = 200_000;
        let h = d.total_length() / n as f64;
        let slope: Vec<f64> = (0..n).map(|k| d.psi((k + 1) as f64 * h) - d.psi(k as f64 * h)).collect();
        let turns = slope.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count();
        assert_eq!(turns, 3);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(build_profile(&ProfileKind::Round { radius: -1.0 }, 64).is_err());
        assert!(build_profile(&ProfileKind::Round { radius: 1.0 }, 16).is_err());
        assert!(Dumbbell::new(1.0, 0.5, DumbbellShape::default()).is_err());
        // samples without pole decay
        let psi = vec![1.0; 64];
        let phi = vec![1.0; 64];
        assert!(build_profile(&ProfileKind::Samples { psi, phi }, 64).is_err());
        let mut psi: Vec<f64> = (0..64).map(|i| ((i as f64 + 0.5) / 64.0 * PI).sin()).collect();
        psi[10] = -0.1;
        assert!(build_profile(&ProfileKind::Samples { psi, phi: vec![PI; 64] }, 64).is_err());
    }

    #[test]
    fn samples_roundtrip_through_snapshot_text() {
        let g = build_profile(&ProfileKind::Round { radius: 1.3 }, 64).unwrap();
        let back = ProfileGrid::parse_snapshot(&g.snapshot_string()).unwrap();
        assert_eq!(g, back);
        let bad = "# n_cells = 64\nx,psi\n";
        match ProfileGrid::parse_snapshot(bad) {
            Err(LabError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn interpolation_is_sixth_order_on_smooth_data() {
        let n = 256;
        let v: Vec<f64> = (0..n).map(|i| ((i as f64 + 0.5) / n as f64 * PI).sin()).collect();
        let err = (interpolate(&v, 0.5) - 1.0).abs();
        assert!(err < 1e-12, "{err}");
    }
}
