//! Seeded test profiles: random smooth metrics, a perturbed round sphere
//! with prescribed `min R`, and the fixture fleet.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::min_scalar;
use crate::grid::{build_profile, sample_arclength, DumbbellShape, ProfileGrid, ProfileKind};

/// Number of random profiles in the fleet.
pub const RANDOM_COUNT: usize = 20;

/// Smooth random metric in closed form
///
/// ```text
/// ψ(x) = A sin(πx) · exp(sin²(πx) Σ_k a_k cos(kπx)),   φ(x) = S (1 + b cos 2πx)
/// ```
///
/// with `A = S(1 + b)/π` so that `ψ_s = 1` at both poles. Both functions
/// have the pole parities of a smooth metric, and `∫φ dx = S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomProfile {
    pub length: f64,
    pub lapse: f64,
    pub coeffs: Vec<f64>,
}

impl RandomProfile {
    pub fn sample(rng: &mut impl Rng) -> Self {
        let length = PI * rng.gen_range(0.7..1.5);
        let lapse = rng.gen_range(-0.2..0.2);
        let coeffs = (1..=4)
            .map(|k| rng.gen_range(-0.3..0.3) / k as f64)
            .collect();
        Self {
            length,
            lapse,
            coeffs,
        }
    }

    fn amplitude(&self) -> f64 {
        self.length * (1.0 + self.lapse) / PI
    }

    pub fn psi(&self, x: f64) -> f64 {
        let (s, _) = (PI * x).sin_cos();
        let series: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| a * ((k + 1) as f64 * PI * x).cos())
            .sum();
        self.amplitude() * s * (s * s * series).exp()
    }

    pub fn phi(&self, x: f64) -> f64 {
        self.length * (1.0 + self.lapse * (2.0 * PI * x).cos())
    }

    pub fn grid(&self, n_cells: usize) -> Result<ProfileGrid> {
        let dx = 1.0 / n_cells as f64;
        let xs = (0..n_cells).map(|i| (i as f64 + 0.5) * dx);
        ProfileGrid::new(
            xs.clone().map(|x| self.psi(x)).collect(),
            xs.map(|x| self.phi(x)).collect(),
            0.0,
        )
    }
}

/// `count` random profiles from `seed`.
pub fn random_profiles(seed: u64, count: usize) -> Vec<RandomProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| RandomProfile::sample(&mut rng)).collect()
}

const BUMP_WIDTH: f64 = 0.25;

/// Unit round sphere with an equatorial bulge,
/// `ψ(s) = sin s · exp(ε B(s))`, `B = exp(−cos²s/(2σ²)) − exp(−1/(2σ²))`.
/// `B` vanishes at the poles.
pub fn bulged_round(epsilon: f64, n_cells: usize) -> Result<ProfileGrid> {
    let q = 0.5 / (BUMP_WIDTH * BUMP_WIDTH);
    let floor = (-q).exp();
    sample_arclength(n_cells, PI, |s| {
        let c = s.cos();
        s.sin() * (epsilon * ((-q * c * c).exp() - floor)).exp()
    })
}

/// Bulged round profile whose grid `min R` equals `target < 6`, found by
/// bisection on the bulge amplitude.
pub fn perturbed_round(target: f64, n_cells: usize) -> Result<ProfileGrid> {
    if !(target < 6.0) {
        return Err(LabError::InvalidParameter(format!(
            "target min R {target} must be below the round value 6"
        )));
    }
    let f = |e: f64| -> Result<f64> { Ok(min_scalar(&bulged_round(e, n_cells)?)? - target) };
    let (mut lo, mut hi) = (0.0, 0.25);
    while f(hi)? > 0.0 {
        hi *= 2.0;
        if hi > 8.0 {
            return Err(LabError::InvalidParameter(format!(
                "min R = {target} is out of reach of the bulge family"
            )));
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    bulged_round(0.5 * (lo + hi), n_cells)
}

/// One named initial profile of the fleet.
#[derive(Debug, Clone)]
pub struct FleetMember {
    pub name: String,
    pub profile: ProfileGrid,
}

/// Round `r ∈ {0.5, 1, 2}`, dumbbells with necks 0.15 and 0.2, the
/// `min R = −1` perturbed round sphere and the seeded random profiles.
pub fn fleet(seed: u64, n_cells: usize) -> Result<Vec<FleetMember>> {
    let mut out = Vec::new();
    for r in [0.5, 1.0, 2.0] {
        out.push(FleetMember {
            name: format!("round({r})"),
            profile: build_profile(&ProfileKind::Round { radius: r }, n_cells)?,
        });
    }
    for neck in [0.15, 0.2] {
        out.push(FleetMember {
            name: format!("dumbbell({neck}, 1)"),
            profile: build_profile(
                &ProfileKind::Dumbbell {
                    neck,
                    lobe: 1.0,
                    shape: DumbbellShape::default(),
                },
                n_cells,
            )?,
        });
    }
    out.push(FleetMember {
        name: "perturbed_round(min R = -1)".into(),
        profile: perturbed_round(-1.0, n_cells)?,
    });
    for (k, rp) in random_profiles(seed, RANDOM_COUNT).iter().enumerate() {
        out.push(FleetMember {
            name: format!("random[{seed}:{k}]"),
            profile: rp.grid(n_cells)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_profiles_are_reproducible_and_valid() {
        let a = random_profiles(7, 5);
        assert_eq!(a, random_profiles(7, 5));
        assert_ne!(a, random_profiles(8, 5));
        for rp in &a {
            let g = rp.grid(128).unwrap();
            assert!((g.total_arclength() - rp.length).abs() < 1e-12 * rp.length);
        }
    }

    #[test]
    fn perturbed_round_hits_target() {
        let g = perturbed_round(-1.0, 128).unwrap();
        assert!((min_scalar(&g).unwrap() + 1.0).abs() < 1e-9);
    }
}
