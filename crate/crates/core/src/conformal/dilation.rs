use serde::{Deserialize, Serialize};

use super::{axpy, dot, norm, scale, Vec3};
use crate::error::{LabError, Result};

/// The dilation `Ψ(x, t)`: stereographic projection from `x`, scaling by
/// `1/(1 − t)`, and back. `t = 0` is the identity and points flow towards
/// `x` as `t → 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalDilation {
    pub center: Vec3,
    pub t: f64,
}

impl ConformalDilation {
    pub fn new(center: Vec3, t: f64) -> Result<Self> {
        let r = norm(center);
        if !(r.is_finite() && (r - 1.0).abs() <= 1e-12) {
            return Err(LabError::InvalidParameter(format!(
                "dilation centre must be a unit vector (norm {r})"
            )));
        }
        if !(0.0..1.0).contains(&t) {
            return Err(LabError::InvalidParameter(format!("dilation parameter t = {t} must lie in [0, 1)")));
        }
        Ok(Self { center, t })
    }

    pub fn identity() -> Self {
        Self {
            center: [0.0, 0.0, 1.0],
            t: 0.0,
        }
    }

    /// Ball point `a = α x` with `α = t/(2 − t)`.
    ///
    /// On the sphere the dilation is `p ↦ [(1 − |a|²) p + 2(1 + a·p) a] / (1 + 2a·p + |a|²)`,
    /// which is rational in `a`; the balancing solver works with it there.
    pub fn ball_point(&self) -> Vec3 {
        scale(self.t / (2.0 - self.t), self.center)
    }

    /// Inverse of [`ball_point`](Self::ball_point). The centre of `a = 0` is
    /// taken to be `e₃`.
    pub fn from_ball_point(a: Vec3) -> Self {
        let alpha = norm(a);
        if alpha == 0.0 {
            return Self::identity();
        }
        Self {
            center: scale(1.0 / alpha, a),
            t: 2.0 * alpha / (1.0 + alpha),
        }
    }
}

/// Image of the unit vector `p` under `d`.
///
/// With `c = p·x`, `s = 1 − t` and `p⊥ = p − c x`, the stereographic radius
/// `cot(β/2)` of `p` seen from `x` is multiplied by `1/s`, which gives
///
/// ```text
/// p' = [((1+c) − s²(1−c)) x + 2s p⊥] / ((1+c) + s²(1−c))
/// ```
///
/// This is smooth for every `p`, including `±x`. `1 ± c` are taken as
/// `|p ± x|²/2`, which stays accurate near `∓x` where `1 ± p·x` cancels.
pub fn apply_dilation(p: Vec3, d: &ConformalDilation) -> Vec3 {
    let x = d.center;
    let c = dot(p, x);
    let s = 1.0 - d.t;
    let s2 = s * s;
    let sum = axpy(1.0, x, p);
    let diff = axpy(-1.0, x, p);
    let (plus, minus) = (0.5 * dot(sum, sum), 0.5 * dot(diff, diff));
    let perp = axpy(-c, x, p);
    let den = plus + s2 * minus;
    axpy((plus - s2 * minus) / den, x, scale(2.0 * s / den, perp))
}

/// Dilation through the ball point `a` together with its Jacobian in `a`.
pub(crate) fn ball_map(p: Vec3, a: Vec3) -> (Vec3, [[f64; 3]; 3]) {
    let ap = dot(a, p);
    let aa = dot(a, a);
    let den = 1.0 + 2.0 * ap + aa;
    let num = axpy(2.0 * (1.0 + ap), a, scale(1.0 - aa, p));
    let f = scale(1.0 / den, num);
    let mut jac = [[0.0; 3]; 3];
    for (i, row) in jac.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let delta = if i == j { 2.0 * (1.0 + ap) } else { 0.0 };
            let dnum = -2.0 * p[i] * a[j] + 2.0 * a[i] * p[j] + delta;
            let dden = 2.0 * (p[j] + a[j]);
            *v = (dnum - f[i] * dden) / den;
        }
    }
    (f, jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::sub;

    /// Literal stereographic construction: project from `x` onto the plane
    /// through the origin orthogonal to `x`, scale, lift back.
    fn stereographic(p: Vec3, x: Vec3, lambda: f64) -> Vec3 {
        let c = dot(p, x);
        let q = scale(1.0 / (1.0 - c), axpy(-c, x, p));
        let q = scale(lambda, q);
        let r2 = dot(q, q);
        axpy((r2 - 1.0) / (r2 + 1.0), x, scale(2.0 / (r2 + 1.0), q))
    }

    fn unit(v: Vec3) -> Vec3 {
        scale(1.0 / norm(v), v)
    }

    #[test]
    fn identity_and_fixed_points() {
        let p = unit([0.3, -0.5, 0.8]);
        let x = unit([1.0, 2.0, -0.5]);
        let id = ConformalDilation::new(x, 0.0).unwrap();
        assert!(norm(sub(apply_dilation(p, &id), p)) < 1e-15);
        let d = ConformalDilation::new(x, 0.7).unwrap();
        assert!(norm(sub(apply_dilation(x, &d), x)) < 1e-15);
        let m = scale(-1.0, x);
        assert!(norm(sub(apply_dilation(m, &d), m)) < 1e-15);
    }

    #[test]
    fn equator_point_at_half() {
        let d = ConformalDilation::new([0.0, 0.0, 1.0], 0.5).unwrap();
        let q = apply_dilation([1.0, 0.0, 0.0], &d);
        let angle = q[2].clamp(-1.0, 1.0).acos();
        assert!((angle - 2.0 * 0.5f64.atan()).abs() < 1e-14);
    }

    #[test]
    fn closed_form_matches_stereographic_construction() {
        let x = unit([0.2, -0.4, 0.9]);
        for t in [0.1, 0.5, 0.9, 0.999] {
            let d = ConformalDilation::new(x, t).unwrap();
            for p in [[1.0, 0.0, 0.0], [0.0, 0.6, -0.8], unit([-0.3, 0.3, -0.9])] {
                let want = stereographic(p, x, 1.0 / (1.0 - t));
                assert!(norm(sub(apply_dilation(p, &d), want)) < 1e-12);
            }
        }
    }

    #[test]
    fn ball_form_matches_and_jacobian_is_consistent() {
        let x = unit([0.5, 0.5, -0.7]);
        let d = ConformalDilation::new(x, 0.6).unwrap();
        let a = d.ball_point();
        let back = ConformalDilation::from_ball_point(a);
        assert!((back.t - 0.6).abs() < 1e-15 && norm(sub(back.center, x)) < 1e-15);
        let p = unit([0.1, -0.9, 0.2]);
        let (f, jac) = ball_map(p, a);
        assert!(norm(sub(f, apply_dilation(p, &d))) < 1e-14);
        let h = 1e-6;
        for j in 0..3 {
            let mut ap = a;
            let mut am = a;
            ap[j] += h;
            am[j] -= h;
            let fd = scale(0.5 / h, sub(ball_map(p, ap).0, ball_map(p, am).0));
            for i in 0..3 {
                assert!((fd[i] - jac[i][j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ConformalDilation::new([0.0, 0.0, 2.0], 0.1).is_err());
        assert!(ConformalDilation::new([0.0, 0.0, 1.0], 1.0).is_err());
        assert!(ConformalDilation::new([0.0, 0.0, 1.0], -0.1).is_err());
    }
}
