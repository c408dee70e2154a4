//! Coordinate Ricci curvature of an arbitrary 3-metric by finite differences.
//!
//! Nothing here knows about warped products: the metric is a function from
//! coordinates to a symmetric matrix, Christoffel symbols come from
//! fourth-order differences of it, and the Ricci tensor from differences of
//! the Christoffel symbols. Used as an independent check of the closed-form
//! curvatures.

pub type Mat3 = [[f64; 3]; 3];
pub type Point = [f64; 3];

/// Ricci tensor and scalar curvature at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicciOracle {
    pub ricci: Mat3,
    pub scalar: f64,
    pub metric: Mat3,
}

fn inverse(m: &Mat3) -> Mat3 {
    let c = |i: usize, j: usize| {
        let (a, b) = ((i + 1) % 3, (i + 2) % 3);
        let (p, q) = ((j + 1) % 3, (j + 2) % 3);
        m[a][p] * m[b][q] - m[a][q] * m[b][p]
    };
    let det = m[0][0] * c(0, 0) + m[0][1] * c(0, 1) + m[0][2] * c(0, 2);
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            inv[j][i] = c(i, j) / det;
        }
    }
    inv
}

fn shifted(p: Point, k: usize, d: f64) -> Point {
    let mut q = p;
    q[k] += d;
    q
}

/// Fourth-order central difference of a matrix-valued function along `k`.
fn diff<F: Fn(Point) -> Mat3>(f: &F, p: Point, k: usize, h: f64) -> Mat3 {
    let a = f(shifted(p, k, -2.0 * h));
    let b = f(shifted(p, k, -h));
    let c = f(shifted(p, k, h));
    let d = f(shifted(p, k, 2.0 * h));
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (a[i][j] - 8.0 * b[i][j] + 8.0 * c[i][j] - d[i][j]) / (12.0 * h);
        }
    }
    out
}

/// `Γ^k_ij` stored as `gamma[k][i][j]`.
fn christoffel<F: Fn(Point) -> Mat3>(metric: &F, p: Point, h: f64) -> [Mat3; 3] {
    let g_inv = inverse(&metric(p));
    let dg: [Mat3; 3] = [diff(metric, p, 0, h), diff(metric, p, 1, h), diff(metric, p, 2, h)];
    let mut gamma = [[[0.0; 3]; 3]; 3];
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for l in 0..3 {
                    s += g_inv[k][l] * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]);
                }
                gamma[k][i][j] = 0.5 * s;
            }
        }
    }
    gamma
}

/// Ricci tensor and scalar curvature of `metric` at `p`, with difference
/// step `h` in every coordinate.
pub fn ricci<F: Fn(Point) -> Mat3>(metric: F, p: Point, h: f64) -> RicciOracle {
    let gamma = christoffel(&metric, p, h);
    // dgamma[m][k][i][j] = ∂_m Γ^k_ij
    let mut dgamma = [[[[0.0; 3]; 3]; 3]; 3];
    for (m, dm) in dgamma.iter_mut().enumerate() {
        let at = |d: f64| christoffel(&metric, shifted(p, m, d), h);
        let (a, b, c, d) = (at(-2.0 * h), at(-h), at(h), at(2.0 * h));
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    dm[k][i][j] = (a[k][i][j] - 8.0 * b[k][i][j] + 8.0 * c[k][i][j] - d[k][i][j]) / (12.0 * h);
                }
            }
        }
    }
    let mut ric = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut s = 0.0;
            for k in 0..3 {
                s += dgamma[k][k][i][j] - dgamma[j][k][i][k];
                for l in 0..3 {
                    s += gamma[k][k][l] * gamma[l][i][j] - gamma[k][j][l] * gamma[l][i][k];
                }
            }
            ric[i][j] = s;
        }
    }
    let g = metric(p);
    let g_inv = inverse(&g);
    let scalar = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .map(|(i, j)| g_inv[i][j] * ric[i][j])
        .sum();
    RicciOracle {
        ricci: ric,
        scalar,
        metric: g,
    }
}

/// Curvatures of a rotationally symmetric metric at one slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpedOracle {
    pub scalar: f64,
    /// `Ric(n, n)` for the unit radial normal.
    pub ric_nn: f64,
    /// Ricci curvature of a unit vector tangent to the slice.
    pub ric_tangential: f64,
}

/// Curvatures of `φ(x)² dx² + ψ(x)² g_{S²}` at `x`, computed by [`ricci`].
///
/// The chart is Cartesian around the nearer pole: with `r = x` (or `1 − x`)
/// and `y = r ω`,
///
/// ```text
/// g_ij = (ψ²/r²) δ_ij + (φ² − ψ²/r²) y_i y_j / r²
/// ```
///
/// which is smooth through the pole, so the differences stay accurate in
/// the cells next to it. The point is taken off the coordinate axes.
pub fn warped_curvature(psi: impl Fn(f64) -> f64, phi: impl Fn(f64) -> f64, x: f64, h: f64) -> WarpedOracle {
    let flip = x > 0.5;
    let coord = |r: f64| if flip { 1.0 - r } else { r };
    let metric = |y: Point| -> Mat3 {
        let r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
        let r = r2.sqrt();
        let (p, f) = (psi(coord(r)), phi(coord(r)));
        let tangential = p * p / r2;
        let radial = (f * f - tangential) / r2;
        let mut g = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                g[i][j] = radial * y[i] * y[j] + if i == j { tangential } else { 0.0 };
            }
        }
        g
    };
    let r = if flip { 1.0 - x } else { x };
    let dir = [0.48, 0.6, 0.64];
    let y = [r * dir[0], r * dir[1], r * dir[2]];
    let o = ricci(metric, y, h.min(r / 8.0));
    let quad = |m: &Mat3, u: Point, v: Point| -> f64 {
        (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| m[i][j] * u[i] * v[j]).sum()
    };
    let tangent = [0.8, 0.0, -0.6];
    WarpedOracle {
        scalar: o.scalar,
        ric_nn: quad(&o.ricci, dir, dir) / quad(&o.metric, dir, dir),
        ric_tangential: quad(&o.ricci, tangent, tangent) / quad(&o.metric, tangent, tangent),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_sphere_in_polar_cartesian_chart() {
        let r = 1.3;
        let psi = |x: f64| r * (std::f64::consts::PI * x).sin();
        let phi = |_| std::f64::consts::PI * r;
        for x in [0.5 / 128.0, 0.3, 0.5, 0.8, 1.0 - 1.5 / 128.0] {
            let o = warped_curvature(psi, phi, x, 1e-3);
            assert!((o.scalar - 6.0 / (r * r)).abs() < 1e-6, "{x}: {}", o.scalar);
            assert!((o.ric_nn - 2.0 / (r * r)).abs() < 1e-6);
            assert!((o.ric_tangential - 2.0 / (r * r)).abs() < 1e-6);
        }
    }

    #[test]
    fn flat_space_in_cartesian_and_spherical_charts() {
        let o = ricci(|_| [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], [0.1, 0.2, 0.3], 1e-2);
        assert_eq!(o.scalar, 0.0);
        let s = warped_curvature(|x| x, |_| 1.0, 0.3, 1e-3);
        assert!(s.scalar.abs() < 1e-7);
    }

    #[test]
    fn hyperbolic_space() {
        let o = warped_curvature(f64::sinh, |_| 1.0, 0.4, 1e-3);
        assert!((o.scalar + 6.0).abs() < 1e-7);
        assert!((o.ric_nn + 2.0).abs() < 1e-7);
    }
}
