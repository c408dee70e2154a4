use serde::{Deserialize, Serialize};

use super::dilation::{ball_map, ConformalDilation};
use super::measure::{center_of_mass, WeightedMeasure};
use super::{axpy, cross, dot, norm, scale, Vec3};
use crate::error::{LabError, Result};
use crate::exec::{sum_range, Execution};

/// Iteration cap of the balancing solver.
pub const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub exec: Execution,
}

impl BalanceOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            max_iterations: MAX_ITERATIONS,
            exec: Execution::best(),
        }
    }
}

/// Outcome of a balancing run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub center: Vec3,
    pub t: f64,
    /// `|centre of mass|` of the dilated measure, by direct quadrature.
    pub residual: f64,
    pub iterations: usize,
}

impl BalanceReport {
    pub fn dilation(&self) -> ConformalDilation {
        ConformalDilation {
            center: self.center,
            t: self.t,
        }
    }
}

/// Centre of mass through the ball point `a` and its Jacobian.
fn evaluate(exec: Execution, m: &WeightedMeasure, a: Vec3) -> (Vec3, [[f64; 3]; 3]) {
    let (nodes, weights) = (m.nodes(), m.weights());
    let s = sum_range::<13, _>(exec, m.len(), |i| {
        let (f, j) = ball_map(nodes[i], a);
        let w = weights[i];
        let mut out = [0.0; 13];
        for k in 0..3 {
            out[k] = w * f[k];
            for l in 0..3 {
                out[3 + 3 * k + l] = w * j[k][l];
            }
        }
        out[12] = w;
        out
    });
    let inv = 1.0 / s[12];
    let f = [s[0] * inv, s[1] * inv, s[2] * inv];
    let mut jac = [[0.0; 3]; 3];
    for k in 0..3 {
        for l in 0..3 {
            jac[k][l] = s[3 + 3 * k + l] * inv;
        }
    }
    (f, jac)
}

/// Solves `J δ = r` by Cramer's rule; `None` if `J` is singular.
fn solve3(j: &[[f64; 3]; 3], r: Vec3) -> Option<Vec3> {
    let det = dot(j[0], cross(j[1], j[2]));
    if !(det.abs() > 1e-300) {
        return None;
    }
    let col = |k: usize| [j[0][k], j[1][k], j[2][k]];
    let (c0, c1, c2) = (col(0), col(1), col(2));
    Some([
        dot(r, cross(c1, c2)) / det,
        dot(c0, cross(r, c2)) / det,
        dot(c0, cross(c1, r)) / det,
    ])
}

/// Dilation whose push-forward of `m` has centre of mass within `tol` of 0.
pub fn balance(m: &WeightedMeasure, tol: f64) -> Result<BalanceReport> {
    balance_with(m, &BalanceOptions::new(tol))
}

/// Damped Newton iteration on the ball point `a` of the dilation.
///
/// Each step is halved until `|F|` decreases, and until it moves at most
/// halfway from the current point to the boundary `|a| = 1`. Measures with
/// an atom carrying half the mass or more are rejected: every dilation keeps
/// the atom on the sphere, so the centre of mass cannot reach 0.
pub fn balance_with(m: &WeightedMeasure, opts: &BalanceOptions) -> Result<BalanceReport> {
    if !(opts.tol > 0.0) {
        return Err(LabError::InvalidParameter(format!("tolerance {} must be positive", opts.tol)));
    }
    let atom = m.max_atom() / m.total();
    if atom >= 0.5 {
        return Err(LabError::DegenerateMeasure(format!(
            "a single node carries {atom:.6} of the mass; the balanced dilation would sit on the boundary"
        )));
    }
    let report = |a: Vec3, iterations: usize| {
        let d = ConformalDilation::from_ball_point(a);
        BalanceReport {
            center: d.center,
            t: d.t,
            residual: norm(center_of_mass(m, &d)),
            iterations,
        }
    };
    let mut a = [0.0; 3];
    let (mut f, mut jac) = evaluate(opts.exec, m, a);
    let mut res = norm(f);
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        if res <= opts.tol {
            return Ok(report(a, iterations));
        }
        let Some(delta) = solve3(&jac, scale(-1.0, f)) else {
            break;
        };
        let r_max = norm(a) + 0.5 * (1.0 - norm(a));
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = axpy(lambda, delta, a);
            if norm(trial) <= r_max {
                let (ft, jt) = evaluate(opts.exec, m, trial);
                let rt = norm(ft);
                if rt < (1.0 - 1e-4 * lambda) * res {
                    (a, f, jac, res) = (trial, ft, jt, rt);
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
        iterations += 1;
    }
    let best = report(a, iterations);
    if best.residual <= opts.tol {
        return Ok(best);
    }
    Err(LabError::NoConvergence {
        iterations,
        residual: best.residual,
    })
}
