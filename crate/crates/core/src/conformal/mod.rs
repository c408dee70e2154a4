//! Möbius dilations of S², weighted centres of mass and the balancing
//! solver, plus the discrete energy identity and the index-one area bound.

mod balance;
mod dilation;
mod hersch;
mod measure;
mod mesh;

pub use balance::{balance, balance_with, BalanceOptions, BalanceReport, MAX_ITERATIONS};
pub use dilation::{apply_dilation, ConformalDilation};
pub use hersch::{hersch_inequality_check, hersch_slice_check, hersch_slice_check_tol, HerschVerdict, HERSCH_TOL};
pub use measure::{center_of_mass, center_of_mass_with, WeightedMeasure, UNIT_TOL};
pub use mesh::{
    dirichlet_energy, dirichlet_energy_quadratic, energy_identity_check, icosphere, quadratic_icosphere,
    skewed_measure, uniform_measure, Mesh, QuadraticMesh,
};

pub type Vec3 = [f64; 3];

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn axpy(alpha: f64, x: Vec3, y: Vec3) -> Vec3 {
    [alpha * x[0] + y[0], alpha * x[1] + y[1], alpha * x[2] + y[2]]
}

pub(crate) fn scale(alpha: f64, x: Vec3) -> Vec3 {
    [alpha * x[0], alpha * x[1], alpha * x[2]]
}

pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
