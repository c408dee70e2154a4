//! The invariant suites, run on the fixture fleet.
//!
//! Every suite counts its cases and failures and keeps the smallest slack
//! `tolerance − error` it saw, so a negative `worst_margin` marks the case
//! that failed. Failures are data: [`run_checks`] never errors.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::certificate::{constant_c, integrated_rhs, predicted_extinction, ExtinctionCertificate};
use crate::config::{Monitor, Tolerances};
use crate::conformal::{
    apply_dilation, balance, center_of_mass, energy_identity_check, hersch_slice_check_tol, icosphere,
    skewed_measure, uniform_measure, ConformalDilation, Vec3, WeightedMeasure,
};
use crate::error::Result;
use crate::exec::{self, Execution};
use crate::fixtures::{fleet, random_profiles, FleetMember, RandomProfile};
use crate::flow::{rhs, OutputSchedule, Termination};
use crate::geometry::{curvature_signed, SphereData};
use crate::grid::{build_profile, ProfileGrid, ProfileKind};
use crate::lab::{analyse, simulate, Analysis, VerdictStatus};
use crate::oracle::warped_curvature;
use crate::width::{critical_spheres, first_variation_profile, stable_neck, symmetric_width};

/// Error constant of the second-order grid checks: `10·Δx²`.
pub const GRID_CONSTANT: f64 = 10.0;

/// Difference step of the curvature oracle.
const ORACLE_STEP: f64 = 1e-3;

/// Deliberate defects for mutation testing of the suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Flip the sign of `K_mix` in the grid curvature.
    FlipKmixSign,
}

impl Fault {
    fn kmix_sign(self) -> f64 {
        match self {
            Fault::None => 1.0,
            Fault::FlipKmixSign => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    pub seed: u64,
    pub n_cells: usize,
    pub tolerances: Tolerances,
    pub exec: Execution,
    pub fault: Fault,
    /// Run the flow suites (the fleet evolutions dominate the cost).
    pub flows: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            n_cells: 128,
            tolerances: Tolerances::default(),
            exec: Execution::best(),
            fault: Fault::None,
            flows: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    pub worst_margin: Option<f64>,
    /// First failing case, or a short description of what was checked.
    pub detail: String,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub seed: u64,
    pub n_cells: usize,
    pub suites: Vec<SuiteResult>,
}

impl CheckSummary {
    pub fn all_passed(&self) -> bool {
        self.suites.iter().all(SuiteResult::passed)
    }

    pub fn suite(&self, name: &str) -> Option<&SuiteResult> {
        self.suites.iter().find(|s| s.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        for r in &self.suites {
            let worst = r.worst_margin.map_or_else(|| "-".into(), |m| format!("{m:.3e}"));
            s.push_str(&format!(
                "{:<4} {:<22} {:>7} cases {:>4} failures  worst margin {:>10}  {}\n",
                if r.passed() { "PASS" } else { "FAIL" },
                r.name,
                r.cases,
                r.failures,
                worst,
                r.detail
            ));
        }
        s
    }
}

struct Tally {
    name: &'static str,
    cases: usize,
    failures: usize,
    worst: Option<f64>,
    first_failure: Option<String>,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            cases: 0,
            failures: 0,
            worst: None,
            first_failure: None,
        }
    }

    /// Records one case with slack `tolerance − error`.
    fn check(&mut self, slack: f64, what: impl FnOnce() -> String) {
        self.cases += 1;
        if slack.is_finite() {
            self.worst = Some(self.worst.map_or(slack, |w| w.min(slack)));
        }
        if !(slack >= 0.0) {
            self.fail_counted(what());
        }
    }

    fn holds(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.fail_counted(what());
        }
    }

    fn fail(&mut self, what: String) {
        self.cases += 1;
        self.fail_counted(what);
    }

    fn fail_counted(&mut self, what: String) {
        self.failures += 1;
        self.first_failure.get_or_insert(what);
    }

    fn finish(self, detail: &str) -> SuiteResult {
        SuiteResult {
            name: self.name.into(),
            cases: self.cases,
            failures: self.failures,
            worst_margin: self.worst,
            detail: self.first_failure.unwrap_or_else(|| detail.into()),
        }
    }
}

/// Analytic profile for the oracle: grid samples plus closed forms.
struct Analytic {
    name: String,
    grid: ProfileGrid,
    psi: Box<dyn Fn(f64) -> f64 + Sync>,
    phi: Box<dyn Fn(f64) -> f64 + Sync>,
}

fn analytic_profiles(seed: u64, n: usize) -> Result<Vec<Analytic>> {
    let mut out = Vec::new();
    for (k, rp) in random_profiles(seed, crate::fixtures::RANDOM_COUNT).into_iter().enumerate() {
        let grid = rp.grid(n)?;
        let (a, b): (RandomProfile, RandomProfile) = (rp.clone(), rp);
        out.push(Analytic {
            name: format!("random[{seed}:{k}]"),
            grid,
            psi: Box::new(move |x| a.psi(x)),
            phi: Box::new(move |x| b.phi(x)),
        });
    }
    for r in [0.5, 1.0, 2.0] {
        out.push(Analytic {
            name: format!("round({r})"),
            grid: build_profile(&ProfileKind::Round { radius: r }, n)?,
            psi: Box::new(move |x| r * (PI * x).sin()),
            phi: Box::new(move |_| PI * r),
        });
    }
    Ok(out)
}

fn grid_tol(p: &ProfileGrid, value: f64) -> f64 {
    GRID_CONSTANT * p.dx() * p.dx() * (1.0 + value.abs())
}

fn curvature_oracle(profiles: &[Analytic], fault: Fault, exec: Execution) -> SuiteResult {
    let mut t = Tally::new("curvature_oracle");
    for a in profiles {
        let field = match curvature_signed(&a.grid, fault.kmix_sign()) {
            Ok(f) => f,
            Err(e) => {
                t.fail(format!("{}: {e}", a.name));
                continue;
            }
        };
        let xs = a.grid.x_centers();
        let oracle = exec::map(exec, xs, |&x| warped_curvature(&a.psi, &a.phi, x, ORACLE_STEP));
        for (i, o) in oracle.iter().enumerate() {
            t.check(grid_tol(&a.grid, o.scalar) - (field.scalar[i] - o.scalar).abs(), || {
                format!("{} cell {i}: R = {} vs oracle {}", a.name, field.scalar[i], o.scalar)
            });
            t.check(grid_tol(&a.grid, o.ric_nn) - (field.ric_nn[i] - o.ric_nn).abs(), || {
                format!("{} cell {i}: Ric(n,n) = {} vs oracle {}", a.name, field.ric_nn[i], o.ric_nn)
            });
        }
    }
    t.finish("grid R and Ric(n,n) against the coordinate oracle, 10 dx^2 (1+|R|)")
}

fn rhs_consistency(profiles: &[Analytic], exec: Execution) -> SuiteResult {
    let mut t = Tally::new("rhs_consistency");
    for a in profiles {
        let rates = match rhs(&a.grid) {
            Ok(r) => r,
            Err(e) => {
                t.fail(format!("{}: {e}", a.name));
                continue;
            }
        };
        let xs = a.grid.x_centers();
        let oracle = exec::map(exec, xs, |&x| warped_curvature(&a.psi, &a.phi, x, ORACLE_STEP));
        for (i, o) in oracle.iter().enumerate() {
            let psi_rate = rates.dpsi_dt[i] / a.grid.psi()[i];
            let phi_rate = rates.dphi_dt[i] / a.grid.phi()[i];
            t.check(
                grid_tol(&a.grid, o.ric_tangential) - (psi_rate + o.ric_tangential).abs(),
                || format!("{} cell {i}: psi_t/psi = {psi_rate} vs -Ric = {}", a.name, -o.ric_tangential),
            );
            t.check(grid_tol(&a.grid, o.ric_nn) - (phi_rate + o.ric_nn).abs(), || {
                format!("{} cell {i}: phi_t/phi = {phi_rate} vs -Ric(n,n) = {}", a.name, -o.ric_nn)
            });
        }
    }
    t.finish("psi_t/psi = -Ric(e,e) and phi_t/phi = -Ric(n,n) against the oracle")
}

fn curvature_identities(members: &[FleetMember], fault: Fault) -> SuiteResult {
    let mut t = Tally::new("curvature_identities");
    for m in members {
        match curvature_signed(&m.profile, fault.kmix_sign()) {
            Ok(c) => {
                for i in 0..c.scalar.len() {
                    let scale = c.k_mix[i].abs() + c.k_sph[i].abs();
                    let r = 4.0 * c.k_mix[i] + 2.0 * c.k_sph[i];
                    t.check(1e-14 * scale - (c.scalar[i] - r).abs(), || {
                        format!("{} cell {i}: R - 4K_mix - 2K_sph = {}", m.name, c.scalar[i] - r)
                    });
                    t.holds(c.ric_nn[i] == 2.0 * c.k_mix[i], || {
                        format!("{} cell {i}: Ric(n,n) != 2 K_mix", m.name)
                    });
                }
            }
            Err(e) => t.fail(format!("{}: {e}", m.name)),
        }
    }
    t.finish("R = 4K_mix + 2K_sph and Ric(n,n) = 2K_mix cell-wise")
}

fn spectrum(members: &[FleetMember]) -> SuiteResult {
    let mut t = Tally::new("spectrum");
    for m in members {
        for c in critical_spheres(&m.profile) {
            let modes = &c.spectrum.modes;
            t.holds(modes.windows(2).all(|w| w[1].mu > w[0].mu), || {
                format!("{} x = {}: eigenvalues not increasing", m.name, c.slice.x)
            });
            t.holds(modes.iter().all(|md| md.multiplicity == 2 * md.l + 1), || {
                format!("{} x = {}: wrong multiplicity", m.name, c.slice.x)
            });
            let spectral = c.spectrum.integral_l1_spectral(c.slice.area);
            let closed = c.slice.area * (c.slice.second_fund_sq + c.slice.ric_nn);
            t.check(1e-8 * (1.0 + closed.abs()) - (spectral - closed).abs(), || {
                format!("{} x = {}: spectral I = {spectral} vs {closed}", m.name, c.slice.x)
            });
        }
    }
    t.finish("mu_l increasing, multiplicity 2l+1, -mu_0 area = area (|A|^2 + Ric(n,n))")
}

fn scaling(members: &[FleetMember], fault: Fault) -> SuiteResult {
    let mut t = Tally::new("scaling");
    for m in members {
        let base = curvature_signed(&m.profile, fault.kmix_sign());
        let (w, x) = symmetric_width(&m.profile);
        for c in [0.5, 3.0] {
            let scaled = match m.profile.scaled(c) {
                Ok(s) => s,
                Err(e) => {
                    t.fail(format!("{}: {e}", m.name));
                    continue;
                }
            };
            if let (Ok(b), Ok(s)) = (&base, curvature_signed(&scaled, fault.kmix_sign())) {
                let worst = b
                    .scalar
                    .iter()
                    .zip(&s.scalar)
                    .map(|(r, rs)| 1e-10 * (1.0 + r.abs()) - (rs * c * c - r).abs())
                    .fold(f64::INFINITY, f64::min);
                t.check(worst, || format!("{} c = {c}: R(c g) != R(g)/c^2", m.name));
            } else {
                t.fail(format!("{} c = {c}: curvature failed", m.name));
            }
            let (ws, xs) = symmetric_width(&scaled);
            t.check(1e-10 * w - (ws - c * c * w).abs(), || {
                format!("{} c = {c}: W = {ws} vs c^2 W = {}", m.name, c * c * w)
            });
            t.check(1e-12 - (xs - x).abs(), || format!("{} c = {c}: argmax moved {x} -> {xs}", m.name));
            if let Ok(b) = &base {
                let r0 = b.scalar.iter().copied().fold(f64::INFINITY, f64::min);
                let t0 = ExtinctionCertificate::new(w, r0).t_star;
                let ts = ExtinctionCertificate::new(c * c * w, r0 / (c * c)).t_star;
                t.check(1e-12 * t0 - (ts - c * c * t0).abs(), || {
                    format!("{} c = {c}: T* = {ts} vs c^2 T* = {}", m.name, c * c * t0)
                });
            }
        }
    }
    t.finish("curvature / c^2, W c^2 with fixed argmax, T* c^2 for c in {0.5, 3}")
}

fn variation(members: &[FleetMember], tol: f64) -> SuiteResult {
    let mut t = Tally::new("variation");
    for m in members {
        match first_variation_profile(&m.profile) {
            Ok(checks) => {
                for v in checks {
                    let scale = tol * (1.0 + v.area);
                    t.check(scale - v.residual.abs(), || {
                        format!("{} x = {}: flow vs curvature residual {}", m.name, v.x, v.residual)
                    });
                    if let Some(gb) = v.gauss_bonnet_residual {
                        t.check(scale - gb.abs(), || {
                            format!("{} x = {}: Gauss-Bonnet residual {gb}", m.name, v.x)
                        });
                    }
                }
            }
            Err(e) => t.fail(format!("{}: {e}", m.name)),
        }
    }
    t.finish("two area-rate evaluations per slice, Gauss-Bonnet form on minimal slices")
}

/// Minimal slices of the fleet's initial profiles, labelled.
fn minimal_slices(members: &[FleetMember]) -> Vec<(String, SphereData)> {
    members
        .iter()
        .flat_map(|m| {
            critical_spheres(&m.profile)
                .into_iter()
                .filter(|c| c.slice.is_minimal)
                .map(|c| (m.name.clone(), c.slice))
        })
        .collect()
}

fn index_equivalence(slices: &[(String, SphereData)], runs: &[FleetRun], n: usize, tol: f64) -> SuiteResult {
    let mut t = Tally::new("index_equivalence");
    for (name, s) in slices {
        match hersch_slice_check_tol(s, tol) {
            Ok(v) => t.holds(v.equivalent, || {
                format!(
                    "{name} x = {}: index {} vs I = {} vs psi psi_ss = {}",
                    s.x, v.index, v.integral_l1, v.psi_psi_ss
                )
            }),
            Err(e) => t.fail(format!("{name}: {e}")),
        }
    }
    for r in runs {
        for v in &r.analysis.hersch {
            t.holds(v.equivalent, || format!("{} snapshot slice x = {}: criteria disagree", r.name, v.x));
        }
    }
    match build_profile(&ProfileKind::Round { radius: 1.0 }, n)
        .map(|g| critical_spheres(&g))
        .map(|c| c.into_iter().next())
    {
        Ok(Some(eq)) => {
            t.holds(eq.index() == 1, || format!("round equator index {}", eq.index()));
            t.check(1e-6 - (eq.slice.integral_l1() - 8.0 * PI).abs(), || {
                format!("round equator I = {}", eq.slice.integral_l1())
            });
        }
        _ => t.fail("round equator not found".into()),
    }
    t.finish("index <= 1 <=> I <= 8pi <=> psi psi_ss >= -1 on every minimal slice")
}

fn hersch(slices: &[(String, SphereData)], runs: &[FleetRun], tol: f64) -> SuiteResult {
    let mut t = Tally::new("hersch");
    let record = |t: &mut Tally, name: &str, v: &crate::conformal::HerschVerdict| {
        t.check(v.margin(), || format!("{name} x = {}: I = {} above 8pi", v.x, v.integral_l1));
        if v.index <= 1 {
            t.check(v.rate_margin(), || {
                format!("{name} x = {}: dA/dt = {} below -16pi", v.x, v.area_rate)
            });
        }
    };
    for (name, s) in slices {
        match hersch_slice_check_tol(s, tol) {
            Ok(v) if v.index <= 1 => record(&mut t, name, &v),
            Ok(_) => {}
            Err(e) => t.fail(format!("{name}: {e}")),
        }
    }
    for r in runs {
        for v in r.analysis.hersch.iter().filter(|v| v.index <= 1) {
            record(&mut t, &r.name, v);
        }
    }
    t.finish("index <= 1 minimal slices: I <= 8pi (1 + tol) and dA/dt >= -16pi - 8pi tol")
}

fn width(members: &[FleetMember], seed: u64, n: usize, runs: &[FleetRun]) -> SuiteResult {
    let mut t = Tally::new("width");
    for m in members {
        let (w, _) = symmetric_width(&m.profile);
        t.holds(w > 0.0, || format!("{}: W = {w}", m.name));
    }
    for r in runs {
        let before = r.analysis.width.samples.iter().take(r.analysis.width.samples.len().saturating_sub(1));
        for s in before {
            t.holds(s.w > 0.0, || format!("{} t = {}: W = {}", r.name, s.t, s.w));
        }
    }
    let tol = |w: f64, n: usize| GRID_CONSTANT * w / (n * n) as f64;
    for radius in [0.5, 1.0, 2.0] {
        if let Ok(g) = build_profile(&ProfileKind::Round { radius }, n) {
            let (w, _) = symmetric_width(&g);
            let exact = 4.0 * PI * radius * radius;
            t.check(tol(exact, n) - (w - exact).abs(), || format!("round({radius}): W = {w} vs {exact}"));
        }
    }
    for (k, rp) in random_profiles(seed, crate::fixtures::RANDOM_COUNT).iter().enumerate() {
        match (rp.grid(n), rp.grid(2 * n)) {
            (Ok(a), Ok(b)) => {
                let (wa, wb) = (symmetric_width(&a).0, symmetric_width(&b).0);
                t.check(tol(wa, n) - (wa - wb).abs(), || {
                    format!("random[{seed}:{k}]: W = {wa} at n, {wb} at 2n")
                });
            }
            _ => t.fail(format!("random[{seed}:{k}]: grid failed")),
        }
    }
    t.finish("W > 0, round W = 4pi r^2 and 2x refinement within 10 dx^2 W")
}

/// Root of `w ↦ integrated_rhs(w0, c, ·)` by plain bisection.
fn bisect_extinction(w0: f64, c: f64) -> f64 {
    let f = |t: f64| integrated_rhs(w0, c, t);
    let mut hi = 1.0;
    while f(hi) > 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn certificate() -> SuiteResult {
    let mut t = Tally::new("certificate");
    let w0s = [0.5, 2.0, 4.0 * PI, 50.0];
    let cs = [0.1, 0.5, 1.5, 5.0];
    let t_star = |w0: f64, c: f64| predicted_extinction(w0, &constant_c(-1.5 / c));
    for &c in &cs {
        for w in w0s.windows(2) {
            t.holds(t_star(w[1], c) > t_star(w[0], c), || format!("T* not increasing in W0 at C = {c}"));
        }
    }
    for &w0 in &w0s {
        // T* = W0/4π + 6k²/C + 4k³/C² + k⁴/C³ with k = W0/16π: decreasing
        // in C towards the nonnegative-policy value.
        for c in cs.windows(2) {
            t.holds(t_star(w0, c[1]) < t_star(w0, c[0]), || format!("T* not decreasing in C at W0 = {w0}"));
        }
        let floor = w0 / (4.0 * PI);
        t.holds(cs.iter().all(|&c| t_star(w0, c) > floor), || format!("T* below W0/4pi at W0 = {w0}"));
        t.check(1e-6 * floor - (t_star(w0, 1e9) - floor).abs(), || {
            format!("T* at large C does not approach W0/4pi at W0 = {w0}")
        });
        let round = constant_c(6.0);
        t.holds(predicted_extinction(2.0 * w0, &round) > predicted_extinction(w0, &round), || {
            "nonnegative-policy T* not increasing".into()
        });
        for &c in &cs {
            let scale = w0 * c.powf(-0.75);
            t.check(1e-10 * scale - integrated_rhs(w0, c, t_star(w0, c)).abs(), || {
                format!("rhs(T*) = {} at W0 = {w0}, C = {c}", integrated_rhs(w0, c, t_star(w0, c)))
            });
            for lambda in [0.5, 3.0] {
                let l2 = lambda * lambda;
                let ts = t_star(l2 * w0, l2 * c);
                t.check(1e-12 * l2 * t_star(w0, c) - (ts - l2 * t_star(w0, c)).abs(), || {
                    format!("T* not covariant at W0 = {w0}, C = {c}, lambda = {lambda}")
                });
            }
        }
    }
    let spot = t_star(4.0 * PI, 1.5);
    let reference = bisect_extinction(4.0 * PI, 1.5);
    t.check(1e-6 - (spot - reference).abs(), || format!("T*(4pi, 1.5) = {spot}, bisection {reference}"));
    t.holds(t_star(0.0, 1.5) == 0.0, || "T*(W0 = 0) != 0".into());
    t.finish("increasing in W0, decreasing in C, root property, scaling, W0 = 4pi C = 1.5 against bisection")
}

fn unit(v: Vec3) -> Vec3 {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn dist(a: Vec3, b: Vec3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Second moments `Σ w p_i p_j / Σ w`.
fn gram(m: &WeightedMeasure) -> [[f64; 3]; 3] {
    let mut g = [[0.0; 3]; 3];
    for (p, w) in m.nodes().iter().zip(m.weights()) {
        for i in 0..3 {
            for j in 0..3 {
                g[i][j] += w * p[i] * p[j];
            }
        }
    }
    let total = m.total();
    g.map(|row| row.map(|v| v / total))
}

fn conformal(tol: f64) -> SuiteResult {
    let mut t = Tally::new("conformal");
    let nodes = icosphere(3).vertices;
    let centers = [[0.0, 0.0, 1.0], unit([1.0, 2.0, 3.0]), unit([-0.3, 0.1, -0.9])];
    for &x in &centers {
        for (t1, t2) in [(0.25, 0.5), (0.5, 0.9), (0.1, 0.3)] {
            let d1 = ConformalDilation::new(x, t1).expect("valid dilation");
            let d2 = ConformalDilation::new(x, t2).expect("valid dilation");
            let d12 = ConformalDilation::new(x, 1.0 - (1.0 - t1) * (1.0 - t2)).expect("valid dilation");
            for &p in &nodes {
                let two = apply_dilation(apply_dilation(p, &d1), &d2);
                let once = apply_dilation(p, &d12);
                t.check(1e-10 - dist(two, once), || format!("composition at t = ({t1}, {t2})"));
                let q = apply_dilation(p, &d1);
                let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
                t.check(1e-12 - (n - 1.0).abs(), || format!("|image| = {n}"));
            }
        }
        let limit = ConformalDilation::new(x, 1.0 - 1e-6).expect("valid dilation");
        for &p in nodes.iter().filter(|p| p[0] * x[0] + p[1] * x[1] + p[2] * x[2] > -0.99) {
            t.check(1e-3 - dist(apply_dilation(p, &limit), x), || "t -> 1 does not concentrate".into());
        }
    }
    let ico = uniform_measure(0);
    let com = center_of_mass(&ico, &ConformalDilation::identity());
    t.check(1e-12 - dist(com, [0.0; 3]), || format!("icosahedral centre of mass {com:?}"));

    match balance(&uniform_measure(4), tol) {
        Ok(r) => t.check(1e-8 - r.t, || format!("uniform measure balanced at t = {}", r.t)),
        Err(e) => t.fail(format!("uniform: {e}")),
    }
    match skewed_measure(4, [0.0, 0.0, 1.0], 0.9, 20.0).and_then(|m| balance(&m, tol)) {
        Ok(r) => {
            t.check(tol - r.residual, || format!("skewed residual {}", r.residual));
            t.holds(r.iterations <= 50, || format!("skewed took {} iterations", r.iterations));
        }
        Err(e) => t.fail(format!("skewed: {e}")),
    }
    // Pre-dilating a balanced measure and balancing again lands on the same
    // second moments, up to the quadrature error of the node set.
    let uniform = uniform_measure(4);
    let g0 = gram(&uniform);
    for (x, s) in [([1.0, 0.0, 0.0], 0.5), (unit([1.0, -1.0, 2.0]), 0.8)] {
        let pushed = uniform.dilated(&ConformalDilation::new(x, s).expect("valid dilation"));
        match balance(&pushed, tol) {
            Ok(r) => {
                t.check(tol - r.residual, || format!("pre-dilated residual {}", r.residual));
                let g = gram(&pushed.dilated(&r.dilation()));
                let worst = (0..9).map(|k| (g[k / 3][k % 3] - g0[k / 3][k % 3]).abs()).fold(0.0, f64::max);
                t.check(1e-3 - worst, || format!("second moments moved by {worst}"));
            }
            Err(e) => t.fail(format!("pre-dilated: {e}")),
        }
    }
    t.holds(
        matches!(
            WeightedMeasure::new(vec![[0.0, 0.0, 1.0]], vec![1.0]).and_then(|m| balance(&m, tol)),
            Err(crate::LabError::DegenerateMeasure(_))
        ),
        || "single atom accepted".into(),
    );
    t.finish("composition, unit image, balancing of uniform, skewed and pre-dilated measures")
}

fn energy_identity() -> SuiteResult {
    let mut t = Tally::new("energy_identity");
    let target = 8.0 * PI;
    for x in [[0.0, 0.0, 1.0], unit([1.0, 2.0, 3.0])] {
        for s in [0.0, 0.25, 0.5, 0.9] {
            let d = ConformalDilation::new(x, s).expect("valid dilation");
            match (energy_identity_check(5, &d), energy_identity_check(4, &d)) {
                (Ok(fine), Ok(coarse)) => {
                    let (ef, ec) = ((fine - target).abs(), (coarse - target).abs());
                    t.check(5e-3 * target - ef, || format!("t = {s}: energy {fine} at 10242 nodes"));
                    t.holds(ec >= 2.0 * ef, || format!("t = {s}: error {ec} -> {ef} under refinement"));
                }
                (Err(e), _) | (_, Err(e)) => t.fail(format!("t = {s}: {e}")),
            }
        }
    }
    t.finish("sum of Dirichlet energies = 8pi within 0.5% at 10242 nodes, error shrinking with refinement")
}

/// One evolved fleet member with its monitors.
#[derive(Debug, Clone)]
pub struct FleetRun {
    pub name: String,
    pub initial: ProfileGrid,
    pub termination: Termination,
    pub steps: u64,
    pub analysis: Analysis,
}

/// Snapshot schedule for a fleet member: dense when a neck is tracked.
pub fn fleet_schedule(profile: &ProfileGrid) -> OutputSchedule {
    if stable_neck(profile).is_some() {
        OutputSchedule::Stride(4)
    } else {
        OutputSchedule::Stride(256)
    }
}

/// Evolves every fleet member to twice its predicted extinction bound.
pub fn run_fleet(seed: u64, n_cells: usize, tol: &Tolerances, exec: Execution) -> Result<Vec<FleetRun>> {
    let members = fleet(seed, n_cells)?;
    exec::map(exec, &members, |m| evolve_member(m, tol))
        .into_iter()
        .collect()
}

pub fn evolve_member(m: &FleetMember, tol: &Tolerances) -> Result<FleetRun> {
    let (w0, _) = symmetric_width(&m.profile);
    let min_r0 = crate::geometry::min_scalar(&m.profile)?;
    let t_max = 2.0 * ExtinctionCertificate::new(w0, min_r0).t_star;
    let trajectory = simulate(m.profile.clone(), t_max, &fleet_schedule(&m.profile), tol)?;
    let analysis = analyse(&trajectory, tol);
    Ok(FleetRun {
        name: m.name.clone(),
        initial: m.profile.clone(),
        termination: trajectory.termination.clone(),
        steps: trajectory.last().step_count,
        analysis,
    })
}

fn monitor_suite(name: &'static str, runs: &[FleetRun], monitor: Monitor) -> SuiteResult {
    let mut t = Tally::new(name);
    for r in runs {
        let v = r.analysis.verdict(monitor);
        if v.status == VerdictStatus::NotApplicable {
            continue;
        }
        t.cases += v.checked;
        t.failures += v.violations;
        if let Some(m) = v.worst_margin {
            t.worst = Some(t.worst.map_or(m, |w| w.min(m)));
        }
        if v.violations > 0 {
            let what = format!("{}: {} violations, worst margin {:?}", r.name, v.violations, v.worst_margin);
            t.first_failure.get_or_insert(what);
        }
    }
    t.finish(&format!("{} monitor on every applicable fleet run", monitor.name()))
}

fn flow_suites(runs: &[FleetRun]) -> Vec<SuiteResult> {
    let mut fleet = Tally::new("flow_fleet");
    for r in runs {
        fleet.holds(!matches!(r.termination, Termination::Degenerate { .. }), || {
            format!("{}: {:?}", r.name, r.termination)
        });
    }
    let mut sound = Tally::new("certificate_soundness");
    for r in runs {
        if let crate::certificate::Soundness::Sound { margin, .. } | crate::certificate::Soundness::Unsound { margin, .. } =
            r.analysis.soundness
        {
            sound.check(margin, || format!("{}: T_ext beyond T* + tol_time by {}", r.name, -margin));
        }
    }
    let mut round = Tally::new("round_extinction");
    for r in runs.iter().filter(|r| r.name.starts_with("round(")) {
        let r0 = r.initial.total_arclength() / PI;
        let exact = r0 * r0 * (1.0 - crate::flow::EXTINCT_REL.powi(2)) / 4.0;
        match r.termination {
            Termination::Extinct { t } => {
                round.check(1e-2 * exact - (t - exact).abs(), || format!("{}: extinct at {t}, oracle {exact}", r.name))
            }
            _ => round.fail(format!("{}: {:?}", r.name, r.termination)),
        }
    }
    vec![
        fleet.finish("no degenerate fleet run"),
        monitor_suite("scalar_bound", runs, Monitor::ScalarBound),
        monitor_suite("width_rate", runs, Monitor::WidthRate),
        monitor_suite("monotone", runs, Monitor::Monotone),
        monitor_suite("neck", runs, Monitor::Neck),
        sound.finish("T_ext <= T* + tol_time on every extinct run"),
        round.finish("round extinction at r^2/4 within 1%"),
    ]
}

/// Runs every suite; the flow suites also feed their snapshot slices into
/// the index and area-bound suites.
pub fn run_checks(opts: &CheckOptions) -> CheckSummary {
    let (summary, _) = run_checks_with_fleet(opts);
    summary
}

/// [`run_checks`] that also hands back the evolved fleet.
pub fn run_checks_with_fleet(opts: &CheckOptions) -> (CheckSummary, Vec<FleetRun>) {
    let n = opts.n_cells;
    let tol = &opts.tolerances;
    let mut suites = Vec::new();
    let members = match fleet(opts.seed, n) {
        Ok(m) => m,
        Err(e) => {
            let mut t = Tally::new("fixtures");
            t.fail(e.to_string());
            suites.push(t.finish(""));
            return (
                CheckSummary {
                    seed: opts.seed,
                    n_cells: n,
                    suites,
                },
                Vec::new(),
            );
        }
    };
    let runs: Vec<FleetRun> = if opts.flows {
        let results = exec::map(opts.exec, &members, |m| evolve_member(m, tol));
        let mut t = Tally::new("flow_errors");
        let mut ok = Vec::new();
        for (m, r) in members.iter().zip(results) {
            match r {
                Ok(r) => ok.push(r),
                Err(e) => t.fail(format!("{}: {e}", m.name)),
            }
        }
        if t.failures > 0 {
            suites.push(t.finish(""));
        }
        ok
    } else {
        Vec::new()
    };

    match analytic_profiles(opts.seed, n) {
        Ok(profiles) => {
            suites.push(curvature_oracle(&profiles, opts.fault, opts.exec));
            suites.push(rhs_consistency(&profiles, opts.exec));
        }
        Err(e) => {
            let mut t = Tally::new("curvature_oracle");
            t.fail(e.to_string());
            suites.push(t.finish(""));
        }
    }
    suites.push(curvature_identities(&members, opts.fault));
    suites.push(spectrum(&members));
    suites.push(scaling(&members, opts.fault));
    let random: Vec<FleetMember> = members.iter().filter(|m| m.name.starts_with("random")).cloned().collect();
    suites.push(variation(&random, tol.variation));
    let slices = minimal_slices(&members);
    suites.push(index_equivalence(&slices, &runs, n, tol.hersch));
    suites.push(hersch(&slices, &runs, tol.hersch));
    suites.push(width(&members, opts.seed, n, &runs));
    suites.push(certificate());
    suites.push(conformal(tol.balance));
    suites.push(energy_identity());
    if opts.flows {
        suites.extend(flow_suites(&runs));
    }
    (
        CheckSummary {
            seed: opts.seed,
            n_cells: n,
            suites,
        },
        runs,
    )
}
