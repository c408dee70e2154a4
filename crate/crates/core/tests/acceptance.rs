//! Acceptance run: one line per criterion, nonzero exit if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use ricci_lab::checks::{fleet_schedule, run_checks_with_fleet, CheckOptions, CheckSummary, FleetRun};
use ricci_lab::conformal::{
    balance, energy_identity_check, skewed_measure, uniform_measure, ConformalDilation,
};
use ricci_lab::config::Tolerances;
use ricci_lab::flow::{OutputSchedule, Termination};
use ricci_lab::grid::{build_profile, DumbbellShape, ProfileKind};
use ricci_lab::lab::{analyse, simulate};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn suite_clean(summary: &CheckSummary, name: &str) -> (bool, String) {
    match summary.suite(name) {
        Some(s) => (
            s.passed(),
            format!("{name}: {} cases, {} failures, worst margin {:.3e}", s.cases, s.failures, s.worst_margin.unwrap_or(f64::NAN)),
        ),
        None => (false, format!("{name}: suite missing")),
    }
}

fn round_extinction() -> Outcome {
    let start = Instant::now();
    let g = build_profile(&ProfileKind::Round { radius: 1.0 }, 256).unwrap();
    let traj = simulate(g, 0.3, &OutputSchedule::Stride(10_000), &Tolerances::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    match traj.termination {
        Termination::Extinct { t } => {
            let rel = (t - 0.25).abs() / 0.25;
            outcome(rel <= 0.01 && secs < 30.0, format!("T_ext = {t:.9}, rel err {rel:.2e}, {secs:.1} s"))
        }
        ref other => outcome(false, format!("run ended {other:?}")),
    }
}

fn width_rate(runs: &[FleetRun]) -> Outcome {
    let wanted = ["round(0.5)", "round(1)", "round(2)", "perturbed_round(min R = -1)"];
    let mut pairs = 0;
    let mut bad = 0;
    let mut found = 0;
    for r in runs.iter().filter(|r| wanted.contains(&r.name.as_str())) {
        found += 1;
        pairs += r.analysis.width.samples.iter().filter(|s| s.dq.is_some()).count();
        bad += r.analysis.width.violations();
    }
    outcome(found == wanted.len() && pairs > 0 && bad == 0, format!("{found} runs, {pairs} pairs, {bad} violations"))
}

fn saturation(runs: &[FleetRun]) -> Outcome {
    let target = -16.0 * PI;
    let mut worst_dq: f64 = 0.0;
    let mut worst_upper: f64 = 0.0;
    let mut pairs = 0;
    for r in runs.iter().filter(|r| r.name.starts_with("round(")) {
        for s in &r.analysis.width.samples {
            if let Some(dq) = s.dq {
                pairs += 1;
                worst_dq = worst_dq.max((dq - target).abs() / target.abs());
                worst_upper = worst_upper.max((s.bound_rhs - target).abs() / target.abs());
            }
        }
    }
    outcome(
        pairs > 0 && worst_dq <= 0.02 && worst_upper <= 0.02,
        format!("{pairs} pairs; max |dq/(-16pi) - 1| = {worst_dq:.2e}, max |upper/(-16pi) - 1| = {worst_upper:.2e}"),
    )
}

fn from_suites(summary: &CheckSummary, names: &[&str]) -> Outcome {
    let parts: Vec<(bool, String)> = names.iter().map(|n| suite_clean(summary, n)).collect();
    outcome(
        parts.iter().all(|p| p.0),
        parts.into_iter().map(|p| p.1).collect::<Vec<_>>().join("; "),
    )
}

/// Bisection on `W0 C^{-3/4} − 16π((T+C)^{1/4} − C^{1/4})`.
fn bisect_t_star(w0: f64, c: f64) -> f64 {
    let f = |t: f64| w0 * c.powf(-0.75) - 16.0 * PI * ((t + c).powf(0.25) - c.powf(0.25));
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) > 0.0 {
        hi *= 2.0;
    }
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

fn soundness(summary: &CheckSummary) -> Outcome {
    let suite = suite_clean(summary, "certificate_soundness");
    let spot = ricci_lab::certificate::predicted_extinction(4.0 * PI, &ricci_lab::certificate::constant_c(-1.0));
    let reference = bisect_t_star(4.0 * PI, 1.5);
    let ok = (spot - reference).abs() <= 1e-6;
    outcome(
        suite.0 && ok,
        format!("{}; T*(4pi, 1.5) = {spot:.9} vs bisection {reference:.9}", suite.1),
    )
}

fn balancing() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut pass = true;
    match balance(&uniform_measure(5), 1e-8) {
        Ok(r) => {
            pass &= r.t <= 1e-8;
            notes.push(format!("uniform t = {:.1e}", r.t));
        }
        Err(e) => {
            pass = false;
            notes.push(format!("uniform: {e}"));
        }
    }
    match skewed_measure(5, [0.0, 0.0, 1.0], 0.9, 20.0).and_then(|m| balance(&m, 1e-8)) {
        Ok(r) => {
            pass &= r.residual <= 1e-8 && r.iterations <= 50;
            notes.push(format!("skewed residual {:.1e} in {} iterations", r.residual, r.iterations));
        }
        Err(e) => {
            pass = false;
            notes.push(format!("skewed: {e}"));
        }
    }
    let mut worst: f64 = 0.0;
    for t in [0.0, 0.25, 0.5, 0.9] {
        let d = ConformalDilation::new([0.0, 0.0, 1.0], t).unwrap();
        match energy_identity_check(5, &d) {
            Ok(e) => worst = worst.max((e - 8.0 * PI).abs() / (8.0 * PI)),
            Err(_) => worst = f64::INFINITY,
        }
    }
    pass &= worst <= 5e-3;
    notes.push(format!("energy max rel err {worst:.2e} at 10242 nodes"));
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 10.0;
    notes.push(format!("{secs:.1} s"));
    outcome(pass, notes.join(", "))
}

fn neckpinch() -> Outcome {
    let start = Instant::now();
    let tol = Tolerances::default();
    let dumbbell = ProfileKind::Dumbbell {
        neck: 0.15,
        lobe: 1.0,
        shape: DumbbellShape::default(),
    };
    let run = |n: usize| {
        let g = build_profile(&dumbbell, n).unwrap();
        let schedule = fleet_schedule(&g);
        simulate(g, 0.1, &schedule, &tol).unwrap()
    };
    let traj = run(128);
    let a = analyse(&traj, &tol);
    let reference = run(512);
    let secs = start.elapsed().as_secs_f64();
    let (Termination::Pinched { t, .. }, Termination::Pinched { t: t_ref, .. }) = (&traj.termination, &reference.termination) else {
        return outcome(false, format!("runs ended {:?} and {:?}", traj.termination, reference.termination));
    };
    let Some(neck) = a.neck else {
        return outcome(false, "no stable neck tracked".into());
    };
    let rel = (t - t_ref).abs() / t_ref;
    let pairs = neck.samples.len().saturating_sub(1);
    let pass = neck.strictly_decreasing && pairs > 0 && neck.violations() == 0 && rel <= 0.05 && secs < 120.0;
    outcome(
        pass,
        format!(
            "{pairs} pairs, {} violations, strictly decreasing {}; pinch {t:.7} vs 4x reference {t_ref:.7} (rel {rel:.2e}); {secs:.1} s",
            neck.violations(),
            neck.strictly_decreasing
        ),
    )
}

fn main() -> ExitCode {
    let (summary, runs) = run_checks_with_fleet(&CheckOptions::default());
    let results = [
        ("round extinction", round_extinction()),
        ("width rate monitor", width_rate(&runs)),
        ("round saturation", saturation(&runs)),
        ("scalar bound", from_suites(&summary, &["scalar_bound", "monotone"])),
        ("variation identities", from_suites(&summary, &["variation"])),
        ("index equivalence", from_suites(&summary, &["index_equivalence"])),
        ("certificate soundness", soundness(&summary)),
        ("balancing", balancing()),
        ("neckpinch", neckpinch()),
    ];
    let mut failed = 0;
    for (k, (name, o)) in results.iter().enumerate() {
        println!("criterion {} {:<22} {}  {}", k + 1, name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria pass", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
