//! Run orchestration: one trajectory through every monitor, the emitted
//! files, and the balancing driver.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::certificate::{
    certificate_soundness, monotone_monitor, ExtinctionCertificate, MonotoneSample, Soundness,
};
use crate::conformal::{balance, hersch_slice_check_tol, BalanceReport, HerschVerdict, WeightedMeasure};
use crate::config::{Monitor, RunConfig, Tolerances, DEFAULT_STRIDE};
use crate::error::{LabError, Result};
use crate::flow::{evolve, scalar_bound_monitor, FlowState, FlowTrajectory, OutputSchedule, ScalarBoundSample, Termination};
use crate::grid::ProfileGrid;
use crate::width::{critical_spheres, neck_area_tracker, symmetric_width, width_rate_monitor, NeckSeries, WidthSeries};

/// Flows `profile` to `t_max` with the configured monotonicity tolerance.
/// `t_max = 0` gives the initial state alone.
pub fn simulate(profile: ProfileGrid, t_max: f64, schedule: &OutputSchedule, tol: &Tolerances) -> Result<FlowTrajectory> {
    let mut state = FlowState::new(profile)?;
    state.tol_monotone = tol.tol_monotone(state.min_r);
    if t_max == 0.0 {
        let t = state.time();
        return Ok(FlowTrajectory {
            states: vec![state],
            termination: Termination::ReachedTMax { t },
        });
    }
    evolve(state, t_max, schedule)
}

/// Every monitor evaluated on one trajectory.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub certificate: ExtinctionCertificate,
    pub width: WidthSeries,
    pub scalar: Vec<ScalarBoundSample>,
    /// `None` under the nonnegative policy.
    pub monotone: Option<Vec<MonotoneSample>>,
    /// `None` without a stable neck in the initial profile.
    pub neck: Option<NeckSeries>,
    pub soundness: Soundness,
    /// Bound checks on the minimal slices of every snapshot.
    pub hersch: Vec<HerschVerdict>,
    pub tol_monotone: f64,
}

pub fn analyse(trajectory: &FlowTrajectory, tol: &Tolerances) -> Analysis {
    let initial = &trajectory.initial().profile;
    let (w0, _) = symmetric_width(initial);
    let mut certificate = ExtinctionCertificate::new(w0, trajectory.initial().min_r);
    let comparison = certificate.comparison();
    let width = width_rate_monitor(trajectory, &comparison, tol.rate_rel);
    let scalar = scalar_bound_monitor(trajectory, comparison.c);
    let monotone = monotone_monitor(&width, &comparison, tol.rate_rel).ok();
    let neck = neck_area_tracker(trajectory, tol.rate_rel).ok();
    let soundness = certificate_soundness(trajectory, &mut certificate, tol.time_rel);
    let hersch = trajectory
        .states
        .iter()
        .flat_map(|st| critical_spheres(&st.profile))
        .filter(|c| c.slice.is_minimal)
        .filter_map(|c| hersch_slice_check_tol(&c.slice, tol.hersch).ok())
        .collect();
    let tol_monotone = trajectory.initial().tol_monotone;
    let mut a = Analysis {
        certificate,
        width,
        scalar,
        monotone,
        neck,
        soundness,
        hersch,
        tol_monotone,
    };
    let m = &mut a.certificate.margins_summary;
    m.width_rate_worst = a.width.worst_slack();
    m.monotone_worst = a.monotone.as_deref().and_then(monotone_worst);
    m.scalar_bound_worst = scalar_worst(&a.scalar, tol_monotone);
    a
}

fn finite_min(it: impl Iterator<Item = f64>) -> Option<f64> {
    it.filter(|v| v.is_finite()).reduce(f64::min)
}

fn monotone_worst(s: &[MonotoneSample]) -> Option<f64> {
    finite_min(s.iter().map(|m| m.margin + m.tol_rate))
}

fn scalar_worst(s: &[ScalarBoundSample], tol: f64) -> Option<f64> {
    finite_min(s.iter().map(|m| (m.margin + tol).min(tol - m.monotone_drop)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Pass,
    Violation,
    NotApplicable,
}

/// Outcome of one monitor. `worst_margin` is the smallest slack over the
/// checked items, tolerance included, so negative means violated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorVerdict {
    pub monitor: String,
    pub status: VerdictStatus,
    pub checked: usize,
    pub violations: usize,
    pub worst_margin: Option<f64>,
    pub note: Option<String>,
}

impl MonitorVerdict {
    fn counted(monitor: &str, checked: usize, violations: usize, worst_margin: Option<f64>, note: Option<String>) -> Self {
        Self {
            monitor: monitor.into(),
            status: if violations > 0 {
                VerdictStatus::Violation
            } else {
                VerdictStatus::Pass
            },
            checked,
            violations,
            worst_margin,
            note,
        }
    }

    fn not_applicable(monitor: &str, note: &str) -> Self {
        Self {
            monitor: monitor.into(),
            status: VerdictStatus::NotApplicable,
            checked: 0,
            violations: 0,
            worst_margin: None,
            note: Some(note.into()),
        }
    }
}

impl Analysis {
    pub fn verdict(&self, monitor: Monitor) -> MonitorVerdict {
        let name = monitor.name();
        match monitor {
            Monitor::ScalarBound => MonitorVerdict::counted(
                name,
                self.scalar.len(),
                self.scalar.iter().filter(|s| !s.ok).count(),
                scalar_worst(&self.scalar, self.tol_monotone),
                None,
            ),
            Monitor::WidthRate => {
                let pairs = self.width.samples.len().saturating_sub(1);
                MonitorVerdict::counted(name, pairs, self.width.violations(), self.width.worst_slack(), None)
            }
            Monitor::Monotone => match &self.monotone {
                Some(s) => MonitorVerdict::counted(
                    name,
                    s.len(),
                    s.iter().filter(|m| !m.ok).count(),
                    monotone_worst(s),
                    None,
                ),
                None => MonitorVerdict::not_applicable(name, "min R(0) >= 0: the width rate monitor covers this case"),
            },
            Monitor::Neck => match &self.neck {
                Some(n) => {
                    let pairs = n.samples.len().saturating_sub(1);
                    let note = match n.pinch_time {
                        Some(t) => format!("neck area reaches zero at pinch time {t:.9e}"),
                        None => "run ended without a neckpinch".into(),
                    };
                    let note = match n.unresolved_from {
                        Some(t) => format!("{note}; neck below the cell spacing from t = {t:.9e}, not tracked further"),
                        None => note,
                    };
                    let note = if n.strictly_decreasing {
                        note
                    } else {
                        format!("neck area is not strictly decreasing; {note}")
                    };
                    MonitorVerdict::counted(
                        name,
                        pairs,
                        n.violations() + usize::from(!n.strictly_decreasing),
                        n.worst_slack(),
                        Some(note),
                    )
                }
                None => MonitorVerdict::not_applicable(name, "initial profile has no stable neck"),
            },
            Monitor::Hersch => MonitorVerdict::counted(
                name,
                self.hersch.len(),
                self.hersch.iter().filter(|h| !h.ok()).count(),
                finite_min(
                    self.hersch
                        .iter()
                        .filter(|h| h.bound_applies())
                        .map(|h| h.margin().min(h.rate_margin())),
                ),
                None,
            ),
        }
    }

    /// Verdict on `T_sim ≤ T* + tol_time`.
    pub fn certificate_verdict(&self) -> MonitorVerdict {
        match &self.soundness {
            Soundness::Sound { margin, .. } => MonitorVerdict::counted("certificate", 1, 0, Some(*margin), None),
            Soundness::Unsound { margin, .. } => MonitorVerdict::counted("certificate", 1, 1, Some(*margin), None),
            Soundness::NotComparable(why) => MonitorVerdict::not_applicable("certificate", why),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub termination: String,
    pub t_end: f64,
    pub pinch_x: Option<f64>,
    pub degenerate_reason: Option<String>,
    pub snapshots: usize,
    pub steps: u64,
    pub dt_last: f64,
    pub psi_max_initial: f64,
    pub psi_max_final: f64,
    pub min_r_initial: f64,
    pub min_r_final: f64,
    pub total_arclength_initial: f64,
    pub total_arclength_final: f64,
}

impl TrajectorySummary {
    pub fn of(t: &FlowTrajectory) -> Self {
        let (first, last) = (t.initial(), t.last());
        Self {
            termination: t.termination.flag().into(),
            t_end: t.termination.time(),
            pinch_x: match t.termination {
                Termination::Pinched { x, .. } => Some(x),
                _ => None,
            },
            degenerate_reason: match &t.termination {
                Termination::Degenerate { reason, .. } => Some(reason.clone()),
                _ => None,
            },
            snapshots: t.states.len(),
            steps: last.step_count,
            dt_last: last.dt_last,
            psi_max_initial: first.profile.max_psi(),
            psi_max_final: last.profile.max_psi(),
            min_r_initial: first.min_r,
            min_r_final: last.min_r,
            total_arclength_initial: first.profile.total_arclength(),
            total_arclength_final: last.profile.total_arclength(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFiles {
    pub trajectory_csv: String,
    pub width_csv: String,
    pub snapshot_initial: String,
    pub snapshot_final: String,
    pub certificate_json: String,
    pub report_json: String,
}

impl OutputFiles {
    fn under(dir: &Path) -> Self {
        let p = |name: &str| dir.join(name).display().to_string();
        Self {
            trajectory_csv: p("trajectory.csv"),
            width_csv: p("width.csv"),
            snapshot_initial: p("snapshot_initial.csv"),
            snapshot_final: p("snapshot_final.csv"),
            certificate_json: p("certificate.json"),
            report_json: p("report.json"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub trajectory: TrajectorySummary,
    pub width_series: WidthSeries,
    pub certificate: ExtinctionCertificate,
    pub monitors: Vec<MonitorVerdict>,
    pub files: OutputFiles,
    pub violations: usize,
    pub errors: Vec<String>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        i32::from(self.violations > 0 || !self.errors.is_empty())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn read(run_dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(run_dir.join("report.json"))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// One line per monitor plus a headline.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} at t = {:.9e} after {} steps; W0 = {:.9e}, T* = {:.9e}, violations = {}\n",
            self.trajectory.termination,
            self.trajectory.t_end,
            self.trajectory.steps,
            self.certificate.w0,
            self.certificate.t_star,
            self.violations
        );
        for v in &self.monitors {
            let status = match v.status {
                VerdictStatus::Pass => "pass",
                VerdictStatus::Violation => "VIOLATION",
                VerdictStatus::NotApplicable => "n/a",
            };
            let worst = v.worst_margin.map_or_else(|| "-".into(), |m| format!("{m:.3e}"));
            s.push_str(&format!(
                "  {:<13} {:<9} {:>6} checked {:>4} violations, worst margin {}\n",
                v.monitor, status, v.checked, v.violations, worst
            ));
        }
        for e in &self.errors {
            s.push_str(&format!("  error: {e}\n"));
        }
        s
    }
}

/// Snapshot schedule from the config, with an optional stride override.
pub fn schedule_of(config: &RunConfig, stride: Option<u64>) -> OutputSchedule {
    match (stride, &config.output_times, config.output_stride) {
        (Some(k), _, _) => OutputSchedule::Stride(k.max(1)),
        (None, Some(ts), _) => OutputSchedule::Times(ts.clone()),
        (None, None, Some(k)) => OutputSchedule::Stride(k),
        (None, None, None) => OutputSchedule::Stride(DEFAULT_STRIDE),
    }
}

/// Builds, evolves and monitors the configured run and writes trajectory,
/// width, snapshot, certificate and report files under `out`.
///
/// A degenerate run still produces a report; it is listed under `errors`.
pub fn run_simulate(config: &RunConfig, out: &Path, stride: Option<u64>) -> Result<RunReport> {
    config.validate()?;
    let profile = config.initial_profile.build(config.n_cells, config.seed)?;
    let trajectory = simulate(profile, config.t_max, &schedule_of(config, stride), &config.tolerances)?;
    let analysis = analyse(&trajectory, &config.tolerances);

    let mut monitors: Vec<MonitorVerdict> = config.monitors.iter().map(|&m| analysis.verdict(m)).collect();
    monitors.push(analysis.certificate_verdict());
    let violations = monitors.iter().map(|v| v.violations).sum();
    let errors = match &trajectory.termination {
        Termination::Degenerate { t, reason } => vec![format!("degenerate run at t = {t:.9e}: {reason}")],
        _ => Vec::new(),
    };

    std::fs::create_dir_all(out)?;
    let files = OutputFiles::under(out);
    trajectory.write_csv(Path::new(&files.trajectory_csv))?;
    analysis.width.write_csv(Path::new(&files.width_csv))?;
    trajectory
        .initial()
        .profile
        .write_snapshot(Path::new(&files.snapshot_initial))?;
    trajectory.last().profile.write_snapshot(Path::new(&files.snapshot_final))?;
    std::fs::write(&files.certificate_json, analysis.certificate.to_json()?)?;
    let report = RunReport {
        config: config.clone(),
        trajectory: TrajectorySummary::of(&trajectory),
        width_series: analysis.width,
        certificate: analysis.certificate,
        monitors,
        files,
        violations,
        errors,
    };
    std::fs::write(&report.files.report_json, report.to_json()?)?;
    Ok(report)
}

/// Balances the measure in `measure` and writes `balance.json` under `out`.
pub fn run_balance(measure: &Path, tol: f64, out: &Path) -> Result<BalanceReport> {
    if !(tol > 0.0) {
        return Err(LabError::InvalidParameter(format!("tol = {tol} must be positive")));
    }
    let m = WeightedMeasure::read_csv(measure)?;
    let report = balance(&m, tol)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("balance.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}
