//! Extinction-time certificates from the integrated width inequality.
//!
//! Under `min R(0) < 0` the width obeys
//! `d/dt[W (t+C)^{−3/4}] ≤ −4π (t+C)^{−3/4}`, which integrates to
//!
//! ```text
//! (T+C)^{−3/4} W(T) ≤ C^{−3/4} W(0) − 16π[(T+C)^{1/4} − C^{1/4}]
//! ```
//!
//! with `C = −3/(2 min R(0))`. The right-hand side vanishes at `T*`, past
//! which `W ≥ 0` cannot hold. When `min R(0) ≥ 0` the rate bound is `−4π`
//! and `T* = W(0)/(4π)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::flow::{FlowTrajectory, Termination};
use crate::width::WidthSeries;

/// Relative part of `tol_time`.
pub const TIME_REL: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Policy {
    #[serde(rename = "negative_minR")]
    NegativeMinR,
    #[serde(rename = "nonnegative_minR")]
    NonnegativeMinR,
}

/// The comparison constant and the policy it implies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub policy: Policy,
    /// `Some(C)` under [`Policy::NegativeMinR`].
    pub c: Option<f64>,
}

impl Comparison {
    /// Rescaled comparison for `g ↦ λ² g` (so `C ↦ λ² C`).
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            policy: self.policy,
            c: self.c.map(|c| c * lambda * lambda),
        }
    }
}

/// `C = −3/(2 min R(0))` when `min R(0) < 0`; `min R(0) = 0` goes to the
/// nonnegative policy.
pub fn constant_c(min_r0: f64) -> Comparison {
    if min_r0 < 0.0 {
        Comparison {
            policy: Policy::NegativeMinR,
            c: Some(-1.5 / min_r0),
        }
    } else {
        Comparison {
            policy: Policy::NonnegativeMinR,
            c: None,
        }
    }
}

/// Right-hand side of the integrated inequality at time `t`.
pub fn integrated_rhs(w0: f64, c: f64, t: f64) -> f64 {
    w0 * c.powf(-0.75) - 16.0 * PI * ((t + c).powf(0.25) - c.powf(0.25))
}

/// Predicted extinction bound `T*`.
pub fn predicted_extinction(w0: f64, comparison: &Comparison) -> f64 {
    match comparison.c {
        Some(c) => {
            // root⁴ − q⁴ factored so nothing cancels for small w0 or large c.
            let q = c.powf(0.25);
            let d = w0 * c.powf(-0.75) / (16.0 * PI);
            let root = q + d;
            d * (root + q) * (root * root + q * q)
        }
        None => w0 / (4.0 * PI),
    }
}

/// One difference quotient of `W (t+C)^{−3/4}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotoneSample {
    pub t: f64,
    pub h: f64,
    pub quotient: f64,
    /// `−4π (t+C)^{−3/4}`
    pub bound: f64,
    pub tol_rate: f64,
    /// `bound − quotient`
    pub margin: f64,
    pub ok: bool,
}

/// Checks `Δ[W (t+C)^{−3/4}]/h ≤ −4π (t+C)^{−3/4} + tol_rate` per pair.
///
/// `tol_rate` is `rate_rel · |bound|` plus the width series' step-error
/// estimate carried through the same weight.
pub fn monotone_monitor(
    series: &WidthSeries,
    comparison: &Comparison,
    rate_rel: f64,
) -> Result<Vec<MonotoneSample>> {
    let c = comparison.c.ok_or_else(|| {
        LabError::NotApplicable(
            "monotone quantity needs min R(0) < 0; the width rate monitor covers dW/dt <= -4pi".into(),
        )
    })?;
    let t0 = series.t0;
    let s = &series.samples;
    Ok(s.windows(2)
        .map(|p| {
            let (a, b) = (&p[0], &p[1]);
            let h = b.t - a.t;
            let ta = a.t - t0 + c;
            let tb = b.t - t0 + c;
            let q = (b.w * tb.powf(-0.75) - a.w * ta.powf(-0.75)) / h;
            let bound = -4.0 * PI * ta.powf(-0.75);
            let tol_rate = rate_rel * bound.abs() + a.step_error * ta.powf(-0.75);
            let margin = bound - q;
            MonotoneSample {
                t: a.t,
                h,
                quotient: q,
                bound,
                tol_rate,
                margin,
                ok: margin >= -tol_rate,
            }
        })
        .collect())
}

/// Summary of the monitor margins attached to a certificate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MarginsSummary {
    /// `sound`, `unsound` or `not_comparable`.
    pub soundness: String,
    /// `T* + tol_time − t_ext`, when comparable.
    pub time_margin: Option<f64>,
    pub tol_time: Option<f64>,
    pub width_rate_worst: Option<f64>,
    pub monotone_worst: Option<f64>,
    pub scalar_bound_worst: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionCertificate {
    #[serde(rename = "C")]
    pub c: Option<f64>,
    #[serde(rename = "W0")]
    pub w0: f64,
    #[serde(rename = "T_star")]
    pub t_star: f64,
    pub policy: Policy,
    pub simulated_extinction: Option<f64>,
    /// `None` when the run did not go extinct (pinch or `t_max`).
    pub sound: Option<bool>,
    pub margins_summary: MarginsSummary,
}

impl ExtinctionCertificate {
    pub fn new(w0: f64, min_r0: f64) -> Self {
        let comparison = constant_c(min_r0);
        Self {
            c: comparison.c,
            w0,
            t_star: predicted_extinction(w0, &comparison),
            policy: comparison.policy,
            simulated_extinction: None,
            sound: None,
            margins_summary: MarginsSummary {
                soundness: "not_comparable".into(),
                ..MarginsSummary::default()
            },
        }
    }

    pub fn comparison(&self) -> Comparison {
        Comparison {
            policy: self.policy,
            c: self.c,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Soundness {
    Sound { margin: f64, tol_time: f64 },
    Unsound { margin: f64, tol_time: f64 },
    /// Pinched or cut off by `t_max`: no extinction to compare.
    NotComparable(String),
}

impl Soundness {
    pub fn label(&self) -> &'static str {
        match self {
            Soundness::Sound { .. } => "sound",
            Soundness::Unsound { .. } => "unsound",
            Soundness::NotComparable(_) => "not_comparable",
        }
    }
}

/// Compares the simulated extinction time with `T* + tol_time`,
/// `tol_time = 2·dt_last + time_rel·T*`, and records the verdict on the
/// certificate.
pub fn certificate_soundness(
    trajectory: &FlowTrajectory,
    certificate: &mut ExtinctionCertificate,
    time_rel: f64,
) -> Soundness {
    let verdict = match &trajectory.termination {
        Termination::Extinct { t } => {
            let t_ext = t - trajectory.initial().time();
            let tol_time = 2.0 * trajectory.last().dt_last + time_rel * certificate.t_star;
            let margin = certificate.t_star + tol_time - t_ext;
            certificate.simulated_extinction = Some(t_ext);
            certificate.margins_summary.time_margin = Some(margin);
            certificate.margins_summary.tol_time = Some(tol_time);
            if margin >= 0.0 {
                Soundness::Sound { margin, tol_time }
            } else {
                Soundness::Unsound { margin, tol_time }
            }
        }
        Termination::Pinched { .. } => {
            Soundness::NotComparable("neckpinch; surgery is out of scope".into())
        }
        Termination::ReachedTMax { .. } => {
            Soundness::NotComparable("run stopped at t_max before extinction".into())
        }
        Termination::Degenerate { reason, .. } => {
            Soundness::NotComparable(format!("degenerate run: {reason}"))
        }
    };
    certificate.sound = match verdict {
        Soundness::Sound { .. } => Some(true),
        Soundness::Unsound { .. } => Some(false),
        Soundness::NotComparable(_) => None,
    };
    certificate.margins_summary.soundness = verdict.label().into();
    verdict
}
