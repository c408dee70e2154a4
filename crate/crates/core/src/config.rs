//! Run configuration: a TOML file with an `[initial_profile]` table, flow
//! settings, the monitor list and optional `[tolerances]` overrides.
//!
//! ```toml
//! n_cells = 256
//! t_max = 0.3
//! output_stride = 200
//! monitors = ["scalar_bound", "width_rate", "monotone", "neck", "hersch"]
//! seed = 1
//!
//! [initial_profile]
//! kind = "round"
//! radius = 1.0
//!
//! [tolerances]
//! rate_rel = 0.01
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::certificate::TIME_REL;
use crate::conformal::HERSCH_TOL;
use crate::error::{LabError, Result};
use crate::fixtures::{perturbed_round, random_profiles};
use crate::grid::{build_profile, DumbbellShape, ProfileGrid, ProfileKind, MIN_CELLS};
use crate::width::RATE_REL;

/// Tolerance overrides; every field defaults to the module value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative part of `tol_rate` in the width, monotone and neck monitors.
    pub rate_rel: f64,
    /// Relative part of `tol_time` in the certificate check.
    pub time_rel: f64,
    /// `tol_monotone = monotone_rel·|min R(0)| + monotone_abs`.
    pub monotone_rel: f64,
    pub monotone_abs: f64,
    /// Area-variation residuals, relative to `1 + area`.
    pub variation: f64,
    /// Slack on `∫1·L1 ≤ 8π` and `dA/dt ≥ −16π`.
    pub hersch: f64,
    /// Residual target of the balancing solver.
    pub balance: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rate_rel: RATE_REL,
            time_rel: TIME_REL,
            monotone_rel: 1e-6,
            monotone_abs: 1e-10,
            variation: 1e-6,
            hersch: HERSCH_TOL,
            balance: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn tol_monotone(&self, min_r0: f64) -> f64 {
        self.monotone_rel * min_r0.abs() + self.monotone_abs
    }

    fn fields(&self) -> [(&'static str, f64); 7] {
        [
            ("rate_rel", self.rate_rel),
            ("time_rel", self.time_rel),
            ("monotone_rel", self.monotone_rel),
            ("monotone_abs", self.monotone_abs),
            ("variation", self.variation),
            ("hersch", self.hersch),
            ("balance", self.balance),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    ScalarBound,
    WidthRate,
    Monotone,
    Neck,
    Hersch,
}

impl Monitor {
    pub const ALL: [Monitor; 5] = [
        Monitor::ScalarBound,
        Monitor::WidthRate,
        Monitor::Monotone,
        Monitor::Neck,
        Monitor::Hersch,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Monitor::ScalarBound => "scalar_bound",
            Monitor::WidthRate => "width_rate",
            Monitor::Monotone => "monotone",
            Monitor::Neck => "neck",
            Monitor::Hersch => "hersch",
        }
    }
}

/// Initial profile: the [`build_profile`] families plus the test fixtures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialProfile {
    Round {
        radius: f64,
    },
    Dumbbell {
        neck: f64,
        lobe: f64,
        #[serde(default)]
        shape: DumbbellShape,
    },
    /// Explicit samples; their length must equal `n_cells`.
    Samples {
        psi: Vec<f64>,
        phi: Vec<f64>,
    },
    /// Bulged round sphere with grid `min R` equal to `min_r`.
    PerturbedRound {
        min_r: f64,
    },
    /// Entry `index` of the random profiles drawn from the run seed.
    Random {
        index: usize,
    },
}

impl InitialProfile {
    pub fn build(&self, n_cells: usize, seed: u64) -> Result<ProfileGrid> {
        match self {
            InitialProfile::Round { radius } => build_profile(&ProfileKind::Round { radius: *radius }, n_cells),
            InitialProfile::Dumbbell { neck, lobe, shape } => build_profile(
                &ProfileKind::Dumbbell {
                    neck: *neck,
                    lobe: *lobe,
                    shape: *shape,
                },
                n_cells,
            ),
            InitialProfile::Samples { psi, phi } => build_profile(
                &ProfileKind::Samples {
                    psi: psi.clone(),
                    phi: phi.clone(),
                },
                n_cells,
            ),
            InitialProfile::PerturbedRound { min_r } => perturbed_round(*min_r, n_cells),
            InitialProfile::Random { index } => random_profiles(seed, index + 1)[*index].grid(n_cells),
        }
    }

    /// Parameter keys, used to point diagnostics at a line.
    fn keys(&self) -> &'static [&'static str] {
        match self {
            InitialProfile::Round { .. } => &["radius"],
            InitialProfile::Dumbbell { .. } => &["neck", "lobe"],
            InitialProfile::Samples { .. } => &["psi", "phi"],
            InitialProfile::PerturbedRound { .. } => &["min_r"],
            InitialProfile::Random { .. } => &["index"],
        }
    }
}

fn all_monitors() -> Vec<Monitor> {
    Monitor::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub initial_profile: InitialProfile,
    pub n_cells: usize,
    /// `0` records the initial snapshot only.
    pub t_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_stride: Option<u64>,
    #[serde(default = "all_monitors")]
    pub monitors: Vec<Monitor>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
}

/// Default snapshot stride when neither `output_times` nor
/// `output_stride` is given.
pub const DEFAULT_STRIDE: u64 = 100;

/// 1-based line of the first `key = ...` assignment in `text`, else 0.
fn line_of(text: &str, key: &str) -> usize {
    text.lines()
        .position(|l| {
            l.trim_start()
                .strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map_or(0, |i| i + 1)
}

fn at(text: &str, key: &str, message: String) -> LabError {
    match line_of(text, key) {
        0 => LabError::Config(message),
        line => LabError::Parse { line, message },
    }
}

impl RunConfig {
    /// Parses and validates a config; errors point at the offending line.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            LabError::Parse {
                line,
                message: e.message().to_string(),
            }
        })?;
        cfg.validate_against(text)?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_against("")
    }

    fn validate_against(&self, text: &str) -> Result<()> {
        if self.n_cells < MIN_CELLS {
            return Err(at(text, "n_cells", format!("n_cells = {} is below {MIN_CELLS}", self.n_cells)));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(at(text, "t_max", format!("t_max = {} must be finite and non-negative", self.t_max)));
        }
        if self.output_times.is_some() && self.output_stride.is_some() {
            return Err(at(
                text,
                "output_stride",
                "give either output_times or output_stride, not both".into(),
            ));
        }
        if self.output_stride == Some(0) {
            return Err(at(text, "output_stride", "output_stride must be at least 1".into()));
        }
        if let Some(ts) = &self.output_times {
            if let Some(bad) = ts.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
                return Err(at(text, "output_times", format!("output time {bad} is not a non-negative number")));
            }
        }
        for (name, v) in self.tolerances.fields() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(at(text, name, format!("tolerance {name} = {v} must be positive")));
            }
        }
        if let Err(e) = self.initial_profile.build(self.n_cells, self.seed) {
            let key = self
                .initial_profile
                .keys()
                .iter()
                .copied()
                .find(|k| line_of(text, k) > 0)
                .unwrap_or("kind");
            return Err(at(text, key, e.to_string()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROUND: &str = "n_cells = 64\nt_max = 0.3\n\n[initial_profile]\nkind = \"round\"\nradius = 1.0\n";

    #[test]
    fn defaults() {
        let c = RunConfig::parse(ROUND).unwrap();
        assert_eq!(c.monitors, Monitor::ALL.to_vec());
        assert_eq!(c.tolerances, Tolerances::default());
        assert_eq!(c.seed, 0);
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn negative_radius_points_at_its_line() {
        let text = ROUND.replace("radius = 1.0", "radius = -1.0");
        match RunConfig::parse(&text) {
            Err(LabError::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_monitor_and_syntax_errors() {
        let text = format!("monitors = [\"scalar_bound\", \"bogus\"]\n{ROUND}");
        assert!(matches!(RunConfig::parse(&text), Err(LabError::Parse { line: 1, .. })));
        let text = ROUND.replace("t_max = 0.3", "t_max = = 0.3");
        assert!(matches!(RunConfig::parse(&text), Err(LabError::Parse { line: 2, .. })));
        let text = format!("{ROUND}\n[tolerances]\nrate_rel = 0.0\n");
        assert!(matches!(RunConfig::parse(&text), Err(LabError::Parse { line: 9, .. })));
    }

    #[test]
    fn zero_t_max_is_allowed() {
        let text = ROUND.replace("t_max = 0.3", "t_max = 0");
        assert_eq!(RunConfig::parse(&text).unwrap().t_max, 0.0);
    }
}
