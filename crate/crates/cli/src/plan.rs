//! Verification plans, tolerances and scenario loading.

use std::path::{Path, PathBuf};

use mixlab_core::balances::{BinaryScenario, SkewConvention};
use mixlab_core::report::Richardson;
use mixlab_core::simulate::ScenarioConfig;
use mixlab_core::{Grid, Vec3};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Operators,
    TheoremForward,
    TheoremReverse,
    Energetics,
    Covariance,
    Simulate,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Operators,
        Suite::TheoremForward,
        Suite::TheoremReverse,
        Suite::Energetics,
        Suite::Covariance,
        Suite::Simulate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Operators => "operators",
            Suite::TheoremForward => "theorem-forward",
            Suite::TheoremReverse => "theorem-reverse",
            Suite::Energetics => "energetics",
            Suite::Covariance => "covariance",
            Suite::Simulate => "simulate",
        }
    }

    pub fn needs_adjudication(self) -> bool {
        matches!(self, Suite::TheoremForward | Suite::TheoremReverse | Suite::Energetics | Suite::Covariance)
    }
}

/// Thresholds used by the suites. Every field has a default, so a plan may override any subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub richardson: Richardson,
    /// Half-width of the accepted window around the expected order 2.
    pub order_window: f64,
    /// Quadrature identities and exact sums, relative to the largest term.
    pub identity: f64,
    pub energy_form: f64,
    pub energy_growth_sum: f64,
    pub metric_fd: f64,
    pub rigid_cross_check: f64,
    pub lie_identity: f64,
    pub mass_drift: f64,
    pub momentum_drift: f64,
    pub drag_relaxation: f64,
    pub halving_ratio: f64,
    /// Relative distance between the last localized part average and the pointwise value.
    pub localization: f64,
    /// Reversible entropy margin, relative to the largest term.
    pub entropy_margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            richardson: Richardson::default(),
            order_window: 0.2,
            identity: 1e-12,
            energy_form: 1e-13,
            energy_growth_sum: 1e-14,
            metric_fd: 1e-8,
            rigid_cross_check: 1e-10,
            lie_identity: 1e-14,
            mass_drift: 1e-12,
            momentum_drift: 1e-10,
            drag_relaxation: 1e-4,
            halving_ratio: 3.0,
            localization: 0.05,
            entropy_margin: 1e-6,
        }
    }
}

/// Binary scenario for the theorem suites, with an optional imbalance added to
/// the last constituent's momentum growth after closure.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TheoremScenario {
    #[serde(flatten)]
    pub binary: BinaryScenario,
    #[serde(default)]
    pub growth_imbalance: [f64; 3],
}

impl TheoremScenario {
    pub fn preset(name: &str) -> Option<Self> {
        let binary = match name {
            "zero" => BinaryScenario::zero(),
            "trig" => BinaryScenario::trig(),
            "elastic" => BinaryScenario::elastic(),
            "co-moving-shear" => BinaryScenario::co_moving_shear(),
            _ => return None,
        };
        Some(Self { binary, growth_imbalance: [0.0; 3] })
    }

    pub fn imbalance(&self) -> Vec3 {
        Vec3::from(self.growth_imbalance)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerificationPlan {
    /// Preset name (`zero`, `trig`, `elastic`, `co-moving-shear`) or a path to a scenario JSON file.
    pub scenario: String,
    /// Simulation config for the simulate suite; the built-in demo when absent.
    pub simulation: Option<String>,
    pub suites: Vec<Suite>,
    /// Grid sizes for convergence studies, coarse to fine.
    pub grids: Vec<usize>,
    /// Nodes per axis of the simulate suite's grid.
    pub simulation_grid: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub time: f64,
    /// Snapshot spacing for time-differenced rates.
    pub time_step: f64,
    pub tolerances: Tolerances,
    /// Skew convention for the theorem suites; adjudicated when absent.
    pub convention: Option<SkewConvention>,
    /// Directory that relative scenario paths are resolved against; set by [`load_plan`].
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for VerificationPlan {
    fn default() -> Self {
        Self {
            scenario: "trig".into(),
            simulation: None,
            suites: Suite::ALL.to_vec(),
            grids: vec![16, 32, 64],
            simulation_grid: 8,
            seed: 20_240_601,
            output_dir: PathBuf::from("mixlab-out"),
            time: 0.3,
            time_step: 1e-3,
            tolerances: Tolerances::default(),
            convention: None,
            base_dir: PathBuf::from("."),
        }
    }
}

impl VerificationPlan {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Parse(m.into()));
        if self.suites.is_empty() {
            return bad("plan must name at least one suite");
        }
        if self.grids.len() < 2
            || self.grids.windows(2).any(|w| w[1] != 2 * w[0])
            || self.grids[0] < 16
            || !self.grids[0].is_multiple_of(8)
        {
            return bad("grids must hold at least two sizes, each twice the previous, starting at a multiple of 8 no smaller than 16");
        }
        if self.simulation_grid < 4 {
            return bad("simulation_grid must be at least 4");
        }
        if !(self.time_step > 0.0 && self.time_step.is_finite() && self.time.is_finite()) {
            return bad("time and time_step must be finite, time_step positive");
        }
        Ok(())
    }

    /// Coarse and fine sizes of the theorem suites: the first two grids.
    pub fn theorem_grids(&self) -> [usize; 2] {
        [self.grids[0], self.grids[1]]
    }

    pub fn grid(&self, n: usize) -> Grid {
        Grid::periodic_cube(n, 2.0 * std::f64::consts::PI).expect("grid sizes are validated")
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        let path = Path::new(p);
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn load_scenario(&self) -> Result<TheoremScenario, CliError> {
        if let Some(s) = TheoremScenario::preset(&self.scenario) {
            return Ok(s);
        }
        let path = self.resolve(&self.scenario);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        let s: TheoremScenario =
            serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        s.binary.validate().map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        Ok(s)
    }

    pub fn load_simulation(&self) -> Result<ScenarioConfig, CliError> {
        match &self.simulation {
            None => {
                let mut c = ScenarioConfig::demo();
                c.grid.n = self.simulation_grid;
                Ok(c)
            }
            Some(p) => load_scenario_config(&self.resolve(p)),
        }
    }
}

pub fn load_plan(path: &Path) -> Result<VerificationPlan, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let mut plan: VerificationPlan =
        serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    plan.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    plan.validate()?;
    Ok(plan)
}

pub fn load_scenario_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let c: ScenarioConfig =
        serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    c.validate().map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_plan_takes_defaults() {
        let p: VerificationPlan = serde_json::from_str("{}").unwrap();
        assert_eq!(p, VerificationPlan::default());
        assert_eq!(p.suites, Suite::ALL.to_vec());
        p.validate().unwrap();
    }

    #[test]
    fn suites_use_kebab_case() {
        let p: VerificationPlan = serde_json::from_str(r#"{"suites": ["theorem-forward", "simulate"]}"#).unwrap();
        assert_eq!(p.suites, vec![Suite::TheoremForward, Suite::Simulate]);
        assert!(p.suites[0].needs_adjudication());
        assert!(!p.suites[1].needs_adjudication());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<VerificationPlan>(r#"{"grid": [16]}"#).is_err());
        assert!(serde_json::from_str::<VerificationPlan>(r#"{"tolerances": {"idenity": 1}}"#).is_err());
    }

    #[test]
    fn partial_tolerances_keep_other_defaults() {
        let p: VerificationPlan = serde_json::from_str(r#"{"tolerances": {"identity": 1e-9}}"#).unwrap();
        assert_eq!(p.tolerances.identity, 1e-9);
        assert_eq!(p.tolerances.halving_ratio, Tolerances::default().halving_ratio);
    }

    #[test]
    fn grids_must_double() {
        for grids in [vec![16], vec![16, 24], vec![8, 16], vec![12, 24], vec![20, 40], vec![16, 32, 48]] {
            let p = VerificationPlan { grids, ..Default::default() };
            assert!(matches!(p.validate(), Err(CliError::Parse(_))));
        }
        let p = VerificationPlan { grids: vec![24, 48], ..Default::default() };
        p.validate().unwrap();
        assert_eq!(p.theorem_grids(), [24, 48]);
    }

    #[test]
    fn presets_and_missing_scenarios() {
        for name in ["zero", "trig", "elastic", "co-moving-shear"] {
            assert!(TheoremScenario::preset(name).is_some(), "{name}");
        }
        let p = VerificationPlan { scenario: "no-such-file.json".into(), ..Default::default() };
        assert!(matches!(p.load_scenario(), Err(CliError::Parse(_))));
    }

    #[test]
    fn scenario_file_round_trips_with_imbalance() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = TheoremScenario::preset("trig").unwrap();
        s.growth_imbalance = [0.1, 0.0, -0.2];
        std::fs::write(dir.path().join("s.json"), serde_json::to_string(&s).unwrap()).unwrap();
        std::fs::write(dir.path().join("plan.json"), r#"{"scenario": "s.json"}"#).unwrap();
        let plan = load_plan(&dir.path().join("plan.json")).unwrap();
        let back = plan.load_scenario().unwrap();
        assert_eq!(back.imbalance(), Vec3::new(0.1, 0.0, -0.2));
    }

    #[test]
    fn simulation_defaults_to_demo_at_plan_grid() {
        let p = VerificationPlan { simulation_grid: 6, ..Default::default() };
        assert_eq!(p.load_simulation().unwrap().grid.n, 6);
    }

    #[test]
    fn relative_paths_resolve_against_plan_dir() {
        let p = VerificationPlan { base_dir: PathBuf::from("/a/b"), ..Default::default() };
        assert_eq!(p.resolve("c.json"), PathBuf::from("/a/b/c.json"));
        assert_eq!(p.resolve("/x.json"), PathBuf::from("/x.json"));
    }
}
