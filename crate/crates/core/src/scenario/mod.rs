//! JSON scenario documents, pipeline dispatch and result bundles.
//!
//! A scenario fixes every seed and tolerance a pipeline uses, so a run is a
//! pure function of the document.

mod bundle;
mod run;

use serde::{Deserialize, Serialize};
use thiserror::Error as ThisError;

use crate::classical::{
    ComplexHamiltonianSpec, DwellConfig, InflatonConfig, PhaseState, SaddleSearch, SearchConfig,
};
use crate::linalg::{CMatrix, LinalgConfig};
use crate::maximization::NumericConfig;
use crate::random::{derive_seed, random_diagonalizable, DiagonalizableParams};
use num_complex::Complex64 as C64;

pub use bundle::{ResultBundle, Table};
pub use run::{run_pipeline, run_scenario, Pipeline};

#[derive(Debug, ThisError)]
pub enum ScenarioError {
    #[error("scenario parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid scenario: {0}")]
    Validation(String),

    #[error("{context}: {source}")]
    Numerical {
        context: String,
        #[source]
        source: crate::Error,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl ScenarioError {
    /// Process exit status for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse { .. } | Self::Validation(_) => 2,
            Self::Numerical { source, .. } => match source {
                crate::Error::Precondition(_)
                | crate::Error::DimMismatch { .. }
                | crate::Error::InvalidMatrix(_) => 2,
                _ => 3,
            },
            Self::Io(_) => 1,
        }
    }

    pub(crate) fn numerical(context: impl Into<String>) -> impl FnOnce(crate::Error) -> Self {
        let context = context.into();
        move |source| Self::Numerical { context, source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Quantum,
    Classical,
    Inflaton,
}

/// Exactly one source for H.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianSource {
    /// Rows of `[re, im]` entries.
    Matrix(Vec<Vec<[f64; 2]>>),
    RandomDiagonalizable(RandomDiagonalizable),
    /// H = [[0, 1], [0, i]]
    #[serde(rename = "standard_2x2")]
    Standard2x2 {},
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomDiagonalizable {
    pub dim: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub im_spread: f64,
    #[serde(default = "default_top_gap")]
    pub top_gap: f64,
    #[serde(default = "default_max_cond")]
    pub max_cond: f64,
}

fn one() -> f64 {
    1.0
}
fn default_top_gap() -> f64 {
    0.1
}
fn default_max_cond() -> f64 {
    1e3
}

impl HamiltonianSource {
    pub fn build(&self) -> CMatrix {
        match self {
            Self::Matrix(rows) => {
                let n = rows.len();
                CMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j][0], rows[i][j][1]))
            }
            Self::RandomDiagonalizable(r) => random_diagonalizable(&DiagonalizableParams {
                dim: r.dim,
                seed: r.seed,
                im_spread: r.im_spread,
                top_gap: r.top_gap,
                max_cond: r.max_cond,
            }),
            Self::Standard2x2 {} => CMatrix::from_row_slice(
                2,
                2,
                &[
                    C64::new(0.0, 0.0),
                    C64::new(1.0, 0.0),
                    C64::new(0.0, 0.0),
                    C64::new(0.0, 1.0),
                ],
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Times {
    pub t_a: f64,
    pub t_b: f64,
    /// Points of the evaluation grid on [t_a, t_b], endpoints included.
    pub grid_points: usize,
}

impl Default for Times {
    fn default() -> Self {
        Self {
            t_a: 0.0,
            t_b: 1.0,
            grid_points: 10,
        }
    }
}

impl Times {
    pub fn grid(&self) -> Vec<f64> {
        linspace(self.t_a, self.t_b, self.grid_points)
    }
}

pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|k| {
            if k + 1 == n {
                b
            } else {
                a + (b - a) * k as f64 / (n - 1) as f64
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Observables {
    pub count: usize,
    pub seed: u64,
}

impl Default for Observables {
    fn default() -> Self {
        Self { count: 20, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmergenceSettings {
    /// Survival series runs over [0, horizon].
    pub horizon: f64,
    pub grid_points: usize,
    /// Seed of the generic initial state.
    pub state_seed: u64,
}

impl Default for EmergenceSettings {
    fn default() -> Self {
        Self {
            horizon: 20.0,
            grid_points: 101,
            state_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DwellSettings {
    pub delta: f64,
    pub radius: f64,
    #[serde(default = "default_dwell_dt")]
    pub dt: f64,
    /// Give up after this multiple of the predicted dwell (plus one unit).
    #[serde(default = "default_time_factor")]
    pub time_factor: f64,
}

fn default_dwell_dt() -> f64 {
    DwellConfig::default().dt
}
fn default_time_factor() -> f64 {
    DwellConfig::default().time_factor
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalSettings {
    pub spec: ComplexHamiltonianSpec,
    pub horizon: f64,
    pub dt: f64,
    /// Start of the reported trajectory; the optimizer's choice when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<PhaseState>,
    /// Box search for the reward maximum; skipped when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dwell: Option<DwellSettings>,
    #[serde(default)]
    pub saddle_search: SaddleSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub tol_recon: f64,
    pub cond_ceiling: f64,
    pub overflow_ceiling: f64,
    /// Allowed |Q Q^-1 - I| when certifying the metric.
    pub q_inverse_tol: f64,
    /// Width of the top eigenspace; scaled from max Im lambda when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deg_tol: Option<f64>,
    pub reality_tol: f64,
    pub proportionality_tol: f64,
    /// Relative tolerance of the Q-Hermiticity check of the surviving generator.
    pub generator_tol: f64,
    /// Largest |q| or |p| before a classical run counts as escaped.
    pub blowup_bound: f64,
    /// Relative gap under which eigenvalues count as tied when ordering.
    pub tie_tol: f64,
    /// Relative floor on weak-value denominators.
    pub denom_floor: f64,
    /// Survival weights at or below this are left out of rate fits.
    pub fit_weight_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let l = LinalgConfig::default();
        Self {
            tol_recon: l.tol_recon,
            cond_ceiling: l.cond_ceiling,
            overflow_ceiling: l.overflow_ceiling,
            q_inverse_tol: crate::qmetric::INVERSE_TOL,
            deg_tol: None,
            reality_tol: 1e-8,
            proportionality_tol: 1e-7,
            generator_tol: 1e-8,
            blowup_bound: crate::classical::DEFAULT_BLOWUP_BOUND,
            tie_tol: l.tie_tol,
            denom_floor: crate::evolution::DENOM_FLOOR,
            fit_weight_floor: crate::emergence::FIT_WEIGHT_FLOOR,
        }
    }
}

impl Tolerances {
    pub fn linalg(&self) -> LinalgConfig {
        LinalgConfig {
            tol_recon: self.tol_recon,
            cond_ceiling: self.cond_ceiling,
            overflow_ceiling: self.overflow_ceiling,
            tie_tol: self.tie_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub kind: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// When set, replaces every component seed by a stream derived from it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<HamiltonianSource>,
    #[serde(default)]
    pub times: Times,
    #[serde(default)]
    pub observables: Observables,
    #[serde(default)]
    pub numeric: NumericConfig,
    #[serde(default)]
    pub emergence: EmergenceSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classical: Option<ClassicalSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inflaton: Option<InflatonConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

// Stream ids for seeds derived from the top-level seed.
const STREAM_HAMILTONIAN: u64 = 1;
const STREAM_OBSERVABLES: u64 = 2;
const STREAM_NUMERIC: u64 = 3;
const STREAM_STATE: u64 = 4;
const STREAM_SEARCH: u64 = 5;
const STREAM_SADDLES: u64 = 6;

impl Scenario {
    /// Copy with the component seeds replaced according to `seed`, if set.
    pub fn resolved(&self) -> Scenario {
        let mut s = self.clone();
        let Some(base) = s.seed else {
            return s;
        };
        if let Some(HamiltonianSource::RandomDiagonalizable(r)) = &mut s.hamiltonian {
            r.seed = derive_seed(base, STREAM_HAMILTONIAN);
        }
        s.observables.seed = derive_seed(base, STREAM_OBSERVABLES);
        s.numeric.seed = derive_seed(base, STREAM_NUMERIC);
        s.emergence.state_seed = derive_seed(base, STREAM_STATE);
        if let Some(c) = &mut s.classical {
            if let Some(search) = &mut c.search {
                search.seed = derive_seed(base, STREAM_SEARCH);
            }
            c.saddle_search.seed = derive_seed(base, STREAM_SADDLES);
        }
        if let Some(i) = &mut s.inflaton {
            let mut search = i.search_config();
            search.seed = derive_seed(base, STREAM_SEARCH);
            i.search = Some(search);
        }
        s
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Validation(m));
        match self.kind {
            ScenarioKind::Quantum if self.hamiltonian.is_none() => {
                return bad("quantum scenario needs a `hamiltonian`".into());
            }
            ScenarioKind::Classical if self.classical.is_none() => {
                return bad("classical scenario needs a `classical` section".into());
            }
            ScenarioKind::Inflaton if self.inflaton.is_none() => {
                return bad("inflaton scenario needs an `inflaton` section".into());
            }
            _ => {}
        }
        match &self.hamiltonian {
            Some(HamiltonianSource::Matrix(rows)) => {
                let n = rows.len();
                if n == 0 || rows.iter().any(|r| r.len() != n) {
                    return bad("hamiltonian.matrix must be a non-empty square list of rows".into());
                }
                if rows.iter().flatten().flatten().any(|x| !x.is_finite()) {
                    return bad("hamiltonian.matrix entries must be finite".into());
                }
            }
            Some(HamiltonianSource::RandomDiagonalizable(r)) => {
                if r.dim == 0 {
                    return bad("random_diagonalizable.dim must be at least 1".into());
                }
                if !(r.im_spread >= 0.0 && r.top_gap >= 0.0 && r.max_cond > 1.0) {
                    return bad(
                        "random_diagonalizable needs im_spread, top_gap >= 0 and max_cond > 1"
                            .into(),
                    );
                }
            }
            _ => {}
        }
        let t = &self.times;
        if !(t.t_a.is_finite() && t.t_b.is_finite() && t.t_b > t.t_a) {
            return bad(format!("times need t_a < t_b, got [{}, {}]", t.t_a, t.t_b));
        }
        if t.grid_points < 2 {
            return bad("times.grid_points must be at least 2".into());
        }
        let e = &self.emergence;
        if !(e.horizon > 0.0 && e.horizon.is_finite()) || e.grid_points < 2 {
            return bad("emergence needs horizon > 0 and grid_points >= 2".into());
        }
        if self.numeric.restarts == 0
            || self.numeric.max_iters == 0
            || !(self.numeric.step_tol > 0.0)
        {
            return bad("numeric needs restarts, max_iters and step_tol all positive".into());
        }
        let tol = &self.tolerances;
        let named = [
            ("tol_recon", tol.tol_recon),
            ("cond_ceiling", tol.cond_ceiling),
            ("overflow_ceiling", tol.overflow_ceiling),
            ("q_inverse_tol", tol.q_inverse_tol),
            ("reality_tol", tol.reality_tol),
            ("proportionality_tol", tol.proportionality_tol),
            ("generator_tol", tol.generator_tol),
            ("blowup_bound", tol.blowup_bound),
            ("tie_tol", tol.tie_tol),
            ("denom_floor", tol.denom_floor),
            ("fit_weight_floor", tol.fit_weight_floor),
            ("deg_tol", tol.deg_tol.unwrap_or(1.0)),
        ];
        if let Some((name, v)) = named.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return bad(format!(
                "tolerances.{name} must be positive and finite, got {v}"
            ));
        }
        if tol.overflow_ceiling <= 1.0 {
            return bad("tolerances.overflow_ceiling must exceed 1".into());
        }
        if let Some(c) = &self.classical {
            c.spec
                .validate()
                .map_err(|e| ScenarioError::Validation(format!("classical.spec: {e}")))?;
            if !(c.dt > 0.0 && c.horizon > 0.0) {
                return bad("classical needs horizon > 0 and dt > 0".into());
            }
            crate::classical::step_count(c.horizon, c.dt)
                .map_err(|e| ScenarioError::Validation(format!("classical: {e}")))?;
            if let Some(s0) = &c.initial {
                if s0.validate().is_err() || s0.dim() != c.spec.dim() {
                    return bad(
                        "classical.initial must be finite with one q and p per coordinate".into(),
                    );
                }
            }
            if let Some(d) = &c.dwell {
                if !(d.delta > 0.0 && d.delta <= d.radius && d.dt > 0.0 && d.time_factor > 0.0) {
                    return bad(
                        "classical.dwell needs 0 < delta <= radius and dt, time_factor > 0".into(),
                    );
                }
            }
        }
        if let Some(i) = &self.inflaton {
            if i.n_modes == 0 || !(i.mode_curvature > 0.0) {
                return bad("inflaton needs n_modes >= 1 and mode_curvature > 0".into());
            }
            if !(i.bump_width > 0.0 && i.delta > 0.0 && i.delta <= i.exit_radius) {
                return bad("inflaton needs bump_width > 0 and 0 < delta <= exit_radius".into());
            }
            crate::classical::step_count(i.horizon, i.dt)
                .map_err(|e| ScenarioError::Validation(format!("inflaton: {e}")))?;
        }
        Ok(())
    }
}

/// Parse and validate a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let s: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    s.validate()?;
    Ok(s)
}

pub fn serialize_scenario(s: &Scenario) -> String {
    serde_json::to_string_pretty(s).expect("scenario types always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_quantum_defaults() {
        let s =
            parse_scenario(r#"{"kind": "quantum", "hamiltonian": {"standard_2x2": {}}}"#).unwrap();
        assert_eq!(s.times.t_a, 0.0);
        assert_eq!(s.times.t_b, 1.0);
        assert_eq!(s.observables.count, 20);
        assert_eq!(s.tolerances, Tolerances::default());
        assert_eq!(s.hamiltonian.unwrap().build()[(1, 1)], C64::new(0.0, 1.0));
    }

    #[test]
    fn matrix_entry_must_be_pair() {
        let err = parse_scenario(
            r#"{"kind": "quantum",
  "hamiltonian": {"matrix": [[[0, 0], [1, 0]], [[0, 0], [0, 1, 2]]]}}"#,
        )
        .unwrap_err();
        match err {
            ScenarioError::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = parse_scenario(
            r#"{"kind": "quantum", "hamiltonian": {"standard_2x2": {}}, "colour": 1}"#,
        );
        assert!(matches!(err, Err(ScenarioError::Parse { .. })));
        let err = parse_scenario(
            r#"{"kind": "quantum", "hamiltonian": {"standard_2x2": {}}, "times": {"T_A": 1}}"#,
        );
        assert!(matches!(err, Err(ScenarioError::Parse { .. })));
    }

    #[test]
    fn two_sources_rejected() {
        let err = parse_scenario(
            r#"{"kind": "quantum", "hamiltonian": {"standard_2x2": {}, "random_diagonalizable": {"dim": 3}}}"#,
        );
        assert!(matches!(err, Err(ScenarioError::Parse { .. })));
    }

    #[test]
    fn validation_errors_name_the_field() {
        let err = parse_scenario(
            r#"{"kind": "quantum", "hamiltonian": {"standard_2x2": {}}, "times": {"t_a": 2}}"#,
        )
        .unwrap_err();
        assert!(matches!(err, ScenarioError::Validation(ref m) if m.contains("t_a")));
        let err = parse_scenario(
            r#"{"kind": "quantum", "hamiltonian": {"standard_2x2": {}}, "tolerances": {"reality_tol": -1}}"#,
        )
        .unwrap_err();
        assert!(matches!(err, ScenarioError::Validation(ref m) if m.contains("reality_tol")));
        assert_eq!(err.exit_code(), 2);
        let err = parse_scenario(r#"{"kind": "classical"}"#).unwrap_err();
        assert!(matches!(err, ScenarioError::Validation(_)));
    }

    #[test]
    fn top_level_seed_replaces_component_seeds() {
        let s = parse_scenario(
            r#"{"kind": "quantum", "seed": 5, "hamiltonian": {"random_diagonalizable": {"dim": 3, "seed": 1}}}"#,
        )
        .unwrap();
        let r = s.resolved();
        assert_eq!(r.observables.seed, derive_seed(5, STREAM_OBSERVABLES));
        assert!(
            matches!(r.hamiltonian, Some(HamiltonianSource::RandomDiagonalizable(ref h)) if h.seed != 1)
        );
        let mut unseeded = s.clone();
        unseeded.seed = None;
        assert_eq!(unseeded.resolved(), unseeded);
    }

    #[test]
    fn linspace_endpoints() {
        let g = linspace(0.3, 1.7, 7);
        assert_eq!(g[0], 0.3);
        assert_eq!(g[6], 1.7);
    }
}
