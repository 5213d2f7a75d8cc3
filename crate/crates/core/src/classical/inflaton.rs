use serde::{Deserialize, Serialize};

use super::hamiltonian::{Bump, ComplexHamiltonianSpec, PhaseState};
use super::integrate::DEFAULT_BLOWUP_BOUND;
use super::optimize::{optimize_initial_with_bound, SearchConfig};
use super::saddle::{exit_times, DwellConfig};
use crate::error::{Error, Result};

/// N uncoupled modes on inverted-quartic tops, rewarded for sitting at the
/// joint origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InflatonConfig {
    pub n_modes: usize,
    /// kappa in V = -kappa q^2/2 + q^4/4.
    pub mode_curvature: f64,
    pub horizon: f64,
    pub dt: f64,
    pub bump_width: f64,
    pub bump_weight: f64,
    /// Initial displacement of every mode for the dwell measurement.
    pub delta: f64,
    /// A mode has left the top once |q_i| reaches this radius.
    pub exit_radius: f64,
    /// Defaults to the cube [-1, 1] in every coordinate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchConfig>,
    /// Time step of the dwell measurement.
    #[serde(default = "default_dwell_dt")]
    pub dwell_dt: f64,
}

fn default_dwell_dt() -> f64 {
    1e-3
}

impl InflatonConfig {
    pub fn new(n_modes: usize) -> Self {
        Self {
            n_modes,
            mode_curvature: 1.0,
            horizon: 6.0,
            dt: 0.01,
            bump_width: 0.5,
            bump_weight: 1.0,
            delta: 1e-8,
            exit_radius: 0.1,
            search: None,
            dwell_dt: default_dwell_dt(),
        }
    }

    pub fn spec(&self) -> ComplexHamiltonianSpec {
        let n = self.n_modes;
        ComplexHamiltonianSpec::inflaton_modes(n, self.mode_curvature).with_bumps(vec![Bump::at(
            vec![0.0; n],
            self.bump_width,
            self.bump_weight,
        )])
    }

    pub fn search_config(&self) -> SearchConfig {
        self.search
            .clone()
            .unwrap_or_else(|| SearchConfig::cube(self.n_modes, -1.0, 1.0))
    }

    fn validate(&self) -> Result<()> {
        if self.n_modes == 0 {
            return Err(Error::Precondition("n_modes must be at least 1".into()));
        }
        if !(self.mode_curvature.is_finite() && self.mode_curvature > 0.0) {
            return Err(Error::Precondition(
                "mode_curvature must be positive".into(),
            ));
        }
        if !(self.delta > 0.0 && self.delta <= self.exit_radius && self.exit_radius.is_finite()) {
            return Err(Error::Precondition("need 0 < delta <= exit_radius".into()));
        }
        if !(self.dwell_dt.is_finite() && self.dwell_dt > 0.0) {
            return Err(Error::Precondition("dwell_dt must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InflatonReport {
    pub n_modes: usize,
    pub mode_curvature: f64,
    pub s0_star: PhaseState,
    pub total_reward: f64,
    /// Reward of staying exactly at the top for the whole horizon.
    pub reward_ceiling: f64,
    pub evals: usize,
    /// Exit time of each mode started at `delta` from the top.
    pub per_mode_dwell: Vec<f64>,
    /// ln(exit_radius / delta) / sqrt(kappa)
    pub predicted_dwell: f64,
    /// Time until the first mode leaves.
    pub joint_dwell: f64,
    /// Joint dwell measured in units of the top's growth time 1/sqrt(kappa).
    pub efolding_analog: f64,
}

pub fn inflaton_toy(cfg: &InflatonConfig) -> Result<InflatonReport> {
    inflaton_toy_with_bound(cfg, DEFAULT_BLOWUP_BOUND)
}

pub fn inflaton_toy_with_bound(cfg: &InflatonConfig, blowup_bound: f64) -> Result<InflatonReport> {
    cfg.validate()?;
    let spec = cfg.spec();
    let opt = optimize_initial_with_bound(
        &spec,
        cfg.horizon,
        cfg.dt,
        &cfg.search_config(),
        blowup_bound,
    )?;

    let rate = cfg.mode_curvature.sqrt();
    let predicted_dwell = (cfg.exit_radius / cfg.delta).ln() / rate;
    let n = cfg.n_modes;
    let s0 = PhaseState::at_rest(vec![cfg.delta; n]);
    let dwell_cfg = DwellConfig {
        dt: cfg.dwell_dt,
        time_factor: 20.0,
        blowup_bound,
    };
    let max_time = dwell_cfg.time_factor * predicted_dwell + 1.0;
    let per_mode_dwell = exit_times(
        &spec,
        &s0,
        &vec![vec![0.0]; n],
        cfg.exit_radius,
        &dwell_cfg,
        max_time,
    )?
    .into_iter()
    .map(|t| {
        t.ok_or(Error::NoConvergence {
            iterations: (max_time / cfg.dwell_dt) as usize,
        })
    })
    .collect::<Result<Vec<f64>>>()?;
    let joint_dwell = per_mode_dwell.iter().copied().fold(f64::INFINITY, f64::min);

    Ok(InflatonReport {
        n_modes: n,
        mode_curvature: cfg.mode_curvature,
        s0_star: opt.s0_star,
        total_reward: opt.reward_star,
        reward_ceiling: cfg.bump_weight * cfg.horizon,
        evals: opt.evals,
        per_mode_dwell,
        predicted_dwell,
        joint_dwell,
        efolding_analog: joint_dwell * rate,
    })
}
