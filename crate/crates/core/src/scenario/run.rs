use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{linspace, ResultBundle, Scenario, ScenarioError, ScenarioKind, Table};
use crate::classical::{
    dwell_time_with, inflaton_toy_with_bound, integrate_with_bound, nearest_hyperbolic,
    optimize_initial_with_bound, reward_with_fixed_points, saddle_points_with, step_count,
    unstable_mode, DwellConfig,
};
use crate::emergence::{
    decay_rate_fit_with_floor, generic_state, hermiticity_defect, survival_fractions_with_tol,
};
use crate::evolution::{evolve_a, evolve_b, AdjointMode};
use crate::linalg::{
    commutator_norm, eig_decompose, fro_norm, CMatrix, CVector, SpectralDecomposition,
};
use crate::maximization::{
    analytic_maximize, default_deg_tol, effective_generator_check, numeric_maximize,
    pair_reality_with_floor, reality_observables, MaximizerResult,
};
use crate::qmetric::{build_q_with_tol, q_adjoint, q_angle, QMetric};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    Qmetric,
    Maximize,
    Emerge,
    Classical,
    Inflaton,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Self::Qmetric => "qmetric",
            Self::Maximize => "maximize",
            Self::Emerge => "emerge",
            Self::Classical => "classical",
            Self::Inflaton => "inflaton",
        }
    }

    /// What a scenario of this kind runs when no pipeline is named.
    pub fn default_for(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::Quantum => Self::Maximize,
            ScenarioKind::Classical => Self::Classical,
            ScenarioKind::Inflaton => Self::Inflaton,
        }
    }

    fn kind(self) -> ScenarioKind {
        match self {
            Self::Qmetric | Self::Maximize | Self::Emerge => ScenarioKind::Quantum,
            Self::Classical => ScenarioKind::Classical,
            Self::Inflaton => ScenarioKind::Inflaton,
        }
    }
}

pub fn run_scenario(s: &Scenario) -> Result<ResultBundle, ScenarioError> {
    run_pipeline(s, Pipeline::default_for(s.kind))
}

pub fn run_pipeline(s: &Scenario, pipeline: Pipeline) -> Result<ResultBundle, ScenarioError> {
    s.validate()?;
    if pipeline.kind() != s.kind {
        return Err(ScenarioError::Validation(format!(
            "pipeline `{}` needs a {:?} scenario, got {:?}",
            pipeline.name(),
            pipeline.kind(),
            s.kind
        )));
    }
    let s = s.resolved();
    let (result, tables) = match pipeline {
        Pipeline::Qmetric => qmetric(&s)?,
        Pipeline::Maximize => maximize(&s)?,
        Pipeline::Emerge => emerge(&s)?,
        Pipeline::Classical => classical(&s)?,
        Pipeline::Inflaton => inflaton(&s)?,
    };
    let summary = json!({
        "name": s.name,
        "kind": s.kind,
        "pipeline": pipeline,
        "seed": s.seed,
        "result": result,
    });
    Ok(ResultBundle {
        pipeline,
        summary,
        tables,
    })
}

type Output = (Value, Vec<Table>);

fn complex_list<'a>(it: impl IntoIterator<Item = &'a num_complex::Complex64>) -> Vec<[f64; 2]> {
    it.into_iter().map(|c| [c.re, c.im]).collect()
}

fn matrix_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| complex_list(m.row(i).iter()))
        .collect()
}

fn quantum_setup(s: &Scenario) -> Result<(CMatrix, SpectralDecomposition, QMetric), ScenarioError> {
    let h = s.hamiltonian.as_ref().expect("validated").build();
    let dec = eig_decompose(&h, &s.tolerances.linalg())
        .map_err(ScenarioError::numerical("diagonalizing H"))?;
    let q = build_q_with_tol(&dec, s.tolerances.q_inverse_tol)
        .map_err(ScenarioError::numerical("building Q"))?;
    Ok((h, dec, q))
}

fn deg_tol(s: &Scenario, dec: &SpectralDecomposition) -> f64 {
    s.tolerances.deg_tol.unwrap_or_else(|| default_deg_tol(dec))
}

fn qmetric(s: &Scenario) -> Result<Output, ScenarioError> {
    let (h, dec, q) = quantum_setup(s)?;
    let n = dec.dim();
    let h_dag_q = q_adjoint(&q, &h).map_err(ScenarioError::numerical("Q-adjoint of H"))?;
    let comm = commutator_norm(&h, &h_dag_q).map_err(ScenarioError::numerical("commutator"))?;
    let h_norm = fro_norm(&h);
    let result = json!({
        "dim": n,
        "eigenvalues": complex_list(&dec.lambda),
        "cond_p": dec.cond_p,
        "max_im": dec.max_im(),
        "positive_definite": q.chol_ok,
        "hermiticity_defect": fro_norm(&(&q.q - q.q.adjoint())),
        "inverse_residual": fro_norm(&(&q.q * &q.q_inv - CMatrix::identity(n, n))),
        "commutator_norm": comm,
        "relative_commutator": comm / (h_norm * h_norm).max(f64::MIN_POSITIVE),
        "q": matrix_rows(&q.q),
    });
    Ok((result, Vec::new()))
}

fn maximizer_json(r: &MaximizerResult) -> Value {
    json!({
        "amplitude": r.amplitude,
        "subspace_dim": r.subspace_dim,
        "iterations": r.iterations,
        "a_star": complex_list(r.a_star.amps().iter()),
        "b_star": complex_list(r.b_star.amps().iter()),
    })
}

fn maximize(s: &Scenario) -> Result<Output, ScenarioError> {
    let (_, dec, q) = quantum_setup(s)?;
    let (t_a, t_b) = (s.times.t_a, s.times.t_b);
    let tol = &s.tolerances;
    let analytic = analytic_maximize(&dec, &q, t_a, t_b, deg_tol(s, &dec))
        .map_err(ScenarioError::numerical("analytic maximization"))?;
    let numeric = numeric_maximize(&dec, &q, t_a, t_b, &s.numeric)
        .map_err(ScenarioError::numerical("numeric maximization"))?;

    let grid = s.times.grid();
    let observables = reality_observables(&q, s.observables.count, s.observables.seed);
    let reality = pair_reality_with_floor(
        &dec,
        &q,
        &analytic.a_star,
        &analytic.b_star,
        t_a,
        t_b,
        &observables,
        &grid,
        tol.reality_tol,
        tol.denom_floor,
    )
    .map_err(ScenarioError::numerical("reality check"))?;

    let mut columns = vec!["time".to_string(), "q_angle".to_string()];
    for k in 0..observables.len() {
        columns.push(format!("re_o{k}"));
        columns.push(format!("im_o{k}"));
    }
    let mut table = Table::new("reality", columns);
    let mut max_angle: f64 = 0.0;
    for sample in &reality.samples {
        let t = sample.t;
        let a = evolve_a(&dec, &analytic.a_star, t_a, t)
            .map_err(ScenarioError::numerical("evolving A"))?;
        let b = evolve_b(&dec, &q, &analytic.b_star, t_b, t, AdjointMode::QDagger)
            .map_err(ScenarioError::numerical("evolving B"))?;
        let angle = q_angle(&q, b.amps(), a.amps()).map_err(ScenarioError::numerical("Q-angle"))?;
        max_angle = max_angle.max(angle);
        let mut row = vec![t, angle];
        for v in &sample.values {
            row.push(v.re);
            row.push(v.im);
        }
        table.push(row);
    }

    let expected = (dec.max_im() * (t_b - t_a)).exp();
    let result = json!({
        "dim": dec.dim(),
        "max_im": dec.max_im(),
        "expected_amplitude": expected,
        "analytic": maximizer_json(&analytic),
        "numeric": maximizer_json(&numeric),
        "amplitude_gap": (analytic.amplitude - numeric.amplitude).abs(),
        "reality": {
            "observables": reality.observables,
            "time_points": reality.time_points,
            "max_abs_im": reality.max_abs_im,
            "pass": reality.pass,
        },
        "proportionality": {
            "max_q_angle": max_angle,
            "pass": max_angle <= tol.proportionality_tol,
        },
        "effective_generator_q_hermitian": effective_generator_check(&dec, &q, &analytic, tol.generator_tol),
    });
    Ok((result, vec![table]))
}

fn emerge(s: &Scenario) -> Result<Output, ScenarioError> {
    let (_, dec, q) = quantum_setup(s)?;
    let e = &s.emergence;
    let grid = linspace(0.0, e.horizon, e.grid_points);
    let psi0: CVector = generic_state(dec.dim(), e.state_seed);
    let series = survival_fractions_with_tol(&dec, &q, &psi0, &grid, deg_tol(s, &dec))
        .map_err(ScenarioError::numerical("survival series"))?;
    let max_im = dec.max_im();
    let rates: Vec<Value> = (0..dec.dim())
        .filter(|&i| !series.top[i])
        .map(|i| {
            let predicted = -2.0 * (max_im - dec.lambda[i].im);
            let fitted = decay_rate_fit_with_floor(&series, i, s.tolerances.fit_weight_floor).ok();
            json!({
                "component": i,
                "predicted": predicted,
                "fitted": fitted,
                "relative_error": fitted.map(|f| ((f - predicted) / predicted).abs()),
            })
        })
        .collect();
    let defect = hermiticity_defect(&dec, &q, &psi0, e.horizon)
        .map_err(ScenarioError::numerical("hermiticity defect"))?;

    let mut columns = vec![
        "time".to_string(),
        "fidelity_top".to_string(),
        "defect".to_string(),
    ];
    columns.extend((0..dec.dim()).map(|i| format!("weight_{i}")));
    let mut table = Table::new("survival", columns);
    for (k, &t) in series.t_grid.iter().enumerate() {
        let mut row = vec![t, series.fidelity_top[k], series.defect[k]];
        row.extend(&series.weights[k]);
        table.push(row);
    }
    let result = json!({
        "dim": dec.dim(),
        "im_lambda": series.im_lambda,
        "top": series.top,
        "rates": rates,
        "final_fidelity_top": series.fidelity_top.last(),
        "hermiticity_defect": defect,
        "horizon": e.horizon,
    });
    Ok((result, vec![table]))
}

fn classical(s: &Scenario) -> Result<Output, ScenarioError> {
    let c = s.classical.as_ref().expect("validated");
    let bound = s.tolerances.blowup_bound;
    let saddles = saddle_points_with(&c.spec, &c.saddle_search)
        .map_err(ScenarioError::numerical("critical points"))?;
    let optimization = match &c.search {
        Some(search) => Some(
            optimize_initial_with_bound(&c.spec, c.horizon, c.dt, search, bound)
                .map_err(ScenarioError::numerical("optimizing the initial condition"))?,
        ),
        None => None,
    };
    let s0 = match (&c.initial, &optimization) {
        (Some(s0), _) => s0.clone(),
        (None, Some(opt)) => opt.s0_star.clone(),
        (None, None) => {
            return Err(ScenarioError::Validation(
                "classical scenario needs `initial` or `search`".into(),
            ))
        }
    };
    let steps = step_count(c.horizon, c.dt).map_err(ScenarioError::numerical("step count"))?;
    let traj = integrate_with_bound(&c.spec, &s0, c.dt, steps, bound)
        .map_err(ScenarioError::numerical("integrating"))?;
    let fixed: Vec<Vec<f64>> = saddles.iter().map(|cp| cp.q.clone()).collect();
    let report = reward_with_fixed_points(&traj, &c.spec, &fixed)
        .map_err(ScenarioError::numerical("reward"))?;

    let dwell = match &c.dwell {
        Some(d) => {
            let cp = nearest_hyperbolic(&c.spec)
                .map_err(ScenarioError::numerical("critical points"))?
                .ok_or_else(|| {
                    ScenarioError::Validation(
                        "dwell requested but V has no hyperbolic point".into(),
                    )
                })?;
            let (rate, _) =
                unstable_mode(&c.spec, &cp).expect("hyperbolic point has an unstable mode");
            let cfg = DwellConfig {
                dt: d.dt,
                time_factor: d.time_factor,
                blowup_bound: bound,
            };
            let r = dwell_time_with(&c.spec, d.delta, d.radius, rate, &cfg)
                .map_err(ScenarioError::numerical("dwell time"))?;
            Some(json!({
                "saddle": cp.q,
                "lyapunov": rate,
                "delta": d.delta,
                "radius": d.radius,
                "measured": r.measured,
                "predicted": r.predicted,
                "ratio": r.measured / r.predicted,
            }))
        }
        None => None,
    };

    let n = c.spec.dim();
    let mut columns = vec!["time".to_string()];
    columns.extend((0..n).map(|i| format!("q{i}")));
    columns.extend((0..n).map(|i| format!("p{i}")));
    columns.push("re_h".into());
    columns.push("im_h".into());
    let mut table = Table::new("trajectory", columns);
    for (k, st) in traj.states.iter().enumerate() {
        let mut row = Vec::with_capacity(2 * n + 3);
        row.push(k as f64 * c.dt);
        row.extend(&st.q);
        row.extend(&st.p);
        row.push(traj.energy[k]);
        row.push(c.spec.im_h(st));
        table.push(row);
    }

    let result = json!({
        "critical_points": saddles,
        "optimization": optimization.as_ref().map(|o| json!({
            "s0_star": o.s0_star,
            "reward_star": o.reward_star,
            "evals": o.evals,
            "restarts": o.restarts.len(),
        })),
        "s0": s0,
        "steps": steps,
        "reward": report,
        "max_energy_drift": traj.max_energy_drift(),
        "reward_ceiling": c.spec.im_h.iter().map(|b| b.weight).fold(0.0, f64::max) * traj.horizon(),
        "dwell": dwell,
    });
    Ok((result, vec![table]))
}

fn inflaton(s: &Scenario) -> Result<Output, ScenarioError> {
    let cfg = s.inflaton.as_ref().expect("validated");
    let report = inflaton_toy_with_bound(cfg, s.tolerances.blowup_bound)
        .map_err(ScenarioError::numerical("inflaton toy"))?;
    let at_origin = report
        .s0_star
        .q
        .iter()
        .chain(&report.s0_star.p)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let mut result = serde_json::to_value(&report).expect("report serializes");
    result["distance_from_origin"] = json!(at_origin);
    Ok((result, Vec::new()))
}
