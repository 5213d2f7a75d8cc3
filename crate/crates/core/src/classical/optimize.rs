use std::cell::Cell;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::hamiltonian::{ComplexHamiltonianSpec, PhaseState};
use super::integrate::{reward_from_with_bound, step_count, DEFAULT_BLOWUP_BOUND};
use crate::error::{Error, Result};
use crate::random::{derive_seed, rng};

/// Box search over the flattened initial condition (q_1..q_N, p_1..p_N).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    /// One `[lo, hi]` pair per flattened coordinate.
    pub bounds: Vec<[f64; 2]>,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
    /// Reward evaluations allowed per restart.
    #[serde(default = "default_max_evals")]
    pub max_evals: usize,
    #[serde(default = "default_simplex_tol")]
    pub simplex_tol: f64,
}

fn default_restarts() -> usize {
    8
}
fn default_max_evals() -> usize {
    4000
}
fn default_simplex_tol() -> f64 {
    1e-10
}

impl SearchConfig {
    /// Same `[lo, hi]` for every coordinate of an `n`-mode phase space.
    pub fn cube(n_modes: usize, lo: f64, hi: f64) -> Self {
        Self {
            bounds: vec![[lo, hi]; 2 * n_modes],
            restarts: default_restarts(),
            seed: 0,
            max_evals: default_max_evals(),
            simplex_tol: default_simplex_tol(),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.bounds.len() != 2 * dim {
            return Err(Error::DimMismatch {
                expected: 2 * dim,
                got: self.bounds.len(),
            });
        }
        if self
            .bounds
            .iter()
            .any(|[lo, hi]| !(lo.is_finite() && hi.is_finite() && lo < hi))
        {
            return Err(Error::Precondition(
                "search bounds must satisfy lo < hi".into(),
            ));
        }
        if self.restarts == 0 || self.max_evals < 2 * dim + 2 {
            return Err(Error::Precondition(
                "search needs restarts >= 1 and room for a simplex".into(),
            ));
        }
        if !(self.simplex_tol > 0.0) {
            return Err(Error::Precondition("simplex_tol must be positive".into()));
        }
        Ok(())
    }

    fn clamp(&self, x: &mut [f64]) {
        for (v, [lo, hi]) in x.iter_mut().zip(&self.bounds) {
            *v = v.clamp(*lo, *hi);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub start: PhaseState,
    pub start_reward: f64,
    pub best: PhaseState,
    pub best_reward: f64,
    pub evals: usize,
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub s0_star: PhaseState,
    pub reward_star: f64,
    /// Total reward evaluations over all restarts.
    pub evals: usize,
    pub restarts: Vec<RestartSummary>,
}

/// Multi-start Nelder-Mead maximization of the path reward over the initial
/// condition. Runs that escape to infinity score `-inf`.
pub fn optimize_initial(
    spec: &ComplexHamiltonianSpec,
    horizon: f64,
    dt: f64,
    search: &SearchConfig,
) -> Result<OptResult> {
    optimize_initial_with_bound(spec, horizon, dt, search, DEFAULT_BLOWUP_BOUND)
}

pub fn optimize_initial_with_bound(
    spec: &ComplexHamiltonianSpec,
    horizon: f64,
    dt: f64,
    search: &SearchConfig,
    blowup_bound: f64,
) -> Result<OptResult> {
    spec.validate()?;
    search.validate(spec.dim())?;
    let steps = step_count(horizon, dt)?;
    let objective = |x: &[f64]| -> f64 {
        reward_from_with_bound(spec, &PhaseState::from_flat(x), dt, steps, blowup_bound)
            .unwrap_or(f64::NEG_INFINITY)
    };

    let mut summaries = Vec::with_capacity(search.restarts);
    for r in 0..search.restarts {
        let mut g = rng(derive_seed(search.seed, r as u64));
        let start: Vec<f64> = search
            .bounds
            .iter()
            .map(|[lo, hi]| g.random_range(*lo..*hi))
            .collect();
        let run = nelder_mead(&objective, &start, search);
        summaries.push(RestartSummary {
            start: PhaseState::from_flat(&start),
            start_reward: run.start_value,
            best: PhaseState::from_flat(&run.best),
            best_reward: run.best_value,
            evals: run.evals,
            improved: run.improved,
        });
    }

    if !summaries.iter().any(|s| s.improved) {
        return Err(Error::NoImprovement);
    }
    // first restart wins ties, keeping the reduction deterministic
    let best = summaries
        .iter()
        .fold(None::<&RestartSummary>, |acc, s| match acc {
            Some(a) if a.best_reward >= s.best_reward => Some(a),
            _ => Some(s),
        })
        .expect("at least one restart");
    Ok(OptResult {
        s0_star: best.best.clone(),
        reward_star: best.best_reward,
        evals: summaries.iter().map(|s| s.evals).sum(),
        restarts: summaries,
    })
}

struct NmRun {
    best: Vec<f64>,
    best_value: f64,
    start_value: f64,
    evals: usize,
    improved: bool,
}

/// Downhill simplex maximizing `f` inside the search box.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, start: &[f64], search: &SearchConfig) -> NmRun {
    let n = start.len();
    let evals = Cell::new(0usize);
    let eval = |x: &[f64]| {
        evals.set(evals.get() + 1);
        f(x)
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let start_value = eval(start);
    simplex.push((start.to_vec(), start_value));
    for i in 0..n {
        let [lo, hi] = search.bounds[i];
        let h = 0.1 * (hi - lo);
        let mut x = start.to_vec();
        x[i] = if x[i] + h <= hi { x[i] + h } else { x[i] - h };
        let v = eval(&x);
        simplex.push((x, v));
    }
    let initial_best = simplex
        .iter()
        .map(|s| s.1)
        .fold(f64::NEG_INFINITY, f64::max);

    let order = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| b.1.total_cmp(&a.1));
    order(&mut simplex);

    loop {
        let spread = simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            })
            .fold(0.0f64, f64::max);
        if spread <= search.simplex_tol || evals.get() >= search.max_evals {
            break;
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + t * (c - w))
                .collect();
            search.clamp(&mut p);
            p
        };

        let xr = along(1.0);
        let fr = eval(&xr);
        if fr > simplex[0].1 {
            let xe = along(2.0);
            let fe = eval(&xe);
            simplex[n] = if fe > fr { (xe, fe) } else { (xr, fr) };
        } else if fr > simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            // outside contraction when the reflection beat the worst vertex
            let outside = fr > worst.1;
            let xc = along(if outside { 0.5 } else { -0.5 });
            let fc = eval(&xc);
            let accept = if outside { fc >= fr } else { fc > worst.1 };
            if accept {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = best
                        .iter()
                        .zip(&item.0)
                        .map(|(b, v)| b + 0.5 * (v - b))
                        .collect();
                    let v = eval(&x);
                    *item = (x, v);
                }
            }
        }
        order(&mut simplex);
    }

    let (best, best_value) = simplex.swap_remove(0);
    NmRun {
        improved: best_value > initial_best,
        best,
        best_value,
        start_value,
        evals: evals.get(),
    }
}

/// Best reward over a regular grid with `per_axis` points per coordinate
/// (endpoints included).
pub fn grid_search(
    spec: &ComplexHamiltonianSpec,
    horizon: f64,
    dt: f64,
    bounds: &[[f64; 2]],
    per_axis: usize,
) -> Result<(PhaseState, f64)> {
    spec.validate()?;
    if bounds.len() != 2 * spec.dim() || per_axis < 2 {
        return Err(Error::Precondition(
            "grid needs one bound per coordinate and >= 2 points".into(),
        ));
    }
    let steps = step_count(horizon, dt)?;
    let total = per_axis
        .checked_pow(bounds.len() as u32)
        .filter(|t| *t <= 10_000_000)
        .ok_or_else(|| Error::Precondition("grid too large".into()))?;
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut x = vec![0.0; bounds.len()];
    for mut idx in 0..total {
        for (v, [lo, hi]) in x.iter_mut().zip(bounds) {
            let k = idx % per_axis;
            idx /= per_axis;
            *v = lo + (hi - lo) * k as f64 / (per_axis - 1) as f64;
        }
        let r = reward_from_with_bound(
            spec,
            &PhaseState::from_flat(&x),
            dt,
            steps,
            DEFAULT_BLOWUP_BOUND,
        )
        .unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().is_none_or(|b| r > b.1) {
            best = Some((x.clone(), r));
        }
    }
    let (x, r) = best.expect("non-empty grid");
    Ok((PhaseState::from_flat(&x), r))
}
