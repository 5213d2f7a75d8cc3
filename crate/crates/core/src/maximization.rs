//! Maximization of the transition amplitude |<B(T_B)|_Q exp(-i H dT)|A(T_A)>|
//! over Q-normalized boundary states, and verification that the resulting
//! normalized matrix elements of Q-Hermitian observables are real.
//!
//! In the Q-orthonormal eigenbasis the amplitude is
//! |sum_i conj(b_i) a_i exp(-i lambda_i dT)| <= exp(max Im lambda dT), with
//! equality exactly when |A> lives in the max-Im eigenspace and |B> is the
//! normalized image of |A>. [`analytic_maximize`] builds that optimum directly;
//! [`numeric_maximize`] finds it by alternating optimization without using the
//! spectrum.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{
    evolve_a, evolve_b, q_matrix_element_with_floor, AdjointMode, StateVector, DENOM_FLOOR,
};
use crate::linalg::{mat_exp_prop, CMatrix, CVector, SpectralDecomposition};
use crate::qmetric::{is_q_hermitian, q_adjoint, q_inner, q_norm, random_q_hermitian, QMetric};
use crate::random::{derive_seed, random_cvector, rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Analytic,
    Numeric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximizerResult {
    /// Q-normalized |A(T_A)>
    pub a_star: StateVector,
    /// Q-normalized |B(T_B)>
    pub b_star: StateVector,
    pub amplitude: f64,
    pub max_im: f64,
    pub subspace_dim: usize,
    pub method: Method,
    pub t_a: f64,
    pub t_b: f64,
    /// Power-iteration steps of the winning restart (0 for analytic).
    pub iterations: usize,
    /// Objective value after each iteration of the winning restart.
    pub objective_trace: Vec<f64>,
}

/// Default width of the top eigenspace: 1e-9 max(1, |max Im lambda|).
pub fn default_deg_tol(dec: &SpectralDecomposition) -> f64 {
    1e-9 * dec.max_im().abs().max(1.0)
}

fn check_window(t_a: f64, t_b: f64) -> Result<()> {
    if !(t_b > t_a) {
        return Err(Error::Precondition(format!(
            "need T_B > T_A, got [{t_a}, {t_b}]"
        )));
    }
    Ok(())
}

/// Q-normalized image of `a` under `u`, and the amplitude it attains.
fn best_partner(q: &QMetric, u: &CMatrix, a: &CVector) -> Result<(CVector, f64)> {
    let ua = u * a;
    let amp = q_norm(q, &ua)?;
    if amp == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((ua.unscale(amp), amp))
}

/// Closed-form optimum. In the degenerate case |A(T_A)> is the Q-uniform
/// superposition of the top eigenvectors.
pub fn analytic_maximize(
    dec: &SpectralDecomposition,
    q: &QMetric,
    t_a: f64,
    t_b: f64,
    deg_tol: f64,
) -> Result<MaximizerResult> {
    check_window(t_a, t_b)?;
    let top = dec.top_indices(deg_tol);
    let mut a = CVector::zeros(dec.dim());
    for &k in &top {
        a += dec.p.column(k);
    }
    let a = StateVector::a(a)?.q_normalized(q)?;
    let u = mat_exp_prop(dec, t_b - t_a)?;
    let (b, _) = best_partner(q, &u, a.amps())?;
    let amplitude = q_inner(q, &b, &(&u * a.amps()))?.norm();
    Ok(MaximizerResult {
        a_star: a,
        b_star: StateVector::b(b)?,
        amplitude,
        max_im: dec.max_im(),
        subspace_dim: top.len(),
        method: Method::Analytic,
        t_a,
        t_b,
        iterations: 0,
        objective_trace: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericConfig {
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Relative change of the amplitude below which a restart has converged.
    pub step_tol: f64,
}

impl Default for NumericConfig {
    fn default() -> Self {
        Self {
            restarts: 4,
            seed: 0,
            max_iters: 20_000,
            step_tol: 1e-14,
        }
    }
}

/// Alternating maximization from random starts.
///
/// For fixed |A> the best |B> is the Q-normalized image U|A>, leaving the
/// objective |U A|_Q. That is ascended by the power step
/// A <- U^{dag_Q} U A / |U^{dag_Q} U A|_Q, whose Rayleigh quotient never
/// decreases. Restarts are reduced by best amplitude, earliest index first.
pub fn numeric_maximize(
    dec: &SpectralDecomposition,
    q: &QMetric,
    t_a: f64,
    t_b: f64,
    cfg: &NumericConfig,
) -> Result<MaximizerResult> {
    check_window(t_a, t_b)?;
    if cfg.restarts == 0 {
        return Err(Error::Precondition("restarts must be at least 1".into()));
    }
    let n = dec.dim();
    let u = mat_exp_prop(dec, t_b - t_a)?;
    let gram = q_adjoint(q, &u)? * &u;

    let mut best: Option<(f64, CVector, usize, Vec<f64>)> = None;
    for restart in 0..cfg.restarts {
        let mut r = rng(derive_seed(cfg.seed, restart as u64));
        let mut a = random_cvector(&mut r, n);
        a.unscale_mut(q_norm(q, &a)?);
        let mut amp = q_norm(q, &(&u * &a))?;
        let mut trace = vec![amp];
        let mut converged = false;
        let mut iterations = 0;
        while iterations < cfg.max_iters {
            iterations += 1;
            let next = &gram * &a;
            let norm = q_norm(q, &next)?;
            if norm == 0.0 {
                return Err(Error::ZeroNorm);
            }
            a = next.unscale(norm);
            let next_amp = q_norm(q, &(&u * &a))?;
            trace.push(next_amp);
            let change = (next_amp - amp).abs();
            amp = next_amp;
            if change <= cfg.step_tol * amp {
                converged = true;
                break;
            }
        }
        if !converged {
            continue;
        }
        if best.as_ref().is_none_or(|(b, ..)| amp > *b) {
            best = Some((amp, a, iterations, trace));
        }
    }

    let (_, a, iterations, trace) = best.ok_or(Error::NoConvergence {
        iterations: cfg.max_iters,
    })?;
    let (b, _) = best_partner(q, &u, &a)?;
    let amplitude = q_inner(q, &b, &(&u * &a))?.norm();
    let deg_tol = default_deg_tol(dec);
    Ok(MaximizerResult {
        a_star: StateVector::a(a)?,
        b_star: StateVector::b(b)?,
        amplitude,
        max_im: dec.max_im(),
        subspace_dim: dec.top_indices(deg_tol).len(),
        method: Method::Numeric,
        t_a,
        t_b,
        iterations,
        objective_trace: trace,
    })
}

/// |<b|_Q exp(-i H dT) a>| for Q-normalized a and b.
pub fn transition_amplitude(
    dec: &SpectralDecomposition,
    q: &QMetric,
    a: &StateVector,
    b: &StateVector,
    dt: f64,
) -> Result<f64> {
    let u = mat_exp_prop(dec, dt)?;
    let a = a.q_normalized(q)?;
    let b = b.q_normalized(q)?;
    Ok(q_inner(q, b.amps(), &(u * a.amps()))?.norm())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealitySample {
    pub t: f64,
    /// <O_k>^{BA}_Q for each observable.
    pub values: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealityReport {
    pub observables: usize,
    pub time_points: usize,
    pub max_abs_im: f64,
    pub pass: bool,
    pub samples: Vec<RealitySample>,
}

/// Observables used by [`verify_reality`]: the identity first, then seeded
/// random Q-Hermitian matrices.
pub fn reality_observables(q: &QMetric, n_observables: usize, seed: u64) -> Vec<CMatrix> {
    let mut obs = Vec::with_capacity(n_observables);
    if n_observables > 0 {
        obs.push(CMatrix::identity(q.dim(), q.dim()));
    }
    for k in 1..n_observables {
        obs.push(random_q_hermitian(q, derive_seed(seed, k as u64)));
    }
    obs
}

/// Evaluate <O>^{BA}_Q along `t_grid` with |A> evolved by H from T_A and |B>
/// evolved by H^{dag_Q} from T_B.
#[allow(clippy::too_many_arguments)]
pub fn pair_reality(
    dec: &SpectralDecomposition,
    q: &QMetric,
    a_ta: &StateVector,
    b_tb: &StateVector,
    t_a: f64,
    t_b: f64,
    observables: &[CMatrix],
    t_grid: &[f64],
    tol: f64,
) -> Result<RealityReport> {
    pair_reality_with_floor(
        dec,
        q,
        a_ta,
        b_tb,
        t_a,
        t_b,
        observables,
        t_grid,
        tol,
        DENOM_FLOOR,
    )
}

/// [`pair_reality`] with an explicit relative floor on the quotient denominators.
#[allow(clippy::too_many_arguments)]
pub fn pair_reality_with_floor(
    dec: &SpectralDecomposition,
    q: &QMetric,
    a_ta: &StateVector,
    b_tb: &StateVector,
    t_a: f64,
    t_b: f64,
    observables: &[CMatrix],
    t_grid: &[f64],
    tol: f64,
    denom_floor: f64,
) -> Result<RealityReport> {
    if let Some(&bad) = t_grid.iter().find(|&&t| !(t_a <= t && t <= t_b)) {
        return Err(Error::Precondition(format!(
            "grid time {bad} outside [{t_a}, {t_b}]"
        )));
    }
    let mut samples = Vec::with_capacity(t_grid.len());
    let mut max_abs_im: f64 = 0.0;
    for &t in t_grid {
        let a = evolve_a(dec, a_ta, t_a, t)?;
        let b = evolve_b(dec, q, b_tb, t_b, t, AdjointMode::QDagger)?;
        let values = observables
            .iter()
            .map(|o| q_matrix_element_with_floor(q, o, &b, &a, denom_floor))
            .collect::<Result<Vec<_>>>()?;
        for v in &values {
            max_abs_im = max_abs_im.max(v.im.abs());
        }
        samples.push(RealitySample { t, values });
    }
    Ok(RealityReport {
        observables: observables.len(),
        time_points: t_grid.len(),
        max_abs_im,
        pass: max_abs_im <= tol,
        samples,
    })
}

/// Check that the maximizing pair gives real normalized matrix elements for
/// `n_observables` Q-Hermitian observables at every grid time.
pub fn verify_reality(
    dec: &SpectralDecomposition,
    q: &QMetric,
    res: &MaximizerResult,
    n_observables: usize,
    t_grid: &[f64],
    seed: u64,
    tol: f64,
) -> Result<RealityReport> {
    let obs = reality_observables(q, n_observables, seed);
    pair_reality(
        dec,
        q,
        &res.a_star,
        &res.b_star,
        res.t_a,
        res.t_b,
        &obs,
        t_grid,
        tol,
    )
}

/// Restrict H to the top eigenspace with the Q-orthogonal projector and check
/// that H_top - i max_im is Q-Hermitian, i.e. the surviving dynamics is
/// generated by a Q-Hermitian operator.
pub fn effective_generator_check(
    dec: &SpectralDecomposition,
    q: &QMetric,
    res: &MaximizerResult,
    tol: f64,
) -> bool {
    let n = dec.dim();
    let k = res.subspace_dim.min(n);
    let p_top = dec.p.columns(0, k);
    let p_inv_top = dec.p_inv.rows(0, k);
    let projector = p_top * p_inv_top;
    let h = dec.reconstruct();
    let restricted = &projector * h * &projector;
    let generator = restricted - projector * C64::new(0.0, res.max_im);
    is_q_hermitian(q, &generator, tol)
}
