//! Collapse of generic states onto the max-Im eigencomponents.
//!
//! In the Q-orthonormal eigenbasis the coefficients of |A(t)> evolve as
//! c_i(t) = c_i(0) exp(-i lambda_i t), so after Q-renormalization the weight
//! of component i relative to the top subspace decays like
//! exp(-2 (max Im - Im lambda_i) t). Weights are evaluated in log space,
//! which keeps them exact down to the floating-point underflow limit.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{CVector, SpectralDecomposition};
use crate::maximization::default_deg_tol;
use crate::qmetric::{q_norm, QMetric};
use crate::random::{random_cvector, rng};

/// Weights at or below this are excluded from rate fits.
pub const FIT_WEIGHT_FLOOR: f64 = 1e-280;
const MIN_FIT_POINTS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalSeries {
    pub t_grid: Vec<f64>,
    /// weights[k][i]: Q-norm fraction of eigencomponent i at t_grid[k].
    pub weights: Vec<Vec<f64>>,
    /// Total weight of the max-Im subspace.
    pub fidelity_top: Vec<f64>,
    /// Total weight outside the max-Im subspace (1 - fidelity_top, without
    /// the cancellation).
    pub defect: Vec<f64>,
    /// Membership of each eigencomponent in the max-Im subspace.
    pub top: Vec<bool>,
    pub im_lambda: Vec<f64>,
}

/// Uniform superposition with a seeded relative jitter of 1e-3.
pub fn generic_state(dim: usize, seed: u64) -> CVector {
    let mut r = rng(seed);
    let jitter = random_cvector(&mut r, dim);
    let base = 1.0 / (dim as f64).sqrt();
    jitter.map(|z| num_complex::Complex64::new(base, 0.0) + z * (1e-3 * base))
}

fn log_weights(c0: &CVector, dec: &SpectralDecomposition, t: f64) -> Vec<f64> {
    let m = dec.max_im();
    c0.iter()
        .zip(&dec.lambda)
        .map(|(c, l)| {
            let n2 = c.norm_sqr();
            if n2 == 0.0 {
                f64::NEG_INFINITY
            } else {
                n2.ln() + 2.0 * (l.im - m) * t
            }
        })
        .collect()
}

fn normalize_log(lw: &[f64]) -> Vec<f64> {
    let peak = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = lw.iter().map(|&x| (x - peak).exp()).sum();
    let lse = peak + sum.ln();
    lw.iter().map(|&x| (x - lse).exp()).collect()
}

/// Eigencomponent weights of the Q-renormalized evolved state along `t_grid`.
pub fn survival_fractions(
    dec: &SpectralDecomposition,
    q: &QMetric,
    psi0: &CVector,
    t_grid: &[f64],
) -> Result<SurvivalSeries> {
    survival_fractions_with_tol(dec, q, psi0, t_grid, default_deg_tol(dec))
}

pub fn survival_fractions_with_tol(
    dec: &SpectralDecomposition,
    q: &QMetric,
    psi0: &CVector,
    t_grid: &[f64],
    deg_tol: f64,
) -> Result<SurvivalSeries> {
    if psi0.len() != dec.dim() {
        return Err(Error::DimMismatch {
            expected: dec.dim(),
            got: psi0.len(),
        });
    }
    if q_norm(q, psi0)? == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let c0 = dec.coefficients(psi0);
    let top_idx = dec.top_indices(deg_tol);
    let top: Vec<bool> = (0..dec.dim()).map(|i| top_idx.contains(&i)).collect();

    let mut weights = Vec::with_capacity(t_grid.len());
    let mut fidelity_top = Vec::with_capacity(t_grid.len());
    let mut defect = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let w = normalize_log(&log_weights(&c0, dec, t));
        let (mut inside, mut outside) = (0.0, 0.0);
        for (wi, &is_top) in w.iter().zip(&top) {
            if is_top {
                inside += wi;
            } else {
                outside += wi;
            }
        }
        fidelity_top.push(inside);
        defect.push(outside);
        weights.push(w);
    }
    Ok(SurvivalSeries {
        t_grid: t_grid.to_vec(),
        weights,
        fidelity_top,
        defect,
        top,
        im_lambda: dec.lambda.iter().map(|l| l.im).collect(),
    })
}

/// Least-squares slope of ln(weight_i / fidelity_top) over the last half of
/// the grid. For a generic start this is -2 (max Im - Im lambda_i).
pub fn decay_rate_fit(series: &SurvivalSeries, component: usize) -> Result<f64> {
    decay_rate_fit_with_floor(series, component, FIT_WEIGHT_FLOOR)
}

/// [`decay_rate_fit`] ignoring grid points whose weight is at or below `floor`.
pub fn decay_rate_fit_with_floor(
    series: &SurvivalSeries,
    component: usize,
    floor: f64,
) -> Result<f64> {
    let dim = series.top.len();
    if component >= dim {
        return Err(Error::Precondition(format!(
            "component {component} out of range for dimension {dim}"
        )));
    }
    if series.top[component] {
        return Err(Error::Precondition(format!(
            "component {component} belongs to the max-Im subspace"
        )));
    }
    let start = series.t_grid.len() / 2;
    let points: Vec<(f64, f64)> = (start..series.t_grid.len())
        .filter_map(|k| {
            let w = series.weights[k][component];
            let f = series.fidelity_top[k];
            (w > floor && f > 0.0).then(|| (series.t_grid[k], (w / f).ln()))
        })
        .collect();
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            usable: points.len(),
            required: MIN_FIT_POINTS,
        });
    }
    let n = points.len() as f64;
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_y)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_t).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData {
            usable: 1,
            required: MIN_FIT_POINTS,
        });
    }
    Ok(sxy / sxx)
}

/// Weight outside the max-Im subspace at time t.
pub fn hermiticity_defect(
    dec: &SpectralDecomposition,
    q: &QMetric,
    psi0: &CVector,
    t: f64,
) -> Result<f64> {
    Ok(survival_fractions(dec, q, psi0, &[t])?.defect[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{evolve_a_renormalized, StateVector};
    use crate::linalg::{eig_decompose, CMatrix, LinalgConfig};
    use crate::qmetric::build_q;
    use crate::random::{random_diagonalizable, random_hermitian, DiagonalizableParams};
    use num_complex::Complex64 as C64;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn setup(h: &CMatrix) -> (SpectralDecomposition, QMetric) {
        let dec = eig_decompose(h, &LinalgConfig::default()).unwrap();
        let q = build_q(&dec).unwrap();
        (dec, q)
    }

    fn diag(d: &[C64]) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_vec(d.to_vec()))
    }

    fn grid(t_end: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect()
    }

    fn half_half() -> CVector {
        CVector::from_vec(vec![c(FRAC_1_SQRT_2, 0.), c(FRAC_1_SQRT_2, 0.)])
    }

    #[test]
    fn top_eigenvector_stays_on_top() {
        let h = random_diagonalizable(&DiagonalizableParams::new(4, 2));
        let (dec, q) = setup(&h);
        let v = dec.p.column(0).into_owned();
        let s = survival_fractions(&dec, &q, &v, &grid(5.0, 11)).unwrap();
        for (f, d) in s.fidelity_top.iter().zip(&s.defect) {
            assert!((f - 1.0).abs() < 1e-9);
            assert!(*d < 1e-9);
        }
        assert!(hermiticity_defect(&dec, &q, &v, 2.0).unwrap() < 1e-9);
    }

    #[test]
    fn hermitian_weights_are_constant() {
        let mut r = rng(3);
        let h = random_hermitian(&mut r, 4);
        let (dec, q) = setup(&h);
        let psi = generic_state(4, 1);
        let s = survival_fractions(&dec, &q, &psi, &grid(10.0, 21)).unwrap();
        for row in &s.weights {
            for (a, b) in row.iter().zip(&s.weights[0]) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn two_level_closed_form() {
        let (dec, q) = setup(&diag(&[c(0., 0.), c(0., 1.)]));
        let ts = grid(4.0, 9);
        let s = survival_fractions(&dec, &q, &half_half(), &ts).unwrap();
        for (k, &t) in ts.iter().enumerate() {
            // component 0 of the sorted basis is e2 (lambda = i)
            let expect = (2.0 * t).exp() / (1.0 + (2.0 * t).exp());
            assert!((s.weights[k][0] - expect).abs() < 1e-12);
            let sum: f64 = s.weights[k].iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
        let d = hermiticity_defect(&dec, &q, &half_half(), 3.0).unwrap();
        assert!((d - 1.0 / (1.0 + 6f64.exp())).abs() < 1e-12);
        let d0 = hermiticity_defect(&dec, &q, &half_half(), 0.0).unwrap();
        assert!((d0 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn weights_match_explicit_renormalized_evolution() {
        let h = random_diagonalizable(&DiagonalizableParams::new(5, 14));
        let (dec, q) = setup(&h);
        let psi = generic_state(5, 2);
        let ts = grid(6.0, 7);
        let s = survival_fractions(&dec, &q, &psi, &ts).unwrap();
        let a0 = StateVector::a(psi).unwrap();
        for (k, &t) in ts.iter().enumerate() {
            let a = evolve_a_renormalized(&dec, &a0, 0.0, t).unwrap();
            let coeff = dec.coefficients(a.amps());
            let total: f64 = coeff.iter().map(|z| z.norm_sqr()).sum();
            for i in 0..5 {
                assert!((coeff[i].norm_sqr() / total - s.weights[k][i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn fitted_rates() {
        let (dec, q) = setup(&diag(&[c(0., 0.), c(0., 1.)]));
        let s = survival_fractions(&dec, &q, &half_half(), &grid(10.0, 101)).unwrap();
        let slope = decay_rate_fit(&s, 1).unwrap();
        assert!((slope + 2.0).abs() < 0.1);
        assert!(matches!(decay_rate_fit(&s, 0), Err(Error::Precondition(_))));

        let (dec, q) = setup(&diag(&[c(0., 0.), c(0., 0.5), c(0., 1.)]));
        let psi = generic_state(3, 0);
        let s = survival_fractions(&dec, &q, &psi, &grid(20.0, 201)).unwrap();
        // sorted: [i, i/2, 0]
        assert!((decay_rate_fit(&s, 2).unwrap() + 2.0).abs() < 0.1);
        assert!((decay_rate_fit(&s, 1).unwrap() + 1.0).abs() < 0.05);
    }

    #[test]
    fn fit_needs_enough_points() {
        let (dec, q) = setup(&diag(&[c(0., 0.), c(0., 1.)]));
        let s = survival_fractions(&dec, &q, &half_half(), &grid(1.0, 5)).unwrap();
        assert!(matches!(
            decay_rate_fit(&s, 1),
            Err(Error::InsufficientData { .. })
        ));
        // everything underflows far out
        let far: Vec<f64> = (0..10).map(|k| 1e4 + k as f64).collect();
        let s = survival_fractions(&dec, &q, &half_half(), &far).unwrap();
        assert!(matches!(
            decay_rate_fit(&s, 1),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn fidelity_is_monotone_for_generic_start() {
        let h = random_diagonalizable(&DiagonalizableParams::new(6, 40));
        let (dec, q) = setup(&h);
        let s = survival_fractions(&dec, &q, &generic_state(6, 4), &grid(30.0, 61)).unwrap();
        for w in s.fidelity_top.windows(2) {
            assert!(w[1] >= w[0] - 1e-6);
        }
    }

    #[test]
    fn zero_state_rejected() {
        let (dec, q) = setup(&diag(&[c(0., 0.), c(0., 1.)]));
        assert!(matches!(
            survival_fractions(&dec, &q, &CVector::zeros(2), &[0.0]),
            Err(Error::ZeroNorm)
        ));
    }
}
