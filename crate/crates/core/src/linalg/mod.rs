//! Dense complex matrix primitives: diagonalization of non-normal matrices,
//! spectral propagators and commutators.
//!
//! Eigenvalues are always reported in a canonical order: decreasing imaginary
//! part, then increasing real part, then by the eigenvector components. The
//! first entries of a [`SpectralDecomposition`] therefore span the max-Im
//! eigenspace.

mod schur;

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Tolerances governing [`eig_decompose`] and the propagators built from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinalgConfig {
    /// Relative reconstruction tolerance for H P = P diag(lambda) and P P^-1 = I.
    pub tol_recon: f64,
    /// Largest admissible condition number of the eigenvector matrix.
    pub cond_ceiling: f64,
    /// Largest admissible |exp(-i lambda t)| in a propagator.
    pub overflow_ceiling: f64,
    /// Relative gap under which two eigenvalue coordinates count as tied.
    pub tie_tol: f64,
}

impl Default for LinalgConfig {
    fn default() -> Self {
        Self {
            tol_recon: 1e-8,
            cond_ceiling: 1e8,
            overflow_ceiling: 1e150,
            tie_tol: 1e-10,
        }
    }
}

/// Eigen-decomposition H = P diag(lambda) P^-1 of a diagonalizable matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    /// Right eigenvectors as columns, unit Euclidean norm.
    pub p: CMatrix,
    pub lambda: Vec<C64>,
    pub p_inv: CMatrix,
    /// 2-norm condition number of `p`.
    pub cond_p: f64,
    pub overflow_ceiling: f64,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    /// Largest imaginary part of the spectrum.
    pub fn max_im(&self) -> f64 {
        self.lambda[0].im
    }

    /// Indices of eigenvalues whose imaginary part is within `deg_tol` of the
    /// maximum. Because of the canonical ordering these form a prefix.
    pub fn top_indices(&self, deg_tol: f64) -> Vec<usize> {
        let m = self.max_im();
        (0..self.dim())
            .filter(|&k| m - self.lambda[k].im <= deg_tol)
            .collect()
    }

    /// P diag(lambda) P^-1
    pub fn reconstruct(&self) -> CMatrix {
        self.spectral_map(|l| l)
    }

    /// P diag(f(lambda)) P^-1
    pub fn spectral_map<F: Fn(C64) -> C64>(&self, f: F) -> CMatrix {
        let mut scaled = self.p.clone();
        for (k, &l) in self.lambda.iter().enumerate() {
            let fk = f(l);
            scaled.column_mut(k).iter_mut().for_each(|c| *c *= fk);
        }
        scaled * &self.p_inv
    }

    /// Coefficients of `v` in the eigenvector basis, P^-1 v.
    pub fn coefficients(&self, v: &CVector) -> CVector {
        &self.p_inv * v
    }
}

pub fn fro_norm(m: &CMatrix) -> f64 {
    m.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Reject non-square or non-finite input.
pub fn check_square_finite(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidMatrix(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Err(Error::InvalidMatrix("empty matrix".into()));
    }
    if m.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    Ok(())
}

fn check_dims(a: &CMatrix, b: &CMatrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::DimMismatch {
            expected: a.nrows(),
            got: b.nrows(),
        });
    }
    Ok(())
}

/// Diagonalize `m`, failing with [`Error::Defective`] when the result is not
/// a trustworthy eigenbasis.
pub fn eig_decompose(m: &CMatrix, cfg: &LinalgConfig) -> Result<SpectralDecomposition> {
    check_square_finite(m)?;
    let n = m.nrows();
    let s = schur::schur(m)?;
    let x = schur::triangular_eigenvectors(&s.t);
    let raw = &s.z * x;

    let mut vecs: Vec<CVector> = (0..n)
        .map(|k| normalize_eigenvector(raw.column(k).into_owned()))
        .collect();
    let mut lambda: Vec<C64> = (0..n).map(|k| s.t[(k, k)]).collect();

    let order = canonical_order(&lambda, &vecs, cfg.tie_tol);
    lambda = order.iter().map(|&k| lambda[k]).collect();
    vecs = order.iter().map(|&k| vecs[k].clone()).collect();
    let p = CMatrix::from_columns(&vecs);

    let sv = p.clone().svd(false, false).singular_values;
    let smin = sv.min();
    let cond_p = if smin > 0.0 {
        sv.max() / smin
    } else {
        f64::INFINITY
    };
    let defective = |residual: f64| Error::Defective {
        residual,
        cond: cond_p,
    };

    if !cond_p.is_finite() || cond_p > cfg.cond_ceiling {
        return Err(defective(f64::NAN));
    }
    let p_inv = p.clone().try_inverse().ok_or_else(|| defective(f64::NAN))?;

    let mut hp_minus_pl = m * &p;
    for (k, &l) in lambda.iter().enumerate() {
        for i in 0..n {
            hp_minus_pl[(i, k)] -= p[(i, k)] * l;
        }
    }
    let residual = fro_norm(&hp_minus_pl);
    if residual > cfg.tol_recon * fro_norm(m).max(f64::MIN_POSITIVE) {
        return Err(defective(residual));
    }
    let inv_residual = fro_norm(&(&p * &p_inv - CMatrix::identity(n, n)));
    if inv_residual > cfg.tol_recon {
        return Err(defective(inv_residual));
    }

    Ok(SpectralDecomposition {
        p,
        lambda,
        p_inv,
        cond_p,
        overflow_ceiling: cfg.overflow_ceiling,
    })
}

/// Unit norm, with the (first) largest-magnitude component real positive.
fn normalize_eigenvector(mut v: CVector) -> CVector {
    let norm = v.norm();
    if norm > 0.0 {
        v.unscale_mut(norm);
    }
    let max = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if let Some(pivot) = v.iter().find(|c| c.norm() >= max * (1.0 - 1e-10)) {
        let phase = pivot.conj() / pivot.norm();
        v.iter_mut().for_each(|c| *c *= phase);
    }
    v
}

fn canonical_order(lambda: &[C64], vecs: &[CVector], tie_tol: f64) -> Vec<usize> {
    let scale = lambda.iter().map(|l| l.norm()).fold(1.0, f64::max);
    let tol = tie_tol * scale;

    // Cluster imaginary parts first so that round-off in Im does not override
    // the secondary ordering by Re.
    let mut idx: Vec<usize> = (0..lambda.len()).collect();
    idx.sort_by(|&a, &b| lambda[b].im.total_cmp(&lambda[a].im).then(a.cmp(&b)));
    let mut im_key = vec![0.0; lambda.len()];
    let mut leader = f64::NAN;
    for &k in &idx {
        if leader.is_nan() || leader - lambda[k].im > tol {
            leader = lambda[k].im;
        }
        im_key[k] = leader;
    }

    idx.sort_by(|&a, &b| {
        im_key[b]
            .total_cmp(&im_key[a])
            .then_with(|| {
                if (lambda[a].re - lambda[b].re).abs() <= tol {
                    Ordering::Equal
                } else {
                    lambda[a].re.total_cmp(&lambda[b].re)
                }
            })
            .then_with(|| compare_components(&vecs[a], &vecs[b]))
            .then(a.cmp(&b))
    });
    idx
}

fn compare_components(a: &CVector, b: &CVector) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        if (x - y).norm() > 1e-12 {
            return y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im));
        }
    }
    Ordering::Equal
}

fn check_growth(dec: &SpectralDecomposition, exponent: f64) -> Result<()> {
    let ceiling = dec.overflow_ceiling;
    if exponent > ceiling.ln() {
        return Err(Error::Overflow {
            magnitude: exponent.exp(),
            ceiling,
        });
    }
    Ok(())
}

/// The propagator exp(-i H t) = P diag(exp(-i lambda t)) P^-1.
pub fn mat_exp_prop(dec: &SpectralDecomposition, t: f64) -> Result<CMatrix> {
    mat_exp_prop_shifted(dec, t, 0.0)
}

/// exp(-shift t) exp(-i H t). With `shift = max Im lambda` and `t >= 0` no
/// factor exceeds one, which is how long evolutions are renormalized.
pub fn mat_exp_prop_shifted(dec: &SpectralDecomposition, t: f64, shift: f64) -> Result<CMatrix> {
    let worst = dec
        .lambda
        .iter()
        .map(|l| (l.im - shift) * t)
        .fold(f64::NEG_INFINITY, f64::max);
    check_growth(dec, worst)?;
    let minus_i = C64::new(0.0, -1.0);
    Ok(dec.spectral_map(|l| ((minus_i * l - shift) * t).exp()))
}

/// Frobenius norm of [A, B].
pub fn commutator_norm(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    check_dims(a, b)?;
    Ok(fro_norm(&(a * b - b * a)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_cmatrix, rng};
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn standard() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 1.)])
    }

    /// Truncated Taylor series of exp(-i H t); test oracle.
    fn taylor_exp(h: &CMatrix, t: f64, terms: usize) -> CMatrix {
        let n = h.nrows();
        let a = h * c(0.0, -t);
        let mut sum = CMatrix::identity(n, n);
        let mut term = CMatrix::identity(n, n);
        for k in 1..terms {
            term = &term * &a / c(k as f64, 0.0);
            sum += &term;
        }
        sum
    }

    #[test]
    fn diagonal_input_is_sorted_by_imaginary_part() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1., 0.), c(0., 2.)]));
        let dec = eig_decompose(&m, &LinalgConfig::default()).unwrap();
        assert_eq!(dec.lambda, vec![c(0., 2.), c(1., 0.)]);
        // columns are the permuted identity
        assert_eq!(
            dec.p.column(0).into_owned(),
            CVector::from_vec(vec![c(0., 0.), c(1., 0.)])
        );
        assert_eq!(
            dec.p.column(1).into_owned(),
            CVector::from_vec(vec![c(1., 0.), c(0., 0.)])
        );
    }

    #[test]
    fn standard_two_level_eigenpair() {
        let dec = eig_decompose(&standard(), &LinalgConfig::default()).unwrap();
        assert_abs_diff_eq!(dec.lambda[0].re, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(dec.lambda[0].im, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(dec.lambda[1].norm(), 0.0, epsilon = 1e-14);
        // solving (H - iI)v = 0 by hand: v = (1, i)/sqrt(2)
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((dec.p[(0, 0)] - c(s, 0.)).norm() < 1e-12);
        assert!((dec.p[(1, 0)] - c(0., s)).norm() < 1e-12);
    }

    #[test]
    fn jordan_block_is_defective() {
        let j = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]);
        let err = eig_decompose(&j, &LinalgConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Defective { .. }), "{err:?}");
    }

    #[test]
    fn non_square_and_non_finite_rejected() {
        let m = CMatrix::zeros(2, 3);
        assert!(matches!(
            eig_decompose(&m, &LinalgConfig::default()),
            Err(Error::InvalidMatrix(_))
        ));
        let mut m = CMatrix::identity(2, 2);
        m[(0, 1)] = c(f64::NAN, 0.0);
        assert!(matches!(
            eig_decompose(&m, &LinalgConfig::default()),
            Err(Error::InvalidMatrix(_))
        ));
    }

    #[test]
    fn degenerate_diagonal_keeps_basis_order() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![c(0., 1.), c(0., 1.), c(0., 0.)]));
        let dec = eig_decompose(&m, &LinalgConfig::default()).unwrap();
        assert_eq!(dec.p, CMatrix::identity(3, 3));
        assert_eq!(dec.top_indices(1e-9), vec![0, 1]);
    }

    #[test]
    fn equal_imaginary_parts_ordered_by_real_part() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1., 1.), c(-2., 0.), c(0., 1.)]));
        let dec = eig_decompose(&m, &LinalgConfig::default()).unwrap();
        assert_eq!(dec.lambda, vec![c(0., 1.), c(1., 1.), c(-2., 0.)]);
    }

    #[test]
    fn propagator_at_zero_is_identity() {
        let dec = eig_decompose(&standard(), &LinalgConfig::default()).unwrap();
        let u = mat_exp_prop(&dec, 0.0).unwrap();
        assert!(fro_norm(&(u - CMatrix::identity(2, 2))) < 1e-14);
    }

    #[test]
    fn propagator_of_diagonal_generator() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![c(0., 0.), c(0., 1.)]));
        let dec = eig_decompose(&m, &LinalgConfig::default()).unwrap();
        let u = mat_exp_prop(&dec, 1.0).unwrap();
        let expect = CMatrix::from_diagonal(&CVector::from_vec(vec![
            c(1., 0.),
            c(std::f64::consts::E, 0.),
        ]));
        assert!(fro_norm(&(u - expect)) < 1e-14);
    }

    #[test]
    fn propagator_matches_taylor_series() {
        let h = standard();
        let dec = eig_decompose(&h, &LinalgConfig::default()).unwrap();
        let u = mat_exp_prop(&dec, 1.0).unwrap();
        assert!(fro_norm(&(u - taylor_exp(&h, 1.0, 20))) < 1e-10);
    }

    #[test]
    fn propagator_overflow_is_reported() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![c(0., 0.), c(0., 1.)]));
        let dec = eig_decompose(&m, &LinalgConfig::default()).unwrap();
        assert!(matches!(
            mat_exp_prop(&dec, 400.0),
            Err(Error::Overflow { .. })
        ));
        // the shifted form renormalizes the growth away
        let u = mat_exp_prop_shifted(&dec, 400.0, 1.0).unwrap();
        assert_abs_diff_eq!(u[(1, 1)].re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn commutator_examples() {
        let mut r = rng(1);
        let a = random_cmatrix(&mut r, 3);
        assert_eq!(commutator_norm(&a, &a).unwrap(), 0.0);

        let d1 = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1., 0.), c(2., 0.)]));
        let d2 = CMatrix::from_diagonal(&CVector::from_vec(vec![c(-3., 1.), c(0.5, 2.)]));
        assert_eq!(commutator_norm(&d1, &d2).unwrap(), 0.0);

        // H H^dag = [[1, -i], [i, 1]], H^dag H = [[0, 0], [0, 2]]
        let h = standard();
        let hh = CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., -1.), c(0., 1.), c(1., 0.)]);
        let hh2 = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., 0.), c(0., 0.), c(2., 0.)]);
        let expect = fro_norm(&(hh - hh2));
        let got = commutator_norm(&h, &h.adjoint()).unwrap();
        assert_abs_diff_eq!(got, expect, epsilon = 1e-14);
        assert_abs_diff_eq!(got, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            got,
            commutator_norm(&h.adjoint(), &h).unwrap(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn commutator_dim_mismatch() {
        let a = CMatrix::identity(2, 2);
        let b = CMatrix::identity(3, 3);
        assert!(matches!(
            commutator_norm(&a, &b),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn random_matrices_are_deterministic() {
        let mut r = rng(9);
        let m = random_cmatrix(&mut r, 12);
        let a = eig_decompose(&m, &LinalgConfig::default()).unwrap();
        let b = eig_decompose(&m, &LinalgConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
