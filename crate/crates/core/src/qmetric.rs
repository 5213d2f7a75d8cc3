//! The metric operator Q that makes a diagonalizable H normal, together with
//! Q-inner products and Q-adjoints.
//!
//! With H = P diag(lambda) P^-1 the metric is Q = (P^-1)^H P^-1. The columns of
//! P are then Q-orthonormal, H^{dag_Q} = Q^-1 H^H Q = P diag(conj lambda) P^-1,
//! and [H, H^{dag_Q}] = 0.

use nalgebra::Cholesky;
use num_complex::Complex64 as C64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{fro_norm, CMatrix, CVector, SpectralDecomposition};
use crate::random::{random_hermitian, rng};

/// Default bound on |Q Q^-1 - I|_F.
pub const INVERSE_TOL: f64 = 1e-9;

/// Hermitian positive-definite metric. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct QMetric {
    pub q: CMatrix,
    pub q_inv: CMatrix,
    /// Lower Cholesky factor L with Q = L L^H; its existence is the
    /// positive-definiteness certificate.
    pub chol: CMatrix,
    pub chol_ok: bool,
}

impl QMetric {
    /// The ordinary inner product.
    pub fn identity(dim: usize) -> Self {
        let id = CMatrix::identity(dim, dim);
        Self {
            q: id.clone(),
            q_inv: id.clone(),
            chol: id,
            chol_ok: true,
        }
    }

    /// Certify an arbitrary Hermitian matrix as a metric.
    pub fn from_matrix(q: CMatrix) -> Result<Self> {
        let q = hermitian_part(&q);
        let chol = Cholesky::new(q.clone())
            .ok_or_else(|| Error::IllConditioned("Cholesky factorization failed".into()))?;
        let q_inv = chol.inverse();
        let l = chol.unpack();
        certify(q, hermitian_part(&q_inv), l, INVERSE_TOL)
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

fn certify(q: CMatrix, q_inv: CMatrix, chol: CMatrix, inverse_tol: f64) -> Result<QMetric> {
    let n = q.nrows();
    let residual = fro_norm(&(&q * &q_inv - CMatrix::identity(n, n)));
    if !(residual <= inverse_tol) {
        return Err(Error::IllConditioned(format!(
            "|Q Q^-1 - I| = {residual:.3e} exceeds {inverse_tol:.1e}"
        )));
    }
    Ok(QMetric {
        q,
        q_inv,
        chol,
        chol_ok: true,
    })
}

/// Q = (P^-1)^H P^-1 with the default inverse tolerance.
pub fn build_q(dec: &SpectralDecomposition) -> Result<QMetric> {
    build_q_with_tol(dec, INVERSE_TOL)
}

pub fn build_q_with_tol(dec: &SpectralDecomposition, inverse_tol: f64) -> Result<QMetric> {
    let q = hermitian_part(&(dec.p_inv.adjoint() * &dec.p_inv));
    // (P^-1)^H P^-1 inverts exactly to P P^H, which avoids a second solve.
    let q_inv = hermitian_part(&(&dec.p * dec.p.adjoint()));
    let chol = Cholesky::new(q.clone())
        .ok_or_else(|| Error::IllConditioned("Q is not numerically positive definite".into()))?;
    certify(q, q_inv, chol.unpack(), inverse_tol)
}

fn check_vec(q: &QMetric, v: &CVector) -> Result<()> {
    if v.len() != q.dim() {
        return Err(Error::DimMismatch {
            expected: q.dim(),
            got: v.len(),
        });
    }
    Ok(())
}

fn check_mat(q: &QMetric, m: &CMatrix) -> Result<()> {
    if m.nrows() != q.dim() || m.ncols() != q.dim() {
        return Err(Error::DimMismatch {
            expected: q.dim(),
            got: m.nrows(),
        });
    }
    Ok(())
}

/// <x|_Q y> = x^H Q y
pub fn q_inner(q: &QMetric, x: &CVector, y: &CVector) -> Result<C64> {
    check_vec(q, x)?;
    check_vec(q, y)?;
    Ok(x.dotc(&(&q.q * y)))
}

/// sqrt(<x|_Q x>)
pub fn q_norm(q: &QMetric, x: &CVector) -> Result<f64> {
    Ok(q_inner(q, x, x)?.re.max(0.0).sqrt())
}

/// Angle between the rays through x and y in the Q inner product, computed
/// from the orthogonal residual so that it stays accurate near zero.
pub fn q_angle(q: &QMetric, x: &CVector, y: &CVector) -> Result<f64> {
    let xx = q_inner(q, x, x)?.re;
    if xx <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    let proj = q_inner(q, x, y)? / xx;
    let perp = y - x * proj;
    let along = proj.norm() * xx.sqrt();
    Ok(q_norm(q, &perp)?.atan2(along))
}

/// O^{dag_Q} = Q^-1 O^H Q
pub fn q_adjoint(q: &QMetric, o: &CMatrix) -> Result<CMatrix> {
    check_mat(q, o)?;
    Ok(&q.q_inv * o.adjoint() * &q.q)
}

/// |O^{dag_Q} - O|_F <= tol max(1, |O|_F). Mismatched dimensions are simply
/// not Q-Hermitian.
pub fn is_q_hermitian(q: &QMetric, o: &CMatrix, tol: f64) -> bool {
    match q_adjoint(q, o) {
        Ok(adj) => fro_norm(&(adj - o)) <= tol * fro_norm(o).max(1.0),
        Err(_) => false,
    }
}

/// Seeded random Q-Hermitian observable L^{-H} K L^H with K Hermitian,
/// scaled to unit Frobenius norm of K.
pub fn random_q_hermitian(q: &QMetric, seed: u64) -> CMatrix {
    let n = q.dim();
    let mut r = rng(seed);
    let mut k = random_hermitian(&mut r, n);
    let shift: f64 = r.random_range(-0.5..0.5);
    for i in 0..n {
        k[(i, i)] += shift;
    }
    let norm = fro_norm(&k).max(f64::MIN_POSITIVE);
    k.unscale_mut(norm);
    let l_h = q.chol.adjoint();
    let l_h_inv = l_h
        .clone()
        .solve_upper_triangular(&CMatrix::identity(n, n))
        .expect("Cholesky factor has a nonzero diagonal");
    l_h_inv * k * l_h
}

/// Split O into its Q-Hermitian and anti-Q-Hermitian parts.
pub fn q_split(q: &QMetric, o: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let adj = q_adjoint(q, o)?;
    Ok(((o + &adj).scale(0.5), (o - adj).scale(0.5)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutator_norm, eig_decompose, LinalgConfig};
    use crate::random::{
        random_cmatrix, random_cvector, random_diagonalizable, DiagonalizableParams,
    };

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn standard() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 1.)])
    }

    fn dec_of(h: &CMatrix) -> SpectralDecomposition {
        eig_decompose(h, &LinalgConfig::default()).unwrap()
    }

    #[test]
    fn hermitian_hamiltonian_gives_identity_metric() {
        let mut r = rng(4);
        let h = random_hermitian(&mut r, 5);
        let q = build_q(&dec_of(&h)).unwrap();
        assert!(fro_norm(&(&q.q - CMatrix::identity(5, 5))) < 1e-9);
    }

    #[test]
    fn standard_hamiltonian_becomes_normal() {
        let h = standard();
        let q = build_q(&dec_of(&h)).unwrap();
        let h_dq = q_adjoint(&q, &h).unwrap();
        assert!(commutator_norm(&h, &h_dq).unwrap() < 1e-9);
        // while the ordinary adjoint does not commute
        assert!(commutator_norm(&h, &h.adjoint()).unwrap() > 1.0);
    }

    #[test]
    fn eigenvector_phases_do_not_change_q() {
        let h = random_diagonalizable(&DiagonalizableParams::new(4, 8));
        let dec = dec_of(&h);
        let q1 = build_q(&dec).unwrap();
        let mut rephased = dec.clone();
        for k in 0..4 {
            let phase = C64::from_polar(1.0, 0.7 * k as f64 + 0.3);
            rephased
                .p
                .column_mut(k)
                .iter_mut()
                .for_each(|z| *z *= phase);
            rephased
                .p_inv
                .row_mut(k)
                .iter_mut()
                .for_each(|z| *z /= phase);
        }
        let q2 = build_q(&rephased).unwrap();
        assert!(fro_norm(&(q1.q - q2.q)) < 1e-9);
    }

    #[test]
    fn eigenvectors_are_q_orthonormal() {
        let h = random_diagonalizable(&DiagonalizableParams::new(6, 3));
        let dec = dec_of(&h);
        let q = build_q(&dec).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let vi = dec.p.column(i).into_owned();
                let vj = dec.p.column(j).into_owned();
                let g = q_inner(&q, &vi, &vj).unwrap();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - c(expect, 0.0)).norm() < 1e-9, "({i},{j}) {g}");
            }
        }
    }

    #[test]
    fn identity_metric_is_ordinary_inner_product() {
        let q = QMetric::identity(3);
        let mut r = rng(2);
        let x = random_cvector(&mut r, 3);
        let y = random_cvector(&mut r, 3);
        assert!((q_inner(&q, &x, &y).unwrap() - x.dotc(&y)).norm() < 1e-15);
    }

    #[test]
    fn q_inner_is_conjugate_symmetric_and_positive() {
        let h = random_diagonalizable(&DiagonalizableParams::new(5, 12));
        let q = build_q(&dec_of(&h)).unwrap();
        let mut r = rng(6);
        let x = random_cvector(&mut r, 5);
        let y = random_cvector(&mut r, 5);
        let xy = q_inner(&q, &x, &y).unwrap();
        let yx = q_inner(&q, &y, &x).unwrap();
        assert!((xy - yx.conj()).norm() < 1e-10 * xy.norm().max(1.0));
        let xx = q_inner(&q, &x, &x).unwrap();
        assert!(xx.re > 0.0 && xx.im.abs() < 1e-10 * xx.re);
        let zero = CVector::zeros(5);
        assert_eq!(q_inner(&q, &zero, &zero).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let q = QMetric::identity(3);
        let x = CVector::zeros(2);
        let y = CVector::zeros(3);
        assert!(matches!(
            q_inner(&q, &x, &y),
            Err(Error::DimMismatch { .. })
        ));
        assert!(matches!(
            q_adjoint(&q, &CMatrix::identity(2, 2)),
            Err(Error::DimMismatch { .. })
        ));
        assert!(!is_q_hermitian(&q, &CMatrix::identity(2, 2), 1e-10));
    }

    #[test]
    fn q_adjoint_of_h_has_conjugated_spectrum() {
        let h = random_diagonalizable(&DiagonalizableParams::new(5, 21));
        let dec = dec_of(&h);
        let q = build_q(&dec).unwrap();
        let adj = q_adjoint(&q, &h).unwrap();
        let expect = dec.spectral_map(|l| l.conj());
        assert!(fro_norm(&(adj - expect)) < 1e-9);
    }

    #[test]
    fn q_adjoint_defining_property() {
        let h = random_diagonalizable(&DiagonalizableParams::new(4, 30));
        let q = build_q(&dec_of(&h)).unwrap();
        let mut r = rng(31);
        let o = random_cmatrix(&mut r, 4);
        let x = random_cvector(&mut r, 4);
        let y = random_cvector(&mut r, 4);
        let adj = q_adjoint(&q, &o).unwrap();
        let lhs = q_inner(&q, &(&adj * &x), &y).unwrap();
        let rhs = q_inner(&q, &x, &(&o * &y)).unwrap();
        assert!((lhs - rhs).norm() < 1e-9 * lhs.norm().max(1.0));
        // involution
        let back = q_adjoint(&q, &adj).unwrap();
        assert!(fro_norm(&(back - o)) < 1e-9);
    }

    #[test]
    fn q_hermiticity_examples() {
        let id = QMetric::identity(2);
        let d = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1., 0.), c(2., 0.)]));
        assert!(is_q_hermitian(&id, &d, 1e-10));
        let j = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]);
        assert!(!is_q_hermitian(&id, &j, 1e-10));

        let h = random_diagonalizable(&DiagonalizableParams::new(5, 40));
        let q = build_q(&dec_of(&h)).unwrap();
        let mut r = rng(41);
        let x = random_cmatrix(&mut r, 5);
        let sym = (&x + q_adjoint(&q, &x).unwrap()).scale(0.5);
        assert!(is_q_hermitian(&q, &sym, 1e-10));
        assert!(!is_q_hermitian(&q, &x, 1e-10));
    }

    #[test]
    fn random_q_hermitian_is_deterministic_and_hermitian() {
        let id = QMetric::identity(4);
        let o = random_q_hermitian(&id, 5);
        assert!(fro_norm(&(&o - o.adjoint())) < 1e-14);
        assert_eq!(o, random_q_hermitian(&id, 5));
        assert_ne!(o, random_q_hermitian(&id, 6));

        let h = random_diagonalizable(&DiagonalizableParams::new(6, 50));
        let q = build_q(&dec_of(&h)).unwrap();
        for seed in 0..10 {
            let o = random_q_hermitian(&q, seed);
            assert!(is_q_hermitian(&q, &o, 1e-10));
            let spec = dec_of(&o);
            let scale = spec.lambda.iter().map(|l| l.norm()).fold(1.0, f64::max);
            for l in &spec.lambda {
                assert!(l.im.abs() < 1e-8 * scale, "{l}");
            }
        }
    }

    #[test]
    fn q_hermitian_and_anti_parts_commute() {
        let h = random_diagonalizable(&DiagonalizableParams::new(7, 60));
        let q = build_q(&dec_of(&h)).unwrap();
        let (herm, anti) = q_split(&q, &h).unwrap();
        let hn = fro_norm(&h);
        assert!(commutator_norm(&herm, &anti).unwrap() <= 1e-8 * hn * hn);
        assert!(fro_norm(&(&herm + &anti - &h)) < 1e-12 * hn);
    }

    #[test]
    fn q_angle_of_parallel_and_orthogonal_rays() {
        let h = random_diagonalizable(&DiagonalizableParams::new(3, 70));
        let dec = dec_of(&h);
        let q = build_q(&dec).unwrap();
        let v0 = dec.p.column(0).into_owned();
        let v1 = dec.p.column(1).into_owned();
        assert!(q_angle(&q, &v0, &(&v0 * c(-2.0, 3.0))).unwrap() < 1e-12);
        let right = q_angle(&q, &v0, &v1).unwrap();
        assert!((right - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn non_positive_matrix_is_rejected() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1., 0.), c(-1., 0.)]));
        assert!(matches!(
            QMetric::from_matrix(m),
            Err(Error::IllConditioned(_))
        ));
    }
}
