//! Complex Schur factorization A = Z T Z^H by Householder reduction to upper
//! Hessenberg form followed by single-shift QR iteration with Wilkinson shifts.

use num_complex::Complex64 as C64;

use super::CMatrix;
use crate::error::{Error, Result};

pub(crate) struct Schur {
    pub t: CMatrix,
    pub z: CMatrix,
}

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

pub(crate) fn schur(a: &CMatrix) -> Result<Schur> {
    let n = a.nrows();
    let mut t = a.clone();
    let mut z = CMatrix::identity(n, n);
    if n <= 1 {
        return Ok(Schur { t, z });
    }
    hessenberg(&mut t, &mut z);
    qr_iterate(&mut t, &mut z)?;
    Ok(Schur { t, z })
}

fn hessenberg(t: &mut CMatrix, z: &mut CMatrix) {
    let n = t.nrows();
    for k in 0..n.saturating_sub(2) {
        let tail_norm: f64 = (k + 2..n).map(|i| t[(i, k)].norm_sqr()).sum::<f64>();
        if tail_norm == 0.0 {
            continue;
        }
        let x0 = t[(k + 1, k)];
        let norm = (tail_norm + x0.norm_sqr()).sqrt();
        let phase = if x0.norm() > 0.0 {
            x0 / x0.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        let alpha = -phase * norm;

        let mut v: Vec<C64> = (k + 1..n).map(|i| t[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;

        // rows k+1.. from the left
        for j in k..n {
            let mut s = ZERO;
            for (m, vm) in v.iter().enumerate() {
                s += vm.conj() * t[(k + 1 + m, j)];
            }
            s *= beta;
            for (m, vm) in v.iter().enumerate() {
                t[(k + 1 + m, j)] -= vm * s;
            }
        }
        // columns k+1.. from the right, on both T and Z
        for mat in [&mut *t, &mut *z] {
            for i in 0..n {
                let mut s = ZERO;
                for (m, vm) in v.iter().enumerate() {
                    s += mat[(i, k + 1 + m)] * vm;
                }
                s *= beta;
                for (m, vm) in v.iter().enumerate() {
                    mat[(i, k + 1 + m)] -= s * vm.conj();
                }
            }
        }
        t[(k + 1, k)] = alpha;
        for i in k + 2..n {
            t[(i, k)] = ZERO;
        }
    }
}

/// Rotation (c, s) with c real such that [c s; -s* c] [a; b] = [r; 0].
fn givens(a: C64, b: C64) -> (f64, C64) {
    let na = a.norm();
    let nb = b.norm();
    if nb == 0.0 {
        return (1.0, ZERO);
    }
    if na == 0.0 {
        return (0.0, b.conj() / nb);
    }
    let norm = na.hypot(nb);
    let phase = a / na;
    (na / norm, phase * b.conj() / norm)
}

fn wilkinson(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mid = (a + d) * 0.5;
    let mu1 = mid + disc;
    let mu2 = mid - disc;
    if (mu1 - d).norm() <= (mu2 - d).norm() {
        mu1
    } else {
        mu2
    }
}

fn qr_iterate(t: &mut CMatrix, z: &mut CMatrix) -> Result<()> {
    let n = t.nrows();
    let eps = f64::EPSILON;
    let anorm = t
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let max_total = 100 * n.max(10);
    let mut total = 0;
    let mut since_deflation = 0;
    let mut hi = n - 1;

    while hi > 0 {
        let mut lo = hi;
        while lo > 0 {
            let mut scale = t[(lo - 1, lo - 1)].norm() + t[(lo, lo)].norm();
            if scale == 0.0 {
                scale = anorm;
            }
            if t[(lo, lo - 1)].norm() <= eps * scale {
                t[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            since_deflation = 0;
            continue;
        }

        total += 1;
        since_deflation += 1;
        if total > max_total {
            return Err(Error::NoConvergence { iterations: total });
        }

        let mu = if since_deflation % 11 == 0 {
            // exceptional shift to break cycles
            t[(hi, hi)] + C64::new(0.75 * t[(hi, hi - 1)].norm(), 0.25 * t[(hi, hi - 1)].norm())
        } else {
            wilkinson(
                t[(hi - 1, hi - 1)],
                t[(hi - 1, hi)],
                t[(hi, hi - 1)],
                t[(hi, hi)],
            )
        };
        qr_step(t, z, lo, hi, mu);
    }
    Ok(())
}

fn qr_step(t: &mut CMatrix, z: &mut CMatrix, lo: usize, hi: usize, mu: C64) {
    let n = t.nrows();
    for k in lo..=hi {
        t[(k, k)] -= mu;
    }
    let mut rots = Vec::with_capacity(hi - lo);
    for k in lo..hi {
        let (c, s) = givens(t[(k, k)], t[(k + 1, k)]);
        for j in k..n {
            let x = t[(k, j)];
            let y = t[(k + 1, j)];
            t[(k, j)] = x * c + s * y;
            t[(k + 1, j)] = -s.conj() * x + y * c;
        }
        t[(k + 1, k)] = ZERO;
        rots.push((c, s));
    }
    for (idx, k) in (lo..hi).enumerate() {
        let (c, s) = rots[idx];
        for i in 0..=(k + 1) {
            let x = t[(i, k)];
            let y = t[(i, k + 1)];
            t[(i, k)] = x * c + y * s.conj();
            t[(i, k + 1)] = -x * s + y * c;
        }
        for i in 0..n {
            let x = z[(i, k)];
            let y = z[(i, k + 1)];
            z[(i, k)] = x * c + y * s.conj();
            z[(i, k + 1)] = -x * s + y * c;
        }
    }
    for k in lo..=hi {
        t[(k, k)] += mu;
    }
}

/// Right eigenvectors of an upper-triangular T, by back substitution.
/// Column k belongs to the eigenvalue T[k, k]. Near-zero pivots are replaced
/// by eps * |T| so that defective inputs produce (nearly) parallel columns
/// instead of infinities.
pub(crate) fn triangular_eigenvectors(t: &CMatrix) -> CMatrix {
    let n = t.nrows();
    let tnorm = t.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let smin = (f64::EPSILON * tnorm).max(f64::MIN_POSITIVE);
    let mut x = CMatrix::zeros(n, n);
    for k in 0..n {
        x[(k, k)] = C64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut sum = ZERO;
            for j in i + 1..=k {
                sum += t[(i, j)] * x[(j, k)];
            }
            let mut denom = t[(i, i)] - t[(k, k)];
            if denom.norm() < smin {
                denom = C64::new(smin, 0.0);
            }
            x[(i, k)] = -sum / denom;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_cmatrix, rng};

    fn fro(m: &CMatrix) -> f64 {
        m.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn schur_reconstructs_and_is_triangular() {
        let mut r = rng(11);
        for dim in [2, 3, 7, 16, 40] {
            let a = random_cmatrix(&mut r, dim);
            let s = schur(&a).unwrap();
            let recon = &s.z * &s.t * s.z.adjoint();
            assert!(fro(&(recon - &a)) < 1e-12 * fro(&a) * dim as f64);
            let unit = s.z.adjoint() * &s.z - CMatrix::identity(dim, dim);
            assert!(fro(&unit) < 1e-12 * dim as f64);
            for i in 0..dim {
                for j in 0..i {
                    assert_eq!(s.t[(i, j)], ZERO);
                }
            }
        }
    }

    #[test]
    fn givens_annihilates_second_entry() {
        let a = C64::new(0.3, -1.2);
        let b = C64::new(-0.7, 0.4);
        let (c, s) = givens(a, b);
        let low = -s.conj() * a + b * c;
        assert!(low.norm() < 1e-15);
        assert!((c * c + s.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn triangular_eigenvectors_satisfy_eigen_equation() {
        let mut r = rng(5);
        let mut t = random_cmatrix(&mut r, 6);
        for i in 0..6 {
            for j in 0..i {
                t[(i, j)] = ZERO;
            }
        }
        let x = triangular_eigenvectors(&t);
        for k in 0..6 {
            let col = x.column(k).into_owned();
            let res = &t * &col - col.scale(1.0) * t[(k, k)];
            assert!(res.norm() < 1e-12);
        }
    }
}
